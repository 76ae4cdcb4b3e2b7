//! Value-at-Risk, Expected Shortfall and backtest e-statistics, with a
//! sequential backtest driven by a betting e-process.

use crate::betting::Strategy;
use crate::core::EValue;
use crate::eprocess::{BettingProcess, EProcessState};
use crate::error::{check_open_alpha, domain, Error, Result};
use crate::evariables::DiscreteDist;
use serde::{Deserialize, Serialize};

/// Levels are open-unit; reuse the alpha check under a clearer name.
fn check_beta(beta: f64) -> Result<()> {
    check_open_alpha(beta).map_err(|_| domain(format!("beta must lie in (0, 1), got {beta}")))
}

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::Empty("sample"));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(domain("sample contains NaN"));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// `ceil(beta n)`, guarded against products that land a rounding error above an integer.
fn order_index(beta: f64, n: usize) -> usize {
    let x = beta * n as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-12 * x.max(1.0) { r } else { x.ceil() };
    (k as usize).clamp(1, n)
}

/// Left `beta`-quantile of the empirical law: the `ceil(beta n)`-th order statistic.
pub fn var_beta(sample: &[f64], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let s = sorted(sample)?;
    Ok(s[order_index(beta, s.len()) - 1])
}

/// `(1 / (1 - beta)) * integral over (beta, 1] of the empirical quantile function`.
pub fn es_beta(sample: &[f64], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let s = sorted(sample)?;
    let n = s.len() as f64;
    let k = order_index(beta, s.len());
    // Order statistic i covers levels ((i-1)/n, i/n]; the k-th is cut at beta.
    let mut total = s[k - 1] * (k as f64 / n - beta).max(0.0);
    total += s[k..].iter().sum::<f64>() / n;
    Ok(total / (1.0 - beta))
}

pub fn var_beta_dist(dist: &DiscreteDist, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let mut cum = 0.0;
    for (x, m) in dist.atoms() {
        cum += m;
        if cum >= beta * (1.0 - 1e-12) {
            return Ok(*x);
        }
    }
    Ok(dist.atoms().last().unwrap().0)
}

pub fn es_beta_dist(dist: &DiscreteDist, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let mut lo = 0.0;
    let mut total = 0.0;
    for (x, m) in dist.atoms() {
        let hi = lo + m;
        total += x * (hi.min(1.0) - lo.max(beta)).max(0.0);
        lo = hi;
    }
    Ok(total / (1.0 - beta))
}

/// One step of a forecast stream; forecasts are issued before `x` is seen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub t: u64,
    pub x: f64,
    pub r: f64,
    #[serde(default)]
    pub z: Option<f64>,
}

/// Loss functions for the expected-loss statistic, all bounded below by zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossFunction {
    Identity,
    Square,
    Exceedance { threshold: f64 },
}

impl LossFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            LossFunction::Identity => x,
            LossFunction::Square => x * x,
            LossFunction::Exceedance { threshold } => (x - threshold).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EStatSpec {
    Mean,
    /// `r` forecasts the variance, `z` the mean.
    VarianceMean,
    Quantile { beta: f64 },
    ExpectedLoss { a: f64, loss: LossFunction },
    /// `r` forecasts ES, `z` forecasts VaR.
    EsVar { beta: f64 },
}

/// `num / den` with `0/0 = 1` and `x/0 = inf`.
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 { 1.0 } else { f64::INFINITY }
    } else {
        num / den
    }
}

fn need_z(rec: &ForecastRecord) -> Result<f64> {
    rec.z.ok_or_else(|| domain(format!("record {} lacks the auxiliary forecast z", rec.t)))
}

pub fn e_stat(rec: &ForecastRecord, spec: &EStatSpec) -> Result<EValue> {
    let ForecastRecord { x, r, .. } = *rec;
    if x.is_nan() || r.is_nan() {
        return Err(domain("NaN in forecast record"));
    }
    let e = match *spec {
        EStatSpec::Mean => {
            if x < 0.0 || r < 0.0 {
                return Err(domain("the mean statistic needs x >= 0 and r >= 0"));
            }
            ratio(x, r)
        }
        EStatSpec::VarianceMean => {
            if r < 0.0 {
                return Err(domain("variance forecast must be nonnegative"));
            }
            ratio((x - need_z(rec)?).powi(2), r)
        }
        EStatSpec::Quantile { beta } => {
            check_beta(beta)?;
            if x > r { 1.0 / (1.0 - beta) } else { 0.0 }
        }
        EStatSpec::ExpectedLoss { a, loss } => {
            if r < a {
                return Err(domain(format!("forecast {r} below the loss floor {a}")));
            }
            let l = loss.eval(x);
            if l < a {
                return Err(domain(format!("loss {l} below its floor {a}")));
            }
            ratio(l - a, r - a)
        }
        EStatSpec::EsVar { beta } => {
            check_beta(beta)?;
            let z = need_z(rec)?;
            if r < z {
                f64::INFINITY
            } else {
                ratio((x - z).max(0.0), (1.0 - beta) * (r - z))
            }
        }
    };
    EValue::new(e)
}

/// Default betting rule for backtests.
pub fn default_strategy() -> Strategy {
    Strategy::EmpiricallyAdaptive { gamma: 0.5 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Backtest {
    pub e_values: Vec<f64>,
    pub states: Vec<EProcessState>,
}

impl Backtest {
    /// First step (1-based) at which wealth reaches `1/alpha`.
    pub fn first_rejection(&self, alpha: f64) -> Result<Option<u64>> {
        check_open_alpha(alpha)?;
        let cut = (1.0 / alpha).ln();
        Ok(self.states.iter().find(|s| s.log_wealth() >= cut).map(|s| s.t()))
    }

    pub fn final_state(&self) -> EProcessState {
        self.states.last().copied().unwrap_or_default()
    }
}

/// Feeds per-step backtest e-statistics into a betting e-process.
pub fn backtest(records: &[ForecastRecord], spec: &EStatSpec, strategy: &Strategy) -> Result<Backtest> {
    let mut process = BettingProcess::new(strategy)?;
    let mut e_values = Vec::with_capacity(records.len());
    let mut states = Vec::with_capacity(records.len());
    for rec in records {
        let e = e_stat(rec, spec)?.get();
        e_values.push(e);
        states.push(*process.step(e)?);
    }
    Ok(Backtest { e_values, states })
}
