//! Value types, p/e calibration, Markov-type tests, the Jeffreys evidence
//! grid and the post-hoc decision rule.

use crate::error::{check_alpha, check_unit, domain, Error, Result};
use crate::numeric::{bisect_threshold, harmonic};
use serde::{Deserialize, Serialize};

/// Nonnegative extended-real evidence score.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EValue(f64);

impl EValue {
    pub fn new(value: f64) -> Result<Self> {
        if value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(domain(format!("e-value must be nonnegative, got {value}")))
        }
    }

    pub const ONE: EValue = EValue(1.0);
    pub const INFINITY: EValue = EValue(f64::INFINITY);

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Nonnegative significance score. Values above one are accepted and
/// treated as one by tests.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PValue(f64);

impl PValue {
    pub fn new(value: f64) -> Result<Self> {
        if value >= 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(domain(format!("p-value must be finite and nonnegative, got {value}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn capped(self) -> f64 {
        self.0.min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CalibratorSpec {
    Power { kappa: f64 },
    Mixture,
    Linear2,
    Sqrtinv,
    Neglog,
    AllOrNothing { alpha: f64 },
    BhyTruncation { k: usize, alpha: f64 },
}

impl CalibratorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CalibratorSpec::Power { kappa } if !(kappa > 0.0 && kappa < 1.0) => {
                Err(domain(format!("kappa must lie in (0, 1), got {kappa}")))
            }
            CalibratorSpec::AllOrNothing { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                Err(domain(format!("alpha must lie in (0, 1), got {alpha}")))
            }
            CalibratorSpec::BhyTruncation { k, alpha } => {
                if k == 0 {
                    Err(domain("K must be positive"))
                } else if !(alpha > 0.0 && alpha < 1.0) {
                    Err(domain(format!("alpha must lie in (0, 1), got {alpha}")))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// The calibrator itself, `f(p)`, for `p >= 0`. Infinite at zero where
    /// the kind is unbounded, zero above one.
    pub fn eval(&self, p: f64) -> f64 {
        if p > 1.0 {
            return 0.0;
        }
        match *self {
            CalibratorSpec::Power { kappa } => {
                if p == 0.0 {
                    f64::INFINITY
                } else {
                    kappa * p.powf(kappa - 1.0)
                }
            }
            CalibratorSpec::Mixture => mixture(p),
            CalibratorSpec::Linear2 => 2.0 * (1.0 - p),
            CalibratorSpec::Sqrtinv => {
                if p == 0.0 {
                    f64::INFINITY
                } else {
                    p.powf(-0.5) - 1.0
                }
            }
            CalibratorSpec::Neglog => {
                if p == 0.0 {
                    f64::INFINITY
                } else {
                    -p.ln()
                }
            }
            CalibratorSpec::AllOrNothing { alpha } => {
                if p <= alpha {
                    1.0 / alpha
                } else {
                    0.0
                }
            }
            CalibratorSpec::BhyTruncation { k, alpha } => {
                let x = if p == 0.0 {
                    f64::INFINITY
                } else {
                    alpha / (harmonic(k) * p)
                };
                boost_truncation(x, k) / alpha
            }
        }
    }

    /// Generalised inverse `sup{p in [0, 1] : f(p) >= x}`, with `sup {} = 0`.
    pub fn inverse(&self, x: f64) -> f64 {
        if x <= self.eval(1.0) {
            return 1.0;
        }
        if x == f64::INFINITY {
            return 0.0;
        }
        match *self {
            CalibratorSpec::Power { kappa } => (x / kappa).powf(1.0 / (kappa - 1.0)).min(1.0),
            CalibratorSpec::Mixture => {
                // f is continuous and decreasing, so {f >= x} is [0, p*];
                // search on s = -log p for relative accuracy at tiny p.
                let s = bisect_threshold(|s| mixture((-s).exp()) >= x, 0.0, 745.0, 1e-13);
                (-s).exp()
            }
            CalibratorSpec::Linear2 => (1.0 - x / 2.0).max(0.0),
            CalibratorSpec::Sqrtinv => (1.0 + x).powi(-2),
            CalibratorSpec::Neglog => (-x).exp(),
            CalibratorSpec::AllOrNothing { alpha } => {
                if x <= 1.0 / alpha {
                    alpha
                } else {
                    0.0
                }
            }
            CalibratorSpec::BhyTruncation { k, alpha } => {
                // f = K / (j alpha) on ((j-1) alpha / (K l), j alpha / (K l)].
                let jmax = ((k as f64) / (x * alpha)).floor().min(k as f64);
                if jmax < 1.0 {
                    0.0
                } else {
                    jmax * alpha / (k as f64 * harmonic(k))
                }
            }
        }
    }
}

fn mixture(p: f64) -> f64 {
    if p == 0.0 {
        return f64::INFINITY;
    }
    let h = p - 1.0;
    if h.abs() < 1e-4 {
        // Series of (1 - p + p log p) / (p log(p)^2) around p = 1.
        return 0.5 - h / 6.0 + h * h / 12.0;
    }
    let lp = p.ln();
    (1.0 - p + p * lp) / (p * lp * lp)
}

/// The truncation `T(x) = K / ceil(K / x)` for `x >= 1`, zero below one,
/// and `T(inf) = K`.
pub fn boost_truncation(x: f64, k: usize) -> f64 {
    let kf = k as f64;
    if !(x >= 1.0) {
        0.0
    } else if x == f64::INFINITY {
        kf
    } else {
        kf / (kf / x).ceil()
    }
}

pub fn calibrate_p_to_e(p: PValue, spec: &CalibratorSpec) -> Result<EValue> {
    spec.validate()?;
    Ok(EValue(spec.eval(p.0)))
}

pub fn calibrate_e_to_p(e: EValue) -> PValue {
    PValue(if e.0 == f64::INFINITY { 0.0 } else { (1.0 / e.0).min(1.0) })
}

pub fn markov_test(e: EValue, alpha: f64) -> Result<bool> {
    check_alpha(alpha)?;
    Ok(e.0 >= 1.0 / alpha)
}

pub fn randomized_markov_test(e: EValue, alpha: f64, u: f64) -> Result<bool> {
    check_alpha(alpha)?;
    check_unit("u", u)?;
    Ok(e.0 >= u / alpha)
}

/// Rejects at the first prefix length `m` whose running mean reaches `1/alpha`.
/// Returns the decision and that prefix length.
pub fn exchangeable_markov_test(es: &[f64], alpha: f64) -> Result<(bool, Option<usize>)> {
    check_alpha(alpha)?;
    if es.is_empty() {
        return Err(Error::Empty("e-value sequence"));
    }
    crate::error::check_evalues(es)?;
    let mut sum = 0.0;
    for (i, e) in es.iter().enumerate() {
        sum += e;
        if sum / (i + 1) as f64 >= 1.0 / alpha {
            return Ok((true, Some(i + 1)));
        }
    }
    Ok((false, None))
}

pub fn eumi_test(first: EValue, es: &[f64], alpha: f64, u: f64) -> Result<bool> {
    check_alpha(alpha)?;
    check_unit("u", u)?;
    crate::error::check_evalues(es)?;
    if first.0 >= u / alpha {
        return Ok(true);
    }
    let mut sum = 0.0;
    for (i, e) in es.iter().enumerate() {
        sum += e;
        if sum / (i + 1) as f64 >= 1.0 / alpha {
            return Ok(true);
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceGrid {
    pub breakpoints: Vec<f64>,
    pub labels: Vec<String>,
}

impl Default for SignificanceGrid {
    fn default() -> Self {
        Self {
            breakpoints: vec![1.0, 3.16, 10.0, 31.6, 100.0],
            labels: [
                "null hypothesis is supported",
                "no more than a bare mention",
                "substantial",
                "strong",
                "very strong",
                "decisive",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

impl SignificanceGrid {
    pub fn new(breakpoints: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != breakpoints.len() + 1 {
            return Err(Error::Dimension { expected: breakpoints.len() + 1, got: labels.len() });
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(domain("breakpoints must be strictly ascending"));
        }
        Ok(Self { breakpoints, labels })
    }
}

/// Category of `e`; values on a breakpoint belong to the lower category.
pub fn jeffreys_label(e: EValue, grid: &SignificanceGrid) -> &str {
    let idx = grid.breakpoints.iter().filter(|b| **b < e.0).count();
    &grid.labels[idx]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTable {
    pub null_losses: Vec<f64>,
    pub gamma: f64,
}

impl LossTable {
    pub fn new(null_losses: Vec<f64>, gamma: f64) -> Result<Self> {
        if null_losses.is_empty() {
            return Err(Error::Empty("loss table"));
        }
        if null_losses.iter().any(|l| !(*l >= 0.0)) || null_losses.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(domain("null losses must be nonnegative and strictly increasing"));
        }
        if !(gamma > 0.0) {
            return Err(domain(format!("budget must be positive, got {gamma}")));
        }
        Ok(Self { null_losses, gamma })
    }
}

/// The most aggressive decision whose null loss is covered by `gamma * e`.
pub fn posthoc_decision(e: EValue, losses: &LossTable) -> Result<usize> {
    let budget = losses.gamma * e.0;
    let budget = if budget.is_nan() { 0.0 } else { budget };
    if losses.null_losses[0] > budget {
        return Err(Error::Infeasible(format!(
            "safest decision has null loss {} above budget {budget}",
            losses.null_losses[0]
        )));
    }
    Ok(losses.null_losses.iter().rposition(|l| *l <= budget).unwrap_or(0))
}
