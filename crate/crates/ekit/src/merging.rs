//! Merging functions for e-values and p-values, and p/e combiners.

use crate::betting::{bet_factor, grow, AdaptiveLambda, Strategy};
use crate::core::CalibratorSpec;
use crate::error::{check_evalues, check_open_alpha, check_pvalues, check_unit, domain, Error, Result};
use crate::numeric::{argsort_asc, bisect_threshold, harmonic};
use serde::{Deserialize, Serialize};

const EPS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EMergeRule {
    /// `sum_k w_k e_k + w_{K+1}`; the last weight multiplies the constant one.
    WeightedMean { weights: Vec<f64> },
    /// Average over all size-`n` subsets of the product of their e-values.
    Ustat { n: usize },
    Product,
    Martingale { strategy: Strategy },
    EmpiricallyAdaptive { gamma: f64 },
    HitAndStop { alpha: f64, inner: Box<Strategy> },
}

pub fn merge_e(es: &[f64], rule: &EMergeRule) -> Result<f64> {
    check_evalues(es)?;
    let k = es.len();
    match rule {
        EMergeRule::WeightedMean { weights } => {
            if weights.len() != k + 1 {
                return Err(Error::Dimension { expected: k + 1, got: weights.len() });
            }
            if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(domain("weights must be nonnegative and sum to one"));
            }
            let mut total = weights[k];
            for (w, e) in weights.iter().zip(es) {
                if *w > 0.0 {
                    total += w * e;
                }
            }
            Ok(total)
        }
        EMergeRule::Ustat { n } => ustat(es, *n),
        EMergeRule::Product => Ok(es.iter().fold(1.0, |acc, e| grow(acc, *e))),
        EMergeRule::Martingale { strategy } => martingale(es, strategy),
        EMergeRule::EmpiricallyAdaptive { gamma } => {
            martingale(es, &Strategy::EmpiricallyAdaptive { gamma: *gamma })
        }
        EMergeRule::HitAndStop { alpha, inner } => {
            martingale(es, &Strategy::HitAndStop { alpha: *alpha, inner: inner.clone() })
        }
    }
}

fn martingale(es: &[f64], strategy: &Strategy) -> Result<f64> {
    let mut bettor = strategy.start()?;
    let mut wealth = 1.0;
    for &e in es {
        wealth = grow(wealth, bet_factor(bettor.lambda(), e));
        bettor.observe(e, wealth);
    }
    Ok(wealth)
}

/// Elementary symmetric mean `e_n(es) / C(K, n)` by the usual recursion.
fn ustat(es: &[f64], n: usize) -> Result<f64> {
    let k = es.len();
    if n == 0 || n > k {
        return Err(domain(format!("U-statistic order must lie in 1..={k}, got {n}")));
    }
    if es.iter().any(|e| e.is_infinite()) {
        return Ok(f64::INFINITY);
    }
    // Normalised recursion: s[j] holds e_j(prefix) / C(m, j) after m terms.
    let mut s = vec![0.0; n + 1];
    s[0] = 1.0;
    for (m0, &e) in es.iter().enumerate() {
        let m = (m0 + 1) as f64;
        for j in (1..=n.min(m0 + 1)).rev() {
            let jf = j as f64;
            let prev = if j <= m0 { s[j] } else { 0.0 };
            s[j] = prev * (m - jf) / m + s[j - 1] * e * jf / m;
        }
    }
    Ok(s[n])
}

/// Empirically adaptive betting fractions used by the adaptive merge, one per input.
pub fn adaptive_lambdas(es: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_evalues(es)?;
    let mut a = AdaptiveLambda::new(gamma)?;
    let mut out = Vec::with_capacity(es.len());
    for &e in es {
        out.push(a.lambda());
        a.push(e);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PMergeRule {
    Bonferroni,
    Order { k: usize },
    TwiceMean,
    EGeometric,
    HarmonicTk,
    Hommel,
    /// Simes' rule, valid only under independence or positive dependence.
    SimesUnsafe { assume_prds: bool },
    Calibrated { calibrator: CalibratorSpec, weights: Option<Vec<f64>> },
}

fn sorted(ps: &[f64]) -> Vec<f64> {
    argsort_asc(ps).into_iter().map(|i| ps[i]).collect()
}

fn t_k(k: usize) -> f64 {
    let kf = k as f64;
    kf.ln() + kf.ln().ln() + 1.0
}

fn arith(ps: &[f64]) -> f64 {
    ps.iter().sum::<f64>() / ps.len() as f64
}

fn geometric(ps: &[f64]) -> f64 {
    if ps.contains(&0.0) {
        return 0.0;
    }
    (ps.iter().map(|p| p.ln()).sum::<f64>() / ps.len() as f64).exp()
}

fn harmonic_mean(ps: &[f64]) -> f64 {
    if ps.contains(&0.0) {
        return 0.0;
    }
    ps.len() as f64 / ps.iter().map(|p| 1.0 / p).sum::<f64>()
}

fn check_ps(ps: &[f64]) -> Result<()> {
    if ps.is_empty() {
        return Err(Error::Empty("p-values"));
    }
    check_pvalues(ps)
}

fn calibrator_weights(k: usize, weights: &Option<Vec<f64>>) -> Result<Vec<f64>> {
    match weights {
        None => Ok(vec![1.0 / k as f64; k]),
        Some(w) => {
            if w.len() != k {
                return Err(Error::Dimension { expected: k, got: w.len() });
            }
            if w.iter().any(|x| !(*x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(domain("weights must be nonnegative and sum to one"));
            }
            Ok(w.clone())
        }
    }
}

/// `inf{eps in (0, 1] : sum_k w_k f(p_k / eps) >= target}`, one if the set is empty.
fn calibrated_inf(ps: &[f64], f: &CalibratorSpec, w: &[f64], target: f64) -> f64 {
    let score = |eps: f64| -> f64 {
        ps.iter().zip(w).filter(|(_, w)| **w > 0.0).map(|(p, w)| w * f.eval(p / eps)).sum()
    };
    if score(1.0) < target {
        return 1.0;
    }
    if ps.iter().zip(w).any(|(p, w)| *p == 0.0 && *w > 0.0 && f.eval(0.0) == f64::INFINITY) {
        return 0.0;
    }
    bisect_threshold(|eps| score(eps) >= target, 0.0, 1.0, EPS_TOL)
}

pub fn merge_p(ps: &[f64], rule: &PMergeRule) -> Result<f64> {
    check_ps(ps)?;
    let k = ps.len();
    let kf = k as f64;
    let v = match rule {
        PMergeRule::Bonferroni => kf * ps.iter().cloned().fold(f64::INFINITY, f64::min),
        PMergeRule::Order { k: j } => {
            if *j == 0 || *j > k {
                return Err(domain(format!("order must lie in 1..={k}, got {j}")));
            }
            kf / *j as f64 * sorted(ps)[j - 1]
        }
        PMergeRule::TwiceMean => 2.0 * arith(ps),
        PMergeRule::EGeometric => std::f64::consts::E * geometric(ps),
        PMergeRule::HarmonicTk => {
            if k == 1 {
                ps[0]
            } else {
                (t_k(k) + 1.0) * harmonic_mean(ps)
            }
        }
        PMergeRule::Hommel => {
            let s = sorted(ps);
            let m = (1..=k).map(|j| kf / j as f64 * s[j - 1]).fold(f64::INFINITY, f64::min);
            harmonic(k) * m
        }
        PMergeRule::SimesUnsafe { assume_prds } => {
            if !assume_prds {
                return Err(domain("Simes' rule requires an explicit positive-dependence assumption"));
            }
            let s = sorted(ps);
            (1..=k).map(|j| kf / j as f64 * s[j - 1]).fold(f64::INFINITY, f64::min)
        }
        PMergeRule::Calibrated { calibrator, weights } => {
            calibrator.validate()?;
            let w = calibrator_weights(k, weights)?;
            calibrated_inf(ps, calibrator, &w, 1.0)
        }
    };
    Ok(v.min(1.0))
}

/// Merging of exchangeable p-values: the infimum of `eps` such that some
/// prefix average of `f(p_k / eps)` reaches one.
pub fn merge_p_exchangeable(ps: &[f64], calibrator: &CalibratorSpec) -> Result<f64> {
    check_ps(ps)?;
    calibrator.validate()?;
    let score = |eps: f64| -> f64 {
        let mut sum = 0.0;
        let mut best = f64::NEG_INFINITY;
        for (i, p) in ps.iter().enumerate() {
            sum += calibrator.eval(p / eps);
            best = best.max(sum / (i + 1) as f64);
        }
        best
    };
    if score(1.0) < 1.0 {
        return Ok(1.0);
    }
    if ps.contains(&0.0) && calibrator.eval(0.0) == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(bisect_threshold(|eps| score(eps) >= 1.0, 0.0, 1.0, EPS_TOL).min(1.0))
}

/// Randomised counterparts of the deterministic rules, using an
/// independent uniform `u`. `u = 1` recovers the deterministic rule.
pub fn merge_p_randomized(ps: &[f64], rule: &PMergeRule, u: f64) -> Result<f64> {
    check_ps(ps)?;
    check_unit("u", u)?;
    let k = ps.len();
    let kf = k as f64;
    let v = match rule {
        PMergeRule::TwiceMean => 2.0 / (2.0 - u) * arith(ps),
        PMergeRule::EGeometric => u.exp() * geometric(ps),
        PMergeRule::HarmonicTk => {
            if k == 1 {
                ps[0]
            } else {
                (t_k(k) * u + 1.0) * harmonic_mean(ps)
            }
        }
        PMergeRule::Order { k: j } => {
            if *j == 0 || *j > k {
                return Err(domain(format!("order must lie in 1..={k}, got {j}")));
            }
            let idx = ((u * *j as f64).ceil() as usize).max(1);
            kf / *j as f64 * sorted(ps)[idx - 1]
        }
        PMergeRule::Calibrated { calibrator, weights } => {
            calibrator.validate()?;
            let w = calibrator_weights(k, weights)?;
            if u == 0.0 {
                0.0
            } else {
                calibrated_inf(ps, calibrator, &w, u)
            }
        }
        other => return Err(domain(format!("no randomised form for {other:?}"))),
    };
    Ok(v.min(1.0))
}

/// Rejects when the average p-value is at most `2 alpha u`.
pub fn avg_p_randomized_test(ps: &[f64], alpha: f64, u: f64) -> Result<bool> {
    check_ps(ps)?;
    check_open_alpha(alpha)?;
    check_unit("u", u)?;
    Ok(arith(ps) <= 2.0 * alpha * u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CombineMode {
    /// `f(p) e`, for independent p and e.
    Ie { calibrator: CalibratorSpec },
    /// `min(p / e, 1)`, for independent p and e.
    Ip,
    /// `lambda f(p) + (1 - lambda) e` under arbitrary dependence.
    EMix { lambda: f64, calibrator: CalibratorSpec },
    /// `min(2 min(p, 1/e), 1)` under arbitrary dependence.
    PMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scale", content = "value", rename_all = "snake_case")]
pub enum Combined {
    E(f64),
    P(f64),
}

pub fn combine_pe(p: f64, e: f64, mode: &CombineMode) -> Result<Combined> {
    check_pvalues(&[p])?;
    check_evalues(&[e])?;
    Ok(match mode {
        CombineMode::Ie { calibrator } => {
            calibrator.validate()?;
            let f = calibrator.eval(p);
            // 0 * inf is read as inf: an infinite factor is conclusive.
            Combined::E(if f == f64::INFINITY || e == f64::INFINITY { f64::INFINITY } else { f * e })
        }
        CombineMode::Ip => Combined::P(if e == 0.0 { 1.0 } else { (p / e).min(1.0) }),
        CombineMode::EMix { lambda, calibrator } => {
            if !(*lambda > 0.0 && *lambda < 1.0) {
                return Err(domain(format!("lambda must lie in (0, 1), got {lambda}")));
            }
            calibrator.validate()?;
            Combined::E(lambda * calibrator.eval(p) + (1.0 - lambda) * e)
        }
        CombineMode::PMin => {
            let inv = if e == 0.0 { f64::INFINITY } else { 1.0 / e };
            Combined::P((2.0 * p.min(inv)).min(1.0))
        }
    })
}
