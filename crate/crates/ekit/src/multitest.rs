//! Multiple testing with e-values: e-BH and its boosted, adaptive,
//! randomised and closed variants, BH/BHY, ep-BH and FWER adjustment.

use crate::core::{boost_truncation, CalibratorSpec};
use crate::error::{check_evalues, check_open_alpha, check_pvalues, check_unit, domain, Error, Result};
use crate::numeric::{argsort_asc, argsort_desc, bisect_threshold, harmonic, norm_cdf};
use serde::{Deserialize, Serialize};

/// Rejected hypotheses (0-based, ascending) with the threshold applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverySet {
    pub rejected: Vec<usize>,
    pub k_star: usize,
    pub threshold_used: f64,
    pub procedure_tag: String,
}

impl DiscoverySet {
    fn from_indices(mut rejected: Vec<usize>, threshold_used: f64, tag: &str) -> Self {
        rejected.sort_unstable();
        Self { k_star: rejected.len(), rejected, threshold_used, procedure_tag: tag.to_string() }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.rejected.binary_search(&i).is_ok()
    }

    pub fn is_superset_of(&self, other: &DiscoverySet) -> bool {
        other.rejected.iter().all(|i| self.contains(*i))
    }
}

/// Number of e-BH rejections: `max{k : k e_[k] / K >= 1/alpha}`.
fn ebh_count(es: &[f64], order: &[usize], alpha: f64) -> usize {
    let kf = es.len() as f64;
    (1..=es.len()).rev().find(|&k| es[order[k - 1]] >= kf / (k as f64 * alpha)).unwrap_or(0)
}

pub fn ebh(es: &[f64], alpha: f64) -> Result<DiscoverySet> {
    check_open_alpha(alpha)?;
    check_evalues(es)?;
    Ok(ebh_unchecked(es, alpha, "ebh"))
}

fn ebh_unchecked(es: &[f64], alpha: f64, tag: &str) -> DiscoverySet {
    let order = argsort_desc(es);
    let k = ebh_count(es, &order, alpha);
    let kf = es.len() as f64;
    let threshold = kf / (k.max(1) as f64 * alpha);
    DiscoverySet::from_indices(order[..k].to_vec(), threshold, tag)
}

pub fn boosted_ebh(es: &[f64], boosts: &[f64], alpha: f64) -> Result<DiscoverySet> {
    check_evalues(es)?;
    if boosts.len() != es.len() {
        return Err(Error::Dimension { expected: es.len(), got: boosts.len() });
    }
    if boosts.iter().any(|b| !(*b >= 1.0)) {
        return Err(domain("boost factors must be at least one"));
    }
    check_open_alpha(alpha)?;
    let boosted: Vec<f64> = es.iter().zip(boosts).map(|(e, b)| e * b).collect();
    Ok(ebh_unchecked(&boosted, alpha, "boosted_ebh"))
}

/// Largest boost `b` with `mean T(alpha b E) <= alpha` over draws of the
/// null e-value, less a safety margin.
pub fn certify_boost_mc(null_draws: &[f64], k: usize, alpha: f64, margin: f64) -> Result<f64> {
    check_open_alpha(alpha)?;
    if null_draws.is_empty() {
        return Err(Error::Empty("null draws"));
    }
    let risk = |b: f64| -> f64 {
        null_draws.iter().map(|e| boost_truncation(alpha * b * e, k)).sum::<f64>() / null_draws.len() as f64
    };
    certify(risk, alpha, margin)
}

fn certify<F: Fn(f64) -> f64>(risk: F, alpha: f64, margin: f64) -> Result<f64> {
    if risk(1.0) > alpha {
        return Err(Error::Infeasible("even b = 1 exceeds the budget".into()));
    }
    let mut hi = 2.0;
    while risk(hi) <= alpha {
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(hi);
        }
    }
    let b = bisect_threshold(|b| risk(b) > alpha, 1.0, hi, 1e-9);
    Ok((b - margin).max(1.0))
}

/// Exact boost for the Gaussian likelihood-ratio e-value `exp(mu Z - mu^2/2)`, `Z ~ N(0, 1)`.
pub fn certify_boost_gaussian_lr(mu: f64, k: usize, alpha: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(domain("mu must be positive"));
    }
    let kf = k as f64;
    // P(E >= c) for the log-normal null law.
    let tail = |c: f64| -> f64 {
        if c <= 0.0 {
            1.0
        } else {
            norm_cdf(-((c.ln() + mu * mu / 2.0) / mu))
        }
    };
    let risk = |b: f64| -> f64 {
        // T(alpha b E) = K / j on [K/j, K/(j-1)) in units of alpha b E.
        (1..=k)
            .map(|j| {
                let lo = kf / j as f64 / (alpha * b);
                let hi_tail = if j == 1 { 0.0 } else { tail(kf / (j - 1) as f64 / (alpha * b)) };
                kf / j as f64 * (tail(lo) - hi_tail)
            })
            .sum()
    };
    certify(risk, alpha, 0.0)
}

fn bh_count(ps: &[f64], order: &[usize], alpha: f64) -> usize {
    let kf = ps.len() as f64;
    (1..=ps.len()).rev().find(|&k| kf * ps[order[k - 1]] / k as f64 <= alpha).unwrap_or(0)
}

fn bh_tagged(ps: &[f64], alpha: f64, tag: &str) -> DiscoverySet {
    let order = argsort_asc(ps);
    let k = bh_count(ps, &order, alpha);
    let threshold = alpha * k as f64 / ps.len() as f64;
    DiscoverySet::from_indices(order[..k].to_vec(), threshold, tag)
}

pub fn bh(ps: &[f64], alpha: f64) -> Result<DiscoverySet> {
    check_open_alpha(alpha)?;
    check_pvalues(ps)?;
    Ok(bh_tagged(ps, alpha, "bh"))
}

/// BH applied to `l_K p` with `l_K` the harmonic number.
pub fn bhy(ps: &[f64], alpha: f64) -> Result<DiscoverySet> {
    check_open_alpha(alpha)?;
    check_pvalues(ps)?;
    let l = harmonic(ps.len());
    let scaled: Vec<f64> = ps.iter().map(|p| p * l).collect();
    Ok(bh_tagged(&scaled, alpha, "bhy"))
}

/// The BHY calibrator for `K` hypotheses at level `alpha`.
pub fn bhy_calibrator(k: usize, alpha: f64) -> CalibratorSpec {
    CalibratorSpec::BhyTruncation { k, alpha }
}

/// Compound e-values `(K / alpha) V_k / max(R, 1)` from any FDR procedure's rejections.
pub fn compound_from_fdr(rejections: &[bool], r: usize, alpha: f64) -> Result<Vec<f64>> {
    check_open_alpha(alpha)?;
    let count = rejections.iter().filter(|v| **v).count();
    if count != r {
        return Err(domain(format!("R = {r} does not match {count} rejections")));
    }
    let kf = rejections.len() as f64;
    let d = r.max(1) as f64;
    Ok(rejections.iter().map(|v| if *v { kf / alpha / d } else { 0.0 }).collect())
}

pub fn ebh_minimally_adaptive(es: &[f64], alpha: f64) -> Result<DiscoverySet> {
    check_open_alpha(alpha)?;
    check_evalues(es)?;
    let k = es.len();
    if k < 2 {
        return Err(domain("minimally adaptive e-BH needs K >= 2"));
    }
    let mean = es.iter().sum::<f64>() / k as f64;
    if mean < 1.0 / alpha {
        return Ok(DiscoverySet::from_indices(vec![], f64::MAX, "ebh_minadapt"));
    }
    let level = k as f64 * alpha / (k - 1) as f64;
    let order = argsort_desc(es);
    let kk = (1..=k).rev().find(|&j| es[order[j - 1]] >= k as f64 / (j as f64 * level)).unwrap_or(0);
    let threshold = k as f64 / (kk.max(1) as f64 * level);
    Ok(DiscoverySet::from_indices(order[..kk].to_vec(), threshold, "ebh_minadapt"))
}

/// Mean-preserving random rounding of `x` to the neighbouring points of a
/// sorted grid; `x` is unchanged when on the grid or outside its range.
/// Rounds up iff `u < (x - x_lo) / (x_hi - x_lo)`.
pub fn stochastic_round(x: f64, grid: &[f64], u: f64) -> Result<f64> {
    check_unit("u", u)?;
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain("grid must be non-empty and strictly ascending"));
    }
    let pos = grid.partition_point(|g| *g < x);
    if pos == grid.len() || grid[pos] == x || pos == 0 {
        return Ok(x);
    }
    let (lo, hi) = (grid[pos - 1], grid[pos]);
    if hi == f64::INFINITY {
        return Ok(x);
    }
    Ok(if u < (x - lo) / (hi - lo) { hi } else { lo })
}

fn ebh_grid(k: usize, alpha: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (1..=k).rev().map(|j| k as f64 / (j as f64 * alpha)).collect();
    g.insert(0, 0.0);
    g
}

fn round_all(es: &[f64], alpha: f64, us: &[f64]) -> Result<Vec<f64>> {
    if us.len() != es.len() {
        return Err(Error::Dimension { expected: es.len(), got: us.len() });
    }
    let g = ebh_grid(es.len(), alpha);
    es.iter().zip(us).map(|(e, u)| stochastic_round(*e, &g, *u)).collect()
}

/// e-BH on e-values stochastically rounded to the e-BH grid.
pub fn ge_bh(es: &[f64], alpha: f64, us: &[f64]) -> Result<DiscoverySet> {
    check_open_alpha(alpha)?;
    check_evalues(es)?;
    let r = round_all(es, alpha, us)?;
    Ok(ebh_unchecked(&r, alpha, "ge_bh"))
}

/// Ge-BH followed by a second rounding onto `{0, 1/alpha_hat, inf}` with
/// `alpha_hat = alpha (k* + 1) / K`. `second` holds one uniform per
/// hypothesis or a single shared uniform.
pub fn de_bh(es: &[f64], alpha: f64, us: &[f64], second: &[f64]) -> Result<DiscoverySet> {
    check_open_alpha(alpha)?;
    check_evalues(es)?;
    let k = es.len();
    if second.len() != k && second.len() != 1 {
        return Err(Error::Dimension { expected: k, got: second.len() });
    }
    let r = round_all(es, alpha, us)?;
    let ge = ebh_unchecked(&r, alpha, "ge_bh");
    let alpha_hat = alpha * (ge.k_star + 1) as f64 / k as f64;
    let target = 1.0 / alpha_hat;
    let mut rejected = Vec::new();
    for (i, x) in r.iter().enumerate() {
        let u = if second.len() == 1 { second[0] } else { second[i] };
        check_unit("u", u)?;
        let s = if *x >= target || *x <= 0.0 {
            *x
        } else if u < *x / target {
            target
        } else {
            0.0
        };
        if s >= target {
            rejected.push(i);
        }
    }
    Ok(DiscoverySet::from_indices(rejected, target, "de_bh"))
}

/// e-BH on `e_k / u` for one independent uniform `u`.
pub fn ue_bh(es: &[f64], alpha: f64, u: f64) -> Result<DiscoverySet> {
    check_open_alpha(alpha)?;
    check_evalues(es)?;
    check_unit("u", u)?;
    let scaled: Vec<f64> = es.iter().map(|e| if u == 0.0 { if *e > 0.0 { f64::INFINITY } else { 0.0 } } else { e / u }).collect();
    Ok(ebh_unchecked(&scaled, alpha, "ue_bh"))
}

/// Closed e-BH for the e-collection `E_A = mean of e over A`.
///
/// For a prefix `R` of size `k` of the descending order and a test set `A`
/// with `m >= 1` members in `R` and `j` outside, the constraint
/// `E_A >= m / (alpha k)` is hardest when `A` takes the `m` smallest
/// members of `R` and the `j` smallest non-members, giving
/// `S_R(m) + min_j (S_out(j) - j c_m) >= m c_m` with `c_m = m / (alpha k)`.
/// For a fixed size, a prefix is always at least as feasible as any other set.
pub fn closed_ebh(es: &[f64], alpha: f64) -> Result<DiscoverySet> {
    check_open_alpha(alpha)?;
    check_evalues(es)?;
    let order = argsort_desc(es);
    let sorted: Vec<f64> = order.iter().map(|&i| es[i]).collect();
    let kk = es.len();
    for k in (1..=kk).rev() {
        if prefix_feasible(&sorted, k, alpha) {
            return Ok(DiscoverySet::from_indices(order[..k].to_vec(), kk as f64 / (k as f64 * alpha), "closed_ebh"));
        }
    }
    Ok(DiscoverySet::from_indices(vec![], f64::MAX, "closed_ebh"))
}

fn prefix_feasible(sorted_desc: &[f64], k: usize, alpha: f64) -> bool {
    let inside = &sorted_desc[..k];
    let outside = &sorted_desc[k..];
    // Smallest-first partial sums.
    let mut s_out = vec![0.0];
    for x in outside.iter().rev() {
        s_out.push(s_out.last().unwrap() + x);
    }
    let mut s_in = 0.0;
    for m in 1..=k {
        s_in += inside[k - m];
        if s_in == f64::INFINITY {
            return true;
        }
        let c = m as f64 / (alpha * k as f64);
        let best = s_out.iter().enumerate().map(|(j, s)| s - j as f64 * c).fold(f64::INFINITY, f64::min);
        if s_in + best < m as f64 * c * (1.0 - 1e-12) {
            return false;
        }
    }
    true
}

/// A family `E_A` of e-values indexed by subsets `A` of the hypotheses,
/// encoded as bit masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ECollection {
    MeanFromBase { es: Vec<f64> },
    /// `values[mask]` for every mask in `0..2^K`, with `values[0] = 1`.
    Explicit { k: usize, values: Vec<f64> },
}

impl ECollection {
    pub fn k(&self) -> usize {
        match self {
            ECollection::MeanFromBase { es } => es.len(),
            ECollection::Explicit { k, .. } => *k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ECollection::MeanFromBase { es } => check_evalues(es),
            ECollection::Explicit { k, values } => {
                if values.len() != 1 << k {
                    return Err(Error::Dimension { expected: 1 << k, got: values.len() });
                }
                check_evalues(values)?;
                if values[0] != 1.0 {
                    return Err(domain("the empty set must carry e-value one"));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, mask: u64) -> f64 {
        match self {
            ECollection::MeanFromBase { es } => {
                if mask == 0 {
                    return 1.0;
                }
                let (s, n) = (0..es.len()).filter(|i| mask >> i & 1 == 1).fold((0.0, 0), |(s, n), i| (s + es[i], n + 1));
                s / n as f64
            }
            ECollection::Explicit { values, .. } => values[mask as usize],
        }
    }
}

/// Loss `L_A(R)` for a true-null set `A` and a rejection set `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Loss {
    Fdp,
    /// One if at least `k` true nulls are rejected.
    KFwer { k: usize },
    /// Number of false rejections divided by `K`.
    Pfer,
    /// One if the false discovery proportion exceeds `gamma`.
    Fdx { gamma: f64 },
}

impl Loss {
    pub fn eval(&self, a: u64, r: u64, k: usize) -> f64 {
        let v = (a & r).count_ones() as f64;
        let rn = r.count_ones() as f64;
        match *self {
            Loss::Fdp => v / rn.max(1.0),
            Loss::KFwer { k: kk } => f64::from(v >= kk as f64),
            Loss::Pfer => v / k as f64,
            Loss::Fdx { gamma } => f64::from(v / rn.max(1.0) > gamma),
        }
    }
}

pub const MAX_CLOSED_K: usize = 20;

/// Largest `R` with `E_A >= L_A(R) / alpha` for every `A`, by exhaustive
/// search. Ties among equally large sets go to the first in mask order.
pub fn closed_loss(collection: &ECollection, loss: &Loss, alpha: f64) -> Result<DiscoverySet> {
    check_open_alpha(alpha)?;
    collection.validate()?;
    let k = collection.k();
    if k > MAX_CLOSED_K {
        return Err(domain(format!("exhaustive closure supports K <= {MAX_CLOSED_K}, got {k}")));
    }
    let full = 1u64 << k;
    let values: Vec<f64> = (0..full).map(|a| collection.value(a)).collect();
    let mut by_size: Vec<u64> = (0..full).collect();
    by_size.sort_by_key(|r| (std::cmp::Reverse(r.count_ones()), *r));
    for r in by_size {
        let ok = (1..full).all(|a| {
            let l = loss.eval(a, r, k);
            l == 0.0 || values[a as usize] >= l / alpha * (1.0 - 1e-12)
        });
        if ok {
            let idx: Vec<usize> = (0..k).filter(|i| r >> i & 1 == 1).collect();
            return Ok(DiscoverySet::from_indices(idx, 1.0 / alpha, "closed"));
        }
    }
    Ok(DiscoverySet::from_indices(vec![], 1.0 / alpha, "closed"))
}

/// `E*_k = min over A containing k of the mean e-value over A`; rejecting
/// `E*_k >= 1/alpha` controls the family-wise error rate.
pub fn fwer_adjust(es: &[f64]) -> Result<Vec<f64>> {
    check_evalues(es)?;
    let order = argsort_asc(es);
    let mut out = vec![0.0; es.len()];
    let mut prefix = vec![0.0];
    for &i in &order {
        let e = es[i];
        let best = prefix.iter().enumerate().map(|(n, s)| (e + s) / (n + 1) as f64).fold(f64::INFINITY, f64::min);
        out[i] = best;
        prefix.push(prefix.last().unwrap() + e);
    }
    Ok(out)
}

/// BH on e-weighted p-values `min(p / e, 1)`.
pub fn ep_bh(ps: &[f64], es: &[f64], alpha: f64) -> Result<DiscoverySet> {
    if ps.len() != es.len() {
        return Err(Error::Dimension { expected: ps.len(), got: es.len() });
    }
    check_open_alpha(alpha)?;
    check_pvalues(ps)?;
    check_evalues(es)?;
    let w: Vec<f64> = ps.iter().zip(es).map(|(p, e)| if *e == 0.0 { 1.0 } else { (p / e).min(1.0) }).collect();
    Ok(bh_tagged(&w, alpha, "ep_bh"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdpReport {
    pub fdp: f64,
    pub discoveries: usize,
    pub false_discoveries: usize,
}

pub fn fdr_fdp_report(discoveries: &[usize], nulls: &[usize]) -> FdpReport {
    let false_discoveries = discoveries.iter().filter(|d| nulls.contains(d)).count();
    FdpReport {
        fdp: false_discoveries as f64 / discoveries.len().max(1) as f64,
        discoveries: discoveries.len(),
        false_discoveries,
    }
}
