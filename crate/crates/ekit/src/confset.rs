//! Uncertainty sets: e-confidence intervals, e-BY levels and the
//! majority-vote family for merging dependent sets.

use crate::core::CalibratorSpec;
use crate::error::{check_open_alpha, check_unit, domain, Error, Result};
use crate::seed::rng_for;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetKind {
    /// Sorted, disjoint closed intervals; `lo == hi` is a single point.
    IntervalUnion { intervals: Vec<(f64, f64)> },
    LabelSubset { labels: BTreeSet<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySet {
    #[serde(flatten)]
    pub kind: SetKind,
    pub level: f64,
}

impl UncertaintySet {
    pub fn interval(lo: f64, hi: f64, level: f64) -> Result<Self> {
        Self::intervals(vec![(lo, hi)], level)
    }

    /// Normalises arbitrary closed intervals into a sorted disjoint union.
    pub fn intervals(mut iv: Vec<(f64, f64)>, level: f64) -> Result<Self> {
        if iv.iter().any(|(a, b)| a.is_nan() || b.is_nan() || a > b) {
            return Err(domain("intervals need lo <= hi"));
        }
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
        for (a, b) in iv {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Ok(Self { kind: SetKind::IntervalUnion { intervals: out }, level })
    }

    pub fn labels<I: IntoIterator<Item = usize>>(labels: I, level: f64) -> Self {
        Self { kind: SetKind::LabelSubset { labels: labels.into_iter().collect() }, level }
    }

    pub fn empty_like(&self) -> Self {
        let kind = match self.kind {
            SetKind::IntervalUnion { .. } => SetKind::IntervalUnion { intervals: vec![] },
            SetKind::LabelSubset { .. } => SetKind::LabelSubset { labels: BTreeSet::new() },
        };
        Self { kind, level: self.level }
    }

    pub fn is_empty(&self) -> bool {
        match &self.kind {
            SetKind::IntervalUnion { intervals } => intervals.is_empty(),
            SetKind::LabelSubset { labels } => labels.is_empty(),
        }
    }

    /// Total length for intervals, cardinality for labels.
    pub fn measure(&self) -> f64 {
        match &self.kind {
            SetKind::IntervalUnion { intervals } => intervals.iter().map(|(a, b)| b - a).sum(),
            SetKind::LabelSubset { labels } => labels.len() as f64,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match &self.kind {
            SetKind::IntervalUnion { intervals } => intervals.iter().any(|(a, b)| *a <= x && x <= *b),
            SetKind::LabelSubset { labels } => x >= 0.0 && x.fract() == 0.0 && labels.contains(&(x as usize)),
        }
    }

    pub fn contains_label(&self, l: usize) -> bool {
        matches!(&self.kind, SetKind::LabelSubset { labels } if labels.contains(&l))
    }

    pub fn as_intervals(&self) -> Option<&[(f64, f64)]> {
        match &self.kind {
            SetKind::IntervalUnion { intervals } => Some(intervals),
            SetKind::LabelSubset { .. } => None,
        }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        match (&self.kind, &other.kind) {
            (SetKind::IntervalUnion { intervals: a }, SetKind::IntervalUnion { intervals: b }) => {
                a.iter().all(|(lo, hi)| b.iter().any(|(l2, h2)| l2 <= lo && hi <= h2))
            }
            (SetKind::LabelSubset { labels: a }, SetKind::LabelSubset { labels: b }) => a.is_subset(b),
            _ => false,
        }
    }

    pub fn intersect(&self, other: &Self) -> Result<Self> {
        let kind = match (&self.kind, &other.kind) {
            (SetKind::IntervalUnion { intervals: a }, SetKind::IntervalUnion { intervals: b }) => {
                let mut out = Vec::new();
                for (l1, h1) in a {
                    for (l2, h2) in b {
                        let (lo, hi) = (l1.max(*l2), h1.min(*h2));
                        if lo <= hi {
                            out.push((lo, hi));
                        }
                    }
                }
                out.sort_by(|x, y| x.0.total_cmp(&y.0));
                SetKind::IntervalUnion { intervals: out }
            }
            (SetKind::LabelSubset { labels: a }, SetKind::LabelSubset { labels: b }) => {
                SetKind::LabelSubset { labels: a.intersection(b).copied().collect() }
            }
            _ => return Err(domain("cannot intersect sets of different kinds")),
        };
        Ok(Self { kind, level: self.level })
    }
}

/// Grid points retained by a test inversion, with the union of the hulls
/// of contiguous runs as a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSelection {
    pub members: Vec<f64>,
    pub set: UncertaintySet,
}

impl GridSelection {
    pub fn from_mask(grid: &[f64], keep: &[bool], level: f64) -> Result<Self> {
        let mut members = Vec::new();
        let mut runs: Vec<(f64, f64)> = Vec::new();
        let mut open = false;
        for (x, k) in grid.iter().zip(keep) {
            if *k {
                members.push(*x);
                match (open, runs.last_mut()) {
                    (true, Some(r)) => r.1 = *x,
                    _ => runs.push((*x, *x)),
                }
            }
            open = *k;
        }
        Ok(Self { members, set: UncertaintySet::intervals(runs, level)? })
    }

    /// Whether the hull contains no other grid points than the members.
    pub fn is_contiguous(&self) -> bool {
        self.set.as_intervals().is_some_and(|iv| iv.len() <= 1)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("parameter grid"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain("grid must be strictly ascending"));
    }
    Ok(())
}

/// `{theta : E(theta, alpha) < 1/alpha}` over an ascending grid.
pub fn eci_from_evaluator<F: Fn(f64, f64) -> f64>(grid: &[f64], e: F, alpha: f64) -> Result<GridSelection> {
    check_grid(grid)?;
    check_open_alpha(alpha)?;
    let keep: Vec<bool> = grid.iter().map(|t| e(*t, alpha) < 1.0 / alpha).collect();
    GridSelection::from_mask(grid, &keep, 1.0 - alpha)
}

/// The level `f^{-1}(1/alpha)` at which the base family is read off.
pub fn eci_calibrate_level(f: &CalibratorSpec, alpha: f64) -> Result<f64> {
    check_open_alpha(alpha)?;
    f.validate()?;
    Ok(f.inverse(1.0 / alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedSet {
    pub set: UncertaintySet,
    pub level: f64,
    /// True when the inverse fell below every grid level and the largest
    /// available set was returned instead.
    pub out_of_range: bool,
}

/// Calibrated e-CI from a nested family given on an alpha-grid. The set at
/// the largest grid level not above `f^{-1}(1/alpha)` is returned, which
/// contains the exact set by monotonicity.
pub fn eci_calibrate(family: &[(f64, UncertaintySet)], f: &CalibratorSpec, alpha: f64) -> Result<CalibratedSet> {
    if family.is_empty() {
        return Err(Error::Empty("set family"));
    }
    let level = eci_calibrate_level(f, alpha)?;
    let mut best: Option<&(f64, UncertaintySet)> = None;
    for entry in family {
        if entry.0 <= level && best.is_none_or(|b| entry.0 > b.0) {
            best = Some(entry);
        }
    }
    Ok(match best {
        Some((_, s)) => CalibratedSet { set: s.clone(), level, out_of_range: false },
        None => {
            let widest = family.iter().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
            CalibratedSet { set: widest.1.clone(), level, out_of_range: true }
        }
    })
}

/// Per-index levels `delta |S| / K` for the selected indices.
pub fn eby_levels(selected: &[usize], k: usize, delta: f64) -> Result<Vec<(usize, f64)>> {
    check_open_alpha(delta)?;
    if selected.len() > k {
        return Err(domain(format!("selected {} of only {k}", selected.len())));
    }
    if let Some(i) = selected.iter().find(|i| **i >= k) {
        return Err(domain(format!("index {i} out of range for K = {k}")));
    }
    let a = delta * (selected.len() as f64 / k as f64);
    Ok(selected.iter().map(|i| (*i, a)).collect())
}

/// Points whose weighted vote strictly exceeds `threshold`.
fn vote_set(sets: &[UncertaintySet], weights: &[f64], threshold: f64, tol: f64) -> Result<UncertaintySet> {
    let first = sets.first().ok_or(Error::Empty("sets"))?;
    let level = first.level;
    let passes = |v: f64| v > threshold + tol;
    match &first.kind {
        SetKind::IntervalUnion { .. } => {
            let mut all = Vec::with_capacity(sets.len());
            for s in sets {
                all.push(s.as_intervals().ok_or_else(|| domain("mixed set kinds"))?);
            }
            let mut pts: Vec<f64> = all.iter().flat_map(|iv| iv.iter().flat_map(|(a, b)| [*a, *b])).collect();
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            let vote = |x: f64| -> f64 {
                all.iter()
                    .zip(weights)
                    .filter(|(iv, _)| iv.iter().any(|(a, b)| *a <= x && x <= *b))
                    .map(|(_, w)| *w)
                    .sum()
            };
            let mut out: Vec<(f64, f64)> = Vec::new();
            let mut extend = |lo: f64, hi: f64| match out.last_mut() {
                Some(last) if last.1 >= lo => last.1 = hi,
                _ => out.push((lo, hi)),
            };
            for (j, x) in pts.iter().enumerate() {
                if passes(vote(*x)) {
                    extend(*x, *x);
                }
                if let Some(y) = pts.get(j + 1) {
                    if passes(vote(0.5 * (x + y))) {
                        // The vote function is upper semicontinuous, so both ends belong.
                        extend(*x, *y);
                    }
                }
            }
            Ok(UncertaintySet { kind: SetKind::IntervalUnion { intervals: out }, level })
        }
        SetKind::LabelSubset { .. } => {
            let mut all = Vec::with_capacity(sets.len());
            for s in sets {
                match &s.kind {
                    SetKind::LabelSubset { labels } => all.push(labels),
                    _ => return Err(domain("mixed set kinds")),
                }
            }
            let universe: BTreeSet<usize> = all.iter().flat_map(|l| l.iter().copied()).collect();
            let kept = universe.into_iter().filter(|l| {
                passes(all.iter().zip(weights).filter(|(s, _)| s.contains(l)).map(|(_, w)| *w).sum())
            });
            Ok(UncertaintySet::labels(kept, level))
        }
    }
}

/// Points covered by more than a fraction `tau` of the sets.
pub fn majority_vote(sets: &[UncertaintySet], tau: f64) -> Result<UncertaintySet> {
    if !(0.0..1.0).contains(&tau) {
        return Err(domain(format!("tau must lie in [0, 1), got {tau}")));
    }
    let ones = vec![1.0; sets.len()];
    vote_set(sets, &ones, tau * sets.len() as f64, 0.0)
}

/// Coverage guarantee of the vote at `tau` for sets with error `alpha`.
/// With `odd_k_refinement`, strict majority over an odd number of sets
/// uses the sharper `1 - alpha K / ceil(K/2)`.
pub fn mv_coverage_bound(k: usize, alpha: f64, tau: f64, odd_k_refinement: bool) -> f64 {
    if odd_k_refinement && tau == 0.5 && k % 2 == 1 {
        1.0 - alpha * k as f64 / k.div_ceil(2) as f64
    } else {
        1.0 - alpha / (1.0 - tau)
    }
}

/// Intersection over prefixes of their strict-majority sets.
pub fn mv_exchangeable(sets: &[UncertaintySet]) -> Result<UncertaintySet> {
    running_mv(sets)?.pop().ok_or(Error::Empty("sets"))
}

pub fn mv_permuted(sets: &[UncertaintySet], permutation: &[usize]) -> Result<UncertaintySet> {
    let mut seen = vec![false; sets.len()];
    if permutation.len() != sets.len() {
        return Err(Error::Dimension { expected: sets.len(), got: permutation.len() });
    }
    for p in permutation {
        if *p >= sets.len() || std::mem::replace(&mut seen[*p], true) {
            return Err(domain("permutation must be a bijection"));
        }
    }
    let reordered: Vec<UncertaintySet> = permutation.iter().map(|p| sets[*p].clone()).collect();
    mv_exchangeable(&reordered)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomizedVote {
    /// Fraction above `(1 + u) / 2`.
    Cr,
    /// Fraction above `u`.
    Cu,
}

pub fn mv_randomized(sets: &[UncertaintySet], u: f64, variant: RandomizedVote) -> Result<UncertaintySet> {
    check_unit("u", u)?;
    let k = sets.len() as f64;
    let frac = match variant {
        RandomizedVote::Cr => 0.5 + u / 2.0,
        RandomizedVote::Cu => u,
    };
    let ones = vec![1.0; sets.len()];
    vote_set(sets, &ones, frac * k, 0.0)
}

/// Weighted vote against `(1 + u) / 2`.
pub fn mv_weighted(sets: &[UncertaintySet], w: &[f64], u: f64) -> Result<UncertaintySet> {
    check_unit("u", u)?;
    if w.len() != sets.len() {
        return Err(Error::Dimension { expected: sets.len(), got: w.len() });
    }
    if w.iter().any(|x| !(*x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > WEIGHT_TOL {
        return Err(domain("weights must be nonnegative and sum to one"));
    }
    vote_set(sets, w, 0.5 + u / 2.0, WEIGHT_TOL * sets.len() as f64)
}

/// Median-of-midpoints interval for equal-width intervals. For even `K`
/// this is the intersection of the two middle intervals, which may be empty.
pub fn median_of_midpoints(intervals: &[(f64, f64)], level: f64) -> Result<UncertaintySet> {
    let (l0, h0) = *intervals.first().ok_or(Error::Empty("intervals"))?;
    let width = h0 - l0;
    let scale = width.abs().max(f64::MIN_POSITIVE);
    if intervals.iter().any(|(a, b)| ((b - a) - width).abs() > 1e-9 * scale) {
        return Err(domain("intervals must share a common width"));
    }
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| (a.0 + a.1).total_cmp(&(b.0 + b.1)));
    let k = sorted.len();
    if k % 2 == 1 {
        let (a, b) = sorted[k / 2];
        UncertaintySet::interval(a, b, level)
    } else {
        let (a1, b1) = sorted[k / 2 - 1];
        let (a2, b2) = sorted[k / 2];
        let (lo, hi) = (a1.max(a2), b1.min(b2));
        if lo <= hi {
            UncertaintySet::interval(lo, hi, level)
        } else {
            UncertaintySet::intervals(vec![], level)
        }
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn lower_median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len().div_ceil(2) - 1]
}

/// Median of means over `b` buckets, assigned round-robin after shuffling.
pub fn median_of_means(data: &[f64], b: usize, perm: &[usize]) -> f64 {
    let mut sums = vec![0.0; b];
    let mut counts = vec![0usize; b];
    for (pos, &i) in perm.iter().enumerate() {
        sums[pos % b] += data[i];
        counts[pos % b] += 1;
    }
    let mut means: Vec<f64> = sums.iter().zip(&counts).map(|(s, c)| s / *c as f64).collect();
    median(&mut means)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Momom {
    pub estimate: f64,
    /// Running estimate after `k` repetitions, for `k = 1..=K`.
    pub trajectory: Vec<f64>,
}

/// The `ceil(k/2)`-th smallest of `k` median-of-means estimates over
/// independent random bucketings.
pub fn momom(data: &[f64], b: usize, k: usize, seed: u64) -> Result<Momom> {
    if b == 0 || k == 0 {
        return Err(domain("bucket count and repetitions must be positive"));
    }
    if b > data.len() {
        return Err(domain(format!("{b} buckets for {} points", data.len())));
    }
    let estimates: Vec<f64> = (0..k)
        .map(|r| {
            let mut perm: Vec<usize> = (0..data.len()).collect();
            perm.shuffle(&mut rng_for(seed, "momom", r as u64));
            median_of_means(data, b, &perm)
        })
        .collect();
    let trajectory: Vec<f64> = (1..=k).map(|j| lower_median(&estimates[..j])).collect();
    Ok(Momom { estimate: *trajectory.last().unwrap(), trajectory })
}

/// Running exchangeable majority vote, one set per prefix; nested decreasing.
pub fn running_mv(sets: &[UncertaintySet]) -> Result<Vec<UncertaintySet>> {
    let mut out: Vec<UncertaintySet> = Vec::with_capacity(sets.len());
    for t in 1..=sets.len() {
        let m = majority_vote(&sets[..t], 0.5)?;
        let next = match out.last() {
            Some(prev) => prev.intersect(&m)?,
            None => m,
        };
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeDiagnostics {
    pub measure: f64,
    pub mean_bound: f64,
    pub within_mean_bound: bool,
    /// Largest input width, when every input is a single interval and `tau >= 1/2`.
    pub max_width: Option<f64>,
    pub within_width_bound: bool,
}

pub fn mv_size_check(sets: &[UncertaintySet], tau: f64) -> Result<SizeDiagnostics> {
    let mv = majority_vote(sets, tau)?;
    let measure = mv.measure();
    let k = sets.len() as f64;
    let mean_bound = if tau > 0.0 { sets.iter().map(|s| s.measure()).sum::<f64>() / (k * tau) } else { f64::INFINITY };
    let single = sets.iter().all(|s| s.as_intervals().is_some_and(|iv| iv.len() == 1));
    let max_width = (single && tau >= 0.5).then(|| sets.iter().map(|s| s.measure()).fold(0.0, f64::max));
    let slack = 1e-9 * mean_bound.abs().max(1.0);
    Ok(SizeDiagnostics {
        measure,
        mean_bound,
        within_mean_bound: measure <= mean_bound + slack,
        max_width,
        within_width_bound: max_width.is_none_or(|w| measure <= w + 1e-9 * w.max(1.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, b: f64) -> UncertaintySet {
        UncertaintySet::interval(a, b, 0.9).unwrap()
    }

    fn spans(s: &UncertaintySet) -> Vec<(f64, f64)> {
        s.as_intervals().unwrap().to_vec()
    }

    #[test]
    fn eci_examples() {
        let grid: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let all = eci_from_evaluator(&grid, |_, _| 1.0, 0.1).unwrap();
        assert_eq!(all.members, grid);
        let one = eci_from_evaluator(&grid, |t, _| if t == 4.0 { 0.0 } else { f64::INFINITY }, 0.1).unwrap();
        assert_eq!(one.members, vec![4.0]);
        assert_eq!(spans(&one.set), vec![(4.0, 4.0)]);
        assert!(eci_from_evaluator(&[], |_, _| 1.0, 0.1).is_err());
    }

    #[test]
    fn calibrated_levels() {
        let a = eci_calibrate_level(&CalibratorSpec::AllOrNothing { alpha: 0.05 }, 0.05).unwrap();
        assert!((a - 0.05).abs() < 1e-15);
        let a = eci_calibrate_level(&CalibratorSpec::Sqrtinv, 0.05).unwrap();
        assert!((a - 1.0 / 441.0).abs() < 1e-12);
        let family: Vec<(f64, UncertaintySet)> =
            [0.001, 0.002, 0.01, 0.05].iter().map(|a| (*a, iv(-1.0 / a, 1.0 / a))).collect();
        let c = eci_calibrate(&family, &CalibratorSpec::Sqrtinv, 0.05).unwrap();
        assert_eq!(spans(&c.set), vec![(-500.0, 500.0)]);
        assert!(family[3].1.is_subset_of(&c.set));
        let c = eci_calibrate(&family[2..], &CalibratorSpec::Sqrtinv, 0.05).unwrap();
        assert!(c.out_of_range);
    }

    #[test]
    fn eby_examples() {
        assert_eq!(eby_levels(&[0, 1, 2], 3, 0.05).unwrap()[2].1, 0.05);
        assert!((eby_levels(&[0, 1, 2, 3], 10, 0.05).unwrap()[0].1 - 0.02).abs() < 1e-15);
        assert!(eby_levels(&[0, 1], 1, 0.05).is_err());
    }

    #[test]
    fn majority_examples() {
        let same = vec![iv(0.0, 1.0); 4];
        assert_eq!(spans(&majority_vote(&same, 0.3).unwrap()), vec![(0.0, 1.0)]);
        let nested = [iv(-5.0, 5.0), iv(-4.0, 4.0), iv(-1.5, 1.5)];
        assert_eq!(spans(&majority_vote(&nested, 0.5).unwrap()), vec![(-4.0, 4.0)]);
        let three = [iv(0.0, 2.0), iv(1.0, 3.0), iv(2.0, 4.0)];
        assert_eq!(spans(&majority_vote(&three, 0.5).unwrap()), vec![(1.0, 3.0)]);
        let mixed = [iv(0.0, 1.0), UncertaintySet::labels([1], 0.9)];
        assert!(majority_vote(&mixed, 0.5).is_err());
    }

    #[test]
    fn touching_endpoints_give_points() {
        let s = [iv(0.0, 1.0), iv(1.0, 2.0), iv(5.0, 6.0)];
        assert_eq!(spans(&majority_vote(&s, 0.5).unwrap()), vec![(1.0, 1.0)]);
    }

    #[test]
    fn exchangeable_examples() {
        let two = [iv(0.0, 2.0), iv(1.0, 3.0)];
        assert_eq!(spans(&mv_exchangeable(&two).unwrap()), vec![(1.0, 2.0)]);
        let three = [iv(0.0, 2.0), iv(1.0, 3.0), iv(2.0, 4.0)];
        let e = mv_exchangeable(&three).unwrap();
        assert!(e.is_subset_of(&majority_vote(&three, 0.5).unwrap()));
        let p = mv_permuted(&three, &[2, 1, 0]).unwrap();
        assert_eq!(spans(&p), vec![(2.0, 3.0)]);
        assert!(mv_permuted(&three, &[0, 0, 1]).is_err());
    }

    #[test]
    fn randomized_examples() {
        let same = vec![iv(0.0, 1.0); 3];
        assert!(mv_randomized(&same, 1.0, RandomizedVote::Cr).unwrap().is_empty());
        let three = [iv(0.0, 2.0), iv(1.0, 3.0), iv(2.0, 4.0)];
        let w = [1.0 / 3.0; 3];
        assert_eq!(mv_weighted(&three, &w, 0.0).unwrap(), majority_vote(&three, 0.5).unwrap());
        for u in [0.0, 0.3, 0.7] {
            let cr = mv_randomized(&three, u, RandomizedVote::Cr).unwrap();
            let cu = mv_randomized(&three, u, RandomizedVote::Cu).unwrap();
            let cm = majority_vote(&three, 0.5).unwrap();
            assert!(cr.is_subset_of(&cm) && cr.is_subset_of(&cu));
        }
        assert!(mv_weighted(&three, &[0.5, 0.5], 0.0).is_err());
    }

    #[test]
    fn labels_vote() {
        let s = [
            UncertaintySet::labels([1, 2], 0.9),
            UncertaintySet::labels([2, 3], 0.9),
            UncertaintySet::labels([2], 0.9),
        ];
        assert_eq!(majority_vote(&s, 0.5).unwrap(), UncertaintySet::labels([2], 0.9));
    }

    #[test]
    fn midpoints() {
        assert_eq!(spans(&median_of_midpoints(&[(0.0, 2.0)], 0.9).unwrap()), vec![(0.0, 2.0)]);
        let s = median_of_midpoints(&[(-1.0, 1.0), (0.0, 2.0), (9.0, 11.0)], 0.9).unwrap();
        assert_eq!(spans(&s), vec![(0.0, 2.0)]);
        assert!(median_of_midpoints(&[(0.0, 1.0), (5.0, 6.0)], 0.9).unwrap().is_empty());
        assert!(median_of_midpoints(&[(0.0, 1.0), (0.0, 2.0)], 0.9).is_err());
        let overlapping = [(0.0, 2.0), (0.5, 2.5), (1.0, 3.0)];
        let sets: Vec<_> = overlapping.iter().map(|(a, b)| iv(*a, *b)).collect();
        assert_eq!(median_of_midpoints(&overlapping, 0.9).unwrap(), majority_vote(&sets, 0.5).unwrap());
    }

    #[test]
    fn momom_examples() {
        let data = vec![3.5; 30];
        let m = momom(&data, 5, 4, 1).unwrap();
        assert_eq!(m.estimate, 3.5);
        assert_eq!(m.trajectory.len(), 4);
        assert!(momom(&data, 31, 1, 1).is_err());
        let data: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let one = momom(&data, 4, 1, 9).unwrap();
        let mut perm: Vec<usize> = (0..20).collect();
        perm.shuffle(&mut rng_for(9, "momom", 0));
        assert_eq!(one.estimate, median_of_means(&data, 4, &perm));
    }

    #[test]
    fn running_and_size() {
        let same = vec![iv(0.0, 1.0); 3];
        assert!(running_mv(&same).unwrap().iter().all(|s| spans(s) == vec![(0.0, 1.0)]));
        let d = mv_size_check(&same, 0.5).unwrap();
        assert!(d.within_mean_bound && d.within_width_bound);
        assert_eq!(d.mean_bound, 2.0);
        assert_eq!(mv_coverage_bound(3, 0.05, 0.5, true), 1.0 - 0.075);
        assert_eq!(mv_coverage_bound(4, 0.05, 0.5, true), 0.9);
    }
}
