//! Universal inference: split, cross-fit and subsampled likelihood-ratio
//! e-values, confidence sets by test inversion, and the Gaussian split formulas.

use crate::confset::GridSelection;
use crate::core::{exchangeable_markov_test, EValue};
use crate::error::{check_open_alpha, domain, Error, Result};
use crate::seed::{rng_for, Rng};
use rand::Rng as _;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Fold assignment: `true` puts the point in D0 (where the ratio is
/// evaluated), `false` in D1 (where the alternative is fitted).
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub assignment: Vec<bool>,
    pub seed: u64,
    pub fraction: f64,
}

const MAX_REDRAWS: usize = 10_000;

impl SplitPlan {
    /// Independent coin flips with `P(D0) = fraction`, redrawn until both
    /// folds are non-empty. The draw never looks at the data.
    pub fn coin_flips(n: usize, fraction: f64, seed: u64, index: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(domain(format!("split fraction must lie in (0, 1), got {fraction}")));
        }
        if n < 2 {
            return Err(Error::Empty("fold"));
        }
        let mut rng = rng_for(seed, "split", index);
        for _ in 0..MAX_REDRAWS {
            let assignment: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < fraction).collect();
            let d0 = assignment.iter().filter(|a| **a).count();
            if d0 > 0 && d0 < n {
                return Ok(Self { assignment, seed, fraction });
            }
        }
        Err(Error::Empty("fold"))
    }

    pub fn from_assignment(assignment: Vec<bool>, fraction: f64) -> Result<Self> {
        let d0 = assignment.iter().filter(|a| **a).count();
        if d0 == 0 || d0 == assignment.len() {
            return Err(Error::Empty("fold"));
        }
        Ok(Self { assignment, seed: 0, fraction })
    }

    pub fn swapped(&self) -> Self {
        Self { assignment: self.assignment.iter().map(|a| !a).collect(), seed: self.seed, fraction: 1.0 - self.fraction }
    }

    pub fn folds<T: Clone>(&self, sample: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        if sample.len() != self.assignment.len() {
            return Err(Error::Dimension { expected: self.assignment.len(), got: sample.len() });
        }
        let mut d0 = Vec::new();
        let mut d1 = Vec::new();
        for (x, a) in sample.iter().zip(&self.assignment) {
            if *a { d0.push(x.clone()) } else { d1.push(x.clone()) }
        }
        Ok((d0, d1))
    }
}

pub type LogDensity<T> = Arc<dyn Fn(&T) -> f64 + Send + Sync>;

/// A fitted model: log-density evaluator plus fitted parameters.
#[derive(Clone)]
pub struct FittedModel<T> {
    pub log_density: LogDensity<T>,
    pub metadata: BTreeMap<String, f64>,
}

impl<T> FittedModel<T> {
    pub fn new<F: Fn(&T) -> f64 + Send + Sync + 'static>(f: F, metadata: BTreeMap<String, f64>) -> Self {
        Self { log_density: Arc::new(f), metadata }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.metadata.get(name).copied()
    }
}

impl<T> std::fmt::Debug for FittedModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FittedModel").field("metadata", &self.metadata).finish()
    }
}

/// `log q - log p` with `0/0` read as one.
fn log_ratio(lq: f64, lp: f64) -> Result<f64> {
    if lp == f64::NEG_INFINITY {
        return Ok(if lq == f64::NEG_INFINITY { 0.0 } else { f64::INFINITY });
    }
    let r = lq - lp;
    if r.is_nan() {
        return Err(Error::Degenerate("log-density returned NaN".into()));
    }
    Ok(r)
}

/// Log of the split likelihood-ratio statistic on D0.
pub fn split_lrt_log_e<T, A, N>(sample: &[T], plan: &SplitPlan, fit_alternative: A, fit_null_mle: N) -> Result<f64>
where
    T: Clone,
    A: Fn(&[T]) -> Result<FittedModel<T>>,
    N: Fn(&[T]) -> Result<FittedModel<T>>,
{
    let (d0, d1) = plan.folds(sample)?;
    let q = fit_alternative(&d1)?;
    let p = fit_null_mle(&d0)?;
    let mut s = 0.0;
    for x in &d0 {
        s += log_ratio((q.log_density)(x), (p.log_density)(x))?;
    }
    Ok(s)
}

pub fn split_lrt_e<T, A, N>(sample: &[T], plan: &SplitPlan, fit_alternative: A, fit_null_mle: N) -> Result<EValue>
where
    T: Clone,
    A: Fn(&[T]) -> Result<FittedModel<T>>,
    N: Fn(&[T]) -> Result<FittedModel<T>>,
{
    EValue::new(split_lrt_log_e(sample, plan, fit_alternative, fit_null_mle)?.exp())
}

/// Average of the split statistic and the one with the folds swapped.
pub fn crossfit_e<T, A, N>(sample: &[T], plan: &SplitPlan, fit_alternative: A, fit_null_mle: N) -> Result<EValue>
where
    T: Clone,
    A: Fn(&[T]) -> Result<FittedModel<T>>,
    N: Fn(&[T]) -> Result<FittedModel<T>>,
{
    let a = split_lrt_e(sample, plan, &fit_alternative, &fit_null_mle)?.get();
    let b = split_lrt_e(sample, &plan.swapped(), &fit_alternative, &fit_null_mle)?.get();
    EValue::new(0.5 * (a + b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsampled {
    pub value: EValue,
    /// Per-split e-values in split order.
    pub splits: Vec<f64>,
}

/// Mean of `b` split e-values over independent coin-flip plans; plan `i`
/// uses the stream derived from `(seed, i)`.
pub fn subsampled_e<T, A, N>(
    sample: &[T],
    b: usize,
    fraction: f64,
    seed: u64,
    fit_alternative: A,
    fit_null_mle: N,
) -> Result<Subsampled>
where
    T: Clone + Sync,
    A: Fn(&[T]) -> Result<FittedModel<T>> + Sync + Send,
    N: Fn(&[T]) -> Result<FittedModel<T>> + Sync + Send,
{
    if b == 0 {
        return Err(domain("number of splits must be at least one"));
    }
    let idx: Vec<u64> = (0..b as u64).collect();
    let results = crate::par::map(&idx, |&i| {
        let plan = SplitPlan::coin_flips(sample.len(), fraction, seed, i)?;
        split_lrt_e(sample, &plan, &fit_alternative, &fit_null_mle).map(EValue::get)
    });
    let splits = results.into_iter().collect::<Result<Vec<f64>>>()?;
    let value = EValue::new(splits.iter().sum::<f64>() / b as f64)?;
    Ok(Subsampled { value, splits })
}

/// Rejects once a running average of split e-values reaches `1/alpha`.
pub fn subsampled_lrt_sequential_test(split_es: &[f64], alpha: f64) -> Result<(bool, Option<usize>)> {
    exchangeable_markov_test(split_es, alpha)
}

/// `{theta : prod_{D0} q1 / p_theta < 1/alpha}` over an ascending grid.
pub fn universal_confidence_set<T, A, L>(
    sample: &[T],
    plan: &SplitPlan,
    fit_alternative: A,
    grid: &[f64],
    log_likelihood: L,
    alpha: f64,
) -> Result<GridSelection>
where
    T: Clone,
    A: Fn(&[T]) -> Result<FittedModel<T>>,
    L: Fn(f64, &T) -> f64,
{
    check_open_alpha(alpha)?;
    if grid.is_empty() {
        return Err(Error::Empty("parameter grid"));
    }
    let (d0, d1) = plan.folds(sample)?;
    let q = fit_alternative(&d1)?;
    let lq: f64 = d0.iter().map(|x| (q.log_density)(x)).sum();
    let cut = (1.0 / alpha).ln();
    let keep: Vec<bool> = grid
        .iter()
        .map(|t| {
            let lp: f64 = d0.iter().map(|x| log_likelihood(*t, x)).sum();
            log_ratio(lq, lp).map(|r| r < cut).unwrap_or(false)
        })
        .collect();
    crate::confset::GridSelection::from_mask(grid, &keep, 1.0 - alpha)
}

/// Share of data in D0 minimising the expected squared radius of the
/// Gaussian identity-covariance split set in dimension `d`.
pub fn optimal_split_fraction(d: usize, alpha: f64) -> Result<f64> {
    check_open_alpha(alpha)?;
    if d == 0 {
        return Err(domain("dimension must be positive"));
    }
    let l = (1.0 / alpha).ln();
    let d = d as f64;
    // Rationalised form of 1 - (sqrt(4d^2 + 8dl) - 2d) / (4l), stable for large d.
    Ok(1.0 - 2.0 * d / (2.0 * d + (4.0 * d * d + 8.0 * d * l).sqrt()))
}

/// Expected squared radius of the split set with `n0 = p0 n` points in D0.
pub fn expected_split_radius_sq(n: usize, d: usize, p0: f64, alpha: f64) -> f64 {
    let n = n as f64;
    let d = d as f64;
    2.0 / (n * p0) * (1.0 / alpha).ln() + d * (1.0 / (n * p0) + 1.0 / (n * (1.0 - p0)))
}

/// Squared radius of the classical LRT ball, `chi2_{d, 1-alpha} / n`.
pub fn classical_radius_sq(n: usize, d: usize, alpha: f64) -> Result<f64> {
    check_open_alpha(alpha)?;
    let chi = ChiSquared::new(d as f64).map_err(|e| domain(e.to_string()))?;
    let direct = if alpha > 1e-8 { chi.inverse_cdf(1.0 - alpha) } else { f64::NAN };
    let q = if direct.is_finite() {
        direct
    } else {
        // 1 - alpha loses precision for tiny alpha, and the library inverse
        // breaks down for very large d; invert the upper tail instead.
        let mut hi = d as f64 + 1.0;
        while chi.sf(hi) > alpha {
            hi *= 2.0;
        }
        crate::numeric::bisect(|x| (chi.sf(x) / alpha).ln(), 0.0, hi, 1e-12 * hi)?
    };
    Ok(q / n as f64)
}

/// Ratio of expected equal-split to classical squared radius; independent of `n`.
pub fn split_radius_ratio(d: usize, alpha: f64) -> Result<f64> {
    Ok(expected_split_radius_sq(1, d, 0.5, alpha) / classical_radius_sq(1, d, alpha)?)
}

/// Realised squared radius of the split set for identity-covariance data:
/// `(2 / n0) log(1/alpha) + |mean(D0) - mean(D1)|^2`.
pub fn gaussian_split_radius_sq(d0: &[Vec<f64>], d1: &[Vec<f64>], alpha: f64) -> Result<f64> {
    check_open_alpha(alpha)?;
    let m0 = vector_mean(d0)?;
    let m1 = vector_mean(d1)?;
    if m0.len() != m1.len() {
        return Err(Error::Dimension { expected: m0.len(), got: m1.len() });
    }
    let gap: f64 = m0.iter().zip(&m1).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(2.0 / d0.len() as f64 * (1.0 / alpha).ln() + gap)
}

fn vector_mean(xs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = xs.first().ok_or(Error::Empty("fold"))?.len();
    let mut m = vec![0.0; d];
    for x in xs {
        if x.len() != d {
            return Err(Error::Dimension { expected: d, got: x.len() });
        }
        for (a, b) in m.iter_mut().zip(x) {
            *a += b;
        }
    }
    m.iter_mut().for_each(|a| *a /= xs.len() as f64);
    Ok(m)
}

/// Maximum-likelihood fitters for scalar data.
pub mod fit {
    use super::*;
    use crate::evariables::density;

    fn meta(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn nonempty(data: &[f64]) -> Result<()> {
        if data.is_empty() {
            return Err(Error::Empty("fold"));
        }
        Ok(())
    }

    /// `N(mean, 1)` at the sample mean.
    pub fn gaussian_mean(data: &[f64]) -> Result<FittedModel<f64>> {
        nonempty(data)?;
        let mu = crate::numeric::mean(data);
        Ok(gaussian_at(mu))
    }

    /// `N(mu, 1)` at a fixed mean, for singleton nulls.
    pub fn gaussian_at(mu: f64) -> FittedModel<f64> {
        FittedModel::new(move |x: &f64| density::gaussian_log(mu, 1.0)(*x), meta(&[("mean", mu)]))
    }

    /// `N(mean, var)` at the sample mean and (biased) sample variance.
    pub fn gaussian_mean_var(data: &[f64]) -> Result<FittedModel<f64>> {
        nonempty(data)?;
        let mu = crate::numeric::mean(data);
        let var = data.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / data.len() as f64;
        if !(var > 0.0) {
            return Err(Error::Degenerate("zero sample variance".into()));
        }
        let sd = var.sqrt();
        Ok(FittedModel::new(move |x: &f64| density::gaussian_log(mu, sd)(*x), meta(&[("mean", mu), ("var", var)])))
    }

    /// Bernoulli at the sample frequency of ones.
    pub fn bernoulli(data: &[f64]) -> Result<FittedModel<f64>> {
        nonempty(data)?;
        if data.iter().any(|x| *x != 0.0 && *x != 1.0) {
            return Err(domain("Bernoulli data must be 0 or 1"));
        }
        let p = crate::numeric::mean(data);
        Ok(FittedModel::new(move |x: &f64| density::bernoulli(p)(*x).ln(), meta(&[("p", p)])))
    }

    pub const EM_RESTARTS: usize = 10;
    pub const EM_ITERATIONS: usize = 200;
    /// EM stops early once neither mean moves by more than this.
    pub const EM_TOL: f64 = 1e-10;

    fn mixture_log(x: f64, w: f64, m1: f64, m2: f64) -> f64 {
        let a = w.ln() + density::gaussian_log(m1, 1.0)(x);
        let b = (1.0 - w).ln() + density::gaussian_log(m2, 1.0)(x);
        crate::numeric::log_sum_exp(&[a, b])
    }

    /// Unit-variance two-component location mixture with known weight `w`
    /// on the first component; EM from random data points as starts.
    pub fn two_component_mixture(data: &[f64], w: f64, seed: u64) -> Result<FittedModel<f64>> {
        nonempty(data)?;
        if !(w > 0.0 && w < 1.0) {
            return Err(domain("mixture weight must lie in (0, 1)"));
        }
        let mut rng: Rng = rng_for(seed, "em", data.len() as u64);
        let loglik = |m1: f64, m2: f64| data.iter().map(|x| mixture_log(*x, w, m1, m2)).sum::<f64>();
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for _ in 0..EM_RESTARTS {
            let mut m1 = data[rng.random_range(0..data.len())];
            let mut m2 = data[rng.random_range(0..data.len())];
            for _ in 0..EM_ITERATIONS {
                let (mut s1, mut n1, mut s2, mut n2) = (0.0, 0.0, 0.0, 0.0);
                for x in data {
                    let a = w.ln() + density::gaussian_log(m1, 1.0)(*x);
                    let b = (1.0 - w).ln() + density::gaussian_log(m2, 1.0)(*x);
                    let r = 1.0 / (1.0 + (b - a).exp());
                    s1 += r * x;
                    n1 += r;
                    s2 += (1.0 - r) * x;
                    n2 += 1.0 - r;
                }
                let (prev1, prev2) = (m1, m2);
                if n1 > 0.0 {
                    m1 = s1 / n1;
                }
                if n2 > 0.0 {
                    m2 = s2 / n2;
                }
                if (m1 - prev1).abs().max((m2 - prev2).abs()) < EM_TOL {
                    break;
                }
            }
            let ll = loglik(m1, m2);
            if ll > best.0 {
                best = (ll, m1, m2);
            }
        }
        let (_, m1, m2) = best;
        Ok(FittedModel::new(move |x: &f64| mixture_log(*x, w, m1, m2), meta(&[("mean1", m1), ("mean2", m2), ("weight", w)])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plans_are_seeded_and_nonempty() {
        let a = SplitPlan::coin_flips(20, 0.5, 3, 0).unwrap();
        let b = SplitPlan::coin_flips(20, 0.5, 3, 0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, SplitPlan::coin_flips(20, 0.5, 3, 1).unwrap());
        assert!(SplitPlan::coin_flips(1, 0.5, 3, 0).is_err());
        assert!(SplitPlan::from_assignment(vec![true, true], 0.5).is_err());
    }

    #[test]
    fn split_examples() {
        let x = [0.3, -1.2, 0.8, 2.0, -0.1, 0.4];
        let plan = SplitPlan::coin_flips(x.len(), 0.5, 7, 0).unwrap();
        // Alternative from the null family: numerator cannot beat the maximised denominator.
        let e = split_lrt_e(&x, &plan, fit::gaussian_mean, fit::gaussian_mean).unwrap();
        assert!(e.get() <= 1.0 + 1e-12);
        let truth = |_: &[f64]| Ok(fit::gaussian_at(0.0));
        assert_eq!(split_lrt_e(&x, &plan, truth, truth).unwrap().get(), 1.0);
    }

    #[test]
    fn subsampled_matches_split_and_mean() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = subsampled_e(&x, 1, 0.5, 11, fit::gaussian_mean, fit::gaussian_mean).unwrap();
        let plan = SplitPlan::coin_flips(x.len(), 0.5, 11, 0).unwrap();
        assert_eq!(s.value.get(), split_lrt_e(&x, &plan, fit::gaussian_mean, fit::gaussian_mean).unwrap().get());
        let s = subsampled_e(&x, 8, 0.5, 11, fit::gaussian_mean, fit::gaussian_mean).unwrap();
        assert_eq!(s.value.get(), s.splits.iter().sum::<f64>() / 8.0);
        assert!(subsampled_e(&x, 0, 0.5, 11, fit::gaussian_mean, fit::gaussian_mean).is_err());
        let alt = |d: &[f64]| Ok(fit::gaussian_at(crate::numeric::mean(d) + 0.5));
        let s = subsampled_e(&x, 8, 0.5, 11, alt, fit::gaussian_mean).unwrap();
        let per: f64 = s.splits.iter().map(|e| e.ln()).sum::<f64>() / 8.0;
        assert!(s.value.get().ln() >= per);
    }

    #[test]
    fn crossfit_averages_both_directions() {
        let x = [0.5, 1.5, -0.3, 0.9];
        let plan = SplitPlan::from_assignment(vec![true, false, true, false], 0.5).unwrap();
        let alt = |d: &[f64]| Ok(fit::gaussian_at(crate::numeric::mean(d)));
        let a = split_lrt_e(&x, &plan, alt, fit::gaussian_mean).unwrap().get();
        let b = split_lrt_e(&x, &plan.swapped(), alt, fit::gaussian_mean).unwrap().get();
        assert_eq!(crossfit_e(&x, &plan, alt, fit::gaussian_mean).unwrap().get(), 0.5 * (a + b));
    }

    #[test]
    fn split_fraction_examples() {
        assert!((optimal_split_fraction(2, 0.05).unwrap() - 0.6665).abs() < 1e-4);
        assert!((optimal_split_fraction(1_000_000, 0.05).unwrap() - 0.5).abs() < 1e-5);
        assert!(optimal_split_fraction(1, 1e-300).unwrap() > 0.9);
        assert!(optimal_split_fraction(1, 1.0).is_err());
        let d = 3;
        let a = 0.1;
        let p = optimal_split_fraction(d, a).unwrap();
        let r = |q: f64| expected_split_radius_sq(100, d, q, a);
        assert!(r(p) <= r(p - 1e-3) && r(p) <= r(p + 1e-3));
    }

    #[test]
    fn radius_ratio_trends() {
        let r1 = split_radius_ratio(1, 1e-1).unwrap();
        let r2 = split_radius_ratio(1, 1e-6).unwrap();
        assert!(r2 < r1 && r2 > 2.0);
        // U-shaped in d: it dips below 4 at moderate d before climbing to the limit.
        let ratios: Vec<f64> = [16, 64, 1024, 1_000_000].iter().map(|d| split_radius_ratio(*d, 0.1).unwrap()).collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]));
        assert!((ratios[3] - 4.0).abs() < 0.01);
    }

    #[test]
    fn confidence_set_contains_the_centre() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let plan = SplitPlan::coin_flips(x.len(), 0.5, 2, 0).unwrap();
        let grid: Vec<f64> = (-40..=40).map(|i| i as f64 / 20.0).collect();
        let ll = |t: f64, x: &f64| crate::evariables::density::gaussian_log(t, 1.0)(*x);
        let narrow = universal_confidence_set(&x, &plan, fit::gaussian_mean, &grid, ll, 0.5).unwrap();
        let wide = universal_confidence_set(&x, &plan, fit::gaussian_mean, &grid, ll, 0.01).unwrap();
        assert!(narrow.members.len() <= wide.members.len());
        assert!(wide.is_contiguous());
    }

    #[test]
    fn mixture_em_recovers_separated_means() {
        let data: Vec<f64> = (0..200).map(|i| if i % 4 == 0 { -3.0 } else { 3.0 } + ((i * 37) % 11) as f64 / 20.0 - 0.25).collect();
        let m = fit::two_component_mixture(&data, 0.25, 1).unwrap();
        assert!((m.param("mean1").unwrap() + 3.0).abs() < 0.3);
        assert!((m.param("mean2").unwrap() - 3.0).abs() < 0.3);
    }
}
