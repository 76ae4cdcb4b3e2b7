//! Concrete e-variables and closed-form numeraires.

use crate::core::EValue;
use crate::error::{domain, Error, Result};
use crate::numeric::{bisect, log_sum_exp, ROOT_TOL};
use serde::{Deserialize, Serialize};

/// A finite-support law given by `(point, mass)` atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDist {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteDist {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty("distribution atoms"));
        }
        if atoms.iter().any(|(x, m)| !x.is_finite() || !(*m >= 0.0)) {
            return Err(domain("atoms need finite points and nonnegative masses"));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain(format!("masses sum to {total}, expected 1")));
        }
        let mut sorted = atoms.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(domain("atom points must be distinct"));
        }
        Ok(Self { atoms: sorted })
    }

    /// Atoms in ascending order of their points.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(x, m)| x * m).sum()
    }
}

fn nonempty(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        Err(Error::Empty("sample"))
    } else {
        Ok(())
    }
}

/// `exp(mu S_n - n mu^2 / 2)` for a Gaussian mean alternative `mu` against zero.
pub fn gaussian_lr_e(sample: &[f64], mu: f64) -> Result<EValue> {
    nonempty(sample)?;
    let s: f64 = sample.iter().sum();
    EValue::new((mu * s - sample.len() as f64 * mu * mu / 2.0).exp())
}

pub fn gaussian_two_sided_e(sample: &[f64], delta: f64) -> Result<EValue> {
    nonempty(sample)?;
    if !(delta > 0.0) {
        return Err(domain(format!("delta must be positive, got {delta}")));
    }
    let z = sample.iter().sum::<f64>() / (sample.len() as f64).sqrt();
    let h = delta * delta / 2.0;
    EValue::new(0.5 * ((delta * z - h).exp() + (-delta * z - h).exp()))
}

pub fn bernoulli_lr_e(sample: &[f64], p: f64, q: f64) -> Result<EValue> {
    for (name, v) in [("p", p), ("q", q)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(domain(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    if sample.iter().any(|x| *x != 0.0 && *x != 1.0) {
        return Err(domain("Bernoulli sample entries must be 0 or 1"));
    }
    let ones = sample.iter().filter(|x| **x == 1.0).count() as f64;
    let zeros = sample.len() as f64 - ones;
    EValue::new((ones * (q / p).ln() + zeros * ((1.0 - q) / (1.0 - p)).ln()).exp())
}

/// `(B + 1) R_0 / sum_b R_b`, with index 0 the original score; one if all are zero.
pub fn soft_rank_e(scores: &[f64]) -> Result<EValue> {
    if scores.is_empty() {
        return Err(Error::Empty("scores"));
    }
    if scores.iter().any(|r| !(*r >= 0.0)) {
        return Err(domain("scores must be nonnegative"));
    }
    let total: f64 = scores.iter().sum();
    if total == 0.0 {
        return Ok(EValue::ONE);
    }
    EValue::new(scores.len() as f64 * scores[0] / total)
}

/// `2 q(z) / (q(z) + q(-z))` for a symmetric null.
pub fn symmetry_e<Q: Fn(f64) -> f64>(z: f64, q: Q) -> Result<EValue> {
    let (a, b) = (q(z), q(-z));
    if !(a >= 0.0 && b >= 0.0) {
        return Err(domain("density values must be nonnegative"));
    }
    if a == 0.0 {
        return EValue::new(0.0);
    }
    EValue::new(2.0 * a / (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    MeanOnly,
    SecondMoment,
}

pub fn mean_variance_e(z: f64, mu: f64, sigma: f64, lambda: f64, kind: MomentKind) -> Result<EValue> {
    crate::error::check_unit("lambda", lambda)?;
    match kind {
        MomentKind::MeanOnly => {
            if !(mu > 0.0) {
                return Err(domain(format!("mean bound must be positive, got {mu}")));
            }
            if z < 0.0 {
                return Err(domain("observation must be nonnegative"));
            }
            EValue::new(1.0 - lambda + lambda * z / mu)
        }
        MomentKind::SecondMoment => {
            if !(sigma > 0.0) {
                return Err(domain(format!("sigma must be positive, got {sigma}")));
            }
            EValue::new(1.0 - lambda + lambda * z * z / (mu * mu + sigma * sigma))
        }
    }
}

pub fn subgaussian_e(z: f64, lambda: f64, two_sided: bool) -> Result<EValue> {
    if !two_sided && lambda < 0.0 {
        return Err(domain("one-sided test needs lambda >= 0"));
    }
    EValue::new((lambda * z - lambda * lambda / 2.0).exp())
}

/// Numeraire for the null `{P : dP/dP0 <= gamma}`: returns `z0` and the
/// map `x -> max(x, z0) / gamma` applied to likelihood-ratio values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrBoundNumeraire {
    pub z0: f64,
    pub gamma: f64,
}

impl LrBoundNumeraire {
    pub fn eval(&self, x: f64) -> f64 {
        x.max(self.z0) / self.gamma
    }
}

/// Largest `z0 >= 0` with `int_0^{1/gamma} max(q_t, z0) dt = 1`, where `q_t`
/// is the upper quantile function of the likelihood ratio under `P0`.
pub fn lr_bound_numeraire(ratio: &DiscreteDist, gamma: f64) -> Result<LrBoundNumeraire> {
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(domain(format!("gamma must be at least 1, got {gamma}")));
    }
    if ratio.atoms().iter().any(|(x, _)| *x < 0.0) {
        return Err(domain("likelihood ratio values must be nonnegative"));
    }
    if ratio.mean() > 1.0 + 1e-12 {
        return Err(Error::Infeasible(format!("likelihood ratio has mean {} above 1", ratio.mean())));
    }
    // Segments of the quantile function on (0, 1/gamma): largest values first.
    let h = 1.0 / gamma;
    let mut segs: Vec<(f64, f64)> = Vec::new();
    let mut left = h;
    for &(v, m) in ratio.atoms().iter().rev() {
        if left <= 0.0 {
            break;
        }
        let len = m.min(left);
        if len > 0.0 {
            segs.push((v, len));
        }
        left -= len;
    }
    let g = |z: f64| -> f64 { segs.iter().map(|(v, l)| v.max(z) * l).sum() };
    if g(0.0) > 1.0 + 1e-12 {
        return Err(Error::Infeasible("no z0 >= 0 solves the budget equation".into()));
    }
    // g is continuous, piecewise linear and nondecreasing; find sup{z : g(z) <= 1}.
    let mut breaks: Vec<f64> = segs.iter().map(|s| s.0).filter(|v| *v > 0.0).collect();
    breaks.sort_by(f64::total_cmp);
    let mut a = 0.0;
    for &b in &breaks {
        if g(b) > 1.0 {
            let slope: f64 = segs.iter().filter(|(v, _)| *v <= a).map(|s| s.1).sum();
            let z0 = a + (1.0 - g(a)) / slope;
            return Ok(LrBoundNumeraire { z0, gamma });
        }
        a = b;
    }
    // Beyond the largest value g(z) = z * h.
    Ok(LrBoundNumeraire { z0: gamma.max(a), gamma })
}

/// Root in `(0, 1/mu)` of `(1 + l (1 - mu)) / (1 - l mu) = e^l`; the
/// numeraire against the uniform alternative is `1 + l (z - mu)`.
pub fn bounded_mean_numeraire_lambda(mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 0.5) {
        return Err(domain(format!("mu must lie in (0, 1/2), got {mu}")));
    }
    let h = |l: f64| (l * (1.0 - mu)).ln_1p() - (-l * mu).ln_1p() - l;
    let hi = (1.0 - 1e-12) / mu;
    // h vanishes at 0, is negative just to its right and diverges at 1/mu.
    let mut lo = 0.5 * hi;
    let mut iter = 0;
    while h(lo) >= 0.0 {
        lo *= 0.5;
        iter += 1;
        if iter > 200 {
            return Err(Error::NoConvergence("could not bracket the root".into()));
        }
    }
    bisect(h, lo, hi, ROOT_TOL * 1e-3)
}

/// `exp(log(p_theta1 / p_theta0)(z))` for a monotone likelihood-ratio family.
pub fn mlr_numeraire_e<L: Fn(f64) -> f64>(z: f64, logratio: L) -> Result<EValue> {
    EValue::new(logratio(z).exp())
}

pub fn t_test_e(sample: &[f64], c: f64) -> Result<EValue> {
    nonempty(sample)?;
    if !(c > 0.0) {
        return Err(domain(format!("c must be positive, got {c}")));
    }
    let n = sample.len() as f64;
    let s: f64 = sample.iter().sum();
    let v: f64 = sample.iter().map(|x| x * x).sum();
    let c2 = c * c;
    let a = (n + c2) * v;
    let denom = a - s * s;
    if !(denom > 0.0) {
        return Err(Error::Degenerate("t-test denominator is not positive".into()));
    }
    let log_e = 0.5 * (c2 / (n + c2)).ln() + 0.5 * n * (a / denom).ln();
    EValue::new(log_e.exp())
}

/// Uniform mixture over changepoints of suffix likelihood ratios.
pub fn changepoint_e<L: Fn(f64) -> f64>(sample: &[f64], logratio: L) -> Result<EValue> {
    nonempty(sample)?;
    let mut acc = 0.0;
    let mut logs = Vec::with_capacity(sample.len());
    for x in sample.iter().rev() {
        acc += logratio(*x);
        logs.push(acc);
    }
    EValue::new((log_sum_exp(&logs) - (sample.len() as f64).ln()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CltDenominator {
    RootMeanSquare,
    SampleSd,
}

pub fn clt_asymptotic_e(sample: &[f64], lambda: f64, two_sided: bool, denom: CltDenominator) -> Result<EValue> {
    nonempty(sample)?;
    let n = sample.len() as f64;
    let xbar = sample.iter().sum::<f64>() / n;
    let s = match denom {
        CltDenominator::RootMeanSquare => (sample.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
        CltDenominator::SampleSd => {
            if sample.len() < 2 {
                return Err(domain("sample standard deviation needs n >= 2"));
            }
            (sample.iter().map(|x| (x - xbar).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        }
    };
    if !(s > 0.0) {
        return Err(Error::Degenerate("zero scale estimate".into()));
    }
    let z = n.sqrt() * xbar / s;
    let h = lambda * lambda / 2.0;
    let e = if two_sided {
        0.5 * ((lambda * z - h).exp() + (-lambda * z - h).exp())
    } else {
        (lambda * z - h).exp()
    };
    EValue::new(e)
}

/// `sum_j q_j(x) / sum_j p_j(x)` for separable compound testing.
pub fn compound_separable_e(null_values: &[f64], alt_values: &[f64]) -> Result<EValue> {
    if null_values.len() != alt_values.len() {
        return Err(Error::Dimension { expected: null_values.len(), got: alt_values.len() });
    }
    if null_values.iter().chain(alt_values).any(|d| !(*d >= 0.0)) {
        return Err(domain("density values must be nonnegative"));
    }
    let num: f64 = alt_values.iter().sum();
    let den: f64 = null_values.iter().sum();
    EValue::new(match (num == 0.0, den == 0.0) {
        (true, true) => 1.0,
        (false, true) => f64::INFINITY,
        _ => num / den,
    })
}

/// `E_k = K S_k^2 / sum_j sigma_hat_j^2` for the simultaneous t-test model.
pub fn compound_t_e(sums_of_squares: &[f64], variance_hats: &[f64], k: usize) -> Result<Vec<f64>> {
    if sums_of_squares.len() != k {
        return Err(Error::Dimension { expected: k, got: sums_of_squares.len() });
    }
    if variance_hats.len() != k {
        return Err(Error::Dimension { expected: k, got: variance_hats.len() });
    }
    if variance_hats.iter().any(|v| !(*v > 0.0)) {
        return Err(domain("variance estimates must be positive"));
    }
    let total: f64 = variance_hats.iter().sum();
    Ok(sums_of_squares.iter().map(|s| k as f64 * s / total).collect())
}

/// Density evaluators shipped with the crate.
pub mod density {
    use std::f64::consts::PI;

    pub fn gaussian(mean: f64, sd: f64) -> impl Fn(f64) -> f64 + Copy + Send + Sync {
        move |x: f64| (-(x - mean).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * PI).sqrt())
    }

    pub fn gaussian_log(mean: f64, sd: f64) -> impl Fn(f64) -> f64 + Copy + Send + Sync {
        move |x: f64| -(x - mean).powi(2) / (2.0 * sd * sd) - sd.ln() - 0.5 * (2.0 * PI).ln()
    }

    pub fn bernoulli(p: f64) -> impl Fn(f64) -> f64 + Copy + Send + Sync {
        move |x: f64| if x == 1.0 { p } else if x == 0.0 { 1.0 - p } else { 0.0 }
    }

    pub fn uniform(lo: f64, hi: f64) -> impl Fn(f64) -> f64 + Copy + Send + Sync {
        move |x: f64| if x >= lo && x <= hi { 1.0 / (hi - lo) } else { 0.0 }
    }

    /// Piecewise-constant density on consecutive `edges` with given `heights`.
    pub fn piecewise_constant(edges: Vec<f64>, heights: Vec<f64>) -> impl Fn(f64) -> f64 + Send + Sync {
        move |x: f64| {
            for (i, w) in edges.windows(2).enumerate() {
                if x >= w[0] && x < w[1] {
                    return heights[i];
                }
            }
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn likelihood_ratio_examples() {
        let zero_sum = [1.0, -1.0, 0.5, -0.5];
        assert!(close(gaussian_lr_e(&zero_sum, 1.0).unwrap().get(), (-2f64).exp(), 1e-14));
        assert!(close(gaussian_lr_e(&[0.7], 0.7).unwrap().get(), (0.245f64).exp(), 1e-14));
        assert!(gaussian_lr_e(&[], 1.0).is_err());
        assert!(close(gaussian_two_sided_e(&[0.0], 1.0).unwrap().get(), (-0.5f64).exp(), 1e-14));
        let z2 = [2.0];
        let want = ((1.5f64).exp() + (-10.5f64).exp()) / 2.0;
        assert!(close(gaussian_two_sided_e(&z2, 3.0).unwrap().get(), want, 1e-14));
        assert!(close(gaussian_two_sided_e(&[1.3], 1e-9).unwrap().get(), 1.0, 1e-9));
        assert!(gaussian_two_sided_e(&z2, 0.0).is_err());
    }

    #[test]
    fn bernoulli_examples() {
        let data = [1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        assert!(close(bernoulli_lr_e(&data, 0.3, 0.3).unwrap().get(), 1.0, 1e-14));
        let want = 0.6f64.powi(7) * 0.4 * 2f64.powi(8);
        assert!(close(bernoulli_lr_e(&data, 0.5, 0.6).unwrap().get(), want, 1e-13));
        assert!(close(bernoulli_lr_e(&[1.0; 9], 0.5, 0.6).unwrap().get(), 1.2f64.powi(9), 1e-13));
        assert!(bernoulli_lr_e(&[0.5], 0.5, 0.6).is_err());
    }

    #[test]
    fn rank_and_symmetry_examples() {
        assert_eq!(soft_rank_e(&[2.0; 5]).unwrap().get(), 1.0);
        assert_eq!(soft_rank_e(&[3.0, 1.0, 1.0, 1.0]).unwrap().get(), 2.0);
        assert_eq!(soft_rank_e(&[0.0; 4]).unwrap().get(), 1.0);
        assert!(soft_rank_e(&[-1.0, 1.0]).is_err());
        assert_eq!(symmetry_e(0.3, density::gaussian(0.0, 1.0)).unwrap().get(), 1.0);
        assert_eq!(symmetry_e(1.0, density::uniform(0.0, 2.0)).unwrap().get(), 2.0);
        let q = |z: f64| if z > 0.0 { 1.0 } else { 3.0 };
        assert_eq!(symmetry_e(1.0, q).unwrap().get(), 0.5);
    }

    #[test]
    fn moment_examples() {
        assert_eq!(mean_variance_e(3.0, 1.0, 1.0, 0.0, MomentKind::MeanOnly).unwrap().get(), 1.0);
        assert_eq!(mean_variance_e(2.0, 2.0, 1.0, 1.0, MomentKind::MeanOnly).unwrap().get(), 1.0);
        assert_eq!(mean_variance_e(3.0, 1.0, 1.0, 1.0, MomentKind::SecondMoment).unwrap().get(), 4.5);
        assert!(mean_variance_e(3.0, 0.0, 1.0, 1.0, MomentKind::MeanOnly).is_err());
        assert_eq!(subgaussian_e(5.0, 0.0, false).unwrap().get(), 1.0);
        assert!(close(subgaussian_e(1.5, 1.5, false).unwrap().get(), (1.125f64).exp(), 1e-14));
        assert!(subgaussian_e(1.0, -1.0, false).is_err());
    }

    #[test]
    fn lr_bound_examples() {
        let two = DiscreteDist::new(vec![(0.0, 0.5), (2.0, 0.5)]).unwrap();
        let n = lr_bound_numeraire(&two, 1.0).unwrap();
        assert_eq!(n.eval(0.0), 0.0);
        assert_eq!(n.eval(2.0), 2.0);
        let one = DiscreteDist::new(vec![(1.0, 1.0)]).unwrap();
        let n = lr_bound_numeraire(&one, 2.0).unwrap();
        assert!(close(n.z0, 2.0, 1e-12));
        assert!(close(n.eval(1.0), 1.0, 1e-12));
        let n = lr_bound_numeraire(&two, 2.0).unwrap();
        assert!(close(n.z0, 2.0, 1e-12));
        assert_eq!(n.eval(0.0), 1.0);
        assert_eq!(n.eval(2.0), 1.0);
        let bad = DiscreteDist::new(vec![(3.0, 1.0)]).unwrap();
        assert!(matches!(lr_bound_numeraire(&bad, 1.0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn lr_bound_interior_root() {
        // Z in {0.5, 1.5} equally likely, gamma = 4/3: window (0, 3/4) sees 1.5 on
        // (0, 1/2) and 0.5 on (1/2, 3/4); 0.75 + max(0.5, z) / 4 = 1 gives z = 1.
        let d = DiscreteDist::new(vec![(0.5, 0.5), (1.5, 0.5)]).unwrap();
        let n = lr_bound_numeraire(&d, 4.0 / 3.0).unwrap();
        assert!(close(n.z0, 1.0, 1e-12));
    }

    #[test]
    fn bounded_mean_root() {
        let l = bounded_mean_numeraire_lambda(0.25).unwrap();
        assert!(l > 0.0 && l < 4.0);
        let f = ((1.0 + 0.75 * l) / (1.0 - 0.25 * l)).ln() - l;
        assert!(f.abs() < 1e-10);
        let a = bounded_mean_numeraire_lambda(0.45).unwrap();
        let b = bounded_mean_numeraire_lambda(0.49).unwrap();
        assert!(b < a && a < l);
        assert!(bounded_mean_numeraire_lambda(0.5).is_err());
    }

    #[test]
    fn mlr_t_changepoint_examples() {
        assert_eq!(mlr_numeraire_e(3.0, |_| 0.0).unwrap().get(), 1.0);
        let e = mlr_numeraire_e(2.0, |z| z - 0.5).unwrap().get();
        assert!(close(e, (1.5f64).exp(), 1e-14));
        assert!(close(e, gaussian_lr_e(&[2.0], 1.0).unwrap().get(), 1e-14));
        assert_eq!(t_test_e(&[3.7], 1.0).unwrap().get(), 1.0);
        assert!(close(t_test_e(&[1.0, -1.0], 1.0).unwrap().get(), (1.0f64 / 3.0).sqrt(), 1e-14));
        let xs = [0.3, 1.2, -0.4, 2.2];
        let scaled: Vec<f64> = xs.iter().map(|x| 7.5 * x).collect();
        assert!(close(t_test_e(&xs, 0.8).unwrap().get(), t_test_e(&scaled, 0.8).unwrap().get(), 1e-12));
        assert!(matches!(t_test_e(&[1.0, 1.0], 1e-9), Err(Error::Degenerate(_))));
        assert_eq!(changepoint_e(&[1.0, 2.0], |_| 0.0).unwrap().get(), 1.0);
        let r = [1.0f64, 2.0, 2.0];
        let e = changepoint_e(&[0.0, 1.0, 2.0], |x| r[x as usize].ln()).unwrap().get();
        assert!(close(e, 10.0 / 3.0, 1e-14));
    }

    #[test]
    fn clt_and_compound_examples() {
        let z = [1.0, -1.0, 2.0, -2.0];
        for two in [false, true] {
            let e = clt_asymptotic_e(&z, 1.3, two, CltDenominator::SampleSd).unwrap().get();
            assert!(close(e, (-1.3f64 * 1.3 / 2.0).exp(), 1e-14));
        }
        assert!(clt_asymptotic_e(&[0.0, 0.0], 1.0, false, CltDenominator::RootMeanSquare).is_err());
        assert_eq!(compound_separable_e(&[1.0, 3.0], &[1.0, 3.0]).unwrap().get(), 1.0);
        assert_eq!(compound_separable_e(&[1.0, 3.0], &[2.0, 2.0]).unwrap().get(), 1.0);
        assert_eq!(compound_separable_e(&[0.0], &[0.0]).unwrap().get(), 1.0);
        assert_eq!(compound_separable_e(&[0.0], &[1.0]).unwrap().get(), f64::INFINITY);
        assert_eq!(compound_t_e(&[2.0, 0.0], &[1.0, 1.0], 2).unwrap(), vec![2.0, 0.0]);
        assert_eq!(compound_t_e(&[1.5], &[1.5], 1).unwrap(), vec![1.0]);
    }
}
