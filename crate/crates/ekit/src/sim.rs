//! Seeded Monte Carlo studies. Every replication draws from its own stream
//! derived from `(seed, label, index)` and results are reduced in index
//! order, so parallel and sequential runs agree bit for bit.

use crate::betting::Strategy;
use crate::confset::{self, RandomizedVote, UncertaintySet};
use crate::core::exchangeable_markov_test;
use crate::eprocess::{gaussian, sprt, BettingProcess, EProcessState, MixtureWeights, SprtConfig, SprtMode, TimeMixture, UiEProcess};
use crate::error::{check_open_alpha, domain, Result};
use crate::multitest::{de_bh, ebh, ge_bh, ue_bh, DiscoverySet};
use crate::numeric::{norm_cdf, norm_ppf};
use crate::par::replicate;
use crate::risk::{backtest, default_strategy, e_stat, EStatSpec, ForecastRecord, LossFunction};
use crate::seed::Rng;
use crate::thresholds::{t_alpha, ShapeClass};
use crate::universal::{self, fit, SplitPlan};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, LogNormal, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Continuous, ContinuousCDF, DiscreteCDF, StudentsT};
use std::collections::BTreeMap;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        let (mean, se) = crate::numeric::mean_se(xs);
        Self { mean, se }
    }

    pub fn of_bools(xs: &[bool]) -> Self {
        let v: Vec<f64> = xs.iter().map(|b| f64::from(*b)).collect();
        Self::of(&v)
    }

    /// Whether `mean <= bound + 3 se`.
    pub fn at_most(&self, bound: f64) -> bool {
        self.mean <= bound + 3.0 * self.se
    }

    pub fn at_least(&self, bound: f64) -> bool {
        self.mean >= bound - 3.0 * self.se
    }
}

/// A labelled numeric table for CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub label_column: String,
    pub columns: Vec<String>,
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: BTreeMap<String, f64>,
}

impl Table {
    fn new(name: &str, label_column: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            label_column: label_column.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            labels: Vec::new(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    fn push(&mut self, label: impl Into<String>, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.labels.push(label.into());
        self.rows.push(row);
    }

    pub fn cell(&self, label: &str, column: &str) -> Option<f64> {
        let r = self.labels.iter().position(|l| l == label)?;
        let c = self.columns.iter().position(|x| x == column)?;
        Some(self.rows[r][c])
    }
}

// ---------------------------------------------------------------------------
// Wald's SPRT against the fixed-sample LRT.

pub const WALD_P0: f64 = 0.5;
pub const WALD_P1: f64 = 0.6;
pub const WALD_PS: [f64; 4] = [0.5, 0.55, 0.6, 0.65];
pub const LRT_N: u64 = 280;
pub const LRT_MIN_HEADS: u64 = 154;

fn bernoulli_llr(p0: f64, p1: f64) -> (f64, f64) {
    ((p1 / p0).ln(), ((1.0 - p1) / (1.0 - p0)).ln())
}

/// Exact expected stopping time and rejection probability of the SPRT on
/// Bernoulli(`p`) data, by propagating the distribution of the head count
/// among still-running paths until the leftover mass is below `1e-14`.
pub fn sprt_bernoulli_exact(p: f64, p0: f64, p1: f64, config: &SprtConfig) -> (f64, f64) {
    let (a, b) = bernoulli_llr(p0, p1);
    let (lo, hi) = config.thresholds();
    let (lo, hi) = (lo.ln(), hi.ln());
    let mut alive = vec![1.0f64];
    let mut expected = 0.0;
    let mut reject = 0.0;
    let mut n = 0usize;
    while alive.iter().sum::<f64>() > 1e-14 && n < 1_000_000 {
        n += 1;
        let mut next = vec![0.0; n + 1];
        for (s, m) in alive.iter().enumerate() {
            if *m == 0.0 {
                continue;
            }
            next[s + 1] += m * p;
            next[s] += m * (1.0 - p);
        }
        for (s, m) in next.iter_mut().enumerate() {
            let llr = s as f64 * a + (n - s) as f64 * b;
            if llr >= hi {
                reject += *m;
                expected += n as f64 * *m;
                *m = 0.0;
            } else if llr <= lo {
                expected += n as f64 * *m;
                *m = 0.0;
            }
        }
        alive = next;
    }
    (expected, reject)
}

/// Power of the fixed-sample LRT that rejects with at least `min_heads` of `n`.
pub fn lrt_power(p: f64, n: u64, min_heads: u64) -> f64 {
    let bin = Binomial::new(p, n).expect("valid binomial");
    1.0 - bin.cdf(min_heads - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldRow {
    pub p: f64,
    pub stopping_time: Estimate,
    pub power: Estimate,
    pub exact_stopping_time: f64,
    pub exact_power: f64,
    pub lrt_power: f64,
}

pub fn wald_conservative() -> SprtConfig {
    SprtConfig::new(0.05, 0.05, SprtMode::Conservative).expect("valid levels")
}

pub fn wald_rows(reps: usize, seed: u64) -> Result<Vec<WaldRow>> {
    let cfg = wald_conservative();
    let (a, b) = bernoulli_llr(WALD_P0, WALD_P1);
    Ok(WALD_PS
        .iter()
        .map(|&p| {
            let runs = replicate(reps, seed, &format!("wald/{p}"), |_, rng| {
                let out = sprt(std::iter::from_fn(|| Some(if rng.random_bool(p) { a } else { b })), &cfg);
                (out.stopping_time() as f64, matches!(out, crate::eprocess::SprtOutcome::Reject(_)))
            });
            let times: Vec<f64> = runs.iter().map(|r| r.0).collect();
            let rejects: Vec<bool> = runs.iter().map(|r| r.1).collect();
            let (et, ep) = sprt_bernoulli_exact(p, WALD_P0, WALD_P1, &cfg);
            WaldRow {
                p,
                stopping_time: Estimate::of(&times),
                power: Estimate::of_bools(&rejects),
                exact_stopping_time: et,
                exact_power: ep,
                lrt_power: lrt_power(p, LRT_N, LRT_MIN_HEADS),
            }
        })
        .collect())
}

pub fn wald_study(reps: usize, seed: u64) -> Result<Table> {
    let mut t = Table::new(
        "wald",
        "p",
        &["sprt_mean_n", "sprt_mean_n_se", "sprt_power", "sprt_power_se", "sprt_mean_n_exact", "sprt_power_exact", "lrt_n", "lrt_power"],
    );
    for r in wald_rows(reps, seed)? {
        t.push(
            format!("{}", r.p),
            vec![
                r.stopping_time.mean,
                r.stopping_time.se,
                r.power.mean,
                r.power.se,
                r.exact_stopping_time,
                r.exact_power,
                LRT_N as f64,
                r.lrt_power,
            ],
        );
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Improved thresholds.

pub const THRESHOLD_ALPHAS: [f64; 6] = [0.001, 0.01, 0.02, 0.05, 0.1, 0.2];

/// Table rows; classes sharing a row have identical thresholds.
pub const THRESHOLD_ROWS: [(&str, ShapeClass); 6] = [
    ("E0,LS", ShapeClass::E0),
    ("D,U", ShapeClass::D),
    ("D>1", ShapeClass::DGt1),
    ("LUS,LD", ShapeClass::LD),
    ("LD>0", ShapeClass::LDGt0),
    ("LN", ShapeClass::LN),
];

pub fn thresholds_study() -> Result<Table> {
    let cols: Vec<String> = THRESHOLD_ALPHAS.iter().map(|a| format!("alpha={a}")).collect();
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new("thresholds", "class", &cols);
    for (label, class) in THRESHOLD_ROWS {
        let row = THRESHOLD_ALPHAS.iter().map(|a| t_alpha(class, *a)).collect::<Result<Vec<f64>>>()?;
        t.push(label, row);
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// e-BH under dependence.

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dependence {
    Independent,
    /// `cov(Z_i, Z_j) = rho^|i - j|`.
    Toeplitz { rho: f64 },
    /// `cov(Z_i, Z_j) = -rho / (K - 1)` off the diagonal.
    NegativeEquicorrelated { rho: f64 },
    /// One shared draw for every hypothesis.
    Duplicated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EbhSimConfig {
    pub k: usize,
    pub non_null: usize,
    pub mu: f64,
    pub alpha: f64,
    pub dependence: Dependence,
}

impl EbhSimConfig {
    pub fn new(mu: f64, dependence: Dependence) -> Self {
        Self { k: 100, non_null: 30, mu, alpha: 0.05, dependence }
    }

    /// Gaussian likelihood-ratio multiplier `sqrt(2 log(1/alpha))`.
    pub fn lambda(&self) -> f64 {
        (2.0 * (1.0 / self.alpha).ln()).sqrt()
    }
}

fn correlated_normals(k: usize, dep: Dependence, rng: &mut Rng) -> Vec<f64> {
    let mut eps = || -> f64 { StandardNormal.sample(rng) };
    match dep {
        Dependence::Independent => (0..k).map(|_| eps()).collect(),
        Dependence::Toeplitz { rho } => {
            let s = (1.0 - rho * rho).sqrt();
            let mut z = Vec::with_capacity(k);
            let mut prev: f64 = eps();
            z.push(prev);
            for _ in 1..k {
                prev = rho * prev + s * eps();
                z.push(prev);
            }
            z
        }
        Dependence::NegativeEquicorrelated { rho } => {
            // eps_i - a * mean(eps) has correlation -rho / (K - 1) for this a.
            let kf = k as f64;
            let c = -rho * kf / (kf - 1.0 + rho);
            let a = 1.0 - (1.0 + c).sqrt();
            let e: Vec<f64> = (0..k).map(|_| eps()).collect();
            let m = e.iter().sum::<f64>() / kf;
            let sd = (1.0 - 2.0 * a / kf + a * a / kf).sqrt();
            e.iter().map(|x| (x - a * m) / sd).collect()
        }
        Dependence::Duplicated => vec![eps(); k],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcedureStats {
    pub fdr: Estimate,
    pub power: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbhSimResult {
    pub plain: ProcedureStats,
    pub ge: ProcedureStats,
    pub de: ProcedureStats,
    pub ue: ProcedureStats,
    /// Draws where `De ⊇ Ge ⊇ plain` failed.
    pub nesting_violations: usize,
    /// `(K0 / K) alpha`.
    pub fdr_bound: f64,
}

fn fdp_tpp(d: &DiscoverySet, non_null: usize) -> (f64, f64) {
    let false_disc = d.rejected.iter().filter(|i| **i >= non_null).count();
    let true_disc = d.rejected.len() - false_disc;
    (false_disc as f64 / d.rejected.len().max(1) as f64, true_disc as f64 / non_null.max(1) as f64)
}

/// Non-nulls are the first `non_null` indices.
pub fn ebh_simulation(cfg: &EbhSimConfig, reps: usize, seed: u64) -> Result<EbhSimResult> {
    check_open_alpha(cfg.alpha)?;
    if cfg.non_null > cfg.k || cfg.k < 2 {
        return Err(domain("need 2 <= K and non_null <= K"));
    }
    let lambda = cfg.lambda();
    let label = format!("ebh/{:?}/{}", cfg.dependence, cfg.mu);
    let draws = replicate(reps, seed, &label, |_, rng| -> Result<[(f64, f64); 4]> {
        let z = correlated_normals(cfg.k, cfg.dependence, rng);
        let es: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let m = if i < cfg.non_null { cfg.mu } else { 0.0 };
                (lambda * (z + m) - lambda * lambda / 2.0).exp()
            })
            .collect();
        let us: Vec<f64> = (0..cfg.k).map(|_| rng.random::<f64>()).collect();
        let second: Vec<f64> = (0..cfg.k).map(|_| rng.random::<f64>()).collect();
        let u: f64 = rng.random();
        let plain = ebh(&es, cfg.alpha)?;
        let ge = ge_bh(&es, cfg.alpha, &us)?;
        let de = de_bh(&es, cfg.alpha, &us, &second)?;
        let ue = ue_bh(&es, cfg.alpha, u)?;
        let nested = de.is_superset_of(&ge) && ge.is_superset_of(&plain);
        let mut out = [fdp_tpp(&plain, cfg.non_null), fdp_tpp(&ge, cfg.non_null), fdp_tpp(&de, cfg.non_null), fdp_tpp(&ue, cfg.non_null)];
        if !nested {
            // Flag through an impossible FDP so the reducer can count it.
            out[0].0 = -1.0 - out[0].0;
        }
        Ok(out)
    });
    let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
    let violations = draws.iter().filter(|d| d[0].0 < 0.0).count();
    let stats = |j: usize| {
        let fdp: Vec<f64> = draws.iter().map(|d| if d[j].0 < 0.0 { -1.0 - d[j].0 } else { d[j].0 }).collect();
        let tpp: Vec<f64> = draws.iter().map(|d| d[j].1).collect();
        ProcedureStats { fdr: Estimate::of(&fdp), power: Estimate::of(&tpp) }
    };
    Ok(EbhSimResult {
        plain: stats(0),
        ge: stats(1),
        de: stats(2),
        ue: stats(3),
        nesting_violations: violations,
        fdr_bound: (cfg.k - cfg.non_null) as f64 / cfg.k as f64 * cfg.alpha,
    })
}

pub fn ebh_power_study(reps: usize, seed: u64) -> Result<Table> {
    let mut t = Table::new(
        "ebh_power",
        "setting",
        &["mu", "rho", "power_ebh", "power_ge", "power_de", "power_ue", "fdr_ebh", "fdr_ge", "fdr_de", "fdr_ue"],
    );
    for neg in [false, true] {
        for rho in [0.0, 0.5, 0.9] {
            for mu in [1.0, 2.0, 3.0, 4.0] {
                let dep = if neg { Dependence::NegativeEquicorrelated { rho } } else { Dependence::Toeplitz { rho } };
                let r = ebh_simulation(&EbhSimConfig::new(mu, dep), reps, seed)?;
                let tag = if neg { "negative" } else { "positive" };
                t.push(
                    tag,
                    vec![
                        mu,
                        rho,
                        r.plain.power.mean,
                        r.ge.power.mean,
                        r.de.power.mean,
                        r.ue.power.mean,
                        r.plain.fdr.mean,
                        r.ge.fdr.mean,
                        r.de.fdr.mean,
                        r.ue.fdr.mean,
                    ],
                );
            }
        }
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Split fraction and radii of universal confidence sets.

/// Monte Carlo squared radius of the split set for `N(0, I_d)` data with
/// `round(p0 n)` points in D0.
pub fn split_radius_mc(n: usize, d: usize, p0: f64, alpha: f64, reps: usize, seed: u64) -> Result<Estimate> {
    let n0 = ((p0 * n as f64).round() as usize).clamp(1, n - 1);
    let radii = replicate(reps, seed, &format!("radius/{n}/{d}/{p0}/{alpha}"), |_, rng| {
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect()).collect();
        universal::gaussian_split_radius_sq(&pts[..n0], &pts[n0..], alpha)
    });
    Ok(Estimate::of(&radii.into_iter().collect::<Result<Vec<f64>>>()?))
}

pub const SPLIT_DIMS: [usize; 7] = [1, 2, 5, 10, 20, 50, 100];
pub const SPLIT_ALPHAS: [f64; 4] = [0.1, 0.05, 0.01, 0.001];

/// Optimal split fractions on a `(d, alpha)` grid with the expected radius
/// ratio; with `reps > 0` also a simulated radius at `n = 1000`.
pub fn split_p0_study(reps: usize, seed: u64) -> Result<Table> {
    let mut t = Table::new("split_p0", "d", &["alpha", "p0_star", "expected_r2", "ratio_equal_split", "mc_r2", "mc_r2_se"]);
    let n = 1000;
    for d in SPLIT_DIMS {
        for alpha in SPLIT_ALPHAS {
            let p0 = universal::optimal_split_fraction(d, alpha)?;
            let er = universal::expected_split_radius_sq(n, d, p0, alpha);
            let ratio = universal::split_radius_ratio(d, alpha)?;
            let (m, s) = if reps > 0 {
                let e = split_radius_mc(n, d, p0, alpha, reps, seed)?;
                (e.mean, e.se)
            } else {
                (f64::NAN, f64::NAN)
            };
            t.push(d.to_string(), vec![alpha, p0, er, ratio, m, s]);
        }
    }
    Ok(t)
}

/// Null means of split e-values: the Gaussian singleton null `N(0, 1)`
/// against a fitted mean, and the one-component null of the mixture test.
pub fn ui_null_means(n: usize, reps: usize, seed: u64) -> Result<(Estimate, Estimate)> {
    let gauss = replicate(reps, seed, "ui-null/gauss", |i, rng| {
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let plan = SplitPlan::coin_flips(n, 0.5, seed, i as u64)?;
        universal::split_lrt_e(&x, &plan, fit::gaussian_mean, |_: &[f64]| Ok(fit::gaussian_at(0.0))).map(|e| e.get())
    });
    let mix = replicate(reps, seed, "ui-null/mixture", |i, rng| {
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let plan = SplitPlan::coin_flips(n, 0.5, seed ^ 0x5eed, i as u64)?;
        universal::split_lrt_e(&x, &plan, |d: &[f64]| fit::two_component_mixture(d, 0.25, seed), fit::gaussian_mean).map(|e| e.get())
    });
    let g = gauss.into_iter().collect::<Result<Vec<f64>>>()?;
    let m = mix.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok((Estimate::of(&g), Estimate::of(&m)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixturePowerRow {
    pub mu: f64,
    /// Single split with Markov's inequality.
    pub ui: f64,
    /// Average of `B` splits with Markov's inequality.
    pub sui: f64,
    /// Running averages of the `B` splits with the exchangeable Markov inequality.
    pub emi_sui: f64,
    /// Draws where EMI-SUI failed to reject although UI did.
    pub dominance_violations: usize,
}

/// Mixture `0.25 N(-mu, 1) + 0.75 N(mu, 1)`; null `mu = 0` (one component).
pub fn mixture_power_study(n: usize, b: usize, reps: usize, mus: &[f64], alpha: f64, seed: u64) -> Result<Vec<MixturePowerRow>> {
    let mut rows = Vec::new();
    for &mu in mus {
        let runs = replicate(reps, seed, &format!("mixture-power/{mu}"), |i, rng| -> Result<(bool, bool, bool)> {
            let x: Vec<f64> = (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    if rng.random_bool(0.25) { z - mu } else { z + mu }
                })
                .collect();
            let fit_seed = seed.wrapping_add(i as u64);
            let s = universal::subsampled_e(&x, b, 0.5, fit_seed, |d: &[f64]| fit::two_component_mixture(d, 0.25, fit_seed), fit::gaussian_mean)?;
            let ui = s.splits[0] >= 1.0 / alpha;
            let sui = s.value.get() >= 1.0 / alpha;
            let (emi, _) = exchangeable_markov_test(&s.splits, alpha)?;
            Ok((ui, sui, emi))
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
        let frac = |f: fn(&(bool, bool, bool)) -> bool| runs.iter().filter(|r| f(r)).count() as f64 / reps as f64;
        rows.push(MixturePowerRow {
            mu,
            ui: frac(|r| r.0),
            sui: frac(|r| r.1),
            emi_sui: frac(|r| r.2),
            dominance_violations: runs.iter().filter(|r| r.0 && !r.2).count(),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Null behaviour of shipped e-processes under optional stopping.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullProcess {
    Lr,
    Mixture,
    PlugIn,
    Betting,
    Ui,
    TimeMixture,
}

impl NullProcess {
    pub const ALL: [NullProcess; 6] =
        [NullProcess::Lr, NullProcess::Mixture, NullProcess::PlugIn, NullProcess::Betting, NullProcess::Ui, NullProcess::TimeMixture];
}

/// Stopping rules applied to every path.
pub const STOPPING_RULES: [&str; 5] = ["fixed", "first_crossing", "drop_below_half", "double", "random_time"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VilleReport {
    pub crossing: Estimate,
    /// Wealth at each stopping rule, in the order of [`STOPPING_RULES`].
    pub stopped_wealth: Vec<Estimate>,
}

/// Wealth path of `process` on `horizon` draws from `N(0, 1)`.
pub fn null_path(process: NullProcess, horizon: usize, rng: &mut Rng) -> Result<Vec<EProcessState>> {
    let xs: Vec<f64> = (0..horizon).map(|_| StandardNormal.sample(rng)).collect();
    let mut out = Vec::with_capacity(horizon);
    match process {
        NullProcess::Lr => {
            let mut p = gaussian::Lr::new(0.5);
            xs.iter().for_each(|x| out.push(*p.step(*x)));
        }
        NullProcess::Mixture => {
            let mut p = gaussian::Mixture::new(1.0);
            xs.iter().for_each(|x| out.push(*p.step(*x)));
        }
        NullProcess::PlugIn => {
            let mut p = gaussian::PlugIn::new(1.0);
            xs.iter().for_each(|x| out.push(*p.step(*x)));
        }
        NullProcess::Betting => {
            let mut p = BettingProcess::new(&Strategy::EmpiricallyAdaptive { gamma: 0.5 })?;
            for x in &xs {
                out.push(*p.step((0.5 * x - 0.125).exp())?);
            }
        }
        NullProcess::Ui => {
            // Null {N(theta, 1) : theta <= 0}; alternative predicts with a
            // shrunken positive running mean.
            let predictor = |past: &[f64], x: f64| {
                let m = (past.iter().sum::<f64>() / (past.len() as f64 + 1.0)).max(0.0);
                -0.5 * (x - m).powi(2) - 0.5 * (2.0 * std::f64::consts::PI).ln()
            };
            let refit = |data: &[f64]| -> Result<f64> {
                let m = (data.iter().sum::<f64>() / data.len() as f64).min(0.0);
                Ok(data.iter().map(|x| -0.5 * (x - m).powi(2) - 0.5 * (2.0 * std::f64::consts::PI).ln()).sum())
            };
            let mut p = UiEProcess::new(predictor, refit);
            for x in &xs {
                out.push(*p.step(*x)?);
            }
        }
        NullProcess::TimeMixture => {
            let mut lr = gaussian::Lr::new(1.0);
            let mut p = TimeMixture::new(MixtureWeights::Default)?;
            for x in &xs {
                let e = lr.step(*x).wealth();
                out.push(*p.step(e)?);
            }
        }
    }
    Ok(out)
}

fn stop_wealth(path: &[EProcessState], rule: &str, alpha: f64, random_t: usize) -> f64 {
    let last = path.last().map(|s| s.wealth()).unwrap_or(1.0);
    let first = |f: &dyn Fn(f64) -> bool| path.iter().map(|s| s.wealth()).find(|w| f(*w)).unwrap_or(last);
    match rule {
        "fixed" => last,
        "first_crossing" => first(&|w| w >= 1.0 / alpha),
        "drop_below_half" => first(&|w| w < 0.5),
        "double" => first(&|w| w >= 2.0),
        _ => path[random_t].wealth(),
    }
}

pub fn ville_battery(process: NullProcess, paths: usize, horizon: usize, alpha: f64, seed: u64) -> Result<VilleReport> {
    check_open_alpha(alpha)?;
    let runs = replicate(paths, seed, &format!("ville/{process:?}"), |_, rng| -> Result<(bool, Vec<f64>)> {
        let path = null_path(process, horizon, rng)?;
        let random_t = rng.random_range(0..horizon);
        let crossed = path.iter().any(|s| s.wealth() >= 1.0 / alpha);
        Ok((crossed, STOPPING_RULES.iter().map(|r| stop_wealth(&path, r, alpha, random_t)).collect()))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let crossing = Estimate::of_bools(&runs.iter().map(|r| r.0).collect::<Vec<_>>());
    let stopped_wealth = (0..STOPPING_RULES.len()).map(|j| Estimate::of(&runs.iter().map(|r| r.1[j]).collect::<Vec<_>>())).collect();
    Ok(VilleReport { crossing, stopped_wealth })
}

// ---------------------------------------------------------------------------
// Empirically adaptive betting on a two-point law.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// Median over paths of the proposed lambda at each checkpoint.
    pub lambda_median: Vec<(usize, f64)>,
    /// Share of (path, checkpoint) pairs with lambda in `[0.30, 0.36]`.
    pub lambda_in_band: f64,
    /// Mean over paths of `log M_t / t` at the horizon, after dropping the
    /// largest 0.1% (at least one path).
    pub trimmed_growth: f64,
    /// `max_lambda E log(1 - lambda + lambda E)` for the sampling law.
    pub optimal_growth: f64,
}

/// i.i.d. e-values uniform on `{0, 4}` fed to the adaptive strategy.
pub fn adaptive_growth_study(paths: usize, horizon: usize, gamma: f64, checkpoints: &[usize], seed: u64) -> Result<GrowthReport> {
    if paths == 0 || horizon == 0 {
        return Err(crate::Error::Empty("paths and horizon must be positive"));
    }
    let runs = replicate(paths, seed, "adaptive-growth", |_, rng| -> Result<(Vec<f64>, f64)> {
        let mut p = BettingProcess::new(&Strategy::EmpiricallyAdaptive { gamma })?;
        let mut lambdas = Vec::with_capacity(checkpoints.len());
        for t in 1..=horizon {
            let e = if rng.random_bool(0.5) { 4.0 } else { 0.0 };
            p.step(e)?;
            if checkpoints.contains(&t) {
                lambdas.push(p.lambda());
            }
        }
        Ok((lambdas, p.state().log_wealth() / horizon as f64))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
    };
    let lambda_median =
        checkpoints.iter().enumerate().map(|(j, t)| (*t, median(runs.iter().map(|r| r.0[j]).collect()))).collect();
    let all: Vec<f64> = runs.iter().flat_map(|r| r.0.iter().copied()).collect();
    let lambda_in_band = all.iter().filter(|l| (0.30..=0.36).contains(*l)).count() as f64 / all.len().max(1) as f64;
    let mut growth: Vec<f64> = runs.iter().map(|r| r.1).collect();
    growth.sort_by(f64::total_cmp);
    let cut = ((growth.len() as f64) * 0.001).ceil() as usize;
    let kept = &growth[..growth.len() - cut.min(growth.len() - 1)];
    let trimmed_growth = kept.iter().sum::<f64>() / kept.len() as f64;
    let best: f64 = 1.0 / 3.0;
    let optimal_growth = 0.5 * (1.0 + 3.0 * best).ln() + 0.5 * (1.0 - best).ln();
    Ok(GrowthReport { lambda_median, lambda_in_band, trimmed_growth, optimal_growth })
}

// ---------------------------------------------------------------------------
// Majority-vote coverage.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvCoverage {
    pub k: usize,
    pub alpha: f64,
    pub majority: Estimate,
    pub tau_quarter: Estimate,
    pub randomized_u: Estimate,
    pub randomized_r: Estimate,
    pub exchangeable: Estimate,
    pub permuted: Estimate,
    pub weighted: Estimate,
    /// `1 - 2 sum_k w_k alpha_k` for the weighted sets.
    pub weighted_bound: f64,
    pub median_midpoints: Estimate,
    /// Draws violating any of the set inclusions.
    pub lattice_violations: usize,
}

pub const MV_WEIGHTS: [f64; 5] = [0.4, 0.2, 0.2, 0.1, 0.1];
pub const MV_WEIGHTED_ALPHAS: [f64; 5] = [0.05, 0.1, 0.1, 0.15, 0.2];

/// `K = 5` equicorrelated Gaussian-mean intervals, each with exact coverage
/// `1 - alpha`, sharing half their noise.
pub fn mv_coverage_sim(reps: usize, alpha: f64, seed: u64) -> Result<MvCoverage> {
    check_open_alpha(alpha)?;
    let k = MV_WEIGHTS.len();
    let half = norm_ppf(1.0 - alpha / 2.0);
    let runs = replicate(reps, seed, "mv-coverage", |_, rng| -> Result<([bool; 9], bool)> {
        let shared: f64 = StandardNormal.sample(rng);
        let noise: Vec<f64> = (0..k)
            .map(|_| {
                let e: f64 = StandardNormal.sample(rng);
                (0.5f64).sqrt() * shared + (0.5f64).sqrt() * e
            })
            .collect();
        let level = 1.0 - alpha;
        let sets: Vec<UncertaintySet> =
            noise.iter().map(|c| UncertaintySet::interval(c - half, c + half, level)).collect::<Result<_>>()?;
        let weighted_sets: Vec<UncertaintySet> = noise
            .iter()
            .zip(MV_WEIGHTED_ALPHAS)
            .map(|(c, a)| {
                let h = norm_ppf(1.0 - a / 2.0);
                UncertaintySet::interval(c - h, c + h, 1.0 - a)
            })
            .collect::<Result<_>>()?;
        let u: f64 = rng.random();
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(rng);
        let cm = confset::majority_vote(&sets, 0.5)?;
        let ctau = confset::majority_vote(&sets, 0.25)?;
        let cu = confset::mv_randomized(&sets, u, RandomizedVote::Cu)?;
        let cr = confset::mv_randomized(&sets, u, RandomizedVote::Cr)?;
        let ce = confset::mv_exchangeable(&sets)?;
        let cp = confset::mv_permuted(&sets, &perm)?;
        let cw = confset::mv_weighted(&weighted_sets, &MV_WEIGHTS, u)?;
        let intervals: Vec<(f64, f64)> = noise.iter().map(|c| (c - half, c + half)).collect();
        let mom = confset::median_of_midpoints(&intervals, level)?;
        let covered = [&cm, &ctau, &cu, &cr, &ce, &cp, &cw, &mom].map(|s| s.contains(0.0));
        let lattice = cr.is_subset_of(&cm)
            && cr.is_subset_of(&cu)
            && ce.is_subset_of(&cm)
            && cp.is_subset_of(&cm)
            && cm.is_subset_of(&mom);
        let mut flags = [false; 9];
        flags[..8].copy_from_slice(&covered);
        Ok((flags, lattice))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let col = |j: usize| Estimate::of_bools(&runs.iter().map(|r| r.0[j]).collect::<Vec<_>>());
    Ok(MvCoverage {
        k,
        alpha,
        majority: col(0),
        tau_quarter: col(1),
        randomized_u: col(2),
        randomized_r: col(3),
        exchangeable: col(4),
        permuted: col(5),
        weighted: col(6),
        weighted_bound: 1.0 - 2.0 * MV_WEIGHTS.iter().zip(MV_WEIGHTED_ALPHAS).map(|(w, a)| w * a).sum::<f64>(),
        median_midpoints: col(7),
        lattice_violations: runs.iter().filter(|r| !r.1).count(),
    })
}

pub fn mv_coverage_study(reps: usize, seed: u64) -> Result<Table> {
    let alpha = 0.1;
    let r = mv_coverage_sim(reps, alpha, seed)?;
    let mut t = Table::new("mv_coverage", "set", &["coverage", "se", "guarantee"]);
    let rows = [
        ("C_M", r.majority, 1.0 - 2.0 * alpha),
        ("C_tau=0.25", r.tau_quarter, 1.0 - alpha / 0.75),
        ("C_U", r.randomized_u, 1.0 - alpha),
        ("C_R", r.randomized_r, 1.0 - 2.0 * alpha),
        ("C_E", r.exchangeable, 1.0 - 2.0 * alpha),
        ("C_pi", r.permuted, 1.0 - 2.0 * alpha),
        ("C_W", r.weighted, r.weighted_bound),
        ("median_of_midpoints", r.median_midpoints, 1.0 - 2.0 * alpha),
    ];
    for (name, e, g) in rows {
        t.push(name, vec![e.mean, e.se, g]);
    }
    t.summary.insert("lattice_violations".into(), r.lattice_violations as f64);
    Ok(t)
}

// ---------------------------------------------------------------------------
// Median of median of means.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomomReport {
    /// `(t, frequency of ever exceeding sqrt(pi) sigma sqrt(t/n))`.
    pub deviation: Vec<(f64, Estimate)>,
    /// Share of paths whose trajectory moves by less than `0.01 sigma`
    /// per repetition from repetition 40 on.
    pub stabilized: f64,
}

pub fn momom_sim(n: usize, b: usize, k: usize, reps: usize, seed: u64) -> Result<MomomReport> {
    let nu = 3.0;
    let sigma: f64 = (nu / (nu - 2.0f64)).sqrt();
    let dist = StudentT::new(nu).map_err(|e| domain(e.to_string()))?;
    let ts = [1.0, 2.0, 3.0];
    let runs = replicate(reps, seed, "momom", |i, rng| -> Result<(Vec<bool>, bool)> {
        let data: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
        let m = confset::momom(&data, b, k, seed.wrapping_add(i as u64))?;
        let worst = m.trajectory.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let exceed = ts.iter().map(|t| worst >= std::f64::consts::PI.sqrt() * sigma * (t / n as f64).sqrt()).collect();
        let stable = m.trajectory.windows(2).skip(39).all(|w| (w[1] - w[0]).abs() < 0.01 * sigma);
        Ok((exceed, stable))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let deviation =
        ts.iter().enumerate().map(|(j, t)| (*t, Estimate::of_bools(&runs.iter().map(|r| r.0[j]).collect::<Vec<_>>()))).collect();
    let stabilized = runs.iter().filter(|r| r.1).count() as f64 / reps.max(1) as f64;
    Ok(MomomReport { deviation, stabilized })
}

pub fn momom_study(reps: usize, seed: u64) -> Result<Table> {
    let r = momom_sim(210, 21, 70, reps, seed)?;
    let mut t = Table::new("momom", "t", &["exceed_freq", "se", "bound"]);
    for (x, e) in &r.deviation {
        t.push(x.to_string(), vec![e.mean, e.se, (4.0 * (-x).exp()).min(1.0)]);
    }
    t.summary.insert("stabilized_share".into(), r.stabilized);
    Ok(t)
}

// ---------------------------------------------------------------------------
// Risk backtests.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossFamily {
    /// Standard normal.
    Gaussian,
    /// Standard Student-t with 5 degrees of freedom.
    StudentT5,
    /// `exp(N(0, 0.25))`.
    LogNormal,
}

impl LossFamily {
    pub const ALL: [LossFamily; 3] = [LossFamily::Gaussian, LossFamily::StudentT5, LossFamily::LogNormal];
    const LN_SIGMA: f64 = 0.5;

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            LossFamily::Gaussian => StandardNormal.sample(rng),
            LossFamily::StudentT5 => StudentT::new(5.0).unwrap().sample(rng),
            LossFamily::LogNormal => LogNormal::new(0.0, Self::LN_SIGMA).unwrap().sample(rng),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            LossFamily::LogNormal => (Self::LN_SIGMA.powi(2) / 2.0).exp(),
            _ => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            LossFamily::Gaussian => 1.0,
            LossFamily::StudentT5 => 5.0 / 3.0,
            LossFamily::LogNormal => {
                let s2 = Self::LN_SIGMA.powi(2);
                (s2.exp() - 1.0) * s2.exp()
            }
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn var_beta(&self, beta: f64) -> f64 {
        match self {
            LossFamily::Gaussian => norm_ppf(beta),
            LossFamily::StudentT5 => StudentsT::new(0.0, 1.0, 5.0).unwrap().inverse_cdf(beta),
            LossFamily::LogNormal => (Self::LN_SIGMA * norm_ppf(beta)).exp(),
        }
    }

    pub fn es_beta(&self, beta: f64) -> f64 {
        let q = self.var_beta(beta);
        match self {
            LossFamily::Gaussian => (-q * q / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt() / (1.0 - beta),
            LossFamily::StudentT5 => {
                let nu = 5.0;
                let t = StudentsT::new(0.0, 1.0, nu).unwrap();
                t.pdf(q) / (1.0 - beta) * (nu + q * q) / (nu - 1.0)
            }
            LossFamily::LogNormal => {
                let s = Self::LN_SIGMA;
                (s * s / 2.0).exp() * norm_cdf(s - norm_ppf(beta)) / (1.0 - beta)
            }
        }
    }
}

pub const BACKTEST_BETA: f64 = 0.975;

/// The statistics exercised by the backtest suite, with truthful forecasts
/// `(r, z)` for `family` and an under-forecast `r` (5% of scale below).
pub fn backtest_cases(family: LossFamily) -> Vec<(&'static str, EStatSpec, f64, Option<f64>, f64)> {
    let b = BACKTEST_BETA;
    let sd = family.sd();
    let var = family.variance();
    let second = var + family.mean().powi(2);
    let mut out = vec![
        ("variance_mean", EStatSpec::VarianceMean, var, Some(family.mean()), 0.95 * var),
        ("quantile", EStatSpec::Quantile { beta: b }, family.var_beta(b), None, family.var_beta(b) - 0.05 * sd),
        ("expected_loss", EStatSpec::ExpectedLoss { a: 0.0, loss: LossFunction::Square }, second, None, 0.95 * second),
        ("es_var", EStatSpec::EsVar { beta: b }, family.es_beta(b), Some(family.var_beta(b)), family.es_beta(b) - 0.05 * sd),
    ];
    if family == LossFamily::LogNormal {
        out.insert(0, ("mean", EStatSpec::Mean, family.mean(), None, 0.95 * family.mean()));
    }
    out
}

/// Mean e-statistic over `reps` draws at the given forecasts.
pub fn estat_mean(family: LossFamily, spec: &EStatSpec, r: f64, z: Option<f64>, reps: usize, seed: u64) -> Result<Estimate> {
    let label = format!("estat/{family:?}/{spec:?}/{r}/{z:?}");
    let es = replicate(reps, seed, &label, |i, rng| {
        let x = family.sample(rng);
        e_stat(&ForecastRecord { t: i as u64, x, r, z }, spec).map(|e| e.get())
    });
    Ok(Estimate::of(&es.into_iter().collect::<Result<Vec<f64>>>()?))
}

/// Sequential ES backtest on Gaussian losses: rejection frequency at level
/// `alpha` with forecasts scaled by `r_scale` (1 = truthful).
pub fn es_backtest_rejections(paths: usize, length: usize, r_scale: f64, alpha: f64, seed: u64) -> Result<Estimate> {
    let fam = LossFamily::Gaussian;
    let r = fam.es_beta(BACKTEST_BETA) * r_scale;
    let z = fam.var_beta(BACKTEST_BETA);
    let spec = EStatSpec::EsVar { beta: BACKTEST_BETA };
    let runs = replicate(paths, seed, &format!("es-backtest/{r_scale}/{length}"), |_, rng| -> Result<bool> {
        let recs: Vec<ForecastRecord> =
            (0..length).map(|t| ForecastRecord { t: t as u64, x: fam.sample(rng), r, z: Some(z) }).collect();
        Ok(backtest(&recs, &spec, &default_strategy())?.first_rejection(alpha)?.is_some())
    });
    Ok(Estimate::of_bools(&runs.into_iter().collect::<Result<Vec<bool>>>()?))
}

pub fn backtest_study(reps: usize, seed: u64) -> Result<Table> {
    let mut t = Table::new("backtest", "family/statistic", &["truthful_mean", "truthful_se", "underforecast_mean", "underforecast_se"]);
    for fam in LossFamily::ALL {
        for (name, spec, r, z, r_low) in backtest_cases(fam) {
            let null = estat_mean(fam, &spec, r, z, reps, seed)?;
            let alt = estat_mean(fam, &spec, r_low, z, reps, seed)?;
            t.push(format!("{fam:?}/{name}"), vec![null.mean, null.se, alt.mean, alt.se]);
        }
    }
    let paths = (reps / 100).max(10);
    let null = es_backtest_rejections(paths, 500, 1.0, 0.05, seed)?;
    let alt = es_backtest_rejections(paths, 2000, 0.9, 0.05, seed)?;
    t.summary.insert("es_truthful_rejection_rate".into(), null.mean);
    t.summary.insert("es_underforecast_rejection_rate".into(), alt.mean);
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Wald,
    Thresholds,
    EbhPower,
    SplitP0,
    MvCoverage,
    Momom,
    Backtest,
}

impl std::str::FromStr for Study {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "wald" => Study::Wald,
            "thresholds" => Study::Thresholds,
            "ebh_power" => Study::EbhPower,
            "split_p0" => Study::SplitP0,
            "mv_coverage" => Study::MvCoverage,
            "momom" => Study::Momom,
            "backtest" => Study::Backtest,
            other => return Err(domain(format!("unknown study {other:?}"))),
        })
    }
}

pub fn run_study(study: Study, reps: usize, seed: u64) -> Result<Table> {
    match study {
        Study::Wald => wald_study(reps, seed),
        Study::Thresholds => thresholds_study(),
        Study::EbhPower => ebh_power_study(reps, seed),
        Study::SplitP0 => split_p0_study(reps, seed),
        Study::MvCoverage => mv_coverage_study(reps, seed),
        Study::Momom => momom_study(reps, seed),
        Study::Backtest => backtest_study(reps, seed),
    }
}
