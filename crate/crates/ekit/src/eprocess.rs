//! E-processes: wealth states, betting updates, Ville's test, the SPRT,
//! universal-inference and time-mixture processes, and optional continuation.
//!
//! Wealth is carried in the log domain. A factor of exactly zero latches the
//! process at zero for good.

use crate::betting::{bet_factor, Bettor, Strategy};
use crate::error::{check_alpha, check_unit, domain, Result};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EProcessState {
    log_wealth: f64,
    log_max: f64,
    t: u64,
}

impl Default for EProcessState {
    fn default() -> Self {
        Self::new()
    }
}

impl EProcessState {
    pub fn new() -> Self {
        Self { log_wealth: 0.0, log_max: 0.0, t: 0 }
    }

    pub fn wealth(&self) -> f64 {
        self.log_wealth.exp()
    }

    pub fn log_wealth(&self) -> f64 {
        self.log_wealth
    }

    pub fn history_max(&self) -> f64 {
        self.log_max.exp()
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    fn advance(self, log_factor: f64) -> Self {
        let log_wealth = if self.log_wealth == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.log_wealth + log_factor
        };
        Self { log_wealth, log_max: self.log_max.max(log_wealth), t: self.t + 1 }
    }

    /// Next state with the wealth replaced outright, for processes whose
    /// value is recomputed from scratch each step.
    pub fn with_log_wealth(self, log_wealth: f64) -> Self {
        Self { log_wealth, log_max: self.log_max.max(log_wealth), t: self.t + 1 }
    }

    /// Multiplies the wealth by a sequential e-value.
    pub fn step_product(self, e: f64) -> Result<Self> {
        if !(e >= 0.0) {
            return Err(domain(format!("e-value must be nonnegative, got {e}")));
        }
        Ok(self.advance(e.ln()))
    }

    /// Multiplies the wealth by `1 - lambda + lambda e`; `lambda` must be
    /// computed from information before this step.
    pub fn step_bet(self, e: f64, lambda: f64) -> Result<Self> {
        check_unit("lambda", lambda)?;
        if !(e >= 0.0) {
            return Err(domain(format!("e-value must be nonnegative, got {e}")));
        }
        Ok(self.advance(bet_factor(lambda, e).ln()))
    }

    /// Ever-crossing test: the running maximum has reached `1/alpha`.
    pub fn ville_test(&self, alpha: f64) -> Result<bool> {
        check_alpha(alpha)?;
        Ok(self.log_max >= -alpha.ln())
    }
}

/// Composite process after stopping `first` and continuing with a fresh
/// process `second` that started at wealth one.
pub fn optional_continuation(first: &EProcessState, second: &EProcessState) -> EProcessState {
    let log_wealth = first.log_wealth + second.log_wealth;
    let log_max = first.log_max.max(first.log_wealth + second.log_max);
    EProcessState { log_wealth, log_max, t: first.t + second.t }
}

/// A betting process driven by a predictable strategy.
#[derive(Debug, Clone)]
pub struct BettingProcess {
    state: EProcessState,
    bettor: Bettor,
}

impl BettingProcess {
    pub fn new(strategy: &Strategy) -> Result<Self> {
        Ok(Self { state: EProcessState::new(), bettor: strategy.start()? })
    }

    /// Fraction that will be bet on the next e-value.
    pub fn lambda(&self) -> f64 {
        self.bettor.lambda()
    }

    pub fn step(&mut self, e: f64) -> Result<&EProcessState> {
        self.state = self.state.step_bet(e, self.bettor.lambda())?;
        self.bettor.observe(e, self.state.wealth());
        Ok(&self.state)
    }

    pub fn state(&self) -> &EProcessState {
        &self.state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SprtMode {
    Conservative,
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SprtConfig {
    pub alpha: f64,
    pub beta: f64,
    pub mode: SprtMode,
}

impl SprtConfig {
    pub fn new(alpha: f64, beta: f64, mode: SprtMode) -> Result<Self> {
        for (n, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(domain(format!("{n} must lie in (0, 1), got {v}")));
            }
        }
        let c = Self { alpha, beta, mode };
        let (lo, hi) = c.thresholds();
        if !(lo < 1.0 && 1.0 < hi) {
            return Err(domain("thresholds must straddle one"));
        }
        Ok(c)
    }

    /// `(gamma_0, gamma_1)`: accept at or below the first, reject at or above the second.
    pub fn thresholds(&self) -> (f64, f64) {
        match self.mode {
            SprtMode::Conservative => (self.beta, 1.0 / self.alpha),
            SprtMode::Classical => (self.beta / (1.0 - self.alpha), (1.0 - self.beta) / self.alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "t", rename_all = "snake_case")]
pub enum SprtOutcome {
    Reject(u64),
    Accept(u64),
    /// The stream ran out first; carries the number of observations seen.
    Inconclusive(u64),
}

impl SprtOutcome {
    pub fn stopping_time(&self) -> u64 {
        match *self {
            SprtOutcome::Reject(t) | SprtOutcome::Accept(t) | SprtOutcome::Inconclusive(t) => t,
        }
    }
}

/// Wald's sequential probability ratio test over per-observation
/// log-likelihood ratios.
pub fn sprt<I: IntoIterator<Item = f64>>(llrs: I, config: &SprtConfig) -> SprtOutcome {
    let (lo, hi) = config.thresholds();
    let (lo, hi) = (lo.ln(), hi.ln());
    let mut s = 0.0;
    let mut t = 0;
    for l in llrs {
        t += 1;
        s += l;
        if s >= hi {
            return SprtOutcome::Reject(t);
        }
        if s <= lo {
            return SprtOutcome::Accept(t);
        }
    }
    SprtOutcome::Inconclusive(t)
}

/// Universal-inference e-process: the product of predictive densities
/// divided by the maximised null likelihood over all points so far.
pub struct UiEProcess<P, R>
where
    P: Fn(&[f64], f64) -> f64,
    R: Fn(&[f64]) -> Result<f64>,
{
    predictor: P,
    refitter: R,
    data: Vec<f64>,
    log_num: f64,
    state: EProcessState,
}

impl<P, R> UiEProcess<P, R>
where
    P: Fn(&[f64], f64) -> f64,
    R: Fn(&[f64]) -> Result<f64>,
{
    /// `predictor(past, x)` is the log predictive density of `x` given the
    /// past; `refitter(data)` is the maximised null log-likelihood.
    pub fn new(predictor: P, refitter: R) -> Self {
        Self { predictor, refitter, data: Vec::new(), log_num: 0.0, state: EProcessState::new() }
    }

    pub fn step(&mut self, x: f64) -> Result<&EProcessState> {
        self.log_num += (self.predictor)(&self.data, x);
        self.data.push(x);
        let den = (self.refitter)(&self.data)?;
        self.state = self.state.with_log_wealth(self.log_num - den);
        Ok(&self.state)
    }

    pub fn state(&self) -> &EProcessState {
        &self.state
    }
}

/// One update of a universal-inference e-process held in `state`.
pub fn ui_eprocess_step<P, R>(
    state: EProcessState,
    log_num: &mut f64,
    data: &mut Vec<f64>,
    new_point: f64,
    alt_predictor: P,
    null_mle_refitter: R,
) -> Result<EProcessState>
where
    P: Fn(&[f64], f64) -> f64,
    R: Fn(&[f64]) -> Result<f64>,
{
    *log_num += alt_predictor(data, new_point);
    data.push(new_point);
    let den = null_mle_refitter(data)?;
    Ok(state.with_log_wealth(*log_num - den))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixtureWeights {
    /// `w(n) = c / (n log(n + 1)^2)`, normalised to total mass at most one.
    Default,
    /// Explicit `w(1), w(2), ...`; zero beyond the list.
    Explicit { weights: Vec<f64> },
    Geometric { ratio: f64 },
}

const DEFAULT_TERMS: usize = 1_000_000;

fn default_norm() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| {
        let head: f64 = (1..=DEFAULT_TERMS).map(|n| raw_default(n as f64)).sum();
        // Tail sum over n > N is bounded by the integral of 1 / (x log(x)^2) from N.
        head + 1.0 / (DEFAULT_TERMS as f64).ln()
    })
}

fn raw_default(n: f64) -> f64 {
    1.0 / (n * (n + 1.0).ln().powi(2))
}

impl MixtureWeights {
    pub fn validate(&self) -> Result<()> {
        match self {
            MixtureWeights::Default => Ok(()),
            MixtureWeights::Explicit { weights } => {
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(domain("mixture weights must be positive"));
                }
                if weights.iter().sum::<f64>() > 1.0 + 1e-12 {
                    return Err(domain("mixture weights must sum to at most one"));
                }
                Ok(())
            }
            MixtureWeights::Geometric { ratio } => {
                if *ratio > 0.0 && *ratio < 1.0 {
                    Ok(())
                } else {
                    Err(domain(format!("ratio must lie in (0, 1), got {ratio}")))
                }
            }
        }
    }

    /// Weight of time `n >= 1`.
    pub fn weight(&self, n: usize) -> f64 {
        match self {
            MixtureWeights::Default => raw_default(n as f64) / default_norm(),
            MixtureWeights::Explicit { weights } => weights.get(n - 1).copied().unwrap_or(0.0),
            MixtureWeights::Geometric { ratio } => (1.0 - ratio) * ratio.powi(n as i32 - 1),
        }
    }
}

/// `M_n = sum_{j <= n} w(j) E^(j)` for e-values `E^(j)` computed on the
/// first `j` observations; nondecreasing in `n`.
#[derive(Debug, Clone)]
pub struct TimeMixture {
    weights: MixtureWeights,
    sum: f64,
    n: usize,
    state: EProcessState,
}

impl TimeMixture {
    pub fn new(weights: MixtureWeights) -> Result<Self> {
        weights.validate()?;
        Ok(Self { weights, sum: 0.0, n: 0, state: EProcessState::new() })
    }

    pub fn step(&mut self, e_n: f64) -> Result<&EProcessState> {
        if !(e_n >= 0.0) {
            return Err(domain(format!("e-value must be nonnegative, got {e_n}")));
        }
        self.n += 1;
        let w = self.weights.weight(self.n);
        if w > 0.0 {
            self.sum += w * e_n;
        }
        self.state = self.state.with_log_wealth(self.sum.ln());
        Ok(&self.state)
    }

    pub fn state(&self) -> &EProcessState {
        &self.state
    }
}

pub fn time_mixture(es: &[f64], weights: &MixtureWeights) -> Result<Vec<EProcessState>> {
    let mut tm = TimeMixture::new(weights.clone())?;
    es.iter().map(|e| tm.step(*e).copied()).collect()
}

/// Gaussian sequential e-processes against the null `N(0, 1)`.
pub mod gaussian {
    use super::*;

    /// Likelihood-ratio process against a fixed alternative mean.
    #[derive(Debug, Clone, Copy)]
    pub struct Lr {
        pub mu: f64,
        pub state: EProcessState,
    }

    impl Lr {
        pub fn new(mu: f64) -> Self {
            Self { mu, state: EProcessState::new() }
        }

        pub fn step(&mut self, x: f64) -> &EProcessState {
            self.state = self.state.advance(self.mu * x - self.mu * self.mu / 2.0);
            &self.state
        }
    }

    /// Mixture over alternative means with a `N(0, tau^2)` prior; closed form
    /// `(1 + n tau^2)^(-1/2) exp(tau^2 S^2 / (2 (1 + n tau^2)))`.
    #[derive(Debug, Clone, Copy)]
    pub struct Mixture {
        pub tau: f64,
        sum: f64,
        pub state: EProcessState,
    }

    impl Mixture {
        pub fn new(tau: f64) -> Self {
            Self { tau, sum: 0.0, state: EProcessState::new() }
        }

        pub fn step(&mut self, x: f64) -> &EProcessState {
            self.sum += x;
            let n = (self.state.t() + 1) as f64;
            let v = 1.0 + n * self.tau * self.tau;
            let lw = -0.5 * v.ln() + self.tau * self.tau * self.sum * self.sum / (2.0 * v);
            self.state = self.state.with_log_wealth(lw);
            &self.state
        }
    }

    /// Plug-in process: the alternative mean for step `i` is a shrunken
    /// running mean of the first `i - 1` points, `S / (n + prior_n)`.
    #[derive(Debug, Clone, Copy)]
    pub struct PlugIn {
        pub prior_n: f64,
        sum: f64,
        pub state: EProcessState,
    }

    impl PlugIn {
        pub fn new(prior_n: f64) -> Self {
            Self { prior_n, sum: 0.0, state: EProcessState::new() }
        }

        pub fn step(&mut self, x: f64) -> &EProcessState {
            let mu = self.sum / (self.state.t() as f64 + self.prior_n);
            self.state = self.state.advance(mu * x - mu * mu / 2.0);
            self.sum += x;
            &self.state
        }
    }
}
