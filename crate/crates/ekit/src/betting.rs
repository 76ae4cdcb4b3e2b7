//! Predictable betting strategies shared by martingale merging and
//! e-processes. A strategy proposes `lambda in [0, 1]` from past e-values
//! only; the wealth then multiplies by `1 - lambda + lambda * e`.

use crate::error::{domain, Result};
use crate::numeric::golden_max;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Above this many distinct past e-values the adaptive strategy switches
/// from exact maximisation to an incremental objective on a fixed grid.
const DISTINCT_CAP: usize = 256;
const GRID_SIZE: usize = 512;
const GOLDEN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Constant { lambda: f64 },
    EmpiricallyAdaptive { gamma: f64 },
    HitAndStop { alpha: f64, inner: Box<Strategy> },
}

impl Strategy {
    pub fn all_in() -> Self {
        Strategy::Constant { lambda: 1.0 }
    }

    pub fn start(&self) -> Result<Bettor> {
        let state = match self {
            Strategy::Constant { lambda } => {
                if !(0.0..=1.0).contains(lambda) {
                    return Err(domain(format!("lambda must lie in [0, 1], got {lambda}")));
                }
                State::Constant(*lambda)
            }
            Strategy::EmpiricallyAdaptive { gamma } => State::Adaptive(AdaptiveLambda::new(*gamma)?),
            Strategy::HitAndStop { alpha, inner } => {
                crate::error::check_alpha(*alpha)?;
                State::HitAndStop {
                    target: 1.0 / alpha,
                    stopped: false,
                    inner: Box::new(inner.start()?.state),
                }
            }
        };
        Ok(Bettor { state })
    }
}

#[derive(Debug, Clone)]
enum State {
    Constant(f64),
    Adaptive(AdaptiveLambda),
    HitAndStop { target: f64, stopped: bool, inner: Box<State> },
}

impl State {
    fn lambda(&self) -> f64 {
        match self {
            State::Constant(l) => *l,
            State::Adaptive(a) => a.lambda(),
            State::HitAndStop { stopped: true, .. } => 0.0,
            State::HitAndStop { inner, .. } => inner.lambda(),
        }
    }

    fn observe(&mut self, e: f64, wealth: f64) {
        match self {
            State::Constant(_) => {}
            State::Adaptive(a) => a.push(e),
            State::HitAndStop { target, stopped, inner } => {
                inner.observe(e, wealth);
                if wealth >= *target {
                    *stopped = true;
                }
            }
        }
    }
}

/// Running state of a strategy.
#[derive(Debug, Clone)]
pub struct Bettor {
    state: State,
}

impl Bettor {
    /// Betting fraction for the next round, computed from past rounds only.
    pub fn lambda(&self) -> f64 {
        self.state.lambda()
    }

    /// Records the e-value just observed and the wealth after betting on it.
    pub fn observe(&mut self, e: f64, wealth: f64) {
        self.state.observe(e, wealth);
    }
}

/// `1 - lambda + lambda * e`, with `lambda = 0` giving exactly one even at `e = inf`.
pub fn bet_factor(lambda: f64, e: f64) -> f64 {
    if lambda == 0.0 {
        1.0
    } else {
        1.0 - lambda + lambda * e
    }
}

/// Wealth update where zero wealth stays at zero.
pub fn grow(wealth: f64, factor: f64) -> f64 {
    if wealth == 0.0 || factor == 0.0 {
        0.0
    } else {
        wealth * factor
    }
}

/// Maximiser over `[0, gamma]` of the empirical mean of `log(1 - l + l e_s)`
/// over past e-values.
#[derive(Debug, Clone)]
pub struct AdaptiveLambda {
    gamma: f64,
    n: u64,
    sum: f64,
    any_inf: bool,
    distinct: Vec<(f64, u64)>,
    index: HashMap<u64, usize>,
    grid: Option<Vec<f64>>,
}

impl AdaptiveLambda {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(domain(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        Ok(Self {
            gamma,
            n: 0,
            sum: 0.0,
            any_inf: false,
            distinct: Vec::new(),
            index: HashMap::new(),
            grid: None,
        })
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn push(&mut self, e: f64) {
        self.n += 1;
        if e == f64::INFINITY {
            self.any_inf = true;
            return;
        }
        self.sum += e;
        if let Some(g) = self.grid.as_mut() {
            add_to_grid(g, self.gamma, e, 1);
            return;
        }
        let key = e.to_bits();
        match self.index.get(&key) {
            Some(&i) => self.distinct[i].1 += 1,
            None => {
                self.index.insert(key, self.distinct.len());
                self.distinct.push((e, 1));
            }
        }
        if self.distinct.len() > DISTINCT_CAP {
            let mut g = vec![0.0; GRID_SIZE + 1];
            for &(v, c) in &self.distinct {
                add_to_grid(&mut g, self.gamma, v, c);
            }
            self.grid = Some(g);
            self.distinct.clear();
            self.index.clear();
        }
    }

    pub fn lambda(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        if self.any_inf {
            return self.gamma;
        }
        let finite = self.n as f64;
        if self.sum / finite <= 1.0 {
            return 0.0;
        }
        match &self.grid {
            None => {
                let obj = |l: f64| -> f64 {
                    self.distinct
                        .iter()
                        .map(|&(v, c)| c as f64 * (l * (v - 1.0)).ln_1p())
                        .sum()
                };
                golden_max(obj, 0.0, self.gamma, GOLDEN_TOL)
            }
            Some(g) => grid_argmax(g, self.gamma),
        }
    }
}

fn add_to_grid(g: &mut [f64], gamma: f64, e: f64, count: u64) {
    let m = (g.len() - 1) as f64;
    for (j, s) in g.iter_mut().enumerate() {
        let l = gamma * j as f64 / m;
        *s += count as f64 * (l * (e - 1.0)).ln_1p();
    }
}

fn grid_argmax(g: &[f64], gamma: f64) -> f64 {
    let m = g.len() - 1;
    let (j, _) = g
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
    let h = gamma / m as f64;
    if j == 0 || j == m {
        return j as f64 * h;
    }
    let (a, b, c) = (g[j - 1], g[j], g[j + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    ((j as f64 + shift.clamp(-0.5, 0.5)) * h).clamp(0.0, gamma)
}
