//! Worst-case crossing probabilities `R_gamma = sup P(E >= 1/gamma)` over
//! shape-constrained classes of e-variables, the improved rejection
//! thresholds they induce, and conditional e-to-p calibration.

use crate::error::{check_open_alpha, domain, Error, Result};
use crate::numeric::{bisect, norm_cdf, norm_ppf, ROOT_TOL};
use serde::{Deserialize, Serialize};
use std::f64::consts::E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    /// All e-variables.
    E0,
    /// Decreasing density on `[0, inf)`.
    D,
    /// Decreasing density with support reaching beyond one.
    DGt1,
    /// Unimodal density.
    U,
    /// Log-transform symmetric.
    LS,
    /// Log-transform unimodal.
    LU,
    /// Log-transform with decreasing density on `(0, inf)`.
    LDGt0,
    /// Log-transform with decreasing density.
    LD,
    /// Log-transform unimodal and symmetric.
    LUS,
    /// Lognormal.
    LN,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 10] = [
        ShapeClass::E0,
        ShapeClass::D,
        ShapeClass::DGt1,
        ShapeClass::U,
        ShapeClass::LS,
        ShapeClass::LU,
        ShapeClass::LDGt0,
        ShapeClass::LD,
        ShapeClass::LUS,
        ShapeClass::LN,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ShapeClass::E0 => "E0",
            ShapeClass::D => "D",
            ShapeClass::DGt1 => "D>1",
            ShapeClass::U => "U",
            ShapeClass::LS => "LS",
            ShapeClass::LU => "LU",
            ShapeClass::LDGt0 => "LD>0",
            ShapeClass::LD => "LD",
            ShapeClass::LUS => "LUS",
            ShapeClass::LN => "LN",
        }
    }
}

impl std::str::FromStr for ShapeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeClass::ALL
            .iter()
            .find(|c| {
                c.name().eq_ignore_ascii_case(s)
                    || c.name().replace(">", "_gt").eq_ignore_ascii_case(s)
                    || format!("{c:?}").eq_ignore_ascii_case(s)
            })
            .copied()
            .ok_or_else(|| domain(format!("unknown shape class {s}")))
    }
}

/// `R_gamma` for one class. For LD and LUS only bounds are known; `value`
/// is then the upper bound and `exact` is false.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RGamma {
    pub value: f64,
    pub lower: f64,
    pub exact: bool,
}

/// Root of `e^a (1 - a - log gamma) = 1` on `(-log gamma, 1 - log gamma)`.
pub fn a_gamma(gamma: f64) -> Result<f64> {
    let lg = gamma.ln();
    let h = |a: f64| a.exp() * (1.0 - a - lg) - 1.0;
    bisect(h, -lg, 1.0 - lg, ROOT_TOL)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("gamma must lie in (0, 1], got {gamma}")))
    }
}

fn ld_gt0(gamma: f64) -> Result<f64> {
    if gamma == 1.0 {
        return Ok(1.0);
    }
    Ok((-a_gamma(gamma)?).exp())
}

fn d_gt1(gamma: f64) -> f64 {
    gamma / (1.0 + (1.0 - gamma * gamma).sqrt())
}

/// Upper bound for LD and LUS. Both classes sit inside LD>0 and inside the
/// class whose bound is `gamma / (1 + sqrt(1 - gamma^2))`, so all three terms apply.
fn ld_upper(gamma: f64) -> Result<f64> {
    if gamma == 1.0 {
        return Ok(1.0);
    }
    let first = gamma / (E * (1.0 - gamma * gamma));
    Ok(first.min(ld_gt0(gamma)?).min(d_gt1(gamma)))
}

pub fn r_gamma(class: ShapeClass, gamma: f64) -> Result<RGamma> {
    check_gamma(gamma)?;
    let exact = |v: f64| RGamma { value: v, lower: v, exact: true };
    let at_one = gamma == 1.0;
    Ok(match class {
        ShapeClass::E0 | ShapeClass::LU => exact(gamma),
        ShapeClass::D => exact(if at_one { 1.0 } else { gamma / 2.0 }),
        ShapeClass::DGt1 => exact(d_gt1(gamma)),
        ShapeClass::U => exact((gamma / 2.0).max(2.0 * gamma - 1.0)),
        ShapeClass::LS => exact(if at_one { 1.0 } else { gamma.min(0.5) }),
        ShapeClass::LDGt0 => exact(ld_gt0(gamma)?),
        ShapeClass::LD | ShapeClass::LUS => {
            let up = ld_upper(gamma)?;
            RGamma { value: up, lower: (gamma / E).min(up), exact: false }
        }
        ShapeClass::LN => exact(if at_one { 1.0 } else { norm_cdf(-(-2.0 * gamma.ln()).sqrt()) }),
    })
}

/// `inf{t >= 1 : R_{1/t} <= alpha}`.
pub fn t_alpha(class: ShapeClass, alpha: f64) -> Result<f64> {
    check_open_alpha(alpha)?;
    let t = match class {
        ShapeClass::E0 | ShapeClass::LU => 1.0 / alpha,
        ShapeClass::LS => {
            if alpha < 0.5 {
                1.0 / alpha
            } else {
                1.0
            }
        }
        ShapeClass::D => 1.0 / (2.0 * alpha),
        ShapeClass::DGt1 => 1.0 / (2.0 * alpha) + alpha / 2.0,
        ShapeClass::U => (1.0 / (2.0 * alpha)).max(2.0 / (1.0 + alpha)),
        // a_gamma = -log(alpha) solves the root equation at gamma = alpha e^(1 - alpha).
        ShapeClass::LDGt0 => (alpha - 1.0).exp() / alpha,
        ShapeClass::LD | ShapeClass::LUS => {
            // Largest gamma whose upper bound stays at or below alpha.
            let f = |g: f64| ld_upper(g).map(|v| v - alpha).unwrap_or(f64::NAN);
            let g = bisect(f, 1e-300_f64.max(alpha * 1e-3), 1.0 - 1e-15, ROOT_TOL * alpha)?;
            1.0 / g
        }
        // R_gamma < 1/2 for every gamma < 1, so any t > 1 works once alpha >= 1/2.
        ShapeClass::LN if alpha >= 0.5 => 1.0,
        ShapeClass::LN => {
            let z = -norm_ppf(alpha);
            (z * z / 2.0).exp()
        }
    };
    Ok(t.max(1.0))
}

/// Smallest calibrator for e-variables whose law lies in `class`:
/// `R_{1/e}`, capped at one.
pub fn conditional_e_to_p(class: ShapeClass, e: f64) -> Result<f64> {
    if !(e >= 0.0) {
        return Err(domain(format!("e-value must be nonnegative, got {e}")));
    }
    if e <= 1.0 {
        return Ok(1.0);
    }
    if e == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(r_gamma(class, 1.0 / e)?.value.min(1.0))
}

/// Level-`alpha` test of the supremum of comonotone e-values.
pub fn comonotone_sup_test(es: &[f64], class: Option<ShapeClass>, alpha: f64) -> Result<bool> {
    if es.is_empty() {
        return Err(Error::Empty("e-values"));
    }
    crate::error::check_evalues(es)?;
    let m = es.iter().cloned().fold(0.0, f64::max);
    Ok(m >= t_alpha(class.unwrap_or(ShapeClass::E0), alpha)?)
}
