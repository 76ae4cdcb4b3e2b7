use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("length mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("degenerate computation: {0}")]
    Degenerate(String),
    #[error("root finding failed: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

pub(crate) fn check_open_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

pub(crate) fn check_unit(name: &str, u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in [0, 1], got {u}")))
    }
}

pub(crate) fn check_evalues(es: &[f64]) -> Result<()> {
    match es.iter().find(|e| !(**e >= 0.0)) {
        Some(e) => Err(domain(format!("e-values must be nonnegative, got {e}"))),
        None => Ok(()),
    }
}

pub(crate) fn check_pvalues(ps: &[f64]) -> Result<()> {
    match ps.iter().find(|p| !(**p >= 0.0) || p.is_infinite()) {
        Some(p) => Err(domain(format!("p-values must be finite and nonnegative, got {p}"))),
        None => Ok(()),
    }
}
