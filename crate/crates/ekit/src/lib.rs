//! E-values and the machinery built on them: calibration against p-values,
//! concrete e-variables, merging functions, e-processes, universal inference,
//! multiple testing, uncertainty-set merging, shape-constrained thresholds
//! and risk backtesting.

// `!(x >= 0.0)` style checks deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod betting;
pub mod confset;
pub mod core;
pub mod error;
pub mod eprocess;
pub mod evariables;
pub mod merging;
pub mod multitest;
pub mod numeric;
pub mod par;
pub mod risk;
pub mod seed;
pub mod sim;
pub mod thresholds;
pub mod universal;

pub use crate::core::{EValue, PValue};
pub use crate::error::{Error, Result};
