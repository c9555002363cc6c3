//! Derivatives of the fairness-augmentation loss with respect to the perturbation vector.

mod check;
mod objective;
mod svd_path;
pub mod tape;

pub use check::{check_gradient, relative_error, GradientCheck, RELATIVE_FLOOR};
pub use objective::{FairnessObjective, LossAndGradient, LossBreakdown, ObjectiveConfig};
pub use svd_path::{singular_value_sensitivity, svd_path_gradient, SvdGradient};
pub use tape::{Tape, Value};
