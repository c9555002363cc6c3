use serde::Serialize;

use crate::error::{Error, Result};

/// Magnitude below which a derivative counts as zero when forming relative errors.
pub const RELATIVE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    /// Coordinate at which the worst error occurred.
    pub worst_coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

/// Compares `gradient` against central differences of `loss` at `p`.
pub fn check_gradient(
    mut loss: impl FnMut(&[f64]) -> Result<f64>,
    gradient: &[f64],
    p: &[f64],
    h: f64,
) -> Result<GradientCheck> {
    if !(h > 0.0) {
        return Err(Error::Parameter("step must be positive".into()));
    }
    if gradient.len() != p.len() {
        return Err(Error::Contract("gradient and point differ in length".into()));
    }
    let mut worst = GradientCheck {
        max_relative_error: 0.0,
        worst_coordinate: 0,
        analytic: gradient.first().copied().unwrap_or(0.0),
        numeric: gradient.first().copied().unwrap_or(0.0),
    };
    let mut probe = p.to_vec();
    for e in 0..p.len() {
        probe[e] = p[e] + h;
        let up = loss(&probe)?;
        probe[e] = p[e] - h;
        let down = loss(&probe)?;
        probe[e] = p[e];
        let numeric = (up - down) / (2.0 * h);
        let err = relative_error(gradient[e], numeric);
        if err > worst.max_relative_error {
            worst = GradientCheck {
                max_relative_error: err,
                worst_coordinate: e,
                analytic: gradient[e],
                numeric,
            };
        }
    }
    log::info!(
        "gradient check: max relative error {:.3e} at coordinate {} (analytic {:.6e}, numeric {:.6e})",
        worst.max_relative_error,
        worst.worst_coordinate,
        worst.analytic,
        worst.numeric
    );
    Ok(worst)
}
