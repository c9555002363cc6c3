use ndarray::{Array1, Array2};

use super::svd::{svd, Svd};
use crate::data::InteractionGraph;
use crate::error::{Error, Result};

/// Gap below which adjacent singular values count as repeated.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Feedback matrix with added edges set to 1, or to their relaxed weights.
pub fn svdgcn_augment_feedback(
    base: &InteractionGraph,
    added: &[(usize, usize)],
    weights: Option<&[f64]>,
) -> Result<Array2<f64>> {
    if let Some(w) = weights {
        if w.len() != added.len() {
            return Err(Error::Contract("weights not aligned with added edges".into()));
        }
    }
    let (m, n) = (base.n_users(), base.n_items());
    let mut r = Array2::zeros((m, n));
    for e in base.edges() {
        r[[e.user, e.item]] = 1.0;
    }
    for (k, &(u, i)) in added.iter().enumerate() {
        if base.has_edge(u, i) {
            return Err(Error::Contract(format!("edge ({u}, {i}) already in the graph")));
        }
        r[[u, i]] = weights.map_or(1.0, |w| w[k]);
    }
    Ok(r)
}

/// `(D_U + alpha I)^-1/2 R (D_I + alpha I)^-1/2` with degrees taken from `r` itself.
pub fn renormalize(r: &Array2<f64>, alpha: f64) -> Array2<f64> {
    let row_scale: Vec<f64> = r.rows().into_iter().map(|row| inv_sqrt(row.sum() + alpha)).collect();
    let col_scale: Vec<f64> = r.columns().into_iter().map(|col| inv_sqrt(col.sum() + alpha)).collect();
    Array2::from_shape_fn(r.dim(), |(u, i)| r[[u, i]] * row_scale[u] * col_scale[i])
}

fn inv_sqrt(x: f64) -> f64 {
    if x > 0.0 {
        1.0 / x.sqrt()
    } else {
        0.0
    }
}

/// Leading singular structure of the renormalised feedback.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    /// Full thin decomposition, kept for perturbation analysis.
    pub full: Svd,
    pub rank: usize,
    /// `zeta(s_k) = exp(gamma * s_k)` over the leading `rank` values.
    pub zeta: Array1<f64>,
    pub gamma: f64,
    /// Set when the truncation boundary splits a repeated singular value.
    pub boundary_degenerate: bool,
}

impl SpectralBasis {
    pub fn new(renormalized: &Array2<f64>, rank: usize, gamma: f64) -> Result<Self> {
        let (m, n) = renormalized.dim();
        if rank == 0 || rank > m.min(n) {
            return Err(Error::Parameter(format!("svd rank {rank} outside 1..={}", m.min(n))));
        }
        let full = svd(renormalized)?;
        let boundary_degenerate =
            rank < full.rank() && (full.s[rank - 1] - full.s[rank]).abs() <= DEGENERACY_TOL;
        let zeta = full.s.slice(ndarray::s![..rank]).mapv(|s| (gamma * s).exp());
        Ok(Self {
            full,
            rank,
            zeta,
            gamma,
            boundary_degenerate,
        })
    }

    pub fn p(&self) -> ndarray::ArrayView2<'_, f64> {
        self.full.u.slice(ndarray::s![.., ..self.rank])
    }

    pub fn q(&self) -> ndarray::ArrayView2<'_, f64> {
        self.full.v.slice(ndarray::s![.., ..self.rank])
    }

    /// `P diag(zeta)`: user-side spectral features.
    pub fn user_features(&self) -> Array2<f64> {
        &self.p() * &self.zeta
    }

    pub fn item_features(&self) -> Array2<f64> {
        &self.q() * &self.zeta
    }

    /// Scores with the learned projection `W` (`rank x d`).
    pub fn scores_parametric(&self, w: &Array2<f64>) -> Array2<f64> {
        let eu = self.user_features().dot(w);
        let ei = self.item_features().dot(w);
        eu.dot(&ei.t())
    }

    /// Non-parametric scores `P diag(zeta) Q^T`.
    pub fn scores_nonparametric(&self) -> Array2<f64> {
        self.user_features().dot(&self.q().t())
    }
}
