//! Derivatives of the augmentation loss through the spectral model.
//!
//! The analytic strategy differentiates the thin SVD of the renormalised
//! feedback by first-order perturbation of its singular triplets. With
//! `P = U^T dA V`,
//!
//! ```text
//! ds_k = P_kk
//! du_k = sum_{j != k} u_j (s_k P_jk + s_j P_kj) / (s_k^2 - s_j^2) + (I - U U^T) dA v_k / s_k
//! dv_k = sum_{j != k} v_j (s_j P_jk + s_k P_kj) / (s_k^2 - s_j^2) + (I - V V^T) dA^T u_k / s_k
//! ```
//!
//! A candidate weight changes one feedback entry and the two degrees it
//! touches, so `dA` is a rank-three update whose projections are cheap.

use ndarray::{s, Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{FairnessObjective, LossAndGradient};
use crate::error::{Error, Result};
use crate::metrics::approx::sigmoid;
use crate::models::svdgcn::DEGENERACY_TOL;
use crate::models::{renormalize, svdgcn_augment_feedback, Params, SpectralBasis};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "strategy")]
pub enum SvdGradient {
    /// Central differences on every coordinate of `p`.
    FiniteDifference { step: f64 },
    /// Singular-triplet perturbation; falls back to differences on repeated values.
    Analytic,
}

/// Gradient of the full loss with respect to `p` for the spectral model.
pub fn svd_path_gradient(objective: &FairnessObjective<'_>, p: &[f64]) -> Result<LossAndGradient> {
    let loss = objective.spectral_loss(p)?;
    if p.is_empty() {
        return Ok(LossAndGradient {
            loss,
            gradient: Vec::new(),
            warnings: Vec::new(),
        });
    }
    match objective.config.svd_gradient {
        SvdGradient::FiniteDifference { step } => Ok(LossAndGradient {
            loss,
            gradient: finite_difference(objective, p, step)?,
            warnings: Vec::new(),
        }),
        SvdGradient::Analytic => match analytic(objective, p)? {
            Some(gradient) => Ok(LossAndGradient {
                loss,
                gradient,
                warnings: Vec::new(),
            }),
            None => {
                let msg = "repeated singular values; analytic spectral gradient replaced by finite differences".to_string();
                log::warn!("{msg}");
                Ok(LossAndGradient {
                    loss,
                    gradient: finite_difference(objective, p, 1e-5)?,
                    warnings: vec![msg],
                })
            }
        },
    }
}

fn finite_difference(objective: &FairnessObjective<'_>, p: &[f64], step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::Parameter("finite-difference step must be positive".into()));
    }
    (0..p.len())
        .into_par_iter()
        .map(|e| {
            let mut probe = p.to_vec();
            probe[e] = p[e] + step;
            let up = objective.spectral_loss(&probe)?.total;
            probe[e] = p[e] - step;
            let down = objective.spectral_loss(&probe)?.total;
            Ok((up - down) / (2.0 * step))
        })
        .collect()
}

/// `None` when the spectrum is too degenerate for the perturbation expansion.
fn analytic(objective: &FairnessObjective<'_>, p: &[f64]) -> Result<Option<Vec<f64>>> {
    let model = objective.model;
    let w_proj = match &model.params {
        Params::Projection(w) => w,
        _ => return Err(Error::Contract("analytic spectral gradient needs a learned projection".into())),
    };
    let alpha = model.config.svd_alpha;
    let weights: Vec<f64> = p.iter().map(|&x| sigmoid(x)).collect();
    let r = svdgcn_augment_feedback(&objective.train, objective.candidates, Some(&weights))?;
    let basis = SpectralBasis::new(&renormalize(&r, alpha), model.config.svd_rank, model.config.zeta_gamma)?;
    let (u, sv, v) = (&basis.full.u, &basis.full.s, &basis.full.v);
    let (rank, full) = (basis.rank, sv.len());
    for k in 0..rank {
        if sv[k] <= DEGENERACY_TOL {
            return Ok(None);
        }
        if (0..full).any(|j| j != k && (sv[k] - sv[j]).abs() <= DEGENERACY_TOL) {
            return Ok(None);
        }
    }

    // adjoints of the score matrix, then of the user and item embeddings
    let eu = basis.user_features().dot(w_proj);
    let ei = basis.item_features().dot(w_proj);
    let scores = eu.dot(&ei.t());
    let groups = objective.group_ndcg(&scores, true)?;
    let (m1, m2) = (groups[0].0, groups[1].0);
    let d_m = [2.0 * (m1 - m2), -2.0 * (m1 - m2)];
    let mut g_eu = Array2::<f64>::zeros(eu.dim());
    let mut g_ei = Array2::<f64>::zeros(ei.dim());
    for (g, users) in objective.groups.iter().enumerate() {
        if users.is_empty() {
            continue;
        }
        let gs = &groups[g].1 * d_m[g];
        let rows = gs.dot(&ei);
        for (r_idx, &user) in users.iter().enumerate() {
            let mut row = g_eu.row_mut(user);
            row += &rows.row(r_idx);
        }
        g_ei += &gs.t().dot(&eu.select(Axis(0), users));
    }
    let h_u = g_eu.dot(&w_proj.t());
    let h_i = g_ei.dot(&w_proj.t());
    let mu = u.t().dot(&h_u);
    let mv = v.t().dot(&h_i);
    let zeta = &basis.zeta;
    let gamma = basis.gamma;

    let row_deg: Array1<f64> = r.sum_axis(Axis(1));
    let col_deg: Array1<f64> = r.sum_axis(Axis(0));
    let beta = objective.config.beta;
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    let sd = sigmoid(sum_sq);
    let dist_scale = beta * sd * (1.0 - sd);

    let gradient = objective
        .candidates
        .par_iter()
        .enumerate()
        .map(|(e, &(a, b))| {
            let ua = u.row(a);
            let vb = v.row(b);
            let (da, db) = (row_deg[a] + alpha, col_deg[b] + alpha);
            let (ar, ac) = (-0.5 / da, -0.5 / db);
            let c0 = 1.0 / (da * db).sqrt();
            let mut d_weight = 0.0;
            for k in 0..rank {
                let sk = sv[k];
                let (uak, vbk) = (ua[k], vb[k]);
                let mut du = 0.0;
                let mut dv = 0.0;
                let mut proj_u = 0.0;
                let mut proj_v = 0.0;
                for j in 0..full {
                    let (uaj, vbj, sj) = (ua[j], vb[j], sv[j]);
                    proj_u += uaj * mu[[j, k]];
                    proj_v += vbj * mv[[j, k]];
                    if j == k {
                        continue;
                    }
                    let p_jk = ar * uaj * uak * sk + ac * sj * vbj * vbk + c0 * uaj * vbk;
                    let p_kj = ar * uak * uaj * sj + ac * sk * vbk * vbj + c0 * uak * vbj;
                    let denom = sk * sk - sj * sj;
                    du += (sk * p_jk + sj * p_kj) / denom * mu[[j, k]];
                    dv += (sj * p_jk + sk * p_kj) / denom * mv[[j, k]];
                }
                du += (ar * sk * uak + c0 * vbk) / sk * (h_u[[a, k]] - proj_u);
                dv += (ac * sk * vbk + c0 * uak) / sk * (h_i[[b, k]] - proj_v);
                let ds = ar * uak * uak * sk + ac * sk * vbk * vbk + c0 * uak * vbk;
                d_weight += zeta[k] * (du + dv) + gamma * zeta[k] * ds * (mu[[k, k]] + mv[[k, k]]);
            }
            let w = weights[e];
            (d_weight + dist_scale * w) * w * (1.0 - w)
        })
        .collect();
    Ok(Some(gradient))
}

/// Derivative of every singular value with respect to every entry of `a`
/// is `u_k[i] v_k[j]`; exposed for checking the perturbation expansion.
pub fn singular_value_sensitivity(a: &Array2<f64>, k: usize) -> Result<Array2<f64>> {
    let dec = crate::models::svd::svd(a)?;
    if k >= dec.rank() {
        return Err(Error::Parameter(format!("no singular value {k}")));
    }
    let uk = dec.u.slice(s![.., k]).to_owned().insert_axis(Axis(1));
    let vk = dec.v.slice(s![.., k]).to_owned().insert_axis(Axis(0));
    Ok(uk.dot(&vk))
}
