//! Thin and truncated singular value decompositions.
//!
//! Below 512 rows and columns the full decomposition comes from nalgebra;
//! larger matrices use orthogonal (subspace) iteration. Singular triplets
//! are sorted descending and sign-canonicalised so that decompositions of
//! nearby matrices are continuous in their inputs.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const FULL_SVD_LIMIT: usize = 512;
const ITERATION_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    /// `m x r` left singular vectors.
    pub u: Array2<f64>,
    /// Singular values, descending.
    pub s: Array1<f64>,
    /// `n x r` right singular vectors.
    pub v: Array2<f64>,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn truncate(&self, k: usize) -> Svd {
        let k = k.min(self.rank());
        Svd {
            u: self.u.slice(ndarray::s![.., ..k]).to_owned(),
            s: self.s.slice(ndarray::s![..k]).to_owned(),
            v: self.v.slice(ndarray::s![.., ..k]).to_owned(),
        }
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.u * &self.s;
        scaled.dot(&self.v.t())
    }
}

fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Sort descending and fix each pair's sign so the left vector has positive sum
/// (largest-magnitude entry positive when the sum vanishes).
fn canonicalize(u: Array2<f64>, s: Vec<f64>, v: Array2<f64>) -> Svd {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let mut uo = Array2::zeros((u.nrows(), order.len()));
    let mut vo = Array2::zeros((v.nrows(), order.len()));
    let mut so = Array1::zeros(order.len());
    for (dst, &src) in order.iter().enumerate() {
        let col = u.column(src);
        let sum: f64 = col.sum();
        let sign = if sum.abs() > 1e-12 {
            sum.signum()
        } else {
            let pivot = col
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(1.0);
            if pivot < 0.0 {
                -1.0
            } else {
                1.0
            }
        };
        uo.column_mut(dst).assign(&(&col * sign));
        vo.column_mut(dst).assign(&(&v.column(src) * sign));
        so[dst] = s[src];
    }
    Svd { u: uo, s: so, v: vo }
}

/// Thin SVD with `min(m, n)` triplets.
pub fn svd(a: &Array2<f64>) -> Result<Svd> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Ok(Svd {
            u: Array2::zeros((m, 0)),
            s: Array1::zeros(0),
            v: Array2::zeros((n, 0)),
        });
    }
    if !a.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite { node: "svd input".into() });
    }
    if m.max(n) >= FULL_SVD_LIMIT {
        return orthogonal_iteration(a, m.min(n));
    }
    let dec = to_nalgebra(a)
        .try_svd(true, true, 1e-15, 0)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let r = dec.singular_values.len();
    let u_n = dec.u.unwrap();
    let vt = dec.v_t.unwrap();
    let u = Array2::from_shape_fn((m, r), |(i, j)| u_n[(i, j)]);
    let v = Array2::from_shape_fn((n, r), |(i, j)| vt[(j, i)]);
    Ok(canonicalize(u, dec.singular_values.iter().copied().collect(), v))
}

/// Leading `k` singular triplets.
pub fn truncated_svd(a: &Array2<f64>, k: usize) -> Result<Svd> {
    let (m, n) = a.dim();
    if k > m.min(n) {
        return Err(Error::Parameter(format!("rank {k} exceeds min({m}, {n})")));
    }
    if m.max(n) >= FULL_SVD_LIMIT {
        return orthogonal_iteration(a, k);
    }
    Ok(svd(a)?.truncate(k))
}

/// Block power iteration on `A^T A` with re-orthonormalisation every step.
pub fn orthogonal_iteration(a: &Array2<f64>, k: usize) -> Result<Svd> {
    let (m, n) = a.dim();
    let block = (k + 8).min(m.min(n));
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q = DMatrix::from_fn(n, block, |_, _| StandardNormal.sample(&mut rng));
    let an = to_nalgebra(a);
    let mut prev: Vec<f64> = vec![0.0; block];
    for _ in 0..MAX_ITERATIONS {
        let z = &an * &q;
        let y = an.transpose() * z;
        let qr = y.qr();
        q = qr.q();
        let r = qr.r();
        let est: Vec<f64> = (0..block).map(|j| r[(j, j)].abs().sqrt()).collect();
        let change = est
            .iter()
            .zip(&prev)
            .take(k)
            .map(|(a, b)| (a - b).abs() / a.max(1e-300))
            .fold(0.0, f64::max);
        prev = est;
        if change < ITERATION_TOL {
            let b = &an * &q;
            let small = b
                .try_svd(true, true, 1e-15, 0)
                .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
            let u_n = small.u.unwrap();
            let v_small = small.v_t.unwrap().transpose();
            let v_n = &q * v_small;
            let r = small.singular_values.len();
            let u = Array2::from_shape_fn((m, r), |(i, j)| u_n[(i, j)]);
            let v = Array2::from_shape_fn((n, r), |(i, j)| v_n[(i, j)]);
            return Ok(canonicalize(u, small.singular_values.iter().copied().collect(), v).truncate(k));
        }
    }
    Err(Error::Numeric(format!(
        "orthogonal iteration did not reach tolerance {ITERATION_TOL} in {MAX_ITERATIONS} steps"
    )))
}
