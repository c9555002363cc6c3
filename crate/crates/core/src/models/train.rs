use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::lightgcn::{dot_scores, Propagator};
use super::optim::Adam;
use super::svdgcn::{renormalize, svdgcn_augment_feedback, SpectralBasis};
use super::topn::evaluate;
use super::{EmbeddingTable, ModelConfig, ModelKind, Params, TrainedModel};
use crate::data::{InteractionGraph, TrainValid};
use crate::error::{Error, Result};
use crate::metrics::RelevanceJudgements;

const INIT_STD: f64 = 0.1;

/// Trainable state: maps parameters to user/item representations and back.
enum Learner {
    /// LightGCN when `layers > 0` propagation is applied, MF-BPR otherwise.
    Ego {
        params: Array2<f64>,
        propagator: Option<(Propagator, usize)>,
    },
    Spectral {
        w: Array2<f64>,
        user_features: Array2<f64>,
        item_features: Array2<f64>,
    },
}

impl Learner {
    fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Learner::Ego { params, .. } => params.as_slice_mut().unwrap(),
            Learner::Spectral { w, .. } => w.as_slice_mut().unwrap(),
        }
    }

    fn n_params(&self) -> usize {
        match self {
            Learner::Ego { params, .. } => params.len(),
            Learner::Spectral { w, .. } => w.len(),
        }
    }

    /// Final node representations, users stacked over items.
    fn forward(&self) -> Array2<f64> {
        match self {
            Learner::Ego { params, propagator } => match propagator {
                Some((p, layers)) => p.smooth(params.view(), *layers),
                None => params.clone(),
            },
            Learner::Spectral {
                w,
                user_features,
                item_features,
            } => {
                let u = user_features.dot(w);
                let i = item_features.dot(w);
                ndarray::concatenate(Axis(0), &[u.view(), i.view()]).unwrap()
            }
        }
    }

    /// Pulls a gradient on the node representations back to the parameters.
    fn backward(&self, d_nodes: &Array2<f64>, n_users: usize) -> Array2<f64> {
        match self {
            // the layer-mean operator is symmetric, so its adjoint is itself
            Learner::Ego { propagator, .. } => match propagator {
                Some((p, layers)) => p.smooth(d_nodes.view(), *layers),
                None => d_nodes.clone(),
            },
            Learner::Spectral {
                user_features,
                item_features,
                ..
            } => {
                let du = d_nodes.slice(s![..n_users, ..]);
                let di = d_nodes.slice(s![n_users.., ..]);
                user_features.t().dot(&du) + item_features.t().dot(&di)
            }
        }
    }

    fn l2(&self, rows: &[usize], reg: f64, grad: &mut Array2<f64>, batch: f64) -> f64 {
        match self {
            Learner::Ego { params, .. } => {
                let mut pen = 0.0;
                for &r in rows {
                    let row = params.row(r);
                    pen += row.dot(&row);
                    grad.row_mut(r).scaled_add(reg / batch, &row);
                }
                0.5 * reg * pen / batch
            }
            Learner::Spectral { w, .. } => {
                grad.scaled_add(reg, w);
                0.5 * reg * w.iter().map(|x| x * x).sum::<f64>()
            }
        }
    }
}

fn sample_negative(rng: &mut ChaCha8Rng, train: &InteractionGraph, user: usize) -> Option<usize> {
    if train.user_degree(user) >= train.n_items() {
        return None;
    }
    loop {
        let j = rng.random_range(0..train.n_items());
        if !train.has_edge(user, j) {
            return Some(j);
        }
    }
}

fn init_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let normal = Normal::new(0.0, INIT_STD).unwrap();
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng))
}

/// Fits a model with pairwise BPR on the training graph and keeps the
/// parameters of the epoch with the best mean validation NDCG.
pub fn train(data: TrainValid<'_>, config: &ModelConfig) -> Result<TrainedModel> {
    config.validate()?;
    let train = data.train;
    let (n_users, n_items) = (train.n_users(), train.n_items());
    let judgements = RelevanceJudgements::from_graph(data.valid);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut warnings = Vec::new();

    let spectral = |rank_check: bool| -> Result<SpectralBasis> {
        let r = svdgcn_augment_feedback(train, &[], None)?;
        let basis = SpectralBasis::new(&renormalize(&r, config.svd_alpha), config.svd_rank, config.zeta_gamma)?;
        if rank_check && basis.boundary_degenerate {
            log::warn!("repeated singular value at the truncation boundary");
        }
        Ok(basis)
    };

    let mut learner = match config.kind {
        ModelKind::SvdGcnS => {
            let basis = spectral(true)?;
            if basis.boundary_degenerate {
                warnings.push("repeated singular value at truncation boundary".to_string());
            }
            let scores = basis.scores_nonparametric();
            let ndcg = evaluate(scores.view(), train, &judgements, config.eval_k)
                .mean()
                .unwrap_or(0.0);
            return Ok(TrainedModel {
                config: config.clone(),
                n_users,
                n_items,
                params: Params::None,
                best_epoch: 0,
                validation_curve: vec![ndcg],
                warnings,
            });
        }
        ModelKind::LightGcn | ModelKind::MfBpr => {
            let params = init_matrix(&mut rng, n_users + n_items, config.embedding_size);
            let propagator = (config.kind == ModelKind::LightGcn).then(|| {
                let edges = train.edges().iter().map(|e| (e.user, e.item)).collect::<Vec<_>>();
                let w = vec![1.0; edges.len()];
                (Propagator::new(n_users, n_items, edges, w), config.layers)
            });
            Learner::Ego { params, propagator }
        }
        ModelKind::SvdGcn => {
            let basis = spectral(true)?;
            if basis.boundary_degenerate {
                warnings.push("repeated singular value at truncation boundary".to_string());
            }
            let w = init_matrix(&mut rng, basis.rank, config.embedding_size);
            Learner::Spectral {
                w,
                user_features: basis.user_features(),
                item_features: basis.item_features(),
            }
        }
    };

    let mut adam = Adam::new(learner.n_params(), config.learning_rate);
    let mut positives: Vec<(usize, usize)> = train.edges().iter().map(|e| (e.user, e.item)).collect();
    let mut curve = Vec::with_capacity(config.train_epochs);
    let mut best: Option<(usize, f64, Learner)> = None;

    for epoch in 1..=config.train_epochs {
        positives.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in positives.chunks(config.batch_size) {
            let mut triples = Vec::with_capacity(chunk.len() * config.negatives_per_positive);
            for &(u, i) in chunk {
                for _ in 0..config.negatives_per_positive {
                    if let Some(j) = sample_negative(&mut rng, train, u) {
                        triples.push((u, i, j));
                    }
                }
            }
            if triples.is_empty() {
                continue;
            }
            let nodes = learner.forward();
            let batch = triples.len() as f64;
            let mut d_nodes = Array2::<f64>::zeros(nodes.dim());
            let mut loss = 0.0;
            for &(u, i, j) in &triples {
                let eu = nodes.row(u);
                let ei = nodes.row(n_users + i);
                let ej = nodes.row(n_users + j);
                let x = eu.dot(&ei) - eu.dot(&ej);
                // -ln sigmoid(x), computed stably
                loss += if x > 0.0 { (-x).exp().ln_1p() } else { -x + x.exp().ln_1p() };
                let g = -1.0 / (1.0 + x.exp()) / batch;
                let diff = &ei - &ej;
                d_nodes.row_mut(u).scaled_add(g, &diff);
                d_nodes.row_mut(n_users + i).scaled_add(g, &eu);
                d_nodes.row_mut(n_users + j).scaled_add(-g, &eu);
            }
            loss /= batch;
            let mut grad = learner.backward(&d_nodes, n_users);
            let mut rows: Vec<usize> = triples
                .iter()
                .flat_map(|&(u, i, j)| [u, n_users + i, n_users + j])
                .collect();
            rows.sort_unstable();
            let reg = learner.l2(&rows, config.l2_reg, &mut grad, batch);
            loss += reg;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            epoch_loss += loss;
            adam.step(learner.params_mut(), grad.as_slice().unwrap());
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let nodes = learner.forward();
        let scores = dot_scores(nodes.view(), n_users);
        let ndcg = evaluate(scores.view(), train, &judgements, config.eval_k)
            .mean()
            .unwrap_or(0.0);
        curve.push(ndcg);
        if best.as_ref().is_none_or(|(_, b, _)| ndcg > *b) {
            let snapshot = match &learner {
                Learner::Ego { params, .. } => Learner::Ego {
                    params: params.clone(),
                    propagator: None,
                },
                Learner::Spectral { w, .. } => Learner::Spectral {
                    w: w.clone(),
                    user_features: Array2::zeros((0, 0)),
                    item_features: Array2::zeros((0, 0)),
                },
            };
            best = Some((epoch, ndcg, snapshot));
        }
        log::debug!("{} epoch {epoch}: loss {epoch_loss:.6} valid ndcg {ndcg:.4}", config.kind);
    }

    let (best_epoch, _, snapshot) = best.expect("at least one epoch");
    let params = match snapshot {
        Learner::Ego { params, .. } => Params::Embeddings(EmbeddingTable {
            users: params.slice(s![..n_users, ..]).to_owned(),
            items: params.slice(s![n_users.., ..]).to_owned(),
        }),
        Learner::Spectral { w, .. } => Params::Projection(w),
    };
    Ok(TrainedModel {
        config: config.clone(),
        n_users,
        n_items,
        params,
        best_epoch,
        validation_curve: curve,
        warnings,
    })
}
