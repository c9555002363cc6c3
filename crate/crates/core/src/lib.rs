//! Fair graph augmentation for graph collaborative filtering.
//!
//! Given a trained graph recommender and a binary demographic partition of
//! its users, the augmenter learns which user-item edges to add to the
//! training graph so that the gap in NDCG between the two groups shrinks,
//! without touching the model's parameters.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augmenter;
pub mod data;
pub mod error;
pub mod experiments;
pub mod grad;
pub mod metrics;
pub mod models;
pub mod policies;

pub use error::{Error, Result};
