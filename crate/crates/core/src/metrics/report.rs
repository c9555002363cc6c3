use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One serialized metric observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub metric: String,
    pub k: usize,
    pub value: f64,
    pub group_values: BTreeMap<String, f64>,
    pub p_value: Option<f64>,
    pub n_users: usize,
}

/// Renders a fraction as a percentage with two decimals (`0.1251` -> `12.51`).
pub fn percent(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}
