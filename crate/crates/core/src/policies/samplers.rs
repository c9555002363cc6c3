use std::collections::VecDeque;

use rayon::prelude::*;

use crate::data::{round_half_up, GroupPartition, InteractionGraph};
use crate::error::{Error, Result};
use crate::metrics::UtilityVector;

pub const PAGERANK_TOL: f64 = 1e-10;
pub const PAGERANK_MAX_ITERATIONS: usize = 1000;

/// `round(psi * n)`, halves rounded up.
pub fn sample_size(psi: f64, n: usize) -> usize {
    round_half_up(psi * n as f64).min(n)
}

/// The `n` best entries of `scored`, best first by score then by index, returned in index order.
fn top(mut scored: Vec<(usize, f64)>, n: usize, descending: bool) -> Vec<usize> {
    scored.sort_by(|a, b| {
        let by_score = if descending { b.1.total_cmp(&a.1) } else { a.1.total_cmp(&b.1) };
        by_score.then(a.0.cmp(&b.0))
    });
    let mut out: Vec<usize> = scored.into_iter().take(n).map(|(i, _)| i).collect();
    out.sort_unstable();
    out
}

/// Disadvantaged users whose validation NDCG is exactly zero.
pub fn sample_zn(partition: &GroupPartition, utilities: &UtilityVector) -> Result<Vec<usize>> {
    let out: Vec<usize> = partition
        .disadvantaged_users()?
        .iter()
        .copied()
        .filter(|&u| utilities.get(u) == Some(0.0))
        .collect();
    if out.is_empty() {
        log::warn!("ZN sample is empty: every disadvantaged user has positive validation NDCG");
    }
    Ok(out)
}

/// Disadvantaged users with the fewest training interactions.
pub fn sample_ld(graph: &InteractionGraph, partition: &GroupPartition, psi: f64) -> Result<Vec<usize>> {
    let users = partition.disadvantaged_users()?;
    let scored = users.iter().map(|&u| (u, graph.user_degree(u) as f64)).collect();
    Ok(top(scored, sample_size(psi, users.len()), false))
}

/// Hop distances from node `source` (users first, then items), `None` when unreachable.
pub fn bfs_distances(graph: &InteractionGraph, source: usize) -> Vec<Option<usize>> {
    let nu = graph.n_users();
    let mut dist = vec![None; graph.n_nodes()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap() + 1;
        let mut visit = |w: usize, dist: &mut Vec<Option<usize>>| {
            if dist[w].is_none() {
                dist[w] = Some(d);
                queue.push_back(w);
            }
        };
        if v < nu {
            for i in graph.user_items(v) {
                visit(nu + i, &mut dist);
            }
        } else {
            for u in graph.item_users(v - nu) {
                visit(u, &mut dist);
            }
        }
    }
    dist
}

/// Disadvantaged users furthest, in summed hop distance, from the advantaged group.
pub fn sample_fr(graph: &InteractionGraph, partition: &GroupPartition, psi: f64, cap: Option<usize>) -> Result<Vec<usize>> {
    let users = partition.disadvantaged_users()?;
    let advantaged = partition.advantaged_users()?;
    let cap = cap.unwrap_or(graph.n_nodes());
    let scored: Vec<(usize, f64)> = users
        .par_iter()
        .map(|&u| {
            let dist = bfs_distances(graph, u);
            let total: usize = advantaged.iter().map(|&a| dist[a].unwrap_or(cap)).sum();
            (u, total as f64)
        })
        .collect();
    Ok(top(scored, sample_size(psi, users.len()), true))
}

/// Disadvantaged users whose items have the lowest mean degree.
pub fn sample_sp(graph: &InteractionGraph, partition: &GroupPartition, psi: f64) -> Result<Vec<usize>> {
    let users = partition.disadvantaged_users()?;
    let mut scored = Vec::with_capacity(users.len());
    for &u in users {
        let deg = graph.user_degree(u);
        if deg == 0 {
            log::warn!("SP skips user {u}: no training interactions");
            continue;
        }
        let total: usize = graph.user_items(u).map(|i| graph.item_degree(i)).sum();
        scored.push((u, total as f64 / deg as f64));
    }
    Ok(top(scored, sample_size(psi, users.len()), false))
}

/// Items most preferred by the disadvantaged group relative to its size.
pub fn sample_ip(graph: &InteractionGraph, partition: &GroupPartition, psi: f64) -> Result<Vec<usize>> {
    let disadvantaged = partition.disadvantaged_users()?;
    if disadvantaged.is_empty() {
        return Err(Error::EmptyGroup("disadvantaged".into()));
    }
    let scored = (0..graph.n_items())
        .map(|i| {
            let all = graph.item_degree(i);
            // one rounding step, so equal ratios compare equal
            let score = if all == 0 {
                0.0
            } else {
                let dis = graph.item_users(i).filter(|&u| partition.is_disadvantaged(u)).count();
                (graph.n_users() * dis) as f64 / (disadvantaged.len() * all) as f64
            };
            (i, score)
        })
        .collect();
    Ok(top(scored, sample_size(psi, graph.n_items()), true))
}

fn require_timestamps(graph: &InteractionGraph, policy: &str) -> Result<()> {
    if graph.has_timestamps() {
        Ok(())
    } else {
        Err(Error::PolicyUnavailable(policy.into(), "the corpus has no timestamps".into()))
    }
}

/// Disadvantaged users with the most recent latest interaction.
pub fn sample_ir(graph: &InteractionGraph, partition: &GroupPartition, psi: f64) -> Result<Vec<usize>> {
    require_timestamps(graph, "IR")?;
    let users = partition.disadvantaged_users()?;
    let scored = users
        .iter()
        .map(|&u| {
            let latest = graph.user_edges(u).iter().map(|e| e.timestamp).max();
            (u, latest.map_or(f64::NEG_INFINITY, |t| t as f64))
        })
        .collect();
    Ok(top(scored, sample_size(psi, users.len()), true))
}

/// Items with the longest span between their first and last interaction.
pub fn sample_it(graph: &InteractionGraph, psi: f64) -> Result<Vec<usize>> {
    require_timestamps(graph, "IT")?;
    let scored = (0..graph.n_items())
        .map(|i| {
            let (lo, hi) = graph
                .item_edges(i)
                .fold((i64::MAX, i64::MIN), |(lo, hi), e| (lo.min(e.timestamp), hi.max(e.timestamp)));
            (i, if lo <= hi { (hi - lo) as f64 } else { 0.0 })
        })
        .collect();
    Ok(top(scored, sample_size(psi, graph.n_items()), true))
}

/// Pagerank over users then items, each undirected edge followed both ways.
pub fn pagerank(graph: &InteractionGraph, damping: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::Parameter(format!("damping {damping} outside [0, 1)")));
    }
    let n = graph.n_nodes();
    let nu = graph.n_users();
    let degree: Vec<usize> = (0..n)
        .map(|v| if v < nu { graph.user_degree(v) } else { graph.item_degree(v - nu) })
        .collect();
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..PAGERANK_MAX_ITERATIONS {
        let dangling: f64 = (0..n).filter(|&v| degree[v] == 0).map(|v| x[v]).sum();
        let base = (1.0 - damping) / n as f64 + damping * dangling / n as f64;
        let share: Vec<f64> = (0..n)
            .map(|v| if degree[v] > 0 { x[v] / degree[v] as f64 } else { 0.0 })
            .collect();
        let next: Vec<f64> = (0..n)
            .map(|v| {
                let inflow: f64 = if v < nu {
                    graph.user_items(v).map(|i| share[nu + i]).sum()
                } else {
                    graph.item_users(v - nu).map(|u| share[u]).sum()
                };
                base + damping * inflow
            })
            .collect();
        let change: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if change < PAGERANK_TOL {
            return Ok(x);
        }
    }
    Err(Error::Numeric(format!(
        "pagerank did not converge in {PAGERANK_MAX_ITERATIONS} iterations"
    )))
}

/// Items with the highest pagerank.
pub fn sample_pr(graph: &InteractionGraph, psi: f64, damping: f64) -> Result<Vec<usize>> {
    let rank = pagerank(graph, damping)?;
    let nu = graph.n_users();
    let scored = (0..graph.n_items()).map(|i| (i, rank[nu + i])).collect();
    Ok(top(scored, sample_size(psi, graph.n_items()), true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Edge, GroupId, IdMap};
    use std::sync::Arc;

    fn graph(nu: usize, ni: usize, edges: &[(usize, usize, i64)]) -> InteractionGraph {
        let ids = |p: &str, n: usize| Arc::new(IdMap::from_keys((0..n).map(|i| format!("{p}{i}")).collect()).unwrap());
        let edges = edges.iter().map(|&(user, item, timestamp)| Edge { user, item, timestamp }).collect();
        InteractionGraph::new(ids("u", nu), ids("i", ni), edges, true).unwrap()
    }

    fn partition(first: Vec<usize>, second: Vec<usize>) -> GroupPartition {
        GroupPartition::new("gender", ["a".into(), "b".into()], first, second)
            .unwrap()
            .with_advantaged(GroupId::First)
    }

    #[test]
    fn ld_picks_lowest_degrees() {
        // disadvantaged users 1..=4 with degrees 1, 2, 3, 4
        let g = graph(
            5,
            5,
            &[(0, 0, 0), (1, 0, 0), (2, 0, 0), (2, 1, 0), (3, 0, 0), (3, 1, 0), (3, 2, 0), (4, 0, 0), (4, 1, 0), (4, 2, 0), (4, 3, 0)],
        );
        let p = partition(vec![0], vec![1, 2, 3, 4]);
        assert_eq!(sample_ld(&g, &p, 0.5).unwrap(), vec![1, 2]);
    }

    #[test]
    fn equal_degrees_fall_back_to_index() {
        let g = graph(4, 2, &[(0, 0, 0), (1, 1, 0), (2, 0, 0), (3, 1, 0)]);
        let p = partition(vec![0], vec![1, 2, 3]);
        assert_eq!(sample_ld(&g, &p, 0.5).unwrap(), vec![1, 2]);
    }

    #[test]
    fn fr_prefers_disconnected_users() {
        // user 2 lives in its own component
        let g = graph(3, 3, &[(0, 0, 0), (1, 0, 0), (2, 2, 0)]);
        let p = partition(vec![0], vec![1, 2]);
        assert_eq!(sample_fr(&g, &p, 0.5, None).unwrap(), vec![2]);
    }

    #[test]
    fn ip_scores_exclusive_items_highest() {
        let g = graph(4, 3, &[(0, 0, 0), (1, 0, 0), (2, 1, 0), (3, 1, 0), (0, 2, 0)]);
        let p = partition(vec![0, 1], vec![2, 3]);
        assert_eq!(sample_ip(&g, &p, 0.34).unwrap(), vec![1]);
    }

    #[test]
    fn ir_needs_timestamps() {
        let ids = |p: &str, n: usize| Arc::new(IdMap::from_keys((0..n).map(|i| format!("{p}{i}")).collect()).unwrap());
        let g = InteractionGraph::new(ids("u", 2), ids("i", 1), vec![Edge { user: 0, item: 0, timestamp: 0 }], false).unwrap();
        let p = partition(vec![0], vec![1]);
        assert!(matches!(sample_ir(&g, &p, 0.5), Err(Error::PolicyUnavailable(..))));
        assert!(matches!(sample_it(&g, 0.5), Err(Error::PolicyUnavailable(..))));
    }

    #[test]
    fn pagerank_is_stochastic_and_symmetric_on_regular_graphs() {
        // 2x2 complete bipartite graph
        let g = graph(2, 2, &[(0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 1, 0)]);
        let r = pagerank(&g, 0.85).unwrap();
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert!((r[2] - r[3]).abs() < 1e-12);
        assert_eq!(sample_pr(&g, 0.5, 0.85).unwrap(), vec![0]);
    }

    #[test]
    fn half_sizes_round_up() {
        assert_eq!(sample_size(0.5, 5), 3);
        assert_eq!(sample_size(0.35, 10), 4);
        assert_eq!(sample_size(0.2, 7), 1);
    }
}
