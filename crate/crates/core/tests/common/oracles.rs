//! Deliberately naive reference implementations. Nothing here calls the
//! library's own metric, ranking or graph-analytics code.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::sync::Arc;

use fairgcf::data::{Edge, GroupId, GroupPartition, IdMap, InteractionGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// DCG@k / IDCG@k for one ranked list with binary relevance.
pub fn ndcg(list: &[usize], relevant: &[usize], k: usize) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let mut dcg = 0.0;
    for (pos, item) in list.iter().take(k).enumerate() {
        if relevant.contains(item) {
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    let mut idcg = 0.0;
    for pos in 0..relevant.len().min(k) {
        idcg += 1.0 / ((pos + 2) as f64).log2();
    }
    Some(dcg / idcg)
}

/// Two-sided signed-rank p-value by enumerating all 2^n sign patterns.
pub fn wilcoxon_enumerated(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = d.len();
    // average ranks of |d|, computed by counting
    let ranks: Vec<f64> = d
        .iter()
        .map(|x| {
            let less = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let equal = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed + 1e-9 {
            le += 1;
        }
        if w >= observed - 1e-9 {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (2.0 * (le.min(ge) as f64) / total).min(1.0)
}

/// Dense adjacency of the bipartite graph, users first.
pub fn dense_adjacency(g: &InteractionGraph) -> Vec<Vec<bool>> {
    let n = g.n_nodes();
    let nu = g.n_users();
    let mut a = vec![vec![false; n]; n];
    for e in g.edges() {
        a[e.user][nu + e.item] = true;
        a[nu + e.item][e.user] = true;
    }
    a
}

pub fn degree(a: &[Vec<bool>], v: usize) -> usize {
    a[v].iter().filter(|x| **x).count()
}

/// All-pairs hop distances by Floyd-Warshall; `None` when unreachable.
pub fn all_pairs_distances(a: &[Vec<bool>]) -> Vec<Vec<Option<usize>>> {
    let n = a.len();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if a[i][j] {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d.into_iter()
        .map(|row| row.into_iter().map(|x| (x < inf).then_some(x)).collect())
        .collect()
}

/// Dense power iteration with uniform teleport and dangling mass spread uniformly.
pub fn pagerank_dense(a: &[Vec<bool>], damping: f64) -> Vec<f64> {
    let n = a.len();
    let deg: Vec<usize> = (0..n).map(|v| degree(a, v)).collect();
    let mut m = vec![vec![0.0; n]; n];
    for j in 0..n {
        for i in 0..n {
            m[i][j] = if deg[j] == 0 {
                1.0 / n as f64
            } else if a[i][j] {
                1.0 / deg[j] as f64
            } else {
                0.0
            };
        }
    }
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..10_000 {
        let next: Vec<f64> = (0..n)
            .map(|i| (1.0 - damping) / n as f64 + damping * (0..n).map(|j| m[i][j] * x[j]).sum::<f64>())
            .collect();
        let change: f64 = next.iter().zip(&x).map(|(p, q)| (p - q).abs()).sum();
        x = next;
        if change < 1e-15 {
            break;
        }
    }
    x
}

/// An exact non-negative rational score, compared by cross-multiplication.
#[derive(Debug, Clone, Copy)]
pub struct Ratio(pub i128, pub i128);

impl Ratio {
    pub fn int(x: i128) -> Self {
        Ratio(x, 1)
    }

    pub fn cmp(&self, other: &Ratio) -> Ordering {
        (self.0 * other.1).cmp(&(other.0 * self.1))
    }
}

/// The unique size-`n` subset that optimises a sum of per-element scores,
/// with ties resolved towards smaller indices, found by counting for each
/// element how many others beat it.
pub fn select_by_rank(scored: &[(usize, Ratio)], n: usize, maximise: bool) -> Vec<usize> {
    let beats = |x: &(usize, Ratio), y: &(usize, Ratio)| -> bool {
        let c = if maximise { x.1.cmp(&y.1) } else { y.1.cmp(&x.1) };
        c == Ordering::Greater || (c == Ordering::Equal && x.0 < y.0)
    };
    let mut out: Vec<usize> = scored
        .iter()
        .filter(|x| scored.iter().filter(|y| beats(y, x)).count() < n)
        .map(|x| x.0)
        .collect();
    out.sort_unstable();
    out
}

/// Best size-`n` subset by enumerating every combination; the first optimum in
/// lexicographic order wins. Only for integer scores and small universes.
type Scored = (usize, i128);

pub fn select_by_enumeration(scored: &[(usize, i128)], n: usize, maximise: bool) -> Vec<usize> {
    let mut sorted = scored.to_vec();
    sorted.sort_by_key(|x| x.0);
    let mut best: Option<(i128, Vec<usize>)> = None;
    let mut current = Vec::new();
    combinations(&sorted, n, 0, &mut current, &mut |combo| {
        let total: i128 = combo.iter().map(|x| x.1).sum();
        let better = match &best {
            None => true,
            Some((b, _)) if maximise => total > *b,
            Some((b, _)) => total < *b,
        };
        if better {
            best = Some((total, combo.iter().map(|x| x.0).collect()));
        }
    });
    best.map(|b| b.1).unwrap_or_default()
}

fn combinations<'a>(
    pool: &'a [Scored],
    n: usize,
    start: usize,
    current: &mut Vec<&'a Scored>,
    visit: &mut dyn FnMut(&[&Scored]),
) {
    if current.len() == n {
        visit(current);
        return;
    }
    for i in start..pool.len() {
        if pool.len() - i < n - current.len() {
            break;
        }
        current.push(&pool[i]);
        combinations(pool, n, i + 1, current, visit);
        current.pop();
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n.saturating_sub(k));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Round half up with the same slack the library documents for Ψ sizes.
pub fn expected_size(psi: f64, n: usize) -> usize {
    ((psi * n as f64 + 0.5 + 1e-9).floor() as usize).min(n)
}

/// A random bipartite graph where every user has at least one item.
pub fn random_graph(nu: usize, ni: usize, density: f64, timestamps: bool, rng: &mut ChaCha8Rng) -> InteractionGraph {
    let mut edges = Vec::new();
    for u in 0..nu {
        let forced = rng.random_range(0..ni);
        for i in 0..ni {
            if i == forced || rng.random_bool(density) {
                edges.push(Edge {
                    user: u,
                    item: i,
                    timestamp: if timestamps { rng.random_range(0..50) } else { 0 },
                });
            }
        }
    }
    let ids = |p: &str, n: usize| Arc::new(IdMap::from_keys((0..n).map(|i| format!("{p}{i:04}")).collect()).unwrap());
    InteractionGraph::new(ids("u", nu), ids("i", ni), edges, timestamps).unwrap()
}

/// A random labeled partition with both groups non-empty; some users may be unlabeled.
pub fn random_partition(nu: usize, rng: &mut ChaCha8Rng) -> GroupPartition {
    assert!(nu >= 2);
    let (mut first, mut second) = (vec![0], vec![1]);
    for u in 2..nu {
        match rng.random_range(0..10) {
            0 => {}
            1..=5 => first.push(u),
            _ => second.push(u),
        }
    }
    GroupPartition::new("gender", ["a".into(), "b".into()], first, second)
        .unwrap()
        .with_advantaged(if rng.random_bool(0.5) { GroupId::First } else { GroupId::Second })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
