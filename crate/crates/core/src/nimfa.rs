//! Steady-state SIS infection probabilities under the N-intertwined
//! mean-field approximation.
//!
//! Closed forms cover the three topology families used by the games:
//! complete graphs ([`v_complete`]), complete bipartite graphs
//! ([`v_bipartite`]) and the multi-community graph glued through a single
//! core node ([`v_community`], [`core_infection`]). [`solve_general`]
//! handles any adjacency matrix and serves as the oracle for the closed
//! forms.

use std::io::BufRead;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Below this prevalence the iteration is declared to have collapsed onto
/// the trivial (all-healthy) solution.
pub const PREVALENCE_FLOOR: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Plain fixed-point steps before Newton acceleration kicks in.
const WARMUP_STEPS: usize = 20;
/// Largest graph for which dense Newton steps are attempted.
const NEWTON_MAX_NODES: usize = 1500;
/// Largest node index accepted from an edge list, plus one.
pub const MAX_EDGE_LIST_NODES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicRates {
    beta: f64,
    delta: f64,
}

impl EpidemicRates {
    pub fn new(beta: f64, delta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("must be finite and >= 0, got {beta}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid("delta", format!("must be finite and > 0, got {delta}")));
        }
        Ok(Self { beta, delta })
    }

    /// Rates with unit curing rate, so that `beta == tau`.
    pub fn from_tau(tau: f64) -> Result<Self> {
        Self::new(tau, 1.0)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Effective spreading rate `beta / delta`.
    pub fn tau(&self) -> f64 {
        self.beta / self.delta
    }
}

/// Undirected simple graph stored as sorted neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Self {
            neighbors: vec![Vec::new(); n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(invalid("edges", format!("edge ({i}, {j}) out of range for {n} nodes")));
            }
            if i == j {
                return Err(invalid("edges", format!("self-loop at node {i}")));
            }
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { neighbors })
    }

    pub fn complete(n: usize) -> Self {
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).collect())
            .collect();
        Self { neighbors }
    }

    /// `K_{m,n}`: nodes `0..m` form the first cluster, `m..m+n` the second.
    pub fn complete_bipartite(m: usize, n: usize) -> Self {
        let mut neighbors = Vec::with_capacity(m + n);
        for _ in 0..m {
            neighbors.push((m..m + n).collect());
        }
        for _ in 0..n {
            neighbors.push((0..m).collect());
        }
        Self { neighbors }
    }

    /// Multi-community graph with `counts[c]` non-core nodes in community
    /// `c`. Node 0 is the core; each community is a clique that includes it.
    pub fn multi_community(counts: &[usize]) -> Self {
        let total = 1 + counts.iter().sum::<usize>();
        let mut edges = Vec::new();
        let mut start = 1;
        for &count in counts {
            let members: Vec<usize> = (start..start + count).collect();
            for (a, &i) in members.iter().enumerate() {
                edges.push((0, i));
                for &j in &members[a + 1..] {
                    edges.push((i, j));
                }
            }
            start += count;
        }
        Self::from_edges(total, &edges).expect("generated edges are valid")
    }

    /// Parses an edge list: one whitespace-separated `i j` pair per line,
    /// 0-indexed. Blank lines and lines starting with `#` are skipped. The
    /// node count is one more than the largest index seen, or `min_nodes`
    /// if that is larger. Indices must stay below [`MAX_EDGE_LIST_NODES`].
    pub fn parse_edge_list<R: BufRead>(reader: R, min_nodes: usize) -> Result<Self> {
        let mut edges = Vec::new();
        let mut n = min_nodes;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::EdgeList {
                    line: idx + 1,
                    reason: format!("expected two node indices, found {}", fields.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::EdgeList {
                    line: idx + 1,
                    reason: format!("bad node index {s:?}: {e}"),
                })
            };
            let (i, j) = (parse(fields[0])?, parse(fields[1])?);
            if i.max(j) >= MAX_EDGE_LIST_NODES {
                return Err(Error::EdgeList {
                    line: idx + 1,
                    reason: format!("node index {} exceeds the limit of {MAX_EDGE_LIST_NODES} nodes", i.max(j)),
                });
            }
            if i == j {
                return Err(Error::EdgeList {
                    line: idx + 1,
                    reason: format!("self-loop at node {i}"),
                });
            }
            n = n.max(i + 1).max(j + 1);
            edges.push((i, j));
        }
        Self::from_edges(n, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    fn weighted_sums(&self, v: &[f64]) -> Vec<f64> {
        self.neighbors
            .iter()
            .map(|nb| nb.iter().map(|&j| v[j]).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub v: Vec<f64>,
    pub above_threshold: bool,
    pub residual: f64,
    pub iterations: usize,
}

/// Applies `v_i <- 1 - 1/(1 + tau * sum_j a_ij v_j)` once.
pub fn steady_state_map(adj: &Adjacency, tau: f64, v: &[f64]) -> Vec<f64> {
    adj.weighted_sums(v)
        .into_iter()
        .map(|s| 1.0 - 1.0 / (1.0 + tau * s))
        .collect()
}

/// Largest absolute violation of the steady-state equations at `v`.
pub fn residual(adj: &Adjacency, tau: f64, v: &[f64]) -> f64 {
    steady_state_map(adj, tau, v)
        .iter()
        .zip(v)
        .map(|(phi, x)| (phi - x).abs())
        .fold(0.0, f64::max)
}

/// Metastable solution of the steady-state equations on an arbitrary graph.
///
/// Iterates the steady-state map from the all-ones vector, which decreases
/// monotonically onto the largest fixed point. After a short warm-up the
/// plain steps are replaced by Newton steps on `v - map(v)`; these keep the
/// monotone descent but converge quickly even at the epidemic threshold,
/// where the plain map slows to `O(1/k)`. Convergence requires both the
/// residual and the last step to fall below `tol`.
pub fn solve_general(adj: &Adjacency, tau: f64, tol: f64, max_iter: usize) -> Result<SteadyState> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(invalid("tau", format!("must be finite and >= 0, got {tau}")));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be > 0, got {tol}")));
    }
    if max_iter == 0 {
        return Err(invalid("max_iter", "must be >= 1"));
    }
    let n = adj.node_count();
    let use_newton = n <= NEWTON_MAX_NODES;
    let mut v = vec![1.0; n];
    let mut last_step = f64::INFINITY;
    let mut iterations = 0;
    loop {
        let sums = adj.weighted_sums(&v);
        let phi: Vec<f64> = sums.iter().map(|s| 1.0 - 1.0 / (1.0 + tau * s)).collect();
        let res = phi
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let vmax = v.iter().copied().fold(0.0, f64::max);
        if vmax < PREVALENCE_FLOOR {
            return Ok(SteadyState {
                v: vec![0.0; n],
                above_threshold: false,
                residual: residual(adj, tau, &vec![0.0; n]),
                iterations,
            });
        }
        if res < tol && last_step < tol {
            return Ok(SteadyState {
                v,
                above_threshold: true,
                residual: res,
                iterations,
            });
        }
        if iterations >= max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: res,
                last: v,
            });
        }
        iterations += 1;

        let next = if use_newton && iterations > WARMUP_STEPS {
            newton_step(adj, tau, &v, &sums, &phi).unwrap_or(phi)
        } else {
            phi
        };
        last_step = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
    }
}

/// One Newton step for `G(v) = v - map(v)`, clamped to `[0, 1]`.
fn newton_step(adj: &Adjacency, tau: f64, v: &[f64], sums: &[f64], phi: &[f64]) -> Option<Vec<f64>> {
    let n = v.len();
    let mut jac = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        let d = tau / (1.0 + tau * sums[i]).powi(2);
        for &j in adj.neighbors(i) {
            jac[(i, j)] -= d;
        }
    }
    let g = DVector::from_iterator(n, v.iter().zip(phi).map(|(x, p)| x - p));
    let delta = jac.lu().solve(&g)?;
    let next: Vec<f64> = v
        .iter()
        .zip(delta.iter())
        .map(|(x, d)| (x - d).clamp(0.0, 1.0))
        .collect();
    next.iter().all(|x| x.is_finite()).then_some(next)
}

/// Infection probability of every node of `K_n`.
pub fn v_complete(n: usize, tau: f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    v_complete_real(n as f64, tau)
}

/// [`v_complete`] extended to a real node count (used by mean-field flows).
pub fn v_complete_real(n: f64, tau: f64) -> f64 {
    let x = tau * (n - 1.0);
    if n >= 2.0 && x > 1.0 {
        1.0 - 1.0 / x
    } else {
        0.0
    }
}

/// Infection probabilities `(v_M, v_N)` in `K_{m,n}` for a node of the
/// cluster with `m` nodes and a node of the cluster with `n` nodes.
pub fn v_bipartite(m: usize, n: usize, tau: f64) -> (f64, f64) {
    let (mf, nf) = (m as f64, n as f64);
    let x = tau * tau * mf * nf - 1.0;
    if m == 0 || n == 0 || x <= 0.0 {
        return (0.0, 0.0);
    }
    (
        x / (tau * mf * (tau * nf + 1.0)),
        x / (tau * nf * (tau * mf + 1.0)),
    )
}

/// Infection probability of a non-core node in a community with `n_m`
/// non-core non-investors, given the core infection probability `u`.
///
/// Positive root of `tau (n-1) v^2 - V v - tau u = 0` with
/// `V = tau (n-1) - tau u - 1`.
pub fn v_community(n_m: usize, tau_m: f64, u: f64) -> f64 {
    if u == 0.0 {
        return v_complete(n_m, tau_m);
    }
    if n_m <= 1 {
        let x = tau_m * u;
        return x / (1.0 + x);
    }
    let k = tau_m * (n_m as f64 - 1.0);
    let big_v = k - tau_m * u - 1.0;
    let disc = (big_v * big_v + 4.0 * tau_m * k * u).sqrt();
    // pick the cancellation-free form of the same root
    let root = if big_v >= 0.0 {
        (big_v + disc) / (2.0 * k)
    } else {
        2.0 * tau_m * u / (disc - big_v)
    };
    if root > 0.0 {
        root.min(1.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiCommunitySpec {
    sizes: Vec<usize>,
    taus: Vec<f64>,
}

impl MultiCommunitySpec {
    pub fn new(sizes: Vec<usize>, taus: Vec<f64>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(invalid("sizes", "at least one community is required"));
        }
        if sizes.len() != taus.len() {
            return Err(invalid(
                "taus",
                format!("{} sizes but {} spreading rates", sizes.len(), taus.len()),
            ));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(invalid("sizes", format!("community {i} has no nodes")));
        }
        if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(invalid("taus", format!("spreading rates must be finite and > 0, got {t}")));
        }
        Ok(Self { sizes, taus })
    }

    pub fn community_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn total_nodes(&self) -> usize {
        1 + self.sizes.iter().sum::<usize>()
    }
}

/// Core-node infection probability induced by `counts` non-investors per
/// community when the core currently sits at `u`.
pub fn core_infection(spec: &MultiCommunitySpec, counts: &[usize], u: f64) -> f64 {
    debug_assert_eq!(counts.len(), spec.community_count());
    let pressure: f64 = counts
        .iter()
        .zip(spec.taus())
        .map(|(&n, &tau)| tau * n as f64 * v_community(n, tau, u))
        .sum();
    1.0 - 1.0 / (1.0 + pressure)
}
