//! The investment game on a complete bipartite network `K_{M,N}`.
//!
//! A profile is summarised by the pair `(n, m)`: `n` exposed players in
//! cluster N and `m` exposed players in cluster M. Pairs are always written
//! in that order.

use serde::{Deserialize, Serialize};

use crate::complete::ceil_snapped;
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::nimfa::v_bipartite;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BipartiteGame {
    m: usize,
    n: usize,
    c: f64,
    h: f64,
    tau: f64,
}

impl BipartiteGame {
    pub fn new(m: usize, n: usize, c: f64, h: f64, tau: f64) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "cluster M needs at least one node"));
        }
        if n == 0 {
            return Err(invalid("n", "cluster N needs at least one node"));
        }
        for (name, value) in [("c", c), ("h", h), ("tau", tau)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        Ok(Self { m, n, c, h, tau })
    }

    /// Parameters with `tau^2 (1-q) = 1e-1` and `tau q = 1e-4`, under which
    /// equilibria are neither unique nor balanced. Uses `H = 1`.
    pub fn multiplicity_example(m: usize, n: usize) -> Result<Self> {
        let tau = (1.0 + 40_000_001f64.sqrt()) / 20_000.0;
        let q = 1e-4 / tau;
        Self::new(m, n, q, 1.0, tau)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn q(&self) -> f64 {
        self.c / self.h
    }

    /// `tau^2 (1 - q)`.
    pub fn a(&self) -> f64 {
        self.tau * self.tau * (1.0 - self.q())
    }

    /// `tau q`.
    pub fn b(&self) -> f64 {
        self.tau * self.q()
    }

    /// `tau^2 M N > 1`.
    pub fn above_threshold(&self) -> bool {
        self.tau * self.tau * (self.m * self.n) as f64 > 1.0
    }

    /// Sufficient condition for every equilibrium to be balanced: `q >= 1/2`,
    /// or `tau >= (1+q)(1-2q)/(2q(1-q))` with `q < 1/2`.
    pub fn balance_condition(&self) -> bool {
        let q = self.q();
        q >= 0.5 || self.tau >= (1.0 + q) * (1.0 - 2.0 * q) / (2.0 * q * (1.0 - q))
    }

    /// Infection probabilities `(v_M, v_N)` with `n` exposed in N and `m`
    /// exposed in M.
    pub fn infection(&self, n: usize, m: usize) -> (f64, f64) {
        v_bipartite(m, n, self.tau)
    }
}

/// `S(n, m) = C (N - n + M - m) + H (m v_M + n v_N)`.
pub fn social_cost(game: &BipartiteGame, n: usize, m: usize) -> f64 {
    let (vm, vn) = game.infection(n, m);
    game.c * ((game.n - n) + (game.m - m)) as f64 + game.h * (m as f64 * vm + n as f64 * vn)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPair {
    pub n: usize,
    pub m: usize,
    /// `H v_M(n, m)`, must stay below `C`.
    pub exposed_cost_m: f64,
    /// `H v_M(n, m + 1)`, must reach `C`; `None` when `m = M`.
    pub deviation_cost_m: Option<f64>,
    /// `H v_N(n, m)`, must stay below `C`.
    pub exposed_cost_n: f64,
    /// `H v_N(n + 1, m)`, must reach `C`; `None` when `n = N`.
    pub deviation_cost_n: Option<f64>,
    pub social_cost: f64,
}

impl EquilibriumPair {
    /// `1 <= n < N` and `1 <= m < M`.
    pub fn is_interior(&self, game: &BipartiteGame) -> bool {
        (1..game.n).contains(&self.n) && (1..game.m).contains(&self.m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteEquilibria {
    /// Sorted by `(n, m)`.
    pub pairs: Vec<EquilibriumPair>,
    /// Every pair has `|n - m| <= 1`.
    pub balanced: bool,
    /// Every interior pair has `|n - m| <= 1`.
    pub interior_balanced: bool,
    /// No two pairs share `n`, and no two share `m`.
    pub distinct_counts: bool,
    pub condition2_holds: bool,
}

impl BipartiteEquilibria {
    pub fn pair_set(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|p| (p.n, p.m)).collect()
    }
}

fn candidate(game: &BipartiteGame, n: usize, m: usize, slack: f64) -> Option<EquilibriumPair> {
    let (vm, vn) = game.infection(n, m);
    let exposed_cost_m = game.h * vm;
    let exposed_cost_n = game.h * vn;
    if !(exposed_cost_m < game.c + slack && exposed_cost_n < game.c + slack) {
        return None;
    }
    let deviation_cost_m = (m < game.m).then(|| game.h * game.infection(n, m + 1).0);
    let deviation_cost_n = (n < game.n).then(|| game.h * game.infection(n + 1, m).1);
    let reaches = |d: Option<f64>| d.is_none_or(|d| game.c <= d + slack);
    if !(reaches(deviation_cost_m) && reaches(deviation_cost_n)) {
        return None;
    }
    Some(EquilibriumPair {
        n,
        m,
        exposed_cost_m,
        deviation_cost_m,
        exposed_cost_n,
        deviation_cost_n,
        social_cost: social_cost(game, n, m),
    })
}

fn summarise(game: &BipartiteGame, pairs: Vec<EquilibriumPair>) -> BipartiteEquilibria {
    let balanced = pairs.iter().all(|p| p.n.abs_diff(p.m) <= 1);
    let interior_balanced = pairs
        .iter()
        .filter(|p| p.is_interior(game))
        .all(|p| p.n.abs_diff(p.m) <= 1);
    let mut ns: Vec<usize> = pairs.iter().map(|p| p.n).collect();
    let mut ms: Vec<usize> = pairs.iter().map(|p| p.m).collect();
    ns.sort_unstable();
    ms.sort_unstable();
    let distinct = |v: &[usize]| v.windows(2).all(|w| w[0] != w[1]);
    BipartiteEquilibria {
        balanced,
        interior_balanced,
        distinct_counts: distinct(&ns) && distinct(&ms),
        condition2_holds: game.balance_condition(),
        pairs,
    }
}

/// Exhaustive check of every `(n, m)` against the equilibrium inequalities:
/// strict on the exposed side, weak on the deviation side. `slack` widens
/// both by an absolute amount.
pub fn equilibria_enumerate(game: &BipartiteGame, slack: f64, exec: Execution) -> BipartiteEquilibria {
    let rows = exec.map_range(0..game.n + 1, |n| {
        (0..=game.m)
            .filter_map(|m| candidate(game, n, m, slack))
            .collect::<Vec<_>>()
    });
    summarise(game, rows.into_iter().flatten().collect())
}

/// Best response of one cluster (size `size`) to `other` exposed players on
/// the opposite side: `ceil(1/(A other - B)) - 1`, capped at `size`.
fn best_response(game: &BipartiteGame, other: usize, size: usize) -> usize {
    let slope = game.a() * other as f64 - game.b();
    if slope <= 0.0 {
        return size;
    }
    let k = ceil_snapped(1.0 / slope) - 1.0;
    if k >= size as f64 {
        size
    } else {
        k.max(0.0) as usize
    }
}

/// Pairs solving the coupled ceiling system. For `q >= 1` only `(N, M)`.
pub fn equilibria_closed_form(game: &BipartiteGame) -> Vec<(usize, usize)> {
    if game.q() >= 1.0 {
        return vec![(game.n, game.m)];
    }
    (0..=game.n)
        .filter_map(|n| {
            let m = best_response(game, n, game.m);
            (best_response(game, m, game.n) == n).then_some((n, m))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteOptimum {
    /// 1: below threshold; 2: the cluster opposite the larger one invests
    /// down to the threshold; 3: nobody invests.
    pub case: u8,
    /// Continuous optimum `(n, m)`.
    pub continuous_point: (f64, f64),
    pub continuous_cost: f64,
    pub grid_point: (usize, usize),
    pub grid_cost: f64,
}

pub fn social_optimum_bipartite(game: &BipartiteGame, exec: Execution) -> BipartiteOptimum {
    let (tau, m, n) = (game.tau, game.m as f64, game.n as f64);
    let excess = tau * tau * m * n - 1.0;
    let full = (n, m);
    let (case, continuous_point, continuous_cost) = if excess <= 0.0 {
        (1, full, 0.0)
    } else {
        let big = m.max(n);
        let ratio = tau * big * (tau * (m + n) + 2.0) / ((tau * m + 1.0) * (tau * n + 1.0));
        if ratio >= game.q() {
            let point = if m >= n {
                (1.0 / (tau * tau * m), m)
            } else {
                (n, 1.0 / (tau * tau * n))
            };
            (2, point, game.c * excess / (tau * tau * big))
        } else {
            let cost = game.h * excess * (tau * (m + n) + 2.0) / (tau * (tau * m + 1.0) * (tau * n + 1.0));
            (3, full, cost)
        }
    };
    let (grid_point, grid_cost) = grid_minimum(game, exec);
    BipartiteOptimum {
        case,
        continuous_point,
        continuous_cost,
        grid_point,
        grid_cost,
    }
}

/// Smallest social cost over the integer grid; ties go to the first pair in
/// `(n, m)` order.
pub fn grid_minimum(game: &BipartiteGame, exec: Execution) -> ((usize, usize), f64) {
    let rows = exec.map_range(0..game.n + 1, |n| {
        (0..=game.m)
            .map(|m| ((n, m), social_cost(game, n, m)))
            .fold(((n, 0), f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    });
    rows.into_iter()
        .fold(((0, 0), f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Upper bound on the Price of Anarchy; `None` (unbounded) at or below
/// threshold.
pub fn poa_bound(game: &BipartiteGame) -> Option<f64> {
    let (tau, m, n) = (game.tau, game.m as f64, game.n as f64);
    let excess = tau * tau * m * n - 1.0;
    if excess <= 0.0 {
        return None;
    }
    let partial = (1.0 / (tau * m.max(n)))
        .min(game.h * (tau * (m + n) + 2.0) / (game.c * (tau * m + 1.0) * (tau * n + 1.0)));
    Some(tau * (m + n) / (excess * partial))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartitePoa {
    pub equilibria: BipartiteEquilibria,
    pub worst_equilibrium: Option<(usize, usize)>,
    pub worst_equilibrium_cost: f64,
    pub optimum: BipartiteOptimum,
    /// Worst equilibrium cost over the grid optimum; `None` when the
    /// optimum costs nothing but the equilibrium does.
    pub poa: Option<f64>,
    pub degenerate: bool,
    pub bound: Option<f64>,
    /// `bound > max{2, C/H}`; `None` when unbounded.
    pub bound_exceeds_floor: Option<bool>,
}

pub fn poa_bipartite(game: &BipartiteGame, exec: Execution) -> BipartitePoa {
    let equilibria = equilibria_enumerate(game, 0.0, exec);
    let worst = equilibria
        .pairs
        .iter()
        .fold(None::<&EquilibriumPair>, |acc, p| match acc {
            Some(a) if a.social_cost >= p.social_cost => Some(a),
            _ => Some(p),
        });
    let worst_equilibrium = worst.map(|p| (p.n, p.m));
    let worst_equilibrium_cost = worst.map_or(0.0, |p| p.social_cost);
    let optimum = social_optimum_bipartite(game, exec);
    let (poa, degenerate) = if optimum.grid_cost > 0.0 {
        (Some(worst_equilibrium_cost / optimum.grid_cost), false)
    } else if worst_equilibrium_cost == 0.0 {
        (Some(1.0), false)
    } else {
        (None, true)
    };
    let bound = poa_bound(game);
    BipartitePoa {
        worst_equilibrium,
        worst_equilibrium_cost,
        optimum,
        poa,
        degenerate,
        bound_exceeds_floor: bound.map(|b| b > 2f64.max(game.q())),
        bound,
        equilibria,
    }
}
