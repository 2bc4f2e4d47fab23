//! The investment game on a complete graph `K_N`.
//!
//! Players either invest (cost `C`, removed from the epidemic) or stay
//! exposed and pay `H` times their steady-state infection probability in
//! the induced complete graph of non-investors. Everything here is a
//! function of the non-investor count `n`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nimfa::{v_complete, v_complete_real};

/// Slack on the weak equilibrium inequalities, absorbing rounding at
/// exact ties.
pub const TIE_TOL: f64 = 1e-12;
pub const DEFAULT_BISECTION_TOL: f64 = 1e-10;
const BISECTION_MAX_ITER: usize = 200;
/// Up to this many players binomial weights are evaluated directly.
const DIRECT_BINOMIAL_MAX_N: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    n: usize,
    c: f64,
    h: f64,
    tau: f64,
}

impl GameParams {
    pub fn new(n: usize, c: f64, h: f64, tau: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "at least one player is required"));
        }
        for (name, value) in [("c", c), ("h", h), ("tau", tau)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        Ok(Self { n, c, h, tau })
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

    /// Cost ratio `C / H`.
    pub fn q(&self) -> f64 {
        self.c / self.h
    }

    /// `tau (N - 1) > 1`: the full network sustains an epidemic.
    pub fn above_threshold(&self) -> bool {
        self.n >= 2 && self.tau * (self.n as f64 - 1.0) > 1.0
    }

    /// `H (1 - 1/(tau (N-1)))`, the expected cost of staying exposed when
    /// nobody else invests.
    fn exposed_cost_when_nobody_invests(&self) -> f64 {
        self.h * v_complete(self.n, self.tau)
    }

    /// Interior symmetric mixed equilibrium exists: `C < H (1 - 1/(tau (N-1)))`.
    pub fn mixed_interior(&self) -> bool {
        self.c < self.exposed_cost_when_nobody_invests()
    }
}

/// `ceil(x)`, except that values within rounding of an integer snap to it.
pub(crate) fn ceil_snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureEquilibrium {
    pub n_star: usize,
    pub cost_invest: f64,
    pub cost_not_invest: f64,
    pub potential_at_eq: f64,
    /// Both no-deviation inequalities hold at `n_star`.
    pub satisfies_definition: bool,
}

pub fn exposed_cost(params: &GameParams, n: usize) -> f64 {
    params.h * v_complete(n, params.tau)
}

/// No exposed player wants to invest and no investor wants to leave.
pub fn is_equilibrium(params: &GameParams, n: usize) -> bool {
    if n > params.n {
        return false;
    }
    let stays_exposed = exposed_cost(params, n) <= params.c + TIE_TOL;
    let stays_invested = n == params.n || params.c <= exposed_cost(params, n + 1) + TIE_TOL;
    stays_exposed && stays_invested
}

/// Closed-form pure equilibrium: `min{N, ceil(1/((1 - C/H) tau))}` when
/// `C < H`, else `N`.
pub fn pure_equilibrium(params: &GameParams) -> PureEquilibrium {
    let n_star = if params.c < params.h {
        let x = 1.0 / ((1.0 - params.q()) * params.tau);
        let k = ceil_snapped(x);
        if k >= params.n as f64 {
            params.n
        } else {
            k as usize
        }
    } else {
        params.n
    };
    PureEquilibrium {
        n_star,
        cost_invest: params.c,
        cost_not_invest: exposed_cost(params, n_star),
        potential_at_eq: potential(params, n_star),
        satisfies_definition: is_equilibrium(params, n_star),
    }
}

/// `Phi(n) = C (N - n) + H sum_{j=2}^{n} v(j)`.
pub fn potential(params: &GameParams, n: usize) -> f64 {
    let exposure: f64 = (2..=n).map(|j| v_complete(j, params.tau)).sum();
    params.c * (params.n - n) as f64 + params.h * exposure
}

/// Smallest minimiser of the potential over `0..=N`.
pub fn potential_argmin(params: &GameParams) -> usize {
    argmin((0..=params.n).map(|n| potential(params, n)))
}

/// Values within `TIE_TOL` (relative) of the best so far count as ties and
/// keep the earlier index.
pub(crate) fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        let bar = if best.1.is_finite() {
            best.1 - TIE_TOL * best.1.abs().max(1.0)
        } else {
            best.1
        };
        if v < bar {
            best = (i, v);
        }
    }
    best.0
}

/// Every non-investor count satisfying the equilibrium inequalities.
pub fn equilibrium_bruteforce(params: &GameParams) -> Vec<usize> {
    (0..=params.n).filter(|&n| is_equilibrium(params, n)).collect()
}

/// `S(n) = C (N - n) + n H v(n)`.
pub fn social_cost(params: &GameParams, n: usize) -> f64 {
    params.c * (params.n - n) as f64 + n as f64 * exposed_cost(params, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialOptimum {
    pub n_opt: usize,
    pub cost: f64,
    /// Counts that were compared.
    pub candidates: Vec<usize>,
}

/// Social optimum by comparing the candidates `N`, `floor(1 + 1/tau)` and
/// `ceil(1 + 1/tau)`.
///
/// Below `1 + 1/tau` the cost falls linearly in `n`; above it the cost is
/// increasing, or increasing then decreasing, so the minimum sits at one of
/// the two integers around `1 + 1/tau` or at `N`.
pub fn social_optimum(params: &GameParams) -> SocialOptimum {
    let pivot = 1.0 + 1.0 / params.tau;
    let clamp = |x: f64| (x.max(0.0) as usize).min(params.n);
    let mut candidates = vec![clamp(pivot.floor()), clamp(ceil_snapped(pivot)), params.n];
    candidates.sort_unstable();
    candidates.dedup();
    let (n_opt, cost) = candidates
        .iter()
        .map(|&n| (n, social_cost(params, n)))
        .fold((params.n, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    SocialOptimum {
        n_opt,
        cost,
        candidates,
    }
}

/// Exhaustive minimiser of the social cost (smallest count on ties).
pub fn social_optimum_bruteforce(params: &GameParams) -> (usize, f64) {
    let n = argmin((0..=params.n).map(|n| social_cost(params, n)));
    (n, social_cost(params, n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoAReport {
    pub n_star: usize,
    pub n_opt: usize,
    pub social_cost_eq: f64,
    pub social_cost_opt: f64,
    pub poa: f64,
    /// `1 / (1 - (1 + 1/tau)/N)`; `None` when `N <= 1 + 1/tau`.
    pub poa_upper_bound: Option<f64>,
    pub poa_mixed: Option<f64>,
    pub poa_mixed_approx: Option<f64>,
}

pub fn poa_upper_bound(params: &GameParams) -> Option<f64> {
    let denom = 1.0 - (1.0 + 1.0 / params.tau) / params.n as f64;
    (denom > 0.0).then(|| 1.0 / denom)
}

pub fn poa_pure(params: &GameParams) -> Result<PoAReport> {
    let eq = pure_equilibrium(params);
    let opt = social_optimum(params);
    let social_cost_eq = social_cost(params, eq.n_star);
    let poa = if opt.cost > 0.0 {
        social_cost_eq / opt.cost
    } else if social_cost_eq == 0.0 {
        1.0
    } else {
        return Err(Error::DegeneratePoa {
            equilibrium_cost: social_cost_eq,
        });
    };
    debug_assert!(eq.n_star >= opt.n_opt);
    let mixed = poa_mixed(params);
    Ok(PoAReport {
        n_star: eq.n_star,
        n_opt: opt.n_opt,
        social_cost_eq,
        social_cost_opt: opt.cost,
        poa,
        poa_upper_bound: poa_upper_bound(params),
        poa_mixed: mixed.exact,
        poa_mixed_approx: mixed.approx,
    })
}

/// Weights `Binom(N-1, k) x^k (1-x)^{N-1-k}` for `k = 0..N-1`.
fn bernstein_weights(players: usize, x: f64) -> Vec<f64> {
    let m = players - 1;
    if x <= 0.0 {
        let mut w = vec![0.0; m + 1];
        w[0] = 1.0;
        return w;
    }
    if x >= 1.0 {
        let mut w = vec![0.0; m + 1];
        w[m] = 1.0;
        return w;
    }
    if players <= DIRECT_BINOMIAL_MAX_N {
        let mut binom = 1.0;
        (0..=m)
            .map(|k| {
                if k > 0 {
                    binom *= (m - k + 1) as f64 / k as f64;
                }
                binom * x.powi(k as i32) * (1.0 - x).powi((m - k) as i32)
            })
            .collect()
    } else {
        let (lx, ly) = (x.ln(), (1.0 - x).ln());
        let mut log_binom = 0.0;
        (0..=m)
            .map(|k| {
                if k > 0 {
                    log_binom += ((m - k + 1) as f64).ln() - (k as f64).ln();
                }
                (log_binom + k as f64 * lx + (m - k) as f64 * ly).exp()
            })
            .collect()
    }
}

/// Expected cost of staying exposed when each of the other `N - 1` players
/// invests with probability `p`.
pub fn mixed_cost_not_invest(params: &GameParams, p: f64) -> f64 {
    if params.n == 1 {
        return 0.0;
    }
    // k other players stay exposed with probability Binom(N-1,k)(1-p)^k p^(N-1-k)
    let weights = bernstein_weights(params.n, 1.0 - p);
    params.h
        * weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * v_complete(k + 1, params.tau))
            .sum::<f64>()
}

/// Expected social cost when all players invest with probability `p`.
pub fn mixed_social_cost(params: &GameParams, p: f64) -> f64 {
    params.n as f64 * (p * params.c + (1.0 - p) * mixed_cost_not_invest(params, p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedEquilibrium {
    pub p_star: f64,
    pub p_hat_star: f64,
    pub expected_cost_invest: f64,
    pub expected_cost_not: f64,
    pub solver_iterations: usize,
}

/// Bisection for `mixed_cost_not_invest(p) = C` on `[lo, hi]`. The bracket
/// must straddle the root.
pub fn bisect_indifference(params: &GameParams, lo: f64, hi: f64, tol: f64) -> Result<(f64, usize)> {
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be > 0, got {tol}")));
    }
    let gap = |p: f64| mixed_cost_not_invest(params, p) - params.c;
    let (mut lo, mut hi) = (lo, hi);
    let (g_lo, g_hi) = (gap(lo), gap(hi));
    if !(g_lo >= 0.0 && g_hi <= 0.0) {
        return Err(invalid("bracket", format!("[{lo}, {hi}] does not bracket the indifference point")));
    }
    let mut best = if g_lo.abs() <= g_hi.abs() { (lo, g_lo) } else { (hi, g_hi) };
    let mut iterations = 0;
    while iterations < BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if !(lo < mid && mid < hi) {
            break;
        }
        iterations += 1;
        let g = gap(mid);
        if g.abs() < best.1.abs() {
            best = (mid, g);
        }
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol && best.1.abs() <= tol {
            break;
        }
    }
    Ok((best.0, iterations))
}

pub fn mixed_equilibrium_exact(params: &GameParams, tol: f64) -> Result<MixedEquilibrium> {
    let p_hat_star = mixed_equilibrium_approx(params).p_hat_star;
    let (p_star, solver_iterations) = if params.mixed_interior() {
        bisect_indifference(params, 0.0, 1.0, tol)?
    } else {
        (0.0, 0)
    };
    Ok(MixedEquilibrium {
        p_star,
        p_hat_star,
        expected_cost_invest: params.c,
        expected_cost_not: mixed_cost_not_invest(params, p_star),
        solver_iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxMixed {
    pub p_hat_star: f64,
    /// `N C`, reported when the equilibrium is interior.
    pub social_cost: Option<f64>,
}

/// Mean-field mixed equilibrium `1 - H/(tau (H - C)(N - 1))`.
pub fn mixed_equilibrium_approx(params: &GameParams) -> ApproxMixed {
    if params.n >= 2 && params.mixed_interior() {
        let p = 1.0 - params.h / (params.tau * (params.h - params.c) * (params.n as f64 - 1.0));
        ApproxMixed {
            p_hat_star: p,
            social_cost: Some(params.n as f64 * params.c),
        }
    } else {
        ApproxMixed {
            p_hat_star: 0.0,
            social_cost: None,
        }
    }
}

/// Mean-field social cost `N (p C + (1-p) H v((1-p)(N-1) + 1))`.
pub fn approx_social_cost(params: &GameParams, p: f64) -> f64 {
    let others_exposed = (1.0 - p) * (params.n as f64 - 1.0);
    params.n as f64 * (p * params.c + (1.0 - p) * params.h * v_complete_real(others_exposed + 1.0, params.tau))
}

/// Mean-field expected cost of a player investing with probability
/// `p_self` while the others invest with probability `p`.
pub fn approx_player_cost(params: &GameParams, p_self: f64, p: f64) -> f64 {
    let others_exposed = (1.0 - p) * (params.n as f64 - 1.0);
    p_self * params.c + (1.0 - p_self) * params.h * v_complete_real(others_exposed + 1.0, params.tau)
}

/// Exact expected cost of a player investing with probability `p_self`
/// while the others invest with probability `p`.
pub fn exact_player_cost(params: &GameParams, p_self: f64, p: f64) -> f64 {
    p_self * params.c + (1.0 - p_self) * mixed_cost_not_invest(params, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedOptimum {
    pub p_opt: f64,
    pub cost: f64,
    /// Set when every `p` in the interval is optimal (`C = H`).
    pub interval: Option<(f64, f64)>,
    pub below_threshold: bool,
}

pub fn mixed_social_optimum(params: &GameParams) -> MixedOptimum {
    if !params.above_threshold() {
        return MixedOptimum {
            p_opt: 0.0,
            cost: 0.0,
            interval: None,
            below_threshold: true,
        };
    }
    let edge = v_complete(params.n, params.tau);
    let cost = params.n as f64 * params.c.min(params.h) * edge;
    let (p_opt, interval) = if params.c > params.h {
        (0.0, None)
    } else if params.c == params.h {
        (0.0, Some((0.0, edge)))
    } else {
        (edge, None)
    };
    MixedOptimum {
        p_opt,
        cost,
        interval,
        below_threshold: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedPoa {
    pub interior: bool,
    pub p_star: f64,
    /// Exact expected social cost at `p_star`.
    pub equilibrium_cost: f64,
    /// `N C`, the equilibrium cost implied by indifference.
    pub indifference_cost: f64,
    pub p_opt_exact: f64,
    pub optimal_cost_exact: f64,
    /// `equilibrium_cost / optimal_cost_exact`.
    pub exact: Option<f64>,
    /// `C / (min{C,H} (1 - 1/(tau (N-1))))`.
    pub approx: Option<f64>,
}

/// Minimises the exact expected social cost over `p` with a grid scan
/// followed by golden-section refinement around the best grid cell.
pub fn mixed_social_optimum_exact(params: &GameParams) -> (f64, f64) {
    const GRID: usize = 2000;
    let f = |p: f64| mixed_social_cost(params, p);
    let mut best = (0usize, f(0.0));
    for i in 1..=GRID {
        let v = f(i as f64 / GRID as f64);
        if v < best.1 {
            best = (i, v);
        }
    }
    let mut lo = best.0.saturating_sub(1) as f64 / GRID as f64;
    let mut hi = (best.0 + 1).min(GRID) as f64 / GRID as f64;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..80 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    let mid = 0.5 * (lo + hi);
    [(best.0 as f64 / GRID as f64, best.1), (mid, f(mid))]
        .into_iter()
        .fold((0.0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc })
}

pub fn poa_mixed(params: &GameParams) -> MixedPoa {
    let interior = params.mixed_interior();
    let p_star = if interior {
        bisect_indifference(params, 0.0, 1.0, DEFAULT_BISECTION_TOL)
            .map(|(p, _)| p)
            .unwrap_or(0.0)
    } else {
        0.0
    };
    let equilibrium_cost = mixed_social_cost(params, p_star);
    let (p_opt_exact, optimal_cost_exact) = mixed_social_optimum_exact(params);
    let exact = if optimal_cost_exact > 0.0 {
        Some(equilibrium_cost / optimal_cost_exact)
    } else if equilibrium_cost == 0.0 {
        Some(1.0)
    } else {
        None
    };
    let approx = params
        .above_threshold()
        .then(|| params.c / (params.c.min(params.h) * v_complete(params.n, params.tau)));
    MixedPoa {
        interior,
        p_star,
        equilibrium_cost,
        indifference_cost: params.n as f64 * params.c,
        p_opt_exact,
        optimal_cost_exact,
        exact,
        approx,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    /// `S(n*)`.
    pub pure_cost: f64,
    /// `N C`.
    pub mixed_cost: f64,
    pub ratio: f64,
    pub mixed_interior: bool,
    /// `Some(S_p < S_m)` when the mixed equilibrium is interior; no
    /// ordering is claimed otherwise.
    pub pure_is_cheaper: Option<bool>,
}

pub fn compare_strategies(params: &GameParams) -> StrategyComparison {
    let pure_cost = social_cost(params, pure_equilibrium(params).n_star);
    let mixed_cost = params.n as f64 * params.c;
    let mixed_interior = params.mixed_interior();
    StrategyComparison {
        pure_cost,
        mixed_cost,
        ratio: pure_cost / mixed_cost,
        mixed_interior,
        pure_is_cheaper: mixed_interior.then_some(pure_cost < mixed_cost),
    }
}

/// Like [`compare_strategies`] but refuses parameters without an interior
/// mixed equilibrium.
pub fn compare_strategies_strict(params: &GameParams) -> Result<StrategyComparison> {
    let cmp = compare_strategies(params);
    if cmp.mixed_interior {
        Ok(cmp)
    } else {
        Err(Error::Inapplicable(format!(
            "no interior mixed equilibrium: C = {} >= H (1 - 1/(tau (N-1)))",
            params.c
        )))
    }
}
