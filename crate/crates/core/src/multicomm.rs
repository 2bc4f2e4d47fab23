//! Parametric potential games coupled through a shared core node.
//!
//! Each community plays the complete-graph game with infection
//! probabilities that depend on the core node's probability `u`. The
//! iteration alternates per-community potential minimisation with an update
//! of `u`, and stops when `u` settles, when the equilibrium vectors cycle,
//! or at the iteration cap.

use serde::{Deserialize, Serialize};

use crate::complete::{argmin, ceil_snapped};
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::nimfa::{core_infection, v_community, MultiCommunitySpec};

pub const DEFAULT_EPSILON: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 1000;
/// Longest cycle of equilibrium vectors that is detected.
pub const MAX_CYCLE_PERIOD: usize = 16;
/// A cycle is reported once its pattern has repeated this many times.
const CYCLE_REPEATS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiCommGame {
    spec: MultiCommunitySpec,
    c: f64,
    h: f64,
}

impl MultiCommGame {
    pub fn new(spec: MultiCommunitySpec, c: f64, h: f64) -> Result<Self> {
        for (name, value) in [("c", c), ("h", h)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        Ok(Self { spec, c, h })
    }

    pub fn spec(&self) -> &MultiCommunitySpec {
        &self.spec
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn q(&self) -> f64 {
        self.c / self.h
    }

    fn check_community(&self, m: usize) -> Result<()> {
        if m >= self.spec.community_count() {
            return Err(invalid(
                "community",
                format!("index {m} out of range for {} communities", self.spec.community_count()),
            ));
        }
        Ok(())
    }
}

fn check_u(u: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&u) {
        return Err(invalid("u", format!("must lie in [0, 1], got {u}")));
    }
    Ok(())
}

/// `Phi_m(n) = C (N_m - n) + H sum_{i=2}^{n} v(i, tau_m, u)`.
pub fn parametric_potential(game: &MultiCommGame, m: usize, n: usize, u: f64) -> Result<f64> {
    game.check_community(m)?;
    check_u(u)?;
    let size = game.spec.sizes()[m];
    if n > size {
        return Err(invalid("n", format!("{n} exceeds community size {size}")));
    }
    Ok(potential_unchecked(game, m, n, u))
}

fn potential_unchecked(game: &MultiCommGame, m: usize, n: usize, u: f64) -> f64 {
    let tau = game.spec.taus()[m];
    let exposure: f64 = (2..=n).map(|i| v_community(i, tau, u)).sum();
    game.c * (game.spec.sizes()[m] - n) as f64 + game.h * exposure
}

/// `Phi_m` at every count `0..=N_m`, built with one running sum.
pub fn potential_profile(game: &MultiCommGame, m: usize, u: f64) -> Result<Vec<f64>> {
    game.check_community(m)?;
    check_u(u)?;
    Ok(profile_unchecked(game, m, u))
}

fn profile_unchecked(game: &MultiCommGame, m: usize, u: f64) -> Vec<f64> {
    let (size, tau) = (game.spec.sizes()[m], game.spec.taus()[m]);
    let mut exposure = 0.0;
    (0..=size)
        .map(|n| {
            if n >= 2 {
                exposure += v_community(n, tau, u);
            }
            game.c * (size - n) as f64 + game.h * exposure
        })
        .collect()
}

/// Smallest minimiser of `Phi_m(., u)`.
pub fn community_equilibrium(game: &MultiCommGame, m: usize, u: f64) -> Result<usize> {
    Ok(argmin(potential_profile(game, m, u)?.into_iter()))
}

/// `ceil(1/(tau_m (1-q)) - u/q)` clamped to `[0, N_m]`; `N_m` when `q >= 1`.
pub fn closed_form_equilibrium(game: &MultiCommGame, m: usize, u: f64) -> Result<usize> {
    game.check_community(m)?;
    check_u(u)?;
    let size = game.spec.sizes()[m];
    let q = game.q();
    if q >= 1.0 {
        return Ok(size);
    }
    let x = ceil_snapped(interval_start(game, m, u));
    Ok(if x <= 0.0 {
        0
    } else if x >= size as f64 {
        size
    } else {
        x as usize
    })
}

/// Left end of the interval `(x, x + 1]` holding the unclamped equilibrium
/// count: `x = 1/(tau_m (1-q)) - u/q`.
fn interval_start(game: &MultiCommGame, m: usize, u: f64) -> f64 {
    let q = game.q();
    1.0 / (game.spec.taus()[m] * (1.0 - q)) - u / q
}

/// `(x, x + 1)` for community `m`; `None` when `q >= 1`.
pub fn equilibrium_interval(game: &MultiCommGame, m: usize, u: f64) -> Result<Option<(f64, f64)>> {
    game.check_community(m)?;
    check_u(u)?;
    if game.q() >= 1.0 {
        return Ok(None);
    }
    let x = interval_start(game, m, u);
    Ok(Some((x, x + 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// Lower bounding function; `None` where undefined.
    pub g: Option<f64>,
    /// Upper bounding function; `None` where undefined.
    pub f: Option<f64>,
}

/// `g(u) = 1 - 1/(D - u T)` and `f(u) = 1 - 1/(D + (1+q) T - u T)` with
/// `D = 1 + M q/(1-q) - T` and `T = sum tau_m`. A bound is undefined when
/// `q >= 1` or its denominator is not positive.
pub fn bounding_functions(game: &MultiCommGame, u: f64) -> Bounds {
    let q = game.q();
    if q >= 1.0 {
        return Bounds { g: None, f: None };
    }
    let total: f64 = game.spec.taus().iter().sum();
    let base = 1.0 + game.spec.community_count() as f64 * q / (1.0 - q) - total;
    let eval = |d: f64| (d > 0.0).then(|| 1.0 - 1.0 / d);
    Bounds {
        g: eval(base - u * total),
        f: eval(base + (1.0 + q) * total - u * total),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    Cycle { period: usize },
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub u: f64,
    pub n_star: Vec<usize>,
    pub u_next: f64,
    pub bounds: Bounds,
    /// Both bounds are defined and every community count lies strictly
    /// inside its interval, which is what the sandwich argument assumes.
    pub sandwich_applicable: bool,
    /// `g(u) < u_next < f(u)`; `None` when not applicable.
    pub sandwich_holds: Option<bool>,
    /// Communities where the closed form disagrees with the argmin.
    pub closed_form_mismatches: Vec<ClosedFormMismatch>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedFormMismatch {
    pub community: usize,
    pub argmin: usize,
    pub closed_form: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiCommTrace {
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    pub converged: bool,
    pub iterations: usize,
    pub epsilon: f64,
    pub final_u: f64,
    pub final_n_star: Vec<usize>,
    /// `|u - core_infection(n*, u)|` at the final state.
    pub self_consistency_residual: f64,
}

impl MultiCommTrace {
    /// `u[0], u[1], ..., u[iterations]`.
    pub fn u_history(&self) -> Vec<f64> {
        let mut us: Vec<f64> = self.steps.iter().map(|s| s.u).collect();
        if let Some(last) = self.steps.last() {
            us.push(last.u_next);
        }
        us
    }

    pub fn n_star_history(&self) -> Vec<Vec<usize>> {
        self.steps.iter().map(|s| s.n_star.clone()).collect()
    }

    /// Every applicable step satisfies the sandwich.
    pub fn sandwich_ok(&self) -> bool {
        self.steps.iter().all(|s| s.sandwich_holds != Some(false))
    }
}

/// Smallest period `p` in `2..=MAX_CYCLE_PERIOD` such that the last
/// `CYCLE_REPEATS * p` vectors repeat with period `p` and not with period 1.
fn detect_cycle(history: &[Vec<usize>]) -> Option<usize> {
    (2..=MAX_CYCLE_PERIOD).find(|&p| {
        let window = CYCLE_REPEATS * p;
        if history.len() < window {
            return false;
        }
        let tail = &history[history.len() - window..];
        let periodic = (p..window).all(|i| tail[i] == tail[i - p]);
        let constant = tail.windows(2).all(|w| w[0] == w[1]);
        periodic && !constant
    })
}

/// Runs the alternating procedure from `u0`.
pub fn iterate(
    game: &MultiCommGame,
    u0: f64,
    epsilon: f64,
    max_iter: usize,
    exec: Execution,
) -> Result<MultiCommTrace> {
    check_u(u0)?;
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
    }
    if max_iter == 0 {
        return Err(invalid("max_iter", "must be at least 1"));
    }
    let communities = game.spec.community_count();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut history: Vec<Vec<usize>> = Vec::new();
    let mut u = u0;
    let mut outcome = Outcome::MaxIterations;
    for k in 0..max_iter {
        let per_community = exec.map_range(0..communities, |m| {
            let n = argmin(profile_unchecked(game, m, u).into_iter());
            let closed = closed_form_equilibrium(game, m, u).unwrap_or(n);
            let strictly_inside = equilibrium_interval(game, m, u)
                .ok()
                .flatten()
                .is_some_and(|(lo, hi)| lo < n as f64 && (n as f64) < hi);
            (n, closed, strictly_inside)
        });
        let n_star: Vec<usize> = per_community.iter().map(|r| r.0).collect();
        let closed_form_mismatches = per_community
            .iter()
            .enumerate()
            .filter(|(_, r)| r.0 != r.1)
            .map(|(community, r)| ClosedFormMismatch {
                community,
                argmin: r.0,
                closed_form: r.1,
            })
            .collect();
        let u_next = core_infection(&game.spec, &n_star, u);
        let bounds = bounding_functions(game, u);
        let sandwich_applicable =
            bounds.g.is_some() && bounds.f.is_some() && per_community.iter().all(|r| r.2);
        let sandwich_holds = match (sandwich_applicable, bounds.g, bounds.f) {
            (true, Some(g), Some(f)) => Some(g < u_next && u_next < f),
            _ => None,
        };
        history.push(n_star.clone());
        steps.push(StepRecord {
            k,
            u,
            n_star,
            u_next,
            bounds,
            sandwich_applicable,
            sandwich_holds,
            closed_form_mismatches,
        });
        let settled = (u_next - u).abs() < epsilon;
        u = u_next;
        if settled {
            outcome = Outcome::Converged;
            break;
        }
        if let Some(period) = detect_cycle(&history) {
            outcome = Outcome::Cycle { period };
            break;
        }
    }
    let final_n_star = steps.last().map(|s| s.n_star.clone()).unwrap_or_default();
    let self_consistency_residual = (u - core_infection(&game.spec, &final_n_star, u)).abs();
    Ok(MultiCommTrace {
        iterations: steps.len(),
        converged: outcome == Outcome::Converged,
        outcome,
        epsilon,
        final_u: u,
        final_n_star,
        self_consistency_residual,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub n_star: Vec<usize>,
    pub u: f64,
    pub u_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub q: f64,
    pub outcome: Outcome,
    pub iterations: usize,
    pub final_u: f64,
    pub final_n_star: Vec<usize>,
    pub self_consistency_residual: f64,
    pub sandwich_ok: bool,
    pub matches_target: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSweep {
    pub rows: Vec<SweepRow>,
    /// Cost ratios whose converged result matches the target.
    pub reproducing_q: Vec<f64>,
}

/// Runs [`iterate`] for each cost ratio `q` with `H = 1`, `C = q`.
pub fn sweep_q(
    spec: &MultiCommunitySpec,
    qs: &[f64],
    u0: f64,
    epsilon: f64,
    max_iter: usize,
    target: Option<&Target>,
    exec: Execution,
) -> Result<QSweep> {
    let rows = exec.map(qs, |&q| -> Result<SweepRow> {
        let game = MultiCommGame::new(spec.clone(), q, 1.0)?;
        // inner work stays sequential; the sweep itself is the parallel axis
        let trace = iterate(&game, u0, epsilon, max_iter, Execution::Sequential)?;
        let matches_target = target.map(|t| {
            trace.converged && trace.final_n_star == t.n_star && (trace.final_u - t.u).abs() <= t.u_tol
        });
        Ok(SweepRow {
            q,
            outcome: trace.outcome,
            iterations: trace.iterations,
            final_u: trace.final_u,
            sandwich_ok: trace.sandwich_ok(),
            self_consistency_residual: trace.self_consistency_residual,
            final_n_star: trace.final_n_star,
            matches_target,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let reproducing_q = rows
        .iter()
        .filter(|r| r.matches_target == Some(true))
        .map(|r| r.q)
        .collect();
    Ok(QSweep { rows, reproducing_q })
}

/// `0.05, 0.10, ..., 0.95`.
pub fn default_q_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}
