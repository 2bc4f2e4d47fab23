//! One-parameter sweeps over the complete and bipartite games.
//!
//! Grid points are evaluated through [`Execution`] and returned in grid
//! order.

use serde::{Deserialize, Serialize};

use crate::bipartite::{poa_bipartite, BipartiteGame};
use crate::complete::{compare_strategies, poa_pure, pure_equilibrium, GameParams};
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::report::{fmt_float, fmt_opt, CsvRow};

/// Sweeps longer than this are rejected.
pub const MAX_GRID_POINTS: usize = 100_000;

/// `from, from + step, ...` up to `to` inclusive (within rounding).
pub fn grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(from.is_finite() && to.is_finite()) {
        return Err(invalid("range", "bounds must be finite"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("step", format!("must be finite and > 0, got {step}")));
    }
    if to < from {
        return Err(invalid("range", format!("empty range: {from} > {to}")));
    }
    let count = ((to - from) / step + 1e-9).floor();
    if count >= MAX_GRID_POINTS as f64 {
        return Err(invalid("range", format!("more than {MAX_GRID_POINTS} grid points")));
    }
    Ok((0..=count as usize).map(|i| from + i as f64 * step).collect())
}

/// `x` as a positive integer, rejecting non-integral values.
pub fn as_count(name: &'static str, x: f64) -> Result<usize> {
    let r = x.round();
    if (x - r).abs() > 1e-9 || r < 1.0 || r > u32::MAX as f64 {
        return Err(invalid(name, format!("must be a positive integer, got {x}")));
    }
    Ok(r as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompleteParam {
    N,
    C,
    H,
    Tau,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompleteBase {
    pub n: usize,
    pub c: f64,
    pub h: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompleteRow {
    pub value: f64,
    pub n: usize,
    pub c: f64,
    pub h: f64,
    pub tau: f64,
    pub q: f64,
    pub n_star: usize,
    pub n_opt: usize,
    pub social_cost_eq: f64,
    pub social_cost_opt: f64,
    pub poa: f64,
    pub poa_upper_bound: Option<f64>,
    pub p_star: f64,
    pub p_hat_star: f64,
    pub poa_mixed_exact: Option<f64>,
    pub poa_mixed_approx: Option<f64>,
    pub cost_ratio: f64,
}

impl CsvRow for CompleteRow {
    const HEADER: &'static [&'static str] = &[
        "value",
        "n",
        "c",
        "h",
        "tau",
        "q",
        "n_star",
        "n_opt",
        "social_cost_eq",
        "social_cost_opt",
        "poa",
        "poa_upper_bound",
        "p_star",
        "p_hat_star",
        "poa_mixed_exact",
        "poa_mixed_approx",
        "cost_ratio",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            fmt_float(self.value),
            self.n.to_string(),
            fmt_float(self.c),
            fmt_float(self.h),
            fmt_float(self.tau),
            fmt_float(self.q),
            self.n_star.to_string(),
            self.n_opt.to_string(),
            fmt_float(self.social_cost_eq),
            fmt_float(self.social_cost_opt),
            fmt_float(self.poa),
            fmt_opt(self.poa_upper_bound),
            fmt_float(self.p_star),
            fmt_float(self.p_hat_star),
            fmt_opt(self.poa_mixed_exact),
            fmt_opt(self.poa_mixed_approx),
            fmt_float(self.cost_ratio),
        ]
    }
}

pub fn complete_row(params: &GameParams, value: f64) -> Result<CompleteRow> {
    let report = poa_pure(params)?;
    let cmp = compare_strategies(params);
    let mixed = crate::complete::poa_mixed(params);
    Ok(CompleteRow {
        value,
        n: params.n(),
        c: params.c(),
        h: params.h(),
        tau: params.tau(),
        q: params.q(),
        n_star: pure_equilibrium(params).n_star,
        n_opt: report.n_opt,
        social_cost_eq: report.social_cost_eq,
        social_cost_opt: report.social_cost_opt,
        poa: report.poa,
        poa_upper_bound: report.poa_upper_bound,
        p_star: mixed.p_star,
        p_hat_star: crate::complete::mixed_equilibrium_approx(params).p_hat_star,
        poa_mixed_exact: mixed.exact,
        poa_mixed_approx: mixed.approx,
        cost_ratio: cmp.ratio,
    })
}

pub fn sweep_complete(
    base: CompleteBase,
    param: CompleteParam,
    values: &[f64],
    exec: Execution,
) -> Result<Vec<CompleteRow>> {
    exec.map(values, |&value| {
        let mut p = base;
        match param {
            CompleteParam::N => p.n = as_count("n", value)?,
            CompleteParam::C => p.c = value,
            CompleteParam::H => p.h = value,
            CompleteParam::Tau => p.tau = value,
        }
        complete_row(&GameParams::new(p.n, p.c, p.h, p.tau)?, value)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BipartiteParam {
    M,
    N,
    /// `M = N` moved together.
    Mn,
    C,
    H,
    Tau,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BipartiteBase {
    pub m: usize,
    pub n: usize,
    pub c: f64,
    pub h: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteRow {
    pub value: f64,
    pub m: usize,
    pub n: usize,
    pub c: f64,
    pub h: f64,
    pub tau: f64,
    pub q: f64,
    pub equilibria: usize,
    pub worst_n: Option<usize>,
    pub worst_m: Option<usize>,
    pub worst_cost: f64,
    pub optimum_case: u8,
    pub optimum_continuous_cost: f64,
    pub optimum_grid_cost: f64,
    pub poa: Option<f64>,
    pub poa_bound: Option<f64>,
    /// Pure PoA of the complete graph on `M + N` nodes.
    pub complete_poa: f64,
}

impl CsvRow for BipartiteRow {
    const HEADER: &'static [&'static str] = &[
        "value",
        "m",
        "n",
        "c",
        "h",
        "tau",
        "q",
        "equilibria",
        "worst_n",
        "worst_m",
        "worst_cost",
        "optimum_case",
        "optimum_continuous_cost",
        "optimum_grid_cost",
        "poa",
        "poa_bound",
        "complete_poa",
    ];

    fn cells(&self) -> Vec<String> {
        let opt_count = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        vec![
            fmt_float(self.value),
            self.m.to_string(),
            self.n.to_string(),
            fmt_float(self.c),
            fmt_float(self.h),
            fmt_float(self.tau),
            fmt_float(self.q),
            self.equilibria.to_string(),
            opt_count(self.worst_n),
            opt_count(self.worst_m),
            fmt_float(self.worst_cost),
            self.optimum_case.to_string(),
            fmt_float(self.optimum_continuous_cost),
            fmt_float(self.optimum_grid_cost),
            fmt_opt(self.poa),
            fmt_opt(self.poa_bound),
            fmt_float(self.complete_poa),
        ]
    }
}

pub fn bipartite_row(game: &BipartiteGame, value: f64) -> Result<BipartiteRow> {
    let r = poa_bipartite(game, Execution::Sequential);
    let complete = GameParams::new(game.m() + game.n(), game.c(), game.h(), game.tau())?;
    Ok(BipartiteRow {
        value,
        m: game.m(),
        n: game.n(),
        c: game.c(),
        h: game.h(),
        tau: game.tau(),
        q: game.q(),
        equilibria: r.equilibria.pairs.len(),
        worst_n: r.worst_equilibrium.map(|p| p.0),
        worst_m: r.worst_equilibrium.map(|p| p.1),
        worst_cost: r.worst_equilibrium_cost,
        optimum_case: r.optimum.case,
        optimum_continuous_cost: r.optimum.continuous_cost,
        optimum_grid_cost: r.optimum.grid_cost,
        poa: r.poa,
        poa_bound: r.bound,
        complete_poa: poa_pure(&complete)?.poa,
    })
}

pub fn sweep_bipartite(
    base: BipartiteBase,
    param: BipartiteParam,
    values: &[f64],
    exec: Execution,
) -> Result<Vec<BipartiteRow>> {
    exec.map(values, |&value| {
        let mut p = base;
        match param {
            BipartiteParam::M => p.m = as_count("m", value)?,
            BipartiteParam::N => p.n = as_count("n", value)?,
            BipartiteParam::Mn => {
                p.m = as_count("mn", value)?;
                p.n = p.m;
            }
            BipartiteParam::C => p.c = value,
            BipartiteParam::H => p.h = value,
            BipartiteParam::Tau => p.tau = value,
        }
        bipartite_row(&BipartiteGame::new(p.m, p.n, p.c, p.h, p.tau)?, value)
    })
    .into_iter()
    .collect()
}
