//! Command-line front end.
//!
//! Exit codes: 0 success, 1 output or internal failure, 2 invalid input,
//! 3 non-convergence. Failures print one JSON line on stderr.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bipartite::{
    equilibria_closed_form, equilibria_enumerate, poa_bipartite, BipartiteGame, BipartitePoa, EquilibriumPair,
};
use crate::complete::{
    compare_strategies, equilibrium_bruteforce, mixed_equilibrium_exact, mixed_social_optimum, poa_mixed, poa_pure,
    potential_argmin, GameParams, MixedEquilibrium, MixedOptimum, MixedPoa, StrategyComparison,
    DEFAULT_BISECTION_TOL,
};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::multicomm::{
    default_q_grid, iterate, sweep_q, MultiCommGame, MultiCommTrace, Outcome, QSweep, StepRecord, SweepRow, Target,
};
use crate::nimfa::{solve_general, Adjacency, MultiCommunitySpec, SteadyState};
use crate::report::{csv_string, fmt_counts, fmt_float, fmt_opt, CsvRow, Report};
use crate::rla::{rla_batch, rla_run, step_costs, InitialProbabilities, LearningRate, RlaConfig, RlaTrace};
use crate::sweep::{
    grid, sweep_bipartite, sweep_complete, BipartiteBase, BipartiteParam, CompleteBase, CompleteParam,
};

/// Directory for default output files when `--out` is absent.
pub const OUT_DIR_ENV: &str = "EPIPROTECT_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;

// Input limits keep every command's running time and memory bounded.
const MAX_COMPLETE_N: usize = 20_000;
const MAX_BIPARTITE_SIDE: usize = 2_000;
const MAX_COMMUNITIES: usize = 1_000;
const MAX_COMMUNITY_SIZE: usize = 100_000;
const MAX_RLA_N: usize = 10_000;
const MAX_RLA_STEPS: usize = 100_000_000;
const MAX_RLA_RUNS: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "epiprotect", version, about = "Protection games against SIS epidemics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output file. Defaults to $EPIPROTECT_OUT_DIR/<command>.<ext>, else stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Run batch work on the calling thread only.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Investment game on a complete graph.
    #[command(allow_negative_numbers = true)]
    Complete(CompleteArgs),
    /// Investment game on a complete bipartite graph.
    #[command(allow_negative_numbers = true)]
    Bipartite(BipartiteArgs),
    /// Iterative equilibrium search on a multi-community network.
    #[command(allow_negative_numbers = true)]
    Multicomm(MulticommArgs),
    /// Decentralized learning on a complete graph.
    #[command(allow_negative_numbers = true)]
    Rla(RlaArgs),
    /// Steady state of an arbitrary graph given as an edge list.
    #[command(allow_negative_numbers = true)]
    Nimfa(NimfaArgs),
    /// One-parameter sweep, one row per grid point.
    #[command(allow_negative_numbers = true)]
    Sweep(SweepArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Complete(_) => "complete",
            Command::Bipartite(_) => "bipartite",
            Command::Multicomm(_) => "multicomm",
            Command::Rla(_) => "rla",
            Command::Nimfa(_) => "nimfa",
            Command::Sweep(_) => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompleteArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub h: f64,
    #[arg(long)]
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompleteResult {
    pub n_star: usize,
    pub equilibria: Vec<usize>,
    pub potential_argmin: usize,
    pub n_opt: usize,
    pub social_cost_eq: f64,
    pub social_cost_opt: f64,
    pub poa: f64,
    pub poa_upper_bound: Option<f64>,
    pub mixed: MixedEquilibrium,
    pub mixed_optimum: MixedOptimum,
    pub poa_mixed: MixedPoa,
    pub comparison: StrategyComparison,
}

pub fn complete_result(params: &GameParams) -> Result<CompleteResult> {
    let poa = poa_pure(params)?;
    Ok(CompleteResult {
        n_star: poa.n_star,
        equilibria: equilibrium_bruteforce(params),
        potential_argmin: potential_argmin(params),
        n_opt: poa.n_opt,
        social_cost_eq: poa.social_cost_eq,
        social_cost_opt: poa.social_cost_opt,
        poa: poa.poa,
        poa_upper_bound: poa.poa_upper_bound,
        mixed: mixed_equilibrium_exact(params, DEFAULT_BISECTION_TOL)?,
        mixed_optimum: mixed_social_optimum(params),
        poa_mixed: poa_mixed(params),
        comparison: compare_strategies(params),
    })
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BipartiteArgs {
    /// Size of cluster M.
    #[arg(long)]
    pub m: usize,
    /// Size of cluster N.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub h: f64,
    #[arg(long)]
    pub tau: f64,
    /// Absolute slack on the equilibrium inequalities.
    #[arg(long, default_value_t = 0.0)]
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BipartiteResult {
    pub q: f64,
    pub a: f64,
    pub b: f64,
    pub above_threshold: bool,
    /// Pairs `(n, m)` from the closed-form system.
    pub closed_form: Vec<(usize, usize)>,
    /// Pairs found with the requested slack, when it is non-zero.
    pub relaxed_pairs: Option<Vec<(usize, usize)>>,
    pub report: BipartitePoa,
}

impl CsvRow for EquilibriumPair {
    const HEADER: &'static [&'static str] = &[
        "n",
        "m",
        "exposed_cost_m",
        "deviation_cost_m",
        "exposed_cost_n",
        "deviation_cost_n",
        "social_cost",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.m.to_string(),
            fmt_float(self.exposed_cost_m),
            fmt_opt(self.deviation_cost_m),
            fmt_float(self.exposed_cost_n),
            fmt_opt(self.deviation_cost_n),
            fmt_float(self.social_cost),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MulticommArgs {
    /// Non-core community sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    /// Per-community spreading rates, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub taus: Vec<f64>,
    /// Investment cost. Give either this or `--q`.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    /// Cost ratio C/H, with C = q H.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub u0: f64,
    #[arg(long, default_value_t = crate::multicomm::DEFAULT_EPSILON)]
    pub eps: f64,
    #[arg(long, default_value_t = crate::multicomm::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Sweep q over `--q-grid`, or 0.05..0.95 in steps of 0.05.
    #[arg(long)]
    pub sweep_q: bool,
    #[arg(long, value_delimiter = ',')]
    pub q_grid: Option<Vec<f64>>,
    /// Target equilibrium vector for the sweep report.
    #[arg(long, value_delimiter = ',')]
    pub target_n: Option<Vec<usize>>,
    #[arg(long)]
    pub target_u: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub target_tol: f64,
    /// Per-iteration trace as CSV.
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MulticommSweepResult {
    pub sweep: QSweep,
    /// Some q reproduced the target; `None` without a target.
    pub target_reproduced: Option<bool>,
}

impl CsvRow for StepRecord {
    const HEADER: &'static [&'static str] = &[
        "k",
        "u",
        "n_star",
        "u_next",
        "g",
        "f",
        "sandwich_applicable",
        "sandwich_holds",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.k.to_string(),
            fmt_float(self.u),
            fmt_counts(&self.n_star),
            fmt_float(self.u_next),
            fmt_opt(self.bounds.g),
            fmt_opt(self.bounds.f),
            self.sandwich_applicable.to_string(),
            self.sandwich_holds.map(|b| b.to_string()).unwrap_or_default(),
        ]
    }
}

fn outcome_label(o: Outcome) -> String {
    match o {
        Outcome::Converged => "converged".into(),
        Outcome::Cycle { period } => format!("cycle_{period}"),
        Outcome::MaxIterations => "max_iterations".into(),
    }
}

impl CsvRow for SweepRow {
    const HEADER: &'static [&'static str] = &[
        "q",
        "outcome",
        "iterations",
        "final_u",
        "final_n_star",
        "self_consistency_residual",
        "sandwich_ok",
        "matches_target",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            fmt_float(self.q),
            outcome_label(self.outcome),
            self.iterations.to_string(),
            fmt_float(self.final_u),
            fmt_counts(&self.final_n_star),
            fmt_float(self.self_consistency_residual),
            self.sandwich_ok.to_string(),
            self.matches_target.map(|b| b.to_string()).unwrap_or_default(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlaArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub h: f64,
    #[arg(long)]
    pub tau: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Learning rate, constant unless `--k0` is given.
    #[arg(long, default_value_t = crate::rla::DEFAULT_RATE)]
    pub b0: f64,
    /// Decay scale: the rate at step k is b0/(1 + k/k0).
    #[arg(long)]
    pub k0: Option<f64>,
    /// Initial investment probability of every node.
    #[arg(long, default_value_t = 0.5)]
    pub p0: f64,
    #[arg(long, default_value_t = crate::rla::DEFAULT_EPSILON_STOP)]
    pub eps_stop: f64,
    #[arg(long, default_value_t = crate::rla::DEFAULT_CALM_STEPS)]
    pub calm_steps: usize,
    #[arg(long, default_value_t = crate::rla::DEFAULT_MAX_STEPS)]
    pub max_steps: usize,
    /// Independent runs with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Per-step trace (step, node, p, sigma, cost) of the first run.
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlaRunSummary {
    pub seed: u64,
    pub steps: usize,
    pub converged: bool,
    pub converged_n_star: Option<usize>,
    pub final_p: Vec<f64>,
    pub p_min_seen: f64,
    pub p_max_seen: f64,
    /// Hex FNV-1a digest of the action sequence.
    pub action_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlaResult {
    pub runs: Vec<RlaRunSummary>,
    pub converged_runs: usize,
    /// `(non-investor count, runs)` over converged runs, ascending.
    pub histogram: Vec<(usize, usize)>,
    /// Most frequent converged count (smallest on ties).
    pub modal_n_star: Option<usize>,
}

impl CsvRow for RlaRunSummary {
    const HEADER: &'static [&'static str] = &[
        "seed",
        "steps",
        "converged",
        "converged_n_star",
        "p_min_seen",
        "p_max_seen",
        "action_digest",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.steps.to_string(),
            self.converged.to_string(),
            self.converged_n_star.map(|n| n.to_string()).unwrap_or_default(),
            fmt_float(self.p_min_seen),
            fmt_float(self.p_max_seen),
            self.action_digest.clone(),
        ]
    }
}

struct TraceRow {
    step: usize,
    node: usize,
    p: f64,
    sigma: u8,
    cost: f64,
}

impl CsvRow for TraceRow {
    const HEADER: &'static [&'static str] = &["step", "node", "p", "sigma", "cost"];

    fn cells(&self) -> Vec<String> {
        vec![
            self.step.to_string(),
            self.node.to_string(),
            fmt_float(self.p),
            self.sigma.to_string(),
            fmt_float(self.cost),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NimfaArgs {
    /// Edge list: one `i j` pair per line, 0-indexed.
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long)]
    pub tau: f64,
    /// Minimum node count, for isolated trailing nodes.
    #[arg(long, default_value_t = 0)]
    pub nodes: usize,
    #[arg(long, default_value_t = crate::nimfa::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = crate::nimfa::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NimfaResult {
    pub node_count: usize,
    pub edge_count: usize,
    pub steady_state: SteadyState,
}

struct NodeRow(usize, f64);

impl CsvRow for NodeRow {
    const HEADER: &'static [&'static str] = &["node", "v"];

    fn cells(&self) -> Vec<String> {
        vec![self.0.to_string(), fmt_float(self.1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Complete,
    Bipartite,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    /// Swept parameter: n, c, h, tau; bipartite also m and mn (M = N).
    #[arg(long)]
    pub param: String,
    #[arg(long)]
    pub from: f64,
    #[arg(long)]
    pub to: f64,
    #[arg(long)]
    pub step: f64,
    #[arg(long, default_value_t = 15)]
    pub n: usize,
    #[arg(long, default_value_t = 15)]
    pub m: usize,
    #[arg(long, default_value_t = 0.4)]
    pub c: f64,
    #[arg(long, default_value_t = 0.5)]
    pub h: f64,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub tau: f64,
}

/// What a command produced: the rendered document and its exit status.
struct Rendered {
    body: String,
    format: Format,
    exit: i32,
    /// Reported on stderr after the output is written.
    non_convergence: Option<String>,
}

fn render<C: Serialize, R: Serialize>(
    command: &str,
    format: Format,
    config: C,
    result: R,
    csv: impl FnOnce(&R) -> Result<String>,
) -> Result<Rendered> {
    let body = match format {
        Format::Json => Report::new(command, config, result).to_json()?,
        Format::Csv => csv(&result)?,
    };
    Ok(Rendered {
        body,
        format,
        exit: EXIT_OK,
        non_convergence: None,
    })
}

fn check_max(name: &'static str, value: usize, max: usize) -> Result<()> {
    if value > max {
        return Err(invalid(name, format!("{value} exceeds the supported maximum {max}")));
    }
    Ok(())
}

fn exec_for(cli: &Cli) -> Execution {
    if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn write_side_file(path: &Path, body: &str) -> Result<()> {
    File::create(path)?.write_all(body.as_bytes())?;
    Ok(())
}

fn cmd_complete(args: &CompleteArgs, format: Format) -> Result<Rendered> {
    check_max("n", args.n, MAX_COMPLETE_N)?;
    let params = GameParams::new(args.n, args.c, args.h, args.tau)?;
    let result = complete_result(&params)?;
    render("complete", format, args, result, |_| {
        csv_string(&[crate::sweep::complete_row(&params, args.n as f64)?])
    })
}

fn cmd_bipartite(args: &BipartiteArgs, format: Format, exec: Execution) -> Result<Rendered> {
    check_max("m", args.m, MAX_BIPARTITE_SIDE)?;
    check_max("n", args.n, MAX_BIPARTITE_SIDE)?;
    if !(args.slack >= 0.0 && args.slack.is_finite()) {
        return Err(invalid("slack", format!("must be finite and >= 0, got {}", args.slack)));
    }
    let game = BipartiteGame::new(args.m, args.n, args.c, args.h, args.tau)?;
    let report = poa_bipartite(&game, exec);
    let relaxed_pairs = (args.slack > 0.0).then(|| equilibria_enumerate(&game, args.slack, exec).pair_set());
    let result = BipartiteResult {
        q: game.q(),
        a: game.a(),
        b: game.b(),
        above_threshold: game.above_threshold(),
        closed_form: equilibria_closed_form(&game),
        relaxed_pairs,
        report,
    };
    render("bipartite", format, args, result, |r| csv_string(&r.report.equilibria.pairs))
}

fn cmd_multicomm(args: &MulticommArgs, format: Format, exec: Execution) -> Result<Rendered> {
    check_max("sizes", args.sizes.len(), MAX_COMMUNITIES)?;
    for &s in &args.sizes {
        check_max("sizes", s, MAX_COMMUNITY_SIZE)?;
    }
    check_max("max_iter", args.max_iter, 1_000_000)?;
    let spec = MultiCommunitySpec::new(args.sizes.clone(), args.taus.clone())?;
    if args.sweep_q {
        if args.c.is_some() || args.q.is_some() {
            return Err(invalid("q", "--c and --q cannot be combined with --sweep-q"));
        }
        let qs = args.q_grid.clone().unwrap_or_else(default_q_grid);
        if qs.is_empty() {
            return Err(invalid("q_grid", "empty grid"));
        }
        let target = match (&args.target_n, args.target_u) {
            (Some(n_star), Some(u)) => Some(Target {
                n_star: n_star.clone(),
                u,
                u_tol: args.target_tol,
            }),
            (None, None) => None,
            _ => return Err(invalid("target", "--target-n and --target-u go together")),
        };
        let sweep = sweep_q(&spec, &qs, args.u0, args.eps, args.max_iter, target.as_ref(), exec)?;
        let result = MulticommSweepResult {
            target_reproduced: target.map(|_| !sweep.reproducing_q.is_empty()),
            sweep,
        };
        return render("multicomm", format, args, result, |r| csv_string(&r.sweep.rows));
    }
    let c = match (args.c, args.q) {
        (Some(c), None) => c,
        (None, Some(q)) => q * args.h,
        _ => return Err(invalid("c", "give exactly one of --c and --q")),
    };
    let game = MultiCommGame::new(spec, c, args.h)?;
    let trace: MultiCommTrace = iterate(&game, args.u0, args.eps, args.max_iter, exec)?;
    if let Some(path) = &args.trace_csv {
        write_side_file(path, &csv_string(&trace.steps)?)?;
    }
    let failure = (!trace.converged).then(|| match trace.outcome {
        Outcome::Cycle { period } => format!("equilibrium vectors cycle with period {period}"),
        _ => format!("no convergence within {} iterations", trace.iterations),
    });
    let mut rendered = render("multicomm", format, args, trace, |t| csv_string(&t.steps))?;
    if let Some(message) = failure {
        rendered.exit = EXIT_NON_CONVERGENCE;
        rendered.non_convergence = Some(message);
    }
    Ok(rendered)
}

fn rla_config(args: &RlaArgs) -> Result<RlaConfig> {
    check_max("n", args.n, MAX_RLA_N)?;
    check_max("max_steps", args.max_steps, MAX_RLA_STEPS)?;
    check_max("runs", args.runs, MAX_RLA_RUNS)?;
    if args.runs == 0 {
        return Err(invalid("runs", "must be at least 1"));
    }
    let params = GameParams::new(args.n, args.c, args.h, args.tau)?;
    let config = RlaConfig {
        params,
        rate: match args.k0 {
            Some(k0) => LearningRate::Decaying { b0: args.b0, k0 },
            None => LearningRate::Constant { b0: args.b0 },
        },
        p0: InitialProbabilities::Uniform(args.p0),
        epsilon_stop: args.eps_stop,
        calm_steps: args.calm_steps,
        max_steps: args.max_steps,
        seed: args.seed,
        record_history: false,
    };
    config.validate()?;
    Ok(config)
}

fn summarise_run(seed: u64, t: &RlaTrace) -> RlaRunSummary {
    RlaRunSummary {
        seed,
        steps: t.steps,
        converged: t.converged,
        converged_n_star: t.converged_n_star,
        final_p: t.final_p.clone(),
        p_min_seen: t.p_min_seen,
        p_max_seen: t.p_max_seen,
        action_digest: format!("{:016x}", t.action_digest),
    }
}

fn trace_rows(params: &GameParams, t: &RlaTrace) -> Vec<TraceRow> {
    let mut rows = Vec::with_capacity(t.steps * params.n());
    for (step, (ps, actions)) in t.p_history.iter().zip(&t.action_history).enumerate() {
        let costs = step_costs(params, actions);
        for (node, ((&p, &sigma), cost)) in ps.iter().zip(actions).zip(costs).enumerate() {
            rows.push(TraceRow {
                step,
                node,
                p,
                sigma,
                cost,
            });
        }
    }
    rows
}

fn cmd_rla(args: &RlaArgs, format: Format, exec: Execution) -> Result<Rendered> {
    let config = rla_config(args)?;
    let seeds: Vec<u64> = (0..args.runs as u64).map(|i| args.seed.wrapping_add(i)).collect();
    let mut traces = rla_batch(&config, &seeds, exec)?;
    if let Some(path) = &args.trace_csv {
        let recorded = rla_run(&RlaConfig {
            record_history: true,
            ..config.clone()
        })?;
        let file = File::create(path)?;
        crate::report::write_csv(std::io::BufWriter::new(file), &trace_rows(&config.params, &recorded))?;
        traces[0] = recorded;
    }
    let runs: Vec<RlaRunSummary> = seeds.iter().zip(&traces).map(|(&s, t)| summarise_run(s, t)).collect();
    let mut counts = std::collections::BTreeMap::new();
    for n in runs.iter().filter_map(|r| r.converged_n_star) {
        *counts.entry(n).or_insert(0usize) += 1;
    }
    let histogram: Vec<(usize, usize)> = counts.into_iter().collect();
    let modal_n_star = histogram
        .iter()
        .fold(None::<(usize, usize)>, |best, &(n, k)| match best {
            Some((_, bk)) if bk >= k => best,
            _ => Some((n, k)),
        })
        .map(|(n, _)| n);
    let stuck = runs.iter().filter(|r| !r.converged).count();
    let result = RlaResult {
        converged_runs: runs.iter().filter(|r| r.converged).count(),
        runs,
        histogram,
        modal_n_star,
    };
    let mut rendered = render("rla", format, args, result, |r| csv_string(&r.runs))?;
    if stuck > 0 {
        rendered.exit = EXIT_NON_CONVERGENCE;
        rendered.non_convergence = Some(format!(
            "{stuck} of {} runs did not settle within {} steps",
            seeds.len(),
            args.max_steps
        ));
    }
    Ok(rendered)
}

fn cmd_nimfa(args: &NimfaArgs, format: Format) -> Result<Rendered> {
    let file = File::open(&args.edges)
        .map_err(|e| invalid("edges", format!("cannot open {}: {e}", args.edges.display())))?;
    let adj = Adjacency::parse_edge_list(BufReader::new(file), args.nodes)?;
    if !(args.tau >= 0.0 && args.tau.is_finite()) {
        return Err(invalid("tau", format!("must be finite and >= 0, got {}", args.tau)));
    }
    let steady_state = solve_general(&adj, args.tau, args.tol, args.max_iter)?;
    let result = NimfaResult {
        node_count: adj.node_count(),
        edge_count: adj.edge_count(),
        steady_state,
    };
    render("nimfa", format, args, result, |r| {
        let rows: Vec<NodeRow> = r.steady_state.v.iter().enumerate().map(|(i, &v)| NodeRow(i, v)).collect();
        csv_string(&rows)
    })
}

fn cmd_sweep(args: &SweepArgs, format: Format, exec: Execution) -> Result<Rendered> {
    let values = grid(args.from, args.to, args.step)?;
    match args.model {
        Model::Complete => {
            let param = match args.param.as_str() {
                "n" => CompleteParam::N,
                "c" => CompleteParam::C,
                "h" => CompleteParam::H,
                "tau" => CompleteParam::Tau,
                other => return Err(invalid("param", format!("unknown complete parameter {other:?}"))),
            };
            let largest = if param == CompleteParam::N { args.to as usize } else { args.n };
            check_max("n", largest, MAX_COMPLETE_N)?;
            let base = CompleteBase {
                n: args.n,
                c: args.c,
                h: args.h,
                tau: args.tau,
            };
            let rows = sweep_complete(base, param, &values, exec)?;
            render("sweep", format, args, rows, |r| csv_string(r))
        }
        Model::Bipartite => {
            let param = match args.param.as_str() {
                "m" => BipartiteParam::M,
                "n" => BipartiteParam::N,
                "mn" => BipartiteParam::Mn,
                "c" => BipartiteParam::C,
                "h" => BipartiteParam::H,
                "tau" => BipartiteParam::Tau,
                other => return Err(invalid("param", format!("unknown bipartite parameter {other:?}"))),
            };
            let swept_size = matches!(param, BipartiteParam::M | BipartiteParam::N | BipartiteParam::Mn);
            let largest = if swept_size { args.to as usize } else { args.m.max(args.n) };
            check_max("size", largest.max(args.m).max(args.n), MAX_BIPARTITE_SIDE)?;
            let base = BipartiteBase {
                m: args.m,
                n: args.n,
                c: args.c,
                h: args.h,
                tau: args.tau,
            };
            let rows = sweep_bipartite(base, param, &values, exec)?;
            render("sweep", format, args, rows, |r| csv_string(r))
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Rendered> {
    let exec = exec_for(cli);
    let json = cli.format.unwrap_or(Format::Json);
    match &cli.command {
        Command::Complete(a) => cmd_complete(a, json),
        Command::Bipartite(a) => cmd_bipartite(a, json, exec),
        Command::Multicomm(a) => cmd_multicomm(a, json, exec),
        Command::Rla(a) => cmd_rla(a, json, exec),
        Command::Nimfa(a) => cmd_nimfa(a, json),
        Command::Sweep(a) => cmd_sweep(a, cli.format.unwrap_or(Format::Csv), exec),
    }
}

fn emit(cli: &Cli, rendered: &Rendered) -> Result<()> {
    let target = match &cli.out {
        Some(p) => Some(p.clone()),
        None => std::env::var_os(OUT_DIR_ENV)
            .filter(|d| !d.is_empty())
            .map(|d| PathBuf::from(d).join(format!("{}.{}", cli.command.name(), rendered.format.extension()))),
    };
    match target {
        Some(path) => write_side_file(&path, &rendered.body),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(rendered.body.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn error_kind(e: &Error) -> (&'static str, i32) {
    match e {
        Error::InvalidParameter { .. } | Error::EdgeList { .. } | Error::Inapplicable(_) => ("invalid_input", EXIT_INVALID),
        Error::DegeneratePoa { .. } => ("degenerate", EXIT_INVALID),
        Error::NonConvergence { .. } => ("non_convergence", EXIT_NON_CONVERGENCE),
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => ("io", EXIT_FAILURE),
    }
}

/// One-line JSON error record.
fn error_line(kind: &str, message: &str) -> String {
    let message = message.split_whitespace().collect::<Vec<_>>().join(" ");
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let rendered = e.render().to_string();
            let message: Vec<&str> = rendered
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .collect();
            eprintln!("{}", error_line("usage", message.join(" ").trim_start_matches("error: ")));
            return EXIT_INVALID;
        }
    };
    let outcome = dispatch(&cli).and_then(|rendered| emit(&cli, &rendered).map(|_| rendered));
    match outcome {
        Ok(rendered) => {
            if let Some(message) = &rendered.non_convergence {
                eprintln!("{}", error_line("non_convergence", message));
            }
            rendered.exit
        }
        Err(e) => {
            let (kind, code) = error_kind(&e);
            eprintln!("{}", error_line(kind, &e.to_string()));
            code
        }
    }
}
