//! Decentralized learning of the complete-graph investment game and its
//! replicator-dynamics limit.
//!
//! Every node keeps a probability of investing. At each step all nodes
//! sample an action, pay their cost, and move their probability toward the
//! sampled action by an amount proportional to the normalized reward
//! `1 - cost/(C + H)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complete::GameParams;
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::nimfa::{v_complete, v_complete_real};

pub const DEFAULT_RATE: f64 = 0.01;
pub const DEFAULT_EPSILON_STOP: f64 = 1e-4;
pub const DEFAULT_CALM_STEPS: usize = 50;
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearningRate {
    Constant { b0: f64 },
    /// `b0 / (1 + k/k0)`.
    Decaying { b0: f64, k0: f64 },
}

impl LearningRate {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            LearningRate::Constant { b0 } => b0,
            LearningRate::Decaying { b0, k0 } => b0 / (1.0 + k as f64 / k0),
        }
    }

    fn validate(&self) -> Result<()> {
        let (b0, k0) = match *self {
            LearningRate::Constant { b0 } => (b0, 1.0),
            LearningRate::Decaying { b0, k0 } => (b0, k0),
        };
        if !(b0 > 0.0 && b0 <= 1.0) {
            return Err(invalid("b0", format!("must lie in (0, 1], got {b0}")));
        }
        if !(k0 > 0.0 && k0.is_finite()) {
            return Err(invalid("k0", format!("must be finite and > 0, got {k0}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum InitialProbabilities {
    Uniform(f64),
    PerNode(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlaConfig {
    pub params: GameParams,
    pub rate: LearningRate,
    pub p0: InitialProbabilities,
    /// Stop once `max_i |p_i[k+1] - p_i[k]|` stays below this...
    pub epsilon_stop: f64,
    /// ...for this many consecutive steps.
    pub calm_steps: usize,
    pub max_steps: usize,
    pub seed: u64,
    /// Keep per-step probabilities and actions.
    pub record_history: bool,
}

impl RlaConfig {
    pub fn new(params: GameParams, seed: u64) -> Self {
        Self {
            params,
            rate: LearningRate::Constant { b0: DEFAULT_RATE },
            p0: InitialProbabilities::Uniform(0.5),
            epsilon_stop: DEFAULT_EPSILON_STOP,
            calm_steps: DEFAULT_CALM_STEPS,
            max_steps: DEFAULT_MAX_STEPS,
            seed,
            record_history: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rate.validate()?;
        let n = self.params.n();
        match &self.p0 {
            InitialProbabilities::Uniform(p) => check_probability(*p)?,
            InitialProbabilities::PerNode(ps) => {
                if ps.len() != n {
                    return Err(invalid("p0", format!("expected {n} entries, got {}", ps.len())));
                }
                ps.iter().try_for_each(|&p| check_probability(p))?;
            }
        }
        if !(self.epsilon_stop > 0.0) {
            return Err(invalid("epsilon_stop", format!("must be > 0, got {}", self.epsilon_stop)));
        }
        if self.calm_steps == 0 {
            return Err(invalid("calm_steps", "must be at least 1"));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "must be at least 1"));
        }
        Ok(())
    }

    fn initial(&self) -> Vec<f64> {
        match &self.p0 {
            InitialProbabilities::Uniform(p) => vec![*p; self.params.n()],
            InitialProbabilities::PerNode(ps) => ps.clone(),
        }
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p0", format!("probabilities must lie in [0, 1], got {p}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlaTrace {
    /// `p[k]` before the update of step `k`; empty unless recorded.
    pub p_history: Vec<Vec<f64>>,
    /// `sigma[k]` (1 = invest); empty unless recorded.
    pub action_history: Vec<Vec<u8>>,
    /// `N - n[k]` per step.
    pub invest_counts: Vec<usize>,
    pub final_p: Vec<f64>,
    pub steps: usize,
    pub converged: bool,
    /// Nodes with final investment probability below 1/2, when converged.
    pub converged_n_star: Option<usize>,
    pub p_min_seen: f64,
    pub p_max_seen: f64,
    /// FNV-1a digest of the whole action sequence.
    pub action_digest: u64,
}

/// Costs paid at one step: `C` for investors, `H v(n)` otherwise.
pub fn step_costs(params: &GameParams, actions: &[u8]) -> Vec<f64> {
    let exposed = actions.iter().filter(|&&a| a == 0).count();
    let exposed_cost = params.h() * v_complete(exposed, params.tau());
    actions
        .iter()
        .map(|&a| if a == 1 { params.c() } else { exposed_cost })
        .collect()
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

struct Learner {
    params: GameParams,
    rate: LearningRate,
    rng: ChaCha8Rng,
    p: Vec<f64>,
    actions: Vec<u8>,
    k: usize,
    digest: u64,
}

impl Learner {
    fn new(config: &RlaConfig) -> Self {
        let n = config.params.n();
        Self {
            params: config.params,
            rate: config.rate,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            p: config.initial(),
            actions: vec![0; n],
            k: 0,
            digest: FNV_OFFSET,
        }
    }

    /// Samples actions, updates `p`, and returns the largest change.
    fn step(&mut self) -> f64 {
        for (a, &p) in self.actions.iter_mut().zip(&self.p) {
            *a = u8::from(self.rng.random::<f64>() < p);
            self.digest = (self.digest ^ u64::from(*a)).wrapping_mul(FNV_PRIME);
        }
        let costs = step_costs(&self.params, &self.actions);
        let scale = self.params.c() + self.params.h();
        let b = self.rate.at(self.k);
        let mut largest = 0.0f64;
        for ((p, &a), cost) in self.p.iter_mut().zip(&self.actions).zip(costs) {
            let reward = 1.0 - cost / scale;
            let next = (*p + b * reward * (f64::from(a) - *p)).clamp(0.0, 1.0);
            largest = largest.max((next - *p).abs());
            *p = next;
        }
        self.k += 1;
        largest
    }
}

pub fn rla_run(config: &RlaConfig) -> Result<RlaTrace> {
    config.validate()?;
    let mut learner = Learner::new(config);
    let mut trace = RlaTrace {
        p_history: Vec::new(),
        action_history: Vec::new(),
        invest_counts: Vec::new(),
        final_p: Vec::new(),
        steps: 0,
        converged: false,
        converged_n_star: None,
        p_min_seen: learner.p.iter().copied().fold(1.0, f64::min),
        p_max_seen: learner.p.iter().copied().fold(0.0, f64::max),
        action_digest: 0,
    };
    let mut calm = 0;
    while learner.k < config.max_steps {
        if config.record_history {
            trace.p_history.push(learner.p.clone());
        }
        let change = learner.step();
        if config.record_history {
            trace.action_history.push(learner.actions.clone());
        }
        trace
            .invest_counts
            .push(learner.actions.iter().map(|&a| a as usize).sum());
        for &p in &learner.p {
            trace.p_min_seen = trace.p_min_seen.min(p);
            trace.p_max_seen = trace.p_max_seen.max(p);
        }
        calm = if change < config.epsilon_stop { calm + 1 } else { 0 };
        if calm >= config.calm_steps {
            trace.converged = true;
            break;
        }
    }
    trace.steps = learner.k;
    trace.action_digest = learner.digest;
    trace.converged_n_star = trace
        .converged
        .then(|| learner.p.iter().filter(|&&p| p < 0.5).count());
    trace.final_p = learner.p;
    Ok(trace)
}

/// Independent runs of `config` for each seed, in seed order.
pub fn rla_batch(config: &RlaConfig, seeds: &[u64], exec: Execution) -> Result<Vec<RlaTrace>> {
    config.validate()?;
    exec.map(seeds, |&seed| rla_run(&RlaConfig { seed, ..config.clone() }))
        .into_iter()
        .collect()
}

/// Node-averaged investment probability after each of `steps` steps,
/// averaged again over seeds, sampled every `stride` steps (index 0 is the
/// initial state). Stopping rules are ignored.
pub fn mean_probability_path(
    config: &RlaConfig,
    seeds: &[u64],
    steps: usize,
    stride: usize,
    exec: Execution,
) -> Result<Vec<f64>> {
    config.validate()?;
    if stride == 0 {
        return Err(invalid("stride", "must be at least 1"));
    }
    let paths = exec.map(seeds, |&seed| {
        let mut learner = Learner::new(&RlaConfig { seed, ..config.clone() });
        let mean = |p: &[f64]| p.iter().sum::<f64>() / p.len() as f64;
        let mut path = vec![mean(&learner.p)];
        for k in 1..=steps {
            learner.step();
            if k % stride == 0 {
                path.push(mean(&learner.p));
            }
        }
        path
    });
    let len = paths.first().map_or(0, Vec::len);
    Ok((0..len)
        .map(|i| paths.iter().map(|p| p[i]).sum::<f64>() / paths.len() as f64)
        .collect())
}

/// ODE time reached after `k` learning steps at constant rate `b`.
pub fn ode_time(params: &GameParams, b: f64, k: usize) -> f64 {
    k as f64 * b / (params.c() + params.h())
}

/// `S_0 - S_1` at mean-field exposure `(1-p)(N-1) + 1`.
pub fn cost_gap(params: &GameParams, p: f64) -> f64 {
    let exposed = (1.0 - p) * (params.n() as f64 - 1.0) + 1.0;
    params.h() * v_complete_real(exposed, params.tau()) - params.c()
}

/// Samples `(t, p)` of `p' = p (1-p) (S_0 - S_1)` by classical RK4,
/// starting at `t = 0` and ending at the first step reaching `horizon`.
pub fn replicator_ode(params: &GameParams, p0: f64, horizon: f64, dt: f64) -> Result<Vec<(f64, f64)>> {
    check_probability(p0)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be finite and > 0, got {dt}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", format!("must be finite and >= 0, got {horizon}")));
    }
    let rhs = |p: f64| {
        let p = p.clamp(0.0, 1.0);
        p * (1.0 - p) * cost_gap(params, p)
    };
    let steps = (horizon / dt).ceil() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut p = p0;
    out.push((0.0, p));
    for i in 1..=steps {
        let k1 = rhs(p);
        let k2 = rhs(p + 0.5 * dt * k1);
        let k3 = rhs(p + 0.5 * dt * k2);
        let k4 = rhs(p + dt * k3);
        p = (p + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).clamp(0.0, 1.0);
        out.push((i as f64 * dt, p));
    }
    Ok(out)
}
