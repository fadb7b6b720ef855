//! Monte Carlo execution of a strategy on the embedded chain of an MDP.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::mdp::{Action, EventKind, Labels, Mdp};
use crate::synth::Policy;

pub const DEFAULT_STEP_LIMIT: usize = 100_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("strategy has no action at reached state {state} {description}")]
    Undefined { state: usize, description: String },
    #[error("strategy covers {strategy} states, MDP has {mdp}")]
    Mismatch { strategy: usize, mdp: usize },
    #[error("at least one run is required")]
    NoRuns,
}

/// One stage of a strategy: follow `policy` until a `target` state.
/// Outside `live` the target is unreachable and the run is abandoned.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub policy: Policy,
    pub target: Vec<bool>,
    pub live: Vec<bool>,
}

/// A sequence of phases; the run succeeds once the last target is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    phases: Vec<Phase>,
}

impl Strategy {
    pub fn new(phases: Vec<Phase>) -> Self {
        Self { phases }
    }

    pub fn single(policy: Policy, target: Vec<bool>, live: Vec<bool>) -> Self {
        Self::new(vec![Phase { policy, target, live }])
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    Lost,
    StepLimit,
    /// Alive, but no remaining path reaches the current phase target.
    Stranded,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Lost => "lost",
            Outcome::StepLimit => "step-limit",
            Outcome::Stranded => "stranded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceStep {
    pub state: usize,
    pub action: Action,
    pub event: EventKind,
    pub next: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub start: usize,
    pub steps: Vec<TraceStep>,
    pub outcome: Outcome,
    /// Whether the first phase's target was reached.
    pub first_phase_done: bool,
}

impl Trace {
    /// Visited states, starting state included.
    pub fn states(&self) -> Vec<usize> {
        std::iter::once(self.start).chain(self.steps.iter().map(|s| s.next)).collect()
    }

    pub fn last_state(&self) -> usize {
        self.steps.last().map_or(self.start, |s| s.next)
    }
}

/// RNG of run `index` under `master_seed`: one ChaCha stream per run.
pub fn run_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn check(mdp: &Mdp, strategy: &Strategy) -> Result<(), SimError> {
    for p in &strategy.phases {
        for len in [p.policy.len(), p.target.len(), p.live.len()] {
            if len != mdp.num_states() {
                return Err(SimError::Mismatch { strategy: len, mdp: mdp.num_states() });
            }
        }
    }
    Ok(())
}

fn run<R: Rng>(mdp: &Mdp, strategy: &Strategy, rng: &mut R, step_limit: usize) -> Result<Trace, SimError> {
    let mut s = mdp.init();
    let mut phase = 0;
    let mut trace = Trace { start: s, steps: Vec::new(), outcome: Outcome::Success, first_phase_done: false };
    loop {
        if !mdp.has_label(s, Labels::ALIVE) {
            trace.outcome = Outcome::Lost;
            return Ok(trace);
        }
        while phase < strategy.phases.len() && strategy.phases[phase].target[s] {
            phase += 1;
            trace.first_phase_done = true;
        }
        let Some(current) = strategy.phases.get(phase) else {
            trace.outcome = Outcome::Success;
            return Ok(trace);
        };
        if trace.steps.len() >= step_limit {
            trace.outcome = Outcome::StepLimit;
            return Ok(trace);
        }
        if !current.live[s] {
            trace.outcome = Outcome::Stranded;
            return Ok(trace);
        }
        let k = current
            .policy
            .get(s)
            .ok_or_else(|| SimError::Undefined { state: s, description: mdp.describe(s) })?;
        let choice = mdp.choices(s)[k];
        let row = mdp.transitions(&choice);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = row.len() - 1;
        for (i, t) in row.iter().enumerate() {
            acc += t.prob;
            if u < acc {
                pick = i;
                break;
            }
        }
        // Rounding can leave the last entries at zero mass; never pick one.
        while row[pick].prob == 0.0 && pick > 0 {
            pick -= 1;
        }
        let t = row[pick];
        trace.steps.push(TraceStep { state: s, action: choice.action, event: t.event, next: t.target as usize });
        s = t.target as usize;
    }
}

/// Samples one run from the initial state.
pub fn simulate_run(mdp: &Mdp, strategy: &Strategy, seed: u64, step_limit: usize) -> Result<Trace, SimError> {
    check(mdp, strategy)?;
    run(mdp, strategy, &mut ChaCha8Rng::seed_from_u64(seed), step_limit)
}

/// Run `index` of the batch seeded by `master_seed`, as sampled by
/// [`estimate_success`].
pub fn simulate_indexed(mdp: &Mdp, strategy: &Strategy, master_seed: u64, index: u64, step_limit: usize) -> Result<Trace, SimError> {
    check(mdp, strategy)?;
    run(mdp, strategy, &mut run_rng(master_seed, index), step_limit)
}

/// Frequency estimate with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub successes: u64,
    pub runs: u64,
    pub estimate: f64,
    pub half_width: f64,
    pub seed: u64,
}

impl Estimate {
    pub fn new(successes: u64, runs: u64, seed: u64) -> Self {
        let p = successes as f64 / runs as f64;
        let half_width = 1.96 * (p * (1.0 - p) / runs as f64).sqrt();
        Self { successes, runs, estimate: p, half_width, seed }
    }

    /// Standard error of the estimate.
    pub fn sigma(&self) -> f64 {
        self.half_width / 1.96
    }
}

/// Aggregated outcome counts of a batch of runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationSummary {
    /// Runs that completed every phase.
    pub mission: Estimate,
    /// Runs that completed the first phase.
    pub first_phase: Estimate,
    pub lost: u64,
    pub stranded: u64,
    pub step_limit: u64,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    success: u64,
    first: u64,
    lost: u64,
    stranded: u64,
    step_limit: u64,
}

impl Counts {
    fn add(mut self, o: Counts) -> Counts {
        self.success += o.success;
        self.first += o.first;
        self.lost += o.lost;
        self.stranded += o.stranded;
        self.step_limit += o.step_limit;
        self
    }
}

/// Runs `runs` independent simulations in parallel; run `i` uses stream `i`
/// of `master_seed`, so the result does not depend on scheduling.
pub fn estimate_success(
    mdp: &Mdp,
    strategy: &Strategy,
    runs: u64,
    master_seed: u64,
    step_limit: usize,
) -> Result<SimulationSummary, SimError> {
    if runs == 0 {
        return Err(SimError::NoRuns);
    }
    check(mdp, strategy)?;
    let counts = (0..runs)
        .into_par_iter()
        .map(|i| {
            let trace = run(mdp, strategy, &mut run_rng(master_seed, i), step_limit)?;
            let mut c = Counts { first: u64::from(trace.first_phase_done), ..Default::default() };
            match trace.outcome {
                Outcome::Success => c.success = 1,
                Outcome::Lost => c.lost = 1,
                Outcome::Stranded => c.stranded = 1,
                Outcome::StepLimit => c.step_limit = 1,
            }
            Ok(c)
        })
        .try_reduce(Counts::default, |a, b| Ok(a.add(b)))?;
    Ok(SimulationSummary {
        mission: Estimate::new(counts.success, runs, master_seed),
        first_phase: Estimate::new(counts.first, runs, master_seed),
        lost: counts.lost,
        stranded: counts.stranded,
        step_limit: counts.step_limit,
    })
}

pub const TRACE_CSV_HEADER: &str = "run,step,state,action,event,outcome";

/// Writes one CSV row per transition of `trace`, plus a final row for the
/// state where the run ended (empty action and event).
pub fn write_trace_csv<W: Write>(out: &mut W, mdp: &Mdp, run: u64, trace: &Trace) -> io::Result<()> {
    let outcome = trace.outcome.as_str();
    for (i, step) in trace.steps.iter().enumerate() {
        writeln!(out, "{run},{i},{},{},{},{outcome}", step.state, mdp.action_name(step.action), step.event.as_str())?;
    }
    writeln!(out, "{run},{},{},,,{outcome}", trace.steps.len(), trace.last_state())
}
