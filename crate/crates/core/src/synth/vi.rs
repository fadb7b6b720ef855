use rayon::prelude::*;

use super::policy::{extract_policy, POLICY_TOLERANCE};
use super::{qualitative_reach, Method, ReachabilityProblem, SynthError, SynthesisResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViOptions {
    /// Stop once the largest per-state change of a sweep is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Parallel sweeps; results do not depend on it.
    pub parallel: bool,
}

impl Default for ViOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 1_000_000, parallel: true }
    }
}

/// Jacobi value iteration from below.
///
/// Targets start (and stay) at 1, states outside the qualitative set at 0,
/// everything else at 0 and rises monotonically.
#[derive(Debug, Clone)]
pub struct ValueIteration<'p, 'a> {
    problem: &'p ReachabilityProblem<'a>,
    qualitative: Vec<bool>,
    maybe: Vec<usize>,
    values: Vec<f64>,
    sweeps: usize,
    parallel: bool,
}

impl<'p, 'a> ValueIteration<'p, 'a> {
    pub fn new(problem: &'p ReachabilityProblem<'a>, parallel: bool) -> Self {
        let qualitative = qualitative_reach(problem);
        let target = problem.target();
        let maybe = (0..target.len()).filter(|&s| qualitative[s] && !target[s]).collect();
        let values = target.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
        Self { problem, qualitative, maybe, values, sweeps: 0, parallel }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn qualitative(&self) -> &[bool] {
        &self.qualitative
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// One Bellman sweep; returns the largest change.
    pub fn sweep(&mut self) -> f64 {
        let mdp = self.problem.mdp();
        let x = &self.values;
        let bellman = |&s: &usize| {
            (0..mdp.choices(s).len())
                .map(|k| mdp.row(s, k).iter().map(|t| t.prob * x[t.target as usize]).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let next: Vec<f64> = if self.parallel && self.maybe.len() > 4096 {
            self.maybe.par_iter().map(bellman).collect()
        } else {
            self.maybe.iter().map(bellman).collect()
        };
        let mut delta: f64 = 0.0;
        for (&s, v) in self.maybe.iter().zip(next) {
            delta = delta.max((v - self.values[s]).abs());
            self.values[s] = v;
        }
        self.sweeps += 1;
        delta
    }
}

/// `Pmax[allowed U target]` by value iteration.
pub fn max_reach_vi(problem: &ReachabilityProblem<'_>, options: &ViOptions) -> Result<SynthesisResult, SynthError> {
    let mut vi = ValueIteration::new(problem, options.parallel);
    let mut delta = f64::INFINITY;
    while vi.sweeps() < options.max_iter {
        delta = vi.sweep();
        if delta < options.tol {
            let policy = extract_policy(problem, vi.values(), POLICY_TOLERANCE.max(10.0 * options.tol));
            return Ok(SynthesisResult {
                iterations: vi.sweeps(),
                values: vi.values,
                policy,
                method: Method::Vi,
                qualitative: vi.qualitative,
            });
        }
    }
    Err(SynthError::NotConverged { iterations: vi.sweeps(), delta, values: vi.values })
}
