//! Maximum constrained reachability and the two-phase mission strategy.
//!
//! A [`ReachabilityProblem`] asks for `Pmax[allowed U target]`. The
//! qualitative part (`Pmax > 0`) is solved exactly on the graph; the
//! quantitative part by value iteration or by a linear program.

mod lp;
mod mission;
mod policy;
mod qualitative;
mod vi;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{Labels, Mdp};

pub use lp::max_reach_lp;
pub use mission::{synthesize_mission, MissionStrategy};
pub use policy::{evaluate_policy, extract_policy, Policy, POLICY_TOLERANCE};
pub use qualitative::qualitative_reach;
pub use vi::{max_reach_vi, ValueIteration, ViOptions};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("value iteration did not converge within {iterations} sweeps (last change {delta:e})")]
    NotConverged { iterations: usize, delta: f64, values: Vec<f64> },
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("invalid reachability problem: {0}")]
    InvalidProblem(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vi,
    Lp,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Vi => "vi",
            Method::Lp => "lp",
        })
    }
}

/// `Pmax[allowed U target]` over an MDP.
#[derive(Debug, Clone)]
pub struct ReachabilityProblem<'a> {
    mdp: &'a Mdp,
    allowed: Vec<bool>,
    target: Vec<bool>,
}

impl<'a> ReachabilityProblem<'a> {
    pub fn new(mdp: &'a Mdp, allowed: Vec<bool>, target: Vec<bool>) -> Result<Self, SynthError> {
        let n = mdp.num_states();
        if allowed.len() != n || target.len() != n {
            return Err(SynthError::InvalidProblem(format!(
                "predicates cover {} and {} states, MDP has {n}",
                allowed.len(),
                target.len()
            )));
        }
        Ok(Self { mdp, allowed, target })
    }

    /// Problem whose predicates are "labels include `allowed`" and "labels
    /// include `target`".
    pub fn from_labels(mdp: &'a Mdp, allowed: Labels, target: Labels) -> Self {
        let pick = |l: Labels| (0..mdp.num_states()).map(|s| mdp.has_label(s, l)).collect();
        Self { mdp, allowed: pick(allowed), target: pick(target) }
    }

    pub fn mdp(&self) -> &'a Mdp {
        self.mdp
    }

    pub fn allowed(&self) -> &[bool] {
        &self.allowed
    }

    pub fn target(&self) -> &[bool] {
        &self.target
    }
}

/// Values and maximizing policy of one reachability problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub values: Vec<f64>,
    pub policy: Policy,
    pub method: Method,
    /// Sweeps for value iteration, constraint rows for the LP.
    pub iterations: usize,
    /// States with `Pmax > 0`, from the exact graph analysis.
    pub qualitative: Vec<bool>,
}

impl SynthesisResult {
    pub fn value(&self, state: usize) -> f64 {
        self.values[state]
    }
}
