use serde::{Deserialize, Serialize};

use super::policy::evaluate_policy;
use super::{max_reach_lp, max_reach_vi, Method, Policy, ReachabilityProblem, SynthError, SynthesisResult, ViOptions};
use crate::mdp::{Labels, Mdp};
use crate::sim::{Phase, Strategy};

/// Solution of `Pmax[alive U (alive & rp & P>0[alive U (alive & rd)])]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionStrategy {
    /// Reach a pick-up state from which drop-off is still possible.
    pub phase1: SynthesisResult,
    /// Reach drop-off.
    pub phase2: SynthesisResult,
    /// Phase-1 target states, where the strategy switches to phase 2.
    pub switch: Vec<bool>,
    /// Phase-2 target states (alive drop-off).
    pub goal: Vec<bool>,
    pub init: usize,
    /// Value of the formula at the initial state.
    pub value: f64,
    /// Whether the initial state satisfies the formula with positive
    /// probability.
    pub feasible: bool,
}

fn solve(problem: &ReachabilityProblem<'_>, method: Method, options: &ViOptions) -> Result<SynthesisResult, SynthError> {
    match method {
        Method::Vi => max_reach_vi(problem, options),
        Method::Lp => max_reach_lp(problem),
    }
}

/// Solves the phase-2 problem, resolves the nested operator on the graph,
/// then solves the phase-1 problem.
pub fn synthesize_mission(mdp: &Mdp, method: Method, options: &ViOptions) -> Result<MissionStrategy, SynthError> {
    let phase2_problem = ReachabilityProblem::from_labels(mdp, Labels::ALIVE, Labels::ALIVE | Labels::DROPOFF);
    let mut phase2 = solve(&phase2_problem, method, options)?;
    let goal = phase2_problem.target().to_vec();
    let switch: Vec<bool> = (0..mdp.num_states())
        .map(|s| mdp.has_label(s, Labels::ALIVE | Labels::PICKUP) && phase2.qualitative[s])
        .collect();
    let allowed = (0..mdp.num_states()).map(|s| mdp.has_label(s, Labels::ALIVE)).collect();
    let phase1_problem = ReachabilityProblem::new(mdp, allowed, switch.clone())?;
    let mut phase1 = solve(&phase1_problem, method, options)?;
    let init = mdp.init();
    let feasible = phase1.qualitative[init];
    if !feasible {
        phase1.policy = Policy::empty(mdp.num_states());
        phase2.policy = Policy::empty(mdp.num_states());
    }
    let value = phase1.values[init];
    Ok(MissionStrategy { phase1, phase2, switch, goal, init, value, feasible })
}

impl MissionStrategy {
    /// Plays the phase-1 policy until a switch state, then phase 2.
    pub fn strategy(&self) -> Strategy {
        Strategy::new(vec![
            Phase { policy: self.phase1.policy.clone(), target: self.switch.clone(), live: self.phase1.qualitative.clone() },
            Phase { policy: self.phase2.policy.clone(), target: self.goal.clone(), live: self.phase2.qualitative.clone() },
        ])
    }

    /// Phase-2 value at the initial state (drop-off alone).
    pub fn phase2_value(&self) -> f64 {
        self.phase2.values[self.init]
    }

    /// Exact probability that the combined strategy completes the mission
    /// (reaches pick-up, then drop-off, alive), from the induced chain.
    pub fn completion_probability(&self, mdp: &Mdp) -> f64 {
        let n = mdp.num_states();
        let dropoff: Vec<Option<f64>> = self.goal.iter().map(|&g| g.then_some(1.0)).collect();
        let x2 = evaluate_policy(mdp, &self.phase2.policy, &dropoff, 1e-13, 10_000_000);
        let at_switch: Vec<Option<f64>> = (0..n).map(|s| self.switch[s].then_some(x2[s])).collect();
        let x1 = evaluate_policy(mdp, &self.phase1.policy, &at_switch, 1e-13, 10_000_000);
        x1[self.init]
    }
}
