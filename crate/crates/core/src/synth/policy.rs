use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ReachabilityProblem;
use crate::mdp::{Action, Mdp};

/// Choices whose value is within this distance of the best one count as
/// optimal during policy extraction.
pub const POLICY_TOLERANCE: f64 = 1e-8;

/// Memoryless policy: for each state, the index of the chosen entry in
/// `mdp.choices(state)`, if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    choice: Vec<Option<u32>>,
}

impl Policy {
    pub fn empty(num_states: usize) -> Self {
        Self { choice: vec![None; num_states] }
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.iter().all(Option::is_none)
    }

    pub fn get(&self, state: usize) -> Option<usize> {
        self.choice.get(state).copied().flatten().map(|k| k as usize)
    }

    pub fn set(&mut self, state: usize, choice: Option<usize>) {
        self.choice[state] = choice.map(|k| k as u32);
    }

    pub fn action(&self, mdp: &Mdp, state: usize) -> Option<Action> {
        self.get(state).map(|k| mdp.choices(state)[k].action)
    }

    /// `(state, choice)` pairs where the policy is defined.
    pub fn defined(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.choice.iter().enumerate().filter_map(|(s, k)| k.map(|k| (s, k as usize)))
    }
}

fn q_value(mdp: &Mdp, values: &[f64], state: usize, k: usize) -> f64 {
    mdp.row(state, k).iter().map(|t| t.prob * values[t.target as usize]).sum()
}

/// Maximizing policy for `values`, defined on every allowed non-target state
/// with positive value.
///
/// Among the near-optimal choices of a state, the lowest-index one that
/// moves closer to the target is taken: states are settled in layers
/// outward from the target, and a choice qualifies once one of its
/// successors is settled. Plain argmax can pick a choice that loops
/// forever inside a set of equally valued states.
pub fn extract_policy(problem: &ReachabilityProblem<'_>, values: &[f64], tolerance: f64) -> Policy {
    let mdp = problem.mdp();
    let n = mdp.num_states();
    let candidates: Vec<usize> = (0..n)
        .filter(|&s| problem.allowed()[s] && !problem.target()[s] && values[s] > 0.0 && !mdp.choices(s).is_empty())
        .collect();
    let optimal: Vec<Vec<usize>> = candidates
        .par_iter()
        .map(|&s| {
            let q: Vec<f64> = (0..mdp.choices(s).len()).map(|k| q_value(mdp, values, s, k)).collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..q.len()).filter(|&k| q[k] >= best - tolerance).collect()
        })
        .collect();

    let mut policy = Policy::empty(n);
    let mut settled = problem.target().to_vec();
    let mut pending: Vec<usize> = (0..candidates.len()).collect();
    loop {
        let mut newly = Vec::new();
        pending.retain(|&i| {
            let s = candidates[i];
            let pick = optimal[i]
                .iter()
                .copied()
                .find(|&k| mdp.row(s, k).iter().any(|t| t.prob > 0.0 && settled[t.target as usize]));
            match pick {
                Some(k) => {
                    policy.set(s, Some(k));
                    newly.push(s);
                    false
                }
                None => true,
            }
        });
        if newly.is_empty() {
            break;
        }
        for s in newly {
            settled[s] = true;
        }
    }
    for i in pending {
        policy.set(candidates[i], optimal[i].first().copied());
    }
    policy
}

/// Probability, for every state, of reaching a state with a `terminal`
/// value under `policy`, weighted by that value. States with neither a
/// terminal value nor a policy choice get 0.
pub fn evaluate_policy(mdp: &Mdp, policy: &Policy, terminal: &[Option<f64>], tol: f64, max_iter: usize) -> Vec<f64> {
    let n = mdp.num_states();
    let mut x: Vec<f64> = terminal.iter().map(|t| t.unwrap_or(0.0)).collect();
    let active: Vec<(usize, usize)> =
        policy.defined().filter(|&(s, _)| terminal[s].is_none()).collect();
    for _ in 0..max_iter {
        let updates: Vec<f64> = active.par_iter().map(|&(s, k)| q_value(mdp, &x, s, k)).collect();
        let mut delta: f64 = 0.0;
        for (&(s, _), v) in active.iter().zip(updates) {
            delta = delta.max((v - x[s]).abs());
            x[s] = v;
        }
        if delta < tol {
            break;
        }
    }
    debug_assert_eq!(x.len(), n);
    x
}
