use std::collections::VecDeque;

use super::ReachabilityProblem;

/// States from which some policy reaches `target` through `allowed` states
/// with positive probability: the backward closure of `target` along
/// positive-probability edges of any enabled action.
pub fn qualitative_reach(problem: &ReachabilityProblem<'_>) -> Vec<bool> {
    let mdp = problem.mdp();
    let preds = mdp.predecessors();
    let mut inside = problem.target().to_vec();
    let mut queue: VecDeque<usize> = (0..inside.len()).filter(|&s| inside[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &(s, _) in &preds[t] {
            let s = s as usize;
            if !inside[s] && problem.allowed()[s] {
                inside[s] = true;
                queue.push_back(s);
            }
        }
    }
    inside
}
