use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};

use super::policy::{extract_policy, POLICY_TOLERANCE};
use super::{qualitative_reach, Method, ReachabilityProblem, SynthError, SynthesisResult};

/// `Pmax[allowed U target]` as the least solution of
/// `x_s >= sum P(s,a,.) x` for every enabled `a`: minimize `sum x`.
///
/// Target states are fixed at 1 and states outside the qualitative set at
/// 0, so only positive-value non-target states are variables; with the
/// zero states removed the minimal solution is unique.
pub fn max_reach_lp(problem: &ReachabilityProblem<'_>) -> Result<SynthesisResult, SynthError> {
    let mdp = problem.mdp();
    let qualitative = qualitative_reach(problem);
    let target = problem.target();
    let n_states = mdp.num_states();
    let maybe: Vec<usize> = (0..n_states).filter(|&s| qualitative[s] && !target[s]).collect();

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut var = vec![None; n_states];
    for &s in &maybe {
        var[s] = Some(lp.add_var(1.0, (0.0, 1.0)));
    }
    let mut rows = 0;
    let mut coef: Vec<(usize, f64)> = Vec::new();
    for &s in &maybe {
        for k in 0..mdp.choices(s).len() {
            coef.clear();
            coef.push((s, 1.0));
            let mut into_target = 0.0;
            for t in mdp.row(s, k) {
                let u = t.target as usize;
                if target[u] {
                    into_target += t.prob;
                } else if qualitative[u] {
                    match coef.iter_mut().find(|(v, _)| *v == u) {
                        Some(entry) => entry.1 -= t.prob,
                        None => coef.push((u, -t.prob)),
                    }
                }
            }
            let mut expr = LinearExpr::empty();
            for &(u, c) in &coef {
                expr.add(var[u].expect("maybe state has a variable"), c);
            }
            lp.add_constraint(expr, ComparisonOp::Ge, into_target);
            rows += 1;
        }
    }
    let solution = lp.solve().map_err(|e| SynthError::Lp(e.to_string()))?;
    let mut values: Vec<f64> = target.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    for &s in &maybe {
        values[s] = solution[var[s].expect("maybe state has a variable")].clamp(0.0, 1.0);
    }
    let policy = extract_policy(problem, &values, POLICY_TOLERANCE);
    Ok(SynthesisResult { values, policy, method: Method::Lp, iterations: rows, qualitative })
}
