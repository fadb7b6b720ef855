use thiserror::Error;

use super::{Action, Labels, Mdp};

/// Largest tolerated deviation of a row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// A well-formedness violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("state {state} choice {choice}: probabilities sum to {sum}")]
    RowSum { state: usize, choice: usize, sum: f64 },
    #[error("state {state} choice {choice}: transition to {target} has invalid probability {prob}")]
    BadProbability { state: usize, choice: usize, target: usize, prob: f64 },
    #[error("lost state {state} is not absorbing")]
    LostNotAbsorbing { state: usize },
    #[error("state {state}: {detail}")]
    Label { state: usize, detail: String },
    #[error("MDP structure: {0}")]
    Structure(String),
}

/// Checks every row of `mdp`, the absorption of lost states and, when the
/// MDP carries its state space, the consistency of labels with states.
pub fn validate(mdp: &Mdp) -> Vec<Violation> {
    if let Err(e) = mdp.check_structure() {
        return vec![Violation::Structure(e)];
    }
    let mut out = Vec::new();
    for s in 0..mdp.num_states() {
        for (k, c) in mdp.choices(s).iter().enumerate() {
            let row = mdp.transitions(c);
            let mut sum = 0.0;
            for t in row {
                if !(t.prob.is_finite() && t.prob >= 0.0 && t.prob <= 1.0 + ROW_SUM_TOLERANCE) {
                    out.push(Violation::BadProbability { state: s, choice: k, target: t.target as usize, prob: t.prob });
                }
                sum += t.prob;
            }
            if !((sum - 1.0).abs() <= ROW_SUM_TOLERANCE) {
                out.push(Violation::RowSum { state: s, choice: k, sum });
            }
        }
        let alive = mdp.has_label(s, Labels::ALIVE);
        if !alive {
            let absorbing = matches!(mdp.choices(s), [c] if c.action == Action::Tau
                && matches!(mdp.transitions(c), [t] if t.target as usize == s && t.prob == 1.0));
            if !absorbing {
                out.push(Violation::LostNotAbsorbing { state: s });
            }
        }
        if let (Some(space), Some(state)) = (mdp.state_space(), mdp.state(s)) {
            let mut want = Labels::empty();
            if state.alive {
                want = want | Labels::ALIVE;
            }
            if state.region == space.pickup {
                want = want | Labels::PICKUP;
            }
            if state.region == space.dropoff {
                want = want | Labels::DROPOFF;
            }
            if want != mdp.labels(s) {
                out.push(Violation::Label {
                    state: s,
                    detail: format!("labels {:?} do not match state, expected {:?}", mdp.labels(s).names(), want.names()),
                });
            }
            if state.alive && mdp.choices(s).iter().any(|c| c.action == Action::Tau) {
                out.push(Violation::Label { state: s, detail: "alive state has the lost-state action".into() });
            }
        }
    }
    out
}
