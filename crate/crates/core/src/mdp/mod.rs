//! Explicit labeled MDP: storage, construction from an environment,
//! validation and export.

mod build;
mod dump;
mod prism;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use build::{build_mdp, BuildError, BuildOptions, BuildOutput, LostMode, MdpContext, Successor};
pub use dump::{load_dump, save_dump, DumpError};
pub use prism::{export_prism, render_prism, PrismFiles, PrismText, MISSION_PROPERTY};
pub use validate::{validate, Violation, ROW_SUM_TOLERANCE};

/// Action index: a motion primitive of the environment, or the dummy
/// action of lost states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Primitive(u32),
    Tau,
}

/// What happened on a transition; used for traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// The vehicle reached the target facet and entered the next region.
    RegionChange,
    /// An adversary entered the current region from a neighbor.
    AdversaryEntered,
    /// An adversary left the current region for a neighbor.
    AdversaryLeft,
    /// The vehicle was lost, or stays lost.
    LostAbsorb,
    /// Transition of an MDP not built from an environment.
    Step,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::RegionChange => "region-change",
            EventKind::AdversaryEntered => "adversary-entered",
            EventKind::AdversaryLeft => "adversary-left",
            EventKind::LostAbsorb => "lost-absorb",
            EventKind::Step => "step",
        }
    }
}

/// Atomic propositions of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Labels(u8);

impl Labels {
    pub const ALIVE: Labels = Labels(1);
    pub const PICKUP: Labels = Labels(2);
    pub const DROPOFF: Labels = Labels(4);

    pub fn empty() -> Self {
        Labels(0)
    }

    pub fn contains(self, other: Labels) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn with(self, other: Labels) -> Self {
        Labels(self.0 | other.0)
    }

    pub fn names(self) -> Vec<&'static str> {
        [(Self::ALIVE, "alive"), (Self::PICKUP, "rp"), (Self::DROPOFF, "rd")]
            .into_iter()
            .filter(|(l, _)| self.contains(*l))
            .map(|(_, n)| n)
            .collect()
    }
}

impl std::ops::BitOr for Labels {
    type Output = Labels;
    fn bitor(self, rhs: Labels) -> Labels {
        self.with(rhs)
    }
}

/// `((facet, region), n, o, alive|lost, neighbor beliefs)`.
///
/// `beliefs[i]` indexes the belief set of the `i`-th neighbor of `region`
/// (neighbors in ascending region order).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MdpState {
    pub facet: u32,
    pub region: u32,
    pub adversaries: u32,
    pub obstacle: u32,
    pub alive: bool,
    pub beliefs: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub target: u32,
    pub prob: f64,
    pub event: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub action: Action,
    start: u32,
    len: u32,
}

/// Names and structure needed to interpret [`MdpState`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub facet_names: Vec<String>,
    pub region_names: Vec<String>,
    pub adjacency: Vec<Vec<u32>>,
    pub pickup: u32,
    pub dropoff: u32,
    pub states: Vec<MdpState>,
}

/// Sparse MDP in compressed-row form: states own a contiguous run of
/// choices, choices own a contiguous run of transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mdp {
    init: u32,
    choice_start: Vec<u32>,
    choices: Vec<Choice>,
    transitions: Vec<Transition>,
    labels: Vec<Labels>,
    action_names: Vec<String>,
    space: Option<StateSpace>,
}

impl Mdp {
    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn num_choices(&self) -> usize {
        self.choices.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn init(&self) -> usize {
        self.init as usize
    }

    /// Enabled choices of `state`, in canonical action order.
    pub fn choices(&self, state: usize) -> &[Choice] {
        let lo = self.choice_start[state] as usize;
        let hi = self.choice_start[state + 1] as usize;
        &self.choices[lo..hi]
    }

    pub fn transitions(&self, choice: &Choice) -> &[Transition] {
        let lo = choice.start as usize;
        &self.transitions[lo..lo + choice.len as usize]
    }

    /// Transitions of the `k`-th choice of `state`.
    pub fn row(&self, state: usize, k: usize) -> &[Transition] {
        self.transitions(&self.choices(state)[k])
    }

    /// Mutable access to one row, for fault injection in tests and tools.
    pub fn row_mut(&mut self, state: usize, k: usize) -> &mut [Transition] {
        let c = self.choices[self.choice_start[state] as usize + k];
        let lo = c.start as usize;
        &mut self.transitions[lo..lo + c.len as usize]
    }

    pub fn labels(&self, state: usize) -> Labels {
        self.labels[state]
    }

    pub fn has_label(&self, state: usize, label: Labels) -> bool {
        self.labels[state].contains(label)
    }

    pub fn state_space(&self) -> Option<&StateSpace> {
        self.space.as_ref()
    }

    pub fn state(&self, index: usize) -> Option<&MdpState> {
        self.space.as_ref().map(|s| &s.states[index])
    }

    pub fn action_name(&self, action: Action) -> String {
        match action {
            Action::Tau => "tau".to_string(),
            Action::Primitive(i) => {
                self.action_names.get(i as usize).cloned().unwrap_or_else(|| format!("a{i}"))
            }
        }
    }

    /// Human-readable description of a state.
    pub fn describe(&self, index: usize) -> String {
        match &self.space {
            None => format!("s{index}"),
            Some(space) => {
                let s = &space.states[index];
                let neighbors = &space.adjacency[s.region as usize];
                let beliefs: Vec<String> = neighbors
                    .iter()
                    .zip(&s.beliefs)
                    .map(|(&r, &b)| format!("{}#{b}", space.region_names[r as usize]))
                    .collect();
                format!(
                    "(({}, {}), n={}, o={}, {}, [{}])",
                    space.facet_names[s.facet as usize],
                    space.region_names[s.region as usize],
                    s.adversaries,
                    s.obstacle,
                    if s.alive { "alive" } else { "lost" },
                    beliefs.join(" ")
                )
            }
        }
    }

    /// Predecessor lists: for every state, the `(state, choice index)`
    /// pairs with a positive-probability transition into it.
    pub fn predecessors(&self) -> Vec<Vec<(u32, u32)>> {
        let mut preds = vec![Vec::new(); self.num_states()];
        for s in 0..self.num_states() {
            for (k, c) in self.choices(s).iter().enumerate() {
                for t in self.transitions(c) {
                    if t.prob > 0.0 {
                        let list: &mut Vec<(u32, u32)> = &mut preds[t.target as usize];
                        if list.last() != Some(&(s as u32, k as u32)) {
                            list.push((s as u32, k as u32));
                        }
                    }
                }
            }
        }
        preds
    }

    /// Checks index consistency of a deserialized or hand-built MDP.
    pub fn check_structure(&self) -> Result<(), String> {
        let n = self.labels.len();
        if n == 0 {
            return Err("MDP has no states".into());
        }
        if self.init as usize >= n {
            return Err(format!("initial state {} out of range", self.init));
        }
        if self.choice_start.len() != n + 1
            || self.choice_start[0] != 0
            || *self.choice_start.last().unwrap() as usize != self.choices.len()
            || self.choice_start.windows(2).any(|w| w[0] > w[1])
        {
            return Err("choice offsets are inconsistent".into());
        }
        for c in &self.choices {
            if c.start as usize + c.len as usize > self.transitions.len() {
                return Err("transition offsets are out of range".into());
            }
        }
        if let Some(t) = self.transitions.iter().find(|t| t.target as usize >= n) {
            return Err(format!("transition target {} out of range", t.target));
        }
        if let Some(space) = &self.space {
            if space.states.len() != n {
                return Err("state list length differs from label count".into());
            }
        }
        Ok(())
    }
}

/// Assembles an [`Mdp`] from per-state choice lists.
#[derive(Debug, Clone)]
pub struct MdpBuilder {
    init: usize,
    rows: Vec<Vec<(Action, Vec<Transition>)>>,
    labels: Vec<Labels>,
    action_names: Vec<String>,
}

impl MdpBuilder {
    pub fn new(num_states: usize, init: usize) -> Self {
        Self {
            init,
            rows: vec![Vec::new(); num_states],
            labels: vec![Labels::empty(); num_states],
            action_names: Vec::new(),
        }
    }

    pub fn action_names(mut self, names: Vec<String>) -> Self {
        self.action_names = names;
        self
    }

    pub fn label(&mut self, state: usize, labels: Labels) -> &mut Self {
        self.labels[state] = self.labels[state].with(labels);
        self
    }

    /// Appends a choice; choices keep insertion order.
    pub fn choice(&mut self, state: usize, action: Action, successors: &[(usize, f64)]) -> &mut Self {
        let row = successors
            .iter()
            .map(|&(t, p)| Transition { target: t as u32, prob: p, event: EventKind::Step })
            .collect();
        self.rows[state].push((action, row));
        self
    }

    pub fn choice_with_events(&mut self, state: usize, action: Action, row: Vec<Transition>) -> &mut Self {
        self.rows[state].push((action, row));
        self
    }

    pub fn build(self) -> Mdp {
        assemble(self.init, self.rows, self.labels, self.action_names, None)
    }
}

pub(crate) fn assemble(
    init: usize,
    rows: Vec<Vec<(Action, Vec<Transition>)>>,
    labels: Vec<Labels>,
    action_names: Vec<String>,
    space: Option<StateSpace>,
) -> Mdp {
    let mut choice_start = Vec::with_capacity(rows.len() + 1);
    let mut choices = Vec::new();
    let mut transitions = Vec::new();
    choice_start.push(0);
    for state_rows in rows {
        for (action, row) in state_rows {
            choices.push(Choice { action, start: transitions.len() as u32, len: row.len() as u32 });
            transitions.extend(row);
        }
        choice_start.push(choices.len() as u32);
    }
    Mdp { init: init as u32, choice_start, choices, transitions, labels, action_names, space }
}

impl fmt::Display for Mdp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MDP with {} states, {} choices, {} transitions",
            self.num_states(),
            self.num_choices(),
            self.num_transitions()
        )
    }
}
