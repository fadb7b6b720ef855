use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use super::{assemble, Action, EventKind, Labels, Mdp, MdpState, StateSpace, Transition};
use crate::belief::{enumerate_reachable, BeliefError, BeliefSet};
use crate::env::{Environment, PrimitiveIndex, RegionIndex};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("belief enumeration for region {region} failed: {source}")]
    Belief { region: String, source: BeliefError },
    #[error("reachable state space exceeds the limit of {0} states")]
    TooLarge(usize),
}

/// How vehicle-loss successors are represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LostMode {
    /// One lost state per `(f', r', n', o')` with the new region's initial
    /// beliefs, exactly as the region-change successor would have been.
    #[default]
    Literal,
    /// One lost sink per entry `(f', r')`.
    PerEntry,
    /// A single lost sink for the whole model.
    Global,
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub lost_mode: LostMode,
    /// Upper bound on each region's belief-set size.
    pub belief_budget: usize,
    pub max_states: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { lost_mode: LostMode::Literal, belief_budget: 100_000, max_states: 5_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub mdp: Mdp,
    pub warnings: Vec<String>,
    pub dead_ends: usize,
    pub lost_states: usize,
}

/// One successor of a state under a primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct Successor {
    pub state: MdpState,
    pub prob: f64,
    pub event: EventKind,
}

/// Terms of the estimated event rate of a state under a primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBreakdown {
    /// `lambda(delta)`.
    pub traversal: f64,
    /// `mu_l(r) n`, or 0 when no adversary can leave.
    pub departure: f64,
    /// `mu_e(r) sum E`, or 0 when no adversary can enter.
    pub arrival: f64,
}

impl RateBreakdown {
    pub fn total(&self) -> f64 {
        self.traversal + self.departure + self.arrival
    }
}

/// Environment plus per-region belief sets; the successor function of the
/// MDP lives here.
#[derive(Debug, Clone)]
pub struct MdpContext<'a> {
    env: &'a Environment,
    beliefs: Vec<BeliefSet>,
    lost_mode: LostMode,
}

impl<'a> MdpContext<'a> {
    pub fn new(env: &'a Environment, options: &BuildOptions) -> Result<Self, BuildError> {
        let beliefs = env
            .regions
            .iter()
            .map(|r| {
                enumerate_reachable(&r.init, r.bounds, Some(options.belief_budget))
                    .map_err(|source| BuildError::Belief { region: r.id.clone(), source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { env, beliefs, lost_mode: options.lost_mode })
    }

    pub fn environment(&self) -> &Environment {
        self.env
    }

    pub fn belief_set(&self, region: RegionIndex) -> &BeliefSet {
        &self.beliefs[region]
    }

    /// State on arrival at `facet` heading into `region`, holding the
    /// initial beliefs of `region`'s neighbors.
    pub fn entry_state(&self, facet: usize, region: RegionIndex, n: u32, o: u32) -> MdpState {
        MdpState {
            facet: facet as u32,
            region: region as u32,
            adversaries: n,
            obstacle: o,
            alive: true,
            beliefs: vec![0; self.env.adjacency[region].len()],
        }
    }

    pub fn initial_state(&self) -> MdpState {
        self.entry_state(self.env.init_facet, self.env.init_region, 0, 0)
    }

    pub fn labels(&self, s: &MdpState) -> Labels {
        let mut l = Labels::empty();
        if s.alive {
            l = l | Labels::ALIVE;
        }
        if s.region as usize == self.env.pickup {
            l = l | Labels::PICKUP;
        }
        if s.region as usize == self.env.dropoff {
            l = l | Labels::DROPOFF;
        }
        l
    }

    /// Enabled actions in canonical order.
    pub fn enabled(&self, s: &MdpState) -> Vec<Action> {
        if !s.alive {
            return vec![Action::Tau];
        }
        self.env
            .primitives_from(s.facet as usize, s.region as usize)
            .map(|p| Action::Primitive(p as u32))
            .collect()
    }

    /// Neighbors `r'` whose belief allows an adversary to leave `r'` and
    /// enter the current region, i.e. `p_{r'}(M_{r'}) != 1`.
    fn suppliers<'s>(&'s self, s: &'s MdpState) -> impl Iterator<Item = (usize, RegionIndex)> + 's {
        self.env.adjacency[s.region as usize]
            .iter()
            .enumerate()
            .filter(move |&(slot, &q)| self.beliefs[q].can_supply(s.beliefs[slot] as usize))
            .map(|(slot, &q)| (slot, q))
    }

    /// Neighbors that can absorb an adversary, i.e. `p_{r'}(N_{r'}) != 1`.
    fn absorbers<'s>(&'s self, s: &'s MdpState) -> impl Iterator<Item = (usize, RegionIndex)> + 's {
        self.env.adjacency[s.region as usize]
            .iter()
            .enumerate()
            .filter(move |&(slot, &q)| self.beliefs[q].can_absorb(s.beliefs[slot] as usize))
            .map(|(slot, &q)| (slot, q))
    }

    pub fn rate_breakdown(&self, s: &MdpState, primitive: PrimitiveIndex) -> RateBreakdown {
        let region = &self.env.regions[s.region as usize];
        let n = s.adversaries;
        let can_leave = n > region.bounds.min && self.absorbers(s).next().is_some();
        let can_enter = n < region.bounds.max;
        let expected: f64 = self
            .suppliers(s)
            .map(|(slot, q)| self.beliefs[q].expectation(s.beliefs[slot] as usize))
            .sum();
        RateBreakdown {
            traversal: self.env.primitives[primitive].rate,
            departure: if can_leave { region.mu_leave * f64::from(n) } else { 0.0 },
            arrival: if can_enter { region.mu_enter * expected } else { 0.0 },
        }
    }

    /// Estimated rate of the first event (arrival, departure, or reaching
    /// the target facet) while executing `primitive` in state `s`.
    pub fn estimated_rate(&self, s: &MdpState, primitive: PrimitiveIndex) -> f64 {
        self.rate_breakdown(s, primitive).total()
    }

    fn lost_state(&self, facet: usize, region: RegionIndex, n: u32, o: u32, beliefs: Option<&[u32]>) -> MdpState {
        let (facet, region, n, o, beliefs) = match self.lost_mode {
            LostMode::Literal => (facet, region, n, o, beliefs.map(<[u32]>::to_vec)),
            LostMode::PerEntry => (facet, region, self.env.regions[region].bounds.min, 0, None),
            LostMode::Global => (self.env.init_facet, self.env.init_region, 0, 0, None),
        };
        MdpState {
            facet: facet as u32,
            region: region as u32,
            adversaries: n,
            obstacle: o,
            alive: false,
            beliefs: beliefs.unwrap_or_else(|| vec![0; self.env.adjacency[region].len()]),
        }
    }

    /// Successors of alive state `s` under `primitive`, with probabilities.
    /// Zero-probability successors are omitted.
    pub fn transitions(&self, s: &MdpState, primitive: PrimitiveIndex) -> Vec<Successor> {
        assert!(s.alive, "transitions requested for a lost state");
        let env = self.env;
        let prim = &env.primitives[primitive];
        let r = s.region as usize;
        let region = &env.regions[r];
        let rates = self.rate_breakdown(s, primitive);
        let nu = rates.total();
        let p_lost = prim.loss.get(s.adversaries, s.obstacle);
        let mut out = Vec::new();
        let mut push = |state: MdpState, prob: f64, event: EventKind| {
            if prob > 0.0 {
                out.push(Successor { state, prob, event });
            }
        };

        // The vehicle reaches an exit facet before any adversary moves.
        for &(exit, q) in &prim.outcomes {
            let base = q * rates.traversal / nu;
            let next = env.region_across(exit, r);
            if next == r {
                // Outer facet: the vehicle turns back into the same region
                // and already knows its counts and neighbor beliefs.
                let mut again = s.clone();
                again.facet = exit as u32;
                push(again, base * (1.0 - p_lost), EventKind::RegionChange);
                let lost = self.lost_state(exit, r, s.adversaries, s.obstacle, Some(&s.beliefs));
                push(lost, base * p_lost, EventKind::LostAbsorb);
                continue;
            }
            let slot = env.adjacency[r].binary_search(&next).expect("regions across a facet are adjacent");
            let belief = self.beliefs[next].member(s.beliefs[slot] as usize);
            let next_region = &env.regions[next];
            for (n2, pn) in belief.support() {
                let pn = crate::prob::to_f64(pn);
                if pn == 0.0 {
                    continue;
                }
                for o2 in 0..=next_region.max_obstacle {
                    let po = next_region.obstacle_prob(o2);
                    if po == 0.0 {
                        continue;
                    }
                    let w = base * pn * po;
                    push(self.entry_state(exit, next, n2, o2), w * (1.0 - p_lost), EventKind::RegionChange);
                    push(self.lost_state(exit, next, n2, o2, None), w * p_lost, EventKind::LostAbsorb);
                }
            }
        }

        // An adversary arrives from neighbor j, which therefore lost one.
        if rates.arrival > 0.0 {
            for (slot, q) in self.suppliers(s) {
                let b = s.beliefs[slot] as usize;
                let mut next = s.clone();
                next.adversaries += 1;
                next.beliefs[slot] = self.beliefs[q].left(b).expect("supplier can lose an adversary") as u32;
                let prob = region.mu_enter * self.beliefs[q].expectation(b) / nu;
                push(next, prob, EventKind::AdversaryEntered);
            }
        }

        // An adversary departs to one of the neighbors that can take it,
        // each equally likely.
        if rates.departure > 0.0 {
            let targets: Vec<_> = self.absorbers(s).collect();
            let prob = rates.departure / (nu * targets.len() as f64);
            for (slot, q) in targets {
                let b = s.beliefs[slot] as usize;
                let mut next = s.clone();
                next.adversaries -= 1;
                next.beliefs[slot] = self.beliefs[q].entered(b).expect("absorber can gain an adversary") as u32;
                push(next, prob, EventKind::AdversaryLeft);
            }
        }
        out
    }

    /// All enabled choices of `s` with their successors.
    pub fn expand(&self, s: &MdpState) -> Vec<(Action, Vec<Successor>)> {
        if !s.alive {
            return vec![(Action::Tau, vec![Successor { state: s.clone(), prob: 1.0, event: EventKind::LostAbsorb }])];
        }
        self.enabled(s)
            .into_iter()
            .map(|a| match a {
                Action::Primitive(p) => (a, self.transitions(s, p as usize)),
                Action::Tau => unreachable!("alive states have no tau"),
            })
            .collect()
    }
}

/// Builds the fragment of the MDP reachable from the initial state.
///
/// States are numbered breadth-first; each frontier is expanded in parallel
/// and merged in frontier order, so numbering does not depend on the
/// thread count.
pub fn build_mdp(env: &Environment, options: &BuildOptions) -> Result<BuildOutput, BuildError> {
    let ctx = MdpContext::new(env, options)?;
    let mut states: Vec<MdpState> = Vec::new();
    let mut index: HashMap<MdpState, u32> = HashMap::new();
    let mut rows: Vec<Vec<(Action, Vec<Transition>)>> = Vec::new();
    let mut dead_end_entries: BTreeMap<(u32, u32), usize> = BTreeMap::new();

    let s0 = ctx.initial_state();
    index.insert(s0.clone(), 0);
    states.push(s0);
    let mut frontier = 0..1usize;
    while !frontier.is_empty() {
        let expanded: Vec<Vec<(Action, Vec<Successor>)>> =
            states[frontier.clone()].par_iter().map(|s| ctx.expand(s)).collect();
        for (offset, choices) in expanded.into_iter().enumerate() {
            let source = frontier.start + offset;
            if choices.is_empty() {
                let s = &states[source];
                *dead_end_entries.entry((s.facet, s.region)).or_default() += 1;
            }
            let mut state_rows = Vec::with_capacity(choices.len());
            for (action, successors) in choices {
                let mut row: Vec<Transition> = Vec::with_capacity(successors.len());
                for succ in successors {
                    let target = match index.get(&succ.state) {
                        Some(&i) => i,
                        None => {
                            let i = states.len() as u32;
                            if states.len() >= options.max_states {
                                return Err(BuildError::TooLarge(options.max_states));
                            }
                            index.insert(succ.state.clone(), i);
                            states.push(succ.state);
                            i
                        }
                    };
                    // Distinct events can collapse onto one state when lost
                    // successors are merged.
                    match row.iter_mut().find(|t| t.target == target) {
                        Some(t) => t.prob += succ.prob,
                        None => row.push(Transition { target, prob: succ.prob, event: succ.event }),
                    }
                }
                state_rows.push((action, row));
            }
            rows.push(state_rows);
        }
        frontier = frontier.end..states.len();
    }

    let mut warnings = env.warnings.clone();
    for (&(f, r), count) in &dead_end_entries {
        warnings.push(format!(
            "{count} reachable state(s) at facet {} in region {} have no enabled primitive (dead end)",
            env.facets[f as usize].id, env.regions[r as usize].id
        ));
    }
    let dead_ends = dead_end_entries.values().sum();
    let lost_states = states.iter().filter(|s| !s.alive).count();
    let labels = states.iter().map(|s| ctx.labels(s)).collect();
    let action_names = (0..env.primitives.len()).map(|p| env.primitive_name(p)).collect();
    let space = StateSpace {
        facet_names: env.facets.iter().map(|f| f.id.clone()).collect(),
        region_names: env.regions.iter().map(|r| r.id.clone()).collect(),
        adjacency: env.adjacency.iter().map(|a| a.iter().map(|&r| r as u32).collect()).collect(),
        pickup: env.pickup as u32,
        dropoff: env.dropoff as u32,
        states,
    };
    let mdp = assemble(0, rows, labels, action_names, Some(space));
    Ok(BuildOutput { mdp, warnings, dead_ends, lost_states })
}
