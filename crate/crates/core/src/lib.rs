//! Belief-augmented MDP construction and mission synthesis for a vehicle
//! crossing a partitioned environment with static obstacles and moving
//! adversaries.
//!
//! The pipeline is:
//!
//! 1. [`env`] loads and validates an environment description (regions,
//!    facets, motion primitives, adversary and obstacle statistics), with
//!    the loss-probability model in [`risk`].
//! 2. [`belief`] enumerates, per region, the finite set of adversary
//!    distributions the vehicle can hold after observing arrivals and
//!    departures.
//! 3. [`mdp`] builds the reachable labeled MDP over
//!    position × observation × neighbor beliefs, validates it and exports it.
//! 4. [`synth`] computes the maximizing two-phase pick-up/drop-off strategy.
//! 5. [`sim`] samples the controlled chain to cross-check the synthesized
//!    values.

pub mod belief;
pub mod env;
pub mod mdp;
pub mod prob;
pub mod risk;
pub mod sim;
pub mod synth;

pub use belief::{AdversaryDistribution, BeliefError, BeliefSet, CountBounds};
pub use env::{EnvError, Environment, Facet, LossTable, MotionPrimitive, Region};
pub use mdp::{
    build_mdp, BuildOptions, BuildOutput, EventKind, LostMode, Mdp, MdpContext, MdpState,
    Violation,
};
pub use sim::{
    estimate_success, simulate_run, Estimate, Outcome, SimError, SimulationSummary, Strategy, Trace,
};
pub use synth::{
    max_reach_lp, max_reach_vi, qualitative_reach, synthesize_mission, Method, MissionStrategy,
    Policy, ReachabilityProblem, SynthError, SynthesisResult, ViOptions,
};
