//! Adversary-count beliefs for regions adjacent to the vehicle.
//!
//! While the vehicle crosses a region it sees adversaries arrive from and
//! depart to its neighbors, but never observes the neighbors directly. Each
//! observed departure shifts the destination neighbor's pmf up by one, each
//! arrival shifts the source neighbor's pmf down by one. When a shift would
//! push mass past the region's count bounds, the boundary mass is spread
//! evenly over the remaining window instead ("redistribution"), which
//! narrows the window by one.
//!
//! All arithmetic is exact so that [`enumerate_reachable`] can deduplicate
//! distributions by equality.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::prob::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BeliefError {
    #[error("cannot apply {direction} update: all mass is at the bound {bound}")]
    UpdateNotAllowed { direction: Direction, bound: u32 },
    #[error("invalid adversary distribution: {0}")]
    Invalid(String),
    #[error("belief enumeration exceeded the node budget of {0}")]
    BudgetExceeded(usize),
}

/// Direction of an observed adversary move relative to the region whose
/// belief is updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// An adversary entered the region (`+1`).
    Entered,
    /// An adversary left the region (`-1`).
    Left,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Entered => f.write_str("+1"),
            Direction::Left => f.write_str("-1"),
        }
    }
}

/// Minimum and maximum number of adversaries a region can hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CountBounds {
    pub min: u32,
    pub max: u32,
}

impl CountBounds {
    pub fn new(min: u32, max: u32) -> Result<Self, BeliefError> {
        if min > max {
            return Err(BeliefError::Invalid(format!("min {min} exceeds max {max}")));
        }
        Ok(Self { min, max })
    }

    pub fn width(&self) -> u32 {
        self.max - self.min
    }
}

/// A pmf over adversary counts supported on the window `[min..=max]`.
///
/// Zero entries inside the window are kept: the window, not the nonzero
/// support, determines which update branch applies.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdversaryDistribution {
    min: u32,
    pmf: Vec<Rational>,
}

impl AdversaryDistribution {
    /// Builds a distribution on `[min..min + pmf.len() - 1]`, checking that
    /// the values are nonnegative and sum to exactly one.
    pub fn new(min: u32, pmf: Vec<Rational>) -> Result<Self, BeliefError> {
        if pmf.is_empty() {
            return Err(BeliefError::Invalid("empty support".into()));
        }
        if let Some(v) = pmf.iter().find(|v| v.is_negative()) {
            return Err(BeliefError::Invalid(format!("negative mass {v}")));
        }
        let total: Rational = pmf.iter().sum();
        if !total.is_one() {
            return Err(BeliefError::Invalid(format!("mass sums to {total}, not 1")));
        }
        Ok(Self { min, pmf })
    }

    pub fn point(count: u32) -> Self {
        Self { min: count, pmf: vec![Rational::one()] }
    }

    /// Uniform distribution on `[lo..=hi]`.
    pub fn uniform(lo: u32, hi: u32) -> Self {
        assert!(lo <= hi, "empty uniform window");
        let width = (hi - lo + 1) as i64;
        let each = BigRational::new(1.into(), width.into());
        Self { min: lo, pmf: vec![each; width as usize] }
    }

    pub fn min(&self) -> u32 {
        self.min
    }

    pub fn max(&self) -> u32 {
        self.min + self.pmf.len() as u32 - 1
    }

    pub fn values(&self) -> &[Rational] {
        &self.pmf
    }

    /// Probability of exactly `n` adversaries; zero outside the window.
    pub fn prob(&self, n: u32) -> Rational {
        if n < self.min || n > self.max() {
            return Rational::zero();
        }
        self.pmf[(n - self.min) as usize].clone()
    }

    pub fn prob_f64(&self, n: u32) -> f64 {
        self.prob(n).to_f64().unwrap_or(f64::NAN)
    }

    /// `(count, probability)` for every count in the window, zeros included.
    pub fn support(&self) -> impl Iterator<Item = (u32, &Rational)> + '_ {
        self.pmf.iter().enumerate().map(move |(i, p)| (self.min + i as u32, p))
    }

    pub fn is_certain(&self, n: u32) -> bool {
        self.prob(n).is_one()
    }

    pub fn expectation(&self) -> Rational {
        self.support().map(|(n, p)| p * Rational::from_integer(n.into())).sum()
    }

    pub fn within(&self, bounds: CountBounds) -> bool {
        self.min >= bounds.min && self.max() <= bounds.max
    }

    /// Belief after observing an adversary move into this region.
    pub fn entered(&self, bounds: CountBounds) -> Result<Self, BeliefError> {
        self.entered_traced(bounds).map(|(d, _)| d)
    }

    /// Belief after observing an adversary move out of this region.
    pub fn left(&self, bounds: CountBounds) -> Result<Self, BeliefError> {
        self.left_traced(bounds).map(|(d, _)| d)
    }

    /// Like [`Self::entered`], also reporting whether the boundary
    /// redistribution branch fired.
    pub fn entered_traced(&self, bounds: CountBounds) -> Result<(Self, bool), BeliefError> {
        if self.is_certain(bounds.max) {
            return Err(BeliefError::UpdateNotAllowed {
                direction: Direction::Entered,
                bound: bounds.max,
            });
        }
        if self.max() < bounds.max {
            return Ok((Self { min: self.min + 1, pmf: self.pmf.clone() }, false));
        }
        // Window [M..N] with N = N_r and M < N: the count before the arrival
        // could not have been N_r, so p(N) is spread over the new window
        // [M+1..N], whose entry n inherits p(n-1).
        let width = self.pmf.len() - 1;
        let share = self.pmf[width].clone() / Rational::from_integer((width as i64).into());
        let pmf = self.pmf[..width].iter().map(|p| p + &share).collect();
        Ok((Self { min: self.min + 1, pmf }, true))
    }

    pub fn left_traced(&self, bounds: CountBounds) -> Result<(Self, bool), BeliefError> {
        if self.is_certain(bounds.min) {
            return Err(BeliefError::UpdateNotAllowed {
                direction: Direction::Left,
                bound: bounds.min,
            });
        }
        if self.min > bounds.min {
            return Ok((Self { min: self.min - 1, pmf: self.pmf.clone() }, false));
        }
        let width = self.pmf.len() - 1;
        let share = self.pmf[0].clone() / Rational::from_integer((width as i64).into());
        let pmf = self.pmf[1..].iter().map(|p| p + &share).collect();
        Ok((Self { min: self.min, pmf }, true))
    }

    pub fn update(&self, direction: Direction, bounds: CountBounds) -> Result<(Self, bool), BeliefError> {
        match direction {
            Direction::Entered => self.entered_traced(bounds),
            Direction::Left => self.left_traced(bounds),
        }
    }
}

impl fmt::Display for AdversaryDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}..{}}}: (", self.min, self.max())?;
        for (i, p) in self.pmf.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(")")
    }
}

/// One labeled edge of the belief closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeliefEdge {
    pub from: usize,
    pub to: usize,
    pub direction: Direction,
    pub redistribution: bool,
}

/// The finite set of beliefs reachable from a region's initial pmf.
///
/// Members are numbered in breadth-first discovery order with `+1` children
/// explored before `-1` children; member 0 is the initial pmf.
#[derive(Debug, Clone)]
pub struct BeliefSet {
    bounds: CountBounds,
    members: Vec<AdversaryDistribution>,
    entered: Vec<Option<usize>>,
    left: Vec<Option<usize>>,
    expectation: Vec<f64>,
    edges: Vec<BeliefEdge>,
}

impl BeliefSet {
    pub fn bounds(&self) -> CountBounds {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[AdversaryDistribution] {
        &self.members
    }

    pub fn member(&self, index: usize) -> &AdversaryDistribution {
        &self.members[index]
    }

    pub fn index_of(&self, dist: &AdversaryDistribution) -> Option<usize> {
        self.members.iter().position(|m| m == dist)
    }

    pub fn entered(&self, index: usize) -> Option<usize> {
        self.entered[index]
    }

    pub fn left(&self, index: usize) -> Option<usize> {
        self.left[index]
    }

    pub fn expectation(&self, index: usize) -> f64 {
        self.expectation[index]
    }

    /// Whether an adversary can leave the region under this belief,
    /// i.e. `p(M_r) != 1`.
    pub fn can_supply(&self, index: usize) -> bool {
        self.left[index].is_some()
    }

    /// Whether an adversary can enter the region under this belief,
    /// i.e. `p(N_r) != 1`.
    pub fn can_absorb(&self, index: usize) -> bool {
        self.entered[index].is_some()
    }

    pub fn edges(&self) -> &[BeliefEdge] {
        &self.edges
    }

    /// For each member, the largest number of redistribution events on any
    /// update path from the initial belief.
    pub fn max_redistributions(&self) -> Vec<u32> {
        let mut best: Vec<Option<u32>> = vec![None; self.members.len()];
        best[0] = Some(0);
        // Redistribution edges strictly narrow the window and shifts keep it,
        // so every cycle has weight zero and relaxation terminates.
        let mut changed = true;
        while changed {
            changed = false;
            for e in &self.edges {
                if let Some(b) = best[e.from] {
                    let cand = b + u32::from(e.redistribution);
                    if best[e.to].is_none_or(|cur| cand > cur) {
                        best[e.to] = Some(cand);
                        changed = true;
                    }
                }
            }
        }
        best.into_iter().map(|b| b.unwrap_or(0)).collect()
    }

    /// Graphviz rendering of the update tree (closure graph).
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", name.replace('"', "'"));
        let _ = writeln!(out, "  node [shape=box, fontname=\"monospace\"];");
        for (i, m) in self.members.iter().enumerate() {
            let _ = writeln!(out, "  b{i} [label=\"#{i}\\n{m}\"];");
        }
        for e in &self.edges {
            let style = if e.redistribution { ", style=bold" } else { "" };
            let _ = writeln!(out, "  b{} -> b{} [label=\"{}\"{style}];", e.from, e.to, e.direction);
        }
        out.push_str("}\n");
        out
    }
}

/// Breadth-first closure of `init` under both update rules.
///
/// `budget` caps the number of members; the closure is always finite, the
/// cap only guards against malformed inputs.
pub fn enumerate_reachable(
    init: &AdversaryDistribution,
    bounds: CountBounds,
    budget: Option<usize>,
) -> Result<BeliefSet, BeliefError> {
    if !init.within(bounds) {
        return Err(BeliefError::Invalid(format!(
            "initial window [{}..{}] outside bounds [{}..{}]",
            init.min(),
            init.max(),
            bounds.min,
            bounds.max
        )));
    }
    let mut index: HashMap<AdversaryDistribution, usize> = HashMap::new();
    let mut set = BeliefSet {
        bounds,
        members: vec![init.clone()],
        entered: vec![None],
        left: vec![None],
        expectation: vec![],
        edges: vec![],
    };
    index.insert(init.clone(), 0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(current) = queue.pop_front() {
        for direction in [Direction::Entered, Direction::Left] {
            let Ok((child, redistribution)) = set.members[current].update(direction, bounds) else {
                continue;
            };
            let child_index = match index.get(&child) {
                Some(&i) => i,
                None => {
                    let i = set.members.len();
                    if budget.is_some_and(|b| i >= b) {
                        return Err(BeliefError::BudgetExceeded(i));
                    }
                    index.insert(child.clone(), i);
                    set.members.push(child);
                    set.entered.push(None);
                    set.left.push(None);
                    queue.push_back(i);
                    i
                }
            };
            match direction {
                Direction::Entered => set.entered[current] = Some(child_index),
                Direction::Left => set.left[current] = Some(child_index),
            }
            set.edges.push(BeliefEdge { from: current, to: child_index, direction, redistribution });
        }
    }
    set.expectation = set
        .members
        .iter()
        .map(|m| m.expectation().to_f64().unwrap_or(f64::NAN))
        .collect();
    Ok(set)
}
