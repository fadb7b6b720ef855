//! Environment description: regions, facets, motion primitives and their
//! statistics, loaded from a JSON file and validated.
//!
//! See `docs/environment-format.md` at the workspace root for the file
//! schema; `crates/core/data/fig2_city_caseA.json` is the reference instance.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{AdversaryDistribution, CountBounds};
use crate::prob::{is_probability, parse_rational, to_f64, Rational};
use crate::risk::{build_lost_table, Marginal};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("cannot read environment file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed environment file: {0}")]
    Parse(String),
    #[error("invalid environment: {0}")]
    Validation(String),
    #[error("bad value: {0}")]
    Schema(String),
    #[error("domain error: {0}")]
    Domain(String),
}

fn invalid(msg: impl Into<String>) -> EnvError {
    EnvError::Validation(msg.into())
}

pub type RegionIndex = usize;
pub type FacetIndex = usize;
pub type PrimitiveIndex = usize;

#[derive(Debug, Clone)]
pub struct Region {
    pub id: String,
    pub bounds: CountBounds,
    pub init: AdversaryDistribution,
    pub max_obstacle: u32,
    /// Obstacle-density pmf on `0..=max_obstacle`.
    pub obstacles: Vec<Rational>,
    /// Per-adversary departure rate.
    pub mu_leave: f64,
    /// Arrival rate per expected adversary in a neighbor.
    pub mu_enter: f64,
    pub pickup: bool,
    pub dropoff: bool,
}

impl Region {
    /// A region with no obstacles, static adversaries and no labels.
    pub fn new(id: &str, bounds: CountBounds, init: AdversaryDistribution, max_obstacle: u32) -> Self {
        let mut obstacles = vec![Rational::zero(); max_obstacle as usize + 1];
        obstacles[0] = Rational::one();
        Self {
            id: id.to_string(),
            bounds,
            init,
            max_obstacle,
            obstacles,
            mu_leave: 0.0,
            mu_enter: 0.0,
            pickup: false,
            dropoff: false,
        }
    }

    pub fn obstacle_prob(&self, o: u32) -> f64 {
        self.obstacles.get(o as usize).map(to_f64).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Facet {
    pub id: String,
    /// One region for an outer facet, two for a shared one.
    pub regions: Vec<RegionIndex>,
}

/// `p_lost(n, o)` over `[min_n..=max_n] x [0..=max_o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTable {
    min_n: u32,
    max_n: u32,
    max_o: u32,
    values: Vec<f64>,
}

impl LossTable {
    pub fn zeros(min_n: u32, max_n: u32, max_o: u32) -> Self {
        let len = ((max_n - min_n + 1) * (max_o + 1)) as usize;
        Self { min_n, max_n, max_o, values: vec![0.0; len] }
    }

    fn offset(&self, n: u32, o: u32) -> usize {
        assert!(
            (self.min_n..=self.max_n).contains(&n) && o <= self.max_o,
            "loss table lookup ({n}, {o}) outside [{}..{}] x [0..{}]",
            self.min_n,
            self.max_n,
            self.max_o
        );
        ((n - self.min_n) * (self.max_o + 1) + o) as usize
    }

    pub fn get(&self, n: u32, o: u32) -> f64 {
        self.values[self.offset(n, o)]
    }

    pub fn set(&mut self, n: u32, o: u32, p: f64) {
        let i = self.offset(n, o);
        self.values[i] = p;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone)]
pub struct MotionPrimitive {
    pub from: FacetIndex,
    pub to: FacetIndex,
    pub region: RegionIndex,
    /// Traversal rate `lambda`.
    pub rate: f64,
    pub loss: LossTable,
    /// Exit facets and their probabilities; a single `(to, 1.0)` entry for
    /// a deterministic primitive.
    pub outcomes: Vec<(FacetIndex, f64)>,
}

/// A validated environment. Immutable after loading.
#[derive(Debug, Clone)]
pub struct Environment {
    pub name: String,
    pub notes: Vec<String>,
    pub regions: Vec<Region>,
    pub facets: Vec<Facet>,
    pub primitives: Vec<MotionPrimitive>,
    pub init_facet: FacetIndex,
    pub init_region: RegionIndex,
    pub pickup: RegionIndex,
    pub dropoff: RegionIndex,
    /// Regions sharing a facet with each region, in ascending index order.
    pub adjacency: Vec<Vec<RegionIndex>>,
    /// Non-fatal findings from validation.
    pub warnings: Vec<String>,
}

impl Environment {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| EnvError::Io { path: path.to_path_buf(), source })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, EnvError> {
        let file: EnvironmentFile =
            serde_json::from_str(text).map_err(|e| EnvError::Parse(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn region_index(&self, id: &str) -> Option<RegionIndex> {
        self.regions.iter().position(|r| r.id == id)
    }

    pub fn facet_index(&self, id: &str) -> Option<FacetIndex> {
        self.facets.iter().position(|f| f.id == id)
    }

    /// The region entered when crossing `facet` out of `region`; `region`
    /// itself for an outer facet.
    pub fn region_across(&self, facet: FacetIndex, region: RegionIndex) -> RegionIndex {
        self.facets[facet].regions.iter().copied().find(|&r| r != region).unwrap_or(region)
    }

    /// Primitives usable at `facet` while heading through `region`, in
    /// ascending index order.
    pub fn primitives_from(&self, facet: FacetIndex, region: RegionIndex) -> impl Iterator<Item = PrimitiveIndex> + '_ {
        self.primitives
            .iter()
            .enumerate()
            .filter(move |(_, p)| p.from == facet && p.region == region)
            .map(|(i, _)| i)
    }

    pub fn primitive_name(&self, index: PrimitiveIndex) -> String {
        let p = &self.primitives[index];
        format!("{}->{}@{}", self.facets[p.from].id, self.facets[p.to].id, self.regions[p.region].id)
    }

    /// Copy with every traversal, arrival and departure rate multiplied by
    /// `factor`.
    pub fn scale_rates(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.regions {
            r.mu_leave *= factor;
            r.mu_enter *= factor;
        }
        for p in &mut out.primitives {
            p.rate *= factor;
        }
        out
    }

    pub fn from_file(file: &EnvironmentFile) -> Result<Self, EnvError> {
        let mut warnings = Vec::new();

        let mut region_ids = HashMap::new();
        for (i, r) in file.regions.iter().enumerate() {
            if region_ids.insert(r.id.as_str(), i).is_some() {
                return Err(invalid(format!("duplicate region id {}", r.id)));
            }
        }
        let mut facet_ids = HashMap::new();
        for (i, f) in file.facets.iter().enumerate() {
            if facet_ids.insert(f.id.as_str(), i).is_some() {
                return Err(invalid(format!("duplicate facet id {}", f.id)));
            }
        }
        let region_of = |id: &str, ctx: &str| {
            region_ids.get(id).copied().ok_or_else(|| invalid(format!("{ctx} references unknown region {id}")))
        };
        let facet_of = |id: &str, ctx: &str| {
            facet_ids.get(id).copied().ok_or_else(|| invalid(format!("{ctx} references unknown facet {id}")))
        };

        let regions = file
            .regions
            .iter()
            .map(|spec| spec.resolve())
            .collect::<Result<Vec<_>, _>>()?;
        if regions.is_empty() {
            return Err(invalid("environment has no regions"));
        }

        let mut facets = Vec::with_capacity(file.facets.len());
        for spec in &file.facets {
            let ctx = format!("facet {}", spec.id);
            let mut bounded = spec
                .regions
                .iter()
                .map(|r| region_of(r, &ctx))
                .collect::<Result<Vec<_>, _>>()?;
            bounded.sort_unstable();
            bounded.dedup();
            if bounded.is_empty() || bounded.len() > 2 || bounded.len() != spec.regions.len() {
                return Err(invalid(format!(
                    "facet {} must bound one region or two distinct regions, got {:?}",
                    spec.id, spec.regions
                )));
            }
            facets.push(Facet { id: spec.id.clone(), regions: bounded });
        }

        let mut adjacency = vec![Vec::new(); regions.len()];
        for f in &facets {
            if let [a, b] = f.regions[..] {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        for (r, list) in adjacency.iter().enumerate() {
            if list.iter().any(|&q| !adjacency[q].contains(&r)) {
                return Err(invalid(format!("adjacency of region {} is not symmetric", regions[r].id)));
            }
        }

        let bounds_ok = |f: FacetIndex, r: RegionIndex| facets[f].regions.contains(&r);
        let loss_model = file.loss_model.clone().unwrap_or_default();
        let mut primitives = Vec::with_capacity(file.primitives.len());
        for (k, spec) in file.primitives.iter().enumerate() {
            let ctx = format!("primitive #{k} ({} -> {})", spec.from, spec.to);
            let from = facet_of(&spec.from, &ctx)?;
            let to = facet_of(&spec.to, &ctx)?;
            let region = match &spec.region {
                Some(id) => region_of(id, &ctx)?,
                None => {
                    let shared: Vec<_> =
                        facets[from].regions.iter().copied().filter(|r| facets[to].regions.contains(r)).collect();
                    match shared[..] {
                        [r] => r,
                        [] => return Err(invalid(format!("{ctx}: facets {} and {} bound no common region", spec.from, spec.to))),
                        _ => return Err(invalid(format!("{ctx}: region is ambiguous, name it explicitly"))),
                    }
                }
            };
            let rid = &regions[region].id;
            if !bounds_ok(from, region) {
                return Err(invalid(format!("{ctx}: facet {} does not bound region {rid}", spec.from)));
            }
            if !bounds_ok(to, region) {
                return Err(invalid(format!("{ctx}: facet {} does not bound region {rid}", spec.to)));
            }
            let rate = spec
                .rate
                .or(file.regions[region].traversal_rate)
                .ok_or_else(|| invalid(format!("{ctx}: no rate and region {rid} has no traversal_rate")))?;
            if !(rate.is_finite() && rate > 0.0) {
                return Err(invalid(format!("{ctx}: rate {rate} must be positive")));
            }
            let loss = spec.loss.clone().unwrap_or(LossSpec::Marginals {
                adversary: None,
                obstacle: None,
            });
            let loss = loss.resolve(&regions[region], &loss_model, &ctx)?;
            let outcomes = match &spec.outcomes {
                None => vec![(to, 1.0)],
                Some(map) => {
                    let mut total = Rational::zero();
                    let mut out = Vec::new();
                    for (fid, p) in map {
                        let f = facet_of(fid, &ctx)?;
                        if !bounds_ok(f, region) {
                            return Err(invalid(format!("{ctx}: outcome facet {fid} does not bound region {rid}")));
                        }
                        let p = parse_rational(p).map_err(|e| invalid(format!("{ctx}: {e}")))?;
                        if !is_probability(&p) {
                            return Err(invalid(format!("{ctx}: outcome probability {p} out of range")));
                        }
                        total += &p;
                        if !p.is_zero() {
                            out.push((f, to_f64(&p)));
                        }
                    }
                    if !total.is_one() {
                        return Err(invalid(format!("{ctx}: outcome probabilities sum to {total}, not 1")));
                    }
                    out.sort_by_key(|&(f, _)| f);
                    out
                }
            };
            primitives.push(MotionPrimitive { from, to, region, rate, loss, outcomes });
        }

        let init_facet = facet_of(&file.init.facet, "init")?;
        let init_region = region_of(&file.init.region, "init")?;
        if !bounds_ok(init_facet, init_region) {
            return Err(invalid(format!(
                "initial facet {} does not bound initial region {}",
                file.init.facet, file.init.region
            )));
        }
        let start = &regions[init_region];
        if !start.init.is_certain(0) {
            return Err(invalid(format!(
                "initial region {} must start with no adversaries (p_init(0) = 1)",
                start.id
            )));
        }
        if !start.obstacles[0].is_one() {
            warnings.push(format!(
                "initial region {} has nonzero obstacle density; the initial state still records density 0",
                start.id
            ));
        }

        let pick = |flag: fn(&Region) -> bool, name: &str| {
            let found: Vec<_> = regions.iter().enumerate().filter(|(_, r)| flag(r)).map(|(i, _)| i).collect();
            match found[..] {
                [i] => Ok(i),
                _ => Err(invalid(format!("exactly one region must carry the {name} label, found {}", found.len()))),
            }
        };
        let pickup = pick(|r| r.pickup, "pickup")?;
        let dropoff = pick(|r| r.dropoff, "dropoff")?;

        Ok(Self {
            name: file.name.clone(),
            notes: file.notes.clone(),
            regions,
            facets,
            primitives,
            init_facet,
            init_region,
            pickup,
            dropoff,
            adjacency,
            warnings,
        })
    }
}

// ---------------------------------------------------------------------------
// File schema

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentFile {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_model: Option<LossModelSpec>,
    pub regions: Vec<RegionSpec>,
    pub facets: Vec<FacetSpec>,
    pub primitives: Vec<PrimitiveSpec>,
    pub init: InitSpec,
}

/// Environment-wide marginals used by primitives that give no `loss`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossModelSpec {
    #[serde(default = "Marginal::default_adversary")]
    pub adversary: Marginal,
    pub obstacle: Marginal,
}

impl Default for LossModelSpec {
    fn default() -> Self {
        Self { adversary: Marginal::default_adversary(), obstacle: Marginal::Constant { value: "1".into() } }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub id: String,
    pub adversaries: AdversarySpec,
    #[serde(default)]
    pub obstacles: ObstacleSpec,
    #[serde(default)]
    pub mu_leave: f64,
    #[serde(default)]
    pub mu_enter: f64,
    /// Default rate for primitives inside this region.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traversal_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub min: u32,
    pub max: u32,
    /// Initial pmf keyed by count; omitted counts have probability 0.
    pub init: BTreeMap<u32, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub max: u32,
    pub pmf: BTreeMap<u32, String>,
}

impl Default for ObstacleSpec {
    fn default() -> Self {
        Self { max: 0, pmf: BTreeMap::from([(0, "1".to_string())]) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacetSpec {
    pub id: String,
    pub regions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveSpec {
    pub from: String,
    pub to: String,
    /// Needed only when the two facets bound more than one common region.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossSpec>,
    /// Exit-facet distribution for a probabilistic primitive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LossSpec {
    /// Full table as `[n, o, "p"]` triples.
    Table { table: Vec<(u32, u32, String)> },
    /// Marginals combined by the copula; missing ones fall back to the
    /// environment's `loss_model`.
    Marginals {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        adversary: Option<Marginal>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        obstacle: Option<Marginal>,
    },
}

impl LossSpec {
    fn resolve(&self, region: &Region, model: &LossModelSpec, ctx: &str) -> Result<LossTable, EnvError> {
        match self {
            LossSpec::Marginals { adversary, obstacle } => build_lost_table(
                region,
                adversary.as_ref().unwrap_or(&model.adversary),
                obstacle.as_ref().unwrap_or(&model.obstacle),
            )
            .map_err(|e| invalid(format!("{ctx}: {e}"))),
            LossSpec::Table { table } => {
                let (lo, hi, max_o) = (region.bounds.min, region.bounds.max, region.max_obstacle);
                let mut out = LossTable::zeros(lo, hi, max_o);
                let mut seen = vec![false; out.values.len()];
                for (n, o, p) in table {
                    if !(lo..=hi).contains(n) || *o > max_o {
                        return Err(invalid(format!(
                            "{ctx}: loss entry ({n}, {o}) outside [{lo}..{hi}] x [0..{max_o}] of region {}",
                            region.id
                        )));
                    }
                    let p = parse_rational(p).map_err(|e| invalid(format!("{ctx}: {e}")))?;
                    if !is_probability(&p) {
                        return Err(invalid(format!("{ctx}: loss probability {p} out of range")));
                    }
                    let i = out.offset(*n, *o);
                    seen[i] = true;
                    out.values[i] = to_f64(&p);
                }
                if let Some(i) = seen.iter().position(|s| !s) {
                    let n = lo + i as u32 / (max_o + 1);
                    let o = i as u32 % (max_o + 1);
                    return Err(invalid(format!("{ctx}: loss table has no entry for ({n}, {o})")));
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub facet: String,
    pub region: String,
}

fn pmf_from_map(
    map: &BTreeMap<u32, String>,
    lo: u32,
    hi: u32,
    what: &str,
) -> Result<Vec<Rational>, EnvError> {
    let mut pmf = vec![Rational::zero(); (hi - lo + 1) as usize];
    for (&k, v) in map {
        if k < lo || k > hi {
            return Err(invalid(format!("{what}: entry {k} outside [{lo}..{hi}]")));
        }
        let p = parse_rational(v).map_err(|e| invalid(format!("{what}: {e}")))?;
        if !is_probability(&p) {
            return Err(invalid(format!("{what}: probability {p} out of range")));
        }
        pmf[(k - lo) as usize] = p;
    }
    let total: Rational = pmf.iter().sum();
    if !total.is_one() {
        return Err(invalid(format!("{what}: probabilities sum to {total}, not exactly 1")));
    }
    Ok(pmf)
}

impl RegionSpec {
    fn resolve(&self) -> Result<Region, EnvError> {
        let a = &self.adversaries;
        let bounds = CountBounds::new(a.min, a.max)
            .map_err(|e| invalid(format!("region {}: {e}", self.id)))?;
        let pmf = pmf_from_map(&a.init, a.min, a.max, &format!("region {} adversary pmf", self.id))?;
        // The initial belief's window is the full [M_r..N_r], zeros included.
        let init = AdversaryDistribution::new(a.min, pmf)
            .map_err(|e| invalid(format!("region {}: {e}", self.id)))?;
        let obstacles =
            pmf_from_map(&self.obstacles.pmf, 0, self.obstacles.max, &format!("region {} obstacle pmf", self.id))?;
        for (name, rate) in [("mu_leave", self.mu_leave), ("mu_enter", self.mu_enter)] {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(invalid(format!("region {}: {name} = {rate} must be nonnegative", self.id)));
            }
        }
        let mut pickup = false;
        let mut dropoff = false;
        for label in &self.labels {
            match label.as_str() {
                "pickup" => pickup = true,
                "dropoff" => dropoff = true,
                other => return Err(invalid(format!("region {}: unknown label {other:?}", self.id))),
            }
        }
        Ok(Region {
            id: self.id.clone(),
            bounds,
            init,
            max_obstacle: self.obstacles.max,
            obstacles,
            mu_leave: self.mu_leave,
            mu_enter: self.mu_enter,
            pickup,
            dropoff,
        })
    }
}
