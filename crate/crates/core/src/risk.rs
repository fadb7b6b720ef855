//! Loss-probability model: adversary and obstacle marginals and the copula
//! that joins them into a per-primitive `p_lost(n, o)` table.

use serde::{Deserialize, Serialize};

use crate::env::{EnvError, LossTable, Region};
use crate::prob::{parse_rational, to_f64, Rational};

/// Largest adversary count covered by the default quadratic marginal.
pub const MAX_DEFAULT_ADVERSARIES: u32 = 10;

/// Default probability of losing the vehicle to `n` adversaries: `0.01 n^2`
/// on `0..=10`.
pub fn adversary_loss_marginal(n: u32) -> Result<f64, EnvError> {
    if n > MAX_DEFAULT_ADVERSARIES {
        return Err(EnvError::Domain(format!(
            "adversary count {n} outside the default marginal's domain [0, {MAX_DEFAULT_ADVERSARIES}]"
        )));
    }
    Ok(f64::from(n * n) / 100.0)
}

/// Joins an adversary marginal and an obstacle marginal:
/// `exp(-sqrt(-ln p_n - ln p_o))`, and 0 when either marginal is 0.
pub fn combine_lost_marginals(p_n: f64, p_o: f64) -> Result<f64, EnvError> {
    for (name, p) in [("adversary", p_n), ("obstacle", p_o)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(EnvError::Domain(format!("{name} marginal {p} is not a probability")));
        }
    }
    if p_n == 0.0 || p_o == 0.0 {
        return Ok(0.0);
    }
    let inner = (-p_n.ln() - p_o.ln()).max(0.0);
    Ok((-inner.sqrt()).exp())
}

/// A marginal loss probability as a function of a count or density level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    /// `coefficient * k^2`, defined while the value stays at most 1.
    Quadratic { coefficient: String },
    /// `coefficient * k`, defined while the value stays at most 1.
    Linear { coefficient: String },
    /// Explicit values keyed by level (decimal string keys).
    Table { values: std::collections::BTreeMap<String, String> },
    /// The same probability at every level.
    Constant { value: String },
}

impl Marginal {
    /// The loss marginal the case study assumes for adversaries.
    pub fn default_adversary() -> Self {
        Marginal::Quadratic { coefficient: "0.01".into() }
    }

    /// Exact value at `level`, or `None` when the level is outside the
    /// marginal's domain.
    pub fn value(&self, level: u32) -> Result<Option<Rational>, EnvError> {
        let parse = |s: &str| parse_rational(s).map_err(EnvError::Schema);
        let k = Rational::from_integer(level.into());
        let v = match self {
            Marginal::Quadratic { coefficient } => parse(coefficient)? * &k * &k,
            Marginal::Linear { coefficient } => parse(coefficient)? * &k,
            Marginal::Table { values } => {
                let mut found = None;
                for (key, v) in values {
                    let k: u32 = key
                        .trim()
                        .parse()
                        .map_err(|_| EnvError::Schema(format!("marginal table key {key:?} is not a level")))?;
                    if k == level {
                        found = Some(v);
                    }
                }
                match found {
                    Some(s) => parse(s)?,
                    None => return Ok(None),
                }
            }
            Marginal::Constant { value } => parse(value)?,
        };
        if !crate::prob::is_probability(&v) {
            return Ok(None);
        }
        Ok(Some(v))
    }
}

/// Tabulates `p_lost(n, o)` over a region's full count × density domain by
/// combining the two marginals.
pub fn build_lost_table(
    region: &Region,
    adversary: &Marginal,
    obstacle: &Marginal,
) -> Result<LossTable, EnvError> {
    let lookup = |m: &Marginal, level: u32, what: &str| -> Result<f64, EnvError> {
        m.value(level)?.map(|v| to_f64(&v)).ok_or_else(|| {
            EnvError::Validation(format!(
                "{what} loss marginal is undefined at level {level} needed by region {}",
                region.id
            ))
        })
    };
    let mut table = LossTable::zeros(region.bounds.min, region.bounds.max, region.max_obstacle);
    for n in region.bounds.min..=region.bounds.max {
        let p_n = lookup(adversary, n, "adversary")?;
        for o in 0..=region.max_obstacle {
            let p_o = lookup(obstacle, o, "obstacle")?;
            table.set(n, o, combine_lost_marginals(p_n, p_o)?);
        }
    }
    Ok(table)
}
