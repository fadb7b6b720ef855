//! Shared fixtures: fuzzed environments, random small MDPs, a brute-force
//! reachability oracle and the two-step toy MDP.
#![allow(dead_code)]

use std::path::PathBuf;

use hostile_mdp::mdp::{Action, Labels, MdpBuilder};
use hostile_mdp::{AdversaryDistribution, Environment, Mdp};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn load(name: &str) -> Environment {
    Environment::load(data(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Random pmf over `len` slots as fraction strings; at least one slot is
/// positive.
fn random_pmf(rng: &mut ChaCha8Rng, len: usize) -> Vec<String> {
    let mut w: Vec<u32> = (0..len).map(|_| rng.random_range(0..5)).collect();
    if w.iter().all(|&x| x == 0) {
        let i = rng.random_range(0..len);
        w[i] = 1;
    }
    let total: u32 = w.iter().sum();
    w.iter().map(|x| format!("{x}/{total}")).collect()
}

fn pmf_map(min: u32, pmf: &[String]) -> Value {
    let map: serde_json::Map<String, Value> =
        pmf.iter().enumerate().map(|(i, p)| ((min + i as u32).to_string(), json!(p))).collect();
    Value::Object(map)
}

fn rate(rng: &mut ChaCha8Rng) -> f64 {
    // Multiples of 1/64 in (0, 1].
    f64::from(rng.random_range(1..=64u32)) / 64.0
}

/// Environment JSON with 2..=5 regions, counts within 0..=4, random rates,
/// pmfs, adjacency, self-loops, losses and occasional uncertain exits.
pub fn fuzz_env_json(seed: u64) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(2..=5usize);
    let mut regions = Vec::new();
    for i in 0..k {
        let (min, max) = if i == 0 {
            (0, 0)
        } else {
            let min = rng.random_range(0..=2u32);
            (min, rng.random_range(min..=(min + 2).min(4)))
        };
        let pmf = if i == 0 { vec!["1".to_string()] } else { random_pmf(&mut rng, (max - min + 1) as usize) };
        let max_o = if i == 0 { 0 } else { rng.random_range(0..=2u32) };
        let opmf = random_pmf(&mut rng, max_o as usize + 1);
        regions.push(json!({
            "id": format!("r{i}"),
            "adversaries": {"min": min, "max": max, "init": pmf_map(min, &pmf)},
            "obstacles": {"max": max_o, "pmf": pmf_map(0, &opmf)},
            "mu_leave": rate(&mut rng),
            "mu_enter": rate(&mut rng),
            "traversal_rate": rate(&mut rng),
        }));
    }
    let pickup = rng.random_range(0..k);
    let dropoff = rng.random_range(0..k);
    regions[pickup]["labels"] = json!(["pickup"]);
    if dropoff == pickup {
        regions[dropoff]["labels"] = json!(["pickup", "dropoff"]);
    } else {
        regions[dropoff]["labels"] = json!(["dropoff"]);
    }

    // Spanning tree plus a few extra edges, at most one facet per pair, and
    // some outer facets.
    let mut edges: Vec<(usize, usize)> = (1..k).map(|i| (rng.random_range(0..i), i)).collect();
    for a in 0..k {
        for b in a + 1..k {
            if !edges.contains(&(a, b)) && rng.random_bool(0.2) {
                edges.push((a, b));
            }
        }
    }
    let mut facets: Vec<(String, Vec<usize>)> = vec![("f0".into(), vec![0])];
    for (a, b) in edges {
        facets.push((format!("f{}", facets.len()), vec![a, b]));
    }
    for r in 1..k {
        if rng.random_bool(0.3) {
            facets.push((format!("f{}", facets.len()), vec![r]));
        }
    }

    let mut primitives = Vec::new();
    for r in 0..k {
        let own: Vec<usize> = (0..facets.len()).filter(|&f| facets[f].1.contains(&r)).collect();
        for &a in &own {
            for &b in &own {
                let keep = if a == b { rng.random_bool(0.15) } else { rng.random_bool(0.7) || (a == 0 && r == 0) };
                if !keep {
                    continue;
                }
                let mut p = json!({"from": facets[a].0, "to": facets[b].0, "region": format!("r{r}")});
                if rng.random_bool(0.3) {
                    p["rate"] = json!(rate(&mut rng));
                }
                if own.len() > 1 && rng.random_bool(0.1) {
                    let other = own[rng.random_range(0..own.len())];
                    if other != b {
                        p["outcomes"] = json!({facets[b].0.clone(): "3/4", facets[other].0.clone(): "1/4"});
                    }
                }
                primitives.push(p);
            }
        }
    }

    let levels: serde_json::Map<String, Value> = (0..=2u32)
        .map(|o| (o.to_string(), json!(format!("{}/{}", rng.random_range(0..=8u32), 8))))
        .collect();
    json!({
        "name": format!("fuzz-{seed}"),
        "loss_model": {
            "adversary": {"kind": "quadratic", "coefficient": "0.01"},
            "obstacle": {"kind": "table", "values": levels},
        },
        "regions": regions,
        "facets": facets.iter().map(|(id, rs)| json!({
            "id": id,
            "regions": rs.iter().map(|r| format!("r{r}")).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "primitives": primitives,
        "init": {"facet": "f0", "region": "r0"},
    })
}

pub fn fuzz_env(seed: u64) -> Environment {
    let text = fuzz_env_json(seed).to_string();
    Environment::from_json_str(&text).unwrap_or_else(|e| panic!("fuzz env {seed}: {e}\n{text}"))
}

/// Random distribution on a window of width `width` starting at `min`.
pub fn random_distribution(rng: &mut ChaCha8Rng, min: u32, width: u32) -> AdversaryDistribution {
    let w: Vec<i64> = (0..=width).map(|_| rng.random_range(0..6)).collect();
    let mut w = w;
    if w.iter().all(|&x| x == 0) {
        w[0] = 1;
    }
    let total: i64 = w.iter().sum();
    let pmf = w.iter().map(|&x| BigRational::new(BigInt::from(x), BigInt::from(total))).collect();
    AdversaryDistribution::new(min, pmf).expect("valid pmf")
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// A reachability instance: MDP plus constraint and target predicates.
pub struct SmallMdp {
    pub mdp: Mdp,
    pub allowed: Vec<bool>,
    pub target: Vec<bool>,
}

/// Random MDP with 1..=6 states and 0..=2 choices per state.
pub fn random_mdp(seed: u64) -> SmallMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=6usize);
    let mut b = MdpBuilder::new(n, 0);
    for s in 0..n {
        b.label(s, Labels::ALIVE);
        for a in 0..rng.random_range(0..=2u32) {
            let mut w: Vec<u32> = (0..n).map(|_| if rng.random_bool(0.5) { rng.random_range(1..=9) } else { 0 }).collect();
            if w.iter().all(|&x| x == 0) {
                let t = rng.random_range(0..n);
                w[t] = 1;
            }
            let total: u32 = w.iter().sum();
            let row: Vec<(usize, f64)> = w
                .iter()
                .enumerate()
                .filter(|(_, &x)| x > 0)
                .map(|(t, &x)| (t, f64::from(x) / f64::from(total)))
                .collect();
            b.choice(s, Action::Primitive(a), &row);
        }
    }
    let target: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
    let allowed: Vec<bool> = (0..n).map(|_| rng.random_bool(0.8)).collect();
    SmallMdp { mdp: b.build(), allowed, target }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// `Pr[allowed U target]` on the chain induced by a memoryless policy
/// (`None` = no choice): graph pruning, then one linear solve.
pub fn chain_reach(inst: &SmallMdp, policy: &[Option<usize>]) -> Vec<f64> {
    let mdp = &inst.mdp;
    let n = mdp.num_states();
    let succ = |s: usize| -> Vec<(usize, f64)> {
        match policy[s] {
            Some(k) if !inst.target[s] && inst.allowed[s] => {
                mdp.row(s, k).iter().map(|t| (t.target as usize, t.prob)).collect()
            }
            _ => Vec::new(),
        }
    };
    // States that reach the target in the chain's graph.
    let mut reach = inst.target.clone();
    let mut changed = true;
    while changed {
        changed = false;
        for s in 0..n {
            if !reach[s] && succ(s).iter().any(|&(t, p)| p > 0.0 && reach[t]) {
                reach[s] = true;
                changed = true;
            }
        }
    }
    let unknown: Vec<usize> = (0..n).filter(|&s| reach[s] && !inst.target[s]).collect();
    let pos = |s: usize| unknown.iter().position(|&u| u == s);
    let m = unknown.len();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for (i, &s) in unknown.iter().enumerate() {
        a[i][i] += 1.0;
        for (t, p) in succ(s) {
            if inst.target[t] {
                b[i] += p;
            } else if let Some(j) = pos(t) {
                a[i][j] -= p;
            }
        }
    }
    let x = if m > 0 { solve_dense(a, b) } else { Vec::new() };
    (0..n)
        .map(|s| {
            if inst.target[s] {
                1.0
            } else {
                pos(s).map_or(0.0, |i| x[i])
            }
        })
        .collect()
}

/// Pmax by enumerating every memoryless deterministic policy.
pub fn oracle_pmax(inst: &SmallMdp) -> Vec<f64> {
    let mdp = &inst.mdp;
    let n = mdp.num_states();
    let arity: Vec<usize> = (0..n).map(|s| mdp.choices(s).len()).collect();
    let mut best = vec![0.0f64; n];
    let mut pick: Vec<usize> = vec![0; n];
    loop {
        let policy: Vec<Option<usize>> = (0..n).map(|s| (arity[s] > 0).then_some(pick[s])).collect();
        for (b, v) in best.iter_mut().zip(chain_reach(inst, &policy)) {
            *b = b.max(v);
        }
        // Odometer over choice indices.
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            if arity[i] > 1 && pick[i] + 1 < arity[i] {
                pick[i] += 1;
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}

/// The two-step toy MDP: `s0 -a1-> s1`, `s1 -a2-> {s1: .1, s2: .5, s3: .4}`.
pub fn toy_mdp() -> Mdp {
    let mut b = MdpBuilder::new(4, 0).action_names(vec!["a1".into(), "a2".into()]);
    for s in 0..4 {
        b.label(s, Labels::ALIVE);
    }
    b.choice(0, Action::Primitive(0), &[(1, 1.0)]);
    b.choice(1, Action::Primitive(1), &[(1, 0.1), (2, 0.5), (3, 0.4)]);
    b.build()
}
