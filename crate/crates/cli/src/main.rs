use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hostile_mdp::belief::enumerate_reachable;
use hostile_mdp::mdp::{export_prism, load_dump, save_dump, validate};
use hostile_mdp::sim::{simulate_indexed, write_trace_csv, DEFAULT_STEP_LIMIT, TRACE_CSV_HEADER};
use hostile_mdp::{
    build_mdp, estimate_success, synthesize_mission, BuildOptions, Environment, LostMode, Mdp, Method,
    MissionStrategy, ViOptions,
};
use serde_json::json;

/// Builds the belief MDP of a vehicle in a hostile partitioned environment,
/// synthesizes the pick-up/drop-off strategy and checks it by simulation.
#[derive(Debug, Parser)]
#[command(name = "hostile-mdp", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "HOSTILE_MDP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and validate an environment file.
    ValidateEnv {
        #[arg(long)]
        env: PathBuf,
    },
    /// Enumerate reachable adversary beliefs of one or all regions.
    Beliefs {
        #[arg(long)]
        env: PathBuf,
        /// Region id; all regions when omitted.
        #[arg(long)]
        region: Option<String>,
        /// Write the update tree of `--region` as Graphviz DOT.
        #[arg(long, requires = "region")]
        dot: Option<PathBuf>,
    },
    /// Build and validate the MDP.
    Build {
        #[command(flatten)]
        model: ModelArgs,
        /// Write the MDP as a JSON dump.
        #[arg(long)]
        dump_mdp: Option<PathBuf>,
    },
    /// Synthesize the mission strategy.
    Synthesize {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write values and strategy as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the strategy as a table.
        #[arg(long)]
        table: bool,
    },
    /// Estimate the success probability of the synthesized strategy.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 100_000)]
        runs: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
        step_limit: usize,
        /// Write traces as CSV (run, step, state, action, event, outcome).
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Number of runs written to `--trace-out`.
        #[arg(long, default_value_t = 100)]
        trace_runs: u64,
    },
    /// Export the MDP in PRISM explicit format (.sta, .tra, .lab, .props).
    Export {
        #[command(flatten)]
        model: ModelArgs,
        /// Output path without extension.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "source")]
struct Source {
    /// Environment file.
    #[arg(long)]
    env: Option<PathBuf>,
    /// MDP dump written by `build --dump-mdp`.
    #[arg(long)]
    mdp: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[command(flatten)]
    source: Source,
    /// Merge all lost states into one sink.
    #[arg(long)]
    merge_lost: bool,
    /// Lost-state representation (overrides `--merge-lost`).
    #[arg(long, value_enum)]
    lost_mode: Option<LostArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LostArg {
    Literal,
    PerEntry,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Vi,
    Lp,
    Both,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Vi)]
    method: MethodArg,
    /// Value-iteration stopping threshold on the largest change per sweep.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
}

impl ModelArgs {
    fn lost_mode(&self) -> LostMode {
        match (self.lost_mode, self.merge_lost) {
            (Some(LostArg::Literal), _) => LostMode::Literal,
            (Some(LostArg::PerEntry), _) => LostMode::PerEntry,
            (Some(LostArg::Global), _) | (None, true) => LostMode::Global,
            (None, false) => LostMode::Literal,
        }
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "env": self.source.env.as_ref().map(|p| p.display().to_string()),
            "mdp": self.source.mdp.as_ref().map(|p| p.display().to_string()),
            "lost_mode": format!("{:?}", self.lost_mode()).to_lowercase(),
        })
    }

    fn load(&self) -> Result<Mdp> {
        if let Some(path) = &self.source.mdp {
            let mdp = load_dump(path)?;
            eprintln!("loaded {mdp} from {}", path.display());
            return Ok(mdp);
        }
        let path = self.source.env.as_ref().expect("clap enforces a source");
        let env = load_env(path)?;
        let start = Instant::now();
        let out = build_mdp(&env, &BuildOptions { lost_mode: self.lost_mode(), ..Default::default() })?;
        for w in &out.warnings {
            eprintln!("warning: {w}");
        }
        eprintln!("built {} in {:.2?}", out.mdp, start.elapsed());
        Ok(out.mdp)
    }
}

impl SolverArgs {
    fn options(&self) -> Result<ViOptions> {
        if !(self.tol > 0.0) {
            bail!("--tol must be positive");
        }
        Ok(ViOptions { tol: self.tol, max_iter: self.max_iter, parallel: true })
    }
}

fn load_env(path: &Path) -> Result<Environment> {
    Environment::load(path).with_context(|| format!("cannot load environment {}", path.display()))
}

fn config_line(command: &str, threads: usize, extra: serde_json::Value) {
    let mut cfg = json!({ "command": command, "threads": threads });
    if let (Some(obj), serde_json::Value::Object(more)) = (cfg.as_object_mut(), extra) {
        obj.extend(more);
    }
    eprintln!("config: {cfg}");
}

fn merge(a: serde_json::Value, b: serde_json::Value) -> serde_json::Value {
    let mut a = a;
    if let (Some(obj), serde_json::Value::Object(more)) = (a.as_object_mut(), b) {
        obj.extend(more);
    }
    a
}

fn synthesize(mdp: &Mdp, solver: &SolverArgs) -> Result<MissionStrategy> {
    let options = solver.options()?;
    let run = |method| -> Result<MissionStrategy> {
        let start = Instant::now();
        let m = synthesize_mission(mdp, method, &options)?;
        eprintln!(
            "{method}: value {:.9} ({} + {} iterations) in {:.2?}",
            m.value,
            m.phase1.iterations,
            m.phase2.iterations,
            start.elapsed()
        );
        Ok(m)
    };
    match solver.method {
        MethodArg::Vi => run(Method::Vi),
        MethodArg::Lp => run(Method::Lp),
        MethodArg::Both => {
            let vi = run(Method::Vi)?;
            let lp = run(Method::Lp)?;
            let gap = vi
                .phase1
                .values
                .iter()
                .zip(&lp.phase1.values)
                .chain(vi.phase2.values.iter().zip(&lp.phase2.values))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            println!("max |vi - lp| over states and phases: {gap:.3e}");
            if gap > 1e-6 {
                bail!("value iteration and LP disagree by {gap:.3e}");
            }
            Ok(vi)
        }
    }
}

fn strategy_json(mdp: &Mdp, m: &MissionStrategy) -> serde_json::Value {
    let phase = |r: &hostile_mdp::SynthesisResult| {
        let map: serde_json::Map<String, serde_json::Value> = r
            .policy
            .defined()
            .map(|(s, k)| (s.to_string(), json!(mdp.action_name(mdp.choices(s)[k].action))))
            .collect();
        map
    };
    json!({
        "value": m.value,
        "feasible": m.feasible,
        "init": m.init,
        "phase1_value": m.phase1.values[m.init],
        "phase2_value": m.phase2_value(),
        "method": m.phase1.method,
        "states": mdp.num_states(),
        "strategy": { "phase1": phase(&m.phase1), "phase2": phase(&m.phase2) },
        "values": { "phase1": m.phase1.values, "phase2": m.phase2.values },
    })
}

fn execute(cli: Cli, threads: usize) -> Result<()> {
    match cli.command {
        Command::ValidateEnv { env } => {
            config_line("validate-env", threads, json!({ "env": env.display().to_string() }));
            let e = load_env(&env)?;
            for w in &e.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{}: {} regions, {} facets, {} primitives, {} warnings",
                env.display(),
                e.regions.len(),
                e.facets.len(),
                e.primitives.len(),
                e.warnings.len()
            );
        }
        Command::Beliefs { env, region, dot } => {
            config_line("beliefs", threads, json!({ "env": env.display().to_string(), "region": region }));
            let e = load_env(&env)?;
            let selected: Vec<usize> = match &region {
                Some(id) => vec![e.region_index(id).with_context(|| format!("unknown region {id}"))?],
                None => (0..e.regions.len()).collect(),
            };
            for r in selected {
                let reg = &e.regions[r];
                let set = enumerate_reachable(&reg.init, reg.bounds, None)?;
                println!("region {} [{}..{}]: {} beliefs", reg.id, reg.bounds.min, reg.bounds.max, set.len());
                println!("  {:>4}  {:>6}  {:>6}  {:>9}  pmf", "#", "+1", "-1", "mean");
                let show = |x: Option<usize>| x.map_or("-".to_string(), |v| v.to_string());
                for (i, m) in set.members().iter().enumerate() {
                    println!(
                        "  {i:>4}  {:>6}  {:>6}  {:>9.4}  {m}",
                        show(set.entered(i)),
                        show(set.left(i)),
                        set.expectation(i)
                    );
                }
                if let Some(path) = &dot {
                    std::fs::write(path, set.to_dot(&reg.id)).with_context(|| format!("cannot write {}", path.display()))?;
                    eprintln!("wrote {}", path.display());
                }
            }
        }
        Command::Build { model, dump_mdp } => {
            config_line("build", threads, merge(model.describe(), json!({ "dump_mdp": dump_mdp })));
            let mdp = model.load()?;
            let violations = validate(&mdp);
            for v in violations.iter().take(20) {
                eprintln!("violation: {v}");
            }
            let lost = (0..mdp.num_states()).filter(|&s| !mdp.has_label(s, hostile_mdp::mdp::Labels::ALIVE)).count();
            println!(
                "states {} (alive {}, lost {}), choices {}, transitions {}",
                mdp.num_states(),
                mdp.num_states() - lost,
                lost,
                mdp.num_choices(),
                mdp.num_transitions()
            );
            if let Some(path) = dump_mdp {
                save_dump(&mdp, &path)?;
                eprintln!("wrote {}", path.display());
            }
            if !violations.is_empty() {
                bail!("{} violations", violations.len());
            }
            println!("validation: ok");
        }
        Command::Synthesize { model, solver, out, table } => {
            config_line(
                "synthesize",
                threads,
                merge(
                    model.describe(),
                    json!({ "method": format!("{:?}", solver.method).to_lowercase(), "tol": solver.tol,
                            "max_iter": solver.max_iter, "out": out }),
                ),
            );
            let mdp = model.load()?;
            let m = synthesize(&mdp, &solver)?;
            println!("states: {}", mdp.num_states());
            println!("value: {:.9}", m.value);
            println!("phase 1 (reach pick-up, drop-off still possible) at s0: {:.9}", m.phase1.values[m.init]);
            println!("phase 2 (reach drop-off) at s0: {:.9}", m.phase2_value());
            if !m.feasible {
                println!("mission infeasible from the initial state; strategy is empty");
            }
            if table {
                for (name, r) in [("phase1", &m.phase1), ("phase2", &m.phase2)] {
                    for (s, k) in r.policy.defined() {
                        println!(
                            "{name}  {s:>7}  {:<60}  {:<18}  {:.6}",
                            mdp.describe(s),
                            mdp.action_name(mdp.choices(s)[k].action),
                            r.values[s]
                        );
                    }
                }
            }
            if let Some(path) = out {
                let text = serde_json::to_string_pretty(&strategy_json(&mdp, &m))?;
                std::fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Simulate { model, solver, runs, seed, step_limit, trace_out, trace_runs } => {
            config_line(
                "simulate",
                threads,
                merge(
                    model.describe(),
                    json!({ "method": format!("{:?}", solver.method).to_lowercase(), "tol": solver.tol,
                            "runs": runs, "seed": seed, "step_limit": step_limit, "trace_out": trace_out,
                            "trace_runs": trace_runs }),
                ),
            );
            let mdp = model.load()?;
            let m = synthesize(&mdp, &solver)?;
            let strategy = m.strategy();
            let start = Instant::now();
            let summary = estimate_success(&mdp, &strategy, runs, seed, step_limit)?;
            eprintln!("simulated {runs} runs in {:.2?}", start.elapsed());
            let completion = m.completion_probability(&mdp);
            let f = summary.first_phase;
            let c = summary.mission;
            let z = |e: &hostile_mdp::Estimate, v: f64| {
                if e.sigma() > 0.0 { (e.estimate - v) / e.sigma() } else if e.estimate == v { 0.0 } else { f64::INFINITY }
            };
            println!("synthesized value: {:.6}", m.value);
            println!(
                "formula event (pick-up reached, drop-off still possible): {:.6} ± {:.6} ({} / {}), z = {:.2}",
                f.estimate, f.half_width, f.successes, f.runs, z(&f, m.value)
            );
            println!("mission completion probability of the strategy: {completion:.6}");
            println!(
                "mission completed: {:.6} ± {:.6} ({} / {}), z = {:.2}",
                c.estimate, c.half_width, c.successes, c.runs, z(&c, completion)
            );
            println!("lost: {}, stranded: {}, step limit: {}", summary.lost, summary.stranded, summary.step_limit);
            if let Some(path) = trace_out {
                let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
                let mut w = BufWriter::new(file);
                writeln!(w, "{TRACE_CSV_HEADER}")?;
                for i in 0..trace_runs.min(runs) {
                    let trace = simulate_indexed(&mdp, &strategy, seed, i, step_limit)?;
                    write_trace_csv(&mut w, &mdp, i, &trace)?;
                }
                w.flush()?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Export { model, out } => {
            config_line("export", threads, merge(model.describe(), json!({ "out": out.display().to_string() })));
            let mdp = model.load()?;
            let violations = validate(&mdp);
            if !violations.is_empty() {
                bail!("refusing to export an invalid MDP: {}", violations[0]);
            }
            let files = export_prism(&mdp, &out).with_context(|| format!("cannot write {}.*", out.display()))?;
            for p in [files.sta, files.tra, files.lab, files.props] {
                eprintln!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(n);
    }
    if let Err(e) = pool.build_global() {
        eprintln!("error: cannot start worker pool: {e}");
        return ExitCode::from(1);
    }
    let threads = rayon::current_num_threads();
    match execute(cli, threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
