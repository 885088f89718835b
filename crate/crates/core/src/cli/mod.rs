//! Command-line front end.
//!
//! Every command writes `manifest_<command>.json` next to its artifacts and
//! embeds the manifest hash in each of them. Outputs depend only on the
//! manifest, never on the thread count. Exit status: 0 success, 1 invalid
//! input or failed verification, 2 numerical guard (step-size check, utility
//! range, ...).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::contract::{forward_y, optimize_reservation, replay, verify_incentive_compatibility, ContractPolicy, Deviation};
use crate::error::{Error, Result};
use crate::hamiltonian::isaacs_gap;
use crate::hjbi::export::{read_binary, write_binary, write_slice_csv};
use crate::hjbi::{build_grid, GridConfig, Hjbi, SchemeFlags, SearchConfig, Solution, SolveReport};
use crate::scenario::{hex_sha256, Scenario};
use crate::simulate::export::{write_paths_csv, write_summary_jsonl};
use crate::simulate::{simulate_paths, SimConfig};

/// Built-in scenario used when `--scenario` is absent.
pub const DEFAULT_SCENARIO: &str = include_str!("../../../../scenarios/default.toml");

/// Environment variable overriding the default output directory.
pub const OUT_ENV: &str = "CYBER_CONTRACT_OUT";

#[derive(Debug, Parser)]
#[command(name = "cyber-contract", version, about = "Cyber-risk contracting: simulation, HJBI solver and contract verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario TOML file; the built-in default when absent.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output directory (default: $CYBER_CONTRACT_OUT, else `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Random seed for simulate, verify and isaacs-check
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo path count.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Monte Carlo time step.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Nodes per grid axis, with 4 (n - 1) time steps.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Co-state samples for `isaacs-check`.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Scheme interpretation switch; repeatable.
    #[arg(long = "flag", value_enum, global = true)]
    pub flags: Vec<FlagArg>,
}

#[derive(Debug, Subcommand, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Simulate paths under the scenario's constant effort and hacker action.
    Simulate,
    /// Solve the principal's problem backward on the grid.
    Solve,
    /// Check incentive compatibility of the solved contract by Monte Carlo.
    Verify {
        /// Also write the continuation value along this many paths.
        #[arg(long)]
        y_paths: Option<usize>,
    },
    /// Search the initial certified value over [reservation, y_max].
    Optimize,
    /// Sampled gap between sup-inf and inf-sup of the agent Hamiltonian.
    IsaacsCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlagArg {
    AggregatedJump,
    LiteralSigmaRow,
}

/// Inputs that determine a command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scenario: String,
    pub scenario_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flags: Option<SchemeFlags>,
    pub output_dir: String,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises")
    }

    pub fn hash(&self) -> String {
        hex_sha256(self.to_json().as_bytes())
    }
}

/// Resolved run: scenario with command-line overrides applied.
struct Run {
    scenario: Scenario,
    scenario_label: String,
    out: PathBuf,
}

impl Run {
    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            scenario: self.scenario_label.clone(),
            scenario_hash: self.scenario.content_hash.clone(),
            seed: None,
            paths: None,
            dt: None,
            samples: None,
            y_paths: None,
            grid: None,
            search: None,
            flags: None,
            output_dir: self.out.display().to_string(),
        }
    }

    /// Manifest of the backward solve; `fields.bin` carries its hash.
    fn solve_manifest(&self) -> RunManifest {
        RunManifest {
            grid: Some(self.scenario.grid.clone()),
            search: Some(self.scenario.search.clone()),
            flags: Some(self.scenario.flags.clone()),
            ..self.manifest("solve")
        }
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn write_manifest(&self, m: &RunManifest) -> Result<()> {
        fs::write(self.out.join(format!("manifest_{}.json", m.command)), m.to_json() + "\n")?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, hash: &str, body: &T) -> Result<()> {
        let mut v = serde_json::to_value(body)?;
        if let serde_json::Value::Object(map) = &mut v {
            map.insert("manifest_hash".into(), hash.into());
        }
        fs::write(self.out.join(name), serde_json::to_string_pretty(&v)? + "\n")?;
        Ok(())
    }

    fn solver(&self) -> Result<Hjbi> {
        let s = &self.scenario;
        let grid = build_grid(&s.grid, &s.model)?;
        Hjbi::new(s.model.clone(), grid, s.search.clone(), s.flags.clone())
    }

    /// Fields from `fields.bin` when it was written for the same solve
    /// inputs, otherwise a fresh solve.
    fn fields(&self) -> Result<(Hjbi, Solution)> {
        let solver = self.solver()?;
        let hash = self.solve_manifest().hash();
        let path = self.out.join("fields.bin");
        if let Ok(f) = File::open(&path) {
            if let Ok(d) = read_binary(std::io::BufReader::new(f)) {
                let g = &solver.grid;
                if d.manifest_hash == hash && d.axes == [g.p.clone(), g.s.clone(), g.i.clone(), g.y.clone()] && d.n_t == g.n_t {
                    let sol = Solution {
                        value: d.value,
                        policy: d.policy,
                        report: SolveReport::default(),
                    };
                    return Ok((solver, sol));
                }
            }
        }
        let sol = solver.solve_backward()?;
        Ok((solver, sol))
    }
}

fn resolve(cli: &Cli) -> Result<Run> {
    let (mut scenario, label) = match &cli.scenario {
        Some(p) => (Scenario::load(p)?, p.display().to_string()),
        None => (Scenario::parse(DEFAULT_SCENARIO)?, "<built-in default>".to_string()),
    };
    if let Some(n) = cli.grid {
        if n == 0 {
            return Err(Error::Config("--grid must be positive".into()));
        }
        let y = scenario.grid.y_bounds;
        scenario.grid = GridConfig { y_bounds: y, ..GridConfig::cube(n) };
    }
    for f in &cli.flags {
        match f {
            FlagArg::AggregatedJump => scenario.flags.aggregated_jump = true,
            FlagArg::LiteralSigmaRow => scenario.flags.literal_sigma_row = true,
        }
    }
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Run {
        scenario,
        scenario_label: label,
        out,
    })
}

/// Run a parsed command line; returns the process exit status on success.
pub fn run(cli: &Cli) -> Result<i32> {
    let run = resolve(cli)?;
    fs::create_dir_all(&run.out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli, &run))
}

fn dispatch(cli: &Cli, run: &Run) -> Result<i32> {
    let s = &run.scenario;
    match cli.command {
        Command::Simulate => {
            let cfg = SimConfig {
                n_paths: cli.paths.unwrap_or(s.simulation.paths),
                dt: cli.dt.unwrap_or(s.simulation.dt),
                horizon: s.model.horizon,
                seed: cli.seed.unwrap_or(s.simulation.seed),
                ..Default::default()
            };
            let m = RunManifest {
                seed: Some(cfg.seed),
                paths: Some(cfg.n_paths),
                dt: Some(cfg.dt),
                ..run.manifest("simulate")
            };
            let (a, h) = (s.simulation.effort, s.simulation.hack);
            let batch = simulate_paths(&s.model, &move |_, _| a, &move |_, _| h, s.model.x0, &cfg)?;
            let hash = m.hash();
            run.write_manifest(&m)?;
            let mut w = run.create("paths.csv")?;
            write_paths_csv(&batch, &mut w, &hash)?;
            w.flush()?;
            let mut w = run.create("summary.jsonl")?;
            write_summary_jsonl(&batch, s.model.mark_count(), &mut w, &hash)?;
            w.flush()?;
            println!("simulated {} paths of {} steps into {}", batch.n_paths, batch.n_steps, run.out.display());
            Ok(0)
        }
        Command::Solve => {
            let m = run.solve_manifest();
            let hash = m.hash();
            let solver = run.solver()?;
            let sol = solver.solve_backward()?;
            run.write_manifest(&m)?;
            let names: Vec<String> = s.model.marks.iter().map(|k| k.name.clone()).collect();
            let g = &solver.grid;
            let mut w = run.create("fields_t0.csv")?;
            write_slice_csv(g, &sol.value, &sol.policy, &names, 0, &mut w, &hash)?;
            w.flush()?;
            let mut w = run.create("fields_terminal.csv")?;
            write_slice_csv(g, &sol.value, &sol.policy, &names, g.n_t, &mut w, &hash)?;
            w.flush()?;
            let mut w = run.create("fields.bin")?;
            write_binary(g, &sol.value, &sol.policy, &mut w, &hash)?;
            w.flush()?;
            let v0 = sol.value.interpolate(g, 0, &s.model.x0, s.model.reservation);
            run.write_json("solve_report.json", &hash, &SolveSummary { value_at_start: v0, report: &sol.report })?;
            println!("v(0, x0, R0) = {v0:.10}");
            Ok(0)
        }
        Command::Verify { y_paths } => {
            let mut ic = s.verification.ic_config();
            ic.n_paths = cli.paths.unwrap_or(ic.n_paths);
            ic.dt = cli.dt.unwrap_or(ic.dt);
            ic.seed = cli.seed.unwrap_or(ic.seed);
            let sm = run.solve_manifest();
            let m = RunManifest {
                seed: Some(ic.seed),
                paths: Some(ic.n_paths),
                dt: Some(ic.dt),
                y_paths,
                ..sm
            };
            let m = RunManifest { command: "verify".into(), ..m };
            let hash = m.hash();
            let (solver, sol) = run.fields()?;
            let contract = ContractPolicy::new(&solver, &sol, s.model.reservation)?;
            let report = verify_incentive_compatibility(&contract, &Deviation::library(&s.model), &ic)?;
            run.write_manifest(&m)?;
            run.write_json("ic_report.json", &hash, &report)?;
            if let Some(n) = y_paths.filter(|n| *n > 0) {
                let cfg = SimConfig {
                    n_paths: n,
                    dt: ic.dt,
                    horizon: s.model.horizon,
                    seed: ic.seed,
                    ..Default::default()
                };
                let r = replay(&contract, &Deviation::Recommended, &cfg, true)?;
                let fy = forward_y(r.batch.as_ref().expect("recorded"), &contract)?;
                let mut w = run.create("y_paths.csv")?;
                writeln!(w, "# manifest {hash}")?;
                let mut c = csv::Writer::from_writer(&mut w);
                c.write_record(["path", "step", "t", "y", "dk"])?;
                for (p, ys) in fy.y.iter().enumerate() {
                    for (k, y) in ys.iter().enumerate() {
                        let dk = if k == 0 { 0.0 } else { fy.dk[p][k - 1] };
                        c.write_record(&[p.to_string(), k.to_string(), format!("{:.17e}", k as f64 * ic.dt), format!("{y:.17e}"), format!("{dk:.17e}")])?;
                    }
                }
                c.flush()?;
                drop(c);
                w.flush()?;
            }
            println!(
                "incentive compatibility: {}; representation residual {:.3e} (se {:.3e})",
                if report.pass { "PASS" } else { "FAIL" },
                report.representation_residual,
                report.representation_std_error
            );
            Ok(if report.pass { 0 } else { 1 })
        }
        Command::Optimize => {
            let m = RunManifest { command: "optimize".into(), ..run.solve_manifest() };
            let hash = m.hash();
            let (solver, sol) = run.fields()?;
            let r = optimize_reservation(&solver, &sol, s.model.reservation)?;
            run.write_manifest(&m)?;
            run.write_json("reservation.json", &hash, &r)?;
            println!("y0* = {:.10}, principal value {:.10}", r.y0, r.principal_value);
            Ok(0)
        }
        Command::IsaacsCheck => {
            let samples = cli.samples.unwrap_or(1000);
            let seed = cli.seed.unwrap_or(0);
            let m = RunManifest {
                seed: Some(seed),
                samples: Some(samples),
                ..run.manifest("isaacs-check")
            };
            let hash = m.hash();
            let gap = isaacs_gap(&s.model, samples, seed, ISAACS_POINTS, ISAACS_POINTS)?;
            run.write_manifest(&m)?;
            run.write_json(
                "isaacs.json",
                &hash,
                &IsaacsSummary {
                    samples,
                    seed,
                    control_points: ISAACS_POINTS,
                    max_gap: gap,
                },
            )?;
            println!("max Isaacs gap {gap:.3e} over {samples} samples");
            Ok(0)
        }
    }
}

const ISAACS_POINTS: usize = 41;

#[derive(Serialize)]
struct SolveSummary<'a> {
    value_at_start: f64,
    report: &'a SolveReport,
}

#[derive(Serialize)]
struct IsaacsSummary {
    samples: usize,
    seed: u64,
    control_points: usize,
    max_gap: f64,
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical_guard() {
        2
    } else {
        1
    }
}

/// Parse `args`, run, and map the outcome to an exit status. Errors go to
/// stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
