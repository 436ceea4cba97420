//! `apfguard` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 conflict (or a
//! failed oracle for `verify`).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use apfguard::multiobs;
use apfguard::scenario_io::{self, apply_override};
use apfguard::sim::{format_g9, metrics_json, Simulation, TraceWriter};
use apfguard::verify::{self, OracleResult};
use apfguard::{Error, ScenarioConfig, SimMetrics};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_ERROR: u8 = 1;
const EXIT_CONFLICT: u8 = 2;

const SWEEP_EPS: [f64; 3] = [1e-2, 1e-3, 1e-4];
const SWEEP_GAMMA: [f64; 3] = [1.1, 1.2, 1.5];

#[derive(Parser, Debug)]
#[command(
    name = "apfguard",
    version,
    about = "Barrier-function obstacle avoidance for multicopters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a scenario and write trace.csv and metrics.json.
    Run(RunArgs),
    /// Run the numeric oracle suite.
    Verify(VerifyArgs),
    /// List the built-in scenarios.
    List,
    /// Run a scenario over a grid of eps and gamma.
    Sweep(ScenarioArgs),
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Built-in scenario name or path to a TOML scenario file.
    #[arg(long)]
    scenario: String,
    /// Output directory.
    #[arg(long, env = "APFGUARD_OUT", default_value = "out")]
    out: PathBuf,
    /// Override a scenario field, e.g. `k2=3` or `obstacle.v_o_max=9`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for randomized built-ins.
    #[arg(long, default_value_t = scenario_io::DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Record every n-th sample in trace.csv (0 writes the header only).
    #[arg(long, default_value_t = 1)]
    trace_every: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = verify::DEFAULT_SEED)]
    seed: u64,
    /// Run only these oracle groups.
    #[arg(long, value_name = "ORACLE")]
    only: Vec<String>,
    /// Judge an oracle row against another tolerance, e.g. `eigen=1e-20`.
    #[arg(long = "tolerance", value_name = "ROW=VALUE")]
    tolerances: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(&a),
        Command::Verify(a) => verify_cmd(&a),
        Command::List => {
            for name in scenario_io::list() {
                println!("{name:<24} {}", scenario_io::describe(name).unwrap_or(""));
            }
            Ok(0)
        }
        Command::Sweep(a) => sweep(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn split_pair(s: &str) -> Result<(&str, &str), Error> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Error::InvalidArgument(format!("expected KEY=VALUE, got `{s}`")))
}

fn load_scenario(a: &ScenarioArgs) -> Result<ScenarioConfig, Error> {
    let mut cfg = if scenario_io::list().contains(&a.scenario.as_str()) {
        scenario_io::builtin_with_seed(&a.scenario, a.seed)?
    } else if Path::new(&a.scenario).is_file() {
        scenario_io::load(&a.scenario)?
    } else {
        return Err(Error::UnknownScenario(a.scenario.clone()));
    };
    for o in &a.overrides {
        let (k, v) = split_pair(o)?;
        apply_override(&mut cfg, k, v)?;
    }
    if let Some(dt) = a.dt {
        apply_override(&mut cfg, "dt", &format!("{dt:?}"))?;
    }
    if let Some(t_end) = a.t_end {
        apply_override(&mut cfg, "t_end", &format!("{t_end:?}"))?;
    }
    Ok(cfg)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), format_g9)
}

fn print_summary(cfg: &ScenarioConfig, m: &SimMetrics) {
    println!("scenario            {}", cfg.name);
    println!("steps               {}", m.steps);
    println!("min filtered margin {}", opt(m.min_filtered_margin));
    println!("min physical margin {}", opt(m.min_physical_margin));
    println!("conflict events     {}", m.conflict_events.len());
    if let Some(first) = m.conflict_events.first() {
        println!(
            "first conflict      t={} vehicle {} obstacle {}",
            format_g9(first.t),
            first.vehicle,
            first.obstacle
        );
    }
    if cfg.options.peers_as_obstacles {
        println!("min peer margin     {}", opt(m.min_peer_margin));
        println!("peer conflicts      {}", m.peer_conflict_events.len());
    }
    let arrived = m.arrival_times.iter().filter(|a| a.is_some()).count();
    println!("arrived             {arrived}/{}", m.arrival_times.len());
    println!("arrival time        {}", opt(m.arrival_time));
    println!("deadlock            {}", m.deadlock);
    for w in &m.warnings {
        println!("warning             {w}");
    }
}

fn run(a: &RunArgs) -> Result<u8, Error> {
    let cfg = load_scenario(&a.scenario)?;
    let report = multiobs::validate(&cfg);
    println!("{report}");

    let out = &a.scenario.out;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let trace_path = out.join("trace.csv");
    let file = File::create(&trace_path).map_err(io_err(&trace_path))?;
    let mut writer = TraceWriter::new(BufWriter::new(file), cfg.obstacles.len())?;
    let mut sim = Simulation::new(&cfg)?;
    let metrics = sim.run_to_end(a.trace_every, |r| writer.write(&r))?;
    writer.finish()?.flush().map_err(io_err(&trace_path))?;
    let metrics_path = out.join("metrics.json");
    fs::write(&metrics_path, metrics_json(&metrics)? + "\n").map_err(io_err(&metrics_path))?;

    print_summary(&cfg, &metrics);
    println!(
        "wrote               {} and {}",
        trace_path.display(),
        metrics_path.display()
    );
    Ok(if metrics.has_conflict() {
        EXIT_CONFLICT
    } else {
        0
    })
}

fn verify_cmd(a: &VerifyArgs) -> Result<u8, Error> {
    let mut results: Vec<OracleResult> = if a.only.is_empty() {
        verify::run_all(a.seed)?
    } else {
        let mut r = Vec::new();
        for name in &a.only {
            r.extend(verify::run_oracle(name, a.seed)?);
        }
        r
    };
    for t in &a.tolerances {
        let (row, v) = split_pair(t)?;
        let tol: f64 = v
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("tolerance `{v}` is not a number")))?;
        let mut hit = false;
        for r in results.iter_mut().filter(|r| r.name == row) {
            *r = r.clone().with_tolerance(tol);
            hit = true;
        }
        if !hit {
            return Err(Error::InvalidArgument(format!(
                "no oracle row named `{row}` was run"
            )));
        }
    }
    match a.format {
        Format::Table => print!("{}", verify::format_table(&results)),
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&results)
                .map_err(|e| Error::Serialization(e.to_string()))?
        ),
    }
    Ok(if results.iter().all(|r| r.pass) {
        0
    } else {
        EXIT_CONFLICT
    })
}

#[derive(Debug)]
enum CellOutcome {
    Done(Box<SimMetrics>),
    InvalidConfig(String),
    Failed(String),
}

fn run_cell(base: &ScenarioConfig, eps: f64, gamma: f64) -> CellOutcome {
    let mut cfg = base.clone();
    cfg.guidance.eps = eps;
    cfg.guidance.gamma = gamma;
    let result = Simulation::new(&cfg).and_then(|mut sim| sim.run_to_end(0, |_| Ok(())));
    match result {
        Ok(m) => CellOutcome::Done(Box::new(m)),
        Err(e @ (Error::InvalidConfiguration(_) | Error::InvalidArgument(_))) => {
            CellOutcome::InvalidConfig(e.to_string())
        }
        Err(e) => CellOutcome::Failed(e.to_string()),
    }
}

fn sweep(a: &ScenarioArgs) -> Result<u8, Error> {
    let cfg = load_scenario(a)?;
    let cells: Vec<(f64, f64)> = SWEEP_EPS
        .iter()
        .flat_map(|&e| SWEEP_GAMMA.iter().map(move |&g| (e, g)))
        .collect();
    let outcomes: Vec<CellOutcome> = std::thread::scope(|s| {
        let handles: Vec<_> = cells
            .iter()
            .map(|&(e, g)| {
                let cfg = &cfg;
                s.spawn(move || run_cell(cfg, e, g))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| CellOutcome::Failed("worker panicked".into()))
            })
            .collect()
    });

    let mut csv = String::from(
        "eps,gamma,status,min_filtered_margin,min_physical_margin,conflicts,arrival_time,deadlock,detail\n",
    );
    let (mut conflicts, mut failures) = (0usize, 0usize);
    for (&(eps, gamma), outcome) in cells.iter().zip(&outcomes) {
        let row = match outcome {
            CellOutcome::Done(m) => {
                let status = if m.has_conflict() {
                    conflicts += 1;
                    "conflict"
                } else {
                    "ok"
                };
                format!(
                    "{status},{},{},{},{},{},",
                    opt(m.min_filtered_margin),
                    opt(m.min_physical_margin),
                    m.conflict_events.len(),
                    opt(m.arrival_time),
                    m.deadlock
                )
            }
            CellOutcome::InvalidConfig(msg) => {
                format!("invalid_config,,,,,,\"{}\"", msg.replace('"', "'"))
            }
            CellOutcome::Failed(msg) => {
                failures += 1;
                format!("error,,,,,,\"{}\"", msg.replace('"', "'"))
            }
        };
        csv.push_str(&format!("{},{},{row}\n", format_g9(eps), format_g9(gamma)));
    }
    print!("{csv}");
    fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let path = a.out.join("sweep.csv");
    fs::write(&path, &csv).map_err(io_err(&path))?;
    Ok(if failures > 0 {
        EXIT_ERROR
    } else if conflicts > 0 {
        EXIT_CONFLICT
    } else {
        0
    })
}
