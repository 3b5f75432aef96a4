//! The `proxfly` command line.
//!
//! Exit status: 0 on success, 1 when a run fails at runtime (training
//! divergence, crashed scenario, inconsistent log, write error), 2 when the
//! input is invalid (flags, config, checkpoint, log schema).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use proxfly_core::compare::{compare_controllers_with, CompareError, Variant};
use proxfly_core::episode::RolloutOptions;
use proxfly_core::metrics::{e_att, e_pos, max_altitude_error};
use proxfly_core::ppo::compute_reward;
use proxfly_core::scenario::{run_scenario, task_scenario, ControllerChoice, ScenarioSpec};
use proxfly_core::{PolicyParams, VehicleClass};

use crate::checkpoint::{class_name, Checkpoint};
use crate::config::Config;
use crate::flightlog::{consistency_violations, read_log, write_log};
use crate::manifest::RunManifest;
use crate::trainer::{rollout_threads, train, TrainSetup};
use crate::{failure_label, report};

#[derive(Debug, Parser)]
#[command(name = "proxfly", version, about = "Quadcopter simulation, residual policy training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VehicleArg {
    Small,
    Large,
}

impl From<VehicleArg> for VehicleClass {
    fn from(v: VehicleArg) -> Self {
        match v {
            VehicleArg::Small => VehicleClass::Small,
            VehicleArg::Large => VehicleClass::Large,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Flyover,
    HoverProx,
    CircleSame,
    CircleReversed,
    Docking,
    Hover,
}

impl ScenarioArg {
    fn task(self) -> &'static str {
        match self {
            ScenarioArg::Flyover => "flyover",
            ScenarioArg::HoverProx => "hover_prox",
            ScenarioArg::CircleSame => "circle_same",
            ScenarioArg::CircleReversed => "circle_reversed",
            ScenarioArg::Docking => "docking",
            ScenarioArg::Hover => "hover",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ControllerArg {
    Basic,
    Proxfly,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a residual policy with PPO under domain randomization.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "large")]
        vehicle: VehicleArg,
        /// Overrides `train.seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fly one scenario and write flight logs, events and metrics.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long, value_enum, default_value = "basic")]
        controller: ControllerArg,
        /// Required with `--controller proxfly`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Flyover altitude of the small vehicle above the large one, in metres.
        #[arg(long, default_value_t = 0.25)]
        height: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare controllers over tasks and seeds.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "hover_prox,circle_same,circle_reversed")]
        scenarios: Vec<String>,
        /// `basic` or `NAME=CHECKPOINT`, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        variants: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 0.25)]
        height: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute metrics and rewards from a flight log and check its consistency.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Runtime(m) => m,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("cannot write {}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(io_err(path))
}

/// Parse `args` (program name first), run the command and return the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Train { config, vehicle, seed, out } => cmd_train(config.as_deref(), vehicle.into(), seed, &out),
        Command::Eval { config, scenario, controller, checkpoint, seed, height, out } => {
            cmd_eval(config.as_deref(), scenario, controller, checkpoint.as_deref(), seed, height, &out)
        }
        Command::Compare { config, scenarios, variants, seeds, height, out } => cmd_compare(config.as_deref(), &scenarios, &variants, &seeds, height, &out),
        Command::Replay { log, out } => cmd_replay(&log, &out),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    Config::load(path).map_err(|e| Failure::Invalid(e.to_string()))
}

fn start_manifest(command: &str, seed: u64, out: &Path, cfg: &Config, class: VehicleClass) -> RunManifest {
    let mut m = RunManifest::new(command, seed, out);
    m.config_source = cfg.source.clone();
    m.config = cfg.resolved_toml(class, seed);
    m
}

fn cmd_train(config: Option<&Path>, class: VehicleClass, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let mut train_cfg = cfg.train_config();
    if let Some(s) = seed {
        train_cfg.seed = s;
    }
    let seed = train_cfg.seed;
    let every = cfg.checkpoint_every();
    let ckpt_dir = out.join("checkpoints");
    let periodic: Vec<PathBuf> = (1..=train_cfg.epochs).filter(|e| e % every == 0).map(|e| ckpt_dir.join(format!("epoch_{e:04}.ckpt"))).collect();
    let final_path = out.join("policy.ckpt");

    let mut manifest = start_manifest("train", seed, out, &cfg, class);
    manifest.checkpoints = periodic.iter().cloned().chain([final_path.clone()]).collect();
    manifest.write(out).map_err(io_err(out))?;
    std::fs::create_dir_all(&ckpt_dir).map_err(io_err(&ckpt_dir))?;

    let curve_path = out.join("learning_curve.csv");
    let mut curve = csv::Writer::from_writer(BufWriter::new(File::create(&curve_path).map_err(io_err(&curve_path))?));
    curve
        .write_record([
            "epoch",
            "mean_return",
            "mean_episode_length",
            "crash_fraction",
            "mean_abs_residual_thrust",
            "policy_loss",
            "value_loss",
            "entropy",
            "total_loss",
            "approx_kl",
            "clip_fraction",
        ])
        .map_err(|e| Failure::Runtime(e.to_string()))?;

    let setup = TrainSetup { config: train_cfg, class, nominal: cfg.vehicle(class), gains: cfg.gains(), rollout: RolloutOptions::default() };
    let epochs = train_cfg.epochs;
    let params = train(&setup, rollout_threads(), |r, params| {
        let l = &r.loss;
        let row = [r.mean_return, r.mean_length, r.crash_fraction, r.mean_abs_residual_thrust, l.policy_loss, l.value_loss, l.entropy, l.total, l.approx_kl, l.clip_fraction];
        curve.write_record(std::iter::once((r.epoch + 1).to_string()).chain(row.iter().map(|v| v.to_string())))?;
        curve.flush()?;
        let done = r.epoch + 1;
        if done % every == 0 {
            Checkpoint { vehicle: class, epoch: done, params: params.clone() }.save(&ckpt_dir.join(format!("epoch_{done:04}.ckpt")))?;
        }
        if done % 10 == 0 || done == epochs {
            println!("epoch {done:4}  mean return {:10.2}  crashes {:4.0}%", r.mean_return, 100.0 * r.crash_fraction);
        }
        Ok(())
    })
    .map_err(|e| Failure::Runtime(e.to_string()))?;
    drop(curve);
    Checkpoint { vehicle: class, epoch: epochs, params }.save(&final_path).map_err(io_err(&final_path))?;
    println!("wrote {}", final_path.display());
    Ok(())
}

/// Apply config gains, downwash parameters and an explicit `[vehicle]`
/// table (to the large vehicle) to a scenario.
fn configure(cfg: &Config) -> impl Fn(&mut ScenarioSpec) + '_ {
    move |spec| {
        for v in &mut spec.vehicles {
            v.gains = cfg.gains();
        }
        if let Some(c) = spec.downwash.as_mut() {
            c.params = cfg.downwash();
        }
        if cfg.file.vehicle.is_some() {
            let lq = &mut spec.vehicles[0];
            lq.params = cfg.vehicle(VehicleClass::Large);
            lq.nominal = lq.params;
        }
    }
}

fn load_policy(path: &Path) -> Result<PolicyParams, Failure> {
    let ckpt = Checkpoint::load(path).map_err(|e| Failure::Invalid(e.to_string()))?;
    if ckpt.vehicle != VehicleClass::Large {
        return Err(Failure::Invalid(format!(
            "checkpoint {} was trained for the {} vehicle; scenarios evaluate the large vehicle",
            path.display(),
            class_name(ckpt.vehicle)
        )));
    }
    Ok(ckpt.params)
}

fn cmd_eval(
    config: Option<&Path>,
    scenario: ScenarioArg,
    controller: ControllerArg,
    checkpoint: Option<&Path>,
    seed: u64,
    height: f64,
    out: &Path,
) -> Result<(), Failure> {
    if !(height.is_finite() && height > 0.0) {
        return Err(Failure::Invalid(format!("--height must be a positive number of metres, got {height}")));
    }
    let policy = match (controller, checkpoint) {
        (ControllerArg::Basic, None) => None,
        (ControllerArg::Basic, Some(_)) => return Err(Failure::Invalid("--checkpoint is only valid with --controller proxfly".into())),
        (ControllerArg::Proxfly, None) => return Err(Failure::Invalid("--controller proxfly needs --checkpoint".into())),
        (ControllerArg::Proxfly, Some(p)) => Some(load_policy(p)?),
    };
    let cfg = load_config(config)?;
    let choice = if policy.is_some() { ControllerChoice::ProxFly } else { ControllerChoice::BasicOnly };
    let mut spec = task_scenario(scenario.task(), choice, height, seed).expect("every scenario flag maps to a task");
    configure(&cfg)(&mut spec);

    let mut manifest = start_manifest("eval", seed, out, &cfg, VehicleClass::Large);
    manifest.checkpoints = checkpoint.map(Path::to_path_buf).into_iter().collect();
    manifest.write(out).map_err(io_err(out))?;

    let mut policies = vec![None; spec.vehicles.len()];
    policies[spec.subject] = policy.as_ref();
    let outcome = run_scenario(&spec, &policies).map_err(|e| Failure::Invalid(format!("scenario rejected: {e}")))?;

    let controller_name = match controller {
        ControllerArg::Basic => "basic",
        ControllerArg::Proxfly => "proxfly",
    };
    let context = format!("scenario={} controller={controller_name} seed={seed}", spec.name);
    for log in &outcome.logs {
        let path = out.join(format!("flightlog_{}.csv", log.vehicle));
        let f = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        write_log(f, log, &context).map_err(io_err(&path))?;
    }

    let mut events = String::from("t,event,vehicle\n");
    for e in &outcome.events {
        events.push_str(&format!("{},{},{}\n", e.t, e.kind.name(), spec.vehicles[e.vehicle].name));
    }
    write_file(&out.join("events.csv"), &events)?;

    let window = outcome.metric_log();
    let (ep, ea) = (e_pos(&window).unwrap_or(f64::NAN), e_att(&window).unwrap_or(f64::NAN));
    let maxz = max_altitude_error(&window).unwrap_or(f64::NAN);
    let status = outcome.failure.as_ref().map_or("ok".to_string(), failure_label);
    let metrics = format!(
        "scenario = \"{}\"\ncontroller = \"{controller_name}\"\nseed = {seed}\nstatus = \"{status}\"\nwindow_start = {:?}\nwindow_end = {:?}\nE_pos = {ep:?}\nE_att = {ea:?}\nmax_altitude_error = {maxz:?}\n",
        spec.name, outcome.metric_window.0, outcome.metric_window.1
    );
    write_file(&out.join("metrics.toml"), &metrics)?;
    println!("{}: E_pos {ep:.4} m  E_att {ea:.4} rad  max altitude error {maxz:.4} m  ({status})", spec.name);
    match outcome.failure {
        None => Ok(()),
        Some(f) => Err(Failure::Runtime(format!("scenario failed: {}", failure_label(&f)))),
    }
}

fn cmd_compare(config: Option<&Path>, scenarios: &[String], variants: &[String], seeds: &[u64], height: f64, out: &Path) -> Result<(), Failure> {
    let mut named: Vec<(String, Option<PathBuf>)> = Vec::new();
    for v in variants {
        let entry = match v.split_once('=') {
            None if v == "basic" => (v.clone(), None),
            None => return Err(Failure::Invalid(format!("variant `{v}` must be `basic` or NAME=CHECKPOINT"))),
            Some((name, path)) if !name.is_empty() && !path.is_empty() => (name.to_string(), Some(PathBuf::from(path))),
            Some(_) => return Err(Failure::Invalid(format!("variant `{v}` must be `basic` or NAME=CHECKPOINT"))),
        };
        if named.iter().any(|(n, _)| *n == entry.0) {
            return Err(Failure::Invalid(format!("variant name `{}` given twice", entry.0)));
        }
        named.push(entry);
    }
    let cfg = load_config(config)?;
    let policies: Vec<Option<PolicyParams>> = named.iter().map(|(_, p)| p.as_deref().map(load_policy).transpose()).collect::<Result<_, _>>()?;

    let seed = seeds.first().copied().unwrap_or(0);
    let mut manifest = start_manifest("compare", seed, out, &cfg, VehicleClass::Large);
    manifest.checkpoints = named.iter().filter_map(|(_, p)| p.clone()).collect();
    manifest.write(out).map_err(io_err(out))?;

    let vs: Vec<Variant<'_>> = named.iter().zip(&policies).map(|((n, _), p)| Variant { name: n, policy: p.as_ref() }).collect();
    let tasks: Vec<&str> = scenarios.iter().map(String::as_str).collect();
    let adjust = configure(&cfg);
    let table = compare_controllers_with(&tasks, &vs, seeds, height, &adjust).map_err(|e| match e {
        CompareError::InvalidScenario(_) => Failure::Runtime(e.to_string()),
        _ => Failure::Invalid(e.to_string()),
    })?;
    write_file(&out.join("report.csv"), &report::to_csv(&table))?;
    let text = report::to_text(&table);
    write_file(&out.join("report.txt"), &text)?;
    write_file(&out.join("runs.csv"), &report::runs_csv(&table))?;
    print!("{text}");
    if table.runs.iter().all(|r| r.failure.is_some()) {
        return Err(Failure::Runtime("every run failed".into()));
    }
    Ok(())
}

fn cmd_replay(log_path: &Path, out: &Path) -> Result<(), Failure> {
    let file = File::open(log_path).map_err(|e| Failure::Invalid(format!("cannot open {}: {e}", log_path.display())))?;
    let log = read_log(file).map_err(|e| Failure::Invalid(format!("{}: {e}", log_path.display())))?;

    let mut manifest = RunManifest::new("replay", 0, out);
    manifest.config_source = Some(log_path.to_path_buf());
    manifest.write(out).map_err(io_err(out))?;

    let rewards_path = out.join("rewards.csv");
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&rewards_path).map_err(io_err(&rewards_path))?));
    let csv_err = |e: csv::Error| Failure::Runtime(e.to_string());
    w.write_record(["t", "r_epos", "r_eatt", "r_pthrust", "r_prates", "r_survive", "total"]).map_err(csv_err)?;
    for (i, r) in log.records.iter().enumerate() {
        let prev = if i == 0 { r.overall } else { log.records[i - 1].overall };
        let b = compute_reward(&prev, &r.overall, &r.estimate, &r.desired);
        let fields = std::iter::once(r.t).chain(b.terms()).chain([b.total]);
        w.write_record(fields.map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&rewards_path))?;
    drop(w);

    let violations = consistency_violations(&log);
    let mut vtext = String::from("row,column,expected,found\n");
    for v in &violations {
        vtext.push_str(&format!("{},{},{},{}\n", v.row, v.column, v.expected, v.found));
    }
    write_file(&out.join("violations.csv"), &vtext)?;

    let (ep, ea) = (e_pos(&log).unwrap_or(f64::NAN), e_att(&log).unwrap_or(f64::NAN));
    let summary = format!("rows = {}\nE_pos = {ep:?}\nE_att = {ea:?}\nviolations = {}\n", log.records.len(), violations.len());
    write_file(&out.join("replay.toml"), &summary)?;
    println!("{} rows, E_pos {ep:.4} m, E_att {ea:.4} rad, {} consistency violations", log.records.len(), violations.len());
    match violations.first() {
        None => Ok(()),
        Some(v) => {
            let mut stdout = std::io::stdout();
            for v in violations.iter().take(10) {
                let _ = writeln!(stdout, "  row {} column {}: expected {} found {}", v.row, v.column, v.expected, v.found);
            }
            Err(Failure::Runtime(format!("log is inconsistent, first violation at row {} column {}", v.row, v.column)))
        }
    }
}
