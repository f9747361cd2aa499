mod error;
mod experiments;
mod output;
mod params;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::error::{invalid, CliError};
use crate::experiments::{Artifact, Report};
use crate::params::{parse_assignment, parse_grid, Params};

#[derive(Parser, Debug)]
#[command(name = "eraserlab", version, about = "Simulations of information erasure against energy and spin reservoirs")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file for the main artifact.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON file with parameters; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Extra parameter as key=value, overriding the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maximum-entropy state for commuting observables (problem given in --config).
    Maxent(MaxentArgs),
    /// Gap-raising erasure against a thermal reservoir.
    #[command(name = "erase-energy", allow_negative_numbers = true)]
    EraseEnergy(EnergyArgs),
    /// Stepwise erasure against a spin reservoir.
    #[command(name = "erase-spin", allow_negative_numbers = true)]
    EraseSpin(SpinArgs),
    /// Fixed-point erasure with a central spin and a nuclear-spin bath.
    #[command(name = "central-spin", allow_negative_numbers = true)]
    CentralSpin(CentralArgs),
    /// Ledger of the spin-heat engine.
    #[command(allow_negative_numbers = true)]
    Engine(EngineArgs),
    /// Violation probabilities against the exponential tail bounds.
    #[command(allow_negative_numbers = true)]
    Fluct(FluctArgs),
    /// Runs one experiment over a grid of one parameter.
    #[command(allow_negative_numbers = true)]
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct MaxentArgs {
    /// Targets as a comma-separated list, replacing those in the config.
    #[arg(long)]
    targets: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct EnergyArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    emax: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    /// quasistatic or linear.
    #[arg(long)]
    schedule: Option<String>,
    /// Number of sampled trajectories; when positive the output holds one row per trajectory.
    #[arg(long)]
    trajectories: Option<u64>,
}

#[derive(Args, Debug)]
struct SpinArgs {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    /// Number of sampled erasures; when positive the output holds the samples.
    #[arg(long)]
    samples: Option<u64>,
    /// Checks the exponential average of the spinlabor against its closed form.
    #[arg(long)]
    check_jarzynski: bool,
    #[arg(long)]
    truncation_tol: Option<f64>,
    /// low or high.
    #[arg(long)]
    reset: Option<String>,
}

#[derive(Args, Debug)]
struct CentralArgs {
    #[arg(long)]
    n_spins: Option<u64>,
    /// Uniform coupling.
    #[arg(long)]
    coupling: Option<f64>,
    /// Comma-separated individual couplings.
    #[arg(long)]
    couplings: Option<String>,
    /// JSON bath spec file ({"couplings": [...]}).
    #[arg(long)]
    bath: Option<PathBuf>,
    #[arg(long)]
    cycles: Option<u64>,
    /// Apply a designed pulse after each cycle.
    #[arg(long)]
    pulse: bool,
    /// commensurate or half_flop.
    #[arg(long)]
    timing: Option<String>,
    #[arg(long)]
    max_multiple: Option<u64>,
    /// Directory for binary dumps of the final branches.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    /// JSON file for the designed pulses.
    #[arg(long)]
    pulses_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EngineArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    /// Heat per stroke; defaults to ln2/beta.
    #[arg(long)]
    heat: Option<f64>,
    /// ideal_bound, spin_protocol or central_spin.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    cycles: Option<u64>,
    #[arg(long)]
    bath_spins: Option<u64>,
}

#[derive(Args, Debug)]
struct FluctArgs {
    /// spin or energy.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    emax: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    /// Grid of eps values: a,b,c or start:stop:step.
    #[arg(long)]
    eps: Option<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// erase-energy, erase-spin, central-spin, engine or fluct.
    #[arg(long)]
    experiment: String,
    /// Parameter to vary.
    #[arg(long)]
    param: String,
    /// a,b,c or start:stop:step.
    #[arg(long)]
    grid: String,
}

/// Contents of a `--config` file: experiment parameters plus the common settings.
#[derive(Default)]
struct ConfigFile {
    params: Params,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
    let Value::Object(mut map) = value else {
        return Err(invalid("config must be a JSON object"));
    };
    let seed = map
        .remove("seed")
        .map(serde_json::from_value)
        .transpose()
        .map_err(|e| invalid(format!("config seed: {e}")))?;
    let out = map
        .remove("out")
        .map(serde_json::from_value)
        .transpose()
        .map_err(|e| invalid(format!("config out: {e}")))?;
    let workers = map
        .remove("workers")
        .map(serde_json::from_value)
        .transpose()
        .map_err(|e| invalid(format!("config workers: {e}")))?;
    Ok(ConfigFile {
        params: Params::from_map(map),
        seed,
        out,
        workers,
    })
}

fn flag_params(command: &Command) -> Result<Params, CliError> {
    let mut p = Params::default();
    match command {
        Command::Maxent(a) => {
            if let Some(t) = &a.targets {
                p.insert("targets", parse_grid(t)?.into());
            }
            p.set_opt("tol", a.tol);
        }
        Command::EraseEnergy(a) => {
            p.set_opt("beta", a.beta);
            p.set_opt("emax", a.emax);
            p.set_opt("steps", a.steps);
            p.set_opt("schedule", a.schedule.clone());
            p.set_opt("trajectories", a.trajectories);
        }
        Command::EraseSpin(a) => {
            p.set_opt("gamma", a.gamma);
            p.set_opt("hbar", a.hbar);
            p.set_opt("samples", a.samples);
            p.set_flag("check_jarzynski", a.check_jarzynski);
            p.set_opt("truncation_tol", a.truncation_tol);
            p.set_opt("reset", a.reset.clone());
        }
        Command::CentralSpin(a) => {
            p.set_opt("n_spins", a.n_spins);
            p.set_opt("coupling", a.coupling);
            if let Some(path) = &a.bath {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("cannot read bath {}: {e}", path.display())))?;
                let bath: eraserlab::central_spin::BathSpec = serde_json::from_str(&text)
                    .map_err(|e| invalid(format!("bath {}: {e}", path.display())))?;
                p.insert("couplings", bath.couplings().to_vec().into());
            }
            if let Some(c) = &a.couplings {
                p.insert("couplings", parse_grid(c)?.into());
            }
            p.set_opt("cycles", a.cycles);
            p.set_flag("pulse", a.pulse);
            p.set_opt("timing", a.timing.clone());
            p.set_opt("max_multiple", a.max_multiple);
            p.set_opt("dump_dir", a.dump_dir.as_ref().map(|d| d.display().to_string()));
            p.set_opt("pulses_out", a.pulses_out.as_ref().map(|d| d.display().to_string()));
        }
        Command::Engine(a) => {
            p.set_opt("beta", a.beta);
            p.set_opt("gamma", a.gamma);
            p.set_opt("hbar", a.hbar);
            p.set_opt("heat", a.heat);
            p.set_opt("backend", a.backend.clone());
            p.set_opt("cycles", a.cycles);
            p.set_opt("bath_spins", a.bath_spins);
        }
        Command::Fluct(a) => {
            p.set_opt("kind", a.kind.clone());
            p.set_opt("beta", a.beta);
            p.set_opt("emax", a.emax);
            p.set_opt("steps", a.steps);
            p.set_opt("schedule", a.schedule.clone());
            p.set_opt("gamma", a.gamma);
            p.set_opt("hbar", a.hbar);
            p.set_opt("eps", a.eps.clone());
        }
        Command::Sweep(_) => {}
    }
    Ok(p)
}

fn write_outputs(report: Report, out: Option<&Path>) -> Result<Option<PathBuf>, CliError> {
    let mut written = None;
    if let Some(Artifact { default_name, bytes }) = report.artifact {
        if let Some(path) = output::resolve_out(out, default_name) {
            output::write_atomic(&path, &bytes)?;
            written = Some(path);
        }
    }
    for (path, bytes) in report.extra {
        output::write_atomic(&path, &bytes)?;
    }
    Ok(written)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ConfigFile {
        mut params,
        seed: cfg_seed,
        out: cfg_out,
        workers: cfg_workers,
    } = load_config(cli.config.as_deref())?;
    for s in &cli.set {
        let (k, v) = parse_assignment(s)?;
        params.insert(&k, v);
    }
    params.overlay(flag_params(&cli.command)?);
    let seed = cli.seed.or(cfg_seed).unwrap_or(0);
    let out = cli.out.or(cfg_out);
    if let Some(w) = cli.workers.or(cfg_workers) {
        if w == 0 {
            return Err(invalid("workers must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    if let Some(path) = &out {
        output::check_writable(path)?;
    }

    let report = match &cli.command {
        Command::Maxent(_) => experiments::maxent(&params)?.1,
        Command::EraseEnergy(_) => experiments::erase_energy(&params, seed)?.1,
        Command::EraseSpin(_) => experiments::erase_spin(&params, seed)?.1,
        Command::CentralSpin(_) => experiments::central_spin(&params)?.1,
        Command::Engine(_) => experiments::engine(&params, seed)?.1,
        Command::Fluct(_) => experiments::fluct(&params)?.1,
        Command::Sweep(a) => {
            let grid = parse_grid(&a.grid)?;
            let table = sweep::sweep(&a.experiment, &params, &a.param, &grid, seed)?;
            Report {
                summary: table.summary,
                artifact: Some(Artifact {
                    default_name: "sweep.csv",
                    bytes: experiments::csv_bytes(&table.header, &table.rows)?,
                }),
                extra: vec![],
            }
        }
    };
    let summary = report.summary.clone();
    match write_outputs(report, out.as_deref())? {
        Some(path) => println!("{summary} (wrote {})", path.display()),
        None => println!("{summary}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
