//! One function per experiment: validate a parameter record, run, and report.

use std::path::PathBuf;

use eraserlab::central_spin::{
    erase_cycle_with, initial_ensemble, write_dump, write_reports_csv, BathSpec, CycleOptions,
    CycleOutcome, CycleTiming, DEFAULT_MAX_MULTIPLE,
};
use eraserlab::energy::{
    exp_work_estimate, landauer_violation_tail, quasistatic_erase, quasistatic_profile,
    sample_batch, work_distribution_exact, write_trajectories_csv, GapSchedule, QuasistaticOutcome,
    ThermalModel,
};
use eraserlab::engine::{entropy_audit, efficiency, run_engine, CycleLedger, EngineConfig, ErasureBackend};
use eraserlab::maxent::{solve_maxent, MaxEntProblem, MaxEntState, DEFAULT_TOL};
use eraserlab::spin::{
    exact_spinlabor_distribution, jarzynski_like_check, sample_mean, sample_spinlabor,
    violation_tail, write_samples_csv, ResetConvention, SpinProtocolConfig, SpinReservoir,
    SpinlaborDistribution, DEFAULT_TRUNCATION_TOL,
};
use eraserlab::LN_2;
use serde::Serialize;

use crate::error::{invalid, CliError};
use crate::params::{grid_param, Params};

/// Largest allowed deviation in the spin exponential-average check.
const JARZYNSKI_TOL: f64 = 1e-9;

pub struct Artifact {
    pub default_name: &'static str,
    pub bytes: Vec<u8>,
}

pub struct Report {
    pub summary: String,
    pub artifact: Option<Artifact>,
    /// Additional files requested by explicit path parameters.
    pub extra: Vec<(PathBuf, Vec<u8>)>,
}

/// CSV with an empty cell wherever a value is undefined (NaN).
pub fn csv_bytes<H: AsRef<[u8]>>(header: &[H], rows: &[Vec<f64>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|x| if x.is_nan() { String::new() } else { x.to_string() }))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

// ---------------------------------------------------------------- maxent

pub const MAXENT_KEYS: &[&str] = &["observables", "targets", "tol"];

pub fn maxent(params: &Params) -> Result<(MaxEntState, Report), CliError> {
    params.check_keys("maxent", MAXENT_KEYS)?;
    if !params.contains("observables") || !params.contains("targets") {
        return Err(invalid("maxent needs observables and targets (give them in --config)"));
    }
    let mut raw = serde_json::Map::new();
    raw.insert("observables".into(), params.raw("observables").cloned().unwrap_or_default());
    raw.insert("targets".into(), params.raw("targets").cloned().unwrap_or_default());
    let problem: MaxEntProblem =
        serde_json::from_value(raw.into()).map_err(|e| invalid(format!("maxent problem: {e}")))?;
    let tol: f64 = params.get_or("tol", DEFAULT_TOL)?;
    let state = solve_maxent(&problem, tol)?;
    let summary = format!(
        "S = {:.10} nats; multipliers = [{}]; residual = {:.2e}; iterations = {}",
        state.entropy_nats,
        state
            .multipliers
            .iter()
            .map(|l| format!("{l:.10}"))
            .collect::<Vec<_>>()
            .join(", "),
        state.residual,
        state.iterations
    );
    let artifact = Artifact {
        default_name: "maxent.json",
        bytes: json_bytes(&state)?,
    };
    Ok((
        state,
        Report {
            summary,
            artifact: Some(artifact),
            extra: vec![],
        },
    ))
}

// ---------------------------------------------------------------- erase-energy

pub const ENERGY_KEYS: &[&str] = &["beta", "emax", "steps", "schedule", "trajectories"];

pub struct EnergyRun {
    pub outcome: QuasistaticOutcome,
}

fn schedule_from(params: &Params, default_steps: usize) -> Result<GapSchedule, CliError> {
    let emax: f64 = params.get_or("emax", 25.0)?;
    let steps: usize = params.get_or("steps", default_steps)?;
    if steps == 0 {
        return Err(invalid("steps must be >= 1"));
    }
    let kind: String = params.get_or("schedule", "quasistatic".to_string())?;
    match kind.as_str() {
        "quasistatic" => Ok(GapSchedule::quasistatic(emax, steps)?),
        "linear" => Ok(GapSchedule::linear(emax, steps)?),
        other => Err(invalid(format!("schedule must be quasistatic or linear (got {other})"))),
    }
}

pub fn erase_energy(params: &Params, seed: u64) -> Result<(EnergyRun, Report), CliError> {
    params.check_keys("erase-energy", ENERGY_KEYS)?;
    let model = ThermalModel::new(params.get_or("beta", 1.0)?)?;
    let schedule = schedule_from(params, 20_000)?;
    let trajectories: usize = params.get_or("trajectories", 0)?;

    let outcome = quasistatic_erase(&schedule, &model);
    let bound = LN_2 / model.beta();
    let mut summary = format!(
        "W = {:.6}, Q_R = {:.6}, ln2/beta = {bound:.6}, error probability = {:.3e}",
        outcome.work, outcome.heat_to_reservoir, outcome.error_probability
    );
    let artifact = if trajectories > 0 {
        let batch = sample_batch(&schedule, &model, seed, trajectories);
        let n = batch.len() as f64;
        let w = batch.iter().map(|(_, r)| r.work).sum::<f64>() / n;
        let (ew, se) = exp_work_estimate(&batch, model.beta());
        summary.push_str(&format!(
            "; sampled <W> = {w:.6}, <exp(-beta W)> = {ew:.6} +/- {se:.1e} vs Z_f/Z_i = {:.6}",
            schedule.partition_ratio(&model)
        ));
        let mut bytes = Vec::new();
        write_trajectories_csv(&mut bytes, &batch)?;
        Artifact {
            default_name: "trajectories.csv",
            bytes,
        }
    } else {
        let rows: Vec<Vec<f64>> = quasistatic_profile(&schedule, &model)
            .into_iter()
            .map(|r| r.to_vec())
            .collect();
        Artifact {
            default_name: "erase_energy.csv",
            bytes: csv_bytes(&["E", "p1", "W", "Q_R"], &rows)?,
        }
    };
    Ok((
        EnergyRun { outcome },
        Report {
            summary,
            artifact: Some(artifact),
            extra: vec![],
        },
    ))
}

// ---------------------------------------------------------------- erase-spin

pub const SPIN_KEYS: &[&str] = &["gamma", "hbar", "samples", "check_jarzynski", "truncation_tol", "reset"];

fn spin_config(params: &Params) -> Result<SpinProtocolConfig, CliError> {
    let reservoir = SpinReservoir::new(params.get_or("gamma", 1.0)?, params.get_or("hbar", 1.0)?)?;
    let reset = match params.get_or("reset", "low".to_string())?.as_str() {
        "low" | "reset_low" => ResetConvention::ResetLow,
        "high" | "reset_high" => ResetConvention::ResetHigh,
        other => return Err(invalid(format!("reset must be low or high (got {other})"))),
    };
    Ok(SpinProtocolConfig::new(
        reservoir,
        params.get_or("truncation_tol", DEFAULT_TRUNCATION_TOL)?,
        reset,
    )?)
}

pub struct SpinRun {
    pub dist: SpinlaborDistribution,
    pub lhs: f64,
    pub a: f64,
}

pub fn erase_spin(params: &Params, seed: u64) -> Result<(SpinRun, Report), CliError> {
    params.check_keys("erase-spin", SPIN_KEYS)?;
    let cfg = spin_config(params)?;
    let samples: usize = params.get_or("samples", 0)?;
    let check: bool = params.get_or("check_jarzynski", false)?;

    let dist = exact_spinlabor_distribution(&cfg);
    let (lhs, a) = jarzynski_like_check(&dist, &cfg.reservoir)?;
    let r = cfg.reservoir;
    let mut summary = format!(
        "<L_s> = {:.6}, ln2/gamma = {:.6}, P(L_s = 0) = {:.4}",
        dist.mean(),
        r.erasure_bound(),
        dist.prob_of_steps(0)
    );
    if check {
        let dev = (lhs - a).abs();
        summary.push_str(&format!("; lhs = {lhs:.12}, A = {a:.12}, |lhs - A| = {dev:.2e}"));
        if !(dev < JARZYNSKI_TOL) {
            return Err(CliError::Numerical(format!(
                "exponential average deviates from A by {dev:.2e} (limit {JARZYNSKI_TOL:e})"
            )));
        }
    }
    let artifact = if samples > 0 {
        let rows = sample_spinlabor(&cfg, samples, seed);
        let xs: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let (m, se) = sample_mean(&xs);
        summary.push_str(&format!("; sampled <L_s> = {m:.6} +/- {se:.1e}"));
        let mut bytes = Vec::new();
        write_samples_csv(&mut bytes, &rows)?;
        Artifact {
            default_name: "spinlabor_samples.csv",
            bytes,
        }
    } else {
        Artifact {
            default_name: "spinlabor_pmf.json",
            bytes: json_bytes(&dist)?,
        }
    };
    Ok((
        SpinRun { dist, lhs, a },
        Report {
            summary,
            artifact: Some(artifact),
            extra: vec![],
        },
    ))
}

// ---------------------------------------------------------------- central-spin

pub const CENTRAL_KEYS: &[&str] = &[
    "n_spins",
    "coupling",
    "couplings",
    "cycles",
    "pulse",
    "timing",
    "max_multiple",
    "dump_dir",
    "pulses_out",
];

fn bath_from(params: &Params) -> Result<BathSpec, CliError> {
    if let Some(g) = params.get::<Vec<f64>>("couplings")? {
        if params.contains("n_spins") && params.get::<usize>("n_spins")? != Some(g.len()) {
            return Err(invalid("n_spins does not match the number of couplings"));
        }
        return Ok(BathSpec::new(g)?);
    }
    Ok(BathSpec::uniform(params.get_or("n_spins", 8)?, params.get_or("coupling", 1.0)?)?)
}

#[derive(Serialize)]
struct BranchInfo {
    file: String,
    weight: f64,
    origin: Option<eraserlab::central_spin::Memory>,
}

pub fn central_spin(params: &Params) -> Result<(CycleOutcome, Report), CliError> {
    params.check_keys("central-spin", CENTRAL_KEYS)?;
    let bath = bath_from(params)?;
    let cycles: usize = params.get_or("cycles", 2)?;
    if cycles == 0 {
        return Err(invalid("cycles must be >= 1"));
    }
    let timing = match params.get_or("timing", "commensurate".to_string())?.as_str() {
        "half_flop" | "half-flop" => CycleTiming::HalfFlop,
        "commensurate" => CycleTiming::Commensurate {
            max_multiple: params.get_or("max_multiple", DEFAULT_MAX_MULTIPLE)?,
        },
        other => return Err(invalid(format!("timing must be commensurate or half_flop (got {other})"))),
    };
    let options = CycleOptions {
        timing,
        use_pulse: params.get_or("pulse", false)?,
    };
    let dump_dir: Option<PathBuf> = params.get("dump_dir")?;
    let pulses_out: Option<PathBuf> = params.get("pulses_out")?;
    if let Some(d) = &dump_dir {
        if !d.is_dir() {
            return Err(CliError::Io(format!("dump directory {} does not exist", d.display())));
        }
    }

    let out = erase_cycle_with(&initial_ensemble(bath.n_spins())?, &bath, cycles, &options)?;
    let last = out.reports.last().expect("cycles >= 1");
    let summary = format!(
        "N = {}, cycles = {cycles}, error probability per cycle = [{}], last brightness {:.3e} -> {:.3e}",
        bath.n_spins(),
        out.reports
            .iter()
            .map(|r| format!("{:.6e}", r.error_prob))
            .collect::<Vec<_>>()
            .join(", "),
        last.brightness_before,
        last.brightness_after
    );
    let mut bytes = Vec::new();
    write_reports_csv(&mut bytes, &out.reports)?;

    let mut extra = Vec::new();
    if let Some(dir) = dump_dir {
        let mut index = Vec::new();
        for (i, b) in out.final_state.branches().iter().enumerate() {
            let name = format!("branch_{i:04}.esec");
            let mut buf = Vec::new();
            write_dump(&mut buf, &b.state)?;
            extra.push((dir.join(&name), buf));
            index.push(BranchInfo {
                file: name,
                weight: b.weight,
                origin: b.origin,
            });
        }
        extra.push((dir.join("branches.json"), json_bytes(&index)?));
    }
    if let Some(path) = pulses_out {
        extra.push((path, json_bytes(&out.pulses)?));
    }
    Ok((
        out,
        Report {
            summary,
            artifact: Some(Artifact {
                default_name: "central_spin.csv",
                bytes,
            }),
            extra,
        },
    ))
}

// ---------------------------------------------------------------- engine

pub const ENGINE_KEYS: &[&str] = &["beta", "gamma", "hbar", "heat", "backend", "cycles", "bath_spins"];

pub struct EngineRun {
    pub ledger: CycleLedger,
    pub efficiency: Option<f64>,
    pub entropy_production: f64,
}

pub fn engine(params: &Params, seed: u64) -> Result<(EngineRun, Report), CliError> {
    params.check_keys("engine", ENGINE_KEYS)?;
    let beta: f64 = params.get_or("beta", 1.0)?;
    let backend = match params.get_or("backend", "ideal_bound".to_string())?.replace('-', "_").as_str() {
        "ideal_bound" => ErasureBackend::IdealBound,
        "spin_protocol" => ErasureBackend::SpinProtocol,
        "central_spin" => ErasureBackend::CentralSpin,
        other => {
            return Err(invalid(format!(
                "backend must be ideal_bound, spin_protocol or central_spin (got {other})"
            )))
        }
    };
    let config = EngineConfig {
        beta,
        gamma: params.get_or("gamma", 1.0)?,
        hbar: params.get_or("hbar", 1.0)?,
        heat_per_stroke: params.get_or("heat", LN_2 / beta)?,
        erasure_backend: backend,
        cycles: params.get_or("cycles", 1000)?,
        bath_spins: params.get_or("bath_spins", 8)?,
    };
    config.validate()?;

    let ledger = run_engine(&config, seed)?;
    let entropy_production = entropy_audit(&ledger)?;
    let eff = efficiency(&ledger).ok();
    let (q_mean, q_se) = ledger.spintherm_stats();
    let summary = format!(
        "cycles = {}, W = {:.6}, Q = {:.6}, efficiency = {}, entropy production = {entropy_production:.6e}, <Q_s> = {q_mean:.6} +/- {q_se:.1e}",
        config.cycles,
        ledger.total_work(),
        ledger.total_heat(),
        eff.map_or("undefined (no heat)".to_string(), |e| e.to_string()),
    );
    let mut bytes = Vec::new();
    ledger.write_csv(&mut bytes)?;
    Ok((
        EngineRun {
            ledger,
            efficiency: eff,
            entropy_production,
        },
        Report {
            summary,
            artifact: Some(Artifact {
                default_name: "engine_ledger.csv",
                bytes,
            }),
            extra: vec![],
        },
    ))
}

// ---------------------------------------------------------------- fluct

pub const FLUCT_KEYS: &[&str] = &["kind", "beta", "emax", "steps", "schedule", "gamma", "hbar", "eps"];

pub struct FluctRun {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub violations: usize,
}

pub fn fluct(params: &Params) -> Result<(FluctRun, Report), CliError> {
    params.check_keys("fluct", FLUCT_KEYS)?;
    let kind: String = params.get_or("kind", "spin".to_string())?;
    let run = match kind.as_str() {
        "spin" => {
            for k in ["beta", "emax", "steps", "schedule"] {
                if params.contains(k) {
                    return Err(invalid(format!("parameter {k} does not apply to spin fluctuations")));
                }
            }
            let eps = grid_param(params, "eps", "0:2:0.1")?;
            let cfg = spin_config(params)?;
            if let Some(e) = eps.iter().find(|e| !(**e >= 0.0)) {
                return Err(invalid(format!("eps must be >= 0 (got {e})")));
            }
            let dist = exact_spinlabor_distribution(&cfg);
            let mut rows = Vec::with_capacity(eps.len());
            let mut violations = 0;
            for e in eps {
                let t = violation_tail(&dist, &cfg.reservoir, e)?;
                violations += usize::from(t.probability > t.bound_a);
                rows.push(vec![e, t.probability, t.bound_a, t.bound_tight.unwrap_or(f64::NAN)]);
            }
            FluctRun {
                header: vec!["eps", "P", "A_bound", "C_bound"],
                rows,
                violations,
            }
        }
        "energy" => {
            for k in ["gamma", "hbar"] {
                if params.contains(k) {
                    return Err(invalid(format!("parameter {k} does not apply to energy fluctuations")));
                }
            }
            let model = ThermalModel::new(params.get_or("beta", 1.0)?)?;
            let mut sp = Params::default();
            for k in ["emax", "steps"] {
                sp.set_opt(k, params.raw(k).cloned());
            }
            sp.insert(
                "schedule",
                params.raw("schedule").cloned().unwrap_or_else(|| "linear".into()),
            );
            if !sp.contains("emax") {
                sp.insert("emax", 10.0.into());
            }
            let schedule = schedule_from(&sp, 20)?;
            let eps = grid_param(params, "eps", "0.1:1:0.1")?;
            if let Some(e) = eps.iter().find(|e| !(**e >= 0.0)) {
                return Err(invalid(format!("eps must be >= 0 (got {e})")));
            }
            let heat = work_distribution_exact(&schedule, &model)?.heat_to_reservoir;
            let mut rows = Vec::with_capacity(eps.len());
            let mut violations = 0;
            for e in eps {
                let t = landauer_violation_tail(&heat, model.beta(), e);
                violations += usize::from(t.probability >= t.bound);
                rows.push(vec![e, t.probability, t.bound]);
            }
            FluctRun {
                header: vec!["eps", "P", "bound"],
                rows,
                violations,
            }
        }
        other => return Err(invalid(format!("kind must be spin or energy (got {other})"))),
    };
    let summary = format!(
        "{kind} tail: {} of {} grid points violate the exponential bound",
        run.violations,
        run.rows.len()
    );
    let bytes = csv_bytes(&run.header, &run.rows)?;
    Ok((
        run,
        Report {
            summary,
            artifact: Some(Artifact {
                default_name: "fluct.csv",
                bytes,
            }),
            extra: vec![],
        },
    ))
}
