//! Parameter sweeps: one CSV row per grid point, in grid order.

use eraserlab::seeding::derive_seed;
use rayon::prelude::*;
use serde_json::Value;

use crate::error::{invalid, CliError};
use crate::experiments::{self, CENTRAL_KEYS, ENERGY_KEYS, ENGINE_KEYS, FLUCT_KEYS, SPIN_KEYS};
use crate::params::Params;

const INTEGER_KEYS: &[&str] = &[
    "steps",
    "trajectories",
    "samples",
    "cycles",
    "n_spins",
    "max_multiple",
    "bath_spins",
];
const NON_NUMERIC_KEYS: &[&str] = &[
    "schedule",
    "reset",
    "check_jarzynski",
    "couplings",
    "pulse",
    "timing",
    "dump_dir",
    "pulses_out",
    "backend",
    "kind",
];

pub struct SweepTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: String,
}

fn keys_of(experiment: &str) -> Result<&'static [&'static str], CliError> {
    Ok(match experiment {
        "erase-energy" => ENERGY_KEYS,
        "erase-spin" => SPIN_KEYS,
        "central-spin" => CENTRAL_KEYS,
        "engine" => ENGINE_KEYS,
        "fluct" => FLUCT_KEYS,
        other => {
            return Err(invalid(format!(
                "cannot sweep experiment {other} (expected erase-energy, erase-spin, central-spin, engine or fluct)"
            )))
        }
    })
}

fn point_value(param: &str, x: f64) -> Result<Value, CliError> {
    if INTEGER_KEYS.contains(&param) {
        if x.fract() != 0.0 || x < 0.0 {
            return Err(invalid(format!("{param} needs non-negative integers (got {x})")));
        }
        return Ok(Value::from(x as u64));
    }
    Ok(Value::from(x))
}

/// Header and row builder for one grid point.
fn run_point(
    experiment: &str,
    param: &str,
    x: f64,
    params: &Params,
    seed: u64,
) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let with_param = |cols: &[&str]| -> Vec<String> {
        std::iter::once(param.to_string())
            .chain(cols.iter().map(|c| c.to_string()))
            .collect()
    };
    Ok(match experiment {
        "erase-energy" => {
            let (run, _) = experiments::erase_energy(params, seed)?;
            let o = run.outcome;
            (
                with_param(&["W", "Q_R", "error_probability"]),
                vec![vec![x, o.work, o.heat_to_reservoir, o.error_probability]],
            )
        }
        "erase-spin" => {
            let (run, _) = experiments::erase_spin(params, seed)?;
            let r = run.dist.reservoir();
            (
                with_param(&["mean_L_s", "ln2_over_gamma", "lhs", "A", "abs_dev"]),
                vec![vec![
                    x,
                    run.dist.mean(),
                    r.erasure_bound(),
                    run.lhs,
                    run.a,
                    (run.lhs - run.a).abs(),
                ]],
            )
        }
        "central-spin" => {
            let (out, _) = experiments::central_spin(params)?;
            let first = &out.reports[0];
            let last = out.reports.last().expect("at least one cycle");
            (
                with_param(&["first_error", "last_error", "last_brightness_after"]),
                vec![vec![x, first.error_prob, last.error_prob, last.brightness_after]],
            )
        }
        "engine" => {
            let (run, _) = experiments::engine(params, seed)?;
            let (q, _) = run.ledger.spintherm_stats();
            (
                with_param(&["efficiency", "entropy_production", "mean_Q_s", "total_W"]),
                vec![vec![
                    x,
                    run.efficiency.unwrap_or(f64::NAN),
                    run.entropy_production,
                    q,
                    run.ledger.total_work(),
                ]],
            )
        }
        "fluct" => {
            let (run, _) = experiments::fluct(params)?;
            if param == "eps" {
                (run.header.iter().map(|c| c.to_string()).collect(), run.rows)
            } else {
                let rows = run
                    .rows
                    .into_iter()
                    .map(|r| std::iter::once(x).chain(r).collect())
                    .collect();
                (with_param(&run.header), rows)
            }
        }
        _ => unreachable!("experiment checked before the sweep starts"),
    })
}

pub fn sweep(
    experiment: &str,
    base: &Params,
    param: &str,
    grid: &[f64],
    seed: u64,
) -> Result<SweepTable, CliError> {
    let param = param.replace('-', "_");
    let keys = keys_of(experiment)?;
    if !keys.contains(&param.as_str()) || NON_NUMERIC_KEYS.contains(&param.as_str()) {
        let numeric: Vec<&str> = keys
            .iter()
            .copied()
            .filter(|k| !NON_NUMERIC_KEYS.contains(k))
            .collect();
        return Err(invalid(format!(
            "unknown parameter {param} for {experiment} sweep (expected one of: {})",
            numeric.join(", ")
        )));
    }
    if grid.is_empty() {
        return Err(invalid("grid is empty"));
    }
    base.check_keys(experiment, keys)?;
    let points: Vec<Params> = grid
        .iter()
        .map(|&x| {
            let mut p = base.clone();
            p.insert(&param, point_value(&param, x)?);
            Ok(p)
        })
        .collect::<Result<_, CliError>>()?;

    let results: Vec<(Vec<String>, Vec<Vec<f64>>)> = points
        .par_iter()
        .zip(grid.par_iter())
        .enumerate()
        .map(|(i, (p, &x))| run_point(experiment, &param, x, p, derive_seed(seed, i as u64)))
        .collect::<Result<_, _>>()?;
    let header = results[0].0.clone();
    let rows: Vec<Vec<f64>> = results.into_iter().flat_map(|(_, r)| r).collect();

    let mut summary = format!("sweep {experiment} over {param}: {} rows", rows.len());
    if experiment == "erase-spin" {
        let worst = rows.iter().map(|r| r[5]).fold(0.0, f64::max);
        summary.push_str(&format!(", max |lhs - A| = {worst:.2e}"));
    }
    if experiment == "fluct" {
        let (p, b) = if param == "eps" { (1, 2) } else { (2, 3) };
        let bad = rows.iter().filter(|r| r[p] > r[b]).count();
        summary.push_str(&format!(", {bad} rows with P above the bound"));
    }
    Ok(SweepTable {
        header,
        rows,
        summary,
    })
}
