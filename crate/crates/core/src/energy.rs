//! Erasure of a two-level memory by slowly raising the energy of `|1>` above `|0>`
//! while the memory stays in contact with a heat bath.
//!
//! The quasi-static averages follow `dW = p1 dE` (work done raising the gap) and
//! `dQ = E dp1` (heat exchanged while the occupation relaxes). At trajectory level the
//! memory carries a definite bit: each gap increment costs `b * dE` of work, and the bit
//! is then redrawn from the equilibrium occupation at the new gap, with the energy change
//! of that redraw counted as heat into the reservoir.
//!
//! The exponential work average satisfies the Jarzynski equality in its standard form
//! `<exp(-beta (W - dF))> = 1`, i.e. `<exp(-beta W)> = Z_f / Z_i` with `Z = 1 + exp(-beta E)`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{compensated_sum, CompensatedSum, DiscreteDistribution};
use crate::seeding::{map_runs, rng_from_seed};
use crate::LN_2;

/// Largest schedule accepted by [`work_distribution_exact`].
pub const MAX_EXACT_STEPS: usize = 24;

/// Relative tolerance for merging coincident outcome values in exact distributions.
const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ErasureError {
    #[error("beta must be > 0 and finite (got {0})")]
    NonPositiveBeta(f64),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("schedule has {0} steps; exact enumeration supports at most {MAX_EXACT_STEPS}")]
    TooManySteps(usize),
    #[error("distribution carries total probability {0}, expected 1")]
    UnnormalizedDistribution(f64),
    #[error("partition-function ratio must be > 0 (got {0})")]
    InvalidPartitionRatio(f64),
}

/// Inverse temperature of the heat bath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawThermalModel")]
pub struct ThermalModel {
    beta: f64,
}

#[derive(Deserialize)]
struct RawThermalModel {
    beta: f64,
}

impl TryFrom<RawThermalModel> for ThermalModel {
    type Error = ErasureError;
    fn try_from(raw: RawThermalModel) -> Result<Self, Self::Error> {
        ThermalModel::new(raw.beta)
    }
}

impl ThermalModel {
    pub fn new(beta: f64) -> Result<Self, ErasureError> {
        if beta > 0.0 && beta.is_finite() {
            Ok(Self { beta })
        } else {
            Err(ErasureError::NonPositiveBeta(beta))
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Equilibrium occupation of the upper level at gap `e`.
    pub fn occupation(&self, e: f64) -> f64 {
        logistic_tail(self.beta * e)
    }

    /// Two-level partition function `1 + exp(-beta e)`.
    pub fn partition_function(&self, e: f64) -> f64 {
        1.0 + (-self.beta * e).exp()
    }
}

/// `exp(-x) / (1 + exp(-x))` without overflow for either sign of `x`.
pub(crate) fn logistic_tail(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Equilibrium occupation `p1 = exp(-beta E) / (1 + exp(-beta E))` of the upper level.
pub fn thermal_occupation(e: f64, beta: f64) -> Result<f64, ErasureError> {
    Ok(ThermalModel::new(beta)?.occupation(e))
}

/// Gap values visited by the protocol, starting at zero and never decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct GapSchedule {
    energies: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSchedule {
    energies: Vec<f64>,
}

impl TryFrom<RawSchedule> for GapSchedule {
    type Error = ErasureError;
    fn try_from(raw: RawSchedule) -> Result<Self, Self::Error> {
        GapSchedule::new(raw.energies)
    }
}

impl GapSchedule {
    pub fn new(energies: Vec<f64>) -> Result<Self, ErasureError> {
        match energies.first() {
            None => return Err(ErasureError::InvalidSchedule("no energies".into())),
            Some(&e0) if e0 != 0.0 => {
                return Err(ErasureError::InvalidSchedule(format!(
                    "first gap must be 0 (got {e0})"
                )))
            }
            _ => {}
        }
        for (i, w) in energies.windows(2).enumerate() {
            if !w[1].is_finite() {
                return Err(ErasureError::InvalidSchedule(format!(
                    "gap {} is not finite",
                    i + 1
                )));
            }
            if w[1] < w[0] {
                return Err(ErasureError::InvalidSchedule(format!(
                    "gap decreases at step {} ({} -> {})",
                    i + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(Self { energies })
    }

    /// Evenly spaced gaps `0, e_max/steps, ..., e_max`.
    pub fn linear(e_max: f64, steps: usize) -> Result<Self, ErasureError> {
        check_ramp(e_max, steps)?;
        let energies = (0..=steps)
            .map(|i| e_max * i as f64 / steps as f64)
            .collect();
        Self::new(energies)
    }

    /// Default slow ramp: a short linear segment from 0 to `1e-3`, then geometric
    /// spacing up to `e_max`. One percent of the steps (at least one) go to the linear
    /// segment.
    pub fn quasistatic(e_max: f64, steps: usize) -> Result<Self, ErasureError> {
        const E_MIN: f64 = 1e-3;
        check_ramp(e_max, steps)?;
        if steps < 2 || e_max <= E_MIN {
            return Self::linear(e_max, steps);
        }
        let n_lin = (steps / 100).max(1);
        let n_geo = steps - n_lin;
        let mut energies = Vec::with_capacity(steps + 1);
        for i in 0..=n_lin {
            energies.push(E_MIN * i as f64 / n_lin as f64);
        }
        let ratio = (e_max / E_MIN).ln() / n_geo as f64;
        for j in 1..=n_geo {
            energies.push(E_MIN * (ratio * j as f64).exp());
        }
        *energies.last_mut().expect("non-empty") = e_max;
        Self::new(energies)
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Number of gap increments.
    pub fn steps(&self) -> usize {
        self.energies.len() - 1
    }

    pub fn final_gap(&self) -> f64 {
        *self.energies.last().expect("schedule is never empty")
    }

    /// `Z_f / Z_i` for the two-level memory at the first and last gap.
    pub fn partition_ratio(&self, model: &ThermalModel) -> f64 {
        model.partition_function(self.final_gap()) / model.partition_function(self.energies[0])
    }

    /// Free-energy change `-ln(Z_f / Z_i) / beta`.
    pub fn free_energy_change(&self, model: &ThermalModel) -> f64 {
        -self.partition_ratio(model).ln() / model.beta()
    }
}

fn check_ramp(e_max: f64, steps: usize) -> Result<(), ErasureError> {
    if steps == 0 {
        return Err(ErasureError::InvalidSchedule("steps must be >= 1".into()));
    }
    if !(e_max > 0.0 && e_max.is_finite()) {
        return Err(ErasureError::InvalidSchedule(format!(
            "e_max must be > 0 and finite (got {e_max})"
        )));
    }
    Ok(())
}

/// Averages of the quasi-static protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasistaticOutcome {
    /// Work done on the memory, `sum p1(E_i) (E_{i+1} - E_i)`.
    pub work: f64,
    /// Heat delivered to the reservoir, `-sum E_{i+1} (p1(E_{i+1}) - p1(E_i))`.
    pub heat_to_reservoir: f64,
    /// Residual occupation of `|1>` when the ramp stops.
    pub error_probability: f64,
}

/// Quasi-static averages of work and heat for a slow gap ramp.
///
/// The memory starts maximally mixed (`p1 = 1/2` at zero gap); work uses the occupation
/// before each increment and heat the energy after it.
pub fn quasistatic_erase(schedule: &GapSchedule, model: &ThermalModel) -> QuasistaticOutcome {
    let e = schedule.energies();
    let mut work = CompensatedSum::new();
    let mut heat = CompensatedSum::new();
    let mut p = model.occupation(e[0]);
    for w in e.windows(2) {
        let p_next = model.occupation(w[1]);
        work.add(p * (w[1] - w[0]));
        heat.add(-w[1] * (p_next - p));
        p = p_next;
    }
    QuasistaticOutcome {
        work: work.total(),
        heat_to_reservoir: heat.total(),
        error_probability: p,
    }
}

/// Per-step profile of the quasi-static protocol: `(E, p1, W so far, Q_R so far)`.
pub fn quasistatic_profile(schedule: &GapSchedule, model: &ThermalModel) -> Vec<[f64; 4]> {
    let e = schedule.energies();
    let mut work = CompensatedSum::new();
    let mut heat = CompensatedSum::new();
    let mut p = model.occupation(e[0]);
    let mut rows = vec![[e[0], p, 0.0, 0.0]];
    for w in e.windows(2) {
        let p_next = model.occupation(w[1]);
        work.add(p * (w[1] - w[0]));
        heat.add(-w[1] * (p_next - p));
        p = p_next;
        rows.push([w[1], p, work.total(), heat.total()]);
    }
    rows
}

/// One stochastic run of the gap-raising protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub work: f64,
    pub heat_to_reservoir: f64,
    pub final_bit: u8,
}

/// Samples one trajectory; deterministic in `seed`.
///
/// The bit starts as a fair coin. For each increment `E_i -> E_{i+1}` the work grows by
/// `b (E_{i+1} - E_i)`, then the bit is redrawn from `Bernoulli(p1(E_{i+1}))` and the
/// reservoir receives `E_{i+1} (b_before - b_after)`.
pub fn sample_trajectory(schedule: &GapSchedule, model: &ThermalModel, seed: u64) -> TrajectoryRecord {
    let mut rng = rng_from_seed(seed);
    let mut bit = rng.random::<f64>() < 0.5;
    let mut work = 0.0;
    let mut heat = 0.0;
    for w in schedule.energies().windows(2) {
        if bit {
            work += w[1] - w[0];
        }
        let next = rng.random::<f64>() < model.occupation(w[1]);
        heat += w[1] * (f64::from(u8::from(bit)) - f64::from(u8::from(next)));
        bit = next;
    }
    TrajectoryRecord {
        work,
        heat_to_reservoir: heat,
        final_bit: u8::from(bit),
    }
}

/// `runs` trajectories with per-run seeds derived from `master_seed`, in run order.
/// Each entry carries the seed that reproduces it through [`sample_trajectory`].
pub fn sample_batch(
    schedule: &GapSchedule,
    model: &ThermalModel,
    master_seed: u64,
    runs: usize,
) -> Vec<(u64, TrajectoryRecord)> {
    map_runs(master_seed, runs, |_, seed| {
        (seed, sample_trajectory(schedule, model, seed))
    })
}

/// Writes trajectories as CSV with header `seed,W,Q_R,final_bit`.
pub fn write_trajectories_csv<W: Write>(
    out: W,
    rows: &[(u64, TrajectoryRecord)],
) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["seed", "W", "Q_R", "final_bit"])?;
    for (seed, r) in rows {
        w.write_record([
            seed.to_string(),
            r.work.to_string(),
            r.heat_to_reservoir.to_string(),
            r.final_bit.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Exact work and heat distributions of the trajectory process.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactWorkStatistics {
    pub work: DiscreteDistribution,
    pub heat_to_reservoir: DiscreteDistribution,
}

/// Exact PMFs of trajectory work and reservoir heat.
///
/// The bit held during increment `i` is independent of the others (it was redrawn from
/// equilibrium at `E_i`, or is the initial fair coin for `i = 0`), so the work is a sum
/// of independent two-point variables. The heat differs from the work by the final
/// memory energy `E_f b_f`, and `b_f` is independent of the bits that did work.
pub fn work_distribution_exact(
    schedule: &GapSchedule,
    model: &ThermalModel,
) -> Result<ExactWorkStatistics, ErasureError> {
    let steps = schedule.steps();
    if steps > MAX_EXACT_STEPS {
        return Err(ErasureError::TooManySteps(steps));
    }
    let e = schedule.energies();
    let mut work = DiscreteDistribution::point(0.0);
    for (i, w) in e.windows(2).enumerate() {
        let p = if i == 0 { 0.5 } else { model.occupation(w[0]) };
        work = work.add_bernoulli(w[1] - w[0], p, MERGE_TOL);
    }
    let e_f = schedule.final_gap();
    let p_f = if steps == 0 { 0.5 } else { model.occupation(e_f) };
    let heat = work.add_bernoulli(-e_f, p_f, MERGE_TOL);
    Ok(ExactWorkStatistics {
        work,
        heat_to_reservoir: heat,
    })
}

/// `<exp(-beta W)> - Z_f/Z_i`; zero when the Jarzynski equality holds.
pub fn jarzynski_check(
    dist: &DiscreteDistribution,
    beta: f64,
    z_ratio: f64,
) -> Result<f64, ErasureError> {
    ThermalModel::new(beta)?;
    if !(z_ratio > 0.0 && z_ratio.is_finite()) {
        return Err(ErasureError::InvalidPartitionRatio(z_ratio));
    }
    if !dist.is_normalized() {
        return Err(ErasureError::UnnormalizedDistribution(dist.total_mass()));
    }
    Ok(dist.expectation(|w| (-beta * w).exp()) - z_ratio)
}

/// Probability that the reservoir heat falls short of the Landauer value by more than
/// `eps`, alongside the exponential bound `exp(-beta eps)` it should respect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViolationTail {
    pub probability: f64,
    pub bound: f64,
}

/// `P[Q_R < ln2/beta - eps]` and `exp(-eps beta)`.
pub fn landauer_violation_tail(dist: &DiscreteDistribution, beta: f64, eps: f64) -> ViolationTail {
    let threshold = LN_2 / beta - eps;
    ViolationTail {
        probability: dist.prob_below(threshold),
        bound: (-eps * beta).exp(),
    }
}

/// Sample mean and standard error of `exp(-beta W)` over a batch.
pub fn exp_work_estimate(records: &[(u64, TrajectoryRecord)], beta: f64) -> (f64, f64) {
    let n = records.len() as f64;
    let xs: Vec<f64> = records.iter().map(|(_, r)| (-beta * r.work).exp()).collect();
    let mean = compensated_sum(xs.iter().copied()) / n;
    let var = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}
