use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evolve::{half_flop_time, scan_transfer_time, HyperfineEvolver};
use super::pulse::{brightness, design_pulse_ensemble};
use super::state::{Branch, BranchEnsemble, SectorState};
use super::{BathSpec, CentralSpinError, Memory, PulseSpec};

/// Default bound on the odd multiple searched by [`CycleTiming::Commensurate`].
pub const DEFAULT_MAX_MULTIPLE: usize = 4096;

/// How long each erasure stroke lasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CycleTiming {
    /// Half a flop period of the dominant sector.
    HalfFlop,
    /// The odd multiple `(2j+1)` of the dominant half-flop time, up to `max_multiple`,
    /// that leaves the least `↓` population over all branches. Every odd multiple
    /// completes the dominant flop, while other branches flop at incommensurate rates
    /// and need a time at which their phases also line up.
    Commensurate { max_multiple: usize },
}

impl Default for CycleTiming {
    fn default() -> Self {
        CycleTiming::Commensurate {
            max_multiple: DEFAULT_MAX_MULTIPLE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CycleOptions {
    pub timing: CycleTiming,
    pub use_pulse: bool,
}

/// Per-cycle diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycle: usize,
    /// Magnon number of the dominant `↓` branch.
    pub dominant_magnons: usize,
    pub half_flop_time: f64,
    /// Odd multiple of `half_flop_time` actually evolved.
    pub time_multiple: usize,
    pub evolution_time: f64,
    /// Total `↓` population at the end of the cycle.
    pub error_prob: f64,
    /// `↓` population coming from branches that started the cycle in `↑`.
    pub fixed_point_leakage: f64,
    /// Fraction of the dominant branch left in `↓`.
    pub transfer_residual: f64,
    pub brightness_before: f64,
    pub brightness_after: f64,
    pub memory_entropy_before: f64,
    pub memory_entropy_after: f64,
    pub bath_entropy_before: f64,
    pub bath_entropy_after: f64,
    pub mean_magnons: f64,
    /// `|⟨J_z⟩_after - ⟨J_z⟩_before|` over the evolution and pulse.
    pub jz_drift: f64,
    pub branches: usize,
}

#[derive(Debug, Clone)]
pub struct CycleOutcome {
    pub final_state: BranchEnsemble,
    pub reports: Vec<CycleReport>,
    pub pulses: Vec<Option<PulseSpec>>,
}

impl CycleOutcome {
    pub fn error_probs(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.error_prob).collect()
    }
}

/// Fully polarized bath with a maximally mixed memory.
pub fn initial_ensemble(n_spins: usize) -> Result<BranchEnsemble, CentralSpinError> {
    let branches = [Memory::Up, Memory::Down]
        .into_iter()
        .map(|m| {
            Ok(Branch {
                weight: 0.5,
                state: SectorState::product(n_spins, m, 0)?,
                origin: Some(m),
            })
        })
        .collect::<Result<Vec<_>, CentralSpinError>>()?;
    BranchEnsemble::new(n_spins, branches)
}

/// Largest-weight branch that starts in `↓`; ties go to the fewest magnons.
fn dominant(ensemble: &BranchEnsemble) -> Option<(usize, usize)> {
    let mut best: Option<(usize, f64, usize)> = None;
    for (i, b) in ensemble.branches().iter().enumerate() {
        if b.origin != Some(Memory::Down) {
            continue;
        }
        let n = b.state.sectors().map(|(k, _)| k.magnons).min().unwrap_or(0);
        let better = match best {
            None => true,
            Some((_, w, m)) => {
                let tol = 1e-12 * w.max(b.weight);
                b.weight > w + tol || ((b.weight - w).abs() <= tol && n < m)
            }
        };
        if better {
            best = Some((i, b.weight, n));
        }
    }
    best.map(|(i, _, n)| (i, n))
}

fn dominant_half_flop(bath: &BathSpec, n: usize) -> Result<f64, CentralSpinError> {
    let big_n = bath.n_spins();
    let n = if n >= big_n { 0 } else { n };
    match half_flop_time(bath, n) {
        Ok(t) => Ok(t),
        Err(CentralSpinError::NonUniformCouplings) if n == 0 => {
            Ok(std::f64::consts::PI / (2.0 * bath.coupling_norm()))
        }
        Err(CentralSpinError::NonUniformCouplings) => {
            let g_min = bath.couplings().iter().copied().fold(f64::INFINITY, f64::min);
            let slowest = std::f64::consts::PI / (g_min * (((n + 1) * (big_n - n)) as f64).sqrt());
            scan_transfer_time(bath, n, slowest, 4000).map(|(t, _)| t)
        }
        Err(e) => Err(e),
    }
}

fn choose_multiple(
    evolver: &HyperfineEvolver,
    ensemble: &BranchEnsemble,
    t_dom: f64,
    timing: CycleTiming,
) -> Result<usize, CentralSpinError> {
    let CycleTiming::Commensurate { max_multiple } = timing else {
        return Ok(1);
    };
    let traces = ensemble
        .branches()
        .par_iter()
        .map(|b| evolver.down_trace(&b.state).map(|t| t.map(|t| (b.weight, t))))
        .collect::<Result<Vec<_>, _>>()?;
    let Some(traces) = traces.into_iter().collect::<Option<Vec<_>>>() else {
        return Ok(1);
    };
    let candidates: Vec<usize> = (1..=max_multiple.max(1)).step_by(2).collect();
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|&a| {
            let t = a as f64 * t_dom;
            traces.iter().map(|(w, tr)| w * tr.down_population(t)).sum()
        })
        .collect();
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[best] {
            best = i;
        }
    }
    Ok(candidates[best])
}

/// Runs `cycles` erasure cycles. Each cycle re-randomizes the memory, evolves under the
/// exchange Hamiltonian and, when `use_pulse` is set, applies a pulse designed to darken
/// the bath states left next to the reset memory.
pub fn erase_cycle(
    state: &BranchEnsemble,
    bath: &BathSpec,
    cycles: usize,
    use_pulse: bool,
) -> Result<CycleOutcome, CentralSpinError> {
    erase_cycle_with(
        state,
        bath,
        cycles,
        &CycleOptions {
            use_pulse,
            ..CycleOptions::default()
        },
    )
}

pub fn erase_cycle_with(
    state: &BranchEnsemble,
    bath: &BathSpec,
    cycles: usize,
    options: &CycleOptions,
) -> Result<CycleOutcome, CentralSpinError> {
    if state.n_spins() != bath.n_spins() {
        return Err(CentralSpinError::LengthMismatch {
            expected: bath.n_spins(),
            got: state.n_spins(),
        });
    }
    let evolver = HyperfineEvolver::new(bath);
    let mut current = state.clone();
    let mut reports = Vec::with_capacity(cycles);
    let mut pulses = Vec::with_capacity(cycles);
    for cycle in 1..=cycles {
        let bath_entropy_before = current.bath_entropy();
        let fresh = current.rerandomize_memory();
        let memory_entropy_before = fresh.memory_entropy();
        let jz_before = fresh.total_jz();

        let (dom_index, dom_n) = dominant(&fresh).ok_or(CentralSpinError::InvalidState(
            "no branch starts in the down state".into(),
        ))?;
        let t_dom = dominant_half_flop(bath, dom_n)?;
        let multiple = choose_multiple(&evolver, &fresh, t_dom, options.timing)?;
        let t = multiple as f64 * t_dom;

        let evolved: Vec<Branch> = fresh
            .branches()
            .par_iter()
            .map(|b| {
                Ok(Branch {
                    weight: b.weight,
                    state: evolver.evolve(&b.state, t)?,
                    origin: b.origin,
                })
            })
            .collect::<Result<_, CentralSpinError>>()?;
        let mut ensemble = BranchEnsemble::new(bath.n_spins(), evolved)?;

        let brightness_before = brightness(&ensemble, bath);
        let (brightness_after, pulse) = if options.use_pulse
            && ensemble.memory_population(Memory::Up) > 0.0
        {
            let (p, b) = design_pulse_ensemble(&ensemble, bath)?;
            ensemble = ensemble.apply_pulse(&p)?;
            (b, Some(p))
        } else {
            (brightness_before, None)
        };

        let dom = &ensemble.branches()[dom_index];
        let transfer_residual = dom.state.memory_population(Memory::Down) / dom.state.norm_sqr();
        reports.push(CycleReport {
            cycle,
            dominant_magnons: dom_n,
            half_flop_time: t_dom,
            time_multiple: multiple,
            evolution_time: t,
            error_prob: ensemble.memory_population(Memory::Down),
            fixed_point_leakage: ensemble.down_population_from(Memory::Up),
            transfer_residual,
            brightness_before,
            brightness_after,
            memory_entropy_before,
            memory_entropy_after: ensemble.memory_entropy(),
            bath_entropy_before,
            bath_entropy_after: ensemble.bath_entropy(),
            mean_magnons: ensemble.mean_magnons(),
            jz_drift: (ensemble.total_jz() - jz_before).abs(),
            branches: ensemble.branches().len(),
        });
        pulses.push(pulse);
        current = ensemble;
    }
    Ok(CycleOutcome {
        final_state: current,
        reports,
        pulses,
    })
}

/// Writes reports as CSV with header `cycle,error_prob,brightness_before,brightness_after`.
pub fn write_reports_csv<W: Write>(out: W, reports: &[CycleReport]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["cycle", "error_prob", "brightness_before", "brightness_after"])?;
    for r in reports {
        w.write_record([
            r.cycle.to_string(),
            r.error_prob.to_string(),
            r.brightness_before.to_string(),
            r.brightness_after.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::LN_2;

    #[test]
    fn first_cycle_erases_any_bath_size() {
        for n in 1..=6 {
            let bath = BathSpec::uniform(n, 0.8).unwrap();
            let out = erase_cycle(&initial_ensemble(n).unwrap(), &bath, 1, false).unwrap();
            let r = &out.reports[0];
            assert!(r.error_prob <= 1e-10, "N={n}: {r:?}");
            assert!((r.memory_entropy_before - LN_2).abs() < 1e-12);
            assert!(r.memory_entropy_after < 1e-8);
            assert!(r.bath_entropy_before.abs() < 1e-12);
            assert!((r.bath_entropy_after - LN_2).abs() < 1e-8);
            assert!(r.jz_drift < 1e-12);
        }
    }

    #[test]
    fn second_cycle_quarter_leak_without_pulse() {
        let bath = BathSpec::uniform(4, 1.0).unwrap();
        let out = erase_cycle(&initial_ensemble(4).unwrap(), &bath, 2, false).unwrap();
        assert!((out.reports[1].fixed_point_leakage - 0.25).abs() < 1e-9);
    }

    #[test]
    fn csv_header() {
        let bath = BathSpec::uniform(2, 1.0).unwrap();
        let out = erase_cycle(&initial_ensemble(2).unwrap(), &bath, 2, true).unwrap();
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, &out.reports).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("cycle,error_prob,brightness_before,brightness_after\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
