//! Ledger-level spin-heat engine.
//!
//! Each cycle runs three stages on a one-bit working medium:
//!
//! 1. the bit starts in its reset state;
//! 2. a work stroke draws heat `Q` from the thermal reservoir and outputs work `W = Q`,
//!    leaving `ln 2` of entropy in the bit; the drive supplies spinlabor `-ħ`;
//! 3. the bit is erased against a spin reservoir, which receives spintherm `𝓠_s`.
//!
//! Entropy flows are booked as `-βQ` for the thermal reservoir, `γ𝓠_s` for the spin
//! reservoir and the Shannon entropy change of the bit. The drive spinlabor is recorded
//! but does not enter the spin-reservoir entropy.

use std::io::Write;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::central_spin::{self, BathSpec, CentralSpinError};
use crate::dist::{binary_entropy, compensated_sum};
use crate::seeding::derive_seed;
use crate::spin::{self, SpinError, SpinProtocolConfig, SpinReservoir};
use crate::LN_2;

/// Allowed rounding excess of `Q` over `ln 2 / β`.
const HEAT_SLACK: f64 = 1e-12;
/// Largest net memory-entropy change accepted for a completed ledger.
const MEMORY_CLOSURE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid engine config: {0}")]
    ConfigInvalid(String),
    #[error("memory entropy does not return to zero over the ledger (net {0})")]
    IncompleteCycle(f64),
    #[error("total heat is zero; efficiency is undefined")]
    ZeroHeat,
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error(transparent)]
    CentralSpin(#[from] CentralSpinError),
}

/// How the working bit is erased.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErasureBackend {
    /// Spintherm exactly at the bound `ln 2 / γ`.
    IdealBound,
    /// Spinlabor sampled from the stepwise spin-reservoir protocol (reset to the lower state).
    SpinProtocol,
    /// Spintherm `ħ⟨Δn⟩` from one simulated central-spin erasure with a uniform bath.
    CentralSpin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub beta: f64,
    pub gamma: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    pub heat_per_stroke: f64,
    pub erasure_backend: ErasureBackend,
    pub cycles: usize,
    /// Bath size for the central-spin backend.
    #[serde(default = "default_bath_spins")]
    pub bath_spins: usize,
}

fn one() -> f64 {
    1.0
}

fn default_bath_spins() -> usize {
    8
}

impl EngineConfig {
    pub fn new(
        beta: f64,
        gamma: f64,
        heat_per_stroke: f64,
        erasure_backend: ErasureBackend,
        cycles: usize,
    ) -> Result<Self, EngineError> {
        let c = Self {
            beta,
            gamma,
            hbar: 1.0,
            heat_per_stroke,
            erasure_backend,
            cycles,
            bath_spins: default_bath_spins(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::ConfigInvalid(m));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be > 0 (got {})", self.beta));
        }
        SpinReservoir::new(self.gamma, self.hbar)?;
        if !(self.heat_per_stroke >= 0.0 && self.heat_per_stroke.is_finite()) {
            return bad(format!("heat_per_stroke must be >= 0 (got {})", self.heat_per_stroke));
        }
        let ceiling = LN_2 / self.beta;
        if self.heat_per_stroke > ceiling * (1.0 + HEAT_SLACK) {
            return bad(format!(
                "heat_per_stroke {} exceeds ln2/beta = {ceiling}; one bit cannot carry more",
                self.heat_per_stroke
            ));
        }
        if self.erasure_backend == ErasureBackend::CentralSpin {
            // Half a quantum of spintherm per bit must carry away ln 2 of entropy.
            if self.gamma * self.hbar < 2.0 * LN_2 {
                return bad(format!(
                    "central_spin backend needs gamma*hbar >= 2 ln 2 (got {})",
                    self.gamma * self.hbar
                ));
            }
            if self.bath_spins == 0 || self.bath_spins > central_spin::DEFAULT_MAX_SPINS {
                return bad(format!("bath_spins must be in 1..=16 (got {})", self.bath_spins));
            }
        }
        Ok(())
    }

    pub fn reservoir(&self) -> SpinReservoir {
        SpinReservoir::new(self.gamma, self.hbar).expect("validated")
    }
}

/// Bookkeeping of one engine cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub work: f64,
    pub heat: f64,
    /// Spinlabor spent by the erasure.
    pub spinlabor: f64,
    /// Spinlabor delivered by the drive during the work stroke.
    pub drive_spinlabor: f64,
    pub spintherm: f64,
    pub ds_thermal: f64,
    pub ds_spin: f64,
    /// Net change of the bit's entropy over the cycle.
    pub ds_memory: f64,
    /// Probability the bit is left in the wrong state after erasure.
    pub erasure_error: f64,
}

impl CycleRecord {
    pub fn entropy_production(&self) -> f64 {
        self.ds_thermal + self.ds_spin + self.ds_memory
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CycleLedger {
    pub records: Vec<CycleRecord>,
}

impl CycleLedger {
    pub fn total_work(&self) -> f64 {
        compensated_sum(self.records.iter().map(|r| r.work))
    }

    pub fn total_heat(&self) -> f64 {
        compensated_sum(self.records.iter().map(|r| r.heat))
    }

    /// Mean erasure spintherm and its standard error.
    pub fn spintherm_stats(&self) -> (f64, f64) {
        let xs: Vec<f64> = self.records.iter().map(|r| r.spintherm).collect();
        spin::sample_mean(&xs)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["cycle", "W", "Q", "L_s", "Q_s", "dS_thermal", "dS_spin", "dS_memory"])?;
        for r in &self.records {
            w.write_record([
                r.cycle.to_string(),
                r.work.to_string(),
                r.heat.to_string(),
                r.spinlabor.to_string(),
                r.spintherm.to_string(),
                r.ds_thermal.to_string(),
                r.ds_spin.to_string(),
                r.ds_memory.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Erasure outcome of one central-spin cycle, reused for every engine cycle.
#[derive(Debug, Clone, Copy)]
struct CentralSpinErasure {
    spintherm: f64,
    error: f64,
}

/// Engine bound to one configuration.
#[derive(Debug)]
pub struct Engine {
    config: EngineConfig,
    spin_config: SpinProtocolConfig,
    central: OnceLock<Result<CentralSpinErasure, CentralSpinError>>,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let spin_config = SpinProtocolConfig::with_reservoir(config.reservoir());
        Ok(Self {
            config,
            spin_config,
            central: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    fn central_erasure(&self) -> Result<CentralSpinErasure, EngineError> {
        self.central
            .get_or_init(|| {
                let bath = BathSpec::uniform(self.config.bath_spins, 1.0)?;
                let start = central_spin::initial_ensemble(self.config.bath_spins)?;
                let out = central_spin::erase_cycle(&start, &bath, 1, false)?;
                let r = &out.reports[0];
                Ok(CentralSpinErasure {
                    spintherm: self.config.hbar * r.mean_magnons,
                    error: r.error_prob,
                })
            })
            .clone()
            .map_err(EngineError::from)
    }

    /// Runs cycle `cycle` (1-based). Randomness comes from `derive_seed(seed, cycle)`.
    pub fn run_cycle(&self, cycle: usize, seed: u64) -> Result<CycleRecord, EngineError> {
        let c = &self.config;
        let q = c.heat_per_stroke;
        let (spinlabor, spintherm, error) = match c.erasure_backend {
            ErasureBackend::IdealBound => (LN_2 / c.gamma, LN_2 / c.gamma, 0.0),
            ErasureBackend::SpinProtocol => {
                let l = spin::sample_spinlabor_once(&self.spin_config, derive_seed(seed, cycle as u64));
                let ledger = spin::first_law_ledger(l, &self.spin_config)?;
                (ledger.spinlabor, ledger.spintherm_to_reservoir, 0.0)
            }
            ErasureBackend::CentralSpin => {
                let e = self.central_erasure()?;
                (0.0, e.spintherm, e.error)
            }
        };
        // Stage 2 loads one bit of entropy; stage 3 removes it up to the residual error.
        let loaded = LN_2;
        let removed = LN_2 - binary_entropy(error);
        let ds_memory = loaded - removed;
        Ok(CycleRecord {
            cycle,
            work: q,
            heat: q,
            spinlabor,
            drive_spinlabor: -c.hbar,
            spintherm,
            ds_thermal: -c.beta * q,
            ds_spin: c.gamma * spintherm,
            ds_memory,
            erasure_error: error,
        })
    }

    /// Runs all configured cycles in order.
    pub fn run(&self, seed: u64) -> Result<CycleLedger, EngineError> {
        let records = (1..=self.config.cycles)
            .map(|i| self.run_cycle(i, seed))
            .collect::<Result<_, _>>()?;
        Ok(CycleLedger { records })
    }
}

/// Runs `config.cycles` cycles and returns the ledger.
pub fn run_engine(config: &EngineConfig, seed: u64) -> Result<CycleLedger, EngineError> {
    Engine::new(config.clone())?.run(seed)
}

/// Cumulative entropy production `Σ (dS_thermal + dS_spin + dS_memory)`.
pub fn entropy_audit(ledger: &CycleLedger) -> Result<f64, EngineError> {
    let memory = compensated_sum(ledger.records.iter().map(|r| r.ds_memory));
    if memory.abs() > MEMORY_CLOSURE_TOL {
        return Err(EngineError::IncompleteCycle(memory));
    }
    Ok(compensated_sum(
        ledger.records.iter().map(CycleRecord::entropy_production),
    ))
}

/// `ΣW / ΣQ`.
pub fn efficiency(ledger: &CycleLedger) -> Result<f64, EngineError> {
    let q = ledger.total_heat();
    if q == 0.0 {
        return Err(EngineError::ZeroHeat);
    }
    Ok(ledger.total_work() / q)
}

/// Carnot efficiency `1 - T_C / T_H` for reference.
pub fn carnot_efficiency(t_hot: f64, t_cold: f64) -> Result<f64, EngineError> {
    if !(t_hot > 0.0 && t_cold > 0.0 && t_cold <= t_hot && t_hot.is_finite()) {
        return Err(EngineError::ConfigInvalid(format!(
            "need 0 < t_cold <= t_hot (got t_hot={t_hot}, t_cold={t_cold})"
        )));
    }
    Ok(1.0 - t_cold / t_hot)
}
