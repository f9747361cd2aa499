//! Erasure by a central spin exchanging angular momentum with a bath of `N` spins.
//!
//! The memory spin `M` couples to bath spin `k` through the flip-flop interaction
//! `H = Σ_k g_k (σ⁺_M σ⁻_k + σ⁻_M σ⁺_k)`. Starting from a fully polarized bath (all bath
//! spins up, zero magnons), `|↑⟩_M|0⟩` has no exchange partner and is a fixed point,
//! while `|↓⟩_M|0⟩` flops into `|↑⟩_M` times the bright one-magnon state. Evolving for
//! half a flop period resets the memory to `↑` and leaves the bit's entropy in the bath.
//!
//! States are stored per sector `(memory, magnons)` with amplitudes over the `C(N, n)`
//! bath configurations. The Hamiltonian only couples `(↓, n)` with `(↑, n+1)`, which
//! share the same total `J_z`. Mixed states are ensembles of pure branches.
//!
//! Later cycles find the bath already carrying magnons. A bath state `χ` paired with
//! `↑` stays put only if `Σ_k g_k σ⁺_k χ = 0`; diagonal phase pulses on the bath spins
//! are designed to make the post-erasure bath states satisfy this as closely as possible.

mod basis;
mod cycle;
mod dump;
mod evolve;
mod pulse;
mod state;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use basis::{binomial, SectorBasis};
pub use cycle::{
    erase_cycle, erase_cycle_with, initial_ensemble, CycleOptions, CycleOutcome, CycleReport,
    CycleTiming, DEFAULT_MAX_MULTIPLE, write_reports_csv,
};
pub use dump::{read_dump, write_dump, DUMP_MAGIC, DUMP_VERSION};
pub use evolve::{
    evolve_hyperfine, half_flop_time, scan_transfer_time, HyperfineEvolver, DENSE_SECTOR_LIMIT,
    MAX_SECTOR_DIM,
};
pub use pulse::{apply_pulse, brightness, design_pulse, design_pulse_ensemble, DARK_TOL};
pub use state::{Branch, BranchEnsemble, SectorKey, SectorState};

/// Largest bath accepted by default.
pub const DEFAULT_MAX_SPINS: usize = 16;
/// Hard limit from the 32-bit configuration encoding.
pub const HARD_MAX_SPINS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CentralSpinError {
    #[error("bath must have at least one spin")]
    EmptyBath,
    #[error("bath has {0} spins; the limit is {1}")]
    TooManySpins(usize, usize),
    #[error("coupling g_{0} = {1} must be positive and finite")]
    InvalidCoupling(usize, f64),
    #[error("sector dimension {0} exceeds the memory budget of {MAX_SECTOR_DIM}")]
    DimensionOverflow(usize),
    #[error("couplings are not uniform; use a numerical scan for the flop time")]
    NonUniformCouplings,
    #[error("magnon number {0} is out of range for {1} bath spins")]
    InvalidMagnons(usize, usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("state has no amplitude in any memory-up sector")]
    NoUpSectorSupport,
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("evolution time must be finite and >= 0 (got {0})")]
    InvalidTime(f64),
    #[error("pulse phase {0} is not finite")]
    NonFinitePhase(usize),
    #[error("dump: {0}")]
    Dump(String),
}

/// Value of the memory spin. `Up` is the reset state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Memory {
    Up,
    Down,
}

impl Memory {
    /// `J_z` of the memory in units of ħ.
    pub fn jz(self) -> f64 {
        match self {
            Memory::Up => 0.5,
            Memory::Down => -0.5,
        }
    }
}

/// Bath of `N` spins with exchange couplings `g_k` to the memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBath")]
pub struct BathSpec {
    couplings: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBath {
    couplings: Vec<f64>,
}

impl TryFrom<RawBath> for BathSpec {
    type Error = CentralSpinError;
    fn try_from(raw: RawBath) -> Result<Self, Self::Error> {
        BathSpec::new(raw.couplings)
    }
}

impl BathSpec {
    pub fn new(couplings: Vec<f64>) -> Result<Self, CentralSpinError> {
        Self::with_limit(couplings, DEFAULT_MAX_SPINS)
    }

    /// Like [`BathSpec::new`] with a custom size limit (at most [`HARD_MAX_SPINS`]).
    pub fn with_limit(couplings: Vec<f64>, max_spins: usize) -> Result<Self, CentralSpinError> {
        let limit = max_spins.min(HARD_MAX_SPINS);
        if couplings.is_empty() {
            return Err(CentralSpinError::EmptyBath);
        }
        if couplings.len() > limit {
            return Err(CentralSpinError::TooManySpins(couplings.len(), limit));
        }
        if let Some((k, &g)) = couplings
            .iter()
            .enumerate()
            .find(|(_, &g)| !(g > 0.0 && g.is_finite()))
        {
            return Err(CentralSpinError::InvalidCoupling(k, g));
        }
        Ok(Self { couplings })
    }

    /// `N` spins all coupled with strength `g`.
    pub fn uniform(n: usize, g: f64) -> Result<Self, CentralSpinError> {
        Self::new(vec![g; n])
    }

    pub fn n_spins(&self) -> usize {
        self.couplings.len()
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// `Some(g)` when every coupling equals `g` to relative precision 1e-12.
    pub fn uniform_coupling(&self) -> Option<f64> {
        let g0 = self.couplings[0];
        self.couplings
            .iter()
            .all(|&g| (g - g0).abs() <= 1e-12 * g0)
            .then_some(g0)
    }

    /// `sqrt(Σ g_k²)`, the coupling of `|↓⟩|0⟩` to its bright partner.
    pub fn coupling_norm(&self) -> f64 {
        self.couplings.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Phases `φ_k` of a diagonal pulse on the bath. A configuration picks up
/// `exp(i Σ_k φ_k s_k)` with `s_k = +1/2` for an up spin and `-1/2` for a down spin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub phases: Vec<f64>,
}

impl PulseSpec {
    pub fn zeros(n: usize) -> Self {
        Self { phases: vec![0.0; n] }
    }

    /// `0, π, 0, π, ...`.
    pub fn alternating(n: usize) -> Self {
        Self {
            phases: (0..n)
                .map(|k| if k % 2 == 1 { std::f64::consts::PI } else { 0.0 })
                .collect(),
        }
    }
}
