//! Erasure against a spin reservoir by raising the J_z gap of the memory in steps of ħ.
//!
//! The first raise acts on the maximally mixed memory and costs `ħ` of spinlabor with
//! probability 1/2. After the `(n-1)`-th raise the memory is rethermalized with the
//! reservoir at gap `nħ`, so the bit that pays for the next raise is an independent
//! `Bernoulli(f_n)` with `f_n = exp(-γnħ) / (1 + exp(-γnħ))`. The spinlabor in units of ħ
//! is therefore `b_0 + Σ_{n>=2} Bernoulli(f_n)`.
//!
//! With this ordering the exponential average telescopes to
//! `<exp(-γ L_s + ln 2)> = (1 + e^{-γħ}) / (1 + e^{-2γħ})`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{bernoulli_convolution, compensated_sum, DiscreteDistribution};
use crate::energy::logistic_tail;
use crate::seeding::{map_runs, rng_from_seed};
use crate::LN_2;

/// Default cut-off for the step occupations kept in the protocol.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-15;

/// Gamma values are compared with this relative tolerance when matching a distribution
/// to a reservoir.
const GAMMA_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinError {
    #[error("gamma must be > 0 (got {0})")]
    NonPositiveGamma(f64),
    #[error("hbar must be > 0 (got {0})")]
    NonPositiveHbar(f64),
    #[error("gamma * hbar must be finite and positive (got {0})")]
    InvalidProduct(f64),
    #[error("step index must be >= 1 (got {0})")]
    InvalidN(u64),
    #[error("truncation_tol must lie in (0, 1) (got {0})")]
    InvalidTruncation(f64),
    #[error("distribution was built for gamma={dist_gamma}, hbar={dist_hbar}; reservoir has gamma={gamma}, hbar={hbar}")]
    MismatchedGamma {
        dist_gamma: f64,
        dist_hbar: f64,
        gamma: f64,
        hbar: f64,
    },
    #[error("spinlabor must be >= 0 (got {0})")]
    NegativeSpinlabor(f64),
    #[error("eps must be >= 0 (got {0})")]
    NegativeEps(f64),
}

/// Spin reservoir at inverse spin temperature `gamma`, with angular-momentum quantum `hbar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawReservoir")]
pub struct SpinReservoir {
    gamma: f64,
    hbar: f64,
}

#[derive(Deserialize)]
struct RawReservoir {
    gamma: f64,
    #[serde(default = "default_hbar")]
    hbar: f64,
}

fn default_hbar() -> f64 {
    1.0
}

impl TryFrom<RawReservoir> for SpinReservoir {
    type Error = SpinError;
    fn try_from(raw: RawReservoir) -> Result<Self, Self::Error> {
        SpinReservoir::new(raw.gamma, raw.hbar)
    }
}

impl SpinReservoir {
    pub fn new(gamma: f64, hbar: f64) -> Result<Self, SpinError> {
        if !(gamma > 0.0) {
            return Err(SpinError::NonPositiveGamma(gamma));
        }
        if !(hbar > 0.0) {
            return Err(SpinError::NonPositiveHbar(hbar));
        }
        let x = gamma * hbar;
        if !(x > 0.0 && x.is_finite()) {
            return Err(SpinError::InvalidProduct(x));
        }
        Ok(Self { gamma, hbar })
    }

    /// Reservoir with `ħ = 1`.
    pub fn with_gamma(gamma: f64) -> Result<Self, SpinError> {
        Self::new(gamma, 1.0)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Dimensionless `γħ`.
    pub fn gamma_hbar(&self) -> f64 {
        self.gamma * self.hbar
    }

    /// Lower bound `ln 2 / γ` on the spinlabor and spintherm of one erased bit.
    pub fn erasure_bound(&self) -> f64 {
        LN_2 / self.gamma
    }

    /// `A = (1 + e^{-γħ}) / (1 + e^{-2γħ})`.
    pub fn jarzynski_constant(&self) -> f64 {
        let x = self.gamma_hbar();
        (1.0 + (-x).exp()) / (1.0 + (-2.0 * x).exp())
    }

    fn occupation(&self, n: u64) -> f64 {
        logistic_tail(self.gamma_hbar() * n as f64)
    }
}

/// Which J_z eigenstate of the memory counts as the reset state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetConvention {
    /// The memory ends in the lower J_z eigenstate favoured by the reservoir.
    #[default]
    ResetLow,
    /// The memory ends in the upper J_z eigenstate.
    ResetHigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct SpinProtocolConfig {
    pub reservoir: SpinReservoir,
    pub truncation_tol: f64,
    pub reset_convention: ResetConvention,
}

#[derive(Deserialize)]
struct RawConfig {
    reservoir: SpinReservoir,
    #[serde(default = "default_tol")]
    truncation_tol: f64,
    #[serde(default)]
    reset_convention: ResetConvention,
}

fn default_tol() -> f64 {
    DEFAULT_TRUNCATION_TOL
}

impl TryFrom<RawConfig> for SpinProtocolConfig {
    type Error = SpinError;
    fn try_from(raw: RawConfig) -> Result<Self, Self::Error> {
        SpinProtocolConfig::new(raw.reservoir, raw.truncation_tol, raw.reset_convention)
    }
}

impl SpinProtocolConfig {
    pub fn new(
        reservoir: SpinReservoir,
        truncation_tol: f64,
        reset_convention: ResetConvention,
    ) -> Result<Self, SpinError> {
        if !(truncation_tol > 0.0 && truncation_tol < 1.0) {
            return Err(SpinError::InvalidTruncation(truncation_tol));
        }
        Ok(Self {
            reservoir,
            truncation_tol,
            reset_convention,
        })
    }

    /// Default truncation and `reset_low`.
    pub fn with_reservoir(reservoir: SpinReservoir) -> Self {
        Self {
            reservoir,
            truncation_tol: DEFAULT_TRUNCATION_TOL,
            reset_convention: ResetConvention::ResetLow,
        }
    }

    /// Success probabilities of the bits that pay spinlabor: `1/2` for the first raise,
    /// then `f_2, f_3, ...` up to (excluding) the first `f_n < truncation_tol`.
    pub fn factors(&self) -> Vec<f64> {
        let mut out = vec![0.5];
        let mut n = 2u64;
        loop {
            let f = self.reservoir.occupation(n);
            if f < self.truncation_tol {
                break;
            }
            out.push(f);
            n += 1;
        }
        out
    }

    /// Upper bound on `Σ f_n` over the dropped steps. It bounds both the missing mean
    /// (in units of ħ) and the probability that a dropped bit would have fired.
    pub fn tail_bound(&self) -> f64 {
        let first_dropped = self.factors().len() as f64 + 1.0;
        let x = self.reservoir.gamma_hbar();
        (-x * first_dropped).exp() / -(-x).exp_m1()
    }
}

/// `f_n = e^{-γnħ} / (1 + e^{-γnħ})`, the equilibrium occupation at gap `nħ`.
pub fn step_occupation(n: u64, reservoir: &SpinReservoir) -> Result<f64, SpinError> {
    if n == 0 {
        return Err(SpinError::InvalidN(n));
    }
    Ok(reservoir.occupation(n))
}

/// Exact (truncated) spinlabor PMF on the lattice `{0, ħ, 2ħ, ...}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinlaborDistribution {
    dist: DiscreteDistribution,
    reservoir: SpinReservoir,
    tail_bound: f64,
}

#[derive(Serialize)]
struct PmfJson<'a> {
    gamma: f64,
    hbar: f64,
    values: &'a [f64],
    probs: &'a [f64],
    tail_bound: f64,
}

impl Serialize for SpinlaborDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PmfJson {
            gamma: self.reservoir.gamma,
            hbar: self.reservoir.hbar,
            values: self.dist.values(),
            probs: self.dist.probs(),
            tail_bound: self.tail_bound,
        }
        .serialize(s)
    }
}

impl SpinlaborDistribution {
    /// Builds the PMF of `ħ Σ_i B_i` for independent `B_i ~ Bernoulli(factors[i])`.
    pub fn from_factors(factors: &[f64], reservoir: SpinReservoir, tail_bound: f64) -> Self {
        let pmf = bernoulli_convolution(factors);
        let (values, probs): (Vec<f64>, Vec<f64>) = pmf
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(m, &p)| (m as f64 * reservoir.hbar, p))
            .unzip();
        let dist = DiscreteDistribution::unnormalized(values, probs)
            .expect("lattice values are increasing and probabilities non-negative");
        Self {
            dist,
            reservoir,
            tail_bound,
        }
    }

    pub fn distribution(&self) -> &DiscreteDistribution {
        &self.dist
    }

    pub fn reservoir(&self) -> &SpinReservoir {
        &self.reservoir
    }

    /// Bound on the probability mass and the mean (in units of ħ) lost to truncation.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn mean(&self) -> f64 {
        self.dist.mean()
    }

    pub fn variance(&self) -> f64 {
        self.dist.variance()
    }

    /// `P[L_s = mħ]`.
    pub fn prob_of_steps(&self, m: usize) -> f64 {
        self.dist
            .prob_of(m as f64 * self.reservoir.hbar, 1e-9 * self.reservoir.hbar)
    }
}

pub fn exact_spinlabor_distribution(config: &SpinProtocolConfig) -> SpinlaborDistribution {
    SpinlaborDistribution::from_factors(&config.factors(), config.reservoir, config.tail_bound())
}

/// One trajectory of the protocol; deterministic in `seed`.
pub fn sample_spinlabor_once(config: &SpinProtocolConfig, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let steps: u64 = config
        .factors()
        .iter()
        .map(|&f| u64::from(rng.random::<f64>() < f))
        .sum();
    steps as f64 * config.reservoir.hbar
}

/// `runs` samples with per-run seeds derived from `seed`, as `(run seed, L_s)` in run order.
pub fn sample_spinlabor(config: &SpinProtocolConfig, runs: usize, seed: u64) -> Vec<(u64, f64)> {
    let factors = config.factors();
    let hbar = config.reservoir.hbar;
    map_runs(seed, runs, |_, s| {
        let mut rng = rng_from_seed(s);
        let steps: u64 = factors
            .iter()
            .map(|&f| u64::from(rng.random::<f64>() < f))
            .sum();
        (s, steps as f64 * hbar)
    })
}

/// Writes samples as CSV with header `seed,L_s`.
pub fn write_samples_csv<W: Write>(out: W, rows: &[(u64, f64)]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["seed", "L_s"])?;
    for (seed, l) in rows {
        w.write_record([seed.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn check_match(dist: &SpinlaborDistribution, reservoir: &SpinReservoir) -> Result<(), SpinError> {
    let close = |a: f64, b: f64| (a - b).abs() <= GAMMA_MATCH_TOL * a.abs().max(b.abs());
    if close(dist.reservoir.gamma, reservoir.gamma) && close(dist.reservoir.hbar, reservoir.hbar) {
        Ok(())
    } else {
        Err(SpinError::MismatchedGamma {
            dist_gamma: dist.reservoir.gamma,
            dist_hbar: dist.reservoir.hbar,
            gamma: reservoir.gamma,
            hbar: reservoir.hbar,
        })
    }
}

/// `(<exp(-γ L_s + ln 2)>, A)` for a distribution built with `reservoir`.
pub fn jarzynski_like_check(
    dist: &SpinlaborDistribution,
    reservoir: &SpinReservoir,
) -> Result<(f64, f64), SpinError> {
    check_match(dist, reservoir)?;
    let g = reservoir.gamma;
    let lhs = dist.dist.expectation(|l| (-g * l + LN_2).exp());
    Ok((lhs, reservoir.jarzynski_constant()))
}

/// Probability of spending at most `ln 2/γ - eps` of spinlabor, with the bounds it is
/// compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinViolationTail {
    pub probability: f64,
    /// `A exp(-γ eps)`.
    pub bound_a: f64,
    /// `C exp(-sqrt(γ/ħ) eps)` with `C = P[L_s <= ln2/γ]`, reported only when `γħ < 1`.
    pub bound_tight: Option<f64>,
}

pub fn violation_tail(
    dist: &SpinlaborDistribution,
    reservoir: &SpinReservoir,
    eps: f64,
) -> Result<SpinViolationTail, SpinError> {
    check_match(dist, reservoir)?;
    if !(eps >= 0.0) {
        return Err(SpinError::NegativeEps(eps));
    }
    let bound = reservoir.erasure_bound();
    let probability = dist.dist.prob_at_most(bound - eps);
    let bound_a = reservoir.jarzynski_constant() * (-reservoir.gamma * eps).exp();
    let bound_tight = (reservoir.gamma_hbar() < 1.0).then(|| {
        let c = dist.dist.prob_at_most(bound);
        c * (-(reservoir.gamma / reservoir.hbar).sqrt() * eps).exp()
    });
    Ok(SpinViolationTail {
        probability,
        bound_a,
        bound_tight,
    })
}

/// J_z first-law bookkeeping for one erasure: spinlabor in, spintherm to the reservoir,
/// and the change of the memory's J_z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinFirstLawLedger {
    pub spinlabor: f64,
    pub spintherm_to_reservoir: f64,
    pub memory_jz_change: f64,
}

/// Memory J_z change when the maximally mixed memory is reset under `convention`.
pub fn memory_jz_change(convention: ResetConvention, hbar: f64) -> f64 {
    match convention {
        ResetConvention::ResetLow => -0.5 * hbar,
        ResetConvention::ResetHigh => 0.5 * hbar,
    }
}

pub fn first_law_ledger(
    spinlabor: f64,
    config: &SpinProtocolConfig,
) -> Result<SpinFirstLawLedger, SpinError> {
    if !(spinlabor >= 0.0) {
        return Err(SpinError::NegativeSpinlabor(spinlabor));
    }
    let dj = memory_jz_change(config.reset_convention, config.reservoir.hbar);
    Ok(SpinFirstLawLedger {
        spinlabor,
        spintherm_to_reservoir: spinlabor - dj,
        memory_jz_change: dj,
    })
}

/// Mean spintherm delivered per erasure under the configured reset convention.
pub fn mean_spintherm(config: &SpinProtocolConfig) -> f64 {
    exact_spinlabor_distribution(config).mean()
        - memory_jz_change(config.reset_convention, config.reservoir.hbar)
}

/// Sample mean and standard error.
pub fn sample_mean(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let var = compensated_sum(values.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}
