use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::basis::SectorBasis;
use super::state::{BranchEnsemble, SectorState};
use super::{BathSpec, CentralSpinError, Memory, PulseSpec};
use crate::maxent::C64;

/// Brightness at or below this counts as dark.
pub const DARK_TOL: f64 = 1e-14;

const RESTARTS: usize = 10;
const MAX_SWEEPS: usize = 2000;
const PULSE_SEED: u64 = 0x005e_ed0f_d42c;

/// `Σ_k φ_k s_k` with `s_k = +1/2` for up and `-1/2` for down (bit set).
fn phase_of(config: u32, phases: &[f64]) -> f64 {
    phases
        .iter()
        .enumerate()
        .map(|(k, &p)| if config & (1 << k) == 0 { 0.5 * p } else { -0.5 * p })
        .sum()
}

fn check_pulse(n_spins: usize, pulse: &PulseSpec) -> Result<(), CentralSpinError> {
    if pulse.phases.len() != n_spins {
        return Err(CentralSpinError::LengthMismatch {
            expected: n_spins,
            got: pulse.phases.len(),
        });
    }
    if let Some(k) = pulse.phases.iter().position(|p| !p.is_finite()) {
        return Err(CentralSpinError::NonFinitePhase(k));
    }
    Ok(())
}

/// Multiplies each bath configuration amplitude by `exp(i Σ_k φ_k s_k)`.
pub fn apply_pulse(state: &SectorState, pulse: &PulseSpec) -> Result<SectorState, CentralSpinError> {
    check_pulse(state.n_spins(), pulse)?;
    let basis = SectorBasis::new(state.n_spins());
    let mut out = state.clone();
    for (key, v) in out.sectors_mut() {
        for (amp, c) in v.iter_mut().zip(basis.configs(key.magnons)) {
            *amp *= C64::from_polar(1.0, phase_of(c, &pulse.phases));
        }
    }
    Ok(out)
}

/// Memory-up bath amplitudes that can couple back to `↓`, with their branch weights.
struct UpComponents {
    n_spins: usize,
    couplings: Vec<f64>,
    parts: Vec<(f64, usize, Vec<C64>)>,
    configs: Vec<Vec<u32>>,
    basis: SectorBasis,
}

impl UpComponents {
    fn collect(ensemble: &BranchEnsemble, bath: &BathSpec) -> Self {
        let n = bath.n_spins();
        let basis = SectorBasis::new(n);
        let mut parts = Vec::new();
        for b in ensemble.branches() {
            for (key, v) in b.state.sectors() {
                if key.memory == Memory::Up && key.magnons >= 1 && v.norm_squared() > 0.0 {
                    parts.push((b.weight, key.magnons, v.iter().copied().collect()));
                }
            }
        }
        let configs = (0..=n).map(|m| basis.configs(m)).collect();
        Self {
            n_spins: n,
            couplings: bath.couplings().to_vec(),
            parts,
            configs,
            basis,
        }
    }

    fn has_support(&self) -> bool {
        !self.parts.is_empty()
    }

    /// `Σ w ‖Σ_k g_k σ⁺_k P χ‖²` with `P` the pulse of the given phases.
    fn brightness(&self, phases: &[f64]) -> f64 {
        let mut total = 0.0;
        for (w, n, amps) in &self.parts {
            let mut acc = 0.0;
            for &target in &self.configs[n - 1] {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..self.n_spins {
                    if target & (1 << k) == 0 {
                        let src = target | (1 << k);
                        let a = amps[self.basis.rank(src)];
                        s += a * C64::from_polar(self.couplings[k], phase_of(src, phases));
                    }
                }
                acc += s.norm_sqr();
            }
            total += w * acc;
        }
        total
    }
}

/// Weighted squared coupling of the memory-up components back to `↓`:
/// `Σ_b w_b Σ_n ‖Σ_k g_k σ⁺_k χ_{b,n}‖²`.
pub fn brightness(ensemble: &BranchEnsemble, bath: &BathSpec) -> f64 {
    UpComponents::collect(ensemble, bath).brightness(&vec![0.0; bath.n_spins()])
}

/// Coordinate descent from `start`. Along one phase the brightness is
/// `C + 2 (Re z cos θ + Im z sin θ)`, so three evaluations fix its minimum.
fn descend(up: &UpComponents, start: Vec<f64>) -> (Vec<f64>, f64) {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    let mut phases = start;
    let mut b = up.brightness(&phases);
    for _ in 0..MAX_SWEEPS {
        let before = b;
        for j in 0..phases.len() {
            let base = phases[j];
            let mut at = |theta: f64| {
                phases[j] = base + theta;
                up.brightness(&phases)
            };
            let b0 = at(0.0);
            let b_half = at(FRAC_PI_2);
            let b_pi = at(PI);
            let c = 0.5 * (b0 + b_pi);
            let re = 0.25 * (b0 - b_pi);
            let im = 0.5 * (b_half - c);
            let theta = im.atan2(re) + PI;
            phases[j] = (base + theta).rem_euclid(TAU);
            let candidate = up.brightness(&phases);
            if candidate <= b0 {
                b = candidate;
            } else {
                phases[j] = base;
                b = b0;
            }
        }
        if b <= DARK_TOL * 1e-6 || before - b <= 1e-18 * before.max(1e-300) {
            break;
        }
    }
    (phases, b)
}

/// Phases that minimize the brightness of the ensemble's memory-up components.
/// Returns the pulse and the brightness after it.
pub fn design_pulse_ensemble(
    ensemble: &BranchEnsemble,
    bath: &BathSpec,
) -> Result<(PulseSpec, f64), CentralSpinError> {
    if ensemble.n_spins() != bath.n_spins() {
        return Err(CentralSpinError::LengthMismatch {
            expected: bath.n_spins(),
            got: ensemble.n_spins(),
        });
    }
    if ensemble.memory_population(Memory::Up) <= 0.0 {
        return Err(CentralSpinError::NoUpSectorSupport);
    }
    let up = UpComponents::collect(ensemble, bath);
    let n = bath.n_spins();
    let zero = vec![0.0; n];
    if !up.has_support() || up.brightness(&zero) <= DARK_TOL {
        let b = up.brightness(&zero);
        return Ok((PulseSpec::zeros(n), b));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PULSE_SEED);
    let mut best = descend(&up, zero);
    for _ in 1..RESTARTS {
        if best.1 <= DARK_TOL * 1e-6 {
            break;
        }
        let start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        let cand = descend(&up, start);
        if cand.1 < best.1 {
            best = cand;
        }
    }
    Ok((PulseSpec { phases: best.0 }, best.1))
}

/// Pulse design for a single pure state.
pub fn design_pulse(state: &SectorState, bath: &BathSpec) -> Result<PulseSpec, CentralSpinError> {
    let ensemble = BranchEnsemble::pure(state.clone());
    design_pulse_ensemble(&ensemble, bath).map(|(p, _)| p)
}

impl BranchEnsemble {
    /// Applies the same diagonal pulse to every branch.
    pub fn apply_pulse(&self, pulse: &PulseSpec) -> Result<BranchEnsemble, CentralSpinError> {
        let mut out = self.clone();
        for b in out.branches_mut() {
            b.state = apply_pulse(&b.state, pulse)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::central_spin::SectorKey;
    use nalgebra::DVector;

    fn one_magnon(amps: Vec<C64>) -> SectorState {
        let n = amps.len();
        SectorState::with_bath(n, Memory::Up, 1, DVector::from_vec(amps))
            .unwrap()
            .normalized()
            .unwrap()
    }

    #[test]
    fn zero_pulse_is_identity() {
        let s = one_magnon(vec![C64::new(1.0, 0.0), C64::new(0.3, 0.2), C64::new(0.0, 1.0)]);
        assert_eq!(apply_pulse(&s, &PulseSpec::zeros(3)).unwrap(), s);
        assert!(apply_pulse(&s, &PulseSpec::zeros(2)).is_err());
    }

    #[test]
    fn two_spin_phase_arithmetic() {
        let s = one_magnon(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let p = PulseSpec { phases: vec![0.0, std::f64::consts::PI] };
        let out = apply_pulse(&s, &p).unwrap();
        let v = out.sector(SectorKey::new(Memory::Up, 1)).unwrap();
        let ratio = v[1] / v[0];
        assert!((ratio - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn pulse_preserves_populations() {
        let mut s = SectorState::product(4, Memory::Down, 0b0011).unwrap();
        s.set_sector(
            SectorKey::new(Memory::Up, 3),
            DVector::from_fn(4, |i, _| C64::new(i as f64, 1.0)),
        )
        .unwrap();
        let p = PulseSpec { phases: vec![0.3, -1.2, 2.0, 5.5] };
        let out = apply_pulse(&s, &p).unwrap();
        for (k, v) in s.sectors() {
            let w = out.sector(*k).unwrap();
            for (a, b) in v.iter().zip(w.iter()) {
                assert!((a.norm() - b.norm()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn alternating_pulse_darkens_uniform_magnon() {
        for n in [2usize, 4, 8] {
            let bath = BathSpec::uniform(n, 1.0).unwrap();
            let s = one_magnon(vec![C64::new(1.0, 0.0); n]);
            let pulsed = apply_pulse(&s, &PulseSpec::alternating(n)).unwrap();
            assert!(brightness(&BranchEnsemble::pure(pulsed), &bath) < 1e-28);
            let designed = design_pulse(&s, &bath).unwrap();
            let after = apply_pulse(&s, &designed).unwrap();
            assert!(brightness(&BranchEnsemble::pure(after), &bath) < 1e-12);
        }
    }

    #[test]
    fn dark_state_keeps_zero_pulse() {
        let bath = BathSpec::uniform(2, 1.0).unwrap();
        let s = one_magnon(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]);
        assert_eq!(design_pulse(&s, &bath).unwrap(), PulseSpec::zeros(2));
        let down = SectorState::product(2, Memory::Down, 0).unwrap();
        assert_eq!(design_pulse(&down, &bath), Err(CentralSpinError::NoUpSectorSupport));
    }
}
