use std::f64::consts::PI;

use eraserlab::central_spin::{
    apply_pulse, brightness, design_pulse_ensemble, erase_cycle, evolve_hyperfine,
    initial_ensemble, read_dump, write_dump, BathSpec, BranchEnsemble, HyperfineEvolver, Memory,
    PulseSpec, SectorKey, SectorState,
};
use eraserlab::maxent::C64;
use nalgebra::DVector;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[test]
fn single_bath_spin_rabi_oracle() {
    // One bath spin: |↓,0⟩ and |↑,1⟩ form a 2x2 block [[0, g], [g, 0]], so the
    // down population is cos²(g t) and the transferred amplitude is -i sin(g t).
    let g = 0.7;
    let bath = BathSpec::uniform(1, g).unwrap();
    let start = SectorState::product(1, Memory::Down, 0).unwrap();
    for k in 0..50 {
        let t = 0.137 * k as f64;
        let out = evolve_hyperfine(&start, &bath, t).unwrap();
        let down = out.memory_population(Memory::Down);
        assert!((down - (g * t).cos().powi(2)).abs() < 1e-13, "t={t}");
        let up = out.sector(SectorKey::new(Memory::Up, 1)).map_or(C64::new(0.0, 0.0), |v| v[0]);
        assert!((up - C64::new(0.0, -(g * t).sin())).norm() < 1e-13);
    }
}

#[test]
fn dark_one_magnon_states_are_stationary() {
    let n = 6;
    let bath = BathSpec::uniform(n, 1.0).unwrap();
    // Orthogonal to the uniform superposition, so no coupling back to ↓.
    let amps: Vec<C64> = (0..n).map(|k| c((2.0 * PI * k as f64 / n as f64).cos())).collect();
    let dark = SectorState::with_bath(n, Memory::Up, 1, DVector::from_vec(amps))
        .unwrap()
        .normalized()
        .unwrap();
    assert!(brightness(&BranchEnsemble::pure(dark.clone()), &bath) < 1e-28);
    let later = evolve_hyperfine(&dark, &bath, 3.3).unwrap();
    assert!((later.inner(&dark).norm() - 1.0).abs() < 1e-12);
    assert!(later.memory_population(Memory::Down) < 1e-24);
}

#[test]
fn unitarity_and_jz_over_many_steps() {
    let bath = BathSpec::new(vec![1.0, 0.8, 1.3, 0.55, 0.9, 1.1, 0.7]).unwrap();
    let mut s = SectorState::product(7, Memory::Down, 0b0000101).unwrap();
    s.set_sector(
        SectorKey::new(Memory::Up, 3),
        DVector::from_fn(35, |i, _| C64::new((i as f64).sin(), 0.1 * i as f64)),
    )
    .unwrap();
    let s = s.normalized().unwrap();
    let jz0 = s.total_jz();
    let ev = HyperfineEvolver::new(&bath);
    let mut cur = s.clone();
    for _ in 0..1000 {
        cur = ev.evolve(&cur, 0.01).unwrap();
    }
    assert!((cur.norm_sqr() - 1.0).abs() < 1e-12, "norm drift {}", cur.norm_sqr() - 1.0);
    assert!((cur.total_jz() - jz0).abs() < 1e-12);
    // Stepping agrees with one long evolution.
    let once = ev.evolve(&s, 10.0).unwrap();
    let overlap = cur.inner(&once).norm();
    assert!((overlap - 1.0).abs() < 1e-10, "{overlap} {}", cur.norm_sqr());
}

#[test]
fn uniform_first_cycle_erases_at_half_flop() {
    let n = 5;
    let bath = BathSpec::uniform(n, 1.0).unwrap();
    let t = PI / (2.0 * (n as f64).sqrt());
    let out = evolve_hyperfine(&SectorState::product(n, Memory::Down, 0).unwrap(), &bath, t).unwrap();
    assert!(out.memory_population(Memory::Down) < 1e-24);
    assert!((out.mean_magnons() - 1.0).abs() < 1e-12);
}

#[test]
fn eight_spin_pulse_darkens_second_cycle() {
    let n = 8;
    let bath = BathSpec::uniform(n, 1.0).unwrap();
    let first = erase_cycle(&initial_ensemble(n).unwrap(), &bath, 1, false).unwrap();
    let fresh = first.final_state.rerandomize_memory();
    let (pulse, after) = design_pulse_ensemble(&fresh, &bath).unwrap();
    assert!(brightness(&fresh, &bath) > 0.1);
    assert!(after < 1e-12, "brightness after pulse {after}");
    assert!((brightness(&fresh.apply_pulse(&pulse).unwrap(), &bath) - after).abs() < 1e-14);

    let two = erase_cycle(&initial_ensemble(n).unwrap(), &bath, 2, true).unwrap();
    assert!(two.reports[1].error_prob < 1e-8);
    assert!(two.reports.iter().all(|r| r.jz_drift < 1e-10));
}

#[test]
fn larger_bath_uses_krylov_and_still_erases() {
    let n = 14;
    let bath = BathSpec::uniform(n, 1.0).unwrap();
    let ev = HyperfineEvolver::new(&bath);
    assert!(!ev.is_dense(7).unwrap());
    let out = erase_cycle(&initial_ensemble(n).unwrap(), &bath, 1, false).unwrap();
    assert!(out.reports[0].error_prob < 1e-10);
}

#[test]
fn dump_roundtrip_after_evolution() {
    let bath = BathSpec::uniform(4, 1.0).unwrap();
    let s = evolve_hyperfine(&SectorState::product(4, Memory::Down, 0b0110).unwrap(), &bath, 0.9).unwrap();
    let s = apply_pulse(&s, &PulseSpec::alternating(4)).unwrap();
    let mut buf = Vec::new();
    write_dump(&mut buf, &s).unwrap();
    assert_eq!(read_dump(&buf[..]).unwrap(), s);
}

#[test]
fn invalid_baths_are_rejected() {
    assert!(BathSpec::new(vec![]).is_err());
    assert!(BathSpec::new(vec![1.0, f64::NAN]).is_err());
    assert!(BathSpec::new(vec![1.0; 17]).is_err());
    assert!(BathSpec::with_limit(vec![1.0; 20], 24).is_ok());
}
