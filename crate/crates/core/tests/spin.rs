use eraserlab::spin::{
    exact_spinlabor_distribution, first_law_ledger, jarzynski_like_check, sample_mean,
    sample_spinlabor, step_occupation, violation_tail, write_samples_csv, SpinError,
    SpinProtocolConfig, SpinReservoir,
};
use eraserlab::LN_2;

fn config(gamma: f64, hbar: f64) -> SpinProtocolConfig {
    SpinProtocolConfig::with_reservoir(SpinReservoir::new(gamma, hbar).unwrap())
}

/// PMF of the step count from all `2^m` outcomes of the first `m` raises.
fn brute_force_pmf(gamma_hbar: f64, m: usize) -> Vec<f64> {
    let p: Vec<f64> = std::iter::once(0.5)
        .chain((2..=m).map(|n| 1.0 / (1.0 + (gamma_hbar * n as f64).exp())))
        .collect();
    let mut pmf = vec![0.0; m + 1];
    for path in 0u32..(1 << m) {
        let prob: f64 = p
            .iter()
            .enumerate()
            .map(|(i, pi)| if path & (1 << i) != 0 { *pi } else { 1.0 - pi })
            .product();
        pmf[path.count_ones() as usize] += prob;
    }
    pmf
}

#[test]
fn pmf_matches_brute_force_enumeration() {
    for gh in [1.0, 2.0, 5.0] {
        let pmf = brute_force_pmf(gh, 20);
        let dist = exact_spinlabor_distribution(&config(gh, 1.0));
        for (m, p) in pmf.iter().enumerate() {
            assert!((p - dist.prob_of_steps(m)).abs() < 1e-8, "gh={gh}, m={m}");
        }
    }
}

#[test]
fn reference_values_at_unit_gamma() {
    let dist = exact_spinlabor_distribution(&config(1.0, 1.0));
    assert!((dist.prob_of_steps(0) - 0.4076).abs() < 5e-5);
    assert!((dist.mean() - 0.69522).abs() < 5e-6);
    assert!(dist.tail_bound() < 1e-15);
}

#[test]
fn jarzynski_like_equality_across_gamma_and_hbar() {
    for gamma in [0.05, 0.2, 0.7, 1.0, 3.0, 5.0] {
        for hbar in [0.5, 1.0, 2.0] {
            let cfg = config(gamma, hbar);
            let dist = exact_spinlabor_distribution(&cfg);
            let (lhs, a) = jarzynski_like_check(&dist, &cfg.reservoir).unwrap();
            let x = gamma * hbar;
            assert!((a - (1.0 + (-x).exp()) / (1.0 + (-2.0 * x).exp())).abs() < 1e-15);
            assert!((lhs - a).abs() < 1e-9, "gamma={gamma}, hbar={hbar}");
        }
    }
}

#[test]
fn mean_bound_holds_from_unit_gamma_hbar_upward() {
    for gh in [1.0, 1.5, 2.0, 5.0, 10.0] {
        let dist = exact_spinlabor_distribution(&config(gh, 1.0));
        assert!(dist.mean() >= LN_2 / gh, "gh={gh}");
    }
}

#[test]
fn exponential_tail_bound_on_a_fine_grid() {
    for gh in [0.05, 0.3, 1.0, 4.0] {
        let cfg = config(gh, 1.0);
        let dist = exact_spinlabor_distribution(&cfg);
        for k in 0..=400 {
            let t = violation_tail(&dist, &cfg.reservoir, 0.01 * k as f64).unwrap();
            assert!(t.probability <= t.bound_a);
            assert_eq!(t.bound_tight.is_some(), gh < 1.0);
        }
    }
}

#[test]
fn samples_agree_with_exact_mean() {
    let cfg = config(1.0, 1.0);
    let rows = sample_spinlabor(&cfg, 100_000, 42);
    let xs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (m, se) = sample_mean(&xs);
    assert!((m - 0.69522).abs() < 3.0 * se + 1e-5);
    let mut a = Vec::new();
    write_samples_csv(&mut a, &rows[..3]).unwrap();
    assert!(String::from_utf8(a).unwrap().starts_with("seed,L_s\n"));
}

#[test]
fn first_law_rejects_negative_spinlabor() {
    let cfg = config(1.0, 1.0);
    assert!(matches!(first_law_ledger(-1.0, &cfg), Err(SpinError::NegativeSpinlabor(_))));
    let l = first_law_ledger(2.0, &cfg).unwrap();
    assert_eq!(l.spintherm_to_reservoir, 2.5);
}

#[test]
fn invalid_parameters() {
    assert_eq!(
        SpinReservoir::with_gamma(-1.0).unwrap_err().to_string(),
        "gamma must be > 0 (got -1)"
    );
    assert!(SpinReservoir::new(1.0, 0.0).is_err());
    assert!(step_occupation(0, &SpinReservoir::with_gamma(1.0).unwrap()).is_err());
    let other = SpinReservoir::with_gamma(2.0).unwrap();
    let dist = exact_spinlabor_distribution(&config(1.0, 1.0));
    assert!(jarzynski_like_check(&dist, &other).is_err());
}
