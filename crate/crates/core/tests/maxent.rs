use eraserlab::maxent::{
    dual_value, erasure_cost_margin, heat_decomposition, shannon_entropy, solve_maxent,
    von_neumann_entropy, CMatrix, MaxEntError, MaxEntProblem, Observable, PathPoint, C64,
};
use eraserlab::LN_2;

fn gibbs_diag(energies: &[f64], beta: f64) -> CMatrix {
    let w: Vec<f64> = energies.iter().map(|e| (-beta * e).exp()).collect();
    let z: f64 = w.iter().sum();
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        w.len(),
        w.iter().map(|x| C64::new(x / z, 0.0)),
    ))
}

#[test]
fn recovers_gibbs_state_in_a_rotated_basis() {
    // H = U diag(e) U† with a fixed unitary; the solver should find beta regardless.
    let e = [0.0, 0.4, 1.5];
    let beta = 1.7;
    let theta: f64 = 0.6;
    let (c, s) = (theta.cos(), theta.sin());
    let u = CMatrix::from_row_slice(
        3,
        3,
        &[
            C64::new(c, 0.0), C64::new(0.0, -s), C64::new(0.0, 0.0),
            C64::new(0.0, -s), C64::new(c, 0.0), C64::new(0.0, 0.0),
            C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0),
        ],
    );
    let h = &u * CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(3, e.iter().map(|x| C64::new(*x, 0.0)))) * u.adjoint();
    let rho = &u * gibbs_diag(&e, beta) * u.adjoint();
    let obs = Observable::new("H", h).unwrap();
    let target = obs.expectation(&rho);
    let state = solve_maxent(&MaxEntProblem::new(vec![obs], vec![target]).unwrap(), 1e-12).unwrap();
    assert!((state.multipliers[0] - beta).abs() < 1e-10);
    assert!((&state.rho - &rho).norm() < 1e-10);
    assert!((state.entropy_nats - von_neumann_entropy(&rho)).abs() < 1e-10);
    assert!((shannon_entropy(&state) - state.entropy_nats).abs() < 1e-10);
}

#[test]
fn dual_is_minimized_at_solution() {
    let obs = vec![Observable::diagonal("H", &[0.0, 1.0, 2.0, 4.0]).unwrap()];
    let p = MaxEntProblem::new(obs, vec![1.1]).unwrap();
    let s = solve_maxent(&p, 1e-12).unwrap();
    let best = dual_value(&p, &s.multipliers);
    for d in [-0.1, -1e-3, 1e-3, 0.1] {
        assert!(dual_value(&p, &[s.multipliers[0] + d]) > best);
    }
    assert!((best - s.entropy_nats).abs() < 1e-10);
}

#[test]
fn errors_are_typed() {
    let a = Observable::diagonal("A", &[0.0, 1.0]).unwrap();
    let x = Observable::new(
        "X",
        CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
    )
    .unwrap();
    assert!(matches!(
        MaxEntProblem::new(vec![a.clone(), x], vec![0.5, 0.0]),
        Err(MaxEntError::NonCommuting(..))
    ));
    let p = MaxEntProblem::new(vec![a.clone()], vec![1.5]).unwrap();
    assert!(matches!(solve_maxent(&p, 1e-10), Err(MaxEntError::InfeasibleTargets(_))));
    let bad = CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(0.0, 0.0)]);
    assert!(matches!(Observable::new("B", bad), Err(MaxEntError::NonHermitianInput { .. })));
    assert!(erasure_cost_margin(&[1.0], &[1.0, 2.0], 1.0).is_err());
}

#[test]
fn quasistatic_gap_raise_heat_equals_landauer() {
    // Two-level memory with gap raised slowly; heat out of the memory approaches -ln2/β.
    let beta = 1.0;
    let steps = 4000;
    let path: Vec<PathPoint> = (0..=steps)
        .map(|i| {
            let e = 30.0 * (i as f64 / steps as f64).powi(2);
            let h = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                C64::new(0.0, 0.0),
                C64::new(e, 0.0),
            ]));
            PathPoint { observables: vec![h], rho: gibbs_diag(&[0.0, e], beta) }
        })
        .collect();
    let d = heat_decomposition(&path).unwrap();
    let t = d.totals[0];
    assert!((t.dq + LN_2).abs() < 2e-3, "{t:?}");
    assert!((t.dw - LN_2).abs() < 2e-3);
    let margin = erasure_cost_margin(&[beta], &[-t.dq], 1.0).unwrap();
    assert!(margin.abs() < 2e-3);
}

#[test]
fn json_roundtrip_of_problem() {
    let p = MaxEntProblem::new(vec![Observable::spin_half_jz()], vec![0.2]).unwrap();
    let text = serde_json::to_string(&p).unwrap();
    let back: MaxEntProblem = serde_json::from_str(&text).unwrap();
    assert_eq!(back.targets(), p.targets());
    assert_eq!(back.observables()[0].matrix(), p.observables()[0].matrix());
}
