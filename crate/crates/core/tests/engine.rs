use eraserlab::engine::{
    carnot_efficiency, efficiency, entropy_audit, run_engine, EngineConfig, EngineError,
    ErasureBackend,
};
use eraserlab::spin::{mean_spintherm, SpinProtocolConfig, SpinReservoir};
use eraserlab::LN_2;

#[test]
fn second_law_holds_over_a_parameter_grid() {
    for backend in [ErasureBackend::IdealBound, ErasureBackend::SpinProtocol] {
        for beta in [0.5, 1.0, 3.0] {
            for gamma in [0.2, 1.0, 4.0] {
                for frac in [0.0, 0.5, 1.0] {
                    let cfg = EngineConfig::new(beta, gamma, frac * LN_2 / beta, backend, 50).unwrap();
                    let ledger = run_engine(&cfg, 11).unwrap();
                    assert!(entropy_audit(&ledger).unwrap() >= -1e-9);
                    for r in &ledger.records {
                        assert_eq!(r.work, r.heat);
                        assert!(r.spintherm.is_finite() && r.ds_memory == 0.0);
                    }
                }
            }
        }
    }
}

#[test]
fn overloaded_stroke_is_rejected() {
    let e = EngineConfig::new(2.0, 1.0, LN_2 / 2.0 * 1.001, ErasureBackend::IdealBound, 1);
    assert!(matches!(e, Err(EngineError::ConfigInvalid(_))));
}

#[test]
fn ideal_bound_lower_bounds_spin_protocol() {
    for gamma in [0.5, 1.0, 2.0] {
        let ideal = LN_2 / gamma;
        let cfg = SpinProtocolConfig::with_reservoir(SpinReservoir::with_gamma(gamma).unwrap());
        assert!(mean_spintherm(&cfg) >= ideal);
    }
}

#[test]
fn long_ideal_run_accumulates_work() {
    let cfg = EngineConfig::new(2.0, 1.0, LN_2 / 2.0, ErasureBackend::IdealBound, 10_000).unwrap();
    let ledger = run_engine(&cfg, 0).unwrap();
    assert!((ledger.total_work() - 1e4 * LN_2 / 2.0).abs() < 1e-9);
    assert_eq!(efficiency(&ledger).unwrap(), 1.0);
    assert!(carnot_efficiency(2.0, 1.0).unwrap() < 1.0);
}

#[test]
fn central_spin_backend_ledger() {
    let cfg = EngineConfig::new(1.0, 2.0 * LN_2, LN_2, ErasureBackend::CentralSpin, 5).unwrap();
    let ledger = run_engine(&cfg, 3).unwrap();
    let ds = entropy_audit(&ledger).unwrap();
    assert!(ds.abs() < 1e-6, "{ds}");
    let mut buf = Vec::new();
    ledger.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 6);
}
