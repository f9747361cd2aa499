//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and exits
//! non-zero when any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use eraserlab::central_spin::{
    erase_cycle, erase_cycle_with, initial_ensemble, BathSpec, CycleOptions, CycleTiming,
};
use eraserlab::energy::{
    exp_work_estimate, jarzynski_check, landauer_violation_tail, quasistatic_erase, sample_batch,
    work_distribution_exact, GapSchedule, ThermalModel,
};
use eraserlab::engine::{efficiency, entropy_audit, run_engine, EngineConfig, ErasureBackend};
use eraserlab::maxent::{
    erasure_cost_margin, solve_maxent, von_neumann_entropy, MaxEntProblem, Observable,
};
use eraserlab::seeding::derive_seed;
use eraserlab::spin::{
    exact_spinlabor_distribution, first_law_ledger, jarzynski_like_check, mean_spintherm,
    sample_spinlabor, violation_tail, ResetConvention, SpinProtocolConfig, SpinReservoir,
};
use eraserlab::LN_2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAMMAS: [f64; 6] = [0.05, 0.1, 0.5, 1.0, 2.0, 5.0];
const SCHEDULE_SEED: u64 = 20261017;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: f64, what: &str) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit {
        Ok(())
    } else {
        Err(format!("{what} took {:.2}s (limit {limit}s)", elapsed.as_secs_f64()))
    }
}

fn spin_config(gamma: f64) -> SpinProtocolConfig {
    SpinProtocolConfig::with_reservoir(SpinReservoir::with_gamma(gamma).unwrap())
}

fn landauer_work_and_heat() -> Outcome {
    let start = Instant::now();
    let model = ThermalModel::new(1.0).unwrap();
    let schedule = GapSchedule::quasistatic(25.0, 20_000).unwrap();
    let out = quasistatic_erase(&schedule, &model);
    within(start.elapsed(), 1.0, "quasistatic erase")?;
    let dw = (out.work - LN_2).abs();
    let dq = (out.heat_to_reservoir - LN_2).abs();
    check(
        dw < 1e-3 && dq < 1e-3,
        format!(
            "W={:.6} Q_R={:.6} (|dW|={dw:.2e}, |dQ|={dq:.2e}) in {:.3}s",
            out.work,
            out.heat_to_reservoir,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn random_schedule(rng: &mut ChaCha8Rng) -> GapSchedule {
    let steps = rng.random_range(1..=20usize);
    let e_max = rng.random_range(0.5..10.0);
    let mut inner: Vec<f64> = (0..steps.saturating_sub(1))
        .map(|_| rng.random_range(0.0..e_max))
        .collect();
    inner.sort_by(f64::total_cmp);
    let mut energies = vec![0.0];
    energies.extend(inner);
    energies.push(e_max);
    GapSchedule::new(energies).unwrap()
}

fn jarzynski_equality() -> Outcome {
    let start = Instant::now();
    let model = ThermalModel::new(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SCHEDULE_SEED);
    let mut worst_exact = 0.0f64;
    let mut worst_z = 0.0f64;
    let mut failures = Vec::new();
    for i in 0..50 {
        let schedule = random_schedule(&mut rng);
        let ratio = schedule.partition_ratio(&model);
        let exact = work_distribution_exact(&schedule, &model).unwrap();
        let dev = jarzynski_check(&exact.work, 1.0, ratio).unwrap().abs();
        worst_exact = worst_exact.max(dev);
        let batch = sample_batch(&schedule, &model, derive_seed(SCHEDULE_SEED, i), 100_000);
        let (mean, se) = exp_work_estimate(&batch, 1.0);
        let z = (mean - ratio).abs() / se;
        worst_z = worst_z.max(z);
        if dev >= 1e-12 || z > 3.0 {
            failures.push(format!("schedule {i}: exact dev {dev:.2e}, MC {z:.2} SE"));
        }
    }
    within(start.elapsed(), 10.0, "jarzynski checks")?;
    let detail = format!(
        "50 schedules: max exact dev {worst_exact:.2e}, max MC deviation {worst_z:.2} SE in {:.2}s",
        start.elapsed().as_secs_f64()
    );
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join("; ")))
    }
}

fn landauer_tail() -> Outcome {
    let model = ThermalModel::new(1.0).unwrap();
    let schedule = GapSchedule::linear(10.0, 20).unwrap();
    let exact = work_distribution_exact(&schedule, &model).unwrap();
    let mut worst = f64::INFINITY;
    let mut bad = Vec::new();
    for k in 1..=10 {
        let eps = 0.1 * k as f64;
        let t = landauer_violation_tail(&exact.heat_to_reservoir, 1.0, eps);
        worst = worst.min(t.bound - t.probability);
        if !(t.probability < t.bound) {
            bad.push(format!("eps={eps:.1}: P={:.4e} bound={:.4e}", t.probability, t.bound));
        }
    }
    check(
        bad.is_empty(),
        format!("min slack e^-eps - P = {worst:.3e} {}", bad.join("; ")),
    )
}

/// Enumerates all 2^20 memory histories of the first 20 raises and accumulates
/// `<exp(-γL + ln 2)>` and the PMF directly.
fn brute_force_spin(gamma: f64) -> (f64, Vec<f64>) {
    let f = |n: u32| {
        let x = (-gamma * n as f64).exp();
        x / (1.0 + x)
    };
    let p: Vec<f64> = std::iter::once(0.5).chain((2..=20).map(f)).collect();
    let mut lhs = 0.0;
    let mut pmf = vec![0.0; 21];
    for path in 0u32..(1 << 20) {
        let mut prob = 1.0;
        for (i, pi) in p.iter().enumerate() {
            prob *= if path & (1 << i) != 0 { *pi } else { 1.0 - pi };
        }
        let steps = path.count_ones();
        lhs += prob * (-gamma * steps as f64 + LN_2).exp();
        pmf[steps as usize] += prob;
    }
    (lhs, pmf)
}

fn jarzynski_like() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for g in GAMMAS {
        let cfg = spin_config(g);
        let dist = exact_spinlabor_distribution(&cfg);
        let (lhs, a) = jarzynski_like_check(&dist, &cfg.reservoir).unwrap();
        let closed = (1.0 + (-g).exp()) / (1.0 + (-2.0 * g).exp());
        let dev = (lhs - closed).abs();
        ok &= dev < 1e-9 && (a - closed).abs() < 1e-15;
        lines.push(format!("g={g}: {dev:.1e}"));
    }
    let a1 = spin_config(1.0).reservoir.jarzynski_constant();
    let (bf, pmf) = brute_force_spin(1.0);
    let bf_dev = (bf - a1).abs();
    let lib = exact_spinlabor_distribution(&spin_config(1.0));
    let pmf_dev = (0..pmf.len())
        .map(|m| (pmf[m] - lib.prob_of_steps(m)).abs())
        .fold(0.0, f64::max);
    ok &= bf_dev < 1e-8 && pmf_dev < 1e-8;
    check(
        ok,
        format!(
            "|lhs-A| {}; A(1)={a1:.7} (quoted 1.204825); brute force 2^20 |lhs-A|={bf_dev:.1e}, max PMF diff {pmf_dev:.1e}",
            lines.join(", ")
        ),
    )
}

fn spinlabor_bound() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for g in GAMMAS {
        let cfg = spin_config(g);
        let mean = exact_spinlabor_distribution(&cfg).mean();
        let margin = mean - LN_2 / g;
        ok &= margin >= 0.0;
        lines.push(format!("g={g}: <L_s>-ln2/g={margin:+.4e}"));
    }
    let mean1 = exact_spinlabor_distribution(&spin_config(1.0)).mean();
    ok &= (mean1 - 0.69522).abs() < 5e-6;
    check(ok, format!("<L_s>(1)={mean1:.6}; {}", lines.join(", ")))
}

fn tail_bounds() -> Outcome {
    let mut ok = true;
    let mut worst_a = f64::INFINITY;
    for g in GAMMAS {
        let cfg = spin_config(g);
        let dist = exact_spinlabor_distribution(&cfg);
        // A fine grid plus every point where the CDF jumps.
        let bound = LN_2 / g;
        let mut eps: Vec<f64> = (0..=2000).map(|k| k as f64 * 0.005).collect();
        eps.extend(
            dist.distribution()
                .values()
                .iter()
                .map(|v| bound - v)
                .filter(|e| *e >= 0.0),
        );
        for e in eps {
            let t = violation_tail(&dist, &cfg.reservoir, e).unwrap();
            worst_a = worst_a.min(t.bound_a - t.probability);
            ok &= t.probability <= t.bound_a;
        }
    }
    let mut tight_fail = Vec::new();
    for g in [0.1, 0.5, 0.9] {
        let cfg = spin_config(g);
        let dist = exact_spinlabor_distribution(&cfg);
        for k in 1..=20 {
            let e = 0.1 * k as f64;
            let t = violation_tail(&dist, &cfg.reservoir, e).unwrap();
            let b = t.bound_tight.expect("gamma*hbar < 1");
            if t.probability > b {
                tight_fail.push(format!("g={g},eps={e:.1}: P={:.3e}>C-bound={b:.3e}", t.probability));
            }
        }
    }
    ok &= tight_fail.is_empty();
    check(
        ok,
        format!(
            "A-bound min slack {worst_a:.3e}; C-bound violations {}{}",
            tight_fail.len(),
            if tight_fail.is_empty() {
                String::new()
            } else {
                format!(" [{}]", tight_fail.join("; "))
            }
        ),
    )
}

fn first_law() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for g in GAMMAS {
        for (conv, sign) in [(ResetConvention::ResetLow, 1.0), (ResetConvention::ResetHigh, -1.0)] {
            let cfg = SpinProtocolConfig {
                reset_convention: conv,
                ..spin_config(g)
            };
            for (_, l) in sample_spinlabor(&cfg, 200, derive_seed(7, (g * 100.0) as u64)) {
                let led = first_law_ledger(l, &cfg).unwrap();
                ok &= led.spintherm_to_reservoir == l + sign * 0.5;
            }
        }
        let q = mean_spintherm(&spin_config(g));
        ok &= q >= LN_2 / g;
        lines.push(format!("g={g}: <Q_s>-ln2/g={:+.3e}", q - LN_2 / g));
    }
    check(ok, format!("Q_s = L_s -+ 1/2 exact on samples; {}", lines.join(", ")))
}

fn central_spin() -> Outcome {
    let start = Instant::now();
    let n = 8;
    let bath = BathSpec::uniform(n, 1.0).unwrap();
    let init = initial_ensemble(n).unwrap();
    let t_star = PI / (2.0 * 8f64.sqrt());

    let first = erase_cycle_with(
        &init,
        &bath,
        1,
        &CycleOptions {
            timing: CycleTiming::HalfFlop,
            use_pulse: false,
        },
    )
    .map_err(|e| e.to_string())?;
    let r1 = &first.reports[0];
    let plain = erase_cycle(&init, &bath, 2, false).map_err(|e| e.to_string())?;
    let pulsed = erase_cycle(&init, &bath, 2, true).map_err(|e| e.to_string())?;
    within(start.elapsed(), 30.0, "central spin")?;

    let drift = [&first, &plain, &pulsed]
        .iter()
        .flat_map(|o| o.reports.iter().map(|r| r.jz_drift))
        .fold(0.0, f64::max);
    let e2 = plain.reports[1].error_prob;
    let e2p = pulsed.reports[1].error_prob;
    let ok = (r1.evolution_time - t_star).abs() <= 1e-15 * t_star
        && r1.error_prob <= 1e-10
        && drift <= 1e-10
        && (e2 - 0.25).abs() <= 1e-6
        && e2p < 1e-8;
    check(
        ok,
        format!(
            "cycle1 err {:.2e} at t*; Jz drift {drift:.1e}; cycle2 err {e2:.8} no pulse, {e2p:.2e} with pulse; {:.2}s",
            r1.error_prob,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn maxent() -> Outcome {
    let energies = [0.0, 0.7, 1.3, 2.9];
    let jz = [0.5, -0.5, 0.5, -0.5];
    let (beta, gamma): (f64, f64) = (0.8, 1.7);
    let w: Vec<f64> = energies
        .iter()
        .zip(&jz)
        .map(|(e, j)| (-beta * e - gamma * j).exp())
        .collect();
    let z: f64 = w.iter().sum();
    let mean = |v: &[f64]| v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / z;
    let obs = vec![
        Observable::diagonal("H", &energies).unwrap(),
        Observable::diagonal("Jz", &jz).unwrap(),
    ];
    let problem = MaxEntProblem::new(obs, vec![mean(&energies), mean(&jz)]).unwrap();
    let state = solve_maxent(&problem, 1e-12).map_err(|e| e.to_string())?;
    let dl = (state.multipliers[0] - beta).abs().max((state.multipliers[1] - gamma).abs());
    let identity = state.log_partition
        + state
            .multipliers
            .iter()
            .zip(&state.expectations)
            .map(|(l, v)| l * v)
            .sum::<f64>();
    let ds = (identity - von_neumann_entropy(&state.rho)).abs();

    let (b, g) = (state.multipliers[0], state.multipliers[1]);
    let splits = [
        vec![LN_2 / b, 0.0],
        vec![0.0, LN_2 / g],
        vec![0.5 * LN_2 / b, 0.5 * LN_2 / g],
    ];
    let margins: Vec<f64> = splits
        .iter()
        .map(|q| erasure_cost_margin(&state.multipliers, q, 1.0).unwrap())
        .collect();
    let worst = margins.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    check(
        dl < 1e-10 && ds < 1e-8 && worst <= 1e-9,
        format!("lambda residual {dl:.1e}; entropy identity {ds:.1e}; max |margin| {worst:.1e}"),
    )
}

fn engine() -> Outcome {
    let ideal = EngineConfig::new(1.0, 1.0, LN_2, ErasureBackend::IdealBound, 10_000).unwrap();
    let ledger = run_engine(&ideal, 1).map_err(|e| e.to_string())?;
    let eta = efficiency(&ledger).map_err(|e| e.to_string())?;
    let ds = entropy_audit(&ledger).map_err(|e| e.to_string())?;
    let w = ledger.total_work();

    let spin = EngineConfig::new(1.0, 1.0, LN_2, ErasureBackend::SpinProtocol, 10_000).unwrap();
    let spin_ledger = run_engine(&spin, 2).map_err(|e| e.to_string())?;
    let ds_spin = entropy_audit(&spin_ledger).map_err(|e| e.to_string())?;
    let eta_spin = efficiency(&spin_ledger).map_err(|e| e.to_string())?;
    let (q_mean, q_se) = spin_ledger.spintherm_stats();
    let oracle = mean_spintherm(&spin_config(1.0));
    let z = (q_mean - oracle).abs() / q_se;
    check(
        eta == 1.0
            && ds.abs() < 1e-6
            && (w - 1e4 * LN_2).abs() < 1e-9
            && ds_spin > 0.0
            && eta_spin == 1.0
            && z <= 3.0,
        format!(
            "ideal: eta={eta}, dS={ds:.1e}, W={w:.6}; spin: dS={ds_spin:.3}, <Q_s>={q_mean:.5} vs {oracle:.5} ({z:.2} SE)"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("landauer work and heat", landauer_work_and_heat),
        ("jarzynski equality", jarzynski_equality),
        ("landauer violation tail", landauer_tail),
        ("jarzynski-like spin equality", jarzynski_like),
        ("spinlabor bound", spinlabor_bound),
        ("spinlabor tail bounds", tail_bounds),
        ("spin first law", first_law),
        ("central spin erasure", central_spin),
        ("maxent", maxent),
        ("engine ledger", engine),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("criterion {:>2} PASS {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
