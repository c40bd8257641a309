//! Acceptance suite: quantitative reproduction of the published amplitude
//! dynamics, measure values, phase diagram and threshold curve, plus the
//! oracle and property backstops. Each test prints one pass line with its
//! headline numbers (visible with `--nocapture`).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::time::{Duration, Instant};

use halfcavity::{
    amplitude_mos, asymptotic_measure, default_horizon, lindblad_amplitude, nm_measure,
    sweep_measure, threshold_curve, Amplitude, ModelParams, QubitState, SeriesEvaluator,
    SweepOptions, DEFAULT_MESH_PER_DELAY,
};
use num_complex::Complex64;

fn assert_budget(name: &str, elapsed: Duration, budget: Duration) {
    assert!(
        elapsed <= budget,
        "{name} took {elapsed:?}, over the {budget:?} budget"
    );
}

#[test]
fn criterion_1_asymptotic_measure() {
    let t0 = Instant::now();
    let value = asymptotic_measure(50);
    let elapsed = t0.elapsed();
    assert!(
        (0.028..=0.038).contains(&value),
        "asymptotic_measure(50) = {value}, outside [0.028, 0.038]"
    );
    assert_budget("criterion 1", elapsed, Duration::from_secs(1));
    println!(
        "criterion 1 PASS: asymptotic_measure(50) = {value:.6} in [0.028, 0.038] ({elapsed:?})"
    );
}

#[test]
fn criterion_2_large_delay_convergence() {
    let t0 = Instant::now();
    let reference = asymptotic_measure(50);
    let phases = [0.0, FRAC_PI_4, FRAC_PI_2, PI];
    let mut values = Vec::new();
    for &phi in &phases {
        let params = ModelParams::dimensionless(20.0, phi).unwrap();
        let r = nm_measure(
            &params,
            default_horizon(&params),
            DEFAULT_MESH_PER_DELAY,
            1e-6,
        )
        .unwrap();
        assert!(r.converged, "phi = {phi} not converged");
        assert!(
            (r.measure - reference).abs() <= 5e-3,
            "N(20, {phi}) = {} vs asymptotic {reference}",
            r.measure
        );
        values.push(r.measure);
    }
    let spread = values.iter().cloned().fold(f64::MIN, f64::max)
        - values.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 2e-3, "phase spread {spread} >= 0.002");
    let elapsed = t0.elapsed();
    assert_budget("criterion 2", elapsed, Duration::from_secs(60));
    println!(
        "criterion 2 PASS: N(gtd=20) = {values:.6?} within 5e-3 of {reference:.6}, spread {spread:.2e} ({elapsed:?})"
    );
}

#[test]
fn criterion_3_threshold_curve() {
    let t0 = Instant::now();
    let n = 41;
    let phi_axis: Vec<f64> = (0..n)
        .map(|i| {
            if i == n - 1 {
                TAU
            } else {
                TAU * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let curve = threshold_curve(&phi_axis, 5.0, 0.01, 1e-6, &SweepOptions::default()).unwrap();
    assert!(curve.all_resolved(), "unresolved threshold entries");

    // phi = pi/2 sits at index 10 of the 41-point axis.
    let at_quarter = curve.critical_gtd[10].unwrap();
    assert!(
        (at_quarter - 1.4).abs() <= 0.1,
        "critical gtd at pi/2 = {at_quarter}, outside 1.4 +/- 0.1"
    );
    let at_zero = curve.critical_gtd[0].unwrap();
    assert!(
        at_zero <= 0.01,
        "critical gtd at phi = 0 is {at_zero} > bisection_tol"
    );
    let elapsed = t0.elapsed();
    assert_budget("criterion 3", elapsed, Duration::from_secs(300));
    println!(
        "criterion 3 PASS: threshold(pi/2) = {at_quarter:.4} (1.4 +/- 0.1), threshold(0) = {at_zero:.4} <= 0.01 ({elapsed:?})"
    );
}

#[test]
fn criterion_4_global_maximum() {
    let t0 = Instant::now();
    let phi_axis: Vec<f64> = (0..81)
        .map(|i| if i == 80 { TAU } else { TAU * i as f64 / 80.0 })
        .collect();
    let gtd_axis: Vec<f64> = (0..60)
        .map(|i| {
            if i == 59 {
                30.0
            } else {
                0.02 * (30.0f64 / 0.02).powf(i as f64 / 59.0)
            }
        })
        .collect();
    let grid = sweep_measure(&phi_axis, &gtd_axis, &SweepOptions::default()).unwrap();
    assert!(
        grid.all_converged(),
        "non-converged cells in the default grid"
    );
    assert!(
        grid.multi_flip_columns(1e-6).is_empty(),
        "multi-flip columns void the threshold reading"
    );

    let (i, j, max_n) = grid.max_cell();
    assert!(
        (max_n - 0.07).abs() <= 0.01,
        "grid maximum {max_n} outside 0.07 +/- 0.01"
    );
    let phi_at_max = grid.phi_values[j];
    let canonical = halfcavity::canonicalize_phase(phi_at_max).unwrap();
    assert!(
        canonical == 0.0,
        "maximum attained at phi = {phi_at_max} (gtd = {}), not in the phi = 0 (mod 2pi) column",
        grid.gtd_values[i]
    );
    let elapsed = t0.elapsed();
    assert_budget("criterion 4", elapsed, Duration::from_secs(900));
    println!(
        "criterion 4 PASS: max N = {max_n:.4} at gtd = {:.4}, phi = {phi_at_max:.4} ({elapsed:?})",
        grid.gtd_values[i]
    );
}

#[test]
fn criterion_5_bound_state_trapping() {
    let t0 = Instant::now();
    for &gtd in &[0.5, 1.0, 2.0] {
        let params = ModelParams::dimensionless(gtd, 0.0).unwrap();
        let traj = amplitude_mos(&params, 300.0, DEFAULT_MESH_PER_DELAY).unwrap();
        let end = traj.values.last().unwrap().norm();
        let trapped = 1.0 / (1.0 + 0.5 * gtd);
        assert!(
            (end - trapped).abs() < 1e-3,
            "gtd = {gtd}: |eps(300)| = {end} vs trapped {trapped}"
        );
    }
    let elapsed = t0.elapsed();
    assert_budget("criterion 5", elapsed, Duration::from_secs(10));
    println!("criterion 5 PASS: |eps(300)| matches 1/(1 + gtd/2) within 1e-3 for gtd in {{0.5, 1, 2}} ({elapsed:?})");
}

#[test]
fn criterion_6_oracle_equivalence() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut worst_at = (0.0, 0.0);
    for &gtd in &[0.1, 1.0, 2.0, 5.0, 20.0] {
        for &phi in &[0.0, FRAC_PI_4, FRAC_PI_2, PI, 3.0 * FRAC_PI_2] {
            let params = ModelParams::dimensionless(gtd, phi).unwrap();
            let traj = amplitude_mos(&params, 30.0, 512).unwrap();
            let mut series = SeriesEvaluator::new(&params);
            for (i, &t) in traj.times.iter().enumerate() {
                if t > 30.0 {
                    break;
                }
                let dev = (traj.values[i] - series.eval(t).unwrap()).norm();
                if dev > worst {
                    worst = dev;
                    worst_at = (gtd, phi);
                }
            }
        }
    }
    assert!(
        worst <= 1e-6,
        "max |series - mos| = {worst:.3e} at (gtd, phi) = {worst_at:?}"
    );
    let elapsed = t0.elapsed();
    assert_budget("criterion 6", elapsed, Duration::from_secs(60));
    println!("criterion 6 PASS: max |series - mos| = {worst:.3e} <= 1e-6 over the 25-point grid ({elapsed:?})");
}

#[test]
fn criterion_7_property_suite() {
    let t0 = Instant::now();

    // Conjugation symmetry of the measure: N(phi) = N(2pi - phi).
    for &(gtd, phi) in &[(1.5, 2.0), (0.7, 0.9)] {
        let a = ModelParams::dimensionless(gtd, phi).unwrap();
        let b = ModelParams::dimensionless(gtd, TAU - phi).unwrap();
        let na = nm_measure(&a, default_horizon(&a), 256, 1e-6)
            .unwrap()
            .measure;
        let nb = nm_measure(&b, default_horizon(&b), 256, 1e-6)
            .unwrap()
            .measure;
        assert!(
            (na - nb).abs() < 1e-9,
            "N({phi}) = {na} vs N(2pi-{phi}) = {nb}"
        );
    }

    // Telescoping identity: gains + losses close the net volume change.
    for &(gtd, phi) in &[(2.0, 0.0), (1.0, 2.0), (20.0, PI)] {
        let p = ModelParams::dimensionless(gtd, phi).unwrap();
        let r = nm_measure(&p, default_horizon(&p), 256, 1e-6).unwrap();
        let closure = r.measure + r.total_loss - (r.final_volume - 1.0);
        assert!(
            closure.abs() < 1e-12,
            "closure {closure:.3e} at ({gtd}, {phi})"
        );
    }

    // Amplitude stays inside the unit disc; pure decay prefix on [0, t_d].
    for &(gtd, phi) in &[(0.3, 1.0), (2.0, PI), (20.0, 0.0)] {
        let p = ModelParams::dimensionless(gtd, phi).unwrap();
        let traj = amplitude_mos(&p, 35.0, 512).unwrap();
        for (i, v) in traj.values.iter().enumerate() {
            assert!(v.norm() <= 1.0 + 1e-9, "|eps| > 1 at node {i}");
        }
        for i in 0..=512 {
            let want = (-0.5 * traj.times[i]).exp();
            assert!((traj.values[i].re - want).abs() < 1e-12 && traj.values[i].im == 0.0);
        }
    }

    // Composition law of the damping map: evolving by eps1 then eps2 equals
    // evolving by their product.
    let states = [
        QubitState::excited(),
        QubitState::new(0.5, Complex64::new(0.35, -0.25)).unwrap(),
        QubitState::new(0.9, Complex64::new(0.0, 0.29)).unwrap(),
    ];
    let amps = [
        Complex64::new(0.9, 0.1),
        Complex64::new(-0.3, 0.6),
        Complex64::from_polar(0.999, 2.2),
    ];
    for rho in &states {
        for &e1 in &amps {
            for &e2 in &amps {
                let two_step = rho
                    .evolve(Amplitude::new(e1).unwrap())
                    .evolve(Amplitude::new(e2).unwrap());
                let one_step = rho.evolve(Amplitude::new(e1 * e2).unwrap());
                assert!((two_step.rho_ee() - one_step.rho_ee()).abs() < 1e-12);
                assert!((two_step.rho_ge() - one_step.rho_ge()).norm() < 1e-12);
            }
        }
    }

    // Memoryless limit tracks the exact amplitude at gtd = 0.01 within 2%.
    let p = ModelParams::dimensionless(0.01, FRAC_PI_2).unwrap();
    let mut series = SeriesEvaluator::new(&p);
    let mut worst = 0.0f64;
    let mut t = 0.0;
    while t <= 5.0 {
        let dev = (series.eval(t).unwrap() - lindblad_amplitude(1.0, FRAC_PI_2, t).unwrap()).norm();
        worst = worst.max(dev);
        t += 0.005;
    }
    assert!(worst < 0.02, "memoryless-limit deviation {worst}");

    let elapsed = t0.elapsed();
    assert_budget("criterion 7", elapsed, Duration::from_secs(120));
    println!("criterion 7 PASS: symmetry, telescoping, unit bound, decay prefix, composition, memoryless limit ({elapsed:?})");
}

#[test]
fn criterion_8_spike_train_maxima() {
    let t0 = Instant::now();
    // At gtd = 20 the growth intervals end at the |eps|^4 spike maxima,
    // predicted at t = m t_d + 2m for m = 1, 2, 3 regardless of phase.
    for &phi in &[0.0, FRAC_PI_2, PI] {
        let params = ModelParams::dimensionless(20.0, phi).unwrap();
        let r = nm_measure(&params, 90.0, DEFAULT_MESH_PER_DELAY, 1e-6).unwrap();
        for m in 1..=3 {
            let predicted = m as f64 * 20.0 + 2.0 * m as f64;
            let found = r
                .intervals
                .iter()
                .map(|iv| iv.end)
                .min_by(|a, b| {
                    (a - predicted)
                        .abs()
                        .partial_cmp(&(b - predicted).abs())
                        .unwrap()
                })
                .expect("no growth intervals");
            assert!(
                (found - predicted).abs() <= 0.01 * predicted,
                "phi = {phi}, m = {m}: maximum at {found} vs predicted {predicted}"
            );
        }
    }
    let elapsed = t0.elapsed();
    println!("criterion 8 PASS: spike maxima at m*t_d + 2m/gamma within 1% for m = 1..3, phases 0, pi/2, pi ({elapsed:?})");
}
