//! Acceptance gate: one test per release criterion, each printing a single
//! pass line with the measured figure next to its tolerance. Everything
//! here is checked against self-contained oracles: frozen reference
//! numbers, closed forms, and direct quadrature written out in this file.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use bernstein_core::bernstein_model::BernsteinModel;
use bernstein_core::feynman_kac::{estimate_u, estimate_v};
use bernstein_core::quadrature;
use bernstein_core::sde_engine::SimConfig;
use bernstein_core::special_functions::{bessel_j0, bessel_j1, neumann_eigenvalues};
use bernstein_core::spectral_core::{Geometry, TruncationPolicy};
use bernstein_core::verify_harness::{run_selected, VerifyConfig};

const SQRT_MU_2: f64 = 3.8317059702075123;
const MU_2: f64 = SQRT_MU_2 * SQRT_MU_2;
/// Spectral value of u(0, 0.1) for the interval example.
const U_AT_ORIGIN_T01: f64 = 1.3052490126328986;
/// Acceptance ensembles share one seed; every statistical figure below is
/// reproducible bit for bit.
const SEED: u64 = 20260823;

fn interval_example() -> BernsteinModel {
    BernsteinModel::new(
        Geometry::Interval,
        1.0,
        0.0,
        vec![1.0, 0.5],
        vec![1.0],
        TruncationPolicy::default_for(Geometry::Interval),
    )
    .unwrap()
}

fn disk_example() -> BernsteinModel {
    BernsteinModel::new(
        Geometry::DiskRadial,
        1.0,
        0.0,
        vec![1.0 / PI, 1.0 / PI],
        vec![1.0],
        TruncationPolicy::default_for(Geometry::DiskRadial),
    )
    .unwrap()
}

fn pass(criterion: &str, figure: String) {
    println!("acceptance {criterion}: PASS ({figure})");
}

#[test]
fn criterion_01_closed_form_space_time_factors() {
    let clock = Instant::now();
    let interval = interval_example();
    let mut worst_interval: f64 = 0.0;
    for i in 0..=20 {
        let x = i as f64 / 20.0;
        for j in 0..=10 {
            let t = j as f64 / 10.0;
            let exact = 1.0 + 0.5 * (PI * x).cos() * (-PI * PI * t / 2.0).exp();
            worst_interval = worst_interval.max((interval.u(x, t).unwrap() - exact).abs());
        }
    }
    assert!(worst_interval <= 1e-12, "interval u deviation {worst_interval:.3e}");

    let disk = disk_example();
    let mut worst_disk: f64 = 0.0;
    for i in 0..=20 {
        let r = i as f64 / 20.0;
        for j in 0..=10 {
            let t = j as f64 / 10.0;
            let exact =
                (1.0 + bessel_j0(SQRT_MU_2 * r).unwrap() * (-MU_2 * t / 2.0).exp()) / PI;
            worst_disk = worst_disk.max((disk.u(r, t).unwrap() - exact).abs());
            // flat final datum: the occupation density equals u
            worst_disk = worst_disk.max((disk.occupation(r, t).unwrap() - exact).abs());
        }
    }
    assert!(worst_disk <= 1e-10, "disk u deviation {worst_disk:.3e}");
    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "took {elapsed:.2}s, budget 1s");
    pass(
        "01 closed-form u",
        format!("interval {worst_interval:.2e} <= 1e-12, disk {worst_disk:.2e} <= 1e-10, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_02_green_function_identities() {
    let clock = Instant::now();
    for model in [interval_example(), disk_example()] {
        let results = bernstein_core::verify_harness::check_green_identities(&model);
        for r in &results {
            assert!(r.passed, "{}: metric {:.3e} > {:.3e}", r.name, r.metric, r.threshold);
        }
    }
    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "took {elapsed:.2}s, budget 10s");
    pass(
        "02 green identities",
        format!("symmetry 1e-10, composition 1e-6, image agreement 1e-8, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_03_kernel_laws() {
    let clock = Instant::now();
    let mut figures = Vec::new();
    for model in [interval_example(), disk_example()] {
        let results = bernstein_core::verify_harness::check_kernel_laws(&model);
        for r in &results {
            assert!(r.passed, "{}: metric {:.3e} > {:.3e}", r.name, r.metric, r.threshold);
            figures.push(format!("{} {:.1e}", r.name, r.metric));
        }
    }
    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "took {elapsed:.2}s, budget 30s");
    pass(
        "03 kernel laws",
        format!("masses/CK/reciprocity/normalization on both geometries, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_04_eigenvalue_table() {
    let clock = Instant::now();
    // independent oracle: bisection of J1 on the bracket (3.8, 3.9)
    let (mut lo, mut hi) = (3.8_f64, 3.9_f64);
    assert!(bessel_j1(lo).unwrap() > 0.0 && bessel_j1(hi).unwrap() < 0.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bessel_j1(mid).unwrap() > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let bisected = 0.5 * (lo + hi);
    let roots = neumann_eigenvalues(16).unwrap();
    let sqrt_mu_2 = roots.values()[1].sqrt();
    let dev_bisect = (sqrt_mu_2 - bisected).abs();
    let dev_frozen = (sqrt_mu_2 - SQRT_MU_2).abs();
    assert!(dev_bisect <= 1e-10, "vs bisection {dev_bisect:.3e}");
    assert!(dev_frozen <= 1e-10, "vs frozen reference {dev_frozen:.3e}");
    let mut worst_residual: f64 = 0.0;
    for &mu in &roots.values()[1..] {
        worst_residual = worst_residual.max(bessel_j1(mu.sqrt()).unwrap().abs());
    }
    assert!(worst_residual < 1e-12, "residual {worst_residual:.3e}");
    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "took {elapsed:.2}s, budget 1s");
    pass(
        "04 eigenvalue table",
        format!(
            "sqrt(mu_2) dev {dev_bisect:.1e} <= 1e-10, max |J1| residual {worst_residual:.1e} < 1e-12, {elapsed:.2}s"
        ),
    );
}

#[test]
fn criterion_05_occupation_histograms() {
    // 1e5 paths each direction, 400 steps, 20 bins, 1% chi-squared level
    let model = interval_example();
    let config = VerifyConfig::new(SEED);
    let results = run_selected(&model, &config, |n| n.starts_with("occupation_chi2")).unwrap();
    assert_eq!(results.len(), 4);
    let mut figures = Vec::new();
    for r in &results {
        assert!(r.passed, "{}: chi2 {:.2} > {:.2}", r.name, r.metric, r.threshold);
        figures.push(format!("{} {:.1}", r.name, r.metric));
    }
    pass("05 occupation chi-squared", figures.join(", "));
}

#[test]
fn criterion_06_uniform_invariance() {
    let model = interval_example();
    let config = VerifyConfig::new(SEED);
    let results = run_selected(&model, &config, |n| n.starts_with("uniform_invariance")).unwrap();
    assert_eq!(results.len(), 3);
    let mut figures = Vec::new();
    for r in &results {
        assert!(r.passed, "{}: KS {:.4} > {:.4}", r.name, r.metric, r.threshold);
        figures.push(format!("{} D={:.4}", r.name, r.metric));
    }
    pass("06 uniform invariance", figures.join(", "));
}

#[test]
fn criterion_07_wiener_increments() {
    let model = interval_example();
    let config = VerifyConfig::new(SEED);
    let results = run_selected(&model, &config, |n| {
        n == "qv_window" || n == "martingale_increments"
    })
    .unwrap();
    assert_eq!(results.len(), 2);
    for r in &results {
        assert!(r.passed, "{}: {:.3e} > {:.3e}\n{}", r.name, r.metric, r.threshold, r.detail);
    }
    pass(
        "07 wiener increments",
        format!(
            "QV deviation {:.2e} within 3 SE, worst bin |z| = {:.2}",
            results[0].metric, results[1].metric
        ),
    );
}

#[test]
fn criterion_08_backward_drift_limit() {
    // finite-gap first moment of the backward kernel at (1/2, gap -> 0)
    let model = interval_example();
    let x = 0.5;
    let b_fixed = model.backward_drift(x, 0.0).unwrap();
    assert!((b_fixed - PI / 2.0).abs() < 1e-14);
    let gaps = [0.04, 0.02, 0.01, 0.005];
    let mut moments = Vec::new();
    for &g in &gaps {
        let m1 = quadrature::simpson(
            |y| (y - x) * model.backward_kernel(x, g, y, 0.0).unwrap(),
            0.0,
            1.0,
            801,
        );
        let m2 = quadrature::simpson(
            |y| (y - x) * (y - x) * model.backward_kernel(x, g, y, 0.0).unwrap(),
            0.0,
            1.0,
            801,
        );
        moments.push((g, -m1 / g, m2 / g));
    }
    // deviation from the zero-gap drift pi/2 shrinks monotonically
    let errs: Vec<f64> = moments.iter().map(|m| (m.1 - b_fixed).abs()).collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "error not monotone: {errs:?}");
    }
    // the moment tracks the matching-time drift b(1/2, g); at the final
    // gap the residual deviation is far below 2 percent of pi/2, while
    // the raw distance to the time-zero value pi/2 is ~2.4 percent,
    // exactly the drift decay over the finite gap
    let (g_min, m_final, m2_final) = *moments.last().unwrap();
    let matching = model.backward_drift(x, g_min).unwrap();
    let rel_matching = (m_final - matching).abs() / (PI / 2.0);
    let rel_fixed = (m_final - b_fixed).abs() / (PI / 2.0);
    assert!(rel_matching < 0.02, "matching-time deviation {rel_matching:.4}");
    let second_dev = (m2_final - 1.0).abs();
    assert!(second_dev < 0.02, "second moment {m2_final:.5}");
    pass(
        "08 backward drift limit",
        format!(
            "errors vs pi/2 {errs:?} monotone; final matching-time deviation {:.3e} < 2%; \
             raw deviation from pi/2 itself {:.4} (drift decay over gap {g_min}); \
             second moment dev {:.2e} < 2%",
            rel_matching, rel_fixed, second_dev
        ),
    );
}

#[test]
fn criterion_09_kernel_tail_decay() {
    // normalized mass beyond eps = 0.2 of the forward kernel from (1/2, 0)
    let model = interval_example();
    let (x, eps) = (0.5, 0.2);
    let gaps = [0.04, 0.02, 0.01, 0.005, 0.0025, 0.00125];
    let mut profile = Vec::new();
    for &g in &gaps {
        let tail = quadrature::simpson(
            |y| model.forward_kernel(x, 0.0, y, g).unwrap(),
            0.0,
            x - eps,
            301,
        ) + quadrature::simpson(
            |y| model.forward_kernel(x, 0.0, y, g).unwrap(),
            x + eps,
            1.0,
            301,
        );
        profile.push((g, tail / g));
    }
    let ratios: Vec<f64> = profile.windows(2).map(|w| w[0].1 / w[1].1).collect();
    for w in ratios.windows(2) {
        assert!(w[1] > w[0], "decay not accelerating: {ratios:?}");
    }
    // tenfold decay per halving holds once the upper gap reaches 0.005
    for (w, &ratio) in profile.windows(2).zip(&ratios) {
        if w[0].0 <= 0.005 + 1e-12 {
            assert!(ratio >= 10.0, "ratio {ratio:.1} at gap {}", w[0].0);
        }
    }
    let final_value = profile.last().unwrap().1;
    assert!(final_value <= 1e-3, "final tail {final_value:.3e}");
    pass(
        "09 kernel tail decay",
        format!("per-halving factors {ratios:?}, final normalized tail {final_value:.2e} <= 1e-3"),
    );
}

#[test]
fn criterion_10_feynman_kac_estimates() {
    let model = interval_example();
    let sim = SimConfig::new(400, 100_000, SEED).unwrap();

    let report = estimate_u(&model, 0.0, 0.1, &sim).unwrap();
    let z_frozen = (report.estimate - U_AT_ORIGIN_T01).abs() / report.std_error;
    assert!(z_frozen <= 3.0, "u(0,0.1) z-score {z_frozen:.2}");

    // constant potential damps the estimate by exactly exp(-V0 t)
    let with_potential = BernsteinModel::new(
        Geometry::Interval,
        1.0,
        0.7,
        vec![1.0, 0.5],
        vec![1.0],
        TruncationPolicy::default_for(Geometry::Interval),
    )
    .unwrap();
    let damped = estimate_u(&with_potential, 0.0, 0.1, &sim).unwrap();
    let z_damped = damped.z_score().unwrap().abs();
    assert!(z_damped <= 3.0, "potential-damped z-score {z_damped:.2}");

    // product consistency u v = rho at an interior space-time point
    let skewed = BernsteinModel::new(
        Geometry::Interval,
        1.0,
        0.0,
        vec![1.0, 0.5],
        vec![1.0, -0.3, 0.1],
        TruncationPolicy::default_for(Geometry::Interval),
    )
    .unwrap();
    let (x, t) = (0.3, 0.35);
    let ru = estimate_u(&skewed, x, t, &sim).unwrap();
    let rv = estimate_v(&skewed, x, t, &sim).unwrap();
    let rho = skewed.occupation(x, t).unwrap();
    let budget = 3.0 * (rv.estimate.abs() * ru.std_error + ru.estimate.abs() * rv.std_error);
    let product_dev = (ru.estimate * rv.estimate - rho).abs();
    assert!(product_dev <= budget, "u v vs rho: {product_dev:.3e} > {budget:.3e}");

    pass(
        "10 feynman-kac estimates",
        format!(
            "u(0,0.1) z={z_frozen:.2}, damped z={z_damped:.2}, product dev {product_dev:.2e} within {budget:.2e}"
        ),
    );
}

#[test]
fn criterion_11_girsanov_reweighting() {
    let model = interval_example();
    let config = VerifyConfig::new(SEED);
    let results = run_selected(&model, &config, |n| n.starts_with("girsanov")).unwrap();
    assert_eq!(results.len(), 2);
    for r in &results {
        assert!(r.passed, "{}: {:.3e} > {:.3e}", r.name, r.metric, r.threshold);
    }
    pass(
        "11 girsanov reweighting",
        format!(
            "|mean weight - 1| = {:.2e} within 3 SE, reweighted chi2 {:.1} < {:.1}",
            results[0].metric, results[1].metric, results[1].threshold
        ),
    );
}

#[test]
fn criterion_12_negative_controls() {
    // a sign-flipped backward drift must corrupt the backward occupation
    let flipped = interval_example().flipped_drift_control();
    let mut config = VerifyConfig::new(SEED);
    config.paths = 20_000;
    let results =
        run_selected(&flipped, &config, |n| n.starts_with("occupation_chi2_backward")).unwrap();
    let worst = results
        .iter()
        .map(|r| r.metric / r.threshold)
        .fold(0.0_f64, f64::max);
    assert!(
        results.iter().any(|r| !r.passed),
        "flipped drift went undetected"
    );

    // skipping the final-datum renormalization must break the endpoint mass
    let unnormalized = BernsteinModel::new_unnormalized(
        Geometry::Interval,
        1.0,
        0.0,
        vec![1.0, 0.5],
        vec![3.0],
        TruncationPolicy::default_for(Geometry::Interval),
    )
    .unwrap();
    let results = bernstein_core::verify_harness::check_kernel_laws(&unnormalized);
    let norm = results
        .iter()
        .find(|r| r.name == "endpoint_normalization")
        .unwrap();
    assert!(!norm.passed, "unnormalized data went undetected");
    pass(
        "12 negative controls",
        format!(
            "flipped drift chi2 at {worst:.0}x its threshold; endpoint mass defect {:.2} detected",
            norm.metric
        ),
    );
}

#[test]
fn criterion_13_deterministic_output() {
    let bin = env!("CARGO_BIN_EXE_bernstein-lab");
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR"));
    let config_path = dir.join("acceptance_example1.cfg");
    std::fs::write(&config_path, "geometry = interval\nphi = example1_phi\npsi = unit\n")
        .unwrap();
    let model = config_path.to_str().unwrap();

    let run = |env: Option<(&str, &str)>, extra: &[&str]| -> Vec<u8> {
        let mut cmd = Command::new(bin);
        cmd.args([
            "simulate", "--model", model, "--paths", "64", "--steps", "50", "--seed", "9",
        ]);
        cmd.args(extra);
        if let Some((k, v)) = env {
            cmd.env(k, v);
        }
        let out = cmd.output().expect("binary runs");
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let base = run(None, &[]);
    assert!(!base.is_empty());
    let rerun = run(None, &[]);
    let env_threads = run(Some(("BERNSTEIN_LAB_THREADS", "3")), &[]);
    let flag_threads = run(None, &["--threads", "2"]);
    assert_eq!(base, rerun, "rerun differs");
    assert_eq!(base, env_threads, "env thread count changes output");
    assert_eq!(base, flag_threads, "thread flag changes output");

    // estimation output is deterministic too
    let fk = |threads: &str| {
        let out = Command::new(bin)
            .args([
                "fk", "--model", model, "--x", "0", "--t", "0.1", "--paths", "4000", "--seed",
                "11", "--threads", threads,
            ])
            .output()
            .expect("binary runs");
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(fk("1"), fk("4"), "fk output depends on thread count");
    pass(
        "13 deterministic output",
        format!("{} bytes of path CSV identical across reruns and 1/2/3/4 threads", base.len()),
    );
}
