//! Engine-level checks: bitwise determinism of parallel ensembles, pathwise
//! domain and drift guarantees, and distributional agreement of simulated
//! laws with quadrature oracles (quadratic variation, occupation moments,
//! exact-kernel sampling, Girsanov unit expectation).

use std::sync::OnceLock;

use bernstein_core::bernstein_model::BernsteinModel;
use bernstein_core::quadrature;
use bernstein_core::sde_engine::{
    exact_kernel_step, exact_kernel_step_backward, girsanov_weight, path_rng, run_paths,
    sample_uniform_state, simulate_backward_path, simulate_forward_path, streams,
    EndpointSampler, MarginalSampler, Scheme, SimConfig,
};
use bernstein_core::spectral_core::{Geometry, TruncationPolicy};

const PI: f64 = std::f64::consts::PI;
// one-sample Kolmogorov-Smirnov critical coefficient at the 1% level
const KS_COEFF_01: f64 = 1.6276236307187292;

fn interval_example() -> &'static BernsteinModel {
    static MODEL: OnceLock<BernsteinModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        BernsteinModel::new(
            Geometry::Interval,
            1.0,
            0.0,
            vec![1.0, 0.5],
            vec![1.0],
            TruncationPolicy::default_for(Geometry::Interval),
        )
        .unwrap()
    })
}

fn flat_interval() -> &'static BernsteinModel {
    static MODEL: OnceLock<BernsteinModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        BernsteinModel::new(
            Geometry::Interval,
            1.0,
            0.0,
            vec![1.0],
            vec![1.0],
            TruncationPolicy::default_for(Geometry::Interval),
        )
        .unwrap()
    })
}

fn skewed_interval() -> &'static BernsteinModel {
    static MODEL: OnceLock<BernsteinModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        BernsteinModel::new(
            Geometry::Interval,
            1.0,
            0.0,
            vec![1.0, 0.5],
            vec![1.0, 0.25],
            TruncationPolicy::default_for(Geometry::Interval),
        )
        .unwrap()
    })
}

fn disk_example() -> &'static BernsteinModel {
    static MODEL: OnceLock<BernsteinModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        BernsteinModel::new(
            Geometry::DiskRadial,
            1.0,
            0.0,
            vec![1.0 / PI, 1.0 / PI],
            vec![1.0, 0.25],
            TruncationPolicy::default_for(Geometry::DiskRadial),
        )
        .unwrap()
    })
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        let f = cdf(s);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

#[test]
fn parallel_ensembles_are_bitwise_deterministic() {
    let model = skewed_interval();
    let config = SimConfig::new(64, 64, 20260823).unwrap();
    let run = || {
        run_paths(config.paths, |id| {
            simulate_forward_path(model, &config, 0.5, id).unwrap().states
        })
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
    // serial generation matches the parallel collection exactly
    for (id, states) in a.iter().enumerate() {
        let serial = simulate_forward_path(model, &config, 0.5, id as u32).unwrap();
        assert_eq!(&serial.states, states);
    }
    // different seeds decorrelate
    let other = SimConfig::new(64, 1, 20260824).unwrap();
    assert_ne!(
        simulate_forward_path(model, &other, 0.5, 0).unwrap().states,
        a[0]
    );
}

#[test]
fn path_grids_are_well_formed() {
    let model = interval_example();
    let config = SimConfig::new(37, 1, 9).unwrap();
    for path in [
        simulate_forward_path(model, &config, 0.3, 0).unwrap(),
        simulate_backward_path(model, &config, 0.3, 0).unwrap(),
    ] {
        assert_eq!(path.times.len(), 38);
        assert_eq!(path.states.len(), 38);
        assert_eq!(path.noise.as_ref().unwrap().len(), 37);
        assert_eq!(path.times[0], 0.0);
        assert_eq!(*path.times.last().unwrap(), 1.0);
        for w in path.times.windows(2) {
            assert!(w[1] > w[0]);
        }
        for &z in &path.states {
            assert!((0.0..=1.0).contains(&z));
        }
    }
}

#[test]
fn early_increments_of_driftless_paths_are_wiener() {
    // z0 = 1/2, first 16 of 800 steps: the position spread at t = 0.02 is
    // sqrt(0.02) ~ 0.14, putting the boundary 3.5 sigma away, so folding
    // bias is ~1e-6 and realized quadratic variation ~ 0.02 within noise
    let model = interval_example(); // psi = 1: b* = 0
    let config = SimConfig::new(800, 10_000, 31).unwrap();
    let window = 16;
    let dt = 1.0 / 800.0;
    let per_path: Vec<(f64, f64)> = run_paths(config.paths, |id| {
        let p = simulate_forward_path(model, &config, 0.5, id).unwrap();
        let mut qv = 0.0;
        let mut inc_sum = 0.0;
        for i in 0..window {
            let dz = p.states[i + 1] - p.states[i];
            qv += dz * dz;
            inc_sum += dz;
        }
        (qv, inc_sum)
    });
    let qvs: Vec<f64> = per_path.iter().map(|x| x.0).collect();
    let (qv_mean, qv_se) = mean_and_se(&qvs);
    let target = window as f64 * dt;
    assert!(
        (qv_mean - target).abs() < 3.0 * qv_se,
        "qv {qv_mean:.6} vs {target} (se {qv_se:.2e})"
    );
    let sums: Vec<f64> = per_path.iter().map(|x| x.1).collect();
    let (inc_mean, inc_se) = mean_and_se(&sums);
    assert!(
        inc_mean.abs() < 3.0 * inc_se,
        "windowed increment mean {inc_mean:.5} (se {inc_se:.2e})"
    );
    // aggregate variance of single increments against dt
    let var = qv_mean / window as f64;
    let var_se = qv_se / window as f64;
    assert!((var - dt).abs() < 3.0 * var_se);
}

#[test]
fn uniform_law_is_invariant_for_flat_data() {
    // phi = psi = 1: reflected Brownian motion started uniformly stays
    // uniform; KS test at t = 0.3 at the 1% level
    let model = flat_interval();
    let config = SimConfig::new(120, 5_000, 47).unwrap();
    let mut finals: Vec<f64> = run_paths(config.paths, |id| {
        let mut rng = path_rng(config.seed, streams::START_LAW, id);
        let z0 = sample_uniform_state(Geometry::Interval, &mut rng);
        let p = simulate_forward_path(model, &config, z0, id).unwrap();
        // state at t = 0.3 on the 120-step unit-horizon grid
        p.states[36]
    });
    finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d = ks_statistic(&finals, |x| x.clamp(0.0, 1.0));
    let threshold = KS_COEFF_01 / (config.paths as f64).sqrt();
    assert!(d < threshold, "KS {d:.4} vs {threshold:.4}");
}

#[test]
fn backward_drift_along_paths_matches_closed_form() {
    let model = interval_example();
    let config = SimConfig::new(200, 1, 3).unwrap();
    let path = simulate_backward_path(model, &config, 0.62, 0).unwrap();
    for (&z, &t) in path.states.iter().zip(&path.times) {
        let decay = (-0.5 * PI * PI * t).exp();
        let expect = PI * (PI * z).sin() * decay / (2.0 + (PI * z).cos() * decay);
        let got = model.backward_drift(z, t).unwrap();
        assert!((got - expect).abs() < 1e-12, "at ({z},{t})");
    }
}

#[test]
fn endpoint_sampler_matches_quadrature_moments() {
    let model = skewed_interval();
    let sampler = EndpointSampler::new(model, 512).unwrap();
    let draws: Vec<(f64, f64)> = run_paths(30_000, |id| {
        let mut rng = path_rng(99, streams::ENDPOINTS, id);
        sampler.sample(&mut rng).unwrap()
    });
    let z0: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let zt: Vec<f64> = draws.iter().map(|d| d.1).collect();

    let target_z0 = quadrature::simpson(
        |x| x * model.marginal_initial(x).unwrap() * model.measure_weight(x),
        0.0,
        1.0,
        201,
    );
    let (m0, se0) = mean_and_se(&z0);
    assert!((m0 - target_z0).abs() < 3.0 * se0, "z0 mean {m0:.5} vs {target_z0:.5}");

    let target_zt = quadrature::simpson(
        |y| y * model.marginal_final(y).unwrap() * model.measure_weight(y),
        0.0,
        1.0,
        201,
    );
    let (mt, set) = mean_and_se(&zt);
    assert!((mt - target_zt).abs() < 3.0 * set, "zT mean {mt:.5} vs {target_zt:.5}");

    // covariance against the 2-d endpoint quadrature
    let joint_xy = quadrature::simpson(
        |x| {
            quadrature::simpson(
                |y| {
                    x * y
                        * model.endpoint_density(x, y).unwrap()
                        * model.measure_weight(x)
                        * model.measure_weight(y)
                },
                0.0,
                1.0,
                201,
            )
        },
        0.0,
        1.0,
        201,
    );
    let target_cov = joint_xy - target_z0 * target_zt;
    let prods: Vec<f64> = draws.iter().map(|d| (d.0 - m0) * (d.1 - mt)).collect();
    let (cov, cov_se) = mean_and_se(&prods);
    assert!(
        (cov - target_cov).abs() < 3.0 * cov_se,
        "cov {cov:.5} vs {target_cov:.5} (se {cov_se:.2e})"
    );
}

#[test]
fn flat_data_endpoints_are_uniform() {
    let model = flat_interval();
    let sampler = EndpointSampler::new(model, 512).unwrap();
    let mut z0: Vec<f64> = run_paths(5_000, |id| {
        let mut rng = path_rng(7, streams::ENDPOINTS, id);
        sampler.sample(&mut rng).unwrap().0
    });
    z0.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d = ks_statistic(&z0, |x| x.clamp(0.0, 1.0));
    assert!(d < KS_COEFF_01 / (5_000f64).sqrt(), "KS {d:.4}");
}

#[test]
fn exact_kernel_row_matches_green_cdf() {
    // phi = psi = 1: the one-step law from (x, 0) to T is the Green row
    let model = flat_interval();
    let x0 = 0.3;
    let mut samples: Vec<f64> = run_paths(20_000, |id| {
        let mut rng = path_rng(1234, streams::EXACT_KERNEL, id);
        exact_kernel_step(model, x0, 0.0, 1.0, 512, &mut rng).unwrap()
    });
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // dense CDF oracle
    let nodes = 2001;
    let xs = quadrature::grid(0.0, 1.0, nodes);
    let density: Vec<f64> = xs
        .iter()
        .map(|&y| model.green(y, 1.0, x0, 0.0).unwrap())
        .collect();
    let cdf = quadrature::cumulative_trapezoid(&density, xs[1] - xs[0]);
    let total = *cdf.last().unwrap();
    let lookup = |y: f64| {
        let pos = (y.clamp(0.0, 1.0)) * (nodes - 1) as f64;
        let i = (pos as usize).min(nodes - 2);
        let frac = pos - i as f64;
        (cdf[i] * (1.0 - frac) + cdf[i + 1] * frac) / total
    };
    let d = ks_statistic(&samples, lookup);
    let threshold = KS_COEFF_01 / (samples.len() as f64).sqrt();
    assert!(d < threshold, "KS {d:.4} vs {threshold:.4}");
}

#[test]
fn exact_kernel_one_step_mean() {
    let model = skewed_interval();
    let (x0, s, t) = (0.3, 0.0, 0.7);
    let samples: Vec<f64> = run_paths(20_000, |id| {
        let mut rng = path_rng(555, streams::EXACT_KERNEL, id);
        exact_kernel_step(model, x0, s, t, 512, &mut rng).unwrap()
    });
    let target = quadrature::simpson(
        |y| y * model.forward_kernel(x0, s, y, t).unwrap() * model.measure_weight(y),
        0.0,
        1.0,
        401,
    );
    let (mean, se) = mean_and_se(&samples);
    assert!((mean - target).abs() < 3.0 * se, "mean {mean:.5} vs {target:.5}");
}

#[test]
fn exact_backward_one_step_mean() {
    let model = skewed_interval();
    let (x0, t, s) = (0.6, 0.5, 0.25);
    let samples: Vec<f64> = run_paths(20_000, |id| {
        let mut rng = path_rng(556, streams::EXACT_KERNEL, id);
        exact_kernel_step_backward(model, x0, t, s, 512, &mut rng).unwrap()
    });
    let target = quadrature::simpson(
        |y| y * model.backward_kernel(x0, t, y, s).unwrap() * model.measure_weight(y),
        0.0,
        1.0,
        401,
    );
    let (mean, se) = mean_and_se(&samples);
    assert!((mean - target).abs() < 3.0 * se, "mean {mean:.5} vs {target:.5}");
}

#[test]
fn exact_scheme_paths_are_well_formed_and_deterministic() {
    // 10 steps keep every gap at 0.1, inside the spectral policy range
    for model in [skewed_interval(), disk_example()] {
        let config = SimConfig::new(10, 1, 99)
            .unwrap()
            .with_scheme(Scheme::ExactKernel);
        let a = simulate_forward_path(model, &config, 0.5, 3).unwrap();
        let b = simulate_forward_path(model, &config, 0.5, 3).unwrap();
        assert_eq!(a.states.len(), 11);
        assert_eq!(a.initial_state(), 0.5);
        assert!(a.states.iter().all(|z| (0.0..=1.0).contains(z)));
        assert!(a.noise.is_none() && a.planar.is_none());
        for (x, y) in a.states.iter().zip(&b.states) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let back = simulate_backward_path(model, &config, 0.5, 3).unwrap();
        assert_eq!(back.final_state(), 0.5);
        assert_eq!(back.times[0], 0.0);
        assert!(back.states.iter().all(|z| (0.0..=1.0).contains(z)));
        // exact and Euler paths on the same stream are different processes
        let euler = simulate_forward_path(model, &SimConfig::new(10, 1, 99).unwrap(), 0.5, 3)
            .unwrap();
        assert_ne!(euler.states[10].to_bits(), a.states[10].to_bits());
    }
}

#[test]
fn reflection_counting_and_domain_on_coarse_grid() {
    // large steps from near the boundary force folds; states stay inside
    let model = flat_interval();
    let config = SimConfig::new(4, 256, 77).unwrap();
    let counts: Vec<u64> = run_paths(config.paths, |id| {
        let p = simulate_forward_path(model, &config, 0.01, id).unwrap();
        for &z in &p.states {
            assert!((0.0..=1.0).contains(&z));
        }
        p.reflections
    });
    assert!(counts.iter().any(|&c| c > 0), "no reflections observed");
}

#[test]
fn disk_paths_stay_in_unit_radius_and_record_planar_track() {
    let model = disk_example();
    let config = SimConfig::new(100, 64, 13).unwrap();
    let paths = run_paths(config.paths, |id| {
        simulate_forward_path(model, &config, 0.4, id).unwrap()
    });
    for p in &paths {
        assert_eq!(p.dim(), 2);
        let track = p.planar.as_ref().unwrap();
        assert_eq!(track.positions.len(), p.states.len());
        assert_eq!(track.noise.len(), p.states.len() - 1);
        for (&r, pos) in p.states.iter().zip(&track.positions) {
            assert!((0.0..=1.0).contains(&r));
            let pr = (pos[0] * pos[0] + pos[1] * pos[1]).sqrt();
            assert!((pr - r).abs() < 1e-12, "radius/record mismatch");
        }
    }
}

#[test]
fn girsanov_weights_have_unit_expectation_interval() {
    let model = skewed_interval();
    let config = SimConfig::new(200, 20_000, 4242).unwrap();
    let start = MarginalSampler::initial(model, 512).unwrap();
    let weights: Vec<f64> = run_paths(config.paths, |id| {
        let mut rng = path_rng(config.seed, streams::START_LAW, id);
        let z0 = start.sample(&mut rng);
        let path = simulate_forward_path(model, &config, z0, id).unwrap();
        girsanov_weight(model, path).unwrap().weight()
    });
    let (mean, se) = mean_and_se(&weights);
    assert!(se < 0.05, "weight spread too large for a meaningful test");
    assert!((mean - 1.0).abs() < 3.0 * se, "E[w] = {mean:.5} (se {se:.2e})");
}

#[test]
fn girsanov_weights_have_unit_expectation_disk() {
    let model = disk_example();
    let config = SimConfig::new(200, 10_000, 808).unwrap();
    let start = MarginalSampler::initial(model, 512).unwrap();
    let weights: Vec<f64> = run_paths(config.paths, |id| {
        let mut rng = path_rng(config.seed, streams::START_LAW, id);
        let r0 = start.sample(&mut rng);
        let path = simulate_forward_path(model, &config, r0, id).unwrap();
        girsanov_weight(model, path).unwrap().weight()
    });
    let (mean, se) = mean_and_se(&weights);
    assert!(se < 0.05);
    assert!((mean - 1.0).abs() < 3.0 * se, "E[w] = {mean:.5} (se {se:.2e})");
}

#[test]
fn occupation_mean_error_shrinks_with_step_refinement() {
    // backward ensembles at steps 50 / 200 / 800: the t = T/2 mean error
    // against quadrature must not grow beyond the Monte Carlo noise band
    let model = interval_example();
    let target = quadrature::simpson(
        |x| x * model.occupation(x, 0.5).unwrap() * model.measure_weight(x),
        0.0,
        1.0,
        201,
    );
    let mut errors = Vec::new();
    let mut ses = Vec::new();
    for (k, &steps) in [50usize, 200, 800].iter().enumerate() {
        let config = SimConfig::new(steps, 10_000, 7000 + k as u64).unwrap();
        let start = MarginalSampler::final_time(model, 512).unwrap();
        let mids: Vec<f64> = run_paths(config.paths, |id| {
            let mut rng = path_rng(config.seed, streams::START_LAW, id);
            let zt = start.sample(&mut rng);
            let p = simulate_backward_path(model, &config, zt, id).unwrap();
            p.states[steps / 2]
        });
        let (mean, se) = mean_and_se(&mids);
        errors.push((mean - target).abs());
        ses.push(se);
    }
    assert!(errors[0] < 0.02, "coarse-grid error implausibly large");
    assert!(
        errors[1] <= errors[0] + 2.0 * (ses[0] + ses[1]),
        "error grew 50 -> 200: {errors:?}"
    );
    assert!(
        errors[2] <= errors[1] + 2.0 * (ses[1] + ses[2]),
        "error grew 200 -> 800: {errors:?}"
    );
}
