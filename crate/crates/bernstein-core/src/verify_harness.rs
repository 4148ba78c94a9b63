//! The verification suite: every structural identity of the model becomes a
//! quadrature check with an absolute threshold, and every distributional
//! claim becomes a seeded hypothesis test at the 1% level.
//!
//! Check results are deterministic given `(model, VerifyConfig)`: quadrature
//! metrics are pure evaluations, and statistical metrics draw from streams
//! derived from the configured seed. `strict` mode reruns any failed
//! statistical group with four times the paths on a shifted stream before
//! declaring failure, which keeps the family-wise false-failure rate of the
//! ~25-check suite negligible without ever weakening a threshold.

use crate::bernstein_model::BernsteinModel;
use crate::quadrature;
use crate::sde_engine::{
    girsanov_weight, path_rng, run_paths, sample_uniform_state, simulate_backward_path,
    simulate_forward_path, MarginalSampler, SimConfig,
};
use crate::spectral_core::{green_images, Geometry, TruncationPolicy};
use crate::{Error, Result};

/// 99th percentile of chi-squared with 19 degrees of freedom (20 bins).
pub const CHI2_99_DF19: f64 = 36.19086912927004;
/// One-sample Kolmogorov-Smirnov critical coefficient at the 1% level.
pub const KS_COEFF_01: f64 = 1.6276236307187292;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Quadrature,
    Statistical,
}

impl CheckKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckKind::Quadrature => "quadrature",
            CheckKind::Statistical => "statistical",
        }
    }
}

/// One verification outcome; `passed` is derived from the metric and is
/// never set independently.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub kind: CheckKind,
    pub metric: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn evaluate(
        name: impl Into<String>,
        kind: CheckKind,
        metric: f64,
        threshold: f64,
        detail: impl Into<String>,
    ) -> Self {
        CheckResult {
            name: name.into(),
            kind,
            metric,
            threshold,
            passed: metric.is_finite() && metric <= threshold,
            detail: detail.into(),
        }
    }
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

/// Suite parameters. `paths` drives the occupation and invariance ensembles;
/// the pathwise-moment groups use `paths / 10` and the Girsanov group
/// `paths / 5`, keeping the whole suite at the documented runtime scale.
#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub seed: u64,
    pub paths: usize,
    pub steps: usize,
    pub kernel_grid: usize,
    pub strict: bool,
}

impl VerifyConfig {
    pub fn new(seed: u64) -> Self {
        VerifyConfig {
            seed,
            paths: 100_000,
            steps: 400,
            kernel_grid: 512,
            strict: false,
        }
    }

    pub fn strict(mut self) -> Self {
        self.strict = true;
        self
    }

    fn group_seed(&self, group: u64) -> u64 {
        self.seed ^ group.wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }

    /// Appended to statistical details when the sample size is too small
    /// for the stated test sizes to be trustworthy.
    fn power_note(&self) -> &'static str {
        if self.paths < 10_000 {
            "; warning: fewer than 1e4 paths, reduced test power"
        } else {
            ""
        }
    }

    fn validate(&self) -> Result<()> {
        if self.steps < 100 {
            return Err(Error::Domain {
                name: "verify steps",
                value: self.steps as f64,
                lo: 100.0,
                hi: f64::INFINITY,
            });
        }
        if self.paths < 100 {
            return Err(Error::Domain {
                name: "verify paths",
                value: self.paths as f64,
                lo: 100.0,
                hi: f64::INFINITY,
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Quadrature checks.
// ---------------------------------------------------------------------------

/// Green-function structure: spatial symmetry, the composition law, and (on
/// the interval) agreement between the spectral and image forms.
pub fn check_green_identities(model: &BernsteinModel) -> Vec<CheckResult> {
    let mut results = Vec::new();
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let t_end = model.horizon();

    let mut sym: f64 = 0.0;
    for &x in &grid {
        for &y in &grid {
            for &gap in &[0.01 * t_end, 0.1 * t_end, t_end] {
                let a = model.green(x, gap, y, 0.0).unwrap();
                let b = model.green(y, gap, x, 0.0).unwrap();
                sym = sym.max((a - b).abs());
            }
        }
    }
    results.push(CheckResult::evaluate(
        "green_symmetry",
        CheckKind::Quadrature,
        sym,
        1e-10,
        "max |G(x,t;y,s) - G(y,t;x,s)| over an 11x11x3 grid",
    ));

    let nodes = match model.geometry() {
        Geometry::Interval => 201,
        Geometry::DiskRadial => 401,
    };
    let (s, r, t) = (0.0, 0.4 * t_end, 0.9 * t_end);
    let mut comp: f64 = 0.0;
    for &x in &[0.15, 0.5, 0.85] {
        for &y in &[0.3, 0.7] {
            let lhs = quadrature::simpson(
                |z| {
                    model.green(x, t, z, r).unwrap()
                        * model.green(z, r, y, s).unwrap()
                        * model.measure_weight(z)
                },
                0.0,
                1.0,
                nodes,
            );
            let rhs = model.green(x, t, y, s).unwrap();
            comp = comp.max((lhs - rhs).abs());
        }
    }
    results.push(CheckResult::evaluate(
        "green_composition",
        CheckKind::Quadrature,
        comp,
        1e-6,
        format!("max composition defect, {nodes}-node quadrature"),
    ));

    if model.geometry() == Geometry::Interval {
        let mut dev: f64 = 0.0;
        let gap = 0.1;
        for &x in &grid {
            for &y in &grid {
                let a = model.green(x, gap, y, 0.0).unwrap();
                let b = (-model.potential() * gap).exp()
                    * green_images(x, gap, y, 0.0, Geometry::Interval, 8).unwrap();
                dev = dev.max((a - b).abs());
            }
        }
        results.push(CheckResult::evaluate(
            "green_image_agreement",
            CheckKind::Quadrature,
            dev,
            1e-8,
            "spectral vs method-of-images at gap 0.1",
        ));
    }
    results
}

/// Kernel laws: unit masses, Chapman-Kolmogorov, reciprocity, the bridge
/// product identity, and the endpoint normalization.
pub fn check_kernel_laws(model: &BernsteinModel) -> Vec<CheckResult> {
    let mut results = Vec::new();
    let t_end = model.horizon();
    let nodes = match model.geometry() {
        Geometry::Interval => 201,
        Geometry::DiskRadial => 801,
    };
    let states = [0.0, 0.25, 0.5, 0.75, 1.0];
    let pairs: Vec<(f64, f64)> = [(0.0, 0.25), (0.0, 1.0), (0.25, 0.5), (0.5, 1.0), (0.1, 0.35)]
        .iter()
        .map(|&(a, b)| (a * t_end, b * t_end))
        .collect();

    let mut bridge: f64 = 0.0;
    let mut fwd: f64 = 0.0;
    let mut bwd: f64 = 0.0;
    for &x in &states {
        for &(ps, pt) in &pairs {
            let mid = 0.5 * (ps + pt);
            let m = quadrature::simpson(
                |z| {
                    model.bernstein_transition(x, pt, z, mid, x, ps).unwrap()
                        * model.measure_weight(z)
                },
                0.0,
                1.0,
                nodes,
            );
            bridge = bridge.max((m - 1.0).abs());
            let m = quadrature::simpson(
                |y| model.forward_kernel(x, ps, y, pt).unwrap() * model.measure_weight(y),
                0.0,
                1.0,
                nodes,
            );
            fwd = fwd.max((m - 1.0).abs());
            let m = quadrature::simpson(
                |y| model.backward_kernel(x, pt, y, ps).unwrap() * model.measure_weight(y),
                0.0,
                1.0,
                nodes,
            );
            bwd = bwd.max((m - 1.0).abs());
        }
    }
    for (name, metric) in [
        ("kernel_mass_bridge", bridge),
        ("kernel_mass_forward", fwd),
        ("kernel_mass_backward", bwd),
    ] {
        results.push(CheckResult::evaluate(
            name,
            CheckKind::Quadrature,
            metric,
            1e-8,
            "max |mass - 1| over a 5x5 state/time grid",
        ));
    }

    let (s, r, t) = (0.1 * t_end, 0.4 * t_end, 0.8 * t_end);
    let mut ck: f64 = 0.0;
    for &(x, y) in &[(0.25, 0.7), (0.6, 0.2)] {
        let lhs = quadrature::simpson(
            |z| {
                model.forward_kernel(x, s, z, r).unwrap()
                    * model.forward_kernel(z, r, y, t).unwrap()
                    * model.measure_weight(z)
            },
            0.0,
            1.0,
            nodes,
        );
        ck = ck.max((lhs - model.forward_kernel(x, s, y, t).unwrap()).abs());
        let lhs = quadrature::simpson(
            |z| {
                model.backward_kernel(x, t, z, r).unwrap()
                    * model.backward_kernel(z, r, y, s).unwrap()
                    * model.measure_weight(z)
            },
            0.0,
            1.0,
            nodes,
        );
        ck = ck.max((lhs - model.backward_kernel(x, t, y, s).unwrap()).abs());
    }
    results.push(CheckResult::evaluate(
        "kernel_chapman_kolmogorov",
        CheckKind::Quadrature,
        ck,
        1e-6,
        "max composition defect of m* and m",
    ));

    let mut rec: f64 = 0.0;
    for &(ps, pt) in &[(0.0, 0.5 * t_end), (0.2 * t_end, 0.7 * t_end), (0.45 * t_end, t_end)] {
        for i in 0..11 {
            let x = i as f64 / 10.0;
            for j in 0..11 {
                let y = j as f64 / 10.0;
                let lhs =
                    model.backward_kernel(y, pt, x, ps).unwrap() * model.occupation(y, pt).unwrap();
                let rhs =
                    model.occupation(x, ps).unwrap() * model.forward_kernel(x, ps, y, pt).unwrap();
                rec = rec.max((lhs - rhs).abs());
            }
        }
    }
    results.push(CheckResult::evaluate(
        "kernel_reciprocity",
        CheckKind::Quadrature,
        rec,
        1e-9,
        "max pointwise defect of m rho = rho m* on an 11x11x3 grid",
    ));

    let (s, r0, t0, tp) = (0.0, 0.3 * t_end, 0.6 * t_end, 0.95 * t_end);
    let mut prod: f64 = 0.0;
    for &(xp, x, z, y) in &[(0.2, 0.5, 0.4, 0.7), (0.9, 0.3, 0.6, 0.1)] {
        let lhs = model.bernstein_transition(xp, tp, x, t0, y, s).unwrap()
            * model.bernstein_transition(x, t0, z, r0, y, s).unwrap();
        let rhs = model.bernstein_transition(xp, tp, z, r0, y, s).unwrap()
            * model.bernstein_transition(xp, tp, x, t0, z, r0).unwrap();
        prod = prod.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    results.push(CheckResult::evaluate(
        "kernel_product_identity",
        CheckKind::Quadrature,
        prod,
        1e-10,
        "bridge transition composition on sampled points",
    ));

    let mass = quadrature::simpson(
        |x| {
            quadrature::simpson(
                |y| {
                    model.endpoint_density(x, y).unwrap()
                        * model.measure_weight(x)
                        * model.measure_weight(y)
                },
                0.0,
                1.0,
                nodes,
            )
        },
        0.0,
        1.0,
        nodes,
    );
    results.push(CheckResult::evaluate(
        "endpoint_normalization",
        CheckKind::Quadrature,
        (mass - 1.0).abs(),
        1e-8,
        format!("two-dimensional endpoint mass = {mass:.12}"),
    ));
    results
}

/// Clone of the model with a policy certified down to very small spectral
/// gaps; needed on the disk, where there is no image form to fall back to.
/// The relaxed tail tolerance still leaves the kernel far more accurate
/// than the moment thresholds it feeds.
fn fine_gap_model(model: &BernsteinModel) -> Result<BernsteinModel> {
    match model.geometry() {
        Geometry::Interval => Ok(model.clone()),
        Geometry::DiskRadial => {
            let policy = TruncationPolicy::new(Geometry::DiskRadial, 64, 0.00125, 1e-6)?;
            BernsteinModel::new(
                Geometry::DiskRadial,
                model.horizon(),
                model.potential(),
                model.phi().coefficients().to_vec(),
                model.psi().coefficients().to_vec(),
                policy,
            )
        }
    }
}

/// First and second normalized moments of the forward kernel at gap `g`.
fn forward_moments(model: &BernsteinModel, x: f64, s: f64, g: f64, nodes: usize) -> (f64, f64) {
    let m1 = quadrature::simpson(
        |y| (y - x) * model.forward_kernel(x, s, y, s + g).unwrap() * model.measure_weight(y),
        0.0,
        1.0,
        nodes,
    );
    let m2 = quadrature::simpson(
        |y| {
            (y - x) * (y - x) * model.forward_kernel(x, s, y, s + g).unwrap()
                * model.measure_weight(y)
        },
        0.0,
        1.0,
        nodes,
    );
    (m1 / g, m2 / g)
}

/// Moments of the backward kernel anchored at time `g` looking down to 0;
/// the first moment estimates `-b(x, g)`.
fn backward_moments(model: &BernsteinModel, x: f64, g: f64, nodes: usize) -> (f64, f64) {
    let m1 = quadrature::simpson(
        |y| (y - x) * model.backward_kernel(x, g, y, 0.0).unwrap() * model.measure_weight(y),
        0.0,
        1.0,
        nodes,
    );
    let m2 = quadrature::simpson(
        |y| {
            (y - x) * (y - x) * model.backward_kernel(x, g, y, 0.0).unwrap()
                * model.measure_weight(y)
        },
        0.0,
        1.0,
        nodes,
    );
    (m1 / g, m2 / g)
}

/// The short-gap radial kernels carry the planar Bessel correction
/// `1/(2x)` on top of the model drifts.
fn radial_correction(model: &BernsteinModel, x: f64) -> f64 {
    match model.geometry() {
        Geometry::Interval => 0.0,
        Geometry::DiskRadial => 0.5 / x,
    }
}

/// Finite-gap drift and diffusion limits of both kernels at `(x, s)`.
///
/// The first moments are compared against the drift evaluated at the
/// matching finite-gap time (the limit target moves with the gap at order
/// one of the gap); the deviation from the fixed-time drift is reported in
/// the detail string together with the whole gap profile.
pub fn check_drift_limits(model: &BernsteinModel, x: f64, s: f64) -> Result<Vec<CheckResult>> {
    let fine = fine_gap_model(model)?;
    // the disk kernels carry an order-gap correction with a larger constant
    // (planar radial terms), so the sequence is extended one halving further
    // to bring the final gap inside the same thresholds
    let (nodes, gaps): (usize, &[f64]) = match model.geometry() {
        Geometry::Interval => (801, &[0.04, 0.02, 0.01, 0.005]),
        Geometry::DiskRadial => (2001, &[0.04, 0.02, 0.01, 0.005, 0.0025]),
    };
    let corr = radial_correction(model, x);
    let mut results = Vec::new();

    // forward: (1/g) Int (y-x) m*(x,s;y,s+g) -> b*(x,s) + corr
    let profile: Vec<(f64, f64, f64)> = gaps
        .iter()
        .map(|&g| {
            let (m1, m2) = forward_moments(&fine, x, s, g, nodes);
            (g, m1, m2)
        })
        .collect();
    let g_min = gaps[gaps.len() - 1];
    let target = fine.forward_drift(x, s + g_min)? + corr;
    let fixed_target = fine.forward_drift(x, s)? + corr;
    let last = profile.last().unwrap();
    let scale = fixed_target.abs().max(1.0);
    results.push(CheckResult::evaluate(
        "drift_limit_forward",
        CheckKind::Quadrature,
        (last.1 - target).abs() / scale,
        0.02,
        format!(
            "moment at gap {g_min} = {:.6} vs drift {target:.6}; profile {:?}; \
             deviation from fixed-time drift {fixed_target:.6} = {:.4}",
            last.1,
            profile.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>(),
            (last.1 - fixed_target).abs() / scale
        ),
    ));
    results.push(CheckResult::evaluate(
        "diffusion_limit_forward",
        CheckKind::Quadrature,
        (last.2 - 1.0).abs(),
        0.02,
        format!(
            "second moment over gap at {g_min} = {:.6}; profile {:?}",
            last.2,
            profile.iter().map(|p| (p.0, p.2)).collect::<Vec<_>>()
        ),
    ));

    // backward: -(1/g) Int (y-x) m(x,g;y,0) -> b(x, g) - corr
    let back_profile: Vec<(f64, f64, f64)> = gaps
        .iter()
        .map(|&g| {
            let (m1, m2) = backward_moments(&fine, x, g, nodes);
            (g, -m1, m2)
        })
        .collect();
    let target = fine.backward_drift(x, g_min)? - corr;
    let fixed_target = fine.backward_drift(x, 0.0)? - corr;
    let last = back_profile.last().unwrap();
    let scale = fixed_target.abs().max(1.0);
    results.push(CheckResult::evaluate(
        "drift_limit_backward",
        CheckKind::Quadrature,
        (last.1 - target).abs() / scale,
        0.02,
        format!(
            "moment at gap {g_min} = {:.6} vs drift {target:.6}; profile {:?}; \
             deviation from fixed-time drift {fixed_target:.6} = {:.4}",
            last.1,
            back_profile.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>(),
            (last.1 - fixed_target).abs() / scale
        ),
    ));
    results.push(CheckResult::evaluate(
        "diffusion_limit_backward",
        CheckKind::Quadrature,
        (last.2 - 1.0).abs(),
        0.02,
        format!(
            "second moment over gap at {g_min} = {:.6}; profile {:?}",
            last.2,
            back_profile.iter().map(|p| (p.0, p.2)).collect::<Vec<_>>()
        ),
    ));

    // the error against the fixed-time drift must shrink across the gap
    // sequence (metric: worst consecutive error ratio, < 1 when monotone);
    // skipped while errors sit at the quadrature floor
    let mut worst_ratio: f64 = 0.0;
    let mut floor_note = "";
    let errs: Vec<f64> = back_profile
        .iter()
        .map(|p| (p.1 - fixed_target).abs())
        .collect();
    for w in errs.windows(2) {
        if w[0] > 1e-9 && w[1] > 1e-9 {
            worst_ratio = worst_ratio.max(w[1] / w[0]);
        } else {
            floor_note = " (tail at quadrature floor)";
        }
    }
    results.push(CheckResult::evaluate(
        "drift_error_decay_backward",
        CheckKind::Quadrature,
        worst_ratio,
        1.0,
        format!("fixed-time errors across gaps {errs:?}{floor_note}"),
    ));
    Ok(results)
}

/// Tail-mass (continuity) condition for both kernels: the normalized mass
/// beyond `eps` must vanish with the gap, decaying at least tenfold per
/// halving once the gap is below 0.02.
pub fn check_lindeberg(model: &BernsteinModel, x: f64, s: f64, eps: f64) -> Result<Vec<CheckResult>> {
    if !(eps > 0.0 && eps < 0.25) {
        return Err(Error::Domain {
            name: "lindeberg eps",
            value: eps,
            lo: f64::MIN_POSITIVE,
            hi: 0.25,
        });
    }
    let fine = fine_gap_model(model)?;
    let gaps = [0.04, 0.02, 0.01, 0.005, 0.0025, 0.00125];
    let nodes = 601;
    let tail = |f: &dyn Fn(f64) -> f64| -> f64 {
        let mut mass = 0.0;
        if x - eps > 0.0 {
            mass += quadrature::simpson(f, 0.0, x - eps, nodes);
        }
        if x + eps < 1.0 {
            mass += quadrature::simpson(f, x + eps, 1.0, nodes);
        }
        mass
    };
    let mut results = Vec::new();
    for (name, backward) in [("lindeberg_forward", false), ("lindeberg_backward", true)] {
        let profile: Vec<(f64, f64)> = gaps
            .iter()
            .map(|&g| {
                let mass = if backward {
                    tail(&|y| fine.backward_kernel(x, g, y, 0.0).unwrap() * fine.measure_weight(y))
                } else {
                    tail(&|y| {
                        fine.forward_kernel(x, s, y, s + g).unwrap() * fine.measure_weight(y)
                    })
                };
                (g, mass / g)
            })
            .collect();
        let final_value = profile.last().unwrap().1;
        results.push(CheckResult::evaluate(
            format!("{name}_final"),
            CheckKind::Quadrature,
            final_value,
            1e-3,
            format!("profile {profile:?}"),
        ));
        // the tail decays super-exponentially: per-halving decay factors
        // must grow along the sequence and reach at least tenfold once the
        // upper gap of the pair is down to 0.005
        let ratios: Vec<f64> = profile
            .windows(2)
            .map(|w| w[0].1 / w[1].1.max(1e-300))
            .collect();
        let mut min_ratio = f64::INFINITY;
        for (w, &ratio) in profile.windows(2).zip(&ratios) {
            if w[0].0 <= 0.005 + 1e-12 {
                min_ratio = min_ratio.min(ratio);
            }
        }
        results.push(CheckResult::evaluate(
            format!("{name}_decay"),
            CheckKind::Quadrature,
            10.0 / min_ratio,
            1.0,
            format!("min decay factor per halving at gaps <= 0.005 = {min_ratio:.1}"),
        ));
        let mut worst: f64 = 0.0;
        for w in ratios.windows(2) {
            worst = worst.max(w[0] / w[1]);
        }
        results.push(CheckResult::evaluate(
            format!("{name}_accelerating"),
            CheckKind::Quadrature,
            worst,
            1.0,
            format!("per-halving decay factors {ratios:?} must increase"),
        ));
    }
    Ok(results)
}

// ---------------------------------------------------------------------------
// Statistical checks.
// ---------------------------------------------------------------------------

fn bin_of(x: f64, bins: usize) -> usize {
    ((x * bins as f64) as usize).min(bins - 1)
}

fn chi2_against(observed: &[f64], expected_mass: &[f64], total: f64) -> f64 {
    observed
        .iter()
        .zip(expected_mass)
        .map(|(&o, &m)| {
            let e = m * total;
            (o - e) * (o - e) / e
        })
        .sum()
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

const BINS: usize = 20;

fn expected_occupation_masses(model: &BernsteinModel, t: f64) -> Vec<f64> {
    (0..BINS)
        .map(|k| {
            let a = k as f64 / BINS as f64;
            let b = (k + 1) as f64 / BINS as f64;
            model.occupation_mass_in(a, b, t, 101).unwrap()
        })
        .collect()
}

/// Occupation histogram tests at T/4 and T/2 for one path direction.
fn occupation_group(
    model: &BernsteinModel,
    config: &VerifyConfig,
    backward: bool,
    multiplier: usize,
    seed_shift: u64,
) -> Result<Vec<CheckResult>> {
    let t_end = model.horizon();
    let seed = config.group_seed(if backward { 12 } else { 11 }) ^ seed_shift;
    let paths = config.paths * multiplier;
    let sim = SimConfig::new(config.steps, paths, seed)?;
    let start = if backward {
        MarginalSampler::final_time(model, config.kernel_grid)?
    } else {
        MarginalSampler::initial(model, config.kernel_grid)?
    };
    let quarter = config.steps / 4;
    let half = config.steps / 2;
    let recorded: Vec<std::result::Result<(f64, f64), Error>> = run_paths(paths, |id| {
        let mut rng = path_rng(seed, crate::sde_engine::streams::START_LAW, id);
        let z_start = start.sample(&mut rng);
        let path = if backward {
            simulate_backward_path(model, &sim, z_start, id)?
        } else {
            simulate_forward_path(model, &sim, z_start, id)?
        };
        Ok((path.states[quarter], path.states[half]))
    });
    let mut counts_quarter = vec![0.0; BINS];
    let mut counts_half = vec![0.0; BINS];
    for r in recorded {
        let (zq, zh) = r?;
        counts_quarter[bin_of(zq, BINS)] += 1.0;
        counts_half[bin_of(zh, BINS)] += 1.0;
    }
    let dir = if backward { "backward" } else { "forward" };
    let dt = t_end / config.steps as f64;
    let mut out = Vec::new();
    for (frac_name, index, counts) in [("t25", quarter, counts_quarter), ("t50", half, counts_half)]
    {
        let t = index as f64 * dt;
        let expected = expected_occupation_masses(model, t);
        let stat = chi2_against(&counts, &expected, paths as f64);
        out.push(CheckResult::evaluate(
            format!("occupation_chi2_{dir}_{frac_name}"),
            CheckKind::Statistical,
            stat,
            CHI2_99_DF19,
            format!(
                "{BINS}-bin chi-squared, {paths} {dir} paths at t = {t}{}",
                config.power_note()
            ),
        ));
    }
    Ok(out)
}

/// Start-law invariance for driftless forward motion (constant final
/// datum): the reference-uniform law is preserved at three probe times.
/// Only meaningful when the forward drift vanishes; otherwise empty.
fn uniform_group(
    model: &BernsteinModel,
    config: &VerifyConfig,
    multiplier: usize,
    seed_shift: u64,
) -> Result<Vec<CheckResult>> {
    let driftless = model
        .psi()
        .coefficients()
        .iter()
        .skip(1)
        .all(|&c| c == 0.0);
    if !driftless {
        return Ok(Vec::new());
    }
    let t_end = model.horizon();
    let seed = config.group_seed(13) ^ seed_shift;
    let paths = config.paths * multiplier;
    let sim = SimConfig::new(config.steps, paths, seed)?;
    let dt = t_end / config.steps as f64;
    let probes = [
        (config.steps / 10, "t010"),
        (config.steps / 2, "t050"),
        (config.steps, "t100"),
    ];
    let geometry = model.geometry();
    let recorded: Vec<std::result::Result<[f64; 3], Error>> = run_paths(paths, |id| {
        let mut rng = path_rng(seed, crate::sde_engine::streams::START_LAW, id);
        let z0 = sample_uniform_state(geometry, &mut rng);
        let path = simulate_forward_path(model, &sim, z0, id)?;
        Ok([
            path.states[probes[0].0],
            path.states[probes[1].0],
            path.states[probes[2].0],
        ])
    });
    let mut columns = [Vec::new(), Vec::new(), Vec::new()];
    for r in recorded {
        let row = r?;
        for (c, v) in columns.iter_mut().zip(row) {
            c.push(v);
        }
    }
    let cdf = move |x: f64| match geometry {
        Geometry::Interval => x.clamp(0.0, 1.0),
        Geometry::DiskRadial => (x * x).clamp(0.0, 1.0),
    };
    let mut out = Vec::new();
    for ((index, label), mut column) in probes.iter().zip(columns) {
        let t = *index as f64 * dt;
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = ks_statistic(&column, cdf);
        let threshold = KS_COEFF_01 / (paths as f64).sqrt();
        out.push(CheckResult::evaluate(
            format!("uniform_invariance_{label}"),
            CheckKind::Statistical,
            d,
            threshold,
            format!(
                "KS vs reference-uniform law at t = {t}, {paths} paths{}",
                config.power_note()
            ),
        ));
    }
    Ok(out)
}

/// Realized quadratic variation over the early window `[0, 0.02 T]` from
/// the domain center, where boundary folding is a > 3-sigma event.
fn qv_group(
    model: &BernsteinModel,
    config: &VerifyConfig,
    multiplier: usize,
    seed_shift: u64,
) -> Result<Vec<CheckResult>> {
    let seed = config.group_seed(14) ^ seed_shift;
    let paths = (config.paths / 10).max(1_000) * multiplier;
    let sim = SimConfig::new(config.steps, paths, seed)?;
    let window = (config.steps / 50).max(2);
    let dt = model.horizon() / config.steps as f64;
    let values: Vec<std::result::Result<f64, Error>> = run_paths(paths, |id| {
        let path = simulate_forward_path(model, &sim, 0.5, id)?;
        Ok((0..window)
            .map(|i| (path.states[i + 1] - path.states[i]).powi(2))
            .sum())
    });
    let mut qvs = Vec::with_capacity(paths);
    for v in values {
        qvs.push(v?);
    }
    let n = qvs.len() as f64;
    let mean = qvs.iter().sum::<f64>() / n;
    let var = qvs.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let target = window as f64 * dt;
    Ok(vec![CheckResult::evaluate(
        "qv_window",
        CheckKind::Statistical,
        (mean - target).abs(),
        3.0 * se,
        format!(
            "realized QV {mean:.6} vs {target:.6} over {window} steps, {paths} paths{}",
            config.power_note()
        ),
    )])
}

/// Generator consistency: per-step increments minus the drift term average
/// to zero in every interior state bin (3 sqrt(dt) from the boundary; the
/// disk adds the planar radial correction to the drift).
fn martingale_group(
    model: &BernsteinModel,
    config: &VerifyConfig,
    multiplier: usize,
    seed_shift: u64,
) -> Result<Vec<CheckResult>> {
    let t_end = model.horizon();
    let seed = config.group_seed(15) ^ seed_shift;
    let paths = (config.paths / 10).max(1_000) * multiplier;
    let sim = SimConfig::new(config.steps, paths, seed)?;
    let dt = t_end / config.steps as f64;
    let margin = 3.0 * dt.sqrt();
    let bins = 7;
    let lo = margin;
    let hi = 1.0 - margin;
    let width = (hi - lo) / bins as f64;
    let start = MarginalSampler::initial(model, config.kernel_grid)?;
    let window = (config.steps * 45 / 100, config.steps * 55 / 100);
    let geometry = model.geometry();
    let per_path: Vec<std::result::Result<Vec<(usize, f64)>, Error>> = run_paths(paths, |id| {
        let mut rng = path_rng(seed, crate::sde_engine::streams::START_LAW, id);
        let z0 = start.sample(&mut rng);
        let path = simulate_forward_path(model, &sim, z0, id)?;
        let mut contributions = Vec::new();
        for i in window.0..window.1 {
            let z = path.states[i];
            if z < lo || z > hi {
                continue;
            }
            let bin = (((z - lo) / width) as usize).min(bins - 1);
            let correction = match geometry {
                Geometry::Interval => 0.0,
                Geometry::DiskRadial => 0.5 / z,
            };
            let drift = model.forward_drift_unchecked(z, path.times[i]) + correction;
            let residual = path.states[i + 1] - z - drift * dt;
            contributions.push((bin, residual));
        }
        Ok(contributions)
    });
    let mut sums = vec![0.0; bins];
    let mut sq = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for c in per_path {
        for (bin, r) in c? {
            sums[bin] += r;
            sq[bin] += r * r;
            counts[bin] += 1;
        }
    }
    let mut worst_z: f64 = 0.0;
    let mut detail = String::new();
    for k in 0..bins {
        if counts[k] < 100 {
            continue;
        }
        let n = counts[k] as f64;
        let mean = sums[k] / n;
        let var = (sq[k] / n - mean * mean).max(1e-300);
        let z = mean.abs() / (var / n).sqrt();
        worst_z = worst_z.max(z);
        detail.push_str(&format!("bin{k}: z={z:.2} n={}; ", counts[k]));
    }
    detail.push_str(config.power_note());
    Ok(vec![CheckResult::evaluate(
        "martingale_increments",
        CheckKind::Statistical,
        worst_z,
        3.0,
        detail,
    )])
}

/// Continuity-moment scaling: the fourth moment of increments grows like
/// the square of the gap; slope of the log-log regression within [1.8, 2.2].
fn moment_group(
    model: &BernsteinModel,
    config: &VerifyConfig,
    multiplier: usize,
    seed_shift: u64,
) -> Result<Vec<CheckResult>> {
    let t_end = model.horizon();
    let seed = config.group_seed(16) ^ seed_shift;
    let paths = (config.paths / 10).max(1_000) * multiplier;
    let sim = SimConfig::new(config.steps, paths, seed)?;
    let base = config.steps * 3 / 10;
    let offsets = [
        (config.steps / 200).max(1),
        (config.steps / 100).max(2),
        (config.steps / 50).max(4),
        (config.steps / 25).max(8),
    ];
    let start = MarginalSampler::initial(model, config.kernel_grid)?;
    let rows: Vec<std::result::Result<[f64; 4], Error>> = run_paths(paths, |id| {
        let mut rng = path_rng(seed, crate::sde_engine::streams::START_LAW, id);
        let z0 = start.sample(&mut rng);
        let path = simulate_forward_path(model, &sim, z0, id)?;
        let z_s = path.states[base];
        let mut out = [0.0; 4];
        for (slot, &off) in out.iter_mut().zip(&offsets) {
            *slot = (path.states[base + off] - z_s).powi(4);
        }
        Ok(out)
    });
    let mut sums = [0.0; 4];
    let mut n = 0.0;
    for r in rows {
        let row = r?;
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
        n += 1.0;
    }
    let dt = t_end / config.steps as f64;
    let points: Vec<(f64, f64)> = offsets
        .iter()
        .zip(sums)
        .map(|(&off, s)| ((off as f64 * dt).ln(), (s / n).ln()))
        .collect();
    let mx = points.iter().map(|p| p.0).sum::<f64>() / 4.0;
    let my = points.iter().map(|p| p.1).sum::<f64>() / 4.0;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    Ok(vec![CheckResult::evaluate(
        "moment_scaling_gamma4",
        CheckKind::Statistical,
        (slope - 2.0).abs(),
        0.2,
        format!(
            "log-log slope of E|dZ|^4 = {slope:.4} over gaps {offsets:?} steps{}",
            config.power_note()
        ),
    )])
}

/// Companion model with a visibly nonconstant final datum, used to give the
/// Girsanov checks a nonzero forward drift even for the flat-psi examples.
fn girsanov_companion(model: &BernsteinModel) -> Result<BernsteinModel> {
    let nonconstant = model.psi().coefficients().iter().skip(1).any(|&c| c != 0.0);
    if nonconstant {
        return Ok(model.clone());
    }
    BernsteinModel::new(
        model.geometry(),
        model.horizon(),
        model.potential(),
        model.phi().coefficients().to_vec(),
        vec![1.0, 0.25],
        *model.policy(),
    )
}

fn girsanov_group(
    model: &BernsteinModel,
    config: &VerifyConfig,
    multiplier: usize,
    seed_shift: u64,
) -> Result<Vec<CheckResult>> {
    let companion = girsanov_companion(model)?;
    let t_end = model.horizon();
    let seed = config.group_seed(17) ^ seed_shift;
    let paths = (config.paths / 5).max(2_000) * multiplier;
    let sim = SimConfig::new(config.steps, paths, seed)?;
    let start = MarginalSampler::initial(&companion, config.kernel_grid)?;
    let half = config.steps / 2;
    let samples: Vec<std::result::Result<(f64, f64), Error>> = run_paths(paths, |id| {
        let mut rng = path_rng(seed, crate::sde_engine::streams::START_LAW, id);
        let z0 = start.sample(&mut rng);
        let path = simulate_forward_path(&companion, &sim, z0, id)?;
        let mid = path.states[half];
        let weighted = girsanov_weight(&companion, path)?;
        Ok((weighted.weight(), mid))
    });
    let mut weights = Vec::with_capacity(paths);
    let mut mids = Vec::with_capacity(paths);
    for s in samples {
        let (w, m) = s?;
        weights.push(w);
        mids.push(m);
    }
    let n = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / n;
    let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let mut out = vec![CheckResult::evaluate(
        "girsanov_unit_mean",
        CheckKind::Statistical,
        (mean - 1.0).abs(),
        3.0 * se,
        format!(
            "mean weight {mean:.6} over {paths} paths{}",
            config.power_note()
        ),
    )];

    // reweighted ensemble must follow the driftless propagation of the
    // companion's initial marginal; chi-squared with the effective sample
    // size (sum w)^2 / sum w^2
    let flat = BernsteinModel::new(
        model.geometry(),
        t_end,
        0.0,
        model.phi().coefficients().to_vec(),
        vec![1.0],
        *model.policy(),
    )?;
    let t_half = 0.5 * t_end;
    let quad_nodes = match model.geometry() {
        Geometry::Interval => 201,
        Geometry::DiskRadial => 801,
    };
    let expected: Vec<f64> = (0..BINS)
        .map(|k| {
            let a = k as f64 / BINS as f64;
            let b = (k + 1) as f64 / BINS as f64;
            quadrature::simpson(
                |x| {
                    let inner = quadrature::simpson(
                        |y| {
                            flat.forward_kernel(x, 0.0, y, t_half).unwrap()
                                * flat.measure_weight(y)
                        },
                        a,
                        b,
                        51,
                    );
                    companion.occupation_unchecked(x, 0.0) * companion.measure_weight(x) * inner
                },
                0.0,
                1.0,
                quad_nodes,
            )
        })
        .collect();
    let mut weighted_counts = vec![0.0; BINS];
    let mut sum_w = 0.0;
    let mut sum_w2 = 0.0;
    for (&w, &m) in weights.iter().zip(&mids) {
        weighted_counts[bin_of(m, BINS)] += w;
        sum_w += w;
        sum_w2 += w * w;
    }
    let n_eff = sum_w * sum_w / sum_w2;
    let stat: f64 = weighted_counts
        .iter()
        .zip(&expected)
        .map(|(&o, &e)| {
            let p_hat = o / sum_w;
            n_eff * (p_hat - e) * (p_hat - e) / e
        })
        .sum();
    out.push(CheckResult::evaluate(
        "girsanov_reweighted_chi2",
        CheckKind::Statistical,
        stat,
        CHI2_99_DF19,
        format!(
            "weighted occupation vs driftless propagation at t = {t_half}; \
             effective samples {:.0} of {paths}",
            n_eff
        ),
    ));
    Ok(out)
}

/// All path-ensemble checks at standard sample sizes.
pub fn check_path_statistics(
    model: &BernsteinModel,
    config: &VerifyConfig,
) -> Result<Vec<CheckResult>> {
    config.validate()?;
    let mut results = Vec::new();
    results.extend(occupation_group(model, config, false, 1, 0)?);
    results.extend(occupation_group(model, config, true, 1, 0)?);
    results.extend(uniform_group(model, config, 1, 0)?);
    results.extend(qv_group(model, config, 1, 0)?);
    results.extend(martingale_group(model, config, 1, 0)?);
    results.extend(moment_group(model, config, 1, 0)?);
    Ok(results)
}

/// Girsanov weight checks (unit mean and reweighted occupation law).
pub fn check_girsanov(model: &BernsteinModel, config: &VerifyConfig) -> Result<Vec<CheckResult>> {
    config.validate()?;
    girsanov_group(model, config, 1, 0)
}

type GroupRunner = fn(&BernsteinModel, &VerifyConfig, usize, u64) -> Result<Vec<CheckResult>>;

/// Statistical groups with the result names each can emit, used both for
/// selective runs and for strict-mode reruns at group granularity.
const STATISTICAL_GROUPS: &[(&[&str], GroupRunner)] = &[
    (
        &["occupation_chi2_forward_t25", "occupation_chi2_forward_t50"],
        |m, c, k, s| occupation_group(m, c, false, k, s),
    ),
    (
        &["occupation_chi2_backward_t25", "occupation_chi2_backward_t50"],
        |m, c, k, s| occupation_group(m, c, true, k, s),
    ),
    (
        &[
            "uniform_invariance_t010",
            "uniform_invariance_t050",
            "uniform_invariance_t100",
        ],
        uniform_group,
    ),
    (&["qv_window"], qv_group),
    (&["martingale_increments"], martingale_group),
    (&["moment_scaling_gamma4"], moment_group),
    (
        &["girsanov_unit_mean", "girsanov_reweighted_chi2"],
        girsanov_group,
    ),
];

const GREEN_NAMES: &[&str] = &["green_symmetry", "green_composition", "green_image_agreement"];
const KERNEL_NAMES: &[&str] = &[
    "kernel_mass_bridge",
    "kernel_mass_forward",
    "kernel_mass_backward",
    "kernel_chapman_kolmogorov",
    "kernel_reciprocity",
    "kernel_product_identity",
    "endpoint_normalization",
];
const DRIFT_NAMES: &[&str] = &[
    "drift_limit_forward",
    "diffusion_limit_forward",
    "drift_limit_backward",
    "diffusion_limit_backward",
    "drift_error_decay_backward",
];
const LINDEBERG_NAMES: &[&str] = &[
    "lindeberg_forward_final",
    "lindeberg_forward_decay",
    "lindeberg_forward_accelerating",
    "lindeberg_backward_final",
    "lindeberg_backward_decay",
    "lindeberg_backward_accelerating",
];

/// Run the checks whose names are accepted by `keep`; whole families are
/// skipped when none of their results would be kept. In strict mode each
/// statistical group containing a failure is rerun once with 4x paths on
/// a shifted stream and its results replaced; quadrature failures are
/// final.
pub fn run_selected(
    model: &BernsteinModel,
    config: &VerifyConfig,
    keep: impl Fn(&str) -> bool,
) -> Result<Vec<CheckResult>> {
    config.validate()?;
    let wants = |names: &[&str]| names.iter().any(|n| keep(n));
    let mut results = Vec::new();
    if wants(GREEN_NAMES) {
        results.extend(check_green_identities(model));
    }
    if wants(KERNEL_NAMES) {
        results.extend(check_kernel_laws(model));
    }
    if wants(DRIFT_NAMES) {
        results.extend(check_drift_limits(model, 0.5, 0.0)?);
    }
    if wants(LINDEBERG_NAMES) {
        results.extend(check_lindeberg(model, 0.5, 0.0, 0.2)?);
    }
    for (names, runner) in STATISTICAL_GROUPS {
        if wants(names) {
            results.extend(runner(model, config, 1, 0)?);
        }
    }
    results.retain(|r| keep(&r.name));
    if config.strict {
        for (names, runner) in STATISTICAL_GROUPS {
            let group_failed = results
                .iter()
                .any(|r| !r.passed && names.contains(&r.name.as_str()));
            if group_failed {
                let rerun = runner(model, config, 4, 0xA5A5_5A5A)?;
                for fresh in rerun {
                    if let Some(slot) = results.iter_mut().find(|r| r.name == fresh.name) {
                        *slot = CheckResult {
                            detail: format!("{} [strict rerun]", fresh.detail),
                            ..fresh
                        };
                    }
                }
            }
        }
    }
    Ok(results)
}

/// Run the complete suite.
pub fn run_all(model: &BernsteinModel, config: &VerifyConfig) -> Result<Vec<CheckResult>> {
    run_selected(model, config, |_| true)
}
