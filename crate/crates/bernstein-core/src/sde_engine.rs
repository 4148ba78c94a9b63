//! Path generation: forward and backward Euler-Maruyama with reflecting
//! boundaries, exact transition-kernel stepping, endpoint sampling, and
//! Girsanov path weights.
//!
//! Conventions:
//!
//! * Forward step: `Z_{t+dt} = Z_t + b*(Z_t, t) dt + dW`, then fold back
//!   into `[0, 1]`.
//! * Backward step: `Z_{t-dt} = Z_t - b(Z_t, t) dt - dW`, stepping from
//!   `T` down to 0; returned paths are reindexed to ascending time.
//! * Disk paths are simulated in planar Cartesian coordinates with the
//!   radial drift field (unit diffusion per component) and the radius is
//!   recorded as the state; radii beyond 1 are folded by rescaling the
//!   position, which reflects the planar point in the tangent line.
//! * Randomness: one counter-style stream per `(purpose, path_id)` pair on
//!   top of a seeded ChaCha generator, so serial and parallel ensembles
//!   produce bitwise-identical paths in any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bernstein_model::BernsteinModel;
use crate::quadrature;
use crate::spectral_core::{Direction, Geometry};
use crate::{Error, Result};

/// States beyond this magnitude before folding are treated as divergence.
const BLOWUP_LIMIT: f64 = 1e6;

/// Stream purposes; combined with the path index to derive independent
/// generators from one seed.
pub mod streams {
    pub const FORWARD: u32 = 1;
    pub const BACKWARD: u32 = 2;
    pub const ENDPOINTS: u32 = 3;
    pub const EXACT_KERNEL: u32 = 4;
    pub const ESTIMATE_U: u32 = 5;
    pub const ESTIMATE_V: u32 = 6;
    pub const START_LAW: u32 = 7;
}

/// Generator for one path: `seed` picks the key, `(purpose, path_id)` the
/// stream. Distinct pairs never share output.
pub fn path_rng(seed: u64, purpose: u32, path_id: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | path_id as u64);
    rng
}

/// Run one job per path index on the rayon pool; results arrive in path
/// order regardless of scheduling, keeping ensembles deterministic.
pub fn run_paths<R: Send>(path_count: usize, job: impl Fn(u32) -> R + Sync + Send) -> Vec<R> {
    (0..u32::try_from(path_count).expect("path count fits in u32"))
        .into_par_iter()
        .map(job)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    EulerReflected,
    ExactKernel,
}

/// Ensemble parameters shared by the simulation commands.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Node resolution of inverse-CDF sampling (exact scheme, endpoints).
    pub kernel_grid: usize,
}

impl SimConfig {
    pub fn new(steps: usize, paths: usize, seed: u64) -> Result<Self> {
        SimConfig {
            steps,
            paths,
            seed,
            scheme: Scheme::EulerReflected,
            kernel_grid: 512,
        }
        .validated()
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_kernel_grid(mut self, kernel_grid: usize) -> Result<Self> {
        self.kernel_grid = kernel_grid;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        if self.steps < 2 {
            return Err(Error::Domain {
                name: "steps",
                value: self.steps as f64,
                lo: 2.0,
                hi: f64::INFINITY,
            });
        }
        if self.paths == 0 {
            return Err(Error::Domain {
                name: "paths",
                value: 0.0,
                lo: 1.0,
                hi: f64::INFINITY,
            });
        }
        if self.kernel_grid < 64 {
            return Err(Error::Domain {
                name: "kernel_grid",
                value: self.kernel_grid as f64,
                lo: 64.0,
                hi: f64::INFINITY,
            });
        }
        Ok(self)
    }
}

/// Planar positions and 2-d noise of a disk path (absent on the interval).
#[derive(Debug, Clone)]
pub struct PlanarTrack {
    pub positions: Vec<[f64; 2]>,
    pub noise: Vec<[f64; 2]>,
}

/// One simulated path on the uniform grid over `[0, T]`, always stored in
/// ascending time order. `states` are interval positions or disk radii and
/// stay inside `[0, 1]`; `noise` holds the scalar Gaussian increments
/// actually used (interval paths), `planar` the Cartesian record (disk).
#[derive(Debug, Clone)]
pub struct Path {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub direction: Direction,
    pub reflections: u64,
    pub noise: Option<Vec<f64>>,
    pub planar: Option<PlanarTrack>,
}

impl Path {
    pub fn step_count(&self) -> usize {
        self.times.len() - 1
    }

    pub fn initial_state(&self) -> f64 {
        self.states[0]
    }

    pub fn final_state(&self) -> f64 {
        *self.states.last().expect("paths are nonempty")
    }

    pub fn dim(&self) -> usize {
        if self.planar.is_some() {
            2
        } else {
            1
        }
    }
}

/// A path with its Girsanov log-weight.
#[derive(Debug, Clone)]
pub struct WeightedPath {
    pub path: Path,
    pub log_weight: f64,
}

impl WeightedPath {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }
}

/// Fold into `[0, 1]` by reflection at both ends, counting boundary hits.
#[inline]
fn fold_unit(mut x: f64, reflections: &mut u64) -> f64 {
    loop {
        if x < 0.0 {
            x = -x;
            *reflections += 1;
        } else if x > 1.0 {
            x = 2.0 - x;
            *reflections += 1;
        } else {
            return x;
        }
    }
}

fn check_start(name: &'static str, z: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain {
            name,
            value: z,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

enum Drift {
    Forward,
    Backward,
}

/// Shared Euler core; `draw` yields standard normal variates in the order
/// consumed, which pins the noise layout for injection and replay.
fn euler_interval(
    model: &BernsteinModel,
    steps: usize,
    start: f64,
    drift: Drift,
    mut draw: impl FnMut() -> f64,
) -> Result<Path> {
    let horizon = model.horizon();
    let dt = horizon / steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut reflections = 0;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut noise = Vec::with_capacity(steps);
    let mut z = start;
    states.push(z);
    match drift {
        Drift::Forward => {
            times.push(0.0);
            for i in 0..steps {
                let t = i as f64 * dt;
                let b = model.forward_drift_unchecked(z, t);
                let dw = sqrt_dt * draw();
                let raw = z + b * dt + dw;
                if !raw.is_finite() || raw.abs() > BLOWUP_LIMIT {
                    return Err(Error::Blowup { step: i });
                }
                z = fold_unit(raw, &mut reflections);
                noise.push(dw);
                states.push(z);
                times.push(if i + 1 == steps { horizon } else { (i + 1) as f64 * dt });
            }
        }
        Drift::Backward => {
            times.push(horizon);
            for k in 0..steps {
                let t = horizon - k as f64 * dt;
                let b = model.backward_drift_unchecked(z, t);
                let dw = sqrt_dt * draw();
                let raw = z - b * dt - dw;
                if !raw.is_finite() || raw.abs() > BLOWUP_LIMIT {
                    return Err(Error::Blowup { step: k });
                }
                z = fold_unit(raw, &mut reflections);
                noise.push(dw);
                states.push(z);
                times.push(if k + 1 == steps { 0.0 } else { horizon - (k + 1) as f64 * dt });
            }
            times.reverse();
            states.reverse();
            noise.reverse();
        }
    }
    let direction = match drift {
        Drift::Forward => Direction::Forward,
        Drift::Backward => Direction::Backward,
    };
    Ok(Path {
        times,
        states,
        direction,
        reflections,
        noise: Some(noise),
        planar: None,
    })
}

fn euler_disk(
    model: &BernsteinModel,
    steps: usize,
    start_radius: f64,
    start_angle: f64,
    drift: Drift,
    mut draw: impl FnMut() -> f64,
) -> Result<Path> {
    let horizon = model.horizon();
    let dt = horizon / steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut reflections = 0;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut positions = Vec::with_capacity(steps + 1);
    let mut noise = Vec::with_capacity(steps);
    let mut p = [start_radius * start_angle.cos(), start_radius * start_angle.sin()];
    let mut r = start_radius;
    states.push(r);
    positions.push(p);
    let backward = matches!(drift, Drift::Backward);
    times.push(if backward { horizon } else { 0.0 });
    for k in 0..steps {
        let t = if backward { horizon - k as f64 * dt } else { k as f64 * dt };
        let b = match drift {
            Drift::Forward => model.forward_drift_unchecked(r, t),
            Drift::Backward => model.backward_drift_unchecked(r, t),
        };
        // radial unit vector; at the center the drift vanishes with it
        let (ux, uy) = if r > 1e-12 { (p[0] / r, p[1] / r) } else { (0.0, 0.0) };
        let dwx = sqrt_dt * draw();
        let dwy = sqrt_dt * draw();
        let sign = if backward { -1.0 } else { 1.0 };
        let mut px = p[0] + sign * (b * ux * dt + dwx);
        let mut py = p[1] + sign * (b * uy * dt + dwy);
        if !px.is_finite() || !py.is_finite() || px.abs() > BLOWUP_LIMIT || py.abs() > BLOWUP_LIMIT
        {
            return Err(Error::Blowup { step: k });
        }
        let raw_r = (px * px + py * py).sqrt();
        let folded = fold_unit(raw_r, &mut reflections);
        if folded != raw_r && raw_r > 0.0 {
            let scale = folded / raw_r;
            px *= scale;
            py *= scale;
        }
        p = [px, py];
        r = folded;
        noise.push([dwx, dwy]);
        states.push(r);
        positions.push(p);
        let done = k + 1 == steps;
        times.push(match (backward, done) {
            (false, true) => horizon,
            (false, false) => (k + 1) as f64 * dt,
            (true, true) => 0.0,
            (true, false) => horizon - (k + 1) as f64 * dt,
        });
    }
    if backward {
        times.reverse();
        states.reverse();
        positions.reverse();
        noise.reverse();
    }
    Ok(Path {
        times,
        states,
        direction: if backward { Direction::Backward } else { Direction::Forward },
        reflections,
        noise: None,
        planar: Some(PlanarTrack { positions, noise }),
    })
}

/// Path built from exact kernel transitions on the step grid: free of
/// time-discretization error, at the cost of one inverse-CDF tabulation
/// per step. Requires every step gap to be servable by the kernel policy.
fn exact_path(
    model: &BernsteinModel,
    config: &SimConfig,
    start: f64,
    drift: Drift,
    rng: &mut ChaCha8Rng,
) -> Result<Path> {
    let steps = config.steps;
    let dt = model.horizon() / steps as f64;
    let mut times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    times[steps] = model.horizon();
    let (states, direction) = match drift {
        Drift::Forward => {
            let mut states = Vec::with_capacity(steps + 1);
            states.push(start);
            for i in 0..steps {
                let next = exact_kernel_step(
                    model,
                    states[i],
                    times[i],
                    times[i + 1],
                    config.kernel_grid,
                    rng,
                )?;
                states.push(next);
            }
            (states, Direction::Forward)
        }
        Drift::Backward => {
            let mut states = vec![0.0; steps + 1];
            states[steps] = start;
            for i in (0..steps).rev() {
                states[i] = exact_kernel_step_backward(
                    model,
                    states[i + 1],
                    times[i + 1],
                    times[i],
                    config.kernel_grid,
                    rng,
                )?;
            }
            (states, Direction::Backward)
        }
    };
    Ok(Path {
        times,
        states,
        direction,
        reflections: 0,
        noise: None,
        planar: None,
    })
}

fn simulate(
    model: &BernsteinModel,
    config: &SimConfig,
    start: f64,
    drift: Drift,
    rng: &mut ChaCha8Rng,
) -> Result<Path> {
    check_start("path start", start)?;
    if config.scheme == Scheme::ExactKernel {
        return exact_path(model, config, start, drift, rng);
    }
    match model.geometry() {
        Geometry::Interval => euler_interval(model, config.steps, start, drift, || {
            rng.sample(StandardNormal)
        }),
        Geometry::DiskRadial => {
            // radially symmetric law: uniform starting angle
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            euler_disk(model, config.steps, start, angle, drift, || {
                rng.sample(StandardNormal)
            })
        }
    }
}

/// Forward Euler path from `z0` at `t = 0`, on the stream for path 0.
pub fn simulate_forward(model: &BernsteinModel, config: &SimConfig, z0: f64) -> Result<Path> {
    simulate_forward_path(model, config, z0, 0)
}

/// Forward Euler path on the stream derived from `path_id`.
pub fn simulate_forward_path(
    model: &BernsteinModel,
    config: &SimConfig,
    z0: f64,
    path_id: u32,
) -> Result<Path> {
    let mut rng = path_rng(config.seed, streams::FORWARD, path_id);
    simulate(model, config, z0, Drift::Forward, &mut rng)
}

/// Backward Euler path from `zT` at `t = T`, on the stream for path 0.
pub fn simulate_backward(model: &BernsteinModel, config: &SimConfig, z_t: f64) -> Result<Path> {
    simulate_backward_path(model, config, z_t, 0)
}

/// Backward Euler path on the stream derived from `path_id`.
pub fn simulate_backward_path(
    model: &BernsteinModel,
    config: &SimConfig,
    z_t: f64,
    path_id: u32,
) -> Result<Path> {
    let mut rng = path_rng(config.seed, streams::BACKWARD, path_id);
    simulate(model, config, z_t, Drift::Backward, &mut rng)
}

/// Forward interval path driven by explicit standard-normal draws, for
/// replay and fault-injection tests.
pub fn simulate_forward_with_noise(
    model: &BernsteinModel,
    steps: usize,
    z0: f64,
    draws: &[f64],
) -> Result<Path> {
    if model.geometry() != Geometry::Interval {
        return Err(Error::UnsupportedGeometry {
            op: "noise injection",
        });
    }
    check_start("path start", z0)?;
    if draws.len() != steps {
        return Err(Error::PathData("noise record must cover every step"));
    }
    let mut it = draws.iter().copied();
    euler_interval(model, steps, z0, Drift::Forward, || {
        it.next().expect("length checked")
    })
}

// ---------------------------------------------------------------------------
// Inverse-CDF machinery.
// ---------------------------------------------------------------------------

fn tabulate_cdf(xs: &[f64], density: impl Fn(f64) -> f64) -> Vec<f64> {
    let h = xs[1] - xs[0];
    let values: Vec<f64> = xs.iter().map(|&x| density(x)).collect();
    quadrature::cumulative_trapezoid(&values, h)
}

/// Invert a tabulated CDF at level `u` (in `[0, total]`) by binary search
/// and linear interpolation within the cell.
fn invert_cdf(xs: &[f64], cdf: &[f64], u: f64) -> f64 {
    let total = *cdf.last().expect("nonempty cdf");
    let u = u.clamp(0.0, total);
    let mut lo = 0;
    let mut hi = cdf.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if cdf[mid] <= u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let cell = cdf[hi] - cdf[lo];
    if cell <= 0.0 {
        return xs[lo];
    }
    xs[lo] + (u - cdf[lo]) / cell * (xs[hi] - xs[lo])
}

/// Draw from a tabulated transition density on `[0, 1]` with a unit-mass
/// sanity gate.
fn sample_tabulated(
    kernel_grid: usize,
    rng: &mut ChaCha8Rng,
    density: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let nodes = kernel_grid.max(64) + 1;
    let xs = quadrature::grid(0.0, 1.0, nodes);
    let h = xs[1] - xs[0];
    let mut values = Vec::with_capacity(nodes);
    for &y in &xs {
        values.push(density(y)?);
    }
    let cdf = quadrature::cumulative_trapezoid(&values, h);
    let total = *cdf.last().expect("nonempty");
    if (total - 1.0).abs() > 1e-3 {
        return Err(Error::KernelMass { mass: total });
    }
    let u = rng.random::<f64>() * total;
    Ok(invert_cdf(&xs, &cdf, u))
}

/// One exact forward transition: sample `y ~ m*(x, s; ., t)` by inverse CDF
/// on `kernel_grid` cells with linear interpolation.
pub fn exact_kernel_step(
    model: &BernsteinModel,
    x: f64,
    s: f64,
    t: f64,
    kernel_grid: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if !(t > s) {
        return Err(Error::Ordering { s, t });
    }
    sample_tabulated(kernel_grid, rng, |y| {
        Ok(model.forward_kernel(x, s, y, t)? * model.measure_weight(y))
    })
}

/// One exact backward transition: sample `y ~ m(x, t; ., s)`.
pub fn exact_kernel_step_backward(
    model: &BernsteinModel,
    x: f64,
    t: f64,
    s: f64,
    kernel_grid: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if !(t > s) {
        return Err(Error::Ordering { s, t });
    }
    sample_tabulated(kernel_grid, rng, |y| {
        Ok(model.backward_kernel(x, t, y, s)? * model.measure_weight(y))
    })
}

/// Inverse-CDF sampler for the occupation density at a fixed time (the
/// initial or final marginal in particular).
#[derive(Debug, Clone)]
pub struct MarginalSampler {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl MarginalSampler {
    pub fn at_time(model: &BernsteinModel, t: f64, kernel_grid: usize) -> Result<Self> {
        model.occupation(0.0, t)?; // surfaces domain errors for t
        let nodes = kernel_grid.max(64) + 1;
        let xs = quadrature::grid(0.0, 1.0, nodes);
        let cdf = tabulate_cdf(&xs, |x| {
            model.occupation_unchecked(x, t) * model.measure_weight(x)
        });
        let total = *cdf.last().expect("nonempty");
        if (total - 1.0).abs() > 1e-3 {
            return Err(Error::KernelMass { mass: total });
        }
        Ok(MarginalSampler { xs, cdf })
    }

    pub fn initial(model: &BernsteinModel, kernel_grid: usize) -> Result<Self> {
        Self::at_time(model, 0.0, kernel_grid)
    }

    pub fn final_time(model: &BernsteinModel, kernel_grid: usize) -> Result<Self> {
        Self::at_time(model, model.horizon(), kernel_grid)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let total = *self.cdf.last().expect("nonempty");
        invert_cdf(&self.xs, &self.cdf, rng.random::<f64>() * total)
    }
}

/// Draw a state uniformly with respect to the geometry's reference measure:
/// uniform position on the interval, area-uniform radius on the disk.
pub fn sample_uniform_state(geometry: Geometry, rng: &mut ChaCha8Rng) -> f64 {
    let u = rng.random::<f64>();
    match geometry {
        Geometry::Interval => u,
        Geometry::DiskRadial => u.sqrt(),
    }
}

/// Joint sampler for the endpoint pair `(Z_0, Z_T) ~ mu`: inverse CDF of the
/// initial marginal, then of the conditional final slice of the endpoint
/// density.
#[derive(Debug, Clone)]
pub struct EndpointSampler {
    model: BernsteinModel,
    xs: Vec<f64>,
    initial_cdf: Vec<f64>,
}

impl EndpointSampler {
    pub fn new(model: &BernsteinModel, kernel_grid: usize) -> Result<Self> {
        let nodes = kernel_grid.max(64) + 1;
        let xs = quadrature::grid(0.0, 1.0, nodes);
        let initial_cdf = tabulate_cdf(&xs, |x| {
            model.occupation_unchecked(x, 0.0) * model.measure_weight(x)
        });
        let total = *initial_cdf.last().expect("nonempty");
        if (total - 1.0).abs() > 1e-3 {
            return Err(Error::KernelMass { mass: total });
        }
        Ok(EndpointSampler {
            model: model.clone(),
            xs,
            initial_cdf,
        })
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
        let total0 = *self.initial_cdf.last().expect("nonempty");
        let z0 = invert_cdf(&self.xs, &self.initial_cdf, rng.random::<f64>() * total0);
        let mut slice = Vec::with_capacity(self.xs.len());
        for &y in &self.xs {
            slice.push(self.model.endpoint_density(z0, y)? * self.model.measure_weight(y));
        }
        let h = self.xs[1] - self.xs[0];
        let cdf = quadrature::cumulative_trapezoid(&slice, h);
        let total = *cdf.last().expect("nonempty");
        if !(total > 0.0) {
            return Err(Error::KernelMass { mass: total });
        }
        let z_t = invert_cdf(&self.xs, &cdf, rng.random::<f64>() * total);
        Ok((z0, z_t))
    }
}

/// Endpoint pair from a one-shot sampler; ensembles should construct an
/// [`EndpointSampler`] once and reuse it.
pub fn sample_endpoints(model: &BernsteinModel, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    EndpointSampler::new(model, 512)?.sample(rng)
}

// ---------------------------------------------------------------------------
// Girsanov weights.
// ---------------------------------------------------------------------------

/// Attach the forward Girsanov log-weight
/// `-(sum_i X_i . dW_i) - (1/2) sum_i |X_i|^2 dt` with `X = b*` evaluated at
/// left endpoints. Requires a forward path with its noise record; removing
/// the drift in law, the reweighted ensemble follows the driftless kernel.
pub fn girsanov_weight(model: &BernsteinModel, path: Path) -> Result<WeightedPath> {
    if path.direction != Direction::Forward {
        return Err(Error::PathData("girsanov weight requires a forward path"));
    }
    let n = path.times.len();
    if n < 2 {
        return Err(Error::PathData("path has no steps"));
    }
    let dt = path.times[1] - path.times[0];
    let mut log_weight = 0.0;
    match (&path.noise, &path.planar) {
        (Some(noise), _) => {
            if noise.len() != n - 1 {
                return Err(Error::PathData("noise record does not cover every step"));
            }
            for i in 0..n - 1 {
                let x = model.forward_drift_unchecked(path.states[i], path.times[i]);
                log_weight -= x * noise[i] + 0.5 * x * x * dt;
            }
        }
        (None, Some(track)) => {
            if track.noise.len() != n - 1 {
                return Err(Error::PathData("noise record does not cover every step"));
            }
            for i in 0..n - 1 {
                let r = path.states[i];
                let x = model.forward_drift_unchecked(r, path.times[i]);
                let (ux, uy) = if r > 1e-12 {
                    (track.positions[i][0] / r, track.positions[i][1] / r)
                } else {
                    (0.0, 0.0)
                };
                let dot = ux * track.noise[i][0] + uy * track.noise[i][1];
                log_weight -= x * dot + 0.5 * x * x * dt;
            }
        }
        (None, None) => return Err(Error::PathData("noise record required")),
    }
    if !log_weight.is_finite() {
        return Err(Error::PathData("non-finite girsanov weight"));
    }
    Ok(WeightedPath { path, log_weight })
}
