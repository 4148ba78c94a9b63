//! Monte Carlo estimators for the two datum evolutions, via their dual
//! path representations:
//!
//! ```text
//! u(x, t) = E[ exp(-V0 t)     phi(Z_0) ]   over driftless reflected paths
//!                                          run from (x, t) back to 0,
//! v(x, t) = E[ exp(-V0 (T-t)) psi(Z_T) ]   over driftless reflected paths
//!                                          run from (x, t) forward to T.
//! ```
//!
//! For a constant potential the exponential functional is deterministic,
//! so the only statistical content is the datum at the far endpoint; every
//! report carries a standard error and the spectral reference value.
//! Interval folding is exact in law for driftless paths (image symmetry of
//! the reflected kernel), so these estimators are unbiased there at any
//! step count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bernstein_model::BernsteinModel;
use crate::quadrature;
use crate::sde_engine::{path_rng, run_paths, streams, SimConfig};
use crate::spectral_core::Geometry;
use crate::{Error, Result};

/// A Monte Carlo estimate with its uncertainty and, when available, the
/// deterministic reference it should reproduce.
#[derive(Debug, Clone)]
pub struct EstimatorReport {
    pub estimate: f64,
    /// Sample standard deviation over sqrt(samples); 0 for degenerate cases.
    pub std_error: f64,
    pub samples: usize,
    /// Reference value and a label naming its provenance.
    pub target: Option<(f64, String)>,
}

impl EstimatorReport {
    /// Standardized deviation from the target; 0 when the estimate is exact.
    pub fn z_score(&self) -> Option<f64> {
        let (target, _) = self.target.as_ref()?;
        let diff = self.estimate - target;
        if self.std_error > 0.0 {
            Some(diff / self.std_error)
        } else if diff == 0.0 {
            Some(0.0)
        } else {
            Some(diff.signum() * f64::INFINITY)
        }
    }

    fn from_samples(values: &[f64], target: Option<(f64, String)>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        EstimatorReport {
            estimate: mean,
            std_error: (var / n).sqrt(),
            samples: values.len(),
            target,
        }
    }
}

/// Terminal state of a driftless reflected path of the given duration; the
/// law is symmetric in time, so one walker serves both directions.
fn driftless_terminal(
    geometry: Geometry,
    start: f64,
    duration: f64,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let dt = duration / steps as f64;
    let sqrt_dt = dt.sqrt();
    match geometry {
        Geometry::Interval => {
            let mut z = start;
            for _ in 0..steps {
                let dw: f64 = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
                z += dw;
                while !(0.0..=1.0).contains(&z) {
                    z = if z < 0.0 { -z } else { 2.0 - z };
                }
            }
            z
        }
        Geometry::DiskRadial => {
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let mut px = start * angle.cos();
            let mut py = start * angle.sin();
            for _ in 0..steps {
                px += rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
                py += rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
                let r = (px * px + py * py).sqrt();
                if r > 1.0 {
                    let folded = 2.0 - r;
                    let scale = folded.max(0.0) / r;
                    px *= scale;
                    py *= scale;
                }
            }
            (px * px + py * py).sqrt()
        }
    }
}

fn check_point(model: &BernsteinModel, x: f64, t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            name: "estimator state",
            value: x,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if !(0.0..=model.horizon()).contains(&t) {
        return Err(Error::Domain {
            name: "estimator time",
            value: t,
            lo: 0.0,
            hi: model.horizon(),
        });
    }
    Ok(())
}

/// Estimate `u(x, t)` from backward driftless paths; at `t = 0` the value
/// is the initial datum itself and is returned exactly.
pub fn estimate_u(
    model: &BernsteinModel,
    x: f64,
    t: f64,
    config: &SimConfig,
) -> Result<EstimatorReport> {
    check_point(model, x, t)?;
    let target = Some((model.u(x, t)?, String::from("spectral u")));
    if t == 0.0 {
        return Ok(EstimatorReport {
            estimate: model.u(x, 0.0)?,
            std_error: 0.0,
            samples: 0,
            target,
        });
    }
    let damping = (-model.potential() * t).exp();
    let values = run_paths(config.paths, |id| {
        let mut rng = path_rng(config.seed, streams::ESTIMATE_U, id);
        let z0 = driftless_terminal(model.geometry(), x, t, config.steps, &mut rng);
        damping * model.phi().evaluate_unchecked(z0, 0.0, model.horizon())
    });
    Ok(EstimatorReport::from_samples(&values, target))
}

/// Estimate `v(x, t)` from forward driftless paths; at `t = T` the value
/// is the (normalized) final datum itself and is returned exactly.
pub fn estimate_v(
    model: &BernsteinModel,
    x: f64,
    t: f64,
    config: &SimConfig,
) -> Result<EstimatorReport> {
    check_point(model, x, t)?;
    let horizon = model.horizon();
    let target = Some((model.v(x, t)?, String::from("spectral v")));
    if t == horizon {
        return Ok(EstimatorReport {
            estimate: model.v(x, horizon)?,
            std_error: 0.0,
            samples: 0,
            target,
        });
    }
    let damping = (-model.potential() * (horizon - t)).exp();
    let values = run_paths(config.paths, |id| {
        let mut rng = path_rng(config.seed, streams::ESTIMATE_V, id);
        let z_t = driftless_terminal(model.geometry(), x, horizon - t, config.steps, &mut rng);
        damping * model.psi().evaluate_unchecked(z_t, horizon, horizon)
    });
    Ok(EstimatorReport::from_samples(&values, target))
}

/// A Monte Carlo estimate paired with the quadrature value of the same
/// kernel integral.
#[derive(Debug, Clone)]
pub struct ConsistencyPair {
    pub monte_carlo: EstimatorReport,
    pub quadrature: f64,
}

/// For the potential-free model, check the kernel representations of the
/// two expectations:
///
/// ```text
/// E[phi(Z_0)] = Int G(x,t; y,0) phi(y) dmu(y)
/// E[psi(Z_T)] = Int G(y,T; x,t) psi(y) dmu(y)
/// ```
///
/// Returns the `(u side, v side)` pairs.
pub fn kernel_consistency(
    model: &BernsteinModel,
    x: f64,
    t: f64,
    config: &SimConfig,
) -> Result<(ConsistencyPair, ConsistencyPair)> {
    if model.potential() != 0.0 {
        return Err(Error::Domain {
            name: "kernel consistency requires zero potential",
            value: model.potential(),
            lo: 0.0,
            hi: 0.0,
        });
    }
    check_point(model, x, t)?;
    let horizon = model.horizon();
    if !(t > 0.0 && t < horizon) {
        return Err(Error::Domain {
            name: "kernel consistency time",
            value: t,
            lo: f64::MIN_POSITIVE,
            hi: horizon,
        });
    }
    let nodes = 801;
    let u_quad = quadrature::simpson(
        |y| {
            model.green(x, t, y, 0.0).unwrap()
                * model.phi().evaluate_unchecked(y, 0.0, horizon)
                * model.measure_weight(y)
        },
        0.0,
        1.0,
        nodes,
    );
    let v_quad = quadrature::simpson(
        |y| {
            model.green(y, horizon, x, t).unwrap()
                * model.psi().evaluate_unchecked(y, horizon, horizon)
                * model.measure_weight(y)
        },
        0.0,
        1.0,
        nodes,
    );
    let u_mc = estimate_u(model, x, t, config)?;
    let v_mc = estimate_v(model, x, t, config)?;
    Ok((
        ConsistencyPair {
            monte_carlo: u_mc,
            quadrature: u_quad,
        },
        ConsistencyPair {
            monte_carlo: v_mc,
            quadrature: v_quad,
        },
    ))
}
