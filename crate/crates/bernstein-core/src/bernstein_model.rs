//! The reversible-diffusion model: endpoint measure, transition kernels,
//! marginals, occupation density, and drifts for one problem instance.
//!
//! A model is determined by a geometry, a horizon `T`, a constant potential
//! `V0`, and two positive boundary data: `phi` at `t = 0` (forward) and
//! `psi` at `t = T` (backward). Writing `u(x,t)` for the forward evolution
//! of `phi` and `v(x,t)` for the backward evolution of `psi` (both under
//! `deither = (1/2) Laplacian - V0`), the package provides
//!
//! ```text
//! endpoint density   mu(x,y)   = phi(x) G(y,T;x,0) psi(y)
//! bridge transition  p         = G(x,t;z,r) G(z,r;y,s) / G(x,t;y,s)
//! forward kernel     m*(x,s;y,t) = G(y,t;x,s) v(y,t) / v(x,s)
//! backward kernel    m(x,t;y,s)  = G(x,t;y,s) u(y,s) / u(x,t)
//! occupation         rho(x,t)  = u(x,t) v(x,t)
//! drifts             b*(x,t) = d/dx ln v ,   b(x,t) = -d/dx ln u
//! ```
//!
//! All densities are taken with respect to the geometry's reference measure
//! `d mu_geom`: plain `dx` on the interval, the planar area element
//! `2 pi r dr` on the disk. Under that convention every kernel above has
//! unit mass, `rho` integrates to 1 at every time, and the disk occupation
//! is the physical area density of the process.
//!
//! The constructor rescales `psi` so the endpoint measure has total mass 1
//! (the scale is recorded); a constant potential only multiplies `u`, `v`,
//! and `G` by `exp(-V0 * elapsed)` factors that cancel in every kernel and
//! drift, so those objects are independent of `V0` by construction.

use crate::spectral_core::{
    self, Direction, Geometry, SpectralExpansion, TruncationPolicy,
};
use crate::{quadrature, Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Minimum allowed value of `u` and `v` on the validation grid.
const POSITIVITY_GUARD: f64 = 1e-9;

/// A fully assembled problem instance. Immutable after construction; every
/// evaluator is pure and safe to call concurrently.
#[derive(Debug, Clone)]
pub struct BernsteinModel {
    geometry: Geometry,
    horizon: f64,
    potential: f64,
    phi: SpectralExpansion,
    psi: SpectralExpansion,
    policy: TruncationPolicy,
    psi_scale: f64,
    drift_sign: f64,
}

impl BernsteinModel {
    /// Build a model from raw expansion coefficients of the two data.
    ///
    /// `psi_coefficients` are rescaled so the endpoint measure has unit
    /// mass; both data must stay above a positivity guard on a validation
    /// grid over `[0, 1] x [0, T]`.
    pub fn new(
        geometry: Geometry,
        horizon: f64,
        potential: f64,
        phi_coefficients: Vec<f64>,
        psi_coefficients: Vec<f64>,
        policy: TruncationPolicy,
    ) -> Result<Self> {
        Self::build(
            geometry,
            horizon,
            potential,
            phi_coefficients,
            psi_coefficients,
            policy,
            true,
        )
    }

    /// Negative-control constructor: identical to [`BernsteinModel::new`]
    /// but skips the final-datum rescale, so the endpoint measure keeps
    /// whatever mass the raw data produce. Normalization-sensitive checks
    /// are expected to fail against such a model.
    pub fn new_unnormalized(
        geometry: Geometry,
        horizon: f64,
        potential: f64,
        phi_coefficients: Vec<f64>,
        psi_coefficients: Vec<f64>,
        policy: TruncationPolicy,
    ) -> Result<Self> {
        Self::build(
            geometry,
            horizon,
            potential,
            phi_coefficients,
            psi_coefficients,
            policy,
            false,
        )
    }

    fn build(
        geometry: Geometry,
        horizon: f64,
        potential: f64,
        phi_coefficients: Vec<f64>,
        psi_coefficients: Vec<f64>,
        policy: TruncationPolicy,
        normalize: bool,
    ) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Domain {
                name: "horizon",
                value: horizon,
                lo: f64::MIN_POSITIVE,
                hi: f64::INFINITY,
            });
        }
        if !potential.is_finite() {
            return Err(Error::Domain {
                name: "potential",
                value: potential,
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            });
        }
        let phi = SpectralExpansion::new(geometry, phi_coefficients, Direction::Forward, horizon)?;
        let psi_raw =
            SpectralExpansion::new(geometry, psi_coefficients, Direction::Backward, horizon)?;

        // total endpoint mass, exactly, through mode orthogonality:
        //   Int Int phi(x) G(y,T;x,0) psi(y) dmu(x) dmu(y)
        //     = exp(-V0 T) * geom * sum_n a_n b_n N_n exp(-lambda_n T)
        let geom_factor = match geometry {
            Geometry::Interval => 1.0,
            Geometry::DiskRadial => TWO_PI,
        };
        let mut bilinear = 0.0;
        for ((mode, &a), &b) in phi
            .modes()
            .iter()
            .zip(phi.coefficients())
            .zip(psi_raw.coefficients())
        {
            bilinear += a * b * mode.normalizer * (-mode.eigenvalue * horizon).exp();
        }
        let mass = (-potential * horizon).exp() * geom_factor * bilinear;
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Normalization { mass });
        }
        let psi_scale = if normalize { 1.0 / mass } else { 1.0 };
        let psi = if normalize {
            let scaled: Vec<f64> = psi_raw.coefficients().iter().map(|c| c * psi_scale).collect();
            SpectralExpansion::new(geometry, scaled, Direction::Backward, horizon)?
        } else {
            psi_raw
        };

        let model = BernsteinModel {
            geometry,
            horizon,
            potential,
            phi,
            psi,
            policy,
            psi_scale,
            drift_sign: 1.0,
        };
        model.validate_data_positive()?;
        Ok(model)
    }

    /// Negative-control builder: flips the sign of the backward drift while
    /// leaving everything else intact. Path statistics driven by the flipped
    /// drift are expected to fail verification.
    pub fn flipped_drift_control(mut self) -> Self {
        self.drift_sign = -self.drift_sign;
        self
    }

    fn validate_data_positive(&self) -> Result<()> {
        for i in 0..=40 {
            let x = i as f64 / 40.0;
            for j in 0..=20 {
                let t = self.horizon * j as f64 / 20.0;
                for (what, value) in [
                    ("forward datum evolution", self.u_unpotentialed(x, t)),
                    ("backward datum evolution", self.v_unpotentialed(x, t)),
                ] {
                    if !(value > POSITIVITY_GUARD) {
                        return Err(Error::NonPositive {
                            what,
                            min: value,
                            x,
                            t,
                            guard: POSITIVITY_GUARD,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn potential(&self) -> f64 {
        self.potential
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    /// Scale applied to the raw final datum during normalization.
    pub fn psi_scale(&self) -> f64 {
        self.psi_scale
    }

    pub fn phi(&self) -> &SpectralExpansion {
        &self.phi
    }

    pub fn psi(&self) -> &SpectralExpansion {
        &self.psi
    }

    /// Density of the reference measure `d mu_geom` with respect to `dx`:
    /// 1 on the interval, `2 pi x` on the disk.
    #[inline]
    pub fn measure_weight(&self, x: f64) -> f64 {
        match self.geometry {
            Geometry::Interval => 1.0,
            Geometry::DiskRadial => TWO_PI * x,
        }
    }

    fn check_time(&self, name: &'static str, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Domain {
                name,
                value: t,
                lo: 0.0,
                hi: self.horizon,
            });
        }
        Ok(())
    }

    fn check_state(&self, name: &'static str, x: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain {
                name,
                value: x,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(())
    }

    // -- scalar fields ------------------------------------------------------

    #[inline]
    fn u_unpotentialed(&self, x: f64, t: f64) -> f64 {
        self.phi.evaluate_unchecked(x, t, self.horizon)
    }

    #[inline]
    fn v_unpotentialed(&self, x: f64, t: f64) -> f64 {
        self.psi.evaluate_unchecked(x, t, self.horizon)
    }

    /// Forward evolution `u(x,t)` of the initial datum under the potential.
    pub fn u(&self, x: f64, t: f64) -> Result<f64> {
        self.check_state("state", x)?;
        self.check_time("time", t)?;
        Ok((-self.potential * t).exp() * self.u_unpotentialed(x, t))
    }

    /// Backward evolution `v(x,t)` of the (normalized) final datum.
    pub fn v(&self, x: f64, t: f64) -> Result<f64> {
        self.check_state("state", x)?;
        self.check_time("time", t)?;
        Ok((-self.potential * (self.horizon - t)).exp() * self.v_unpotentialed(x, t))
    }

    /// Occupation density `rho(x,t) = u v` with respect to `d mu_geom`;
    /// integrates to 1 at every time by the endpoint normalization.
    pub fn occupation(&self, x: f64, t: f64) -> Result<f64> {
        self.check_state("state", x)?;
        self.check_time("time", t)?;
        Ok(self.occupation_unchecked(x, t))
    }

    #[inline]
    pub(crate) fn occupation_unchecked(&self, x: f64, t: f64) -> f64 {
        (-self.potential * self.horizon).exp()
            * self.u_unpotentialed(x, t)
            * self.v_unpotentialed(x, t)
    }

    /// Initial marginal `mu_0(x) = phi(x) v(x, 0)`; equals `occupation(x, 0)`.
    pub fn marginal_initial(&self, x: f64) -> Result<f64> {
        self.occupation(x, 0.0)
    }

    /// Final marginal `mu_T(y) = psi(y) u(y, T)`; equals `occupation(y, T)`.
    pub fn marginal_final(&self, y: f64) -> Result<f64> {
        self.occupation(y, self.horizon)
    }

    /// Mass of the occupation density over `[a, b]` at time `t` (composite
    /// quadrature with `nodes` points against `d mu_geom`).
    pub fn occupation_mass_in(&self, a: f64, b: f64, t: f64, nodes: usize) -> Result<f64> {
        self.check_state("interval end", a)?;
        self.check_state("interval end", b)?;
        self.check_time("time", t)?;
        Ok(quadrature::simpson(
            |x| self.occupation_unchecked(x, t) * self.measure_weight(x),
            a,
            b,
            nodes,
        ))
    }

    // -- Green function and kernels -----------------------------------------

    /// Model Green function with respect to `d mu_geom`, including the
    /// potential factor: `exp(-V0 (t-s))` times the heat kernel.
    pub fn green(&self, x: f64, t: f64, y: f64, s: f64) -> Result<f64> {
        self.check_state("green state x", x)?;
        self.check_state("green state y", y)?;
        self.check_time("green time t", t)?;
        self.check_time("green time s", s)?;
        Ok((-self.potential * (t - s)).exp() * self.green_heat(x, t, y, s)?)
    }

    /// The V = 0 part of the Green function (geometry-scaled dispatcher).
    fn green_heat(&self, x: f64, t: f64, y: f64, s: f64) -> Result<f64> {
        let scale = match self.geometry {
            Geometry::Interval => 1.0,
            Geometry::DiskRadial => 1.0 / TWO_PI,
        };
        Ok(scale * spectral_core::green(x, t, y, s, self.geometry, &self.policy)?)
    }

    /// Endpoint measure density `mu(x, y) = phi(x) G(y,T;x,0) psi(y)` with
    /// respect to `d mu_geom(x) d mu_geom(y)`; integrates to 1.
    pub fn endpoint_density(&self, x: f64, y: f64) -> Result<f64> {
        self.check_state("endpoint x", x)?;
        self.check_state("endpoint y", y)?;
        let g = (-self.potential * self.horizon).exp() * self.green_heat(y, self.horizon, x, 0.0)?;
        Ok(self.u_unpotentialed(x, 0.0) * g * self.v_unpotentialed(y, self.horizon))
    }

    /// Bridge transition `p = G(x,t;z,r) G(z,r;y,s) / G(x,t;y,s)` for the
    /// process pinned at `(y, s)` in the past and `(x, t)` in the future,
    /// evaluated at the intermediate point `(z, r)`. Density in `z` with
    /// respect to `d mu_geom`; the potential cancels.
    pub fn bernstein_transition(
        &self,
        x: f64,
        t: f64,
        z: f64,
        r: f64,
        y: f64,
        s: f64,
    ) -> Result<f64> {
        self.check_state("bridge state x", x)?;
        self.check_state("bridge state z", z)?;
        self.check_state("bridge state y", y)?;
        self.check_time("bridge time", t)?;
        self.check_time("bridge time", r)?;
        self.check_time("bridge time", s)?;
        if !(s < r && r < t) {
            return Err(Error::Ordering { s, t: if r <= s { r } else { t } });
        }
        let denom = self.green_heat(x, t, y, s)?;
        if denom < 1e-300 {
            return Err(Error::Underflow {
                what: "bridge denominator",
                value: denom,
            });
        }
        Ok(self.green_heat(x, t, z, r)? * self.green_heat(z, r, y, s)? / denom)
    }

    /// Forward Markov kernel `m*(x,s; y,t) = G(y,t;x,s) v(y,t) / v(x,s)`,
    /// a density in `y` against `d mu_geom`. Independent of the potential.
    pub fn forward_kernel(&self, x: f64, s: f64, y: f64, t: f64) -> Result<f64> {
        self.check_state("kernel state x", x)?;
        self.check_state("kernel state y", y)?;
        self.check_time("kernel time", s)?;
        self.check_time("kernel time", t)?;
        if !(t > s) {
            return Err(Error::Ordering { s, t });
        }
        let denom = self.v_unpotentialed(x, s);
        if denom < 1e-300 {
            return Err(Error::Underflow {
                what: "forward kernel denominator",
                value: denom,
            });
        }
        Ok(self.green_heat(y, t, x, s)? * self.v_unpotentialed(y, t) / denom)
    }

    /// Backward Markov kernel `m(x,t; y,s) = G(x,t;y,s) u(y,s) / u(x,t)`,
    /// a density in `y` against `d mu_geom`. Independent of the potential.
    pub fn backward_kernel(&self, x: f64, t: f64, y: f64, s: f64) -> Result<f64> {
        self.check_state("kernel state x", x)?;
        self.check_state("kernel state y", y)?;
        self.check_time("kernel time", s)?;
        self.check_time("kernel time", t)?;
        if !(t > s) {
            return Err(Error::Ordering { s, t });
        }
        let denom = self.u_unpotentialed(x, t);
        if denom < 1e-300 {
            return Err(Error::Underflow {
                what: "backward kernel denominator",
                value: denom,
            });
        }
        Ok(self.green_heat(x, t, y, s)? * self.u_unpotentialed(y, s) / denom)
    }

    // -- drifts -------------------------------------------------------------

    /// Forward drift `b*(x,t) = d/dx ln v(x,t)`, from the term-wise
    /// differentiated series; the potential cancels in the log derivative.
    pub fn forward_drift(&self, x: f64, t: f64) -> Result<f64> {
        self.check_state("drift state", x)?;
        self.check_time("drift time", t)?;
        Ok(self.forward_drift_unchecked(x, t))
    }

    #[inline]
    pub(crate) fn forward_drift_unchecked(&self, x: f64, t: f64) -> f64 {
        self.psi.evaluate_dx_unchecked(x, t, self.horizon)
            / self.psi.evaluate_unchecked(x, t, self.horizon)
    }

    /// Backward drift `b(x,t) = -d/dx ln u(x,t)`; exactly 0 at the disk
    /// center, where the basis derivatives vanish.
    pub fn backward_drift(&self, x: f64, t: f64) -> Result<f64> {
        self.check_state("drift state", x)?;
        self.check_time("drift time", t)?;
        Ok(self.backward_drift_unchecked(x, t))
    }

    #[inline]
    pub(crate) fn backward_drift_unchecked(&self, x: f64, t: f64) -> f64 {
        -self.drift_sign * self.phi.evaluate_dx_unchecked(x, t, self.horizon)
            / self.phi.evaluate_unchecked(x, t, self.horizon)
    }
}

/// Occupation density tabulated on a fixed space-time grid, with the unit
/// mass invariant checked at construction for `t` in `{0, T/4, T/2, 3T/4, T}`.
#[derive(Debug, Clone)]
pub struct OccupationDensity {
    xs: Vec<f64>,
    ts: Vec<f64>,
    rows: Vec<Vec<f64>>,
    masses: Vec<f64>,
}

impl OccupationDensity {
    pub fn tabulate(model: &BernsteinModel, spatial_nodes: usize) -> Result<Self> {
        let nodes = spatial_nodes.max(81) | 1;
        let xs = quadrature::grid(0.0, 1.0, nodes);
        let t_grid: Vec<f64> = (0..=4).map(|k| model.horizon() * k as f64 / 4.0).collect();
        let mut rows = Vec::with_capacity(t_grid.len());
        let mut masses = Vec::with_capacity(t_grid.len());
        let h = 1.0 / (nodes - 1) as f64;
        for &t in &t_grid {
            let row: Vec<f64> = xs
                .iter()
                .map(|&x| model.occupation_unchecked(x, t))
                .collect();
            let weighted: Vec<f64> = row
                .iter()
                .zip(&xs)
                .map(|(r, &x)| r * model.measure_weight(x))
                .collect();
            let mass = quadrature::simpson_samples(&weighted, h);
            if (mass - 1.0).abs() > 1e-8 {
                return Err(Error::Normalization { mass });
            }
            rows.push(row);
            masses.push(mass);
        }
        Ok(OccupationDensity {
            xs,
            ts: t_grid,
            rows,
            masses,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.xs
    }

    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn value(&self, time_index: usize, node_index: usize) -> f64 {
        self.rows[time_index][node_index]
    }

    pub fn mass(&self, time_index: usize) -> f64 {
        self.masses[time_index]
    }
}
