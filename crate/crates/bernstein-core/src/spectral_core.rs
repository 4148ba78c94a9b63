//! Neumann eigenfunction expansions and parabolic Green functions.
//!
//! Both supported geometries share one spectral template: an orthogonal basis
//! `e_n` on `[0, 1]` with eigenvalues `lambda_n` of `-(1/2) Laplacian` under
//! Neumann conditions, reference measure `w(x) dx`, and Green function
//!
//! ```text
//! g(x, t; y, s) = sum_n e_n(x) e_n(y) exp(-lambda_n (t - s)) / N_n ,
//! N_n = Int e_n^2 w dx .
//! ```
//!
//! * Interval: `e_n(x) = cos(pi n x)`, `lambda_n = pi^2 n^2 / 2`, `w = 1`,
//!   `N_0 = 1`, `N_n = 1/2`.
//! * DiskRadial: `e_n(r) = J0(sqrt(mu_n) r)` over the Neumann eigenvalues
//!   `mu_n` (squares of the roots of `J1`), `lambda_n = mu_n / 2`, `w = r`,
//!   `N_n = J0(sqrt(mu_n))^2 / 2`.
//!
//! With these conventions `Int g(x,t;y,s) w(y) dy = 1` exactly at any
//! truncation (only the constant mode carries mass; every other mode
//! integrates to a `J1` root residual), the kernel is symmetric term by
//! term, and Chapman-Kolmogorov holds against the same measure.
//!
//! The spectral form converges slowly as `t - s -> 0`; on the interval the
//! method-of-images form [`green_images`] covers that regime, and the
//! [`green`] dispatcher switches between the two at the policy's `min_gap`.

use std::sync::OnceLock;

use crate::special_functions::{j0_unchecked, j1_unchecked, neumann_eigenvalues, MAX_ROOTS};
use crate::{quadrature, Error, Result};

/// State space of the problem; states always live in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// The unit interval with reflecting ends.
    Interval,
    /// The radial coordinate of the planar unit disk (radially symmetric data).
    DiskRadial,
}

impl Geometry {
    /// Reference weight of the spectral measure `w(x) dx`.
    #[inline]
    pub fn spectral_weight(self, x: f64) -> f64 {
        match self {
            Geometry::Interval => 1.0,
            Geometry::DiskRadial => x,
        }
    }

    pub fn contains(self, x: f64) -> bool {
        (0.0..=1.0).contains(&x)
    }
}

/// Time orientation of an expansion: forward data evolve from `t = 0`,
/// backward data evolve toward `t = T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// One Neumann eigenmode.
#[derive(Debug, Clone, Copy)]
pub struct EigenMode {
    /// Mode number, starting at 0 for the constant mode.
    pub index: usize,
    /// Eigenvalue `lambda_n` of `-(1/2) Laplacian` (units 1/time); 0 for n = 0.
    pub eigenvalue: f64,
    /// Squared L2 norm of the basis function against the spectral weight.
    pub normalizer: f64,
    /// Spatial frequency: `pi n` on the interval, `sqrt(mu_n)` on the disk.
    pub frequency: f64,
}

impl EigenMode {
    /// Basis function value `e_n(x)`.
    #[inline]
    pub fn basis(&self, geometry: Geometry, x: f64) -> f64 {
        match geometry {
            Geometry::Interval => (self.frequency * x).cos(),
            Geometry::DiskRadial => j0_unchecked(self.frequency * x),
        }
    }

    /// Basis derivative `e_n'(x)`; vanishes at both ends of either geometry
    /// (Neumann structure), and at the disk center.
    #[inline]
    pub fn basis_dx(&self, geometry: Geometry, x: f64) -> f64 {
        match geometry {
            Geometry::Interval => -self.frequency * (self.frequency * x).sin(),
            Geometry::DiskRadial => -self.frequency * j1_unchecked(self.frequency * x),
        }
    }
}

fn interval_mode(n: usize) -> EigenMode {
    let freq = std::f64::consts::PI * n as f64;
    EigenMode {
        index: n,
        eigenvalue: 0.5 * freq * freq,
        normalizer: if n == 0 { 1.0 } else { 0.5 },
        frequency: freq,
    }
}

fn disk_mode_table() -> &'static [EigenMode] {
    static TABLE: OnceLock<Vec<EigenMode>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let roots = neumann_eigenvalues(MAX_ROOTS)
            .expect("static Neumann root table within supported count");
        roots
            .values()
            .iter()
            .enumerate()
            .map(|(n, &mu)| {
                let freq = mu.sqrt();
                let j0 = j0_unchecked(freq);
                EigenMode {
                    index: n,
                    eigenvalue: 0.5 * mu,
                    normalizer: 0.5 * j0 * j0,
                    frequency: freq,
                }
            })
            .collect()
    })
}

/// First `count` eigenmodes of a geometry.
///
/// The disk supports at most [`MAX_ROOTS`] modes; the interval is analytic in
/// the mode number and accepts any positive count.
pub fn eigenmodes(geometry: Geometry, count: usize) -> Result<Vec<EigenMode>> {
    if count == 0 {
        return Err(Error::Domain {
            name: "mode count",
            value: 0.0,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    match geometry {
        Geometry::Interval => Ok((0..count).map(interval_mode).collect()),
        Geometry::DiskRadial => {
            if count > MAX_ROOTS {
                return Err(Error::Domain {
                    name: "disk mode count",
                    value: count as f64,
                    lo: 1.0,
                    hi: MAX_ROOTS as f64,
                });
            }
            Ok(disk_mode_table()[..count].to_vec())
        }
    }
}

// ---------------------------------------------------------------------------
// Truncation policy.
// ---------------------------------------------------------------------------

/// Controls every spectral kernel evaluation: series length, the smallest
/// gap served by the spectral form, and the certified tail tolerance.
#[derive(Debug, Clone, Copy)]
pub struct TruncationPolicy {
    /// Number of retained modes.
    pub max_modes: usize,
    /// Smallest `t - s` for which the pure spectral form is used.
    pub min_gap: f64,
    /// Certified bound on the discarded spectral tail at `min_gap`.
    pub tail_tol: f64,
}

/// Default interior image count for [`green_images`]; the image tail decays
/// like `exp(-2 n^2 / (t-s))`, so 8 images cover every gap up to ~1.
pub const DEFAULT_IMAGE_COUNT: usize = 8;

impl TruncationPolicy {
    /// Build a policy, asserting that the discarded tail at `min_gap` is
    /// below `tail_tol` (geometric-series bound over mode amplitudes).
    pub fn new(geometry: Geometry, max_modes: usize, min_gap: f64, tail_tol: f64) -> Result<Self> {
        if max_modes == 0 || (geometry == Geometry::DiskRadial && max_modes > MAX_ROOTS) {
            return Err(Error::Domain {
                name: "policy max_modes",
                value: max_modes as f64,
                lo: 1.0,
                hi: if geometry == Geometry::DiskRadial {
                    MAX_ROOTS as f64
                } else {
                    f64::INFINITY
                },
            });
        }
        if !(min_gap > 0.0) || !(tail_tol > 0.0) {
            return Err(Error::Domain {
                name: "policy min_gap/tail_tol",
                value: min_gap.min(tail_tol),
                lo: f64::MIN_POSITIVE,
                hi: f64::INFINITY,
            });
        }
        let bound = spectral_tail_bound(geometry, max_modes, min_gap);
        if bound > tail_tol {
            return Err(Error::TailBound {
                bound,
                tol: tail_tol,
            });
        }
        Ok(TruncationPolicy {
            max_modes,
            min_gap,
            tail_tol,
        })
    }

    /// The default policy (64 modes, `min_gap` 0.01, tail 1e-10); valid for
    /// both geometries.
    pub fn default_for(geometry: Geometry) -> Self {
        TruncationPolicy::new(geometry, 64, 0.01, 1e-10)
            .expect("default truncation policy is certified for both geometries")
    }
}

/// Upper bound on the spectral tail `sum_{n >= max_modes} A_n exp(-lambda_n gap)`
/// where `A_n = sup |e_n(x) e_n(y)| / N_n` is the mode amplitude.
///
/// Modes beyond the tabulated disk range use the asymptotic root locations
/// `sqrt(mu_n) ~ (n - 3/4) pi`; the remainder past 128 explicit terms is
/// bounded by a geometric series with the last observed ratio.
pub fn spectral_tail_bound(geometry: Geometry, max_modes: usize, gap: f64) -> f64 {
    let amp_lambda = |n: usize| -> (f64, f64) {
        match geometry {
            Geometry::Interval => {
                let freq = std::f64::consts::PI * n as f64;
                (2.0, 0.5 * freq * freq)
            }
            Geometry::DiskRadial => {
                let table = disk_mode_table();
                if n < table.len() {
                    (1.0 / table[n].normalizer, table[n].eigenvalue)
                } else {
                    // asymptotics: J0(j_{1,k})^2 ~ 2 / (pi j_{1,k})
                    let freq = (n as f64 - 0.75) * std::f64::consts::PI;
                    (std::f64::consts::PI * freq, 0.5 * freq * freq)
                }
            }
        }
    };
    let mut bound = 0.0;
    let mut last = 0.0;
    for n in max_modes..(max_modes + 128) {
        let (a, l) = amp_lambda(n);
        last = a * (-l * gap).exp();
        bound += last;
        if last < 1e-300 {
            return bound;
        }
    }
    // geometric remainder with the local decay ratio
    let (a0, l0) = amp_lambda(max_modes + 127);
    let (a1, l1) = amp_lambda(max_modes + 128);
    let ratio = (a1 / a0) * (-(l1 - l0) * gap).exp();
    if ratio < 1.0 {
        bound + last * ratio / (1.0 - ratio)
    } else {
        f64::INFINITY
    }
}

// ---------------------------------------------------------------------------
// Clamp diagnostics.
// ---------------------------------------------------------------------------

/// Records how often and how far truncated kernel values dipped below zero
/// before being clamped. Concurrent-safe; reset between verification runs.
pub mod diagnostics {
    use std::sync::atomic::{AtomicU64, Ordering};

    static CLAMP_COUNT: AtomicU64 = AtomicU64::new(0);
    static CLAMP_MAX_BITS: AtomicU64 = AtomicU64::new(0);

    pub(crate) fn record_clamp(magnitude: f64) {
        CLAMP_COUNT.fetch_add(1, Ordering::Relaxed);
        let bits = magnitude.to_bits();
        // nonnegative f64 bit patterns order like the values themselves
        CLAMP_MAX_BITS.fetch_max(bits, Ordering::Relaxed);
    }

    pub fn clamp_count() -> u64 {
        CLAMP_COUNT.load(Ordering::Relaxed)
    }

    pub fn clamp_max_magnitude() -> f64 {
        f64::from_bits(CLAMP_MAX_BITS.load(Ordering::Relaxed))
    }

    pub fn reset() {
        CLAMP_COUNT.store(0, Ordering::Relaxed);
        CLAMP_MAX_BITS.store(0, Ordering::Relaxed);
    }
}

// ---------------------------------------------------------------------------
// Green functions.
// ---------------------------------------------------------------------------

fn check_state(name: &'static str, x: f64) -> Result<()> {
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

/// Spectral Green function; requires `t - s >= policy.min_gap`.
///
/// Negative truncation residue is clamped to 0 and recorded in
/// [`diagnostics`].
pub fn green_spectral(
    x: f64,
    t: f64,
    y: f64,
    s: f64,
    geometry: Geometry,
    policy: &TruncationPolicy,
) -> Result<f64> {
    check_state("green state x", x)?;
    check_state("green state y", y)?;
    if !(t > s) {
        return Err(Error::Ordering { s, t });
    }
    let gap = t - s;
    if gap < policy.min_gap {
        return Err(Error::PolicyGap {
            gap,
            min_gap: policy.min_gap,
        });
    }
    Ok(green_spectral_unchecked(x, y, gap, geometry, policy.max_modes))
}

/// Series evaluation without domain/policy checks, for callers that have
/// verified them (the dispatcher and the model layer's cached loops).
pub(crate) fn green_spectral_unchecked(
    x: f64,
    y: f64,
    gap: f64,
    geometry: Geometry,
    max_modes: usize,
) -> f64 {
    let mut sum = 0.0;
    match geometry {
        Geometry::Interval => {
            sum = 1.0;
            for n in 1..max_modes {
                let freq = std::f64::consts::PI * n as f64;
                let w = (-0.5 * freq * freq * gap).exp();
                if 2.0 * w < 1e-18 {
                    break; // remaining tail is geometrically smaller still
                }
                sum += 2.0 * (freq * x).cos() * (freq * y).cos() * w;
            }
        }
        Geometry::DiskRadial => {
            let table = disk_mode_table();
            for mode in table.iter().take(max_modes) {
                let a = 1.0 / mode.normalizer;
                let w = (-mode.eigenvalue * gap).exp();
                if a * w < 1e-18 && mode.index > 0 {
                    break;
                }
                sum += a * mode.basis(Geometry::DiskRadial, x) * mode.basis(Geometry::DiskRadial, y) * w;
            }
        }
    }
    if sum < 0.0 {
        diagnostics::record_clamp(-sum);
        return 0.0;
    }
    sum
}

/// Method-of-images Green function on the interval:
///
/// ```text
/// g = (2 pi (t-s))^(-1/2) sum_{|n| <= K} exp(-(x-y-2n)^2 / 2(t-s))
///                                      + exp(-(x+y+2n)^2 / 2(t-s))
/// ```
///
/// Designed for small gaps where the spectral form converges slowly.
pub fn green_images(
    x: f64,
    t: f64,
    y: f64,
    s: f64,
    geometry: Geometry,
    image_count: usize,
) -> Result<f64> {
    if geometry != Geometry::Interval {
        return Err(Error::UnsupportedGeometry { op: "green_images" });
    }
    check_state("green state x", x)?;
    check_state("green state y", y)?;
    if !(t > s) {
        return Err(Error::Ordering { s, t });
    }
    Ok(green_images_unchecked(x, y, t - s, image_count))
}

pub(crate) fn green_images_unchecked(x: f64, y: f64, gap: f64, image_count: usize) -> f64 {
    let inv = 0.5 / gap;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * gap).sqrt();
    let mut sum = 0.0;
    for n in -(image_count as i64)..=(image_count as i64) {
        let shift = 2.0 * n as f64;
        let d1 = x - y - shift;
        let d2 = x + y + shift;
        sum += (-d1 * d1 * inv).exp() + (-d2 * d2 * inv).exp();
    }
    norm * sum
}

/// Green function dispatcher: spectral form for `t - s >= min_gap`, image
/// form below it (interval only; the disk has no image form and reports a
/// policy error there).
pub fn green(
    x: f64,
    t: f64,
    y: f64,
    s: f64,
    geometry: Geometry,
    policy: &TruncationPolicy,
) -> Result<f64> {
    if !(t > s) {
        return Err(Error::Ordering { s, t });
    }
    if t - s >= policy.min_gap {
        green_spectral(x, t, y, s, geometry, policy)
    } else {
        green_images(x, t, y, s, geometry, DEFAULT_IMAGE_COUNT)
    }
}

// ---------------------------------------------------------------------------
// Spectral expansions.
// ---------------------------------------------------------------------------

/// Node counts making the projection quadrature resolve every supported mode
/// (the disk basis oscillates at frequency ~199 near the top of the range).
const PROJECTION_NODES_INTERVAL: usize = 4097;
const PROJECTION_NODES_DISK: usize = 8193;

/// A truncated Neumann expansion of a boundary datum: `phi` (forward) or
/// `psi` (backward).
///
/// Evaluation at `(x, t)` attaches `exp(-lambda_n t)` (forward) or
/// `exp(-lambda_n (T - t))` (backward) to each retained coefficient, which is
/// exactly the solution of the V = 0 heat problem with the represented datum.
#[derive(Debug, Clone)]
pub struct SpectralExpansion {
    geometry: Geometry,
    modes: Vec<EigenMode>,
    coefficients: Vec<f64>,
    direction: Direction,
}

impl SpectralExpansion {
    /// Build an expansion from explicit coefficients and validate strict
    /// positivity of the represented space-time function on a
    /// `[0, 1] x [0, horizon]` grid.
    pub fn new(
        geometry: Geometry,
        coefficients: Vec<f64>,
        direction: Direction,
        horizon: f64,
    ) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Domain {
                name: "coefficient count",
                value: 0.0,
                lo: 1.0,
                hi: f64::INFINITY,
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDatum { x: f64::NAN });
        }
        let modes = eigenmodes(geometry, coefficients.len())?;
        let expansion = SpectralExpansion {
            geometry,
            modes,
            coefficients,
            direction,
        };
        expansion.validate_positive(horizon)?;
        Ok(expansion)
    }

    fn validate_positive(&self, horizon: f64) -> Result<()> {
        let horizon = if horizon > 0.0 { horizon } else { 1.0 };
        for i in 0..=40 {
            let x = i as f64 / 40.0;
            for j in 0..=16 {
                let t = horizon * j as f64 / 16.0;
                let v = self.evaluate_unchecked(x, t, horizon);
                if !(v > 0.0) {
                    return Err(Error::NonPositive {
                        what: "spectral expansion",
                        min: v,
                        x,
                        t,
                        guard: 0.0,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn modes(&self) -> &[EigenMode] {
        &self.modes
    }

    /// Value at `(x, t)` for a problem on `[0, horizon]`.
    pub fn evaluate(&self, x: f64, t: f64, horizon: f64) -> Result<f64> {
        check_state("expansion state", x)?;
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::Domain {
                name: "expansion time",
                value: t,
                lo: 0.0,
                hi: horizon,
            });
        }
        Ok(self.evaluate_unchecked(x, t, horizon))
    }

    #[inline]
    pub(crate) fn evaluate_unchecked(&self, x: f64, t: f64, horizon: f64) -> f64 {
        let tau = match self.direction {
            Direction::Forward => t,
            Direction::Backward => horizon - t,
        };
        let mut sum = 0.0;
        for (mode, &c) in self.modes.iter().zip(&self.coefficients) {
            if c == 0.0 {
                continue;
            }
            sum += c * mode.basis(self.geometry, x) * (-mode.eigenvalue * tau).exp();
        }
        sum
    }

    /// Spatial derivative at `(x, t)`, differentiated term by term; the basis
    /// derivatives vanish at both ends (and at the disk center), so log
    /// derivatives of positive expansions stay bounded on the closed domain.
    pub fn evaluate_dx(&self, x: f64, t: f64, horizon: f64) -> Result<f64> {
        check_state("expansion state", x)?;
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::Domain {
                name: "expansion time",
                value: t,
                lo: 0.0,
                hi: horizon,
            });
        }
        Ok(self.evaluate_dx_unchecked(x, t, horizon))
    }

    #[inline]
    pub(crate) fn evaluate_dx_unchecked(&self, x: f64, t: f64, horizon: f64) -> f64 {
        let tau = match self.direction {
            Direction::Forward => t,
            Direction::Backward => horizon - t,
        };
        let mut sum = 0.0;
        for (mode, &c) in self.modes.iter().zip(&self.coefficients) {
            if c == 0.0 || mode.index == 0 {
                continue;
            }
            sum += c * mode.basis_dx(self.geometry, x) * (-mode.eigenvalue * tau).exp();
        }
        sum
    }
}

/// Project a pointwise datum onto the first `modes` eigenmodes by composite
/// quadrature against the spectral weight:
///
/// * Interval: `a_0 = Int phi`, `a_n = 2 Int phi cos(pi n x) dx`.
/// * DiskRadial: `a_n = 2 J0(sqrt(mu_n))^-2 Int r phi(r) J0(sqrt(mu_n) r) dr`.
pub fn project_datum(
    datum: impl Fn(f64) -> f64,
    geometry: Geometry,
    modes: usize,
    direction: Direction,
    horizon: f64,
) -> Result<SpectralExpansion> {
    let mode_list = eigenmodes(geometry, modes)?;
    let nodes = match geometry {
        Geometry::Interval => PROJECTION_NODES_INTERVAL,
        Geometry::DiskRadial => PROJECTION_NODES_DISK,
    };
    let xs = quadrature::grid(0.0, 1.0, nodes);
    let mut samples = Vec::with_capacity(nodes);
    for &x in &xs {
        let v = datum(x);
        if !v.is_finite() {
            return Err(Error::InvalidDatum { x });
        }
        samples.push(v * geometry.spectral_weight(x));
    }
    let h = 1.0 / (nodes - 1) as f64;
    let mut coefficients = Vec::with_capacity(modes);
    let mut basis_row = vec![0.0; nodes];
    for mode in &mode_list {
        for (b, &x) in basis_row.iter_mut().zip(&xs) {
            *b = mode.basis(geometry, x);
        }
        let weighted: Vec<f64> = samples.iter().zip(&basis_row).map(|(s, b)| s * b).collect();
        let integral = quadrature::simpson_samples(&weighted, h);
        coefficients.push(integral / mode.normalizer);
    }
    SpectralExpansion::new(geometry, coefficients, direction, horizon)
}
