//! Closed curves `u : S¹ → S²` sampled at `θ_k = 2πk/N`.
//!
//! Calculus is spectral: derivatives, shifts and interpolation act on the
//! discrete Fourier series of each ambient coordinate.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::spectral;
use crate::sphere::{Rotation3, UnitVec3};

pub const MIN_POINTS: usize = 32;
pub const DEFAULT_POINTS: usize = 256;
/// Minimum admissible speed `|u'|` for a regular curve.
pub const REGULARITY_TOL: f64 = 1e-8;
pub const EMBED_TOL: f64 = 1e-4;

/// A sampled closed curve on the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    samples: Vec<Vector3<f64>>,
}

impl Loop {
    /// Wraps unit-norm samples; `N` must be even and at least 32.
    pub fn new(samples: Vec<Vector3<f64>>) -> Result<Self> {
        check_grid(samples.len())?;
        for (k, s) in samples.iter().enumerate() {
            if !s.norm().is_finite() || (s.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("sample {k} has norm {} (expected 1)", s.norm())));
            }
        }
        Ok(Self { samples })
    }

    /// Radially projects arbitrary nonzero vectors onto the sphere.
    pub fn from_points(points: Vec<Vector3<f64>>) -> Result<Self> {
        check_grid(points.len())?;
        let samples =
            points.into_iter().map(|p| UnitVec3::new(p).map(UnitVec3::into_inner)).collect::<Result<Vec<_>>>()?;
        Ok(Self { samples })
    }

    /// Samples `f(θ_k)`, projected onto the sphere.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> Vector3<f64>) -> Result<Self> {
        Self::from_points(spectral::nodes(n).into_iter().map(f).collect())
    }

    /// Circle of colatitude `rho` about `R e3`, traversed counterclockwise
    /// about its center: `θ ↦ R (sin ρ cos θ, sin ρ sin θ, cos ρ)`.
    pub fn latitude_circle(r: &Rotation3, rho: f64, n: usize) -> Result<Self> {
        let (s, c) = rho.sin_cos();
        Self::from_fn(n, |t| r.apply_vec(&Vector3::new(s * t.cos(), s * t.sin(), c)))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Vector3<f64>] {
        &self.samples
    }

    pub fn theta(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.len() as f64
    }

    fn components(&self) -> [Vec<f64>; 3] {
        std::array::from_fn(|i| self.samples.iter().map(|s| s[i]).collect())
    }

    /// Spectral derivative `u'` (order 1) or `u''` (order 2).
    pub fn derivative(&self, order: u32) -> Vec<Vector3<f64>> {
        vector_derivative(&self.samples, order)
    }

    /// `|u'(θ_k)|` at every node.
    pub fn speeds(&self) -> Vec<f64> {
        self.derivative(1).iter().map(|d| d.norm()).collect()
    }

    /// Fails with the slowest node when `min |u'| ≤ 1e-8`.
    pub fn check_regular(&self) -> Result<()> {
        let (node, min_speed) =
            self.speeds().into_iter().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).expect("loop has samples");
        if min_speed <= REGULARITY_TOL {
            return Err(Error::IrregularCurve { min_speed, node });
        }
        Ok(())
    }

    /// Fails when all samples coincide to within `1e-10`.
    pub fn check_nonconstant(&self) -> Result<()> {
        let first = self.samples[0];
        let spread = self.samples.iter().map(|s| (s - first).norm()).fold(0.0, f64::max);
        // pairwise diameter is at most twice the spread from the first sample
        if spread * 2.0 < 1e-10 {
            return Err(Error::DegenerateCurve(format!("all samples coincide (spread {spread:e})")));
        }
        Ok(())
    }

    /// `L(u) = (⨍ |u'|²)^{1/2}`.
    pub fn length_functional(&self) -> Result<f64> {
        self.check_nonconstant()?;
        let d = self.derivative(1);
        Ok(mean_by(&d, |v| v.norm_squared()).sqrt())
    }

    /// Signed geodesic curvature `(u''·u∧u') / |u'|³` at every node.
    pub fn geodesic_curvature(&self) -> Result<Vec<f64>> {
        self.check_regular()?;
        let d1 = self.derivative(1);
        let d2 = self.derivative(2);
        Ok(self
            .samples
            .iter()
            .zip(d1.iter().zip(&d2))
            .map(|(u, (a, b))| b.dot(&u.cross(a)) / a.norm().powi(3))
            .collect())
    }

    /// Sum of chord lengths; approaches the curve length from below.
    pub fn polygonal_length(&self) -> f64 {
        let n = self.len();
        (0..n).map(|k| (self.samples[(k + 1) % n] - self.samples[k]).norm()).sum()
    }

    /// The same curve run backwards: `θ ↦ u(-θ)`.
    pub fn reversed(&self) -> Self {
        let n = self.len();
        Self { samples: (0..n).map(|k| self.samples[(n - k) % n]).collect() }
    }

    /// `R u`.
    pub fn rotated(&self, r: &Rotation3) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|s| {
                    let v = r.apply_vec(s);
                    v / v.norm()
                })
                .collect(),
        }
    }

    /// `θ ↦ u(θ + phase)` by spectral interpolation, renormalized.
    pub fn shifted(&self, phase: f64) -> Self {
        let c = self.components();
        let shifted: [Vec<f64>; 3] = std::array::from_fn(|i| spectral::shift(&c[i], phase));
        Self {
            samples: (0..self.len())
                .map(|k| {
                    let v = Vector3::new(shifted[0][k], shifted[1][k], shifted[2][k]);
                    v / v.norm()
                })
                .collect(),
        }
    }

    /// Sampled injectivity check: every pair of nodes more than `N/16`
    /// indices apart (circularly) is farther than `tol` apart in ℝ³.
    pub fn is_embedded_with(&self, tol: f64) -> bool {
        let n = self.len();
        let window = n / 16;
        for k in 0..n {
            for j in (k + 1)..n {
                let gap = (j - k).min(n - (j - k));
                if gap <= window {
                    continue;
                }
                if (self.samples[k] - self.samples[j]).norm() <= tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_embedded(&self) -> bool {
        self.is_embedded_with(EMBED_TOL)
    }

    /// Writes `theta,x,y,z` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,x,y,z\n");
        for (k, s) in self.samples.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", self.theta(k), s.x, s.y, s.z)
                .expect("writing to a String cannot fail");
        }
        out
    }

    /// Parses the format written by [`Loop::to_csv`]. Samples must be unit
    /// vectors to within `1e-9`; those off by more than a few ulps are
    /// renormalized, so files written by this crate round-trip exactly.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::InvalidArgument("empty loop file".into()))?;
        if header.trim() != "theta,x,y,z" {
            return Err(Error::InvalidArgument(format!("unexpected loop header {header:?}")));
        }
        let mut samples = Vec::new();
        for (row, line) in lines.enumerate() {
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidArgument(format!("row {}: {e}", row + 1)))?;
            if fields.len() != 4 || fields.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("row {} must hold four finite numbers", row + 1)));
            }
            let v = Vector3::new(fields[1], fields[2], fields[3]);
            if (v.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("row {} is not on the unit sphere", row + 1)));
            }
            samples.push(if (v.norm() - 1.0).abs() <= 4.0 * f64::EPSILON { v } else { v / v.norm() });
        }
        check_grid(samples.len())?;
        Ok(Self { samples })
    }
}

fn check_grid(n: usize) -> Result<()> {
    if n < MIN_POINTS || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("loop needs an even number of samples >= {MIN_POINTS}, got {n}")));
    }
    Ok(())
}

/// Componentwise spectral derivative of a periodic vector sequence.
pub fn vector_derivative(values: &[Vector3<f64>], order: u32) -> Vec<Vector3<f64>> {
    let d: [Vec<f64>; 3] = std::array::from_fn(|i| {
        let c: Vec<f64> = values.iter().map(|v| v[i]).collect();
        spectral::derivative(&c, order)
    });
    (0..values.len()).map(|k| Vector3::new(d[0][k], d[1][k], d[2][k])).collect()
}

/// Trapezoid mean of `f` over the nodes.
pub fn mean_by<T>(values: &[T], f: impl Fn(&T) -> f64) -> f64 {
    values.iter().map(f).sum::<f64>() / values.len() as f64
}

/// `⨍ a·b` for two sampled vector fields.
pub fn l2_inner(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum::<f64>() / a.len() as f64
}

pub fn sup_norm(a: &[Vector3<f64>]) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// A vector field along a loop, tangent to the sphere at every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentLoopField {
    base: Loop,
    values: Vec<Vector3<f64>>,
}

impl TangentLoopField {
    /// Checks `values[k] · u(θ_k) = 0` to within `1e-10 · max(1, |values[k]|)`.
    pub fn new(base: Loop, values: Vec<Vector3<f64>>) -> Result<Self> {
        if values.len() != base.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for {} samples",
                values.len(),
                base.len()
            )));
        }
        for (k, (v, u)) in values.iter().zip(base.samples()).enumerate() {
            if v.dot(u).abs() > 1e-10 * v.norm().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "value {k} is not tangent (normal component {:e})",
                    v.dot(u)
                )));
            }
        }
        Ok(Self { base, values })
    }

    /// Projects each value onto the tangent plane of its sample.
    pub fn project(base: Loop, values: Vec<Vector3<f64>>) -> Self {
        let values = values.into_iter().zip(base.samples()).map(|(v, u)| v - u * u.dot(&v)).collect();
        Self { base, values }
    }

    pub fn zeros(base: Loop) -> Self {
        let values = vec![Vector3::zeros(); base.len()];
        Self { base, values }
    }

    pub fn base(&self) -> &Loop {
        &self.base
    }

    pub fn values(&self) -> &[Vector3<f64>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Vector3<f64>> {
        self.values
    }
}

/// Coefficients `(g1, g2)` in the orthonormal frame `(u'/|u'|, u∧u'/|u'|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCoeffs {
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
}

impl FrameCoeffs {
    pub fn new(g1: Vec<f64>, g2: Vec<f64>) -> Result<Self> {
        if g1.len() != g2.len() {
            return Err(Error::InvalidArgument(format!(
                "frame coefficient lengths differ ({} vs {})",
                g1.len(),
                g2.len()
            )));
        }
        Ok(Self { g1, g2 })
    }

    pub fn len(&self) -> usize {
        self.g1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g1.is_empty()
    }

    /// `⨍ (g1 h1 + g2 h2)`.
    pub fn l2_inner(&self, other: &FrameCoeffs) -> f64 {
        let s: f64 = (0..self.len()).map(|k| self.g1[k] * other.g1[k] + self.g2[k] * other.g2[k]).sum();
        s / self.len() as f64
    }
}

fn unit_frame(u: &Loop) -> Result<Vec<(Vector3<f64>, Vector3<f64>)>> {
    u.check_regular()?;
    Ok(u.samples()
        .iter()
        .zip(u.derivative(1))
        .map(|(p, d)| {
            let d = d - p * p.dot(&d);
            let t = d / d.norm();
            (t, p.cross(&t))
        })
        .collect())
}

/// Coordinates of a tangent field in the moving frame of a regular loop.
/// On a unit-speed great circle this is the map `Ψ`.
pub fn frame_decompose(u: &Loop, phi: &TangentLoopField) -> Result<FrameCoeffs> {
    let frame = unit_frame(u)?;
    let (g1, g2) = frame.iter().zip(phi.values()).map(|((t, n), v)| (v.dot(t), v.dot(n))).unzip();
    Ok(FrameCoeffs { g1, g2 })
}

/// Inverse of [`frame_decompose`].
pub fn frame_compose(u: &Loop, g: &FrameCoeffs) -> Result<TangentLoopField> {
    if g.len() != u.len() {
        return Err(Error::InvalidArgument("frame coefficients do not match loop".into()));
    }
    let frame = unit_frame(u)?;
    let values = frame.iter().enumerate().map(|(k, (t, n))| t * g.g1[k] + n * g.g2[k]).collect();
    Ok(TangentLoopField { base: u.clone(), values })
}

/// Great circle `ω_R(θ) = R (cos θ, sin θ, 0)`.
pub fn great_circle(r: &Rotation3, n: usize) -> Result<Loop> {
    check_grid(n)?;
    Ok(Loop {
        samples: spectral::nodes(n).into_iter().map(|t| r.apply_vec(&Vector3::new(t.cos(), t.sin(), 0.0))).collect(),
    })
}

/// Smallest sup distance `max_k |u(θ_k + φ) - v(θ_k)|` over phases `φ`,
/// and the minimizing phase. Orientation is not quotiented out.
pub fn phase_align_distance(u: &Loop, v: &Loop) -> Result<(f64, f64)> {
    let n = u.len();
    if v.len() != n {
        return Err(Error::InvalidArgument(format!("loops have different sizes ({n} vs {})", v.len())));
    }
    let coeffs: [Vec<num_complex::Complex64>; 3] = {
        let c = u.components();
        std::array::from_fn(|i| spectral::forward(&c[i]))
    };
    let distance_at = |phase: f64| -> f64 {
        let shifted: [Vec<f64>; 3] = std::array::from_fn(|i| {
            let mut c = coeffs[i].clone();
            for (j, cj) in c.iter_mut().enumerate() {
                let k = spectral::wavenumber(j, n);
                let a = k as f64 * phase;
                *cj *= if j == n / 2 {
                    num_complex::Complex64::new(a.cos(), 0.0)
                } else {
                    num_complex::Complex64::from_polar(1.0, a)
                };
            }
            spectral::inverse(c)
        });
        (0..n)
            .map(|k| (Vector3::new(shifted[0][k], shifted[1][k], shifted[2][k]) - v.samples[k]).norm())
            .fold(0.0, f64::max)
    };

    let trials = 4 * n;
    let step = 2.0 * PI / trials as f64;
    let (best, best_d) = (0..trials)
        .map(|m| (m, distance_at(m as f64 * step)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one trial phase");

    // golden-section refinement on the bracketing cell
    let (mut a, mut b) = ((best as f64 - 1.0) * step, (best as f64 + 1.0) * step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (distance_at(c), distance_at(d));
    for _ in 0..80 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = distance_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = distance_at(d);
        }
    }
    let (mut phase, mut dist) = if fc < fd { (c, fc) } else { (d, fd) };
    if best_d <= dist {
        phase = best as f64 * step;
        dist = best_d;
    }
    Ok((dist, phase.rem_euclid(2.0 * PI)))
}

/// Spectral proxy for the C² distance: the largest nodal difference of the
/// values, first and second derivatives.
pub fn c2_distance(u: &Loop, v: &Loop) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidArgument("loops have different sizes".into()));
    }
    let diff =
        |a: &[Vector3<f64>], b: &[Vector3<f64>]| a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    Ok(diff(u.samples(), v.samples())
        .max(diff(&u.derivative(1), &v.derivative(1)))
        .max(diff(&u.derivative(2), &v.derivative(2))))
}
