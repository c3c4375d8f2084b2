//! Points, tangent vectors and rotations of the unit sphere.
//!
//! Rotations are explicit 3×3 matrices so that the infinitesimal generators
//! `T_h` (with `T_h v = e_h ∧ v`) act on them directly.

use std::ops::Deref;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance on `|v| = 1` and on `RᵗR = Id`.
pub const UNIT_TOL: f64 = 1e-12;

/// Closest admissible distance between `z` and `-e3` for [`north_transport`].
pub const POLE_CUTOFF: f64 = 1e-6;

/// A point of S², stored as a unit vector of ℝ³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec3(Vector3<f64>);

impl UnitVec3 {
    /// Normalizes `v`; fails on vectors too short to carry a direction.
    pub fn new(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n <= 1e-300 {
            return Err(Error::InvalidArgument(format!("cannot normalize vector of norm {n:e}")));
        }
        Ok(Self(v / n))
    }

    pub fn from_xyz(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(Vector3::new(x, y, z))
    }

    /// Wraps a vector already known to be of unit length. The caller is
    /// responsible for the invariant; it is checked in debug builds.
    pub(crate) fn from_unit(v: Vector3<f64>) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-9, "not a unit vector: {v:?}");
        Self(v)
    }

    pub fn e1() -> Self {
        Self(Vector3::x())
    }

    pub fn e2() -> Self {
        Self(Vector3::y())
    }

    pub fn e3() -> Self {
        Self(Vector3::z())
    }

    /// Canonical basis vector `e_h`, `h ∈ {1, 2, 3}`.
    pub fn basis(h: usize) -> Result<Self> {
        match h {
            1 => Ok(Self::e1()),
            2 => Ok(Self::e2()),
            3 => Ok(Self::e3()),
            _ => Err(Error::InvalidArgument(format!("axis index {h} not in 1..=3"))),
        }
    }

    pub fn into_inner(self) -> Vector3<f64> {
        self.0
    }

    pub fn antipode(self) -> Self {
        Self(-self.0)
    }

    /// Great-circle distance in radians.
    pub fn distance(&self, other: &UnitVec3) -> f64 {
        geodesic_distance(&self.0, &other.0)
    }

    /// Exponential map: follows the great circle from `self` with initial
    /// velocity `t` (the normal component of `t` is discarded).
    pub fn exp(&self, t: &Vector3<f64>) -> UnitVec3 {
        let t = t - self.0 * self.0.dot(t);
        let a = t.norm();
        if a < 1e-300 {
            return *self;
        }
        let v = self.0 * a.cos() + t * (a.sin() / a);
        UnitVec3(v / v.norm())
    }
}

impl Deref for UnitVec3 {
    type Target = Vector3<f64>;

    fn deref(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Angle between two vectors, accurate for nearly parallel arguments.
pub fn geodesic_distance(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// A vector tangent to S² at `base`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVec {
    pub base: UnitVec3,
    pub dir: Vector3<f64>,
}

impl TangentVec {
    /// Checks `base · dir = 0` to within `1e-12 · max(1, |dir|)`.
    pub fn new(base: UnitVec3, dir: Vector3<f64>) -> Result<Self> {
        let dot = base.dot(&dir);
        if dot.abs() > UNIT_TOL * dir.norm().max(1.0) {
            return Err(Error::InvalidArgument(format!("vector is not tangent at base (base·dir = {dot:e})")));
        }
        Ok(Self { base, dir })
    }

    /// Orthogonal projection of an ambient vector onto `T_base S²`.
    pub fn project(base: UnitVec3, v: Vector3<f64>) -> Self {
        let dir = v - *base * base.dot(&v);
        Self { base, dir }
    }

    pub fn zero(base: UnitVec3) -> Self {
        Self { base, dir: Vector3::zeros() }
    }

    pub fn norm(&self) -> f64 {
        self.dir.norm()
    }
}

/// An element of SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Accepts a matrix that is a rotation up to `1e-9`; drift above
    /// `1e-12` is removed by polar projection.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let drift = orthogonality_defect(&m);
        if drift.is_nan() || drift > 1e-9 {
            return Err(Error::InvalidArgument(format!("matrix is not orthogonal (defect {drift:e})")));
        }
        if m.determinant() < 0.0 {
            return Err(Error::InvalidArgument("matrix has negative determinant".into()));
        }
        if drift > UNIT_TOL {
            Ok(Self::polar_projection(&m))
        } else {
            Ok(Self(m))
        }
    }

    fn polar_projection(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        Self(u * v_t)
    }

    /// Rotation by `angle` about the unit axis `axis` (right-hand rule).
    pub fn from_axis_angle(axis: &UnitVec3, angle: f64) -> Self {
        let k = skew(axis);
        let (s, c) = angle.sin_cos();
        Self(Matrix3::identity() + k * s + k * k * (1.0 - c))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &Rotation3) -> Self {
        Self(self.0 * other.0)
    }

    pub fn apply(&self, v: &UnitVec3) -> UnitVec3 {
        UnitVec3::from_unit(self.0 * v.0)
    }

    pub fn apply_vec(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Column `R e_h` for `h ∈ {1, 2, 3}`.
    pub fn column(&self, h: usize) -> UnitVec3 {
        UnitVec3::from_unit(self.0.column(h - 1).into_owned())
    }

    /// Image of `e3`; the center of the great circle `ω_R`.
    pub fn center(&self) -> UnitVec3 {
        self.column(3)
    }

    /// The tangent direction `R T_h` at `R`.
    pub fn tangent_generator(&self, h: usize) -> Matrix3<f64> {
        self.0 * rotation_generators()[h - 1]
    }
}

fn orthogonality_defect(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).abs().max()
}

/// The matrix of `v ↦ a ∧ v`.
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Inverse of [`skew`] on the skew-symmetric part of `m`.
pub fn unskew(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

/// The generators `T_1, T_2, T_3` of the Lie algebra of SO(3), with
/// `T_h v = e_h ∧ v`.
pub fn rotation_generators() -> [Matrix3<f64>; 3] {
    [
        Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0),
        Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0),
        Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    ]
}

/// The rotation `R_h^ξ` about the `e_h` axis by the angle of `ξ ∈ S¹`,
/// right-handed for every axis so that its derivative at `ξ = 1` is `T_h`.
pub fn axis_rotation(h: usize, xi: Complex64) -> Result<Rotation3> {
    if (xi.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("xi must lie on the unit circle, |xi| = {}", xi.norm())));
    }
    let (c, s) = (xi.re, xi.im);
    let m = match h {
        1 => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        2 => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        3 => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        _ => return Err(Error::InvalidArgument(format!("axis index {h} not in 1..=3"))),
    };
    Ok(Rotation3(m))
}

/// Differential of `R ↦ Rq` along `R T_h`: the vector `R e_h ∧ R q`, based at `Rq`.
pub fn orbit_differential(r: &Rotation3, q: &UnitVec3, h: usize) -> TangentVec {
    let base = r.apply(q);
    let dir = r.column(h).cross(&base);
    TangentVec { base, dir }
}

/// The rotation `N(z)` that maps `e3` to `z`, defined away from `-e3`.
pub fn north_transport(z: &UnitVec3) -> Result<Rotation3> {
    let gap = (z.into_inner() + Vector3::z()).norm();
    if gap <= POLE_CUTOFF {
        return Err(Error::PoleSingularity(format!(
            "N(z) is undefined within {POLE_CUTOFF:e} of -e3 (|z + e3| = {gap:e})"
        )));
    }
    let (z1, z2, z3) = (z.x, z.y, z.z);
    let d = 1.0 + z3;
    Ok(Rotation3(Matrix3::new(1.0 - z1 * z1 / d, -z1 * z2 / d, z1, -z1 * z2 / d, 1.0 - z2 * z2 / d, z2, -z1, -z2, z3)))
}

/// Some rotation mapping `e3` to `z`, defined on the whole sphere.
///
/// Equals `N(z)` on the closed northern hemisphere; below it, `N(-z)`
/// composed with the half turn about `e1`.
pub fn frame_to(z: &UnitVec3) -> Rotation3 {
    if z.z >= 0.0 {
        north_transport(z).expect("northern hemisphere is away from -e3")
    } else {
        let flip = Rotation3(Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0));
        north_transport(&z.antipode()).expect("antipode lies in the northern hemisphere").compose(&flip)
    }
}

/// Stereographic chart of `S² \ {p}` onto the plane orthogonal to `p`.
///
/// The plane carries the orthonormal basis `(F e1, F e2)` with
/// `F = frame_to(-p)`, so the chart is orientation preserving and maps `-p`
/// to the origin. For `p = -e3` this is `q ↦ (q1, q2) / (1 + q3)`.
#[derive(Debug, Clone, Copy)]
pub struct StereoChart {
    pole: UnitVec3,
    frame: Rotation3,
}

impl StereoChart {
    pub fn new(pole: UnitVec3) -> Self {
        Self { pole, frame: frame_to(&pole.antipode()) }
    }

    pub fn pole(&self) -> UnitVec3 {
        self.pole
    }

    /// Coordinates of `q` relative to the chart frame.
    fn local(&self, q: &Vector3<f64>) -> Vector3<f64> {
        self.frame.matrix().tr_mul(q)
    }

    pub fn project(&self, q: &UnitVec3) -> Result<[f64; 2]> {
        let gap = (q.into_inner() - self.pole.into_inner()).norm();
        if gap <= 1e-9 {
            return Err(Error::PoleSingularity(format!("point is at the projection pole (|q - p| = {gap:e})")));
        }
        let l = self.local(q);
        let d = 1.0 + l.z;
        Ok([l.x / d, l.y / d])
    }

    /// Image of a tangent vector `v` at `q` under the chart differential.
    pub fn push_forward(&self, q: &Vector3<f64>, v: &Vector3<f64>) -> [f64; 2] {
        let l = self.local(q);
        let lv = self.local(v);
        let d = 1.0 + l.z;
        let d2 = d * d;
        [lv.x / d - l.x * lv.z / d2, lv.y / d - l.y * lv.z / d2]
    }

    pub fn inverse(&self, w: [f64; 2]) -> UnitVec3 {
        let r2 = w[0] * w[0] + w[1] * w[1];
        let s = 1.0 / (1.0 + r2);
        let l = Vector3::new(2.0 * w[0] * s, 2.0 * w[1] * s, (1.0 - r2) * s);
        let v = self.frame.apply_vec(&l);
        UnitVec3(v / v.norm())
    }
}

/// Stereographic projection of `q` from the pole `p`.
pub fn stereographic(p: &UnitVec3, q: &UnitVec3) -> Result<[f64; 2]> {
    StereoChart::new(*p).project(q)
}

pub fn inverse_stereographic(p: &UnitVec3, w: [f64; 2]) -> UnitVec3 {
    StereoChart::new(*p).inverse(w)
}

/// Area density `(2 / (1 + |w|²))²` of the inverse stereographic map.
pub fn conformal_factor(w: [f64; 2]) -> f64 {
    let s = 2.0 / (1.0 + w[0] * w[0] + w[1] * w[1]);
    s * s
}

/// Fibonacci lattice of `n` nearly uniform points, deterministic, poles excluded.
pub fn fibonacci_sphere(n: usize) -> Vec<UnitVec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            UnitVec3::from_unit(Vector3::new(r * phi.cos(), r * phi.sin(), z).normalize())
        })
        .collect()
}
