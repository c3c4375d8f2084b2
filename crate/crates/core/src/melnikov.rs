//! The hemisphere integral `F_K(z) = ∫_{p·z > 0} K dσ`, its critical
//! points, and the vanishing-great-circle diagnostic.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{FieldSpec, Monomial};
use crate::quadrature::GaussLegendre;
use crate::sphere::{fibonacci_sphere, frame_to, Rotation3, TangentVec, UnitVec3};

pub const GRADIENT_STEP: f64 = 1e-4;
pub const HESSIAN_STEP: f64 = 1e-3;

/// Product rule on the cap about `e3`: `m` Gauss–Legendre nodes in
/// `μ = cos θ ∈ [0, 1]` times an `n`-point trapezoid in azimuth.
#[derive(Debug, Clone)]
pub struct CapQuadrature {
    m: usize,
    n: usize,
    points: Vec<(Vector3<f64>, f64)>,
}

impl CapQuadrature {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m < 16 || n < 32 {
            return Err(Error::InvalidArgument(format!("cap quadrature needs m >= 16 and n >= 32, got ({m}, {n})")));
        }
        let rule = GaussLegendre::new(m);
        let dphi = 2.0 * PI / n as f64;
        let mut points = Vec::with_capacity(m * n);
        for (mu, w) in rule.on_interval(0.0, 1.0) {
            let s = (1.0 - mu * mu).sqrt();
            for j in 0..n {
                let phi = j as f64 * dphi;
                points.push((Vector3::new(s * phi.cos(), s * phi.sin(), mu), w * dphi));
            }
        }
        Ok(Self { m, n, points })
    }

    /// The default `(24, 64)` rule, enlarged if the field's degree needs it.
    pub fn default_for(k: &FieldSpec) -> Self {
        let d = k.degree() as usize;
        Self::new(24.max(d + 1), 64.max(2 * d + 2)).expect("sizes above the minimum")
    }

    pub fn size(&self) -> (usize, usize) {
        (self.m, self.n)
    }
}

impl Default for CapQuadrature {
    fn default() -> Self {
        Self::new(24, 64).expect("default sizes are valid")
    }
}

/// `F_K(z)` with an `(m, n)` cap rule.
pub fn melnikov_value(z: &UnitVec3, k: &FieldSpec, quad: (usize, usize)) -> Result<f64> {
    let rule = CapQuadrature::new(quad.0, quad.1)?;
    Ok(melnikov_value_with(z, k, &rule))
}

pub fn melnikov_value_with(z: &UnitVec3, k: &FieldSpec, quad: &CapQuadrature) -> f64 {
    let r = frame_to(z);
    quad.points.iter().map(|(q, w)| w * k.eval_ambient(&r.apply_vec(q))).sum()
}

/// `F_K` at many points, in input order.
pub fn melnikov_values(points: &[UnitVec3], k: &FieldSpec, quad: &CapQuadrature) -> Vec<f64> {
    points.par_iter().map(|z| melnikov_value_with(z, k, quad)).collect()
}

/// Orthonormal tangent basis at `z`: the first two columns of `frame_to(z)`.
fn chart_basis(z: &UnitVec3) -> (Vector3<f64>, Vector3<f64>) {
    let r = frame_to(z);
    (r.column(1).into_inner(), r.column(2).into_inner())
}

/// Central-difference gradient along the chart directions, geodesic step
/// `1e-4`.
pub fn melnikov_gradient(z: &UnitVec3, k: &FieldSpec) -> TangentVec {
    melnikov_gradient_with(z, k, &CapQuadrature::default_for(k))
}

pub fn melnikov_gradient_with(z: &UnitVec3, k: &FieldSpec, quad: &CapQuadrature) -> TangentVec {
    let (t1, t2) = chart_basis(z);
    let h = GRADIENT_STEP;
    let partial = |t: &Vector3<f64>| {
        let plus = melnikov_value_with(&z.exp(&(t * h)), k, quad);
        let minus = melnikov_value_with(&z.exp(&(t * -h)), k, quad);
        (plus - minus) / (2.0 * h)
    };
    TangentVec::project(*z, t1 * partial(&t1) + t2 * partial(&t2))
}

/// Exact gradient: moving `z` sweeps the bounding great circle, so
/// `∇F_K(z) = ∮_{p·z=0} K(p) p dℓ`. The trapezoid rule on the circle is
/// exact for polynomial fields once `n` exceeds twice the degree.
pub fn boundary_gradient(z: &UnitVec3, k: &FieldSpec) -> Vector3<f64> {
    let (t1, t2) = chart_basis(z);
    let n = 64.max(4 * k.degree() as usize + 4);
    let ds = 2.0 * PI / n as f64;
    (0..n)
        .map(|j| {
            let s = j as f64 * ds;
            let p = t1 * s.cos() + t2 * s.sin();
            p * (k.eval_ambient(&p) * ds)
        })
        .sum()
}

/// Symmetric 2×2 Hessian in the chart basis, by central differences of the
/// exact gradient with step `1e-3`.
fn chart_hessian(z: &UnitVec3, k: &FieldSpec) -> (Matrix2<f64>, (Vector3<f64>, Vector3<f64>)) {
    let (t1, t2) = chart_basis(z);
    let h = HESSIAN_STEP;
    let col = |t: &Vector3<f64>| {
        let gp = boundary_gradient(&z.exp(&(t * h)), k);
        let gm = boundary_gradient(&z.exp(&(t * -h)), k);
        let d = (gp - gm) / (2.0 * h);
        Vector2::new(d.dot(&t1), d.dot(&t2))
    };
    let (c1, c2) = (col(&t1), col(&t2));
    let off = 0.5 * (c1[1] + c2[0]);
    (Matrix2::new(c1[0], off, off, c2[1]), (t1, t2))
}

fn sym_eigenvalues(h: &Matrix2<f64>) -> [f64; 2] {
    let mean = 0.5 * (h[(0, 0)] + h[(1, 1)]);
    let diff = 0.5 * (h[(0, 0)] - h[(1, 1)]);
    let rad = (diff * diff + h[(0, 1)] * h[(0, 1)]).sqrt();
    [mean - rad, mean + rad]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalKind {
    Min,
    Max,
    Saddle,
    Degenerate,
}

impl CriticalKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Min => "min",
            Self::Max => "max",
            Self::Saddle => "saddle",
            Self::Degenerate => "degenerate",
        }
    }

    /// Classification from sorted Hessian eigenvalues.
    pub fn from_eigenvalues(eig: [f64; 2]) -> Self {
        let big = eig[0].abs().max(eig[1].abs());
        let small = eig[0].abs().min(eig[1].abs());
        if big == 0.0 || small <= 1e-6 * big {
            Self::Degenerate
        } else if eig[0] > 0.0 {
            Self::Min
        } else if eig[1] < 0.0 {
            Self::Max
        } else {
            Self::Saddle
        }
    }
}

#[derive(Debug, Clone)]
pub struct MelnikovCritical {
    pub z: UnitVec3,
    pub value: f64,
    pub kind: CriticalKind,
    pub eigenvalues: [f64; 2],
    pub gradient_norm: f64,
    /// `|λ|max / |λ|min`; the reported stability surrogate.
    pub conditioning: f64,
    /// Whether a critical point of `K + δ p₁` (δ = 1e-3 · max|K|) lies within
    /// geodesic distance 0.05. Heuristic; `None` for degenerate points.
    pub persists: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct MelnikovReport {
    pub grid: Vec<UnitVec3>,
    pub values: Vec<f64>,
    pub critical_points: Vec<MelnikovCritical>,
    pub constant_landscape: bool,
}

impl MelnikovReport {
    /// `z_x,z_y,z_z,F` rows with 17 significant digits.
    pub fn grid_csv(&self) -> String {
        let mut out = String::from("z_x,z_y,z_z,F\n");
        for (z, f) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", z.x, z.y, z.z, f));
        }
        out
    }
}

/// Spread below which `F_K` counts as constant, relative to `max(1, 2π max|K|)`.
const FLAT_TOL: f64 = 1e-9;

fn ascend(z0: &UnitVec3, k: &FieldSpec, quad: &CapQuadrature, sign: f64, gtol: f64) -> UnitVec3 {
    let mut z = *z0;
    let mut f = melnikov_value_with(&z, k, quad);
    for _ in 0..2000 {
        let g = boundary_gradient(&z, k);
        let gn = g.norm();
        if gn <= gtol {
            break;
        }
        let mut alpha = 1.0_f64.min(0.5 / gn);
        let mut moved = false;
        for _ in 0..50 {
            let trial = z.exp(&(g * (sign * alpha)));
            let ft = melnikov_value_with(&trial, k, quad);
            if sign * (ft - f) >= 1e-4 * alpha * gn * gn {
                z = trial;
                f = ft;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    z
}

/// Newton on the exact gradient; `None` if it fails to reach `tol`.
fn newton(z0: &UnitVec3, k: &FieldSpec, tol: f64) -> Option<UnitVec3> {
    let mut z = *z0;
    for _ in 0..40 {
        let g = boundary_gradient(&z, k);
        if g.norm() <= tol {
            return Some(z);
        }
        let (h, (t1, t2)) = chart_hessian(&z, k);
        let rhs = Vector2::new(g.dot(&t1), g.dot(&t2));
        let step = h.lu().solve(&(-rhs))?;
        let mut v = t1 * step[0] + t2 * step[1];
        if v.norm() > 0.2 {
            v *= 0.2 / v.norm();
        }
        z = z.exp(&v);
    }
    (boundary_gradient(&z, k).norm() <= tol).then_some(z)
}

fn classify(z: UnitVec3, k: &FieldSpec, quad: &CapQuadrature) -> MelnikovCritical {
    let (h, _) = chart_hessian(&z, k);
    let eigenvalues = sym_eigenvalues(&h);
    let kind = CriticalKind::from_eigenvalues(eigenvalues);
    let small = eigenvalues[0].abs().min(eigenvalues[1].abs());
    let big = eigenvalues[0].abs().max(eigenvalues[1].abs());
    MelnikovCritical {
        z,
        value: melnikov_value_with(&z, k, quad),
        kind,
        eigenvalues,
        gradient_norm: boundary_gradient(&z, k).norm(),
        conditioning: if small > 0.0 { big / small } else { f64::INFINITY },
        persists: None,
    }
}

fn critical_tol(k: &FieldSpec) -> f64 {
    1e-13 * k.scale().max(1.0)
}

/// Critical points reachable from `seeds`: descent, ascent and a direct
/// Newton solve from every seed, each polished by Newton on the exact
/// gradient. Points are deduplicated at geodesic distance `1e-3` and
/// filtered by `region`.
pub fn find_stable_critical_points(
    k: &FieldSpec,
    region: &(dyn Fn(&UnitVec3) -> bool + Sync),
    seeds: &[UnitVec3],
    quad: &CapQuadrature,
) -> Result<MelnikovReport> {
    let values = melnikov_values(seeds, k, quad);
    let probe = melnikov_values(&fibonacci_sphere(200), k, quad);
    let (lo, hi) =
        values.iter().chain(&probe).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let scale = k.scale();
    if hi - lo <= FLAT_TOL * (2.0 * PI * scale).max(1.0) {
        return Ok(MelnikovReport {
            grid: seeds.to_vec(),
            values,
            critical_points: Vec::new(),
            constant_landscape: true,
        });
    }

    let tol = critical_tol(k);
    let accept = 1e-8_f64.max(10.0 * tol);
    let gtol = 1e-4 * scale;
    let found: Vec<Vec<UnitVec3>> = seeds
        .par_iter()
        .map(|s| {
            let mut out = Vec::new();
            for start in [ascend(s, k, quad, -1.0, gtol), ascend(s, k, quad, 1.0, gtol), *s] {
                if let Some(z) = newton(&start, k, tol) {
                    out.push(z);
                }
            }
            out
        })
        .collect();

    let mut unique: Vec<UnitVec3> = Vec::new();
    for z in found.into_iter().flatten() {
        if boundary_gradient(&z, k).norm() > accept || !region(&z) {
            continue;
        }
        if unique.iter().all(|u| u.distance(&z) > 1e-3) {
            unique.push(z);
        }
    }

    let perturbation = FieldSpec::polynomial(&[Monomial { exps: [1, 0, 0], coef: 1e-3 * scale }])?;
    let perturbed = k.sum(&perturbation);
    let ptol = critical_tol(&perturbed);
    let critical_points = unique
        .into_par_iter()
        .map(|z| {
            let mut c = classify(z, k, quad);
            if c.kind != CriticalKind::Degenerate {
                c.persists = Some(newton(&z, &perturbed, ptol).is_some_and(|w| w.distance(&z) <= 0.05));
            }
            c
        })
        .collect();

    Ok(MelnikovReport { grid: seeds.to_vec(), values, critical_points, constant_landscape: false })
}

#[derive(Debug, Clone)]
pub struct AxisCandidate {
    pub axis: UnitVec3,
    pub f_plus: f64,
    pub f_minus: f64,
    /// `max |K|` over 128 points of the great circle orthogonal to `axis`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct DistinctnessReport {
    pub candidate_axes: Vec<AxisCandidate>,
    pub condition_holds: bool,
}

const CIRCLE_SAMPLES: usize = 128;

fn circle_points(q: &Rotation3) -> Vec<Vector3<f64>> {
    (0..CIRCLE_SAMPLES)
        .map(|j| {
            let s = 2.0 * PI * j as f64 / CIRCLE_SAMPLES as f64;
            q.apply_vec(&Vector3::new(s.cos(), s.sin(), 0.0))
        })
        .collect()
}

fn circle_residual(q: &Rotation3, k: &FieldSpec) -> Vec<f64> {
    circle_points(q).iter().map(|p| k.eval_ambient(p)).collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Rotation tilting the frame `q` by the tangent vector `a1 t1 + a2 t2` at
/// its center.
fn tilt(q: &Rotation3, a: &Vector2<f64>) -> Rotation3 {
    let d = q.column(1).into_inner() * a[0] + q.column(2).into_inner() * a[1];
    let angle = d.norm();
    if angle == 0.0 {
        return *q;
    }
    let axis = UnitVec3::new(q.center().cross(&d)).expect("tangent direction is nonzero");
    Rotation3::from_axis_angle(&axis, angle).compose(q)
}

/// Levenberg–Marquardt on the circle samples of `K`, starting from the
/// great circle orthogonal to `w`.
fn refine_axis(w: &UnitVec3, k: &FieldSpec) -> (UnitVec3, f64) {
    let mut q = frame_to(w);
    let mut r = circle_residual(&q, k);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let h = 1e-7;
    for _ in 0..60 {
        let cols: Vec<Vec<f64>> = [Vector2::new(h, 0.0), Vector2::new(0.0, h)]
            .iter()
            .map(|step| {
                let rp = circle_residual(&tilt(&q, step), k);
                let rm = circle_residual(&tilt(&q, &(-step)), k);
                rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
            })
            .collect();
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for i in 0..CIRCLE_SAMPLES {
            let row = Vector2::new(cols[0][i], cols[1][i]);
            jtj += row * row.transpose();
            jtr += row * r[i];
        }
        let mut improved = false;
        for _ in 0..20 {
            let damped = jtj + Matrix2::from_diagonal(&jtj.diagonal()) * lambda;
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = tilt(&q, &step);
            let rt = circle_residual(&trial, k);
            let ct: f64 = rt.iter().map(|v| v * v).sum();
            if ct < cost {
                q = trial;
                r = rt;
                cost = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved || cost == 0.0 {
            break;
        }
    }
    (q.center(), sup(&r))
}

/// Axes `w` whose orthogonal great circle is a zero set of `K`, found by
/// screening a Fibonacci grid of `grid_size` axes (plus the coordinate
/// axes) and refining promising ones; then the comparison of `F_K(w)` with
/// `F_K(-w)` at each.
pub fn distinctness_check(k: &FieldSpec, grid_size: usize) -> DistinctnessReport {
    let scale = k.scale();
    if scale == 0.0 {
        return DistinctnessReport { candidate_axes: Vec::new(), condition_holds: true };
    }
    let vanish = 1e-8 * scale;
    let mut axes = fibonacci_sphere(grid_size);
    axes.extend([UnitVec3::e1(), UnitVec3::e2(), UnitVec3::e3()]);

    let refined: Vec<Option<(UnitVec3, f64)>> = axes
        .par_iter()
        .map(|w| {
            let r0 = sup(&circle_residual(&frame_to(w), k));
            if r0 <= vanish {
                return Some((*w, r0));
            }
            if r0 > 0.25 * scale {
                return None;
            }
            let (axis, res) = refine_axis(w, k);
            (res <= vanish).then_some((axis, res))
        })
        .collect();

    let quad = CapQuadrature::default_for(k);
    let mut candidate_axes: Vec<AxisCandidate> = Vec::new();
    for (axis, residual) in refined.into_iter().flatten() {
        let seen =
            candidate_axes.iter().any(|c| c.axis.distance(&axis) < 1e-4 || c.axis.distance(&axis.antipode()) < 1e-4);
        if seen {
            continue;
        }
        // canonical orientation: first nonzero coordinate positive
        let v = axis.into_inner();
        let lead = [v.x, v.y, v.z].into_iter().find(|c| c.abs() > 1e-9).unwrap_or(1.0);
        let axis = if lead < 0.0 { axis.antipode() } else { axis };
        candidate_axes.push(AxisCandidate {
            axis,
            f_plus: melnikov_value_with(&axis, k, &quad),
            f_minus: melnikov_value_with(&axis.antipode(), k, &quad),
            residual,
        });
    }
    let condition_holds = candidate_axes.iter().all(|c| (c.f_plus - c.f_minus).abs() <= 1e-6 * scale);
    DistinctnessReport { candidate_axes, condition_holds }
}
