//! Length, area and energy of loops, the Euler–Lagrange fields `J₀`, `J_ε`,
//! and the linearization of `J₀` at great circles with its inverse on the
//! complement of the kernel.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::loops::{self, great_circle, FrameCoeffs, Loop, TangentLoopField};
use crate::quadrature::GaussLegendre;
use crate::spectral;
use crate::sphere::{Rotation3, StereoChart, UnitVec3};

/// Minimum distance between a loop and the stereographic pole.
pub const POLE_CLEARANCE: f64 = 1e-3;

/// Largest kernel coefficient tolerated by [`solve_linearized`].
pub const PROJECTION_TOL: f64 = 1e-8;

fn check_pole(p: &UnitVec3, u: &Loop) -> Result<()> {
    let distance = u.samples().iter().map(|s| (s - p.into_inner()).norm()).fold(f64::INFINITY, f64::min);
    if distance <= POLE_CLEARANCE {
        return Err(Error::PoleProximity { distance });
    }
    Ok(())
}

/// Breakpoints in `t ∈ [0, 1]` for the radial primitive at `|w|`: a single
/// panel for moderate `|w|`, geometric panels from `1/|w|` otherwise.
fn radial_panels(r: f64) -> Vec<f64> {
    let mut cuts = vec![0.0];
    if r > 4.0 {
        let mut t = 1.0 / r;
        while t < 1.0 {
            cuts.push(t);
            t *= 4.0;
        }
    }
    cuts.push(1.0);
    cuts
}

/// `A_K(p; u)`: the line integral of the radial primitive `h(w) w^⊥·dw`
/// in the stereographic plane of pole `p`, where
/// `h(w) = ∫₀¹ t g(tw) dt` and `g(w) = -K(Π⁻¹ w) (2/(1+|w|²))²`.
pub fn area_functional(p: &UnitVec3, u: &Loop, k: &FieldSpec) -> Result<f64> {
    check_pole(p, u)?;
    if k.is_zero() {
        return Ok(0.0);
    }
    let chart = StereoChart::new(*p);
    let rule = GaussLegendre::new(32);
    let d = u.derivative(1);
    let mut acc = 0.0;
    for (q, dq) in u.samples().iter().zip(&d) {
        let w = chart.project(&UnitVec3::from_unit(*q))?;
        let dw = chart.push_forward(q, dq);
        let r = (w[0] * w[0] + w[1] * w[1]).sqrt();
        let cuts = radial_panels(r);
        let h: f64 = cuts
            .windows(2)
            .map(|c| {
                rule.integrate(c[0], c[1], |t| {
                    let tw = [t * w[0], t * w[1]];
                    let rho = 2.0 / (1.0 + t * t * r * r);
                    -t * k.eval(&chart.inverse(tw)) * rho * rho
                })
            })
            .sum();
        acc += h * (w[0] * dw[1] - w[1] * dw[0]);
    }
    Ok(acc / u.len() as f64)
}

/// Closed form for `K ≡ 1`: `2 ⨍ p·(u∧u') / |u-p|²`.
pub fn area_unit_field(p: &UnitVec3, u: &Loop) -> Result<f64> {
    check_pole(p, u)?;
    let d = u.derivative(1);
    let s: f64 =
        u.samples().iter().zip(&d).map(|(q, dq)| p.dot(&q.cross(dq)) / (q - p.into_inner()).norm_squared()).sum();
    Ok(2.0 * s / u.len() as f64)
}

/// `-(1/2π) ∫_Ω K dσ` over the region `Ω` bounded by `u` on the side away
/// from `p`, signed by the orientation of `u` as a boundary of `Ω`.
///
/// The region is swept by the geodesic cone from a center `c` (the
/// normalized mean of the samples, or of `u∧u'` when that mean is tiny);
/// the curve must be embedded and star-shaped about `c`. Intended as an
/// independent check of [`area_functional`].
pub fn area_surface_oracle(p: &UnitVec3, u: &Loop, k: &FieldSpec) -> Result<f64> {
    check_pole(p, u)?;
    if !u.is_embedded() {
        return Err(Error::OracleUnavailable("curve is not embedded".into()));
    }
    let n = u.len();
    let d = u.derivative(1);
    let mean: Vector3<f64> = u.samples().iter().sum::<Vector3<f64>>() / n as f64;
    let c = if mean.norm() > 1e-3 {
        mean.normalize()
    } else {
        let m: Vector3<f64> = u.samples().iter().zip(&d).map(|(a, b)| a.cross(b)).sum();
        if m.norm() < 1e-12 {
            return Err(Error::OracleUnavailable("no usable center".into()));
        }
        m.normalize()
    };

    let dets: Vec<f64> = u.samples().iter().zip(&d).map(|(q, dq)| c.dot(&q.cross(dq))).collect();
    let scale = dets.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
    let sign = if dets[0] > 0.0 { 1.0 } else { -1.0 };
    if dets.iter().any(|v| sign * v <= 1e-6 * scale) {
        return Err(Error::OracleUnavailable("curve is not star-shaped about its center".into()));
    }
    if u.samples().iter().any(|q| q.dot(&c) <= -1.0 + 1e-6) {
        return Err(Error::OracleUnavailable("curve reaches the anti-center".into()));
    }

    let rule = GaussLegendre::new(48);
    let mut cone = 0.0;
    for (q, det) in u.samples().iter().zip(&dets) {
        cone += rule.integrate(0.0, 1.0, |r| {
            let x = c * (1.0 - r) + q * r;
            let len = x.norm();
            k.eval_ambient(&(x / len)) * r * det / (len * len * len)
        });
    }
    let cone = cone * 2.0 * PI / n as f64;

    if contains(&c, u, p)? {
        Ok(-(cone - sign * k.sphere_integral()) / (2.0 * PI))
    } else {
        Ok(-cone / (2.0 * PI))
    }
}

/// Whether `p` lies in the cone region from `c`: the winding number of the
/// curve about `p` in the stereographic chart sending `-c` to infinity.
fn contains(c: &Vector3<f64>, u: &Loop, p: &UnitVec3) -> Result<bool> {
    if (p.into_inner() + c).norm() < 1e-9 {
        return Ok(false);
    }
    let chart = StereoChart::new(UnitVec3::new(-c)?);
    let w = chart.project(p)?;
    let pts: Vec<[f64; 2]> =
        u.samples().iter().map(|q| chart.project(&UnitVec3::from_unit(*q))).collect::<Result<_>>()?;
    let n = pts.len();
    let mut turn = 0.0;
    for k in 0..n {
        let a = pts[k];
        let b = pts[(k + 1) % n];
        let (ax, ay) = (a[0] - w[0], a[1] - w[1]);
        let (bx, by) = (b[0] - w[0], b[1] - w[1]);
        turn += (ax * by - ay * bx).atan2(ax * bx + ay * by);
    }
    Ok((turn / (2.0 * PI)).round() != 0.0)
}

/// `E_{εK}(p; u) = L(u) + ε A_K(p; u)` with its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub length: f64,
    pub area: f64,
    pub epsilon: f64,
    pub energy: f64,
}

pub fn energy(p: &UnitVec3, u: &Loop, k: &FieldSpec, epsilon: f64) -> Result<EnergyBreakdown> {
    let length = u.length_functional()?;
    let area = if epsilon == 0.0 { 0.0 } else { area_functional(p, u, k)? };
    Ok(EnergyBreakdown { length, area, epsilon, energy: length + epsilon * area })
}

/// Pointwise checks of the magnetic geodesic equation on a loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionDiagnostics {
    /// `max |J_ε(u)|`.
    pub residual_sup: f64,
    /// Standard deviation over mean of `|u'|`.
    pub speed_cv: f64,
    /// `max |κ - ε K(u)|`.
    pub curvature_error: f64,
    pub embedded: bool,
    pub energy: EnergyBreakdown,
    /// The pole used for the energy: minus the normalized `⨍ u∧u'`.
    pub pole: UnitVec3,
}

pub fn solution_diagnostics(u: &Loop, k: &FieldSpec, epsilon: f64) -> Result<SolutionDiagnostics> {
    u.check_nonconstant()?;
    u.check_regular()?;
    let residual_sup = loops::sup_norm(&jeps(epsilon, u, k)?);
    let speeds = u.speeds();
    let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
    let var = speeds.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / speeds.len() as f64;
    let curvature_error = u
        .geodesic_curvature()?
        .iter()
        .zip(u.samples())
        .map(|(kappa, q)| (kappa - epsilon * k.eval_ambient(q)).abs())
        .fold(0.0, f64::max);
    let d = u.derivative(1);
    let axis: Vector3<f64> = u.samples().iter().zip(&d).map(|(q, dq)| q.cross(dq)).sum();
    let pole =
        UnitVec3::new(-axis).map_err(|_| Error::DegenerateCurve("loop encloses no net area direction".into()))?;
    Ok(SolutionDiagnostics {
        residual_sup,
        speed_cv: var.sqrt() / mean,
        curvature_error,
        embedded: u.is_embedded(),
        energy: energy(&pole, u, k, epsilon)?,
        pole,
    })
}

/// `J₀(u) = -u'' - |u'|² u`.
pub fn j0(u: &Loop) -> Vec<Vector3<f64>> {
    let d1 = u.derivative(1);
    let d2 = u.derivative(2);
    u.samples().iter().zip(d1.iter().zip(&d2)).map(|(q, (a, b))| -b - q * a.norm_squared()).collect()
}

/// `J_ε(u) = J₀(u) + ε L(u) K(u) u∧u'`.
pub fn jeps(epsilon: f64, u: &Loop, k: &FieldSpec) -> Result<Vec<Vector3<f64>>> {
    let l = u.length_functional()?;
    let mut out = j0(u);
    if epsilon == 0.0 {
        return Ok(out);
    }
    let d1 = u.derivative(1);
    for ((o, q), a) in out.iter_mut().zip(u.samples()).zip(&d1) {
        *o += q.cross(a) * (epsilon * l * k.eval_ambient(q));
    }
    Ok(out)
}

fn check_base(r: &Rotation3, phi: &TangentLoopField) -> Result<Loop> {
    let omega = great_circle(r, phi.base().len())?;
    let gap = omega.samples().iter().zip(phi.base().samples()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    if gap > 1e-12 {
        return Err(Error::InvalidBase(format!(
            "field is not based on the great circle of the given rotation (gap {gap:e})"
        )));
    }
    Ok(omega)
}

/// `J₀'(ω_R) φ = -φ'' - 2 (ω_R'·φ') ω_R - φ`.
pub fn linearized_j0(r: &Rotation3, phi: &TangentLoopField) -> Result<TangentLoopField> {
    let omega = check_base(r, phi)?;
    let dw = omega.derivative(1);
    let p1 = loops::vector_derivative(phi.values(), 1);
    let p2 = loops::vector_derivative(phi.values(), 2);
    let values =
        (0..omega.len()).map(|k| -p2[k] - omega.samples()[k] * (2.0 * dw[k].dot(&p1[k])) - phi.values()[k]).collect();
    Ok(TangentLoopField::project(omega, values))
}

/// `B(g) = (-g₁'', -g₂'' - g₂)`.
pub fn b_operator(g: &FrameCoeffs) -> FrameCoeffs {
    let g1 = spectral::derivative(&g.g1, 2).into_iter().map(|v| -v).collect();
    let g2 = spectral::derivative(&g.g2, 2).into_iter().zip(&g.g2).map(|(d, v)| -d - v).collect();
    FrameCoeffs { g1, g2 }
}

/// The kernel of `J₀'(ω_R)`: the fields `R e_j ∧ ω_R`.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    pub rotation: Rotation3,
    pub fields: [TangentLoopField; 3],
    pub gram: Matrix3<f64>,
}

impl KernelBasis {
    /// `⟨v, k_j⟩ = ⨍ v·k_j` for each basis field.
    pub fn inner(&self, v: &[Vector3<f64>]) -> Vector3<f64> {
        Vector3::from_fn(|j, _| loops::l2_inner(v, self.fields[j].values()))
    }

    /// Coefficients `c` of the L² projection `Σ c_j k_j` of `v`.
    pub fn coefficients(&self, v: &[Vector3<f64>]) -> Vector3<f64> {
        let b = self.inner(v);
        Vector3::new(b.x / self.gram[(0, 0)], b.y / self.gram[(1, 1)], b.z / self.gram[(2, 2)])
    }

    /// `Σ c_j k_j` at every node.
    pub fn combine(&self, c: &Vector3<f64>) -> Vec<Vector3<f64>> {
        (0..self.fields[0].values().len()).map(|k| (0..3).map(|j| self.fields[j].values()[k] * c[j]).sum()).collect()
    }

    /// `v` minus its projection onto the kernel.
    pub fn project_out(&self, v: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        let proj = self.combine(&self.coefficients(v));
        v.iter().zip(&proj).map(|(a, b)| a - b).collect()
    }
}

/// The analytic Gram matrix is `diag(1/2, 1/2, 1)`; the stored one is the
/// trapezoid sum, which matches it to rounding for `N ≥ 32`.
pub fn kernel_basis(r: &Rotation3, n: usize) -> Result<KernelBasis> {
    let omega = great_circle(r, n)?;
    let fields: [TangentLoopField; 3] = std::array::from_fn(|j| {
        let axis = r.column(j + 1).into_inner();
        let values = omega.samples().iter().map(|w| axis.cross(w)).collect();
        TangentLoopField::project(omega.clone(), values)
    });
    let gram = Matrix3::from_fn(|h, j| loops::l2_inner(fields[h].values(), fields[j].values()));
    Ok(KernelBasis { rotation: *r, fields, gram })
}

/// The unique kernel-orthogonal `φ` with `J₀'(ω_R) φ = rhs`, by dividing the
/// Fourier modes of `Ψ rhs` by the symbols `k²` and `k² - 1`.
pub fn solve_linearized(r: &Rotation3, rhs: &TangentLoopField) -> Result<TangentLoopField> {
    let omega = check_base(r, rhs)?;
    let basis = kernel_basis(r, omega.len())?;
    let c = basis.coefficients(rhs.values());
    let max_coefficient = c.abs().max();
    if max_coefficient > PROJECTION_TOL {
        return Err(Error::ProjectionViolation { max_coefficient });
    }
    Ok(invert_symbols(&omega, rhs))
}

/// Symbol division without the projection check; kernel modes are dropped.
pub(crate) fn invert_symbols(omega: &Loop, rhs: &TangentLoopField) -> TangentLoopField {
    let g = loops::frame_decompose(omega, rhs).expect("great circles are regular");
    let zero = Complex64::new(0.0, 0.0);
    let g1 =
        spectral::apply_symbol(&g.g1, |k, _| if k == 0 { zero } else { Complex64::new(1.0 / (k * k) as f64, 0.0) });
    let g2 =
        spectral::apply_symbol(
            &g.g2,
            |k, _| {
                if k.abs() == 1 {
                    zero
                } else {
                    Complex64::new(1.0 / (k * k - 1) as f64, 0.0)
                }
            },
        );
    loops::frame_compose(omega, &FrameCoeffs { g1, g2 }).expect("great circles are regular")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Monomial, Preset};
    use crate::sphere::frame_to;

    fn tilt() -> Rotation3 {
        Rotation3::from_axis_angle(&UnitVec3::from_xyz(0.3, -1.0, 0.4).unwrap(), 1.1)
    }

    fn south() -> UnitVec3 {
        UnitVec3::e3().antipode()
    }

    fn equator(n: usize) -> Loop {
        great_circle(&Rotation3::identity(), n).unwrap()
    }

    fn p3() -> FieldSpec {
        FieldSpec::preset(Preset::LinearZ)
    }

    fn field(terms: &[([u32; 3], f64)]) -> FieldSpec {
        FieldSpec::polynomial(&terms.iter().map(|&(exps, coef)| Monomial { exps, coef }).collect::<Vec<_>>()).unwrap()
    }

    fn wobbly(n: usize) -> Loop {
        Loop::from_fn(n, |t| {
            Vector3::new(t.cos() + 0.1 * (2.0 * t).sin(), t.sin() + 0.05 * (3.0 * t).cos(), 0.4 + 0.2 * t.sin())
        })
        .unwrap()
    }

    #[test]
    fn unit_field_hemisphere() {
        let one = FieldSpec::constant(1.0);
        let w = equator(64);
        assert!((area_functional(&south(), &w, &one).unwrap() + 1.0).abs() < 1e-12);
        assert!((area_functional(&south(), &w.reversed(), &one).unwrap() - 1.0).abs() < 1e-12);
        assert!((area_unit_field(&south(), &w).unwrap() + 1.0).abs() < 1e-12);
        assert!((area_unit_field(&UnitVec3::e3(), &w.reversed()).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_loop_has_zero_area() {
        let c = Loop::from_fn(32, |_| Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(area_functional(&south(), &c, &p3()).unwrap(), 0.0);
    }

    #[test]
    fn pole_proximity_is_rejected() {
        let w = equator(64);
        assert!(matches!(area_functional(&UnitVec3::e1(), &w, &p3()), Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn latitude_cap_area() {
        for rho in [0.3, 0.8, 1.4] {
            let c = Loop::latitude_circle(&Rotation3::identity(), rho, 128).unwrap();
            let expect = -(1.0 - rho.cos());
            assert!((area_unit_field(&south(), &c).unwrap() - expect).abs() < 1e-12);
            let a = area_functional(&south(), &c, &FieldSpec::constant(1.0)).unwrap();
            assert!((a - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn surface_oracle_examples() {
        let w = equator(128);
        let one = FieldSpec::constant(1.0);
        assert!((area_surface_oracle(&south(), &w, &one).unwrap() + 1.0).abs() < 1e-10);
        assert!((area_surface_oracle(&south(), &w, &p3()).unwrap() + 0.5).abs() < 1e-10);
        assert!((area_surface_oracle(&UnitVec3::e3(), &w.reversed(), &p3()).unwrap() - 0.5).abs() < 1e-10);
        assert!((area_functional(&south(), &w, &p3()).unwrap() + 0.5).abs() < 1e-10);
    }

    #[test]
    fn oracle_rejects_self_intersection() {
        let chart = StereoChart::new(south());
        let eight =
            Loop::from_fn(128, |t| chart.inverse([0.5 * t.sin(), 0.5 * t.sin() * t.cos()]).into_inner()).unwrap();
        assert!(matches!(area_surface_oracle(&south(), &eight, &p3()), Err(Error::OracleUnavailable(_))));
    }

    #[test]
    fn line_integral_matches_oracle_with_pole_inside_cone() {
        let k = field(&[([1, 1, 0], 1.0), ([0, 0, 3], 0.5), ([0, 0, 0], 0.2)]);
        let u = wobbly(128);
        for p in [south(), UnitVec3::e3(), UnitVec3::from_xyz(0.1, 0.2, 1.0).unwrap()] {
            let a = area_functional(&p, &u, &k).unwrap();
            let b = area_surface_oracle(&p, &u, &k).unwrap();
            assert!((a - b).abs() < 1e-9, "p={p:?}: {a} vs {b}");
        }
    }

    #[test]
    fn far_pole_uses_panels() {
        // the curve passes within 0.05 of the pole, so |w| reaches ~40
        let p = UnitVec3::from_xyz(1.0, 0.0, 0.05).unwrap();
        let k = field(&[([0, 0, 1], 1.0), ([1, 0, 0], 0.3)]);
        let w = equator(1024);
        let a = area_functional(&p, &w, &k).unwrap();
        let b = area_surface_oracle(&p, &w, &k).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn energy_examples() {
        let w = equator(64);
        let e = energy(&south(), &w, &FieldSpec::constant(1.0), 0.1).unwrap();
        assert!((e.energy - 0.9).abs() < 1e-12);
        assert_eq!(e.energy, e.length + e.epsilon * e.area);
        let e0 = energy(&south(), &wobbly(64), &p3(), 0.0).unwrap();
        assert_eq!(e0.energy, wobbly(64).length_functional().unwrap());
    }

    #[test]
    fn energy_is_invariant() {
        let k = field(&[([1, 0, 1], 1.0), ([0, 2, 0], -0.5)]);
        let u = wobbly(128);
        let e = energy(&south(), &u, &k, 0.2).unwrap().energy;
        let r = tilt();
        let moved = u.rotated(&r).shifted(0.4);
        let e2 = energy(&r.apply(&south()), &moved, &k.rotated(&r), 0.2).unwrap().energy;
        assert!((e - e2).abs() < 1e-10);
    }

    #[test]
    fn j0_examples() {
        let w = great_circle(&tilt(), 64).unwrap();
        assert!(loops::sup_norm(&j0(&w)) < 1e-10);
        let u = wobbly(64);
        let q = Vector3::new(0.3, -0.4, 1.2);
        let rot: Vec<_> = u.samples().iter().map(|s| q.cross(s)).collect();
        assert!(loops::l2_inner(&j0(&u), &rot).abs() < 1e-12);
        let r = tilt();
        let a = j0(&u.rotated(&r));
        for (x, y) in a.iter().zip(j0(&u)) {
            assert!((x - r.apply_vec(&y)).norm() < 1e-12);
        }
    }

    #[test]
    fn jeps_examples() {
        let w = equator(64);
        let j = jeps(0.3, &w, &FieldSpec::constant(1.0)).unwrap();
        for (v, q) in j.iter().zip(w.samples()) {
            assert!((v - Vector3::new(0.0, 0.0, 0.3)).norm() < 1e-12, "{v:?} at {q:?}");
        }
        let u = wobbly(64);
        assert_eq!(jeps(0.0, &u, &p3()).unwrap(), j0(&u));
        let j = jeps(0.2, &u, &p3()).unwrap();
        let d = u.derivative(1);
        assert!(loops::l2_inner(&j, &d).abs() < 1e-10 * loops::sup_norm(&j));
    }

    #[test]
    fn jeps_is_the_energy_gradient() {
        let k = field(&[([1, 0, 1], 1.0), ([0, 0, 2], -0.5), ([0, 1, 0], 0.3)]);
        let u = wobbly(128);
        let eps = 0.3;
        let phi: Vec<_> = u
            .samples()
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let t = u.theta(i);
                let v = Vector3::new((2.0 * t).cos(), t.sin() * 0.5, (3.0 * t).sin());
                v - q * q.dot(&v)
            })
            .collect();
        let step = |t: f64| Loop::from_points(u.samples().iter().zip(&phi).map(|(a, b)| a + b * t).collect()).unwrap();
        let h = 1e-5;
        let fd = (energy(&south(), &step(h), &k, eps).unwrap().energy
            - energy(&south(), &step(-h), &k, eps).unwrap().energy)
            / (2.0 * h);
        let l = u.length_functional().unwrap();
        let exact = loops::l2_inner(&jeps(eps, &u, &k).unwrap(), &phi) / l;
        assert!((fd - exact).abs() <= 1e-5 * exact.abs(), "{fd} vs {exact}");
    }

    fn tangent(omega: &Loop, f: impl Fn(f64) -> (f64, f64)) -> TangentLoopField {
        let (g1, g2) = (0..omega.len()).map(|k| f(omega.theta(k))).unzip();
        loops::frame_compose(omega, &FrameCoeffs { g1, g2 }).unwrap()
    }

    #[test]
    fn linearization_examples() {
        let r = Rotation3::identity();
        let w = equator(64);
        let out = linearized_j0(&r, &tangent(&w, |t| ((2.0 * t).cos(), 0.0))).unwrap();
        let g = loops::frame_decompose(&w, &out).unwrap();
        for k in 0..64 {
            assert!((g.g1[k] - 4.0 * (2.0 * w.theta(k)).cos()).abs() < 1e-10);
            assert!(g.g2[k].abs() < 1e-10);
        }
        let out = linearized_j0(&r, &tangent(&w, |t| (0.0, t.cos()))).unwrap();
        assert!(loops::sup_norm(out.values()) < 1e-10);
        let basis = kernel_basis(&tilt(), 64).unwrap();
        for f in &basis.fields {
            assert!(loops::sup_norm(linearized_j0(&tilt(), f).unwrap().values()) < 1e-10);
        }
        let wrong = tangent(&w, |t| (t.cos(), 0.0));
        assert!(matches!(linearized_j0(&tilt(), &wrong), Err(Error::InvalidBase(_))));
    }

    #[test]
    fn kernel_gram_and_tangency() {
        for r in [Rotation3::identity(), tilt(), frame_to(&UnitVec3::from_xyz(0.0, -1.0, -0.2).unwrap())] {
            let b = kernel_basis(&r, 32).unwrap();
            let m = Matrix3::from_diagonal(&Vector3::new(0.5, 0.5, 1.0));
            assert!((b.gram - m).abs().max() < 1e-10);
            for f in &b.fields {
                for (v, q) in f.values().iter().zip(f.base().samples()) {
                    assert!(v.dot(q).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn b_operator_examples() {
        let n = 32;
        let nodes = spectral::nodes(n);
        let out = b_operator(&FrameCoeffs { g1: vec![1.0; n], g2: vec![0.0; n] });
        assert!(out.g1.iter().chain(&out.g2).all(|v| v.abs() < 1e-12));
        let out = b_operator(&FrameCoeffs { g1: vec![0.0; n], g2: nodes.iter().map(|t| t.sin()).collect() });
        assert!(out.g1.iter().chain(&out.g2).all(|v| v.abs() < 1e-12));
        let c: Vec<f64> = nodes.iter().map(|t| (2.0 * t).cos()).collect();
        let out = b_operator(&FrameCoeffs { g1: c.clone(), g2: c.clone() });
        for ((a, b), c) in out.g1.iter().zip(&out.g2).zip(&c) {
            assert!((a - 4.0 * c).abs() < 1e-12);
            assert!((b - 3.0 * c).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugacy_with_b() {
        let w = equator(64);
        let phi = tangent(&w, |t| ((3.0 * t).sin() + 0.2, (2.0 * t).cos() - t.sin()));
        let lhs = loops::frame_decompose(&w, &linearized_j0(&Rotation3::identity(), &phi).unwrap()).unwrap();
        let rhs = b_operator(&loops::frame_decompose(&w, &phi).unwrap());
        for k in 0..64 {
            assert!((lhs.g1[k] - rhs.g1[k]).abs() < 1e-10);
            assert!((lhs.g2[k] - rhs.g2[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn solve_examples() {
        let r = Rotation3::identity();
        let w = equator(64);
        let phi = solve_linearized(&r, &tangent(&w, |t| ((2.0 * t).cos(), 0.0))).unwrap();
        let g = loops::frame_decompose(&w, &phi).unwrap();
        for k in 0..64 {
            assert!((g.g1[k] - 0.25 * (2.0 * w.theta(k)).cos()).abs() < 1e-12);
        }
        let phi = solve_linearized(&r, &tangent(&w, |t| (0.0, (2.0 * t).cos()))).unwrap();
        let g = loops::frame_decompose(&w, &phi).unwrap();
        for k in 0..64 {
            assert!((g.g2[k] - (2.0 * w.theta(k)).cos() / 3.0).abs() < 1e-12);
        }
        let zero = solve_linearized(&r, &TangentLoopField::zeros(w.clone())).unwrap();
        assert!(loops::sup_norm(zero.values()) == 0.0);
        let bad = tangent(&w, |t| (1.0, t.sin()));
        assert!(matches!(solve_linearized(&r, &bad), Err(Error::ProjectionViolation { .. })));
    }

    #[test]
    fn linearized_image_is_kernel_orthogonal() {
        let r = tilt();
        let w = great_circle(&r, 64).unwrap();
        let basis = kernel_basis(&r, 64).unwrap();
        let phi = tangent(&w, |t| ((5.0 * t).sin() + t.cos(), 1.0 + (3.0 * t).cos()));
        let out = linearized_j0(&r, &phi).unwrap();
        assert!(basis.coefficients(out.values()).abs().max() < 1e-10);
    }
}
