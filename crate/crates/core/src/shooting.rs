//! Closed orbits of the magnetic flow `γ'' + |γ'|²γ = K(γ) γ∧γ'` at speed
//! `c`, found by shooting. An independent check on the variational solver.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3, SVD};

use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::loops::{self, Loop};
use crate::reduction::ReductionState;
use crate::sphere::{unskew, Rotation3, UnitVec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub position: UnitVec3,
    pub velocity: Vector3<f64>,
}

impl PhasePoint {
    /// Checks `γ·γ' = 0` to within `1e-10 · |γ'|`.
    pub fn new(position: UnitVec3, velocity: Vector3<f64>) -> Result<Self> {
        if position.dot(&velocity).abs() > 1e-10 * velocity.norm().max(1.0) {
            return Err(Error::InvalidArgument("velocity is not tangent to the sphere".into()));
        }
        Ok(Self { position, velocity })
    }

    /// Orthonormal frame `[γ, t, γ∧t]` with `t = γ'/|γ'|`.
    fn frame(&self) -> Matrix3<f64> {
        let g = self.position.into_inner();
        let t = self.velocity / self.velocity.norm();
        Matrix3::from_columns(&[g, t, g.cross(&t)])
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    /// Largest `||γ'| - c| / c` seen before each projection.
    pub speed_drift: f64,
    /// Largest `||γ| - 1|` seen before each projection.
    pub norm_drift: f64,
}

fn accel(k: &FieldSpec, g: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    -g * v.norm_squared() + g.cross(v) * k.eval_ambient(g)
}

/// The classical RK4 step plus projection back onto `|γ| = 1`, `γ·γ' = 0`,
/// `|γ'| = c`. Returns the pre-projection drifts.
fn rk4_step(k: &FieldSpec, c: f64, g: &mut Vector3<f64>, v: &mut Vector3<f64>, h: f64) -> (f64, f64) {
    let (g0, v0) = (*g, *v);
    let a1 = accel(k, &g0, &v0);
    let (g1, v1) = (g0 + v0 * (0.5 * h), v0 + a1 * (0.5 * h));
    let a2 = accel(k, &g1, &v1);
    let (g2, v2) = (g0 + v1 * (0.5 * h), v0 + a2 * (0.5 * h));
    let a3 = accel(k, &g2, &v2);
    let (g3, v3) = (g0 + v2 * h, v0 + a3 * h);
    let a4 = accel(k, &g3, &v3);
    let gn = g0 + (v0 + v1 * 2.0 + v2 * 2.0 + v3) * (h / 6.0);
    let vn = v0 + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
    let norm_drift = (gn.norm() - 1.0).abs();
    let speed_drift = (vn.norm() - c).abs() / c;
    *g = gn / gn.norm();
    let vt = vn - *g * g.dot(&vn);
    *v = vt * (c / vt.norm());
    (norm_drift, speed_drift)
}

/// Largest admissible step: `1e-2 · 2π/c`.
pub fn max_step(c: f64) -> f64 {
    1e-3 * (2.0 * PI / c) * 10.0
}

pub fn default_step(c: f64) -> f64 {
    (2.0 * PI / c) / 2048.0
}

/// Integrates from `start` to time `t_end` (either sign) in equal steps no
/// longer than `dt`, recording every step.
pub fn integrate(k: &FieldSpec, c: f64, start: &PhasePoint, t_end: f64, dt: f64) -> Result<Trajectory> {
    integrate_recording(k, c, start, t_end, dt, 1)
}

fn integrate_recording(
    k: &FieldSpec,
    c: f64,
    start: &PhasePoint,
    t_end: f64,
    dt: f64,
    every: usize,
) -> Result<Trajectory> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::InvalidArgument(format!("speed must be positive, got {c}")));
    }
    if dt.is_nan() || dt <= 0.0 || dt > max_step(c) {
        return Err(Error::StepTooLarge { dt, limit: max_step(c) });
    }
    let steps = ((t_end.abs() / dt).ceil() as usize).max(1).div_ceil(every) * every;
    run(k, c, start, t_end, steps, every)
}

fn run(k: &FieldSpec, c: f64, start: &PhasePoint, t_end: f64, steps: usize, every: usize) -> Result<Trajectory> {
    let h = t_end / steps as f64;
    let mut g = start.position.into_inner();
    let mut v = start.velocity * (c / start.velocity.norm());
    let mut times = vec![0.0];
    let mut points = vec![PhasePoint { position: start.position, velocity: v }];
    let (mut norm_drift, mut speed_drift) = (0.0_f64, 0.0_f64);
    for i in 1..=steps {
        let (nd, sd) = rk4_step(k, c, &mut g, &mut v, h);
        norm_drift = norm_drift.max(nd);
        speed_drift = speed_drift.max(sd);
        if i % every == 0 {
            times.push(h * i as f64);
            points.push(PhasePoint { position: UnitVec3::from_unit(g), velocity: v });
        }
    }
    Ok(Trajectory { times, points, speed_drift, norm_drift })
}

fn endpoint(k: &FieldSpec, c: f64, start: &PhasePoint, t_end: f64, steps: usize) -> PhasePoint {
    let h = t_end / steps as f64;
    let mut g = start.position.into_inner();
    let mut v = start.velocity;
    for _ in 0..steps {
        rk4_step(k, c, &mut g, &mut v, h);
    }
    PhasePoint { position: UnitVec3::from_unit(g), velocity: v }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub fd_step: f64,
    /// Integration step; `None` uses `(2π/c)/2048`.
    pub dt: Option<f64>,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 30, fd_step: 1e-7, dt: None }
    }
}

#[derive(Debug, Clone)]
pub struct OrbitResult {
    pub initial: PhasePoint,
    pub period: f64,
    pub samples: Loop,
    pub closure_error: f64,
    pub speed_drift: f64,
    pub iterations: usize,
}

/// `|γ(T) - γ(0)| + |γ'(T) - γ'(0)| / c`.
fn closure(a: &PhasePoint, b: &PhasePoint, c: f64) -> f64 {
    (a.position.into_inner() - b.position.into_inner()).norm() + (a.velocity - b.velocity).norm() / c
}

/// Start point rotated by `a1` about `γ0` (turning the velocity) and by `a2`
/// about `t0` (moving the point across its own direction of travel).
fn perturbed(base: &PhasePoint, a1: f64, a2: f64) -> PhasePoint {
    let g = base.position;
    let t = UnitVec3::from_unit(base.velocity / base.velocity.norm());
    let q = Rotation3::from_axis_angle(&t, a2).compose(&Rotation3::from_axis_angle(&g, a1));
    PhasePoint { position: q.apply(&g), velocity: q.apply_vec(&base.velocity) }
}

/// A closed orbit near `guess`: Newton on the two start-frame rotations and
/// the period, zeroing the frame mismatch after one period. The Jacobian is
/// a central difference and is inverted by SVD, so families of periodic
/// orbits (constant fields) do not stall the iteration.
pub fn find_periodic(k: &FieldSpec, c: f64, guess: &Loop, opts: &ShootingOptions) -> Result<OrbitResult> {
    guess.check_regular()?;
    let n = guess.len();
    let d0 = guess.derivative(1)[0];
    let g0 = guess.samples()[0];
    let d0 = d0 - g0 * g0.dot(&d0);
    let base = PhasePoint::new(UnitVec3::from_unit(g0), d0 * (c / d0.norm()))?;
    let dt = opts.dt.unwrap_or_else(|| default_step(c));
    if dt.is_nan() || dt <= 0.0 || dt > max_step(c) {
        return Err(Error::StepTooLarge { dt, limit: max_step(c) });
    }
    let length = 2.0 * PI * guess.length_functional()?;
    let mut x = Vector3::new(0.0, 0.0, length / c);
    let steps_for = |t: f64| ((t.abs() / dt).ceil() as usize).max(1).div_ceil(n) * n;

    let defect = |x: &Vector3<f64>, steps: usize| -> (Vector3<f64>, f64) {
        let s = perturbed(&base, x[0], x[1]);
        let e = endpoint(k, c, &s, x[2], steps);
        (unskew(&(e.frame() * s.frame().transpose())), closure(&e, &s, c))
    };

    let mut iterations = 0;
    loop {
        let steps = steps_for(x[2]);
        let (f, err) = defect(&x, steps);
        if err <= opts.tol {
            break;
        }
        if iterations >= opts.max_iters || !err.is_finite() {
            return Err(Error::ShootingFailure { defect: err, iterations });
        }
        let h = opts.fd_step;
        let mut jac = Matrix3::zeros();
        for j in 0..3 {
            let step = if j == 2 { h * x[2].abs().max(1.0) } else { h };
            let mut xp = x;
            let mut xm = x;
            xp[j] += step;
            xm[j] -= step;
            let col = (defect(&xp, steps).0 - defect(&xm, steps).0) / (2.0 * step);
            jac.set_column(j, &col);
        }
        let svd = SVD::new(jac, true, true);
        let cutoff = 1e-8 * svd.singular_values.max();
        let dx =
            svd.solve(&(-f), cutoff).map_err(|_| Error::ShootingFailure { defect: err, iterations: iterations + 1 })?;
        x += dx;
        iterations += 1;
    }

    let start = perturbed(&base, x[0], x[1]);
    let steps = steps_for(x[2]);
    let traj = run(k, c, &start, x[2], steps, steps / n)?;
    let end = traj.points.last().expect("trajectory has points");
    let closure_error = closure(end, &start, c);
    let samples = Loop::new(traj.points[..n].iter().map(|p| p.position.into_inner()).collect())?;
    Ok(OrbitResult { initial: start, period: x[2], samples, closure_error, speed_drift: traj.speed_drift, iterations })
}

#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub epsilon: f64,
    pub speed: f64,
    pub orbit: OrbitResult,
    /// Phase-aligned sup distance between the orbit and the loop.
    pub distance: f64,
    pub period: f64,
    /// `2π L(u) ε`, or `2π L(u)` for `ε = 0` (speed 1, zero field).
    pub expected_period: f64,
    pub period_rel_error: f64,
}

/// Shoots from a loop that should solve the reduced equation with
/// parameter `ε`, at the physical speed `c = 1/ε`.
pub fn cross_validate_loop(u: &Loop, k: &FieldSpec, eps: f64, opts: &ShootingOptions) -> Result<CrossValidation> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon must be non-negative, got {eps}")));
    }
    let l = u.length_functional()?;
    let (c, field, expected) =
        if eps == 0.0 { (1.0, FieldSpec::zero(), 2.0 * PI * l) } else { (1.0 / eps, k.clone(), 2.0 * PI * l * eps) };
    let orbit = find_periodic(&field, c, u, opts)?;
    let (distance, _) = loops::phase_align_distance(&orbit.samples, u)?;
    let period = orbit.period;
    Ok(CrossValidation {
        epsilon: eps,
        speed: c,
        distance,
        period,
        expected_period: expected,
        period_rel_error: (period - expected).abs() / expected,
        orbit,
    })
}

pub fn cross_validate(state: &ReductionState, k: &FieldSpec, opts: &ShootingOptions) -> Result<CrossValidation> {
    cross_validate_loop(&state.corrected_loop, k, state.epsilon, opts)
}
