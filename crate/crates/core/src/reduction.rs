//! Lyapunov–Schmidt reduction about the great circles.
//!
//! For each rotation `R` the corrector finds a loop `u` near `ω_R` and
//! multipliers `ζ ∈ ℝ³` with
//!
//! ```text
//! J_ε(u) = Σ ζ_j P_u(R e_j ∧ ω_R),    ⨍ u·(R e_j ∧ ω_R) = 0,
//! ```
//!
//! where `P_u` projects onto the tangent plane at `u`. The reduced energy
//! `Ẽ(z) = E_{εK}(-z; u)` depends only on the center `z = R e3`, and `u`
//! solves the magnetic geodesic equation exactly when `ζ = 0`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::functionals::{self, invert_symbols, kernel_basis, KernelBasis};
use crate::loops::{self, great_circle, Loop, TangentLoopField};
use crate::melnikov::{self, CriticalKind};
use crate::sphere::{frame_to, north_transport, Rotation3, UnitVec3};

/// Largest ε reached in one solve before falling back to staging.
const STAGE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorOptions {
    pub points: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub eps_max: f64,
    /// `|ζ|` below which a state counts as a solution.
    pub solution_tol: f64,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        Self { points: loops::DEFAULT_POINTS, tol: 1e-10, max_iters: 50, eps_max: 0.5, solution_tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct ReductionState {
    pub epsilon: f64,
    pub rotation: Rotation3,
    pub center: UnitVec3,
    pub corrected_loop: Loop,
    pub multipliers: Vector3<f64>,
    pub residual_sup: f64,
    pub constraint_sup: f64,
    pub gram_eps: Matrix3<f64>,
    pub newton_iters: usize,
}

impl ReductionState {
    /// Chart gradient of `Ẽ` at the center from the multipliers:
    /// `L dE(R T_h) = (M^ε ζ)_h`, and moving the center along `R e1`
    /// (resp. `R e2`) is the flow of `R T_2` (resp. `-R T_1`).
    pub fn multiplier_gradient(&self) -> Result<Vector3<f64>> {
        let l = self.corrected_loop.length_functional()?;
        let m = self.gram_eps * self.multipliers;
        let r = &self.rotation;
        Ok((r.column(1).into_inner() * m[1] - r.column(2).into_inner() * m[0]) / l)
    }

    /// `max |J_ε(u) - P(J_ε(u))|` where `P` projects pointwise onto the span
    /// of the tangentially projected kernel fields.
    pub fn kernel_span_residual(&self, k: &FieldSpec) -> Result<f64> {
        let u = &self.corrected_loop;
        let j = functionals::jeps(self.epsilon, u, k)?;
        let basis = kernel_basis(&self.rotation, u.len())?;
        let fields = projected_kernel(u, &basis);
        let gram = Matrix3::from_fn(|h, i| loops::l2_inner(&fields[h], &fields[i]));
        let rhs = Vector3::from_fn(|h, _| loops::l2_inner(&j, &fields[h]));
        let c = gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::DegenerateCurve("projected kernel fields are dependent".into()))?;
        Ok((0..u.len())
            .map(|i| (j[i] - (0..3).map(|h| fields[h][i] * c[h]).sum::<Vector3<f64>>()).norm())
            .fold(0.0, f64::max))
    }
}

fn projected_kernel(u: &Loop, basis: &KernelBasis) -> [Vec<Vector3<f64>>; 3] {
    std::array::from_fn(|j| u.samples().iter().zip(basis.fields[j].values()).map(|(q, k)| k - q * q.dot(k)).collect())
}

/// `(F₁, |F₁|_∞, |F₂|_∞)`.
fn residuals(
    eps: f64,
    u: &Loop,
    k: &FieldSpec,
    basis: &KernelBasis,
    zeta: &Vector3<f64>,
) -> Result<(Vec<Vector3<f64>>, f64, f64)> {
    let mut f1 = functionals::jeps(eps, u, k)?;
    let fields = projected_kernel(u, basis);
    for (i, v) in f1.iter_mut().enumerate() {
        for j in 0..3 {
            *v -= fields[j][i] * zeta[j];
        }
    }
    let f1_sup = loops::sup_norm(&f1);
    let f2_sup = basis.inner(u.samples()).abs().max();
    Ok((f1, f1_sup, f2_sup))
}

/// Removes the kernel component of `u` by repeated projection and
/// renormalization until `|⨍ u·k_j| ≤ 1e-15`.
fn reproject(mut u: Loop, basis: &KernelBasis) -> Result<Loop> {
    for _ in 0..20 {
        let c = basis.coefficients(u.samples());
        if c.abs().max() <= 1e-15 {
            break;
        }
        let shift = basis.combine(&c);
        u = Loop::from_points(u.samples().iter().zip(&shift).map(|(a, b)| a - b).collect())?;
    }
    Ok(u)
}

fn check_epsilon(eps: f64, opts: &CorrectorOptions) -> Result<()> {
    if !eps.is_finite() || eps.abs() > opts.eps_max {
        return Err(Error::InvalidArgument(format!("epsilon {eps} outside [-{m}, {m}]", m = opts.eps_max)));
    }
    Ok(())
}

/// Corrector from `ω_R`, staging ε in steps of 0.05 if a direct solve
/// diverges.
pub fn solve_corrector(eps: f64, r: &Rotation3, k: &FieldSpec, opts: &CorrectorOptions) -> Result<ReductionState> {
    match solve_corrector_from(eps, r, k, opts, None) {
        Err(Error::CorrectorDivergence { .. }) if eps.abs() > STAGE => staged(eps, r, k, opts),
        other => other,
    }
}

fn staged(eps: f64, r: &Rotation3, k: &FieldSpec, opts: &CorrectorOptions) -> Result<ReductionState> {
    let steps = (eps.abs() / STAGE).ceil() as usize;
    let mut warm: Option<Loop> = None;
    let mut total = 0;
    let mut last = None;
    for i in 1..=steps {
        let e = eps * i as f64 / steps as f64;
        let state = solve_corrector_from(e, r, k, opts, warm.as_ref())?;
        total += state.newton_iters;
        warm = Some(state.corrected_loop.clone());
        last = Some(state);
    }
    let mut state = last.expect("at least one stage");
    state.newton_iters = total;
    Ok(state)
}

/// Quasi-Newton corrector with the frozen linearization `J₀'(ω_R)`,
/// optionally from a warm-start loop.
pub fn solve_corrector_from(
    eps: f64,
    r: &Rotation3,
    k: &FieldSpec,
    opts: &CorrectorOptions,
    warm: Option<&Loop>,
) -> Result<ReductionState> {
    check_epsilon(eps, opts)?;
    let n = opts.points;
    let omega = great_circle(r, n)?;
    let basis = kernel_basis(r, n)?;
    let mut u = match warm {
        Some(w) if w.len() == n => reproject(w.clone(), &basis)?,
        Some(w) => return Err(Error::InvalidArgument(format!("warm start has {} samples, expected {n}", w.len()))),
        None => omega.clone(),
    };
    let mut zeta = Vector3::zeros();
    let mut iters = 0;
    let (f1_sup, f2_sup) = loop {
        let (f1, f1_sup, f2_sup) = residuals(eps, &u, k, &basis, &zeta)?;
        let res = f1_sup.max(f2_sup);
        if res <= opts.tol {
            break (f1_sup, f2_sup);
        }
        if iters >= opts.max_iters || !res.is_finite() || res > 1e3 {
            return Err(Error::CorrectorDivergence { residual: res, iterations: iters });
        }
        let rt: Vec<Vector3<f64>> = f1.iter().zip(omega.samples()).map(|(v, w)| v - w * w.dot(v)).collect();
        let dz = basis.coefficients(&rt);
        let kern = basis.combine(&dz);
        let rhs: Vec<Vector3<f64>> = rt.iter().zip(&kern).map(|(a, b)| a - b).collect();
        let du = invert_symbols(&omega, &TangentLoopField::project(omega.clone(), rhs));
        zeta += dz;
        u = Loop::from_points(u.samples().iter().zip(du.values()).map(|(a, b)| a - b).collect())?;
        u = reproject(u, &basis)?;
        iters += 1;
    };

    let gram_eps = Matrix3::from_fn(|h, j| {
        let axis = r.column(h + 1).into_inner();
        let v: Vec<Vector3<f64>> = u.samples().iter().map(|q| axis.cross(q)).collect();
        loops::l2_inner(&v, basis.fields[j].values())
    });
    u.check_regular()?;
    Ok(ReductionState {
        epsilon: eps,
        rotation: *r,
        center: r.center(),
        corrected_loop: u,
        multipliers: zeta,
        residual_sup: f1_sup,
        constraint_sup: f2_sup,
        gram_eps,
        newton_iters: iters,
    })
}

/// `(is_solution, |ζ|)`.
pub fn criticality_check(state: &ReductionState, opts: &CorrectorOptions) -> (bool, f64) {
    let norm = state.multipliers.norm();
    (norm <= opts.solution_tol, norm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedEnergySample {
    pub z: UnitVec3,
    pub energy: f64,
    /// `1 - (ε/2π) F_K(z)`.
    pub leading: f64,
    pub multiplier_norm: f64,
}

fn energy_of(state: &ReductionState, k: &FieldSpec) -> Result<f64> {
    let pole = state.center.antipode();
    Ok(functionals::energy(&pole, &state.corrected_loop, k, state.epsilon)?.energy)
}

fn sample_at(
    eps: f64,
    r: &Rotation3,
    k: &FieldSpec,
    opts: &CorrectorOptions,
) -> Result<(ReducedEnergySample, ReductionState)> {
    let state = solve_corrector(eps, r, k, opts)?;
    let z = state.center;
    let leading =
        1.0 - eps / (2.0 * PI) * melnikov::melnikov_value_with(&z, k, &melnikov::CapQuadrature::default_for(k));
    let sample =
        ReducedEnergySample { z, energy: energy_of(&state, k)?, leading, multiplier_norm: state.multipliers.norm() };
    Ok((sample, state))
}

/// `Ẽ^ε(z)` with the corrector at `R = N(z)`.
pub fn reduced_energy(eps: f64, z: &UnitVec3, k: &FieldSpec, opts: &CorrectorOptions) -> Result<ReducedEnergySample> {
    let r = north_transport(z)?;
    Ok(sample_at(eps, &r, k, opts)?.0)
}

/// `Ẽ^ε` over a list of centers, in input order.
pub fn landscape(
    eps: f64,
    points: &[UnitVec3],
    k: &FieldSpec,
    opts: &CorrectorOptions,
) -> Vec<Result<ReducedEnergySample>> {
    points.par_iter().map(|z| reduced_energy(eps, z, k, opts)).collect()
}

/// Rotations `R(z)` with `R(z) e3 = z`, smooth near an anchor point:
/// `R(z) = Q N(Qᵀ z)` where `Q e3` is the anchor.
#[derive(Debug, Clone)]
pub struct Chart {
    anchor: Rotation3,
}

impl Chart {
    pub fn north() -> Self {
        Self { anchor: Rotation3::identity() }
    }

    pub fn anchored_at(z: &UnitVec3) -> Self {
        Self { anchor: frame_to(z) }
    }

    pub fn rotation_at(&self, z: &UnitVec3) -> Result<Rotation3> {
        let local = self.anchor.transpose().apply(z);
        Ok(self.anchor.compose(&north_transport(&local)?))
    }

    /// Whether `z` is comfortably inside the chart's hemisphere.
    pub fn covers(&self, z: &UnitVec3) -> bool {
        self.anchor.center().dot(z) > 0.5
    }
}

/// Central-difference chart gradient of `Ẽ` at `z` (geodesic step `h`).
pub fn fd_chart_gradient(
    eps: f64,
    z: &UnitVec3,
    k: &FieldSpec,
    opts: &CorrectorOptions,
    chart: &Chart,
    h: f64,
) -> Result<Vector3<f64>> {
    let r = chart.rotation_at(z)?;
    let mut g = Vector3::zeros();
    for a in 1..=2 {
        let t = r.column(a).into_inner();
        let e = |s: f64| -> Result<f64> {
            let w = z.exp(&(t * s));
            let state = solve_corrector(eps, &chart.rotation_at(&w)?, k, opts)?;
            energy_of(&state, k)
        };
        g += t * ((e(h)? - e(-h)?) / (2.0 * h));
    }
    Ok(g)
}

/// Chart gradient from the first variation of the area along the
/// rotation generators: `dE(R T_h) = ε ⨍ K(u) (R e_h ∧ u)·(u∧u')`.
pub fn analytic_chart_gradient(state: &ReductionState, k: &FieldSpec) -> Vector3<f64> {
    let u = &state.corrected_loop;
    let d = u.derivative(1);
    let r = &state.rotation;
    let de = |h: usize| {
        let axis = r.column(h).into_inner();
        let s: f64 =
            u.samples().iter().zip(&d).map(|(q, dq)| k.eval_ambient(q) * axis.cross(q).dot(&q.cross(dq))).sum();
        state.epsilon * s / u.len() as f64
    };
    r.column(1).into_inner() * de(2) - r.column(2).into_inner() * de(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub corrector: CorrectorOptions,
    pub gradient_step: f64,
    pub hessian_step: f64,
    pub dedupe_distance: f64,
    /// Spread of `Ẽ` over the seeds below which the landscape is flat.
    pub flat_tol: f64,
    pub max_descent_steps: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            corrector: CorrectorOptions::default(),
            gradient_step: 1e-4,
            hessian_step: 1e-3,
            dedupe_distance: 1e-3,
            flat_tol: 1e-9,
            max_descent_steps: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub z: UnitVec3,
    pub state: ReductionState,
    pub kind: CriticalKind,
    pub eigenvalues: [f64; 2],
    pub energy: f64,
    pub is_solution: bool,
    pub multiplier_norm: f64,
}

#[derive(Debug, Clone)]
pub struct SearchReport {
    pub epsilon: f64,
    pub points: Vec<CriticalPoint>,
    pub degenerate_landscape: bool,
    /// `max Ẽ - min Ẽ` over the seeds.
    pub landscape_spread: f64,
    /// On a flat landscape every corrected loop is a solution; this is the
    /// one at the first seed.
    pub representative: Option<ReductionState>,
    /// Seeds whose run failed, with the reason.
    pub failed_seeds: Vec<(usize, String)>,
}

struct Walker<'a> {
    eps: f64,
    k: &'a FieldSpec,
    opts: &'a SearchOptions,
    chart: Chart,
}

impl Walker<'_> {
    fn recenter(&mut self, z: &UnitVec3) {
        if !self.chart.covers(z) {
            self.chart = Chart::anchored_at(z);
        }
    }

    fn state(&self, z: &UnitVec3) -> Result<ReductionState> {
        solve_corrector(self.eps, &self.chart.rotation_at(z)?, self.k, &self.opts.corrector)
    }

    fn energy(&self, z: &UnitVec3) -> Result<f64> {
        energy_of(&self.state(z)?, self.k)
    }

    /// Armijo descent (`sign = -1`) or ascent (`+1`) on `Ẽ` with the
    /// central-difference gradient.
    fn climb(&mut self, z0: UnitVec3, sign: f64) -> Result<UnitVec3> {
        let mut z = z0;
        let mut f = self.energy(&z)?;
        let gtol = 1e-3 * self.eps.abs();
        for _ in 0..self.opts.max_descent_steps {
            let g =
                fd_chart_gradient(self.eps, &z, self.k, &self.opts.corrector, &self.chart, self.opts.gradient_step)?;
            let gn = g.norm();
            if gn <= gtol {
                break;
            }
            let mut len = 0.5_f64;
            let mut moved = false;
            while len > 1e-6 {
                let trial = z.exp(&(g * (sign * len / gn)));
                let ft = self.energy(&trial)?;
                if sign * (ft - f) >= 1e-4 * len * gn {
                    z = trial;
                    f = ft;
                    moved = true;
                    break;
                }
                len *= 0.5;
            }
            if !moved {
                break;
            }
            self.recenter(&z);
        }
        Ok(z)
    }

    fn gradient(&self, z: &UnitVec3) -> Result<(Vector3<f64>, ReductionState)> {
        let s = self.state(z)?;
        Ok((s.multiplier_gradient()?, s))
    }

    /// Symmetric chart Hessian by central differences of the multiplier
    /// gradient.
    fn hessian(&self, z: &UnitVec3, h: f64) -> Result<(Matrix2<f64>, Vector3<f64>, Vector3<f64>)> {
        let r = self.chart.rotation_at(z)?;
        let (t1, t2) = (r.column(1).into_inner(), r.column(2).into_inner());
        let mut cols = [Vector2::zeros(); 2];
        for (c, t) in cols.iter_mut().zip([&t1, &t2]) {
            let gp = self.gradient(&z.exp(&(t * h)))?.0;
            let gm = self.gradient(&z.exp(&(t * -h)))?.0;
            let d = (gp - gm) / (2.0 * h);
            *c = Vector2::new(d.dot(&t1), d.dot(&t2));
        }
        let off = 0.5 * (cols[0][1] + cols[1][0]);
        Ok((Matrix2::new(cols[0][0], off, off, cols[1][1]), t1, t2))
    }

    /// Newton on the multiplier gradient.
    fn polish(&mut self, z0: UnitVec3) -> Result<UnitVec3> {
        let mut z = z0;
        let target = 1e-3 * self.opts.corrector.solution_tol;
        for _ in 0..12 {
            let (g, s) = self.gradient(&z)?;
            if s.multipliers.norm() <= target {
                break;
            }
            let (h, t1, t2) = self.hessian(&z, 1e-4)?;
            let rhs = Vector2::new(g.dot(&t1), g.dot(&t2));
            let Some(step) = h.lu().solve(&(-rhs)) else { break };
            let mut v = t1 * step[0] + t2 * step[1];
            if v.norm() > 0.1 {
                v *= 0.1 / v.norm();
            }
            z = z.exp(&v);
            self.recenter(&z);
        }
        Ok(z)
    }
}

fn sym_eigenvalues(h: &Matrix2<f64>) -> [f64; 2] {
    let mean = 0.5 * (h[(0, 0)] + h[(1, 1)]);
    let diff = 0.5 * (h[(0, 0)] - h[(1, 1)]);
    let rad = (diff * diff + h[(0, 1)] * h[(0, 1)]).sqrt();
    [mean - rad, mean + rad]
}

/// Critical points of `Ẽ^ε` reachable from `seeds` by descent and ascent,
/// each polished by Newton on the multiplier gradient, deduplicated, and
/// classified by the chart Hessian.
pub fn critical_search(eps: f64, k: &FieldSpec, seeds: &[UnitVec3], opts: &SearchOptions) -> Result<SearchReport> {
    if seeds.is_empty() {
        return Err(Error::SearchFailure("no seeds given".into()));
    }
    let walker = |z: &UnitVec3| Walker { eps, k, opts, chart: Chart::anchored_at(z) };

    let initial: Vec<Result<ReductionState>> = seeds.par_iter().map(|z| walker(z).state(z)).collect();
    let mut energies = Vec::new();
    let mut failed_seeds = Vec::new();
    let mut representative = None;
    for (i, s) in initial.into_iter().enumerate() {
        match s.and_then(|s| energy_of(&s, k).map(|e| (e, s))) {
            Ok((e, s)) => {
                energies.push(e);
                representative.get_or_insert(s);
            }
            Err(e) => failed_seeds.push((i, e.to_string())),
        }
    }
    if energies.is_empty() {
        return Err(Error::SearchFailure(format!(
            "no seed converged: {}",
            failed_seeds.iter().map(|(i, m)| format!("seed {i}: {m}")).collect::<Vec<_>>().join("; ")
        )));
    }
    let (lo, hi) = energies.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    let spread = hi - lo;
    if spread <= opts.flat_tol {
        return Ok(SearchReport {
            epsilon: eps,
            points: Vec::new(),
            degenerate_landscape: true,
            landscape_spread: spread,
            representative,
            failed_seeds,
        });
    }

    let runs: Vec<(usize, Result<UnitVec3>)> = seeds
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, z)| {
            [-1.0, 1.0].into_iter().map(move |sign| {
                let mut w = walker(z);
                (i, w.climb(*z, sign).and_then(|c| w.polish(c)))
            })
        })
        .collect();

    let mut unique: Vec<UnitVec3> = Vec::new();
    for (i, r) in runs {
        match r {
            Ok(z) => {
                if unique.iter().all(|u| u.distance(&z) > opts.dedupe_distance) {
                    unique.push(z);
                }
            }
            Err(e) => failed_seeds.push((i, e.to_string())),
        }
    }
    failed_seeds.sort_by_key(|(i, _)| *i);
    failed_seeds.dedup_by_key(|(i, _)| *i);

    let points = unique
        .par_iter()
        .map(|z| -> Result<CriticalPoint> {
            let w = walker(z);
            let state = w.state(z)?;
            let (h, _, _) = w.hessian(z, opts.hessian_step)?;
            let eigenvalues = sym_eigenvalues(&h);
            let (is_solution, multiplier_norm) = criticality_check(&state, &opts.corrector);
            Ok(CriticalPoint {
                z: *z,
                energy: energy_of(&state, k)?,
                state,
                kind: CriticalKind::from_eigenvalues(eigenvalues),
                eigenvalues,
                is_solution,
                multiplier_norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SearchReport {
        epsilon: eps,
        points,
        degenerate_landscape: false,
        landscape_spread: spread,
        representative: None,
        failed_seeds,
    })
}
