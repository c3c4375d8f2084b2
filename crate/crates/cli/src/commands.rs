use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use maggeo::functionals::{self, SolutionDiagnostics};
use maggeo::loops::phase_align_distance;
use maggeo::melnikov::{self, CriticalKind, DistinctnessReport, MelnikovReport};
use maggeo::reduction::{self, ReducedEnergySample, ReductionState, SearchReport};
use maggeo::shooting::{self, CrossValidation};
use maggeo::sphere::fibonacci_sphere;
use maggeo::Loop;

use crate::report::*;
use crate::{CliError, RunConfig};

/// Grid used to search for great circles on which `K` vanishes.
pub const DISTINCTNESS_GRID: usize = 500;
/// Phase-aligned distance below which two loops are the same curve.
pub const SAME_CURVE_TOL: f64 = 1e-6;

/// Text for stdout plus the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { stdout, code: 0 }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn read_loop(path: &Path) -> Result<Loop, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    Loop::from_csv(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn first_epsilon(cfg: &RunConfig) -> f64 {
    cfg.epsilon[0]
}

/// `ε` as it appears in file names.
pub fn eps_tag(eps: f64) -> String {
    format!("{eps}")
}

// ---------------------------------------------------------------- melnikov-scan

pub struct MelnikovScan {
    pub report: MelnikovReport,
    pub distinctness: DistinctnessReport,
}

pub fn melnikov_scan(cfg: &RunConfig) -> Result<MelnikovScan, CliError> {
    let seeds = fibonacci_sphere(cfg.seeds);
    let report = melnikov::find_stable_critical_points(&cfg.field, &|_| true, &seeds, &cfg.melnikov_quad)?;
    let distinctness = melnikov::distinctness_check(&cfg.field, DISTINCTNESS_GRID);
    Ok(MelnikovScan { report, distinctness })
}

pub fn cmd_melnikov_scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let scan = melnikov_scan(cfg)?;
    let field = cfg.field.description().to_string();
    let points = CriticalPointsDoc {
        field: field.clone(),
        grid_size: scan.report.grid.len(),
        constant_landscape: scan.report.constant_landscape,
        critical_points: scan
            .report
            .critical_points
            .iter()
            .map(|c| MelnikovPointDoc {
                z: vec3(&c.z),
                value: Real(c.value),
                kind: c.kind.name(),
                eigenvalues: [Real(c.eigenvalues[0]), Real(c.eigenvalues[1])],
                gradient_norm: Real(c.gradient_norm),
                conditioning: Real(c.conditioning),
                persists: c.persists,
            })
            .collect(),
    };
    let distinct = DistinctnessDoc {
        field,
        condition_holds: scan.distinctness.condition_holds,
        candidate_axes: scan
            .distinctness
            .candidate_axes
            .iter()
            .map(|a| AxisDoc {
                axis: vec3(&a.axis),
                f_plus: Real(a.f_plus),
                f_minus: Real(a.f_minus),
                residual: Real(a.residual),
            })
            .collect(),
    };
    let dir = &cfg.output_dir;
    write_file(dir, "melnikov_grid.csv", &scan.report.grid_csv())?;
    write_file(dir, "critical_points.json", &to_json(&points))?;
    write_file(dir, "distinctness.json", &to_json(&distinct))?;

    let mut out = String::new();
    if scan.report.constant_landscape {
        writeln!(out, "F_K is constant on the sphere: degenerate landscape, no isolated critical points").unwrap();
    }
    for c in &scan.report.critical_points {
        writeln!(
            out,
            "{:<10} z = ({:.16e}, {:.16e}, {:.16e})  F = {:.16e}",
            c.kind.name(),
            c.z.x,
            c.z.y,
            c.z.z,
            c.value
        )
        .unwrap();
    }
    writeln!(
        out,
        "distinctness condition {} ({} vanishing circle(s))",
        if scan.distinctness.condition_holds { "holds" } else { "violated" },
        scan.distinctness.candidate_axes.len()
    )
    .unwrap();
    Ok(Outcome::ok(out))
}

// ---------------------------------------------------------------- solve

/// One listed solution with its diagnostics and shooting cross-check.
pub struct Solution {
    pub state: ReductionState,
    pub kind: Option<CriticalKind>,
    pub energy: f64,
    pub diagnostics: SolutionDiagnostics,
    pub oracle: Result<CrossValidation, maggeo::Error>,
    pub distinct_pair: bool,
    pub same_trace_reversed: bool,
}

pub struct SolveRun {
    pub epsilon: f64,
    pub search: SearchReport,
    pub solutions: Vec<Solution>,
    pub note: Option<String>,
}

fn build_solution(
    state: ReductionState,
    kind: Option<CriticalKind>,
    energy: f64,
    cfg: &RunConfig,
) -> Result<Solution, CliError> {
    let diagnostics = functionals::solution_diagnostics(&state.corrected_loop, &cfg.field, state.epsilon)?;
    let oracle = shooting::cross_validate(&state, &cfg.field, &cfg.shooting_options());
    Ok(Solution { state, kind, energy, diagnostics, oracle, distinct_pair: false, same_trace_reversed: false })
}

/// Two solutions are distinct when neither is an orientation-preserving
/// reparametrization of the other.
fn mark_pairs(solutions: &mut [Solution]) -> Result<(), CliError> {
    let n = solutions.len();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (u, v) = (&solutions[i].state.corrected_loop, &solutions[j].state.corrected_loop);
            let same = phase_align_distance(u, v)?.0 <= SAME_CURVE_TOL;
            let reversed = phase_align_distance(u, &v.reversed())?.0 <= SAME_CURVE_TOL;
            if !same {
                solutions[i].distinct_pair = true;
            }
            if reversed {
                solutions[i].same_trace_reversed = true;
            }
        }
    }
    Ok(())
}

pub fn solve_epsilon(cfg: &RunConfig, eps: f64) -> Result<SolveRun, CliError> {
    let opts = cfg.search_options();
    let seeds = fibonacci_sphere(cfg.seeds);
    let search = reduction::critical_search(eps, &cfg.field, &seeds, &opts)?;
    let mut solutions = Vec::new();
    let mut note = None;
    if search.degenerate_landscape {
        note = Some(if cfg.field.degree() == 0 {
            let kappa = eps * cfg.field.eval(&maggeo::UnitVec3::e3());
            format!(
                "flat landscape: every corrected loop is a solution, the family of circles of geodesic curvature {kappa:.16e}"
            )
        } else {
            "flat landscape: every corrected loop is a solution".to_string()
        });
        if let Some(state) = search.representative.clone() {
            let (critical, _) = reduction::criticality_check(&state, &opts.corrector);
            if critical && state.corrected_loop.is_embedded() {
                let pole = state.center.antipode();
                let energy = functionals::energy(&pole, &state.corrected_loop, &cfg.field, eps)?.energy;
                solutions.push(build_solution(state, None, energy, cfg)?);
            }
        }
    } else {
        for p in &search.points {
            if p.is_solution && p.state.corrected_loop.is_embedded() {
                solutions.push(build_solution(p.state.clone(), Some(p.kind), p.energy, cfg)?);
            }
        }
    }
    mark_pairs(&mut solutions)?;
    Ok(SolveRun { epsilon: eps, search, solutions, note })
}

pub fn solution_file(eps: f64, k: usize) -> String {
    format!("solve_eps{}_sol{k}.csv", eps_tag(eps))
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut runs = Vec::new();
    let mut out = String::new();
    let mut failures = Vec::new();
    for &eps in &cfg.epsilon {
        let run = solve_epsilon(cfg, eps)?;
        let mut docs = Vec::new();
        for (k, s) in run.solutions.iter().enumerate() {
            let file = solution_file(eps, k);
            write_file(&cfg.output_dir, &file, &s.state.corrected_loop.to_csv())?;
            let d = &s.diagnostics;
            docs.push(SolutionDoc {
                file,
                center: vec3(&s.state.center),
                classification: s.kind.map_or("degenerate", |k| k.name()),
                energy: Real(s.energy),
                residual: Real(d.residual_sup),
                multiplier_norm: Real(s.state.multipliers.norm()),
                curvature_error: Real(d.curvature_error),
                speed_cv: Real(d.speed_cv),
                embedded: d.embedded,
                oracle_distance: s.oracle.as_ref().ok().map(|o| Real(o.distance)),
                oracle_closure_error: s.oracle.as_ref().ok().map(|o| Real(o.orbit.closure_error)),
                distinct_pair: s.distinct_pair,
                same_trace_reversed: s.same_trace_reversed,
            });
            writeln!(
                out,
                "eps={} sol{k}: {} center=({:.16e}, {:.16e}, {:.16e}) residual={:.3e} oracle={}",
                eps_tag(eps),
                s.kind.map_or("degenerate", |k| k.name()),
                s.state.center.x,
                s.state.center.y,
                s.state.center.z,
                d.residual_sup,
                match &s.oracle {
                    Ok(o) => format!("{:.3e}", o.distance),
                    Err(e) => format!("failed ({e})"),
                }
            )
            .unwrap();
        }
        if let Some(note) = &run.note {
            writeln!(out, "eps={}: {note}", eps_tag(eps)).unwrap();
        }
        for (seed, reason) in &run.search.failed_seeds {
            failures.push(format!("eps={} seed {seed}: {reason}", eps_tag(eps)));
        }
        runs.push(RunDoc {
            epsilon: Real(eps),
            degenerate_landscape: run.search.degenerate_landscape,
            landscape_spread: Real(run.search.landscape_spread),
            note: run.note.clone(),
            solutions: docs,
            failed_seeds: run
                .search
                .failed_seeds
                .iter()
                .map(|(seed, reason)| FailedSeedDoc { seed: *seed, reason: reason.clone() })
                .collect(),
        });
    }
    let doc = SolveReportDoc {
        field: cfg.field.description().to_string(),
        loop_points: cfg.loop_points,
        seeds: cfg.seeds,
        runs,
    };
    write_file(&cfg.output_dir, "solve_report.json", &to_json(&doc))?;
    if !failures.is_empty() {
        return Err(CliError::divergence(format!("corrector diverged:\n{}", failures.join("\n"))));
    }
    Ok(Outcome::ok(out))
}

// ---------------------------------------------------------------- shoot

pub fn cmd_shoot(cfg: &RunConfig, loop_file: &Path) -> Result<Outcome, CliError> {
    let u = read_loop(loop_file)?;
    let eps = first_epsilon(cfg);
    let x = shooting::cross_validate_loop(&u, &cfg.field, eps, &cfg.shooting_options())?;
    let doc = ShootDoc {
        epsilon: Real(eps),
        speed: Real(x.speed),
        period: Real(x.period),
        expected_period: Real(x.expected_period),
        period_rel_error: Real(x.period_rel_error),
        closure_error: Real(x.orbit.closure_error),
        speed_drift: Real(x.orbit.speed_drift),
        iterations: x.orbit.iterations,
        oracle_distance: Real(x.distance),
    };
    write_file(&cfg.output_dir, "shoot_orbit.csv", &x.orbit.samples.to_csv())?;
    write_file(&cfg.output_dir, "shoot_report.json", &to_json(&doc))?;
    Ok(Outcome::ok(format!(
        "period {:.16e} (expected {:.16e}), closure {:.3e}, oracle distance {:.3e}\n",
        x.period, x.expected_period, x.orbit.closure_error, x.distance
    )))
}

// ---------------------------------------------------------------- verify

pub fn verify(cfg: &RunConfig, u: &Loop) -> Result<VerifyDoc, CliError> {
    let eps = first_epsilon(cfg);
    let d = functionals::solution_diagnostics(u, &cfg.field, eps)?;
    Ok(VerifyDoc {
        epsilon: Real(eps),
        points: u.len(),
        residual: Real(d.residual_sup),
        speed_cv: Real(d.speed_cv),
        curvature_error: Real(d.curvature_error),
        embedded: d.embedded,
        energy: EnergyDoc {
            length: Real(d.energy.length),
            area: Real(d.energy.area),
            epsilon: Real(d.energy.epsilon),
            energy: Real(d.energy.energy),
            pole: vec3(&d.pole),
        },
    })
}

pub fn cmd_verify(cfg: &RunConfig, loop_file: &Path) -> Result<Outcome, CliError> {
    let u = read_loop(loop_file)?;
    let doc = verify(cfg, &u)?;
    let text = to_json(&doc);
    write_file(&cfg.output_dir, "verify_report.json", &text)?;
    Ok(Outcome::ok(text))
}

// ---------------------------------------------------------------- landscape

pub fn landscape(cfg: &RunConfig, eps: f64) -> Result<Vec<ReducedEnergySample>, CliError> {
    let grid = fibonacci_sphere(cfg.seeds);
    reduction::landscape(eps, &grid, &cfg.field, &cfg.corrector_options())
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(CliError::from)
}

pub fn landscape_csv(samples: &[ReducedEnergySample]) -> String {
    let mut out = String::from("z_x,z_y,z_z,E,E0\n");
    for s in samples {
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", s.z.x, s.z.y, s.z.z, s.energy, s.leading).unwrap();
    }
    out
}

pub fn landscape_file(cfg: &RunConfig, eps: f64) -> String {
    if cfg.epsilon.len() == 1 {
        "landscape.csv".to_string()
    } else {
        format!("landscape_eps{}.csv", eps_tag(eps))
    }
}

pub fn cmd_landscape(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = String::new();
    for &eps in &cfg.epsilon {
        let samples = landscape(cfg, eps)?;
        let gap = samples.iter().map(|s| (s.energy - s.leading).abs()).fold(0.0, f64::max);
        let file = landscape_file(cfg, eps);
        write_file(&cfg.output_dir, &file, &landscape_csv(&samples))?;
        writeln!(out, "eps={}: {} points, max |E - E0| = {gap:.3e} -> {file}", eps_tag(eps), samples.len()).unwrap();
    }
    Ok(Outcome::ok(out))
}
