//! Serializable summaries. Every real is written with 17 significant digits.

use std::str::FromStr;

use maggeo::UnitVec3;
use serde::{Serialize, Serializer};

/// A real printed as `{:.16e}`; non-finite values become `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let n = serde_json::Number::from_str(&format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        n.serialize(s)
    }
}

pub fn vec3(z: &UnitVec3) -> [Real; 3] {
    [Real(z.x), Real(z.y), Real(z.z)]
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types always serialize");
    text.push('\n');
    text
}

#[derive(Debug, Clone, Serialize)]
pub struct MelnikovPointDoc {
    pub z: [Real; 3],
    pub value: Real,
    pub kind: &'static str,
    pub eigenvalues: [Real; 2],
    pub gradient_norm: Real,
    pub conditioning: Real,
    pub persists: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPointsDoc {
    pub field: String,
    pub grid_size: usize,
    pub constant_landscape: bool,
    pub critical_points: Vec<MelnikovPointDoc>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxisDoc {
    pub axis: [Real; 3],
    pub f_plus: Real,
    pub f_minus: Real,
    pub residual: Real,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistinctnessDoc {
    pub field: String,
    pub condition_holds: bool,
    pub candidate_axes: Vec<AxisDoc>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyDoc {
    pub length: Real,
    pub area: Real,
    pub epsilon: Real,
    pub energy: Real,
    pub pole: [Real; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionDoc {
    pub file: String,
    pub center: [Real; 3],
    pub classification: &'static str,
    pub energy: Real,
    pub residual: Real,
    pub multiplier_norm: Real,
    pub curvature_error: Real,
    pub speed_cv: Real,
    pub embedded: bool,
    /// Phase-aligned sup distance to the shooting orbit; `null` if shooting failed.
    pub oracle_distance: Option<Real>,
    pub oracle_closure_error: Option<Real>,
    pub distinct_pair: bool,
    /// Another listed solution traces the same curve in the opposite direction.
    pub same_trace_reversed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunDoc {
    pub epsilon: Real,
    pub degenerate_landscape: bool,
    pub landscape_spread: Real,
    pub note: Option<String>,
    pub solutions: Vec<SolutionDoc>,
    pub failed_seeds: Vec<FailedSeedDoc>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailedSeedDoc {
    pub seed: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReportDoc {
    pub field: String,
    pub loop_points: usize,
    pub seeds: usize,
    pub runs: Vec<RunDoc>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShootDoc {
    pub epsilon: Real,
    pub speed: Real,
    pub period: Real,
    pub expected_period: Real,
    pub period_rel_error: Real,
    pub closure_error: Real,
    pub speed_drift: Real,
    pub iterations: usize,
    pub oracle_distance: Real,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyDoc {
    pub epsilon: Real,
    pub points: usize,
    pub residual: Real,
    pub speed_cv: Real,
    pub curvature_error: Real,
    pub embedded: bool,
    pub energy: EnergyDoc,
}
