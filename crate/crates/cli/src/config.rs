use std::path::{Path, PathBuf};

use maggeo::field::{Monomial, Preset};
use maggeo::melnikov::CapQuadrature;
use maggeo::reduction::{CorrectorOptions, SearchOptions};
use maggeo::shooting::ShootingOptions;
use maggeo::FieldSpec;
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

/// The `field` entry: `{"type":"polynomial","terms":[{"exps":[a,b,c],"coef":r},...]}`
/// or `{"type":"preset","name":...}`. An all-zero polynomial is `K ≡ 0`.
pub fn parse_field(doc: &Value) -> Result<FieldSpec, CliError> {
    let bad = |msg: &str| CliError::config(format!("field: {msg}"));
    let obj = doc.as_object().ok_or_else(|| bad("expected an object"))?;
    match obj.get("type").and_then(Value::as_str) {
        Some("preset") => {
            check_keys(obj, &["type", "name"], "field")?;
            let name = obj.get("name").and_then(Value::as_str).ok_or_else(|| bad("preset needs a name"))?;
            Preset::from_name(name).map(FieldSpec::preset).ok_or_else(|| bad(&format!("unknown preset {name:?}")))
        }
        Some("polynomial") => {
            check_keys(obj, &["type", "terms"], "field")?;
            let terms = obj.get("terms").and_then(Value::as_array).ok_or_else(|| bad("polynomial needs terms"))?;
            let terms: Vec<Monomial> = terms
                .iter()
                .map(|t| serde_json::from_value::<TermDoc>(t.clone()).map(|t| Monomial { exps: t.exps, coef: t.coef }))
                .collect::<Result<_, _>>()
                .map_err(|e| bad(&e.to_string()))?;
            if terms.iter().all(|t| t.coef == 0.0) {
                return Ok(FieldSpec::zero());
            }
            FieldSpec::polynomial(&terms).map_err(|e| bad(&e.to_string()))
        }
        _ => Err(bad("type must be \"polynomial\" or \"preset\"")),
    }
}

fn check_keys(obj: &serde_json::Map<String, Value>, allowed: &[&str], what: &str) -> Result<(), CliError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(CliError::config(format!("{what}: unknown key {k:?}"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct TermDoc {
    exps: [u32; 3],
    coef: f64,
}

fn parse_epsilon(doc: &Value) -> Result<Vec<f64>, CliError> {
    let num = |v: &Value| v.as_f64().ok_or_else(|| CliError::config(format!("epsilon: {v} is not a number")));
    match doc {
        Value::Array(list) => list.iter().map(num).collect(),
        v => Ok(vec![num(v)?]),
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub corrector: f64,
    pub solution: f64,
    pub shooting: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { corrector: 1e-10, solution: 1e-8, shooting: 1e-8 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    field: Value,
    epsilon: Value,
    #[serde(default = "default_points")]
    loop_points: usize,
    #[serde(default = "default_quad")]
    melnikov_quad: (usize, usize),
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default = "default_seeds")]
    seeds: usize,
    #[serde(default = "default_out")]
    output_dir: PathBuf,
}

fn default_points() -> usize {
    256
}

fn default_quad() -> (usize, usize) {
    (24, 64)
}

fn default_seeds() -> usize {
    32
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line values that take precedence over the document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub epsilon: Option<Vec<f64>>,
    pub loop_points: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub field: FieldSpec,
    pub epsilon: Vec<f64>,
    pub loop_points: usize,
    pub melnikov_quad: CapQuadrature,
    pub tolerances: Tolerances,
    pub seeds: usize,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))?;
        let epsilon = match &overrides.epsilon {
            Some(list) => list.clone(),
            None => parse_epsilon(&raw.epsilon)?,
        };
        if epsilon.is_empty() {
            return Err(CliError::config("epsilon: empty list"));
        }
        // ε = 0 is accepted so that the unperturbed landscape can be emitted.
        if let Some(e) = epsilon.iter().find(|e| !(0.0..=0.5).contains(*e)) {
            return Err(CliError::config(format!("epsilon: {e} is outside [0, 0.5]")));
        }
        let loop_points = overrides.loop_points.unwrap_or(raw.loop_points);
        if loop_points < 32 || !loop_points.is_multiple_of(2) {
            return Err(CliError::config(format!("loop_points: {loop_points} must be even and at least 32")));
        }
        let (m, n) = raw.melnikov_quad;
        let melnikov_quad = CapQuadrature::new(m, n).map_err(|e| CliError::config(format!("melnikov_quad: {e}")))?;
        let t = raw.tolerances;
        if [t.corrector, t.solution, t.shooting].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(CliError::config("tolerances must be positive"));
        }
        if raw.seeds == 0 {
            return Err(CliError::config("seeds: must be at least 1"));
        }
        Ok(Self {
            field: parse_field(&raw.field)?,
            epsilon,
            loop_points,
            melnikov_quad,
            tolerances: t,
            seeds: raw.seeds,
            output_dir: overrides.output_dir.clone().unwrap_or(raw.output_dir),
        })
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn corrector_options(&self) -> CorrectorOptions {
        CorrectorOptions {
            points: self.loop_points,
            tol: self.tolerances.corrector,
            solution_tol: self.tolerances.solution,
            ..CorrectorOptions::default()
        }
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions { corrector: self.corrector_options(), ..SearchOptions::default() }
    }

    pub fn shooting_options(&self) -> ShootingOptions {
        ShootingOptions { tol: self.tolerances.shooting, ..ShootingOptions::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"field":{"type":"preset","name":"linear_z"},"epsilon":0.05}"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse(MINIMAL, &Overrides::default()).unwrap();
        assert_eq!(c.epsilon, vec![0.05]);
        assert_eq!(c.loop_points, 256);
        assert_eq!(c.melnikov_quad.size(), (24, 64));
        assert_eq!(c.seeds, 32);
        assert_eq!(c.tolerances, Tolerances::default());
    }

    #[test]
    fn flags_take_precedence() {
        let o =
            Overrides { epsilon: Some(vec![0.1, 0.025]), loop_points: Some(64), output_dir: Some("elsewhere".into()) };
        let c = RunConfig::parse(MINIMAL, &o).unwrap();
        assert_eq!(c.epsilon, vec![0.1, 0.025]);
        assert_eq!(c.loop_points, 64);
        assert_eq!(c.output_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn polynomial_field_and_list() {
        let text = r#"{"field":{"type":"polynomial","terms":[{"exps":[1,1,0],"coef":2.0}]},
                       "epsilon":[0.1,0.05],"melnikov_quad":[32,96],"tolerances":{"solution":1e-7}}"#;
        let c = RunConfig::parse(text, &Overrides::default()).unwrap();
        assert_eq!(c.field.eval(&maggeo::UnitVec3::e1()), 0.0);
        assert_eq!(c.field.degree(), 2);
        assert_eq!(c.tolerances.solution, 1e-7);
        assert_eq!(c.tolerances.corrector, 1e-10);
        assert_eq!(c.melnikov_quad.size(), (32, 96));
    }

    #[test]
    fn empty_polynomial_is_the_zero_field() {
        let text = r#"{"field":{"type":"polynomial","terms":[]},"epsilon":0.1}"#;
        assert!(RunConfig::parse(text, &Overrides::default()).unwrap().field.is_zero());
    }

    #[test]
    fn rejects_bad_documents() {
        for text in [
            r#"{"field":{"type":"preset","name":"nope"},"epsilon":0.05}"#,
            r#"{"field":{"type":"polynomial"},"epsilon":0.05}"#,
            r#"{"field":{"type":"preset","name":"linear_z"},"epsilon":0.7}"#,
            r#"{"field":{"type":"preset","name":"linear_z"},"epsilon":0.05,"loop_points":31}"#,
            r#"{"field":{"type":"preset","name":"linear_z"},"epsilon":0.05,"bogus":1}"#,
            r#"{"field":"#,
        ] {
            let err = RunConfig::parse(text, &Overrides::default()).unwrap_err();
            assert_eq!(err.code, 2, "{text}");
        }
    }
}
