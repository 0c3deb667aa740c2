//! Run configuration: JSON with a versioned `schema` field. Unknown keys are
//! rejected and every validation error names the line it refers to.

use nalgebra::DVector;
use serde::Deserialize;

use scatrel::checks::{shipped_potentials, CheckOptions, Selection};
use scatrel::potential::HessianFault;
use scatrel::{Bump, PotentialField, ScatteringConfig};

use crate::error::CliError;

pub const SCHEMA: &str = "scatrel/v1";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub scattering: ScatteringConfig,
    pub potential: Option<PotentialSpec>,
    pub trace: Option<TraceSpec>,
    pub relation: Option<RelationSpec>,
    pub solve: Option<SolveSpec>,
    pub amplitude: Option<AmplitudeSpec>,
    pub check: Option<CheckSpec>,
}

/// Either explicit bumps or the name of a shipped potential.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub bumps: Option<Vec<Bump>>,
    pub shipped: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub theta: Vec<f64>,
    pub z: Vec<f64>,
}

/// Tensor grid: `count[i]` points from `from[i]` to `to[i]` on axis i.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub count: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationSpec {
    pub theta: Vec<f64>,
    pub grid: GridSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSpec {
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeSpec {
    pub theta: Vec<f64>,
    pub omega: Option<Vec<f64>>,
    /// Explicit list of outgoing directions.
    pub omega_grid: Option<Vec<Vec<f64>>>,
    /// Planar fan: rotation angles of θ (two dimensions only).
    pub omega_angles: Option<RangeSpec>,
    pub h: Option<f64>,
    pub h_grid: Option<RangeSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub suite: String,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    /// Test hook: corrupt the potential Hessian.
    pub fault: Option<HessianFault>,
}

/// Parsed configuration plus the source text, kept for error locations.
pub struct Loaded {
    pub run: RunConfig,
    src: String,
}

pub fn load(src: &str) -> Result<Loaded, CliError> {
    let run: RunConfig = serde_json::from_str(src).map_err(|e| CliError::Config {
        line: e.line().max(1),
        message: strip_location(&e.to_string()),
    })?;
    let loaded = Loaded { run, src: src.to_string() };
    if loaded.run.schema != SCHEMA {
        return Err(loaded.err(&["schema"], format!("unsupported schema `{}` (expected `{SCHEMA}`)", loaded.run.schema)));
    }
    if let Err(e) = loaded.run.scattering.validate() {
        let msg = e.to_string();
        let key = ["lambda", "r0", "n", "tol_integrate", "tol_newton", "margin", "time_budget"]
            .into_iter()
            .find(|k| msg.contains(&format!("{k} must")))
            .unwrap_or("scattering");
        return Err(loaded.err(&["scattering", key], msg));
    }
    Ok(loaded)
}

/// serde_json appends " at line L column C"; the line is reported separately.
fn strip_location(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

impl Loaded {
    pub fn cfg(&self) -> &ScatteringConfig {
        &self.run.scattering
    }

    /// Error anchored at the first occurrence of the key path in the source.
    pub fn err(&self, path: &[&str], message: impl Into<String>) -> CliError {
        CliError::Config { line: locate(&self.src, path), message: message.into() }
    }

    pub fn block<'a, T>(&self, block: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        block.as_ref().ok_or_else(|| CliError::Config { line: 1, message: format!("missing `{name}` block") })
    }

    pub fn potential(&self) -> Result<PotentialField, CliError> {
        let n = self.cfg().n;
        let spec = self.block(&self.run.potential, "potential")?;
        let field = match (&spec.bumps, &spec.shipped) {
            (Some(bumps), None) => PotentialField::new(n, bumps.clone())
                .map_err(|e| self.err(&["potential", "bumps"], e.to_string()))?,
            (None, Some(name)) => shipped_potentials(n)
                .into_iter()
                .find(|(k, _)| k == name)
                .map(|(_, f)| f)
                .ok_or_else(|| {
                    self.err(&["potential", "shipped"], format!("unknown shipped potential `{name}` (expected repulsive, attractive or two_bump)"))
                })?,
            _ => return Err(self.err(&["potential"], "potential needs exactly one of `bumps` or `shipped`")),
        };
        self.cfg().validate_with(&field).map_err(|e| self.err(&["potential"], e.to_string()))?;
        Ok(field)
    }

    /// Unit vector of dimension n from a config array.
    pub fn direction(&self, path: &[&str], v: &[f64]) -> Result<DVector<f64>, CliError> {
        let n = self.cfg().n;
        if v.len() != n {
            return Err(self.err(path, format!("expected {n} components, got {}", v.len())));
        }
        let d = DVector::from_column_slice(v);
        let norm = d.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(self.err(path, "direction must be a finite non-zero vector"));
        }
        Ok(d / norm)
    }

    /// Impact parameter of dimension n − 1.
    pub fn impact(&self, path: &[&str], v: &[f64]) -> Result<DVector<f64>, CliError> {
        let n = self.cfg().n;
        if v.len() != n - 1 || v.iter().any(|x| !x.is_finite()) {
            return Err(self.err(path, format!("expected {} finite components, got {}", n - 1, v.len())));
        }
        Ok(DVector::from_column_slice(v))
    }

    pub fn grid_points(&self, path: &[&str], grid: &GridSpec) -> Result<Vec<DVector<f64>>, CliError> {
        let dim = self.cfg().n - 1;
        if grid.from.len() != dim || grid.to.len() != dim || grid.count.len() != dim {
            return Err(self.err(path, format!("grid `from`, `to` and `count` need {dim} entries each")));
        }
        if grid.count.contains(&0) || grid.from.iter().chain(&grid.to).any(|x| !x.is_finite()) {
            return Err(self.err(path, "grid counts must be positive and bounds finite"));
        }
        let axes: Vec<Vec<f64>> = (0..dim).map(|i| linspace(grid.from[i], grid.to[i], grid.count[i])).collect();
        let mut points = vec![Vec::new()];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        Ok(points.into_iter().map(DVector::from_vec).collect())
    }

    pub fn range(&self, path: &[&str], r: &RangeSpec) -> Result<Vec<f64>, CliError> {
        if r.count == 0 || !r.from.is_finite() || !r.to.is_finite() {
            return Err(self.err(path, "range needs a positive count and finite bounds"));
        }
        Ok(linspace(r.from, r.to, r.count))
    }

    pub fn check_selection(&self, spec: &CheckSpec) -> Result<(Selection, CheckOptions), CliError> {
        let selection: Selection = spec.suite.parse().map_err(|e: scatrel::ScatError| self.err(&["check", "suite"], e.to_string()))?;
        let defaults = CheckOptions::default();
        let samples = spec.samples.unwrap_or(defaults.samples);
        if samples == 0 {
            return Err(self.err(&["check", "samples"], "samples must be positive"));
        }
        Ok((selection, CheckOptions { samples, seed: spec.seed.unwrap_or(defaults.seed) }))
    }
}

fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect()
}

/// 1-based line of the last key in `path`, searched after each parent key.
fn locate(src: &str, path: &[&str]) -> usize {
    let mut pos = 0;
    for key in path {
        match src[pos..].find(&format!("\"{key}\"")) {
            Some(i) => pos += i,
            None => break,
        }
    }
    src[..pos].matches('\n').count() + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
  "schema": "scatrel/v1",
  "scattering": {
    "lambda": 0.5,
    "r0": 2.0,
    "n": 2
  },
  "potential": { "shipped": "repulsive" }
}"#;

    fn line_of(err: CliError) -> usize {
        match err {
            CliError::Config { line, .. } => line,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn base_config_loads() {
        let l = load(BASE).unwrap();
        assert_eq!(l.cfg().n, 2);
        assert!(l.potential().unwrap().as_central().is_some());
    }

    #[test]
    fn negative_lambda_points_at_its_line() {
        let src = BASE.replace("\"lambda\": 0.5", "\"lambda\": -0.5");
        assert_eq!(line_of(load(&src).err().unwrap()), 4);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let src = BASE.replace("\"r0\": 2.0,", "\"r0\": 2.0,\n    \"lamda\": 1.0,");
        let err = load(&src).err().unwrap();
        assert!(err.to_string().contains("lamda"), "{err}");
        assert_eq!(line_of(err), 6);
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let src = BASE.replace("scatrel/v1", "scatrel/v0");
        assert_eq!(line_of(load(&src).err().unwrap()), 2);
    }

    #[test]
    fn grid_is_a_tensor_product() {
        let src = BASE.replace("\"n\": 2", "\"n\": 3");
        let l = load(&src).unwrap();
        let g = GridSpec { from: vec![0.0, -1.0], to: vec![1.0, 1.0], count: vec![2, 3] };
        let pts = l.grid_points(&["relation"], &g).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1].as_slice(), &[0.0, 0.0]);
        assert_eq!(pts[5].as_slice(), &[1.0, 1.0]);
    }
}
