//! Scenario files.
//!
//! A scenario is a TOML document with four tables:
//!
//! ```toml
//! name = "maglev"
//!
//! [model]
//! a = [[0.0, 1.0], [4.0, 0.0]]
//! b = [[0.0], [1.0]]
//! c = [[1.0, 0.0]]
//!
//! [weights]
//! q = "identity"
//! r = [[1.0]]
//! w = { identity = 100.0 }
//! v = [[0.1]]
//!
//! [trigger]
//! sigma = 0.75
//! epsilon = 0.01
//!
//! [sim]
//! step = 1e-4
//! horizon = 10.0
//! x0 = [-1.0, 0.0]
//! ```
//!
//! A matrix is a list of rows, `"identity"`, `{ identity = s }` or
//! `{ csv = "file.csv" }` (rows of numbers, no header, relative to the
//! scenario file). Instead of `a`, `b`, `c` the model table may hold
//! `identify = { dataset = "record.csv" }`, which runs ERA on a `t,u,y`
//! record and uses the continuous-time equivalent of the result.

use std::fs;
use std::path::{Path, PathBuf};

use etcontrol::design::DesignWeights;
use etcontrol::model::LtiModel;
use etcontrol::numerics::{Matrix, Vector};
use etcontrol::sim::{SimConfig, TriggerPolicy};
use etcontrol::sysid::{identify, EraConfig, EraDataset};
use serde::{Deserialize, Serialize};

use crate::CliError;

const BUNDLED: [(&str, &str); 3] = [
    ("maglev", include_str!("../scenarios/maglev.toml")),
    ("mass-spring", include_str!("../scenarios/mass-spring.toml")),
    ("ieee13", include_str!("../scenarios/ieee13.toml")),
];

/// Names of the scenarios compiled into the binary.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(name, _)| *name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Keyword(String),
    Identity { identity: f64 },
    Csv { csv: PathBuf },
}

impl MatrixSpec {
    fn identity() -> Self {
        MatrixSpec::Keyword("identity".into())
    }

    fn rows(m: &Matrix) -> Self {
        MatrixSpec::Rows(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    /// `dim` sizes the identity forms.
    fn resolve(&self, field: &str, dim: Option<usize>, base: &Path) -> Result<Matrix, CliError> {
        let need_dim = || {
            dim.ok_or_else(|| CliError::config(field, "an identity matrix needs a known size; give explicit rows"))
        };
        match self {
            MatrixSpec::Rows(rows) => matrix_from_rows(field, rows),
            MatrixSpec::Keyword(k) if k == "identity" => {
                let n = need_dim()?;
                Ok(Matrix::identity(n, n))
            }
            MatrixSpec::Keyword(k) => Err(CliError::config(field, format!("unknown matrix keyword `{k}`"))),
            MatrixSpec::Identity { identity } => {
                let n = need_dim()?;
                Ok(Matrix::identity(n, n) * *identity)
            }
            MatrixSpec::Csv { csv } => {
                let path = base.join(csv);
                let mut rdr = csv::ReaderBuilder::new()
                    .has_headers(false)
                    .trim(csv::Trim::All)
                    .from_path(&path)
                    .map_err(|e| CliError::config(field, format!("{}: {e}", path.display())))?;
                let mut rows = Vec::new();
                for (i, record) in rdr.records().enumerate() {
                    let record = record.map_err(|e| CliError::config(field, format!("{}: {e}", path.display())))?;
                    let row = record
                        .iter()
                        .map(|s| s.parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| CliError::config(field, format!("{} line {}: {e}", path.display(), i + 1)))?;
                    rows.push(row);
                }
                matrix_from_rows(field, &rows)
            }
        }
    }
}

fn matrix_from_rows(field: &str, rows: &[Vec<f64>]) -> Result<Matrix, CliError> {
    let Some(first) = rows.first() else { return Err(CliError::config(field, "matrix has no rows")) };
    let cols = first.len();
    if cols == 0 {
        return Err(CliError::config(field, "matrix has empty rows"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(CliError::config(field, format!("row {} has {} entries, expected {cols}", i + 1, rows[i].len())));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::config(field, "matrix entries must be finite"));
    }
    Ok(Matrix::from_row_iterator(rows.len(), cols, rows.iter().flatten().copied()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub model: ModelSection,
    #[serde(default)]
    pub weights: WeightsSection,
    pub trigger: TriggerSection,
    pub sim: SimSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<MatrixSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<MatrixSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<MatrixSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identify: Option<IdentifySection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifySection {
    pub dataset: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hankel_blocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    #[serde(default = "MatrixSpec::identity")]
    pub q: MatrixSpec,
    #[serde(default = "MatrixSpec::identity")]
    pub r: MatrixSpec,
    #[serde(default = "MatrixSpec::identity")]
    pub w: MatrixSpec,
    #[serde(default = "MatrixSpec::identity")]
    pub v: MatrixSpec,
}

impl Default for WeightsSection {
    fn default() -> Self {
        Self { q: MatrixSpec::identity(), r: MatrixSpec::identity(), w: MatrixSpec::identity(), v: MatrixSpec::identity() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSection {
    pub sigma: f64,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_tilde: Option<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub step: f64,
    pub horizon: f64,
    pub x0: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xhat0: Option<Vec<f64>>,
    #[serde(default)]
    pub policy: TriggerPolicy,
    #[serde(default)]
    pub delay: f64,
}

/// Where the model came from.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Literal,
    Identified { dataset: PathBuf, order: usize, fit: f64 },
}

/// A fully resolved scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub model: LtiModel,
    pub source: ModelSource,
    pub weights: DesignWeights,
    pub sigma: f64,
    pub epsilon: f64,
    pub q_tilde: Option<Matrix>,
    pub sim: SimConfig,
}

/// Command-line adjustments applied on top of a scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub policy: Option<TriggerPolicy>,
    pub delay: Option<f64>,
    pub horizon: Option<f64>,
    pub step: Option<f64>,
}

impl Scenario {
    /// Loads a bundled scenario by name, or a scenario file by path.
    pub fn load(name_or_path: &str) -> Result<Self, CliError> {
        if let Some((_, text)) = BUNDLED.iter().find(|(name, _)| *name == name_or_path) {
            return Self::parse(text, Path::new("."), name_or_path);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            let names: Vec<_> = bundled_names().collect();
            return Err(CliError::Config(format!(
                "`{name_or_path}` is neither a bundled scenario ({}) nor an existing file",
                names.join(", ")
            )));
        }
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, &path.display().to_string())
    }

    /// Parses scenario text; `base` anchors relative file references and
    /// `origin` names the source in error messages.
    pub fn parse(text: &str, base: &Path, origin: &str) -> Result<Self, CliError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        Self::from_file(&file, base)
    }

    pub fn from_file(file: &ScenarioFile, base: &Path) -> Result<Self, CliError> {
        let (model, source) = resolve_model(&file.model, base)?;
        let (n, m, p) = (model.states(), model.inputs(), model.outputs());
        let weights = DesignWeights {
            q: sized(file.weights.q.resolve("weights.q", Some(n), base)?, "weights.q", n)?,
            r: sized(file.weights.r.resolve("weights.r", Some(m), base)?, "weights.r", m)?,
            w: sized(file.weights.w.resolve("weights.w", Some(n), base)?, "weights.w", n)?,
            v: sized(file.weights.v.resolve("weights.v", Some(p), base)?, "weights.v", p)?,
        };
        let q_tilde = match &file.trigger.q_tilde {
            Some(spec) => Some(sized(spec.resolve("trigger.q_tilde", Some(2 * n), base)?, "trigger.q_tilde", 2 * n)?),
            None => None,
        };
        let x0 = state_vector("sim.x0", &file.sim.x0, n)?;
        let xhat0 = match &file.sim.xhat0 {
            Some(v) => state_vector("sim.xhat0", v, n)?,
            None => Vector::zeros(n),
        };
        let mut sim = SimConfig::new(file.sim.step, file.sim.horizon, x0, xhat0);
        sim.policy = file.sim.policy;
        sim.delay = file.sim.delay;
        let scenario = Scenario {
            name: file.name.clone(),
            description: file.description.clone(),
            model,
            source,
            weights,
            sigma: file.trigger.sigma,
            epsilon: file.trigger.epsilon,
            q_tilde,
            sim,
        };
        scenario.check()?;
        Ok(scenario)
    }

    fn check(&self) -> Result<(), CliError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(CliError::config("name", "must be a non-empty file-name-safe string"));
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(CliError::config("trigger.sigma", format!("{} is outside (0, 1]", self.sigma)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(CliError::config("trigger.epsilon", format!("{} must be non-negative", self.epsilon)));
        }
        self.sim
            .steps()
            .map_err(|e| CliError::config("sim.step / sim.horizon", e.to_string()))?;
        self.sim.delay_steps().map_err(|e| CliError::config("sim.delay", e.to_string()))?;
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(v) = o.sigma {
            self.sigma = v;
        }
        if let Some(v) = o.epsilon {
            self.epsilon = v;
        }
        if let Some(v) = o.policy {
            self.sim.policy = v;
        }
        if let Some(v) = o.delay {
            self.sim.delay = v;
        }
        if let Some(v) = o.horizon {
            self.sim.horizon = v;
        }
        if let Some(v) = o.step {
            self.sim.step = v;
        }
        self.check()
    }

    /// The scenario as a self-contained file with literal matrices.
    pub fn to_file(&self) -> ScenarioFile {
        let rows = MatrixSpec::rows;
        let d_zero = self.model.d().iter().all(|&v| v == 0.0);
        ScenarioFile {
            name: self.name.clone(),
            description: self.description.clone(),
            model: ModelSection {
                a: Some(rows(self.model.a())),
                b: Some(rows(self.model.b())),
                c: Some(rows(self.model.c())),
                d: (!d_zero).then(|| rows(self.model.d())),
                identify: None,
            },
            weights: WeightsSection {
                q: rows(&self.weights.q),
                r: rows(&self.weights.r),
                w: rows(&self.weights.w),
                v: rows(&self.weights.v),
            },
            trigger: TriggerSection {
                sigma: self.sigma,
                epsilon: self.epsilon,
                q_tilde: self.q_tilde.as_ref().map(rows),
            },
            sim: SimSection {
                step: self.sim.step,
                horizon: self.sim.horizon,
                x0: self.sim.x0.iter().copied().collect(),
                xhat0: Some(self.sim.xhat0.iter().copied().collect()),
                policy: self.sim.policy,
                delay: self.sim.delay,
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("scenario files always serialize")
    }
}

fn sized(m: Matrix, field: &str, dim: usize) -> Result<Matrix, CliError> {
    if m.shape() != (dim, dim) {
        return Err(CliError::config(field, format!("expected {dim}x{dim}, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(m)
}

fn state_vector(field: &str, v: &[f64], n: usize) -> Result<Vector, CliError> {
    if v.len() != n {
        return Err(CliError::config(field, format!("has {} entries, the model has {n} states", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::config(field, "entries must be finite"));
    }
    Ok(Vector::from_column_slice(v))
}

fn resolve_model(section: &ModelSection, base: &Path) -> Result<(LtiModel, ModelSource), CliError> {
    if let Some(id) = &section.identify {
        if section.a.is_some() || section.b.is_some() || section.c.is_some() || section.d.is_some() {
            return Err(CliError::config("model", "give either `identify` or the matrices a, b, c, not both"));
        }
        let path = base.join(&id.dataset);
        let file = fs::File::open(&path)
            .map_err(|e| CliError::config("model.identify.dataset", format!("{}: {e}", path.display())))?;
        let data = EraDataset::read_csv(file)
            .map_err(|e| CliError::config("model.identify.dataset", format!("{}: {e}", path.display())))?;
        let defaults = EraConfig::default();
        let config = EraConfig {
            hankel_blocks: id.hankel_blocks.unwrap_or(defaults.hankel_blocks),
            threshold: id.threshold.unwrap_or(defaults.threshold),
            regularization: None,
        };
        let report = identify(&data, &config)?;
        let model = report.identified.continuous()?;
        let source =
            ModelSource::Identified { dataset: path, order: report.identified.order, fit: report.identified.fit };
        return Ok((model, source));
    }
    let get = |spec: &Option<MatrixSpec>, field: &str| {
        spec.as_ref()
            .ok_or_else(|| CliError::config(field, "missing (or use `identify`)"))?
            .resolve(field, None, base)
    };
    let a = get(&section.a, "model.a")?;
    let b = get(&section.b, "model.b")?;
    let c = get(&section.c, "model.c")?;
    let model = match &section.d {
        Some(spec) => LtiModel::new(a, b, c, spec.resolve("model.d", None, base)?),
        None => LtiModel::strictly_proper(a, b, c),
    }
    .map_err(|e| CliError::config("model", e.to_string()))?;
    Ok((model, ModelSource::Literal))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "tiny"
[model]
a = [[-1.0]]
b = [[1.0]]
c = [[1.0]]
[trigger]
sigma = 0.5
epsilon = 0.01
[sim]
step = 0.01
horizon = 1.0
x0 = [1.0]
"#;

    #[test]
    fn bundled_scenarios_load() {
        for name in bundled_names() {
            let s = Scenario::load(name).unwrap();
            assert_eq!(s.name, name);
        }
    }

    #[test]
    fn defaults_fill_in() {
        let s = Scenario::parse(MINIMAL, Path::new("."), "test").unwrap();
        assert_eq!(s.weights.q, Matrix::identity(1, 1));
        assert_eq!(s.sim.xhat0, Vector::zeros(1));
        assert_eq!(s.sim.policy, TriggerPolicy::EventFloor);
        assert_eq!(s.sim.delay, 0.0);
    }

    #[test]
    fn round_trip_through_toml() {
        let s = Scenario::load("maglev").unwrap();
        let again = Scenario::parse(&s.to_toml(), Path::new("."), "again").unwrap();
        assert_eq!(again.model, s.model);
        assert_eq!(again.weights, s.weights);
        assert_eq!(again.sim, s.sim);
        assert_eq!((again.sigma, again.epsilon), (s.sigma, s.epsilon));
    }

    #[test]
    fn errors_name_the_field() {
        let bad = MINIMAL.replace("x0 = [1.0]", "x0 = [1.0, 2.0]");
        let msg = Scenario::parse(&bad, Path::new("."), "t").unwrap_err().to_string();
        assert!(msg.contains("sim.x0"), "{msg}");

        let bad = MINIMAL.replace("sigma = 0.5", "sigma = 1.5");
        let msg = Scenario::parse(&bad, Path::new("."), "t").unwrap_err().to_string();
        assert!(msg.contains("trigger.sigma"), "{msg}");

        let bad = MINIMAL.replace("sigma = 0.5", "sigma = \"half\"");
        let msg = Scenario::parse(&bad, Path::new("."), "t").unwrap_err().to_string();
        assert!(msg.contains("sigma") && msg.contains("line"), "{msg}");

        let bad = MINIMAL.replace("[sim]", "[sim]\nstpe = 1.0");
        let msg = Scenario::parse(&bad, Path::new("."), "t").unwrap_err().to_string();
        assert!(msg.contains("stpe"), "{msg}");
    }

    #[test]
    fn ragged_rows_rejected() {
        let bad = MINIMAL.replace("a = [[-1.0]]", "a = [[-1.0, 0.0], [1.0]]");
        let msg = Scenario::parse(&bad, Path::new("."), "t").unwrap_err().to_string();
        assert!(msg.contains("model.a") && msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn csv_matrices_and_scaled_identity() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.csv"), "-1, 0\n0, -2\n").unwrap();
        let text = r#"
name = "csvmat"
[model]
a = { csv = "a.csv" }
b = [[1.0], [1.0]]
c = [[1.0, 0.0]]
[weights]
w = { identity = 3.0 }
[trigger]
sigma = 0.5
epsilon = 0.01
[sim]
step = 0.01
horizon = 1.0
x0 = [1.0, 0.0]
"#;
        let s = Scenario::parse(text, dir.path(), "t").unwrap();
        assert_eq!(s.model.a()[(1, 1)], -2.0);
        assert_eq!(s.weights.w, Matrix::identity(2, 2) * 3.0);
    }

    #[test]
    fn overrides_are_validated() {
        let mut s = Scenario::load("maglev").unwrap();
        s.apply(&Overrides { sigma: Some(0.25), delay: Some(0.01), ..Default::default() }).unwrap();
        assert_eq!(s.sigma, 0.25);
        assert!(s.apply(&Overrides { delay: Some(1.5e-4), ..Default::default() }).is_err());
    }
}
