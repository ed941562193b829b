//! Scenario files: TOML with one table per function and per task family.
//!
//! ```toml
//! name = "hyperbolic"
//! m = 2
//! radius = 1.0
//! direction = "below"          # or "above"
//! tasks = ["build", "rigidity"]
//!
//! [w]
//! space-form = -1.0            # or: expr = "sinh(r)", or: table = "w.csv"
//!
//! [h]
//! expr = "0"
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::comparison::{ConstellationSpec, Direction};
use crate::dsl;
use crate::error::Error;
use crate::model::space_form_warping;
use crate::radial::{constant, CubicSpline, Grid, Radial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Balance,
    Build,
    ExitTime,
    Rigidity,
    Isoperimetric,
    Symmetrize,
    IntrinsicCompare,
    AverageLimit,
    McValidate,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Balance => "balance",
            Task::Build => "build",
            Task::ExitTime => "exit-time",
            Task::Rigidity => "rigidity",
            Task::Isoperimetric => "isoperimetric",
            Task::Symmetrize => "symmetrize",
            Task::IntrinsicCompare => "intrinsic-compare",
            Task::AverageLimit => "average-limit",
            Task::McValidate => "mc-validate",
        }
    }
}

/// Exactly one of the three ways to give a radial function.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FunctionSpec {
    /// Warping of the space form of this constant curvature.
    pub space_form: Option<f64>,
    /// Expression in `r`.
    pub expr: Option<String>,
    /// Two-column `(r, value)` file, interpolated by a natural cubic spline.
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct McSection {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub start_radius: f64,
}

impl Default for McSection {
    fn default() -> Self {
        McSection {
            paths: default_paths(),
            dt: default_dt(),
            seed: 0,
            start_radius: 0.0,
        }
    }
}

fn default_paths() -> usize {
    10_000
}

fn default_dt() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SymmetrizeSection {
    /// Two-column `(t, V)` superlevel-volume file. Without it the source is the ball
    /// of radius `R` in `M^m_w` carrying the transplanted exit time.
    pub profile: Option<PathBuf>,
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct IntrinsicSection {
    /// Warping of the space whose geodesic ball is compared.
    pub n: FunctionSpec,
    /// Extent of the target model; defaults to four times the radius.
    pub room: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AverageSection {
    #[serde(default = "default_probe")]
    pub probe: f64,
}

impl Default for AverageSection {
    fn default() -> Self {
        AverageSection {
            probe: default_probe(),
        }
    }
}

fn default_probe() -> f64 {
    20.0
}

/// Measured data of a domain, compared against the reference values.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BoundsSection {
    pub measured_quotient: Option<f64>,
    pub measured_volume: Option<f64>,
    pub measured_rigidity: Option<f64>,
    /// Volume of the domain to symmetrize; defaults to `Vol(B^w_R)`.
    pub domain_volume: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Scenario {
    pub name: String,
    pub m: usize,
    pub radius: f64,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    pub tasks: Vec<Task>,
    pub w: FunctionSpec,
    pub g: Option<FunctionSpec>,
    pub h: Option<FunctionSpec>,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub symmetrize: SymmetrizeSection,
    pub intrinsic: Option<IntrinsicSection>,
    #[serde(default)]
    pub average: AverageSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base: PathBuf,
}

fn default_direction() -> Direction {
    Direction::Below
}

/// Configuration problem, reported with the offending field or location.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Syntax { path: String, message: String },
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
}

fn field(name: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: name.to_string(),
        message: message.into(),
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut scenario = Scenario::parse(&text).map_err(|e| match e {
            ConfigError::Syntax { message, .. } => ConfigError::Syntax {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })?;
        scenario.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(scenario)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| ConfigError::Syntax {
            path: "<scenario>".into(),
            message: e.to_string().trim_end().to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.m < 2 {
            return Err(field("m", format!("dimension must be at least 2, got {}", self.m)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(field("radius", format!("must be positive, got {}", self.radius)));
        }
        if self.tasks.is_empty() {
            return Err(field("tasks", "at least one task is required"));
        }
        check_function("w", &self.w)?;
        if let Some(g) = &self.g {
            check_function("g", g)?;
        }
        if let Some(h) = &self.h {
            check_function("h", h)?;
        }
        if let Some(i) = &self.intrinsic {
            check_function("intrinsic.n", &i.n)?;
        }
        if self.tasks.contains(&Task::IntrinsicCompare) && self.intrinsic.is_none() {
            return Err(field("intrinsic", "required by the intrinsic-compare task"));
        }
        Ok(())
    }

    pub fn function(&self, name: &str, spec: &FunctionSpec) -> Result<Radial, ConfigError> {
        if let Some(b) = spec.space_form {
            return Ok(space_form_warping(b));
        }
        if let Some(src) = &spec.expr {
            let ast = dsl::parse(src).map_err(|e| field(name, e.to_string()))?;
            return Ok(dsl::to_radial(ast));
        }
        let path = self.base.join(spec.table.as_ref().expect("validated"));
        let grid = read_table(&path).map_err(|e| field(name, e))?;
        Ok(Arc::new(CubicSpline::new(&grid)))
    }

    pub fn constellation(&self) -> Result<ConstellationSpec, ConfigError> {
        let w = self.function("w", &self.w)?;
        let g = match &self.g {
            Some(g) => self.function("g", g)?,
            None => constant(1.0),
        };
        let h = match &self.h {
            Some(h) => self.function("h", h)?,
            None => constant(0.0),
        };
        Ok(ConstellationSpec {
            m: self.m,
            w,
            g,
            h,
            radius: self.radius,
            direction: self.direction,
        })
    }
}

fn check_function(name: &str, spec: &FunctionSpec) -> Result<(), ConfigError> {
    let given = [spec.space_form.is_some(), spec.expr.is_some(), spec.table.is_some()];
    match given.iter().filter(|&&b| b).count() {
        1 => Ok(()),
        0 => Err(field(name, "give one of `space-form`, `expr` or `table`")),
        _ => Err(field(name, "give only one of `space-form`, `expr` or `table`")),
    }
}

fn read_table(path: &Path) -> Result<Grid, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let (mut nodes, mut values) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format!("{}: {e}", path.display()))?;
        let parsed: Option<Vec<f64>> = record.iter().map(|f| f.parse().ok()).collect();
        match parsed.as_deref() {
            Some([x, y]) => {
                nodes.push(*x);
                values.push(*y);
            }
            None if i == 0 => continue,
            _ => return Err(format!("{}: row {} is not two numbers", path.display(), i + 1)),
        }
    }
    Grid::new(nodes, values).map_err(|e: Error| format!("{}: {e}", path.display()))
}
