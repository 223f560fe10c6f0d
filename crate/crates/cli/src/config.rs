//! Run configuration: schema validation, defaults, and conversion into the
//! core types.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use jsonschema::error::ValidationErrorKind;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use weakclose_core::energy::MinimizeOptions;
use weakclose_core::experiments::TestFunction;
use weakclose_core::fields::SpaceTimeGrid;
use weakclose_core::hulls::LaminateSearch;
use weakclose_core::{FluxModel, Window};

pub const SCHEMA: &str = include_str!("../schema.json");

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Json(serde_json::Error),
    /// Schema violations as `(json pointer, message)`.
    Schema(Vec<(String, String)>),
    Flux(weakclose_core::Error),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Json(e) => write!(f, "config is not valid JSON: {e}"),
            ConfigError::Schema(errs) => {
                write!(f, "config does not match the schema:")?;
                for (ptr, msg) in errs {
                    write!(f, "\n  at \"{ptr}\": {msg}")?;
                }
                Ok(())
            }
            ConfigError::Flux(e) => write!(f, "flux: {e}"),
            ConfigError::Invalid(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxSpec {
    pub kind: String,
    pub a: Option<f64>,
    #[serde(rename = "A")]
    pub amplitude: Option<f64>,
    pub s: Option<f64>,
    pub knots: Option<Vec<(f64, f64)>>,
    pub table: Option<Vec<(f64, f64)>>,
    pub path: Option<String>,
    pub growth_c1: Option<f64>,
    pub derivative_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    /// Defaults to a quarter of the window length.
    pub pad: Option<f64>,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { min: -6.0, max: 6.0, n: 257, pad: None }
    }
}

impl WindowSpec {
    pub fn window(&self) -> weakclose_core::Result<Window> {
        match self.pad {
            Some(pad) => Window::new(self.min, self.max, self.n, pad),
            None => Window::with_default_pad(self.min, self.max, self.n),
        }
    }
}

/// Cell counts and domain size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub nx: usize,
    pub nt: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 64, nt: 64, l: 1.0, t: 1.0 }
    }
}

impl GridSpec {
    pub fn grid(&self) -> weakclose_core::Result<SpaceTimeGrid> {
        SpaceTimeGrid::with_cells(self.l, self.t, self.nx, self.nt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub p: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SetsSpec {
    /// Defaults to every node of the p window.
    pub p_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeSpec {
    pub anchor: Target,
    pub max_iter: usize,
    pub tol_i: f64,
    pub init_noise: f64,
    pub residual_every: usize,
}

impl Default for MinimizeSpec {
    fn default() -> Self {
        let d = MinimizeOptions::default();
        Self {
            anchor: Target { p: 0.0, beta: 1.0 },
            max_iter: d.max_iter,
            tol_i: d.tol_i,
            init_noise: d.init_noise,
            residual_every: d.residual_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub p: f64,
    pub beta: f64,
    pub bracket: (f64, f64),
    pub js: Vec<usize>,
    pub claimed_sigma_bar: Option<f64>,
    pub margin_tol: f64,
    pub min_pass_fraction: f64,
    pub require_residual_decrease: bool,
    pub divcurl_tol: f64,
    pub lambda: f64,
    pub search_half_width: f64,
    pub search_n: usize,
    pub test_function: Option<TestFunctionSpec>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let s = LaminateSearch::default();
        Self {
            p: 0.0,
            beta: 1.0,
            bracket: (-3.0, -2.0),
            js: vec![4, 8, 16, 32],
            claimed_sigma_bar: None,
            margin_tol: 0.0,
            min_pass_fraction: 0.95,
            require_residual_decrease: true,
            divcurl_tol: 1e-2,
            lambda: 4.0,
            search_half_width: s.half_width,
            search_n: s.n,
            test_function: None,
        }
    }
}

impl ExperimentSpec {
    pub fn search(&self) -> LaminateSearch {
        LaminateSearch { half_width: self.search_half_width, n: self.search_n }
    }

    pub fn test_function(&self, grid: &SpaceTimeGrid) -> TestFunction {
        match &self.test_function {
            Some(t) => TestFunction { center: t.center, radius: t.radius, amplitude: t.amplitude },
            None => TestFunction::centered(grid),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub center: (f64, f64),
    pub radius: (f64, f64),
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualCase {
    Heat,
    Anchor,
    Minimizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResidualSpec {
    pub cg_tol: f64,
    pub case: ResidualCase,
}

impl Default for ResidualSpec {
    fn default() -> Self {
        Self { cg_tol: 1e-10, case: ResidualCase::Anchor }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub flux: FluxSpec,
    #[serde(default)]
    pub window_p: WindowSpec,
    #[serde(default)]
    pub window_beta: WindowSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub zero_tol: Option<f64>,
    #[serde(default)]
    pub sets: SetsSpec,
    #[serde(default)]
    pub minimize: MinimizeSpec,
    #[serde(default)]
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub residual: ResidualSpec,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub cache_dir: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Directory relative paths in the config resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_seed() -> u64 {
    7
}

/// Errors as `(json pointer, message)`; unknown keys point at the key itself.
pub fn schema_errors(instance: &Value) -> Vec<(String, String)> {
    let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
    let validator = jsonschema::validator_for(&schema).expect("bundled schema compiles");
    let mut out: Vec<(String, String)> = validator
        .iter_errors(instance)
        .flat_map(|e| {
            let base = e.instance_path().to_string();
            match e.kind() {
                ValidationErrorKind::AdditionalProperties { unexpected } => unexpected
                    .iter()
                    .map(|k| (format!("{base}/{}", escape_pointer(k)), format!("unknown key \"{k}\"")))
                    .collect::<Vec<_>>(),
                _ => vec![(base, e.to_string())],
            }
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

fn escape_pointer(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

/// Parses a config from a file path, or from inline JSON if the argument
/// starts with `{`.
pub fn parse_config(source: &str) -> Result<RunConfig, ConfigError> {
    let (text, base_dir) = if source.trim_start().starts_with('{') {
        (source.to_string(), PathBuf::from("."))
    } else {
        let path = Path::new(source);
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        (text, path.parent().map(Path::to_path_buf).unwrap_or_default())
    };
    parse_config_str(&text, &base_dir)
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(ConfigError::Json)?;
    let errs = schema_errors(&value);
    if !errs.is_empty() {
        return Err(ConfigError::Schema(errs));
    }
    let mut cfg: RunConfig = serde_json::from_value(value).map_err(ConfigError::Json)?;
    cfg.base_dir = base_dir.to_path_buf();
    cfg.flux_model()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn flux_model(&self) -> Result<FluxModel, ConfigError> {
        let f = &self.flux;
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| ConfigError::Invalid(format!("flux.{key} is required")));
        let model = match f.kind.as_str() {
            "linear" => FluxModel::linear(need(f.a, "a")?),
            "rational_bump" => FluxModel::rational_bump(need(f.amplitude, "A")?, need(f.s, "s")?).map_err(ConfigError::Flux)?,
            "piecewise_linear" => {
                let knots = f.knots.clone().ok_or_else(|| ConfigError::Invalid("flux.knots is required".into()))?;
                FluxModel::piecewise_linear(knots).map_err(ConfigError::Flux)?
            }
            "hollig" => FluxModel::hollig(),
            "sampled" => match (&f.path, &f.table) {
                (Some(p), _) => FluxModel::sampled_from_csv(self.base_dir.join(p)).map_err(ConfigError::Flux)?,
                (None, Some(t)) => FluxModel::sampled(t.clone()).map_err(ConfigError::Flux)?,
                (None, None) => return Err(ConfigError::Invalid("sampled flux needs path or table".into())),
            },
            other => return Err(ConfigError::Invalid(format!("unknown flux kind {other}"))),
        };
        let model = match f.derivative_step {
            Some(h) => model.with_derivative_step(h),
            None => model,
        };
        match f.growth_c1 {
            Some(c1) => {
                let w = self.window_p.window().map_err(ConfigError::Flux)?;
                model.with_growth_c1(c1, &w).map_err(ConfigError::Flux)
            }
            None => Ok(model),
        }
    }

    pub fn minimize_options(&self) -> MinimizeOptions {
        let m = &self.minimize;
        MinimizeOptions {
            max_iter: m.max_iter,
            tol_i: m.tol_i,
            init_noise: m.init_noise,
            seed: self.seed,
            residual_every: m.residual_every,
            cg_tol: self.residual.cg_tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(r#"{"flux":{"kind":"linear","a":1}}"#).unwrap();
        assert_eq!((cfg.window_p.min, cfg.window_p.max, cfg.window_p.n), (-6.0, 6.0, 257));
        assert_eq!((cfg.grid.nx, cfg.grid.nt), (64, 64));
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.window_p.window().unwrap().pad, 3.0);
    }

    #[test]
    fn unknown_key_is_reported_by_pointer() {
        let err = parse_config(r#"{"flux":{"kind":"linear","a":1},"fluxx":{}}"#).unwrap_err();
        let ConfigError::Schema(errs) = err else { panic!("{err}") };
        assert_eq!(errs[0].0, "/fluxx");
        let err = parse_config(r#"{"flux":{"kind":"linear","a":1,"b":2}}"#).unwrap_err();
        assert!(err.to_string().contains("\"/flux/b\""), "{err}");
    }

    #[test]
    fn kind_specific_fields_are_required() {
        let err = parse_config(r#"{"flux":{"kind":"rational_bump","A":4}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Schema(_)), "{err}");
        let err = parse_config(r#"{"flux":{"kind":"rational_bump","A":4,"s":0}}"#).unwrap_err();
        let ConfigError::Schema(errs) = err else { panic!() };
        assert_eq!(errs[0].0, "/flux/s");
    }

    #[test]
    fn sampled_table_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("t.csv"), "p,sigma\n0,0\n1,1\n0.5,2\n").unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"flux":{"kind":"sampled","path":"t.csv"}}"#).unwrap();
        let err = parse_config(cfg.to_str().unwrap()).unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(parse_config("/nonexistent/cfg.json"), Err(ConfigError::Io(..))));
    }
}
