//! Run configuration, read from TOML or JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use amx_core::{Helicity, Method, ModeDirection, QuadratureGrid, ScaleFactorModel, StepControl, T33Form, Tolerances};
use serde::Deserialize;

use crate::CliError;

/// Default tolerance for hard checks without a dedicated entry.
pub const DEFAULT_CHECK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub metric: MetricConfig,
    pub span: SpanConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub emt: EmtConfig,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory that relative paths in the config are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricConfig {
    IsotropicPowerLaw {
        r0: f64,
        p: f64,
        #[serde(default = "one")]
        t_ref: f64,
    },
    Kasner {
        p: [f64; 3],
        #[serde(default = "one")]
        t_ref: f64,
    },
    /// Either `path` to a `t,a1,a2,a3` CSV, or inline `times`/`values`.
    Tabulated {
        path: Option<PathBuf>,
        times: Option<Vec<f64>>,
        values: Option<Vec<[f64; 3]>>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpanConfig {
    pub t0: f64,
    pub t1: f64,
    #[serde(default = "default_outputs")]
    pub outputs: usize,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_k: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub n_delta: usize,
    pub n_xi: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_k: 64,
            k_min: 0.05,
            k_max: 1.0,
            n_delta: 16,
            n_xi: 16,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    #[serde(default = "default_rel")]
    pub rel: f64,
    #[serde(default = "default_abs")]
    pub abs: f64,
    /// Fallback for hard checks; per-check entries in `checks` win.
    pub check: Option<f64>,
    #[serde(default)]
    pub checks: BTreeMap<String, f64>,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            rel: default_rel(),
            abs: default_abs(),
            check: None,
            checks: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EmtConfig {
    #[serde(default = "one")]
    pub volume: f64,
    #[serde(default)]
    pub use_printed_t33: bool,
    /// Mode tolerances for grid evolutions; default to `1e-8` / `1e-10`.
    #[serde(default = "default_emt_rel")]
    pub rel: f64,
    #[serde(default = "default_emt_abs")]
    pub abs: f64,
    #[serde(default = "default_budget")]
    pub memory_budget_mb: f64,
}

impl Default for EmtConfig {
    fn default() -> Self {
        EmtConfig {
            volume: 1.0,
            use_printed_t33: false,
            rel: default_emt_rel(),
            abs: default_emt_abs(),
            memory_budget_mb: default_budget(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub k: f64,
    pub delta: f64,
    pub xi: f64,
    pub helicity: i32,
    pub method: String,
}

impl Default for ModeConfig {
    fn default() -> Self {
        ModeConfig {
            k: 1.0,
            delta: std::f64::consts::FRAC_PI_3,
            xi: std::f64::consts::PI / 5.0,
            helicity: 1,
            method: "suv".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}
fn default_seed() -> u64 {
    42
}
fn default_outputs() -> usize {
    11
}
fn default_rel() -> f64 {
    1e-10
}
fn default_abs() -> f64 {
    1e-12
}
fn default_emt_rel() -> f64 {
    1e-8
}
fn default_emt_abs() -> f64 {
    1e-10
}
fn default_budget() -> f64 {
    1024.0
}

/// Methods accepted by `amx mode`.
pub const METHODS: [Method; 4] = [Method::Suv, Method::SecondOrder, Method::Bogoliubov, Method::FirstOrder];

pub fn parse_method(name: &str) -> Result<Method, CliError> {
    METHODS.iter().copied().find(|m| m.name() == name).ok_or_else(|| {
        let allowed: Vec<&str> = METHODS.iter().map(|m| m.name()).collect();
        CliError::Config(format!("unknown method `{name}`; allowed values: {}", allowed.join(", ")))
    })
}

impl RunConfig {
    /// Reads a config; `.json` files are parsed as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg = if is_json {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let s = &self.span;
        if !(s.t0.is_finite() && s.t1.is_finite() && s.t0 < s.t1) {
            return bad(format!("span: need t0 < t1, got [{}, {}]", s.t0, s.t1));
        }
        if s.outputs < 2 {
            return bad(format!("span: outputs must be at least 2, got {}", s.outputs));
        }
        let g = &self.grid;
        if g.n_k < 2 || g.n_delta < 2 || g.n_xi < 2 {
            return bad(format!(
                "grid: all counts must be at least 2, got (n_k, n_delta, n_xi) = ({}, {}, {})",
                g.n_k, g.n_delta, g.n_xi
            ));
        }
        if !(g.k_min > 0.0 && g.k_min < g.k_max && g.k_max.is_finite()) {
            return bad(format!("grid: need 0 < k_min < k_max, got [{}, {}]", g.k_min, g.k_max));
        }
        let t = &self.tolerances;
        for (name, v) in [("rel", t.rel), ("abs", t.abs), ("emt.rel", self.emt.rel), ("emt.abs", self.emt.abs)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("tolerances: {name} must be positive, got {v}"));
            }
        }
        // Check tolerances may be zero: that is how a forced failure is requested.
        for (name, v) in t.check.iter().map(|v| ("check", *v)).chain(t.checks.iter().map(|(k, v)| (k.as_str(), *v))) {
            if !(v >= 0.0) {
                return bad(format!("tolerances: check tolerance `{name}` must be non-negative, got {v}"));
            }
        }
        if !(self.emt.volume > 0.0 && self.emt.volume.is_finite()) {
            return bad(format!("emt: volume must be positive, got {}", self.emt.volume));
        }
        if !(self.emt.memory_budget_mb > 0.0) {
            return bad(format!("emt: memory_budget_mb must be positive, got {}", self.emt.memory_budget_mb));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ScaleFactorModel, CliError> {
        let model = match &self.metric {
            MetricConfig::IsotropicPowerLaw { r0, p, t_ref } => ScaleFactorModel::isotropic_power_law(*r0, *p, *t_ref),
            MetricConfig::Kasner { p, t_ref } => {
                let (sum, sq) = amx_core::kasner_constraint_check(p[0], p[1], p[2]);
                if sum.abs() > 1e-12 || sq.abs() > 1e-12 {
                    log::warn!("Kasner exponents {p:?} miss the vacuum constraints by ({sum:e}, {sq:e})");
                }
                ScaleFactorModel::kasner(*p, *t_ref)
            }
            MetricConfig::Tabulated { path, times, values } => match (path, times, values) {
                (Some(path), None, None) => {
                    let full = self.base_dir.join(path);
                    let file = fs::File::open(&full)
                        .map_err(|e| CliError::Config(format!("cannot open table {}: {e}", full.display())))?;
                    ScaleFactorModel::tabulated_from_csv(file)
                }
                (None, Some(t), Some(v)) => ScaleFactorModel::tabulated(t.clone(), v.clone()),
                _ => {
                    return Err(CliError::Config(
                        "metric: tabulated model needs either `path` or both `times` and `values`".into(),
                    ))
                }
            },
        }?;
        for t in [self.span.t0, self.span.t1] {
            if !model.contains(t) {
                let (lo, hi) = model.domain();
                return Err(CliError::Config(format!("span endpoint {t} is outside the model domain ({lo}, {hi})")));
            }
        }
        Ok(model)
    }

    pub fn output_times(&self) -> Vec<f64> {
        linspace(self.span.t0, self.span.t1, self.span.outputs)
    }

    pub fn grid(&self) -> Result<QuadratureGrid, CliError> {
        let g = &self.grid;
        Ok(QuadratureGrid::new(g.n_k, g.k_min, g.k_max, g.n_delta, g.n_xi)?)
    }

    /// The grid with every count doubled.
    pub fn refined_grid(&self) -> Result<QuadratureGrid, CliError> {
        let g = &self.grid;
        Ok(QuadratureGrid::new(2 * g.n_k, g.k_min, g.k_max, 2 * g.n_delta, 2 * g.n_xi)?)
    }

    pub fn mode_control(&self) -> Result<StepControl, CliError> {
        Ok(StepControl::Adaptive(Tolerances::new(self.tolerances.rel, self.tolerances.abs)?))
    }

    pub fn emt_control(&self) -> Result<StepControl, CliError> {
        Ok(StepControl::Adaptive(Tolerances::new(self.emt.rel, self.emt.abs)?))
    }

    pub fn t33_form(&self) -> T33Form {
        if self.emt.use_printed_t33 {
            T33Form::Printed
        } else {
            T33Form::Reconciled
        }
    }

    pub fn mode_direction(&self) -> Result<(ModeDirection, Helicity, Method), CliError> {
        let m = &self.mode;
        let method = parse_method(&m.method)?;
        let dir = ModeDirection::new(m.k, m.delta, m.xi)?;
        let r = Helicity::from_sign(m.helicity)?;
        Ok((dir, r, method))
    }

    /// Tolerance for a hard check: explicit entry, then the config-wide
    /// fallback, then `builtin`.
    pub fn check_tolerance(&self, check: &str, builtin: f64) -> f64 {
        self.tolerances
            .checks
            .get(check)
            .copied()
            .or(self.tolerances.check)
            .unwrap_or(builtin)
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    if let Some(last) = v.last_mut() {
        *last = b;
    }
    v
}
