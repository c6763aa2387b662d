//! Experiment configuration: a TOML file with a fixed, versioned schema.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::exit::{McSettings, WindowPolicy};
use crate::sampler::StableParams;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Statements the harness can check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TheoremId {
    /// Two-sided decay-rate sandwich for the survival probability.
    #[serde(rename = "thm-1-1")]
    RateSandwich,
    /// Mean exit times bounded by a constant over `λ(D)`.
    #[serde(rename = "cor-1-2")]
    MeanExitBound,
    /// `δ^{α/2}` boundary behaviour of mean exit times and the inradius bound.
    #[serde(rename = "thm-1-3")]
    BoundaryExponent,
    /// Dirichlet heat kernel envelope on convex domains.
    #[serde(rename = "prop-1-4")]
    KernelEnvelope,
    /// Sharp decay rate on horn-shaped domains.
    #[serde(rename = "thm-1-6")]
    HornRate,
    /// Identities of the iteration exponent series.
    #[serde(rename = "iteration-3-2")]
    IterationSeries,
}

impl TheoremId {
    pub const ALL: [TheoremId; 6] = [
        TheoremId::RateSandwich,
        TheoremId::MeanExitBound,
        TheoremId::BoundaryExponent,
        TheoremId::KernelEnvelope,
        TheoremId::HornRate,
        TheoremId::IterationSeries,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremId::RateSandwich => "thm-1-1",
            TheoremId::MeanExitBound => "cor-1-2",
            TheoremId::BoundaryExponent => "thm-1-3",
            TheoremId::KernelEnvelope => "prop-1-4",
            TheoremId::HornRate => "thm-1-6",
            TheoremId::IterationSeries => "iteration-3-2",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<_> = TheoremId::ALL.iter().map(|t| t.as_str()).collect();
                Error::Config(format!("unknown theorem id {s:?}; expected one of {}", known.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub alpha: f64,
    pub dim: usize,
}

fn default_grid_step() -> f64 {
    0.05
}

fn default_deltas() -> Vec<f64> {
    vec![0.01, 0.02, 0.05, 0.1]
}

/// Monte Carlo settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    /// Horizon of survival curves and censoring time of mean exit times.
    pub t_max: f64,
    pub seed: u64,
    /// Spacing of the survival-curve grid; rounded to a multiple of `dt`.
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default)]
    pub bridge_correction: bool,
    /// Starting point; defaults to the centre of intervals and balls.
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    /// Extra starting points for probed suprema and mean exit times.
    #[serde(default)]
    pub probes: Vec<Vec<f64>>,
}

fn default_resolutions() -> Vec<usize> {
    crate::spectral::DEFAULT_LADDER.to_vec()
}

fn default_true() -> bool {
    true
}

fn default_quadrature() -> usize {
    48
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<usize>,
    #[serde(default = "default_true")]
    pub extrapolate: bool,
    /// Panels of the Rayleigh quotient quadrature.
    #[serde(default = "default_quadrature")]
    pub quadrature_n: usize,
    /// `C^{1,1}` scale for the inradius bound; taken from the domain when absent.
    #[serde(default)]
    pub c11_scale: Option<f64>,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            resolutions: default_resolutions(),
            extrapolate: true,
            quadrature_n: default_quadrature(),
            c11_scale: None,
        }
    }
}

fn default_eps() -> f64 {
    0.01
}

fn default_tol_factor() -> f64 {
    3.0
}

fn default_spectral_rel_error() -> f64 {
    0.005
}

fn default_slope_tol() -> f64 {
    0.08
}

fn default_rate_rel_tol() -> f64 {
    0.10
}

fn default_kernel_factor() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub window: WindowPolicy,
    /// `ε` of the envelope rate `(1-ε) λ / (1 + d/(4α))`.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Multiplier of standard errors in rate tolerances.
    #[serde(default = "default_tol_factor")]
    pub tol_factor: f64,
    /// Relative error floor assigned to spectral estimates.
    #[serde(default = "default_spectral_rel_error")]
    pub spectral_rel_error: f64,
    /// Allowed deviation of the boundary exponent from `α/2`.
    #[serde(default = "default_slope_tol")]
    pub slope_tol: f64,
    /// Allowed relative deviation of the horn rate from `λ₁` of the projection.
    #[serde(default = "default_rate_rel_tol")]
    pub rate_rel_tol: f64,
    /// Allowed spread (max/min) of kernel envelope ratios across times.
    #[serde(default = "default_kernel_factor")]
    pub kernel_factor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            window: WindowPolicy::default(),
            eps: default_eps(),
            tol_factor: default_tol_factor(),
            spectral_rel_error: default_spectral_rel_error(),
            slope_tol: default_slope_tol(),
            rate_rel_tol: default_rate_rel_tol(),
            kernel_factor: default_kernel_factor(),
        }
    }
}

/// Boundary-exponent probes: start points at distance `δ` from the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    /// When set, each probe runs with `dt = dt_scale · δ^α` (capped by `mc.dt`).
    #[serde(default)]
    pub dt_scale: Option<f64>,
    /// Paths per probe; `mc.n_paths` when absent.
    #[serde(default)]
    pub n_paths: Option<usize>,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig {
            deltas: default_deltas(),
            dt_scale: None,
            n_paths: None,
        }
    }
}

fn default_kernel_times() -> Vec<f64> {
    vec![2.0, 4.0, 6.0]
}

fn default_bins() -> usize {
    64
}

fn default_min_count() -> u64 {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_kernel_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_min_count")]
    pub min_count: u64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            times: default_kernel_times(),
            bins: default_bins(),
            min_count: default_min_count(),
        }
    }
}

fn default_inscribed_start() -> f64 {
    20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HornConfig {
    /// `a` of the inscribed tube `(a, ∞) × H(a)`.
    #[serde(default = "default_inscribed_start")]
    pub inscribed_start: f64,
}

impl Default for HornConfig {
    fn default() -> Self {
        HornConfig {
            inscribed_start: default_inscribed_start(),
        }
    }
}

fn default_schema() -> u32 {
    CONFIG_SCHEMA_VERSION
}

/// A complete, validated experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub theorem: Option<TheoremId>,
    pub process: ProcessConfig,
    pub domain: Domain,
    pub mc: McConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub horn: HornConfig,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every range constraint the schema cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                expected: CONFIG_SCHEMA_VERSION,
            });
        }
        let a = self.process.alpha;
        if !(a > 0.0 && a <= 2.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 2], got {a}")));
        }
        if self.process.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        self.domain
            .validate()
            .map_err(|e| Error::Config(format!("domain: {e}")))?;
        if self.domain.dim() != self.process.dim {
            return Err(Error::Config(format!(
                "domain dimension {} does not match process dimension {}",
                self.domain.dim(),
                self.process.dim
            )));
        }
        let mc = &self.mc;
        if mc.n_paths < 100 {
            return Err(Error::Config(format!("mc.n_paths must be at least 100, got {}", mc.n_paths)));
        }
        positive("mc.dt", mc.dt)?;
        positive("mc.t_max", mc.t_max)?;
        positive("mc.grid_step", mc.grid_step)?;
        if mc.t_max < mc.dt {
            return Err(Error::Config("mc.t_max must be at least mc.dt".into()));
        }
        if mc.bridge_correction && a != 2.0 {
            return Err(Error::Config(
                "mc.bridge_correction is only available for alpha = 2".into(),
            ));
        }
        for p in mc.start.iter().chain(&mc.probes) {
            if p.len() != self.process.dim {
                return Err(Error::Config(format!(
                    "point {p:?} has dimension {}, expected {}",
                    p.len(),
                    self.process.dim
                )));
            }
            if !self.domain.inside(p) {
                return Err(Error::Config(format!("point {p:?} lies outside the domain")));
            }
        }
        if self.spectral.resolutions.iter().any(|&n| n < 16) || self.spectral.resolutions.is_empty() {
            return Err(Error::Config("spectral.resolutions must be nonempty with entries >= 16".into()));
        }
        if self.spectral.quadrature_n < 8 {
            return Err(Error::Config("spectral.quadrature_n must be at least 8".into()));
        }
        if let Some(r) = self.spectral.c11_scale {
            positive("spectral.c11_scale", r)?;
        }
        let f = &self.fit;
        if !(f.eps > 0.0 && f.eps < 1.0) {
            return Err(Error::Config(format!("fit.eps must lie in (0, 1), got {}", f.eps)));
        }
        positive("fit.tol_factor", f.tol_factor)?;
        positive("fit.spectral_rel_error", f.spectral_rel_error)?;
        positive("fit.slope_tol", f.slope_tol)?;
        positive("fit.rate_rel_tol", f.rate_rel_tol)?;
        positive("fit.kernel_factor", f.kernel_factor)?;
        match f.window {
            WindowPolicy::Counts { min_survivors, max_fraction } => {
                if min_survivors == 0 || !(max_fraction > 0.0 && max_fraction <= 1.0) {
                    return Err(Error::Config(
                        "fit.window needs min_survivors >= 1 and max_fraction in (0, 1]".into(),
                    ));
                }
            }
            WindowPolicy::Time { t_lo, t_hi } => {
                if !(t_lo >= 0.0 && t_hi > t_lo) {
                    return Err(Error::Config("fit.window needs 0 <= t_lo < t_hi".into()));
                }
            }
        }
        if self.boundary.deltas.len() < 2 || self.boundary.deltas.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Config("boundary.deltas needs at least two positive values".into()));
        }
        if let Some(c) = self.boundary.dt_scale {
            positive("boundary.dt_scale", c)?;
        }
        if self.kernel.bins < 2 || self.kernel.times.is_empty() || self.kernel.times.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("kernel needs positive times and at least 2 bins".into()));
        }
        positive("horn.inscribed_start", self.horn.inscribed_start)?;
        Ok(())
    }

    pub fn params(&self) -> StableParams {
        StableParams {
            alpha: self.process.alpha,
            dim: self.process.dim,
        }
    }

    pub fn mc_settings(&self) -> McSettings {
        McSettings {
            n_paths: self.mc.n_paths,
            dt: self.mc.dt,
            seed: self.mc.seed,
            bridge_correction: self.mc.bridge_correction,
        }
    }

    /// Configured start, or the centre of an interval or ball.
    pub fn start_point(&self) -> Result<Vec<f64>> {
        if let Some(s) = &self.mc.start {
            return Ok(s.clone());
        }
        match &self.domain {
            Domain::Interval { a, b } => Ok(vec![0.5 * (a + b)]),
            Domain::Ball { center, .. } => Ok(center.clone()),
            other => Err(Error::Config(format!(
                "mc.start is required for a {} domain",
                other.name()
            ))),
        }
    }

    /// Survival-curve grid `0, step, ..., t_max` on multiples of `dt`.
    pub fn time_grid(&self) -> Vec<f64> {
        let dt = self.mc.dt;
        let per = (self.mc.grid_step / dt).round().max(1.0) as usize;
        let n_steps = crate::sampler::grid_steps(self.mc.t_max, dt);
        (0..=n_steps / per).map(|k| (k * per) as f64 * dt).collect()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_toml_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Applies `dotted.key=value` overrides; values parse as TOML literals and
/// fall back to strings. The result is re-validated against the schema.
pub fn apply_overrides(cfg: &ExperimentConfig, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut doc = toml::Value::try_from(cfg).map_err(|e| Error::Config(e.to_string()))?;
    for ov in overrides {
        let (key, raw) = ov
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {ov:?} is not key=value")))?;
        let value = parse_value(raw.trim());
        let parts: Vec<&str> = key.trim().split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("bad override key {key:?}")));
        }
        let mut node = &mut doc;
        for p in &parts[..parts.len() - 1] {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("override key {key:?} does not name a table")))?;
            node = table
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        node.as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key {key:?} does not name a table")))?
            .insert(parts[parts.len() - 1].to_string(), value);
    }
    let text = toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))?;
    ExperimentConfig::from_toml_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("after overrides: {m}")),
        other => other,
    })
}

fn parse_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&probe) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
