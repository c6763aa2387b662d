//! Verification experiments: configs, per-statement checks with verdicts,
//! result bundles and rendered reports.

mod bundle;
mod config;
mod report;
mod verify;

pub use bundle::{
    load_bundle, run_experiment, run_experiment_timed, save_bundle, write_artifacts, write_timings, CurveRecord, FitRecord,
    ResultBundle, SeedOverride, SpectralRecord, Timings, BUNDLE_SCHEMA_VERSION,
};
pub use config::{
    apply_overrides, load_config, BoundaryConfig, ExperimentConfig, FitConfig, HornConfig, KernelConfig,
    McConfig, ProcessConfig, SpectralConfig, TheoremId, CONFIG_SCHEMA_VERSION,
};
pub use report::render_report;
pub use verify::{run_verification, verify, Artifacts};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::exit::SurvivalCurve;
use crate::stats::Z_95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// Fail dominates inconclusive, which dominates pass.
    pub fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
        verdicts.into_iter().fold(Verdict::Pass, |acc, v| match (acc, v) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        })
    }
}

/// Where a number came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Mc,
    Spectral,
    Formula,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Mc => "mc",
            Provenance::Spectral => "spectral",
            Provenance::Formula => "formula",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Quantity {
    pub fn new(value: f64, provenance: Provenance) -> Self {
        Quantity {
            value,
            stderr: None,
            provenance,
            label: None,
        }
    }

    pub fn with_stderr(mut self, stderr: f64) -> Self {
        self.stderr = Some(stderr);
        self
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// One asserted inequality `lhs ≤ rhs`, with slack `tol` and the standard
/// error of the margin `rhs - lhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub statement: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tol: f64,
    pub stderr: f64,
    pub verdict: Verdict,
}

/// Pass when `margin ≥ -tol`; inconclusive when the 95% interval of the
/// margin still reaches `-tol`; fail otherwise (and for NaN margins).
pub fn classify(margin: f64, tol: f64, stderr: f64) -> Verdict {
    if margin >= -tol {
        Verdict::Pass
    } else if margin + Z_95 * stderr >= -tol {
        Verdict::Inconclusive
    } else {
        Verdict::Fail
    }
}

impl Check {
    /// `lhs ≤ rhs` up to `tol`.
    pub fn at_most(name: &str, statement: &str, lhs: f64, rhs: f64, tol: f64, stderr: f64) -> Check {
        let margin = rhs - lhs;
        Check {
            name: name.to_string(),
            statement: statement.to_string(),
            lhs,
            rhs,
            margin,
            tol,
            stderr,
            verdict: classify(margin, tol, stderr),
        }
    }

    /// `|value - target| ≤ halfwidth`, recorded as `|value - target| ≤ halfwidth`.
    pub fn within(name: &str, statement: &str, value: f64, target: f64, halfwidth: f64, stderr: f64) -> Check {
        Check::at_most(name, statement, (value - target).abs(), halfwidth, 0.0, stderr)
    }

    /// A property that holds or not, without noise.
    pub fn holds(name: &str, statement: &str, ok: bool) -> Check {
        let (lhs, rhs) = if ok { (0.0, 0.0) } else { (1.0, 0.0) };
        Check::at_most(name, statement, lhs, rhs, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub theorem_id: TheoremId,
    /// SHA-256 of the canonical JSON form of the config.
    pub inputs_digest: String,
    pub computed: BTreeMap<String, Quantity>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.computed.get(name).map(|q| q.value)
    }
}

/// Smallest `C` with `C e^{rate t} ≥ ci_high(t)` on a window of a survival curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub c: f64,
    pub rate: f64,
    pub window: (f64, f64),
    /// Time at which the constraint binds.
    pub t_star: f64,
    /// The constraint binds at the last grid time of a multi-point window,
    /// so `C` would keep growing on a longer window: the rate is steeper
    /// than the curve's decay.
    pub flagged: bool,
}

pub fn fit_envelope_constant(curve: &SurvivalCurve, rate: f64, window: (f64, f64)) -> Result<EnvelopeFit> {
    let sel: Vec<usize> = (0..curve.times.len())
        .filter(|&j| curve.times[j] >= window.0 && curve.times[j] <= window.1)
        .collect();
    if sel.is_empty() {
        return Err(Error::InsufficientData(format!(
            "empty envelope window [{}, {}]",
            window.0, window.1
        )));
    }
    let mut best = (f64::NEG_INFINITY, sel[0]);
    for &j in &sel {
        let c = curve.ci_high[j] * (-rate * curve.times[j]).exp();
        if c > best.0 {
            best = (c, j);
        }
    }
    Ok(EnvelopeFit {
        c: best.0,
        rate,
        window,
        t_star: curve.times[best.1],
        flagged: sel.len() > 1 && best.1 == *sel.last().unwrap(),
    })
}

/// `(0.5)`, `(40, 0)`: compact point labels for quantity names.
pub(crate) fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
    format!("({})", parts.join(", "))
}
