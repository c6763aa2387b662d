use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::ExperimentConfig;
use super::verify::{run_verification, Run};
use super::VerificationReport;
use crate::error::{Error, Result};
use crate::exit::{DecayFit, SurvivalCurve};
use crate::spectral::{write_ladder_csv, LadderDiagnostics, SpectralEstimate};

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

/// Wall-clock seconds per stage, kept out of the bundle so that bundles
/// stay byte-identical across runs.
pub type Timings = Vec<(String, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralRecord {
    pub name: String,
    pub estimate: SpectralEstimate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<LadderDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub name: String,
    pub curve: SurvivalCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub name: String,
    pub fit: DecayFit,
}

/// Seed taken from the environment instead of the config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedOverride {
    pub variable: String,
    pub value: u64,
}

/// Everything one experiment produced; replayable from `config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultBundle {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_override: Option<SeedOverride>,
    pub spectral: Vec<SpectralRecord>,
    pub curves: Vec<CurveRecord>,
    pub fits: Vec<FitRecord>,
    pub reports: Vec<VerificationReport>,
}

impl ResultBundle {
    pub fn empty(config: ExperimentConfig) -> Self {
        ResultBundle {
            schema_version: BUNDLE_SCHEMA_VERSION,
            config,
            seed_override: None,
            spectral: Vec::new(),
            curves: Vec::new(),
            fits: Vec::new(),
            reports: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.spectral.is_empty() && self.curves.is_empty() && self.fits.is_empty() && self.reports.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Structural equality through the canonical JSON form.
    pub fn same_as(&self, other: &ResultBundle) -> bool {
        matches!((self.to_json(), other.to_json()), (Ok(a), Ok(b)) if a == b)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    run_experiment_timed(cfg).map(|(b, _)| b)
}

/// With a theorem id, runs its verification; without one, computes the
/// spectral estimate (where available) and the survival curve at the start
/// point with its decay fit.
pub fn run_experiment_timed(cfg: &ExperimentConfig) -> Result<(ResultBundle, Timings)> {
    cfg.validate()?;
    let mut bundle = ResultBundle::empty(cfg.clone());
    match cfg.theorem {
        Some(id) => {
            let a = run_verification(id, cfg)?;
            bundle.spectral = a.spectral;
            bundle.curves = a.curves;
            bundle.fits = a.fits;
            bundle.reports.push(a.report);
            Ok((bundle, a.timings))
        }
        None => {
            let started = Instant::now();
            let mut run = Run::new(cfg);
            run.survey()?;
            run.timings.push(("total".into(), started.elapsed().as_secs_f64()));
            bundle.spectral = run.spectral;
            bundle.curves = run.curves;
            bundle.fits = run.fits;
            Ok((bundle, run.timings))
        }
    }
}

pub fn save_bundle(path: &Path, bundle: &ResultBundle) -> Result<()> {
    let mut text = bundle.to_json()?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<ResultBundle> {
    let text = fs::read_to_string(path)?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let found = raw
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Config(format!("{}: missing schema_version", path.display())))?;
    if found != BUNDLE_SCHEMA_VERSION as u64 {
        return Err(Error::SchemaVersion {
            found: found as u32,
            expected: BUNDLE_SCHEMA_VERSION,
        });
    }
    let bundle: ResultBundle = serde_json::from_value(raw)?;
    bundle.config.validate()?;
    Ok(bundle)
}

fn safe_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

/// Writes plot-ready CSVs under `dir`: one per survival curve and ladder,
/// plus `rates.csv` and `checks.csv`. Returns the written paths.
pub fn write_artifacts(bundle: &ResultBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for c in &bundle.curves {
        let p = dir.join(format!("curve_{}.csv", safe_name(&c.name)));
        c.curve.write_csv(fs::File::create(&p)?)?;
        out.push(p);
    }
    for s in &bundle.spectral {
        if let Some(ladder) = &s.estimate.resolution_ladder {
            let p = dir.join(format!("ladder_{}.csv", safe_name(&s.name)));
            write_ladder_csv(ladder, fs::File::create(&p)?)?;
            out.push(p);
        }
    }
    if !bundle.fits.is_empty() {
        let p = dir.join("rates.csv");
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["name", "rate", "stderr", "t_lo", "t_hi", "n_points", "r_squared"])?;
        for f in &bundle.fits {
            w.write_record([
                f.name.clone(),
                f.fit.rate.to_string(),
                f.fit.stderr.to_string(),
                f.fit.window.0.to_string(),
                f.fit.window.1.to_string(),
                f.fit.n_points.to_string(),
                f.fit.r_squared.to_string(),
            ])?;
        }
        w.flush()?;
        out.push(p);
    }
    if !bundle.reports.is_empty() {
        let p = dir.join("checks.csv");
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["theorem", "check", "lhs", "rhs", "margin", "tol", "stderr", "verdict"])?;
        for r in &bundle.reports {
            for c in &r.checks {
                w.write_record([
                    r.theorem_id.to_string(),
                    c.name.clone(),
                    c.lhs.to_string(),
                    c.rhs.to_string(),
                    c.margin.to_string(),
                    c.tol.to_string(),
                    c.stderr.to_string(),
                    c.verdict.as_str().to_string(),
                ])?;
            }
        }
        w.flush()?;
        out.push(p);
    }
    Ok(out)
}

/// Writes stage timings as `stage,seconds`.
pub fn write_timings(timings: &Timings, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "stage,seconds")?;
    for (stage, secs) in timings {
        writeln!(f, "{stage},{secs:.3}")?;
    }
    Ok(())
}
