use std::fs;
use std::path::Path;

use stabsurv::bounds::{
    default_kernel_rate, dirichlet_kernel_envelope, free_kernel_envelope, inradius_lower, iteration_exponent,
    limit_rate, prelim_exponent, survival_upper_envelope, EnvelopeParams,
};
use stabsurv::exit::{exit_sample, fit_decay_rate};
use stabsurv::harness::{
    apply_overrides, load_bundle, load_config, render_report, run_experiment_timed, save_bundle, write_artifacts,
    write_timings, ExperimentConfig, ResultBundle, SeedOverride, TheoremId, Timings,
};
use stabsurv::sampler::sample_path;
use stabsurv::spectral::{horn_bottom_with_ladder, interval_eigenvalue, tube_bottom, write_ladder_csv, Normalization};
use stabsurv::{Domain, Error, Result, RngStream, SpectralEstimate};

use crate::{BoundArgs, ConfigArgs, Formula, Outcome, Units, SEED_ENV};

/// Reads the config, applies `--set` overrides and the seed override
/// (flag first, then environment).
fn load(args: &ConfigArgs) -> Result<(ExperimentConfig, Option<SeedOverride>)> {
    let cfg = load_config(&args.config)?;
    let mut cfg = apply_overrides(&cfg, &args.overrides)?;
    let from_env = match std::env::var(SEED_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got {v:?}")))?,
        ),
        Err(_) => None,
    };
    let seed_override = match (args.seed, from_env) {
        (Some(s), _) => Some(SeedOverride {
            variable: "--seed".into(),
            value: s,
        }),
        (None, Some(s)) => Some(SeedOverride {
            variable: SEED_ENV.into(),
            value: s,
        }),
        (None, None) => None,
    };
    if let Some(o) = &seed_override {
        cfg.mc.seed = o.value;
    }
    Ok((cfg, seed_override))
}

fn write_bundle_outputs(bundle: &ResultBundle, timings: &Timings, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let path = out.join("bundle.json");
    save_bundle(&path, bundle)?;
    write_artifacts(bundle, out)?;
    write_timings(timings, &out.join("timings.csv"))?;
    fs::write(out.join("report.md"), render_report(bundle, Some(timings))?)?;
    println!("bundle written to {}", path.display());
    Ok(())
}

pub fn sample(args: &ConfigArgs, paths: usize) -> Result<Outcome> {
    let (cfg, _) = load(args)?;
    let params = cfg.params();
    let x0 = cfg.start_point()?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join("paths.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["path".to_string(), "t".to_string()];
    header.extend((1..=params.dim).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for i in 0..paths {
        let mut rng = RngStream::new(cfg.mc.seed, i as u64);
        let p = sample_path(&params, &x0, cfg.mc.t_max, cfg.mc.dt, &mut rng)?;
        for (t, x) in p.times.iter().zip(&p.positions) {
            let mut rec = vec![i.to_string(), t.to_string()];
            rec.extend(x.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    println!("{paths} paths written to {}", path.display());
    Ok(Outcome::Done)
}

pub fn survival(args: &ConfigArgs) -> Result<Outcome> {
    let (mut cfg, seed_override) = load(args)?;
    cfg.theorem = None;
    let (mut bundle, timings) = run_experiment_timed(&cfg)?;
    bundle.seed_override = seed_override;
    for f in &bundle.fits {
        println!(
            "{}: rate {:.6} ± {:.6} on [{}, {}]",
            f.name, f.fit.rate, f.fit.stderr, f.fit.window.0, f.fit.window.1
        );
    }
    for s in &bundle.spectral {
        println!("{}: {:.6} ± {:.2e}", s.name, s.estimate.value, s.estimate.error);
    }
    write_bundle_outputs(&bundle, &timings, &args.out)?;
    Ok(Outcome::Done)
}

pub fn meanexit(args: &ConfigArgs) -> Result<Outcome> {
    let (cfg, _) = load(args)?;
    let params = cfg.params();
    let mc = cfg.mc_settings();
    let x0 = cfg.start_point()?;
    let mut points = vec![x0.clone()];
    points.extend(cfg.mc.probes.iter().filter(|p| **p != x0).cloned());
    let grid = cfg.time_grid();
    fs::create_dir_all(&args.out)?;
    let path = args.out.join("meanexit.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header: Vec<String> = (1..=params.dim).map(|i| format!("x{i}")).collect();
    header.extend(
        ["mean", "stderr", "truncated_fraction", "tail_correction", "lower_bound"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    let mut tail_fit = None;
    for (k, x) in points.iter().enumerate() {
        let sample = exit_sample(&cfg.domain, &params, x, cfg.mc.t_max, &mc)?;
        if k == 0 {
            // The tail rate is a property of the domain; fit it once at the start.
            tail_fit = sample
                .survival_curve(&grid)
                .and_then(|c| fit_decay_rate(&c, &cfg.fit.window))
                .ok();
        }
        let m = sample.mean_exit_time(tail_fit.as_ref())?;
        println!("x = {x:?}: E[tau] = {:.6} ± {:.6}", m.mean, m.stderr);
        let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        rec.extend([
            m.mean.to_string(),
            m.stderr.to_string(),
            m.truncated_fraction.to_string(),
            m.tail_correction.to_string(),
            m.lower_bound.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    println!("written to {}", path.display());
    Ok(Outcome::Done)
}

fn domain_spectrum(dom: &Domain, alpha: f64, ladder: &[usize]) -> Result<SpectralEstimate> {
    match dom {
        Domain::Interval { a, b } => interval_eigenvalue(alpha, 0.5 * (b - a), ladder),
        Domain::Ball { center, radius } if center.len() == 1 => interval_eigenvalue(alpha, *radius, ladder),
        Domain::Tube { cross_section, .. } => Ok(tube_bottom(&domain_spectrum(cross_section, alpha, ladder)?)),
        Domain::Horn { .. } => horn_bottom_with_ladder(dom, alpha, ladder),
        other => Err(Error::Config(format!(
            "no spectral solver for a {} domain",
            other.name()
        ))),
    }
}

pub fn spectrum(
    config: Option<&Path>,
    alpha: Option<f64>,
    halfwidth: f64,
    ladder: &[usize],
    csv_out: Option<&Path>,
) -> Result<Outcome> {
    let est = match (config, alpha) {
        (Some(p), _) => {
            let cfg = load_config(p)?;
            domain_spectrum(&cfg.domain, cfg.process.alpha, &cfg.spectral.resolutions)?
        }
        (None, Some(a)) => interval_eigenvalue(a, halfwidth, ladder)?,
        (None, None) => return Err(Error::Config("spectrum needs --config or --alpha".into())),
    };
    println!("lambda = {:.10} ± {:.3e} ({:?})", est.value, est.error, est.method);
    if let Some(l) = &est.resolution_ladder {
        for (n, v) in l {
            println!("  n = {n}: {v:.10}");
        }
        if let Some(p) = csv_out {
            write_ladder_csv(l, fs::File::create(p)?)?;
        }
    }
    Ok(Outcome::Done)
}

fn need(v: Option<f64>, flag: &str, formula: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("{flag} is required for {formula}")))
}

pub fn bound(a: &BoundArgs) -> Result<Outcome> {
    let d = a.d as f64;
    let value = match a.formula {
        Formula::InradiusLower => {
            let units = match a.units {
                Units::Seminorm => Normalization::Seminorm,
                Units::Generator => Normalization::Generator,
            };
            inradius_lower(
                a.d,
                a.alpha,
                need(a.r, "--r", "inradius-lower")?,
                need(a.big_r, "--R", "inradius-lower")?,
                units,
            )?
            .value
        }
        Formula::IterationExponent => iteration_exponent(a.n, d, a.alpha, a.eps),
        Formula::PrelimExponent => prelim_exponent(d, a.alpha, a.eps),
        Formula::LimitRate => limit_rate(d, a.alpha, need(a.lambda, "--lambda", "limit-rate")?),
        Formula::SurvivalEnvelope => {
            let p = EnvelopeParams {
                c: a.c,
                eps: a.eps,
                lambda: need(a.lambda, "--lambda", "survival-envelope")?,
                d,
                alpha: a.alpha,
            };
            p.validate()?;
            survival_upper_envelope(&p, need(a.t, "--t", "survival-envelope")?)
        }
        Formula::FreeKernel => free_kernel_envelope(d, a.alpha, need(a.t, "--t", "free-kernel")?, a.dist),
        Formula::DirichletKernel => {
            let rate = default_kernel_rate(d, a.alpha, need(a.lambda, "--lambda", "dirichlet-kernel")?, a.eps);
            dirichlet_kernel_envelope(
                need(a.t, "--t", "dirichlet-kernel")?,
                need(a.delta_x, "--delta-x", "dirichlet-kernel")?,
                need(a.delta_y, "--delta-y", "dirichlet-kernel")?,
                a.dist,
                rate,
                a.c,
                d,
                a.alpha,
            )
        }
    };
    println!("{value}");
    Ok(Outcome::Done)
}

pub fn verify(theorem: Option<&str>, args: &ConfigArgs) -> Result<Outcome> {
    let (mut cfg, seed_override) = load(args)?;
    let id = match theorem {
        Some(t) => t.parse::<TheoremId>()?,
        None => cfg
            .theorem
            .ok_or_else(|| Error::Config("no theorem given: pass --theorem or set `theorem` in the config".into()))?,
    };
    cfg.theorem = Some(id);
    let (mut bundle, timings) = run_experiment_timed(&cfg)?;
    bundle.seed_override = seed_override;
    let report = bundle.reports.last().expect("verification bundles carry a report");
    for c in &report.checks {
        println!(
            "{:<14} {:<34} margin {:>12.4e} tol {:>10.3e}  {}",
            id.as_str(),
            c.name,
            c.margin,
            c.tol,
            c.verdict.as_str()
        );
    }
    println!("verdict: {}", report.verdict.as_str());
    let verdict = report.verdict;
    write_bundle_outputs(&bundle, &timings, &args.out)?;
    Ok(Outcome::Verdict(verdict))
}

fn read_timings(path: &Path) -> Result<Timings> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let secs = rec
            .get(1)
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("{}: malformed timings row", path.display())))?;
        out.push((rec.get(0).unwrap_or("").to_string(), secs));
    }
    Ok(out)
}

pub fn report(bundle: &Path, timings: Option<&Path>, out: Option<&Path>) -> Result<Outcome> {
    let b = load_bundle(bundle)?;
    let t = timings.map(read_timings).transpose()?;
    let text = render_report(&b, t.as_ref())?;
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(Outcome::Done)
}
