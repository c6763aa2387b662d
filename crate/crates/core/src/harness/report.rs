use std::fmt::Write;

use super::bundle::{ResultBundle, Timings};
use crate::error::{Error, Result};

fn num(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-3 && v.abs() < 1e5) {
        format!("{v:.6}")
    } else {
        format!("{v:.4e}")
    }
}

/// Markdown summary of a bundle: verdicts, checks with margins, every
/// computed quantity with its provenance, spectral ladders, fits, seeds
/// and (when given) runtimes.
pub fn render_report(bundle: &ResultBundle, timings: Option<&Timings>) -> Result<String> {
    if bundle.is_empty() {
        return Err(Error::InsufficientData("cannot report an empty bundle".into()));
    }
    let cfg = &bundle.config;
    let mut s = String::new();
    let w = &mut s;
    // Writing into a String cannot fail.
    let _ = writeln!(w, "# {}\n", cfg.name);
    let _ = writeln!(
        w,
        "- process: alpha = {}, dim = {}\n- domain: {}\n- paths: {}, dt = {}, t_max = {}, seed = {}",
        cfg.process.alpha,
        cfg.process.dim,
        cfg.domain.name(),
        cfg.mc.n_paths,
        cfg.mc.dt,
        cfg.mc.t_max,
        cfg.mc.seed
    );
    if let Some(o) = &bundle.seed_override {
        let _ = writeln!(w, "- seed override: {} = {}", o.variable, o.value);
    }
    let _ = writeln!(w, "- config digest: `{}`", cfg.digest());

    for r in &bundle.reports {
        let _ = writeln!(w, "\n## {}: {}\n", r.theorem_id, r.verdict.as_str().to_uppercase());
        let _ = writeln!(w, "| check | statement | lhs | rhs | margin | tol | stderr | verdict |");
        let _ = writeln!(w, "|---|---|---|---|---|---|---|---|");
        for c in &r.checks {
            let _ = writeln!(
                w,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                c.name,
                c.statement,
                num(c.lhs),
                num(c.rhs),
                num(c.margin),
                num(c.tol),
                num(c.stderr),
                c.verdict.as_str()
            );
        }
        let _ = writeln!(w, "\n| quantity | value | stderr | provenance | note |");
        let _ = writeln!(w, "|---|---|---|---|---|");
        for (name, q) in &r.computed {
            let _ = writeln!(
                w,
                "| {} | {} | {} | {} | {} |",
                name,
                num(q.value),
                q.stderr.map(num).unwrap_or_default(),
                q.provenance.as_str(),
                q.label.as_deref().unwrap_or("")
            );
        }
        if !r.notes.is_empty() {
            let _ = writeln!(w);
            for n in &r.notes {
                let _ = writeln!(w, "- {n}");
            }
        }
    }

    if !bundle.spectral.is_empty() {
        let _ = writeln!(w, "\n## Spectral estimates\n");
        for sp in &bundle.spectral {
            let e = &sp.estimate;
            let _ = writeln!(w, "- {}: {} ± {} ({:?})", sp.name, num(e.value), num(e.error), e.method);
            if let Some(ladder) = &e.resolution_ladder {
                let rungs: Vec<String> = ladder.iter().map(|(n, v)| format!("{n}: {}", num(*v))).collect();
                let _ = writeln!(w, "  - ladder {}", rungs.join(", "));
            }
            if let Some(d) = &sp.diagnostics {
                let _ = writeln!(
                    w,
                    "  - observed order {}, monotone {}, last shift {}",
                    d.order.map(num).unwrap_or_else(|| "n/a".into()),
                    d.monotone,
                    num(d.last_shift)
                );
            }
        }
    }
    if !bundle.fits.is_empty() {
        let _ = writeln!(w, "\n## Decay fits\n");
        for f in &bundle.fits {
            let _ = writeln!(
                w,
                "- {}: rate {} ± {} on [{}, {}], {} points",
                f.name,
                num(f.fit.rate),
                num(f.fit.stderr),
                f.fit.window.0,
                f.fit.window.1,
                f.fit.n_points
            );
        }
    }
    if !bundle.curves.is_empty() {
        let _ = writeln!(w, "\n## Survival curves\n");
        for c in &bundle.curves {
            let _ = writeln!(
                w,
                "- {}: start {:?}, {} paths, seed {}, {} grid times",
                c.name,
                c.curve.x0,
                c.curve.n_paths,
                c.curve.seed,
                c.curve.times.len()
            );
        }
    }
    if let Some(t) = timings {
        let _ = writeln!(w, "\n## Runtimes\n");
        for (stage, secs) in t {
            let _ = writeln!(w, "- {stage}: {secs:.2} s");
        }
    }
    Ok(s)
}
