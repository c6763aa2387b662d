//! Monte Carlo exit times: single killed paths, survival curves with Wilson
//! bands, mean exit times and exponential decay fits.
//!
//! Path `i` of a run with seed `s` always draws from stream `(s, i)`, and
//! results are folded in stream order, so every estimate is a pure function
//! of its inputs regardless of the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::sampler::{grid_steps, stable_step_into, RngStream, StableParams};
use crate::stats::{mean_stderr, weighted_line_fit, wilson_interval, Z_95};

const GRID_TOL: f64 = 1e-9;

/// Outcome of one killed path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub exited: bool,
    /// Grid time of the exit, or `t_max` when censored.
    pub exit_time: f64,
    /// First exterior grid position; absent when censored or when the exit
    /// was detected by the bridge test between two interior positions.
    pub exit_location: Option<Vec<f64>>,
    pub first_exterior_grid_index: Option<usize>,
    pub bridge_crossing: bool,
}

#[derive(Debug, Clone, Copy)]
struct Kill {
    step: usize,
    bridge: bool,
}

fn check_run(dom: &Domain, params: &StableParams, x0: &[f64], dt: f64, t_max: f64, bridge: bool) -> Result<()> {
    params.validate()?;
    if dom.dim() != params.dim {
        return Err(Error::DimensionMismatch {
            expected: dom.dim(),
            got: params.dim,
        });
    }
    if x0.len() != params.dim {
        return Err(Error::DimensionMismatch {
            expected: params.dim,
            got: x0.len(),
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param(format!("dt must be positive, got {dt}")));
    }
    if !(t_max >= dt && t_max.is_finite()) {
        return Err(Error::param(format!("t_max ({t_max}) must be at least dt ({dt})")));
    }
    if bridge && !params.is_brownian() {
        return Err(Error::param(
            "bridge correction is only available for alpha = 2",
        ));
    }
    if !dom.contains(x0)? {
        return Err(Error::Precondition("starting point lies outside the domain".into()));
    }
    Ok(())
}

// Runs one path for at most `n_steps` steps of size `dt`; on exit `x` holds
// the first exterior position (or the last interior one for bridge exits).
fn run_path(
    dom: &Domain,
    params: &StableParams,
    x: &mut [f64],
    dt: f64,
    n_steps: usize,
    rng: &mut RngStream,
    bridge: bool,
    step: &mut [f64],
) -> Option<Kill> {
    let mut delta = if bridge { dom.dist_to_complement(x) } else { 0.0 };
    for k in 1..=n_steps {
        stable_step_into(params, dt, rng, step);
        for (xi, s) in x.iter_mut().zip(step.iter()) {
            *xi += s;
        }
        if !dom.inside(x) {
            return Some(Kill { step: k, bridge: false });
        }
        if bridge {
            let next = dom.dist_to_complement(x);
            let p = (-delta * next / dt).exp();
            if rng.open01() < p {
                return Some(Kill { step: k, bridge: true });
            }
            delta = next;
        }
    }
    None
}

/// Simulates one path on the grid `{k dt}` until it leaves `dom` or reaches
/// `t_max`. With `bridge_correction` (α = 2 only) an exit between grid points
/// is also flagged with probability `exp(-δ(x_k) δ(x_{k+1}) / dt)`.
pub fn simulate_exit(
    dom: &Domain,
    params: &StableParams,
    x0: &[f64],
    dt: f64,
    t_max: f64,
    rng: &mut RngStream,
    bridge_correction: bool,
) -> Result<ExitRecord> {
    check_run(dom, params, x0, dt, t_max, bridge_correction)?;
    let n = grid_steps(t_max, dt);
    let mut x = x0.to_vec();
    let mut buf = vec![0.0; params.dim];
    let kill = run_path(dom, params, &mut x, dt, n, rng, bridge_correction, &mut buf);
    Ok(match kill {
        Some(k) => ExitRecord {
            exited: true,
            exit_time: (k.step as f64 * dt).min(t_max),
            exit_location: if k.bridge { None } else { Some(x) },
            first_exterior_grid_index: Some(k.step),
            bridge_crossing: k.bridge,
        },
        None => ExitRecord {
            exited: false,
            exit_time: t_max,
            exit_location: None,
            first_exterior_grid_index: None,
            bridge_crossing: false,
        },
    })
}

/// Simulation settings shared by the Monte Carlo estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub bridge_correction: bool,
}

impl McSettings {
    pub fn new(n_paths: usize, dt: f64, seed: u64) -> Self {
        McSettings {
            n_paths,
            dt,
            seed,
            bridge_correction: false,
        }
    }

    pub fn with_bridge(mut self, on: bool) -> Self {
        self.bridge_correction = on;
        self
    }
}

// Exit step of every path (None = survived `n_steps`), in stream order.
fn exit_steps(
    dom: &Domain,
    params: &StableParams,
    x0: &[f64],
    n_steps: usize,
    mc: &McSettings,
) -> Vec<Option<usize>> {
    (0..mc.n_paths as u64)
        .into_par_iter()
        .map_init(
            || (vec![0.0; params.dim], vec![0.0; params.dim]),
            |(x, buf), i| {
                let mut rng = RngStream::new(mc.seed, i);
                x.copy_from_slice(x0);
                run_path(dom, params, x, mc.dt, n_steps, &mut rng, mc.bridge_correction, buf)
                    .map(|k| k.step)
            },
        )
        .collect()
}

/// Empirical survival function `P_x(τ > t)` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub x0: Vec<f64>,
    pub times: Vec<f64>,
    pub survivors: Vec<u64>,
    pub n_paths: u64,
    pub p_hat: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub dt: f64,
    pub seed: u64,
}

impl SurvivalCurve {
    /// Builds a curve from counts; Wilson 95% bands.
    pub fn from_counts(x0: Vec<f64>, times: Vec<f64>, survivors: Vec<u64>, n_paths: u64, dt: f64, seed: u64) -> Self {
        let mut p_hat = Vec::with_capacity(times.len());
        let mut ci_low = Vec::with_capacity(times.len());
        let mut ci_high = Vec::with_capacity(times.len());
        for &s in &survivors {
            let (lo, hi) = wilson_interval(s, n_paths, Z_95);
            let p = s as f64 / n_paths as f64;
            p_hat.push(p);
            ci_low.push(lo.min(p));
            ci_high.push(hi.max(p));
        }
        SurvivalCurve {
            x0,
            times,
            survivors,
            n_paths,
            p_hat,
            ci_low,
            ci_high,
            dt,
            seed,
        }
    }

    /// Writes the curve as CSV: `t,survivors,n_paths,p_hat,ci_low,ci_high`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "survivors", "n_paths", "p_hat", "ci_low", "ci_high"])?;
        for j in 0..self.times.len() {
            w.write_record([
                format!("{}", self.times[j]),
                self.survivors[j].to_string(),
                self.n_paths.to_string(),
                format!("{:.9e}", self.p_hat[j]),
                format!("{:.9e}", self.ci_low[j]),
                format!("{:.9e}", self.ci_high[j]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Trapezoid integral of `p_hat` over the grid (the grid starts at 0).
    pub fn integral(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.p_hat.windows(2))
            .map(|(t, p)| 0.5 * (t[1] - t[0]) * (p[0] + p[1]))
            .sum()
    }
}

/// Grid `0, step, 2 step, ..., t_max`.
pub fn uniform_grid(t_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && t_max > 0.0) {
        return Err(Error::param("time grid needs positive step and horizon"));
    }
    let n = grid_steps(t_max, step);
    Ok((0..=n).map(|k| (k as f64 * step).min(t_max)).collect())
}

// Grid index of `t` on the simulation grid, if aligned.
fn grid_index(t: f64, dt: f64) -> Option<usize> {
    let k = t / dt;
    let r = k.round();
    ((k - r).abs() <= GRID_TOL * r.max(1.0) && r >= 0.0).then_some(r as usize)
}

/// Survival curve from `n_paths` paths started at `x0`.
///
/// `t_grid` must be increasing and lie on the simulation grid `{k dt}`.
pub fn survival_curve(
    dom: &Domain,
    params: &StableParams,
    x0: &[f64],
    t_grid: &[f64],
    mc: &McSettings,
) -> Result<SurvivalCurve> {
    if mc.n_paths < 100 {
        return Err(Error::param(format!(
            "survival curves need at least 100 paths, got {}",
            mc.n_paths
        )));
    }
    let idx = grid_indices(t_grid, mc.dt)?;
    let t_max = *t_grid.last().unwrap();
    check_run(dom, params, x0, mc.dt, t_max.max(mc.dt), mc.bridge_correction)?;
    let sample = ExitSample::run(dom, params, x0, *idx.last().unwrap(), mc);
    sample.curve_at(t_grid, &idx)
}

fn grid_indices(t_grid: &[f64], dt: f64) -> Result<Vec<usize>> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] < 0.0 {
        return Err(Error::param("time grid must be nonempty, nonnegative and increasing"));
    }
    t_grid
        .iter()
        .map(|&t| {
            grid_index(t, dt).ok_or_else(|| {
                Error::param(format!("time {t} is not on the simulation grid with dt = {dt}"))
            })
        })
        .collect()
}

/// Exit steps of `n_paths` paths from one start, censored after `n_steps`.
///
/// Survival curves and mean exit times computed from the same sample share
/// every path.
#[derive(Debug, Clone)]
pub struct ExitSample {
    pub x0: Vec<f64>,
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
    steps: Vec<Option<usize>>,
}

/// Simulates exit times up to `t_max` (rounded to the `dt` grid).
pub fn exit_sample(
    dom: &Domain,
    params: &StableParams,
    x0: &[f64],
    t_max: f64,
    mc: &McSettings,
) -> Result<ExitSample> {
    check_run(dom, params, x0, mc.dt, t_max, mc.bridge_correction)?;
    if mc.n_paths < 2 {
        return Err(Error::param("exit samples need at least 2 paths"));
    }
    Ok(ExitSample::run(dom, params, x0, grid_steps(t_max, mc.dt), mc))
}

impl ExitSample {
    fn run(dom: &Domain, params: &StableParams, x0: &[f64], n_steps: usize, mc: &McSettings) -> Self {
        ExitSample {
            x0: x0.to_vec(),
            dt: mc.dt,
            n_steps,
            seed: mc.seed,
            steps: exit_steps(dom, params, x0, n_steps, mc),
        }
    }

    pub fn n_paths(&self) -> usize {
        self.steps.len()
    }

    pub fn t_max(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// Paths still alive at the horizon.
    pub fn censored(&self) -> usize {
        self.steps.iter().filter(|s| s.is_none()).count()
    }

    /// Survival curve on a grid of multiples of `dt` no later than the horizon.
    pub fn survival_curve(&self, t_grid: &[f64]) -> Result<SurvivalCurve> {
        if self.steps.len() < 100 {
            return Err(Error::param(format!(
                "survival curves need at least 100 paths, got {}",
                self.steps.len()
            )));
        }
        let idx = grid_indices(t_grid, self.dt)?;
        if *idx.last().unwrap() > self.n_steps {
            return Err(Error::param(format!(
                "time grid extends past the simulated horizon {}",
                self.t_max()
            )));
        }
        self.curve_at(t_grid, &idx)
    }

    fn curve_at(&self, t_grid: &[f64], idx: &[usize]) -> Result<SurvivalCurve> {
        let n_steps = self.n_steps;
        let mut exits_at = vec![0u64; n_steps + 2];
        for s in &self.steps {
            match s {
                Some(k) => exits_at[*k] += 1,
                None => exits_at[n_steps + 1] += 1,
            }
        }
        let mut alive_after = vec![0u64; n_steps + 2];
        let mut acc = 0u64;
        for k in (0..=n_steps + 1).rev() {
            alive_after[k] = acc;
            acc += exits_at[k];
        }
        let survivors = idx.iter().map(|&k| alive_after[k]).collect();
        Ok(SurvivalCurve::from_counts(
            self.x0.clone(),
            t_grid.to_vec(),
            survivors,
            self.steps.len() as u64,
            self.dt,
            self.seed,
        ))
    }

    /// Sample mean of `τ ∧ t_max`, plus the exponential tail
    /// `P(τ > t_max)/|rate|` when a decay fit is supplied.
    pub fn mean_exit_time(&self, fit: Option<&DecayFit>) -> Result<MeanExitEstimate> {
        let t_max = self.t_max();
        let times: Vec<f64> = self
            .steps
            .iter()
            .map(|s| match s {
                Some(k) => (*k as f64 * self.dt).min(t_max),
                None => t_max,
            })
            .collect();
        let censored = self.censored();
        if censored == times.len() {
            return Err(Error::InsufficientData(
                "t_max too small: every path was censored".into(),
            ));
        }
        let frac = censored as f64 / times.len() as f64;
        let (m, se) = mean_stderr(&times);
        let tail = match fit {
            Some(f) if censored > 0 && f.rate < 0.0 => frac / f.rate.abs(),
            _ => 0.0,
        };
        Ok(MeanExitEstimate {
            mean: m + tail,
            stderr: se,
            truncated_fraction: frac,
            tail_correction: tail,
            lower_bound: censored > 0 && fit.is_none(),
        })
    }
}

/// Which part of a survival curve enters the rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowPolicy {
    /// Grid times whose survivor count lies in `[min_survivors, max_fraction · n]`.
    Counts { min_survivors: u64, max_fraction: f64 },
    /// Grid times in `[t_lo, t_hi]`.
    Time { t_lo: f64, t_hi: f64 },
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy::Counts {
            min_survivors: 100,
            max_fraction: 0.2,
        }
    }
}

impl WindowPolicy {
    fn selects(&self, curve: &SurvivalCurve, j: usize) -> bool {
        match *self {
            WindowPolicy::Counts {
                min_survivors,
                max_fraction,
            } => {
                let s = curve.survivors[j];
                s >= min_survivors && s as f64 <= max_fraction * curve.n_paths as f64
            }
            WindowPolicy::Time { t_lo, t_hi } => curve.times[j] >= t_lo && curve.times[j] <= t_hi,
        }
    }
}

/// Fitted exponential decay `log p̂(t) ≈ a + rate · t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub n_points: usize,
    pub intercept: f64,
}

/// Weighted least squares fit of `log p̂` against `t` over the window, with
/// delta-method weights `n p̂ / (1 - p̂)`.
///
/// Neighbouring points of a survival curve share most of their paths, so
/// the reported standard error is the larger of the regression error and
/// the hazard-count error `|rate| / sqrt(exits in the window)`.
pub fn fit_decay_rate(curve: &SurvivalCurve, policy: &WindowPolicy) -> Result<DecayFit> {
    let n = curve.n_paths as f64;
    let sel: Vec<usize> = (0..curve.times.len())
        .filter(|&j| curve.survivors[j] > 0 && policy.selects(curve, j))
        .collect();
    if sel.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "insufficient tail data: {} usable grid points in the fit window, need 5",
            sel.len()
        )));
    }
    let x: Vec<f64> = sel.iter().map(|&j| curve.times[j]).collect();
    let y: Vec<f64> = sel.iter().map(|&j| curve.p_hat[j].ln()).collect();
    let w: Vec<f64> = sel
        .iter()
        .map(|&j| {
            let p = curve.p_hat[j];
            n * p / ((1.0 - p) + 1.0 / n)
        })
        .collect();
    let fit = weighted_line_fit(&x, &y, &w)
        .ok_or_else(|| Error::InsufficientData("insufficient tail data: degenerate window".into()))?;
    let first = sel[0];
    let last = *sel.last().unwrap();
    let exits = curve.survivors[first] - curve.survivors[last];
    let span = curve.times[last] - curve.times[first];
    let hazard_se = if exits > 0 {
        fit.slope.abs() / (exits as f64).sqrt()
    } else {
        1.0 / (curve.survivors[first] as f64 * span)
    };
    Ok(DecayFit {
        rate: fit.slope,
        stderr: fit.slope_stderr.max(hazard_se).max(f64::MIN_POSITIVE),
        window: (curve.times[first], curve.times[last]),
        r_squared: fit.r_squared,
        n_points: sel.len(),
        intercept: fit.intercept,
    })
}

/// Estimate of `E_x[τ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanExitEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub truncated_fraction: f64,
    pub tail_correction: f64,
    /// True when censored paths were present and no decay fit was available,
    /// so `mean` only bounds `E_x[τ]` from below.
    pub lower_bound: bool,
}

/// Mean exit time from `x0`. Censored paths contribute `t_max`; with a decay
/// fit the tail `p̂(t_max) / |rate|` is added.
pub fn mean_exit_time(
    dom: &Domain,
    params: &StableParams,
    x0: &[f64],
    t_max: f64,
    mc: &McSettings,
    fit: Option<&DecayFit>,
) -> Result<MeanExitEstimate> {
    exit_sample(dom, params, x0, t_max, mc)?.mean_exit_time(fit)
}

/// Rate shift between two step sizes on matched path budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtBiasReport {
    pub dt: f64,
    pub dt_fine: f64,
    pub rate: f64,
    pub rate_fine: f64,
    pub shift: f64,
    /// Combined standard error of the two fits.
    pub stderr: f64,
    /// `|shift| > stderr`.
    pub flagged: bool,
}

/// Fits decay rates at `dt` and `dt/2` with the same seed and path count.
pub fn dt_bias_check(
    dom: &Domain,
    params: &StableParams,
    x0: &[f64],
    t_grid: &[f64],
    mc: &McSettings,
    policy: &WindowPolicy,
) -> Result<DtBiasReport> {
    dt_bias_between(dom, params, x0, t_grid, mc, mc.dt / 2.0, policy)
}

/// As [`dt_bias_check`] with an explicit second step size.
pub fn dt_bias_between(
    dom: &Domain,
    params: &StableParams,
    x0: &[f64],
    t_grid: &[f64],
    mc: &McSettings,
    dt_fine: f64,
    policy: &WindowPolicy,
) -> Result<DtBiasReport> {
    let coarse = fit_decay_rate(&survival_curve(dom, params, x0, t_grid, mc)?, policy)?;
    let fine_mc = McSettings { dt: dt_fine, ..*mc };
    let fine = fit_decay_rate(&survival_curve(dom, params, x0, t_grid, &fine_mc)?, policy)?;
    let shift = fine.rate - coarse.rate;
    let stderr = (coarse.stderr.powi(2) + fine.stderr.powi(2)).sqrt();
    Ok(DtBiasReport {
        dt: mc.dt,
        dt_fine,
        rate: coarse.rate,
        rate_fine: fine.rate,
        shift,
        stderr,
        flagged: shift.abs() > stderr,
    })
}

/// Positions of surviving paths at a set of grid times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivorEndpoints {
    pub times: Vec<f64>,
    pub dim: usize,
    pub n_paths: u64,
    /// For each time, the flattened coordinates of the paths alive then.
    pub points: Vec<Vec<f64>>,
}

impl SurvivorEndpoints {
    pub fn count(&self, j: usize) -> usize {
        self.points[j].len() / self.dim
    }
}

/// Runs `n_paths` killed paths from `x0` and records where the survivors
/// are at each time of `times` (which must lie on the grid `{k dt}`).
pub fn survivor_endpoints(
    dom: &Domain,
    params: &StableParams,
    x0: &[f64],
    times: &[f64],
    mc: &McSettings,
) -> Result<SurvivorEndpoints> {
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("endpoint times must be nonempty and increasing"));
    }
    let idx: Vec<usize> = times
        .iter()
        .map(|&t| {
            grid_index(t, mc.dt)
                .filter(|k| *k > 0)
                .ok_or_else(|| Error::param(format!("time {t} is not on the simulation grid")))
        })
        .collect::<Result<_>>()?;
    check_run(dom, params, x0, mc.dt, *times.last().unwrap(), mc.bridge_correction)?;
    let dim = params.dim;
    let per_path: Vec<Vec<f64>> = (0..mc.n_paths as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; dim],
            |buf, i| {
                let mut rng = RngStream::new(mc.seed, i);
                let mut x = x0.to_vec();
                let mut out = Vec::new();
                let mut done = 0;
                for (j, &k) in idx.iter().enumerate() {
                    match run_path(dom, params, &mut x, mc.dt, k - done, &mut rng, mc.bridge_correction, buf) {
                        Some(_) => break,
                        None => {
                            out.push(j as f64);
                            out.extend_from_slice(&x);
                            done = k;
                        }
                    }
                }
                out
            },
        )
        .collect();
    let mut points = vec![Vec::new(); times.len()];
    for rec in &per_path {
        for chunk in rec.chunks(dim + 1) {
            points[chunk[0] as usize].extend_from_slice(&chunk[1..]);
        }
    }
    Ok(SurvivorEndpoints {
        times: times.to_vec(),
        dim,
        n_paths: mc.n_paths as u64,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn interval() -> Domain {
        Domain::interval(-1.0, 1.0).unwrap()
    }

    // P_0(τ > t) for generator Δ on (-1, 1): Σ_{k odd} 4/(kπ) sin(kπ/2) e^{-k²π²t/4}
    fn brownian_survival(t: f64) -> f64 {
        (0..200)
            .map(|m| {
                let k = (2 * m + 1) as f64;
                4.0 / (k * PI) * (k * PI / 2.0).sin() * (-k * k * PI * PI * t / 4.0).exp()
            })
            .sum()
    }

    #[test]
    fn censoring_and_preconditions() {
        let p = StableParams::new(1.0, 1).unwrap();
        let mut rng = RngStream::new(3, 0);
        let r = simulate_exit(&interval(), &p, &[0.0], 1e-3, 1e-3, &mut rng, false).unwrap();
        if !r.exited {
            assert_eq!(r.exit_time, 1e-3);
            assert!(r.exit_location.is_none());
        }
        assert!(simulate_exit(&interval(), &p, &[2.0], 1e-3, 1.0, &mut rng, false).is_err());
        assert!(simulate_exit(&interval(), &p, &[0.0], 1e-3, 1.0, &mut rng, true).is_err());
        let far = Domain::half_space(vec![1.0], 0.0).unwrap();
        let r = simulate_exit(&far, &p, &[-0.5], 0.1, 1e4, &mut rng, false).unwrap();
        assert!(r.exited);
        let loc = r.exit_location.unwrap();
        assert!(!far.inside(&loc));
        assert!(r.exit_time <= 1e4);
    }

    #[test]
    fn cauchy_leaves_the_interval() {
        let p = StableParams::new(1.0, 1).unwrap();
        let dom = interval();
        let exited = (0..10_000u64)
            .filter(|&i| {
                let mut rng = RngStream::new(11, i);
                simulate_exit(&dom, &p, &[0.0], 1e-3, 50.0, &mut rng, false).unwrap().exited
            })
            .count();
        assert!(exited >= 9990);
    }

    #[test]
    fn distant_half_space_is_rarely_left() {
        // P(X_1 > 10^6) for the Cauchy law is about 3.2e-7.
        let p = StableParams::new(1.0, 1).unwrap();
        let dom = Domain::half_space(vec![1.0], 1e6).unwrap();
        let mc = McSettings::new(10_000, 0.01, 5);
        let c = survival_curve(&dom, &p, &[0.0], &[0.0, 1.0], &mc).unwrap();
        assert!(c.p_hat[1] > 1.0 - 1e-3);
    }

    #[test]
    fn brownian_survival_matches_eigen_expansion() {
        let p = StableParams::new(2.0, 1).unwrap();
        let mc = McSettings::new(20_000, 5e-4, 17).with_bridge(true);
        let grid = uniform_grid(1.5, 0.05).unwrap();
        let c = survival_curve(&interval(), &p, &[0.0], &grid, &mc).unwrap();
        assert_eq!(c.p_hat[0], 1.0);
        assert!(c.survivors.windows(2).all(|w| w[1] <= w[0]));
        let j = 20;
        assert!((c.times[j] - 1.0).abs() < 1e-12);
        let exact = brownian_survival(1.0);
        assert!((exact - 0.10798).abs() < 1e-5);
        let half = 0.5 * (c.ci_high[j] - c.ci_low[j]);
        assert!((c.p_hat[j] - exact).abs() < 3.0 * half, "{} vs {exact}", c.p_hat[j]);
        for j in 0..c.times.len() {
            assert!(c.ci_low[j] <= c.p_hat[j] && c.p_hat[j] <= c.ci_high[j]);
        }
    }

    #[test]
    fn curves_are_deterministic_and_aligned() {
        let p = StableParams::new(1.5, 1).unwrap();
        let mc = McSettings::new(500, 1e-2, 99);
        let grid = uniform_grid(1.0, 0.1).unwrap();
        let a = survival_curve(&interval(), &p, &[0.2], &grid, &mc).unwrap();
        let b = survival_curve(&interval(), &p, &[0.2], &grid, &mc).unwrap();
        assert_eq!(a, b);
        assert!(survival_curve(&interval(), &p, &[0.2], &[0.0, 0.015], &mc).is_err());
        assert!(survival_curve(&interval(), &p, &[0.2], &grid, &McSettings::new(50, 1e-2, 1)).is_err());
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,survivors,n_paths,p_hat,ci_low,ci_high\n0,500,500,"));
    }

    #[test]
    fn survival_increases_under_inclusion() {
        let p = StableParams::new(1.0, 1).unwrap();
        let mc = McSettings::new(2000, 1e-2, 4);
        let grid = uniform_grid(2.0, 0.1).unwrap();
        let small = survival_curve(&Domain::interval(-0.8, 1.0).unwrap(), &p, &[0.0], &grid, &mc).unwrap();
        let big = survival_curve(&Domain::interval(-1.0, 1.2).unwrap(), &p, &[0.0], &grid, &mc).unwrap();
        assert!(small.survivors.iter().zip(&big.survivors).all(|(s, b)| s <= b));
    }

    fn synthetic(rate: f64, n: u64) -> SurvivalCurve {
        let times: Vec<f64> = (0..=60).map(|k| k as f64 * 0.05).collect();
        let survivors = times
            .iter()
            .map(|t| (n as f64 * (rate * t).exp()).round() as u64)
            .collect();
        SurvivalCurve::from_counts(vec![0.0], times, survivors, n, 0.05, 0)
    }

    #[test]
    fn decay_fit_recovers_exact_exponential() {
        let c = synthetic(-2.0, 10_000_000);
        let f = fit_decay_rate(&c, &WindowPolicy::default()).unwrap();
        assert!((f.rate + 2.0).abs() < 1e-3, "{}", f.rate);
        assert!(f.n_points >= 5 && f.window.0 < f.window.1 && f.stderr > 0.0);

        let flat = synthetic(0.0, 1000);
        let f = fit_decay_rate(&flat, &WindowPolicy::Time { t_lo: 0.0, t_hi: 3.0 }).unwrap();
        assert!(f.rate.abs() < 1e-12);
        assert!(f.stderr >= 1.0 / 3000.0 - 1e-12);
        assert!(matches!(
            fit_decay_rate(&flat, &WindowPolicy::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn mean_exit_of_brownian_interval() {
        let p = StableParams::new(2.0, 1).unwrap();
        let mc = McSettings::new(20_000, 1e-3, 8).with_bridge(true);
        let m = mean_exit_time(&interval(), &p, &[0.0], 20.0, &mc, None).unwrap();
        assert!((m.mean - 0.5).abs() < 3.0 * m.stderr + 1e-3, "{m:?}");
        assert!(!m.lower_bound);
        assert!(mean_exit_time(&interval(), &p, &[0.0], 1e-3, &McSettings::new(10, 1e-3, 1), None).is_err());
    }

    #[test]
    fn mean_exit_agrees_with_curve_integral() {
        let p = StableParams::new(1.0, 1).unwrap();
        let mc = McSettings::new(4000, 1e-2, 21);
        let t_max = 3.0;
        let grid = uniform_grid(t_max, mc.dt).unwrap();
        let c = survival_curve(&interval(), &p, &[0.0], &grid, &mc).unwrap();
        let f = fit_decay_rate(&c, &WindowPolicy::Counts { min_survivors: 50, max_fraction: 0.3 }).unwrap();
        let m = mean_exit_time(&interval(), &p, &[0.0], t_max, &mc, Some(&f)).unwrap();
        assert!(m.truncated_fraction > 0.0 && m.tail_correction > 0.0);
        // identical paths: E[τ ∧ T] = Σ dt · survivors(k dt)/n exactly on the grid
        let riemann: f64 = c.p_hat[..c.p_hat.len() - 1].iter().sum::<f64>() * mc.dt;
        assert!((m.mean - m.tail_correction - riemann).abs() < 1e-9);
        let trap = c.integral() + c.p_hat.last().unwrap() / f.rate.abs();
        assert!((m.mean - trap).abs() < 2.0 * m.stderr);
    }

    #[test]
    fn shared_sample_matches_separate_estimators() {
        let p = StableParams::new(1.0, 1).unwrap();
        let mc = McSettings::new(2000, 1e-2, 8);
        let grid = uniform_grid(2.0, 0.1).unwrap();
        let s = exit_sample(&interval(), &p, &[0.3], 2.0, &mc).unwrap();
        assert_eq!(s.n_paths(), 2000);
        let c = s.survival_curve(&grid).unwrap();
        assert_eq!(c, survival_curve(&interval(), &p, &[0.3], &grid, &mc).unwrap());
        assert_eq!(*c.survivors.last().unwrap(), s.censored() as u64);
        let m = s.mean_exit_time(None).unwrap();
        assert_eq!(m, mean_exit_time(&interval(), &p, &[0.3], 2.0, &mc, None).unwrap());
        let long = uniform_grid(3.0, 0.1).unwrap();
        assert!(s.survival_curve(&long).is_err());
    }

    #[test]
    fn dt_bias_with_identical_steps_is_zero() {
        let p = StableParams::new(1.0, 1).unwrap();
        let mc = McSettings::new(3000, 1e-2, 5);
        let grid = uniform_grid(4.0, 0.1).unwrap();
        let policy = WindowPolicy::Counts { min_survivors: 30, max_fraction: 0.3 };
        let r = dt_bias_between(&interval(), &p, &[0.0], &grid, &mc, mc.dt, &policy).unwrap();
        assert_eq!(r.shift, 0.0);
        assert!(!r.flagged);
    }

    #[test]
    fn endpoints_match_survival_counts() {
        let p = StableParams::new(1.0, 1).unwrap();
        let mc = McSettings::new(2000, 1e-2, 13);
        let times = [0.5, 1.0, 2.0];
        let e = survivor_endpoints(&interval(), &p, &[0.0], &times, &mc).unwrap();
        let c = survival_curve(&interval(), &p, &[0.0], &times, &mc).unwrap();
        for j in 0..3 {
            assert_eq!(e.count(j) as u64, c.survivors[j]);
            assert!(e.points[j].iter().all(|x| x.abs() < 1.0));
        }
    }

    #[test]
    fn rate_scales_with_interval_width() {
        // λ((-r, r)) = r^{-α} λ((-1, 1)); compare r = 1 and r = 2 at α = 1.5.
        let p = StableParams::new(1.5, 1).unwrap();
        let policy = WindowPolicy::Counts { min_survivors: 100, max_fraction: 0.3 };
        let mc = McSettings::new(8000, 2e-3, 2);
        let g1 = uniform_grid(4.0, 0.02).unwrap();
        let f1 = fit_decay_rate(&survival_curve(&interval(), &p, &[0.0], &g1, &mc).unwrap(), &policy).unwrap();
        // time scales by 2^α; an independent seed makes this a statistical check
        let k = 2f64.powf(1.5);
        let mc2 = McSettings { dt: mc.dt * k, seed: 3, ..mc };
        let g2: Vec<f64> = g1.iter().map(|t| t * k).collect();
        let wide = Domain::interval(-2.0, 2.0).unwrap();
        let f2 = fit_decay_rate(&survival_curve(&wide, &p, &[0.0], &g2, &mc2).unwrap(), &policy).unwrap();
        let predicted = f1.rate * 2f64.powf(-1.5);
        let tol = 3.0 * (f1.stderr * 2f64.powf(-1.5) + f2.stderr);
        assert!((f2.rate - predicted).abs() < tol, "{} vs {predicted} ± {tol}", f2.rate);
    }
}
