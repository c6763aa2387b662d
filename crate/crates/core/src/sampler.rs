//! Exact-marginal sampling of symmetric stable increments.
//!
//! The process is realized as Brownian motion with generator `Δ` (per
//! coordinate variance `2t`) run on the clock of an independent
//! `alpha/2`-stable subordinator, so that `E[exp(i ξ·X_t)] = exp(-t |ξ|^alpha)`.
//! Every increment is drawn exactly; no series truncation is involved.

use rand::distr::{Distribution, Open01};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Stability index and ambient dimension of a symmetric stable process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub dim: usize,
}

impl StableParams {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        let p = StableParams { alpha, dim };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::param(format!(
                "alpha must lie in (0, 2], got {}",
                self.alpha
            )));
        }
        if self.dim == 0 {
            return Err(Error::param("dim must be at least 1"));
        }
        Ok(())
    }

    /// Index of the subordinator, `alpha / 2`.
    pub fn beta(&self) -> f64 {
        self.alpha / 2.0
    }

    pub fn is_brownian(&self) -> bool {
        self.alpha == 2.0
    }
}

/// A reproducible random stream addressed by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id mapped onto the cipher's stream
/// counter, so path `i` always draws from the same sequence no matter which
/// thread runs it or in which order.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn open01(&mut self) -> f64 {
        Open01.sample(self)
    }

    #[inline]
    pub fn std_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    #[inline]
    pub fn std_exp(&mut self) -> f64 {
        Exp1.sample(self)
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Grid path of the process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub subordinator_values: Option<Vec<f64>>,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal(&self) -> &[f64] {
        self.positions.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Unit-time positive stable variable with `E[exp(-u S)] = exp(-u^beta)`,
/// `0 < beta < 1`, by Kanter's representation.
#[inline]
fn positive_stable_unit(beta: f64, rng: &mut RngStream) -> f64 {
    let u = PI * rng.open01();
    let w = rng.std_exp();
    let a = (beta * u).sin() / u.sin().powf(1.0 / beta);
    let b = (((1.0 - beta) * u).sin() / w).powf((1.0 - beta) / beta);
    a * b
}

fn check_beta_dt(beta: f64, dt: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::param(format!(
            "subordinator index must lie in (0, 1], got {beta}"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// Increment of the `beta`-stable subordinator over a time step `dt`.
///
/// The Laplace transform of the result is `exp(-dt * u^beta)`. For
/// `beta = 1` the subordinator is the identity clock and `dt` is returned.
pub fn sample_subordinator_increment(beta: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
    check_beta_dt(beta, dt)?;
    Ok(subordinator_increment_unchecked(beta, dt, rng))
}

#[inline]
pub(crate) fn subordinator_increment_unchecked(beta: f64, dt: f64, rng: &mut RngStream) -> f64 {
    if beta == 1.0 {
        dt
    } else {
        dt.powf(1.0 / beta) * positive_stable_unit(beta, rng)
    }
}

/// Writes one stable increment over `dt` into `out` (length `params.dim`).
#[inline]
pub(crate) fn stable_step_into(params: &StableParams, dt: f64, rng: &mut RngStream, out: &mut [f64]) {
    let ds = subordinator_increment_unchecked(params.beta(), dt, rng);
    let scale = (2.0 * ds).sqrt();
    for v in out.iter_mut() {
        *v = scale * rng.std_normal();
    }
}

/// One increment `Δx = sqrt(2 ΔS) G` of the stable process over `dt`.
pub fn sample_stable_step(params: &StableParams, dt: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    params.validate()?;
    check_beta_dt(params.beta(), dt)?;
    let mut out = vec![0.0; params.dim];
    stable_step_into(params, dt, rng, &mut out);
    Ok(out)
}

/// Number of grid steps covering `[0, t_max]` with spacing `dt`; the last
/// step may be shorter when `t_max` is not a multiple of `dt`.
pub(crate) fn grid_steps(t_max: f64, dt: f64) -> usize {
    let n = t_max / dt;
    let rounded = n.round();
    if (n - rounded).abs() <= 1e-9 * n.max(1.0) {
        rounded as usize
    } else {
        n.ceil() as usize
    }
}

/// Path on the grid `{0, dt, 2dt, ..., t_max}` started at `x0`, recording
/// the subordinator clock alongside the positions.
pub fn sample_path(
    params: &StableParams,
    x0: &[f64],
    t_max: f64,
    dt: f64,
    rng: &mut RngStream,
) -> Result<PathSample> {
    params.validate()?;
    check_beta_dt(params.beta(), dt)?;
    if x0.len() != params.dim {
        return Err(Error::DimensionMismatch {
            expected: params.dim,
            got: x0.len(),
        });
    }
    if !(t_max >= dt) {
        return Err(Error::param(format!(
            "t_max ({t_max}) must be at least dt ({dt})"
        )));
    }
    let n = grid_steps(t_max, dt);
    let mut times = Vec::with_capacity(n + 1);
    let mut positions = Vec::with_capacity(n + 1);
    let mut clock = Vec::with_capacity(n + 1);
    times.push(0.0);
    positions.push(x0.to_vec());
    clock.push(0.0);

    let mut x = x0.to_vec();
    let mut s = 0.0;
    for k in 1..=n {
        let t = if k == n { t_max } else { k as f64 * dt };
        let h = t - times[k - 1];
        let ds = subordinator_increment_unchecked(params.beta(), h, rng);
        let scale = (2.0 * ds).sqrt();
        for xi in x.iter_mut() {
            *xi += scale * rng.std_normal();
        }
        s += ds;
        times.push(t);
        positions.push(x.clone());
        clock.push(s);
    }
    Ok(PathSample {
        times,
        positions,
        subordinator_values: Some(clock),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_statistic, ks_two_sample};
    use statrs::function::erf::erfc;

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(StableParams::new(2.5, 1).is_err());
        assert!(StableParams::new(0.0, 1).is_err());
        assert!(StableParams::new(1.0, 0).is_err());
        let mut rng = RngStream::new(1, 0);
        assert!(sample_subordinator_increment(1.2, 1.0, &mut rng).is_err());
        assert!(sample_subordinator_increment(0.5, 0.0, &mut rng).is_err());
        assert!(sample_subordinator_increment(0.5, -1.0, &mut rng).is_err());
    }

    #[test]
    fn degenerate_subordinator_is_the_clock() {
        let mut rng = RngStream::new(7, 3);
        for _ in 0..10 {
            assert_eq!(sample_subordinator_increment(1.0, 0.5, &mut rng).unwrap(), 0.5);
        }
    }

    // Oracle: S = 1/(2 Z^2) for a standard normal Z has Laplace transform
    // exp(-sqrt(u)). Check the oracle itself against the Laplace transform
    // before using its CDF erfc(1/(2 sqrt s)) against the sampler.
    #[test]
    fn half_stable_oracle_matches_laplace_transform() {
        let mut rng = RngStream::new(99, 0);
        let n = 200_000;
        for &u in &[0.5, 1.0, 2.0] {
            let xs: Vec<f64> = (0..n)
                .map(|_| {
                    let z = rng.std_normal();
                    (-u / (2.0 * z * z)).exp()
                })
                .collect();
            let (m, se) = mean_se(&xs);
            let want = (-f64::sqrt(u)).exp();
            assert!((m - want).abs() < 4.0 * se, "u={u}: {m} vs {want}");
        }
    }

    #[test]
    fn half_stable_laplace_and_cdf() {
        let mut rng = RngStream::new(2024, 0);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| (-sample_subordinator_increment(0.5, 1.0, &mut rng).unwrap()).exp())
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m - (-1.0f64).exp()).abs() < 3.0 * se, "{m} ± {se}");

        let mut rng = RngStream::new(2024, 1);
        let mut s: Vec<f64> = (0..100_000)
            .map(|_| sample_subordinator_increment(0.5, 1.0, &mut rng).unwrap())
            .collect();
        let d = ks_statistic(&mut s, |x| erfc(1.0 / (2.0 * x.sqrt())));
        assert!(d < 0.005, "KS = {d}");
    }

    #[test]
    fn laplace_transform_property() {
        for (i, &beta) in [0.3, 0.5, 0.9].iter().enumerate() {
            for &dt in &[1.0, 0.25] {
                let mut rng = RngStream::new(11, i as u64);
                let s: Vec<f64> = (0..100_000)
                    .map(|_| sample_subordinator_increment(beta, dt, &mut rng).unwrap())
                    .collect();
                for &u in &[0.5, 1.0, 2.0] {
                    let xs: Vec<f64> = s.iter().map(|v| (-u * v).exp()).collect();
                    let (m, se) = mean_se(&xs);
                    let want = (-dt * f64::powf(u, beta)).exp();
                    assert!(
                        (m - want).abs() < 4.0 * se,
                        "beta={beta} dt={dt} u={u}: {m} vs {want} (se {se})"
                    );
                }
            }
        }
    }

    #[test]
    fn characteristic_function_property() {
        for (i, &alpha) in [0.8, 1.0, 1.5, 2.0].iter().enumerate() {
            let p = StableParams::new(alpha, 1).unwrap();
            let mut rng = RngStream::new(5, i as u64);
            let dx: Vec<f64> = (0..100_000)
                .map(|_| sample_stable_step(&p, 1.0, &mut rng).unwrap()[0])
                .collect();
            for &xi in &[0.5, 1.0, 2.0] {
                let c: Vec<f64> = dx.iter().map(|x| (xi * x).cos()).collect();
                let (m, se) = mean_se(&c);
                let want = (-f64::powf(xi, alpha)).exp();
                assert!((m - want).abs() < 4.0 * se, "alpha={alpha} xi={xi}: {m} vs {want}");
            }
        }
    }

    #[test]
    fn brownian_variance_is_two_t() {
        let p = StableParams::new(2.0, 1).unwrap();
        let mut rng = RngStream::new(8, 0);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| sample_stable_step(&p, 1.0, &mut rng).unwrap()[0])
            .collect();
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (m, se) = mean_se(&sq);
        assert!((m - 2.0).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn cauchy_marginal() {
        let p = StableParams::new(1.0, 1).unwrap();
        let mut rng = RngStream::new(31, 0);
        let mut xs: Vec<f64> = (0..100_000)
            .map(|_| sample_stable_step(&p, 1.0, &mut rng).unwrap()[0])
            .collect();
        let tail: Vec<f64> = xs.iter().map(|x| f64::from(u8::from(x.abs() > 10.0))).collect();
        let (m, se) = mean_se(&tail);
        // 1 - (2/pi) arctan(10)
        let want = 1.0 - 2.0 / PI * 10f64.atan();
        assert!((want - 0.0634).abs() < 1e-4);
        assert!((m - want).abs() < 3.0 * se, "{m} vs {want}");
        let d = ks_statistic(&mut xs, |x| 0.5 + x.atan() / PI);
        assert!(d < 0.005, "KS = {d}");
    }

    #[test]
    fn scaling_in_law() {
        for (i, &alpha) in [0.7, 1.0, 1.6].iter().enumerate() {
            let p = StableParams::new(alpha, 1).unwrap();
            let dt = 0.01;
            let mut r1 = RngStream::new(17, 2 * i as u64);
            let mut r2 = RngStream::new(17, 2 * i as u64 + 1);
            let mut a: Vec<f64> = (0..20_000)
                .map(|_| sample_stable_step(&p, dt, &mut r1).unwrap()[0])
                .collect();
            let mut b: Vec<f64> = (0..20_000)
                .map(|_| dt.powf(1.0 / alpha) * sample_stable_step(&p, 1.0, &mut r2).unwrap()[0])
                .collect();
            let d = ks_two_sample(&mut a, &mut b);
            // 1% critical value for equal sizes: 1.628 * sqrt(2/n)
            let crit = 1.628 * (2.0 / 20_000.0f64).sqrt();
            assert!(d < crit, "alpha={alpha}: D={d} crit={crit}");
        }
    }

    #[test]
    fn path_grid_and_reproducibility() {
        let p = StableParams::new(1.3, 2).unwrap();
        let a = sample_path(&p, &[0.0, 1.0], 0.1, 0.1, &mut RngStream::new(3, 4)).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.positions[0], vec![0.0, 1.0]);

        let a = sample_path(&p, &[0.0, 0.0], 1.0, 0.01, &mut RngStream::new(3, 4)).unwrap();
        let b = sample_path(&p, &[0.0, 0.0], 1.0, 0.01, &mut RngStream::new(3, 4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 101);
        assert!(a.times.windows(2).all(|w| w[1] > w[0]));
        let s = a.subordinator_values.as_ref().unwrap();
        assert!(s.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*a.times.last().unwrap(), 1.0);

        let c = sample_path(&p, &[0.0, 0.0], 1.0, 0.01, &mut RngStream::new(3, 5)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn path_terminal_variance_brownian() {
        let p = StableParams::new(2.0, 1).unwrap();
        let n = 20_000;
        let sq: Vec<f64> = (0..n)
            .map(|i| {
                let path = sample_path(&p, &[0.0], 1.0, 0.001, &mut RngStream::new(77, i)).unwrap();
                path.terminal()[0].powi(2)
            })
            .collect();
        let (m, se) = mean_se(&sq);
        assert!((m - 2.0).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn planar_cauchy_is_isotropic() {
        // Angles of the terminal point should be uniform on (-pi, pi].
        let p = StableParams::new(1.0, 2).unwrap();
        let mut angles: Vec<f64> = (0..20_000)
            .map(|i| {
                let path = sample_path(&p, &[0.0, 0.0], 1.0, 0.1, &mut RngStream::new(13, i)).unwrap();
                let x = path.terminal();
                x[1].atan2(x[0])
            })
            .collect();
        let d = ks_statistic(&mut angles, |a| (a + PI) / (2.0 * PI));
        // 1% critical value 1.628/sqrt(n)
        assert!(d < 1.628 / (20_000.0f64).sqrt(), "KS = {d}");
    }
}
