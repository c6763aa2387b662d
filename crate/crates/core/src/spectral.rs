//! Bottom of the Dirichlet spectrum of the restricted fractional Laplacian.
//!
//! All values are in generator units: the operator is `(-Δ)^{α/2}` acting on
//! functions extended by zero outside the domain, normalized so that its
//! symbol is `|ξ|^α`. The Gagliardo quadratic form therefore carries the
//! factor `C(d, α) / 2`.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::domain::Domain;
use crate::error::{Error, Result};

/// Resolutions used for extrapolated eigenvalues unless told otherwise.
pub const DEFAULT_LADDER: [usize; 3] = [256, 512, 1024];

const EIG_TOL: f64 = 1e-10;
const EIG_MAX_ITER: usize = 500;

/// Normalization constant `C(d, α)` of the hypersingular integral
/// `(-Δ)^{α/2} u(x) = C P.V.∫ (u(x) - u(y)) / |x - y|^{d+α} dy`.
pub fn frac_kernel_constant(dim: usize, alpha: f64) -> f64 {
    let d = dim as f64;
    2f64.powf(alpha) * gamma((d + alpha) / 2.0)
        / (PI.powf(d / 2.0) * gamma(-alpha / 2.0).abs())
}

/// Factor turning a bare seminorm quotient into generator units, `C(d, α)/2`.
pub fn seminorm_to_generator(dim: usize, alpha: f64) -> f64 {
    if alpha >= 2.0 {
        1.0
    } else {
        0.5 * frac_kernel_constant(dim, alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Symbol `|ξ|^α`; the generator of `exp(-t|ξ|^α)`.
    Generator,
    /// Quadratic form equal to the bare Gagliardo seminorm `[u]^2`.
    Seminorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Eigensolver,
    RayleighUpper,
    InradiusLower,
    McDecay,
    TubeIdentity,
}

/// A value of `λ(D)` or `λ₁` with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub method: Method,
    /// Estimated absolute error.
    pub error: f64,
    pub resolution_ladder: Option<Vec<(usize, f64)>>,
}

impl SpectralEstimate {
    pub fn exact(value: f64) -> Self {
        SpectralEstimate {
            value,
            method: Method::Exact,
            error: 0.0,
            resolution_ladder: None,
        }
    }
}

/// Dense discretization of `(-Δ)^{α/2}` (or `-Δ`) on `(-halfwidth, halfwidth)`
/// with zero exterior data. Unknowns sit on the `n - 1` interior nodes.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub halfwidth: f64,
    pub n: usize,
    pub h: f64,
    pub alpha: f64,
    pub normalization: Normalization,
    pub matrix: DMatrix<f64>,
}

impl DiscreteOperator {
    /// Interior grid nodes.
    pub fn nodes(&self) -> Vec<f64> {
        (1..self.n)
            .map(|i| -self.halfwidth + i as f64 * self.h)
            .collect()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(u);
        (&self.matrix * v).iter().copied().collect()
    }

    /// The same operator in the other normalization.
    pub fn renormalized(&self, normalization: Normalization) -> DiscreteOperator {
        let factor = seminorm_to_generator(1, self.alpha);
        let scale = match (self.normalization, normalization) {
            (Normalization::Generator, Normalization::Seminorm) => 1.0 / factor,
            (Normalization::Seminorm, Normalization::Generator) => factor,
            _ => 1.0,
        };
        DiscreteOperator {
            matrix: &self.matrix * scale,
            normalization,
            ..self.clone()
        }
    }
}

fn check_grid(halfwidth: f64, n: usize) -> Result<()> {
    if n < 16 {
        return Err(Error::param(format!("grid needs n >= 16 intervals, got {n}")));
    }
    if !(halfwidth > 0.0 && halfwidth.is_finite()) {
        return Err(Error::param("halfwidth must be positive"));
    }
    Ok(())
}

/// Restricted fractional Laplacian on a uniform grid.
///
/// For each node the integrand `2u(x) - u(x+z) - u(x-z)` is replaced by its
/// second difference times `z^2/h^2` on `(0, h)` and by its piecewise linear
/// interpolant on `(h, z_K)`; both pieces are integrated exactly against
/// `z^{-1-α}`. Beyond `z_K` both arguments lie outside the domain, so the
/// tail `2u(x) z_K^{-α}/α` is exact.
pub fn frac_laplacian_1d(alpha: f64, halfwidth: f64, n: usize) -> Result<DiscreteOperator> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::param(format!(
            "fractional operator needs alpha in (0, 2), got {alpha}"
        )));
    }
    check_grid(halfwidth, n)?;
    let h = 2.0 * halfwidth / n as f64;
    let z = |k: usize| k as f64 * h;
    // ∫_lo^hi z^p dz for p = -1 - alpha and p = -alpha
    let pow_int = |p: f64, lo: f64, hi: f64| -> f64 {
        if (p + 1.0).abs() < 1e-14 {
            (hi / lo).ln()
        } else {
            (hi.powf(p + 1.0) - lo.powf(p + 1.0)) / (p + 1.0)
        }
    };
    let mut a_w = vec![0.0; n + 1];
    let mut b_w = vec![0.0; n + 1];
    for k in 1..=n {
        let (lo, hi) = (z(k), z(k + 1));
        let i0 = pow_int(-1.0 - alpha, lo, hi);
        let i1 = pow_int(-alpha, lo, hi);
        a_w[k] = (hi * i0 - i1) / h;
        b_w[k] = (i1 - lo * i0) / h;
    }
    let mut w = vec![0.0; n + 1];
    w[1] = a_w[1] + h.powf(-alpha) / (2.0 - alpha);
    for k in 2..=n {
        w[k] = a_w[k] + b_w[k - 1];
    }
    let mut prefix = vec![0.0; n + 1];
    for k in 1..=n {
        prefix[k] = prefix[k - 1] + w[k];
    }

    let c = frac_kernel_constant(1, alpha);
    let m = n - 1;
    let mut mat = DMatrix::<f64>::zeros(m, m);
    for i in 1..n {
        let k_far = (n - i).max(i);
        let diag = 2.0 * (prefix[k_far - 1] + b_w[k_far - 1]) + 2.0 * z(k_far).powf(-alpha) / alpha;
        mat[(i - 1, i - 1)] = c * diag;
        for j in (i + 1)..n {
            let v = -c * w[j - i];
            mat[(i - 1, j - 1)] = v;
            mat[(j - 1, i - 1)] = v;
        }
    }
    Ok(DiscreteOperator {
        halfwidth,
        n,
        h,
        alpha,
        normalization: Normalization::Generator,
        matrix: mat,
    })
}

/// Second-difference matrix for `-Δ` with zero boundary values.
pub fn laplacian_1d(halfwidth: f64, n: usize) -> Result<DiscreteOperator> {
    check_grid(halfwidth, n)?;
    let h = 2.0 * halfwidth / n as f64;
    let m = n - 1;
    let inv = 1.0 / (h * h);
    let mut mat = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        mat[(i, i)] = 2.0 * inv;
        if i + 1 < m {
            mat[(i, i + 1)] = -inv;
            mat[(i + 1, i)] = -inv;
        }
    }
    Ok(DiscreteOperator {
        halfwidth,
        n,
        h,
        alpha: 2.0,
        normalization: Normalization::Generator,
        matrix: mat,
    })
}

/// Operator for any `alpha` in `(0, 2]`.
pub fn operator_1d(alpha: f64, halfwidth: f64, n: usize) -> Result<DiscreteOperator> {
    if alpha == 2.0 {
        laplacian_1d(halfwidth, n)
    } else {
        frac_laplacian_1d(alpha, halfwidth, n)
    }
}

#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Unit-norm eigenvector with positive sum.
    pub vector: Vec<f64>,
}

/// Smallest eigenvalue by inverse power iteration on a Cholesky factor.
pub fn smallest_eigenvalue(op: &DiscreteOperator) -> Result<EigenSolution> {
    smallest_eigenvalue_shifted(op, 0.0)
}

/// Inverse iteration with `(A - shift I)^{-1}`; `shift` must lie below the
/// smallest eigenvalue.
pub fn smallest_eigenvalue_shifted(op: &DiscreteOperator, shift: f64) -> Result<EigenSolution> {
    let m = op.matrix.nrows();
    let mut shifted = op.matrix.clone();
    for i in 0..m {
        shifted[(i, i)] -= shift;
    }
    let chol = Cholesky::new(shifted).ok_or_else(|| {
        Error::Precondition("operator is not positive definite below the shift".into())
    })?;
    // Smooth positive start, close to the ground state.
    let mut v = DVector::from_iterator(
        m,
        (1..=m).map(|i| (PI * i as f64 / (m + 1) as f64).sin()),
    );
    v /= v.norm();
    let mut residual = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for it in 1..=EIG_MAX_ITER {
        let mut w = chol.solve(&v);
        w /= w.norm();
        let aw = &op.matrix * &w;
        let mu = w.dot(&aw);
        residual = (&aw - &w * mu).norm() / mu.abs();
        v = w;
        if residual <= EIG_TOL {
            return Ok(finish(v, mu, residual, it));
        }
        // Rounding floor of the residual for very fine grids.
        if residual < best * 0.999 {
            best = residual;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 8 && best < 1e-8 {
                return Ok(finish(v, mu, residual, it));
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: EIG_MAX_ITER,
        residual,
    })
}

fn finish(v: DVector<f64>, value: f64, residual: f64, iterations: usize) -> EigenSolution {
    let sign = if v.sum() < 0.0 { -1.0 } else { 1.0 };
    EigenSolution {
        value,
        residual,
        iterations,
        vector: v.iter().map(|x| sign * x).collect(),
    }
}

/// Diagnostics of a resolution ladder `(n, value)`, finest last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderDiagnostics {
    pub extrapolated: f64,
    /// Observed convergence order from the last three rungs.
    pub order: Option<f64>,
    /// `|extrapolated - finest|`, the applied correction.
    pub error: f64,
    pub monotone: bool,
    pub last_shift: f64,
}

/// Aitken extrapolation of the last three rungs, falling back to an assumed
/// `fallback_order` when the observed ratio is not a contraction.
pub fn extrapolate_ladder(ladder: &[(usize, f64)], fallback_order: f64) -> LadderDiagnostics {
    let vals: Vec<f64> = ladder.iter().map(|p| p.1).collect();
    let k = vals.len();
    let last = vals[k - 1];
    if k < 2 {
        return LadderDiagnostics {
            extrapolated: last,
            order: None,
            error: f64::INFINITY,
            monotone: true,
            last_shift: 0.0,
        };
    }
    let diffs: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = diffs.iter().all(|d| *d <= 0.0) || diffs.iter().all(|d| *d >= 0.0);
    let d2 = diffs[k - 2];
    let (extrapolated, order) = if k >= 3 {
        let d1 = diffs[k - 3];
        let ratio = d1 / d2;
        if ratio > 1.05 && d1.signum() == d2.signum() {
            (last - d2 * d2 / (d2 - d1), Some(ratio.log2()))
        } else {
            (last + d2 / (2f64.powf(fallback_order) - 1.0), None)
        }
    } else {
        (last + d2 / (2f64.powf(fallback_order) - 1.0), None)
    };
    LadderDiagnostics {
        extrapolated,
        order,
        error: (extrapolated - last).abs(),
        monotone,
        last_shift: d2,
    }
}

/// Writes a resolution ladder as CSV with columns `n,value`.
pub fn write_ladder_csv<W: std::io::Write>(ladder: &[(usize, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "value"])?;
    for (n, v) in ladder {
        w.write_record([n.to_string(), format!("{v:.12e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// `λ₁((-halfwidth, halfwidth))` extrapolated across a resolution ladder.
pub fn interval_eigenvalue(alpha: f64, halfwidth: f64, ladder: &[usize]) -> Result<SpectralEstimate> {
    if ladder.is_empty() {
        return Err(Error::param("empty resolution ladder"));
    }
    let mut rungs = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let op = operator_1d(alpha, halfwidth, n)?;
        rungs.push((n, smallest_eigenvalue(&op)?.value));
    }
    let fallback = if alpha == 2.0 { 2.0 } else { 1.0 };
    let diag = extrapolate_ladder(&rungs, fallback);
    Ok(SpectralEstimate {
        value: diag.extrapolated,
        method: Method::Eigensolver,
        error: diag.error,
        resolution_ladder: Some(rungs),
    })
}

/// Grid function on the interior nodes of an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub halfwidth: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl GridFunction {
    /// Linear interpolation with zero boundary values.
    pub fn value_at(&self, x: f64) -> f64 {
        let l = self.halfwidth;
        if x <= -l || x >= l {
            return 0.0;
        }
        let h = 2.0 * l / (self.x.len() + 1) as f64;
        let s = (x + l) / h;
        let i = s.floor() as usize;
        let t = s - i as f64;
        let at = |k: usize| {
            if k == 0 || k > self.x.len() {
                0.0
            } else {
                self.u[k - 1]
            }
        };
        (1.0 - t) * at(i) + t * at(i + 1)
    }
}

/// Solves `operator · u = 1` with zero exterior data; `u(x) = E_x[τ]`.
pub fn solve_frac_poisson(alpha: f64, halfwidth: f64, n: usize) -> Result<GridFunction> {
    let op = operator_1d(alpha, halfwidth, n)?;
    let m = op.matrix.nrows();
    let chol = Cholesky::new(op.matrix.clone())
        .ok_or_else(|| Error::Precondition("operator is not positive definite".into()))?;
    let u = chol.solve(&DVector::from_element(m, 1.0));
    Ok(GridFunction {
        halfwidth,
        x: op.nodes(),
        u: u.iter().copied().collect(),
    })
}

/// Mean exit time `E_x[τ]` from `(-halfwidth, halfwidth)` at the given
/// points, extrapolated across a ladder. Interpolation acts on the smooth
/// ratio `u(x) / (L^2 - x^2)^{α/2}`.
pub fn mean_exit_oracle(
    alpha: f64,
    halfwidth: f64,
    points: &[f64],
    ladder: &[usize],
) -> Result<Vec<SpectralEstimate>> {
    let l = halfwidth;
    let weight = |x: f64| (l * l - x * x).max(0.0).powf(alpha / 2.0);
    let mut per_point: Vec<Vec<(usize, f64)>> = vec![Vec::new(); points.len()];
    for &n in ladder {
        let g = solve_frac_poisson(alpha, halfwidth, n)?;
        let ratio = GridFunction {
            halfwidth,
            x: g.x.clone(),
            u: g.x.iter().zip(&g.u).map(|(x, u)| u / weight(*x)).collect(),
        };
        for (p, &x) in points.iter().enumerate() {
            let v = if x.abs() >= l {
                0.0
            } else {
                ratio_interp(&ratio, x) * weight(x)
            };
            per_point[p].push((n, v));
        }
    }
    let fallback = if alpha == 2.0 { 2.0 } else { 1.0 };
    Ok(per_point
        .into_iter()
        .map(|rungs| {
            let d = extrapolate_ladder(&rungs, fallback);
            SpectralEstimate {
                value: d.extrapolated,
                method: Method::Eigensolver,
                error: d.error,
                resolution_ladder: Some(rungs),
            }
        })
        .collect())
}

// Interpolates the ratio, extending flat beyond the outermost nodes.
fn ratio_interp(g: &GridFunction, x: f64) -> f64 {
    let n = g.x.len();
    if x <= g.x[0] {
        return g.u[0];
    }
    if x >= g.x[n - 1] {
        return g.u[n - 1];
    }
    let h = g.x[1] - g.x[0];
    let s = (x - g.x[0]) / h;
    let i = (s.floor() as usize).min(n - 2);
    let t = s - i as f64;
    (1.0 - t) * g.u[i] + t * g.u[i + 1]
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

struct Panels {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Panels {
    fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Panels { nodes, weights }
    }

    fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + r * x))
            .sum::<f64>()
            * r
    }

    fn integrate_breaks<F: FnMut(f64) -> f64>(&self, breaks: &[f64], mut f: F) -> f64 {
        breaks
            .windows(2)
            .map(|w| self.integrate(w[0], w[1], &mut f))
            .sum()
    }
}

type ProfileFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Trial function for Rayleigh quotients on an interval `(a, b)`; every
/// variant vanishes outside the interval.
#[derive(Clone)]
pub enum TestFunction {
    /// `(r^2 - (x - c)^2)_+`
    Parabola,
    /// `(r - |x - c|)_+`
    Tent,
    /// `cos(π (x - c) / (2r))` on the interval, the Brownian ground state.
    Cosine,
    /// User profile with the points where it fails to be smooth.
    Custom {
        f: Arc<ProfileFn>,
        breakpoints: Vec<f64>,
    },
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TestFunction::Parabola => write!(f, "Parabola"),
            TestFunction::Tent => write!(f, "Tent"),
            TestFunction::Cosine => write!(f, "Cosine"),
            TestFunction::Custom { breakpoints, .. } => {
                write!(f, "Custom {{ breakpoints: {breakpoints:?} }}")
            }
        }
    }
}

impl TestFunction {
    fn eval(&self, a: f64, b: f64, x: f64) -> f64 {
        if x <= a || x >= b {
            return 0.0;
        }
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        match self {
            TestFunction::Parabola => r * r - (x - c) * (x - c),
            TestFunction::Tent => r - (x - c).abs(),
            TestFunction::Cosine => (PI * (x - c) / (2.0 * r)).cos(),
            TestFunction::Custom { f, .. } => f(x),
        }
    }

    fn breaks(&self, a: f64, b: f64) -> Vec<f64> {
        let mut v = vec![a, b];
        match self {
            TestFunction::Tent => v.push(0.5 * (a + b)),
            TestFunction::Custom { breakpoints, .. } => {
                v.extend(breakpoints.iter().copied().filter(|p| *p > a && *p < b))
            }
            _ => {}
        }
        v
    }
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    v
}

fn rayleigh_1d_quotient(alpha: f64, a: f64, b: f64, test: &TestFunction, panels_n: usize) -> Result<f64> {
    let gl = Panels::new(8);
    let u = |x: f64| test.eval(a, b, x);
    let base = sorted_unique(test.breaks(a, b));
    // Subdivide every smooth piece into panels.
    let refine = |bp: &[f64]| -> Vec<f64> {
        let per = (panels_n / bp.len().max(1)).max(2);
        let mut out = Vec::new();
        for w in bp.windows(2) {
            for k in 0..per {
                out.push(w[0] + (w[1] - w[0]) * k as f64 / per as f64);
            }
        }
        out.push(*bp.last().unwrap());
        out
    };
    let fine = refine(&base);
    let norm2 = gl.integrate_breaks(&fine, |x| u(x).powi(2));
    if !(norm2 > 0.0) {
        return Err(Error::param("test function vanishes identically"));
    }
    if alpha >= 2.0 {
        let eps = 1e-6 * (b - a);
        let grad2 = gl.integrate_breaks(&fine, |x| ((u(x + eps) - u(x - eps)) / (2.0 * eps)).powi(2));
        return Ok(grad2 / norm2);
    }
    let span = b - a;
    // G(z) = ∫ |u(x+z) - u(x)|^2 dx, piecewise polynomial between shifted breaks.
    let g = |z: f64| -> f64 {
        let mut bp: Vec<f64> = base.clone();
        bp.extend(base.iter().map(|p| p - z));
        let bp = sorted_unique(bp);
        let bp = refine(&bp);
        gl.integrate_breaks(&bp, |x| (u(x + z) - u(x)).powi(2))
    };
    // z = span t^m flattens the z^{1-α} endpoint behaviour.
    let m = 2.0 / (2.0 - alpha);
    let mut t_breaks: Vec<f64> = (0..=panels_n).map(|k| k as f64 / panels_n as f64).collect();
    // kinks of G where shifted breakpoints cross
    for p in &base {
        for q in &base {
            let z = q - p;
            if z > 0.0 && z < span {
                t_breaks.push((z / span).powf(1.0 / m));
            }
        }
    }
    let t_breaks = sorted_unique(t_breaks);
    let near = gl.integrate_breaks(&t_breaks, |t| {
        if t <= 0.0 {
            return 0.0;
        }
        let z = span * t.powf(m);
        let dz = span * m * t.powf(m - 1.0);
        g(z) * z.powf(-1.0 - alpha) * dz
    });
    let tail = 2.0 * norm2 * span.powf(-alpha) / alpha;
    let seminorm = 2.0 * (near + tail);
    Ok(seminorm_to_generator(1, alpha) * seminorm / norm2)
}

/// Rayleigh upper bound `(C(1,α)/2) [u]^2 / ‖u‖^2` for a trial function
/// supported in an interval; the local form `‖u'‖^2/‖u‖^2` for `α = 2`.
pub fn rayleigh_upper(
    alpha: f64,
    domain: &Domain,
    test: &TestFunction,
    quadrature_n: usize,
) -> Result<SpectralEstimate> {
    let (a, b) = match domain {
        Domain::Interval { a, b } => (*a, *b),
        Domain::Ball { center, radius } if center.len() == 1 => (center[0] - radius, center[0] + radius),
        other => {
            return Err(Error::param(format!(
                "1-D Rayleigh quotients need an interval, got {}",
                other.name()
            )))
        }
    };
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::param(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    let n = quadrature_n.max(8);
    let fine = rayleigh_1d_quotient(alpha, a, b, test, n)?;
    let coarse = rayleigh_1d_quotient(alpha, a, b, test, n / 2)?;
    Ok(SpectralEstimate {
        value: fine,
        method: Method::RayleighUpper,
        error: (fine - coarse).abs(),
        resolution_ladder: None,
    })
}

/// Rayleigh upper bound in `R^2` for the radial trial function
/// `(R^2 - |x - c|^2)_+` of a ball of radius `radius`.
///
/// Uses `[u]^2 = 2π ∫_0^∞ G(s) s^{-1-α} ds` with `G(s) = ∫ |u(x + s e) - u(x)|^2 dx`,
/// the inner integral done in polar coordinates split at the circles where
/// either copy of `u` is kinked.
pub fn rayleigh_upper_disk(alpha: f64, radius: f64, quadrature_n: usize) -> Result<SpectralEstimate> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::param(format!(
            "planar Rayleigh quotient needs alpha in (0, 2), got {alpha}"
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::param("test function vanishes identically"));
    }
    let fine = disk_quotient(alpha, radius, quadrature_n.max(8));
    let coarse = disk_quotient(alpha, radius, (quadrature_n / 2).max(4));
    Ok(SpectralEstimate {
        value: fine,
        method: Method::RayleighUpper,
        error: (fine - coarse).abs(),
        resolution_ladder: None,
    })
}

fn disk_quotient(alpha: f64, big_r: f64, panels_n: usize) -> f64 {
    let gl = Panels::new(8);
    let r2 = big_r * big_r;
    let u = |x: f64, y: f64| (r2 - x * x - y * y).max(0.0);
    // ‖u‖² = 2π ∫ (R²-r²)² r dr = π R^6 / 3
    let norm2 = PI * big_r.powi(6) / 3.0;

    let g = |s: f64| -> f64 {
        // θ ∈ [0, π], doubled by symmetry; shifted copy centred at (-s, 0).
        let mut th = vec![0.0, PI];
        if s > big_r {
            let c = (big_r / s).asin();
            th.push(c);
            th.push(PI - c);
        }
        let th = sorted_unique(th);
        let th_fine = subdivide(&th, panels_n);
        2.0 * gl.integrate_breaks(&th_fine, |t| {
            let (ct, st) = (t.cos(), t.sin());
            let mut rb = vec![0.0, big_r];
            let disc = r2 - s * s * st * st;
            let mut r_max = big_r;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                for r in [-s * ct - sq, -s * ct + sq] {
                    if r > 0.0 {
                        rb.push(r);
                        r_max = r_max.max(r);
                    }
                }
            }
            rb.push(r_max);
            let rb = sorted_unique(rb);
            let rb = subdivide(&rb, 4);
            gl.integrate_breaks(&rb, |r| {
                let (x, y) = (r * ct, r * st);
                (u(x + s, y) - u(x, y)).powi(2) * r
            })
        })
    };
    let span = 2.0 * big_r;
    let m = 2.0 / (2.0 - alpha);
    let mut t_breaks: Vec<f64> = (0..=panels_n).map(|k| k as f64 / panels_n as f64).collect();
    t_breaks.push((big_r / span).powf(1.0 / m));
    let t_breaks = sorted_unique(t_breaks);
    let near = gl.integrate_breaks(&t_breaks, |t| {
        if t <= 0.0 {
            return 0.0;
        }
        let s = span * t.powf(m);
        let ds = span * m * t.powf(m - 1.0);
        g(s) * s.powf(-1.0 - alpha) * ds
    });
    let tail = 2.0 * norm2 * span.powf(-alpha) / alpha;
    let seminorm = 2.0 * PI * (near + tail);
    seminorm_to_generator(2, alpha) * seminorm / norm2
}

fn subdivide(bp: &[f64], per: usize) -> Vec<f64> {
    let per = per.max(1);
    let mut out = Vec::with_capacity(bp.len() * per);
    for w in bp.windows(2) {
        for k in 0..per {
            out.push(w[0] + (w[1] - w[0]) * k as f64 / per as f64);
        }
    }
    out.push(*bp.last().unwrap());
    out
}

/// Bottom of the spectrum of a semi-infinite tube `(a, ∞) × ω`, equal to
/// `λ₁(ω)` for every `a`, including `a = -∞`.
pub fn tube_bottom(lambda1_cross: &SpectralEstimate) -> SpectralEstimate {
    SpectralEstimate {
        method: Method::TubeIdentity,
        ..lambda1_cross.clone()
    }
}

/// Bottom of the spectrum of an increasing planar horn: `λ₁` of its
/// projection, computed by the 1-D eigensolver.
pub fn horn_bottom(horn: &Domain, alpha: f64) -> Result<SpectralEstimate> {
    horn_bottom_with_ladder(horn, alpha, &DEFAULT_LADDER)
}

pub fn horn_bottom_with_ladder(horn: &Domain, alpha: f64, ladder: &[usize]) -> Result<SpectralEstimate> {
    let projection = horn.projection()?;
    if horn.dim() != 2 {
        return Err(Error::param(
            "horn spectra are computed for planar horns (1-D cross sections) only",
        ));
    }
    let r = projection.inradius();
    let cross = interval_eigenvalue(alpha, r, ladder)?;
    Ok(tube_bottom(&cross))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::HornProfile;

    /// Reference `λ₁(-1, 1)` for `α = 1` (Kwaśnicki 2012).
    const LAMBDA1_CAUCHY: f64 = 1.157_773_883_697_7;

    // ∫_0^∞ J_ν(t)^2 t^{-λ} dt, Weber–Schafheitlin.
    fn bessel_sq_moment(nu: f64, lam: f64) -> f64 {
        gamma(lam) * gamma(nu + (1.0 - lam) / 2.0)
            / (2f64.powf(lam) * gamma((1.0 + lam) / 2.0).powi(2) * gamma(nu + (1.0 + lam) / 2.0))
    }

    #[test]
    fn kernel_constant() {
        assert!((frac_kernel_constant(1, 1.0) - 1.0 / PI).abs() < 1e-14);
        assert!((frac_kernel_constant(2, 1.0) - 0.5 / PI).abs() < 1e-14);
    }

    #[test]
    fn kernel_constant_matches_symbol() {
        // Apply the operator to cos(ξ x) on a wide grid: at the centre the
        // result is |ξ|^α cos(0), up to discretization and edge effects.
        for &alpha in &[0.5, 1.0, 1.5] {
            let l = 200.0;
            let n = 4000;
            let op = frac_laplacian_1d(alpha, l, n).unwrap();
            let xi = 1.3;
            let u: Vec<f64> = op.nodes().iter().map(|x| (xi * x).cos()).collect();
            let lu = op.apply(&u);
            let mid = n / 2 - 1;
            let got = lu[mid];
            let want = xi.powf(alpha);
            assert!((got - want).abs() < 0.02 * want, "alpha={alpha}: {got} vs {want}");
        }
    }

    #[test]
    fn operator_basics() {
        let op = frac_laplacian_1d(1.0, 1.0, 64).unwrap();
        let z = op.apply(&vec![0.0; 63]);
        assert!(z.iter().all(|v| *v == 0.0));
        let asym = (&op.matrix - op.matrix.transpose()).amax();
        assert_eq!(asym, 0.0);
        assert!(frac_laplacian_1d(2.0, 1.0, 64).is_err());
        assert!(frac_laplacian_1d(1.0, 1.0, 8).is_err());
        let s = op.renormalized(Normalization::Seminorm);
        assert!((s.matrix[(3, 3)] * 0.5 / PI - op.matrix[(3, 3)]).abs() < 1e-12);
    }

    #[test]
    fn brownian_interval_eigenvalue() {
        let target = PI * PI / 4.0;
        let op = laplacian_1d(1.0, 1024).unwrap();
        let sol = smallest_eigenvalue(&op).unwrap();
        assert!((sol.value - target).abs() < 0.005 * target);
        assert!(sol.residual <= 1e-8);
        assert!(sol.vector.iter().all(|v| *v > 0.0));
        let coarse = smallest_eigenvalue(&laplacian_1d(1.0, 512).unwrap()).unwrap();
        let ratio = (coarse.value - target).abs() / (sol.value - target).abs();
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn cauchy_interval_eigenvalue_extrapolates() {
        let est = interval_eigenvalue(1.0, 1.0, &DEFAULT_LADDER).unwrap();
        assert!((est.value - 1.1578).abs() < 0.002, "{}", est.value);
        assert!((est.value - LAMBDA1_CAUCHY).abs() < 1e-4);
        let rungs = est.resolution_ladder.unwrap();
        let d = extrapolate_ladder(&rungs, 1.0);
        assert!(d.monotone);
        assert!(d.last_shift.abs() <= d.error, "{d:?}");
        // the discrete operator scales exactly with the interval
        let half = smallest_eigenvalue(&frac_laplacian_1d(1.0, 0.5, 256).unwrap()).unwrap();
        let unit = rungs[0].1;
        assert!((half.value / unit - 2.0).abs() < 2e-3 * 2.0);
        let mut buf = Vec::new();
        write_ladder_csv(&rungs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,value\n256,"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn eigenvalue_decreases_with_halfwidth() {
        let mut prev = f64::INFINITY;
        for &l in &[0.5, 0.8, 1.0, 1.5, 3.0] {
            let v = smallest_eigenvalue(&frac_laplacian_1d(1.3, l, 128).unwrap()).unwrap().value;
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn poisson_solutions() {
        let g = solve_frac_poisson(2.0, 1.0, 1024).unwrap();
        assert!((g.value_at(0.0) - 0.5).abs() < 1e-4);
        assert!(g.u.iter().all(|v| *v >= 0.0));

        let est = mean_exit_oracle(1.0, 1.0, &[0.0], &DEFAULT_LADDER).unwrap();
        assert!((est[0].value - 1.0).abs() < 2e-3, "{}", est[0].value);

        let g = solve_frac_poisson(1.0, 1.0, 1024).unwrap();
        assert!(g.u.iter().all(|v| *v >= 0.0));
        let ratios: Vec<f64> = g
            .x
            .iter()
            .zip(&g.u)
            .filter(|(x, _)| x.abs() <= 0.8)
            .map(|(x, u)| u / (1.0 - x * x).sqrt())
            .collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        assert!(hi / lo < 1.02, "{lo} {hi}");
    }

    #[test]
    fn rayleigh_brownian_cosine_is_exact() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let est = rayleigh_upper(2.0, &d, &TestFunction::Cosine, 64).unwrap();
        assert!((est.value - PI * PI / 4.0).abs() < 1e-4, "{}", est.value);
    }

    #[test]
    fn rayleigh_parabola_matches_fourier_oracle() {
        // û = 4 j_1(k)/k, so the generator form is 8 ∫ k^{α-3} J_{3/2}(k)^2 dk
        // and ‖u‖² = 16/15.
        let d = Domain::interval(-1.0, 1.0).unwrap();
        for &alpha in &[0.5, 1.0, 1.5] {
            let oracle = 8.0 * bessel_sq_moment(1.5, 3.0 - alpha) / (16.0 / 15.0);
            let est = rayleigh_upper(alpha, &d, &TestFunction::Parabola, 64).unwrap();
            assert!(
                (est.value - oracle).abs() < 1e-5 * oracle,
                "alpha={alpha}: {} vs {oracle}",
                est.value
            );
        }
        let est = rayleigh_upper(1.0, &d, &TestFunction::Parabola, 64).unwrap();
        assert!((est.value - 1.193_662).abs() < 1e-5);
        assert!(est.value >= LAMBDA1_CAUCHY);
    }

    #[test]
    fn rayleigh_tent_is_an_upper_bound() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let est = rayleigh_upper(1.0, &d, &TestFunction::Tent, 64).unwrap();
        assert!(est.value.is_finite() && est.value >= LAMBDA1_CAUCHY, "{}", est.value);
        let zero = TestFunction::Custom {
            f: Arc::new(|_| 0.0),
            breakpoints: vec![],
        };
        assert!(rayleigh_upper(1.0, &d, &zero, 16).is_err());
    }

    #[test]
    fn disk_rayleigh_matches_fourier_oracle() {
        // û = 4π J_2(k)/k², generator form 8π ∫ k^{α-3} J_2(k)^2 dk, ‖u‖² = π/3.
        for &alpha in &[0.5, 1.0, 1.5] {
            let oracle = 8.0 * PI * bessel_sq_moment(2.0, 3.0 - alpha) / (PI / 3.0);
            let est = rayleigh_upper_disk(alpha, 1.0, 48).unwrap();
            assert!(
                (est.value - oracle).abs() < 1e-3 * oracle,
                "alpha={alpha}: {} vs {oracle}",
                est.value
            );
        }
        let a = rayleigh_upper_disk(1.0, 1.0, 32).unwrap().value;
        let b = rayleigh_upper_disk(1.0, 0.5, 32).unwrap().value;
        assert!((b / a - 2.0).abs() < 1e-9);
    }

    #[test]
    fn tube_and_horn_bottoms() {
        let cross = interval_eigenvalue(2.0, 1.0, &DEFAULT_LADDER).unwrap();
        assert!((cross.value - PI * PI / 4.0).abs() < 1e-4);
        let t = tube_bottom(&cross);
        assert_eq!(t.method, Method::TubeIdentity);
        assert_eq!(t.value, cross.value);

        let horn = Domain::horn(2, HornProfile::example()).unwrap();
        let h1 = horn_bottom_with_ladder(&horn, 1.0, &[128, 256, 512]).unwrap();
        assert!((h1.value - 1.1578).abs() < 0.003, "{}", h1.value);
        let half = Domain::horn(2, HornProfile::Rational { scale: 0.5 }).unwrap();
        let h2 = horn_bottom_with_ladder(&half, 1.0, &[128, 256, 512]).unwrap();
        assert!((h2.value / h1.value - 2.0).abs() < 1e-9);
        let cone = Domain::horn(2, HornProfile::Linear { slope: 1.0 }).unwrap();
        assert!(matches!(horn_bottom(&cone, 1.0), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
    }
}
