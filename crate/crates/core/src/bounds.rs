//! Closed-form rates, envelopes and bounds for the killed stable process on
//! `R^d`, with `V(x, r) = ω_d r^d` and `φ(r) = r^α`.
//!
//! Prefactors are left as parameters: only rates and exponents are explicit.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{seminorm_to_generator, Method, Normalization, SpectralEstimate};

/// Volume-doubling and scale-function exponents of a heat-kernel profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HKProfile {
    pub d1: f64,
    pub d2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub c_mu_upper: f64,
    pub c_mu_lower: f64,
    pub phi_exponent: f64,
}

impl HKProfile {
    pub fn phi(&self, r: f64) -> f64 {
        r.powf(self.phi_exponent)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha1 > 0.0 && self.alpha2 >= self.alpha1) {
            return Err(Error::param("need alpha2 >= alpha1 > 0"));
        }
        if !(self.d2 > 0.0 && self.d1 >= self.d2) {
            return Err(Error::param("need d1 >= d2 > 0"));
        }
        if !(self.c_mu_upper >= 1.0 && self.c_mu_lower > 0.0) {
            return Err(Error::param("need C_mu >= 1 and c_mu > 0"));
        }
        Ok(())
    }
}

/// Profile of the stable process on `R^d`: Lebesgue measure doubles exactly.
pub fn hk_profile_rd(d: usize, alpha: f64) -> Result<HKProfile> {
    check_params(d as f64, alpha)?;
    let d = d as f64;
    Ok(HKProfile {
        d1: d,
        d2: d,
        alpha1: alpha,
        alpha2: alpha,
        c_mu_upper: 2f64.powf(d),
        c_mu_lower: 2f64.powf(-d),
        phi_exponent: alpha,
    })
}

fn check_params(d: f64, alpha: f64) -> Result<()> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::param(format!("dimension must be positive, got {d}")));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::param(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    Ok(())
}

/// Prefactor and rate parameters of the survival envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeParams {
    pub c: f64,
    pub eps: f64,
    pub lambda: f64,
    pub d: f64,
    pub alpha: f64,
}

impl EnvelopeParams {
    pub fn validate(&self) -> Result<()> {
        check_params(self.d, self.alpha)?;
        if !(self.c > 0.0 && self.lambda > 0.0) {
            return Err(Error::param("envelope prefactor and lambda must be positive"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::param("eps must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Decay rate `(1-ε) λ / (1 + d/(4α))`.
    pub fn rate(&self) -> f64 {
        (1.0 - self.eps) * limit_rate(self.d, self.alpha, self.lambda)
    }
}

/// Coefficient of `λ t` after `n` rounds of the kernel–survival iteration:
/// `(1 - q^{n+1}) / (1 + d/(4α)) · (1 - ε)` with `q = (d/(4α)) / (1 + d/(2α))`.
pub fn iteration_exponent(n: u32, d: f64, alpha: f64, eps: f64) -> f64 {
    let a = d / (4.0 * alpha);
    let q = a / (1.0 + 2.0 * a);
    (1.0 - q.powi(n as i32 + 1)) / (1.0 + a) * (1.0 - eps)
}

/// Coefficient of `λ t` in the preliminary bound, `(1-ε)/(1 + d/(2α))`.
pub fn prelim_exponent(d: f64, alpha: f64, eps: f64) -> f64 {
    (1.0 - eps) / (1.0 + d / (2.0 * alpha))
}

/// Upper end of the rate sandwich, `λ / (1 + d/(4α))`.
pub fn limit_rate(d: f64, alpha: f64, lambda: f64) -> f64 {
    lambda / (1.0 + d / (4.0 * alpha))
}

/// `C exp(-(1-ε) λ t / (1 + d/(4α)))`.
pub fn survival_upper_envelope(p: &EnvelopeParams, t: f64) -> f64 {
    p.c * (-p.rate() * t).exp()
}

/// `C (1 + 1/ε) exp(-(1-ε) λ t / (1 + d/(2α)))`.
pub fn prelim_envelope(c: f64, eps: f64, d: f64, alpha: f64, lambda: f64, t: f64) -> f64 {
    c * (1.0 + 1.0 / eps) * (-prelim_exponent(d, alpha, eps) * lambda * t).exp()
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let d = d as f64;
    PI.powf(d / 2.0) / gamma(d / 2.0 + 1.0)
}

/// Lower bound on `λ(D)` from the inradius, with its units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InradiusBound {
    pub value: f64,
    pub units: Normalization,
    pub dim: usize,
    pub alpha: f64,
}

impl InradiusBound {
    pub fn in_units(&self, units: Normalization) -> InradiusBound {
        let f = seminorm_to_generator(self.dim, self.alpha);
        let value = match (self.units, units) {
            (Normalization::Seminorm, Normalization::Generator) => self.value * f,
            (Normalization::Generator, Normalization::Seminorm) => self.value / f,
            _ => self.value,
        };
        InradiusBound { value, units, ..*self }
    }

    /// As a spectral estimate, always in generator units.
    pub fn to_estimate(&self) -> SpectralEstimate {
        SpectralEstimate {
            value: self.in_units(Normalization::Generator).value,
            method: Method::InradiusLower,
            error: 0.0,
            resolution_ladder: None,
        }
    }
}

/// `ω_d r^d / (R + 2r)^{d+α}` for a domain that is `C^{1,1}` at scale `r`
/// with inradius `R`; seminorm units unless `Generator` is requested.
pub fn inradius_lower(d: usize, alpha: f64, r: f64, big_r: f64, units: Normalization) -> Result<InradiusBound> {
    if d == 0 {
        return Err(Error::param("dimension must be positive"));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::param(format!(
            "the inradius bound concerns jump processes, alpha in (0, 2); got {alpha}"
        )));
    }
    if !(r > 0.0) {
        return Err(Error::param("C^{1,1} scale r must be positive"));
    }
    if big_r < r {
        return Err(Error::Precondition(format!(
            "inradius {big_r} is below the interior-ball scale {r}"
        )));
    }
    let df = d as f64;
    let value = unit_ball_volume(d) * r.powf(df) / (big_r + 2.0 * r).powf(df + alpha);
    let b = InradiusBound {
        value,
        units: Normalization::Seminorm,
        dim: d,
        alpha,
    };
    Ok(b.in_units(units))
}

/// `(C_lo δ^{α/2}, C_hi δ^{α/2})`.
pub fn mean_exit_envelope(delta: f64, alpha: f64, c_lo: f64, c_hi: f64) -> (f64, f64) {
    let s = delta.max(0.0).powf(alpha / 2.0);
    (c_lo * s, c_hi * s)
}

/// Free stable kernel profile `t^{-d/α} ∧ t / dist^{d+α}`.
pub fn free_kernel_envelope(d: f64, alpha: f64, t: f64, dist: f64) -> f64 {
    let on_diag = t.powf(-d / alpha);
    if dist <= 0.0 {
        return on_diag;
    }
    on_diag.min(t / dist.powf(d + alpha))
}

/// Default decay rate of the Dirichlet kernel envelope,
/// `(1/2)(1-ε) λ / (1 + d/(4α))`.
pub fn default_kernel_rate(d: f64, alpha: f64, lambda: f64, eps: f64) -> f64 {
    0.5 * (1.0 - eps) * limit_rate(d, alpha, lambda)
}

/// `C e^{-rate t} (1 ∧ δ_x^{α/2}/√t)(1 ∧ δ_y^{α/2}/√t)(t^{-d/α} ∧ t/dist^{d+α})`.
#[allow(clippy::too_many_arguments)]
pub fn dirichlet_kernel_envelope(
    t: f64,
    delta_x: f64,
    delta_y: f64,
    dist: f64,
    rate: f64,
    c: f64,
    d: f64,
    alpha: f64,
) -> f64 {
    let bf = |delta: f64| (delta.max(0.0).powf(alpha / 2.0) / t.sqrt()).min(1.0);
    c * (-rate * t).exp() * bf(delta_x) * bf(delta_y) * free_kernel_envelope(d, alpha, t, dist)
}

/// `p̂_D / (sup_z P_z(τ > t/2) · p)`; the kernel–survival comparison says this
/// stays below a constant independent of `t`, the points and the domain.
pub fn kernel_survival_check(p_d_estimate: f64, survival_half_t: f64, free_kernel_value: f64) -> Result<f64> {
    if p_d_estimate < 0.0 || survival_half_t < 0.0 || free_kernel_value < 0.0 {
        return Err(Error::param("kernel and survival inputs must be nonnegative"));
    }
    if p_d_estimate == 0.0 {
        return Ok(0.0);
    }
    let denom = survival_half_t * free_kernel_value;
    if !(denom > 0.0) {
        return Err(Error::param("zero denominator in kernel-survival ratio"));
    }
    Ok(p_d_estimate / denom)
}
