//! Open sets in `R^d`: membership, distance to the complement and inradius.
//!
//! Membership is strict, so boundary points count as exterior. Distances are
//! analytic for the flat and round families and for the lattice of holes;
//! horns, wavy strips and predicate domains fall back to a bounded numeric
//! search with a documented tolerance.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance of the numeric distance searches.
pub const NUMERIC_DIST_TOL: f64 = 1e-6;

/// Boundary profile `f` of a horn `{x1 > 0, |x'| < f(x1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HornProfile {
    /// `f(s) = scale * s / (s + 1)`.
    Rational { scale: f64 },
    /// `f(s) = radius`; the horn is then a semi-infinite tube.
    Constant { radius: f64 },
    /// `f(s) = slope * s`, an unbounded cone.
    Linear { slope: f64 },
}

impl HornProfile {
    /// The example horn with `f(s) = s / (s + 1)`.
    pub fn example() -> Self {
        HornProfile::Rational { scale: 1.0 }
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match *self {
            HornProfile::Rational { scale } => scale * s / (s + 1.0),
            HornProfile::Constant { radius } => radius,
            HornProfile::Linear { slope } => slope * s,
        }
    }

    /// `sup_{s > 0} f(s)`, possibly infinite.
    pub fn sup(&self) -> f64 {
        match *self {
            HornProfile::Rational { scale } => scale,
            HornProfile::Constant { radius } => radius,
            HornProfile::Linear { .. } => f64::INFINITY,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            HornProfile::Rational { scale } => scale > 0.0 && scale.is_finite(),
            HornProfile::Constant { radius } => radius > 0.0 && radius.is_finite(),
            HornProfile::Linear { slope } => slope > 0.0 && slope.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("horn profile must be positive: {self:?}")))
        }
    }

    // All supported profiles are concave, hence the horn is convex.
    fn is_concave(&self) -> bool {
        true
    }
}

/// Plane domain `{|y| < half_width + amplitude cos(frequency x)}` with round
/// holes of radius `hole_radius` centred at `(hole_spacing * i, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavyStrip {
    pub half_width: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub hole_radius: f64,
    pub hole_spacing: f64,
}

impl Default for WavyStrip {
    fn default() -> Self {
        WavyStrip {
            half_width: 2.0,
            amplitude: 1.0,
            frequency: 3.0,
            hole_radius: 0.5,
            hole_spacing: 2.0,
        }
    }
}

impl WavyStrip {
    fn validate(&self) -> Result<()> {
        if !(self.half_width > self.amplitude.abs()) {
            return Err(Error::param("wavy strip: half_width must exceed |amplitude|"));
        }
        if !(self.frequency > 0.0 && self.hole_spacing > 0.0 && self.hole_radius >= 0.0) {
            return Err(Error::param("wavy strip: frequency and spacing must be positive"));
        }
        if 2.0 * self.hole_radius >= self.hole_spacing {
            return Err(Error::param("wavy strip: holes overlap"));
        }
        Ok(())
    }

    #[inline]
    fn edge(&self, x: f64) -> f64 {
        self.half_width + self.amplitude * (self.frequency * x).cos()
    }

    #[inline]
    fn hole_dist(&self, x: &[f64]) -> f64 {
        let cx = (x[0] / self.hole_spacing).round() * self.hole_spacing;
        (x[0] - cx).hypot(x[1]) - self.hole_radius
    }
}

type Membership = dyn Fn(&[f64]) -> bool + Send + Sync;

/// Domain given by a membership callback, confined to a bounding box.
#[derive(Clone)]
pub struct PredicateDomain {
    membership: Arc<Membership>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Number of rays used by the distance search.
    pub directions: usize,
    pub tolerance: f64,
}

impl PredicateDomain {
    pub fn new<F>(membership: F, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self>
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::param("bounding box corners must have equal nonzero length"));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(Error::param("bounding box must have positive extent"));
        }
        Ok(PredicateDomain {
            membership: Arc::new(membership),
            lower,
            upper,
            directions: 64,
            tolerance: NUMERIC_DIST_TOL,
        })
    }

    #[inline]
    fn inside(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (a, b))| v > a && v < b)
            && (self.membership)(x)
    }

    fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| (b - a).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn ray_directions(&self) -> Vec<Vec<f64>> {
        let d = self.lower.len();
        match d {
            1 => vec![vec![1.0], vec![-1.0]],
            2 => (0..self.directions)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / self.directions as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect(),
            _ => {
                // Coordinate axes plus a Kronecker sequence mapped through normals.
                let mut dirs = Vec::new();
                for i in 0..d {
                    for s in [1.0, -1.0] {
                        let mut v = vec![0.0; d];
                        v[i] = s;
                        dirs.push(v);
                    }
                }
                let mut k = 1.0;
                while dirs.len() < self.directions.max(2 * d) {
                    let v: Vec<f64> = (0..d)
                        .map(|i| {
                            let g = ((i + 2) as f64).sqrt().fract();
                            let u = (k * g).fract().clamp(1e-6, 1.0 - 1e-6);
                            statrs::function::erf::erf_inv(2.0 * u - 1.0)
                        })
                        .collect();
                    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                    if norm > 1e-9 {
                        dirs.push(v.iter().map(|c| c / norm).collect());
                    }
                    k += 1.0;
                }
                dirs
            }
        }
    }

    fn dist(&self, x: &[f64]) -> f64 {
        if !self.inside(x) {
            return 0.0;
        }
        let diam = self.diameter();
        let step = diam / 512.0;
        let mut best = f64::INFINITY;
        let mut y = vec![0.0; x.len()];
        for dir in self.ray_directions() {
            let at = |t: f64, y: &mut Vec<f64>| {
                for i in 0..x.len() {
                    y[i] = x[i] + t * dir[i];
                }
            };
            let mut lo = 0.0;
            let mut hi = step.min(best);
            loop {
                at(hi, &mut y);
                if !self.inside(&y) {
                    break;
                }
                lo = hi;
                if hi >= best || hi > diam {
                    break;
                }
                hi += step;
            }
            at(hi, &mut y);
            if self.inside(&y) {
                continue;
            }
            while hi - lo > self.tolerance {
                let mid = 0.5 * (lo + hi);
                at(mid, &mut y);
                if self.inside(&y) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best = best.min(hi);
        }
        best
    }
}

impl fmt::Debug for PredicateDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredicateDomain")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("directions", &self.directions)
            .field("tolerance", &self.tolerance)
            .finish_non_exhaustive()
    }
}

/// An open subset of `R^d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Interval {
        a: f64,
        b: f64,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `{x : normal · x < offset}` with a unit normal.
    HalfSpace {
        normal: Vec<f64>,
        offset: f64,
    },
    /// `(start, ∞) × cross_section`; a missing start means `-∞`.
    Tube {
        start: Option<f64>,
        cross_section: Box<Domain>,
    },
    Horn {
        dim: usize,
        profile: HornProfile,
    },
    /// The plane with holes of radius `hole_radius` at `(i + 1/2, j + 1/2)`.
    SwissCheese {
        hole_radius: f64,
    },
    WavyStrip(WavyStrip),
    #[serde(skip)]
    Predicate(PredicateDomain),
}

/// Cross section `H(x1)` of a horn.
#[derive(Debug, Clone)]
pub struct CrossSection {
    pub x1: f64,
    pub domain: Domain,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Centered ball of the given radius in `R^dim` (an interval when `dim = 1`).
pub fn centered_ball(dim: usize, radius: f64) -> Domain {
    if dim == 1 {
        Domain::Interval {
            a: -radius,
            b: radius,
        }
    } else {
        Domain::Ball {
            center: vec![0.0; dim],
            radius,
        }
    }
}

/// Scans `[lo, hi]` on `n` points and refines the best bracket by golden
/// section. Returns the minimum value found.
fn scan_minimize<F: Fn(f64) -> f64>(g: F, lo: f64, hi: f64, n: usize) -> f64 {
    if !(hi > lo) {
        return g(lo);
    }
    let h = (hi - lo) / (n - 1) as f64;
    let (mut best_i, mut best) = (0usize, f64::INFINITY);
    for i in 0..n {
        let v = g(lo + i as f64 * h);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let mut a = lo + h * best_i.saturating_sub(1) as f64;
    let mut b = (lo + h * (best_i + 1) as f64).min(hi);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..80 {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
        if b - a < 1e-13 * (1.0 + a.abs()) {
            break;
        }
    }
    best.min(gc).min(gd)
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::param(format!("interval needs a < b, got ({a}, {b})")));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !(radius > 0.0) {
            return Err(Error::param("ball needs a nonempty center and positive radius"));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn half_space(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let n = norm(&normal);
        if !(n > 0.0) {
            return Err(Error::param("half-space normal must be nonzero"));
        }
        Ok(Domain::HalfSpace {
            normal: normal.iter().map(|c| c / n).collect(),
            offset: offset / n,
        })
    }

    pub fn tube(start: Option<f64>, cross_section: Domain) -> Self {
        Domain::Tube {
            start,
            cross_section: Box::new(cross_section),
        }
    }

    pub fn horn(dim: usize, profile: HornProfile) -> Result<Self> {
        if dim < 2 {
            return Err(Error::param("a horn lives in dimension at least 2"));
        }
        profile.validate()?;
        Ok(Domain::Horn { dim, profile })
    }

    pub fn swiss_cheese(hole_radius: f64) -> Result<Self> {
        if !(hole_radius > 0.0 && hole_radius < 0.5) {
            return Err(Error::param("swiss cheese hole radius must lie in (0, 1/2)"));
        }
        Ok(Domain::SwissCheese { hole_radius })
    }

    pub fn wavy_strip(w: WavyStrip) -> Result<Self> {
        w.validate()?;
        Ok(Domain::WavyStrip(w))
    }

    /// Checks parameters of a deserialized domain.
    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Interval { a, b } => Domain::interval(*a, *b).map(|_| ()),
            Domain::Ball { center, radius } => Domain::ball(center.clone(), *radius).map(|_| ()),
            Domain::HalfSpace { normal, .. } => {
                if (norm(normal) - 1.0).abs() > 1e-9 {
                    Err(Error::param("half-space normal must be a unit vector"))
                } else {
                    Ok(())
                }
            }
            Domain::Tube { cross_section, .. } => cross_section.validate(),
            Domain::Horn { dim, profile } => Domain::horn(*dim, *profile).map(|_| ()),
            Domain::SwissCheese { hole_radius } => Domain::swiss_cheese(*hole_radius).map(|_| ()),
            Domain::WavyStrip(w) => w.validate(),
            Domain::Predicate(_) => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Ball { center, .. } => center.len(),
            Domain::HalfSpace { normal, .. } => normal.len(),
            Domain::Tube { cross_section, .. } => 1 + cross_section.dim(),
            Domain::Horn { dim, .. } => *dim,
            Domain::SwissCheese { .. } | Domain::WavyStrip(_) => 2,
            Domain::Predicate(p) => p.lower.len(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Domain::Interval { .. } => "interval",
            Domain::Ball { .. } => "ball",
            Domain::HalfSpace { .. } => "half_space",
            Domain::Tube { .. } => "tube",
            Domain::Horn { .. } => "horn",
            Domain::SwissCheese { .. } => "swiss_cheese",
            Domain::WavyStrip(_) => "wavy_strip",
            Domain::Predicate(_) => "predicate",
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Strict membership `x ∈ D`.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.inside(x))
    }

    /// Membership without the dimension check; used on hot paths.
    #[inline]
    pub fn inside(&self, x: &[f64]) -> bool {
        match self {
            Domain::Interval { a, b } => x[0] > *a && x[0] < *b,
            Domain::Ball { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(p, c)| (p - c) * (p - c)).sum();
                r2 < radius * radius
            }
            Domain::HalfSpace { normal, offset } => {
                x.iter().zip(normal).map(|(p, n)| p * n).sum::<f64>() < *offset
            }
            Domain::Tube {
                start,
                cross_section,
            } => start.map_or(true, |a| x[0] > a) && cross_section.inside(&x[1..]),
            Domain::Horn { profile, .. } => {
                x[0] > 0.0 && {
                    let f = profile.eval(x[0]);
                    x[1..].iter().map(|c| c * c).sum::<f64>() < f * f
                }
            }
            Domain::SwissCheese { hole_radius } => {
                let dx = x[0] - (x[0].floor() + 0.5);
                let dy = x[1] - (x[1].floor() + 0.5);
                dx * dx + dy * dy > hole_radius * hole_radius
            }
            Domain::WavyStrip(w) => x[1].abs() < w.edge(x[0]) && w.hole_dist(x) > 0.0,
            Domain::Predicate(p) => p.inside(x),
        }
    }

    /// `δ_D(x) = dist(x, D^c)`; zero outside `D`.
    ///
    /// `x` must have the domain's dimension.
    pub fn dist_to_complement(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        if !self.inside(x) {
            return 0.0;
        }
        match self {
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::Ball { center, radius } => {
                let r: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(p, c)| (p - c) * (p - c))
                    .sum::<f64>()
                    .sqrt();
                radius - r
            }
            Domain::HalfSpace { normal, offset } => {
                offset - x.iter().zip(normal).map(|(p, n)| p * n).sum::<f64>()
            }
            Domain::Tube {
                start,
                cross_section,
            } => {
                let lateral = cross_section.dist_to_complement(&x[1..]);
                match start {
                    Some(a) => lateral.min(x[0] - a),
                    None => lateral,
                }
            }
            Domain::Horn { profile, .. } => horn_dist(profile, x),
            Domain::SwissCheese { hole_radius } => {
                let dx = x[0] - (x[0].floor() + 0.5);
                let dy = x[1] - (x[1].floor() + 0.5);
                dx.hypot(dy) - hole_radius
            }
            Domain::WavyStrip(w) => wavy_dist(w, x),
            Domain::Predicate(p) => p.dist(x),
        }
    }

    /// `R_D = sup_x δ_D(x)`; analytic where possible, otherwise a numeric
    /// supremum over a refinement grid.
    pub fn inradius(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => 0.5 * (b - a),
            Domain::Ball { radius, .. } => *radius,
            Domain::HalfSpace { .. } => f64::INFINITY,
            Domain::Tube { cross_section, .. } => cross_section.inradius(),
            Domain::Horn { dim, profile } => {
                if !profile.sup().is_finite() {
                    return f64::INFINITY;
                }
                // δ along the axis increases to sup f; scan an expanding grid.
                let mut x = vec![0.0; *dim];
                (0..=480)
                    .map(|k| {
                        x[0] = 10f64.powf(-3.0 + k as f64 * 12.0 / 480.0);
                        horn_dist(profile, &x)
                    })
                    .fold(0.0, f64::max)
            }
            Domain::SwissCheese { hole_radius } => std::f64::consts::FRAC_1_SQRT_2 - hole_radius,
            Domain::WavyStrip(w) => {
                let period = 2.0 * std::f64::consts::PI / w.frequency;
                let span = lcm_window(period, w.hole_spacing);
                let top = w.half_width + w.amplitude.abs();
                grid_sup(|p| self.dist_to_complement(p), &[0.0, 0.0], &[span, top], 160)
            }
            Domain::Predicate(p) => grid_sup(|q| p.dist(q), &p.lower, &p.upper, 48),
        }
    }

    /// Scale `r` at which the boundary is `C^{1,1}`, where it is known in
    /// closed form.
    pub fn c11_scale(&self) -> Option<f64> {
        match self {
            Domain::Interval { a, b } => Some(0.5 * (b - a)),
            Domain::Ball { radius, .. } => Some(*radius),
            Domain::SwissCheese { hole_radius } => Some(*hole_radius),
            _ => None,
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            Domain::Interval { .. } | Domain::Ball { .. } | Domain::HalfSpace { .. } => true,
            Domain::Tube { cross_section, .. } => cross_section.is_convex(),
            Domain::Horn { profile, .. } => profile.is_concave(),
            Domain::SwissCheese { .. } | Domain::WavyStrip(_) | Domain::Predicate(_) => false,
        }
    }

    /// Cross section of a horn at `x1 > 0`: the centered ball of radius `f(x1)`.
    pub fn cross_section(&self, x1: f64) -> Result<CrossSection> {
        match self {
            Domain::Horn { dim, profile } => {
                if !(x1 > 0.0) {
                    return Err(Error::param(format!("cross section needs x1 > 0, got {x1}")));
                }
                let r = profile.eval(x1);
                let domain = if *dim == 2 {
                    Domain::Interval { a: -r, b: r }
                } else {
                    Domain::Ball {
                        center: vec![0.0; dim - 1],
                        radius: r,
                    }
                };
                Ok(CrossSection { x1, domain })
            }
            other => Err(Error::param(format!(
                "cross sections are defined for horns, not {}",
                other.name()
            ))),
        }
    }

    /// Projection `h` of a horn onto `R^{d-1}`, the union of its cross sections.
    pub fn projection(&self) -> Result<Domain> {
        match self {
            Domain::Horn { dim, profile } => {
                let r = profile.sup();
                if !r.is_finite() {
                    return Err(Error::Hypothesis(
                        "horn projection is unbounded; sharp horn asymptotics need a bounded projection"
                            .into(),
                    ));
                }
                Ok(centered_ball(dim - 1, r))
            }
            other => Err(Error::param(format!(
                "projections are defined for horns, not {}",
                other.name()
            ))),
        }
    }
}

fn horn_dist(profile: &HornProfile, x: &[f64]) -> f64 {
    let x1 = x[0];
    let rho = x[1..].iter().map(|c| c * c).sum::<f64>().sqrt();
    let vertical = profile.eval(x1) - rho;
    let bound = x1.min(vertical);
    if bound <= 0.0 {
        return 0.0;
    }
    let lo = (x1 - bound).max(0.0);
    let hi = x1 + bound;
    let lateral = scan_minimize(
        |s| (x1 - s).powi(2) + (profile.eval(s) - rho).powi(2),
        lo,
        hi,
        129,
    )
    .sqrt();
    bound.min(lateral)
}

fn wavy_dist(w: &WavyStrip, x: &[f64]) -> f64 {
    let y = x[1].abs();
    let holes = w.hole_dist(x);
    let vertical = w.edge(x[0]) - y;
    let bound = vertical.min(holes);
    if bound <= 0.0 {
        return 0.0;
    }
    let lateral = scan_minimize(
        |s| (x[0] - s).powi(2) + (w.edge(s) - y).powi(2),
        x[0] - bound,
        x[0] + bound,
        257,
    )
    .sqrt();
    bound.min(lateral)
}

fn lcm_window(a: f64, b: f64) -> f64 {
    // Smallest common multiple within a few periods, else the longer span.
    for k in 1..=12 {
        let span = a * k as f64;
        let r = span / b;
        if (r - r.round()).abs() < 1e-9 {
            return span;
        }
    }
    (a * 4.0).max(b * 4.0)
}

fn grid_sup<F: Fn(&[f64]) -> f64>(f: F, lo: &[f64], hi: &[f64], n: usize) -> f64 {
    let d = lo.len();
    let mut idx = vec![0usize; d];
    let mut p = vec![0.0; d];
    let mut best: f64 = 0.0;
    let mut arg = p.clone();
    loop {
        for i in 0..d {
            p[i] = lo[i] + (hi[i] - lo[i]) * (idx[i] as f64 + 0.5) / n as f64;
        }
        let v = f(&p);
        if v > best {
            best = v;
            arg.clone_from(&p);
        }
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == d {
                return refine_sup(&f, arg, best, lo, hi, n);
            }
        }
    }
}

// Coordinate pattern search around the best grid point.
fn refine_sup<F: Fn(&[f64]) -> f64>(
    f: &F,
    mut x: Vec<f64>,
    mut best: f64,
    lo: &[f64],
    hi: &[f64],
    n: usize,
) -> f64 {
    let mut step: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| (b - a) / n as f64).collect();
    while step.iter().any(|s| *s > 1e-9) {
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += sign * step[i];
                let v = f(&y);
                if v > best {
                    best = v;
                    x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example_horn() -> Domain {
        Domain::horn(2, HornProfile::example()).unwrap()
    }

    #[test]
    fn membership_examples() {
        let i = Domain::interval(-1.0, 1.0).unwrap();
        assert!(i.contains(&[0.0]).unwrap());
        assert!(!i.contains(&[1.0]).unwrap());
        assert!(example_horn().contains(&[1.0, 0.4]).unwrap());
        assert!(!example_horn().contains(&[1.0, 0.5]).unwrap());
        let q = Domain::swiss_cheese(0.25).unwrap();
        assert!(!q.contains(&[0.5, 0.5]).unwrap());
        assert!(q.contains(&[0.0, 0.0]).unwrap());
        assert!(matches!(
            i.contains(&[0.0, 0.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn distance_examples() {
        let i = Domain::interval(-1.0, 1.0).unwrap();
        assert!((i.dist_to_complement(&[0.3]) - 0.7).abs() < 1e-15);
        let b = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!((b.dist_to_complement(&[0.6, 0.0]) - 0.4).abs() < 1e-15);
        assert_eq!(b.dist_to_complement(&[2.0, 0.0]), 0.0);
        let h = Domain::half_space(vec![0.0, 2.0], 2.0).unwrap();
        assert!((h.dist_to_complement(&[5.0, -1.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn swiss_cheese_corner_distance_brute_force() {
        // Oracle: minimize over sampled points of every nearby hole boundary.
        let eps = 0.25;
        let q = Domain::swiss_cheese(eps).unwrap();
        let x = [0.0, 0.0];
        let mut best = f64::INFINITY;
        for i in -2..=2 {
            for j in -2..=2 {
                let (cx, cy) = (i as f64 + 0.5, j as f64 + 0.5);
                for k in 0..20_000 {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / 20_000.0;
                    let d = (cx + eps * a.cos() - x[0]).hypot(cy + eps * a.sin() - x[1]);
                    best = best.min(d);
                }
            }
        }
        let got = q.dist_to_complement(&x);
        assert!((got - best).abs() < 1e-6, "{got} vs {best}");
        assert!((got - (0.5f64.sqrt() - 0.25)).abs() < 1e-12);
        assert!((q.inradius() - 0.457_106_781).abs() < 1e-8);
    }

    #[test]
    fn inradius_examples() {
        assert_eq!(Domain::interval(-1.0, 1.0).unwrap().inradius(), 1.0);
        let r = example_horn().inradius();
        assert!(r <= 1.0 && r > 1.0 - 1e-6, "{r}");
        let cone = Domain::horn(2, HornProfile::Linear { slope: 1.0 }).unwrap();
        assert_eq!(cone.inradius(), f64::INFINITY);
        let tube = Domain::tube(Some(0.0), Domain::interval(-0.5, 0.5).unwrap());
        assert_eq!(tube.inradius(), 0.5);
    }

    #[test]
    fn wavy_strip_inradius_and_distance() {
        let w = Domain::wavy_strip(WavyStrip::default()).unwrap();
        // A coarse brute force over sampled boundary points gives 0.7430.
        let r = w.inradius();
        assert!(r > 0.743 && r < 0.77, "{r}");
        assert!(!w.contains(&[0.0, 0.0]).unwrap());
        assert!(w.contains(&[1.0, 0.0]).unwrap());
        // at (1, 0) the nearest holes are at distance 1 - 1/2.
        let d = w.dist_to_complement(&[1.0, 0.0]);
        assert!((d - 0.5).abs() < 1e-9, "{d}");
    }

    #[test]
    fn cross_sections_and_projection() {
        let h = example_horn();
        let c = h.cross_section(1.0).unwrap();
        match c.domain {
            Domain::Interval { a, b } => assert!((a + 0.5).abs() < 1e-15 && (b - 0.5).abs() < 1e-15),
            _ => panic!("expected interval"),
        }
        let tiny = h.cross_section(1e-12).unwrap();
        assert!(tiny.domain.inradius() < 1e-11);
        let c2 = h.cross_section(2.0).unwrap();
        for k in 0..100 {
            let y = -0.5 + k as f64 / 100.0;
            if c.domain.inside(&[y]) {
                assert!(c2.domain.inside(&[y]));
            }
        }
        assert!(h.cross_section(0.0).is_err());
        assert!(Domain::interval(0.0, 1.0).unwrap().cross_section(1.0).is_err());

        let p = h.projection().unwrap();
        assert!(matches!(p, Domain::Interval { a, b } if a == -1.0 && b == 1.0));
        let c = Domain::horn(2, HornProfile::Constant { radius: 0.3 }).unwrap();
        assert!(matches!(c.projection().unwrap(), Domain::Interval { a, b } if a == -0.3 && b == 0.3));
        let r2 = Domain::horn(2, HornProfile::Rational { scale: 2.0 }).unwrap();
        assert!(matches!(r2.projection().unwrap(), Domain::Interval { a, b } if a == -2.0 && b == 2.0));
        let cone = Domain::horn(2, HornProfile::Linear { slope: 1.0 }).unwrap();
        assert!(matches!(cone.projection(), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn predicate_domain_matches_ball() {
        let p = PredicateDomain::new(
            |x: &[f64]| x[0] * x[0] + x[1] * x[1] < 1.0,
            vec![-2.0, -2.0],
            vec![2.0, 2.0],
        )
        .unwrap();
        let d = Domain::Predicate(p);
        let b = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        for x in [[0.0, 0.0], [0.5, 0.1], [-0.3, 0.7]] {
            let exact = b.dist_to_complement(&x);
            let got = d.dist_to_complement(&x);
            // ray fan overestimates by at most r (1 - cos(pi/64)) plus the tolerance
            assert!(got >= exact - 1e-6 && got <= exact + 2e-3, "{got} vs {exact}");
        }
        let r = d.inradius();
        assert!((r - 1.0).abs() < 5e-3, "{r}");
    }

    #[test]
    fn serde_round_trip() {
        let d = Domain::tube(None, Domain::interval(-1.0, 1.0).unwrap());
        let s = serde_json::to_string(&d).unwrap();
        let back: Domain = serde_json::from_str(&s).unwrap();
        assert_eq!(back.dim(), 2);
        assert!(back.inside(&[-100.0, 0.5]));
        let h: Domain = toml::from_str("kind = \"horn\"\ndim = 2\n[profile]\nkind = \"rational\"\nscale = 1.0\n").unwrap();
        assert!(h.inside(&[1.0, 0.4]));
    }

    fn domains() -> Vec<Domain> {
        vec![
            Domain::interval(-1.0, 1.0).unwrap(),
            Domain::ball(vec![0.5, -0.5], 1.5).unwrap(),
            Domain::half_space(vec![1.0, 1.0], 0.5).unwrap(),
            Domain::tube(Some(-1.0), Domain::interval(-1.0, 1.0).unwrap()),
            example_horn(),
            Domain::horn(3, HornProfile::example()).unwrap(),
            Domain::swiss_cheese(0.25).unwrap(),
            Domain::wavy_strip(WavyStrip::default()).unwrap(),
        ]
    }

    fn point(dim: usize, c: &[f64]) -> Vec<f64> {
        c[..dim].to_vec()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn membership_agrees_with_distance(c in prop::array::uniform3(-3.0f64..3.0)) {
            for d in domains() {
                let x = point(d.dim(), &c);
                let inside = d.contains(&x).unwrap();
                let delta = d.dist_to_complement(&x);
                prop_assert_eq!(inside, delta > 0.0, "{} at {:?}: δ={}", d.name(), x, delta);
            }
        }

        #[test]
        fn distance_is_one_lipschitz(c in prop::array::uniform3(-3.0f64..3.0),
                                     e in prop::array::uniform3(-0.3f64..0.3)) {
            for d in domains() {
                let x = point(d.dim(), &c);
                let y: Vec<f64> = x.iter().zip(&e).map(|(a, b)| a + b).collect();
                let dist = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let gap = (d.dist_to_complement(&x) - d.dist_to_complement(&y)).abs();
                prop_assert!(gap <= dist + 1e-6, "{}: {} > {}", d.name(), gap, dist);
            }
        }

        #[test]
        fn inradius_dominates_distance(c in prop::array::uniform3(-3.0f64..3.0)) {
            for d in domains() {
                let x = point(d.dim(), &c);
                prop_assert!(d.dist_to_complement(&x) <= d.inradius() + 1e-6, "{}", d.name());
            }
        }

        #[test]
        fn horn_is_sandwiched_by_semitubes(x1 in 0.0f64..40.0, y in -1.2f64..1.2, a in 0.1f64..10.0) {
            let h = example_horn();
            let inner = Domain::tube(Some(a), h.cross_section(a).unwrap().domain);
            let outer = Domain::tube(Some(0.0), h.projection().unwrap());
            let x = [x1, y];
            if inner.inside(&x) { prop_assert!(h.inside(&x)); }
            if h.inside(&x) { prop_assert!(outer.inside(&x)); }
        }
    }
}
