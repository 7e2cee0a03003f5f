//! Points, warps and the closed-form distances of the base geometry.
//!
//! The family of metrics is `dr² + sin²r dθ² + f(r)² dφ²` on `S² × S¹`, with
//! `f` drawn from [`WarpFamily`].

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};

/// Absolute tolerance on `r` for classifying a point as singular.
pub const TOL_SING: f64 = 1e-12;
/// Latitude clamp used by clamped evaluation of the extreme warp.
pub const R_MIN_CLAMP: f64 = 1e-8;

/// Reduces an angle into `[0, 2π)`.
pub fn reduce_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// Wraps an angle difference into `(-π, π]`.
pub fn wrap_delta(d: f64) -> f64 {
    let y = reduce_angle(d);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl Point {
    /// Clamps `r` into `[0, π]` and reduces both angles.
    pub fn new(r: f64, theta: f64, phi: f64) -> Self {
        Point {
            r: r.clamp(0.0, PI),
            theta: reduce_angle(theta),
            phi: reduce_angle(phi),
        }
    }

    pub fn is_singular(&self) -> bool {
        self.r <= TOL_SING || self.r >= PI - TOL_SING
    }

    /// Reflection `r ↦ π − r`, an isometry of every metric in the family.
    pub fn mirrored(&self) -> Self {
        Point::new(PI - self.r, self.theta, self.phi)
    }

    pub fn coord(&self) -> Coord {
        Coord::new(self.r, self.theta, self.phi)
    }
}

/// Unreduced coordinates. Angles are lifted to the real line so that a
/// coordinate-linear segment between two `Coord`s is unambiguous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coord {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl Coord {
    pub const fn new(r: f64, theta: f64, phi: f64) -> Self {
        Coord { r, theta, phi }
    }

    pub fn point(&self) -> Point {
        Point::new(self.r, self.theta, self.phi)
    }

    pub fn get(&self, axis: usize) -> f64 {
        match axis {
            0 => self.r,
            1 => self.theta,
            _ => self.phi,
        }
    }

    pub fn set(&mut self, axis: usize, v: f64) {
        match axis {
            0 => self.r = v,
            1 => self.theta = v,
            _ => self.phi = v,
        }
    }

    pub fn lerp(&self, other: &Coord, t: f64) -> Coord {
        Coord::new(
            self.r + (other.r - self.r) * t,
            self.theta + (other.theta - self.theta) * t,
            self.phi + (other.phi - self.phi) * t,
        )
    }

    /// The lift of `p` whose angles are closest to `self`.
    pub fn nearest_lift(&self, p: &Point) -> Coord {
        Coord::new(
            p.r,
            self.theta + wrap_delta(p.theta - self.theta),
            self.phi + wrap_delta(p.phi - self.phi),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub dr: f64,
    pub dtheta: f64,
    pub dphi: f64,
}

impl Tangent {
    pub const fn new(dr: f64, dtheta: f64, dphi: f64) -> Self {
        Tangent { dr, dtheta, dphi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WarpFamily {
    /// `ln((1+a)/(sin²r + a)) + β`.
    Sequence { a: f64, beta: f64 },
    /// `−2 ln sin r + β`, singular at the poles.
    Extreme { beta: f64 },
    /// `c`, giving an isometric product (scaled fiber).
    Constant { c: f64 },
}

impl WarpFamily {
    pub fn sequence(a: f64, beta: f64) -> Result<Self> {
        let w = WarpFamily::Sequence { a, beta };
        w.validate()?;
        Ok(w)
    }

    pub fn extreme(beta: f64) -> Result<Self> {
        let w = WarpFamily::Extreme { beta };
        w.validate()?;
        Ok(w)
    }

    pub fn constant(c: f64) -> Result<Self> {
        let w = WarpFamily::Constant { c };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            WarpFamily::Sequence { a, beta } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(GeoError::InvalidWarp(format!("a must be positive, got {a}")));
                }
                check_beta(beta)
            }
            WarpFamily::Extreme { beta } => check_beta(beta),
            WarpFamily::Constant { c } => {
                if c > 0.0 && c.is_finite() {
                    Ok(())
                } else {
                    Err(GeoError::InvalidWarp(format!("c must be positive, got {c}")))
                }
            }
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match *self {
            WarpFamily::Sequence { beta, .. } | WarpFamily::Extreme { beta } => Some(beta),
            WarpFamily::Constant { .. } => None,
        }
    }

    pub fn is_extreme(&self) -> bool {
        matches!(self, WarpFamily::Extreme { .. })
    }

    /// Global minimum of `f`, attained at the equator for the varying warps.
    pub fn min_value(&self) -> f64 {
        match *self {
            WarpFamily::Sequence { beta, .. } | WarpFamily::Extreme { beta } => beta,
            WarpFamily::Constant { c } => c,
        }
    }

    /// `f` as a function of `sin²r` and `cos²r`.
    ///
    /// Both varying warps are evaluated as `ln_1p(cos² / (sin² + a)) + β`
    /// with `a = 0` for the extreme warp, so the ordering in `a` survives
    /// rounding: every operation is monotone in `a`.
    #[inline]
    pub fn value_trig(&self, sin2: f64, cos2: f64) -> f64 {
        match *self {
            WarpFamily::Sequence { a, beta } => (cos2 / (sin2 + a)).ln_1p() + beta,
            WarpFamily::Extreme { beta } => (cos2 / sin2).ln_1p() + beta,
            WarpFamily::Constant { c } => c,
        }
    }

    /// Unchecked evaluation; infinite at the poles for the extreme warp.
    #[inline]
    pub fn value_unchecked(&self, r: f64) -> f64 {
        let (s, c) = r.sin_cos();
        self.value_trig(s * s, c * c)
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if self.is_extreme() && on_singular_set(r) {
            return Err(GeoError::ExtremeAtPole { r });
        }
        Ok(self.value_unchecked(r))
    }

    /// Evaluation with the extreme warp clamped to `[r_min, π − r_min]`.
    pub fn eval_clamped(&self, r: f64) -> f64 {
        if self.is_extreme() {
            self.value_unchecked(r.clamp(R_MIN_CLAMP, PI - R_MIN_CLAMP))
        } else {
            self.value_unchecked(r)
        }
    }

    /// `f'(r)`.
    pub fn derivative(&self, r: f64) -> Result<f64> {
        let (s, c) = r.sin_cos();
        match *self {
            WarpFamily::Sequence { a, .. } => Ok(-2.0 * s * c / (s * s + a)),
            WarpFamily::Extreme { .. } => {
                if on_singular_set(r) {
                    Err(GeoError::ExtremeAtPole { r })
                } else {
                    Ok(-2.0 * c / s)
                }
            }
            WarpFamily::Constant { .. } => Ok(0.0),
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 2.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(GeoError::InvalidWarp(format!("beta must be at least 2, got {beta}")))
    }
}

fn on_singular_set(r: f64) -> bool {
    r <= TOL_SING || r >= PI - TOL_SING
}

/// Sequence of warps `Sequence(a₀·2^{-j})` for `j = 0..=jmax`.
pub fn geometric_schedule(a0: f64, jmax: usize, beta: f64) -> Result<Vec<WarpFamily>> {
    (0..=jmax)
        .map(|j| WarpFamily::sequence(a0 * 0.5f64.powi(j as i32), beta))
        .collect()
}

pub fn warp_eval(w: &WarpFamily, r: f64) -> Result<f64> {
    w.eval(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub warp: WarpFamily,
    /// Evaluate the extreme warp with `r` clamped away from the poles.
    #[serde(default)]
    pub clamp_extreme: bool,
}

impl MetricParams {
    pub fn new(warp: WarpFamily) -> Self {
        MetricParams { warp, clamp_extreme: false }
    }

    pub fn clamped(warp: WarpFamily) -> Self {
        MetricParams { warp, clamp_extreme: true }
    }

    pub fn warp_at(&self, r: f64) -> Result<f64> {
        if self.clamp_extreme {
            Ok(self.warp.eval_clamped(r))
        } else {
            self.warp.eval(r)
        }
    }

    /// Speed of a coordinate velocity at latitude `r`, with the fiber term
    /// skipped when `dphi = 0` so that meridians through the poles are
    /// measurable under the extreme warp.
    #[inline]
    pub fn speed_unchecked(&self, r: f64, d: Tangent) -> f64 {
        let s = r.sin();
        let mut q = d.dr * d.dr + s * s * d.dtheta * d.dtheta;
        if d.dphi != 0.0 {
            let f = if self.clamp_extreme {
                self.warp.eval_clamped(r)
            } else {
                self.warp.value_unchecked(r)
            };
            q += f * f * d.dphi * d.dphi;
        }
        q.sqrt()
    }

    /// `(f, f')` at `r` without pole checks; the slope is zero where the
    /// extreme warp is clamped.
    #[inline]
    pub fn warp_and_slope_unchecked(&self, r: f64) -> (f64, f64) {
        let r = if self.clamp_extreme && self.warp.is_extreme() {
            let c = r.clamp(R_MIN_CLAMP, PI - R_MIN_CLAMP);
            if c != r {
                return (self.warp.value_unchecked(c), 0.0);
            }
            c
        } else {
            r
        };
        let (s, c) = r.sin_cos();
        let slope = match self.warp {
            WarpFamily::Sequence { a, .. } => -2.0 * s * c / (s * s + a),
            WarpFamily::Extreme { .. } => -2.0 * c / s,
            WarpFamily::Constant { .. } => 0.0,
        };
        (self.warp.value_trig(s * s, c * c), slope)
    }
}

pub fn metric_norm(m: &MetricParams, p: &Point, v: &Tangent) -> Result<f64> {
    if v.dphi != 0.0 {
        m.warp_at(p.r)?;
    }
    Ok(m.speed_unchecked(p.r, *v))
}

pub fn s1_distance(alpha: f64, beta: f64) -> f64 {
    let d = (alpha - beta).abs().rem_euclid(TAU);
    d.min(TAU - d)
}

/// Great-circle distance between `(r, θ)` positions on the unit sphere.
pub fn s2_distance(p: (f64, f64), q: (f64, f64)) -> f64 {
    let c = p.0.cos() * q.0.cos() + p.0.sin() * q.0.sin() * (p.1 - q.1).cos();
    let acos = c.clamp(-1.0, 1.0).acos();
    // arccos loses half the digits near 0; the haversine form keeps them.
    if acos < 1e-3 {
        let dr = 0.5 * (p.0 - q.0);
        let dt = 0.5 * s1_distance(p.1, q.1);
        let h = dr.sin().powi(2) + p.0.sin() * q.0.sin() * dt.sin().powi(2);
        2.0 * h.sqrt().min(1.0).asin()
    } else {
        acos
    }
}

/// Distance of the isometric product `S² × S¹`.
pub fn product_distance_d0(p: &Point, q: &Point) -> f64 {
    let a = s2_distance((p.r, p.theta), (q.r, q.theta));
    let b = s1_distance(p.phi, q.phi);
    a.hypot(b)
}

/// Distance to the singular set, the same for every warp.
pub fn rho(p: &Point) -> f64 {
    p.r.min(PI - p.r)
}

/// `ln sin x` for `x = e^{-y}`, accurate far below the f64 range of `x`.
fn ln_sin_exp_neg(y: f64) -> f64 {
    let x = (-y).exp();
    if x < 1e-4 {
        -y + (-(x * x) / 6.0).ln_1p()
    } else {
        x.sin().ln()
    }
}

/// `a(x) = −2 ln(sin x)·x^{1/m}` evaluated at `x = e^{-y}`.
fn threshold_fn(m: u32, y: f64) -> f64 {
    -2.0 * ln_sin_exp_neg(y) * (-y / m as f64).exp()
}

/// `−2 ln(sin x)·x^{1/m}`.
pub fn threshold_function(m: u32, x: f64) -> f64 {
    threshold_fn(m, -x.ln())
}

/// Largest `c` such that `−2 ln(sin x)·x^{1/m} < 1` on `(0, c)`, shrunk by 0.99.
///
/// The search runs in `y = −ln x` so that the crossing is resolved to
/// relative precision even when `c_m` is many orders of magnitude below 1.
pub fn c_m_threshold(m: u32) -> Result<f64> {
    if m == 0 {
        return Err(GeoError::NoThreshold { m, reason: "m must be positive".into() });
    }
    let y_lo = -FRAC_PI_2.ln();
    let y_hi = 64.0 * m as f64 + 64.0;
    let steps = 20_000;
    // smallest crossing in x is the largest crossing in y
    let mut last_above: Option<(f64, f64)> = None;
    for k in 0..=steps {
        let y = y_lo + (y_hi - y_lo) * k as f64 / steps as f64;
        if threshold_fn(m, y) >= 1.0 {
            let next = y_lo + (y_hi - y_lo) * (k + 1) as f64 / steps as f64;
            last_above = Some((y, next));
        }
    }
    if threshold_fn(m, y_hi) >= 1.0 {
        return Err(GeoError::NoThreshold { m, reason: "crossing beyond search range".into() });
    }
    let crossing = match last_above {
        None => FRAC_PI_2,
        Some((mut above, mut below)) => {
            while below - above > 1e-10 {
                let mid = 0.5 * (above + below);
                if threshold_fn(m, mid) >= 1.0 {
                    above = mid;
                } else {
                    below = mid;
                }
            }
            (-below).exp()
        }
    };
    let c = 0.99 * crossing;
    if !(c > 0.0) || c < f64::MIN_POSITIVE {
        return Err(GeoError::NoThreshold { m, reason: "threshold underflows f64".into() });
    }
    validate_threshold(m, c)?;
    Ok(c)
}

fn validate_threshold(m: u32, c: f64) -> Result<()> {
    let n = 10_000;
    let yc = -c.ln();
    for k in 1..=n {
        let x = c * k as f64 / n as f64;
        // log-spaced companion grid covers the approach to 0
        let y_log = yc + 40.0 * (m as f64 + 1.0) * (k - 1) as f64 / n as f64;
        for v in [threshold_function(m, x), threshold_fn(m, y_log)] {
            if !(v < 1.0) {
                return Err(GeoError::NoThreshold {
                    m,
                    reason: format!("a(x) = {v} >= 1 inside (0, {c})"),
                });
            }
        }
    }
    Ok(())
}
