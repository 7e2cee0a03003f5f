//! Curves, their lengths, and explicit comparison curves giving closed-form
//! upper bounds on distances.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::geometry::{
    c_m_threshold, reduce_angle, s1_distance, wrap_delta, Coord, MetricParams, Point, Tangent,
    WarpFamily, TOL_SING,
};
use crate::quadrature::{integrate, integrate_singular_end, integrate_singular_start, Integral, QuadratureConfig};

/// A smooth map `[0, 1] → (r, θ, φ)` returning position and velocity.
pub type SegmentMap = Arc<dyn Fn(f64) -> (Coord, Tangent) + Send + Sync>;

#[derive(Clone)]
pub enum Segment {
    /// Coordinate-linear segment between lifted coordinates.
    Linear { from: Coord, to: Coord },
    Map { label: String, map: SegmentMap },
}

impl fmt::Debug for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Segment::Linear { from, to } => f.debug_struct("Linear").field("from", from).field("to", to).finish(),
            Segment::Map { label, .. } => f.debug_struct("Map").field("label", label).finish(),
        }
    }
}

impl Segment {
    pub fn linear(from: Coord, to: Coord) -> Self {
        Segment::Linear { from, to }
    }

    pub fn eval(&self, t: f64) -> (Coord, Tangent) {
        match self {
            Segment::Linear { from, to } => (
                from.lerp(to, t),
                Tangent::new(to.r - from.r, to.theta - from.theta, to.phi - from.phi),
            ),
            Segment::Map { map, .. } => map(t),
        }
    }

    pub fn start(&self) -> Coord {
        self.eval(0.0).0
    }

    pub fn end(&self) -> Coord {
        self.eval(1.0).0
    }
}

#[derive(Debug, Clone)]
pub struct ParamCurve {
    segments: Vec<Segment>,
}

const JUNCTION_TOL: f64 = 1e-9;

impl ParamCurve {
    /// Checks continuity at junctions, comparing angles mod 2π.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(GeoError::InvalidCurve("a curve needs at least one segment".into()));
        }
        for (i, w) in segments.windows(2).enumerate() {
            let a = w[0].end();
            let b = w[1].start();
            let gap = (a.r - b.r)
                .abs()
                .max(s1_distance(a.theta, b.theta))
                .max(s1_distance(a.phi, b.phi));
            if gap > JUNCTION_TOL {
                return Err(GeoError::InvalidCurve(format!("segments {i} and {} do not meet (gap {gap:.3e})", i + 1)));
            }
        }
        Ok(ParamCurve { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn start(&self) -> Coord {
        self.segments[0].start()
    }

    pub fn end(&self) -> Coord {
        self.segments[self.segments.len() - 1].end()
    }

    /// Position at global parameter `s ∈ [0, segment count]`.
    pub fn position(&self, s: f64) -> Coord {
        let n = self.segments.len();
        let k = (s.floor().max(0.0) as usize).min(n - 1);
        self.segments[k].eval((s - k as f64).clamp(0.0, 1.0)).0
    }

    /// The fiber circle over latitude `r`, traversed once.
    pub fn fiber_circle(r: f64, theta: f64) -> Self {
        ParamCurve {
            segments: vec![Segment::linear(Coord::new(r, theta, 0.0), Coord::new(r, theta, 2.0 * PI))],
        }
    }

    pub fn to_json(&self, samples_per_segment: usize) -> CurveJson {
        let n = samples_per_segment.max(1);
        let mut samples = Vec::new();
        let mut meta = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            let start = samples.len();
            let first = if i == 0 { 0 } else { 1 };
            for k in first..=n {
                let t = k as f64 / n as f64;
                let c = seg.eval(t).0;
                samples.push([i as f64 + t, c.r, c.theta, c.phi]);
            }
            let kind = match seg {
                Segment::Linear { .. } => "linear".to_string(),
                Segment::Map { label, .. } => label.clone(),
            };
            meta.push(SegmentMeta { kind, first_sample: start.saturating_sub(first), last_sample: samples.len() - 1 });
        }
        CurveJson { schema: CURVE_SCHEMA.to_string(), samples, segments: meta }
    }

    /// Rebuilds a curve as coordinate-linear pieces between consecutive samples.
    pub fn from_json(json: &CurveJson) -> Result<Self> {
        if json.samples.len() < 2 {
            return Err(GeoError::InvalidCurve("at least two samples are required".into()));
        }
        for w in json.samples.windows(2) {
            if !(w[1][0] > w[0][0]) {
                return Err(GeoError::InvalidCurve("sample parameters must increase".into()));
            }
        }
        let segs = json
            .samples
            .windows(2)
            .map(|w| Segment::linear(Coord::new(w[0][1], w[0][2], w[0][3]), Coord::new(w[1][1], w[1][2], w[1][3])))
            .collect();
        ParamCurve::new(segs)
    }
}

pub const CURVE_SCHEMA: &str = "warpgeo.curve.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMeta {
    pub kind: String,
    pub first_sample: usize,
    pub last_sample: usize,
}

/// Curve exchange format: `(t, r, θ, φ)` samples with lifted angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveJson {
    pub schema: String,
    pub samples: Vec<[f64; 4]>,
    pub segments: Vec<SegmentMeta>,
}

/// Piecewise coordinate-linear curve through lifted vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub vertices: Vec<Coord>,
}

impl Polyline {
    /// Drops repeated consecutive vertices; a single remaining vertex is the
    /// degenerate constant curve.
    pub fn new(vertices: Vec<Coord>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(GeoError::InvalidCurve("a polyline needs at least one vertex".into()));
        }
        let mut v: Vec<Coord> = Vec::with_capacity(vertices.len());
        for c in vertices {
            if v.last() != Some(&c) {
                v.push(c);
            }
        }
        Ok(Polyline { vertices: v })
    }

    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 2
    }

    pub fn points(&self) -> Vec<Point> {
        self.vertices.iter().map(Coord::point).collect()
    }

    pub fn first(&self) -> Coord {
        self.vertices[0]
    }

    pub fn last(&self) -> Coord {
        self.vertices[self.vertices.len() - 1]
    }

    pub fn to_curve(&self) -> Option<ParamCurve> {
        if self.is_degenerate() {
            return None;
        }
        let segs = self.vertices.windows(2).map(|w| Segment::linear(w[0], w[1])).collect();
        Some(ParamCurve { segments: segs })
    }

    /// Reflection `r ↦ π − r` of every vertex.
    pub fn mirrored(&self) -> Polyline {
        Polyline { vertices: self.vertices.iter().map(|c| Coord::new(PI - c.r, c.theta, c.phi)).collect() }
    }

    pub fn r_range(&self) -> (f64, f64) {
        self.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c.r), hi.max(c.r)))
    }

    /// Whether the polyline joins `p` to `q` (angles mod 2π; `θ` is ignored
    /// at a pole, where it names no direction).
    pub fn joins(&self, p: &Point, q: &Point) -> bool {
        let close = |c: &Coord, x: &Point| {
            let pole = x.r == 0.0 || x.r == PI;
            (c.r - x.r).abs() < 1e-12
                && (pole || s1_distance(c.theta, x.theta) < 1e-9)
                && s1_distance(c.phi, x.phi) < 1e-9
        };
        close(&self.first(), p) && close(&self.last(), q)
    }
}

fn near_pole(r: f64) -> bool {
    r <= TOL_SING || r >= PI - TOL_SING
}

/// Length of one segment under `m`.
pub fn segment_length(m: &MetricParams, seg: &Segment, quad: &QuadratureConfig) -> Result<Integral> {
    match seg {
        Segment::Linear { from, to } => linear_length(m, from, to, quad),
        Segment::Map { map, .. } => map_length(m, map, quad),
    }
}

fn linear_length(m: &MetricParams, a: &Coord, b: &Coord, quad: &QuadratureConfig) -> Result<Integral> {
    let d = Tangent::new(b.r - a.r, b.theta - a.theta, b.phi - a.phi);
    if d.dtheta == 0.0 && d.dphi == 0.0 {
        return Ok(Integral { value: d.dr.abs(), abs_error: 0.0 });
    }
    let integrand = |t: f64| m.speed_unchecked(a.r + d.dr * t, d);
    let singular = m.warp.is_extreme() && !m.clamp_extreme && d.dphi != 0.0;
    if !singular {
        if d.dr == 0.0 {
            // constant integrand
            return Ok(Integral { value: m.speed_unchecked(a.r, d), abs_error: 0.0 });
        }
        return integrate(integrand, 0.0, 1.0, quad);
    }
    let (s0, s1) = (near_pole(a.r), near_pole(b.r));
    if d.dr == 0.0 {
        if s0 {
            return Err(GeoError::ExtremeUnrectifiable);
        }
        return Ok(Integral { value: m.speed_unchecked(a.r, d), abs_error: 0.0 });
    }
    let half = QuadratureConfig { tol: quad.tol / 2.0, ..*quad };
    match (s0, s1) {
        (false, false) => integrate(integrand, 0.0, 1.0, quad),
        (true, false) => integrate_singular_start(integrand, 0.0, 1.0, quad),
        (false, true) => integrate_singular_end(integrand, 0.0, 1.0, quad),
        (true, true) => Ok(integrate_singular_start(integrand, 0.0, 0.5, &half)?
            .add(integrate_singular_end(integrand, 0.5, 1.0, &half)?)),
    }
}

fn map_length(m: &MetricParams, map: &SegmentMap, quad: &QuadratureConfig) -> Result<Integral> {
    let integrand = |t: f64| {
        let (c, v) = map(t);
        m.speed_unchecked(c.r, v)
    };
    if !m.warp.is_extreme() || m.clamp_extreme {
        return integrate(integrand, 0.0, 1.0, quad);
    }
    let cuts = singular_parameters(map);
    if cuts.is_empty() {
        return integrate(integrand, 0.0, 1.0, quad);
    }
    let mut knots = vec![0.0];
    knots.extend(cuts.iter().copied().filter(|&t| t > 0.0 && t < 1.0));
    knots.push(1.0);
    let is_cut = |t: f64| cuts.iter().any(|&c| (c - t).abs() < 1e-15);
    let piece_cfg = QuadratureConfig { tol: quad.tol / (2 * knots.len()) as f64, ..*quad };
    let mut acc = Integral::ZERO;
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let left = if is_cut(lo) {
            integrate_singular_start(integrand, lo, mid, &piece_cfg)?
        } else {
            integrate(integrand, lo, mid, &piece_cfg)?
        };
        let right = if is_cut(hi) {
            integrate_singular_end(integrand, mid, hi, &piece_cfg)?
        } else {
            integrate(integrand, mid, hi, &piece_cfg)?
        };
        acc = acc.add(left).add(right);
    }
    Ok(acc)
}

/// Parameters where a mapped segment meets the singular set, found from a
/// sampled distance-to-S profile refined by golden-section search.
fn singular_parameters(map: &SegmentMap) -> Vec<f64> {
    let rho_at = |t: f64| {
        let r = map(t).0.r;
        r.min(PI - r)
    };
    let n = 128;
    let vals: Vec<f64> = (0..=n).map(|k| rho_at(k as f64 / n as f64)).collect();
    let mut cuts = Vec::new();
    for k in 0..=n {
        let left = if k == 0 { f64::INFINITY } else { vals[k - 1] };
        let right = if k == n { f64::INFINITY } else { vals[k + 1] };
        if vals[k] > left || vals[k] > right {
            continue;
        }
        let (mut lo, mut hi) = ((k.max(1) - 1) as f64 / n as f64, ((k + 1).min(n)) as f64 / n as f64);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let x1 = hi - g * (hi - lo);
            let x2 = lo + g * (hi - lo);
            if rho_at(x1) <= rho_at(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        let t = if vals[k] <= TOL_SING { k as f64 / n as f64 } else { 0.5 * (lo + hi) };
        if rho_at(t) <= 1e-9 && !cuts.iter().any(|&c: &f64| (c - t).abs() < 1e-9) {
            cuts.push(t);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts
}

/// Length of a curve, summing per-segment adaptive quadrature.
pub fn curve_length(m: &MetricParams, c: &ParamCurve, quad: &QuadratureConfig) -> Result<Integral> {
    let per = QuadratureConfig { tol: quad.tol / c.segments.len() as f64, ..*quad };
    c.segments
        .iter()
        .try_fold(Integral::ZERO, |acc, s| Ok(acc.add(segment_length(m, s, &per)?)))
}

pub fn polyline_length(m: &MetricParams, p: &Polyline, quad: &QuadratureConfig) -> Result<Integral> {
    match p.to_curve() {
        None => Ok(Integral::ZERO),
        Some(c) => curve_length(m, &c, quad),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundKind {
    ThreeArc,
    Waypoint { r0: f64 },
    ProductLower,
    /// Bound on the θ-separation of points within `delta` of `p` in `d_0`.
    ThetaModulus { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub value: f64,
    pub kind: BoundKind,
    pub warp: WarpFamily,
    pub p: Point,
    pub q: Point,
}

impl BoundCertificate {
    /// Recomputes `value` from the recorded inputs.
    pub fn recompute(&self) -> Result<f64> {
        Ok(match self.kind {
            BoundKind::ThreeArc => three_arc_bound(&self.warp, &self.p, &self.q)?.value,
            BoundKind::Waypoint { r0 } => waypoint_bound(&self.warp, &self.p, &self.q, r0)?.value,
            BoundKind::ProductLower => product_lower_bound(&self.warp, &self.p, &self.q).value,
            BoundKind::ThetaModulus { delta } => theta_modulus(&self.p, delta)?.value,
        })
    }
}

/// `|r_p − r_q| + sin(r_q)·d(θ) + f(r_q)·d(φ)`: radial leg to `q`'s latitude,
/// then a θ-arc and a φ-arc there.
pub fn three_arc_bound(w: &WarpFamily, p: &Point, q: &Point) -> Result<BoundCertificate> {
    let f = w.eval(q.r)?;
    let value = (p.r - q.r).abs() + q.r.sin() * s1_distance(p.theta, q.theta) + f * s1_distance(p.phi, q.phi);
    Ok(BoundCertificate { value, kind: BoundKind::ThreeArc, warp: *w, p: *p, q: *q })
}

/// The concatenated curve realising [`three_arc_bound`].
pub fn three_arc_curve(p: &Point, q: &Point) -> Result<ParamCurve> {
    let a = p.coord();
    let b = Coord::new(q.r, a.theta, a.phi);
    let c = Coord::new(q.r, a.theta + wrap_delta(q.theta - p.theta), a.phi);
    let d = Coord::new(q.r, c.theta, a.phi + wrap_delta(q.phi - p.phi));
    ParamCurve::new(vec![Segment::linear(a, b), Segment::linear(b, c), Segment::linear(c, d)])
}

/// `|r_p − r₀| + |r_q − r₀| + sin(r₀)·d(θ) + f(r₀)·d(φ)`.
pub fn waypoint_bound(w: &WarpFamily, p: &Point, q: &Point, r0: f64) -> Result<BoundCertificate> {
    if !(r0 > 0.0 && r0 < PI) {
        return Err(GeoError::InvalidCurve(format!("waypoint latitude {r0} must lie in (0, π)")));
    }
    let f = w.eval(r0)?;
    let value = (p.r - r0).abs() + (q.r - r0).abs() + r0.sin() * s1_distance(p.theta, q.theta) + f * s1_distance(p.phi, q.phi);
    Ok(BoundCertificate { value, kind: BoundKind::Waypoint { r0 }, warp: *w, p: *p, q: *q })
}

/// The curve realising [`waypoint_bound`]: radial, θ-arc, φ-arc, radial.
pub fn waypoint_curve(p: &Point, q: &Point, r0: f64) -> Result<ParamCurve> {
    let a = p.coord();
    let b = Coord::new(r0, a.theta, a.phi);
    let c = Coord::new(r0, a.theta + wrap_delta(q.theta - p.theta), a.phi);
    let d = Coord::new(r0, c.theta, a.phi + wrap_delta(q.phi - p.phi));
    let e = Coord::new(q.r, d.theta, d.phi);
    ParamCurve::new(vec![Segment::linear(a, b), Segment::linear(b, c), Segment::linear(c, d), Segment::linear(d, e)])
}

/// Default waypoint latitudes: 256 log-spaced values in `(1e-6, π/2]`
/// together with their mirror images.
pub fn waypoint_grid() -> Vec<f64> {
    let n = 256;
    let (lo, hi) = (1e-6f64.ln(), FRAC_PI_2.ln());
    let mut v = Vec::with_capacity(2 * n);
    for k in 1..=n {
        let r = (lo + (hi - lo) * k as f64 / n as f64).exp();
        v.push(r.min(FRAC_PI_2));
    }
    let mirrored: Vec<f64> = v.iter().filter(|&&r| r < FRAC_PI_2).map(|r| PI - r).collect();
    v.extend(mirrored);
    v
}

/// Minimum of [`waypoint_bound`] over the default grid, the extra
/// latitudes, and the endpoint latitudes, restricted to `[lo, hi]`.
pub fn best_waypoint_bound(w: &WarpFamily, p: &Point, q: &Point, extra: &[f64], range: Option<(f64, f64)>) -> Result<BoundCertificate> {
    let (lo, hi) = range.unwrap_or((0.0, PI));
    let mut best: Option<BoundCertificate> = None;
    let candidates = waypoint_grid()
        .into_iter()
        .chain(extra.iter().copied())
        .chain([p.r, q.r, lo, hi]);
    for r0 in candidates {
        if !(r0 > 0.0 && r0 < PI) || r0 < lo || r0 > hi {
            continue;
        }
        let c = waypoint_bound(w, p, q, r0)?;
        if best.is_none_or(|b| c.value < b.value) {
            best = Some(c);
        }
    }
    best.ok_or_else(|| GeoError::InvalidCurve("no admissible waypoint latitude".into()))
}

/// `sqrt(d_{S²}² + f_min²·d_{S¹}(φ)²)`, the distance of the product metric
/// with fiber `f_min = min f`, which every metric of the family dominates.
pub fn product_lower_bound(w: &WarpFamily, p: &Point, q: &Point) -> BoundCertificate {
    let a = crate::geometry::s2_distance((p.r, p.theta), (q.r, q.theta));
    let b = w.min_value() * s1_distance(p.phi, q.phi);
    BoundCertificate { value: a.hypot(b), kind: BoundKind::ProductLower, warp: *w, p: *p, q: *q }
}

/// Upper bound `δ / sin(ρ_p/2)` on `d(θ_p, θ_q)` valid for every `q` with
/// `d_0(p, q) < δ < ρ_p/2`.
///
/// The latitude of `q` stays within `δ` of `p`'s, so `sin r ≥ sin(ρ_p/2)` on
/// the comparison path; the bound is symmetric in the two hemispheres.
pub fn theta_modulus(p: &Point, delta: f64) -> Result<BoundCertificate> {
    let rp = crate::geometry::rho(p);
    if !(delta > 0.0 && delta < rp / 2.0) {
        return Err(GeoError::InvalidCurve(format!("theta modulus needs 0 < δ < ρ/2, got δ = {delta}, ρ = {rp}")));
    }
    Ok(BoundCertificate {
        value: delta / (rp / 2.0).sin(),
        kind: BoundKind::ThetaModulus { delta },
        warp: WarpFamily::Constant { c: 1.0 },
        p: *p,
        q: *p,
    })
}

/// `(3+β)·δ^{1−1/m}` bounding the limit distance between two points of a
/// singular fiber at fiber separation `δ < min(c_m, π/2)`.
pub fn singular_pair_bound(beta: f64, phi1: f64, phi2: f64, m: u32) -> Result<f64> {
    let delta = s1_distance(phi1, phi2);
    let limit = c_m_threshold(m)?.min(FRAC_PI_2);
    if delta >= limit {
        return Err(GeoError::DeltaTooLarge { delta, limit });
    }
    Ok(singular_pair_formula(beta, delta, m))
}

/// `(3+β)·δ^{1−1/m}` without the admissibility check on `δ`.
pub fn singular_pair_formula(beta: f64, delta: f64, m: u32) -> f64 {
    (3.0 + beta) * delta.powf(1.0 - 1.0 / m as f64)
}

/// Length `2r + f_∞(r)·δ` of the curve that leaves the singular fiber to
/// latitude `r`, runs `δ` along the fiber there, and returns.
pub fn two_leg_value(beta: f64, delta: f64, r: f64) -> f64 {
    2.0 * r + (-2.0 * r.sin().ln() + beta) * delta
}

/// Minimum of [`two_leg_value`] over `r ∈ (0, π/2]`, attained at `tan r = δ`.
pub fn two_leg_bound(beta: f64, delta: f64) -> (f64, f64) {
    if delta == 0.0 {
        return (0.0, 0.0);
    }
    let r = delta.atan();
    (two_leg_value(beta, delta, r), r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthMonotoneReport {
    pub lengths: Vec<f64>,
    pub errors: Vec<f64>,
    pub nondecreasing: bool,
    pub final_gap: f64,
}

/// Lengths of `curve` along a schedule ending with the extreme warp.
pub fn length_monotone_check(
    curve: &ParamCurve,
    schedule: &[WarpFamily],
    quad: &QuadratureConfig,
) -> Result<LengthMonotoneReport> {
    if schedule.len() < 2 || !schedule[schedule.len() - 1].is_extreme() {
        return Err(GeoError::InvalidWarp("schedule must end with the extreme warp".into()));
    }
    let mut lengths = Vec::with_capacity(schedule.len());
    let mut errors = Vec::with_capacity(schedule.len());
    for w in schedule {
        let l = curve_length(&MetricParams::new(*w), curve, quad)?;
        lengths.push(l.value);
        errors.push(l.abs_error);
    }
    for (i, w) in lengths.windows(2).enumerate() {
        if w[1] < w[0] - 2.0 * quad.tol {
            return Err(GeoError::MonotonicityViolation { index: i, decrease: w[0] - w[1] });
        }
    }
    let n = lengths.len();
    Ok(LengthMonotoneReport {
        final_gap: (lengths[n - 1] - lengths[n - 2]).abs(),
        lengths,
        errors,
        nondecreasing: true,
    })
}

/// Normalised endpoint of a lifted coordinate.
pub fn coord_point(c: &Coord) -> Point {
    Point::new(c.r, reduce_angle(c.theta), reduce_angle(c.phi))
}
