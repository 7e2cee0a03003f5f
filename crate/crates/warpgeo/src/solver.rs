//! Certified distance brackets.
//!
//! Lower bounds come from comparison metrics in closed form. Upper bounds are
//! lengths, measured by adaptive quadrature, of explicit curves joining the
//! two points: lattice shortest paths with connectors to the true endpoints,
//! their refinements, caller-supplied candidate polylines, and the analytic
//! three-arc and waypoint curves.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{best_waypoint_bound, polyline_length, product_lower_bound, three_arc_bound, BoundKind, Polyline};
use crate::error::{GeoError, Result};
use crate::geometry::{product_distance_d0, rho, s1_distance, s2_distance, Coord, MetricParams, Point, WarpFamily};
use crate::grid::{GridGraph, GridSpec};
use crate::quadrature::QuadratureConfig;
use crate::refine::{
    great_circle_seed, optimize_path, refine_seeds, thin_lattice_path, MultilevelOptions, RefineOptions,
};
use crate::sample::PairSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerProvenance {
    /// `d_0`, valid whenever `f ≥ 1`.
    ProductD0,
    /// Product metric with the warp's minimum as constant fiber.
    ProductFiberMin,
    /// Leave the polar cap of radius `ρ` or pay the fiber length at `ρ`.
    PolarPinch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperProvenance {
    GraphPath,
    RefinedPath,
    ThreeArc,
    Waypoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    pub provenance: LowerProvenance,
}

/// Largest of the closed-form lower bounds for the distance of `w`.
pub fn certified_lower(w: &WarpFamily, p: &Point, q: &Point) -> LowerBound {
    let fmin = w.min_value();
    let mut best =
        LowerBound { value: product_lower_bound(w, p, q).value, provenance: LowerProvenance::ProductFiberMin };
    if fmin >= 1.0 {
        let d0 = product_distance_d0(p, q);
        if d0 > best.value {
            best = LowerBound { value: d0, provenance: LowerProvenance::ProductD0 };
        }
    }
    if !matches!(w, WarpFamily::Constant { .. }) {
        let pinch = polar_pinch_bound(w, p, q);
        if pinch > best.value {
            best = LowerBound { value: pinch, provenance: LowerProvenance::PolarPinch };
        }
    }
    best
}

/// `max_ρ min(2ρ − ρ_p − ρ_q, sqrt(d_{S²}² + f(ρ)² d_{S¹}²))` over caps
/// `ρ ≥ max(ρ_p, ρ_q)` around whichever pole both points share.
///
/// A curve either stays in the cap, where `f ≥ f(ρ)` because the warp
/// decreases away from the poles, or reaches its boundary and returns.
pub fn polar_pinch_bound(w: &WarpFamily, p: &Point, q: &Point) -> f64 {
    let s2 = s2_distance((p.r, p.theta), (q.r, q.theta));
    let dphi = s1_distance(p.phi, q.phi);
    let cap = |ra: f64, rb: f64| -> f64 {
        let lo = ra.max(rb);
        if lo >= FRAC_PI_2 {
            return 0.0;
        }
        let leave = |x: f64| 2.0 * x - ra - rb;
        let stay = |x: f64| s2.hypot(w.value_unchecked(x) * dphi);
        if leave(lo) >= stay(lo) {
            return stay(lo);
        }
        if leave(FRAC_PI_2) <= stay(FRAC_PI_2) {
            return leave(FRAC_PI_2);
        }
        let (mut a, mut b) = (lo, FRAC_PI_2);
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if leave(mid) < stay(mid) {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-15 * b {
                break;
            }
        }
        // `leave` rises and `stay` falls, so the minimum of both is
        // unimodal with its peak inside the final bracket
        leave(a).min(stay(a)).max(leave(b).min(stay(b)))
    };
    cap(p.r, q.r).max(cap(PI - p.r, PI - q.r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBracket {
    pub p: Point,
    pub q: Point,
    pub lower: f64,
    pub upper: f64,
    pub lower_provenance: LowerProvenance,
    pub upper_provenance: UpperProvenance,
    /// Lattice distance between the snapped nodes.
    pub graph_value: Option<f64>,
    /// `d_0`-size of the snaps bridged by connectors.
    pub snap: Option<f64>,
    /// Quadrature error estimate of the measured upper.
    pub upper_error: f64,
    /// Shortest measured polyline; realises `upper` for path provenances.
    #[serde(skip)]
    pub path: Option<Polyline>,
}

impl DistanceBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_valid(&self) -> bool {
        self.lower >= 0.0 && self.lower <= self.upper && self.upper.is_finite()
    }

    fn identical(p: Point, q: Point) -> Self {
        DistanceBracket {
            p,
            q,
            lower: 0.0,
            upper: 0.0,
            lower_provenance: LowerProvenance::ProductD0,
            upper_provenance: UpperProvenance::GraphPath,
            graph_value: Some(0.0),
            snap: Some(0.0),
            upper_error: 0.0,
            path: Polyline::new(vec![p.coord()]).ok(),
        }
    }
}

/// Whether `p` and `q` name the same point (`θ` is meaningless at a pole).
pub fn same_point(p: &Point, q: &Point) -> bool {
    let pole = p.r == 0.0 || p.r == PI;
    p.r == q.r && p.phi == q.phi && (pole || p.theta == q.theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub quadrature: QuadratureConfig,
    /// Refine lattice paths before measuring.
    pub refine: bool,
    /// Optimiser iterations applied to each candidate polyline.
    pub candidate_iters: usize,
    /// Refinement cascade; derived from the lattice spacing when absent.
    #[serde(default)]
    pub multilevel: Option<MultilevelOptions>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { quadrature: QuadratureConfig::default(), refine: true, candidate_iters: 60, multilevel: None }
    }
}

/// Brackets the distance of one metric on one lattice.
#[derive(Debug, Clone)]
pub struct DistanceSolver {
    graph: GridGraph,
    options: SolverOptions,
}

impl DistanceSolver {
    pub fn new(w: WarpFamily, spec: GridSpec) -> Result<Self> {
        Self::with_metric(MetricParams::new(w), spec, SolverOptions::default())
    }

    pub fn with_metric(m: MetricParams, spec: GridSpec, options: SolverOptions) -> Result<Self> {
        Ok(DistanceSolver { graph: GridGraph::build(m, spec)?, options })
    }

    pub fn graph(&self) -> &GridGraph {
        &self.graph
    }

    pub fn warp(&self) -> &WarpFamily {
        &self.graph.metric().warp
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn bracket(&self, p: &Point, q: &Point) -> Result<DistanceBracket> {
        self.brackets(&[(*p, *q)], &[]).pop().expect("one result")
    }

    fn check_admissible(&self, p: &Point, q: &Point) -> Result<()> {
        if let Some(radius) = self.graph.spec().restriction {
            for x in [p, q] {
                if rho(x) < radius {
                    return Err(GeoError::OutsideTube { rho: rho(x), radius });
                }
            }
        }
        Ok(())
    }

    /// Brackets for many pairs. `candidates[i]`, when present, lists extra
    /// polylines joining pair `i` that are refined and measured too.
    ///
    /// Pairs share one Dijkstra field per source level; sources in the upper
    /// half are handled through the `r ↦ π − r` symmetry.
    pub fn brackets(&self, pairs: &[(Point, Point)], candidates: &[Vec<Polyline>]) -> Vec<Result<DistanceBracket>> {
        let n_r = self.graph.spec().n_r;
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut out: Vec<Option<Result<DistanceBracket>>> = vec![None; pairs.len()];
        for (i, (p, q)) in pairs.iter().enumerate() {
            if let Err(e) = self.check_admissible(p, q) {
                out[i] = Some(Err(e));
            } else if same_point(p, q) {
                out[i] = Some(Ok(DistanceBracket::identical(*p, *q)));
            } else {
                let level = self.graph.level_of(p.r);
                let level = if 2 * level >= n_r { n_r - 1 - level } else { level };
                groups.entry(level).or_default().push(i);
            }
        }
        let groups: Vec<(usize, Vec<usize>)> = groups.into_iter().collect();
        let solved: Vec<(usize, Result<DistanceBracket>)> = groups
            .par_iter()
            .flat_map_iter(|(level, members)| {
                let oriented: Vec<(bool, Point, Point)> = members
                    .iter()
                    .map(|&i| {
                        let (p, q) = pairs[i];
                        let mirrored = 2 * self.graph.level_of(p.r) >= n_r;
                        if mirrored {
                            (true, p.mirrored(), q.mirrored())
                        } else {
                            (false, p, q)
                        }
                    })
                    .collect();
                let targets: Vec<usize> = oriented
                    .iter()
                    .map(|(_, pp, qq)| self.graph.target_index(self.graph.snap_target(pp, qq)))
                    .collect();
                let field = self.graph.field_from_level(*level, &targets);
                let paths: Vec<Result<(f64, f64, Polyline)>> = oriented
                    .iter()
                    .map(|(mirrored, pp, qq)| {
                        let gp = self.graph.path_on_field(&field, pp, qq)?;
                        let poly = if *mirrored { gp.polyline.mirrored() } else { gp.polyline };
                        Ok((gp.value, gp.snap, poly))
                    })
                    .collect();
                drop(field);
                members
                    .iter()
                    .zip(paths)
                    .map(|(&i, gp)| {
                        let extra = candidates.get(i).map(|v| v.as_slice()).unwrap_or(&[]);
                        (i, gp.and_then(|gp| self.finish(&pairs[i].0, &pairs[i].1, Some(gp), extra)))
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        for (i, r) in solved {
            out[i] = Some(r);
        }
        out.into_iter().map(|r| r.expect("every pair handled")).collect()
    }

    /// Bracket from candidate polylines and the analytic curves alone.
    pub fn bracket_without_graph(&self, p: &Point, q: &Point, candidates: &[Polyline]) -> Result<DistanceBracket> {
        self.check_admissible(p, q)?;
        if same_point(p, q) {
            return Ok(DistanceBracket::identical(*p, *q));
        }
        self.finish(p, q, None, candidates)
    }

    fn finish(
        &self,
        p: &Point,
        q: &Point,
        graph: Option<(f64, f64, Polyline)>,
        extra: &[Polyline],
    ) -> Result<DistanceBracket> {
        let m = self.graph.metric();
        let w = &m.warp;
        let bounds = self.graph.spec().r_bounds();
        let quad = &self.options.quadrature;
        let mut best: Option<(f64, f64, UpperProvenance, Option<Polyline>)> = None;
        let mut best_poly: Option<(f64, Polyline)> = None;
        let mut offer = |value: f64, err: f64, prov: UpperProvenance, poly: Option<Polyline>| {
            if !value.is_finite() {
                return;
            }
            if let Some(pl) = &poly {
                if best_poly.as_ref().is_none_or(|(v, _)| value < *v) {
                    best_poly = Some((value, pl.clone()));
                }
            }
            if best.as_ref().is_none_or(|b| value < b.0) {
                best = Some((value, err, prov, poly));
            }
        };
        let measure = |poly: &Polyline| polyline_length(m, poly, quad);
        let (graph_value, snap) = match graph {
            Some((value, snap, poly)) => {
                let raw = measure(&poly)?;
                offer(raw.value, raw.abs_error, UpperProvenance::GraphPath, Some(poly.clone()));
                if self.options.refine {
                    let (h, _, _) = self.graph.spacing();
                    let opts = self.options.multilevel.unwrap_or_else(|| MultilevelOptions::for_spacing(h, bounds));
                    let mut seeds = vec![thin_lattice_path(&poly, opts.coarse_segments), great_circle_seed(&p.coord(), &p.coord().nearest_lift(q), 1e-3, bounds)];
                    let range = self.graph.spec().restriction.map(|_| bounds);
                    if let Ok(c) = best_waypoint_bound(w, p, q, &[], range) {
                        if let BoundKind::Waypoint { r0 } = c.kind {
                            seeds.push(waypoint_seed(p, q, r0));
                        }
                    }
                    let refined = refine_seeds(m, &seeds, &opts);
                    let l = measure(&refined)?;
                    offer(l.value, l.abs_error, UpperProvenance::RefinedPath, Some(refined));
                }
                (Some(value), Some(snap))
            }
            None => (None, None),
        };
        for cand in extra {
            if !cand.joins(p, q) {
                continue;
            }
            let mut c = cand.clone();
            let last = c.vertices.len() - 1;
            for v in c.vertices.iter_mut().take(last).skip(1) {
                v.r = v.r.clamp(bounds.0, bounds.1);
            }
            let raw = measure(&c)?;
            offer(raw.value, raw.abs_error, UpperProvenance::RefinedPath, Some(c.clone()));
            if self.options.candidate_iters > 0 {
                let (h, _, _) = self.graph.spacing();
                let ro = RefineOptions { r_bounds: bounds, initial_step: 0.25 * h, rel_tol: 1e-10 };
                let refined = optimize_path(m, &c, self.options.candidate_iters, 50, &ro);
                let l = measure(&refined)?;
                offer(l.value, l.abs_error, UpperProvenance::RefinedPath, Some(refined));
            }
        }
        for (a, b) in [(p, q), (q, p)] {
            if let Ok(c) = three_arc_bound(w, a, b) {
                offer(c.value, 0.0, UpperProvenance::ThreeArc, None);
            }
        }
        let range = self.graph.spec().restriction.map(|_| bounds);
        if let Ok(c) = best_waypoint_bound(w, p, q, &[], range) {
            offer(c.value, 0.0, UpperProvenance::Waypoint, None);
        }
        let (upper, upper_error, upper_provenance, _) = best.ok_or(GeoError::Unreachable)?;
        let lb = certified_lower(w, p, q);
        // equal bounds may cross by rounding, e.g. along a meridian
        let lower = if lb.value > upper && lb.value - upper <= 1e-12 * upper { upper } else { lb.value };
        Ok(DistanceBracket {
            p: *p,
            q: *q,
            lower,
            upper,
            lower_provenance: lb.provenance,
            upper_provenance,
            graph_value,
            snap,
            upper_error,
            path: best_poly.map(|(_, pl)| pl),
        })
    }
}

/// Vertices of the waypoint curve: radial to `r0`, θ-arc, φ-arc, radial.
fn waypoint_seed(p: &Point, q: &Point, r0: f64) -> Polyline {
    let a = p.coord();
    let b = a.nearest_lift(q);
    let vertices = vec![
        a,
        Coord::new(r0, a.theta, a.phi),
        Coord::new(r0, b.theta, a.phi),
        Coord::new(r0, b.theta, b.phi),
        b,
    ];
    Polyline::new(vertices).unwrap_or(Polyline { vertices: vec![a, b] })
}

/// One-shot bracket for `d` of `w` between `p` and `q`.
pub fn distance_bracket(w: &WarpFamily, p: &Point, q: &Point, spec: &GridSpec) -> Result<DistanceBracket> {
    DistanceSolver::new(*w, *spec)?.bracket(p, q)
}

/// Bracket for the distance among curves confined to `r ∈ [R, π − R]`.
pub fn restricted_distance(w: &WarpFamily, p: &Point, q: &Point, radius: f64, spec: &GridSpec) -> Result<DistanceBracket> {
    for x in [p, q] {
        if rho(x) < radius {
            return Err(GeoError::OutsideTube { rho: rho(x), radius });
        }
    }
    DistanceSolver::new(*w, spec.restricted(radius))?.bracket(p, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCalibration {
    /// `max (upper − d_0)` on the isometric product, where `d_0` is exact.
    pub eps_grid: f64,
    pub worst_pair: Option<(Point, Point)>,
    pub pairs: usize,
}

/// Discretisation error of the full bracket pipeline on `spec`, measured on
/// the isometric product.
pub fn calibrate_grid_error(spec: &GridSpec, pairs: &[(Point, Point)]) -> Result<GridCalibration> {
    let solver = DistanceSolver::new(WarpFamily::constant(1.0)?, *spec)?;
    let mut cal = GridCalibration { eps_grid: 0.0, worst_pair: None, pairs: pairs.len() };
    for (b, (p, q)) in solver.brackets(pairs, &[]).into_iter().zip(pairs) {
        let excess = b?.upper - product_distance_d0(p, q);
        if excess > cal.eps_grid {
            cal.eps_grid = excess;
            cal.worst_pair = Some((*p, *q));
        }
    }
    Ok(cal)
}

/// `max(certified, upper − ε)`: the grid-calibrated lower estimate.
pub fn calibrated_lower(b: &DistanceBracket, eps_grid: f64) -> f64 {
    b.lower.max(b.upper - eps_grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaContribution {
    pub p: Point,
    pub q: Point,
    pub restricted_upper: f64,
    pub unrestricted_lower: f64,
    pub unrestricted_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    pub radius: f64,
    pub warp: WarpFamily,
    /// `3π sin R`.
    pub bound: f64,
    pub eps_grid: f64,
    /// `max (restricted upper − unrestricted calibrated lower)`.
    pub estimate: f64,
    /// Same with the certified lower; conservative far beyond the bound.
    pub estimate_certified: f64,
    pub worst: Option<LambdaContribution>,
    pub holds: bool,
    pub contributions: Vec<LambdaContribution>,
}

/// λ estimate from matching restricted and unrestricted brackets.
pub fn lambda_from_brackets(
    w: &WarpFamily,
    radius: f64,
    unrestricted: &[DistanceBracket],
    restricted: &[DistanceBracket],
    eps_grid: f64,
) -> LambdaReport {
    let bound = 3.0 * PI * radius.sin();
    let mut report = LambdaReport {
        radius,
        warp: *w,
        bound,
        eps_grid,
        estimate: 0.0,
        estimate_certified: 0.0,
        worst: None,
        holds: true,
        contributions: Vec::with_capacity(restricted.len()),
    };
    for (u, r) in unrestricted.iter().zip(restricted) {
        let c = LambdaContribution {
            p: u.p,
            q: u.q,
            restricted_upper: r.upper,
            unrestricted_lower: calibrated_lower(u, eps_grid),
            unrestricted_upper: u.upper,
        };
        report.estimate_certified = report.estimate_certified.max(r.upper - u.lower);
        let e = c.restricted_upper - c.unrestricted_lower;
        if report.worst.is_none() || e > report.estimate {
            report.estimate = e.max(0.0);
            report.worst = Some(c.clone());
        }
        report.contributions.push(c);
    }
    report.holds = report.estimate <= bound + 2.0 * eps_grid;
    report
}

/// Samples `samples` pairs in the tube complement and estimates `λ(K)`.
pub fn lambda_estimate(w: &WarpFamily, radius: f64, spec: &GridSpec, samples: usize, seed: u64) -> Result<LambdaReport> {
    if !(radius > 0.0 && radius < FRAC_PI_2) {
        return Err(GeoError::InvalidGrid(format!("tube radius must lie in (0, π/2), got {radius}")));
    }
    let pairs = PairSample::in_tube(samples, seed, radius).pairs;
    let base = GridSpec { restriction: None, ..*spec };
    let cal = calibrate_grid_error(&base, &pairs)?;
    let un: Vec<DistanceBracket> =
        DistanceSolver::new(*w, base)?.brackets(&pairs, &[]).into_iter().collect::<Result<_>>()?;
    let re: Vec<DistanceBracket> =
        DistanceSolver::new(*w, base.restricted(radius))?.brackets(&pairs, &[]).into_iter().collect::<Result<_>>()?;
    Ok(lambda_from_brackets(w, radius, &un, &re, cal.eps_grid))
}

pub const BATCH_SCHEMA: &str = "warpgeo.batch.v1";

/// A batch job: one warp, one lattice, many pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub warp: WarpFamily,
    pub pairs: Vec<[[f64; 3]; 2]>,
    pub spec: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub pair: usize,
    pub lower: f64,
    pub upper: f64,
    pub provenance: BatchProvenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchProvenance {
    pub lower: LowerProvenance,
    pub upper: UpperProvenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOutput {
    pub schema: String,
    pub results: Vec<BatchRecord>,
}

impl BatchManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| GeoError::InvalidGrid(format!("batch manifest: {e}")))
    }

    pub fn points(&self) -> Vec<(Point, Point)> {
        self.pairs
            .iter()
            .map(|[a, b]| (Point::new(a[0], a[1], a[2]), Point::new(b[0], b[1], b[2])))
            .collect()
    }

    pub fn run(&self) -> Result<BatchOutput> {
        let solver = DistanceSolver::new(self.warp, self.spec)?;
        let results = solver
            .brackets(&self.points(), &[])
            .into_iter()
            .enumerate()
            .map(|(pair, b)| {
                b.map(|b| BatchRecord {
                    pair,
                    lower: b.lower,
                    upper: b.upper,
                    provenance: BatchProvenance { lower: b.lower_provenance, upper: b.upper_provenance },
                })
            })
            .collect::<Result<_>>()?;
        Ok(BatchOutput { schema: BATCH_SCHEMA.into(), results })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn seq(a: f64) -> WarpFamily {
        WarpFamily::sequence(a, 2.0).unwrap()
    }

    #[test]
    fn identical_points_give_zero_bracket() {
        let p = Point::new(1.0, 2.0, 3.0);
        let b = distance_bracket(&seq(1.0), &p, &p, &GridSpec::cube(16)).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
        assert_eq!(b.path.unwrap().vertices.len(), 1);
        let b = restricted_distance(&seq(1.0), &p, &p, 0.3, &GridSpec::cube(16)).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
    }

    #[test]
    fn pole_to_pole_is_pi() {
        let p = Point::new(0.0, 0.0, 0.0);
        let q = Point::new(PI, 0.0, 0.0);
        for a in [1.0, 1e-3, 1e-6] {
            let b = distance_bracket(&seq(a), &p, &q, &GridSpec::cube(24)).unwrap();
            assert_relative_eq!(b.lower, PI, max_relative = 1e-15);
            assert_relative_eq!(b.upper, PI, max_relative = 1e-12);
            assert!(b.is_valid());
        }
    }

    #[test]
    fn equator_fiber_pair_bracket() {
        let p = Point::new(FRAC_PI_2, 0.0, 0.0);
        let q = Point::new(FRAC_PI_2, 0.0, PI);
        let b = distance_bracket(&seq(1.0), &p, &q, &GridSpec::cube(33)).unwrap();
        assert!(b.lower >= PI && b.upper <= 2.0 * PI + 1e-12, "{b:?}");
        let c = distance_bracket(&WarpFamily::constant(1.0).unwrap(), &p, &q, &GridSpec::cube(33)).unwrap();
        assert!(c.lower >= PI - 1e-15 && c.upper <= PI * 1.01);
    }

    #[test]
    fn upper_is_measured_length_of_returned_path() {
        let w = seq(1e-2);
        let solver = DistanceSolver::new(w, GridSpec::cube(24)).unwrap();
        let p = Point::new(0.4, 0.3, 1.0);
        let q = Point::new(2.2, 2.5, 4.0);
        let b = solver.bracket(&p, &q).unwrap();
        if matches!(b.upper_provenance, UpperProvenance::GraphPath | UpperProvenance::RefinedPath) {
            let path = b.path.as_ref().unwrap();
            assert!(path.joins(&p, &q));
            let l = polyline_length(solver.graph().metric(), path, &QuadratureConfig::default()).unwrap();
            assert_relative_eq!(l.value, b.upper, max_relative = 1e-8);
        }
        let three = three_arc_bound(&w, &p, &q).unwrap().value;
        let way = best_waypoint_bound(&w, &p, &q, &[], None).unwrap().value;
        assert!(b.upper <= three.min(way) + 1e-8);
        assert!(b.lower >= product_distance_d0(&p, &q));
    }

    #[test]
    fn point_near_pole_is_outside_tube() {
        let p = Point::new(0.1, 0.0, 0.0);
        let q = Point::new(1.5, 0.0, 0.0);
        let e = restricted_distance(&seq(1.0), &p, &q, 0.3, &GridSpec::cube(16)).unwrap_err();
        assert!(matches!(e, GeoError::OutsideTube { .. }));
    }

    #[test]
    fn pinch_bound_is_sound_for_fiber_pairs() {
        // two points on the polar fiber: the exact two-leg optimum of the
        // limit warp dominates every sequence distance
        let w = seq(1e-4);
        let p = Point::new(0.0, 0.0, 0.0);
        let q = Point::new(0.0, 0.0, 0.05);
        let pinch = polar_pinch_bound(&w, &p, &q);
        let fiber = 0.05 * w.value_unchecked(0.0);
        assert!(pinch > 0.05 * 2.0 && pinch <= fiber);
        let b = distance_bracket(&w, &p, &q, &GridSpec::cube(32)).unwrap();
        assert!(b.lower <= b.upper);
        assert_eq!(b.lower_provenance, LowerProvenance::PolarPinch);
    }

    #[test]
    fn constant_warp_lower_is_exact_product() {
        let w = WarpFamily::constant(0.5).unwrap();
        let p = Point::new(1.0, 0.0, 0.0);
        let q = Point::new(1.0, 0.0, 2.0);
        let lb = certified_lower(&w, &p, &q);
        assert_relative_eq!(lb.value, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn batch_manifest_round_trip() {
        let text = r#"{"warp":{"kind":"sequence","a":0.5,"beta":2.0},
            "pairs":[[[0.0,0.0,0.0],[3.141592653589793,0.0,0.0]],[[1.0,1.0,1.0],[1.0,1.0,1.0]]],
            "spec":{"n_r":16,"n_theta":16,"n_phi":16}}"#;
        let m = BatchManifest::from_json(text).unwrap();
        let out = m.run().unwrap();
        assert_eq!(out.results.len(), 2);
        assert_relative_eq!(out.results[0].upper, PI, max_relative = 1e-12);
        assert_eq!(out.results[1].upper, 0.0);
        let again = serde_json::to_string(&m.run().unwrap()).unwrap();
        assert_eq!(serde_json::to_string(&out).unwrap(), again);
    }

    #[test]
    fn restricted_equator_pair_matches_unrestricted() {
        let w = seq(1e-3);
        let p = Point::new(FRAC_PI_2, 0.0, 0.0);
        let q = Point::new(FRAC_PI_2, 0.8, 0.6);
        let u = distance_bracket(&w, &p, &q, &GridSpec::cube(24)).unwrap();
        let r = restricted_distance(&w, &p, &q, 0.05, &GridSpec::cube(24)).unwrap();
        assert!((u.upper - r.upper).abs() < 0.02 * u.upper, "{} vs {}", u.upper, r.upper);
        assert!(r.lower >= u.lower);
    }
}
