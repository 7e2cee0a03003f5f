//! Convergence diagnostics along the warp schedule: pointwise and uniform
//! convergence of the distances, the completion identity off the singular
//! set, and the continuity moduli of the identity map.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{best_waypoint_bound, three_arc_bound, Polyline};
use crate::error::{GeoError, Result};
use crate::geometry::{c_m_threshold, product_distance_d0, rho, MetricParams, Point, WarpFamily};
use crate::grid::{GridGraph, GridSpec};
use crate::sample::PairSample;
use crate::solver::{calibrate_grid_error, calibrated_lower, certified_lower, DistanceBracket, DistanceSolver};

/// `(3 + 2β)π`.
pub fn diameter_bound(beta: f64) -> f64 {
    (3.0 + 2.0 * beta) * PI
}

/// `gap / 2`: two metrics on one set are within half their uniform
/// distance in the Gromov–Hausdorff sense.
pub fn gh_upper_bound(gap: f64) -> f64 {
    debug_assert!(gap >= 0.0);
    0.5 * gap
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Grid error of the bracket pipeline; calibrated on the sample when absent.
    pub eps_grid: Option<f64>,
    pub tol_uniform: f64,
    /// Number of trailing schedule entries in the Cauchy tail.
    pub tail: usize,
    pub tol_cauchy: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { eps_grid: None, tol_uniform: 0.05, tail: 5, tol_cauchy: 0.05 }
    }
}

/// Brackets for every pair at every schedule entry, indexed `[j][pair]`.
///
/// The end entries run the full lattice pipeline. In between, each entry
/// refines the paths found at its neighbours: an ascending pass carries
/// paths toward smaller `a`, and a descending pass carries them back. Since
/// every `f_j` lies below `f_{j+1}`, a path's length can only shrink on the
/// way down, so the uppers are nondecreasing in `j` up to quadrature error.
pub fn scan_brackets(schedule: &[WarpFamily], pairs: &[(Point, Point)], spec: &GridSpec) -> Result<Vec<Vec<DistanceBracket>>> {
    let n = schedule.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let fresh = |w: &WarpFamily, cands: &[Vec<Polyline>]| -> Result<Vec<DistanceBracket>> {
        DistanceSolver::new(*w, *spec)?.brackets(pairs, cands).into_iter().collect()
    };
    let warm = |w: &WarpFamily, cands: Vec<Vec<Polyline>>| -> Result<Vec<DistanceBracket>> {
        let solver = DistanceSolver::new(*w, *spec)?;
        pairs
            .par_iter()
            .zip(cands.par_iter())
            .map(|((p, q), c)| solver.bracket_without_graph(p, q, c))
            .collect()
    };
    let paths = |bs: &[DistanceBracket]| -> Vec<Option<Polyline>> { bs.iter().map(|b| b.path.clone()).collect() };
    let mut ascending: Vec<Vec<DistanceBracket>> = Vec::with_capacity(n);
    ascending.push(fresh(&schedule[0], &[])?);
    for w in &schedule[1..] {
        let prev = paths(ascending.last().expect("nonempty"));
        ascending.push(warm(w, prev.into_iter().map(|p| p.into_iter().collect()).collect())?);
    }
    let mut out: Vec<Vec<DistanceBracket>> = vec![Vec::new(); n];
    let last: Vec<Vec<Polyline>> = paths(&ascending[n - 1]).into_iter().map(|p| p.into_iter().collect()).collect();
    out[n - 1] = if n == 1 { ascending.pop().expect("one entry") } else { fresh(&schedule[n - 1], &last)? };
    for j in (0..n - 1).rev() {
        let cands = paths(&out[j + 1])
            .into_iter()
            .zip(paths(&ascending[j]))
            .map(|(a, b)| a.into_iter().chain(b).collect())
            .collect();
        let mut bs = warm(&schedule[j], cands)?;
        if j == 0 {
            // keep the lattice provenance of the fresh solve
            for (b, a) in bs.iter_mut().zip(&ascending[0]) {
                b.graph_value = a.graph_value;
                b.snap = a.snap;
            }
        }
        out[j] = bs;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTrace {
    pub index: usize,
    pub p: Point,
    pub q: Point,
    /// Calibrated lowers `max(certified, upper − ε)`.
    pub lower: Vec<f64>,
    pub certified: Vec<f64>,
    pub upper: Vec<f64>,
    pub graph: Vec<Option<f64>>,
    /// The intervals admit a nondecreasing selection.
    pub monotone: bool,
    /// Spread of the uppers over the trailing entries.
    pub cauchy_tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub warps: Vec<WarpFamily>,
    pub spec: GridSpec,
    pub sample_seed: u64,
    pub eps_grid: f64,
    pub config: ScanConfig,
    /// `max_pairs (d_∞ upper − d_j lower)`.
    pub sup_gap: Vec<f64>,
    /// Running minimum of `sup_gap`.
    pub gap_envelope: Vec<f64>,
    pub gh_upper: Vec<f64>,
    /// Pairs whose intervals admit no nondecreasing selection.
    pub envelope_violations: usize,
    /// Pairs whose lattice distance decreased between end entries.
    pub graph_violations: usize,
    /// Pairs whose `d_∞` upper exceeds the diameter bound plus `ε`.
    pub diameter_violations: usize,
    pub diameter_bound: f64,
    pub max_cauchy_tail: f64,
    /// Pairs failing any per-pair check.
    pub flagged: Vec<usize>,
    pub traces: Vec<PairTrace>,
}

impl ConvergenceReport {
    pub fn final_gap(&self) -> f64 {
        self.sup_gap.last().copied().unwrap_or(0.0)
    }

    /// `gap_{j+1} ≤ gap_j + 2ε` for every `j`.
    pub fn gap_decreasing(&self) -> bool {
        self.sup_gap.windows(2).all(|w| w[1] <= w[0] + 2.0 * self.eps_grid)
    }

    pub fn converged(&self) -> bool {
        self.final_gap() < self.config.tol_uniform
    }

    pub fn holds(&self) -> bool {
        self.flagged.is_empty() && self.graph_violations == 0 && self.gap_decreasing() && self.converged()
    }
}

/// Whether intervals `[lo_j, hi_j]` admit a nondecreasing selection, up to
/// `slack` relative.
pub fn admits_monotone_selection(lo: &[f64], hi: &[f64], slack: f64) -> bool {
    let mut x = f64::NEG_INFINITY;
    for (&l, &h) in lo.iter().zip(hi) {
        x = x.max(l);
        if x > h + slack * (1.0 + h.abs()) {
            return false;
        }
    }
    true
}

/// Assembles the report from brackets indexed `[j][pair]`.
pub fn convergence_from_brackets(
    warps: &[WarpFamily],
    brackets: &[Vec<DistanceBracket>],
    spec: &GridSpec,
    sample_seed: u64,
    eps_grid: f64,
    config: &ScanConfig,
) -> ConvergenceReport {
    let nj = brackets.len();
    let np = brackets.first().map_or(0, |b| b.len());
    let beta = warps.iter().find_map(|w| w.beta()).unwrap_or(2.0);
    let dbound = diameter_bound(beta);
    let mut traces = Vec::with_capacity(np);
    for i in 0..np {
        let col: Vec<&DistanceBracket> = brackets.iter().map(|b| &b[i]).collect();
        let upper: Vec<f64> = col.iter().map(|b| b.upper).collect();
        let lower: Vec<f64> = col.iter().map(|b| calibrated_lower(b, eps_grid)).collect();
        let tail = &upper[nj.saturating_sub(config.tail.max(1))..];
        let spread = tail.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - tail.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        traces.push(PairTrace {
            index: i,
            p: col[0].p,
            q: col[0].q,
            monotone: admits_monotone_selection(&lower, &upper, 1e-9),
            certified: col.iter().map(|b| b.lower).collect(),
            graph: col.iter().map(|b| b.graph_value).collect(),
            cauchy_tail: if nj == 0 { 0.0 } else { spread },
            lower,
            upper,
        });
    }
    let sup_gap: Vec<f64> = (0..nj)
        .map(|j| traces.iter().map(|t| (t.upper[nj - 1] - t.lower[j]).max(0.0)).fold(0.0, f64::max))
        .collect();
    let mut gap_envelope = sup_gap.clone();
    for j in 1..nj {
        gap_envelope[j] = gap_envelope[j].min(gap_envelope[j - 1]);
    }
    let graph_bad = |t: &PairTrace| match (t.graph.first().copied().flatten(), t.graph.last().copied().flatten()) {
        (Some(a), Some(b)) => b < a,
        _ => false,
    };
    let diameter_bad = |t: &PairTrace| t.upper.last().is_some_and(|&u| u > dbound + eps_grid);
    let tail_bad = |t: &PairTrace| t.cauchy_tail >= config.tol_cauchy;
    let flagged = traces
        .iter()
        .filter(|t| !t.monotone || diameter_bad(t) || tail_bad(t) || graph_bad(t))
        .map(|t| t.index)
        .collect();
    ConvergenceReport {
        warps: warps.to_vec(),
        spec: *spec,
        sample_seed,
        eps_grid,
        config: *config,
        gh_upper: sup_gap.iter().map(|&g| gh_upper_bound(g)).collect(),
        sup_gap,
        gap_envelope,
        envelope_violations: traces.iter().filter(|t| !t.monotone).count(),
        graph_violations: traces.iter().filter(|t| graph_bad(t)).count(),
        diameter_violations: traces.iter().filter(|t| diameter_bad(t)).count(),
        diameter_bound: dbound,
        max_cauchy_tail: traces.iter().map(|t| t.cauchy_tail).fold(0.0, f64::max),
        flagged,
        traces,
    }
}

/// Brackets every sampled pair along the schedule and checks monotone
/// pointwise convergence.
pub fn pointwise_convergence_scan(
    schedule: &[WarpFamily],
    sample: &PairSample,
    spec: &GridSpec,
    config: &ScanConfig,
) -> Result<ConvergenceReport> {
    check_schedule(schedule)?;
    let eps = match config.eps_grid {
        Some(e) => e,
        None => calibrate_grid_error(spec, &sample.pairs)?.eps_grid,
    };
    let brackets = scan_brackets(schedule, &sample.pairs, spec)?;
    Ok(convergence_from_brackets(schedule, &brackets, spec, sample.seed, eps, config))
}

fn check_schedule(schedule: &[WarpFamily]) -> Result<()> {
    let mut prev = f64::INFINITY;
    for w in schedule {
        match *w {
            WarpFamily::Sequence { a, .. } if a < prev => prev = a,
            _ => {
                return Err(GeoError::InvalidWarp(
                    "schedule must be Sequence warps with strictly decreasing a".into(),
                ))
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformGap {
    pub gaps: Vec<f64>,
    pub envelope: Vec<f64>,
    pub gh_upper: Vec<f64>,
    pub decreasing: bool,
    pub converged: bool,
}

/// Per-entry `max (d_∞ upper − d_j lower)` over the sample.
pub fn uniform_gap(schedule: &[WarpFamily], sample: &PairSample, spec: &GridSpec, config: &ScanConfig) -> Result<UniformGap> {
    Ok(uniform_gap_from_report(&pointwise_convergence_scan(schedule, sample, spec, config)?))
}

pub fn uniform_gap_from_report(r: &ConvergenceReport) -> UniformGap {
    UniformGap {
        gaps: r.sup_gap.clone(),
        envelope: r.gap_envelope.clone(),
        gh_upper: r.gh_upper.clone(),
        decreasing: r.gap_decreasing(),
        converged: r.converged(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMonotonicityReport {
    pub steps: usize,
    pub edges_checked: usize,
    pub edge_violations: usize,
    pub nodes_checked: usize,
    pub node_violations: usize,
    /// `(step, max decrease)` of the worst violation, if any.
    pub worst: Option<(usize, f64)>,
}

impl GraphMonotonicityReport {
    pub fn holds(&self) -> bool {
        self.edge_violations == 0 && self.node_violations == 0
    }
}

/// Compares every edge weight, and the full distance fields from each
/// source level, between consecutive schedule entries on one lattice.
/// Nondecrease is exact: each weight is a fixed rule applied to a pointwise
/// larger integrand, and Dijkstra sums are monotone in their terms.
pub fn graph_monotonicity_check(schedule: &[WarpFamily], spec: &GridSpec, source_levels: &[usize]) -> Result<GraphMonotonicityReport> {
    let mut report = GraphMonotonicityReport {
        steps: schedule.len().saturating_sub(1),
        edges_checked: 0,
        edge_violations: 0,
        nodes_checked: 0,
        node_violations: 0,
        worst: None,
    };
    let note = |report: &mut GraphMonotonicityReport, step: usize, dec: f64| {
        if report.worst.is_none_or(|(_, d)| dec > d) {
            report.worst = Some((step, dec));
        }
    };
    let mut prev: Option<(Vec<f64>, Vec<Vec<f64>>)> = None;
    for (j, w) in schedule.iter().enumerate() {
        let g = GridGraph::build(MetricParams::new(*w), *spec)?;
        let weights = g.weight_table();
        let fields: Vec<Vec<f64>> = source_levels
            .par_iter()
            .map(|&l| g.field_from_level(l.min(spec.n_r - 1), &[]).dist)
            .collect();
        if let Some((pw, pf)) = &prev {
            for (a, b) in pw.iter().zip(&weights) {
                report.edges_checked += 1;
                if b < a {
                    report.edge_violations += 1;
                    note(&mut report, j - 1, a - b);
                }
            }
            for (fa, fb) in pf.iter().zip(&fields) {
                for (a, b) in fa.iter().zip(fb) {
                    report.nodes_checked += 1;
                    if b < a {
                        report.node_violations += 1;
                        note(&mut report, j - 1, a - b);
                    }
                }
            }
        }
        prev = Some((weights, fields));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionEntry {
    pub radius: f64,
    /// `3π sin R`.
    pub bound: f64,
    /// `max |restricted extreme upper − d_∞ upper|`.
    pub discrepancy: f64,
    /// Combined calibrated widths at the worst pair.
    pub width: f64,
    pub worst_pair: Option<usize>,
    /// Every pair satisfies `|Δ| ≤ bound + widths`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionReport {
    pub beta: f64,
    /// Sequence parameter of the `d_∞` reference.
    pub a_ref: f64,
    pub eps_grid: f64,
    pub pairs: usize,
    pub entries: Vec<CompletionEntry>,
    /// Discrepancy nonincreasing as `R` decreases, up to `ε`.
    pub decreasing: bool,
}

impl CompletionReport {
    pub fn holds(&self) -> bool {
        self.decreasing && self.entries.iter().all(|e| e.holds)
    }
}

/// Compares `d_∞`, estimated at `Sequence(a_ref)`, with the extreme metric's
/// distance among curves in `r ∈ [R, π − R]`, for each radius.
///
/// Radii are processed from large to small and each restricted solve also
/// refines the paths of the previous radius, which stay admissible as the
/// tube shrinks; the `d_∞` path is offered too, clamped into the tube.
pub fn completion_identity_check(
    radii: &[f64],
    beta: f64,
    a_ref: f64,
    pairs: &[(Point, Point)],
    spec: &GridSpec,
    eps_grid: f64,
) -> Result<CompletionReport> {
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| b.total_cmp(a));
    let rmax = radii.first().copied().unwrap_or(0.0);
    for (p, q) in pairs {
        for x in [p, q] {
            if rho(x) < rmax {
                return Err(GeoError::OutsideTube { rho: rho(x), radius: rmax });
            }
        }
    }
    let base = GridSpec { restriction: None, ..*spec };
    let reference: Vec<DistanceBracket> = DistanceSolver::new(WarpFamily::sequence(a_ref, beta)?, base)?
        .brackets(pairs, &[])
        .into_iter()
        .collect::<Result<_>>()?;
    let ext = WarpFamily::extreme(beta)?;
    let mut pool: Vec<Vec<Polyline>> = reference.iter().map(|b| b.path.iter().cloned().collect()).collect();
    let mut entries = Vec::with_capacity(radii.len());
    for &radius in &radii {
        let restricted: Vec<DistanceBracket> = DistanceSolver::new(ext, base.restricted(radius))?
            .brackets(pairs, &pool)
            .into_iter()
            .collect::<Result<_>>()?;
        let mut e = CompletionEntry {
            radius,
            bound: 3.0 * PI * radius.sin(),
            discrepancy: 0.0,
            width: 0.0,
            worst_pair: None,
            holds: true,
        };
        for (i, (u, r)) in reference.iter().zip(&restricted).enumerate() {
            let d = (r.upper - u.upper).abs();
            let width = (u.upper - calibrated_lower(u, eps_grid)) + (r.upper - calibrated_lower(r, eps_grid));
            if d > e.bound + width {
                e.holds = false;
            }
            if e.worst_pair.is_none() || d > e.discrepancy {
                e.discrepancy = d;
                e.width = width;
                e.worst_pair = Some(i);
            }
        }
        for (slot, r) in pool.iter_mut().zip(&restricted) {
            if let Some(path) = &r.path {
                slot.push(path.clone());
            }
        }
        entries.push(e);
    }
    let decreasing = entries.windows(2).all(|w| w[1].discrepancy <= w[0].discrepancy + eps_grid);
    Ok(CompletionReport { beta, a_ref, eps_grid, pairs: pairs.len(), entries, decreasing })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusRule {
    /// `δ = min{ρ_p/2, ε/(1 + σ_p + f_∞(r_p))}`, `σ_p = sin ρ_p / sin(ρ_p/2)`.
    OffSingular,
    /// `δ = min{1/2, c₃, (ε/(7 + β))^{3/2}}`.
    Singular,
}

/// Continuity radius `δ(ε)` at `p` for the identity `(M, d_0) → (M, d_∞)`.
pub fn modulus_delta(p: &Point, eps: f64, beta: f64) -> Result<(f64, ModulusRule)> {
    if eps <= 0.0 {
        return Err(GeoError::InvalidWarp(format!("epsilon must be positive, got {eps}")));
    }
    let x = rho(p);
    if x == 0.0 {
        let c3 = c_m_threshold(3)?;
        return Ok((0.5f64.min(c3).min((eps / (7.0 + beta)).powf(1.5)), ModulusRule::Singular));
    }
    let sigma = x.sin() / (0.5 * x).sin();
    let f = WarpFamily::extreme(beta)?.eval(p.r)?;
    Ok(((0.5 * x).min(eps / (1.0 + sigma + f)), ModulusRule::OffSingular))
}

/// Upper bound on `d_∞(p, q)` from curves measured under the extreme warp:
/// the three-arc curve and the best waypoint curve, with waypoint latitudes
/// added at `|Δφ|^{1/m}` for small `m`.
pub fn d_infinity_upper(beta: f64, p: &Point, q: &Point) -> Result<f64> {
    let ext = WarpFamily::extreme(beta)?;
    // θ is free at a pole
    let align = |a: &Point, b: &Point| if a.is_singular() { Point::new(a.r, b.theta, a.phi) } else { *a };
    let (p, q) = (align(p, q), align(q, p));
    if crate::solver::same_point(&p, &q) {
        return Ok(0.0);
    }
    let dphi = crate::geometry::s1_distance(p.phi, q.phi);
    let extra: Vec<f64> = (1..=6)
        .map(|m| dphi.powf(1.0 / m as f64))
        .chain([rho(&p).max(rho(&q)), 2.0 * rho(&p).max(rho(&q))])
        .filter(|r| *r > 0.0 && *r < PI / 2.0)
        .flat_map(|r| [r, PI - r])
        .collect();
    let mut best = best_waypoint_bound(&ext, &p, &q, &extra, None)?.value;
    for (a, b) in [(p, q), (q, p)] {
        if let Ok(c) = three_arc_bound(&ext, &a, &b) {
            best = best.min(c.value);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityCase {
    pub p: Point,
    pub eps: f64,
    pub delta: f64,
    pub rule: ModulusRule,
    pub samples: usize,
    pub max_upper: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityWitness {
    pub p: Point,
    pub q: Point,
    pub eps: f64,
    pub delta: f64,
    pub d0: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub beta: f64,
    pub seed: u64,
    pub cases: Vec<ContinuityCase>,
    /// Samples with `d_∞ upper > ε` inside the `δ` ball.
    pub witnesses: Vec<ContinuityWitness>,
    /// Samples where `d_0` exceeds the certified `d_∞` lower.
    pub lipschitz_violations: usize,
}

impl ContinuityReport {
    pub fn holds(&self) -> bool {
        self.witnesses.is_empty() && self.lipschitz_violations == 0
    }
}

/// Point at `d_0`-distance below `delta` from `p`, drawn in a random
/// direction; points on the singular set are drawn there too when `p` is.
fn near_point(rng: &mut ChaCha8Rng, p: &Point, delta: f64) -> Point {
    loop {
        let t = rng.gen_range(0.0..0.999) * delta;
        let q = if p.is_singular() && rng.gen_bool(0.25) {
            Point::new(p.r, rng.gen_range(0.0..2.0 * PI), p.phi + if rng.gen_bool(0.5) { t } else { -t })
        } else {
            let (u, v, w): (f64, f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let n = (u * u + v * v + w * w).sqrt().max(1e-12);
            let dr = t * u / n;
            let r = if p.r + dr < 0.0 || p.r + dr > PI { p.r - dr } else { p.r + dr };
            let s = p.r.sin().max(r.sin()).max(1e-3);
            Point::new(r, p.theta + t * v / n / s, p.phi + t * w / n)
        };
        if product_distance_d0(p, &q) < delta {
            return q;
        }
    }
}

/// Samples `q` in every `δ(ε)` ball and checks `d_∞ upper ≤ ε`, together
/// with `d_0 ≤ d_∞ lower`.
pub fn continuity_modulus_check(eps_list: &[f64], base: &[Point], beta: f64, samples: usize, seed: u64) -> Result<ContinuityReport> {
    let reference = WarpFamily::sequence(2f64.powi(-20), beta)?;
    let mut report = ContinuityReport { beta, seed, cases: Vec::new(), witnesses: Vec::new(), lipschitz_violations: 0 };
    for (bi, p) in base.iter().enumerate() {
        for (ei, &eps) in eps_list.iter().enumerate() {
            let (delta, rule) = modulus_delta(p, eps, beta)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((bi as u64) << 20) ^ ei as u64);
            let mut case = ContinuityCase { p: *p, eps, delta, rule, samples, max_upper: 0.0, holds: true };
            for _ in 0..samples {
                let q = near_point(&mut rng, p, delta);
                let upper = d_infinity_upper(beta, p, &q)?;
                let d0 = product_distance_d0(p, &q);
                case.max_upper = case.max_upper.max(upper);
                if upper > eps {
                    case.holds = false;
                    report.witnesses.push(ContinuityWitness { p: *p, q, eps, delta, d0, upper });
                }
                // d_j ≤ d_∞, so certified d_j lowers bound d_∞ from below
                if d0 > certified_lower(&reference, p, &q).value * (1.0 + 1e-12) + 1e-15 {
                    report.lipschitz_violations += 1;
                }
            }
            report.cases.push(case);
        }
    }
    Ok(report)
}

/// Base points for the continuity check: a quarter on the singular set,
/// the rest spread over the `ρ`-bands, plus the equatorial point.
pub fn continuity_base_points(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![Point::new(PI / 2.0, 0.0, 0.0)];
    while v.len() < n {
        let i = v.len();
        let p = if i % 4 == 0 {
            Point::new(if rng.gen_bool(0.5) { 0.0 } else { PI }, 0.0, rng.gen_range(0.0..2.0 * PI))
        } else {
            let (lo, hi) = crate::sample::RHO_BANDS[i % 3];
            let x = rng.gen_range(lo..hi).max(1e-3);
            let r = if rng.gen_bool(0.5) { x } else { PI - x };
            Point::new(r, rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI))
        };
        v.push(p);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geometric_schedule;
    use crate::sample::SampleMode;

    fn sample(pairs: Vec<(Point, Point)>) -> PairSample {
        PairSample { mode: SampleMode::UniformRandom, seed: 0, pairs }
    }

    #[test]
    fn gh_bound_halves_the_gap() {
        assert_eq!(gh_upper_bound(0.0), 0.0);
        assert!((gh_upper_bound(0.3) - 0.15).abs() < 1e-15);
        assert!((diameter_bound(2.0) - 7.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn monotone_selection() {
        assert!(admits_monotone_selection(&[0.0, 1.0, 1.0], &[2.0, 1.5, 3.0], 0.0));
        assert!(!admits_monotone_selection(&[1.0, 0.0], &[2.0, 0.5], 0.0));
    }

    #[test]
    fn equator_and_radial_pairs_along_schedule() {
        let sched = geometric_schedule(1.0, 4, 2.0).unwrap();
        let eq = (Point::new(PI / 2.0, 0.0, 0.0), Point::new(PI / 2.0, 0.0, PI));
        let radial = (Point::new(0.3, 1.0, 2.0), Point::new(1.2, 1.0, 2.0));
        let cfg = ScanConfig { eps_grid: Some(1e-3), ..ScanConfig::default() };
        let r = pointwise_convergence_scan(&sched, &sample(vec![eq, radial]), &GridSpec::cube(24), &cfg).unwrap();
        let t = &r.traces[0];
        let last = *t.upper.last().unwrap();
        assert!(t.certified.iter().all(|&l| l >= PI - 1e-12));
        assert!((PI..=2.0 * PI + 1e-9).contains(&last));
        assert!(t.monotone);
        let rad = &r.traces[1];
        assert!(rad.upper.iter().all(|&u| (u - 0.9).abs() < 1e-9));
        assert!(rad.certified.iter().all(|&l| (l - 0.9).abs() < 1e-9));
        assert!(r.traces.iter().all(|t| t.upper.last().unwrap() <= &r.diameter_bound));
        assert!(r.sup_gap[0] >= *r.sup_gap.last().unwrap());
        assert!(r.gh_upper.iter().zip(&r.sup_gap).all(|(h, g)| *h == g / 2.0));
    }

    #[test]
    fn schedule_must_decrease() {
        let bad = vec![WarpFamily::sequence(0.5, 2.0).unwrap(), WarpFamily::sequence(1.0, 2.0).unwrap()];
        let s = sample(vec![(Point::new(1.0, 0.0, 0.0), Point::new(2.0, 0.0, 0.0))]);
        assert!(pointwise_convergence_scan(&bad, &s, &GridSpec::cube(16), &ScanConfig::default()).is_err());
    }

    #[test]
    fn graph_distances_never_decrease() {
        let sched = geometric_schedule(1.0, 6, 2.0).unwrap();
        let r = graph_monotonicity_check(&sched, &GridSpec::cube(16), &[0, 7]).unwrap();
        assert!(r.holds(), "{r:?}");
        assert!(r.edges_checked > 0 && r.nodes_checked > 0);
    }

    #[test]
    fn completion_of_identical_points_is_zero() {
        let p = Point::new(1.0, 0.5, 0.5);
        let r = completion_identity_check(&[0.4, 0.2], 2.0, 2f64.powi(-10), &[(p, p)], &GridSpec::cube(16), 1e-3).unwrap();
        assert!(r.entries.iter().all(|e| e.discrepancy == 0.0));
        assert!(r.holds());
        let near = Point::new(0.1, 0.0, 0.0);
        assert!(matches!(
            completion_identity_check(&[0.4], 2.0, 1e-3, &[(p, near)], &GridSpec::cube(16), 1e-3),
            Err(GeoError::OutsideTube { .. })
        ));
    }

    #[test]
    fn modulus_reference_values() {
        let (d, rule) = modulus_delta(&Point::new(0.0, 0.0, 1.0), 0.5, 2.0).unwrap();
        let c3 = c_m_threshold(3).unwrap();
        assert_eq!(rule, ModulusRule::Singular);
        assert!((d - 0.5f64.min(c3).min((0.5f64 / 9.0).powf(1.5))).abs() < 1e-15);
        assert!(((0.5f64 / 9.0).powf(1.5) - 0.0131).abs() < 1e-4);
        let (d, rule) = modulus_delta(&Point::new(PI / 2.0, 0.0, 0.0), 0.5, 2.0).unwrap();
        assert_eq!(rule, ModulusRule::OffSingular);
        assert!((d - (PI / 4.0).min(0.5 / (1.0 + 2f64.sqrt() + 2.0))).abs() < 1e-12);
    }

    #[test]
    fn limit_upper_on_singular_fiber() {
        let beta = 2.0;
        let delta = 1e-3;
        let (p, q) = (Point::new(0.0, 0.0, 0.0), Point::new(0.0, 0.0, delta));
        let u = d_infinity_upper(beta, &p, &q).unwrap();
        assert!(u >= product_distance_d0(&p, &q));
        assert!(u <= (3.0 + beta) * delta.sqrt());
    }

    #[test]
    fn continuity_holds_on_a_few_points() {
        let base = continuity_base_points(8, 3);
        assert_eq!(base[0], Point::new(PI / 2.0, 0.0, 0.0));
        assert!(base[4].is_singular());
        let r = continuity_modulus_check(&[0.5, 0.1], &base, 2.0, 8, 5).unwrap();
        assert!(r.holds(), "{:?}", r.witnesses);
        assert_eq!(r.cases.len(), 16);
    }
}
