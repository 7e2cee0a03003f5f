//! Volumes and Hausdorff-measure estimates: the total volume along the
//! schedule, fiber lengths over the poles, covering estimates for the
//! singular fibers and partition sums certifying infinite length.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::curve::{
    best_waypoint_bound, curve_length, singular_pair_formula, two_leg_bound, waypoint_curve, BoundKind,
    ParamCurve,
};
use crate::error::{GeoError, Result};
use crate::geometry::{c_m_threshold, MetricParams, Point, WarpFamily};
use crate::quadrature::{integrate_singular_start, QuadratureConfig};
use crate::solver::polar_pinch_bound;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub warp: WarpFamily,
}

/// `(2π)²(2β + 4 − 2 ln 4)`, the volume under the extreme warp.
pub fn extreme_volume_closed_form(beta: f64) -> f64 {
    4.0 * PI * PI * (2.0 * beta + 4.0 - 2.0 * 4f64.ln())
}

/// `4π³β`, bounding every volume of the sequence.
pub fn sequence_volume_bound(beta: f64) -> f64 {
    4.0 * PI.powi(3) * beta
}

/// `f` on the northern half in the variable `u = 1 − cos r ∈ [0, 1]`, where
/// `sin²r = u(2 − u)` and `cos²r = (1 − u)²` are exact.
fn warp_in_u(w: &WarpFamily, u: f64) -> f64 {
    w.value_trig(u * (2.0 - u), (1.0 - u) * (1.0 - u))
}

/// `(2π)² ∫ sin r · f(r) dr` over `r ∈ [R, π − R]`, split at `π/2` by the
/// mirror symmetry and integrated in `u = 1 − cos r` (so `du = sin r dr`).
/// The extreme warp's logarithm at `u = 0` is handled as an improper
/// integral and never evaluated there.
pub fn volume_off_tube(w: &WarpFamily, radius: f64, quad: &QuadratureConfig) -> Result<VolumeResult> {
    w.validate()?;
    if !(0.0..FRAC_PI_2).contains(&radius) {
        return Err(GeoError::InvalidGrid(format!("tube radius must lie in [0, π/2), got {radius}")));
    }
    let scale = 8.0 * PI * PI;
    let u0 = 1.0 - radius.cos();
    // the geometric cascade toward u = 0 needs about log2(f/tol) cuts
    let cfg = QuadratureConfig { tol: quad.tol / scale, max_depth: quad.max_depth.max(64) };
    let half = integrate_singular_start(|u| warp_in_u(w, u), u0, 1.0, &cfg)?;
    Ok(VolumeResult { value: scale * half.value, abs_error_estimate: scale * half.abs_error, warp: *w })
}

/// Total volume `(2π)² ∫₀^π sin r · f(r) dr`.
pub fn volume(w: &WarpFamily, quad: &QuadratureConfig) -> Result<VolumeResult> {
    volume_off_tube(w, 0.0, quad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeConvergence {
    pub beta: f64,
    pub a: Vec<f64>,
    pub volumes: Vec<f64>,
    pub limit: f64,
    pub limit_closed_form: f64,
    pub bound: f64,
    /// `|Vol_j − Vol_∞|`.
    pub deficits: Vec<f64>,
    pub strictly_increasing: bool,
    pub bounded: bool,
    pub final_relative_deficit: f64,
}

impl VolumeConvergence {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.strictly_increasing && self.bounded && self.final_relative_deficit < rel_tol
    }
}

/// Volumes along a schedule of Sequence warps against the extreme limit.
pub fn volume_convergence(schedule: &[WarpFamily], beta: f64, quad: &QuadratureConfig) -> Result<VolumeConvergence> {
    let limit = volume(&WarpFamily::extreme(beta)?, quad)?.value;
    let mut a = Vec::with_capacity(schedule.len());
    let mut volumes = Vec::with_capacity(schedule.len());
    for w in schedule {
        match *w {
            WarpFamily::Sequence { a: aj, .. } => a.push(aj),
            _ => return Err(GeoError::InvalidWarp("volume schedule must hold Sequence warps".into())),
        }
        volumes.push(volume(w, quad)?.value);
    }
    let bound = sequence_volume_bound(beta);
    let deficits: Vec<f64> = volumes.iter().map(|v| (v - limit).abs()).collect();
    Ok(VolumeConvergence {
        beta,
        strictly_increasing: volumes.windows(2).all(|w| w[1] > w[0]),
        bounded: volumes.iter().all(|&v| v <= bound && v <= limit),
        final_relative_deficit: deficits.last().map_or(0.0, |d| d / limit),
        a,
        volumes,
        limit,
        limit_closed_form: extreme_volume_closed_form(beta),
        bound,
        deficits,
    })
}

/// Off-tube volumes as the tube shrinks: no volume concentrates on the
/// singular set, so they approach the total.
pub fn tube_volume_scan(w: &WarpFamily, radii: &[f64], quad: &QuadratureConfig) -> Result<Vec<(f64, f64)>> {
    radii.iter().map(|&r| Ok((r, volume_off_tube(w, r, quad)?.value))).collect()
}

/// `2π f(r)` for a fiber over a pole.
pub fn fiber_length(w: &WarpFamily, r: f64) -> Result<f64> {
    if r != 0.0 && r != PI {
        return Err(GeoError::InvalidCurve(format!("fiber_length takes r = 0 or π, got {r}")));
    }
    if w.is_extreme() {
        return Err(GeoError::ExtremeUnrectifiable);
    }
    Ok(2.0 * PI * w.eval(r)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberLengthEntry {
    pub a: f64,
    pub closed_form: f64,
    pub measured: f64,
    pub relative_error: f64,
}

/// Closed-form fiber lengths over `r = 0` against quadrature of the fiber
/// circle.
pub fn fiber_length_scan(schedule: &[WarpFamily], quad: &QuadratureConfig) -> Result<Vec<FiberLengthEntry>> {
    let circle = ParamCurve::fiber_circle(0.0, 0.0);
    schedule
        .iter()
        .map(|w| {
            let closed_form = fiber_length(w, 0.0)?;
            let measured = curve_length(&MetricParams::new(*w), &circle, quad)?.value;
            let a = match *w {
                WarpFamily::Sequence { a, .. } => a,
                _ => f64::NAN,
            };
            Ok(FiberLengthEntry { a, closed_form, measured, relative_error: (measured - closed_form).abs() / closed_form })
        })
        .collect()
}

/// Smallest `j` with `2π f_j(0) > threshold` along `a_j = a₀ 2^{-j}`.
pub fn fiber_divergence_index(a0: f64, beta: f64, threshold: f64) -> usize {
    // 2π(ln(1 + 1/a) + β) > M  ⇔  a < 1/(e^{M/2π − β} − 1)
    let x = (threshold / (2.0 * PI) - beta).exp() - 1.0;
    if x <= 0.0 {
        return 0;
    }
    let mut j = ((a0 * x).log2().floor().max(0.0)) as usize;
    while j > 0 && 2.0 * PI * ((1.0 + 2f64.powi(j as i32 - 1) / a0).ln() + beta) > threshold {
        j -= 1;
    }
    while 2.0 * PI * ((1.0 + 2f64.powi(j as i32) / a0).ln() + beta) <= threshold {
        j += 1;
    }
    j
}

/// Smallest integer `m ≥ 2` with `1 + 1/(m − 1) < p`; none for `p ≤ 1`.
pub fn m_rule(p: f64) -> Option<u32> {
    if !(p > 1.0) {
        return None;
    }
    // searched upward from 2 so rounding in `1/(p − 1)` cannot skip a value
    let mut m = 2;
    while !exponent_ok(p, m) {
        m += 1;
    }
    Some(m)
}

fn exponent_ok(p: f64, m: u32) -> bool {
    m >= 2 && 1.0 + 1.0 / f64::from(m - 1) < p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverEstimate {
    pub p: f64,
    pub m: u32,
    pub n: u64,
    /// `(3 + β)(2π/N)^{1−1/m}`.
    pub r_n: f64,
    /// `2^p · N · r_N^p`.
    pub h_upper: f64,
    /// `2π/N < min(c_m, π/2)`, the range where each ball provably covers.
    pub admissible: bool,
}

/// `1 − p + p/m`, the exponent of `N` in the covering estimate.
pub fn cover_exponent(p: f64, m: u32) -> f64 {
    1.0 - p + p / m as f64
}

/// Covering estimates of one singular fiber by `N` balls around equally
/// spaced fiber points.
pub fn hausdorff_cover(p: f64, m: u32, n_schedule: &[u64], beta: f64) -> Result<Vec<CoverEstimate>> {
    if !exponent_ok(p, m) {
        return Err(GeoError::ExponentCondition { p, m });
    }
    let limit = c_m_threshold(m)?.min(FRAC_PI_2);
    Ok(n_schedule
        .iter()
        .map(|&n| {
            let delta = 2.0 * PI / n as f64;
            let r_n = singular_pair_formula(beta, delta, m);
            CoverEstimate { p, m, n, r_n, h_upper: 2f64.powf(p) * n as f64 * r_n.powf(p), admissible: delta < limit }
        })
        .collect())
}

/// Least-squares slope of `ln H_upper` against `ln N`.
pub fn log_log_slope(covers: &[CoverEstimate]) -> f64 {
    let pts: Vec<(f64, f64)> = covers.iter().map(|c| ((c.n as f64).ln(), c.h_upper.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberPointCheck {
    pub n: u64,
    pub m: u32,
    pub delta: f64,
    /// `(3 + β)δ^{1−1/m}`.
    pub bound: f64,
    /// Length of the best waypoint curve, measured under the extreme warp.
    pub measured_upper: f64,
    /// Closed form `2r + f_∞(r)δ` at `tan r = δ`.
    pub two_leg: f64,
    pub admissible: bool,
    pub holds: bool,
}

/// Distance of consecutive points `2π/N` apart on the `r = 0` fiber,
/// bounded above by measuring the best waypoint curve under the extreme
/// warp, against `(3 + β)δ^{1−1/m}`.
pub fn fiber_point_check(n: u64, m: u32, beta: f64, quad: &QuadratureConfig) -> Result<FiberPointCheck> {
    let ext = WarpFamily::extreme(beta)?;
    let delta = 2.0 * PI / n as f64;
    let (two_leg, r_opt) = two_leg_bound(beta, delta);
    let (p, q) = (Point::new(0.0, 0.0, 0.0), Point::new(0.0, 0.0, delta));
    let best = best_waypoint_bound(&ext, &p, &q, &[r_opt], Some((0.0, FRAC_PI_2)))?;
    let r0 = match best.kind {
        BoundKind::Waypoint { r0 } => r0,
        _ => r_opt,
    };
    let measured_upper = curve_length(&MetricParams::new(ext), &waypoint_curve(&p, &q, r0)?, quad)?.value;
    let bound = singular_pair_formula(beta, delta, m);
    let admissible = delta < c_m_threshold(m)?.min(FRAC_PI_2);
    Ok(FiberPointCheck { n, m, delta, bound, measured_upper, two_leg, admissible, holds: measured_upper <= bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionEntry {
    pub a: f64,
    pub n_partition: u64,
    /// `2π f_j(0)`.
    pub fiber_length: f64,
    /// `π f_j(0)`.
    pub half_length: f64,
    /// `N` times the certified lower bound on one arc's distance.
    pub lower_sum: f64,
    /// `N` times the fiber arc length.
    pub upper_sum: f64,
    pub exceeds_half: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub beta: f64,
    pub entries: Vec<PartitionEntry>,
    /// Every lower sum exceeds `π f_j(0)`.
    pub certifies_infinite: bool,
    /// Lower sums nondecreasing along the schedule.
    pub nondecreasing: bool,
}

/// Partition sums of the `r = 0` fiber into `n_partition` equal arcs.
///
/// All arcs are congruent under the fiber rotation, so each sum is `N` times
/// one arc. The lower uses the polar-pinch bound, which bounds `d_j` and
/// hence `d_∞ ≥ d_j`; the upper is the arc itself.
pub fn h1_partition_sum(schedule: &[WarpFamily], n_partition: u64, beta: f64) -> Result<PartitionReport> {
    let delta = 2.0 * PI / n_partition as f64;
    let (p, q) = (Point::new(0.0, 0.0, 0.0), Point::new(0.0, 0.0, delta));
    let entries: Vec<PartitionEntry> = schedule
        .iter()
        .map(|w| {
            let f0 = w.eval(0.0)?;
            let a = match *w {
                WarpFamily::Sequence { a, .. } => a,
                _ => return Err(GeoError::InvalidWarp("partition sums need Sequence warps".into())),
            };
            let lower_sum = n_partition as f64 * polar_pinch_bound(w, &p, &q);
            Ok(PartitionEntry {
                a,
                n_partition,
                fiber_length: 2.0 * PI * f0,
                half_length: PI * f0,
                lower_sum,
                upper_sum: n_partition as f64 * f0 * delta,
                exceeds_half: lower_sum > PI * f0,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PartitionReport {
        beta,
        certifies_infinite: entries.iter().all(|e| e.exceeds_half),
        nondecreasing: entries.windows(2).all(|e| e[1].lower_sum >= e[0].lower_sum),
        entries,
    })
}

/// Lower partition sums of the `r = 0` fiber of one warp as `N` grows,
/// paired with `2π f(0)`, which they approach from below.
pub fn partition_refinement(w: &WarpFamily, n_schedule: &[u64]) -> Result<(f64, Vec<(u64, f64)>)> {
    let total = fiber_length(w, 0.0)?;
    let sums = n_schedule
        .iter()
        .map(|&n| {
            let q = Point::new(0.0, 0.0, 2.0 * PI / n as f64);
            (n, n as f64 * polar_pinch_bound(w, &Point::new(0.0, 0.0, 0.0), &q))
        })
        .collect();
    Ok((total, sums))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEntry {
    pub p: f64,
    pub m: Option<u32>,
    pub exponent: Option<f64>,
    pub slope: Option<f64>,
    pub covers: Vec<CoverEstimate>,
    /// Strictly decreasing upper estimates with a negative exponent.
    pub vanishing: bool,
    pub fiber_points: Vec<FiberPointCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionVerdict {
    pub beta: f64,
    pub entries: Vec<DimensionEntry>,
    pub partition: PartitionReport,
    /// Every `p > 1` in the grid has a vanishing covering estimate.
    pub upper_dimension_one: bool,
    pub verdict: String,
}

pub const VERDICT_DIM_ONE: &str = "dim(S) = 1, H¹ = ∞";

/// Covering estimates for each `p`, fiber-point checks, and partition sums,
/// combined into a dimension verdict.
pub fn hausdorff_dim_scan(
    p_grid: &[f64],
    n_schedule: &[u64],
    fiber_n: &[u64],
    schedule: &[WarpFamily],
    n_partition: u64,
    beta: f64,
    quad: &QuadratureConfig,
) -> Result<DimensionVerdict> {
    let mut entries = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let Some(m) = m_rule(p) else {
            entries.push(DimensionEntry {
                p,
                m: None,
                exponent: None,
                slope: None,
                covers: Vec::new(),
                vanishing: false,
                fiber_points: Vec::new(),
            });
            continue;
        };
        let covers = hausdorff_cover(p, m, n_schedule, beta)?;
        let exponent = cover_exponent(p, m);
        let vanishing = exponent < 0.0 && covers.windows(2).all(|c| c[1].h_upper < c[0].h_upper);
        let fiber_points = fiber_n.iter().map(|&n| fiber_point_check(n, m, beta, quad)).collect::<Result<_>>()?;
        entries.push(DimensionEntry {
            p,
            m: Some(m),
            exponent: Some(exponent),
            slope: (covers.len() >= 2).then(|| log_log_slope(&covers)),
            covers,
            vanishing,
            fiber_points,
        });
    }
    let partition = h1_partition_sum(schedule, n_partition, beta)?;
    let upper_dimension_one = entries.iter().filter(|e| e.p > 1.0).all(|e| e.vanishing)
        && entries.iter().flat_map(|e| &e.fiber_points).all(|c| !c.admissible || c.holds);
    let verdict = if upper_dimension_one && partition.certifies_infinite {
        VERDICT_DIM_ONE.to_string()
    } else if upper_dimension_one {
        "dim(S) <= 1".to_string()
    } else {
        "inconclusive".to_string()
    };
    Ok(DimensionVerdict { beta, entries, partition, upper_dimension_one, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geometric_schedule;

    fn quad() -> QuadratureConfig {
        QuadratureConfig { tol: 1e-10, ..QuadratureConfig::default() }
    }

    /// Composite Simpson in `r` directly, as an independent check.
    fn simpson_volume(w: &WarpFamily, n: usize) -> f64 {
        let h = PI / n as f64;
        let g = |r: f64| r.sin() * w.value_unchecked(r);
        let mut s = g(0.0) + g(PI);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
        }
        4.0 * PI * PI * s * h / 3.0
    }

    #[test]
    fn constant_volume_is_exact() {
        let v = volume(&WarpFamily::constant(1.5).unwrap(), &quad()).unwrap();
        assert!((v.value - 8.0 * PI * PI * 1.5).abs() < 1e-9);
    }

    #[test]
    fn extreme_volume_matches_closed_form() {
        for beta in [2.0, 3.0, 5.0] {
            let v = volume(&WarpFamily::extreme(beta).unwrap(), &quad()).unwrap().value;
            assert!((v - extreme_volume_closed_form(beta)).abs() < 1e-7, "β={beta}: {v}");
        }
    }

    #[test]
    fn sequence_volume_matches_simpson() {
        let w = WarpFamily::sequence(0.25, 2.0).unwrap();
        let v = volume(&w, &quad()).unwrap().value;
        assert!((v - simpson_volume(&w, 20_000)).abs() < 1e-8);
    }

    #[test]
    fn schedule_volumes_increase_to_the_limit() {
        let sched = geometric_schedule(1.0, 20, 2.0).unwrap();
        let rep = volume_convergence(&sched, 2.0, &quad()).unwrap();
        assert!(rep.holds(1e-3), "{rep:?}");
        assert!(rep.deficits.windows(2).all(|d| d[1] < d[0]));
        assert!((rep.limit - rep.limit_closed_form).abs() < 1e-7);
    }

    #[test]
    fn tube_volumes_approach_total() {
        let w = WarpFamily::extreme(2.0).unwrap();
        let scan = tube_volume_scan(&w, &[0.5, 0.1, 0.01, 1e-4], &quad()).unwrap();
        let total = extreme_volume_closed_form(2.0);
        assert!(scan.windows(2).all(|s| s[1].1 > s[0].1));
        assert!((total - scan[3].1) < 1e-5);
    }

    #[test]
    fn fiber_length_matches_curve_quadrature() {
        let sched = geometric_schedule(1.0, 10, 2.0).unwrap();
        for e in fiber_length_scan(&sched, &quad()).unwrap() {
            assert!(e.relative_error < 1e-8, "{e:?}");
        }
        assert!(matches!(fiber_length(&WarpFamily::extreme(2.0).unwrap(), 0.0), Err(GeoError::ExtremeUnrectifiable)));
    }

    #[test]
    fn divergence_index_is_first_crossing() {
        for m in [10.0, 50.0, 200.0] {
            let j = fiber_divergence_index(1.0, 2.0, m);
            let len = |j: i32| 2.0 * PI * ((1.0 + 2f64.powi(j)).ln() + 2.0);
            assert!(len(j as i32) > m);
            assert!(j == 0 || len(j as i32 - 1) <= m);
        }
    }

    #[test]
    fn m_rule_values() {
        assert_eq!(m_rule(1.1), Some(12));
        assert_eq!(m_rule(1.5), Some(4));
        assert_eq!(m_rule(2.0), Some(3));
        assert_eq!(m_rule(3.0), Some(2));
        assert_eq!(m_rule(1.0), None);
    }

    #[test]
    fn cover_slope_matches_exponent() {
        let ns: Vec<u64> = (6..=14).map(|k| 1u64 << k).collect();
        for p in [1.1, 1.5, 2.0, 3.0] {
            let m = m_rule(p).unwrap();
            let covers = hausdorff_cover(p, m, &ns, 2.0).unwrap();
            assert!((log_log_slope(&covers) - cover_exponent(p, m)).abs() < 1e-6);
            assert!(cover_exponent(p, m) < 0.0);
        }
        assert!(matches!(hausdorff_cover(1.5, 3, &ns, 2.0), Err(GeoError::ExponentCondition { .. })));
    }

    #[test]
    fn fiber_points_within_bound() {
        for n in [1u64 << 6, 1 << 9, 1 << 12] {
            let c = fiber_point_check(n, 2, 2.0, &quad()).unwrap();
            assert!(c.holds, "{c:?}");
            assert!(c.measured_upper <= c.two_leg + 1e-6, "{c:?}");
        }
    }

    #[test]
    fn partition_sums_exceed_half_fiber() {
        let sched = geometric_schedule(1.0, 20, 2.0).unwrap();
        let rep = h1_partition_sum(&sched, 1 << 10, 2.0).unwrap();
        assert!(rep.certifies_infinite && rep.nondecreasing, "{rep:?}");
        assert!(rep.entries.iter().all(|e| e.lower_sum <= e.upper_sum + 1e-12));
    }

    #[test]
    fn volume_reference_values() {
        let v = volume(&WarpFamily::constant(1.0).unwrap(), &quad()).unwrap().value;
        assert!((v - 78.9568).abs() < 1e-4);
        for c in [1.0, 2.0] {
            let v = volume(&WarpFamily::constant(c).unwrap(), &quad()).unwrap().value;
            assert!((v - 8.0 * PI * PI * c).abs() < 1e-8);
        }
        let v5 = volume(&WarpFamily::extreme(5.0).unwrap(), &quad()).unwrap().value;
        assert!((v5 - 443.2404).abs() < 1e-4);
        let w = WarpFamily::sequence(1.0, 2.0).unwrap();
        let v1 = volume(&w, &quad()).unwrap().value;
        assert!((v1 - simpson_volume(&w, 20_000)).abs() < 1e-8);
        assert!(v1 < extreme_volume_closed_form(2.0));
    }

    #[test]
    fn fiber_length_reference_values() {
        let l1 = fiber_length(&WarpFamily::sequence(1.0, 2.0).unwrap(), 0.0).unwrap();
        assert!((l1 - 16.921).abs() < 1e-3);
        let w = WarpFamily::sequence(2f64.powi(-20), 2.0).unwrap();
        let l20 = fiber_length(&w, PI).unwrap();
        assert!((l20 - 2.0 * PI * ((1.0 + 2f64.powi(20)).ln() + 2.0)).abs() < 1e-9);
        assert!((l20 - 99.7).abs() < 0.05);
        assert!((l20 / w.eval(0.0).unwrap() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn cover_reference_exponents() {
        let c = hausdorff_cover(2.0, 3, &[64, 128], 2.0).unwrap();
        assert!((c[1].h_upper / c[0].h_upper - 2f64.powf(-1.0 / 3.0)).abs() < 1e-12);
        assert!((cover_exponent(1.5, 5) + 0.2).abs() < 1e-15);
        assert!(hausdorff_cover(1.5, 5, &[64], 2.0).is_ok());
        assert!(m_rule(1.0).is_none() && m_rule(0.5).is_none());
    }

    #[test]
    fn partition_sums_approach_fiber_length() {
        let w = WarpFamily::sequence(2f64.powi(-4), 2.0).unwrap();
        let ns: Vec<u64> = (6..=16).step_by(2).map(|k| 1u64 << k).collect();
        let (total, sums) = partition_refinement(&w, &ns).unwrap();
        assert!(sums.windows(2).all(|s| s[1].1 >= s[0].1));
        assert!(sums.iter().all(|s| s.1 <= total));
        assert!((total - sums.last().unwrap().1) / total < 1e-3);
    }

    #[test]
    fn dimension_verdict() {
        let sched = geometric_schedule(1.0, 20, 2.0).unwrap();
        let ns: Vec<u64> = (6..=12).map(|k| 1u64 << k).collect();
        let v = hausdorff_dim_scan(&[0.9, 1.1, 1.5, 2.0], &ns, &ns, &sched, 1 << 10, 2.0, &quad()).unwrap();
        assert_eq!(v.verdict, VERDICT_DIM_ONE);
        assert!(v.entries[0].m.is_none());
    }
}
