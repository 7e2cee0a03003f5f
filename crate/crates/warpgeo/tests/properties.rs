//! Property tests of the invariants shared by every module.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use proptest::prelude::*;
use warpgeo::convergence::{diameter_bound, modulus_delta, ModulusRule};
use warpgeo::curve::{best_waypoint_bound, three_arc_bound, two_leg_bound, Polyline};
use warpgeo::geometry::{
    c_m_threshold, product_distance_d0, rho, s1_distance, s2_distance, Coord, MetricParams, Point, WarpFamily,
};
use warpgeo::measure::{cover_exponent, m_rule, volume};
use warpgeo::quadrature::QuadratureConfig;
use warpgeo::refine::{collapse_pole_runs, lbfgs_refine, quick_length, RefineOptions};
use warpgeo::solver::{certified_lower, DistanceSolver};
use warpgeo::grid::GridSpec;

const BETA: f64 = 2.0;

fn point() -> impl Strategy<Value = Point> {
    (0.0..=PI, 0.0..2.0 * PI, 0.0..2.0 * PI).prop_map(|(r, t, p)| Point::new(r, t, p))
}

fn log2_a() -> impl Strategy<Value = f64> {
    -20.0..=0.0f64
}

/// Lattice solvers at 48³ for a few warps of the schedule, built once.
fn solvers() -> &'static [DistanceSolver] {
    static S: OnceLock<Vec<DistanceSolver>> = OnceLock::new();
    S.get_or_init(|| {
        [0, 10, 20]
            .iter()
            .map(|&j| DistanceSolver::new(WarpFamily::sequence(2f64.powi(-j), BETA).unwrap(), GridSpec::cube(48)).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn warps_increase_as_a_decreases(r in 1e-6..PI - 1e-6, la in log2_a(), lb in log2_a()) {
        let (a, b) = (2f64.powf(la.min(lb)), 2f64.powf(la.max(lb)));
        let fa = WarpFamily::sequence(a, BETA).unwrap().eval(r).unwrap();
        let fb = WarpFamily::sequence(b, BETA).unwrap().eval(r).unwrap();
        let fe = WarpFamily::extreme(BETA).unwrap().eval(r).unwrap();
        prop_assert!(fb <= fa * (1.0 + 1e-14));
        prop_assert!(fa <= fe * (1.0 + 1e-14));
        prop_assert!(fb >= BETA);
    }

    #[test]
    fn product_distance_is_a_metric(p in point(), q in point(), s in point()) {
        let (pq, qp) = (product_distance_d0(&p, &q), product_distance_d0(&q, &p));
        prop_assert!((pq - qp).abs() < 1e-12);
        prop_assert!(pq <= product_distance_d0(&p, &s) + product_distance_d0(&s, &q) + 1e-12);
        let pyth = s2_distance((p.r, p.theta), (q.r, q.theta)).hypot(s1_distance(p.phi, q.phi));
        prop_assert!((pq - pyth).abs() < 1e-12);
        prop_assert!(pq <= PI * 2f64.sqrt() + 1e-12);
    }

    #[test]
    fn lower_bounds_sit_below_comparison_curves(p in point(), q in point(), la in log2_a()) {
        let w = WarpFamily::sequence(2f64.powf(la), BETA).unwrap();
        let lo = certified_lower(&w, &p, &q).value;
        let cap = three_arc_bound(&w, &p, &q).unwrap().value.min(best_waypoint_bound(&w, &p, &q, &[], None).unwrap().value);
        prop_assert!(product_distance_d0(&p, &q) <= lo + 1e-12);
        prop_assert!(lo <= cap + 1e-12);
    }

    #[test]
    fn sequence_volumes_are_ordered(la in log2_a(), lb in log2_a()) {
        prop_assume!((la - lb).abs() > 1e-3);
        let quad = QuadratureConfig { tol: 1e-10, ..QuadratureConfig::default() };
        let va = volume(&WarpFamily::sequence(2f64.powf(la.min(lb)), BETA).unwrap(), &quad).unwrap().value;
        let vb = volume(&WarpFamily::sequence(2f64.powf(la.max(lb)), BETA).unwrap(), &quad).unwrap().value;
        let ve = volume(&WarpFamily::extreme(BETA).unwrap(), &quad).unwrap().value;
        prop_assert!(vb < va && va < ve);
        prop_assert!(ve <= 4.0 * PI.powi(3) * BETA);
    }

    #[test]
    fn m_rule_is_minimal(p in 1.01..6.0f64) {
        let m = m_rule(p).unwrap();
        prop_assert!(1.0 + 1.0 / f64::from(m - 1) < p);
        prop_assert!(m == 2 || 1.0 + 1.0 / f64::from(m - 2) >= p);
        prop_assert!(cover_exponent(p, m) < 0.0);
    }

    #[test]
    fn singular_bound_dominates_two_leg_curve(m in 2u32..5, t in 0.01..0.99f64) {
        let delta = t * c_m_threshold(m).unwrap().min(FRAC_PI_2);
        let formula = (3.0 + BETA) * delta.powf(1.0 - 1.0 / f64::from(m));
        prop_assert!(two_leg_bound(BETA, delta).0 <= formula);
    }

    #[test]
    fn modulus_radius_is_positive_and_local(p in point(), eps in 0.001..1.0f64) {
        let (delta, rule) = modulus_delta(&p, eps, BETA).unwrap();
        prop_assert!(delta > 0.0);
        match rule {
            ModulusRule::OffSingular => prop_assert!(delta <= rho(&p) / 2.0 && delta <= eps),
            ModulusRule::Singular => prop_assert!(delta <= 0.5),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn brackets_are_ordered_and_capped(p in point(), q in point(), k in 0usize..3) {
        let s = &solvers()[k];
        let w = *s.warp();
        let b = s.bracket(&p, &q).unwrap();
        let cap = three_arc_bound(&w, &p, &q).unwrap().value.min(best_waypoint_bound(&w, &p, &q, &[], None).unwrap().value);
        prop_assert!(product_distance_d0(&p, &q) <= b.lower + 1e-12);
        prop_assert!(b.lower <= b.upper);
        prop_assert!(b.upper <= cap + 1e-8);
        prop_assert!(b.upper <= diameter_bound(BETA));
    }

    #[test]
    fn vertex_refinement_never_lengthens(
        pts in prop::collection::vec((0.05..PI - 0.05, -3.0..3.0f64, -3.0..3.0f64), 3..12),
        la in log2_a(),
    ) {
        let m = MetricParams::new(WarpFamily::sequence(2f64.powf(la), BETA).unwrap());
        let poly = Polyline::new(pts.iter().map(|&(r, t, f)| Coord::new(r, t, f)).collect()).unwrap();
        let out = lbfgs_refine(&m, &poly, 40, &RefineOptions::default());
        prop_assert!(quick_length(&m, &out) <= quick_length(&m, &poly) * (1.0 + 1e-12));
        prop_assert_eq!(out.first(), poly.first());
        prop_assert_eq!(out.last(), poly.last());
    }

    #[test]
    fn pole_runs_collapse_to_one_vertex(phi in 0.0..2.0 * PI, n in 2usize..6, r_end in 0.1..3.0f64) {
        let mut v = vec![Coord::new(0.5, 0.0, 0.0)];
        v.extend((0..n).map(|i| Coord::new(0.0, i as f64, phi)));
        v.push(Coord::new(r_end, 1.0, phi));
        let out = collapse_pole_runs(&Polyline::new(v.clone()).unwrap());
        prop_assert_eq!(out.vertices.len(), 3);
        prop_assert_eq!(out.first(), v[0]);
        prop_assert_eq!(out.last(), *v.last().unwrap());
    }
}
