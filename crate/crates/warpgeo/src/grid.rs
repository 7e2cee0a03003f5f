//! Lattice discretisation of the warped product and anisotropic Dijkstra.
//!
//! The lattice is built relative to the source point: θ and φ offsets are
//! measured from the source's angles, so every node at offset `(j, k)` has
//! the same metric environment as any other with the same `|j|, |k|`. Edge
//! weights therefore depend only on the radial level and the offset class,
//! and a weight table replaces per-edge storage. Dijkstra runs on the
//! quotient by the reflections `j ↦ −j`, `k ↦ −k`, which fix the source.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{segment_length, Polyline, Segment};
use crate::error::{GeoError, Result};
use crate::geometry::{product_distance_d0, wrap_delta, Coord, MetricParams, Point, Tangent};
use crate::quadrature::{gl5_composite, graded_breaks, uniform_breaks, QuadratureConfig, GL5_NODES, GL5_WEIGHTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// The 6 axis neighbours.
    Axis,
    /// All 26 nonzero offsets in `{−1, 0, 1}³`.
    #[default]
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_r: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Tube radius `R`: the grid covers `r ∈ [R, π − R]` only.
    #[serde(default)]
    pub restriction: Option<f64>,
    #[serde(default)]
    pub stencil: Stencil,
}

impl GridSpec {
    pub fn cube(n: usize) -> Self {
        GridSpec { n_r: n, n_theta: n, n_phi: n, restriction: None, stencil: Stencil::Full }
    }

    pub fn restricted(self, radius: f64) -> Self {
        GridSpec { restriction: Some(radius), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_r < 4 || self.n_theta < 4 || self.n_phi < 4 {
            return Err(GeoError::InvalidGrid(format!(
                "every axis needs at least 4 nodes, got {}x{}x{}",
                self.n_r, self.n_theta, self.n_phi
            )));
        }
        if let Some(r) = self.restriction {
            if !(r > 0.0 && r < PI / 2.0) {
                return Err(GeoError::InvalidGrid(format!("tube radius must lie in (0, π/2), got {r}")));
            }
        }
        Ok(())
    }

    /// Admissible latitude range.
    pub fn r_bounds(&self) -> (f64, f64) {
        match self.restriction {
            Some(r) => (r, PI - r),
            None => (0.0, PI),
        }
    }
}

/// Graded quadrature levels for edges that touch a pole.
const POLE_LEVELS: u32 = 40;
const INTERIOR_PANELS: usize = 2;

/// Fixed-rule length of a coordinate-linear segment.
///
/// The panel layout depends only on the endpoints' latitudes, never on the
/// warp, so lengths are monotone in the warp exactly as the integrand is.
pub fn fixed_rule_length(m: &MetricParams, a: &Coord, b: &Coord) -> f64 {
    let d = Tangent::new(b.r - a.r, b.theta - a.theta, b.phi - a.phi);
    if d.dtheta == 0.0 && d.dphi == 0.0 {
        return d.dr.abs();
    }
    if d.dr == 0.0 {
        return m.speed_unchecked(a.r, d);
    }
    let f = |t: f64| m.speed_unchecked(a.r + d.dr * t, d);
    let rho_a = a.r.min(PI - a.r);
    let rho_b = b.r.min(PI - b.r);
    let span = d.dr.abs();
    if rho_a.min(rho_b) < span {
        let breaks = graded_breaks(pole_levels(rho_a.min(rho_b), span));
        if rho_a <= rho_b {
            gl5_composite(&f, &breaks)
        } else {
            gl5_composite(&|t: f64| f(1.0 - t), &breaks)
        }
    } else {
        gl5_composite(&f, &uniform_breaks(INTERIOR_PANELS))
    }
}

/// [`fixed_rule_length`] with its gradient in the coordinates of `a` and
/// `b`, taken over the same quadrature nodes. Nodes where the speed
/// vanishes contribute no gradient.
pub fn fixed_rule_length_grad(m: &MetricParams, a: &Coord, b: &Coord) -> (f64, [f64; 3], [f64; 3]) {
    let d = Tangent::new(b.r - a.r, b.theta - a.theta, b.phi - a.phi);
    if d.dtheta == 0.0 && d.dphi == 0.0 {
        let s = if d.dr > 0.0 {
            1.0
        } else if d.dr < 0.0 {
            -1.0
        } else {
            0.0
        };
        return (d.dr.abs(), [-s, 0.0, 0.0], [s, 0.0, 0.0]);
    }
    let rho_a = a.r.min(PI - a.r);
    let rho_b = b.r.min(PI - b.r);
    let span = d.dr.abs();
    let (breaks, reversed) = if span > 0.0 && rho_a.min(rho_b) < span {
        (graded_breaks(pole_levels(rho_a.min(rho_b), span)), rho_a > rho_b)
    } else {
        (uniform_breaks(INTERIOR_PANELS), false)
    };
    let (th2, ph2) = (d.dtheta * d.dtheta, d.dphi * d.dphi);
    let (mut len, mut ga, mut gb) = (0.0, [0.0; 3], [0.0; 3]);
    for w in breaks.windows(2) {
        let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for k in 0..5 {
            let u = c + h * GL5_NODES[k];
            let t = if reversed { 1.0 - u } else { u };
            let wt = h * GL5_WEIGHTS[k];
            let r = a.r + d.dr * t;
            let (sn, cs) = r.sin_cos();
            let s2 = sn * sn;
            let (f2, df2) = if d.dphi != 0.0 {
                let (f, fp) = m.warp_and_slope_unchecked(r);
                (f * f, 2.0 * f * fp)
            } else {
                (0.0, 0.0)
            };
            let speed = (d.dr * d.dr + s2 * th2 + f2 * ph2).sqrt();
            len += wt * speed;
            if speed == 0.0 {
                continue;
            }
            let g = wt / speed;
            let half_dq = 0.5 * (2.0 * sn * cs * th2 + df2 * ph2);
            gb[0] += g * (d.dr + half_dq * t);
            ga[0] += g * (-d.dr + half_dq * (1.0 - t));
            gb[1] += g * s2 * d.dtheta;
            gb[2] += g * f2 * d.dphi;
        }
    }
    ga[1] = -gb[1];
    ga[2] = -gb[2];
    (len, ga, gb)
}

/// Grading depth for a segment whose nearer endpoint is `gap` from a pole.
fn pole_levels(gap: f64, span: f64) -> u32 {
    if gap <= 0.0 {
        return POLE_LEVELS;
    }
    // grade until panels are small compared with the distance to the pole
    ((span / gap).log2().ceil().max(0.0) as u32 + 3).min(POLE_LEVELS)
}

#[derive(Debug, Clone)]
pub struct GridGraph {
    metric: MetricParams,
    spec: GridSpec,
    r_levels: Vec<f64>,
    h_theta: f64,
    h_phi: f64,
    /// Same-level weights per level: offsets `(1,0)`, `(0,1)`, `(1,1)`.
    same: Vec<[f64; 3]>,
    /// Weights between levels `i` and `i+1`: `(0,0)`, `(1,0)`, `(0,1)`, `(1,1)`.
    cross: Vec<[f64; 4]>,
    nj: usize,
    nk: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightAudit {
    pub edges_checked: usize,
    pub max_relative_error: f64,
}

impl GridGraph {
    pub fn build(metric: MetricParams, spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        metric.warp.validate()?;
        if metric.warp.is_extreme() && spec.restriction.is_none() && !metric.clamp_extreme {
            return Err(GeoError::SingularNode);
        }
        let n = spec.n_r;
        let (lo, hi) = spec.r_bounds();
        let mut r_levels = vec![0.0; n];
        for i in 0..n {
            if 2 * i < n {
                r_levels[i] = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            } else {
                r_levels[i] = PI - r_levels[n - 1 - i];
            }
        }
        if spec.restriction.is_none() {
            r_levels[0] = 0.0;
            r_levels[n - 1] = PI;
        }
        let h_theta = TAU / spec.n_theta as f64;
        let h_phi = TAU / spec.n_phi as f64;
        let mut same = vec![[0.0; 3]; n];
        for i in 0..n {
            if 2 * i >= n {
                same[i] = same[n - 1 - i];
                continue;
            }
            let r = r_levels[i];
            for (c, &(dj, dk)) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)].iter().enumerate() {
                let t = Tangent::new(0.0, dj * h_theta, dk * h_phi);
                same[i][c] = metric.speed_unchecked(r, t);
            }
        }
        let mut cross = vec![[0.0; 4]; n - 1];
        for i in 0..n - 1 {
            let mirror = n - 2 - i;
            if mirror < i {
                cross[i] = cross[mirror];
                continue;
            }
            for (c, &(dj, dk)) in CROSS_CLASSES.iter().enumerate() {
                let a = Coord::new(r_levels[i], 0.0, 0.0);
                let b = Coord::new(r_levels[i + 1], dj * h_theta, dk * h_phi);
                cross[i][c] = fixed_rule_length(&metric, &a, &b);
            }
        }
        Ok(GridGraph {
            metric,
            spec,
            r_levels,
            h_theta,
            h_phi,
            same,
            cross,
            nj: spec.n_theta / 2 + 1,
            nk: spec.n_phi / 2 + 1,
        })
    }

    pub fn metric(&self) -> &MetricParams {
        &self.metric
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn r_levels(&self) -> &[f64] {
        &self.r_levels
    }

    pub fn spacing(&self) -> (f64, f64, f64) {
        let (lo, hi) = self.spec.r_bounds();
        ((hi - lo) / (self.spec.n_r - 1) as f64, self.h_theta, self.h_phi)
    }

    /// Every weight in table order, for edge-wise comparisons.
    pub fn weight_table(&self) -> Vec<f64> {
        self.same.iter().flatten().chain(self.cross.iter().flatten()).copied().collect()
    }

    pub fn quotient_node_count(&self) -> usize {
        self.spec.n_r * self.nj * self.nk
    }

    /// Weight of the edge from level `i` with offset `(di, dj, dk)`.
    #[inline]
    pub fn weight(&self, i: usize, di: isize, dj: usize, dk: usize) -> f64 {
        if di == 0 {
            match (dj, dk) {
                (1, 0) => self.same[i][0],
                (0, 1) => self.same[i][1],
                (1, 1) => self.same[i][2],
                _ => 0.0,
            }
        } else {
            let lo = if di < 0 { i - 1 } else { i };
            self.cross[lo][dj + 2 * dk]
        }
    }

    /// Endpoint coordinates of an edge with offset `(di, dj, dk)` from level `i`
    /// at the lattice origin.
    fn edge_coords(&self, i: usize, di: isize, dj: i64, dk: i64) -> (Coord, Coord) {
        let a = Coord::new(self.r_levels[i], 0.0, 0.0);
        let b = Coord::new(
            self.r_levels[(i as isize + di) as usize],
            dj as f64 * self.h_theta,
            dk as f64 * self.h_phi,
        );
        (a, b)
    }

    /// Compares a random sample of table weights with adaptive quadrature.
    pub fn audit_weights(&self, fraction: f64, seed: u64) -> Result<WeightAudit> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let quad = QuadratureConfig { tol: 1e-13, max_depth: 60 };
        let mut checked = 0;
        let mut worst: f64 = 0.0;
        let n = self.spec.n_r;
        let total = n * 3 + (n - 1) * 4;
        let want = ((total as f64 * fraction).ceil() as usize).max(1);
        for _ in 0..want {
            let i = rng.gen_range(0..n - 1);
            let di: isize = if rng.gen_bool(0.5) { 1 } else { 0 };
            let mut dj = rng.gen_range(0..2i64);
            let dk = rng.gen_range(0..2i64);
            if di == 0 && dj == 0 && dk == 0 {
                dj = 1;
            }
            let w = self.weight(i, di, dj as usize, dk as usize);
            let (a, b) = self.edge_coords(i, di, dj, dk);
            let exact = segment_length(&self.metric, &Segment::linear(a, b), &quad)?.value;
            let rel = if exact == 0.0 { w.abs() } else { (w - exact).abs() / exact };
            worst = worst.max(rel);
            checked += 1;
        }
        Ok(WeightAudit { edges_checked: checked, max_relative_error: worst })
    }

    /// Nearest radial level.
    pub fn level_of(&self, r: f64) -> usize {
        let (lo, hi) = self.spec.r_bounds();
        let h = (hi - lo) / (self.spec.n_r - 1) as f64;
        (((r - lo) / h).round().max(0.0) as usize).min(self.spec.n_r - 1)
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.nj + j) * self.nk + k
    }

    #[inline]
    fn decode(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.nk;
        let rest = idx / self.nk;
        (rest / self.nj, rest % self.nj, k)
    }

    /// Quotient representative of a lifted lattice offset.
    #[inline]
    fn rep(&self, i: usize, j: i64, k: i64) -> usize {
        let fold = |x: i64, n: usize| {
            let m = x.rem_euclid(n as i64) as usize;
            m.min(n - m)
        };
        self.index(i, fold(j, self.spec.n_theta), fold(k, self.spec.n_phi))
    }

    /// Single-source shortest paths from the lattice origin at `level`.
    ///
    /// When `targets` is nonempty the search stops once all of them are
    /// settled; distances of unsettled nodes are then tentative.
    pub fn field_from_level(&self, level: usize, targets: &[usize]) -> DistanceField {
        let total = self.quotient_node_count();
        let mut dist = vec![f64::INFINITY; total];
        let mut pred = vec![u32::MAX; total];
        let mut is_target = vec![false; if targets.is_empty() { 0 } else { total }];
        let mut remaining = 0usize;
        for &t in targets {
            if !is_target[t] {
                is_target[t] = true;
                remaining += 1;
            }
        }
        let nbj = reflect_table(self.spec.n_theta, self.nj);
        let nbk = reflect_table(self.spec.n_phi, self.nk);
        let src = self.index(level, 0, 0);
        dist[src] = 0.0;
        let mut heap = BinaryHeap::with_capacity(total / 8);
        heap.push(Reverse((0u64, src as u32)));
        let full = self.spec.stencil == Stencil::Full;
        let n_r = self.spec.n_r as isize;
        while let Some(Reverse((bits, u))) = heap.pop() {
            let u = u as usize;
            let d = f64::from_bits(bits);
            if d > dist[u] {
                continue;
            }
            if remaining > 0 && is_target[u] {
                is_target[u] = false;
                remaining -= 1;
                if remaining == 0 {
                    break;
                }
            }
            let (i, j, k) = self.decode(u);
            for di in -1isize..=1 {
                let ii = i as isize + di;
                if ii < 0 || ii >= n_r {
                    continue;
                }
                let ii = ii as usize;
                for (sj, &jj) in nbj[j].iter().enumerate() {
                    let adj = if sj == 1 { 0 } else { 1 };
                    for (sk, &kk) in nbk[k].iter().enumerate() {
                        let adk = if sk == 1 { 0 } else { 1 };
                        let nonzero = (di != 0) as usize + adj + adk;
                        if nonzero == 0 || (!full && nonzero > 1) {
                            continue;
                        }
                        let v = self.index(ii, jj, kk);
                        let nd = d + self.weight(i, di, adj, adk);
                        if nd < dist[v] {
                            dist[v] = nd;
                            pred[v] = u as u32;
                            heap.push(Reverse((nd.to_bits(), v as u32)));
                        }
                    }
                }
            }
        }
        DistanceField { level, dist, pred }
    }

    /// Lattice node nearest to `q` in the lattice anchored at `p`, as a
    /// lifted offset `(i, j, k)` with `j, k` in `(−n/2, n/2]`.
    pub fn snap_target(&self, p: &Point, q: &Point) -> (usize, i64, i64) {
        let lift = |d: f64, h: f64, n: usize| {
            let j = (wrap_delta(d) / h).round() as i64;
            let n = n as i64;
            let m = j.rem_euclid(n);
            if m > n / 2 {
                m - n
            } else {
                m
            }
        };
        (
            self.level_of(q.r),
            lift(q.theta - p.theta, self.h_theta, self.spec.n_theta),
            lift(q.phi - p.phi, self.h_phi, self.spec.n_phi),
        )
    }

    pub fn target_index(&self, node: (usize, i64, i64)) -> usize {
        self.rep(node.0, node.1, node.2)
    }

    /// Lifted lattice path from the field's origin to `target`, walking the
    /// predecessor tree back and lifting each quotient step.
    pub fn lattice_path(&self, field: &DistanceField, target: (usize, i64, i64)) -> Result<Vec<(usize, i64, i64)>> {
        let src = self.index(field.level, 0, 0);
        let mut cur = target;
        let mut rep = self.rep(cur.0, cur.1, cur.2);
        if !field.dist[rep].is_finite() {
            return Err(GeoError::Unreachable);
        }
        let mut path = vec![cur];
        let full = self.spec.stencil == Stencil::Full;
        let mut guard = 0usize;
        while rep != src {
            let u = field.pred[rep] as usize;
            if u == u32::MAX as usize {
                return Err(GeoError::Unreachable);
            }
            let mut best: Option<((usize, i64, i64), f64)> = None;
            for di in -1isize..=1 {
                let ii = cur.0 as isize - di;
                if ii < 0 || ii >= self.spec.n_r as isize {
                    continue;
                }
                for dj in -1i64..=1 {
                    for dk in -1i64..=1 {
                        let nonzero = (di != 0) as usize + (dj != 0) as usize + (dk != 0) as usize;
                        if nonzero == 0 || (!full && nonzero > 1) {
                            continue;
                        }
                        let prev = (ii as usize, cur.1 - dj, cur.2 - dk);
                        if self.rep(prev.0, prev.1, prev.2) != u {
                            continue;
                        }
                        let w = self.weight(prev.0, di, dj.unsigned_abs() as usize, dk.unsigned_abs() as usize);
                        let miss = (field.dist[u] + w - field.dist[rep]).abs();
                        if best.is_none_or(|(_, b)| miss < b) {
                            best = Some((prev, miss));
                        }
                    }
                }
            }
            let (prev, _) = best.ok_or(GeoError::Unreachable)?;
            cur = prev;
            rep = u;
            path.push(cur);
            guard += 1;
            if guard > self.quotient_node_count() {
                return Err(GeoError::Unreachable);
            }
        }
        path.reverse();
        // the walk ends at a lift of the origin; shift it to (level, 0, 0)
        let (j0, k0) = (path[0].1, path[0].2);
        for node in &mut path {
            node.1 -= j0;
            node.2 -= k0;
        }
        Ok(path)
    }

    pub fn node_coord(&self, origin: &Point, node: (usize, i64, i64)) -> Coord {
        Coord::new(
            self.r_levels[node.0],
            origin.theta + node.1 as f64 * self.h_theta,
            origin.phi + node.2 as f64 * self.h_phi,
        )
    }

    /// Graph path between `p` and `q` evaluated on a precomputed field
    /// anchored at `p`'s level, with explicit connectors to both endpoints.
    pub fn path_on_field(&self, field: &DistanceField, p: &Point, q: &Point) -> Result<GraphPath> {
        let target = self.snap_target(p, q);
        let nodes = self.lattice_path(field, target)?;
        let value = field.dist[self.target_index(target)];
        let mut vertices = Vec::with_capacity(nodes.len() + 2);
        let start = p.coord();
        vertices.push(start);
        for &node in &nodes {
            vertices.push(self.node_coord(p, node));
        }
        let end_node = vertices[vertices.len() - 1];
        vertices.push(end_node.nearest_lift(q));
        let source_node = self.node_coord(p, (field.level, 0, 0));
        let snap = product_distance_d0(p, &source_node.point()) + product_distance_d0(&end_node.point(), q);
        Ok(GraphPath { value, polyline: Polyline::new(vertices)?, snap, lattice_steps: nodes.len() - 1 })
    }

    /// Dijkstra distance between the nodes nearest `p` and `q`.
    pub fn graph_distance(&self, p: &Point, q: &Point) -> Result<GraphPath> {
        let mirrored = 2 * self.level_of(p.r) >= self.spec.n_r;
        let (pp, qq) = if mirrored { (p.mirrored(), q.mirrored()) } else { (*p, *q) };
        let target = self.snap_target(&pp, &qq);
        let field = self.field_from_level(self.level_of(pp.r), &[self.target_index(target)]);
        let mut gp = self.path_on_field(&field, &pp, &qq)?;
        if mirrored {
            gp.polyline = gp.polyline.mirrored();
        }
        Ok(gp)
    }
}

const CROSS_CLASSES: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];

/// Neighbour representatives for offsets −1, 0, +1 of each folded index.
fn reflect_table(n: usize, half: usize) -> Vec<[usize; 3]> {
    let fold = |x: isize| {
        let m = x.rem_euclid(n as isize) as usize;
        m.min(n - m)
    };
    (0..half).map(|j| [fold(j as isize - 1), j, fold(j as isize + 1)]).collect()
}

#[derive(Debug, Clone)]
pub struct DistanceField {
    pub level: usize,
    pub dist: Vec<f64>,
    pub pred: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPath {
    /// Lattice distance between the snapped nodes.
    pub value: f64,
    /// Lattice path with coordinate-linear connectors to the true endpoints.
    pub polyline: Polyline,
    /// `d_0`-size of both snaps.
    pub snap: f64,
    pub lattice_steps: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::polyline_length;
    use crate::geometry::WarpFamily;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn product() -> MetricParams {
        MetricParams::new(WarpFamily::constant(1.0).unwrap())
    }

    #[test]
    fn segment_gradient_matches_differences() {
        let m = MetricParams::new(WarpFamily::sequence(1e-3, 2.0).unwrap());
        let cases = [
            (Coord::new(0.3, 0.1, 0.2), Coord::new(1.1, 0.9, -0.4)),
            (Coord::new(0.02, 2.0, 0.0), Coord::new(0.4, 0.5, 0.3)),
            (Coord::new(2.9, 0.0, 1.0), Coord::new(2.5, 0.2, 1.0)),
        ];
        for (a, b) in cases {
            let (l, ga, gb) = fixed_rule_length_grad(&m, &a, &b);
            assert_relative_eq!(l, fixed_rule_length(&m, &a, &b), max_relative = 1e-12);
            let h = 1e-6;
            for axis in 0..3 {
                let bump = |c: &Coord, s: f64| {
                    let mut x = [c.r, c.theta, c.phi];
                    x[axis] += s;
                    Coord::new(x[0], x[1], x[2])
                };
                let fa = (fixed_rule_length(&m, &bump(&a, h), &b) - fixed_rule_length(&m, &bump(&a, -h), &b)) / (2.0 * h);
                let fb = (fixed_rule_length(&m, &a, &bump(&b, h)) - fixed_rule_length(&m, &a, &bump(&b, -h))) / (2.0 * h);
                assert!((fa - ga[axis]).abs() < 1e-5 * (1.0 + fa.abs()), "a axis {axis}: {fa} vs {}", ga[axis]);
                assert!((fb - gb[axis]).abs() < 1e-5 * (1.0 + fb.abs()), "b axis {axis}: {fb} vs {}", gb[axis]);
            }
        }
    }

    #[test]
    fn spec_validation() {
        assert!(GridSpec::cube(3).validate().is_err());
        assert!(GridSpec::cube(8).restricted(1.6).validate().is_err());
        assert!(GridSpec::cube(8).restricted(0.3).validate().is_ok());
        let ext = MetricParams::new(WarpFamily::extreme(2.0).unwrap());
        assert!(matches!(GridGraph::build(ext, GridSpec::cube(8)), Err(GeoError::SingularNode)));
        assert!(GridGraph::build(MetricParams::clamped(ext.warp), GridSpec::cube(8)).is_ok());
        assert!(GridGraph::build(ext, GridSpec::cube(8).restricted(0.2)).is_ok());
    }

    #[test]
    fn restricted_levels_stay_in_tube() {
        let g = GridGraph::build(product(), GridSpec::cube(16).restricted(0.3)).unwrap();
        assert!(g.r_levels().iter().all(|&r| (0.3 - 1e-15..=PI - 0.3 + 1e-15).contains(&r)));
        assert_relative_eq!(g.r_levels()[0], 0.3);
    }

    #[test]
    fn levels_are_mirror_symmetric() {
        for n in [9, 16] {
            let g = GridGraph::build(product(), GridSpec::cube(n)).unwrap();
            let r = g.r_levels();
            for i in 0..n / 2 {
                assert_eq!(r[n - 1 - i], PI - r[i]);
            }
        }
    }

    #[test]
    fn weights_match_adaptive_quadrature() {
        for w in [
            WarpFamily::constant(1.0).unwrap(),
            WarpFamily::sequence(1.0, 2.0).unwrap(),
            WarpFamily::sequence(2f64.powi(-20), 2.0).unwrap(),
        ] {
            let g = GridGraph::build(MetricParams::new(w), GridSpec::cube(48)).unwrap();
            let audit = g.audit_weights(0.5, 7).unwrap();
            assert!(audit.max_relative_error < 1e-6, "{w:?}: {audit:?}");
        }
        let ext = MetricParams::new(WarpFamily::extreme(2.0).unwrap());
        let g = GridGraph::build(ext, GridSpec::cube(48).restricted(0.05)).unwrap();
        assert!(g.audit_weights(0.5, 7).unwrap().max_relative_error < 1e-6);
    }

    #[test]
    fn equator_fiber_pair_on_product() {
        let g = GridGraph::build(product(), GridSpec::cube(32)).unwrap();
        let p = Point::new(FRAC_PI_2, 0.0, 0.0);
        let q = Point::new(FRAC_PI_2, 0.0, PI);
        let gp = g.graph_distance(&p, &q).unwrap();
        assert!(gp.value >= PI - 1e-12);
        assert!(gp.polyline.joins(&p, &q));
        let l = polyline_length(&product(), &gp.polyline, &QuadratureConfig::default()).unwrap().value;
        assert!((PI - 1e-9..PI * 1.05).contains(&l), "{l}");
    }

    #[test]
    fn sequence_equator_pair_within_bracket() {
        let m = MetricParams::new(WarpFamily::sequence(1.0, 2.0).unwrap());
        // odd n_r puts a level on the equator
        let g = GridGraph::build(m, GridSpec { n_r: 33, ..GridSpec::cube(32) }).unwrap();
        let gp = g.graph_distance(&Point::new(FRAC_PI_2, 0.0, 0.0), &Point::new(FRAC_PI_2, 0.0, PI)).unwrap();
        assert!(gp.value >= PI && gp.value <= 2.0 * PI + 1e-9, "{}", gp.value);
    }

    #[test]
    fn identical_points() {
        let g = GridGraph::build(product(), GridSpec::cube(16)).unwrap();
        let p = Point::new(1.0, 2.0, 3.0);
        let gp = g.graph_distance(&p, &p).unwrap();
        assert_eq!(gp.value, 0.0);
        assert!(gp.polyline.is_degenerate() || gp.snap > 0.0);
    }

    #[test]
    fn quotient_matches_reference_dijkstra() {
        // brute-force Dijkstra on the full lattice
        let m = MetricParams::new(WarpFamily::sequence(0.01, 2.0).unwrap());
        for stencil in [Stencil::Full, Stencil::Axis] {
            let spec = GridSpec { n_r: 9, n_theta: 10, n_phi: 8, restriction: None, stencil };
            let g = GridGraph::build(m, spec).unwrap();
            for level in [0usize, 3] {
                let field = g.field_from_level(level, &[]);
                let full = brute_force(&g, level);
                for i in 0..spec.n_r {
                    for j in 0..spec.n_theta {
                        for k in 0..spec.n_phi {
                            let a = full[(i * spec.n_theta + j) * spec.n_phi + k];
                            let b = field.dist[g.rep(i, j as i64, k as i64)];
                            assert!((a - b).abs() < 1e-12, "({i},{j},{k}) {a} vs {b}");
                        }
                    }
                }
            }
        }
    }

    fn brute_force(g: &GridGraph, level: usize) -> Vec<f64> {
        let s = g.spec;
        let (nr, nt, np) = (s.n_r as i64, s.n_theta as i64, s.n_phi as i64);
        let idx = |i: i64, j: i64, k: i64| ((i * nt + j.rem_euclid(nt)) * np + k.rem_euclid(np)) as usize;
        let mut dist = vec![f64::INFINITY; (nr * nt * np) as usize];
        let mut heap = BinaryHeap::new();
        dist[idx(level as i64, 0, 0)] = 0.0;
        heap.push(Reverse((0u64, level as i64, 0i64, 0i64)));
        while let Some(Reverse((bits, i, j, k))) = heap.pop() {
            let d = f64::from_bits(bits);
            if d > dist[idx(i, j, k)] {
                continue;
            }
            for di in -1..=1i64 {
                for dj in -1..=1i64 {
                    for dk in -1..=1i64 {
                        let nz = (di != 0) as i32 + (dj != 0) as i32 + (dk != 0) as i32;
                        if nz == 0 || (s.stencil == Stencil::Axis && nz > 1) || i + di < 0 || i + di >= nr {
                            continue;
                        }
                        let w = g.weight(i as usize, di as isize, dj.unsigned_abs() as usize, dk.unsigned_abs() as usize);
                        let v = idx(i + di, j + dj, k + dk);
                        if d + w < dist[v] {
                            dist[v] = d + w;
                            heap.push(Reverse(((d + w).to_bits(), i + di, (j + dj).rem_euclid(nt), (k + dk).rem_euclid(np))));
                        }
                    }
                }
            }
        }
        dist
    }

    #[test]
    fn lattice_path_realises_field_value() {
        let m = MetricParams::new(WarpFamily::sequence(0.05, 2.0).unwrap());
        let g = GridGraph::build(m, GridSpec::cube(24)).unwrap();
        let p = Point::new(0.9, 1.0, 2.0);
        let field = g.field_from_level(g.level_of(p.r), &[]);
        for q in [Point::new(2.5, 4.0, 5.5), Point::new(0.0, 0.0, 0.0), Point::new(0.9, 1.0 + PI, 2.0)] {
            let t = g.snap_target(&p, &q);
            let nodes = g.lattice_path(&field, t).unwrap();
            let mut sum = 0.0;
            for w in nodes.windows(2) {
                let di = w[1].0 as isize - w[0].0 as isize;
                sum += g.weight(w[0].0, di, (w[1].1 - w[0].1).unsigned_abs() as usize, (w[1].2 - w[0].2).unsigned_abs() as usize);
            }
            assert_relative_eq!(sum, field.dist[g.target_index(t)], max_relative = 1e-12);
            let gp = g.path_on_field(&field, &p, &q).unwrap();
            assert!(gp.polyline.joins(&p, &q));
        }
    }

    #[test]
    fn mirrored_queries_agree() {
        let m = MetricParams::new(WarpFamily::sequence(0.05, 2.0).unwrap());
        let g = GridGraph::build(m, GridSpec::cube(20)).unwrap();
        let p = Point::new(2.6, 1.0, 2.0);
        let q = Point::new(0.4, 3.0, 0.5);
        let a = g.graph_distance(&p, &q).unwrap();
        let b = g.graph_distance(&p.mirrored(), &q.mirrored()).unwrap();
        assert_eq!(a.value, b.value);
        assert!(a.polyline.joins(&p, &q));
    }

    #[test]
    fn weights_monotone_in_sequence() {
        let spec = GridSpec::cube(32);
        let mut prev: Option<Vec<f64>> = None;
        for j in 0..=20 {
            let m = MetricParams::new(WarpFamily::sequence(0.5f64.powi(j), 2.0).unwrap());
            let w = GridGraph::build(m, spec).unwrap().weight_table();
            if let Some(p) = &prev {
                assert!(p.iter().zip(&w).all(|(a, b)| a <= b));
            }
            prev = Some(w);
        }
    }
}
