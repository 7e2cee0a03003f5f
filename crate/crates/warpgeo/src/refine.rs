//! Polyline shortening by coordinate descent and by L-BFGS on the vertices.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::curve::Polyline;
use crate::geometry::{s2_distance, wrap_delta, Coord, MetricParams};
use crate::grid::{fixed_rule_length, fixed_rule_length_grad};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    /// Admissible latitude range; vertices are projected into it.
    pub r_bounds: (f64, f64),
    /// Starting trial step for every coordinate.
    pub initial_step: f64,
    /// Relative improvement per sweep below which refinement stops.
    pub rel_tol: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions { r_bounds: (0.0, PI), initial_step: 0.02, rel_tol: 1e-10 }
    }
}

/// Length under the fixed composite rule used for optimisation.
pub fn quick_length(m: &MetricParams, poly: &Polyline) -> f64 {
    poly.vertices.windows(2).map(|w| fixed_rule_length(m, &w[0], &w[1])).sum()
}

/// Point at fraction `t` of the great-circle arc between the `S²` parts of
/// `a` and `b`, with `φ` interpolated linearly. The `θ` lift is the one
/// nearest the coordinate interpolation.
pub fn great_circle_point(a: &Coord, b: &Coord, t: f64) -> Coord {
    let unit = |c: &Coord| [c.r.sin() * c.theta.cos(), c.r.sin() * c.theta.sin(), c.r.cos()];
    let (u, v) = (unit(a), unit(b));
    let dot = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]).clamp(-1.0, 1.0);
    let omega = dot.acos();
    let lin = a.lerp(b, t);
    if omega < 1e-12 || PI - omega < 1e-9 {
        return lin;
    }
    let (sa, sb) = (((1.0 - t) * omega).sin() / omega.sin(), (t * omega).sin() / omega.sin());
    let x = [sa * u[0] + sb * v[0], sa * u[1] + sb * v[1], sa * u[2] + sb * v[2]];
    let r = x[2].clamp(-1.0, 1.0).acos();
    let theta = if x[0] == 0.0 && x[1] == 0.0 { lin.theta } else { x[1].atan2(x[0]) };
    let theta = lin.theta + wrap_delta(theta - lin.theta);
    Coord::new(r, theta, lin.phi)
}

/// Coordinate descent on interior vertices with a three-point quadratic fit
/// along each coordinate. The quick length never increases.
pub fn refine_path(m: &MetricParams, poly: &Polyline, iters: usize) -> Polyline {
    refine_path_with(m, poly, iters, &RefineOptions::default())
}

///
/// Coordinate moves let vertices drift along the curve and cluster, which
/// stalls the descent; every few sweeps the vertices are redistributed by
/// arclength, kept only when the batch still made net progress.
pub fn refine_path_with(m: &MetricParams, poly: &Polyline, iters: usize, opts: &RefineOptions) -> Polyline {
    const BATCH: usize = 10;
    let mut cur = poly.clone();
    let mut len = quick_length(m, &cur);
    let mut done = 0;
    while done < iters {
        let k = BATCH.min(iters - done);
        let (next, sweeps) = descend(m, &cur, k, opts);
        done += k;
        let l = quick_length(m, &next);
        let gain = len - l;
        cur = next;
        len = l;
        if sweeps < k || cur.vertices.len() < 3 {
            // converged from this arrangement; one resample may unlock more
            let rs = resample_uniform(m, &cur, cur.vertices.len() - 1);
            let (again, _) = descend(m, &rs, BATCH, opts);
            let la = quick_length(m, &again);
            if la < len - opts.rel_tol * len {
                cur = again;
                len = la;
                done += BATCH;
                continue;
            }
            break;
        }
        let rs = resample_uniform(m, &cur, cur.vertices.len() - 1);
        let lr = quick_length(m, &rs);
        if lr <= len + 0.1 * gain {
            cur = rs;
            len = lr;
        }
    }
    cur
}

/// Plain coordinate descent; returns the polyline and the sweeps performed.
fn descend(m: &MetricParams, poly: &Polyline, iters: usize, opts: &RefineOptions) -> (Polyline, usize) {
    let mut v = poly.vertices.clone();
    let n = v.len();
    if n < 3 || iters == 0 {
        return (poly.clone(), 0);
    }
    let (lo, hi) = opts.r_bounds;
    for c in v.iter_mut().take(n - 1).skip(1) {
        c.r = c.r.clamp(lo, hi);
    }
    let mut seg: Vec<f64> = v.windows(2).map(|w| fixed_rule_length(m, &w[0], &w[1])).collect();
    let mut total: f64 = seg.iter().sum();
    let mut step = vec![[opts.initial_step; 3]; n];
    let max_step = 8.0 * opts.initial_step;
    let min_step = 1e-13;
    let mut just_reset = false;
    let mut sweeps = 0;
    for _ in 0..iters {
        sweeps += 1;
        let before = total;
        // at an exact pole the endpoint's θ lift is free
        for (e, nb, si) in [(0usize, 1usize, 0usize), (n - 1, n - 2, n - 2)] {
            if v[e].r == 0.0 || v[e].r == PI {
                let old = v[e].theta;
                v[e].theta = v[nb].theta;
                let l = fixed_rule_length(m, &v[si], &v[si + 1]);
                if l <= seg[si] {
                    seg[si] = l;
                } else {
                    v[e].theta = old;
                }
            }
        }
        for i in 1..n - 1 {
            // joint move onto the neighbours' great circle; coordinate moves
            // alone cannot leave a pole, where θ is degenerate
            let (sl, sr) = (seg[i - 1], seg[i]);
            let t = if sl + sr > 0.0 { sl / (sl + sr) } else { 0.5 };
            let mut c = great_circle_point(&v[i - 1], &v[i + 1], t);
            c.r = c.r.clamp(lo, hi);
            let a = fixed_rule_length(m, &v[i - 1], &c);
            let b = fixed_rule_length(m, &c, &v[i + 1]);
            if a + b < sl + sr {
                v[i] = c;
                seg[i - 1] = a;
                seg[i] = b;
            }
            for axis in 0..3 {
                let x0 = v[i].get(axis);
                let e0 = seg[i - 1] + seg[i];
                let s = step[i][axis];
                let clamp = |x: f64| if axis == 0 { x.clamp(lo, hi) } else { x };
                let eval = |x: f64, v: &mut Vec<Coord>| {
                    v[i].set(axis, x);
                    let a = fixed_rule_length(m, &v[i - 1], &v[i]);
                    let b = fixed_rule_length(m, &v[i], &v[i + 1]);
                    (a, b)
                };
                let xm = clamp(x0 - s);
                let xp = clamp(x0 + s);
                let lm = eval(xm, &mut v);
                let lp = eval(xp, &mut v);
                let (em, ep) = (lm.0 + lm.1, lp.0 + lp.1);
                let mut best = (x0, e0, (seg[i - 1], seg[i]));
                if em < best.1 {
                    best = (xm, em, lm);
                }
                if ep < best.1 {
                    best = (xp, ep, lp);
                }
                let curv = em - 2.0 * e0 + ep;
                if curv > 0.0 && xm < x0 && xp > x0 {
                    let xs = clamp(x0 + 0.5 * s * (em - ep) / curv);
                    if xs != x0 && xs != xm && xs != xp {
                        let ls = eval(xs, &mut v);
                        if ls.0 + ls.1 < best.1 {
                            best = (xs, ls.0 + ls.1, ls);
                        }
                    }
                }
                v[i].set(axis, best.0);
                if best.0 != x0 {
                    seg[i - 1] = best.2 .0;
                    seg[i] = best.2 .1;
                    let moved = (best.0 - x0).abs();
                    step[i][axis] = (2.0 * moved).max(s).clamp(min_step, max_step);
                } else {
                    step[i][axis] = (0.5 * s).max(min_step);
                }
            }
        }
        total = seg.iter().sum();
        if before - total <= opts.rel_tol * total {
            // shrunken steps can stall far from the optimum; retry once from
            // the initial step before giving up
            if just_reset {
                break;
            }
            step.iter_mut().for_each(|s| *s = [opts.initial_step; 3]);
            just_reset = true;
        } else {
            just_reset = false;
        }
    }
    (Polyline { vertices: v }, sweeps)
}

/// Replaces every run of consecutive vertices at the same pole and fiber
/// angle by a single vertex. Such runs have zero length, and their inner
/// vertices see only pole neighbours, so no local move can lift them off.
pub fn collapse_pole_runs(poly: &Polyline) -> Polyline {
    let at_pole = |c: &Coord| c.r == 0.0 || c.r == PI;
    let same = |a: &Coord, b: &Coord| at_pole(a) && a.r == b.r && a.phi == b.phi;
    let n = poly.vertices.len();
    let mut out: Vec<Coord> = Vec::with_capacity(n);
    for (i, c) in poly.vertices.iter().enumerate() {
        if let Some(last) = out.last() {
            if same(last, c) {
                if i == n - 1 && out.len() > 1 {
                    out.pop();
                    out.push(*c);
                }
                continue;
            }
        }
        out.push(*c);
    }
    Polyline { vertices: out }
}

/// Quick length and its gradient in the interior vertex coordinates,
/// flattened as `(r, θ, φ)` triples.
fn length_and_grad(m: &MetricParams, v: &[Coord], grad: &mut [f64]) -> f64 {
    let n = v.len();
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut total = 0.0;
    for k in 0..n - 1 {
        let (l, ga, gb) = fixed_rule_length_grad(m, &v[k], &v[k + 1]);
        total += l;
        if k >= 1 {
            let o = 3 * (k - 1);
            (0..3).for_each(|x| grad[o + x] += ga[x]);
        }
        if k < n - 2 {
            let o = 3 * k;
            (0..3).for_each(|x| grad[o + x] += gb[x]);
        }
    }
    total
}

/// Limited-memory BFGS on the interior vertices with `r` projected into
/// the admissible range and a backtracking Armijo search. The quick length
/// never increases.
pub fn lbfgs_refine(m: &MetricParams, poly: &Polyline, iters: usize, opts: &RefineOptions) -> Polyline {
    const MEMORY: usize = 8;
    let n = poly.vertices.len();
    if n < 3 || iters == 0 {
        return poly.clone();
    }
    let (lo, hi) = opts.r_bounds;
    let nv = 3 * (n - 2);
    let mut v = poly.vertices.clone();
    for c in v.iter_mut().take(n - 1).skip(1) {
        c.r = c.r.clamp(lo, hi);
    }
    let load = |v: &mut [Coord], x: &[f64]| {
        for i in 1..n - 1 {
            let o = 3 * (i - 1);
            v[i] = Coord::new(x[o], x[o + 1], x[o + 2]);
        }
    };
    let mut x: Vec<f64> = v[1..n - 1].iter().flat_map(|c| [c.r, c.theta, c.phi]).collect();
    let mut g = vec![0.0; nv];
    let mut f = length_and_grad(m, &v, &mut g);
    let start = f;
    let mut mem: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let (mut xn, mut gn, mut d) = (vec![0.0; nv], vec![0.0; nv], vec![0.0; nv]);
    let mut trial = v.clone();
    let mut stall = 0;
    // inverse metric coefficients at the starting vertices; θ and φ steps
    // are otherwise badly scaled near the poles and where the warp is large
    let precond: Vec<f64> = v[1..n - 1]
        .iter()
        .flat_map(|c| {
            let s = c.r.sin();
            let (f, _) = m.warp_and_slope_unchecked(c.r);
            [1.0, 1.0 / (s * s).max(1e-4), 1.0 / (f * f).max(1e-4)]
        })
        .collect();
    // an `r` variable pinned at a bound and pushed outward is held fixed
    let active = |x: &[f64], g: &[f64], i: usize| i.is_multiple_of(3) && ((x[i] <= lo && g[i] > 0.0) || (x[i] >= hi && g[i] < 0.0));
    for _ in 0..iters {
        for i in 0..nv {
            d[i] = if active(&x, &g, i) { 0.0 } else { -g[i] };
        }
        let mut alpha = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &d);
            axpy(-a, y, &mut d);
            alpha.push(a);
        }
        let gamma = match mem.back() {
            Some((s, y, _)) => dot(s, y) / y.iter().zip(&precond).map(|(a, p)| a * a * p).sum::<f64>(),
            None => 1.0,
        };
        d.iter_mut().zip(&precond).for_each(|(z, p)| *z *= gamma * p);
        for ((s, y, rho), a) in mem.iter().zip(alpha.iter().rev()) {
            let b = rho * dot(y, &d);
            axpy(a - b, s, &mut d);
        }
        for i in 0..nv {
            if active(&x, &g, i) {
                d[i] = 0.0;
            }
        }
        let mut gd = dot(&g, &d);
        if !(gd < 0.0) {
            mem.clear();
            for i in 0..nv {
                d[i] = if active(&x, &g, i) { 0.0 } else { -g[i] * precond[i] };
            }
            gd = dot(&g, &d);
            if !(gd < 0.0) {
                break;
            }
        }
        let dmax = d.iter().fold(0.0f64, |a, z| a.max(z.abs()));
        let mut step = if mem.is_empty() { (opts.initial_step / dmax).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..40 {
            for i in 0..nv {
                let z = x[i] + step * d[i];
                xn[i] = if i % 3 == 0 { z.clamp(lo, hi) } else { z };
            }
            load(&mut trial, &xn);
            let fnew = length_and_grad(m, &trial, &mut gn);
            let decrease: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
            if fnew <= f + 1e-4 * decrease {
                accepted = Some(fnew);
                break;
            }
            step *= 0.5;
        }
        let Some(fnew) = accepted else {
            if mem.is_empty() {
                break;
            }
            mem.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if mem.len() == MEMORY {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let gain = f - fnew;
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g, &mut gn);
        f = fnew;
        if gain <= opts.rel_tol * f {
            stall += 1;
            if stall >= 3 {
                break;
            }
        } else {
            stall = 0;
        }
    }
    if f < start {
        load(&mut v, &x);
        Polyline { vertices: v }
    } else {
        poly.clone()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// One pass of great-circle joint moves, plus the free `θ` of pole
/// endpoints. Gradient steps cannot leave a pole, where `θ` is degenerate.
fn great_circle_pass(m: &MetricParams, poly: &Polyline, r_bounds: (f64, f64)) -> Polyline {
    let mut v = poly.vertices.clone();
    let n = v.len();
    if n < 3 {
        return poly.clone();
    }
    for (e, nb) in [(0usize, 1usize), (n - 1, n - 2)] {
        if v[e].r == 0.0 || v[e].r == PI {
            v[e].theta = v[nb].theta;
        }
    }
    let mut seg: Vec<f64> = v.windows(2).map(|w| fixed_rule_length(m, &w[0], &w[1])).collect();
    for i in 1..n - 1 {
        let (sl, sr) = (seg[i - 1], seg[i]);
        let t = if sl + sr > 0.0 { sl / (sl + sr) } else { 0.5 };
        let mut c = great_circle_point(&v[i - 1], &v[i + 1], t);
        c.r = c.r.clamp(r_bounds.0, r_bounds.1);
        let a = fixed_rule_length(m, &v[i - 1], &c);
        let b = fixed_rule_length(m, &c, &v[i + 1]);
        if a + b < sl + sr {
            v[i] = c;
            seg[i - 1] = a;
            seg[i] = b;
        }
    }
    Polyline { vertices: v }
}

/// Alternates great-circle passes with L-BFGS runs of `chunk` iterations
/// until `iters` are spent or a round gains nothing.
pub fn optimize_path(m: &MetricParams, poly: &Polyline, iters: usize, chunk: usize, opts: &RefineOptions) -> Polyline {
    let mut cur = collapse_pole_runs(poly);
    let mut len = quick_length(m, &cur);
    let mut done = 0;
    while done < iters {
        let k = chunk.min(iters - done).max(1);
        let gc = great_circle_pass(m, &cur, opts.r_bounds);
        let next = lbfgs_refine(m, &gc, k, opts);
        done += k;
        let l = quick_length(m, &next);
        if l < len {
            let gain = len - l;
            cur = next;
            len = l;
            if gain <= opts.rel_tol * len {
                break;
            }
        } else {
            break;
        }
    }
    cur
}

/// Redistributes `nseg + 1` vertices at equal quick-length spacing along the
/// polyline, interpolating linearly in coordinates within segments.
pub fn resample_uniform(m: &MetricParams, poly: &Polyline, nseg: usize) -> Polyline {
    let v = &poly.vertices;
    if v.len() < 2 || nseg == 0 {
        return poly.clone();
    }
    let seg: Vec<f64> = v.windows(2).map(|w| fixed_rule_length(m, &w[0], &w[1])).collect();
    let total: f64 = seg.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return poly.clone();
    }
    let mut out = Vec::with_capacity(nseg + 1);
    out.push(v[0]);
    let (mut k, mut acc) = (0usize, 0.0);
    for s in 1..nseg {
        let target = total * s as f64 / nseg as f64;
        while k + 1 < seg.len() && acc + seg[k] < target {
            acc += seg[k];
            k += 1;
        }
        let t = if seg[k] > 0.0 { ((target - acc) / seg[k]).clamp(0.0, 1.0) } else { 0.0 };
        out.push(v[k].lerp(&v[k + 1], t));
    }
    out.push(v[v.len() - 1]);
    Polyline { vertices: out }
}

/// Merges consecutive lattice steps with equal coordinate increments into a
/// single coordinate-linear segment; the curve is unchanged as a set.
pub fn simplify(poly: &Polyline) -> Polyline {
    let v = &poly.vertices;
    if v.len() < 3 {
        return poly.clone();
    }
    let delta = |a: &Coord, b: &Coord| [b.r - a.r, b.theta - a.theta, b.phi - a.phi];
    let same_dir = |d1: [f64; 3], d2: [f64; 3]| {
        let cross = [
            d1[1] * d2[2] - d1[2] * d2[1],
            d1[2] * d2[0] - d1[0] * d2[2],
            d1[0] * d2[1] - d1[1] * d2[0],
        ];
        let dot = d1[0] * d2[0] + d1[1] * d2[1] + d1[2] * d2[2];
        let n1 = (d1[0] * d1[0] + d1[1] * d1[1] + d1[2] * d1[2]).sqrt();
        let n2 = (d2[0] * d2[0] + d2[1] * d2[1] + d2[2] * d2[2]).sqrt();
        let cn = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        dot > 0.0 && cn <= 1e-12 * n1 * n2
    };
    let mut out = vec![v[0]];
    for i in 1..v.len() - 1 {
        let last = out[out.len() - 1];
        if !same_dir(delta(&last, &v[i]), delta(&v[i], &v[i + 1])) {
            out.push(v[i]);
        }
    }
    out.push(v[v.len() - 1]);
    Polyline { vertices: out }
}

/// Inserts the coordinate midpoint of every segment.
pub fn subdivide(poly: &Polyline) -> Polyline {
    let mut out = Vec::with_capacity(2 * poly.vertices.len());
    for w in poly.vertices.windows(2) {
        out.push(w[0]);
        out.push(w[0].lerp(&w[1], 0.5));
    }
    out.push(poly.last());
    Polyline { vertices: out }
}

/// Splits segments that are longer than `max_len` or whose coordinate
/// midpoint strays more than `max_dev` on `S²` from the great-circle
/// midpoint. Each split takes whichever midpoint is shorter; the coordinate
/// midpoint leaves the curve unchanged, so the quick length never increases.
/// Returns the new polyline and the number of splits.
pub fn subdivide_adaptive(
    m: &MetricParams,
    poly: &Polyline,
    r_bounds: (f64, f64),
    max_len: f64,
    max_dev: f64,
) -> (Polyline, usize) {
    let mut out = Vec::with_capacity(2 * poly.vertices.len());
    let mut splits = 0;
    for w in poly.vertices.windows(2) {
        out.push(w[0]);
        let mid = w[0].lerp(&w[1], 0.5);
        let mut gc = great_circle_point(&w[0], &w[1], 0.5);
        gc.r = gc.r.clamp(r_bounds.0, r_bounds.1);
        let len = fixed_rule_length(m, &w[0], &w[1]);
        let dev = s2_distance((mid.r, mid.theta), (gc.r, gc.theta));
        if len <= max_len && dev <= max_dev {
            continue;
        }
        let lm = fixed_rule_length(m, &w[0], &mid) + fixed_rule_length(m, &mid, &w[1]);
        let lg = fixed_rule_length(m, &w[0], &gc) + fixed_rule_length(m, &gc, &w[1]);
        out.push(if lg < lm { gc } else { mid });
        splits += 1;
    }
    out.push(poly.last());
    (Polyline { vertices: out }, splits)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultilevelOptions {
    pub refine: RefineOptions,
    /// Lattice spacing of the path's origin grid.
    pub spacing: f64,
    pub coarse_segments: usize,
    pub max_segments: usize,
    pub coarse_iters: usize,
    pub level_iters: usize,
    pub max_levels: u32,
    /// Segments longer than this are split.
    pub max_length: f64,
    /// Great-circle deviation above which a segment is split.
    pub max_deviation: f64,
    /// Optimise with L-BFGS instead of coordinate descent.
    pub quasi_newton: bool,
}

impl MultilevelOptions {
    fn run(&self, m: &MetricParams, poly: &Polyline, iters: usize, ro: &RefineOptions) -> Polyline {
        if self.quasi_newton {
            optimize_path(m, poly, iters, 50, ro)
        } else {
            refine_path_with(m, poly, iters, ro)
        }
    }

    pub fn for_spacing(spacing: f64, r_bounds: (f64, f64)) -> Self {
        MultilevelOptions {
            refine: RefineOptions { r_bounds, initial_step: spacing, rel_tol: 1e-10 },
            spacing,
            coarse_segments: 8,
            max_segments: 256,
            coarse_iters: 200,
            level_iters: 100,
            max_levels: 8,
            max_length: 4.0 * spacing,
            max_deviation: 1e-4,
            quasi_newton: true,
        }
    }
}

/// Coarse-to-fine refinement of a lattice path.
///
/// The path is thinned to a few vertices, refined, then repeatedly
/// subdivided where segments are long or far from great circles, and
/// refined again.
pub fn refine_multilevel(m: &MetricParams, poly: &Polyline, opts: &MultilevelOptions) -> Polyline {
    refine_seeds(m, &[thin_lattice_path(poly, opts.coarse_segments)], opts)
}

/// Runs the coarse-to-fine cascade from every seed and keeps the shortest
/// result. Seeds are used whole; thin lattice paths first with
/// [`thin_lattice_path`]. Seeds in different homotopy classes around a pole
/// need separate runs, since descent cannot carry a path across the pole.
pub fn refine_seeds(m: &MetricParams, seeds: &[Polyline], opts: &MultilevelOptions) -> Polyline {
    // coarse lengths mislead: a seed that loses at eight segments can win
    // once resolved, so every seed runs the full cascade
    seeds
        .iter()
        .map(|seed| refine_one(m, seed, opts))
        .map(|p| (quick_length(m, &p), p))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, p)| p)
        .unwrap_or(Polyline { vertices: Vec::new() })
}

fn refine_one(m: &MetricParams, seed: &Polyline, opts: &MultilevelOptions) -> Polyline {
    let coarse = collapse_pole_runs(seed);
    let mut cur = opts.run(m, &coarse, opts.coarse_iters, &opts.refine);
    if cur.vertices.len() < 2 {
        return cur;
    }
    let mut ro = opts.refine;
    for level in 1..=opts.max_levels {
        if cur.vertices.len() > opts.max_segments {
            break;
        }
        let (next, splits) =
            subdivide_adaptive(m, &cur, opts.refine.r_bounds, opts.max_length, opts.max_deviation);
        if splits == 0 {
            break;
        }
        ro.initial_step = opts.spacing / (1u64 << level.min(8)) as f64;
        cur = opts.run(m, &next, opts.level_iters, &ro);
    }
    cur
}

/// Keeps about `segments` evenly spaced vertices plus latitude extrema, so
/// dips toward a pole survive. Runs of pole vertices are collapsed first.
pub fn thin_lattice_path(poly: &Polyline, segments: usize) -> Polyline {
    let poly = collapse_pole_runs(poly);
    let v = &poly.vertices;
    let n = v.len();
    if n < 3 {
        return poly;
    }
    let stride = ((n - 1) as f64 / segments as f64).ceil().max(1.0) as usize;
    let extremum = |i: usize| {
        let (a, b, c) = (v[i - 1].r, v[i].r, v[i + 1].r);
        (b < a && b <= c) || (b > a && b >= c)
    };
    let vertices = (0..n)
        .filter(|&i| i == 0 || i == n - 1 || i % stride == 0 || extremum(i))
        .map(|i| v[i])
        .collect();
    Polyline { vertices }
}

/// Vertices on the `S²` great circle from `a` to `b` with `φ` linear,
/// bisected until every coordinate-linear segment stays within `max_dev` of
/// the arc. Vertices crowd where the arc passes near a pole. Latitudes are
/// clamped into `r_bounds`.
pub fn great_circle_seed(a: &Coord, b: &Coord, max_dev: f64, r_bounds: (f64, f64)) -> Polyline {
    const MAX_VERTICES: usize = 256;
    let at = |t: f64| {
        let mut c = great_circle_point(a, b, t);
        c.r = c.r.clamp(r_bounds.0, r_bounds.1);
        c
    };
    let mut ts = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    let mut pts: Vec<Coord> = ts.iter().map(|&t| at(t)).collect();
    pts[0] = *a;
    pts[4] = *b;
    let lift = |pts: &mut Vec<Coord>| {
        for k in 1..pts.len() {
            let prev = pts[k - 1].theta;
            pts[k].theta = prev + wrap_delta(pts[k].theta - prev);
        }
    };
    lift(&mut pts);
    loop {
        let mut next_t = vec![ts[0]];
        let mut next_p = vec![pts[0]];
        let mut split = false;
        for k in 1..ts.len() {
            let tm = 0.5 * (ts[k - 1] + ts[k]);
            let mut gm = at(tm);
            gm.theta = pts[k - 1].theta + wrap_delta(gm.theta - pts[k - 1].theta);
            let cm = pts[k - 1].lerp(&pts[k], 0.5);
            if s2_distance((cm.r, cm.theta), (gm.r, gm.theta)) > max_dev && ts.len() + next_t.len() < MAX_VERTICES {
                next_t.push(tm);
                next_p.push(gm);
                split = true;
            }
            next_t.push(ts[k]);
            next_p.push(pts[k]);
        }
        ts = next_t;
        pts = next_p;
        lift(&mut pts);
        if !split {
            break;
        }
    }
    Polyline { vertices: pts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WarpFamily;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn product() -> MetricParams {
        MetricParams::new(WarpFamily::constant(1.0).unwrap())
    }

    #[test]
    fn straight_meridian_is_fixed_point() {
        let v: Vec<Coord> = (0..=10).map(|k| Coord::new(0.3 + 0.2 * k as f64, 1.0, 2.0)).collect();
        let poly = Polyline { vertices: v };
        let out = refine_path(&product(), &poly, 50);
        assert_relative_eq!(quick_length(&product(), &out), quick_length(&product(), &poly), max_relative = 1e-10);
        for (a, b) in out.vertices.iter().zip(&poly.vertices) {
            assert!((a.theta - b.theta).abs() < 1e-10 && (a.phi - b.phi).abs() < 1e-10);
        }
    }

    #[test]
    fn perturbed_meridian_shortens_toward_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut v: Vec<Coord> = (0..=16).map(|k| Coord::new(PI * k as f64 / 16.0, 0.5, 0.0)).collect();
        for c in v.iter_mut().take(16).skip(1) {
            c.theta += rng.gen_range(-0.2..0.2);
            c.phi += rng.gen_range(-0.2..0.2);
        }
        let poly = Polyline { vertices: v };
        let before = quick_length(&product(), &poly);
        let out = refine_path(&product(), &poly, 400);
        let after = quick_length(&product(), &out);
        assert!(after < before);
        assert!(after - PI < 1e-3 * (before - PI) + 1e-6, "{before} -> {after}");
    }

    #[test]
    fn refinement_stays_in_tube() {
        let m = MetricParams::new(WarpFamily::extreme(2.0).unwrap());
        let v = vec![Coord::new(0.5, 0.0, 0.0), Coord::new(0.5, 1.0, 1.0), Coord::new(0.5, 2.0, 2.0)];
        let opts = RefineOptions { r_bounds: (0.5, PI - 0.5), ..Default::default() };
        let out = refine_path_with(&m, &Polyline { vertices: v }, 100, &opts);
        assert!(out.vertices.iter().all(|c| c.r >= 0.5 && c.r <= PI - 0.5));
    }

    #[test]
    fn length_never_increases() {
        let m = MetricParams::new(WarpFamily::sequence(1e-3, 2.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let v: Vec<Coord> = (0..8)
                .map(|_| Coord::new(rng.gen_range(0.0..PI), rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)))
                .collect();
            let poly = Polyline { vertices: v };
            let mut prev = quick_length(&m, &poly);
            let mut cur = poly;
            for _ in 0..5 {
                cur = refine_path(&m, &cur, 1);
                let l = quick_length(&m, &cur);
                assert!(l <= prev);
                prev = l;
            }
        }
    }

    #[test]
    fn simplify_merges_collinear_steps() {
        let v: Vec<Coord> = (0..5).map(|k| Coord::new(0.1 * k as f64, 0.2 * k as f64, 0.0)).collect();
        let mut v2 = v.clone();
        v2.push(Coord::new(0.4, 0.8, 0.3));
        let s = simplify(&Polyline { vertices: v2 });
        assert_eq!(s.vertices.len(), 3);
    }

    #[test]
    fn multilevel_finds_great_circle() {
        // staircase between two equatorial points on the product metric
        let mut v = Vec::new();
        for k in 0..=20 {
            v.push(Coord::new(PI / 2.0 + if k % 2 == 0 { 0.0 } else { 0.05 }, 0.05 * k as f64, 0.05 * k as f64));
        }
        let poly = Polyline { vertices: v };
        let out = refine_multilevel(&product(), &poly, &MultilevelOptions::for_spacing(0.05, (0.0, PI)));
        let exact = (1.0f64 * 1.0 + 1.0 * 1.0).sqrt();
        assert!((quick_length(&product(), &out) - exact).abs() < 1e-6, "{}", quick_length(&product(), &out));
    }
}
