//! Adaptive Gauss–Kronrod quadrature, improper integrals with an endpoint
//! singularity, and fixed Gauss–Legendre rules for hot loops.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Absolute error target.
    pub tol: f64,
    /// Maximum bisection depth of any subinterval.
    pub max_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { tol: 1e-9, max_depth: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
}

impl Integral {
    pub const ZERO: Integral = Integral { value: 0.0, abs_error: 0.0 };

    pub fn add(self, other: Integral) -> Integral {
        Integral { value: self.value + other.value, abs_error: self.abs_error + other.abs_error }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod step: (estimate, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    let mut abs_k = rk.abs();
    let mut fv = [0.0f64; 14];
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        rk += WGK[j] * (f1 + f2);
        abs_k += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            rg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * rk;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
    }
    let result = rk * h;
    let resabs = abs_k * h.abs();
    let resasc = asc * h.abs();
    let mut err = ((rk - rg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let roundoff = 50.0 * f64::EPSILON * resabs;
    if roundoff > err {
        err = roundoff;
    }
    (result, err)
}

const MAX_SPLITS: usize = 20_000;

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    depth: u32,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive integration of a smooth integrand over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Integral> {
    if a == b {
        return Ok(Integral::ZERO);
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, err: e, depth: 0 });
    let mut total = v;
    let mut total_err = e;
    let mut splits = 0usize;
    // tolerance floor at the roundoff level of the running total
    let target = |total: f64| cfg.tol.max(100.0 * f64::EPSILON * total.abs());
    while total_err > target(total) {
        let worst = heap.pop().expect("heap holds at least one piece");
        splits += 1;
        if worst.depth >= cfg.max_depth || !worst.err.is_finite() || splits > MAX_SPLITS {
            return Err(GeoError::QuadratureNoConvergence { error: total_err, tol: cfg.tol });
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Piece { a: worst.a, b: mid, value: v1, err: e1, depth: worst.depth + 1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, err: e2, depth: worst.depth + 1 });
        if total_err <= target(total) {
            // resum to shed drift from the running updates
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
    Ok(Integral { value: total, abs_error: total_err })
}

/// Improper integral over `[a, b]` with an integrable singularity at `a`.
///
/// The interval is cut geometrically with ratio 1/2 toward `a`; each piece
/// is integrated adaptively and the cascade stops once a piece contributes
/// less than `tol/10`. The integrand is never evaluated at `a`.
pub fn integrate_singular_start<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral::ZERO);
    }
    let piece_cfg = QuadratureConfig { tol: cfg.tol / 100.0, max_depth: cfg.max_depth };
    let mut acc = Integral::ZERO;
    let mut hi = b;
    for k in 0..=cfg.max_depth {
        let lo = a + (b - a) * 0.5f64.powi(k as i32 + 1);
        let piece = integrate(&f, lo, hi, &piece_cfg)?;
        acc = acc.add(piece);
        hi = lo;
        if k >= 1 && piece.value.abs() < cfg.tol / 10.0 {
            // the untouched tail is bounded by the last (geometrically shrinking) piece
            acc.abs_error += piece.value.abs();
            return Ok(acc);
        }
    }
    Err(GeoError::QuadratureNoConvergence { error: acc.abs_error, tol: cfg.tol })
}

/// Improper integral with an integrable singularity at `b`.
pub fn integrate_singular_end<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<Integral> {
    integrate_singular_start(|t| f(a + b - t), a, b, cfg)
}

/// Five-point Gauss–Legendre nodes and weights on `[-1, 1]`.
pub const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
pub const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Five-point Gauss–Legendre over `[a, b]`.
#[inline]
pub fn gl5<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for k in 0..5 {
        s += GL5_WEIGHTS[k] * f(c + h * GL5_NODES[k]);
    }
    s * h
}

/// Composite five-point rule on the panels delimited by `breaks`.
pub fn gl5_composite<F: Fn(f64) -> f64>(f: &F, breaks: &[f64]) -> f64 {
    breaks.windows(2).map(|w| gl5(f, w[0], w[1])).sum()
}

/// Breakpoints of `[0, 1]` graded geometrically toward 0: `0, 2^{-levels}, …, 1/2, 1`.
pub fn graded_breaks(levels: u32) -> Vec<f64> {
    let mut v = Vec::with_capacity(levels as usize + 2);
    v.push(0.0);
    for k in (0..=levels).rev() {
        v.push(0.5f64.powi(k as i32));
    }
    v
}

/// `panels + 1` uniform breakpoints of `[0, 1]`.
pub fn uniform_breaks(panels: usize) -> Vec<f64> {
    (0..=panels).map(|k| k as f64 / panels as f64).collect()
}
