//! Reproducible pair samples.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{rho, Point};

/// `ρ`-bands used for stratification.
pub const RHO_BANDS: [(f64, f64); 3] = [(0.0, 0.1), (0.1, 0.5), (0.5, FRAC_PI_2)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    UniformRandom,
    Stratified,
    NearSingular,
    /// Both points at `ρ ≥ radius`.
    InTube,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub mode: SampleMode,
    pub seed: u64,
    pub pairs: Vec<(Point, Point)>,
}

/// Band index of `p`, `0..3`.
pub fn band_of(p: &Point) -> usize {
    let x = rho(p);
    RHO_BANDS.iter().position(|&(_, hi)| x < hi).unwrap_or(RHO_BANDS.len() - 1)
}

fn point_in_band(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Point {
    let x = rng.gen_range(lo..hi);
    let r = if rng.gen_bool(0.5) { x } else { PI - x };
    Point::new(r, rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU))
}

impl PairSample {
    /// Points uniform for the product volume of `S² × S¹`.
    pub fn uniform(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let point = |rng: &mut ChaCha8Rng| {
            let r = (1.0 - 2.0 * rng.gen::<f64>()).clamp(-1.0, 1.0).acos();
            Point::new(r, rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU))
        };
        let pairs = (0..n).map(|_| (point(&mut rng), point(&mut rng))).collect();
        PairSample { mode: SampleMode::UniformRandom, seed, pairs }
    }

    /// Thirds by band: pair `i` has both points in band `i mod 3`.
    pub fn stratified(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = (0..n)
            .map(|i| {
                let (lo, hi) = RHO_BANDS[i % 3];
                (point_in_band(&mut rng, lo, hi), point_in_band(&mut rng, lo, hi))
            })
            .collect();
        PairSample { mode: SampleMode::Stratified, seed, pairs }
    }

    /// Every pair has a point within `0.01` of the singular set; every
    /// fourth has a point exactly on it.
    pub fn near_singular(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = (0..n)
            .map(|i| {
                let mut p = point_in_band(&mut rng, 0.0, 0.01);
                if i % 4 == 0 {
                    p = Point::new(if p.r < FRAC_PI_2 { 0.0 } else { PI }, p.theta, p.phi);
                }
                let (lo, hi) = RHO_BANDS[i % 3];
                (p, point_in_band(&mut rng, lo, hi))
            })
            .collect();
        PairSample { mode: SampleMode::NearSingular, seed, pairs }
    }

    /// Pairs with both points in `r ∈ [radius, π − radius]`.
    pub fn in_tube(n: usize, seed: u64, radius: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = (0..n)
            .map(|_| (point_in_band(&mut rng, radius, FRAC_PI_2), point_in_band(&mut rng, radius, FRAC_PI_2)))
            .collect();
        PairSample { mode: SampleMode::InTube, seed, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}
