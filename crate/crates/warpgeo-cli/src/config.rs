//! Experiment configuration: TOML for people, JSON for tooling.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};
use warpgeo::geometry::{geometric_schedule, WarpFamily};
use warpgeo::grid::{GridSpec, Stencil};
use warpgeo::sample::PairSample;

pub const CONFIG_SCHEMA: &str = "warpgeo.config.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Stratified,
    Uniform,
    NearSingular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// `a_j = a0 · 2^{-j}` for `j = 0..=jmax` unless `explicit` is given.
    pub a0: f64,
    pub jmax: usize,
    pub explicit: Option<Vec<f64>>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { a0: 1.0, jmax: 20, explicit: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_r: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub restriction: Option<f64>,
    pub stencil: Stencil,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_r: 48, n_theta: 48, n_phi: 48, restriction: None, stencil: Stencil::Full }
    }
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            n_r: self.n_r,
            n_theta: self.n_theta,
            n_phi: self.n_phi,
            restriction: self.restriction,
            stencil: self.stencil,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute quadrature tolerance.
    pub quad: f64,
    /// Absolute tolerance on the limit volume.
    pub volume: f64,
    /// Relative tolerance of the last sequence volume against the limit.
    pub volume_relative: f64,
    /// Final uniform gap.
    pub uniform: f64,
    /// Spread of the uppers over the trailing schedule entries.
    pub cauchy: f64,
    pub tail: usize,
    /// Log-log slope against the covering exponent.
    pub slope: f64,
    /// Grid error; calibrated on the isometric product when absent.
    pub eps_grid: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            quad: 1e-10,
            volume: 1e-6,
            volume_relative: 1e-3,
            uniform: 0.05,
            cauchy: 0.05,
            tail: 5,
            slope: 1e-6,
            eps_grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub kind: SampleKind,
    pub pairs: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { kind: SampleKind::Stratified, pairs: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HausdorffConfig {
    pub p_grid: Vec<f64>,
    pub n_schedule: Vec<u64>,
    /// Fiber-point counts for the measured distance check.
    pub fiber_n: Vec<u64>,
    pub n_partition: u64,
}

impl Default for HausdorffConfig {
    fn default() -> Self {
        HausdorffConfig {
            p_grid: vec![1.1, 1.5, 2.0, 3.0],
            n_schedule: (6..=16).step_by(2).map(|k| 1u64 << k).collect(),
            fiber_n: (6..=12).map(|k| 1u64 << k).collect(),
            n_partition: 1 << 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub radii: Vec<f64>,
    /// Pairs per radius for the λ estimate.
    pub samples: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { radii: vec![0.4, 0.2, 0.1, 0.05], samples: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { path: None, format: Format::Json }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub beta: f64,
    pub schedule: ScheduleConfig,
    pub grid: GridConfig,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub sample: SampleConfig,
    pub hausdorff: HausdorffConfig,
    pub bounds: BoundsConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema: CONFIG_SCHEMA.into(),
            beta: 2.0,
            schedule: ScheduleConfig::default(),
            grid: GridConfig::default(),
            tolerances: Tolerances::default(),
            seed: 1,
            sample: SampleConfig::default(),
            hausdorff: HausdorffConfig::default(),
            bounds: BoundsConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Named scan sizes for `converge`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Small,
    Medium,
    Acceptance,
}

impl ExperimentConfig {
    /// Reads TOML, or JSON when the file is `.json` or starts with `{`.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        let cfg: ExperimentConfig = if json {
            serde_json::from_str(&text).with_context(|| format!("parsing JSON config {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing TOML config {}", path.display()))?
        };
        Ok(cfg)
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        // the Cauchy tail needs the full schedule, so presets differ only in
        // resolution and sample size
        let (n, pairs, jmax) = match preset {
            Preset::Small => (24, 16, 20),
            Preset::Medium => (48, 64, 20),
            Preset::Acceptance => (96, 512, 20),
        };
        self.grid = GridConfig { n_r: n, n_theta: n, n_phi: n, ..self.grid.clone() };
        self.sample.pairs = pairs;
        self.schedule.jmax = jmax;
    }

    /// Checks every precondition the commands rely on.
    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(self.schema == CONFIG_SCHEMA, "schema must be \"{CONFIG_SCHEMA}\", got \"{}\"", self.schema);
        ensure!(self.beta.is_finite() && self.beta >= 2.0, "beta must be a finite number >= 2, got {}", self.beta);
        self.schedule()?;
        self.grid.spec().validate().context("grid")?;
        let t = &self.tolerances;
        for (name, v) in [
            ("quad", t.quad),
            ("volume", t.volume),
            ("volume_relative", t.volume_relative),
            ("uniform", t.uniform),
            ("cauchy", t.cauchy),
            ("slope", t.slope),
        ] {
            ensure!(v.is_finite() && v > 0.0, "tolerance {name} must be positive, got {v}");
        }
        ensure!(t.tail >= 1, "tolerance tail must be at least 1");
        if let Some(e) = t.eps_grid {
            ensure!(e.is_finite() && e >= 0.0, "eps_grid must be nonnegative, got {e}");
        }
        ensure!(self.sample.pairs >= 1, "sample.pairs must be at least 1");
        let h = &self.hausdorff;
        ensure!(h.p_grid.iter().all(|p| p.is_finite() && *p > 0.0), "hausdorff.p_grid entries must be positive");
        ensure!(h.n_schedule.len() >= 2, "hausdorff.n_schedule needs at least two entries for a slope");
        ensure!(h.n_schedule.windows(2).all(|w| w[0] < w[1]), "hausdorff.n_schedule must be strictly increasing");
        ensure!(h.n_schedule.iter().chain(&h.fiber_n).all(|&n| n >= 1), "fiber point counts must be positive");
        ensure!(h.n_partition >= 1, "hausdorff.n_partition must be positive");
        ensure!(!self.bounds.radii.is_empty(), "bounds.radii must not be empty");
        for &r in &self.bounds.radii {
            ensure!(r > 0.0 && r < FRAC_PI_2, "bounds.radii entries must lie in (0, pi/2), got {r}");
        }
        ensure!(self.bounds.samples >= 1, "bounds.samples must be at least 1");
        Ok(())
    }

    /// The warp schedule, strictly decreasing in `a`.
    pub fn schedule(&self) -> anyhow::Result<Vec<WarpFamily>> {
        let s = &self.schedule;
        match &s.explicit {
            Some(list) => {
                ensure!(!list.is_empty(), "schedule.explicit must not be empty");
                ensure!(list.windows(2).all(|w| w[1] < w[0]), "schedule.explicit must be strictly decreasing");
                list.iter().map(|&a| WarpFamily::sequence(a, self.beta).map_err(Into::into)).collect()
            }
            None => {
                ensure!(s.a0.is_finite() && s.a0 > 0.0, "schedule.a0 must be positive, got {}", s.a0);
                if s.jmax > 60 {
                    bail!("schedule.jmax must be at most 60, got {}", s.jmax);
                }
                Ok(geometric_schedule(s.a0, s.jmax, self.beta)?)
            }
        }
    }

    pub fn sample(&self) -> PairSample {
        match self.sample.kind {
            SampleKind::Stratified => PairSample::stratified(self.sample.pairs, self.seed),
            SampleKind::Uniform => PairSample::uniform(self.sample.pairs, self.seed),
            SampleKind::NearSingular => PairSample::near_singular(self.sample.pairs, self.seed),
        }
    }
}

/// Parses `NxNxN` (or a single `N`).
pub fn parse_grid(text: &str) -> anyhow::Result<(usize, usize, usize)> {
    let parts: Vec<&str> = text.split(['x', 'X']).collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("grid axis \"{p}\" is not a positive integer")))
        .collect::<anyhow::Result<_>>()?;
    match nums[..] {
        [n] => Ok((n, n, n)),
        [a, b, c] => Ok((a, b, c)),
        _ => bail!("grid must look like NxNxN, got \"{text}\""),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let toml_text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<ExperimentConfig>(&toml_text).unwrap(), cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = ExperimentConfig { beta: 1.0, ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.beta = 2.0;
        cfg.schedule.explicit = Some(vec![0.5, 1.0]);
        assert!(cfg.validate().is_err());
        cfg.schedule.explicit = None;
        cfg.schema = "other".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("32x24x16").unwrap(), (32, 24, 16));
        assert_eq!(parse_grid("40").unwrap(), (40, 40, 40));
        assert!(parse_grid("4x4").is_err());
        assert!(parse_grid("ax4x4").is_err());
    }
}
