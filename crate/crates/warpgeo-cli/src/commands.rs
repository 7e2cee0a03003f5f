//! The subcommands. Each returns an [`Outcome`] whose witnesses decide the
//! exit status, or a [`Failure`] for configuration and solver errors.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde_json::{json, Value};
use warpgeo::convergence::{
    admits_monotone_selection, d_infinity_upper, diameter_bound, pointwise_convergence_scan, scan_brackets, ScanConfig,
};
use warpgeo::geometry::{Point, WarpFamily};
use warpgeo::measure::{
    extreme_volume_closed_form, fiber_length, hausdorff_dim_scan, tube_volume_scan, volume, volume_convergence,
    VERDICT_DIM_ONE,
};
use warpgeo::quadrature::QuadratureConfig;
use warpgeo::solver::{lambda_estimate, DistanceBracket, DistanceSolver};
use warpgeo::GeoError;

use crate::config::ExperimentConfig;
use crate::pairs::{parse_input, parse_pair, LineError, PairInput};
use crate::report::{num, Outcome, Table};

#[derive(Debug)]
pub enum Failure {
    /// Exit 2.
    Config { message: String, witness: Value },
    /// Exit 3.
    Solver { message: String, witness: Value },
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        let message = message.into();
        Failure::Config { witness: json!({ "reason": message }), message }
    }

    fn line_errors(source: &str, errors: Vec<LineError>) -> Self {
        Failure::Config {
            message: format!("{} bad line(s) in {source}", errors.len()),
            witness: json!({ "source": source, "lines": errors }),
        }
    }
}

impl From<GeoError> for Failure {
    fn from(e: GeoError) -> Self {
        Failure::Solver { message: e.to_string(), witness: json!({ "error": format!("{e:?}") }) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum WarpKind {
    Sequence,
    Extreme,
    Constant,
}

#[derive(Debug, Clone, clap::Args)]
pub struct DistArgs {
    /// Inline pair `r,theta,phi r,theta,phi`; repeatable.
    #[arg(long = "pair")]
    pub pair: Vec<String>,
    /// Text pair file (six numbers per line) or JSON batch manifest.
    #[arg(long = "pairs")]
    pub pairs: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "sequence")]
    pub warp: WarpKind,
    /// Sequence parameter; defaults to the schedule's first entry.
    #[arg(long)]
    pub a: Option<f64>,
    /// Fiber size of the constant warp.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Bracket every pair at every schedule entry.
    #[arg(long)]
    pub sweep: bool,
}

fn quad(cfg: &ExperimentConfig) -> QuadratureConfig {
    QuadratureConfig { tol: cfg.tolerances.quad, ..QuadratureConfig::default() }
}

fn schedule(cfg: &ExperimentConfig) -> Result<Vec<WarpFamily>, Failure> {
    cfg.schedule().map_err(|e| Failure::config(format!("{e:#}")))
}

fn a_of(w: &WarpFamily) -> f64 {
    match *w {
        WarpFamily::Sequence { a, .. } => a,
        _ => f64::NAN,
    }
}

fn point_json(p: &Point) -> Value {
    json!([p.r, p.theta, p.phi])
}

fn bracket_row(index: usize, b: &DistanceBracket) -> Vec<String> {
    vec![
        index.to_string(),
        num(b.p.r),
        num(b.p.theta),
        num(b.p.phi),
        num(b.q.r),
        num(b.q.theta),
        num(b.q.phi),
        num(b.lower),
        num(b.upper),
        format!("{:?}", b.lower_provenance),
        format!("{:?}", b.upper_provenance),
    ]
}

const BRACKET_COLUMNS: [&str; 11] =
    ["pair", "p_r", "p_theta", "p_phi", "q_r", "q_theta", "q_phi", "lower", "upper", "lower_provenance", "upper_provenance"];

fn read_pairs(args: &DistArgs) -> Result<PairInput, Failure> {
    let mut inline = Vec::new();
    let mut errors = Vec::new();
    for (i, text) in args.pair.iter().enumerate() {
        match parse_pair(text) {
            Ok(p) => inline.push(p),
            Err(message) => errors.push(LineError { line: i + 1, message }),
        }
    }
    if !errors.is_empty() {
        return Err(Failure::line_errors("--pair", errors));
    }
    if let Some(path) = &args.pairs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("reading pair file {}: {e}", path.display())))?;
        match parse_input(&text).map_err(|e| Failure::line_errors(&path.display().to_string(), e))? {
            PairInput::Manifest(m) if inline.is_empty() => return Ok(PairInput::Manifest(m)),
            PairInput::Manifest(_) => return Err(Failure::config("a batch manifest cannot be combined with --pair")),
            PairInput::Pairs(p) => inline.extend(p),
        }
    }
    if inline.is_empty() {
        return Err(Failure::config("no pairs given; use --pair or --pairs"));
    }
    Ok(PairInput::Pairs(inline))
}

pub fn dist(cfg: &ExperimentConfig, args: &DistArgs) -> Result<Outcome, Failure> {
    let pairs = match read_pairs(args)? {
        PairInput::Manifest(m) => {
            let out = m.run()?;
            let mut table = Table::new(&["pair", "lower", "upper", "lower_provenance", "upper_provenance"]);
            let mut witnesses = Vec::new();
            for r in &out.results {
                table.push(vec![
                    r.pair.to_string(),
                    num(r.lower),
                    num(r.upper),
                    format!("{:?}", r.provenance.lower),
                    format!("{:?}", r.provenance.upper),
                ]);
                if !(r.lower >= 0.0 && r.lower <= r.upper && r.upper.is_finite()) {
                    witnesses.push(json!({ "kind": "invalid_bracket", "record": r }));
                }
            }
            let result = json!({ "manifest": { "warp": m.warp, "spec": m.spec }, "batch": out });
            return Ok(Outcome { result, table, witnesses });
        }
        PairInput::Pairs(p) => p,
    };
    if args.sweep {
        return bracket_sweep(cfg, &pairs);
    }
    let first = schedule(cfg)?[0];
    let w = match args.warp {
        WarpKind::Sequence => WarpFamily::sequence(args.a.unwrap_or(a_of(&first)), cfg.beta),
        WarpKind::Extreme => WarpFamily::extreme(cfg.beta),
        WarpKind::Constant => WarpFamily::constant(args.c),
    }
    .map_err(|e| Failure::config(e.to_string()))?;
    let spec = cfg.grid.spec();
    let solver = DistanceSolver::new(w, spec)?;
    let brackets: Vec<DistanceBracket> = solver.brackets(&pairs, &[]).into_iter().collect::<Result<_, _>>()?;
    let mut table = Table::new(&BRACKET_COLUMNS);
    let mut witnesses = Vec::new();
    for (i, b) in brackets.iter().enumerate() {
        table.push(bracket_row(i, b));
        if !b.is_valid() {
            witnesses.push(json!({ "kind": "invalid_bracket", "pair": i, "bracket": b }));
        }
    }
    Ok(Outcome { result: json!({ "warp": w, "spec": spec, "brackets": brackets }), table, witnesses })
}

/// Brackets along the schedule with a per-pair monotonicity check.
fn bracket_sweep(cfg: &ExperimentConfig, pairs: &[(Point, Point)]) -> Result<Outcome, Failure> {
    let sched = schedule(cfg)?;
    let spec = cfg.grid.spec();
    let rows = scan_brackets(&sched, pairs, &spec)?;
    let mut table = Table::new(&["j", "a", "pair", "lower", "upper"]);
    for (j, (w, row)) in sched.iter().zip(&rows).enumerate() {
        for (i, b) in row.iter().enumerate() {
            table.push(vec![j.to_string(), num(a_of(w)), i.to_string(), num(b.lower), num(b.upper)]);
        }
    }
    let mut witnesses = Vec::new();
    let mut per_pair = Vec::new();
    for (i, (p, q)) in pairs.iter().enumerate() {
        let lower: Vec<f64> = rows.iter().map(|r| r[i].lower).collect();
        let upper: Vec<f64> = rows.iter().map(|r| r[i].upper).collect();
        let monotone = admits_monotone_selection(&lower, &upper, 1e-9);
        if !monotone || rows.iter().any(|r| !r[i].is_valid()) {
            witnesses.push(json!({ "kind": "non_monotone_brackets", "pair": i, "lower": lower, "upper": upper }));
        }
        per_pair.push(json!({ "p": point_json(p), "q": point_json(q), "lower": lower, "upper": upper, "monotone": monotone }));
    }
    let a: Vec<f64> = sched.iter().map(a_of).collect();
    Ok(Outcome { result: json!({ "spec": spec, "a": a, "pairs": per_pair }), table, witnesses })
}

pub fn volume_cmd(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let q = quad(cfg);
    let sched = schedule(cfg)?;
    let ext = WarpFamily::extreme(cfg.beta).map_err(|e| Failure::config(e.to_string()))?;
    let limit = volume(&ext, &q)?;
    let closed = extreme_volume_closed_form(cfg.beta);
    let conv = volume_convergence(&sched, cfg.beta, &q)?;
    let calibration = volume(&WarpFamily::constant(1.0)?, &q)?.value;
    let tube = tube_volume_scan(&ext, &[0.1, 0.01, 1e-3, 1e-4], &q)?;
    let t = &cfg.tolerances;
    let mut witnesses = Vec::new();
    if (limit.value - closed).abs() >= t.volume {
        witnesses.push(json!({ "kind": "limit_volume", "computed": limit.value, "closed_form": closed, "tol": t.volume }));
    }
    if (calibration - 8.0 * PI * PI).abs() >= t.volume {
        witnesses.push(json!({ "kind": "calibration_volume", "computed": calibration, "expected": 8.0 * PI * PI }));
    }
    if !conv.strictly_increasing {
        witnesses.push(json!({ "kind": "volumes_not_increasing", "volumes": conv.volumes }));
    }
    if !conv.bounded {
        witnesses.push(json!({ "kind": "volume_bound", "bound": conv.bound, "limit": conv.limit, "volumes": conv.volumes }));
    }
    if conv.final_relative_deficit >= t.volume_relative {
        witnesses.push(json!({
            "kind": "final_deficit",
            "relative_deficit": conv.final_relative_deficit,
            "tol": t.volume_relative
        }));
    }
    let mut table = Table::new(&["j", "a", "volume", "deficit"]);
    for (j, ((a, v), d)) in conv.a.iter().zip(&conv.volumes).zip(&conv.deficits).enumerate() {
        table.push(vec![j.to_string(), num(*a), num(*v), num(*d)]);
    }
    let tube: Vec<Value> = tube.iter().map(|(r, v)| json!({ "radius": r, "volume": v })).collect();
    let result = json!({
        "limit": limit,
        "closed_form": closed,
        "constant_calibration": calibration,
        "convergence": conv,
        "off_tube": tube,
    });
    Ok(Outcome { result, table, witnesses })
}

pub fn converge(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let sched = schedule(cfg)?;
    let t = &cfg.tolerances;
    let scan = ScanConfig { eps_grid: t.eps_grid, tol_uniform: t.uniform, tail: t.tail, tol_cauchy: t.cauchy };
    let spec = cfg.grid.spec();
    let r = pointwise_convergence_scan(&sched, &cfg.sample(), &spec, &scan)?;
    let mut witnesses: Vec<Value> = r
        .flagged
        .iter()
        .map(|&i| json!({ "kind": "flagged_pair", "trace": r.traces[i] }))
        .collect();
    if !r.converged() {
        witnesses.push(json!({ "kind": "final_gap", "gap": r.final_gap(), "tol": t.uniform }));
    }
    if !r.gap_decreasing() {
        witnesses.push(json!({ "kind": "gap_increase", "sup_gap": r.sup_gap, "slack": 2.0 * r.eps_grid }));
    }
    if r.graph_violations > 0 {
        witnesses.push(json!({ "kind": "graph_violations", "count": r.graph_violations }));
    }
    let a: Vec<f64> = sched.iter().map(a_of).collect();
    let mut table = Table::new(&["j", "a", "sup_gap", "gap_envelope", "gh_upper"]);
    for j in 0..r.sup_gap.len() {
        table.push(vec![j.to_string(), num(a[j]), num(r.sup_gap[j]), num(r.gap_envelope[j]), num(r.gh_upper[j])]);
    }
    let result = json!({
        "spec": spec,
        "pairs": r.traces.len(),
        "sample_seed": r.sample_seed,
        "eps_grid": r.eps_grid,
        "a": a,
        "sup_gap": r.sup_gap,
        "gap_envelope": r.gap_envelope,
        "gh_upper": r.gh_upper,
        "final_gap": r.final_gap(),
        "gap_decreasing": r.gap_decreasing(),
        "converged": r.converged(),
        "envelope_violations": r.envelope_violations,
        "graph_violations": r.graph_violations,
        "diameter_violations": r.diameter_violations,
        "diameter_bound": r.diameter_bound,
        "max_cauchy_tail": r.max_cauchy_tail,
        "flagged": r.flagged,
    });
    Ok(Outcome { result, table, witnesses })
}

pub fn hausdorff(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let h = &cfg.hausdorff;
    let sched = schedule(cfg)?;
    let v = hausdorff_dim_scan(&h.p_grid, &h.n_schedule, &h.fiber_n, &sched, h.n_partition, cfg.beta, &quad(cfg))?;
    let mut witnesses = Vec::new();
    let mut table = Table::new(&["p", "m", "n", "r_n", "h_upper", "admissible"]);
    for e in &v.entries {
        if let (Some(m), Some(x), Some(s)) = (e.m, e.exponent, e.slope) {
            if (s - x).abs() >= cfg.tolerances.slope || !e.vanishing {
                witnesses.push(json!({ "kind": "cover_scaling", "p": e.p, "m": m, "exponent": x, "slope": s }));
            }
        }
        for c in &e.covers {
            table.push(vec![num(c.p), c.m.to_string(), c.n.to_string(), num(c.r_n), num(c.h_upper), c.admissible.to_string()]);
        }
        for c in e.fiber_points.iter().filter(|c| c.admissible && !c.holds) {
            witnesses.push(json!({ "kind": "fiber_point", "check": c }));
        }
    }
    for e in v.partition.entries.iter().filter(|e| !e.exceeds_half) {
        witnesses.push(json!({ "kind": "partition_sum", "entry": e }));
    }
    if v.verdict != VERDICT_DIM_ONE {
        witnesses.push(json!({ "kind": "verdict", "verdict": v.verdict, "expected": VERDICT_DIM_ONE }));
    }
    Ok(Outcome { result: serde_json::to_value(&v).expect("verdict serializes"), table, witnesses })
}

pub fn bounds(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let sched = schedule(cfg)?;
    let w = *sched.last().expect("schedule is nonempty");
    let spec = cfg.grid.spec();
    let mut witnesses = Vec::new();
    let mut table = Table::new(&["radius", "bound", "estimate", "estimate_certified", "eps_grid", "holds"]);
    let mut lambda = Vec::new();
    for &radius in &cfg.bounds.radii {
        let mut r = lambda_estimate(&w, radius, &spec, cfg.bounds.samples, cfg.seed)?;
        table.push(vec![
            num(radius),
            num(r.bound),
            num(r.estimate),
            num(r.estimate_certified),
            num(r.eps_grid),
            r.holds.to_string(),
        ]);
        if !r.holds {
            witnesses.push(json!({ "kind": "lambda", "radius": radius, "estimate": r.estimate, "bound": r.bound, "worst": r.worst }));
        }
        r.contributions.clear();
        lambda.push(r);
    }
    let dcap = diameter_bound(cfg.beta);
    let mut max_upper: f64 = 0.0;
    let sample = cfg.sample();
    for (p, q) in &sample.pairs {
        let u = d_infinity_upper(cfg.beta, p, q)?;
        max_upper = max_upper.max(u);
        if u > dcap {
            witnesses.push(json!({ "kind": "diameter", "p": point_json(p), "q": point_json(q), "upper": u, "bound": dcap }));
        }
    }
    let result = json!({
        "warp": w,
        "spec": spec,
        "lambda": lambda,
        "diameter": { "bound": dcap, "pairs": sample.pairs.len(), "max_upper": max_upper },
    });
    Ok(Outcome { result, table, witnesses })
}

/// Volumes, fiber lengths and brackets of the given pairs over the
/// schedule, one row per entry and pair.
pub fn sweep(cfg: &ExperimentConfig, args: &DistArgs) -> Result<Outcome, Failure> {
    let pairs = if args.pair.is_empty() && args.pairs.is_none() {
        vec![(Point::new(PI / 2.0, 0.0, 0.0), Point::new(PI / 2.0, 0.0, PI))]
    } else {
        match read_pairs(args)? {
            PairInput::Pairs(p) => p,
            PairInput::Manifest(_) => return Err(Failure::config("sweep takes pairs, not a batch manifest")),
        }
    };
    let sched = schedule(cfg)?;
    let q = quad(cfg);
    let volumes: Vec<f64> = sched.iter().map(|w| volume(w, &q).map(|v| v.value)).collect::<Result<_, _>>()?;
    let fibers: Vec<f64> = sched.iter().map(|w| fiber_length(w, 0.0)).collect::<Result<_, _>>()?;
    let spec = cfg.grid.spec();
    let rows = scan_brackets(&sched, &pairs, &spec)?;
    let mut witnesses = Vec::new();
    if !volumes.windows(2).all(|v| v[1] > v[0]) {
        witnesses.push(json!({ "kind": "volumes_not_increasing", "volumes": volumes }));
    }
    if !fibers.windows(2).all(|v| v[1] > v[0]) {
        witnesses.push(json!({ "kind": "fibers_not_increasing", "fiber_lengths": fibers }));
    }
    for i in 0..pairs.len() {
        let lower: Vec<f64> = rows.iter().map(|r| r[i].lower).collect();
        let upper: Vec<f64> = rows.iter().map(|r| r[i].upper).collect();
        if !admits_monotone_selection(&lower, &upper, 1e-9) {
            witnesses.push(json!({ "kind": "non_monotone_brackets", "pair": i, "lower": lower, "upper": upper }));
        }
    }
    let mut table = Table::new(&["j", "a", "volume", "fiber_length", "pair", "lower", "upper"]);
    for (j, w) in sched.iter().enumerate() {
        for (i, b) in rows[j].iter().enumerate() {
            table.push(vec![
                j.to_string(),
                num(a_of(w)),
                num(volumes[j]),
                num(fibers[j]),
                i.to_string(),
                num(b.lower),
                num(b.upper),
            ]);
        }
    }
    let a: Vec<f64> = sched.iter().map(a_of).collect();
    let brackets: Vec<Value> = (0..pairs.len())
        .map(|i| {
            json!({
                "p": point_json(&pairs[i].0),
                "q": point_json(&pairs[i].1),
                "lower": rows.iter().map(|r| r[i].lower).collect::<Vec<_>>(),
                "upper": rows.iter().map(|r| r[i].upper).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(Outcome { result: json!({ "a": a, "volumes": volumes, "fiber_lengths": fibers, "pairs": brackets }), table, witnesses })
}
