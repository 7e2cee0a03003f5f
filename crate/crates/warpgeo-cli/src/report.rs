//! Report envelopes and their JSON and CSV renderings.

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Format};

pub const REPORT_SCHEMA: &str = "warpgeo.report.v1";

/// Rows for the CSV rendering; cells are already formatted.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// What a command produced; it passed iff there are no witnesses.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: Value,
    pub table: Table,
    pub witnesses: Vec<Value>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema: &'static str,
    command: &'a str,
    version: &'static str,
    seed: u64,
    status: &'static str,
    config: &'a ExperimentConfig,
    result: &'a Value,
    witnesses: &'a [Value],
}

fn status(o: &Outcome) -> &'static str {
    if o.witnesses.is_empty() {
        "ok"
    } else {
        "invariant_failure"
    }
}

/// Renders the report. No timings or host details enter the output, so a
/// rerun with the same config and seed is byte-identical.
pub fn render(command: &str, cfg: &ExperimentConfig, o: &Outcome, format: Format) -> String {
    match format {
        Format::Json => {
            let env = Envelope {
                schema: REPORT_SCHEMA,
                command,
                version: env!("CARGO_PKG_VERSION"),
                seed: cfg.seed,
                status: status(o),
                config: cfg,
                result: &o.result,
                witnesses: &o.witnesses,
            };
            let mut s = serde_json::to_string_pretty(&env).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = format!(
                "# schema={REPORT_SCHEMA} command={command} version={} seed={} status={} witnesses={}\n",
                env!("CARGO_PKG_VERSION"),
                cfg.seed,
                status(o),
                o.witnesses.len()
            );
            s.push_str(&format!("# beta={} grid={}x{}x{}\n", cfg.beta, cfg.grid.n_r, cfg.grid.n_theta, cfg.grid.n_phi));
            s.push_str(&format!("# tolerances={}\n", serde_json::to_string(&cfg.tolerances).expect("tolerances serialize")));
            s.push_str(&o.table.columns.join(","));
            s.push('\n');
            for row in &o.table.rows {
                s.push_str(&row.join(","));
                s.push('\n');
            }
            s
        }
    }
}

/// The machine-readable error line for exits 2 and 3.
pub fn error_report(kind: &str, message: &str, witness: Value) -> String {
    let v = json!({
        "schema": REPORT_SCHEMA,
        "status": kind,
        "error": message,
        "witness": witness,
    });
    serde_json::to_string(&v).expect("error report serializes")
}

pub fn num(x: f64) -> String {
    format!("{x}")
}
