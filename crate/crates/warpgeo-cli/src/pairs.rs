//! Pair input: inline pairs, text pair files, and JSON batch manifests.

use std::f64::consts::PI;

use serde::Serialize;
use warpgeo::geometry::Point;
use warpgeo::solver::BatchManifest;

/// One rejected line of a pair file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug)]
pub enum PairInput {
    Pairs(Vec<(Point, Point)>),
    Manifest(BatchManifest),
}

fn point(v: &[f64]) -> Result<Point, String> {
    let (r, theta, phi) = (v[0], v[1], v[2]);
    if !(0.0..=PI).contains(&r) {
        return Err(format!("r = {r} lies outside [0, pi]"));
    }
    if !theta.is_finite() || !phi.is_finite() {
        return Err("angles must be finite".into());
    }
    Ok(Point::new(r, theta, phi))
}

/// Six numbers `r θ φ r θ φ`, separated by whitespace, commas or semicolons.
pub fn parse_pair(text: &str) -> Result<(Point, Point), String> {
    let fields: Vec<&str> = text.split(|c: char| c.is_whitespace() || c == ',' || c == ';').filter(|s| !s.is_empty()).collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 numbers (r theta phi r theta phi), got {}", fields.len()));
    }
    let nums: Vec<f64> = fields
        .iter()
        .map(|f| f.parse::<f64>().map_err(|_| format!("\"{f}\" is not a number")))
        .collect::<Result<_, _>>()?;
    Ok((point(&nums[..3])?, point(&nums[3..])?))
}

/// Text pair file: one pair per line, `#` starts a comment. All bad lines
/// are reported, not just the first.
pub fn parse_pair_file(text: &str) -> Result<Vec<(Point, Point)>, Vec<LineError>> {
    let mut pairs = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match parse_pair(line) {
            Ok(p) => pairs.push(p),
            Err(message) => errors.push(LineError { line: i + 1, message }),
        }
    }
    if errors.is_empty() && pairs.is_empty() {
        errors.push(LineError { line: 0, message: "pair file holds no pairs".into() });
    }
    if errors.is_empty() {
        Ok(pairs)
    } else {
        Err(errors)
    }
}

/// A JSON manifest when the text opens with `{`, a pair list otherwise.
pub fn parse_input(text: &str) -> Result<PairInput, Vec<LineError>> {
    if text.trim_start().starts_with('{') {
        return BatchManifest::from_json(text)
            .map(PairInput::Manifest)
            .map_err(|e| vec![LineError { line: 0, message: e.to_string() }]);
    }
    parse_pair_file(text).map(PairInput::Pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_pairs_and_comments() {
        let text = "# header\n0 0 0  3.141592653589793 0 0\n1.0,2.0,3.0 ; 0.5 0.5 0.5  # trailing\n\n";
        let pairs = parse_pair_file(text).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[1].0, Point::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn reports_every_bad_line() {
        let errs = parse_pair_file("0 0 0 1 1\n0 0 0 1 1 1\n4 0 0 1 1 1\nx 0 0 1 1 1\n").unwrap_err();
        let lines: Vec<usize> = errs.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![1, 3, 4]);
        assert!(errs[1].message.contains("outside"));
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(parse_pair_file("# nothing\n").is_err());
    }
}
