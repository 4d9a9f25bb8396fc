//! Plain XYZ files: a count line, a free-text comment line, then one
//! `x y z` line per point.

use std::fmt::Write as _;

use thiserror::Error;

use super::{GeometryError, PointCloud, Vec3};

#[derive(Debug, Error)]
pub enum XyzError {
    #[error("missing count line")]
    MissingCount,
    #[error("bad count line {0:?}")]
    BadCount(String),
    #[error("expected {expected} coordinate lines, found {found}")]
    WrongCount { expected: usize, found: usize },
    #[error("line {line}: expected three coordinates, got {got:?}")]
    BadLine { line: usize, got: String },
    #[error("line {line}: non-finite coordinate")]
    NonFinite { line: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub fn parse(text: &str) -> Result<(PointCloud, String), XyzError> {
    let mut lines = text.lines();
    let count_line = lines.next().ok_or(XyzError::MissingCount)?;
    let n: usize = count_line
        .trim()
        .parse()
        .map_err(|_| XyzError::BadCount(count_line.to_string()))?;
    let comment = lines.next().unwrap_or("").to_string();
    let body: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    if body.len() != n {
        return Err(XyzError::WrongCount {
            expected: n,
            found: body.len(),
        });
    }
    let mut points = Vec::with_capacity(n);
    for (k, line) in body.iter().enumerate() {
        let lineno = k + 3;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed: Option<Vec<f64>> = (fields.len() == 3)
            .then(|| fields.iter().map(|f| f.parse::<f64>().ok()).collect())
            .flatten();
        let coords = parsed.ok_or_else(|| XyzError::BadLine {
            line: lineno,
            got: line.to_string(),
        })?;
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(XyzError::NonFinite { line: lineno });
        }
        points.push(Vec3::new(coords[0], coords[1], coords[2]));
    }
    Ok((PointCloud::new(points)?, comment))
}

/// Shortest round-trip formatting, so emitted files reload bit-identically.
pub fn format(cloud: &PointCloud, comment: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", cloud.len());
    let _ = writeln!(out, "{}", comment.replace('\n', " "));
    for p in cloud.points() {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    out
}
