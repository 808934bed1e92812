//! Classify a two-dimensional field over a rectangular grid and serialise
//! the result as CSV.
//!
//! The grid follows the linspace convention: `res` samples per axis
//! including both endpoints (a single sample sits at the lower-left
//! corner), rows written in row-major order with `x` varying fastest.
//! Cells where the probe point itself is not evaluable are tagged
//! `domain_error`; a scan never aborts on a bad cell.

use std::io::{self, Write};

use serde::Serialize;

use crate::expr::ScalarField;
use crate::parallel::map_collect;
use crate::probe::{classify, InconclusiveReason, ProbeConfig, Verdict};

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error("scan fields must be two-dimensional, got arity {0}")]
    Arity(usize),
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("invalid config: {0}")]
    Config(String),
}

/// Rectangular grid: `res` samples per axis over `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub res: usize,
}

impl Grid {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64, res: usize) -> Result<Grid, ScanError> {
        if ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(ScanError::BadGrid("bounds must be finite".into()));
        }
        if x0 > x1 || y0 > y1 {
            return Err(ScanError::BadGrid(
                "bounds must satisfy x0 <= x1 and y0 <= y1".into(),
            ));
        }
        if res == 0 {
            return Err(ScanError::BadGrid("resolution must be at least 1".into()));
        }
        Ok(Grid {
            x0,
            x1,
            y0,
            y1,
            res,
        })
    }

    fn axis(&self, lo: f64, hi: f64) -> Vec<f64> {
        if self.res == 1 {
            return vec![lo];
        }
        (0..self.res)
            .map(|i| {
                if i == self.res - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (self.res - 1) as f64
                }
            })
            .collect()
    }
}

/// Cell verdict tag; `DomainError` marks cells where classification could
/// not start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellVerdict {
    Derivable,
    NotDerivable,
    Inconclusive,
    DomainError,
}

impl CellVerdict {
    pub fn tag(self) -> &'static str {
        match self {
            CellVerdict::Derivable => "derivable",
            CellVerdict::NotDerivable => "not_derivable",
            CellVerdict::Inconclusive => "inconclusive",
            CellVerdict::DomainError => "domain_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanCell {
    pub point: [f64; 2],
    pub verdict: CellVerdict,
    /// Estimate components for derivable cells.
    pub estimate: Option<[f64; 2]>,
    /// Residual for derivable cells, separation for not-derivable ones.
    pub figure: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<InconclusiveReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScanSummary {
    pub cells: usize,
    pub derivable: usize,
    pub not_derivable: usize,
    pub inconclusive: usize,
    pub domain_error: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub grid: Grid,
    pub cells: Vec<ScanCell>,
}

impl ScanResult {
    pub fn summary(&self) -> ScanSummary {
        let mut s = ScanSummary {
            cells: self.cells.len(),
            derivable: 0,
            not_derivable: 0,
            inconclusive: 0,
            domain_error: 0,
        };
        for cell in &self.cells {
            match cell.verdict {
                CellVerdict::Derivable => s.derivable += 1,
                CellVerdict::NotDerivable => s.not_derivable += 1,
                CellVerdict::Inconclusive => s.inconclusive += 1,
                CellVerdict::DomainError => s.domain_error += 1,
            }
        }
        s
    }

    /// Header plus `res^2` rows: `point_x,point_y,verdict,est_1,est_2,
    /// residual_or_separation`, empty fields where not applicable.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "point_x,point_y,verdict,est_1,est_2,residual_or_separation"
        )?;
        for cell in &self.cells {
            let (e1, e2) = match cell.estimate {
                Some([a, b]) => (a.to_string(), b.to_string()),
                None => (String::new(), String::new()),
            };
            let figure = cell.figure.map_or(String::new(), |v| v.to_string());
            writeln!(
                w,
                "{},{},{},{},{},{}",
                cell.point[0],
                cell.point[1],
                cell.verdict.tag(),
                e1,
                e2,
                figure
            )?;
        }
        Ok(())
    }
}

/// Classify every grid cell. Cells run concurrently when the config asks
/// for it; the cell order is row-major either way.
pub fn scan(
    field: &ScalarField,
    grid: &Grid,
    config: &ProbeConfig,
) -> Result<ScanResult, ScanError> {
    if field.arity() != 2 {
        return Err(ScanError::Arity(field.arity()));
    }
    config
        .validate()
        .map_err(|e| ScanError::Config(e.to_string()))?;
    let xs = grid.axis(grid.x0, grid.x1);
    let ys = grid.axis(grid.y0, grid.y1);
    let mut points = Vec::with_capacity(grid.res * grid.res);
    for &y in &ys {
        for &x in &xs {
            points.push([x, y]);
        }
    }
    // Parallelism lives at the cell level; per-cell ladders run inline.
    // Verdicts do not depend on either switch.
    let cell_config = ProbeConfig {
        parallel: false,
        ..config.clone()
    };
    let cells = map_collect(config.parallel, points, |point| {
        match classify(field, &point, &cell_config) {
            Ok(Verdict::Derivable { estimate, residual }) => ScanCell {
                point,
                verdict: CellVerdict::Derivable,
                estimate: Some([estimate.components()[0], estimate.components()[1]]),
                figure: Some(residual),
                reason: None,
            },
            Ok(Verdict::NotDerivable { separation, .. }) => ScanCell {
                point,
                verdict: CellVerdict::NotDerivable,
                estimate: None,
                figure: Some(separation),
                reason: None,
            },
            Ok(Verdict::Inconclusive { reason }) => ScanCell {
                point,
                verdict: CellVerdict::Inconclusive,
                estimate: None,
                figure: None,
                reason: Some(reason),
            },
            Err(_) => ScanCell {
                point,
                verdict: CellVerdict::DomainError,
                estimate: None,
                figure: None,
                reason: None,
            },
        }
    });
    Ok(ScanResult { grid: *grid, cells })
}
