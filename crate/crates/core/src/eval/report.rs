//! Tracking error metrics and the per-run report.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::filter::TrackerStats;
use crate::geometry::Point2D;
use crate::simulator::Measurement;

/// Error thresholds of the CDF table, meters.
pub const CDF_THRESHOLDS_M: [f64; 12] =
    [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0];

/// Ground-truth fixes from a log, linearly interpolated in time.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    fixes: Vec<(f64, Point2D)>,
}

impl GroundTruth {
    pub fn from_log(log: &[Measurement]) -> Self {
        let mut fixes: Vec<(f64, Point2D)> = log
            .iter()
            .filter_map(|m| match *m {
                Measurement::Gt { t, x, y } => Some((t, Point2D::new(x, y))),
                _ => None,
            })
            .collect();
        fixes.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { fixes }
    }

    pub fn is_empty(&self) -> bool {
        self.fixes.is_empty()
    }

    pub fn first(&self) -> Option<Point2D> {
        self.fixes.first().map(|f| f.1)
    }

    /// Position at `t`, or `None` outside the covered time span. With
    /// several fixes at the same instant the last one wins.
    pub fn at(&self, t: f64) -> Option<Point2D> {
        let (first, last) = (self.fixes.first()?, self.fixes.last()?);
        if t < first.0 || t > last.0 {
            return None;
        }
        let i = self.fixes.partition_point(|f| f.0 <= t);
        let (t0, p0) = self.fixes[i - 1];
        if t0 == t || i == self.fixes.len() {
            return Some(p0);
        }
        let (t1, p1) = self.fixes[i];
        let f = (t - t0) / (t1 - t0);
        Some(Point2D::new(
            p0.x + f * (p1.x - p0.x),
            p0.y + f * (p1.y - p0.y),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub gt_x: Option<f64>,
    pub gt_y: Option<f64>,
    pub error_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean_error_m: f64,
    pub median_error_m: f64,
    pub p90_error_m: f64,
    pub max_error_m: f64,
    /// `(threshold_m, fraction of rows with error <= threshold)`.
    pub cdf: Vec<(f64, f64)>,
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Summary {
    pub fn from_errors(errors: &[f64]) -> Self {
        let mut sorted = errors.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = if n == 0 {
            f64::NAN
        } else {
            crate::numeric::stable_sum(&sorted) / n as f64
        };
        let cdf = CDF_THRESHOLDS_M
            .iter()
            .map(|&th| {
                let below = sorted.partition_point(|&e| e <= th);
                (th, if n == 0 { 0.0 } else { below as f64 / n as f64 })
            })
            .collect();
        Summary {
            count: n,
            mean_error_m: mean,
            median_error_m: percentile(&sorted, 0.5),
            p90_error_m: percentile(&sorted, 0.9),
            max_error_m: sorted.last().copied().unwrap_or(f64::NAN),
            cdf,
        }
    }

    pub fn from_rows(rows: &[Row]) -> Self {
        let errors: Vec<f64> = rows.iter().filter_map(|r| r.error_m).collect();
        Self::from_errors(&errors)
    }
}

/// Wall-clock cost of correct + resample. Not part of the serialized
/// report, which must be reproducible byte for byte.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub updates: usize,
    pub mean_update_ms: f64,
    pub max_update_ms: f64,
}

impl Timing {
    pub fn from_samples(ms: &[f64]) -> Self {
        if ms.is_empty() {
            return Self::default();
        }
        Self {
            updates: ms.len(),
            mean_update_ms: ms.iter().sum::<f64>() / ms.len() as f64,
            max_update_ms: ms.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub mode: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub summary: Summary,
    /// Rows without ground-truth coverage; excluded from the summary.
    pub uncovered_rows: usize,
    pub stats: TrackerStats,
    pub rows: Vec<Row>,
    #[serde(skip)]
    pub timing: Timing,
}

impl TrackReport {
    pub fn mean_error(&self) -> f64 {
        self.summary.mean_error_m
    }

    /// Mean error of the rows whose time falls in the given fraction of the
    /// run, e.g. `(0.2, 0.3)`.
    pub fn mean_error_between(&self, from: f64, to: f64) -> f64 {
        let (Some(first), Some(last)) = (self.rows.first(), self.rows.last()) else {
            return f64::NAN;
        };
        let span = last.t - first.t;
        let (lo, hi) = (first.t + from * span, first.t + to * span);
        let errs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.t >= lo && r.t <= hi)
            .filter_map(|r| r.error_m)
            .collect();
        if errs.is_empty() {
            f64::NAN
        } else {
            errs.iter().sum::<f64>() / errs.len() as f64
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn write_rows_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "x", "y", "theta", "gt_x", "gt_y", "error_m"])
            .map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            out.write_record([
                r.t.to_string(),
                r.x.to_string(),
                r.y.to_string(),
                r.theta.to_string(),
                opt(r.gt_x),
                opt(r.gt_y),
                opt(r.error_m),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Io(std::io::Error::other(e))
}

/// Scores an externally produced trajectory `(t, x, y)` against a log's
/// ground truth. Returns the rows and how many fell outside GT coverage.
pub fn score_trajectory(traj: &[(f64, f64, f64)], gt: &GroundTruth) -> (Vec<Row>, usize) {
    let mut uncovered = 0;
    let rows = traj
        .iter()
        .map(|&(t, x, y)| {
            let g = gt.at(t);
            if g.is_none() {
                uncovered += 1;
            }
            Row {
                t,
                x,
                y,
                theta: f64::NAN,
                gt_x: g.map(|p| p.x),
                gt_y: g.map(|p| p.y),
                error_m: g.map(|p| p.distance(&Point2D::new(x, y))),
            }
        })
        .collect();
    (rows, uncovered)
}

/// Reads a `t,x,y` CSV trajectory with a header row.
pub fn read_trajectory_csv<R: std::io::Read>(reader: R) -> Result<Vec<(f64, f64, f64)>> {
    #[derive(Deserialize)]
    struct Fix {
        t: f64,
        x: f64,
        y: f64,
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    rdr.deserialize::<Fix>()
        .enumerate()
        .map(|(i, fix)| {
            fix.map(|f| (f.t, f.x, f.y))
                .map_err(|e| crate::error::Error::MalformedLog {
                    line: Some(i + 2),
                    msg: e.to_string(),
                })
        })
        .collect()
}
