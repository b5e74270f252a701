//! RSS sequences and the WKNN observation model.
//!
//! For each scan the `k` map cells whose location sequences best match the
//! scan's RSS sequence are selected once; every particle is then weighted by
//! a similarity-weighted sum of Gaussian kernels centred on those cells.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2D;
use crate::motion::Pose;
use crate::seqmap::{nearest_cells, ApId, ApSequence, FingerprintMap};
use crate::similarity::{aligned_sim, RssVector};

/// Lower clamp on any likelihood value, so a narrow kernel cannot zero every
/// particle weight at once.
pub const LIKELIHOOD_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WifiScan {
    pub timestamp: f64,
    pub readings: RssVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationConfig {
    /// Number of neighbours in the WKNN sum.
    pub k: usize,
    /// Kernel bandwidth: squared meters per unit of `d^2`, i.e. the kernel
    /// variance. The default of 10 m^2 (std about 3.2 m) matches the typical
    /// position error of a single noisy sequence match. Kernels much
    /// narrower than the grid snap particles onto single cell centroids and
    /// lose track under RSS noise.
    pub lambda: f64,
    /// Scans hearing fewer known APs than this are skipped.
    pub min_common_aps: usize,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self {
            k: 4,
            lambda: 10.0,
            min_common_aps: 3,
        }
    }
}

impl ObservationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be >= 1"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if self.min_common_aps < 2 {
            return Err(Error::config("min_common_aps must be >= 2"));
        }
        Ok(())
    }
}

/// Ranks the scanned APs by RSS, strongest first; ties go to the lower id.
pub fn rss_sequence(scan: &WifiScan, min_common_aps: usize) -> Result<ApSequence> {
    let required = min_common_aps.max(2);
    if scan.readings.len() < required {
        return Err(Error::ScanSkipped {
            readings: scan.readings.len(),
            required,
        });
    }
    let mut ranked: Vec<(ApId, f64)> = scan.readings.iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ApSequence::new(ranked.into_iter().map(|(id, _)| id).collect())
}

/// The per-scan neighbour set: anchor positions with their similarity to the
/// scan. Computed once per scan and read by every particle.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Neighbors {
    anchors: Vec<(Point2D, f64)>,
}

impl Neighbors {
    pub fn new(anchors: Vec<(Point2D, f64)>) -> Self {
        Self { anchors }
    }

    pub fn anchors(&self) -> &[(Point2D, f64)] {
        &self.anchors
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// Unclamped kernel sum at `(x, y)`; may underflow to zero.
    pub fn raw_likelihood(&self, x: f64, y: f64, lambda: f64) -> f64 {
        self.anchors
            .iter()
            .map(|(a, s)| {
                let d2 = ((x - a.x).powi(2) + (y - a.y).powi(2)) / lambda;
                s * (-0.5 * d2).exp()
            })
            .sum()
    }

    /// Kernel sum clamped below at [`LIKELIHOOD_FLOOR`].
    pub fn likelihood(&self, x: f64, y: f64, lambda: f64) -> f64 {
        self.raw_likelihood(x, y, lambda).max(LIKELIHOOD_FLOOR)
    }
}

/// Anything that can turn a scan into a neighbour set.
pub trait ObservationModel: Send + Sync {
    fn neighbors(&self, scan: &WifiScan, cfg: &ObservationConfig) -> Result<Neighbors>;

    fn name(&self) -> &'static str;
}

/// Rank-similarity model over a training-free [`FingerprintMap`].
#[derive(Debug, Clone)]
pub struct SequenceModel {
    map: Arc<FingerprintMap>,
}

impl SequenceModel {
    pub fn new(map: Arc<FingerprintMap>) -> Self {
        Self { map }
    }

    pub fn map(&self) -> &FingerprintMap {
        &self.map
    }

    pub fn neighbors_for_sequence(&self, seq: &ApSequence, k: usize) -> Result<Neighbors> {
        let top = nearest_cells(&self.map, seq, k, aligned_sim)?;
        let cells = self.map.cells();
        Ok(Neighbors::new(
            top.into_iter().map(|(i, s)| (cells[i].anchor, s)).collect(),
        ))
    }
}

impl ObservationModel for SequenceModel {
    fn neighbors(&self, scan: &WifiScan, cfg: &ObservationConfig) -> Result<Neighbors> {
        let known = scan
            .readings
            .iter()
            .filter(|(id, _)| self.map.aps().iter().any(|ap| ap.id == *id))
            .count();
        let required = cfg.min_common_aps.max(2);
        if known < required {
            return Err(Error::ScanSkipped {
                readings: known,
                required,
            });
        }
        let seq = rss_sequence(scan, cfg.min_common_aps)?;
        self.neighbors_for_sequence(&seq, cfg.k)
    }

    fn name(&self) -> &'static str {
        "sequence"
    }
}

/// `p(g | x, m)` for a single pose: WKNN over the `k` best-matching cells.
/// Heading does not enter.
pub fn likelihood(
    pose: &Pose,
    seq: &ApSequence,
    map: &Arc<FingerprintMap>,
    cfg: &ObservationConfig,
) -> Result<f64> {
    let nb = SequenceModel::new(Arc::clone(map)).neighbors_for_sequence(seq, cfg.k)?;
    Ok(nb.likelihood(pose.x, pose.y, cfg.lambda))
}
