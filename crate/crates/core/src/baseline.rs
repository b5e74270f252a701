//! Conventional fingerprinting baseline: surveyed mean RSS vectors matched
//! by cosine similarity, fed through the same WKNN kernel as the sequence
//! model so the two differ only in the similarity measure.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2D;
use crate::motion::Pose;
use crate::observation::{Neighbors, ObservationConfig, ObservationModel, WifiScan};
use crate::similarity::{cosine_sim, RssVector};
use crate::simulator::{scan_at, Scenario};

// Keeps the survey stream independent of the walk generated from the same seed.
const SURVEY_STREAM: u64 = 0x5352_5645_5900_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub x: f64,
    pub y: f64,
    pub rss: RssVector,
}

impl Fingerprint {
    pub fn location(&self) -> Point2D {
        Point2D::new(self.x, self.y)
    }
}

/// Surveyed reference fingerprints. Serialized as a plain list of
/// `{x, y, rss}` records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RssFingerprintMap {
    fingerprints: Vec<Fingerprint>,
    #[serde(skip)]
    duration_s: Option<f64>,
}

impl RssFingerprintMap {
    pub fn new(fingerprints: Vec<Fingerprint>) -> Result<Self> {
        if fingerprints.is_empty() {
            return Err(Error::config("fingerprint map is empty"));
        }
        for (i, a) in fingerprints.iter().enumerate() {
            if fingerprints[..i].iter().any(|b| b.x == a.x && b.y == a.y) {
                return Err(Error::config(format!(
                    "duplicate fingerprint location ({}, {})",
                    a.x, a.y
                )));
            }
        }
        Ok(Self {
            fingerprints,
            duration_s: None,
        })
    }

    pub fn fingerprints(&self) -> &[Fingerprint] {
        &self.fingerprints
    }

    pub fn len(&self) -> usize {
        self.fingerprints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fingerprints.is_empty()
    }

    /// Dwell time per point, when the map came from [`survey`].
    pub fn duration_s(&self) -> Option<f64> {
        self.duration_s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let list: Vec<Fingerprint> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::new(list)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Simulates standing `duration_s` at each point, scanning at the
/// scenario's Wifi rate, and records the per-AP mean RSS.
pub fn survey(
    scenario: &Scenario,
    points: &[Point2D],
    duration_s: f64,
) -> Result<RssFingerprintMap> {
    if points.is_empty() {
        return Err(Error::config("survey needs at least one point"));
    }
    if duration_s.is_nan() || duration_s <= 0.0 {
        return Err(Error::config("survey duration must be > 0"));
    }
    if let Some(p) = points.iter().find(|p| !scenario.bounds.contains(p)) {
        return Err(Error::config(format!("survey point {p:?} outside bounds")));
    }
    let scans = (duration_s * scenario.wifi_rate_hz).round().max(1.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ SURVEY_STREAM);
    let mut fps = Vec::with_capacity(points.len());
    for p in points {
        let mut sums: Vec<(crate::seqmap::ApId, f64)> = Vec::new();
        for _ in 0..scans {
            let v = scan_at(&scenario.aps, p, &scenario.path_loss, &mut rng);
            if sums.is_empty() {
                sums = v.iter().collect();
            } else {
                for (acc, (_, r)) in sums.iter_mut().zip(v.iter()) {
                    acc.1 += r;
                }
            }
        }
        let mut rss = RssVector::new();
        for (id, total) in sums {
            rss.insert(id, total / scans as f64);
        }
        fps.push(Fingerprint {
            x: p.x,
            y: p.y,
            rss,
        });
    }
    let mut map = RssFingerprintMap::new(fps)?;
    map.duration_s = Some(duration_s);
    Ok(map)
}

/// `n` points evenly spaced by arc length along one pass of the scenario path.
pub fn points_along_path(scenario: &Scenario, n: usize) -> Vec<Point2D> {
    let mut pts = scenario.path.clone();
    if scenario.loops > 0 {
        if let Some(&first) = pts.first() {
            pts.push(first);
        }
    }
    let seg_len: Vec<f64> = pts.windows(2).map(|w| w[0].distance(&w[1])).collect();
    let total: f64 = seg_len.iter().sum();
    let closed = scenario.loops > 0;
    let spacing = if closed || n < 2 {
        total / n as f64
    } else {
        total / (n - 1) as f64
    };
    (0..n)
        .map(|i| {
            let mut arc = i as f64 * spacing;
            for (s, len) in seg_len.iter().enumerate() {
                if arc <= *len || s + 1 == seg_len.len() {
                    let f = if *len > 0.0 {
                        (arc / len).min(1.0)
                    } else {
                        0.0
                    };
                    let (a, b) = (pts[s], pts[s + 1]);
                    return Point2D::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y));
                }
                arc -= len;
            }
            pts[0]
        })
        .collect()
}

/// Cosine-similarity WKNN model over an [`RssFingerprintMap`].
#[derive(Debug, Clone)]
pub struct CosineModel {
    map: Arc<RssFingerprintMap>,
}

impl CosineModel {
    pub fn new(map: Arc<RssFingerprintMap>) -> Self {
        Self { map }
    }
}

impl ObservationModel for CosineModel {
    fn neighbors(&self, scan: &WifiScan, cfg: &ObservationConfig) -> Result<Neighbors> {
        let required = cfg.min_common_aps.max(2);
        if scan.readings.len() < required {
            return Err(Error::ScanSkipped {
                readings: scan.readings.len(),
                required,
            });
        }
        if cfg.k == 0 || cfg.k > self.map.len() {
            return Err(Error::config(format!(
                "k must be in 1..={}, got {}",
                self.map.len(),
                cfg.k
            )));
        }
        let mut scored = Vec::with_capacity(self.map.len());
        let mut last_err = None;
        for (i, fp) in self.map.fingerprints.iter().enumerate() {
            match cosine_sim(&scan.readings, &fp.rss) {
                Ok(s) => scored.push((i, s)),
                Err(e) => last_err = Some(e),
            }
        }
        if scored.is_empty() {
            return Err(last_err.unwrap_or_else(|| Error::config("no fingerprints")));
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(cfg.k);
        Ok(Neighbors::new(
            scored
                .into_iter()
                .map(|(i, s)| (self.map.fingerprints[i].location(), s))
                .collect(),
        ))
    }

    fn name(&self) -> &'static str {
        "cosine"
    }
}

/// WKNN likelihood with cosine similarity in place of the rank similarity.
pub fn likelihood_cos(
    pose: &Pose,
    scan: &WifiScan,
    map: &Arc<RssFingerprintMap>,
    cfg: &ObservationConfig,
) -> Result<f64> {
    let nb = CosineModel::new(Arc::clone(map)).neighbors(scan, cfg)?;
    Ok(nb.likelihood(pose.x, pose.y, cfg.lambda))
}
