//! Synthetic ground truth: AP deployment, a walker on a polyline, noisy RSS
//! from a log-distance path-loss model, and step/heading samples.
//!
//! The walker's position advances one stride per step event and holds still
//! in between, so ground truth is defined at foot placements.

use std::cmp::Ordering;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bounds, Point2D};
use crate::motion::{wrap, DeadReckoningInput};
use crate::observation::WifiScan;
use crate::seqmap::{validate_aps, AccessPoint};
use crate::similarity::RssVector;

/// RSS readings are clamped into this range, dBm.
pub const RSS_MIN_DBM: f64 = -100.0;
pub const RSS_MAX_DBM: f64 = -20.0;
/// Distances below this are treated as this, meters.
pub const MIN_DISTANCE_M: f64 = 0.1;

const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    /// RSS at 1 m.
    pub p0_dbm: f64,
    /// Path-loss exponent.
    pub gamma: f64,
    pub sigma_shadow_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuNoise {
    pub step_count_miss_prob: f64,
    pub heading_bias_rad: f64,
    pub heading_noise_rad: f64,
    /// Linear growth of the heading bias over time.
    #[serde(default)]
    pub heading_drift_rad_per_s: f64,
}

impl ImuNoise {
    pub const NONE: ImuNoise = ImuNoise {
        step_count_miss_prob: 0.0,
        heading_bias_rad: 0.0,
        heading_noise_rad: 0.0,
        heading_drift_rad_per_s: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub bounds: Bounds,
    pub aps: Vec<AccessPoint>,
    pub path: Vec<Point2D>,
    /// 0 walks the path once, open. `n >= 1` closes it and walks it `n` times.
    #[serde(default)]
    pub loops: u32,
    pub speed_mps: f64,
    pub wifi_rate_hz: f64,
    pub step_cadence_hz: f64,
    pub path_loss: PathLoss,
    pub imu_noise: ImuNoise,
}

impl Default for Scenario {
    fn default() -> Self {
        toml::from_str(DEFAULT_SCENARIO).expect("bundled default scenario parses")
    }
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let s: Scenario = toml::from_str(&std::fs::read_to_string(path)?)?;
        s.validate()?;
        Ok(s)
    }

    /// The bundled default scenario as TOML text.
    pub fn default_toml() -> &'static str {
        DEFAULT_SCENARIO
    }

    /// Same geometry with every noise source switched off.
    pub fn noiseless(mut self) -> Self {
        self.path_loss.sigma_shadow_db = 0.0;
        self.imu_noise = ImuNoise::NONE;
        self
    }

    pub fn stride_m(&self) -> f64 {
        self.speed_mps / self.step_cadence_hz
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        validate_aps(&self.aps)?;
        for (name, v) in [
            ("speed_mps", self.speed_mps),
            ("wifi_rate_hz", self.wifi_rate_hz),
            ("step_cadence_hz", self.step_cadence_hz),
            ("path_loss.gamma", self.path_loss.gamma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be > 0, got {v}")));
            }
        }
        let n = &self.imu_noise;
        if !(0.0..=1.0).contains(&n.step_count_miss_prob) {
            return Err(Error::config("step_count_miss_prob must be in [0, 1]"));
        }
        if self.path_loss.sigma_shadow_db < 0.0 || n.heading_noise_rad < 0.0 {
            return Err(Error::config("noise standard deviations must be >= 0"));
        }
        if let Some(p) = self.path.iter().find(|p| !self.bounds.contains(p)) {
            return Err(Error::config(format!("waypoint {p:?} outside bounds")));
        }
        if self.polyline().total_length() <= 0.0 {
            return Err(Error::config("path needs at least two distinct waypoints"));
        }
        Ok(())
    }

    fn polyline(&self) -> Polyline {
        let mut pts = self.path.clone();
        if self.loops > 0 {
            if let Some(&first) = pts.first() {
                if pts.last() != Some(&first) {
                    pts.push(first);
                }
            }
        }
        Polyline::new(pts, self.loops.max(1))
    }

    /// Length of one pass over the path (the perimeter for a closed loop).
    pub fn pass_length(&self) -> f64 {
        self.polyline().pass_length
    }

    pub fn total_length(&self) -> f64 {
        self.polyline().total_length()
    }
}

/// A polyline walked `passes` times by arc length.
struct Polyline {
    points: Vec<Point2D>,
    /// Cumulative arc length at each point of one pass.
    cum: Vec<f64>,
    pass_length: f64,
    passes: u32,
}

impl Polyline {
    fn new(points: Vec<Point2D>, passes: u32) -> Self {
        let mut cum = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                acc += points[i - 1].distance(p);
            }
            cum.push(acc);
        }
        Self {
            points,
            cum,
            pass_length: acc,
            passes,
        }
    }

    fn total_length(&self) -> f64 {
        self.pass_length * self.passes as f64
    }

    fn at(&self, arc: f64) -> Point2D {
        let arc = arc.clamp(0.0, self.total_length());
        let pass = ((arc / self.pass_length).floor() as u32).min(self.passes - 1);
        let within = (arc - pass as f64 * self.pass_length).clamp(0.0, self.pass_length);
        // last segment whose start is <= within
        let seg = match self.cum.partition_point(|&c| c <= within) {
            0 => 0,
            i => (i - 1).min(self.points.len() - 2),
        };
        let (a, b) = (self.points[seg], self.points[seg + 1]);
        let len = self.cum[seg + 1] - self.cum[seg];
        if len <= 0.0 {
            return a;
        }
        let f = ((within - self.cum[seg]) / len).clamp(0.0, 1.0);
        Point2D::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
    }
}

/// One record of the measurement log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum Measurement {
    #[serde(rename = "WIFI")]
    Wifi { t: f64, rss: RssVector },
    #[serde(rename = "STEP")]
    Step { t: f64, c: u64, alpha: f64 },
    #[serde(rename = "GT")]
    Gt { t: f64, x: f64, y: f64 },
}

impl Measurement {
    pub fn timestamp(&self) -> f64 {
        match *self {
            Measurement::Wifi { t, .. }
            | Measurement::Step { t, .. }
            | Measurement::Gt { t, .. } => t,
        }
    }

    pub fn as_scan(&self) -> Option<WifiScan> {
        match self {
            Measurement::Wifi { t, rss } => Some(WifiScan {
                timestamp: *t,
                readings: rss.clone(),
            }),
            _ => None,
        }
    }

    pub fn as_dead_reckoning(&self) -> Option<DeadReckoningInput> {
        match *self {
            Measurement::Step { t, c, alpha } => Some(DeadReckoningInput {
                timestamp: t,
                step_count: c,
                heading: alpha,
            }),
            _ => None,
        }
    }

    pub fn is_wifi(&self) -> bool {
        matches!(self, Measurement::Wifi { .. })
    }

    /// Ordering of records that share a timestamp: GT, STEP, WIFI.
    fn kind_rank(&self) -> u8 {
        match self {
            Measurement::Gt { .. } => 0,
            Measurement::Step { .. } => 1,
            Measurement::Wifi { .. } => 2,
        }
    }
}

/// Log-distance path loss with Gaussian shadowing, clamped to
/// [`RSS_MIN_DBM`, `RSS_MAX_DBM`].
pub fn rss_at<R: Rng + ?Sized>(ap: &AccessPoint, p: &Point2D, pl: &PathLoss, rng: &mut R) -> f64 {
    let d = ap.position.distance(p).max(MIN_DISTANCE_M);
    let z: f64 = rng.sample(StandardNormal);
    let rss = pl.p0_dbm - 10.0 * pl.gamma * d.log10() + pl.sigma_shadow_db * z;
    rss.clamp(RSS_MIN_DBM, RSS_MAX_DBM)
}

/// One scan of every AP at `p`, in ascending AP id order.
pub fn scan_at<R: Rng + ?Sized>(
    aps: &[AccessPoint],
    p: &Point2D,
    pl: &PathLoss,
    rng: &mut R,
) -> RssVector {
    let mut sorted: Vec<&AccessPoint> = aps.iter().collect();
    sorted.sort_by_key(|ap| ap.id);
    let mut v = RssVector::new();
    for ap in sorted {
        v.insert(ap.id, rss_at(ap, p, pl, rng));
    }
    v
}

/// Simulates a walk over the scenario path and returns the merged,
/// time-ordered log.
pub fn generate(s: &Scenario) -> Result<Vec<Measurement>> {
    s.validate()?;
    let line = s.polyline();
    let stride = s.stride_m();
    let n_steps = (line.total_length() / stride + 1e-9).floor() as u64;
    if n_steps == 0 {
        return Err(Error::config("path shorter than one stride"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);

    let foot: Vec<Point2D> = (0..=n_steps).map(|k| line.at(k as f64 * stride)).collect();
    let step_time = |k: u64| k as f64 / s.step_cadence_hz;
    let t_end = step_time(n_steps);

    let mut records: Vec<Measurement> = Vec::new();
    let noise = &s.imu_noise;
    let mut count = 0u64;
    for k in 0..=n_steps {
        let t = step_time(k);
        if k > 0 && rng.random::<f64>() >= noise.step_count_miss_prob {
            count += 1;
        }
        // direction of the stride about to be taken
        let (from, to) = if k < n_steps {
            (foot[k as usize], foot[k as usize + 1])
        } else {
            (foot[k as usize - 1], foot[k as usize])
        };
        let tangent = (to.y - from.y).atan2(to.x - from.x);
        let z: f64 = rng.sample(StandardNormal);
        let alpha = wrap(
            tangent
                + noise.heading_bias_rad
                + noise.heading_drift_rad_per_s * t
                + noise.heading_noise_rad * z,
        );
        records.push(Measurement::Step { t, c: count, alpha });
    }

    let foot_at = |t: f64| -> Point2D {
        let k = ((t * s.step_cadence_hz + 1e-9).floor() as u64).min(n_steps);
        foot[k as usize]
    };

    let mut j = 0u64;
    loop {
        let t = j as f64 / s.wifi_rate_hz;
        if t > t_end + 1e-9 {
            break;
        }
        let p = foot_at(t);
        records.push(Measurement::Wifi {
            t,
            rss: scan_at(&s.aps, &p, &s.path_loss, &mut rng),
        });
        j += 1;
    }

    let mut times: Vec<f64> = records.iter().map(|m| m.timestamp()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    for t in times {
        let p = foot_at(t);
        records.push(Measurement::Gt { t, x: p.x, y: p.y });
    }

    records.sort_by(|a, b| {
        a.timestamp()
            .partial_cmp(&b.timestamp())
            .unwrap_or(Ordering::Equal)
            .then(a.kind_rank().cmp(&b.kind_rank()))
    });
    Ok(records)
}

/// Keeps every `keep_every`-th WIFI record (the first, then every n-th
/// after it) and all other records.
pub fn decimate(log: &[Measurement], keep_every: usize) -> Vec<Measurement> {
    let n = keep_every.max(1);
    let mut seen = 0usize;
    log.iter()
        .filter(|m| {
            if !m.is_wifi() {
                return true;
            }
            let keep = seen.is_multiple_of(n);
            seen += 1;
            keep
        })
        .cloned()
        .collect()
}
