//! Replays a measurement log through a tracker.

use std::sync::Arc;
use std::time::Instant;

use crate::baseline::{CosineModel, RssFingerprintMap};
use crate::error::{Error, Result};
use crate::eval::config::{InitSpec, Mode, TrackConfig};
use crate::eval::report::{GroundTruth, Row, Summary, Timing, TrackReport};
use crate::filter::{FilterConfig, InitRegion, Tracker};
use crate::observation::{ObservationModel, SequenceModel};
use crate::seqmap::FingerprintMap;
use crate::simulator::Measurement;

/// The reference map a run corrects against.
#[derive(Debug, Clone)]
pub enum MapSource {
    Sequence(Arc<FingerprintMap>),
    Survey(Arc<RssFingerprintMap>),
}

impl MapSource {
    fn model(&self) -> Arc<dyn ObservationModel> {
        match self {
            MapSource::Sequence(m) => Arc::new(SequenceModel::new(Arc::clone(m))),
            MapSource::Survey(m) => Arc::new(CosineModel::new(Arc::clone(m))),
        }
    }

    fn bounds(&self) -> Option<crate::geometry::Bounds> {
        match self {
            MapSource::Sequence(m) => Some(m.bounds()),
            MapSource::Survey(_) => None,
        }
    }
}

fn with_line(e: Error, index: usize) -> Error {
    match e {
        Error::MalformedLog { line: None, msg } => Error::MalformedLog {
            line: Some(index + 1),
            msg,
        },
        other => other,
    }
}

fn init_region(cfg: &TrackConfig, gt: &GroundTruth, map: &MapSource) -> Result<InitRegion> {
    Ok(match cfg.init {
        InitSpec::Start => InitRegion::Disk {
            center: gt
                .first()
                .ok_or_else(|| Error::config("init = start needs a GT record in the log"))?,
            radius: cfg.init_radius_m,
        },
        InitSpec::Map => InitRegion::Rect(
            map.bounds()
                .ok_or_else(|| Error::config("init = map needs a sequence map"))?,
        ),
        InitSpec::Disk { center, radius } => InitRegion::Disk { center, radius },
        InitSpec::Rect(b) => InitRegion::Rect(b),
    })
}

/// Runs the log through a tracker in the configured mode.
///
/// * `fused`, `baseline`: STEP predicts, WIFI corrects and resamples.
/// * `wifi`: STEP is ignored; each WIFI first diffuses the particles by
///   `wifi_sigma_m`.
/// * `imu`: WIFI is ignored.
///
/// Only every `wifi_keep_every`-th WIFI record is used. Every STEP and used
/// WIFI record yields one row. Line numbers in errors are 1-based positions
/// in `log`, which match file lines for logs written by [`save_log`].
///
/// [`save_log`]: crate::eval::save_log
pub fn run_track(map: &MapSource, log: &[Measurement], cfg: &TrackConfig) -> Result<TrackReport> {
    match (cfg.mode, map) {
        (Mode::Baseline, MapSource::Sequence(_)) => {
            return Err(Error::config(
                "baseline mode needs a survey fingerprint map",
            ))
        }
        (Mode::Fused | Mode::Wifi | Mode::Imu, MapSource::Survey(_)) => {
            return Err(Error::config(format!(
                "{} mode needs a sequence map",
                cfg.mode
            )))
        }
        _ => {}
    }
    cfg.validate()?;
    let gt = GroundTruth::from_log(log);
    let filter = FilterConfig {
        n_particles: cfg.n_particles,
        resample_threshold: cfg.resample_threshold,
        init_region: init_region(cfg, &gt, map)?,
        init_heading_std: cfg.init_heading_std_deg.to_radians(),
    };
    let mut tracker = Tracker::new(filter, cfg.motion, cfg.observation, map.model(), cfg.seed)?;

    let mut rows = Vec::new();
    let mut update_ms = Vec::new();
    let mut wifi_seen = 0usize;
    for (i, m) in log.iter().enumerate() {
        match m {
            Measurement::Gt { .. } => continue,
            Measurement::Step { .. } => {
                if cfg.mode != Mode::Wifi {
                    let u = m.as_dead_reckoning().expect("step record");
                    tracker.predict(&u).map_err(|e| with_line(e, i))?;
                }
            }
            Measurement::Wifi { .. } => {
                wifi_seen += 1;
                if !(wifi_seen - 1).is_multiple_of(cfg.wifi_keep_every) {
                    continue;
                }
                if cfg.mode != Mode::Imu {
                    let scan = m.as_scan().expect("wifi record");
                    if cfg.mode == Mode::Wifi {
                        tracker.diffuse(cfg.wifi_sigma_m);
                    }
                    let start = Instant::now();
                    tracker.correct(&scan).map_err(|e| with_line(e, i))?;
                    let est = tracker.estimate();
                    tracker.resample();
                    update_ms.push(start.elapsed().as_secs_f64() * 1e3);
                    rows.push(row(m.timestamp(), est, &gt));
                    continue;
                }
            }
        }
        rows.push(row(m.timestamp(), tracker.estimate(), &gt));
    }

    let uncovered_rows = rows.iter().filter(|r| r.error_m.is_none()).count();
    Ok(TrackReport {
        mode: cfg.mode.to_string(),
        seed: cfg.seed,
        config: cfg.to_map(),
        summary: Summary::from_rows(&rows),
        uncovered_rows,
        stats: tracker.stats(),
        rows,
        timing: Timing::from_samples(&update_ms),
    })
}

fn row(t: f64, est: crate::motion::Pose, gt: &GroundTruth) -> Row {
    let g = gt.at(t);
    Row {
        t,
        x: est.x,
        y: est.y,
        theta: est.theta,
        gt_x: g.map(|p| p.x),
        gt_y: g.map(|p| p.y),
        error_m: g.map(|p| p.distance(&crate::geometry::Point2D::new(est.x, est.y))),
    }
}
