//! Flat `key = value` run configuration.
//!
//! Every tunable of the tracker, the map and the evaluation lives here under
//! one flat namespace so that config files, CLI overrides and sweeps all use
//! the same keys.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bounds, Point2D};
use crate::motion::MotionConfig;
use crate::observation::ObservationConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Dead reckoning plus rank-sequence corrections.
    Fused,
    /// Rank-sequence corrections with a random-walk prior.
    Wifi,
    /// Dead reckoning only.
    Imu,
    /// Dead reckoning plus cosine-fingerprint corrections.
    Baseline,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fused" => Ok(Mode::Fused),
            "wifi" => Ok(Mode::Wifi),
            "imu" => Ok(Mode::Imu),
            "baseline" => Ok(Mode::Baseline),
            other => Err(Error::config(format!(
                "unknown mode `{other}` (fused|wifi|imu|baseline)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Fused => "fused",
            Mode::Wifi => "wifi",
            Mode::Imu => "imu",
            Mode::Baseline => "baseline",
        })
    }
}

/// How the initial particle cloud is placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitSpec {
    /// Disk of `init_radius_m` around the log's first ground-truth fix.
    Start,
    /// Uniform over the map bounds.
    Map,
    Disk {
        center: Point2D,
        radius: f64,
    },
    Rect(Bounds),
}

impl FromStr for InitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let nums = |rest: &str, n: usize| -> Result<Vec<f64>> {
            let v: std::result::Result<Vec<f64>, _> =
                rest.split(',').map(|x| x.trim().parse()).collect();
            match v {
                Ok(v) if v.len() == n => Ok(v),
                _ => Err(Error::config(format!("bad init spec `{s}`"))),
            }
        };
        match s {
            "start" => Ok(InitSpec::Start),
            "map" => Ok(InitSpec::Map),
            _ => {
                if let Some(rest) = s.strip_prefix("disk:") {
                    let v = nums(rest, 3)?;
                    Ok(InitSpec::Disk {
                        center: Point2D::new(v[0], v[1]),
                        radius: v[2],
                    })
                } else if let Some(rest) = s.strip_prefix("rect:") {
                    let v = nums(rest, 4)?;
                    Ok(InitSpec::Rect(Bounds::new(v[0], v[1], v[2], v[3])?))
                } else {
                    Err(Error::config(format!(
                        "bad init spec `{s}` (start|map|disk:x,y,r|rect:x0,y0,x1,y1)"
                    )))
                }
            }
        }
    }
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Start => f.write_str("start"),
            InitSpec::Map => f.write_str("map"),
            InitSpec::Disk { center, radius } => {
                write!(f, "disk:{},{},{}", center.x, center.y, radius)
            }
            InitSpec::Rect(b) => write!(f, "rect:{},{},{},{}", b.min_x, b.min_y, b.max_x, b.max_y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackConfig {
    pub mode: Mode,
    pub seed: u64,
    pub n_particles: usize,
    pub resample_threshold: f64,
    pub init: InitSpec,
    pub init_radius_m: f64,
    pub init_heading_std_deg: f64,
    pub motion: MotionConfig,
    pub observation: ObservationConfig,
    pub grid_size: f64,
    /// Random-walk std per scan interval in wifi-only mode, meters.
    pub wifi_sigma_m: f64,
    pub wifi_keep_every: usize,
    pub survey_points: usize,
    pub survey_duration_s: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Fused,
            seed: 0,
            n_particles: 1000,
            resample_threshold: 0.5,
            init: InitSpec::Start,
            init_radius_m: 1.0,
            init_heading_std_deg: 10.0,
            motion: MotionConfig::default(),
            observation: ObservationConfig::default(),
            grid_size: 2.0,
            wifi_sigma_m: 0.5,
            wifi_keep_every: 1,
            survey_points: 41,
            survey_duration_s: 180.0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value `{value}` for `{key}`")))
}

impl TrackConfig {
    /// Every recognised key.
    pub const KEYS: &'static [&'static str] = &[
        "mode",
        "seed",
        "n_particles",
        "resample_threshold",
        "init",
        "init_radius_m",
        "init_heading_std_deg",
        "step_length_m",
        "sigma_d",
        "sigma_theta",
        "shared_distance_noise",
        "sigma_theta_additive",
        "k",
        "lambda",
        "min_common_aps",
        "grid_size",
        "wifi_sigma_m",
        "wifi_keep_every",
        "survey_points",
        "survey_duration_s",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "mode" => self.mode = v.parse()?,
            "seed" => self.seed = parse(key, v)?,
            "n_particles" => self.n_particles = parse(key, v)?,
            "resample_threshold" => self.resample_threshold = parse(key, v)?,
            "init" => self.init = v.parse()?,
            "init_radius_m" => self.init_radius_m = parse(key, v)?,
            "init_heading_std_deg" => self.init_heading_std_deg = parse(key, v)?,
            "step_length_m" => self.motion.step_length_m = parse(key, v)?,
            "sigma_d" => self.motion.sigma_d = parse(key, v)?,
            "sigma_theta" => self.motion.sigma_theta = parse(key, v)?,
            "shared_distance_noise" => self.motion.shared_distance_noise = parse(key, v)?,
            "sigma_theta_additive" => self.motion.sigma_theta_additive = parse(key, v)?,
            "k" => self.observation.k = parse(key, v)?,
            "lambda" => self.observation.lambda = parse(key, v)?,
            "min_common_aps" => self.observation.min_common_aps = parse(key, v)?,
            "grid_size" => self.grid_size = parse(key, v)?,
            "wifi_sigma_m" => self.wifi_sigma_m = parse(key, v)?,
            "wifi_keep_every" => self.wifi_keep_every = parse(key, v)?,
            "survey_points" => self.survey_points = parse(key, v)?,
            "survey_duration_s" => self.survey_duration_s = parse(key, v)?,
            other => return Err(Error::config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.motion.validate()?;
        self.observation.validate()?;
        let checks: [(bool, &str); 9] = [
            (self.n_particles >= 1, "n_particles must be >= 1"),
            (
                (0.0..=1.0).contains(&self.resample_threshold),
                "resample_threshold must be in [0, 1]",
            ),
            (self.init_radius_m >= 0.0, "init_radius_m must be >= 0"),
            (
                self.init_heading_std_deg >= 0.0,
                "init_heading_std_deg must be >= 0",
            ),
            (
                self.grid_size > 0.0 && self.grid_size.is_finite(),
                "grid_size must be > 0",
            ),
            (self.wifi_sigma_m >= 0.0, "wifi_sigma_m must be >= 0"),
            (self.wifi_keep_every >= 1, "wifi_keep_every must be >= 1"),
            (self.survey_points >= 1, "survey_points must be >= 1"),
            (
                self.survey_duration_s > 0.0,
                "survey_duration_s must be > 0",
            ),
        ];
        match checks.iter().find(|c| !c.0) {
            Some((_, msg)) => Err(Error::config(*msg)),
            None => Ok(()),
        }
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_str(text)?;
        Ok(cfg)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| Error::config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    /// All keys with their current values, sorted by key.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let m = &self.motion;
        let o = &self.observation;
        [
            ("mode", self.mode.to_string()),
            ("seed", self.seed.to_string()),
            ("n_particles", self.n_particles.to_string()),
            ("resample_threshold", self.resample_threshold.to_string()),
            ("init", self.init.to_string()),
            ("init_radius_m", self.init_radius_m.to_string()),
            (
                "init_heading_std_deg",
                self.init_heading_std_deg.to_string(),
            ),
            ("step_length_m", m.step_length_m.to_string()),
            ("sigma_d", m.sigma_d.to_string()),
            ("sigma_theta", m.sigma_theta.to_string()),
            ("shared_distance_noise", m.shared_distance_noise.to_string()),
            ("sigma_theta_additive", m.sigma_theta_additive.to_string()),
            ("k", o.k.to_string()),
            ("lambda", o.lambda.to_string()),
            ("min_common_aps", o.min_common_aps.to_string()),
            ("grid_size", self.grid_size.to_string()),
            ("wifi_sigma_m", self.wifi_sigma_m.to_string()),
            ("wifi_keep_every", self.wifi_keep_every.to_string()),
            ("survey_points", self.survey_points.to_string()),
            ("survey_duration_s", self.survey_duration_s.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn to_kv_string(&self) -> String {
        self.to_map()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
