//! Particle filter fusing dead reckoning with Wifi rank observations.
//!
//! Each cycle is predict (motion model), correct (observation likelihood,
//! then normalisation) and, when the effective sample size drops below a
//! threshold, systematic resampling.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bounds, Point2D};
use crate::motion::{propagate, wrap, DeadReckoningInput, MotionConfig, Pose};
use crate::numeric::NeumaierSum;
use crate::observation::{ObservationConfig, ObservationModel, WifiScan, LIKELIHOOD_FLOOR};
use crate::simulator::Measurement;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub pose: Pose,
    pub weight: f64,
}

/// Where the initial particle cloud is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitRegion {
    Rect(Bounds),
    Disk { center: Point2D, radius: f64 },
}

impl InitRegion {
    fn validate(&self) -> Result<()> {
        match self {
            InitRegion::Rect(b) => b.validate(),
            InitRegion::Disk { center, radius } => {
                if !center.is_finite() || !(*radius >= 0.0 && radius.is_finite()) {
                    return Err(Error::config(format!("invalid init disk {self:?}")));
                }
                Ok(())
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2D {
        match *self {
            InitRegion::Rect(b) => Point2D::new(
                b.min_x + b.width() * rng.random::<f64>(),
                b.min_y + b.height() * rng.random::<f64>(),
            ),
            InitRegion::Disk { center, radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let phi = 2.0 * PI * rng.random::<f64>();
                Point2D::new(center.x + r * phi.cos(), center.y + r * phi.sin())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub n_particles: usize,
    /// Resample when ESS < `resample_threshold * N`. 1.0 resamples on every
    /// correction that is not perfectly uniform.
    pub resample_threshold: f64,
    pub init_region: InitRegion,
    /// Std of particle headings around the first compass sample, radians.
    pub init_heading_std: f64,
}

impl FilterConfig {
    pub fn new(init_region: InitRegion) -> Self {
        Self {
            n_particles: 1000,
            resample_threshold: 0.5,
            init_region,
            init_heading_std: 10f64.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::config("n_particles must be >= 1"));
        }
        if !(self.resample_threshold > 0.0 && self.resample_threshold <= 1.0) {
            return Err(Error::config(format!(
                "resample_threshold must be in (0, 1], got {}",
                self.resample_threshold
            )));
        }
        if !(self.init_heading_std >= 0.0 && self.init_heading_std.is_finite()) {
            return Err(Error::config("init_heading_std must be >= 0"));
        }
        self.init_region.validate()
    }
}

/// Result of one correction.
#[derive(Debug)]
pub enum CorrectOutcome {
    Applied,
    /// The scan could not be used; the particle set is unchanged.
    Skipped(Error),
    /// Every particle's likelihood fell to the floor (or the weights
    /// collapsed); weights were reset to uniform.
    Diverged,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackerStats {
    pub predictions: u64,
    pub corrections: u64,
    pub skipped_scans: u64,
    pub divergences: u64,
    pub resamples: u64,
}

/// Recursive pose estimator. Single-owner mutable state.
pub struct Tracker {
    particles: Vec<Particle>,
    last_dr: Option<DeadReckoningInput>,
    last_t: Option<f64>,
    motion: MotionConfig,
    observation: ObservationConfig,
    config: FilterConfig,
    model: Arc<dyn ObservationModel>,
    rng: ChaCha8Rng,
    stats: TrackerStats,
}

impl std::fmt::Debug for Tracker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tracker")
            .field("n_particles", &self.particles.len())
            .field("model", &self.model.name())
            .field("last_dr", &self.last_dr)
            .field("stats", &self.stats)
            .finish()
    }
}

impl Tracker {
    /// Draws `N` particles uniformly over the init region with uniform
    /// headings and weights `1/N`.
    pub fn new(
        config: FilterConfig,
        motion: MotionConfig,
        observation: ObservationConfig,
        model: Arc<dyn ObservationModel>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        motion.validate()?;
        observation.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = 1.0 / config.n_particles as f64;
        let particles = (0..config.n_particles)
            .map(|_| {
                let p = config.init_region.sample(&mut rng);
                let theta = PI - 2.0 * PI * rng.random::<f64>();
                Particle {
                    pose: Pose {
                        x: p.x,
                        y: p.y,
                        theta,
                    },
                    weight: w,
                }
            })
            .collect();
        Ok(Self {
            particles,
            last_dr: None,
            last_t: None,
            motion,
            observation,
            config,
            model,
            rng,
            stats: TrackerStats::default(),
        })
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    /// Replaces the particle set; the count must stay at `N`.
    pub fn set_particles(&mut self, particles: Vec<Particle>) -> Result<()> {
        if particles.len() != self.config.n_particles {
            return Err(Error::config(format!(
                "expected {} particles, got {}",
                self.config.n_particles,
                particles.len()
            )));
        }
        self.particles = particles;
        Ok(())
    }

    pub fn stats(&self) -> TrackerStats {
        self.stats
    }

    pub fn last_dr(&self) -> Option<DeadReckoningInput> {
        self.last_dr
    }

    pub fn model_name(&self) -> &'static str {
        self.model.name()
    }

    fn check_time(&mut self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::malformed(format!("non-finite timestamp {t}")));
        }
        if let Some(last) = self.last_t {
            if t < last {
                return Err(Error::malformed(format!(
                    "timestamp {t} precedes previously processed {last}"
                )));
            }
        }
        self.last_t = Some(t);
        Ok(())
    }

    /// Propagates every particle with the motion model. The first sample only
    /// seeds the headings around its compass reading.
    pub fn predict(&mut self, u: &DeadReckoningInput) -> Result<()> {
        self.check_time(u.timestamp)?;
        let Some(prev) = self.last_dr else {
            let std = self.config.init_heading_std;
            for p in &mut self.particles {
                let z: f64 = self.rng.sample(StandardNormal);
                p.pose.theta = wrap(u.heading + std * z);
            }
            self.last_dr = Some(*u);
            return Ok(());
        };
        if u.step_count < prev.step_count {
            return Err(Error::malformed(format!(
                "step count decreased from {} to {} at t={}",
                prev.step_count, u.step_count, u.timestamp
            )));
        }
        for p in &mut self.particles {
            p.pose = propagate(&p.pose, &prev, u, &self.motion, &mut self.rng)?;
        }
        self.last_dr = Some(*u);
        self.stats.predictions += 1;
        Ok(())
    }

    /// Zero-mean Gaussian random walk on position, used when no dead
    /// reckoning is available.
    pub fn diffuse(&mut self, sigma: f64) {
        for p in &mut self.particles {
            let zx: f64 = self.rng.sample(StandardNormal);
            let zy: f64 = self.rng.sample(StandardNormal);
            p.pose.x += sigma * zx;
            p.pose.y += sigma * zy;
        }
    }

    /// Reweights particles by the observation likelihood and normalises.
    pub fn correct(&mut self, scan: &WifiScan) -> Result<CorrectOutcome> {
        self.check_time(scan.timestamp)?;
        let neighbors = match self.model.neighbors(scan, &self.observation) {
            Ok(nb) => nb,
            Err(e @ (Error::ScanSkipped { .. } | Error::InsufficientOverlap { .. })) => {
                self.stats.skipped_scans += 1;
                return Ok(CorrectOutcome::Skipped(e));
            }
            Err(e) => return Err(e),
        };
        self.stats.corrections += 1;

        let lambda = self.observation.lambda;
        let mut any_above_floor = false;
        let mut total = NeumaierSum::default();
        for p in &mut self.particles {
            let raw = neighbors.raw_likelihood(p.pose.x, p.pose.y, lambda);
            any_above_floor |= raw > LIKELIHOOD_FLOOR;
            p.weight *= raw.max(LIKELIHOOD_FLOOR);
            total.add(p.weight);
        }
        let total = total.sum();
        if !any_above_floor || !(total > 0.0 && total.is_finite()) {
            self.reset_weights();
            self.stats.divergences += 1;
            return Ok(CorrectOutcome::Diverged);
        }
        for p in &mut self.particles {
            p.weight /= total;
        }
        Ok(CorrectOutcome::Applied)
    }

    fn reset_weights(&mut self) {
        let w = 1.0 / self.particles.len() as f64;
        for p in &mut self.particles {
            p.weight = w;
        }
    }

    /// `1 / sum(w^2)`.
    pub fn effective_sample_size(&self) -> f64 {
        let mut s = NeumaierSum::default();
        for p in &self.particles {
            s.add(p.weight * p.weight);
        }
        1.0 / s.sum()
    }

    /// Systematic resampling, triggered by the ESS threshold. Returns whether
    /// it ran.
    pub fn resample(&mut self) -> bool {
        let n = self.particles.len();
        if self.effective_sample_size() >= self.config.resample_threshold * n as f64 {
            return false;
        }
        let offset = self.rng.random::<f64>() / n as f64;
        let weights: Vec<f64> = self.particles.iter().map(|p| p.weight).collect();
        let picks = systematic_indices(&weights, offset);
        let w = 1.0 / n as f64;
        self.particles = picks
            .into_iter()
            .map(|i| Particle {
                pose: self.particles[i].pose,
                weight: w,
            })
            .collect();
        self.stats.resamples += 1;
        true
    }

    /// Weighted mean position and circular-mean heading.
    pub fn estimate(&self) -> Pose {
        estimate(&self.particles)
    }

    /// Feeds one log record. STEP predicts; WIFI corrects, estimates and then
    /// resamples; GT is ignored (`None`).
    pub fn step(&mut self, m: &Measurement) -> Result<Option<Pose>> {
        match m {
            Measurement::Step { .. } => {
                self.predict(&m.as_dead_reckoning().expect("step record"))?;
                Ok(Some(self.estimate()))
            }
            Measurement::Wifi { .. } => {
                self.correct(&m.as_scan().expect("wifi record"))?;
                let est = self.estimate();
                self.resample();
                Ok(Some(est))
            }
            Measurement::Gt { .. } => Ok(None),
        }
    }
}

/// Weighted mean of particle positions; heading is the atan2 of weighted
/// sine and cosine sums.
pub fn estimate(particles: &[Particle]) -> Pose {
    let (mut sw, mut sx, mut sy, mut ss, mut sc) = (
        NeumaierSum::default(),
        NeumaierSum::default(),
        NeumaierSum::default(),
        NeumaierSum::default(),
        NeumaierSum::default(),
    );
    for p in particles {
        let w = p.weight;
        let (sin, cos) = p.pose.theta.sin_cos();
        sw.add(w);
        sx.add(w * p.pose.x);
        sy.add(w * p.pose.y);
        ss.add(w * sin);
        sc.add(w * cos);
    }
    let w = sw.sum();
    Pose {
        x: sx.sum() / w,
        y: sy.sum() / w,
        theta: wrap(ss.sum().atan2(sc.sum())),
    }
}

/// Low-variance resampling: the `i`-th pick is the particle whose cumulative
/// weight interval contains `offset + i / N`, with `offset` in `[0, 1/N)`.
/// Weights must sum to one.
pub fn systematic_indices(weights: &[f64], offset: f64) -> Vec<usize> {
    let n = weights.len();
    let nf = n as f64;
    let mut picks = Vec::with_capacity(n);
    // Thresholds are compared in units of 1/N to keep them exact integers + offset.
    let frac = offset * nf;
    let mut j = 0;
    let mut cum = weights.first().copied().unwrap_or(0.0) * nf;
    for i in 0..n {
        let u = i as f64 + frac;
        while cum <= u && j + 1 < n {
            j += 1;
            cum += weights[j] * nf;
        }
        picks.push(j);
    }
    picks
}
