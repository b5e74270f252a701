//! Parameter sweeps over repeated simulated runs.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{points_along_path, survey};
use crate::error::{Error, Result};
use crate::eval::config::{Mode, TrackConfig};
use crate::eval::report::csv_err;
use crate::eval::track::{run_track, MapSource};
use crate::seqmap::{build_map, FingerprintMap};
use crate::simulator::{generate, Measurement, Scenario};

/// Config keys that may be swept.
pub const SWEEPABLE: &[&str] = &[
    "n_particles",
    "lambda",
    "step_length_m",
    "sigma_d",
    "sigma_theta",
    "k",
    "grid_size",
    "wifi_keep_every",
];

/// Resolves a parameter name, accepting `step_length` for `step_length_m`.
pub fn sweep_key(name: &str) -> Result<&'static str> {
    let name = if name == "step_length" {
        "step_length_m"
    } else {
        name
    };
    SWEEPABLE
        .iter()
        .copied()
        .find(|k| *k == name)
        .ok_or_else(|| Error::UnknownParameter(name.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub repetitions: usize,
    pub mean_error_m: f64,
    /// Sample standard deviation of the per-repetition mean errors.
    pub std_error_m: f64,
    pub per_run_mean_error_m: Vec<f64>,
    pub max_update_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub mode: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, value: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.value == value)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "parameter",
            "value",
            "repetitions",
            "mean_error_m",
            "std_error_m",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            out.write_record([
                r.parameter.clone(),
                r.value.to_string(),
                r.repetitions.to_string(),
                r.mean_error_m.to_string(),
                r.std_error_m.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Repetition `r` simulates `scenario` with seed `scenario.seed + r` and
/// tracks with seed `base.seed + r`. Every (value, repetition) pair is an
/// independent job.
pub fn sweep(
    parameter: &str,
    values: &[f64],
    base: &TrackConfig,
    scenario: &Scenario,
    repetitions: usize,
) -> Result<SweepTable> {
    let key = sweep_key(parameter)?;
    if values.is_empty() || repetitions == 0 {
        return Err(Error::config(
            "sweep needs at least one value and one repetition",
        ));
    }
    let configs: Vec<TrackConfig> = values
        .iter()
        .map(|v| {
            let mut c = base.clone();
            c.set(key, &v.to_string())?;
            Ok(c)
        })
        .collect::<Result<_>>()?;

    let scenarios: Vec<Scenario> = (0..repetitions)
        .map(|r| Scenario {
            seed: scenario.seed.wrapping_add(r as u64),
            ..scenario.clone()
        })
        .collect();
    let logs: Vec<Vec<Measurement>> = scenarios.par_iter().map(generate).collect::<Result<_>>()?;

    let mut seq_maps: BTreeMap<u64, Arc<FingerprintMap>> = BTreeMap::new();
    if base.mode != Mode::Baseline {
        for c in &configs {
            if let std::collections::btree_map::Entry::Vacant(e) =
                seq_maps.entry(c.grid_size.to_bits())
            {
                e.insert(Arc::new(build_map(
                    scenario.bounds,
                    c.grid_size,
                    &scenario.aps,
                )?));
            }
        }
    }

    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|i| (0..repetitions).map(move |r| (i, r)))
        .collect();
    let results: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let mut cfg = configs[i].clone();
            cfg.seed = base.seed.wrapping_add(r as u64);
            let map = if cfg.mode == Mode::Baseline {
                let pts = points_along_path(&scenarios[r], cfg.survey_points);
                MapSource::Survey(Arc::new(survey(
                    &scenarios[r],
                    &pts,
                    cfg.survey_duration_s,
                )?))
            } else {
                MapSource::Sequence(Arc::clone(&seq_maps[&cfg.grid_size.to_bits()]))
            };
            let report = run_track(&map, &logs[r], &cfg)?;
            Ok((report.summary.mean_error_m, report.timing.max_update_ms))
        })
        .collect::<Result<_>>()?;

    let rows = values
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let chunk = &results[i * repetitions..(i + 1) * repetitions];
            let errs: Vec<f64> = chunk.iter().map(|c| c.0).collect();
            let (mean, std) = mean_std(&errs);
            SweepRow {
                parameter: key.to_string(),
                value,
                repetitions,
                mean_error_m: mean,
                std_error_m: std,
                per_run_mean_error_m: errs,
                max_update_ms: chunk.iter().map(|c| c.1).fold(0.0, f64::max),
            }
        })
        .collect();
    Ok(SweepTable {
        mode: base.mode.to_string(),
        rows,
    })
}
