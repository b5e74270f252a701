use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use seqtrack::baseline::{points_along_path, survey, RssFingerprintMap};
use seqtrack::eval::{
    load_log, read_trajectory_csv, run_track, score_trajectory, sweep, write_log, GroundTruth,
    MapSource, Mode, Summary, TrackConfig, TrackReport,
};
use seqtrack::seqmap::{build_map, FingerprintMap};
use seqtrack::simulator::{generate, Scenario};

/// Indoor tracking from ranked Wi-Fi signal strengths and step/heading dead
/// reckoning.
#[derive(Debug, Parser)]
#[command(name = "seqtrack", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` tracker config file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed: the simulator seed for `simulate`/`survey`, the tracker seed otherwise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Tracking mode: fused, wifi, imu or baseline.
    #[arg(long, global = true)]
    mode: Option<Mode>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a sequence fingerprint map from the scenario's APs.
    BuildMap(ScenarioArg),
    /// Simulate a walk and write its measurement log (JSON lines).
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Override the number of loops around the path.
        #[arg(long)]
        loops: Option<u32>,
    },
    /// Simulate an RSS site survey along the walking path.
    Survey(ScenarioArg),
    /// Replay a log through the tracker and write a report.
    Track {
        /// Sequence map (fused/wifi/imu) or survey file (baseline).
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Also write the per-record rows as CSV.
        #[arg(long, value_name = "FILE")]
        rows_csv: Option<PathBuf>,
    },
    /// Sweep one config parameter over simulated runs.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
    },
    /// Score a report, or an external `t,x,y` CSV trajectory against a log.
    Eval {
        #[arg(long, conflicts_with_all = ["log", "trajectory"], required_unless_present = "log")]
        report: Option<PathBuf>,
        #[arg(long, requires = "trajectory")]
        log: Option<PathBuf>,
        #[arg(long, requires = "log")]
        trajectory: Option<PathBuf>,
    },
    /// Print the default scenario file.
    Scenario,
    /// Print the effective tracker config as `key = value` lines.
    Config,
}

#[derive(Debug, Args)]
struct ScenarioArg {
    /// Scenario TOML; the built-in default when omitted.
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
}

impl ScenarioArg {
    fn load(&self) -> anyhow::Result<Scenario> {
        Ok(match &self.scenario {
            Some(p) => {
                Scenario::load(p).with_context(|| format!("loading scenario {}", p.display()))?
            }
            None => Scenario::default(),
        })
    }
}

impl Common {
    fn track_config(&self) -> anyhow::Result<TrackConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                TrackConfig::load(p).with_context(|| format!("loading config {}", p.display()))?
            }
            None => TrackConfig::default(),
        };
        for kv in &self.overrides {
            let Some((k, v)) = kv.split_once('=') else {
                bail!(seqtrack::Error::Config(format!(
                    "--set expects KEY=VALUE, got `{kv}`"
                )));
            };
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn output(&self) -> anyhow::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn write_json<T: serde::Serialize>(&self, value: &T) -> anyhow::Result<()> {
        let mut out = self.output()?;
        serde_json::to_writer_pretty(&mut out, value)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }
}

#[derive(serde::Serialize)]
struct EvalOutput {
    summary: Summary,
    uncovered_rows: usize,
}

fn timing_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".timing.json");
    out.with_file_name(name)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::BuildMap(scenario) => {
            let s = scenario.load()?;
            let cfg = common.track_config()?;
            let map = build_map(s.bounds, cfg.grid_size, &s.aps)?;
            common.write_json(&map)?;
        }
        Command::Simulate { scenario, loops } => {
            let mut s = scenario.load()?;
            if let Some(seed) = common.seed {
                s.seed = seed;
            }
            if let Some(l) = loops {
                s.loops = *l;
            }
            let log = generate(&s)?;
            write_log(common.output()?, &log)?;
        }
        Command::Survey(scenario) => {
            let mut s = scenario.load()?;
            if let Some(seed) = common.seed {
                s.seed = seed;
            }
            let cfg = common.track_config()?;
            let points = points_along_path(&s, cfg.survey_points);
            let map = survey(&s, &points, cfg.survey_duration_s)?;
            common.write_json(&map)?;
        }
        Command::Track { map, log, rows_csv } => {
            let cfg = common.track_config()?;
            let source = if cfg.mode == Mode::Baseline {
                MapSource::Survey(Arc::new(RssFingerprintMap::load(map)?))
            } else {
                MapSource::Sequence(Arc::new(FingerprintMap::load(map)?))
            };
            let log = load_log(log).with_context(|| format!("reading {}", log.display()))?;
            let report = run_track(&source, &log, &cfg)?;
            let mut out = common.output()?;
            out.write_all(report.to_json()?.as_bytes())?;
            out.flush()?;
            if let Some(p) = rows_csv {
                report.write_rows_csv(BufWriter::new(File::create(p)?))?;
            }
            let timing = serde_json::to_string(&report.timing)?;
            if let Some(p) = &common.out {
                std::fs::write(timing_path(p), timing.clone() + "\n")?;
            }
            eprintln!(
                "{} mode: mean error {:.3} m, median {:.3} m, p90 {:.3} m over {} rows; timing {timing}",
                report.mode,
                report.summary.mean_error_m,
                report.summary.median_error_m,
                report.summary.p90_error_m,
                report.summary.count,
            );
        }
        Command::Sweep {
            scenario,
            param,
            values,
            reps,
        } => {
            let s = scenario.load()?;
            let cfg = common.track_config()?;
            let table = sweep(param, values, &cfg, &s, *reps)?;
            table.write_csv(common.output()?)?;
        }
        Command::Eval {
            report,
            log,
            trajectory,
        } => {
            let summary = match (report, log, trajectory) {
                (Some(r), _, _) => {
                    let report =
                        TrackReport::load(r).with_context(|| format!("reading {}", r.display()))?;
                    let recomputed = Summary::from_rows(&report.rows);
                    if recomputed != report.summary {
                        eprintln!("warning: stored summary differs from recomputation; showing recomputed");
                    }
                    EvalOutput {
                        summary: recomputed,
                        uncovered_rows: report.uncovered_rows,
                    }
                }
                (None, Some(l), Some(t)) => {
                    let gt = GroundTruth::from_log(&load_log(l)?);
                    let traj = read_trajectory_csv(
                        File::open(t).with_context(|| format!("opening {}", t.display()))?,
                    )?;
                    let (rows, uncovered) = score_trajectory(&traj, &gt);
                    EvalOutput {
                        summary: Summary::from_rows(&rows),
                        uncovered_rows: uncovered,
                    }
                }
                _ => bail!(seqtrack::Error::Config(
                    "eval needs --report or --log with --trajectory".into()
                )),
            };
            common.write_json(&summary)?;
        }
        Command::Scenario => {
            let mut out = common.output()?;
            out.write_all(Scenario::default_toml().as_bytes())?;
            out.flush()?;
        }
        Command::Config => {
            let cfg = common.track_config()?;
            let mut out = common.output()?;
            out.write_all(cfg.to_kv_string().as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    err.chain()
        .find_map(|e| {
            e.downcast_ref::<seqtrack::Error>()
                .map(|e| e.kind())
                .or_else(|| e.downcast_ref::<io::Error>().map(|_| "io"))
        })
        .unwrap_or("error")
}

fn error_line(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_line("usage", e.to_string().trim_end()));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(error_kind(&e), &format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
