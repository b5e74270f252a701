//! Log I/O, run configuration, replay, metrics and sweeps.

pub mod config;
pub mod log;
pub mod report;
pub mod sweep;
pub mod track;

pub use config::{InitSpec, Mode, TrackConfig};
pub use log::{load_log, read_log, save_log, write_log};
pub use report::{
    read_trajectory_csv, score_trajectory, GroundTruth, Row, Summary, Timing, TrackReport,
};
pub use sweep::{sweep, SweepRow, SweepTable};
pub use track::{run_track, MapSource};
