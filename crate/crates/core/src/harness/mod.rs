//! Experiment orchestration: configuration files, the deployment loop and
//! hyperparameter sweeps with frontier output.

mod config;
mod run;
mod sweep;

pub use config::{
    ExperimentConfig, Overrides, PolicyContext, PolicyKind, PolicySpec, DEFAULT_BLOCK_LEN, DEFAULT_DELTA_SCALE,
    DEFAULT_NU, DEFAULT_RHO_OFFSETS, DEFAULT_TRUTH_WINDOW, DEFAULT_WINDOW_N,
};
pub use run::{
    detector_signals, ground_truth, prepare_stream, run_deployment, run_on_stream, score, simulate, PreparedStream,
    Trajectory, TrajectoryRecord,
};
pub use sweep::{risk_key, run_sweep, write_frontier_csv, Normalization, SweepOptions, SweepResult, SweepSummary};
