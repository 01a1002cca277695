//! Datasets, metrics, experiment configuration, sweeps and the CLI.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod metrics;
pub mod records;
pub mod sweep;

pub use config::{Datasets, ExperimentConfig};
pub use dataset::{load_images, split, synth_dataset};
pub use metrics::{mean_std, psnr, psnr_from_mse, PsnrPeak, PSNR_CAP_DB};
pub use records::{read_records, read_records_file, write_records, write_records_file, TransmissionRecord, CSV_HEADER};
pub use sweep::{check_params, grid, run_baseline, run_sweep, SweepCell, SweepPlan, BOUND_MODEL_ID};
