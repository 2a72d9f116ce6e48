//! Run configuration, manifest and the generate → train → certify → report
//! stages behind the command-line tool.
//!
//! All randomness flows from the config's master seed through per-stage
//! streams, so any stage can be rerun on its own and reproduce its outputs
//! byte for byte.

mod config;
mod manifest;
mod stages;

pub use config::{stage_seed, RunConfig, Stage, CONFIG_KEYS};
pub use manifest::{sha256_hex, RunManifest, MANIFEST_FILE};
pub use stages::{
    cmd_certify, cmd_generate, cmd_report, cmd_train, dataset_name, npl_curve_csv, train_report_text, CertifyOutcome,
    GenerateOutcome, ReportOutcome, TrainOutcome, CERT_CSV_FILE, CERT_TABLE_FILE, MODEL_FILE, NPL_CURVE_FILE,
    SUMMARY_FILE, TRAIN_REPORT_FILE,
};
