//! Physics-based certification of a trained density model in environments
//! it was not trained on.
//!
//! The model is evaluated unchanged in every environment; only the reference
//! solution moves with `v_f`. Raw losses are divided by a normalization
//! constant (by default the training environment's own loss) to give the
//! normalized physics loss (NPL), which is banded into Reuse (C), Refine (R)
//! and Discard (D).

mod metrics;
mod refine;
mod report;
mod sweep;

pub use metrics::{bound_violation_rate, pde_residual_loss, pde_residual_loss_on, rel_l2_error, rel_l2_error_on};
pub use refine::{refine, RefineReport};
pub use report::{parse_report_csv, report_csv, report_table, REPORT_CSV_HEADER};
pub use sweep::{
    certification_sweep, certify_against_fields, classify, compute_npl, physics_loss, Category, CertRow,
    CertificationReport, DensityModel, Evaluation, MetricKind, Normalization, NplEntry, NplResult, SweepOptions,
    Thresholds, NPL_FLOOR,
};
