//! ROC-AUC, report assembly and table rendering.

mod auc;
pub mod render;
pub mod report;

pub use auc::roc_auc;
pub use render::{format_with_delta, render_table, Layout, Rendered};
pub use report::{build_report, CellKey, CellResult, CorrelationKey, CorrelationResult, ExperimentReport, GenreCounts, RawResults};
