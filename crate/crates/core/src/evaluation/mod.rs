//! Detection matching, ROC / separation / MSE metrics, the Cramér-Rao
//! bound, and the large / small / artificial aperture comparison.

pub mod crb;
pub mod matching;
pub mod metrics;
pub mod report;
pub mod study;

pub use crb::{crb, crb_with_noise, CrbMatrix};
pub use matching::{default_tolerance, match_detections, MatchResult, Pairing};
pub use metrics::{
    angular_cells, doa_mse, histogram, min_angular_separation, roc_counts, roc_curve, validate_thresholds,
    Histogram, MseBucket, RocCounts, RocPoint, FIELD_OF_VIEW_DEG,
};
pub use report::{read_summary, write_report, REPORT_CSV_VERSION};
pub use study::{run_study, Aperture, ArmStats, RocCountsSummary, StudyConfig, StudyReport, StudyScene};
