//! Deletion curves and AUDC, effective receptive field estimation, the
//! segmentation-overlap relevance verdict and report aggregation.

mod deletion;
mod relevance;
mod report;

pub use deletion::{
    audc, deletion_curve, effective_rf_area, sample_areas, DeletionConfig, DeletionCurve, RatioOrientation,
};
pub use relevance::{relevance, OverlapRegion, RelevanceVerdict, SegMask, IRRELEVANT_BELOW};
pub use report::{
    aggregate_report, curves_svg, mean_curves, mean_std, read_rows, write_rows, write_samples_csv, write_tau_csv,
    Role, SampleResult, SampleRow, Stat, SummaryRow,
};
