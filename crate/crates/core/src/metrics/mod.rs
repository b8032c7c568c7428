//! Detection scoring: rotated IoU, KITTI-style AP, the per-detection bug
//! partition and the robustness aggregates built on top of them.

pub mod detection;
pub mod iou;
pub mod report;
pub mod robustness;

pub use detection::{
    assign_difficulty, average_precision, classify_detections, BugCategory, BugCounts, Difficulty, EvalFrame,
    IouThresholds, MatchResult, RecallGrid,
};
pub use iou::{bev_intersection_area, iou3d};
pub use report::{evaluate_cell, CellMetrics, ClassMetrics, EvalOptions, ReportRow, RobustnessReport};
pub use robustness::{
    bug_rate, corruption_error, corruption_risk, mean_corruption_error, mean_corruption_risk, overall_accuracy,
    BugRates, SeverityTable, TableMean,
};
