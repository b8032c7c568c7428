//! Per-cell evaluation and the flat robustness report.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detection::{
    average_precision, classify_detections, BugCounts, Difficulty, EvalFrame, IouThresholds, RecallGrid,
};
use super::robustness::{
    bug_rate, corruption_error, corruption_risk, mean_corruption_error, overall_accuracy, BugRates, SeverityTable,
    TableMean,
};
use crate::error::{Error, Result};
use crate::geometry::{Box3D, ObjectClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub classes: Vec<ObjectClass>,
    pub thresholds: IouThresholds,
    pub recall: RecallGrid,
    /// Detections scoring below this are left out of the bug partition.
    /// AP always uses every detection.
    pub score_floor: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            classes: vec![ObjectClass::Car, ObjectClass::Pedestrian, ObjectClass::Cyclist],
            thresholds: IouThresholds::default(),
            recall: RecallGrid::R40,
            score_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: ObjectClass,
    /// Easy, Moderate, Hard.
    pub aps: [Option<f64>; 3],
    pub oa: Option<f64>,
    /// Partition of this class's detections.
    pub bugs: BugCounts,
    /// Ground truth of this class no detection claimed.
    pub gt_misses: usize,
}

impl ClassMetrics {
    pub fn bug_rates(&self) -> Option<BugRates> {
        bug_rate(&self.bugs)
    }
}

/// Everything measured on one (corruption, severity) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub frames: usize,
    pub classes: Vec<ClassMetrics>,
}

impl CellMetrics {
    pub fn class(&self, class: &ObjectClass) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.class == *class)
    }
}

pub fn evaluate_cell(frames: &[EvalFrame<'_>], opts: &EvalOptions) -> CellMetrics {
    let per_frame: Vec<(Vec<BugCounts>, Vec<usize>)> = frames
        .par_iter()
        .map(|f| {
            let kept: Vec<Box3D> = f
                .dets
                .iter()
                .filter(|d| d.score.unwrap_or(0.0) >= opts.score_floor)
                .cloned()
                .collect();
            let m = classify_detections(&kept, f.gts, &opts.thresholds);
            let mut bugs = vec![BugCounts::default(); opts.classes.len()];
            let mut misses = vec![0usize; opts.classes.len()];
            for (d, out) in kept.iter().zip(&m.detections) {
                if let Some(ci) = opts.classes.iter().position(|c| *c == d.class) {
                    bugs[ci].record(out.category);
                }
            }
            for (g, claim) in f.gts.iter().zip(&m.gt_matched) {
                if claim.is_none() {
                    if let Some(ci) = opts.classes.iter().position(|c| *c == g.class) {
                        misses[ci] += 1;
                    }
                }
            }
            (bugs, misses)
        })
        .collect();
    let classes = opts
        .classes
        .iter()
        .enumerate()
        .map(|(ci, class)| {
            let threshold = opts.thresholds.get(class);
            let aps = Difficulty::ALL.map(|d| average_precision(frames, class, d, threshold, opts.recall));
            let mut bugs = BugCounts::default();
            let mut gt_misses = 0;
            for (b, m) in &per_frame {
                bugs.merge(&b[ci]);
                gt_misses += m[ci];
            }
            ClassMetrics {
                class: class.clone(),
                aps,
                oa: overall_accuracy(&aps),
                bugs,
                gt_misses,
            }
        })
        .collect();
    CellMetrics {
        frames: frames.len(),
        classes,
    }
}

pub const ROW_CELL: &str = "cell";
pub const ROW_MEAN: &str = "mean";
pub const CLEAN_NAME: &str = "clean";
pub const ALL_NAME: &str = "all";

/// One CSV line. Fractions, not percentages. For `mean` rows `ce` holds
/// mCE and the `cr_*` columns hold mCR.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub row_type: String,
    pub detector: String,
    pub class: String,
    pub corruption: String,
    pub severity: Option<u8>,
    pub ap_easy: Option<f64>,
    pub ap_moderate: Option<f64>,
    pub ap_hard: Option<f64>,
    pub oa: Option<f64>,
    pub ce: Option<f64>,
    pub br_td: Option<f64>,
    pub br_fc: Option<f64>,
    pub br_fd: Option<f64>,
    pub br_md: Option<f64>,
    pub cr_fc: Option<f64>,
    pub cr_fd: Option<f64>,
    pub cr_md: Option<f64>,
    pub n_det: Option<usize>,
    pub gt_misses: Option<usize>,
    /// Cells averaged in a mean row.
    pub cells: Option<usize>,
    pub partial: Option<bool>,
}

pub const CSV_HEADER: [&str; 21] = [
    "row_type",
    "detector",
    "class",
    "corruption",
    "severity",
    "ap_easy",
    "ap_moderate",
    "ap_hard",
    "oa",
    "ce",
    "br_td",
    "br_fc",
    "br_fd",
    "br_md",
    "cr_fc",
    "cr_fd",
    "cr_md",
    "n_det",
    "gt_misses",
    "cells",
    "partial",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub schedule_version: String,
    pub seed: Option<u64>,
    pub score_floor: f64,
    pub recall: RecallGrid,
    pub rows: Vec<ReportRow>,
}

fn cell_row(detector: &str, corruption: &str, severity: u8, m: &ClassMetrics) -> ReportRow {
    let br = m.bug_rates();
    ReportRow {
        row_type: ROW_CELL.into(),
        detector: detector.into(),
        class: m.class.to_string(),
        corruption: corruption.into(),
        severity: Some(severity),
        ap_easy: m.aps[0],
        ap_moderate: m.aps[1],
        ap_hard: m.aps[2],
        oa: m.oa,
        br_td: br.map(|b| b.td),
        br_fc: br.map(|b| b.fc),
        br_fd: br.map(|b| b.fd),
        br_md: br.map(|b| b.md),
        n_det: Some(m.bugs.total()),
        gt_misses: Some(m.gt_misses),
        ..Default::default()
    }
}

fn table_mean(t: &SeverityTable, corruptions: &[String], allow_partial: bool) -> Result<Option<TableMean>> {
    match mean_corruption_error(t, corruptions, allow_partial) {
        Ok(m) => Ok(Some(m)),
        Err(Error::IncompleteTable(_)) if allow_partial => Ok(None),
        Err(e) => Err(e),
    }
}

/// Rows for one detector: the clean baseline, every cell in key order,
/// then one mean row per class over `corruptions x 1..=5`.
pub fn build_rows(
    detector: &str,
    clean: &CellMetrics,
    cells: &BTreeMap<(String, u8), CellMetrics>,
    corruptions: &[String],
    allow_partial: bool,
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for base in &clean.classes {
        let mut row = cell_row(detector, CLEAN_NAME, 0, base);
        row.ce = base.oa.map(|_| 0.0);
        if base.bug_rates().is_some() {
            (row.cr_fc, row.cr_fd, row.cr_md) = (Some(0.0), Some(0.0), Some(0.0));
        }
        rows.push(row);
    }
    let mut ce = vec![SeverityTable::default(); clean.classes.len()];
    let mut cr = vec![[SeverityTable::default(), SeverityTable::default(), SeverityTable::default()]; clean.classes.len()];
    for ((corruption, severity), cell) in cells {
        for (ci, base) in clean.classes.iter().enumerate() {
            let Some(m) = cell.class(&base.class) else { continue };
            let mut row = cell_row(detector, corruption, *severity, m);
            if let (Some(a), Some(b)) = (base.oa, m.oa) {
                let v = corruption_error(a, b);
                row.ce = Some(v);
                ce[ci].insert(corruption.clone(), *severity, v);
            }
            if let (Some(a), Some(b)) = (base.bug_rates(), m.bug_rates()) {
                let r = corruption_risk(&b, &a);
                (row.cr_fc, row.cr_fd, row.cr_md) = (Some(r.fc), Some(r.fd), Some(r.md));
                cr[ci][0].insert(corruption.clone(), *severity, r.fc);
                cr[ci][1].insert(corruption.clone(), *severity, r.fd);
                cr[ci][2].insert(corruption.clone(), *severity, r.md);
            }
            rows.push(row);
        }
    }
    // A clean-only evaluation has no table to average.
    if corruptions.is_empty() {
        return Ok(rows);
    }
    for (ci, base) in clean.classes.iter().enumerate() {
        let mce = table_mean(&ce[ci], corruptions, allow_partial)?;
        let mcr = [
            table_mean(&cr[ci][0], corruptions, allow_partial)?,
            table_mean(&cr[ci][1], corruptions, allow_partial)?,
            table_mean(&cr[ci][2], corruptions, allow_partial)?,
        ];
        let partial = mce.is_none_or(|m| m.partial) || mcr.iter().any(|m| m.is_none_or(|m| m.partial));
        rows.push(ReportRow {
            row_type: ROW_MEAN.into(),
            detector: detector.into(),
            class: base.class.to_string(),
            corruption: ALL_NAME.into(),
            ce: mce.map(|m| m.value),
            cr_fc: mcr[0].map(|m| m.value),
            cr_fd: mcr[1].map(|m| m.value),
            cr_md: mcr[2].map(|m| m.value),
            cells: mce.map(|m| m.cells),
            partial: Some(partial),
            ..Default::default()
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car(x: f64) -> Box3D {
        let mut b = Box3D::new([x, 0.0, -0.9], [4.0, 1.6, 1.5], 0.0, ObjectClass::Car);
        b.truncation = Some(0.0);
        b.occlusion = Some(0);
        b.image_bbox = Some([0.0, 0.0, 50.0, 60.0]);
        b
    }

    fn perfect(gts: &[Box3D]) -> Vec<Box3D> {
        gts.iter().map(|g| g.clone().with_score(1.0)).collect()
    }

    #[test]
    fn perfect_everywhere_gives_zero_ce() {
        let gts = vec![car(10.0), car(20.0)];
        let dets = perfect(&gts);
        let f = [EvalFrame { gts: &gts, dets: &dets }];
        let opts = EvalOptions {
            classes: vec![ObjectClass::Car],
            ..Default::default()
        };
        let clean = evaluate_cell(&f, &opts);
        assert_eq!(clean.classes[0].oa, Some(1.0));
        let mut cells = BTreeMap::new();
        for s in 1..=5 {
            cells.insert(("rain".to_string(), s), clean.clone());
        }
        let rows = build_rows("det", &clean, &cells, &["rain".to_string()], false).unwrap();
        assert_eq!(rows.len(), 1 + 5 + 1);
        let mean = rows.last().unwrap();
        assert_eq!(mean.ce, Some(0.0));
        assert_eq!(mean.cr_fd, Some(0.0));
        assert_eq!(mean.partial, Some(false));
        assert!(rows[1..6].iter().all(|r| r.ce == Some(0.0) && r.br_td == Some(1.0)));
    }

    #[test]
    fn missing_severity_refused() {
        let gts = vec![car(10.0)];
        let dets = perfect(&gts);
        let f = [EvalFrame { gts: &gts, dets: &dets }];
        let opts = EvalOptions {
            classes: vec![ObjectClass::Car],
            ..Default::default()
        };
        let clean = evaluate_cell(&f, &opts);
        let mut cells = BTreeMap::new();
        cells.insert(("fog".to_string(), 1), clean.clone());
        let c = ["fog".to_string()];
        assert!(matches!(build_rows("d", &clean, &cells, &c, false), Err(Error::IncompleteTable(g)) if g.len() == 4));
        let rows = build_rows("d", &clean, &cells, &c, true).unwrap();
        assert_eq!(rows.last().unwrap().partial, Some(true));
    }

    #[test]
    fn score_floor_limits_partition_only() {
        let gts = vec![car(10.0)];
        let dets = vec![car(10.0).with_score(0.9), car(40.0).with_score(0.1)];
        let f = [EvalFrame { gts: &gts, dets: &dets }];
        let opts = EvalOptions {
            classes: vec![ObjectClass::Car],
            score_floor: 0.5,
            ..Default::default()
        };
        let m = evaluate_cell(&f, &opts);
        assert_eq!(m.classes[0].bugs.total(), 1);
        assert_eq!(m.classes[0].aps, [Some(1.0); 3]);
    }
}
