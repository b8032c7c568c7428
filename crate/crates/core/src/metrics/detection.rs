//! Per-frame matching, the bug partition and average precision.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::iou::iou3d;
use crate::geometry::{Box3D, ObjectClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];

    /// (minimum image-box height in px, maximum occlusion, maximum truncation).
    pub fn thresholds(self) -> (f64, u8, f64) {
        match self {
            Difficulty::Easy => (40.0, 0, 0.15),
            Difficulty::Moderate => (25.0, 1, 0.30),
            Difficulty::Hard => (25.0, 2, 0.50),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Moderate => "moderate",
            Difficulty::Hard => "hard",
        }
    }

    /// `None` when the box lacks any of the three attributes.
    pub fn admits(self, gt: &Box3D) -> Option<bool> {
        let (min_h, max_occ, max_trunc) = self.thresholds();
        let h = gt.image_bbox_height()?;
        let occ = gt.occlusion?;
        let trunc = gt.truncation?;
        Some(h >= min_h && occ <= max_occ && trunc <= max_trunc)
    }

    /// Eligibility with the fallback for incomplete labels: Hard only.
    pub fn eligible(self, gt: &Box3D) -> bool {
        self.admits(gt).unwrap_or(self == Difficulty::Hard)
    }
}

pub fn assign_difficulty(gt: &Box3D) -> Vec<Difficulty> {
    if Difficulty::Hard.admits(gt).is_none() {
        log::warn!("ground truth without truncation/occlusion/image box; counted as Hard only");
    }
    Difficulty::ALL.into_iter().filter(|d| d.eligible(gt)).collect()
}

/// True-positive IoU thresholds, defaulting to the per-class KITTI values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IouThresholds {
    pub overrides: Vec<(ObjectClass, f64)>,
}

impl IouThresholds {
    pub fn get(&self, class: &ObjectClass) -> f64 {
        self.overrides
            .iter()
            .find(|(c, _)| c == class)
            .map_or_else(|| class.default_iou_threshold(), |(_, t)| *t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BugCategory {
    /// Correct class and IoU at or above the threshold on an unclaimed box.
    TrueDetection,
    /// Best-overlapping ground truth has another class.
    FalseClassification,
    /// Correct class but below threshold, or the box was already claimed.
    FalseDetection,
    /// No overlap with any ground truth.
    MissedDetection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    /// Ground truth with the highest IoU, if any overlaps.
    pub best_gt: Option<usize>,
    pub max_iou: f64,
    pub class_match: bool,
    pub category: BugCategory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// In input order.
    pub detections: Vec<DetectionOutcome>,
    /// Claiming detection per ground truth.
    pub gt_matched: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugCounts {
    pub td: usize,
    pub fc: usize,
    pub fd: usize,
    pub md: usize,
}

impl BugCounts {
    pub fn total(&self) -> usize {
        self.td + self.fc + self.fd + self.md
    }

    pub fn record(&mut self, c: BugCategory) {
        match c {
            BugCategory::TrueDetection => self.td += 1,
            BugCategory::FalseClassification => self.fc += 1,
            BugCategory::FalseDetection => self.fd += 1,
            BugCategory::MissedDetection => self.md += 1,
        }
    }

    pub fn merge(&mut self, other: &BugCounts) {
        self.td += other.td;
        self.fc += other.fc;
        self.fd += other.fd;
        self.md += other.md;
    }
}

impl MatchResult {
    pub fn counts(&self) -> BugCounts {
        let mut c = BugCounts::default();
        for d in &self.detections {
            c.record(d.category);
        }
        c
    }

    pub fn gt_misses(&self) -> usize {
        self.gt_matched.iter().filter(|m| m.is_none()).count()
    }
}

fn score_of(b: &Box3D) -> f64 {
    b.score.unwrap_or(0.0)
}

/// Indices sorted by descending score, ties by input order.
fn score_order(dets: &[Box3D]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| score_of(&dets[b]).partial_cmp(&score_of(&dets[a])).unwrap_or(Ordering::Equal));
    order
}

/// Assigns every detection of one frame to exactly one bug category.
pub fn classify_detections(dets: &[Box3D], gts: &[Box3D], thresholds: &IouThresholds) -> MatchResult {
    let mut detections = vec![
        DetectionOutcome {
            best_gt: None,
            max_iou: 0.0,
            class_match: false,
            category: BugCategory::MissedDetection,
        };
        dets.len()
    ];
    let mut gt_matched = vec![None; gts.len()];
    for di in score_order(dets) {
        let d = &dets[di];
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            let iou = iou3d(d, g);
            if iou > 0.0 && best.is_none_or(|(_, m)| iou > m) {
                best = Some((gi, iou));
            }
        }
        let out = &mut detections[di];
        let Some((gi, m)) = best else { continue };
        out.best_gt = Some(gi);
        out.max_iou = m;
        out.class_match = gts[gi].class == d.class;
        out.category = if !out.class_match {
            BugCategory::FalseClassification
        } else if m >= thresholds.get(&d.class) && gt_matched[gi].is_none() {
            gt_matched[gi] = Some(di);
            BugCategory::TrueDetection
        } else {
            BugCategory::FalseDetection
        };
    }
    MatchResult { detections, gt_matched }
}

/// Recall levels the precision curve is sampled at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecallGrid {
    /// `1/n, 2/n, ..., 1`.
    Skip0(usize),
    /// `0, 1/(n-1), ..., 1`, the 11-point variant.
    Inclusive(usize),
}

impl RecallGrid {
    pub const R40: RecallGrid = RecallGrid::Skip0(40);
    pub const R11: RecallGrid = RecallGrid::Inclusive(11);

    /// 11 selects the classic inclusive grid; anything else is R<n>.
    pub fn from_points(n: usize) -> RecallGrid {
        if n == 11 {
            RecallGrid::R11
        } else {
            RecallGrid::Skip0(n)
        }
    }

    pub fn levels(self) -> Vec<f64> {
        match self {
            RecallGrid::Skip0(n) => (1..=n).map(|i| i as f64 / n as f64).collect(),
            RecallGrid::Inclusive(n) => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
        }
    }
}

/// Ground truth and detections of one frame, both in the LiDAR frame.
#[derive(Debug, Clone, Copy)]
pub struct EvalFrame<'a> {
    pub gts: &'a [Box3D],
    pub dets: &'a [Box3D],
}

/// `None` when no ground truth of `class` is eligible at `difficulty`.
pub fn average_precision(
    frames: &[EvalFrame<'_>],
    class: &ObjectClass,
    difficulty: Difficulty,
    iou_threshold: f64,
    grid: RecallGrid,
) -> Option<f64> {
    let neighbor = class.neighbor_class();
    let mut n_valid = 0usize;
    // (score, frame, order) so the global sort is total and reproducible.
    let mut scored: Vec<(f64, usize, usize, bool)> = Vec::new();
    for (fi, f) in frames.iter().enumerate() {
        // true: counted ground truth; false: ignored.
        let roles: Vec<Option<bool>> = f
            .gts
            .iter()
            .map(|g| {
                if g.class == *class {
                    Some(difficulty.eligible(g))
                } else if neighbor.as_ref() == Some(&g.class) {
                    Some(false)
                } else {
                    None
                }
            })
            .collect();
        n_valid += roles.iter().filter(|r| **r == Some(true)).count();
        let mut claimed = vec![false; f.gts.len()];
        let dets: Vec<usize> = score_order(f.dets).into_iter().filter(|&i| f.dets[i].class == *class).collect();
        for (rank, di) in dets.into_iter().enumerate() {
            let d = &f.dets[di];
            let mut best_valid: Option<(usize, f64)> = None;
            let mut hits_ignored = false;
            for (gi, g) in f.gts.iter().enumerate() {
                let Some(valid) = roles[gi] else { continue };
                let iou = iou3d(d, g);
                if iou < iou_threshold {
                    continue;
                }
                if valid {
                    if !claimed[gi] && best_valid.is_none_or(|(_, m)| iou > m) {
                        best_valid = Some((gi, iou));
                    }
                } else {
                    hits_ignored = true;
                }
            }
            if let Some((gi, _)) = best_valid {
                claimed[gi] = true;
                scored.push((score_of(d), fi, rank, true));
            } else if !hits_ignored {
                scored.push((score_of(d), fi, rank, false));
            }
        }
    }
    if n_valid == 0 {
        return None;
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut curve = Vec::with_capacity(scored.len());
    let mut tp = 0usize;
    for (i, s) in scored.iter().enumerate() {
        tp += s.3 as usize;
        curve.push((tp as f64 / n_valid as f64, tp as f64 / (i + 1) as f64));
    }
    // Running max from the right gives the interpolated precision.
    for i in (0..curve.len().saturating_sub(1)).rev() {
        curve[i].1 = curve[i].1.max(curve[i + 1].1);
    }
    let levels = grid.levels();
    let mut sum = 0.0;
    let mut j = 0;
    for r in &levels {
        while j < curve.len() && curve[j].0 < r - 1e-12 {
            j += 1;
        }
        if j < curve.len() {
            sum += curve[j].1;
        }
    }
    Some(sum / levels.len() as f64)
}
