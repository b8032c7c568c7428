//! `evaluate`: detection files against (possibly corrupted) ground truth.
//!
//! Detections are read from `<dets>/clean/<frame>.txt` and
//! `<dets>/<kind>/<severity>/<frame>.txt`; a missing file means the
//! detector returned nothing for that frame.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pcrobust_core::corruption::SCHEDULE_VERSION;
use pcrobust_core::kitti::{self, CalibrationMatrices};
use pcrobust_core::metrics::report::{build_rows, evaluate_cell, CellMetrics, EvalOptions, RobustnessReport};
use pcrobust_core::metrics::{IouThresholds, RecallGrid};
use pcrobust_core::{Box3D, Error, ObjectClass};

use crate::corrupt::{coords, label_path, load_calib, pool};
use crate::error::{usage, CliError, CliResult};
use crate::fsutil;
use crate::manifest::Settings;
use crate::report::{render_tables, write_csv};

pub const CLEAN_DIR: &str = "clean";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";

pub fn default_classes() -> Vec<ObjectClass> {
    vec![ObjectClass::Car, ObjectClass::Pedestrian, ObjectClass::Cyclist]
}

struct GroundTruth {
    frames: Vec<String>,
    calibs: Vec<Option<CalibrationMatrices>>,
    boxes: Vec<Vec<Box3D>>,
}

fn load_ground_truth(s: &Settings) -> CliResult<GroundTruth> {
    let dir = s.label_dir.as_ref().ok_or_else(|| usage("evaluate needs a label dir or dataset root"))?;
    if !dir.is_dir() {
        return Err(usage(format!("label dir {} does not exist", dir.display())));
    }
    let frames = match &s.frames {
        Some(f) => f.clone(),
        None => fsutil::stems(dir, "txt")?,
    };
    let mut calibs = Vec::with_capacity(frames.len());
    let mut boxes = Vec::with_capacity(frames.len());
    for f in &frames {
        let calib = load_calib(s, f)?;
        boxes.push(kitti::read_labels(dir.join(format!("{f}.txt")), calib.as_ref(), coords(s))?.boxes);
        calibs.push(calib);
    }
    Ok(GroundTruth { frames, calibs, boxes })
}

fn read_dets(dir: &Path, frame: &str, calib: Option<&CalibrationMatrices>, s: &Settings) -> CliResult<Vec<Box3D>> {
    let path = dir.join(format!("{frame}.txt"));
    if !path.is_file() {
        return Ok(Vec::new());
    }
    Ok(kitti::read_detections(&path, calib, coords(s))?)
}

fn eval_dir(s: &Settings, gt: &GroundTruth, gts: &[Vec<Box3D>], dir: &Path, opts: &EvalOptions) -> CliResult<CellMetrics> {
    let mut dets = Vec::with_capacity(gt.frames.len());
    for (i, f) in gt.frames.iter().enumerate() {
        dets.push(read_dets(dir, f, gt.calibs[i].as_ref(), s)?);
    }
    let frames: Vec<_> = gts
        .iter()
        .zip(&dets)
        .map(|(g, d)| pcrobust_core::metrics::EvalFrame { gts: g, dets: d })
        .collect();
    Ok(evaluate_cell(&frames, opts))
}

pub fn cmd_evaluate(s: &Settings) -> CliResult<RobustnessReport> {
    let det_root = s.detections.as_ref().ok_or_else(|| usage("evaluate needs a detections dir"))?;
    let clean_dir = det_root.join(CLEAN_DIR);
    if !clean_dir.is_dir() {
        return Err(usage(format!(
            "missing clean baseline {}; corruption error is undefined without it",
            clean_dir.display()
        )));
    }
    let gt = load_ground_truth(s)?;
    let opts = EvalOptions {
        classes: s.classes.clone().unwrap_or_else(default_classes),
        thresholds: IouThresholds::default(),
        recall: RecallGrid::from_points(s.recall_points),
        score_floor: s.score_floor,
    };
    let detector = s.detector.clone().unwrap_or_else(|| {
        det_root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "detector".into())
    });
    let workers = pool(s.jobs)?;
    let clean = workers.install(|| eval_dir(s, &gt, &gt.boxes, &clean_dir, &opts))?;
    let mut cells = BTreeMap::new();
    for &kind in &s.kinds {
        for &sev in &s.severities {
            let dir: PathBuf = det_root.join(kind.name()).join(sev.level().to_string());
            if !dir.is_dir() {
                continue;
            }
            let mut gts = gt.boxes.clone();
            if kind.mutates_labels() && !sev.is_clean() {
                let Some(root) = &s.corrupt_root else {
                    return Err(usage(format!(
                        "{kind} moves boxes; pass --corrupt-root so its corrupted labels are used"
                    )));
                };
                for (i, f) in gt.frames.iter().enumerate() {
                    let p = label_path(root, kind, sev, f);
                    gts[i] = kitti::read_labels(&p, gt.calibs[i].as_ref(), coords(s))?.boxes;
                }
            }
            let m = workers.install(|| eval_dir(s, &gt, &gts, &dir, &opts))?;
            cells.insert((kind.name().to_string(), sev.level()), m);
        }
    }
    let corruptions: Vec<String> = s.kinds.iter().map(|k| k.name().to_string()).collect();
    let rows = build_rows(&detector, &clean, &cells, &corruptions, s.allow_partial).map_err(|e| match e {
        Error::IncompleteTable(_) => usage(format!("{e}; pass --allow-partial to average the present cells")),
        other => CliError::Core(other),
    })?;
    let report = RobustnessReport {
        schedule_version: SCHEDULE_VERSION.to_string(),
        seed: Some(s.seed),
        score_floor: s.score_floor,
        recall: opts.recall,
        rows,
    };
    if let Some(out) = &s.output {
        fsutil::create_dir(out)?;
        write_csv(&out.join(REPORT_CSV), &report.rows)?;
        let json = serde_json::to_string_pretty(&report).expect("plain report");
        fsutil::write(&out.join(REPORT_JSON), json.as_bytes())?;
        fsutil::write(&out.join(REPORT_TXT), render_tables(&report.rows).as_bytes())?;
    }
    Ok(report)
}
