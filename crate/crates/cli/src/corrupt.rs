//! `corrupt`: every (frame, kind, severity) of the manifest to disk.

use std::path::{Path, PathBuf};

use pcrobust_core::corruption::{CorruptionLevel, SCHEDULE_VERSION};
use pcrobust_core::kitti::{self, CalibrationMatrices, LabelCoords, LabelSet};
use pcrobust_core::rng::{derive_seed, ALGORITHM_ID};
use pcrobust_core::{apply, CorruptionKind, CorruptionSpec, Frame, Severity};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, CliError, CliResult};
use crate::fsutil;
use crate::manifest::Settings;

pub const PROVENANCE_FILE: &str = "provenance.jsonl";
pub const RUN_FILE: &str = "run.json";

pub fn cloud_path(out: &Path, kind: CorruptionKind, severity: Severity, frame: &str) -> PathBuf {
    out.join(kind.name())
        .join(severity.level().to_string())
        .join("velodyne")
        .join(format!("{frame}.bin"))
}

pub fn label_path(out: &Path, kind: CorruptionKind, severity: Severity, frame: &str) -> PathBuf {
    out.join(kind.name())
        .join(severity.level().to_string())
        .join("label_2")
        .join(format!("{frame}.txt"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub frame: String,
    pub kind: String,
    pub severity: u8,
    pub seed: u64,
    pub rng: String,
    pub schedule_version: String,
    pub points_in: usize,
    pub points_out: usize,
    pub fit_fallbacks: usize,
    pub jitter_fallbacks: usize,
    pub weather_dropped: usize,
    pub weather_relocated: usize,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct RunInfo<'a> {
    schedule_version: &'a str,
    rng: &'a str,
    seed: u64,
    frames: usize,
    kinds: Vec<&'a str>,
    severities: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorruptSummary {
    pub outputs: usize,
    pub failed: usize,
}

pub(crate) fn coords(s: &Settings) -> LabelCoords {
    if s.labels_in_lidar {
        LabelCoords::Lidar
    } else {
        LabelCoords::Camera
    }
}

pub(crate) fn load_calib(s: &Settings, frame: &str) -> pcrobust_core::Result<Option<CalibrationMatrices>> {
    if s.labels_in_lidar {
        return Ok(None);
    }
    match &s.calib_dir {
        Some(dir) => kitti::read_calibration(dir.join(format!("{frame}.txt"))).map(Some),
        None => Ok(None),
    }
}

struct Input {
    cloud_path: PathBuf,
    label_path: Option<PathBuf>,
    frame: Frame,
    ignored: Vec<kitti::LabelRecord>,
    calib: Option<CalibrationMatrices>,
}

fn load_frame(s: &Settings, frame: &str, needs_labels: bool) -> pcrobust_core::Result<Input> {
    let cloud_path = s.velodyne_dir.as_ref().expect("checked").join(format!("{frame}.bin"));
    let (mut cloud, clamped) = kitti::read_point_cloud_with_stats(&cloud_path)?;
    if clamped > 0 {
        log::warn!("{frame}: {clamped} reflectance values clamped to [0, 1]");
    }
    cloud.frame_id = frame.to_string();
    let label_path = s
        .label_dir
        .as_ref()
        .map(|d| d.join(format!("{frame}.txt")))
        .filter(|p| p.is_file());
    let mut calib = None;
    let mut labels = LabelSet::default();
    if let Some(lp) = &label_path {
        calib = load_calib(s, frame)?;
        labels = kitti::read_labels(lp, calib.as_ref(), coords(s))?;
    } else if needs_labels {
        return Err(pcrobust_core::Error::InvalidArgument(format!(
            "{frame}: object-level corruptions need a label file"
        )));
    }
    Ok(Input {
        cloud_path,
        label_path,
        frame: Frame {
            cloud,
            boxes: labels.boxes,
        },
        ignored: labels.ignored,
        calib,
    })
}

fn record(frame: &str, spec: &CorruptionSpec, points_in: usize) -> ProvenanceRecord {
    ProvenanceRecord {
        frame: frame.to_string(),
        kind: spec.kind.name().to_string(),
        severity: spec.severity.level(),
        seed: spec.seed,
        rng: ALGORITHM_ID.to_string(),
        schedule_version: SCHEDULE_VERSION.to_string(),
        points_in,
        points_out: points_in,
        fit_fallbacks: 0,
        jitter_fallbacks: 0,
        weather_dropped: 0,
        weather_relocated: 0,
        warnings: Vec::new(),
        error: None,
    }
}

fn specs(s: &Settings, frame: &str) -> Vec<CorruptionSpec> {
    let mut out = Vec::new();
    for &kind in &s.kinds {
        for &severity in &s.severities {
            let seed = derive_seed(s.seed, frame, kind.name(), severity.level());
            out.push(CorruptionSpec { kind, severity, seed });
        }
    }
    out
}

fn run_one(s: &Settings, out: &Path, input: &Input, spec: CorruptionSpec) -> CliResult<ProvenanceRecord> {
    let frame = &input.frame.cloud.frame_id;
    let mut rec = record(frame, &spec, input.frame.cloud.len());
    let dst = cloud_path(out, spec.kind, spec.severity, frame);
    if spec.severity.is_clean() {
        if s.symlink_clean {
            fsutil::symlink(&input.cloud_path, &dst)?;
        } else {
            fsutil::copy(&input.cloud_path, &dst)?;
        }
        if spec.kind.mutates_labels() {
            if let Some(lp) = &input.label_path {
                fsutil::copy(lp, &label_path(out, spec.kind, spec.severity, frame))?;
            }
        }
        return Ok(rec);
    }
    let result = apply(&input.frame, spec, &s.corruption)?;
    fsutil::write(&dst, &kitti::encode_points(&result.cloud.points))?;
    if spec.kind.mutates_labels() {
        let text = kitti::format_labels(&result.boxes, &input.ignored, input.calib.as_ref(), coords(s))?;
        fsutil::write(&label_path(out, spec.kind, spec.severity, frame), text.as_bytes())?;
    }
    rec.points_out = result.cloud.len();
    rec.fit_fallbacks = result.stats.fit_fallbacks;
    rec.jitter_fallbacks = result.stats.jitter_fallbacks;
    rec.weather_dropped = result.stats.weather_dropped;
    rec.weather_relocated = result.stats.weather_relocated;
    rec.warnings = result.stats.warnings;
    Ok(rec)
}

fn process_frame(s: &Settings, out: &Path, frame: &str, needs_labels: bool) -> Vec<ProvenanceRecord> {
    let specs = specs(s, frame);
    let input = match load_frame(s, frame, needs_labels) {
        Ok(i) => i,
        Err(e) => {
            log::error!("{frame}: {e}");
            return specs
                .iter()
                .map(|spec| ProvenanceRecord {
                    error: Some(e.to_string()),
                    ..record(frame, spec, 0)
                })
                .collect();
        }
    };
    specs
        .into_iter()
        .map(|spec| {
            run_one(s, out, &input, spec).unwrap_or_else(|e| {
                log::error!("{frame} {} {}: {e}", spec.kind, spec.severity);
                ProvenanceRecord {
                    error: Some(e.to_string()),
                    ..record(frame, &spec, input.frame.cloud.len())
                }
            })
        })
        .collect()
}

pub(crate) fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| usage(format!("cannot start {jobs} workers: {e}")))
}

pub fn cmd_corrupt(s: &Settings) -> CliResult<CorruptSummary> {
    let out = s.output.as_ref().ok_or_else(|| usage("corrupt needs an output directory"))?;
    if s.velodyne_dir.is_none() {
        return Err(usage("corrupt needs a dataset root or velodyne dir"));
    }
    if s.kinds.is_empty() || s.severities.is_empty() {
        return Err(usage("nothing to do: empty kind or severity set"));
    }
    let frames = s.frame_ids()?;
    let needs_labels = s.kinds.iter().any(|k| k.level() == CorruptionLevel::Object);
    fsutil::create_dir(out)?;
    let per_frame: Vec<Vec<ProvenanceRecord>> =
        pool(s.jobs)?.install(|| frames.par_iter().map(|f| process_frame(s, out, f, needs_labels)).collect());
    let mut records: Vec<ProvenanceRecord> = per_frame.into_iter().flatten().collect();
    // Frame order, then the canonical order of kinds, then severity.
    let rank = |name: &str| CorruptionKind::ALL.iter().position(|k| k.name() == name);
    records.sort_by(|a, b| {
        (&a.frame, rank(&a.kind), a.severity).cmp(&(&b.frame, rank(&b.kind), b.severity))
    });
    let mut log = String::new();
    for r in &records {
        log.push_str(&serde_json::to_string(r).expect("plain record"));
        log.push('\n');
    }
    fsutil::write(&out.join(PROVENANCE_FILE), log.as_bytes())?;
    let info = RunInfo {
        schedule_version: SCHEDULE_VERSION,
        rng: ALGORITHM_ID,
        seed: s.seed,
        frames: frames.len(),
        kinds: s.kinds.iter().map(|k| k.name()).collect(),
        severities: s.severities.iter().map(|v| v.level()).collect(),
    };
    fsutil::write(&out.join(RUN_FILE), serde_json::to_string_pretty(&info).expect("plain").as_bytes())?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let summary = CorruptSummary {
        outputs: records.len() - failed,
        failed,
    };
    log::info!("corrupt: {} outputs, {} failed", summary.outputs, summary.failed);
    if failed > 0 {
        return Err(CliError::Partial {
            failed,
            total: records.len(),
        });
    }
    Ok(summary)
}
