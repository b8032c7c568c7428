//! `denoise`: KNN outlier removal over every `.bin` below a directory.

use std::path::Path;

use pcrobust_core::denoise::{knn_outlier_removal_with, ThresholdScope};
use pcrobust_core::kitti;
use rayon::prelude::*;
use serde::Serialize;

use crate::corrupt::pool;
use crate::error::{usage, CliError, CliResult};
use crate::fsutil;
use crate::manifest::Settings;

pub const COUNTS_FILE: &str = "denoise.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenoiseRow {
    pub file: String,
    pub points_in: usize,
    pub removed: usize,
    pub too_small: bool,
    pub error: Option<String>,
}

/// Mirrors the tree under `input` into `output`; label and other text
/// files are copied so a corrupted dataset stays usable.
pub fn cmd_denoise(input: &Path, output: &Path, s: &Settings) -> CliResult<Vec<DenoiseRow>> {
    if !input.is_dir() {
        return Err(usage(format!("input {} is not a directory", input.display())));
    }
    let scope = if s.local_threshold {
        ThresholdScope::Local
    } else {
        ThresholdScope::Global
    };
    fsutil::create_dir(output)?;
    for rel in fsutil::walk(input, "txt")? {
        fsutil::copy(&input.join(&rel), &output.join(&rel))?;
    }
    let files = fsutil::walk(input, "bin")?;
    let rows: Vec<DenoiseRow> = pool(s.jobs)?.install(|| {
        files
            .par_iter()
            .map(|rel| {
                let name = rel.to_string_lossy().into_owned();
                let run = || -> CliResult<DenoiseRow> {
                    let cloud = kitti::read_point_cloud(input.join(rel))?;
                    let out = knn_outlier_removal_with(&cloud, s.knn_k, s.knn_sigma, scope)?;
                    if out.too_small {
                        log::warn!("{name}: {} points, not more than k = {}; left unchanged", cloud.len(), s.knn_k);
                    }
                    fsutil::write(&output.join(rel), &kitti::encode_points(&out.cloud.points))?;
                    Ok(DenoiseRow {
                        file: name.clone(),
                        points_in: cloud.len(),
                        removed: out.removed.len(),
                        too_small: out.too_small,
                        error: None,
                    })
                };
                run().unwrap_or_else(|e| {
                    log::error!("{name}: {e}");
                    DenoiseRow {
                        file: name.clone(),
                        points_in: 0,
                        removed: 0,
                        too_small: false,
                        error: Some(e.to_string()),
                    }
                })
            })
            .collect()
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| usage(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| usage(format!("csv: {e}")))?;
    fsutil::write(&output.join(COUNTS_FILE), &bytes)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    log::info!(
        "denoise: {} files, {} points removed",
        rows.len(),
        rows.iter().map(|r| r.removed).sum::<usize>()
    );
    if failed > 0 {
        return Err(CliError::Partial {
            failed,
            total: rows.len(),
        });
    }
    Ok(rows)
}
