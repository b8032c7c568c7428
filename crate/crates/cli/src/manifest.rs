//! TOML manifest plus command-line overrides, resolved into [`Settings`].

use std::path::{Path, PathBuf};

use pcrobust_core::weather::WeatherConfig;
use pcrobust_core::{CorruptionConfig, CorruptionKind, ObjectClass, Severity};
use serde::Deserialize;

use crate::error::{usage, CliResult};

/// Every key is optional; a flag given on the command line wins.
/// Relative paths are taken relative to the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Dataset root holding `velodyne/`, `label_2/` and `calib/`.
    pub root: Option<PathBuf>,
    pub velodyne_dir: Option<PathBuf>,
    pub label_dir: Option<PathBuf>,
    pub calib_dir: Option<PathBuf>,
    pub frames: Option<Vec<String>>,
    pub subset: Option<usize>,
    pub output: Option<PathBuf>,
    pub kinds: Option<Vec<String>>,
    pub severities: Option<Vec<u8>>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub classes: Option<Vec<String>>,
    pub labels_in_lidar: Option<bool>,
    pub symlink_clean: Option<bool>,
    pub layers: Option<usize>,
    pub knn_k: Option<usize>,
    pub knn_sigma: Option<f64>,
    pub local_threshold: Option<bool>,
    pub recall_points: Option<usize>,
    pub allow_partial: Option<bool>,
    pub score_floor: Option<f64>,
    pub detections: Option<PathBuf>,
    pub detector: Option<String>,
    pub corrupt_root: Option<PathBuf>,
    pub weather: Option<WeatherConfig>,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Manifest> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read manifest {}: {e}", path.display())))?;
        let mut m: Manifest =
            toml::from_str(&text).map_err(|e| usage(format!("manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut m.root,
            &mut m.velodyne_dir,
            &mut m.label_dir,
            &mut m.calib_dir,
            &mut m.output,
            &mut m.detections,
            &mut m.corrupt_root,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(m)
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(self, top: Manifest) -> Manifest {
        macro_rules! pick {
            ($($f:ident),*) => { Manifest { $($f: top.$f.or(self.$f)),* } };
        }
        pick!(
            root, velodyne_dir, label_dir, calib_dir, frames, subset, output, kinds, severities, seed, jobs,
            classes, labels_in_lidar, symlink_clean, layers, knn_k, knn_sigma, local_threshold, recall_points,
            allow_partial, score_floor, detections, detector, corrupt_root, weather
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub velodyne_dir: Option<PathBuf>,
    pub label_dir: Option<PathBuf>,
    pub calib_dir: Option<PathBuf>,
    pub frames: Option<Vec<String>>,
    pub subset: Option<usize>,
    pub output: Option<PathBuf>,
    pub kinds: Vec<CorruptionKind>,
    pub severities: Vec<Severity>,
    pub seed: u64,
    pub jobs: usize,
    pub classes: Option<Vec<ObjectClass>>,
    pub labels_in_lidar: bool,
    pub symlink_clean: bool,
    pub corruption: CorruptionConfig,
    pub knn_k: usize,
    pub knn_sigma: f64,
    pub local_threshold: bool,
    pub recall_points: usize,
    pub allow_partial: bool,
    pub score_floor: f64,
    pub detections: Option<PathBuf>,
    pub detector: Option<String>,
    pub corrupt_root: Option<PathBuf>,
}

/// Accepts comma-separated entries inside list items as well.
fn split_list(items: &[String]) -> Vec<String> {
    items
        .iter()
        .flat_map(|s| s.split(','))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn parse_kinds(items: &[String]) -> CliResult<Vec<CorruptionKind>> {
    let mut out = Vec::new();
    for name in split_list(items) {
        if name == "all" {
            out.extend(CorruptionKind::ALL);
            continue;
        }
        let kind: CorruptionKind = name
            .parse()
            .map_err(|_| usage(format!("unknown corruption kind `{name}`")))?;
        out.push(kind);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn parse_classes(items: &[String]) -> Vec<ObjectClass> {
    let mut out: Vec<ObjectClass> = split_list(items).iter().map(|s| s.parse().unwrap()).collect();
    out.dedup();
    out
}

impl Settings {
    pub fn resolve(m: Manifest) -> CliResult<Settings> {
        let sub = |d: &Option<PathBuf>, name: &str| -> Option<PathBuf> {
            d.clone().or_else(|| m.root.as_ref().map(|r| r.join(name)))
        };
        let kinds = match &m.kinds {
            Some(k) => parse_kinds(k)?,
            None => CorruptionKind::ALL.to_vec(),
        };
        let mut severities = Vec::new();
        for s in m.severities.clone().unwrap_or_else(|| (0..=5).collect()) {
            severities.push(Severity::new(s).map_err(|_| usage(format!("severity {s} is outside 0..=5")))?);
        }
        severities.sort();
        severities.dedup();
        let classes = m.classes.as_deref().map(parse_classes);
        let knn_k = m.knn_k.unwrap_or(pcrobust_core::denoise::DEFAULT_K);
        if knn_k < 2 {
            return Err(usage("--knn-k must be at least 2"));
        }
        let knn_sigma = m.knn_sigma.unwrap_or(pcrobust_core::denoise::DEFAULT_N_SIGMA);
        if knn_sigma.is_nan() || knn_sigma <= 0.0 {
            return Err(usage("--knn-sigma must be positive"));
        }
        let recall_points = m.recall_points.unwrap_or(40);
        if recall_points < 2 {
            return Err(usage("--recall-points must be at least 2"));
        }
        let jobs = m.jobs.unwrap_or(1);
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        let layers = m.layers.unwrap_or(64);
        if layers == 0 {
            return Err(usage("layers must be at least 1"));
        }
        Ok(Settings {
            velodyne_dir: sub(&m.velodyne_dir, "velodyne"),
            label_dir: sub(&m.label_dir, "label_2"),
            calib_dir: sub(&m.calib_dir, "calib"),
            frames: m.frames.clone(),
            subset: m.subset,
            output: m.output.clone(),
            kinds,
            severities,
            seed: m.seed.unwrap_or(0),
            jobs,
            corruption: CorruptionConfig {
                weather: m.weather.clone().unwrap_or_default(),
                layers,
                target_classes: classes.clone(),
            },
            classes,
            labels_in_lidar: m.labels_in_lidar.unwrap_or(false),
            symlink_clean: m.symlink_clean.unwrap_or(false),
            knn_k,
            knn_sigma,
            local_threshold: m.local_threshold.unwrap_or(false),
            recall_points,
            allow_partial: m.allow_partial.unwrap_or(false),
            score_floor: m.score_floor.unwrap_or(0.0),
            detections: m.detections.clone(),
            detector: m.detector.clone(),
            corrupt_root: m.corrupt_root.clone(),
        })
    }

    /// Frame ids to process: the explicit list or every velodyne file,
    /// thinned to `subset` evenly spaced ids when set.
    pub fn frame_ids(&self) -> CliResult<Vec<String>> {
        let mut ids = match &self.frames {
            Some(f) => f.clone(),
            None => {
                let dir = self.velodyne_dir.as_ref().ok_or_else(|| usage("no dataset root or velodyne dir given"))?;
                if !dir.is_dir() {
                    return Err(usage(format!("velodyne dir {} does not exist", dir.display())));
                }
                crate::fsutil::stems(dir, "bin")?
            }
        };
        if let Some(n) = self.subset {
            if n < ids.len() {
                let step = ids.len() as f64 / n as f64;
                ids = (0..n).map(|i| ids[(i as f64 * step) as usize].clone()).collect();
            }
        }
        Ok(ids)
    }
}
