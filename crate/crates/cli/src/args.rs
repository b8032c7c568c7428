//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::CliResult;
use crate::manifest::Manifest;

#[derive(Debug, Parser)]
#[command(name = "pcrobust", version, about = "LiDAR corruption benchmark toolkit")]
pub struct Cli {
    /// Log level filter (error, warn, info, debug).
    #[arg(long, global = true, default_value = "info")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write every (frame, kind, severity) of the manifest.
    Corrupt {
        /// Dataset root with velodyne/, label_2/ and calib/.
        #[arg(long)]
        root: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Evenly spaced sample of this many frames.
        #[arg(long)]
        subset: Option<usize>,
        /// Symlink severity-0 clouds instead of copying them.
        #[arg(long)]
        symlink_clean: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// KNN statistical outlier removal on every .bin below a directory.
    Denoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Per-neighborhood instead of global distance statistics.
        #[arg(long)]
        local_threshold: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score detections against clean and corrupted ground truth.
    Evaluate {
        /// Detections: clean/<frame>.txt and <kind>/<severity>/<frame>.txt.
        #[arg(long)]
        dets: Option<PathBuf>,
        #[arg(long)]
        root: Option<PathBuf>,
        /// Ground-truth label dir (default <root>/label_2).
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        calib: Option<PathBuf>,
        /// Output of `corrupt`, for the labels of box-moving kinds.
        #[arg(long)]
        corrupt_root: Option<PathBuf>,
        #[arg(long)]
        detector: Option<String>,
        /// Detections below this score are left out of the bug partition.
        #[arg(long)]
        score_floor: Option<f64>,
        /// Directory for report.csv, report.json and report.txt.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render report CSVs as text tables.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a ray-cast KITTI-layout fixture dataset.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 4)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// A reduced scan (about 23k points per frame).
        #[arg(long)]
        small: bool,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML manifest; flags override its keys.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Comma-separated KITTI class names.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    /// Comma-separated levels in 0..=5.
    #[arg(long, value_delimiter = ',')]
    pub severities: Option<Vec<u8>>,
    /// Comma-separated corruption names, or `all`.
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<String>>,
    #[arg(long)]
    pub allow_partial: bool,
    /// Label files hold LiDAR-frame centers and yaw.
    #[arg(long)]
    pub labels_in_lidar: bool,
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long)]
    pub knn_sigma: Option<f64>,
    /// 40 for R40, 11 for the 11-point variant.
    #[arg(long)]
    pub recall_points: Option<usize>,
}

impl CommonArgs {
    /// The manifest file (if any) overlaid with the flags.
    pub fn merged(&self, extra: Manifest) -> CliResult<Manifest> {
        let base = match &self.manifest {
            Some(p) => Manifest::load(p)?,
            None => Manifest::default(),
        };
        let flags = Manifest {
            seed: self.seed,
            jobs: self.jobs,
            classes: self.classes.clone(),
            severities: self.severities.clone(),
            kinds: self.kinds.clone(),
            allow_partial: self.allow_partial.then_some(true),
            labels_in_lidar: self.labels_in_lidar.then_some(true),
            knn_k: self.knn_k,
            knn_sigma: self.knn_sigma,
            recall_points: self.recall_points,
            ..Default::default()
        };
        Ok(base.overlay(extra.overlay(flags)))
    }
}
