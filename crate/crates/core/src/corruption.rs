//! The 25 corruption kinds, their canonical names and a single dispatcher
//! that applies one `(kind, severity, seed)` triple to a frame.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Box3D, ObjectClass, PointCloud};
use crate::object::{self, DensityMode, ObjectNoise, PoseMode};
use crate::rng::RandomStream;
use crate::scene::{self, LocalDensityMode, RadialNoise};
use crate::severity::Severity;
use crate::weather::{self, WeatherConfig, WeatherKind};

/// Identifies the parameter tables compiled into this build. Stored in
/// provenance logs and report metadata.
pub const SCHEDULE_VERSION: &str = "pcrobust-schedules-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CorruptionKind {
    Rain,
    Snow,
    Fog,
    UniformRad,
    GaussianRad,
    ImpulseRad,
    Background,
    Upsample,
    Cutout,
    LocalDec,
    LocalInc,
    BeamDel,
    LayerDel,
    Uniform,
    Gaussian,
    Impulse,
    UpsampleObj,
    CutoutObj,
    LocalDecObj,
    LocalIncObj,
    Shear,
    Ffd,
    Scale,
    Rotation,
    Translation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionLevel {
    Scene,
    Object,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 25] = [
        CorruptionKind::Rain,
        CorruptionKind::Snow,
        CorruptionKind::Fog,
        CorruptionKind::UniformRad,
        CorruptionKind::GaussianRad,
        CorruptionKind::ImpulseRad,
        CorruptionKind::Background,
        CorruptionKind::Upsample,
        CorruptionKind::Cutout,
        CorruptionKind::LocalDec,
        CorruptionKind::LocalInc,
        CorruptionKind::BeamDel,
        CorruptionKind::LayerDel,
        CorruptionKind::Uniform,
        CorruptionKind::Gaussian,
        CorruptionKind::Impulse,
        CorruptionKind::UpsampleObj,
        CorruptionKind::CutoutObj,
        CorruptionKind::LocalDecObj,
        CorruptionKind::LocalIncObj,
        CorruptionKind::Shear,
        CorruptionKind::Ffd,
        CorruptionKind::Scale,
        CorruptionKind::Rotation,
        CorruptionKind::Translation,
    ];

    pub fn name(self) -> &'static str {
        use CorruptionKind::*;
        match self {
            Rain => "rain",
            Snow => "snow",
            Fog => "fog",
            UniformRad => "uniform_rad",
            GaussianRad => "gaussian_rad",
            ImpulseRad => "impulse_rad",
            Background => "background",
            Upsample => "upsample",
            Cutout => "cutout",
            LocalDec => "local_dec",
            LocalInc => "local_inc",
            BeamDel => "beam_del",
            LayerDel => "layer_del",
            Uniform => "uniform",
            Gaussian => "gaussian",
            Impulse => "impulse",
            UpsampleObj => "upsample_obj",
            CutoutObj => "cutout_obj",
            LocalDecObj => "local_dec_obj",
            LocalIncObj => "local_inc_obj",
            Shear => "shear",
            Ffd => "ffd",
            Scale => "scale",
            Rotation => "rotation",
            Translation => "translation",
        }
    }

    pub fn level(self) -> CorruptionLevel {
        if (self as usize) < CorruptionKind::Uniform as usize {
            CorruptionLevel::Scene
        } else {
            CorruptionLevel::Object
        }
    }

    pub fn mutates_labels(self) -> bool {
        matches!(
            self,
            CorruptionKind::Scale | CorruptionKind::Rotation | CorruptionKind::Translation
        )
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorruptionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown corruption kind {s:?}")))
    }
}

impl From<CorruptionKind> for String {
    fn from(k: CorruptionKind) -> String {
        k.name().to_string()
    }
}

impl TryFrom<String> for CorruptionKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// One deterministic transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: Severity,
    pub seed: u64,
}

/// A sweep with its LiDAR-frame ground truth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frame {
    pub cloud: PointCloud,
    pub boxes: Vec<Box3D>,
}

/// Side counters a kernel reports alongside its output.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionStats {
    /// Neighborhoods densified with a lower-order surface than requested.
    pub fit_fallbacks: usize,
    /// Neighborhoods densified by jittered duplication.
    pub jitter_fallbacks: usize,
    pub weather_dropped: usize,
    pub weather_relocated: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedFrame {
    pub cloud: PointCloud,
    pub boxes: Vec<Box3D>,
    pub provenance: CorruptionSpec,
    pub stats: CorruptionStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionConfig {
    pub weather: WeatherConfig,
    /// Elevation bins for `layer_del` (64 for KITTI's HDL-64E).
    pub layers: usize,
    /// Classes that object-level kinds act on; `None` means every
    /// non-DontCare class.
    pub target_classes: Option<Vec<ObjectClass>>,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            weather: WeatherConfig::default(),
            layers: 64,
            target_classes: None,
        }
    }
}

impl CorruptionConfig {
    pub fn targets(&self, class: &ObjectClass) -> bool {
        *class != ObjectClass::DontCare
            && self
                .target_classes
                .as_ref()
                .is_none_or(|set| set.contains(class))
    }
}

/// Applies `spec` to `frame`. Severity 0 returns the input unchanged.
pub fn apply(frame: &Frame, spec: CorruptionSpec, config: &CorruptionConfig) -> Result<CorruptedFrame> {
    let mut stats = CorruptionStats::default();
    if spec.severity.is_clean() {
        return Ok(CorruptedFrame {
            cloud: frame.cloud.clone(),
            boxes: frame.boxes.clone(),
            provenance: spec,
            stats,
        });
    }
    let mut rng = RandomStream::new(spec.seed);
    let sev = spec.severity;
    let unchanged_boxes = || frame.boxes.clone();
    use CorruptionKind as K;
    let (cloud, boxes) = match spec.kind {
        K::Rain | K::Snow | K::Fog => {
            let kind = match spec.kind {
                K::Rain => WeatherKind::Rain,
                K::Snow => WeatherKind::Snow,
                _ => WeatherKind::Fog,
            };
            let (cloud, w) = weather::weather(&frame.cloud, kind, sev, &mut rng, &config.weather);
            stats.weather_dropped = w.dropped;
            stats.weather_relocated = w.relocated;
            (cloud, unchanged_boxes())
        }
        K::UniformRad | K::GaussianRad | K::ImpulseRad => {
            let kind = match spec.kind {
                K::UniformRad => RadialNoise::Uniform,
                K::GaussianRad => RadialNoise::Gaussian,
                _ => RadialNoise::Impulse,
            };
            (scene::radial_noise(&frame.cloud, kind, sev, &mut rng)?, unchanged_boxes())
        }
        K::Background => (scene::background_noise(&frame.cloud, sev, &mut rng)?, unchanged_boxes()),
        K::Upsample => (scene::scene_upsample(&frame.cloud, sev, &mut rng)?, unchanged_boxes()),
        K::Cutout => (scene::scene_cutout(&frame.cloud, sev, &mut rng)?, unchanged_boxes()),
        K::LocalDec | K::LocalInc => {
            let mode = if spec.kind == K::LocalDec {
                LocalDensityMode::Dec
            } else {
                LocalDensityMode::Inc
            };
            let cloud = scene::scene_local_density(&frame.cloud, mode, sev, &mut rng, &mut stats)?;
            (cloud, unchanged_boxes())
        }
        K::BeamDel => (scene::beam_delete(&frame.cloud, sev, &mut rng)?, unchanged_boxes()),
        K::LayerDel => {
            let cloud = scene::layer_delete(&frame.cloud, sev, config.layers, &mut rng, &mut stats)?;
            (cloud, unchanged_boxes())
        }
        K::Uniform | K::Gaussian | K::Impulse | K::UpsampleObj => {
            let kind = match spec.kind {
                K::Uniform => ObjectNoise::Uniform,
                K::Gaussian => ObjectNoise::Gaussian,
                K::Impulse => ObjectNoise::Impulse,
                _ => ObjectNoise::Upsample,
            };
            object::object_noise(frame, kind, sev, &mut rng, config)?
        }
        K::CutoutObj | K::LocalDecObj | K::LocalIncObj => {
            let mode = match spec.kind {
                K::CutoutObj => DensityMode::Cutout,
                K::LocalDecObj => DensityMode::Dec,
                _ => DensityMode::Inc,
            };
            object::object_density(frame, mode, sev, &mut rng, config, &mut stats)?
        }
        K::Shear => object::object_shear(frame, sev, &mut rng, config),
        K::Ffd => object::object_ffd(frame, sev, &mut rng, config),
        K::Scale => object::object_scale(frame, sev, &mut rng, config),
        K::Rotation => object::object_pose(frame, PoseMode::Rotate, sev, &mut rng, config),
        K::Translation => object::object_pose(frame, PoseMode::Translate, sev, &mut rng, config),
    };
    Ok(CorruptedFrame {
        cloud,
        boxes,
        provenance: spec,
        stats,
    })
}
