//! Physically motivated corruptions for KITTI LiDAR sweeps, a KNN outlier
//! filter, and the accuracy/bug-rate metrics used to score 3D detectors on
//! the corrupted data.

pub mod corruption;
pub mod denoise;
pub mod error;
pub mod ffd;
pub mod fit;
pub mod geometry;
pub mod kitti;
pub mod metrics;
pub mod object;
pub mod rng;
pub mod scene;
pub mod severity;
pub mod spatial;
pub mod synth;
pub mod weather;

pub use corruption::{apply, CorruptedFrame, CorruptionConfig, CorruptionKind, CorruptionSpec, Frame};
pub use error::{Error, Result};
pub use geometry::{Box3D, ObjectClass, Point, PointCloud, SphericalPoint};
pub use rng::RandomStream;
pub use severity::Severity;
pub use spatial::KnnIndex;
