//! Ray-cast stand-in for a KITTI sweep: a 64-beam spinning scan of a flat
//! ground plane, a ring of walls and box-shaped road users, written in the
//! KITTI file layout.

use std::fs;
use std::path::Path;

use crate::corruption::Frame;
use crate::error::{Error, Result};
use crate::geometry::{Box3D, ObjectClass, Point, PointCloud};
use crate::kitti::{write_calibration, write_labels, write_point_cloud, CalibrationMatrices, LabelCoords};
use crate::rng::RandomStream;

pub const SENSOR_HEIGHT_M: f64 = 1.73;
pub const IMAGE_SIZE_PX: [f64; 2] = [1242.0, 375.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub beams: usize,
    pub azimuth_steps: usize,
    /// Elevation of the top and bottom beam, degrees.
    pub elevation_deg: (f64, f64),
    pub objects: usize,
    pub wall_radius_m: f64,
    pub wall_height_m: f64,
    pub max_range_m: f64,
    /// Share of returns whose reflectance is exactly zero.
    pub zero_reflectance_share: f64,
}

impl Default for SynthConfig {
    /// About 120k returns per sweep.
    fn default() -> Self {
        Self {
            beams: 64,
            azimuth_steps: 1875,
            elevation_deg: (2.0, -24.8),
            objects: 12,
            wall_radius_m: 60.0,
            wall_height_m: 6.0,
            max_range_m: 120.0,
            zero_reflectance_share: 0.02,
        }
    }
}

impl SynthConfig {
    /// A reduced scan for fast tests.
    pub fn small() -> Self {
        Self {
            azimuth_steps: 360,
            objects: 6,
            ..Self::default()
        }
    }
}

const CLASSES: [(ObjectClass, [f64; 3]); 4] = [
    (ObjectClass::Car, [3.9, 1.6, 1.5]),
    (ObjectClass::Car, [4.4, 1.8, 1.6]),
    (ObjectClass::Pedestrian, [0.8, 0.6, 1.75]),
    (ObjectClass::Cyclist, [1.8, 0.6, 1.7]),
];

/// Places non-overlapping upright boxes on the ground, in front of the
/// sensor so they fall inside the camera view.
fn place_objects(cfg: &SynthConfig, calib: &CalibrationMatrices, rng: &mut RandomStream) -> Vec<Box3D> {
    let mut boxes: Vec<Box3D> = Vec::new();
    let mut attempts = 0;
    while boxes.len() < cfg.objects && attempts < cfg.objects * 50 {
        attempts += 1;
        let (class, dims) = &CLASSES[rng.below(CLASSES.len())];
        let dims = dims.map(|d| d * rng.uniform(0.9, 1.1));
        let range = rng.uniform(6.0, 40.0);
        let az = rng.uniform(-0.6, 0.6);
        let center = [range * az.cos(), range * az.sin(), -SENSOR_HEIGHT_M + dims[2] / 2.0];
        let b = Box3D::new(center, dims, rng.uniform(-std::f64::consts::PI, std::f64::consts::PI), class.clone());
        let r = dims[0].hypot(dims[1]) / 2.0;
        let clear = boxes.iter().all(|o| {
            let ro = o.length.hypot(o.width) / 2.0;
            (o.cx - b.cx).hypot(o.cy - b.cy) > r + ro + 0.5
        });
        if clear {
            boxes.push(b);
        }
    }
    for b in &mut boxes {
        b.occlusion = Some(rng.below(3) as u8);
        let (bbox, truncation) = image_box(b, calib);
        b.image_bbox = Some(bbox);
        b.truncation = Some(truncation);
    }
    boxes
}

/// Projected 2D box clipped to the image, and the clipped-away share of
/// its width as truncation.
fn image_box(b: &Box3D, calib: &CalibrationMatrices) -> ([f64; 4], f64) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for c in b.corners() {
        if let Some(uv) = calib.project_rect(calib.velo_to_rect_point(c)) {
            for a in 0..2 {
                lo[a] = lo[a].min(uv[a]);
                hi[a] = hi[a].max(uv[a]);
            }
        }
    }
    let full = (hi[0] - lo[0]).max(1e-9);
    let clip = |v: f64, a: usize| v.clamp(0.0, IMAGE_SIZE_PX[a] - 1.0);
    let bbox = [clip(lo[0], 0), clip(lo[1], 1), clip(hi[0], 0), clip(hi[1], 1)];
    let truncation = (1.0 - (bbox[2] - bbox[0]) / full).clamp(0.0, 1.0);
    // Two decimals like the KITTI files.
    (bbox.map(|v| (v * 100.0).round() / 100.0), (truncation * 100.0).round() / 100.0)
}

/// Entry distance of the ray `dir` from the origin into the box, if hit.
fn ray_box(dir: [f64; 3], b: &Box3D) -> Option<f64> {
    let o = b.to_local([0.0; 3]);
    let (s, c) = b.yaw.sin_cos();
    let d = [c * dir[0] + s * dir[1], -s * dir[0] + c * dir[1], dir[2]];
    let h = b.half_extents();
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for a in 0..3 {
        if d[a].abs() < 1e-12 {
            if o[a].abs() > h[a] {
                return None;
            }
            continue;
        }
        let (mut ta, mut tb) = ((-h[a] - o[a]) / d[a], (h[a] - o[a]) / d[a]);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return None;
        }
    }
    (t0 > 0.0).then_some(t0)
}

fn f32_exact(v: f64) -> f64 {
    v as f32 as f64
}

/// One sweep with its ground truth. Coordinates are rounded to `f32` so
/// the frame survives a velodyne write/read unchanged.
pub fn synth_frame(frame_id: &str, seed: u64, cfg: &SynthConfig) -> (Frame, CalibrationMatrices) {
    let calib = CalibrationMatrices::kitti_like();
    let mut rng = RandomStream::new(seed);
    let boxes = place_objects(cfg, &calib, &mut rng);
    let mut points = Vec::with_capacity(cfg.beams * cfg.azimuth_steps);
    let (top, bottom) = cfg.elevation_deg;
    for beam in 0..cfg.beams {
        let elev = (top + (bottom - top) * beam as f64 / (cfg.beams - 1).max(1) as f64).to_radians();
        for step in 0..cfg.azimuth_steps {
            let az = -std::f64::consts::PI + std::f64::consts::TAU * (step as f64 + 0.5) / cfg.azimuth_steps as f64;
            let dir = [elev.cos() * az.cos(), elev.cos() * az.sin(), elev.sin()];
            let mut hit: Option<(f64, f64)> = None;
            let mut consider = |t: f64, refl: f64| {
                if t > 0.0 && t <= cfg.max_range_m && hit.is_none_or(|(ht, _)| t < ht) {
                    hit = Some((t, refl));
                }
            };
            if dir[2] < 0.0 {
                consider(-SENSOR_HEIGHT_M / dir[2], 0.15);
            }
            let horizontal = elev.cos();
            let t_wall = cfg.wall_radius_m / horizontal;
            if dir[2] * t_wall <= cfg.wall_height_m - SENSOR_HEIGHT_M {
                consider(t_wall, 0.35);
            }
            for b in &boxes {
                if let Some(t) = ray_box(dir, b) {
                    consider(t, 0.6);
                }
            }
            let Some((t, base)) = hit else { continue };
            let t = t + rng.gaussian(0.0, 0.01);
            let refl = if rng.unit() < cfg.zero_reflectance_share {
                0.0
            } else {
                (base + rng.uniform(-0.1, 0.1)).clamp(0.01, 1.0)
            };
            points.push(Point::new(
                f32_exact(t * dir[0]),
                f32_exact(t * dir[1]),
                f32_exact(t * dir[2]),
                f32_exact(refl),
            ));
        }
    }
    (
        Frame {
            cloud: PointCloud::new(frame_id, points),
            boxes,
        },
        calib,
    )
}

/// Writes `velodyne/`, `label_2/` and `calib/` entries for one frame.
pub fn write_kitti_frame(root: &Path, frame: &Frame, calib: &CalibrationMatrices) -> Result<()> {
    for dir in ["velodyne", "label_2", "calib"] {
        let d = root.join(dir);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let id = &frame.cloud.frame_id;
    write_point_cloud(&frame.cloud, root.join("velodyne").join(format!("{id}.bin")))?;
    write_labels(&frame.boxes, &[], Some(calib), LabelCoords::Camera, root.join("label_2").join(format!("{id}.txt")))?;
    write_calibration(calib, root.join("calib").join(format!("{id}.txt")))
}

/// `count` frames named `000000`, `000001`, ...; frame `i` uses seed
/// `seed + i`.
pub fn write_kitti_dataset(root: &Path, count: usize, seed: u64, cfg: &SynthConfig) -> Result<Vec<String>> {
    let mut ids = Vec::with_capacity(count);
    for i in 0..count {
        let id = format!("{i:06}");
        let (frame, calib) = synth_frame(&id, seed.wrapping_add(i as u64), cfg);
        write_kitti_frame(root, &frame, &calib)?;
        ids.push(id);
    }
    Ok(ids)
}
