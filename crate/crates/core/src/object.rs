//! Object-level corruptions: each acts on the points inside annotated
//! boxes, object by object in label order, and only `scale`, `rotation`
//! and `translation` rewrite the boxes themselves.

use crate::corruption::{CorruptionConfig, CorruptionStats, Frame};
use crate::error::Result;
use crate::ffd::{FfdLattice, LATTICE_SIZE};
use crate::fit::{densify, DensifyOutcome, SurfaceModel};
use crate::geometry::{normalize_angle, Box3D, Point, PointCloud};
use crate::rng::RandomStream;
use crate::scene::{jitter, portion, Divisors};
use crate::severity::Severity;
use crate::spatial::KnnIndex;

/// Tolerance on every box face for point membership.
pub const MEMBER_MARGIN_M: f64 = 1e-6;

pub const UNIFORM_BOUND_M: [f64; 6] = [0.0, 0.02, 0.04, 0.06, 0.08, 0.10];
pub const GAUSSIAN_STD_M: [f64; 6] = [0.0, 0.02, 0.03, 0.04, 0.05, 0.06];
pub const IMPULSE_DIVISOR: Divisors = [None, Some(30), Some(25), Some(20), Some(15), Some(10)];
pub const IMPULSE_MAGNITUDE_M: f64 = 0.1;
pub const UPSAMPLE_DIVISOR: Divisors = [None, Some(5), Some(4), Some(3), Some(2), Some(1)];
pub const UPSAMPLE_OFFSET_M: f64 = 0.05;
/// Centers per object for the object density kinds.
pub const DENSITY_CENTERS: [usize; 6] = [0, 1, 2, 3, 4, 5];
pub const CUTOUT_NEIGHBORS: usize = 20;
pub const LOCAL_NEIGHBORS: usize = 30;
pub const LOCAL_DEC_FRACTION: f64 = 0.75;
pub const SHEAR_BOUNDS: [(f64, f64); 6] = [
    (0.0, 0.0),
    (0.0, 0.10),
    (0.05, 0.15),
    (0.10, 0.20),
    (0.15, 0.25),
    (0.20, 0.30),
];
pub const FFD_RATIO: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
pub const SCALE_DELTA: [f64; 6] = [0.0, 0.04, 0.08, 0.12, 0.16, 0.20];
pub const ROTATION_BOUNDS_DEG: [(f64, f64); 6] = [
    (0.0, 0.0),
    (0.0, 2.0),
    (3.0, 4.0),
    (5.0, 6.0),
    (7.0, 8.0),
    (9.0, 10.0),
];
/// The top level is (0.9, 1.0) m; see the README for the source table.
pub const TRANSLATION_BOUNDS_M: [(f64, f64); 6] = [
    (0.0, 0.0),
    (0.0, 0.2),
    (0.3, 0.4),
    (0.5, 0.6),
    (0.7, 0.8),
    (0.9, 1.0),
];

/// Points of the cloud that belong to one box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectSlice {
    pub box_index: usize,
    pub members: Vec<usize>,
}

/// One slice per box, in box order. A point inside several boxes goes to
/// the box with the nearest center (lower index on ties).
pub fn extract_objects(cloud: &PointCloud, boxes: &[Box3D]) -> Vec<ObjectSlice> {
    let mut slices: Vec<ObjectSlice> = (0..boxes.len())
        .map(|i| ObjectSlice {
            box_index: i,
            members: Vec::new(),
        })
        .collect();
    if boxes.is_empty() {
        return slices;
    }
    let reach2: Vec<f64> = boxes
        .iter()
        .map(|b| {
            let h = b.half_extents();
            let r = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt() + MEMBER_MARGIN_M;
            r * r
        })
        .collect();
    for (pi, p) in cloud.points.iter().enumerate() {
        let xyz = p.xyz();
        let mut best: Option<(f64, usize)> = None;
        for (bi, b) in boxes.iter().enumerate() {
            let d2 = (xyz[0] - b.cx).powi(2) + (xyz[1] - b.cy).powi(2) + (xyz[2] - b.cz).powi(2);
            if d2 > reach2[bi] || !b.contains(xyz, MEMBER_MARGIN_M) {
                continue;
            }
            if best.is_none_or(|(bd, _)| d2 < bd) {
                best = Some((d2, bi));
            }
        }
        if let Some((_, bi)) = best {
            slices[bi].members.push(pi);
        }
    }
    slices
}

fn targeted_slices(frame: &Frame, config: &CorruptionConfig) -> Vec<ObjectSlice> {
    extract_objects(&frame.cloud, &frame.boxes)
        .into_iter()
        .filter(|s| config.targets(&frame.boxes[s.box_index].class))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectNoise {
    Uniform,
    Gaussian,
    Impulse,
    Upsample,
}

/// Cartesian noise on member points, or jittered copies for `Upsample`.
pub fn object_noise(
    frame: &Frame,
    kind: ObjectNoise,
    severity: Severity,
    rng: &mut RandomStream,
    config: &CorruptionConfig,
) -> Result<(PointCloud, Vec<Box3D>)> {
    let mut cloud = frame.cloud.clone();
    if severity.is_clean() {
        return Ok((cloud, frame.boxes.clone()));
    }
    let level = severity.index();
    let mut spawned = Vec::new();
    for slice in targeted_slices(frame, config) {
        let members = &slice.members;
        match kind {
            ObjectNoise::Uniform => {
                let b = UNIFORM_BOUND_M[level];
                for &i in members {
                    let p = &mut cloud.points[i];
                    p.x += rng.uniform(-b, b);
                    p.y += rng.uniform(-b, b);
                    p.z += rng.uniform(-b, b);
                }
            }
            ObjectNoise::Gaussian => {
                let sigma = GAUSSIAN_STD_M[level];
                for &i in members {
                    let p = &mut cloud.points[i];
                    p.x += rng.gaussian(0.0, sigma);
                    p.y += rng.gaussian(0.0, sigma);
                    p.z += rng.gaussian(0.0, sigma);
                }
            }
            ObjectNoise::Impulse => {
                let count = portion(members.len(), &IMPULSE_DIVISOR, severity);
                for j in rng.choose_without_replacement(members.len(), count)? {
                    let p = &mut cloud.points[members[j]];
                    p.x += rng.sign() * IMPULSE_MAGNITUDE_M;
                    p.y += rng.sign() * IMPULSE_MAGNITUDE_M;
                    p.z += rng.sign() * IMPULSE_MAGNITUDE_M;
                }
            }
            ObjectNoise::Upsample => {
                let count = portion(members.len(), &UPSAMPLE_DIVISOR, severity);
                for j in rng.choose_without_replacement(members.len(), count)? {
                    spawned.push(jitter(&frame.cloud.points[members[j]], UPSAMPLE_OFFSET_M, rng));
                }
            }
        }
    }
    cloud.points.extend(spawned);
    Ok((cloud, frame.boxes.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityMode {
    Cutout,
    Dec,
    Inc,
}

/// Per object, picks up to `severity` member centers and erases (20-NN),
/// thins by 75% (30-NN) or densifies with a plane fit (30-NN) around each.
/// Neighborhoods only contain members of the same object.
pub fn object_density(
    frame: &Frame,
    mode: DensityMode,
    severity: Severity,
    rng: &mut RandomStream,
    config: &CorruptionConfig,
    stats: &mut CorruptionStats,
) -> Result<(PointCloud, Vec<Box3D>)> {
    if severity.is_clean() {
        return Ok((frame.cloud.clone(), frame.boxes.clone()));
    }
    let points = &frame.cloud.points;
    let mut remove = vec![false; points.len()];
    let mut spawned = Vec::new();
    let k = match mode {
        DensityMode::Cutout => CUTOUT_NEIGHBORS,
        DensityMode::Dec | DensityMode::Inc => LOCAL_NEIGHBORS,
    };
    let mut buf = Vec::new();
    let mut neighbors = Vec::new();
    for slice in targeted_slices(frame, config) {
        let members = &slice.members;
        if members.is_empty() {
            continue;
        }
        let n_centers = DENSITY_CENTERS[severity.index()].min(members.len());
        let centers = rng.choose_without_replacement(members.len(), n_centers)?;
        let index = KnnIndex::from_coords(members.iter().map(|&i| points[i].xyz()).collect());
        for c in centers {
            index.knn_into(points[members[c]].xyz(), k, &mut buf);
            match mode {
                DensityMode::Cutout => {
                    for nb in &buf {
                        remove[members[nb.index]] = true;
                    }
                }
                DensityMode::Dec => {
                    let drop = (LOCAL_DEC_FRACTION * buf.len() as f64).floor() as usize;
                    for j in rng.choose_without_replacement(buf.len(), drop)? {
                        remove[members[buf[j].index]] = true;
                    }
                }
                DensityMode::Inc => {
                    neighbors.clear();
                    neighbors.extend(buf.iter().map(|nb| points[members[nb.index]]));
                    if densify(&neighbors, &[SurfaceModel::Plane], rng, &mut spawned) == DensifyOutcome::Jittered {
                        stats.jitter_fallbacks += 1;
                    }
                }
            }
        }
    }
    let mut cloud = frame.cloud.retain_mask(&remove);
    cloud.points.extend(spawned);
    Ok((cloud, frame.boxes.clone()))
}

/// Applies `[[1, a, b], [c, 1, d], [0, 0, 1]]` to members in the box frame.
pub fn shear_members(points: &mut [Point], members: &[usize], b: &Box3D, coeffs: [f64; 4]) {
    let [a, bb, c, d] = coeffs;
    for &i in members {
        let l = b.to_local(points[i].xyz());
        let sheared = [l[0] + a * l[1] + bb * l[2], c * l[0] + l[1] + d * l[2], l[2]];
        let w = b.to_world(sheared);
        // z is untouched by construction; keep the original bits.
        points[i] = points[i].with_xyz([w[0], w[1], points[i].z]);
    }
}

pub fn object_shear(
    frame: &Frame,
    severity: Severity,
    rng: &mut RandomStream,
    config: &CorruptionConfig,
) -> (PointCloud, Vec<Box3D>) {
    let mut cloud = frame.cloud.clone();
    if severity.is_clean() {
        return (cloud, frame.boxes.clone());
    }
    let (lo, hi) = SHEAR_BOUNDS[severity.index()];
    for slice in targeted_slices(frame, config) {
        let mut coeffs = [0.0; 4];
        for c in &mut coeffs {
            *c = rng.uniform(lo, hi) * rng.sign();
        }
        shear_members(&mut cloud.points, &slice.members, &frame.boxes[slice.box_index], coeffs);
    }
    (cloud, frame.boxes.clone())
}

/// Builds the lattice over the members' box-frame bounds and displaces
/// every control point by `U(-ratio, ratio) * extent` per axis.
pub fn random_lattice(local: &[[f64; 3]], ratio: f64, rng: &mut RandomStream) -> FfdLattice {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for l in local {
        for a in 0..3 {
            lo[a] = lo[a].min(l[a]);
            hi[a] = hi[a].max(l[a]);
        }
    }
    let mut lattice = FfdLattice::new(lo, hi);
    let extent = lattice.extent();
    for i in 0..LATTICE_SIZE {
        for j in 0..LATTICE_SIZE {
            for k in 0..LATTICE_SIZE {
                let mut delta = [0.0; 3];
                for a in 0..3 {
                    delta[a] = rng.uniform(-ratio, ratio) * extent[a];
                }
                lattice.displace(i, j, k, delta);
            }
        }
    }
    lattice
}

pub fn object_ffd(
    frame: &Frame,
    severity: Severity,
    rng: &mut RandomStream,
    config: &CorruptionConfig,
) -> (PointCloud, Vec<Box3D>) {
    let mut cloud = frame.cloud.clone();
    if severity.is_clean() {
        return (cloud, frame.boxes.clone());
    }
    let ratio = FFD_RATIO[severity.index()];
    for slice in targeted_slices(frame, config) {
        if slice.members.is_empty() {
            continue;
        }
        let b = &frame.boxes[slice.box_index];
        let local: Vec<[f64; 3]> = slice
            .members
            .iter()
            .map(|&i| b.to_local(cloud.points[i].xyz()))
            .collect();
        let lattice = random_lattice(&local, ratio, rng);
        for (&i, l) in slice.members.iter().zip(&local) {
            cloud.points[i] = cloud.points[i].with_xyz(b.to_world(lattice.deform(*l)));
        }
    }
    (cloud, frame.boxes.clone())
}

/// Scales members and the box along one box-frame axis (0 = length,
/// 1 = width, 2 = height). Height scaling keeps the bottom face in place.
pub fn scale_object(points: &mut [Point], members: &[usize], b: &mut Box3D, axis: usize, factor: f64) {
    let lift = if axis == 2 { b.height * (factor - 1.0) / 2.0 } else { 0.0 };
    for &i in members {
        let mut l = b.to_local(points[i].xyz());
        l[axis] *= factor;
        l[2] += lift;
        points[i] = points[i].with_xyz(b.to_world(l));
    }
    match axis {
        0 => b.length *= factor,
        1 => b.width *= factor,
        _ => {
            b.height *= factor;
            b.cz += lift;
        }
    }
}

pub fn object_scale(
    frame: &Frame,
    severity: Severity,
    rng: &mut RandomStream,
    config: &CorruptionConfig,
) -> (PointCloud, Vec<Box3D>) {
    let mut cloud = frame.cloud.clone();
    let mut boxes = frame.boxes.clone();
    if severity.is_clean() {
        return (cloud, boxes);
    }
    let delta = SCALE_DELTA[severity.index()];
    for slice in targeted_slices(frame, config) {
        let axis = rng.below(3);
        let factor = 1.0 + rng.sign() * delta;
        scale_object(&mut cloud.points, &slice.members, &mut boxes[slice.box_index], axis, factor);
    }
    (cloud, boxes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseMode {
    Rotate,
    Translate,
}

/// Rotates members about the vertical axis through the box center.
pub fn rotate_object(points: &mut [Point], members: &[usize], b: &mut Box3D, angle: f64) {
    let (s, c) = angle.sin_cos();
    for &i in members {
        let p = points[i];
        let dx = p.x - b.cx;
        let dy = p.y - b.cy;
        points[i] = p.with_xyz([b.cx + c * dx - s * dy, b.cy + s * dx + c * dy, p.z]);
    }
    b.yaw = normalize_angle(b.yaw + angle);
}

pub fn translate_object(points: &mut [Point], members: &[usize], b: &mut Box3D, offset: [f64; 2]) {
    for &i in members {
        let p = points[i];
        points[i] = p.with_xyz([p.x + offset[0], p.y + offset[1], p.z]);
    }
    b.cx += offset[0];
    b.cy += offset[1];
}

/// Small rigid motion of each object and its box: a yaw change of
/// `U(lo, hi)` degrees with random direction, or a ground-plane shift of
/// `U(lo, hi)` meters in a uniformly random heading.
pub fn object_pose(
    frame: &Frame,
    mode: PoseMode,
    severity: Severity,
    rng: &mut RandomStream,
    config: &CorruptionConfig,
) -> (PointCloud, Vec<Box3D>) {
    let mut cloud = frame.cloud.clone();
    let mut boxes = frame.boxes.clone();
    if severity.is_clean() {
        return (cloud, boxes);
    }
    for slice in targeted_slices(frame, config) {
        let b = &mut boxes[slice.box_index];
        match mode {
            PoseMode::Rotate => {
                let (lo, hi) = ROTATION_BOUNDS_DEG[severity.index()];
                let angle = rng.uniform(lo, hi).to_radians() * rng.sign();
                rotate_object(&mut cloud.points, &slice.members, b, angle);
            }
            PoseMode::Translate => {
                let (lo, hi) = TRANSLATION_BOUNDS_M[severity.index()];
                let dist = rng.uniform(lo, hi);
                let heading = rng.uniform(-std::f64::consts::PI, std::f64::consts::PI);
                translate_object(&mut cloud.points, &slice.members, b, [dist * heading.cos(), dist * heading.sin()]);
            }
        }
    }
    (cloud, boxes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ObjectClass;
    use std::f64::consts::FRAC_PI_2;

    fn sev(l: u8) -> Severity {
        Severity::new(l).unwrap()
    }

    /// A box filled with `n` random points plus `bg` points far outside.
    fn object_frame(n: usize, bg: usize, seed: u64) -> Frame {
        let b = Box3D::new([10.0, 3.0, -0.9], [4.0, 1.8, 1.6], 0.6, ObjectClass::Car);
        let mut rng = RandomStream::new(seed);
        let mut pts = Vec::new();
        for _ in 0..bg {
            pts.push(Point::new(rng.uniform(-40.0, -20.0), rng.uniform(-5.0, 5.0), -1.7, 0.2));
        }
        for _ in 0..n {
            let l = [rng.uniform(-1.9, 1.9), rng.uniform(-0.85, 0.85), rng.uniform(-0.75, 0.75)];
            pts.push(Point::new(0.0, 0.0, 0.0, rng.uniform(0.0, 1.0)).with_xyz(b.to_world(l)));
        }
        Frame {
            cloud: PointCloud::new("o", pts),
            boxes: vec![b],
        }
    }

    #[test]
    fn membership_basic() {
        let b = Box3D::new([0.0; 3], [1.0, 1.0, 1.0], 0.0, ObjectClass::Car);
        let c = PointCloud::new("m", vec![Point::new(0.0, 0.0, 0.0, 0.0), Point::new(5.0, 5.0, 5.0, 0.0)]);
        assert_eq!(extract_objects(&c, &[b])[0].members, vec![0]);
        assert!(extract_objects(&c, &[]).is_empty());
    }

    #[test]
    fn membership_rotated_extents() {
        // Rotated by 90 degrees, the width axis lies along sensor x.
        let (l, w) = (4.0, 2.0);
        let b = Box3D::new([0.0; 3], [l, w, 1.0], FRAC_PI_2, ObjectClass::Car);
        let c = PointCloud::new(
            "m",
            vec![Point::new(w / 2.0 - 1e-3, 0.0, 0.0, 0.0), Point::new(l / 2.0 - 1e-3, 0.0, 0.0, 0.0)],
        );
        assert_eq!(extract_objects(&c, &[b])[0].members, vec![0]);
    }

    #[test]
    fn overlap_goes_to_nearest_center() {
        let a = Box3D::new([0.0, 0.0, 0.0], [4.0, 4.0, 2.0], 0.0, ObjectClass::Car);
        let b = Box3D::new([1.0, 0.0, 0.0], [4.0, 4.0, 2.0], 0.0, ObjectClass::Car);
        let c = PointCloud::new("m", vec![Point::new(0.2, 0.0, 0.0, 0.0), Point::new(0.9, 0.0, 0.0, 0.0)]);
        let s = extract_objects(&c, &[a, b]);
        assert_eq!(s[0].members, vec![0]);
        assert_eq!(s[1].members, vec![1]);
    }

    #[test]
    fn clean_level_identity_for_all_kernels() {
        let f = object_frame(300, 100, 1);
        let cfg = CorruptionConfig::default();
        let mut rng = RandomStream::new(2);
        let mut st = CorruptionStats::default();
        let same = |(c, b): (PointCloud, Vec<Box3D>)| c == f.cloud && b == f.boxes;
        for k in [ObjectNoise::Uniform, ObjectNoise::Gaussian, ObjectNoise::Impulse, ObjectNoise::Upsample] {
            assert!(same(object_noise(&f, k, Severity::CLEAN, &mut rng, &cfg).unwrap()));
        }
        for m in [DensityMode::Cutout, DensityMode::Dec, DensityMode::Inc] {
            assert!(same(object_density(&f, m, Severity::CLEAN, &mut rng, &cfg, &mut st).unwrap()));
        }
        assert!(same(object_shear(&f, Severity::CLEAN, &mut rng, &cfg)));
        assert!(same(object_ffd(&f, Severity::CLEAN, &mut rng, &cfg)));
        assert!(same(object_scale(&f, Severity::CLEAN, &mut rng, &cfg)));
        assert!(same(object_pose(&f, PoseMode::Rotate, Severity::CLEAN, &mut rng, &cfg)));
        assert!(same(object_pose(&f, PoseMode::Translate, Severity::CLEAN, &mut rng, &cfg)));
    }

    #[test]
    fn upsample_spawns_one_per_member_at_top_level() {
        let f = object_frame(40, 10_000 - 40, 3);
        let (c, _) = object_noise(&f, ObjectNoise::Upsample, sev(5), &mut RandomStream::new(4), &CorruptionConfig::default()).unwrap();
        assert_eq!(c.len(), 10_000 + 40);
        assert_eq!(&c.points[..10_000], &f.cloud.points[..]);
    }

    #[test]
    fn impulse_moves_portion_by_fixed_magnitude() {
        let f = object_frame(300, 50, 5);
        let (c, _) = object_noise(&f, ObjectNoise::Impulse, sev(5), &mut RandomStream::new(6), &CorruptionConfig::default()).unwrap();
        let moved: Vec<_> = f.cloud.points.iter().zip(&c.points).filter(|(a, b)| a != b).collect();
        assert_eq!(moved.len(), 30);
        for (a, b) in moved {
            for d in [b.x - a.x, b.y - a.y, b.z - a.z] {
                assert!((d.abs() - 0.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_spread() {
        let f = object_frame(10_000, 0, 7);
        let (c, _) = object_noise(&f, ObjectNoise::Gaussian, sev(5), &mut RandomStream::new(8), &CorruptionConfig::default()).unwrap();
        for axis in 0..3 {
            let d: Vec<f64> = f.cloud.points.iter().zip(&c.points).map(|(a, b)| b.xyz()[axis] - a.xyz()[axis]).collect();
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
            assert!((sd - 0.06).abs() < 0.002, "axis {axis}: {sd}");
        }
    }

    #[test]
    fn non_members_untouched() {
        let f = object_frame(400, 300, 9);
        let cfg = CorruptionConfig::default();
        let mut st = CorruptionStats::default();
        let outputs = vec![
            object_noise(&f, ObjectNoise::Uniform, sev(4), &mut RandomStream::new(1), &cfg).unwrap().0,
            object_density(&f, DensityMode::Dec, sev(4), &mut RandomStream::new(1), &cfg, &mut st).unwrap().0,
            object_shear(&f, sev(4), &mut RandomStream::new(1), &cfg).0,
            object_ffd(&f, sev(4), &mut RandomStream::new(1), &cfg).0,
            object_scale(&f, sev(4), &mut RandomStream::new(1), &cfg).0,
            object_pose(&f, PoseMode::Translate, sev(4), &mut RandomStream::new(1), &cfg).0,
        ];
        for out in outputs {
            assert_eq!(&out.points[..300], &f.cloud.points[..300]);
        }
    }

    #[test]
    fn class_filter_limits_targets() {
        let f = object_frame(200, 0, 10);
        let cfg = CorruptionConfig {
            target_classes: Some(vec![ObjectClass::Pedestrian]),
            ..Default::default()
        };
        let (c, b) = object_scale(&f, sev(5), &mut RandomStream::new(1), &cfg);
        assert_eq!((c, b), (f.cloud.clone(), f.boxes.clone()));
    }

    /// 10 far-apart clusters of 20 points inside one long box.
    fn clustered_frame() -> Frame {
        let b = Box3D::new([0.0, 0.0, 0.0], [200.0, 2.0, 2.0], 0.0, ObjectClass::Car);
        let mut rng = RandomStream::new(11);
        let mut pts = Vec::new();
        for c in 0..10 {
            let cx = -90.0 + 20.0 * c as f64;
            for _ in 0..20 {
                pts.push(Point::new(cx + rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), 0.5));
            }
        }
        Frame {
            cloud: PointCloud::new("c", pts),
            boxes: vec![b],
        }
    }

    #[test]
    fn cutout_erases_whole_neighborhoods() {
        let f = clustered_frame();
        let cfg = CorruptionConfig::default();
        let mut exact_hits = 0;
        for seed in 0..40 {
            let mut st = CorruptionStats::default();
            let (c, _) = object_density(&f, DensityMode::Cutout, sev(5), &mut RandomStream::new(seed), &cfg, &mut st).unwrap();
            let deleted = 200 - c.len();
            assert_eq!(deleted % 20, 0);
            assert!((20..=100).contains(&deleted));
            let mut per_cluster = [0usize; 10];
            for p in &c.points {
                per_cluster[((p.x + 100.0) / 20.0) as usize] += 1;
            }
            assert!(per_cluster.iter().all(|&n| n == 0 || n == 20));
            if deleted == 100 {
                exact_hits += 1;
            }
        }
        assert!(exact_hits > 0);
    }

    #[test]
    fn local_dec_removes_75_percent_of_isolated_neighborhood() {
        let f = clustered_frame();
        let (c, _) = object_density(
            &f,
            DensityMode::Dec,
            sev(1),
            &mut RandomStream::new(3),
            &CorruptionConfig::default(),
            &mut CorruptionStats::default(),
        )
        .unwrap();
        // One center, 30 nearest members span its cluster plus 10 from the next.
        assert_eq!(200 - c.len(), 22);
    }

    #[test]
    fn local_inc_on_plane() {
        let b = Box3D::new([0.0, 0.0, 0.0], [4.0, 4.0, 40.0], 0.3, ObjectClass::Car);
        let mut rng = RandomStream::new(12);
        let pts = (0..300)
            .map(|_| {
                let (x, y) = (rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3));
                Point::new(x, y, 2.0 * x - y + 1.0, 0.4)
            })
            .collect();
        let f = Frame {
            cloud: PointCloud::new("p", pts),
            boxes: vec![b],
        };
        let mut st = CorruptionStats::default();
        let (c, _) = object_density(&f, DensityMode::Inc, sev(5), &mut RandomStream::new(13), &CorruptionConfig::default(), &mut st).unwrap();
        assert_eq!(c.len(), 300 + 5 * 30);
        for p in &c.points[300..] {
            assert!((p.z - (2.0 * p.x - p.y + 1.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn shear_hand_example() {
        let b = Box3D::new([5.0, 2.0, -1.0], [4.0, 2.0, 2.0], 0.0, ObjectClass::Car);
        let mut pts = vec![Point::new(6.0, 2.0, -1.0, 0.1)];
        shear_members(&mut pts, &[0], &b, [0.25; 4]);
        let expect = [6.0, 2.25, -1.0];
        for (a, e) in pts[0].xyz().iter().zip(expect) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn shear_keeps_member_heights() {
        let f = object_frame(500, 0, 14);
        let (c, b) = object_shear(&f, sev(5), &mut RandomStream::new(15), &CorruptionConfig::default());
        assert_eq!(b, f.boxes);
        for (a, q) in f.cloud.points.iter().zip(&c.points) {
            assert_eq!(a.z.to_bits(), q.z.to_bits());
        }
    }

    #[test]
    fn ffd_zero_ratio_is_identity() {
        let f = object_frame(500, 0, 16);
        let b = &f.boxes[0];
        let local: Vec<[f64; 3]> = f.cloud.points.iter().map(|p| b.to_local(p.xyz())).collect();
        let lattice = random_lattice(&local, 0.0, &mut RandomStream::new(1));
        for (p, l) in f.cloud.points.iter().zip(&local) {
            let w = b.to_world(lattice.deform(*l));
            for (a, e) in w.iter().zip(p.xyz()) {
                assert!((a - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn z_scale_keeps_bottom() {
        let mut b = Box3D::new([0.0, 0.0, -1.73 + 0.75], [4.0, 1.8, 1.5], 0.2, ObjectClass::Car);
        let bottom = b.bottom_z();
        let mut pts = vec![Point::new(0.0, 0.0, bottom, 0.0), Point::new(0.0, 0.0, b.cz, 0.0)];
        scale_object(&mut pts, &[0, 1], &mut b, 2, 1.2);
        assert!((b.height - 1.8).abs() < 1e-12);
        assert!((b.bottom_z() - bottom).abs() < 1e-12);
        assert!((b.cz - (-1.73 + 0.75 + 0.15)).abs() < 1e-12);
        assert!((pts[0].z - bottom).abs() < 1e-12);
        assert!((pts[1].z - b.cz).abs() < 1e-12);
    }

    #[test]
    fn x_scale_shrinks_length() {
        let f = object_frame(100, 0, 17);
        let mut b = f.boxes[0].clone();
        let before: Vec<[f64; 3]> = f.cloud.points.iter().map(|p| b.to_local(p.xyz())).collect();
        let mut pts = f.cloud.points.clone();
        let members: Vec<usize> = (0..100).collect();
        scale_object(&mut pts, &members, &mut b, 0, 0.8);
        assert!((b.length - 3.2).abs() < 1e-12);
        for (p, l) in pts.iter().zip(&before) {
            let n = b.to_local(p.xyz());
            assert!((n[0] - 0.8 * l[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_magnitude_at_top_level() {
        let f = object_frame(50, 0, 18);
        for seed in 0..50 {
            let (_, b) = object_pose(&f, PoseMode::Rotate, sev(5), &mut RandomStream::new(seed), &CorruptionConfig::default());
            let d = normalize_angle(b[0].yaw - f.boxes[0].yaw).abs().to_degrees();
            assert!((9.0 - 1e-9..=10.0 + 1e-9).contains(&d), "{d}");
        }
    }

    #[test]
    fn pose_keeps_members_inside_and_rigid() {
        let f = object_frame(300, 100, 19);
        let before = extract_objects(&f.cloud, &f.boxes);
        for mode in [PoseMode::Rotate, PoseMode::Translate] {
            for s in 1..=5 {
                let (c, b) = object_pose(&f, mode, sev(s), &mut RandomStream::new(s as u64), &CorruptionConfig::default());
                let after = extract_objects(&c, &b);
                for m in &before[0].members {
                    assert!(after[0].members.contains(m));
                    assert!(b[0].contains(c.points[*m].xyz(), 1e-6));
                }
                let (i, j) = (before[0].members[0], before[0].members[7]);
                let d0 = f.cloud.points[i].dist2(&f.cloud.points[j]).sqrt();
                let d1 = c.points[i].dist2(&c.points[j]).sqrt();
                assert!((d0 - d1).abs() < 1e-9);
                if mode == PoseMode::Translate {
                    let shift = ((b[0].cx - f.boxes[0].cx).powi(2) + (b[0].cy - f.boxes[0].cy).powi(2)).sqrt();
                    let (lo, hi) = TRANSLATION_BOUNDS_M[s as usize];
                    assert!(shift >= lo - 1e-12 && shift <= hi + 1e-12 && shift < 1.0);
                }
            }
        }
    }
}
