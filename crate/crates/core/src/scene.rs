//! Scene-level corruptions that act on the whole sweep.
//!
//! Portions are `floor(N / d)` with `d` taken from the severity schedule;
//! `None` marks the clean level.

use crate::corruption::CorruptionStats;
use crate::error::{Error, Result};
use crate::fit::{densify, DensifyOutcome, SurfaceModel};
use crate::geometry::{to_cartesian, to_spherical, Point, PointCloud};
use crate::rng::RandomStream;
use crate::severity::Severity;
use crate::spatial::KnnIndex;

pub type Divisors = [Option<usize>; 6];

pub const UNIFORM_RAD_BOUND_M: [f64; 6] = [0.0, 0.04, 0.08, 0.12, 0.16, 0.20];
pub const GAUSSIAN_RAD_STD_M: [f64; 6] = [0.0, 0.04, 0.06, 0.08, 0.10, 0.12];
pub const IMPULSE_RAD_DIVISOR: Divisors = [None, Some(30), Some(25), Some(20), Some(15), Some(10)];
pub const IMPULSE_RAD_MAGNITUDE_M: f64 = 0.2;
pub const BACKGROUND_DIVISOR: Divisors = [None, Some(45), Some(40), Some(35), Some(30), Some(20)];
pub const UPSAMPLE_DIVISOR: Divisors = [None, Some(10), Some(8), Some(6), Some(4), Some(2)];
pub const UPSAMPLE_OFFSET_M: f64 = 0.1;
pub const CUTOUT_DIVISOR: Divisors = [None, Some(2000), Some(1500), Some(1000), Some(800), Some(600)];
pub const CUTOUT_NEIGHBORS: usize = 100;
pub const LOCAL_DEC_DIVISOR: Divisors = [None, Some(300), Some(250), Some(200), Some(150), Some(100)];
pub const LOCAL_INC_DIVISOR: Divisors = [None, Some(2000), Some(1500), Some(1000), Some(800), Some(600)];
pub const LOCAL_NEIGHBORS: usize = 100;
/// Fraction of each neighborhood removed by `local_dec`.
pub const LOCAL_DEC_FRACTION: f64 = 0.75;
pub const BEAM_DEL_DIVISOR: Divisors = [None, Some(100), Some(30), Some(10), Some(5), Some(3)];
pub const LAYER_DEL_BINS: [usize; 6] = [0, 3, 7, 11, 15, 19];

/// `floor(n / d)` for the scheduled divisor, zero at the clean level.
pub fn portion(n: usize, divisors: &Divisors, severity: Severity) -> usize {
    divisors[severity.index()].map_or(0, |d| n / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialNoise {
    Uniform,
    Gaussian,
    Impulse,
}

/// Perturbs the range of each point along its own ray; angles and
/// reflectance are kept and ranges are clamped at zero.
pub fn radial_noise(
    cloud: &PointCloud,
    kind: RadialNoise,
    severity: Severity,
    rng: &mut RandomStream,
) -> Result<PointCloud> {
    if severity.is_clean() {
        return Ok(cloud.clone());
    }
    let shift = |p: &Point, dr: f64| {
        let mut s = to_spherical(p);
        s.r = (s.r + dr).max(0.0);
        to_cartesian(&s)
    };
    let mut out = cloud.clone();
    match kind {
        RadialNoise::Uniform => {
            let b = UNIFORM_RAD_BOUND_M[severity.index()];
            for p in &mut out.points {
                *p = shift(p, rng.uniform(-b, b));
            }
        }
        RadialNoise::Gaussian => {
            let sigma = GAUSSIAN_RAD_STD_M[severity.index()];
            for p in &mut out.points {
                *p = shift(p, rng.gaussian(0.0, sigma));
            }
        }
        RadialNoise::Impulse => {
            let n = cloud.len();
            let picked = rng.choose_without_replacement(n, portion(n, &IMPULSE_RAD_DIVISOR, severity))?;
            for i in picked {
                let dr = rng.sign() * IMPULSE_RAD_MAGNITUDE_M;
                out.points[i] = shift(&cloud.points[i], dr);
            }
        }
    }
    Ok(out)
}

/// Appends points sampled uniformly in the cloud's axis-aligned bounds,
/// with reflectance U[0, 1].
pub fn background_noise(cloud: &PointCloud, severity: Severity, rng: &mut RandomStream) -> Result<PointCloud> {
    if severity.is_clean() {
        return Ok(cloud.clone());
    }
    let (lo, hi) = cloud
        .bounds()
        .ok_or_else(|| Error::InvalidArgument("background noise needs a non-empty cloud".into()))?;
    let extra = portion(cloud.len(), &BACKGROUND_DIVISOR, severity);
    let mut out = cloud.clone();
    out.points.reserve(extra);
    for _ in 0..extra {
        let x = rng.uniform(lo[0], hi[0]);
        let y = rng.uniform(lo[1], hi[1]);
        let z = rng.uniform(lo[2], hi[2]);
        let r = rng.uniform(0.0, 1.0);
        out.points.push(Point::new(x, y, z, r));
    }
    Ok(out)
}

/// Spawns one jittered copy next to a random subset of the points.
pub fn scene_upsample(cloud: &PointCloud, severity: Severity, rng: &mut RandomStream) -> Result<PointCloud> {
    if severity.is_clean() {
        return Ok(cloud.clone());
    }
    let n = cloud.len();
    let picked = rng.choose_without_replacement(n, portion(n, &UPSAMPLE_DIVISOR, severity))?;
    let mut out = cloud.clone();
    out.points.reserve(picked.len());
    for i in picked {
        out.points.push(jitter(&cloud.points[i], UPSAMPLE_OFFSET_M, rng));
    }
    Ok(out)
}

pub(crate) fn jitter(p: &Point, bound: f64, rng: &mut RandomStream) -> Point {
    let x = p.x + rng.uniform(-bound, bound);
    let y = p.y + rng.uniform(-bound, bound);
    let z = p.z + rng.uniform(-bound, bound);
    Point::new(x, y, z, p.reflectance)
}

/// Erases the 100-neighborhoods of randomly chosen centers.
pub fn scene_cutout(cloud: &PointCloud, severity: Severity, rng: &mut RandomStream) -> Result<PointCloud> {
    if severity.is_clean() {
        return Ok(cloud.clone());
    }
    let n = cloud.len();
    let centers = rng.choose_without_replacement(n, portion(n, &CUTOUT_DIVISOR, severity))?;
    if centers.is_empty() {
        return Ok(cloud.clone());
    }
    let index = KnnIndex::build(&cloud.points);
    let mut remove = vec![false; n];
    let mut buf = Vec::new();
    for c in centers {
        index.knn_into(cloud.points[c].xyz(), CUTOUT_NEIGHBORS, &mut buf);
        for nb in &buf {
            remove[nb.index] = true;
        }
    }
    Ok(cloud.retain_mask(&remove))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalDensityMode {
    Dec,
    Inc,
}

/// `Dec` thins random 100-neighborhoods by 75%; `Inc` densifies them with
/// points drawn from a quadratic height field fitted to each neighborhood.
pub fn scene_local_density(
    cloud: &PointCloud,
    mode: LocalDensityMode,
    severity: Severity,
    rng: &mut RandomStream,
    stats: &mut CorruptionStats,
) -> Result<PointCloud> {
    if severity.is_clean() {
        return Ok(cloud.clone());
    }
    let n = cloud.len();
    let divisors = match mode {
        LocalDensityMode::Dec => &LOCAL_DEC_DIVISOR,
        LocalDensityMode::Inc => &LOCAL_INC_DIVISOR,
    };
    let centers = rng.choose_without_replacement(n, portion(n, divisors, severity))?;
    if centers.is_empty() {
        return Ok(cloud.clone());
    }
    let index = KnnIndex::build(&cloud.points);
    let mut buf = Vec::new();
    match mode {
        LocalDensityMode::Dec => {
            let mut remove = vec![false; n];
            for c in centers {
                index.knn_into(cloud.points[c].xyz(), LOCAL_NEIGHBORS, &mut buf);
                let k = buf.len();
                let drop = (LOCAL_DEC_FRACTION * k as f64).floor() as usize;
                for j in rng.choose_without_replacement(k, drop)? {
                    remove[buf[j].index] = true;
                }
            }
            Ok(cloud.retain_mask(&remove))
        }
        LocalDensityMode::Inc => {
            let mut out = cloud.clone();
            let ladder = [SurfaceModel::Quadratic, SurfaceModel::Plane];
            let mut neighbors = Vec::with_capacity(LOCAL_NEIGHBORS);
            for c in centers {
                index.knn_into(cloud.points[c].xyz(), LOCAL_NEIGHBORS, &mut buf);
                neighbors.clear();
                neighbors.extend(buf.iter().map(|nb| cloud.points[nb.index]));
                match densify(&neighbors, &ladder, rng, &mut out.points) {
                    DensifyOutcome::Fitted(SurfaceModel::Quadratic) => {}
                    DensifyOutcome::Fitted(SurfaceModel::Plane) => stats.fit_fallbacks += 1,
                    DensifyOutcome::Jittered => stats.jitter_fallbacks += 1,
                }
            }
            Ok(out)
        }
    }
}

/// Deletes a uniformly random subset of points.
pub fn beam_delete(cloud: &PointCloud, severity: Severity, rng: &mut RandomStream) -> Result<PointCloud> {
    if severity.is_clean() {
        return Ok(cloud.clone());
    }
    let n = cloud.len();
    let mut remove = vec![false; n];
    for i in rng.choose_without_replacement(n, portion(n, &BEAM_DEL_DIVISOR, severity))? {
        remove[i] = true;
    }
    Ok(cloud.retain_mask(&remove))
}

/// Bin of a polar angle when `[lo, hi]` is split into `bins` equal slices,
/// the last one closed above.
pub fn theta_bin(theta: f64, lo: f64, hi: f64, bins: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    let b = ((theta - lo) / (hi - lo) * bins as f64).floor();
    (b.max(0.0) as usize).min(bins - 1)
}

/// Removes whole elevation rings: the observed polar-angle range is split
/// into `layers` bins and a random set of bins is emptied.
pub fn layer_delete(
    cloud: &PointCloud,
    severity: Severity,
    layers: usize,
    rng: &mut RandomStream,
    stats: &mut CorruptionStats,
) -> Result<PointCloud> {
    if layers == 0 {
        return Err(Error::InvalidArgument("layer count must be positive".into()));
    }
    if severity.is_clean() {
        return Ok(cloud.clone());
    }
    if cloud.is_empty() {
        stats.warnings.push("layer_del on an empty cloud".into());
        return Ok(cloud.clone());
    }
    let thetas: Vec<f64> = cloud.points.iter().map(|p| to_spherical(p).theta).collect();
    let lo = thetas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = thetas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let count = LAYER_DEL_BINS[severity.index()].min(layers);
    let mut dropped = vec![false; layers];
    for b in rng.choose_without_replacement(layers, count)? {
        dropped[b] = true;
    }
    let remove: Vec<bool> = thetas
        .iter()
        .map(|&t| dropped[theta_bin(t, lo, hi, layers)])
        .collect();
    Ok(cloud.retain_mask(&remove))
}
