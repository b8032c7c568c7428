//! Statistical k-NN outlier removal.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::spatial::KnnIndex;

pub const DEFAULT_K: usize = 50;
pub const DEFAULT_N_SIGMA: f64 = 3.0;

/// Where the `mu + n_sigma * sigma` statistics come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdScope {
    /// One mean and deviation over the whole cloud.
    #[default]
    Global,
    /// Mean and deviation over each point's own k neighbors.
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseOutcome {
    pub cloud: PointCloud,
    /// Indices into the input, ascending.
    pub removed: Vec<usize>,
    /// Set when the cloud had at most `k` points and was returned as is.
    pub too_small: bool,
}

/// Mean distance from every point to its `k` nearest other points.
pub fn mean_knn_distances(index: &KnnIndex, coords: &[[f64; 3]], k: usize) -> Vec<f64> {
    coords
        .par_iter()
        .enumerate()
        .map_init(Vec::new, |buf, (i, q)| {
            index.knn_into(*q, k + 1, buf);
            // Duplicates may displace the query itself from slot 0.
            let mut sum = 0.0;
            let mut taken = 0;
            let mut skipped_self = false;
            for nb in buf.iter() {
                if !skipped_self && nb.index == i {
                    skipped_self = true;
                    continue;
                }
                if taken == k {
                    break;
                }
                sum += nb.distance;
                taken += 1;
            }
            sum / taken as f64
        })
        .collect()
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn knn_outlier_removal(cloud: &PointCloud, k: usize, n_sigma: f64) -> Result<DenoiseOutcome> {
    knn_outlier_removal_with(cloud, k, n_sigma, ThresholdScope::Global)
}

pub fn knn_outlier_removal_with(
    cloud: &PointCloud,
    k: usize,
    n_sigma: f64,
    scope: ThresholdScope,
) -> Result<DenoiseOutcome> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("knn k must be at least 2, got {k}")));
    }
    if n_sigma.is_nan() || n_sigma <= 0.0 {
        return Err(Error::InvalidArgument(format!("n_sigma must be positive, got {n_sigma}")));
    }
    if cloud.len() <= k {
        return Ok(DenoiseOutcome {
            cloud: cloud.clone(),
            removed: Vec::new(),
            too_small: true,
        });
    }
    let coords: Vec<[f64; 3]> = cloud.points.iter().map(|p| p.xyz()).collect();
    let index = KnnIndex::from_coords(coords.clone());
    let d = mean_knn_distances(&index, &coords, k);
    let remove: Vec<bool> = match scope {
        ThresholdScope::Global => {
            let (mu, sigma) = mean_std(d.iter().copied());
            d.iter().map(|&di| di > mu + n_sigma * sigma).collect()
        }
        ThresholdScope::Local => coords
            .par_iter()
            .enumerate()
            .map_init(Vec::new, |buf, (i, q)| {
                index.knn_into(*q, k + 1, buf);
                let (mu, sigma) = mean_std(buf.iter().filter(|nb| nb.index != i).map(|nb| d[nb.index]));
                d[i] > mu + n_sigma * sigma
            })
            .collect(),
    };
    let removed = remove.iter().enumerate().filter(|(_, &r)| r).map(|(i, _)| i).collect();
    Ok(DenoiseOutcome {
        cloud: cloud.retain_mask(&remove),
        removed,
        too_small: false,
    })
}
