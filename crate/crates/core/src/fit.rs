//! Least-squares height fields used by the local-densification kernels.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::geometry::Point;
use crate::rng::RandomStream;

/// Polynomial family for `z = f(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceModel {
    /// `a0 + a1 x + a2 y`
    Plane,
    /// `a0 + a1 x + a2 y + a3 x^2 + a4 xy + a5 y^2`
    Quadratic,
}

impl SurfaceModel {
    fn terms(self) -> usize {
        match self {
            SurfaceModel::Plane => 3,
            SurfaceModel::Quadratic => 6,
        }
    }
}

/// Fitted height field. Coordinates are centered and scaled internally so
/// the normal equations stay well conditioned for metric inputs.
#[derive(Debug, Clone)]
pub struct Surface {
    pub model: SurfaceModel,
    origin: [f64; 2],
    scale: f64,
    coef: Vec<f64>,
}

impl Surface {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let row = basis(self.model, (x - self.origin[0]) / self.scale, (y - self.origin[1]) / self.scale);
        row[..self.coef.len()].iter().zip(&self.coef).map(|(a, b)| a * b).sum()
    }
}

/// Basis row; only the first `model.terms()` entries are meaningful.
fn basis(model: SurfaceModel, u: f64, v: f64) -> [f64; 6] {
    match model {
        SurfaceModel::Plane => [1.0, u, v, 0.0, 0.0, 0.0],
        SurfaceModel::Quadratic => [1.0, u, v, u * u, u * v, v * v],
    }
}

/// Relative eigenvalue floor of the normal matrix below which the fit is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Least-squares fit, `None` when the design is rank deficient (too few
/// points, or xy samples that are collinear or coincident).
pub fn fit_surface(points: &[[f64; 3]], model: SurfaceModel) -> Option<Surface> {
    let m = model.terms();
    if points.len() < m {
        return None;
    }
    let n = points.len() as f64;
    let origin = [
        points.iter().map(|p| p[0]).sum::<f64>() / n,
        points.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let scale = points
        .iter()
        .map(|p| (p[0] - origin[0]).abs().max((p[1] - origin[1]).abs()))
        .fold(0.0, f64::max);
    if scale <= 0.0 {
        return None;
    }
    let mut ata = DMatrix::<f64>::zeros(m, m);
    let mut atb = DVector::<f64>::zeros(m);
    for p in points {
        let row = basis(model, (p[0] - origin[0]) / scale, (p[1] - origin[1]) / scale);
        for i in 0..m {
            atb[i] += row[i] * p[2];
            for j in 0..m {
                ata[(i, j)] += row[i] * row[j];
            }
        }
    }
    let eig = SymmetricEigen::new(ata.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if max.is_nan() || max <= 0.0 || min <= RANK_TOL * max {
        return None;
    }
    let coef = ata.cholesky()?.solve(&atb);
    Some(Surface {
        model,
        origin,
        scale,
        coef: coef.iter().copied().collect(),
    })
}

/// Which rung of the fallback ladder produced a densified neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensifyOutcome {
    Fitted(SurfaceModel),
    /// Neighbors duplicated with +/-1 cm jitter.
    Jittered,
}

/// Creates `neighbors.len()` new points over the neighborhood footprint.
///
/// The surface ladder is tried in order; new xy positions are uniform in
/// the neighbors' xy bounding rectangle, z comes from the fit and the
/// reflectance from the closest neighbor. If every model is degenerate the
/// neighbors are copied with per-axis U(-0.01, 0.01) m jitter.
pub fn densify(
    neighbors: &[Point],
    ladder: &[SurfaceModel],
    rng: &mut RandomStream,
    out: &mut Vec<Point>,
) -> DensifyOutcome {
    let coords: Vec<[f64; 3]> = neighbors.iter().map(Point::xyz).collect();
    let surface = ladder.iter().find_map(|&m| fit_surface(&coords, m));
    match surface {
        Some(surface) => {
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for c in &coords {
                for a in 0..2 {
                    lo[a] = lo[a].min(c[a]);
                    hi[a] = hi[a].max(c[a]);
                }
            }
            for _ in 0..neighbors.len() {
                let x = rng.uniform(lo[0], hi[0]);
                let y = rng.uniform(lo[1], hi[1]);
                let z = surface.eval(x, y);
                // First of equally near neighbors wins.
                let mut best = (f64::INFINITY, 0.0);
                for (c, p) in coords.iter().zip(neighbors) {
                    let d = (c[0] - x).powi(2) + (c[1] - y).powi(2) + (c[2] - z).powi(2);
                    if d < best.0 {
                        best = (d, p.reflectance);
                    }
                }
                out.push(Point::new(x, y, z, best.1));
            }
            DensifyOutcome::Fitted(surface.model)
        }
        None => {
            for p in neighbors {
                let x = p.x + rng.uniform(-0.01, 0.01);
                let y = p.y + rng.uniform(-0.01, 0.01);
                let z = p.z + rng.uniform(-0.01, 0.01);
                out.push(Point::new(x, y, z, p.reflectance));
            }
            DensifyOutcome::Jittered
        }
    }
}
