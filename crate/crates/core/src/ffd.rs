//! Free-form deformation with a trivariate Bernstein lattice.

/// Lattice resolution per axis (degree + 1).
pub const LATTICE_SIZE: usize = 5;
const DEGREE: usize = LATTICE_SIZE - 1;
/// Extents below this are treated as flat; such axes pass through.
const FLAT_EXTENT: f64 = 1e-12;

/// Degree-4 Bernstein basis at `t`.
pub fn bernstein4(t: f64) -> [f64; LATTICE_SIZE] {
    const BINOM: [f64; LATTICE_SIZE] = [1.0, 4.0, 6.0, 4.0, 1.0];
    let s = 1.0 - t;
    let mut out = [0.0; LATTICE_SIZE];
    for (i, o) in out.iter_mut().enumerate() {
        *o = BINOM[i] * t.powi(i as i32) * s.powi((DEGREE - i) as i32);
    }
    out
}

/// A 5x5x5 grid of control points spanning an axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct FfdLattice {
    lo: [f64; 3],
    extent: [f64; 3],
    control: Vec<[f64; 3]>,
}

impl FfdLattice {
    /// Evenly spaced (undisplaced) lattice over `[lo, hi]`.
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Self {
        let extent = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let mut control = Vec::with_capacity(LATTICE_SIZE.pow(3));
        for i in 0..LATTICE_SIZE {
            for j in 0..LATTICE_SIZE {
                for k in 0..LATTICE_SIZE {
                    let f = [i, j, k].map(|n| n as f64 / DEGREE as f64);
                    control.push([
                        lo[0] + f[0] * extent[0],
                        lo[1] + f[1] * extent[1],
                        lo[2] + f[2] * extent[2],
                    ]);
                }
            }
        }
        Self { lo, extent, control }
    }

    pub fn extent(&self) -> [f64; 3] {
        self.extent
    }

    fn slot(i: usize, j: usize, k: usize) -> usize {
        (i * LATTICE_SIZE + j) * LATTICE_SIZE + k
    }

    pub fn control_point(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        self.control[Self::slot(i, j, k)]
    }

    pub fn displace(&mut self, i: usize, j: usize, k: usize, delta: [f64; 3]) {
        let c = &mut self.control[Self::slot(i, j, k)];
        for a in 0..3 {
            c[a] += delta[a];
        }
    }

    /// Normalized lattice coordinates of `p`; flat axes map to 0.
    pub fn parametric(&self, p: [f64; 3]) -> [f64; 3] {
        let mut stu = [0.0; 3];
        for a in 0..3 {
            if self.extent[a] > FLAT_EXTENT {
                stu[a] = (p[a] - self.lo[a]) / self.extent[a];
            }
        }
        stu
    }

    /// `sum_ijk B_i(s) B_j(t) B_k(u) P_ijk`, except that flat axes keep
    /// the input coordinate.
    pub fn deform(&self, p: [f64; 3]) -> [f64; 3] {
        let [s, t, u] = self.parametric(p);
        let (bs, bt, bu) = (bernstein4(s), bernstein4(t), bernstein4(u));
        let mut out = [0.0; 3];
        for (i, bi) in bs.iter().enumerate() {
            for (j, bj) in bt.iter().enumerate() {
                let wij = bi * bj;
                for (k, bk) in bu.iter().enumerate() {
                    let w = wij * bk;
                    let c = &self.control[Self::slot(i, j, k)];
                    out[0] += w * c[0];
                    out[1] += w * c[1];
                    out[2] += w * c[2];
                }
            }
        }
        for a in 0..3 {
            if self.extent[a] <= FLAT_EXTENT {
                out[a] = p[a];
            }
        }
        out
    }
}
