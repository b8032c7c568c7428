//! Exact k-nearest-neighbour search over a static point set.
//!
//! The index is a median-split kd-tree with small leaf buckets. Results are
//! ordered by `(distance, source index)`, so equal distances always resolve
//! to the lower index and every query has a unique answer.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::Point;

const LEAF_SIZE: usize = 32;

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone)]
pub struct KnnIndex {
    /// Points in tree order; leaves are contiguous runs.
    entries: Vec<Entry>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    xyz: [f64; 3],
    index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Clone, Copy)]
struct Candidate {
    dist2: f64,
    index: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl KnnIndex {
    pub fn build(points: &[Point]) -> Self {
        Self::from_coords(points.iter().map(Point::xyz).collect())
    }

    pub fn from_coords(coords: Vec<[f64; 3]>) -> Self {
        assert!(coords.len() < u32::MAX as usize, "too many points for KnnIndex");
        let mut entries: Vec<Entry> = coords
            .into_iter()
            .enumerate()
            .map(|(i, xyz)| Entry { xyz, index: i as u32 })
            .collect();
        let mut nodes = Vec::with_capacity(2 * entries.len() / LEAF_SIZE + 1);
        if !entries.is_empty() {
            build_node(&mut entries, 0, &mut nodes);
        }
        Self { entries, nodes }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The `min(k, N)` nearest source points, ascending by distance then
    /// index.
    pub fn knn(&self, query: [f64; 3], k: usize) -> Vec<Neighbor> {
        let mut out = Vec::with_capacity(k.min(self.len()));
        self.knn_into(query, k, &mut out);
        out
    }

    pub fn knn_point(&self, query: &Point, k: usize) -> Vec<Neighbor> {
        self.knn(query.xyz(), k)
    }

    /// Same as [`KnnIndex::knn`] but reuses `out`.
    pub fn knn_into(&self, query: [f64; 3], k: usize, out: &mut Vec<Neighbor>) {
        out.clear();
        if k == 0 || self.nodes.is_empty() {
            return;
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, &query, k, &mut [0.0; 3], &mut heap);
        let mut found = heap.into_vec();
        found.sort_unstable();
        out.extend(found.into_iter().map(|c| Neighbor {
            index: c.index as usize,
            distance: c.dist2.sqrt(),
        }));
    }

    /// Source indices only, in result order.
    pub fn knn_indices(&self, query: [f64; 3], k: usize) -> Vec<usize> {
        self.knn(query, k).into_iter().map(|n| n.index).collect()
    }

    /// `off` holds the per-axis gap between `q` and the current cell. Its
    /// squared norm, summed in the same axis order as a point distance, never
    /// exceeds the computed distance of any point inside the cell.
    fn search(&self, node: usize, q: &[f64; 3], k: usize, off: &mut [f64; 3], heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for e in &self.entries[start as usize..end as usize] {
                    let c = &e.xyz;
                    let dx = c[0] - q[0];
                    let dy = c[1] - q[1];
                    let dz = c[2] - q[2];
                    let cand = Candidate {
                        dist2: dx * dx + dy * dy + dz * dz,
                        index: e.index,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else {
                        let mut top = heap.peek_mut().expect("heap holds k items");
                        if cand < *top {
                            *top = cand;
                        }
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let axis = axis as usize;
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near as usize, q, k, off, heap);
                let old = off[axis];
                off[axis] = diff;
                let bound = off[0] * off[0] + off[1] * off[1] + off[2] * off[2];
                // `<=` keeps equal-distance candidates with lower indices reachable.
                if heap.len() < k || bound <= heap.peek().map_or(f64::INFINITY, |c| c.dist2) {
                    self.search(far as usize, q, k, off, heap);
                }
                off[axis] = old;
            }
        }
    }
}

fn build_node(entries: &mut [Entry], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if entries.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + entries.len()) as u32,
        });
        return id;
    }
    let axis = widest_axis(entries);
    let mid = entries.len() / 2;
    // Ties may straddle the split; the search's `<=` pruning covers that.
    // Coordinates are finite, so `partial_cmp` is total here.
    entries.select_nth_unstable_by(mid, |a, b| {
        a.xyz[axis].partial_cmp(&b.xyz[axis]).unwrap_or(Ordering::Equal)
    });
    let value = entries[mid].xyz[axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = entries.split_at_mut(mid);
    let left = build_node(lo, offset, nodes);
    let right = build_node(hi, offset + mid, nodes);
    nodes[id as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    id
}

/// Axis of largest spread, estimated from at most 256 evenly strided
/// entries. Any axis keeps the tree exact; this one keeps it shallow.
fn widest_axis(entries: &[Entry]) -> usize {
    let step = (entries.len() / 256).max(1);
    let mut lo = entries[0].xyz;
    let mut hi = entries[0].xyz;
    for e in entries.iter().step_by(step) {
        for a in 0..3 {
            let v = e.xyz[a];
            if v < lo[a] {
                lo[a] = v;
            }
            if v > hi[a] {
                hi[a] = v;
            }
        }
    }
    let span = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let mut best = 0;
    for a in 1..3 {
        if span[a] > span[best] {
            best = a;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    fn brute(points: &[[f64; 3]], q: [f64; 3], k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                (d, i)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, i)| i).collect()
    }

    #[test]
    fn empty_and_single() {
        let idx = KnnIndex::from_coords(vec![]);
        assert!(idx.knn([0.0; 3], 3).is_empty());
        let idx = KnnIndex::from_coords(vec![[1.0, 2.0, 3.0]]);
        let got = idx.knn([9.0, 9.0, 9.0], 4);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].index, 0);
    }

    #[test]
    fn collinear() {
        let idx = KnnIndex::from_coords(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        assert_eq!(idx.knn_indices([0.0, 0.0, 0.0], 2), vec![0, 1]);
        assert_eq!(idx.knn_indices([0.0, 0.0, 0.0], 10), vec![0, 1, 2]);
    }

    #[test]
    fn ties_prefer_lower_index() {
        // Many duplicates straddle split planes.
        let mut coords = vec![[1.0, 1.0, 1.0]; 40];
        coords.extend(vec![[0.0, 0.0, 0.0]; 40]);
        let idx = KnnIndex::from_coords(coords.clone());
        assert_eq!(idx.knn_indices([1.0, 1.0, 1.0], 5), vec![0, 1, 2, 3, 4]);
        assert_eq!(idx.knn_indices([0.0, 0.0, 0.0], 3), vec![40, 41, 42]);
        let grid: Vec<[f64; 3]> = (0..1000)
            .map(|i| [(i % 10) as f64, ((i / 10) % 10) as f64, (i / 100) as f64])
            .collect();
        let idx = KnnIndex::from_coords(grid.clone());
        for q in [[4.5, 4.5, 4.5], [0.0, 0.0, 0.0], [5.0, 5.0, 5.5]] {
            assert_eq!(idx.knn_indices(q, 27), brute(&grid, q, 27));
        }
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = RandomStream::new(2024);
        let pts: Vec<[f64; 3]> = (0..10_000)
            .map(|_| [rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0), rng.uniform(-3.0, 3.0)])
            .collect();
        let idx = KnnIndex::from_coords(pts.clone());
        for _ in 0..50 {
            let q = [rng.uniform(-60.0, 60.0), rng.uniform(-60.0, 60.0), rng.uniform(-4.0, 4.0)];
            let got = idx.knn(q, 30);
            assert_eq!(got.iter().map(|n| n.index).collect::<Vec<_>>(), brute(&pts, q, 30));
            assert!(got.windows(2).all(|w| w[0].distance <= w[1].distance));
        }
    }
}
