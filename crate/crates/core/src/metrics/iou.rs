//! Exact IoU of yaw-rotated boxes by convex polygon clipping.

use crate::geometry::Box3D;

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Shoelace area; positive for counter-clockwise polygons.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        twice += a[0] * b[1] - a[1] * b[0];
    }
    twice / 2.0
}

/// Sutherland-Hodgman clipping of `subject` by the convex CCW `clip`.
pub fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(intersect(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(intersect(prev, cur, a, b));
            }
        }
    }
    output
}

/// Intersection of segment `p-q` with the line through `a-b`; only called
/// when `p` and `q` lie on opposite sides.
fn intersect(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let t = dp / (dp - dq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    polygon_area(&clip_convex(&a.footprint(), &b.footprint())).max(0.0)
}

pub fn iou3d(a: &Box3D, b: &Box3D) -> f64 {
    let dz = (a.cz + a.height / 2.0).min(b.cz + b.height / 2.0) - a.bottom_z().max(b.bottom_z());
    if dz <= 0.0 {
        return 0.0;
    }
    let (ha, hb) = (a.half_extents(), b.half_extents());
    let reach = (ha[0].hypot(ha[1]) + hb[0].hypot(hb[1])).powi(2);
    if (a.cx - b.cx).powi(2) + (a.cy - b.cy).powi(2) > reach {
        return 0.0;
    }
    let inter = bev_intersection_area(a, b) * dz;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 || inter <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
