//! Points, clouds, oriented boxes and the Cartesian/spherical conversions
//! shared by every corruption kernel.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One LiDAR return in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub reflectance: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64, z: f64, reflectance: f64) -> Self {
        Self {
            x,
            y,
            z,
            reflectance,
        }
    }

    #[inline]
    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn with_xyz(self, xyz: [f64; 3]) -> Self {
        Self {
            x: xyz[0],
            y: xyz[1],
            z: xyz[2],
            reflectance: self.reflectance,
        }
    }

    #[inline]
    pub fn range(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    #[inline]
    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.reflectance.is_finite()
    }
}

/// A single sweep. Point order is meaningful: kernels that neither insert
/// nor delete keep index identity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub frame_id: String,
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn new(frame_id: impl Into<String>, points: Vec<Point>) -> Self {
        Self {
            frame_id: frame_id.into(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounds `(min, max)`, `None` for an empty cloud.
    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        let first = self.points.first()?;
        let mut lo = first.xyz();
        let mut hi = lo;
        for p in &self.points[1..] {
            for (axis, v) in p.xyz().into_iter().enumerate() {
                lo[axis] = lo[axis].min(v);
                hi[axis] = hi[axis].max(v);
            }
        }
        Some((lo, hi))
    }

    /// Copy of the cloud without the points whose `remove` flag is set.
    pub fn retain_mask(&self, remove: &[bool]) -> PointCloud {
        debug_assert_eq!(remove.len(), self.points.len());
        let points = self
            .points
            .iter()
            .zip(remove)
            .filter(|(_, &r)| !r)
            .map(|(p, _)| *p)
            .collect();
        PointCloud::new(self.frame_id.clone(), points)
    }
}

/// Range, polar angle from +z and azimuth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
    pub reflectance: f64,
}

pub fn to_spherical(p: &Point) -> SphericalPoint {
    let r = p.range();
    let theta = if r == 0.0 {
        0.0
    } else {
        (p.z / r).clamp(-1.0, 1.0).acos()
    };
    let mut phi = p.y.atan2(p.x);
    if phi == -PI {
        phi = PI;
    }
    SphericalPoint {
        r,
        theta,
        phi,
        reflectance: p.reflectance,
    }
}

pub fn to_cartesian(s: &SphericalPoint) -> Point {
    let (sin_t, cos_t) = s.theta.sin_cos();
    let (sin_p, cos_p) = s.phi.sin_cos();
    Point {
        x: s.r * sin_t * cos_p,
        y: s.r * sin_t * sin_p,
        z: s.r * cos_t,
        reflectance: s.reflectance,
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// KITTI object categories; anything else is kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectClass {
    Car,
    Van,
    Truck,
    Pedestrian,
    PersonSitting,
    Cyclist,
    Tram,
    Misc,
    DontCare,
    Other(String),
}

impl ObjectClass {
    pub fn as_str(&self) -> &str {
        match self {
            ObjectClass::Car => "Car",
            ObjectClass::Van => "Van",
            ObjectClass::Truck => "Truck",
            ObjectClass::Pedestrian => "Pedestrian",
            ObjectClass::PersonSitting => "Person_sitting",
            ObjectClass::Cyclist => "Cyclist",
            ObjectClass::Tram => "Tram",
            ObjectClass::Misc => "Misc",
            ObjectClass::DontCare => "DontCare",
            ObjectClass::Other(s) => s,
        }
    }

    /// Default true-positive IoU threshold used by the KITTI benchmark.
    pub fn default_iou_threshold(&self) -> f64 {
        match self {
            ObjectClass::Car | ObjectClass::Van | ObjectClass::Truck => 0.7,
            _ => 0.5,
        }
    }

    /// Ground-truth class that is ignored (neither TP nor FP) when
    /// evaluating `self`, as in the KITTI devkit.
    pub fn neighbor_class(&self) -> Option<ObjectClass> {
        match self {
            ObjectClass::Car => Some(ObjectClass::Van),
            ObjectClass::Pedestrian => Some(ObjectClass::PersonSitting),
            _ => None,
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "Car" => ObjectClass::Car,
            "Van" => ObjectClass::Van,
            "Truck" => ObjectClass::Truck,
            "Pedestrian" => ObjectClass::Pedestrian,
            "Person_sitting" => ObjectClass::PersonSitting,
            "Cyclist" => ObjectClass::Cyclist,
            "Tram" => ObjectClass::Tram,
            "Misc" => ObjectClass::Misc,
            "DontCare" => ObjectClass::DontCare,
            other => ObjectClass::Other(other.to_string()),
        })
    }
}

/// Oriented 3D box in the LiDAR frame. `(cx, cy, cz)` is the geometric
/// center, `length` runs along the heading, `width` across it and `height`
/// along +z.
#[derive(Debug, Clone, PartialEq)]
pub struct Box3D {
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub yaw: f64,
    pub class: ObjectClass,
    pub score: Option<f64>,
    pub truncation: Option<f64>,
    pub occlusion: Option<u8>,
    /// Image-plane box `(left, top, right, bottom)` in pixels.
    pub image_bbox: Option<[f64; 4]>,
    /// Observation angle carried through from the label file.
    pub alpha: Option<f64>,
}

impl Box3D {
    pub fn new(
        center: [f64; 3],
        dims_lwh: [f64; 3],
        yaw: f64,
        class: ObjectClass,
    ) -> Self {
        Self {
            cx: center[0],
            cy: center[1],
            cz: center[2],
            length: dims_lwh[0],
            width: dims_lwh[1],
            height: dims_lwh[2],
            yaw: normalize_angle(yaw),
            class,
            score: None,
            truncation: None,
            occlusion: None,
            image_bbox: None,
            alpha: None,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn center(&self) -> [f64; 3] {
        [self.cx, self.cy, self.cz]
    }

    pub fn half_extents(&self) -> [f64; 3] {
        [self.length / 2.0, self.width / 2.0, self.height / 2.0]
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    pub fn bottom_z(&self) -> f64 {
        self.cz - self.height / 2.0
    }

    pub fn image_bbox_height(&self) -> Option<f64> {
        self.image_bbox.map(|b| b[3] - b[1])
    }

    pub fn is_valid(&self) -> bool {
        self.length > 0.0
            && self.width > 0.0
            && self.height > 0.0
            && self.center().iter().all(|v| v.is_finite())
            && self.yaw.is_finite()
    }

    /// Sensor frame to box frame (x along heading).
    #[inline]
    pub fn to_local(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.cx;
        let dy = p[1] - self.cy;
        [c * dx + s * dy, -s * dx + c * dy, p[2] - self.cz]
    }

    #[inline]
    pub fn to_world(&self, l: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        [
            c * l[0] - s * l[1] + self.cx,
            s * l[0] + c * l[1] + self.cy,
            l[2] + self.cz,
        ]
    }

    /// Containment with a tolerance `margin` on every face.
    pub fn contains(&self, p: [f64; 3], margin: f64) -> bool {
        let l = self.to_local(p);
        let h = self.half_extents();
        l[0].abs() <= h[0] + margin && l[1].abs() <= h[1] + margin && l[2].abs() <= h[2] + margin
    }

    /// Ground-plane footprint corners, counter-clockwise.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let [hl, hw, _] = self.half_extents();
        let corners = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        corners.map(|[x, y]| {
            let w = self.to_world([x, y, 0.0]);
            [w[0], w[1]]
        })
    }

    pub fn corners(&self) -> [[f64; 3]; 8] {
        let [hl, hw, hh] = self.half_extents();
        let mut out = [[0.0; 3]; 8];
        for (i, c) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -hl } else { hl };
            let sy = if i & 2 == 0 { -hw } else { hw };
            let sz = if i & 4 == 0 { -hh } else { hh };
            *c = self.to_world([sx, sy, sz]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn spherical_axis_and_pole() {
        let s = to_spherical(&Point::new(1.0, 0.0, 0.0, 0.5));
        assert_eq!((s.r, s.phi, s.reflectance), (1.0, 0.0, 0.5));
        assert!(close(s.theta, PI / 2.0, 1e-15));

        let s = to_spherical(&Point::new(0.0, 0.0, 2.0, 0.1));
        assert_eq!((s.r, s.theta, s.phi, s.reflectance), (2.0, 0.0, 0.0, 0.1));
    }

    #[test]
    fn spherical_diagonal() {
        let s = to_spherical(&Point::new(1.0, 1.0, 1.0, 0.0));
        assert!(close(s.r, 3f64.sqrt(), 1e-15));
        assert!(close(s.theta, (1.0 / 3f64.sqrt()).acos(), 1e-15));
        assert!(close(s.phi, PI / 4.0, 1e-15));
    }

    #[test]
    fn spherical_origin_and_negative_pi() {
        let s = to_spherical(&Point::new(0.0, 0.0, 0.0, 0.3));
        assert_eq!((s.r, s.theta), (0.0, 0.0));
        let p = to_cartesian(&SphericalPoint {
            r: 0.0,
            theta: 0.0,
            phi: 0.0,
            reflectance: 0.3,
        });
        assert_eq!(p, Point::new(0.0, 0.0, 0.0, 0.3));

        let s = to_spherical(&Point::new(-1.0, -0.0, 0.0, 0.0));
        assert_eq!(s.phi, PI);
    }

    #[test]
    fn cartesian_axis() {
        let p = to_cartesian(&SphericalPoint {
            r: 1.0,
            theta: PI / 2.0,
            phi: 0.0,
            reflectance: 0.5,
        });
        assert!(close(p.x, 1.0, 1e-15) && close(p.y, 0.0, 1e-15) && close(p.z, 0.0, 1e-15));
        assert_eq!(p.reflectance, 0.5);
    }

    #[test]
    fn angle_normalization() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!(close(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, 1e-12));
        assert!(close(normalize_angle(-7.0), -7.0 + 2.0 * PI, 1e-12));
    }

    #[test]
    fn box_frame_round_trip_and_containment() {
        let b = Box3D::new([2.0, -1.0, 0.5], [4.0, 2.0, 1.5], 0.7, ObjectClass::Car);
        let p = [2.3, -0.4, 0.9];
        let back = b.to_world(b.to_local(p));
        for i in 0..3 {
            assert!(close(back[i], p[i], 1e-12));
        }
        assert!(b.contains(b.center(), 0.0));
        for c in b.corners() {
            assert!(b.contains(c, 1e-9));
        }
        assert!(!b.contains([10.0, 0.0, 0.0], 1e-6));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(1000))]
        #[test]
        fn spherical_round_trip(x in -80.0f64..80.0, y in -80.0f64..80.0, z in -10.0f64..10.0) {
            let p = Point::new(x, y, z, 0.2);
            proptest::prop_assume!(p.range() > 1e-6);
            let s = to_spherical(&p);
            proptest::prop_assert!(s.theta >= 0.0 && s.theta <= PI);
            proptest::prop_assert!(s.phi > -PI && s.phi <= PI);
            let q = to_cartesian(&s);
            proptest::prop_assert!((q.x - x).abs() < 1e-9);
            proptest::prop_assert!((q.y - y).abs() < 1e-9);
            proptest::prop_assert!((q.z - z).abs() < 1e-9);
        }
    }
}
