//! KITTI object-benchmark file formats: velodyne `.bin` sweeps, `label_2`
//! text files (ground truth and detections) and `calib` files.
//!
//! Labels are camera-frame on disk and LiDAR-frame in memory. A label's
//! camera location is the bottom-face center of the box; [`Box3D`] stores
//! the geometric center, so conversion lifts `z` by half the height.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use nalgebra::{Matrix3, Matrix3x4, Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Box3D, Point, PointCloud};

const BYTES_PER_POINT: usize = 16;

/// Reads a velodyne sweep. Reflectance outside [0, 1] is clamped and
/// counted (some KITTI sweeps carry values marginally above 1).
pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_point_cloud_with_stats(path).map(|(c, _)| c)
}

/// Like [`read_point_cloud`], also returning the number of clamped
/// reflectance values.
pub fn read_point_cloud_with_stats(path: impl AsRef<Path>) -> Result<(PointCloud, usize)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (points, clamped) = decode_points(&bytes).map_err(|m| Error::format(path, m))?;
    if clamped > 0 {
        warn!("{}: clamped {clamped} reflectance values into [0, 1]", path.display());
    }
    Ok((PointCloud::new(frame_id_of(path), points), clamped))
}

pub fn decode_points(bytes: &[u8]) -> std::result::Result<(Vec<Point>, usize), String> {
    if !bytes.len().is_multiple_of(BYTES_PER_POINT) {
        let tail = bytes.len() - bytes.len() % BYTES_PER_POINT;
        return Err(format!(
            "length {} is not a multiple of {BYTES_PER_POINT}; trailing bytes start at offset {tail}",
            bytes.len()
        ));
    }
    let mut clamped = 0;
    let mut points = Vec::with_capacity(bytes.len() / BYTES_PER_POINT);
    for (i, chunk) in bytes.chunks_exact(BYTES_PER_POINT).enumerate() {
        let f = |k: usize| f32::from_le_bytes(chunk[4 * k..4 * k + 4].try_into().unwrap()) as f64;
        let mut p = Point::new(f(0), f(1), f(2), f(3));
        if !p.is_finite() {
            return Err(format!("non-finite value in point at byte offset {}", i * BYTES_PER_POINT));
        }
        if !(0.0..=1.0).contains(&p.reflectance) {
            p.reflectance = p.reflectance.clamp(0.0, 1.0);
            clamped += 1;
        }
        points.push(p);
    }
    Ok((points, clamped))
}

pub fn encode_points(points: &[Point]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * BYTES_PER_POINT);
    for p in points {
        for v in [p.x, p.y, p.z, p.reflectance] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_point_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_points(&cloud.points)).map_err(|e| Error::io(path, e))
}

fn frame_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// `Tr_velo_to_cam`, `R0_rect` and `P2` from a KITTI calib file.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMatrices {
    pub velo_to_cam: Matrix3x4<f64>,
    pub rect: Matrix3<f64>,
    pub cam_to_image: Matrix3x4<f64>,
}

impl CalibrationMatrices {
    /// Typical KITTI extrinsics: camera x = -lidar y, camera y = -lidar z,
    /// camera z = lidar x, with the sensor offsets of the recording rig.
    pub fn kitti_like() -> Self {
        #[rustfmt::skip]
        let velo_to_cam = Matrix3x4::new(
            0.0, -1.0, 0.0, 0.0,
            0.0, 0.0, -1.0, -0.08,
            1.0, 0.0, 0.0, -0.27,
        );
        #[rustfmt::skip]
        let cam_to_image = Matrix3x4::new(
            721.5377, 0.0, 609.5593, 44.85728,
            0.0, 721.5377, 172.854, 0.2163791,
            0.0, 0.0, 1.0, 0.002745884,
        );
        Self {
            velo_to_cam,
            rect: Matrix3::identity(),
            cam_to_image,
        }
    }

    /// Rectified-camera from LiDAR, as a homogeneous 4x4.
    pub fn rect_from_velo(&self) -> Matrix4<f64> {
        let mut r = Matrix4::identity();
        r.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rect);
        let mut t = Matrix4::identity();
        t.fixed_view_mut::<3, 4>(0, 0).copy_from(&self.velo_to_cam);
        r * t
    }

    pub fn velo_from_rect(&self) -> Matrix4<f64> {
        self.rect_from_velo()
            .try_inverse()
            .expect("validated calibration is invertible")
    }

    pub fn velo_to_rect_point(&self, p: [f64; 3]) -> [f64; 3] {
        apply(&self.rect_from_velo(), p)
    }

    pub fn rect_to_velo_point(&self, p: [f64; 3]) -> [f64; 3] {
        apply(&self.velo_from_rect(), p)
    }

    /// Image-plane projection of a rectified-camera point, `None` behind
    /// the camera.
    pub fn project_rect(&self, p: [f64; 3]) -> Option<[f64; 2]> {
        let v = self.cam_to_image * Vector4::new(p[0], p[1], p[2], 1.0);
        (v[2] > 1e-6).then(|| [v[0] / v[2], v[1] / v[2]])
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let rot = self.velo_to_cam.fixed_view::<3, 3>(0, 0).into_owned();
        let err = (rot * rot.transpose() - Matrix3::identity()).abs().max();
        if err > 1e-3 {
            return Err(format!("Tr_velo_to_cam rotation is not orthonormal (error {err:.2e})"));
        }
        if self.rect_from_velo().try_inverse().is_none() {
            return Err("R0_rect * Tr_velo_to_cam is singular".into());
        }
        Ok(())
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut velo = None;
        let mut rect = None;
        let mut p2 = None;
        for (lineno, line) in text.lines().enumerate() {
            let Some((key, rest)) = line.split_once(':') else {
                continue;
            };
            let values: Vec<f64> = rest
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| format!("line {}: {e}", lineno + 1))?;
            let want = |n: usize| {
                if values.len() == n {
                    Ok(())
                } else {
                    Err(format!("line {}: {key} needs {n} values, got {}", lineno + 1, values.len()))
                }
            };
            match key.trim() {
                "Tr_velo_to_cam" | "Tr_velo_cam" => {
                    want(12)?;
                    velo = Some(Matrix3x4::from_row_slice(&values));
                }
                "R0_rect" | "R_rect" => {
                    want(9)?;
                    rect = Some(Matrix3::from_row_slice(&values));
                }
                "P2" => {
                    want(12)?;
                    p2 = Some(Matrix3x4::from_row_slice(&values));
                }
                _ => {}
            }
        }
        let calib = Self {
            velo_to_cam: velo.ok_or("missing Tr_velo_to_cam")?,
            rect: rect.ok_or("missing R0_rect")?,
            cam_to_image: p2.ok_or("missing P2")?,
        };
        calib.validate()?;
        Ok(calib)
    }

    /// Renders the three matrices in KITTI `key: values` form.
    pub fn to_text(&self) -> String {
        let row_major = |m: &[f64], rows: usize, cols: usize| {
            let mut vals = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for c in 0..cols {
                    vals.push(m[c * rows + r].to_string());
                }
            }
            vals.join(" ")
        };
        format!(
            "P2: {}\nR0_rect: {}\nTr_velo_to_cam: {}\n",
            row_major(self.cam_to_image.as_slice(), 3, 4),
            row_major(self.rect.as_slice(), 3, 3),
            row_major(self.velo_to_cam.as_slice(), 3, 4),
        )
    }
}

fn apply(m: &Matrix4<f64>, p: [f64; 3]) -> [f64; 3] {
    let v = m * Vector4::new(p[0], p[1], p[2], 1.0);
    [v[0], v[1], v[2]]
}

pub fn read_calibration(path: impl AsRef<Path>) -> Result<CalibrationMatrices> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CalibrationMatrices::parse(&text).map_err(|m| Error::format(path, m))
}

pub fn write_calibration(calib: &CalibrationMatrices, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, calib.to_text()).map_err(|e| Error::io(path, e))
}

/// One line of a KITTI label or result file, verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub class: String,
    pub truncation: f64,
    pub occlusion: i32,
    pub alpha: f64,
    pub bbox: [f64; 4],
    /// `(h, w, l)` in meters.
    pub dimensions: [f64; 3],
    /// Bottom-face center in the rectified camera frame.
    pub location: [f64; 3],
    pub rotation_y: f64,
    pub score: Option<f64>,
}

impl LabelRecord {
    pub fn parse_line(line: &str) -> std::result::Result<Self, String> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 15 && fields.len() != 16 {
            return Err(format!("expected 15 or 16 fields, found {}", fields.len()));
        }
        let num = |i: usize| -> std::result::Result<f64, String> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| format!("field {} ({:?}) is not a number", i + 1, fields[i]))
        };
        let occlusion = fields[2]
            .parse::<f64>()
            .map_err(|_| format!("field 3 ({:?}) is not a number", fields[2]))? as i32;
        Ok(Self {
            class: fields[0].to_string(),
            truncation: num(1)?,
            occlusion,
            alpha: num(3)?,
            bbox: [num(4)?, num(5)?, num(6)?, num(7)?],
            dimensions: [num(8)?, num(9)?, num(10)?],
            location: [num(11)?, num(12)?, num(13)?],
            rotation_y: num(14)?,
            score: if fields.len() == 16 { Some(num(15)?) } else { None },
        })
    }

    pub fn to_line(&self) -> String {
        let mut s = format!(
            "{} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            self.class,
            self.truncation,
            self.occlusion,
            self.alpha,
            self.bbox[0],
            self.bbox[1],
            self.bbox[2],
            self.bbox[3],
            self.dimensions[0],
            self.dimensions[1],
            self.dimensions[2],
            self.location[0],
            self.location[1],
            self.location[2],
            self.rotation_y,
        );
        if let Some(score) = self.score {
            let _ = write!(s, " {score}");
        }
        s
    }

    pub fn is_dont_care(&self) -> bool {
        self.class == "DontCare"
    }
}

/// Coordinate frame of the `location`/`rotation_y` fields on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelCoords {
    /// KITTI convention, requires calibration.
    #[default]
    Camera,
    /// Pre-converted: `location` is the LiDAR-frame geometric center and
    /// `rotation_y` the LiDAR yaw.
    Lidar,
}

/// Parsed label file: boxes in file order plus the DontCare records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelSet {
    pub boxes: Vec<Box3D>,
    pub ignored: Vec<LabelRecord>,
}

fn yaw_from_rotation_y(ry: f64) -> f64 {
    normalize_angle(-ry - std::f64::consts::FRAC_PI_2)
}

fn rotation_y_from_yaw(yaw: f64) -> f64 {
    normalize_angle(-yaw - std::f64::consts::FRAC_PI_2)
}

pub fn record_to_box(
    rec: &LabelRecord,
    calib: Option<&CalibrationMatrices>,
    coords: LabelCoords,
) -> Result<Box3D> {
    let [h, w, l] = rec.dimensions;
    let (center, yaw) = match coords {
        LabelCoords::Camera => {
            let calib = calib.ok_or_else(|| {
                Error::InvalidArgument("camera-frame labels need a calibration".into())
            })?;
            let bottom = calib.rect_to_velo_point(rec.location);
            ([bottom[0], bottom[1], bottom[2] + h / 2.0], yaw_from_rotation_y(rec.rotation_y))
        }
        LabelCoords::Lidar => (rec.location, normalize_angle(rec.rotation_y)),
    };
    let mut b = Box3D::new(center, [l, w, h], yaw, rec.class.parse().unwrap());
    b.score = rec.score;
    b.truncation = (rec.truncation >= 0.0).then_some(rec.truncation);
    b.occlusion = (0..=3).contains(&rec.occlusion).then_some(rec.occlusion as u8);
    b.image_bbox = (rec.bbox != [-1.0; 4]).then_some(rec.bbox);
    b.alpha = (rec.alpha > -10.0).then_some(rec.alpha);
    Ok(b)
}

pub fn box_to_record(
    b: &Box3D,
    calib: Option<&CalibrationMatrices>,
    coords: LabelCoords,
) -> Result<LabelRecord> {
    let (location, rotation_y) = match coords {
        LabelCoords::Camera => {
            let calib = calib.ok_or_else(|| {
                Error::InvalidArgument("camera-frame labels need a calibration".into())
            })?;
            let loc = calib.velo_to_rect_point([b.cx, b.cy, b.cz - b.height / 2.0]);
            (loc, rotation_y_from_yaw(b.yaw))
        }
        LabelCoords::Lidar => (b.center(), b.yaw),
    };
    let alpha = b.alpha.unwrap_or_else(|| match coords {
        LabelCoords::Camera => normalize_angle(rotation_y - location[0].atan2(location[2])),
        LabelCoords::Lidar => -10.0,
    });
    Ok(LabelRecord {
        class: b.class.as_str().to_string(),
        truncation: b.truncation.unwrap_or(-1.0),
        occlusion: b.occlusion.map_or(-1, i32::from),
        alpha,
        bbox: b.image_bbox.unwrap_or([-1.0; 4]),
        dimensions: [b.height, b.width, b.length],
        location,
        rotation_y,
        score: b.score,
    })
}

pub fn parse_labels(
    text: &str,
    calib: Option<&CalibrationMatrices>,
    coords: LabelCoords,
    path: &Path,
) -> Result<LabelSet> {
    if coords == LabelCoords::Camera && calib.is_none() {
        return Err(Error::InvalidArgument(format!(
            "{}: camera-frame labels need a calibration",
            path.display()
        )));
    }
    let mut set = LabelSet::default();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = LabelRecord::parse_line(line)
            .map_err(|m| Error::format(path, format!("line {}: {m}", lineno + 1)))?;
        if rec.is_dont_care() {
            set.ignored.push(rec);
            continue;
        }
        let b = record_to_box(&rec, calib, coords)?;
        if !b.is_valid() {
            return Err(Error::format(
                path,
                format!("line {}: box has non-positive dimensions", lineno + 1),
            ));
        }
        set.boxes.push(b);
    }
    Ok(set)
}

/// Ground-truth labels converted into the LiDAR frame.
pub fn read_labels(
    path: impl AsRef<Path>,
    calib: Option<&CalibrationMatrices>,
    coords: LabelCoords,
) -> Result<LabelSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, calib, coords, path)
}

/// Detection results; every line must carry a score.
pub fn read_detections(
    path: impl AsRef<Path>,
    calib: Option<&CalibrationMatrices>,
    coords: LabelCoords,
) -> Result<Vec<Box3D>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (lineno, line) in text.lines().enumerate() {
        let n = line.split_whitespace().count();
        if n != 0 && n != 16 {
            return Err(Error::format(
                path,
                format!("line {}: detection needs 16 fields (with score), found {n}", lineno + 1),
            ));
        }
    }
    Ok(parse_labels(&text, calib, coords, path)?.boxes)
}

pub fn format_labels(
    boxes: &[Box3D],
    ignored: &[LabelRecord],
    calib: Option<&CalibrationMatrices>,
    coords: LabelCoords,
) -> Result<String> {
    let mut out = String::new();
    for b in boxes {
        out.push_str(&box_to_record(b, calib, coords)?.to_line());
        out.push('\n');
    }
    for r in ignored {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    Ok(out)
}

/// Inverse of [`read_labels`]; DontCare records in `ignored` are appended
/// unchanged.
pub fn write_labels(
    boxes: &[Box3D],
    ignored: &[LabelRecord],
    calib: Option<&CalibrationMatrices>,
    coords: LabelCoords,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let text = format_labels(boxes, ignored, calib, coords)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
