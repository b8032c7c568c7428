//! Rain, snow and fog.
//!
//! Severity levels set a rain/snow rate or a fog extinction coefficient.
//! The scattering itself is a single-scattering approximation behind the
//! [`ScatteringModel`] trait:
//!
//! * two-way Beer-Lambert attenuation of reflectance, `exp(-2 alpha r)`;
//! * dropout of returns whose attenuated reflectance falls below the
//!   detector threshold;
//! * droplet backscatter: with probability `1 - exp(-beta alpha)` a
//!   surviving beam returns early, at `U(1 m, min(r, r_max))` along the
//!   same ray with reflectance `U(0, 0.1)`.
//!
//! Returns with exactly zero reflectance pass through untouched.

use serde::{Deserialize, Serialize};

use crate::geometry::{to_cartesian, to_spherical, PointCloud};
use crate::rng::RandomStream;
use crate::severity::Severity;

pub const RAIN_RATE_MM_PER_HR: [f64; 6] = [0.0, 5.0, 15.0, 50.0, 150.0, 500.0];
pub const SNOW_RATE_MM_PER_HR: [f64; 6] = [0.0, 0.5, 1.5, 5.0, 15.0, 50.0];
pub const FOG_ALPHA_PER_M: [f64; 6] = [0.0, 0.005, 0.01, 0.02, 0.05, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeatherKind {
    Rain,
    Snow,
    Fog,
}

/// Tunable physics constants (config keys under `[weather]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeatherConfig {
    pub min_detectable_intensity: f64,
    /// `beta` in `p_scatter = 1 - exp(-beta alpha)`, meters.
    pub backscatter_beta_m: f64,
    pub scatter_range_min_m: f64,
    pub scatter_range_max_m: f64,
    pub scatter_reflectance_max: f64,
    /// Rain extinction `alpha = c R^e` with R in mm/hr.
    pub rain_coefficient: f64,
    pub rain_exponent: f64,
    pub snow_coefficient: f64,
    pub snow_exponent: f64,
}

impl Default for WeatherConfig {
    fn default() -> Self {
        Self {
            min_detectable_intensity: 0.002,
            backscatter_beta_m: 5.0,
            scatter_range_min_m: 1.0,
            scatter_range_max_m: 20.0,
            scatter_reflectance_max: 0.1,
            rain_coefficient: 0.01,
            rain_exponent: 0.6,
            snow_coefficient: 0.07,
            snow_exponent: 0.7,
        }
    }
}

/// Concrete parameters for one `(kind, severity)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherParams {
    pub kind: WeatherKind,
    pub rate_mm_per_hr: Option<f64>,
    pub alpha_per_m: Option<f64>,
    pub min_detectable_intensity: f64,
    pub scatter_range_max_m: f64,
}

impl WeatherParams {
    pub fn for_severity(kind: WeatherKind, severity: Severity, cfg: &WeatherConfig) -> Self {
        let i = severity.index();
        let (rate, alpha) = match kind {
            WeatherKind::Rain => (Some(RAIN_RATE_MM_PER_HR[i]), None),
            WeatherKind::Snow => (Some(SNOW_RATE_MM_PER_HR[i]), None),
            WeatherKind::Fog => (None, Some(FOG_ALPHA_PER_M[i])),
        };
        Self {
            kind,
            rate_mm_per_hr: rate,
            alpha_per_m: alpha,
            min_detectable_intensity: cfg.min_detectable_intensity,
            scatter_range_max_m: cfg.scatter_range_max_m,
        }
    }

    /// Extinction coefficient in 1/m.
    pub fn extinction(&self, cfg: &WeatherConfig) -> f64 {
        match (self.kind, self.rate_mm_per_hr, self.alpha_per_m) {
            (WeatherKind::Fog, _, Some(a)) => a,
            (WeatherKind::Rain, Some(r), _) if r > 0.0 => cfg.rain_coefficient * r.powf(cfg.rain_exponent),
            (WeatherKind::Snow, Some(r), _) if r > 0.0 => cfg.snow_coefficient * r.powf(cfg.snow_exponent),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WeatherStats {
    pub dropped: usize,
    pub relocated: usize,
}

/// Physics layer for the weather kinds; swap in a different model to
/// change how points are dimmed, lost and scattered.
pub trait ScatteringModel {
    fn apply(&self, cloud: &PointCloud, alpha: f64, rng: &mut RandomStream) -> (PointCloud, WeatherStats);
}

#[derive(Debug, Clone, Default)]
pub struct SimplifiedScattering {
    pub config: WeatherConfig,
}

/// Two-way attenuated reflectance.
pub fn attenuate(reflectance: f64, range: f64, alpha: f64) -> f64 {
    reflectance * (-2.0 * alpha * range).exp()
}

pub fn scatter_probability(alpha: f64, beta: f64) -> f64 {
    1.0 - (-beta * alpha).exp()
}

impl ScatteringModel for SimplifiedScattering {
    fn apply(&self, cloud: &PointCloud, alpha: f64, rng: &mut RandomStream) -> (PointCloud, WeatherStats) {
        let cfg = &self.config;
        let p_scatter = scatter_probability(alpha, cfg.backscatter_beta_m);
        let mut stats = WeatherStats::default();
        let mut out = PointCloud::new(cloud.frame_id.clone(), Vec::with_capacity(cloud.len()));
        for p in &cloud.points {
            if p.reflectance == 0.0 {
                out.points.push(*p);
                continue;
            }
            let s = to_spherical(p);
            let dimmed = attenuate(p.reflectance, s.r, alpha);
            if dimmed < cfg.min_detectable_intensity {
                stats.dropped += 1;
                continue;
            }
            // One draw per surviving beam keeps the stream aligned across kinds.
            let hit = rng.unit() < p_scatter;
            let far = s.r.min(cfg.scatter_range_max_m);
            if hit && far > cfg.scatter_range_min_m {
                let mut moved = s;
                moved.r = rng.uniform(cfg.scatter_range_min_m, far);
                moved.reflectance = rng.uniform(0.0, cfg.scatter_reflectance_max);
                out.points.push(to_cartesian(&moved));
                stats.relocated += 1;
            } else {
                let mut q = *p;
                q.reflectance = dimmed;
                out.points.push(q);
            }
        }
        (out, stats)
    }
}

/// Weather corruption with the built-in scattering model.
pub fn weather(
    cloud: &PointCloud,
    kind: WeatherKind,
    severity: Severity,
    rng: &mut RandomStream,
    cfg: &WeatherConfig,
) -> (PointCloud, WeatherStats) {
    let model = SimplifiedScattering { config: cfg.clone() };
    weather_with(&model, cloud, kind, severity, rng, cfg)
}

pub fn weather_with(
    model: &dyn ScatteringModel,
    cloud: &PointCloud,
    kind: WeatherKind,
    severity: Severity,
    rng: &mut RandomStream,
    cfg: &WeatherConfig,
) -> (PointCloud, WeatherStats) {
    if severity.is_clean() {
        return (cloud.clone(), WeatherStats::default());
    }
    let alpha = WeatherParams::for_severity(kind, severity, cfg).extinction(cfg);
    model.apply(cloud, alpha, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn ring_cloud() -> PointCloud {
        let mut rng = RandomStream::new(1);
        let pts = (0..5000)
            .map(|i| {
                let r = rng.uniform(2.0, 80.0);
                let phi = rng.uniform(-3.1, 3.1);
                let refl = if i % 10 == 0 { 0.0 } else { rng.uniform(0.0, 1.0) };
                Point::new(r * phi.cos(), r * phi.sin(), -1.7, refl)
            })
            .collect();
        PointCloud::new("w", pts)
    }

    #[test]
    fn schedules_rise_with_severity() {
        let cfg = WeatherConfig::default();
        for kind in [WeatherKind::Rain, WeatherKind::Snow, WeatherKind::Fog] {
            let alphas: Vec<f64> = Severity::all()
                .map(|s| WeatherParams::for_severity(kind, s, &cfg).extinction(&cfg))
                .collect();
            assert_eq!(alphas[0], 0.0);
            assert!(alphas.windows(2).all(|w| w[0] < w[1]), "{kind:?} {alphas:?}");
        }
    }

    #[test]
    fn clean_is_identity() {
        let c = ring_cloud();
        for kind in [WeatherKind::Rain, WeatherKind::Snow, WeatherKind::Fog] {
            let (out, _) = weather(&c, kind, Severity::CLEAN, &mut RandomStream::new(3), &WeatherConfig::default());
            assert_eq!(out, c);
        }
    }

    #[test]
    fn fog_attenuation_closed_form() {
        assert!((attenuate(0.5, 30.0, 0.1) - 0.5 * (-6.0f64).exp()).abs() < 1e-15);
        let cfg = WeatherConfig {
            backscatter_beta_m: 0.0,
            ..Default::default()
        };
        let c = PointCloud::new("f", vec![Point::new(30.0, 0.0, 0.0, 1.0)]);
        let (out, st) = weather(&c, WeatherKind::Fog, Severity::new(5).unwrap(), &mut RandomStream::new(0), &cfg);
        assert_eq!(st, WeatherStats::default());
        assert!((out.points[0].reflectance - (-6.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn zero_reflectance_survives_and_count_never_grows() {
        let c = ring_cloud();
        let zeros = c.points.iter().filter(|p| p.reflectance == 0.0).count();
        for kind in [WeatherKind::Rain, WeatherKind::Snow, WeatherKind::Fog] {
            for s in Severity::corrupted() {
                let (out, st) = weather(&c, kind, s, &mut RandomStream::new(4), &WeatherConfig::default());
                assert!(out.len() <= c.len());
                assert_eq!(out.len() + st.dropped, c.len());
                let kept_zero = c.points.iter().filter(|p| p.reflectance == 0.0 && out.points.contains(p)).count();
                assert_eq!(kept_zero, zeros);
            }
        }
    }

    #[test]
    fn relocation_stays_on_ray_and_moves_inward() {
        let c = ring_cloud();
        let cfg = WeatherConfig::default();
        let mut rng = RandomStream::new(5);
        let (out, st) = SimplifiedScattering { config: cfg.clone() }.apply(&c, 0.3, &mut rng);
        assert!(st.relocated > 0);
        // Map outputs back to inputs: survivors keep order.
        let mut j = 0;
        for p in &c.points {
            if p.reflectance != 0.0 && attenuate(p.reflectance, p.range(), 0.3) < cfg.min_detectable_intensity {
                continue;
            }
            let q = out.points[j];
            j += 1;
            if p.reflectance != 0.0 && q.reflectance <= cfg.scatter_reflectance_max && q.range() + 1e-9 < p.range() {
                let (sp, sq) = (to_spherical(p), to_spherical(&q));
                assert!((sp.theta - sq.theta).abs() < 1e-9 && (sp.phi - sq.phi).abs() < 1e-9);
                assert!(sq.r < sp.r && sq.r >= cfg.scatter_range_min_m);
            }
        }
        assert_eq!(j, out.len());
    }
}
