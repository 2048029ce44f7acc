//! Ground-truth attention maps from fixation history: isotropic Gaussians
//! at the most recent fixations, truncated and normalized to unit sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{FixationSet, SaliencyMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtGenConfig {
    /// How many of the most recent fixations contribute.
    #[serde(default = "default_window")]
    pub fixation_window: usize,
    /// Gaussian standard deviation in degrees of visual angle.
    #[serde(default = "default_sigma")]
    pub sigma_dva: f64,
    /// Dataset-specific optics; there is no default.
    pub pixels_per_degree: f64,
    /// Kernel support radius in multiples of sigma.
    #[serde(default = "default_truncation")]
    pub truncation_radius: f64,
}

fn default_window() -> usize {
    3
}

fn default_sigma() -> f64 {
    3.0
}

fn default_truncation() -> f64 {
    4.0
}

impl GtGenConfig {
    pub fn new(pixels_per_degree: f64) -> Self {
        Self {
            fixation_window: default_window(),
            sigma_dva: default_sigma(),
            pixels_per_degree,
            truncation_radius: default_truncation(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fixation_window < 1 {
            return Err(Error::Config("fixation_window must be >= 1".into()));
        }
        for (name, v) in [
            ("sigma_dva", self.sigma_dva),
            ("pixels_per_degree", self.pixels_per_degree),
            ("truncation_radius", self.truncation_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn sigma_px(&self) -> Result<f64> {
        dva_to_pixels(self.sigma_dva, self.pixels_per_degree)
    }
}

pub fn dva_to_pixels(sigma_dva: f64, pixels_per_degree: f64) -> Result<f64> {
    if !(sigma_dva > 0.0 && sigma_dva.is_finite()) {
        return Err(Error::Config(format!(
            "sigma must be positive, got {sigma_dva}"
        )));
    }
    if !(pixels_per_degree > 0.0 && pixels_per_degree.is_finite()) {
        return Err(Error::Config(format!(
            "pixels_per_degree must be positive, got {pixels_per_degree}"
        )));
    }
    Ok(sigma_dva * pixels_per_degree)
}

/// Renders the ground-truth map for one frame.
///
/// The last `min(window, n)` fixations each contribute an equally weighted
/// Gaussian centred on their nearest pixel. Mass beyond the truncation
/// radius or outside the image is dropped before normalization.
pub fn render_ground_truth(
    fixations: &FixationSet,
    config: &GtGenConfig,
    width: usize,
    height: usize,
) -> Result<SaliencyMap> {
    config.validate()?;
    if fixations.is_empty() {
        return Err(Error::EmptyFixations);
    }
    if width == 0 || height == 0 {
        return Err(Error::Shape(format!("empty {width}x{height} image")));
    }
    let sigma = config.sigma_px()?;
    let radius = config.truncation_radius * sigma;
    let r2 = radius * radius;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let reach = radius.floor() as i64;

    let mut values = vec![0.0; width * height];
    for f in fixations.last(config.fixation_window) {
        let (cx, cy) = f.pixel(width, height)?;
        let (cx, cy) = (cx as i64, cy as i64);
        let y0 = (cy - reach).max(0);
        let y1 = (cy + reach).min(height as i64 - 1);
        let x0 = (cx - reach).max(0);
        let x1 = (cx + reach).min(width as i64 - 1);
        for y in y0..=y1 {
            let dy = (y - cy) as f64;
            let row = y as usize * width;
            for x in x0..=x1 {
                let dx = (x - cx) as f64;
                let d2 = dx * dx + dy * dy;
                if d2 <= r2 {
                    values[row + x as usize] += (-d2 * inv).exp();
                }
            }
        }
    }
    SaliencyMap::new(width, height, values)?.normalize_unit_sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::Fixation;

    fn cfg(ppd: f64) -> GtGenConfig {
        GtGenConfig::new(ppd)
    }

    #[test]
    fn dva_conversion() {
        assert_eq!(dva_to_pixels(3.0, 10.0).unwrap(), 30.0);
        assert_eq!(dva_to_pixels(3.0, 1.0).unwrap(), 3.0);
        assert!(matches!(dva_to_pixels(0.0, 10.0), Err(Error::Config(_))));
        assert!(matches!(dva_to_pixels(3.0, -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(1.0);
        assert!(c.validate().is_ok());
        c.fixation_window = 0;
        assert!(c.validate().is_err());
        let c = GtGenConfig {
            truncation_radius: 0.0,
            ..cfg(1.0)
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn centred_fixation_is_symmetric() {
        let f = FixationSet::new("f", vec![Fixation::new(10.0, 10.0)]);
        let m = render_ground_truth(&f, &cfg(1.0), 21, 21).unwrap();
        assert!((m.total() - 1.0).abs() < 1e-12);
        let c = m.get(10, 10);
        assert_eq!(c, m.max());
        for d in 1..=10 {
            let right = m.get(10 + d, 10);
            assert_eq!(right, m.get(10 - d, 10));
            assert_eq!(right, m.get(10, 10 + d));
            assert_eq!(right, m.get(10, 10 - d));
            assert!(right < c);
        }
    }

    #[test]
    fn window_uses_last_fixations() {
        let pts: Vec<_> = (0..5)
            .map(|i| Fixation::new(3.0 + 4.0 * i as f64, 6.0))
            .collect();
        let all = FixationSet::new("f", pts.clone());
        let last3 = FixationSet::new("f", pts[2..].to_vec());
        let c = cfg(1.0);
        let a = render_ground_truth(&all, &c, 24, 12).unwrap();
        let b = render_ground_truth(&last3, &c, 24, 12).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn duplicate_fixation_cancels_in_normalization() {
        let p = Fixation::new(4.0, 5.0);
        let one = FixationSet::new("f", vec![p]);
        let two = FixationSet::new("f", vec![p, p]);
        let c = cfg(1.5);
        let a = render_ground_truth(&one, &c, 12, 10).unwrap();
        let b = render_ground_truth(&two, &c, 12, 10).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn truncation_zeroes_far_pixels() {
        let f = FixationSet::new("f", vec![Fixation::new(0.0, 0.0)]);
        let m = render_ground_truth(&f, &cfg(1.0), 30, 1).unwrap();
        // sigma = 3 px, radius = 12 px.
        assert!(m.get(12, 0) > 0.0);
        assert_eq!(m.get(13, 0), 0.0);
    }

    #[test]
    fn errors() {
        let empty = FixationSet::new("f", vec![]);
        assert!(matches!(
            render_ground_truth(&empty, &cfg(1.0), 4, 4),
            Err(Error::EmptyFixations)
        ));
        let out = FixationSet::new("f", vec![Fixation::new(9.0, 0.0)]);
        assert!(matches!(
            render_ground_truth(&out, &cfg(1.0), 4, 4),
            Err(Error::Bounds { .. })
        ));
    }
}
