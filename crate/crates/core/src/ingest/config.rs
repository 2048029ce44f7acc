//! Run configuration, read from TOML or JSON. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::png::PanopticEncoding;
use crate::error::{Error, Result};
use crate::graph::AttributeNorm;
use crate::gtgen::GtGenConfig;
use crate::loss::{LossOptions, LossWeights};
use crate::metrics::MetricOptions;

/// Ground-truth rendering parameters; `pixels_per_degree` has no default
/// and is only demanded when a map is actually rendered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GtGenSection {
    pub fixation_window: usize,
    pub sigma_dva: f64,
    pub pixels_per_degree: Option<f64>,
    pub truncation_radius: f64,
}

impl Default for GtGenSection {
    fn default() -> Self {
        let d = GtGenConfig::new(1.0);
        Self {
            fixation_window: d.fixation_window,
            sigma_dva: d.sigma_dva,
            pixels_per_degree: None,
            truncation_radius: d.truncation_radius,
        }
    }
}

impl GtGenSection {
    pub fn resolve(&self) -> Result<GtGenConfig> {
        let ppd = self.pixels_per_degree.ok_or_else(|| {
            Error::Config(
                "gtgen.pixels_per_degree is required to render ground truth from fixations".into(),
            )
        })?;
        let cfg = GtGenConfig {
            fixation_window: self.fixation_window,
            sigma_dva: self.sigma_dva,
            pixels_per_degree: ppd,
            truncation_radius: self.truncation_radius,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Where ground truth comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundTruthSource {
    /// A map file when present, otherwise rendered from fixations if
    /// `pixels_per_degree` is configured.
    #[default]
    Auto,
    Maps,
    Fixations,
}

/// Dataset directory layout, relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub predicted_dir: String,
    pub ground_truth_dir: String,
    pub panoptic_dir: String,
    pub objects_dir: String,
    pub fixations_file: String,
    pub panoptic_encoding: PanopticEncoding,
    pub ground_truth: GroundTruthSource,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            predicted_dir: "predicted".into(),
            ground_truth_dir: "ground_truth".into(),
            panoptic_dir: "panoptic".into(),
            objects_dir: "objects".into(),
            fixations_file: "fixations.csv".into(),
            panoptic_encoding: PanopticEncoding::default(),
            ground_truth: GroundTruthSource::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub weights: LossWeights,
    pub options: LossOptions,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Restrict oSIM (metric and loss) to thing segments.
    pub things_only: bool,
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
    pub metrics: MetricOptions,
    pub gtgen: GtGenSection,
    pub loss: LossSection,
    pub attributes: AttributeNorm,
    pub layout: LayoutConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        };
        cfg.map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        if !(self.metrics.kld_epsilon > 0.0 && self.metrics.kld_epsilon.is_finite()) {
            return Err(Error::Config("metrics.kld_epsilon must be positive".into()));
        }
        if !(self.loss.options.kld_epsilon > 0.0 && self.loss.options.kld_epsilon.is_finite()) {
            return Err(Error::Config(
                "loss.options.kld_epsilon must be positive".into(),
            ));
        }
        if self.gtgen.fixation_window == 0 {
            return Err(Error::Config("gtgen.fixation_window must be >= 1".into()));
        }
        self.loss.weights.validate()
    }

    pub fn metric_options(&self) -> MetricOptions {
        MetricOptions {
            things_only: self.metrics.things_only || self.things_only,
            ..self.metrics
        }
    }

    pub fn loss_options(&self) -> LossOptions {
        LossOptions {
            things_only: self.loss.options.things_only || self.things_only,
            ..self.loss.options
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_parse() {
        let c = RunConfig::from_toml(
            r#"
            things_only = true
            jobs = 2
            [gtgen]
            pixels_per_degree = 12.5
            fixation_window = 1
            [loss.weights]
            lambda_osim = -3.0
            [layout]
            panoptic_encoding = "cityscapes-label-ids"
            ground_truth = "fixations"
            "#,
        )
        .unwrap();
        assert!(c.metric_options().things_only);
        assert!(c.loss_options().things_only);
        assert_eq!(c.jobs, Some(2));
        assert_eq!(c.loss.weights.lambda_osim, -3.0);
        assert_eq!(c.loss.weights.lambda_kld, 10.0);
        let g = c.gtgen.resolve().unwrap();
        assert_eq!(
            (g.pixels_per_degree, g.fixation_window, g.sigma_dva),
            (12.5, 1, 3.0)
        );
        assert_eq!(
            c.layout.panoptic_encoding,
            PanopticEncoding::CityscapesLabelIds
        );
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            RunConfig::from_toml("bogus = 1"),
            Err(Error::Config(_))
        ));
        assert!(RunConfig::from_toml("[metrics]\nkld_eps = 1.0").is_err());
        assert!(RunConfig::from_json(r#"{"gtgen": {"ppd": 3}}"#).is_err());
        assert!(RunConfig::from_toml("jobs = 0").is_err());
        assert!(matches!(
            RunConfig::default().gtgen.resolve(),
            Err(Error::Config(m)) if m.contains("pixels_per_degree")
        ));
    }
}
