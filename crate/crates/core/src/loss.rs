//! Composite training objective over the metric kernels, with its analytic
//! gradient with respect to the raw predicted map.
//!
//! `total = l_kld*KLD + l_cc*CC + l_sim*SIM + l_nss*NSS + l_mse*MSE + l_osim*oSIM`.
//! Negative weights on the similarity terms turn maximization into descent.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{BinaryFixationMap, PanopticMap, SaliencyMap};
use crate::metrics::{self, DEFAULT_KLD_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_kld: f64,
    pub lambda_cc: f64,
    pub lambda_sim: f64,
    pub lambda_nss: f64,
    pub lambda_mse: f64,
    pub lambda_osim: f64,
}

impl Default for LossWeights {
    /// `(10, -2, -1, -1, 1, -1)`.
    fn default() -> Self {
        Self {
            lambda_kld: 10.0,
            lambda_cc: -2.0,
            lambda_sim: -1.0,
            lambda_nss: -1.0,
            lambda_mse: 1.0,
            lambda_osim: -1.0,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self::only(LossTerm::Kld, 0.0)
    }

    /// A single active term.
    pub fn only(term: LossTerm, weight: f64) -> Self {
        let mut w = LossWeights {
            lambda_kld: 0.0,
            lambda_cc: 0.0,
            lambda_sim: 0.0,
            lambda_nss: 0.0,
            lambda_mse: 0.0,
            lambda_osim: 0.0,
        };
        *w.weight_mut(term) = weight;
        w
    }

    pub fn weight(&self, term: LossTerm) -> f64 {
        match term {
            LossTerm::Kld => self.lambda_kld,
            LossTerm::Cc => self.lambda_cc,
            LossTerm::Sim => self.lambda_sim,
            LossTerm::Nss => self.lambda_nss,
            LossTerm::Mse => self.lambda_mse,
            LossTerm::Osim => self.lambda_osim,
        }
    }

    fn weight_mut(&mut self, term: LossTerm) -> &mut f64 {
        match term {
            LossTerm::Kld => &mut self.lambda_kld,
            LossTerm::Cc => &mut self.lambda_cc,
            LossTerm::Sim => &mut self.lambda_sim,
            LossTerm::Nss => &mut self.lambda_nss,
            LossTerm::Mse => &mut self.lambda_mse,
            LossTerm::Osim => &mut self.lambda_osim,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut w = *self;
        for t in LossTerm::ALL {
            *w.weight_mut(t) *= factor;
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        for t in LossTerm::ALL {
            if !self.weight(t).is_finite() {
                return Err(Error::Config(format!("weight for {t} is not finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossOptions {
    pub kld_epsilon: f64,
    /// Compute MSE on the maps as given instead of their unit-sum forms.
    pub mse_on_raw: bool,
    pub things_only: bool,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            kld_epsilon: DEFAULT_KLD_EPSILON,
            mse_on_raw: false,
            things_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossTerm {
    Kld,
    Cc,
    Sim,
    Nss,
    Mse,
    Osim,
}

impl LossTerm {
    pub const ALL: [LossTerm; 6] = [
        LossTerm::Kld,
        LossTerm::Cc,
        LossTerm::Sim,
        LossTerm::Nss,
        LossTerm::Mse,
        LossTerm::Osim,
    ];

    pub fn key(self) -> &'static str {
        match self {
            LossTerm::Kld => "kld",
            LossTerm::Cc => "cc",
            LossTerm::Sim => "sim",
            LossTerm::Nss => "nss",
            LossTerm::Mse => "mse",
            LossTerm::Osim => "osim",
        }
    }
}

impl fmt::Display for LossTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermValue {
    pub raw_value: f64,
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub per_term: BTreeMap<LossTerm, TermValue>,
}

fn degenerate(err: Error) -> Error {
    match err {
        Error::ZeroMass => Error::DegenerateInput("map has zero total mass".into()),
        Error::EmptyFixations => Error::DegenerateInput("no fixated pixels".into()),
        other => other,
    }
}

/// Evaluates every term with the metric kernels and combines them.
pub fn combined_loss(
    predicted_raw: &SaliencyMap,
    ground_truth: &SaliencyMap,
    fixations: &BinaryFixationMap,
    panoptic: &PanopticMap,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    combined_loss_with(
        predicted_raw,
        ground_truth,
        fixations,
        panoptic,
        weights,
        &LossOptions::default(),
    )
}

pub fn combined_loss_with(
    predicted_raw: &SaliencyMap,
    ground_truth: &SaliencyMap,
    fixations: &BinaryFixationMap,
    panoptic: &PanopticMap,
    weights: &LossWeights,
    options: &LossOptions,
) -> Result<LossBreakdown> {
    weights.validate()?;
    let pred = predicted_raw.normalize_unit_sum().map_err(degenerate)?;
    let gt = ground_truth.normalize_unit_sum().map_err(degenerate)?;

    let raw = |term: LossTerm| -> Result<f64> {
        match term {
            LossTerm::Kld => metrics::kld(&pred, &gt, options.kld_epsilon),
            LossTerm::Cc => metrics::cc(predicted_raw, ground_truth),
            LossTerm::Sim => metrics::sim(&pred, &gt),
            LossTerm::Nss => metrics::nss(predicted_raw, fixations),
            LossTerm::Mse if options.mse_on_raw => metrics::mse(predicted_raw, ground_truth),
            LossTerm::Mse => metrics::mse(&pred, &gt),
            LossTerm::Osim => {
                metrics::osim_with(&pred, &gt, panoptic, options.things_only).map(|r| r.value)
            }
        }
        .map_err(degenerate)
    };

    let mut total = 0.0;
    let mut per_term = BTreeMap::new();
    for term in LossTerm::ALL {
        let raw_value = raw(term)?;
        let weighted = weights.weight(term) * raw_value;
        total += weighted;
        per_term.insert(
            term,
            TermValue {
                raw_value,
                weighted,
            },
        );
    }
    Ok(LossBreakdown { total, per_term })
}

/// Subgradient of `min(a, b)` with respect to `a`; ties split evenly.
fn min_grad(a: f64, b: f64) -> f64 {
    if a < b {
        1.0
    } else if a > b {
        0.0
    } else {
        0.5
    }
}

/// Gradient of [`combined_loss`] with respect to every raw predicted pixel.
pub fn grad_combined_loss(
    predicted_raw: &SaliencyMap,
    ground_truth: &SaliencyMap,
    fixations: &BinaryFixationMap,
    panoptic: &PanopticMap,
    weights: &LossWeights,
) -> Result<Vec<f64>> {
    grad_combined_loss_with(
        predicted_raw,
        ground_truth,
        fixations,
        panoptic,
        weights,
        &LossOptions::default(),
    )
}

/// Terms defined on the unit-sum prediction `s = x / sum(x)` accumulate
/// their gradient in `s` first and are pulled back through the
/// normalization: `d/dx_i = (g_i - sum_j g_j s_j) / sum(x)`. CC, NSS and
/// raw MSE are differentiated in `x` directly.
pub fn grad_combined_loss_with(
    predicted_raw: &SaliencyMap,
    ground_truth: &SaliencyMap,
    fixations: &BinaryFixationMap,
    panoptic: &PanopticMap,
    weights: &LossWeights,
    options: &LossOptions,
) -> Result<Vec<f64>> {
    weights.validate()?;
    let (w, h) = (predicted_raw.width(), predicted_raw.height());
    if !ground_truth.same_shape(w, h)
        || !fixations.same_shape(w, h)
        || panoptic.width() != w
        || panoptic.height() != h
    {
        return Err(Error::Shape(format!(
            "loss inputs disagree with the {w}x{h} prediction"
        )));
    }
    let x = predicted_raw.values();
    let n = x.len();
    let nf = n as f64;
    let mass = predicted_raw.total();
    let pred = predicted_raw.normalize_unit_sum().map_err(degenerate)?;
    let gt = ground_truth.normalize_unit_sum().map_err(degenerate)?;
    let s = pred.values();
    let q = gt.values();
    let eps = options.kld_epsilon;

    let mut gs = vec![0.0; n];
    if weights.lambda_kld != 0.0 {
        for i in 0..n {
            gs[i] -= weights.lambda_kld * q[i] / (s[i] + eps);
        }
    }
    if weights.lambda_sim != 0.0 {
        for i in 0..n {
            gs[i] += weights.lambda_sim * min_grad(s[i], q[i]);
        }
    }
    if weights.lambda_mse != 0.0 && !options.mse_on_raw {
        for i in 0..n {
            gs[i] += weights.lambda_mse * 2.0 * (s[i] - q[i]) / nf;
        }
    }
    if weights.lambda_osim != 0.0 {
        let (pm, gm) = metrics::segment_masses(s, q, panoptic);
        let seg_grad: Vec<f64> = panoptic
            .segments()
            .values()
            .enumerate()
            .map(|(k, info)| {
                if options.things_only && !info.is_thing {
                    0.0
                } else {
                    min_grad(pm[k], gm[k])
                }
            })
            .collect();
        for (g, label) in gs.iter_mut().zip(panoptic.dense_labels()) {
            *g += weights.lambda_osim * seg_grad[*label as usize];
        }
    }
    let projection: f64 = gs.iter().zip(s).map(|(g, s)| g * s).sum();
    let mut grad: Vec<f64> = gs.iter().map(|g| (g - projection) / mass).collect();

    if weights.lambda_cc != 0.0 {
        let cc = metrics::cc(predicted_raw, ground_truth)?;
        let mx = mass / nf;
        let mg = ground_truth.total() / nf;
        let y = ground_truth.values();
        let saa: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
        let sbb: f64 = y.iter().map(|v| (v - mg) * (v - mg)).sum();
        let norm = (saa * sbb).sqrt();
        for i in 0..n {
            let (a, b) = (x[i] - mx, y[i] - mg);
            grad[i] += weights.lambda_cc * (b / norm - cc * a / saa);
        }
    }
    if weights.lambda_nss != 0.0 {
        let nss = metrics::nss(predicted_raw, fixations).map_err(degenerate)?;
        let (mean, std) = metrics::mean_and_std(predicted_raw)?;
        let count = fixations.count() as f64;
        for (i, hit) in fixations.bits().iter().enumerate() {
            let z = (x[i] - mean) / std;
            let f = if *hit { 1.0 / count } else { 0.0 };
            grad[i] += weights.lambda_nss * (f - 1.0 / nf - z * nss / nf) / std;
        }
    }
    if weights.lambda_mse != 0.0 && options.mse_on_raw {
        let y = ground_truth.values();
        for i in 0..n {
            grad[i] += weights.lambda_mse * 2.0 * (x[i] - y[i]) / nf;
        }
    }
    Ok(grad)
}

/// The loss as a function of raw pixel values, for finite differencing.
/// Values that do not form a valid map evaluate to NaN.
pub fn loss_fn<'a>(
    width: usize,
    height: usize,
    ground_truth: &'a SaliencyMap,
    fixations: &'a BinaryFixationMap,
    panoptic: &'a PanopticMap,
    weights: LossWeights,
    options: LossOptions,
) -> impl Fn(&[f64]) -> f64 + 'a {
    move |values: &[f64]| {
        SaliencyMap::new(width, height, values.to_vec())
            .and_then(|m| {
                combined_loss_with(&m, ground_truth, fixations, panoptic, &weights, &options)
            })
            .map(|b| b.total)
            .unwrap_or(f64::NAN)
    }
}
