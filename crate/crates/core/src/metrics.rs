//! Metric kernels: object-based similarity (oSIM) and the classical
//! saliency suite (SIM, CC, KLD, NSS, AUC-Judd).
//!
//! Distribution metrics accept raw maps and normalize them to unit sum
//! first. CC and NSS are affine invariant and work on the values as given.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{BinaryFixationMap, EvalFrame, PanopticMap, SaliencyMap};

pub const DEFAULT_KLD_EPSILON: f64 = 1e-7;

/// The six reported metrics, in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cc,
    Kld,
    Auc,
    Sim,
    Nss,
    Osim,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Cc,
        Metric::Kld,
        Metric::Auc,
        Metric::Sim,
        Metric::Nss,
        Metric::Osim,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Metric::Cc => "cc",
            Metric::Kld => "kld",
            Metric::Auc => "auc",
            Metric::Sim => "sim",
            Metric::Nss => "nss",
            Metric::Osim => "osim",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Cc => "CC",
            Metric::Kld => "KLD",
            Metric::Auc => "AUC",
            Metric::Sim => "SIM",
            Metric::Nss => "NSS",
            Metric::Osim => "oSIM",
        }
    }

    /// True when larger values are better.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Kld)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub kld_epsilon: f64,
    /// Restrict oSIM to segments flagged as things.
    pub things_only: bool,
    /// Keep the per-segment oSIM breakdown in each report.
    pub per_segment: bool,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            kld_epsilon: DEFAULT_KLD_EPSILON,
            things_only: false,
            per_segment: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentMass {
    pub pred_mass: f64,
    pub gt_mass: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OsimResult {
    pub value: f64,
    pub per_segment: BTreeMap<u32, SegmentMass>,
}

fn check_shape(a: &SaliencyMap, b: &SaliencyMap) -> Result<()> {
    if a.same_shape(b.width(), b.height()) {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )))
    }
}

fn check_panoptic(map: &SaliencyMap, panoptic: &PanopticMap) -> Result<()> {
    if map.same_shape(panoptic.width(), panoptic.height()) {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "map is {}x{} but panoptic map is {}x{}",
            map.width(),
            map.height(),
            panoptic.width(),
            panoptic.height()
        )))
    }
}

fn check_fixations(map: &SaliencyMap, fixations: &BinaryFixationMap) -> Result<()> {
    if fixations.same_shape(map.width(), map.height()) {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "map is {}x{} but fixation map is {}x{}",
            map.width(),
            map.height(),
            fixations.width(),
            fixations.height()
        )))
    }
}

/// Per-segment predicted and ground-truth mass of two unit-sum value grids.
pub(crate) fn segment_masses(
    predicted: &[f64],
    ground_truth: &[f64],
    panoptic: &PanopticMap,
) -> (Vec<f64>, Vec<f64>) {
    let n = panoptic.segment_count();
    let mut pred = vec![0.0; n];
    let mut gt = vec![0.0; n];
    for ((label, p), g) in panoptic
        .dense_labels()
        .iter()
        .zip(predicted)
        .zip(ground_truth)
    {
        pred[*label as usize] += p;
        gt[*label as usize] += g;
    }
    (pred, gt)
}

/// Object-based similarity: the sum over segments of the smaller of the
/// predicted and ground-truth attention mass inside the segment.
///
/// Both maps are brought to unit sum first, so the value lies in [0, 1].
pub fn osim(
    predicted: &SaliencyMap,
    ground_truth: &SaliencyMap,
    panoptic: &PanopticMap,
) -> Result<OsimResult> {
    osim_with(predicted, ground_truth, panoptic, false)
}

/// [`osim`], optionally summing only over segments flagged `is_thing`.
pub fn osim_with(
    predicted: &SaliencyMap,
    ground_truth: &SaliencyMap,
    panoptic: &PanopticMap,
    things_only: bool,
) -> Result<OsimResult> {
    check_shape(predicted, ground_truth)?;
    check_panoptic(predicted, panoptic)?;
    let p = predicted.as_unit_sum()?;
    let g = ground_truth.as_unit_sum()?;
    let (pred_mass, gt_mass) = segment_masses(p.values(), g.values(), panoptic);

    let mut value = 0.0;
    let mut per_segment = BTreeMap::new();
    for (k, (id, info)) in panoptic.segments().iter().enumerate() {
        if things_only && !info.is_thing {
            continue;
        }
        let contribution = pred_mass[k].min(gt_mass[k]);
        value += contribution;
        per_segment.insert(
            *id,
            SegmentMass {
                pred_mass: pred_mass[k],
                gt_mass: gt_mass[k],
                contribution,
            },
        );
    }
    Ok(OsimResult { value, per_segment })
}

/// Histogram intersection of the two unit-sum maps.
pub fn sim(predicted: &SaliencyMap, ground_truth: &SaliencyMap) -> Result<f64> {
    check_shape(predicted, ground_truth)?;
    let p = predicted.as_unit_sum()?;
    let g = ground_truth.as_unit_sum()?;
    Ok(p.values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| a.min(*b))
        .sum())
}

/// Pearson correlation over all pixels.
pub fn cc(predicted: &SaliencyMap, ground_truth: &SaliencyMap) -> Result<f64> {
    check_shape(predicted, ground_truth)?;
    if predicted.is_constant() {
        return Err(Error::DegenerateInput(
            "predicted map has zero variance".into(),
        ));
    }
    if ground_truth.is_constant() {
        return Err(Error::DegenerateInput(
            "ground truth map has zero variance".into(),
        ));
    }
    let n = predicted.len() as f64;
    let mp = predicted.total() / n;
    let mg = ground_truth.total() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in predicted.values().iter().zip(ground_truth.values()) {
        let (da, db) = (a - mp, b - mg);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// KL divergence of the predicted distribution from the ground truth,
/// `sum gt * ln((gt + eps) / (pred + eps))` over unit-sum maps.
pub fn kld(predicted: &SaliencyMap, ground_truth: &SaliencyMap, epsilon: f64) -> Result<f64> {
    check_shape(predicted, ground_truth)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!(
            "kld epsilon must be > 0, got {epsilon}"
        )));
    }
    let p = predicted.as_unit_sum()?;
    let g = ground_truth.as_unit_sum()?;
    Ok(p.values()
        .iter()
        .zip(g.values())
        .filter(|(_, g)| **g > 0.0)
        .map(|(p, g)| g * ((g + epsilon) / (p + epsilon)).ln())
        .sum())
}

/// Mean z-scored prediction over fixated pixels (population std).
pub fn nss(predicted: &SaliencyMap, fixations: &BinaryFixationMap) -> Result<f64> {
    check_fixations(predicted, fixations)?;
    let (mean, std) = mean_and_std(predicted)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (v, hit) in predicted.values().iter().zip(fixations.bits()) {
        if *hit {
            sum += v;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyFixations);
    }
    Ok((sum / count as f64 - mean) / std)
}

pub(crate) fn mean_and_std(map: &SaliencyMap) -> Result<(f64, f64)> {
    if map.is_constant() {
        return Err(Error::DegenerateInput("map has zero variance".into()));
    }
    let n = map.len() as f64;
    let mean = map.total() / n;
    let var = map
        .values()
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    Ok((mean, var.sqrt()))
}

/// ROC area with fixated pixels as positives, thresholding at each distinct
/// fixated value and integrating with the trapezoid rule (Judd variant).
pub fn auc_judd(predicted: &SaliencyMap, fixations: &BinaryFixationMap) -> Result<f64> {
    check_fixations(predicted, fixations)?;
    let mut thresholds: Vec<f64> = predicted
        .values()
        .iter()
        .zip(fixations.bits())
        .filter(|(_, hit)| **hit)
        .map(|(v, _)| *v)
        .collect();
    let n_pos = thresholds.len();
    if n_pos == 0 {
        return Err(Error::EmptyFixations);
    }
    let n_neg = predicted.len() - n_pos;
    if n_neg == 0 {
        return Err(Error::DegenerateInput("every pixel is fixated".into()));
    }
    // Descending distinct thresholds.
    thresholds.sort_unstable_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    // Bucket every pixel at the first (largest) threshold it clears; the
    // prefix sums then count pixels at or above each threshold.
    let mut pos = vec![0usize; thresholds.len()];
    let mut neg = vec![0usize; thresholds.len()];
    for (v, hit) in predicted.values().iter().zip(fixations.bits()) {
        let k = thresholds.partition_point(|t| t > v);
        if k < thresholds.len() {
            if *hit {
                pos[k] += 1;
            } else {
                neg[k] += 1;
            }
        }
    }

    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_tpr, mut prev_fpr) = (0.0, 0.0);
    let mut area = 0.0;
    for k in 0..thresholds.len() {
        tp += pos[k];
        fp += neg[k];
        let tpr = tp as f64 / n_pos as f64;
        let fpr = fp as f64 / n_neg as f64;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    area += (1.0 - prev_fpr) * (1.0 + prev_tpr) / 2.0;
    Ok(area)
}

/// Mean squared pixel difference of two maps of equal shape.
pub fn mse(predicted: &SaliencyMap, ground_truth: &SaliencyMap) -> Result<f64> {
    check_shape(predicted, ground_truth)?;
    Ok(predicted
        .values()
        .iter()
        .zip(ground_truth.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / predicted.len() as f64)
}

/// Per-frame scores. A metric that cannot be computed on the frame is
/// `None`, with the cause in `undefined`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub frame_id: String,
    pub cc: Option<f64>,
    pub kld: Option<f64>,
    pub auc: Option<f64>,
    pub sim: Option<f64>,
    pub nss: Option<f64>,
    pub osim: Option<f64>,
    pub undefined: BTreeMap<Metric, &'static str>,
    pub per_segment: Option<BTreeMap<u32, SegmentMass>>,
}

impl MetricReport {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Cc => self.cc,
            Metric::Kld => self.kld,
            Metric::Auc => self.auc,
            Metric::Sim => self.sim,
            Metric::Nss => self.nss,
            Metric::Osim => self.osim,
        }
    }

    fn slot(&mut self, metric: Metric) -> &mut Option<f64> {
        match metric {
            Metric::Cc => &mut self.cc,
            Metric::Kld => &mut self.kld,
            Metric::Auc => &mut self.auc,
            Metric::Sim => &mut self.sim,
            Metric::Nss => &mut self.nss,
            Metric::Osim => &mut self.osim,
        }
    }

    fn record(&mut self, metric: Metric, result: Result<f64>) -> Result<()> {
        match result {
            Ok(v) => *self.slot(metric) = Some(v),
            Err(Error::Shape(msg)) => return Err(Error::Shape(msg)),
            Err(e) => {
                *self.slot(metric) = None;
                self.undefined.insert(metric, undefined_reason(&e));
            }
        }
        Ok(())
    }

    fn mark_undefined(&mut self, metric: Metric, reason: &'static str) {
        *self.slot(metric) = None;
        self.undefined.insert(metric, reason);
    }
}

/// Stable reason code recorded for a metric that could not be computed.
pub fn undefined_reason(err: &Error) -> &'static str {
    match err {
        Error::ZeroMass => "zero_mass",
        Error::DegenerateInput(msg) if msg.contains("fixated") => "all_pixels_fixated",
        Error::DegenerateInput(_) => "zero_variance",
        Error::EmptyFixations => "empty_fixations",
        _ => "invalid_input",
    }
}

/// Computes all six metrics for one frame. Degenerate inputs mark the
/// affected metrics undefined instead of failing the frame.
pub fn evaluate_frame(frame: &EvalFrame, options: &MetricOptions) -> Result<MetricReport> {
    let mut report = MetricReport {
        frame_id: frame.frame_id.clone(),
        ..Default::default()
    };
    let pred = &frame.predicted;
    let gt = &frame.ground_truth;

    if pred.is_all_zero() {
        for m in Metric::ALL {
            report.mark_undefined(m, "zero_mass_prediction");
        }
        return Ok(report);
    }

    let pred_n = pred.as_unit_sum()?;
    let gt_n = match gt.as_unit_sum() {
        Ok(g) => Some(g),
        Err(Error::ZeroMass) => None,
        Err(e) => return Err(e),
    };

    match &gt_n {
        Some(g) => {
            report.record(Metric::Sim, sim(&pred_n, g))?;
            report.record(Metric::Kld, kld(&pred_n, g, options.kld_epsilon))?;
            match osim_with(&pred_n, g, &frame.panoptic, options.things_only) {
                Ok(r) => {
                    report.osim = Some(r.value);
                    if options.per_segment {
                        report.per_segment = Some(r.per_segment);
                    }
                }
                Err(e) => report.record(Metric::Osim, Err(e))?,
            }
        }
        None => {
            for m in [Metric::Sim, Metric::Kld, Metric::Osim] {
                report.mark_undefined(m, "zero_mass_ground_truth");
            }
        }
    }
    report.record(Metric::Cc, cc(pred, gt))?;
    report.record(Metric::Nss, nss(pred, &frame.fixations))?;
    report.record(Metric::Auc, auc_judd(pred, &frame.fixations))?;
    Ok(report)
}
