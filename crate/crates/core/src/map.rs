//! Domain types shared by every module: saliency maps, panoptic
//! partitions, fixations and the per-frame bundle handed to the metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Declared scaling of a [`SaliencyMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Raw,
    UnitSum,
    UnitMax,
}

/// A width x height grid of non-negative attention intensities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    normalization: Normalization,
}

impl SaliencyMap {
    /// Builds a raw map. Every value must be finite and non-negative.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_normalization(width, height, values, Normalization::Raw)
    }

    /// Builds a map that claims `normalization`; the claim is checked.
    pub fn with_normalization(
        width: usize,
        height: usize,
        values: Vec<f64>,
        normalization: Normalization,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("empty {width}x{height} map")));
        }
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} map",
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidValue(format!(
                "pixel {i} holds {v}; saliency values must be finite and >= 0"
            )));
        }
        match normalization {
            Normalization::Raw => {}
            Normalization::UnitSum => {
                let total: f64 = values.iter().sum();
                if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    return Err(Error::InvalidValue(format!("unit-sum map totals {total}")));
                }
            }
            Normalization::UnitMax => {
                let max = values.iter().copied().fold(0.0, f64::max);
                if max == 0.0 {
                    return Err(Error::ZeroMass);
                }
                if (max - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    return Err(Error::InvalidValue(format!("unit-max map peaks at {max}")));
                }
            }
        }
        Ok(Self {
            width,
            height,
            values,
            normalization,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub(crate) fn is_constant(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|v| *v == first)
    }

    pub fn same_shape(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    /// Scales the map so its pixels total one.
    pub fn normalize_unit_sum(&self) -> Result<SaliencyMap> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        let values = self.values.iter().map(|v| v / total).collect();
        Ok(SaliencyMap {
            width: self.width,
            height: self.height,
            values,
            normalization: Normalization::UnitSum,
        })
    }

    /// Scales the map so its maximum is one.
    pub fn normalize_unit_max(&self) -> Result<SaliencyMap> {
        let max = self.max();
        if max <= 0.0 {
            return Err(Error::ZeroMass);
        }
        let values = self.values.iter().map(|v| v / max).collect();
        Ok(SaliencyMap {
            width: self.width,
            height: self.height,
            values,
            normalization: Normalization::UnitMax,
        })
    }

    /// Returns the map itself when already unit-sum, else a normalized copy.
    pub(crate) fn as_unit_sum(&self) -> Result<std::borrow::Cow<'_, SaliencyMap>> {
        if self.normalization == Normalization::UnitSum {
            Ok(std::borrow::Cow::Borrowed(self))
        } else {
            self.normalize_unit_sum().map(std::borrow::Cow::Owned)
        }
    }
}

/// Free-standing form of [`SaliencyMap::normalize_unit_sum`].
pub fn normalize_unit_sum(map: &SaliencyMap) -> Result<SaliencyMap> {
    map.normalize_unit_sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub class_name: String,
    pub is_thing: bool,
}

/// Segment id reserved for pixels the source annotation left unlabeled.
pub const BACKGROUND_SEGMENT: u32 = 0;

/// A total partition of the image into segments.
#[derive(Debug, Clone, PartialEq)]
pub struct PanopticMap {
    width: usize,
    height: usize,
    segment_ids: Vec<u32>,
    segments: BTreeMap<u32, SegmentInfo>,
    // Per-pixel position of the pixel's segment in `segments` key order.
    dense: Vec<u32>,
}

impl PanopticMap {
    pub fn new(
        width: usize,
        height: usize,
        segment_ids: Vec<u32>,
        segments: BTreeMap<u32, SegmentInfo>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("empty {width}x{height} panoptic map")));
        }
        if segment_ids.len() != width * height {
            return Err(Error::Shape(format!(
                "{} segment ids for a {width}x{height} panoptic map",
                segment_ids.len()
            )));
        }
        if segments.is_empty() {
            return Err(Error::InvalidValue("panoptic map has no segments".into()));
        }
        let rank: BTreeMap<u32, u32> = segments
            .keys()
            .enumerate()
            .map(|(i, id)| (*id, i as u32))
            .collect();
        // Segment ids are usually few and clustered; cache the last lookup.
        let mut dense = Vec::with_capacity(segment_ids.len());
        let mut last = (u32::MAX, 0u32);
        for (i, id) in segment_ids.iter().enumerate() {
            if *id != last.0 {
                let r = rank.get(id).ok_or_else(|| {
                    Error::InvalidValue(format!("pixel {i} carries unknown segment id {id}"))
                })?;
                last = (*id, *r);
            }
            dense.push(last.1);
        }
        Ok(Self {
            width,
            height,
            segment_ids,
            segments,
            dense,
        })
    }

    /// Convenience constructor that names every id in the grid `segment-<id>`.
    pub fn from_ids(width: usize, height: usize, segment_ids: Vec<u32>) -> Result<Self> {
        let segments = segment_ids
            .iter()
            .map(|id| {
                (
                    *id,
                    SegmentInfo {
                        class_name: format!("segment-{id}"),
                        is_thing: true,
                    },
                )
            })
            .collect();
        Self::new(width, height, segment_ids, segments)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn segment_ids(&self) -> &[u32] {
        &self.segment_ids
    }

    pub fn segments(&self) -> &BTreeMap<u32, SegmentInfo> {
        &self.segments
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// Per-pixel index into the segment table's key order.
    pub fn dense_labels(&self) -> &[u32] {
        &self.dense
    }

    /// Applies the same pixel permutation as [`permute_pixels`] to the id grid.
    pub fn permuted(&self, perm: &[usize]) -> Result<PanopticMap> {
        let ids = permute_pixels(&self.segment_ids, perm);
        PanopticMap::new(self.width, self.height, ids, self.segments.clone())
    }
}

/// A gaze sample in pixel coordinates (column `x`, row `y`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub x: f64,
    pub y: f64,
}

impl Fixation {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Nearest pixel, or a bounds error.
    pub fn pixel(&self, width: usize, height: usize) -> Result<(usize, usize)> {
        let err = || Error::Bounds {
            x: self.x,
            y: self.y,
            width,
            height,
        };
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(err());
        }
        let (px, py) = (self.x.round(), self.y.round());
        if px < 0.0 || py < 0.0 || px >= width as f64 || py >= height as f64 {
            return Err(err());
        }
        Ok((px as usize, py as usize))
    }
}

/// Temporally ordered fixations (oldest first) for one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixationSet {
    pub frame_id: String,
    pub points: Vec<Fixation>,
}

impl FixationSet {
    pub fn new(frame_id: impl Into<String>, points: Vec<Fixation>) -> Self {
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

    /// The most recent `window` fixations, in temporal order.
    pub fn last(&self, window: usize) -> &[Fixation] {
        let start = self.points.len().saturating_sub(window);
        &self.points[start..]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryFixationMap {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryFixationMap {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::Shape(format!(
                "{} bits for a {width}x{height} fixation map",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn same_shape(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    /// Pixels equal to the map's maximum. Used when a dataset ships ground
    /// truth maps without raw fixations.
    pub fn from_maxima(map: &SaliencyMap) -> Result<Self> {
        let max = map.max();
        if max <= 0.0 {
            return Err(Error::ZeroMass);
        }
        let bits = map.values().iter().map(|v| *v == max).collect();
        Self::new(map.width(), map.height(), bits)
    }
}

/// Marks each fixation's nearest pixel. Duplicates collapse to one bit.
pub fn rasterize_fixations(
    fixations: &FixationSet,
    width: usize,
    height: usize,
) -> Result<BinaryFixationMap> {
    let mut bits = vec![false; width * height];
    for f in &fixations.points {
        let (x, y) = f.pixel(width, height)?;
        bits[y * width + x] = true;
    }
    BinaryFixationMap::new(width, height, bits)
}

/// Everything needed to score one frame.
#[derive(Debug, Clone)]
pub struct EvalFrame {
    pub frame_id: String,
    pub predicted: SaliencyMap,
    pub ground_truth: SaliencyMap,
    pub fixations: BinaryFixationMap,
    pub panoptic: PanopticMap,
}

impl EvalFrame {
    pub fn new(
        frame_id: impl Into<String>,
        predicted: SaliencyMap,
        ground_truth: SaliencyMap,
        fixations: BinaryFixationMap,
        panoptic: PanopticMap,
    ) -> Result<Self> {
        let (w, h) = (predicted.width(), predicted.height());
        let mismatch = |what: &str, ow: usize, oh: usize| {
            Error::Shape(format!("predicted map is {w}x{h} but {what} is {ow}x{oh}"))
        };
        if !ground_truth.same_shape(w, h) {
            return Err(mismatch(
                "ground truth",
                ground_truth.width(),
                ground_truth.height(),
            ));
        }
        if !fixations.same_shape(w, h) {
            return Err(mismatch(
                "fixation map",
                fixations.width(),
                fixations.height(),
            ));
        }
        if panoptic.width() != w || panoptic.height() != h {
            return Err(mismatch(
                "panoptic map",
                panoptic.width(),
                panoptic.height(),
            ));
        }
        Ok(Self {
            frame_id: frame_id.into(),
            predicted,
            ground_truth,
            fixations,
            panoptic,
        })
    }
}

/// `out[perm[i]] = values[i]`.
pub fn permute_pixels<T: Copy + Default>(values: &[T], perm: &[usize]) -> Vec<T> {
    let mut out = vec![T::default(); values.len()];
    for (i, v) in values.iter().enumerate() {
        out[perm[i]] = *v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sum_uniform() {
        let m = SaliencyMap::new(2, 2, vec![1.0; 4]).unwrap();
        let n = m.normalize_unit_sum().unwrap();
        assert_eq!(n.values(), &[0.25; 4]);
        assert_eq!(n.normalization(), Normalization::UnitSum);
    }

    #[test]
    fn unit_sum_proportional() {
        let m = SaliencyMap::new(2, 1, vec![3.0, 1.0]).unwrap();
        assert_eq!(m.normalize_unit_sum().unwrap().values(), &[0.75, 0.25]);
    }

    #[test]
    fn unit_sum_rejects_zero_mass() {
        let m = SaliencyMap::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(m.normalize_unit_sum(), Err(Error::ZeroMass)));
        assert!(matches!(m.normalize_unit_max(), Err(Error::ZeroMass)));
    }

    #[test]
    fn constructor_validates() {
        assert!(matches!(
            SaliencyMap::new(2, 2, vec![1.0; 3]),
            Err(Error::Shape(_))
        ));
        assert!(SaliencyMap::new(1, 2, vec![1.0, -0.1]).is_err());
        assert!(SaliencyMap::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(
            SaliencyMap::with_normalization(1, 2, vec![0.5, 0.4], Normalization::UnitSum).is_err()
        );
        assert!(matches!(
            SaliencyMap::with_normalization(1, 2, vec![0.0, 0.0], Normalization::UnitMax),
            Err(Error::ZeroMass)
        ));
        assert!(
            SaliencyMap::with_normalization(1, 2, vec![0.5, 1.0], Normalization::UnitMax).is_ok()
        );
    }

    #[test]
    fn rasterize_single_point() {
        let f = FixationSet::new("f", vec![Fixation::new(0.0, 0.0)]);
        let b = rasterize_fixations(&f, 2, 2).unwrap();
        assert_eq!(b.bits(), &[true, false, false, false]);
    }

    #[test]
    fn rasterize_duplicates_collapse() {
        let f = FixationSet::new("f", vec![Fixation::new(0.0, 0.0); 2]);
        let b = rasterize_fixations(&f, 2, 2).unwrap();
        assert_eq!(b.bits(), &[true, false, false, false]);
        assert_eq!(b.count(), 1);
    }

    #[test]
    fn rasterize_out_of_bounds() {
        let f = FixationSet::new("f", vec![Fixation::new(5.0, 0.0)]);
        assert!(matches!(
            rasterize_fixations(&f, 2, 2),
            Err(Error::Bounds { .. })
        ));
    }

    #[test]
    fn rasterize_rounds_subpixel() {
        let f = FixationSet::new("f", vec![Fixation::new(0.6, 1.4), Fixation::new(-0.4, 0.0)]);
        let b = rasterize_fixations(&f, 2, 2).unwrap();
        assert_eq!(b.bits(), &[true, false, false, true]);
    }

    #[test]
    fn panoptic_rejects_unknown_ids() {
        let segs = BTreeMap::from([(
            1,
            SegmentInfo {
                class_name: "car".into(),
                is_thing: true,
            },
        )]);
        assert!(PanopticMap::new(2, 1, vec![1, 2], segs.clone()).is_err());
        assert!(PanopticMap::new(2, 1, vec![1, 1], BTreeMap::new()).is_err());
        let p = PanopticMap::new(2, 1, vec![1, 1], segs).unwrap();
        assert_eq!(p.dense_labels(), &[0, 0]);
    }

    #[test]
    fn eval_frame_checks_shapes() {
        let a = SaliencyMap::new(2, 2, vec![1.0; 4]).unwrap();
        let b = SaliencyMap::new(4, 1, vec![1.0; 4]).unwrap();
        let fix = BinaryFixationMap::new(2, 2, vec![true, false, false, false]).unwrap();
        let pan = PanopticMap::from_ids(2, 2, vec![0; 4]).unwrap();
        assert!(EvalFrame::new("f", a.clone(), a.clone(), fix.clone(), pan.clone()).is_ok());
        assert!(matches!(
            EvalFrame::new("f", a, b, fix, pan),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn fixation_window() {
        let f = FixationSet::new("f", (0..5).map(|i| Fixation::new(i as f64, 0.0)).collect());
        assert_eq!(f.last(3).len(), 3);
        assert_eq!(f.last(3)[0].x, 2.0);
        assert_eq!(f.last(10).len(), 5);
    }
}
