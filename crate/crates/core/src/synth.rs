//! Random frames and on-disk datasets for tests, self-checks and benchmarks.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::{save_fixations, save_panoptic_ids, save_pfm, save_segments_table};
use crate::map::{
    BinaryFixationMap, EvalFrame, Fixation, FixationSet, PanopticMap, SaliencyMap, SegmentInfo,
};

/// Strictly positive values normalized to unit sum.
pub fn random_unit_sum_map<R: Rng>(rng: &mut R, width: usize, height: usize) -> SaliencyMap {
    let values = (0..width * height)
        .map(|_| rng.gen_range(1e-3..1.0))
        .collect();
    SaliencyMap::new(width, height, values)
        .and_then(|m| m.normalize_unit_sum())
        .expect("positive random map")
}

/// Non-negative raw values; about a quarter of the pixels are exactly zero.
pub fn random_sparse_map<R: Rng>(rng: &mut R, width: usize, height: usize) -> SaliencyMap {
    let mut values: Vec<f64> = (0..width * height)
        .map(|_| {
            if rng.gen_bool(0.25) {
                0.0
            } else {
                rng.gen_range(0.0..5.0)
            }
        })
        .collect();
    let i = rng.gen_range(0..values.len());
    values[i] += 1.0;
    SaliencyMap::new(width, height, values).expect("valid random map")
}

/// Voronoi partition around `segments` distinct random seeds, ids
/// `1..=segments`. Every segment owns at least its seed pixel.
pub fn random_partition<R: Rng>(
    rng: &mut R,
    width: usize,
    height: usize,
    segments: usize,
) -> PanopticMap {
    let n = width * height;
    let k = segments.clamp(1, n);
    let mut pixels: Vec<usize> = (0..n).collect();
    pixels.shuffle(rng);
    let seeds: Vec<(i64, i64)> = pixels[..k]
        .iter()
        .map(|p| ((p % width) as i64, (p / width) as i64))
        .collect();
    let mut ids = Vec::with_capacity(n);
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            let nearest = seeds
                .iter()
                .enumerate()
                .min_by_key(|(_, (sx, sy))| (sx - x).pow(2) + (sy - y).pow(2))
                .map(|(i, _)| i)
                .unwrap_or(0);
            ids.push(nearest as u32 + 1);
        }
    }
    let table = (1..=k as u32)
        .map(|id| {
            (
                id,
                SegmentInfo {
                    class_name: format!("class-{id}"),
                    is_thing: rng.gen_bool(0.5),
                },
            )
        })
        .collect();
    PanopticMap::new(width, height, ids, table).expect("valid partition")
}

/// Between 1 and `max_points` fixated pixels, never every pixel.
pub fn random_fixation_map<R: Rng>(
    rng: &mut R,
    width: usize,
    height: usize,
    max_points: usize,
) -> BinaryFixationMap {
    let n = width * height;
    let count = rng.gen_range(1..=max_points.clamp(1, n.saturating_sub(1).max(1)));
    let mut bits = vec![false; n];
    for _ in 0..count {
        bits[rng.gen_range(0..n)] = true;
    }
    if n > 1 && bits.iter().all(|b| *b) {
        bits[0] = false;
    }
    BinaryFixationMap::new(width, height, bits).expect("valid fixation map")
}

pub fn random_frame<R: Rng>(
    rng: &mut R,
    frame_id: impl Into<String>,
    width: usize,
    height: usize,
    segments: usize,
) -> EvalFrame {
    let predicted = random_unit_sum_map(rng, width, height);
    let ground_truth = random_unit_sum_map(rng, width, height);
    let fixations = random_fixation_map(rng, width, height, 8);
    let panoptic = random_partition(rng, width, height, segments);
    EvalFrame::new(frame_id, predicted, ground_truth, fixations, panoptic).expect("matching shapes")
}

/// Unnormalized isotropic Gaussian centred at `(cx, cy)`.
pub fn gaussian_blob(width: usize, height: usize, cx: f64, cy: f64, sigma: f64) -> SaliencyMap {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let values = (0..height)
        .flat_map(|y| {
            (0..width).map(move |x| {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                (-(dx * dx + dy * dy) * inv).exp()
            })
        })
        .collect();
    SaliencyMap::new(width, height, values).expect("finite gaussian")
}

/// One frame of an on-disk dataset.
#[derive(Debug, Clone)]
pub struct DatasetFrame {
    pub frame_id: String,
    pub predicted: SaliencyMap,
    /// Omitted when ground truth is rendered from fixations.
    pub ground_truth: Option<SaliencyMap>,
    pub panoptic: PanopticMap,
    pub fixations: Option<Vec<Fixation>>,
}

fn create_layout(root: &Path) -> Result<()> {
    for dir in ["predicted", "ground_truth", "panoptic"] {
        let d = root.join(dir);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    Ok(())
}

fn write_frame(root: &Path, f: &DatasetFrame) -> Result<()> {
    save_pfm(
        &root.join("predicted").join(format!("{}.pfm", f.frame_id)),
        &f.predicted,
    )?;
    if let Some(gt) = &f.ground_truth {
        save_pfm(
            &root
                .join("ground_truth")
                .join(format!("{}.pfm", f.frame_id)),
            gt,
        )?;
    }
    let pan = root.join("panoptic");
    save_panoptic_ids(&pan.join(format!("{}.png", f.frame_id)), &f.panoptic)?;
    save_segments_table(
        &pan.join(format!("{}.json", f.frame_id)),
        f.panoptic.segments(),
    )
}

/// Writes frames in the default dataset layout. Fixations, when any frame
/// has them, go to `fixations.csv`.
pub fn write_dataset(root: &Path, frames: &[DatasetFrame]) -> Result<()> {
    create_layout(root)?;
    let mut sets = Vec::new();
    for f in frames {
        write_frame(root, f)?;
        if let Some(points) = &f.fixations {
            sets.push(FixationSet::new(f.frame_id.clone(), points.clone()));
        }
    }
    if !sets.is_empty() {
        save_fixations(&root.join("fixations.csv"), &sets)?;
    }
    Ok(())
}

/// Rounds through `f32`, so values survive a PFM round trip unchanged.
pub fn f32_exact(map: &SaliencyMap) -> SaliencyMap {
    let values = map.values().iter().map(|v| f64::from(*v as f32)).collect();
    SaliencyMap::new(map.width(), map.height(), values).expect("finite values")
}

fn random_dataset_frame<R: Rng>(
    rng: &mut R,
    frame_id: String,
    width: usize,
    height: usize,
    segments: usize,
    self_eval: bool,
) -> DatasetFrame {
    let gt = f32_exact(&random_unit_sum_map(rng, width, height));
    let predicted = if self_eval {
        gt.clone()
    } else {
        f32_exact(&random_sparse_map(rng, width, height))
    };
    let points = (0..rng.gen_range(1..=5))
        .map(|_| {
            Fixation::new(
                rng.gen_range(0.0..(width - 1) as f64),
                rng.gen_range(0.0..(height - 1) as f64),
            )
        })
        .collect();
    DatasetFrame {
        frame_id,
        predicted,
        ground_truth: Some(gt),
        panoptic: random_partition(rng, width, height, segments),
        fixations: Some(points),
    }
}

fn frame_ids(count: usize) -> impl Iterator<Item = String> {
    let digits = count.max(1).to_string().len();
    (0..count).map(move |i| format!("frame_{i:0digits$}"))
}

/// Random frames with `segments`-way partitions and a few fixations each.
/// With `self_eval` the prediction equals the ground truth.
pub fn random_dataset<R: Rng>(
    rng: &mut R,
    count: usize,
    width: usize,
    height: usize,
    segments: usize,
    self_eval: bool,
) -> Vec<DatasetFrame> {
    frame_ids(count)
        .map(|id| random_dataset_frame(rng, id, width, height, segments, self_eval))
        .collect()
}

/// Same frames as [`random_dataset`], written one at a time so that large
/// datasets never sit in memory.
pub fn write_random_dataset<R: Rng>(
    root: &Path,
    rng: &mut R,
    count: usize,
    width: usize,
    height: usize,
    segments: usize,
    self_eval: bool,
) -> Result<()> {
    create_layout(root)?;
    let mut sets = Vec::with_capacity(count);
    for id in frame_ids(count) {
        let f = random_dataset_frame(rng, id, width, height, segments, self_eval);
        write_frame(root, &f)?;
        sets.push(FixationSet::new(
            f.frame_id,
            f.fixations.unwrap_or_default(),
        ));
    }
    save_fixations(&root.join("fixations.csv"), &sets)
}
