//! Frame-parallel evaluation with an ordered merge.

use std::sync::atomic::{AtomicUsize, Ordering};

use objsal_core::ingest::{Dataset, FixationOrigin, RunConfig};
use objsal_core::loss::{combined_loss_with, LossOptions, LossWeights};
use objsal_core::metrics::{evaluate_frame, MetricOptions};
use objsal_core::{Error, MetricReport};
use rayon::prelude::*;

use crate::Failure;

const PROGRESS_EVERY: usize = 1000;

#[derive(Debug, Clone)]
pub struct FrameRecord {
    pub report: MetricReport,
    pub unknown_segment_pixels: usize,
    pub fixation_origin: FixationOrigin,
    /// Composite loss total, when requested and defined.
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct LossRequest {
    pub weights: LossWeights,
    pub options: LossOptions,
}

pub fn worker_count(requested: Option<u32>, config: &RunConfig) -> usize {
    requested
        .map(|j| j as usize)
        .or(config.jobs)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Loads and scores every frame. Results come back in dataset order
/// whatever the worker count; the first failing frame in that order wins.
pub fn evaluate_dataset(
    dataset: &Dataset,
    options: &MetricOptions,
    loss: Option<LossRequest>,
    jobs: usize,
    label: &str,
) -> Result<Vec<FrameRecord>, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Core(Error::Config(format!("cannot start workers: {e}"))))?;
    let total = dataset.len();
    let done = AtomicUsize::new(0);
    let results: Vec<Result<FrameRecord, Error>> = pool.install(|| {
        dataset
            .frames
            .par_iter()
            .map(|desc| {
                let loaded = dataset.load(desc)?;
                let report = evaluate_frame(&loaded.frame, options)?;
                let loss = loss.and_then(|req| {
                    let f = &loaded.frame;
                    combined_loss_with(
                        &f.predicted,
                        &f.ground_truth,
                        &f.fixations,
                        &f.panoptic,
                        &req.weights,
                        &req.options,
                    )
                    .ok()
                    .map(|b| b.total)
                });
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                if n.is_multiple_of(PROGRESS_EVERY) {
                    eprintln!("{label}: {n}/{total} frames");
                }
                Ok(FrameRecord {
                    report,
                    unknown_segment_pixels: loaded.unknown_segment_pixels,
                    fixation_origin: loaded.fixation_origin,
                    loss,
                })
            })
            .collect()
    });
    results
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::Core)
}
