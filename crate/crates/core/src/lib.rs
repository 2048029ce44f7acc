//! Object-aware evaluation of visual-attention predictions.
//!
//! The crate scores predicted saliency maps against ground truth with the
//! object-based similarity metric (oSIM) and the classical saliency suite,
//! renders ground-truth maps from fixations, exposes the composite training
//! loss with analytic gradients, and carries a reference implementation of
//! the object-graph scene-context encoder.

pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod gtgen;
pub mod ingest;
pub mod loss;
pub mod map;
pub mod metrics;
pub mod oracle;
pub mod synth;

pub use error::{Error, Result};
pub use map::{
    normalize_unit_sum, rasterize_fixations, BinaryFixationMap, EvalFrame, Fixation, FixationSet,
    Normalization, PanopticMap, SaliencyMap, SegmentInfo,
};
pub use metrics::{evaluate_frame, Metric, MetricOptions, MetricReport};
