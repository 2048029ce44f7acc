//! File formats, dataset scanning and run configuration.

mod annotations;
mod config;
mod dataset;
mod fixations;
mod pfm;
mod png;

use std::path::Path;

pub use annotations::{load_annotations, load_object_graphs, ObjectAnnotation};
pub use config::{GroundTruthSource, GtGenSection, LayoutConfig, LossSection, RunConfig};
pub use dataset::{
    scan_dataset, Dataset, FixationOrigin, FrameDescriptor, GroundTruthFile, LoadedFrame,
};
pub use fixations::{load_fixations, read_fixations, save_fixations, FixationTable};
pub use pfm::{decode_pfm, encode_pfm, load_pfm, save_pfm};
pub use png::{
    cityscapes_table, load_cityscapes_label_ids, load_panoptic, load_png_saliency,
    load_segments_table, save_panoptic_ids, save_png16, save_segments_table, PanopticEncoding,
    PanopticLoad, CITYSCAPES_LABELS,
};

use crate::error::{Error, Result};
use crate::map::SaliencyMap;

/// Saliency file extensions, in lookup preference order.
pub const SALIENCY_EXTENSIONS: [&str; 2] = ["pfm", "png"];

/// Reads a PFM or grayscale PNG saliency map, chosen by file signature.
pub fn load_saliency(path: &Path) -> Result<SaliencyMap> {
    let mut head = [0u8; 8];
    let n = {
        use std::io::Read;
        let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        f.read(&mut head).map_err(|e| Error::io(path, e))?
    };
    if n >= 8 && head == *b"\x89PNG\r\n\x1a\n" {
        load_png_saliency(path)
    } else if n >= 2 && (&head[..2] == b"Pf" || &head[..2] == b"PF") {
        load_pfm(path)
    } else {
        Err(Error::format(
            path,
            "unrecognized saliency file; expected PFM or PNG",
        ))
    }
}
