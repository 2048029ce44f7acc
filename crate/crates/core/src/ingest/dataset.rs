//! Dataset scanning. A dataset root looks like
//!
//! ```text
//! root/
//!   predicted/<frame>.pfm|png
//!   ground_truth/<frame>.pfm|png
//!   panoptic/<frame>.png          16-bit segment ids
//!   panoptic/<frame>.json         segment table
//!   objects/<frame>.json          optional object graphs
//!   fixations.csv                 optional
//! ```
//!
//! Directory and file names come from [`LayoutConfig`]. Frame ids are the
//! file stems under `predicted/`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::config::{GroundTruthSource, RunConfig};
use super::fixations::{load_fixations, FixationTable};
use super::png::{load_cityscapes_label_ids, load_panoptic, PanopticEncoding};
use super::{load_saliency, SALIENCY_EXTENSIONS};
use crate::error::{Error, Result};
use crate::gtgen::{render_ground_truth, GtGenConfig};
use crate::map::{rasterize_fixations, BinaryFixationMap, EvalFrame};

#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruthFile {
    Map(PathBuf),
    /// Rendered from the frame's fixations at load time.
    Rendered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDescriptor {
    pub frame_id: String,
    pub predicted: PathBuf,
    pub ground_truth: GroundTruthFile,
    pub panoptic_ids: PathBuf,
    /// `None` for encodings that carry a built-in label table.
    pub segments_table: Option<PathBuf>,
    pub objects: Option<PathBuf>,
}

/// How the binary fixation map of a loaded frame was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixationOrigin {
    Recorded,
    /// No fixations were recorded for the frame; the ground-truth maxima
    /// stand in.
    GroundTruthMaxima,
}

#[derive(Debug, Clone)]
pub struct LoadedFrame {
    pub frame: EvalFrame,
    pub unknown_segment_pixels: usize,
    pub fixation_origin: FixationOrigin,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub frames: Vec<FrameDescriptor>,
    /// Frames left out, by reason.
    pub skipped: BTreeMap<String, usize>,
    fixations: Arc<FixationTable>,
    encoding: PanopticEncoding,
    gtgen: Option<GtGenConfig>,
}

fn find_with_extension(dir: &Path, stem: &str) -> Option<PathBuf> {
    SALIENCY_EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{stem}.{ext}")))
        .find(|p| p.is_file())
}

/// Lists frame ids under `predicted/`, sorted bytewise.
fn predicted_frames(
    dir: &Path,
    skipped: &mut BTreeMap<String, usize>,
) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() {
            continue;
        }
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if !ext.is_some_and(|e| SALIENCY_EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            *skipped.entry("non_utf8_name".into()).or_default() += 1;
            continue;
        };
        if out.insert(stem.to_owned(), path.clone()).is_some() {
            return Err(Error::format(
                &path,
                format!("frame {stem:?} has more than one predicted map"),
            ));
        }
    }
    Ok(out)
}

pub fn scan_dataset(root: &Path, config: &RunConfig) -> Result<Dataset> {
    let meta = std::fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        ));
    }
    let layout = &config.layout;
    let fixation_path = root.join(&layout.fixations_file);
    let fixations = if fixation_path.is_file() {
        load_fixations(&fixation_path)?
    } else {
        FixationTable::default()
    };
    let gtgen = match layout.ground_truth {
        GroundTruthSource::Fixations => Some(config.gtgen.resolve()?),
        GroundTruthSource::Auto if config.gtgen.pixels_per_degree.is_some() => {
            Some(config.gtgen.resolve()?)
        }
        _ => None,
    };

    let mut skipped = BTreeMap::new();
    let predicted = predicted_frames(&root.join(&layout.predicted_dir), &mut skipped)?;
    let mut skip = |reason: &str| *skipped.entry(reason.to_owned()).or_insert(0) += 1;
    let mut frames = Vec::new();

    let gt_dir = root.join(&layout.ground_truth_dir);
    let pan_dir = root.join(&layout.panoptic_dir);
    let obj_dir = root.join(&layout.objects_dir);
    for (frame_id, predicted) in predicted {
        let has_points = fixations.get(&frame_id).is_some_and(|s| !s.is_empty());
        let map = find_with_extension(&gt_dir, &frame_id);
        let ground_truth = match (layout.ground_truth, map) {
            (GroundTruthSource::Fixations, _) | (GroundTruthSource::Auto, None)
                if gtgen.is_some() && has_points =>
            {
                GroundTruthFile::Rendered
            }
            (GroundTruthSource::Fixations, _) => {
                skip("missing_fixations");
                continue;
            }
            (_, Some(p)) => GroundTruthFile::Map(p),
            (_, None) => {
                skip("missing_ground_truth");
                continue;
            }
        };
        let panoptic_ids = pan_dir.join(format!("{frame_id}.png"));
        if !panoptic_ids.is_file() {
            skip("missing_panoptic");
            continue;
        }
        let segments_table = match layout.panoptic_encoding {
            PanopticEncoding::Ids16 => {
                let t = pan_dir.join(format!("{frame_id}.json"));
                if !t.is_file() {
                    skip("missing_segments_table");
                    continue;
                }
                Some(t)
            }
            PanopticEncoding::CityscapesLabelIds => None,
        };
        let objects = Some(obj_dir.join(format!("{frame_id}.json"))).filter(|p| p.is_file());
        frames.push(FrameDescriptor {
            frame_id,
            predicted,
            ground_truth,
            panoptic_ids,
            segments_table,
            objects,
        });
    }
    if frames.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    Ok(Dataset {
        root: root.to_path_buf(),
        frames,
        skipped,
        fixations: Arc::new(fixations),
        encoding: layout.panoptic_encoding,
        gtgen,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fixations(&self) -> &FixationTable {
        &self.fixations
    }

    /// Opens and decodes every file of one frame.
    pub fn load(&self, desc: &FrameDescriptor) -> Result<LoadedFrame> {
        let predicted = load_saliency(&desc.predicted)?;
        let (w, h) = (predicted.width(), predicted.height());
        let recorded = self.fixations.get(&desc.frame_id);
        let ground_truth = match &desc.ground_truth {
            GroundTruthFile::Map(p) => load_saliency(p)?,
            GroundTruthFile::Rendered => {
                let cfg = self.gtgen.as_ref().ok_or_else(|| {
                    Error::Config("ground truth rendering needs a gtgen config".into())
                })?;
                let set = recorded.ok_or(Error::EmptyFixations)?;
                render_ground_truth(set, cfg, w, h)?
            }
        };
        let pan = match (&desc.segments_table, self.encoding) {
            (Some(table), _) => load_panoptic(&desc.panoptic_ids, table)?,
            (None, PanopticEncoding::CityscapesLabelIds) => {
                load_cityscapes_label_ids(&desc.panoptic_ids)?
            }
            (None, PanopticEncoding::Ids16) => {
                return Err(Error::Config(format!(
                    "frame {} has no segment table",
                    desc.frame_id
                )));
            }
        };
        let (fixations, fixation_origin) = match recorded {
            Some(set) => (rasterize_fixations(set, w, h)?, FixationOrigin::Recorded),
            None => (
                BinaryFixationMap::from_maxima(&ground_truth)
                    .or_else(|_| BinaryFixationMap::new(w, h, vec![false; w * h]))?,
                FixationOrigin::GroundTruthMaxima,
            ),
        };
        let frame = EvalFrame::new(
            desc.frame_id.clone(),
            predicted,
            ground_truth,
            fixations,
            pan.map,
        )
        .map_err(|e| match e {
            Error::Shape(msg) => Error::Shape(format!("frame {}: {msg}", desc.frame_id)),
            other => other,
        })?;
        Ok(LoadedFrame {
            frame,
            unknown_segment_pixels: pan.unknown_pixels,
            fixation_origin,
        })
    }
}
