//! Grayscale PNG saliency maps and panoptic id images.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::map::{PanopticMap, SaliencyMap, SegmentInfo, BACKGROUND_SEGMENT};

struct GrayImage {
    width: usize,
    height: usize,
    depth: BitDepth,
    samples: Vec<u16>,
}

fn describe(color: ColorType, depth: BitDepth) -> String {
    format!("{}-bit {color:?}", depth as u8)
}

fn read_gray(path: &Path, expected: &str, allow_8bit: bool) -> Result<GrayImage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::format(path, format!("invalid PNG: {e}")))?;
    let info = reader.info();
    let (color, depth) = (info.color_type, info.bit_depth);
    let ok_depth = depth == BitDepth::Sixteen || (allow_8bit && depth == BitDepth::Eight);
    if color != ColorType::Grayscale || !ok_depth {
        return Err(Error::format(
            path,
            format!(
                "unsupported PNG encoding {}; expected {expected}",
                describe(color, depth)
            ),
        ));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(path, "PNG too large"))?;
    let mut buf = vec![0u8; size];
    reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(path, format!("corrupt PNG data: {e}")))?;
    let samples = match depth {
        BitDepth::Sixteen => buf
            .chunks_exact(2)
            .take(width * height)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect(),
        _ => buf
            .iter()
            .take(width * height)
            .map(|v| u16::from(*v))
            .collect(),
    };
    Ok(GrayImage {
        width,
        height,
        depth,
        samples,
    })
}

fn write_gray16(path: &Path, width: usize, height: usize, samples: &[u16]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let w = BufWriter::new(file);
    let to_format =
        |e: png::EncodingError| Error::format(path, format!("PNG encoding failed: {e}"));
    let mut enc = png::Encoder::new(w, width as u32, height as u32);
    enc.set_color(ColorType::Grayscale);
    enc.set_depth(BitDepth::Sixteen);
    let mut writer = enc.write_header().map_err(to_format)?;
    let bytes: Vec<u8> = samples.iter().flat_map(|v| v.to_be_bytes()).collect();
    writer.write_image_data(&bytes).map_err(to_format)?;
    writer.finish().map_err(to_format)
}

/// 8- or 16-bit grayscale, scaled so the full-scale sample maps to 1.
pub fn load_png_saliency(path: &Path) -> Result<SaliencyMap> {
    let img = read_gray(path, "8- or 16-bit single-channel grayscale", true)?;
    let full = match img.depth {
        BitDepth::Sixteen => f64::from(u16::MAX),
        _ => 255.0,
    };
    let values = img.samples.iter().map(|v| f64::from(*v) / full).collect();
    SaliencyMap::new(img.width, img.height, values)
}

/// Quantizes a map with values in `[0, 1]` to 16 bits.
pub fn save_png16(path: &Path, map: &SaliencyMap) -> Result<()> {
    if map.max() > 1.0 {
        return Err(Error::InvalidValue(format!(
            "16-bit PNG holds values in [0, 1]; map maximum is {}",
            map.max()
        )));
    }
    let full = f64::from(u16::MAX);
    let samples: Vec<u16> = map
        .values()
        .iter()
        .map(|v| (v * full).round() as u16)
        .collect();
    write_gray16(path, map.width(), map.height(), &samples)
}

/// How panoptic id images are encoded on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PanopticEncoding {
    /// 16-bit single-channel segment ids plus a JSON segment table.
    #[default]
    Ids16,
    /// Cityscapes `labelIds` images; the built-in label table replaces the sidecar.
    CityscapesLabelIds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanopticLoad {
    pub map: PanopticMap,
    /// Pixels whose id was missing from the segment table.
    pub unknown_pixels: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentRow {
    id: u32,
    class_name: String,
    is_thing: bool,
}

pub fn load_segments_table(path: &Path) -> Result<BTreeMap<u32, SegmentInfo>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let rows: Vec<SegmentRow> = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::format(path, format!("invalid segment table: {e}")))?;
    let mut table = BTreeMap::new();
    for row in rows {
        let info = SegmentInfo {
            class_name: row.class_name,
            is_thing: row.is_thing,
        };
        if table.insert(row.id, info).is_some() {
            return Err(Error::format(
                path,
                format!("duplicate segment id {}", row.id),
            ));
        }
    }
    Ok(table)
}

pub fn save_segments_table(path: &Path, table: &BTreeMap<u32, SegmentInfo>) -> Result<()> {
    let rows: Vec<serde_json::Value> = table
        .iter()
        .map(|(id, s)| {
            serde_json::json!({"id": id, "class_name": s.class_name, "is_thing": s.is_thing})
        })
        .collect();
    let text = serde_json::to_string_pretty(&rows).expect("segment table serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn save_panoptic_ids(path: &Path, map: &PanopticMap) -> Result<()> {
    let samples = map
        .segment_ids()
        .iter()
        .map(|id| {
            u16::try_from(*id).map_err(|_| {
                Error::InvalidValue(format!("segment id {id} does not fit in 16 bits"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_gray16(path, map.width(), map.height(), &samples)
}

fn background() -> SegmentInfo {
    SegmentInfo {
        class_name: "background".into(),
        is_thing: false,
    }
}

/// Ids absent from `table` collapse into the background segment.
fn assemble(
    width: usize,
    height: usize,
    mut ids: Vec<u32>,
    mut table: BTreeMap<u32, SegmentInfo>,
) -> Result<PanopticLoad> {
    let mut unknown_pixels = 0;
    for id in ids.iter_mut() {
        if !table.contains_key(id) {
            *id = BACKGROUND_SEGMENT;
            unknown_pixels += 1;
        }
    }
    if unknown_pixels > 0 {
        table.entry(BACKGROUND_SEGMENT).or_insert_with(background);
    }
    Ok(PanopticLoad {
        map: PanopticMap::new(width, height, ids, table)?,
        unknown_pixels,
    })
}

pub fn load_panoptic(id_image: &Path, segments_table: &Path) -> Result<PanopticLoad> {
    let table = load_segments_table(segments_table)?;
    let img = read_gray(
        id_image,
        "16-bit single-channel grayscale segment ids",
        false,
    )?;
    let ids = img.samples.iter().map(|v| u32::from(*v)).collect();
    assemble(img.width, img.height, ids, table)
}

/// Cityscapes label ids 0..=33 with their instance flags.
pub const CITYSCAPES_LABELS: [(&str, bool); 34] = [
    ("unlabeled", false),
    ("ego vehicle", false),
    ("rectification border", false),
    ("out of roi", false),
    ("static", false),
    ("dynamic", false),
    ("ground", false),
    ("road", false),
    ("sidewalk", false),
    ("parking", false),
    ("rail track", false),
    ("building", false),
    ("wall", false),
    ("fence", false),
    ("guard rail", false),
    ("bridge", false),
    ("tunnel", false),
    ("pole", false),
    ("polegroup", false),
    ("traffic light", false),
    ("traffic sign", false),
    ("vegetation", false),
    ("terrain", false),
    ("sky", false),
    ("person", true),
    ("rider", true),
    ("car", true),
    ("truck", true),
    ("bus", true),
    ("caravan", true),
    ("trailer", true),
    ("train", true),
    ("motorcycle", true),
    ("bicycle", true),
];

pub fn cityscapes_table() -> BTreeMap<u32, SegmentInfo> {
    CITYSCAPES_LABELS
        .iter()
        .enumerate()
        .map(|(id, (name, thing))| {
            (
                id as u32,
                SegmentInfo {
                    class_name: (*name).into(),
                    is_thing: *thing,
                },
            )
        })
        .collect()
}

/// Reads a Cityscapes `labelIds` image (8- or 16-bit). Each class becomes
/// one segment, so instances of a class share a segment.
pub fn load_cityscapes_label_ids(path: &Path) -> Result<PanopticLoad> {
    let img = read_gray(
        path,
        "8- or 16-bit single-channel Cityscapes label ids",
        true,
    )?;
    let ids = img.samples.iter().map(|v| u32::from(*v)).collect();
    // Only classes that occur become segments.
    let mut present = std::collections::BTreeSet::new();
    for id in &img.samples {
        present.insert(u32::from(*id));
    }
    let table = cityscapes_table()
        .into_iter()
        .filter(|(id, _)| present.contains(id))
        .collect();
    assemble(img.width, img.height, ids, table)
}
