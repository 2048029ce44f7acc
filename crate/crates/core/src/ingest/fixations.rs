//! Fixation CSV: header `frame_id,x,y`, one gaze point per row.
//!
//! Rows of a frame keep file order, which is taken as temporal order. A row
//! with empty `x` and `y` registers the frame without adding a point.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::map::{Fixation, FixationSet};

const HEADER: [&str; 3] = ["frame_id", "x", "y"];

/// All fixation sets of a file, frames in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixationTable {
    frames: Vec<FixationSet>,
    index: HashMap<String, usize>,
}

impl FixationTable {
    pub fn from_sets(sets: Vec<FixationSet>) -> Self {
        let mut table = FixationTable::default();
        for set in sets {
            match table.index.get(&set.frame_id) {
                Some(i) => table.frames[*i].points.extend(set.points),
                None => {
                    table.index.insert(set.frame_id.clone(), table.frames.len());
                    table.frames.push(set);
                }
            }
        }
        table
    }

    pub fn frames(&self) -> &[FixationSet] {
        &self.frames
    }

    pub fn get(&self, frame_id: &str) -> Option<&FixationSet> {
        self.index.get(frame_id).map(|i| &self.frames[*i])
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn load_fixations(path: &Path) -> Result<FixationTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_fixations(file, path)
}

pub fn read_fixations(input: impl std::io::Read, path: &Path) -> Result<FixationTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::format(path, format!("unreadable CSV header: {e}")))?;
    if header.iter().ne(HEADER) {
        return Err(Error::format(
            path,
            format!(
                "CSV header must be `frame_id,x,y`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut sets: Vec<FixationSet> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::format(path, format!("malformed CSV: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let frame_id = &record[0];
        if frame_id.is_empty() {
            return Err(Error::format(path, format!("line {line}: empty frame_id")));
        }
        let slot = *index.entry(frame_id.to_owned()).or_insert_with(|| {
            sets.push(FixationSet::new(frame_id, Vec::new()));
            sets.len() - 1
        });
        let (xs, ys) = (&record[1], &record[2]);
        if xs.is_empty() && ys.is_empty() {
            continue;
        }
        let coord = |name: &str, s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::format(
                        path,
                        format!("line {line}: non-numeric {name} coordinate {s:?}"),
                    )
                })
        };
        let p = Fixation::new(coord("x", xs)?, coord("y", ys)?);
        sets[slot].points.push(p);
    }
    Ok(FixationTable {
        frames: sets,
        index,
    })
}

pub fn save_fixations(path: &Path, sets: &[FixationSet]) -> Result<()> {
    let io = |e: csv::Error| Error::format(path, format!("CSV write failed: {e}"));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(HEADER).map_err(io)?;
    for set in sets {
        if set.points.is_empty() {
            w.write_record([set.frame_id.as_str(), "", ""])
                .map_err(io)?;
        }
        for p in &set.points {
            w.write_record([set.frame_id.clone(), p.x.to_string(), p.y.to_string()])
                .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
