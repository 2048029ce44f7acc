//! Per-frame object-graph annotations: a JSON array of vehicles, each with a
//! keypoint skeleton and its physical attributes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{node_features, AttributeNorm, Keypoint, ObjectGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectAnnotation {
    pub keypoints: Vec<Keypoint>,
    /// Pairs of indices into `keypoints`.
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    pub speed: f64,
    pub distance: f64,
    /// +1 toward the viewer, -1 away.
    pub direction: f64,
}

impl ObjectAnnotation {
    /// Builds the graph over visible keypoints. Edges touching a hidden
    /// keypoint are dropped. `None` when nothing is visible.
    pub fn to_graph(
        &self,
        image_width: usize,
        image_height: usize,
        norm: &AttributeNorm,
    ) -> Result<Option<ObjectGraph>> {
        let (features, index) =
            node_features(&self.keypoints, image_width as f64, image_height as f64)?;
        if features.nrows() == 0 {
            return Ok(None);
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for [a, b] in &self.edges {
            let lookup = |i: usize| {
                index.get(i).copied().ok_or_else(|| {
                    Error::Graph(format!(
                        "edge endpoint {i} out of range for {} keypoints",
                        self.keypoints.len()
                    ))
                })
            };
            if let (Some(a), Some(b)) = (lookup(*a)?, lookup(*b)?) {
                edges.push((a, b));
            }
        }
        let attrs = norm.encode(self.speed, self.distance, self.direction)?;
        ObjectGraph::new(features, edges, attrs).map(Some)
    }
}

pub fn load_annotations(path: &Path) -> Result<Vec<ObjectAnnotation>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::format(path, format!("invalid object annotation: {e}")))
}

/// Graphs for every object with at least one visible keypoint.
pub fn load_object_graphs(
    path: &Path,
    image_width: usize,
    image_height: usize,
    norm: &AttributeNorm,
) -> Result<Vec<ObjectGraph>> {
    let mut graphs = Vec::new();
    for (i, obj) in load_annotations(path)?.iter().enumerate() {
        let g = obj
            .to_graph(image_width, image_height, norm)
            .map_err(|e| Error::format(path, format!("object {i}: {e}")))?;
        graphs.extend(g);
    }
    Ok(graphs)
}
