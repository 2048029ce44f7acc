//! Object-graph scene context encoder.
//!
//! Each visible object is a keypoint graph. Two graph convolutions embed
//! its nodes, mean pooling plus a projection of the object's global
//! attributes (speed, distance, direction) yield one object vector, and the
//! projected mean over objects is the scene context. The context gates
//! image features through a residual product, and a token-conditioned
//! per-channel scale/shift modulates the result.
//!
//! Matrices use the row-vector convention: `features (M x f) . W (f x h)`.

mod grad;

use ndarray::{Array1, Array2, Array3, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grad::{
    block_gradients, encoder_grad_check, encoder_grad_check_random, random_graph, BlockGradients,
    GradCheckReport, KINK_MARGIN,
};

/// Keypoint names of the 24-point vehicle skeleton, in one-hot order.
pub const CAR_KEYPOINTS: [&str; 24] = [
    "front_up_right",
    "front_up_left",
    "front_light_right",
    "front_light_left",
    "front_low_right",
    "front_low_left",
    "central_up_left",
    "front_wheel_left",
    "rear_wheel_left",
    "rear_corner_left",
    "rear_up_left",
    "rear_up_right",
    "rear_light_left",
    "rear_light_right",
    "rear_low_left",
    "rear_low_right",
    "central_up_right",
    "rear_corner_right",
    "rear_wheel_right",
    "front_wheel_right",
    "rear_plate_left",
    "rear_plate_right",
    "mirror_edge_left",
    "mirror_edge_right",
];

pub const MAX_KEYPOINTS: usize = CAR_KEYPOINTS.len();

/// Width of a node feature row built by [`node_features`]:
/// normalized x, normalized y, visibility, keypoint one-hot.
pub const NODE_FEATURE_WIDTH: usize = 3 + MAX_KEYPOINTS;

/// Number of global attributes per object: speed, distance, direction.
pub const ATTRIBUTE_WIDTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    /// Linear variant used to check gradients without kinks.
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One object's keypoint graph and global attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectGraph {
    node_features: Array2<f64>,
    edges: Vec<(usize, usize)>,
    global_attributes: Array1<f64>,
}

impl ObjectGraph {
    pub fn new(
        node_features: Array2<f64>,
        edges: Vec<(usize, usize)>,
        global_attributes: Array1<f64>,
    ) -> Result<Self> {
        let m = node_features.nrows();
        if m == 0 {
            return Err(Error::Graph("object graph has no nodes".into()));
        }
        check_edges(m, &edges)?;
        if node_features
            .iter()
            .chain(global_attributes.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Graph("non-finite node feature or attribute".into()));
        }
        Ok(Self {
            node_features,
            edges,
            global_attributes,
        })
    }

    pub fn node_features(&self) -> &Array2<f64> {
        &self.node_features
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn global_attributes(&self) -> &Array1<f64> {
        &self.global_attributes
    }

    pub fn node_count(&self) -> usize {
        self.node_features.nrows()
    }

    /// Relabels node `i` as `perm[i]`, moving features and edges together.
    pub fn permuted(&self, perm: &[usize]) -> Result<ObjectGraph> {
        let m = self.node_count();
        if perm.len() != m {
            return Err(Error::Graph(format!(
                "permutation of length {} for {m} nodes",
                perm.len()
            )));
        }
        let mut features = Array2::zeros(self.node_features.raw_dim());
        for (i, row) in self.node_features.outer_iter().enumerate() {
            features.row_mut(perm[i]).assign(&row);
        }
        let edges = self
            .edges
            .iter()
            .map(|(a, b)| (perm[*a], perm[*b]))
            .collect();
        ObjectGraph::new(features, edges, self.global_attributes.clone())
    }
}

fn check_edges(m: usize, edges: &[(usize, usize)]) -> Result<()> {
    for (a, b) in edges {
        if *a >= m || *b >= m {
            return Err(Error::Graph(format!(
                "edge ({a}, {b}) out of range for {m} nodes"
            )));
        }
        if a == b {
            return Err(Error::Graph(format!(
                "self-loop on node {a}; self-loops are added by the convolution"
            )));
        }
    }
    Ok(())
}

/// One keypoint as annotated in image space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

/// Feature rows for the visible keypoints, and the index each original
/// keypoint maps to (None when hidden).
pub fn node_features(
    keypoints: &[Keypoint],
    image_width: f64,
    image_height: f64,
) -> Result<(Array2<f64>, Vec<Option<usize>>)> {
    let mut rows = Vec::new();
    let mut index = Vec::with_capacity(keypoints.len());
    for kp in keypoints {
        let slot = CAR_KEYPOINTS
            .iter()
            .position(|n| *n == kp.name)
            .ok_or_else(|| Error::Graph(format!("unknown keypoint name {:?}", kp.name)))?;
        if !kp.visible {
            index.push(None);
            continue;
        }
        index.push(Some(rows.len()));
        let mut row = vec![0.0; NODE_FEATURE_WIDTH];
        row[0] = kp.x / image_width;
        row[1] = kp.y / image_height;
        row[2] = 1.0;
        row[3 + slot] = 1.0;
        rows.push(row);
    }
    let m = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let features = Array2::from_shape_vec((m, NODE_FEATURE_WIDTH), flat)
        .map_err(|e| Error::Graph(e.to_string()))?;
    Ok((features, index))
}

/// Standardization of the physical attributes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributeNorm {
    pub speed_mean: f64,
    pub speed_std: f64,
    pub distance_mean: f64,
    pub distance_std: f64,
}

impl Default for AttributeNorm {
    fn default() -> Self {
        Self {
            speed_mean: 0.0,
            speed_std: 1.0,
            distance_mean: 0.0,
            distance_std: 1.0,
        }
    }
}

impl AttributeNorm {
    /// `[speed_z, distance_z, direction]`; direction must be +1 (toward the
    /// viewer) or -1 (away).
    pub fn encode(&self, speed: f64, distance: f64, direction: f64) -> Result<Array1<f64>> {
        if direction != 1.0 && direction != -1.0 {
            return Err(Error::Graph(format!(
                "direction must be +1 or -1, got {direction}"
            )));
        }
        if !(self.speed_std > 0.0 && self.distance_std > 0.0) {
            return Err(Error::Config(
                "attribute standard deviations must be positive".into(),
            ));
        }
        Ok(Array1::from(vec![
            (speed - self.speed_mean) / self.speed_std,
            (distance - self.distance_mean) / self.distance_std,
            direction,
        ]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderDims {
    pub node_features: usize,
    pub hidden: usize,
    pub attributes: usize,
    pub token: usize,
    pub mlp_hidden: usize,
}

impl Default for EncoderDims {
    fn default() -> Self {
        Self {
            node_features: NODE_FEATURE_WIDTH,
            hidden: 64,
            attributes: ATTRIBUTE_WIDTH,
            token: 8,
            mlp_hidden: 64,
        }
    }
}

/// Two affine layers mapping the condition token to per-channel (alpha, beta).
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationMlp {
    pub w_in: Array2<f64>,
    pub b_in: Array1<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEncoderParams {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub w_attr: Array2<f64>,
    pub w_scene: Array2<f64>,
    pub modulation: ModulationMlp,
    pub token: Array1<f64>,
    pub activation: Activation,
}

fn kaiming_uniform<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    Array2::from_shape_fn((fan_in, fan_out), |_| dist.sample(rng))
}

fn uniform_vec<R: Rng>(rng: &mut R, len: usize, bound: f64) -> Array1<f64> {
    let dist = Uniform::new_inclusive(-bound, bound);
    Array1::from_shape_fn(len, |_| dist.sample(rng))
}

impl GraphEncoderParams {
    /// Kaiming-uniform hidden layers; the final modulation layer starts at
    /// alpha = 1, beta = 0 so the block is the identity on features.
    pub fn init<R: Rng>(rng: &mut R, dims: &EncoderDims) -> Result<Self> {
        let mut p = Self::random(rng, dims)?;
        p.modulation.w_out.fill(0.0);
        let h = dims.hidden;
        p.modulation.b_out = Array1::from_shape_fn(2 * h, |i| if i < h { 1.0 } else { 0.0 });
        Ok(p)
    }

    /// Every parameter random, final layer included.
    pub fn random<R: Rng>(rng: &mut R, dims: &EncoderDims) -> Result<Self> {
        if [
            dims.node_features,
            dims.hidden,
            dims.attributes,
            dims.token,
            dims.mlp_hidden,
        ]
        .contains(&0)
        {
            return Err(Error::Config(format!(
                "encoder dimensions must be positive: {dims:?}"
            )));
        }
        let h = dims.hidden;
        Ok(Self {
            w1: kaiming_uniform(rng, dims.node_features, h),
            w2: kaiming_uniform(rng, h, h),
            w_attr: kaiming_uniform(rng, dims.attributes, h),
            w_scene: kaiming_uniform(rng, h, h),
            modulation: ModulationMlp {
                w_in: kaiming_uniform(rng, dims.token, dims.mlp_hidden),
                b_in: uniform_vec(rng, dims.mlp_hidden, 1.0 / (dims.token as f64).sqrt()),
                w_out: kaiming_uniform(rng, dims.mlp_hidden, 2 * h),
                b_out: uniform_vec(rng, 2 * h, 1.0 / (dims.mlp_hidden as f64).sqrt()),
            },
            token: uniform_vec(rng, dims.token, 1.0),
            activation: Activation::Relu,
        })
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    pub fn dims(&self) -> EncoderDims {
        EncoderDims {
            node_features: self.w1.nrows(),
            hidden: self.w1.ncols(),
            attributes: self.w_attr.nrows(),
            token: self.token.len(),
            mlp_hidden: self.modulation.w_in.ncols(),
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden();
        let m = &self.modulation;
        let ok = h > 0
            && self.w2.dim() == (h, h)
            && self.w_attr.ncols() == h
            && self.w_scene.dim() == (h, h)
            && m.w_in.nrows() == self.token.len()
            && m.b_in.len() == m.w_in.ncols()
            && m.w_out.nrows() == m.w_in.ncols()
            && m.w_out.ncols() == 2 * h
            && m.b_out.len() == 2 * h;
        if !ok {
            return Err(Error::Shape("inconsistent encoder parameter shapes".into()));
        }
        if self.flatten().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("non-finite encoder parameter".into()));
        }
        Ok(())
    }

    /// All parameters in a fixed order: w1, w2, w_attr, w_scene, w_in,
    /// b_in, w_out, b_out, token.
    pub fn flatten(&self) -> Vec<f64> {
        let m = &self.modulation;
        self.w1
            .iter()
            .chain(self.w2.iter())
            .chain(self.w_attr.iter())
            .chain(self.w_scene.iter())
            .chain(m.w_in.iter())
            .chain(m.b_in.iter())
            .chain(m.w_out.iter())
            .chain(m.b_out.iter())
            .chain(self.token.iter())
            .copied()
            .collect()
    }

    /// Inverse of [`flatten`](Self::flatten) onto this parameter layout.
    pub fn unflatten(&self, values: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        let mut it = values.iter().copied();
        {
            let m = &mut out.modulation;
            for slot in out
                .w1
                .iter_mut()
                .chain(out.w2.iter_mut())
                .chain(out.w_attr.iter_mut())
                .chain(out.w_scene.iter_mut())
                .chain(m.w_in.iter_mut())
                .chain(m.b_in.iter_mut())
                .chain(m.w_out.iter_mut())
                .chain(m.b_out.iter_mut())
                .chain(out.token.iter_mut())
            {
                *slot = it
                    .next()
                    .ok_or_else(|| Error::Shape("too few parameter values".into()))?;
            }
        }
        if it.next().is_some() {
            return Err(Error::Shape("too many parameter values".into()));
        }
        Ok(out)
    }
}

/// `D^-1/2 (A + I) D^-1/2` for the undirected edge list.
pub fn normalized_adjacency(node_count: usize, edges: &[(usize, usize)]) -> Result<Array2<f64>> {
    check_edges(node_count, edges)?;
    let mut a = Array2::<f64>::eye(node_count);
    for (i, j) in edges {
        a[[*i, *j]] = 1.0;
        a[[*j, *i]] = 1.0;
    }
    let degree: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
    for ((i, j), v) in a.indexed_iter_mut() {
        if *v != 0.0 {
            *v /= (degree[i] * degree[j]).sqrt();
        }
    }
    Ok(a)
}

/// Graph convolution with self-loops and symmetric normalization, then ReLU.
pub fn gcn_layer(
    features: &Array2<f64>,
    edges: &[(usize, usize)],
    weight: &Array2<f64>,
) -> Result<Array2<f64>> {
    gcn_layer_with(features, edges, weight, Activation::Relu)
}

pub fn gcn_layer_with(
    features: &Array2<f64>,
    edges: &[(usize, usize)],
    weight: &Array2<f64>,
    activation: Activation,
) -> Result<Array2<f64>> {
    if features.ncols() != weight.nrows() {
        return Err(Error::Shape(format!(
            "{} feature columns against a {}x{} weight",
            features.ncols(),
            weight.nrows(),
            weight.ncols()
        )));
    }
    let a = normalized_adjacency(features.nrows(), edges)?;
    Ok(a.dot(features).dot(weight).mapv(|v| activation.apply(v)))
}

pub(crate) fn check_graph(graph: &ObjectGraph, params: &GraphEncoderParams) -> Result<()> {
    if graph.node_features.ncols() != params.w1.nrows() {
        return Err(Error::Shape(format!(
            "graph has {} node features, encoder expects {}",
            graph.node_features.ncols(),
            params.w1.nrows()
        )));
    }
    if graph.global_attributes.len() != params.w_attr.nrows() {
        return Err(Error::Shape(format!(
            "graph has {} attributes, encoder expects {}",
            graph.global_attributes.len(),
            params.w_attr.nrows()
        )));
    }
    Ok(())
}

/// Mean-pooled second convolution plus the activated attribute projection.
pub fn embed_object(graph: &ObjectGraph, params: &GraphEncoderParams) -> Result<Array1<f64>> {
    check_graph(graph, params)?;
    let act = params.activation;
    let h1 = gcn_layer_with(&graph.node_features, &graph.edges, &params.w1, act)?;
    let h2 = gcn_layer_with(&h1, &graph.edges, &params.w2, act)?;
    let pooled = h2
        .mean_axis(Axis(0))
        .ok_or_else(|| Error::Graph("object graph has no nodes".into()))?;
    let attr = graph
        .global_attributes
        .dot(&params.w_attr)
        .mapv(|v| act.apply(v));
    Ok(pooled + attr)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneContext {
    pub vector: Array1<f64>,
    pub object_count: usize,
}

/// Projected mean of the object embeddings. No objects gives an empty
/// context that [`fuse_with_features`] passes through untouched.
pub fn aggregate_scene(
    objects: &[Array1<f64>],
    params: &GraphEncoderParams,
) -> Result<SceneContext> {
    let h = params.hidden();
    if objects.is_empty() {
        return Ok(SceneContext {
            vector: Array1::zeros(h),
            object_count: 0,
        });
    }
    let mut mean = Array1::<f64>::zeros(h);
    for o in objects {
        if o.len() != h {
            return Err(Error::Shape(format!(
                "object embedding of width {}, expected {h}",
                o.len()
            )));
        }
        mean += o;
    }
    mean /= objects.len() as f64;
    Ok(SceneContext {
        vector: mean.dot(&params.w_scene),
        object_count: objects.len(),
    })
}

/// `out = features * scene + features`, broadcasting the scene vector over
/// every spatial position.
pub fn fuse_with_features(
    image_features: &Array3<f64>,
    scene: &SceneContext,
) -> Result<Array3<f64>> {
    if scene.object_count == 0 {
        return Ok(image_features.clone());
    }
    let c = image_features.dim().2;
    if scene.vector.len() != c {
        return Err(Error::Shape(format!(
            "scene vector of width {} against {c} feature channels",
            scene.vector.len()
        )));
    }
    let mut out = image_features.clone();
    for mut px in out.lanes_mut(Axis(2)) {
        for (v, s) in px.iter_mut().zip(scene.vector.iter()) {
            *v = *v * s + *v;
        }
    }
    Ok(out)
}

/// Per-channel (alpha, beta) regressed from the token.
pub fn modulation_coefficients(
    token: &Array1<f64>,
    params: &GraphEncoderParams,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let m = &params.modulation;
    if token.len() != m.w_in.nrows() {
        return Err(Error::Shape(format!(
            "token of width {}, modulation expects {}",
            token.len(),
            m.w_in.nrows()
        )));
    }
    let hidden = (token.dot(&m.w_in) + &m.b_in).mapv(|v| params.activation.apply(v));
    let out = hidden.dot(&m.w_out) + &m.b_out;
    let h = out.len() / 2;
    Ok((
        out.slice(ndarray::s![..h]).to_owned(),
        out.slice(ndarray::s![h..]).to_owned(),
    ))
}

/// `alpha (.) features + beta` per channel.
pub fn condition_modulate(
    features: &Array3<f64>,
    token: &Array1<f64>,
    params: &GraphEncoderParams,
) -> Result<Array3<f64>> {
    let (alpha, beta) = modulation_coefficients(token, params)?;
    let c = features.dim().2;
    if alpha.len() != c {
        return Err(Error::Shape(format!(
            "modulation yields {} channels, features have {c}",
            alpha.len()
        )));
    }
    let mut out = features.clone();
    for mut px in out.lanes_mut(Axis(2)) {
        for ((v, a), b) in px.iter_mut().zip(alpha.iter()).zip(beta.iter()) {
            *v = a * *v + b;
        }
    }
    Ok(out)
}

/// Embeds every object, aggregates the scene, fuses it into the features
/// and applies the token-conditioned modulation.
pub fn context_block(
    image_features: &Array3<f64>,
    graphs: &[ObjectGraph],
    params: &GraphEncoderParams,
) -> Result<Array3<f64>> {
    let objects = graphs
        .iter()
        .map(|g| embed_object(g, params))
        .collect::<Result<Vec<_>>>()?;
    let scene = aggregate_scene(&objects, params)?;
    let fused = fuse_with_features(image_features, &scene)?;
    condition_modulate(&fused, &params.token, params)
}
