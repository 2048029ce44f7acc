//! Analytic parameter gradients of the context block under the scalar head
//! `sum(context_block(..))`, and their finite-difference check.

use ndarray::{Array1, Array2, Array3, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::{
    check_graph, normalized_adjacency, Activation, EncoderDims, GraphEncoderParams, ObjectGraph,
};
use crate::error::{Error, Result};
use crate::gradcheck::{fd_gradient, GradComparison};

/// Head value and its gradient, laid out like the parameters.
#[derive(Debug, Clone)]
pub struct BlockGradients {
    pub head: f64,
    pub grads: GraphEncoderParams,
    /// Smallest |pre-activation| over every ReLU site.
    pub min_abs_preactivation: f64,
}

struct ObjectCache {
    adjacency: Array2<f64>,
    p1: Array2<f64>,
    h1: Array2<f64>,
    p2: Array2<f64>,
    attr_pre: Array1<f64>,
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

fn min_abs(values: impl Iterator<Item = f64>, acc: &mut f64) {
    for v in values {
        *acc = acc.min(v.abs());
    }
}

pub fn block_gradients(
    image_features: &Array3<f64>,
    graphs: &[ObjectGraph],
    params: &GraphEncoderParams,
) -> Result<BlockGradients> {
    params.validate()?;
    let act = params.activation;
    let h = params.hidden();
    let (rows, cols, channels) = image_features.dim();
    if channels != h {
        return Err(Error::Shape(format!(
            "{channels} feature channels, encoder width {h}"
        )));
    }
    let mut kink = f64::INFINITY;

    // Forward.
    let mut caches = Vec::with_capacity(graphs.len());
    let mut mean = Array1::<f64>::zeros(h);
    for g in graphs {
        check_graph(g, params)?;
        let adjacency = normalized_adjacency(g.node_count(), g.edges())?;
        let p1 = adjacency.dot(g.node_features()).dot(&params.w1);
        let h1 = p1.mapv(|v| act.apply(v));
        let p2 = adjacency.dot(&h1).dot(&params.w2);
        let h2 = p2.mapv(|v| act.apply(v));
        let attr_pre = g.global_attributes().dot(&params.w_attr);
        min_abs(
            p1.iter().chain(p2.iter()).chain(attr_pre.iter()).copied(),
            &mut kink,
        );
        mean = mean
            + h2.mean_axis(Axis(0)).expect("non-empty graph")
            + attr_pre.mapv(|v| act.apply(v));
        caches.push(ObjectCache {
            adjacency,
            p1,
            h1,
            p2,
            attr_pre,
        });
    }
    let k = graphs.len();
    let scene = if k > 0 {
        mean /= k as f64;
        Some(mean.dot(&params.w_scene))
    } else {
        None
    };

    let m = &params.modulation;
    let z = params.token.dot(&m.w_in) + &m.b_in;
    min_abs(z.iter().copied(), &mut kink);
    let hidden = z.mapv(|v| act.apply(v));
    let out = hidden.dot(&m.w_out) + &m.b_out;
    let alpha = out.slice(ndarray::s![..h]).to_owned();
    let beta = out.slice(ndarray::s![h..]).to_owned();

    // Per-channel sums of the raw and fused features.
    let positions = (rows * cols) as f64;
    let feature_sum = image_features.sum_axis(Axis(0)).sum_axis(Axis(0));
    let fused_sum = match &scene {
        Some(s) => &feature_sum * &(s + 1.0),
        None => feature_sum.clone(),
    };
    let head = alpha.dot(&fused_sum) + beta.sum() * positions;

    // Backward.
    let mut grads = params.clone();
    let g_out = ndarray::concatenate![Axis(0), fused_sum, Array1::from_elem(h, positions)];
    grads.modulation.w_out = outer(&hidden, &g_out);
    grads.modulation.b_out = g_out.clone();
    let g_hidden = m.w_out.dot(&g_out);
    let gz = &g_hidden * &z.mapv(|v| act.derivative(v));
    grads.modulation.w_in = outer(&params.token, &gz);
    grads.modulation.b_in = gz.clone();
    grads.token = m.w_in.dot(&gz);

    grads.w1.fill(0.0);
    grads.w2.fill(0.0);
    grads.w_attr.fill(0.0);
    grads.w_scene.fill(0.0);
    if k > 0 {
        let g_scene = &alpha * &feature_sum;
        grads.w_scene = outer(&mean, &g_scene);
        let g_obj = params.w_scene.dot(&g_scene) / k as f64;
        for (g, c) in graphs.iter().zip(&caches) {
            let gq = &g_obj * &c.attr_pre.mapv(|v| act.derivative(v));
            grads.w_attr += &outer(g.global_attributes(), &gq);

            let nodes = g.node_count() as f64;
            let gh2 = Array2::from_shape_fn(c.p2.raw_dim(), |(_, j)| g_obj[j] / nodes);
            let gp2 = gh2 * c.p2.mapv(|v| act.derivative(v));
            grads.w2 += &c.adjacency.dot(&c.h1).t().dot(&gp2);
            let gh1 = c.adjacency.dot(&gp2.dot(&params.w2.t()));
            let gp1 = gh1 * c.p1.mapv(|v| act.derivative(v));
            grads.w1 += &c.adjacency.dot(g.node_features()).t().dot(&gp1);
        }
    }

    Ok(BlockGradients {
        head,
        grads,
        min_abs_preactivation: kink,
    })
}

/// Pre-activations closer to zero than this are treated as ReLU kinks.
pub const KINK_MARGIN: f64 = 1e-4;

/// Compares analytic parameter gradients with central differences.
///
/// Components below `abs_floor` in magnitude are compared absolutely.
/// Returns `None` when a ReLU pre-activation sits within [`KINK_MARGIN`]
/// of zero, where the head is not differentiable.
pub fn encoder_grad_check(
    params: &GraphEncoderParams,
    image_features: &Array3<f64>,
    graphs: &[ObjectGraph],
    step: f64,
    abs_floor: f64,
) -> Result<Option<GradComparison>> {
    let analytic = block_gradients(image_features, graphs, params)?;
    if params.activation == Activation::Relu && analytic.min_abs_preactivation < KINK_MARGIN {
        return Ok(None);
    }
    let head = |values: &[f64]| -> f64 {
        params
            .unflatten(values)
            .and_then(|p| super::context_block(image_features, graphs, &p))
            .map(|out| out.sum())
            .unwrap_or(f64::NAN)
    };
    let numeric = fd_gradient(head, &params.flatten(), step);
    Ok(Some(GradComparison::new(
        &analytic.grads.flatten(),
        &numeric,
        abs_floor,
    )))
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub comparison: GradComparison,
    /// Points discarded for sitting on a ReLU kink.
    pub resamples: usize,
}

/// Random undirected graph: a spanning path plus a few chords.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    nodes: usize,
    features: usize,
    attributes: usize,
) -> Result<ObjectGraph> {
    let unit = Uniform::new_inclusive(-1.0, 1.0);
    let x = Array2::from_shape_fn((nodes, features), |_| unit.sample(rng));
    let mut edges: Vec<(usize, usize)> = (1..nodes).map(|i| (i - 1, i)).collect();
    if nodes > 2 {
        for _ in 0..nodes / 2 {
            let a = rng.gen_range(0..nodes);
            let b = rng.gen_range(0..nodes);
            if a != b {
                edges.push((a, b));
            }
        }
    }
    let attrs = Array1::from_shape_fn(attributes, |_| unit.sample(rng));
    ObjectGraph::new(x, edges, attrs)
}

/// Draws random parameters, graphs and features until a point away from
/// every ReLU kink is found, then runs [`encoder_grad_check`] there.
pub fn encoder_grad_check_random<R: Rng>(
    rng: &mut R,
    dims: &EncoderDims,
    activation: Activation,
    max_nodes: usize,
    objects: usize,
    step: f64,
    abs_floor: f64,
) -> Result<GradCheckReport> {
    let unit = Uniform::new_inclusive(-1.0, 1.0);
    for resamples in 0..1000 {
        let params = GraphEncoderParams::random(rng, dims)?.with_activation(activation);
        let graphs = (0..objects)
            .map(|_| {
                let m = rng.gen_range(1..=max_nodes.max(1));
                random_graph(rng, m, dims.node_features, dims.attributes)
            })
            .collect::<Result<Vec<_>>>()?;
        let features = Array3::from_shape_fn((3, 4, dims.hidden), |_| unit.sample(rng));
        if let Some(comparison) = encoder_grad_check(&params, &features, &graphs, step, abs_floor)?
        {
            return Ok(GradCheckReport {
                comparison,
                resamples,
            });
        }
    }
    Err(Error::DegenerateInput(
        "no kink-free point found in 1000 draws".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims() -> EncoderDims {
        EncoderDims {
            node_features: 5,
            hidden: 6,
            attributes: 3,
            token: 3,
            mlp_hidden: 4,
        }
    }

    #[test]
    fn head_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = GraphEncoderParams::random(&mut rng, &dims()).unwrap();
        let graphs: Vec<_> = (0..3)
            .map(|i| random_graph(&mut rng, 2 + i, 5, 3).unwrap())
            .collect();
        let f = Array3::from_shape_fn((2, 3, 6), |(a, b, c)| (a + b) as f64 * 0.3 - c as f64 * 0.1);
        let g = block_gradients(&f, &graphs, &p).unwrap();
        let direct = super::super::context_block(&f, &graphs, &p).unwrap().sum();
        assert!((g.head - direct).abs() < 1e-10);
    }

    // Without ReLU the head is linear in each single parameter, so central
    // differences carry no truncation error and a wide step only shrinks
    // roundoff.
    #[test]
    fn linear_configuration_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r =
            encoder_grad_check_random(&mut rng, &dims(), Activation::Identity, 5, 3, 1e-2, 1e-8)
                .unwrap();
        assert_eq!(r.resamples, 0);
        assert!(r.comparison.passes(1e-7, 1e-8), "{:?}", r.comparison);
    }

    #[test]
    fn relu_configuration() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let r = encoder_grad_check_random(&mut rng, &dims(), Activation::Relu, 5, 3, 1e-6, 1e-8)
            .unwrap();
        assert!(r.comparison.passes(1e-5, 1e-8), "{:?}", r.comparison);
    }

    #[test]
    fn kink_point_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = GraphEncoderParams::random(&mut rng, &dims()).unwrap();
        // Zero token and bias put every modulation pre-activation at 0.
        p.token.fill(0.0);
        p.modulation.b_in.fill(0.0);
        let graphs = vec![random_graph(&mut rng, 3, 5, 3).unwrap()];
        let f = Array3::from_elem((2, 2, 6), 0.5);
        assert!(encoder_grad_check(&p, &f, &graphs, 1e-6, 1e-8)
            .unwrap()
            .is_none());
        let linear = p.with_activation(Activation::Identity);
        assert!(encoder_grad_check(&linear, &f, &graphs, 1e-6, 1e-8)
            .unwrap()
            .is_some());
    }

    #[test]
    fn empty_scene_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = GraphEncoderParams::random(&mut rng, &dims())
            .unwrap()
            .with_activation(Activation::Identity);
        let f = Array3::from_shape_fn((2, 2, 6), |(a, b, c)| (a * 2 + b + c) as f64 * 0.1);
        let c = encoder_grad_check(&p, &f, &[], 1e-2, 1e-8)
            .unwrap()
            .unwrap();
        assert!(c.passes(1e-7, 1e-8), "{c:?}");
        let g = block_gradients(&f, &[], &p).unwrap();
        assert!(g.grads.w1.iter().all(|v| *v == 0.0));
    }
}
