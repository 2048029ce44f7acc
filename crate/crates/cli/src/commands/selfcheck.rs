//! Oracle, invariant and gradient checks on seeded random instances.

use ndarray::Array3;
use objsal_core::gradcheck::{fd_gradient, GradComparison};
use objsal_core::graph::{
    context_block, encoder_grad_check_random, random_graph, Activation, EncoderDims,
    GraphEncoderParams, KINK_MARGIN,
};
use objsal_core::gtgen::{render_ground_truth, GtGenConfig};
use objsal_core::loss::{combined_loss, grad_combined_loss, loss_fn, LossOptions, LossWeights};
use objsal_core::metrics::{self, DEFAULT_KLD_EPSILON};
use objsal_core::synth::{random_fixation_map, random_partition, random_sparse_map};
use objsal_core::{oracle, Fixation, FixationSet, PanopticMap, SaliencyMap};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Failure, SelfcheckArgs};

const ORACLE_TOL: f64 = 1e-9;

/// Central-difference step. At 1e-6 roundoff in the scalar heads reaches a
/// few 1e-9, enough to trip a 1e-5 relative bound on small components;
/// 1e-5 keeps both roundoff and truncation well below it.
const FD_STEP: f64 = 1e-5;
/// Gradient components below this magnitude are compared absolutely.
const FD_FLOOR: f64 = 1e-3;

type Check = fn(&mut ChaCha8Rng, bool) -> Result<(), String>;

const CHECKS: [(&str, Check); 9] = [
    (
        "metrics match reference implementations",
        oracle_equivalence,
    ),
    ("AUC under heavy ties", auc_ties),
    ("oSIM dominance", osim_dominance),
    ("oSIM refinement", osim_refinement),
    ("loss is the weighted sum of metrics", loss_composition),
    ("loss gradient vs finite differences", loss_gradient),
    ("encoder gradients vs finite differences", encoder_gradients),
    ("encoder permutation invariance", permutation_invariance),
    ("ground truth uses the last fixations only", gtgen_window),
];

pub fn run(args: &SelfcheckArgs) -> Result<(), Failure> {
    let mut failed = Vec::new();
    for (i, (name, check)) in CHECKS.iter().enumerate() {
        let seed = args.seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // The fault lands in the first check only.
        match check(&mut rng, args.inject_fault && i == 0) {
            Ok(()) => println!("PASS {name} (seed {seed})"),
            Err(why) => {
                println!("FAIL {name} (seed {seed}): {why}");
                failed.push(format!("{name} (seed {seed})"));
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "self-check failed: {}",
            failed.join(", ")
        )))
    }
}

fn ensure(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

fn err(e: objsal_core::Error) -> String {
    e.to_string()
}

fn positive_map(rng: &mut ChaCha8Rng, w: usize, h: usize) -> SaliencyMap {
    let v = (0..w * h).map(|_| rng.gen_range(0.05..1.0)).collect();
    SaliencyMap::new(w, h, v).expect("positive values form a map")
}

fn oracle_equivalence(rng: &mut ChaCha8Rng, fault: bool) -> Result<(), String> {
    for case in 0..200 {
        let pred = random_sparse_map(rng, 8, 8);
        let gt = random_sparse_map(rng, 8, 8);
        let fix = random_fixation_map(rng, 8, 8, 12);
        let k = rng.gen_range(1..=8);
        let pan = random_partition(rng, 8, 8, k);
        let pn = pred.normalize_unit_sum().map_err(err)?;
        let gn = gt.normalize_unit_sum().map_err(err)?;
        let (p, g) = (pn.values(), gn.values());
        let mut sim = metrics::sim(&pn, &gn).map_err(err)?;
        if fault {
            sim += 1e-6;
        }
        let pairs = [
            ("SIM", sim, oracle::sim(p, g)),
            (
                "oSIM",
                metrics::osim(&pred, &gt, &pan).map_err(err)?.value,
                oracle::osim(p, g, pan.segment_ids()),
            ),
            (
                "CC",
                metrics::cc(&pred, &gt).map_err(err)?,
                oracle::cc(pred.values(), gt.values()),
            ),
            (
                "KLD",
                metrics::kld(&pn, &gn, DEFAULT_KLD_EPSILON).map_err(err)?,
                oracle::kld(p, g, DEFAULT_KLD_EPSILON),
            ),
            (
                "NSS",
                metrics::nss(&pred, &fix).map_err(err)?,
                oracle::nss(pred.values(), fix.bits()),
            ),
            (
                "AUC",
                metrics::auc_judd(&pred, &fix).map_err(err)?,
                oracle::auc_judd(pred.values(), fix.bits()),
            ),
        ];
        for (name, fast, slow) in pairs {
            ensure((fast - slow).abs() <= ORACLE_TOL, || {
                format!("case {case}: {name} {fast} vs reference {slow}")
            })?;
        }
    }
    Ok(())
}

fn auc_ties(rng: &mut ChaCha8Rng, _fault: bool) -> Result<(), String> {
    for case in 0..200 {
        let mut v: Vec<f64> = (0..64)
            .map(|_| f64::from(rng.gen_range(0..6u8)) * 0.2)
            .collect();
        v[0] += 0.1;
        let pred = SaliencyMap::new(8, 8, v).map_err(err)?;
        let fix = random_fixation_map(rng, 8, 8, 40);
        let fast = metrics::auc_judd(&pred, &fix).map_err(err)?;
        let slow = oracle::auc_judd(pred.values(), fix.bits());
        ensure((fast - slow).abs() <= ORACLE_TOL, || {
            format!("case {case}: {fast} vs reference {slow}")
        })?;
    }
    Ok(())
}

fn osim_dominance(rng: &mut ChaCha8Rng, _fault: bool) -> Result<(), String> {
    for case in 0..100 {
        let gt = positive_map(rng, 8, 8);
        let other = positive_map(rng, 8, 8);
        let pan = {
            let k = rng.gen_range(1..=8);
            random_partition(rng, 8, 8, k)
        };
        let own = metrics::osim(&gt, &gt, &pan).map_err(err)?.value;
        let rival = metrics::osim(&other, &gt, &pan).map_err(err)?.value;
        ensure((own - 1.0).abs() <= 1e-12 && rival <= own + 1e-12, || {
            format!("case {case}: self {own}, other {rival}")
        })?;
    }
    Ok(())
}

fn osim_refinement(rng: &mut ChaCha8Rng, _fault: bool) -> Result<(), String> {
    for case in 0..100 {
        let pred = positive_map(rng, 8, 8);
        let gt = positive_map(rng, 8, 8);
        let coarse = {
            let k = rng.gen_range(1..=4);
            random_partition(rng, 8, 8, k)
        };
        let pixels = PanopticMap::from_ids(8, 8, (1..=64).collect()).map_err(err)?;
        let c = metrics::osim(&pred, &gt, &coarse).map_err(err)?.value;
        let f = metrics::osim(&pred, &gt, &pixels).map_err(err)?.value;
        let sim = metrics::sim(
            &pred.normalize_unit_sum().map_err(err)?,
            &gt.normalize_unit_sum().map_err(err)?,
        )
        .map_err(err)?;
        ensure(f <= c + 1e-12 && (f - sim).abs() <= 1e-12, || {
            format!("case {case}: coarse {c}, per-pixel {f}, SIM {sim}")
        })?;
    }
    Ok(())
}

fn loss_composition(rng: &mut ChaCha8Rng, _fault: bool) -> Result<(), String> {
    let w = LossWeights::default();
    for case in 0..100 {
        let pred = positive_map(rng, 8, 8);
        let gt = positive_map(rng, 8, 8);
        let fix = random_fixation_map(rng, 8, 8, 10);
        let pan = {
            let k = rng.gen_range(1..=8);
            random_partition(rng, 8, 8, k)
        };
        let total = combined_loss(&pred, &gt, &fix, &pan, &w)
            .map_err(err)?
            .total;
        let pn = pred.normalize_unit_sum().map_err(err)?;
        let gn = gt.normalize_unit_sum().map_err(err)?;
        let hand = w.lambda_kld * metrics::kld(&pn, &gn, DEFAULT_KLD_EPSILON).map_err(err)?
            + w.lambda_cc * metrics::cc(&pred, &gt).map_err(err)?
            + w.lambda_sim * metrics::sim(&pn, &gn).map_err(err)?
            + w.lambda_nss * metrics::nss(&pred, &fix).map_err(err)?
            + w.lambda_mse * metrics::mse(&pn, &gn).map_err(err)?
            + w.lambda_osim * metrics::osim(&pn, &gn, &pan).map_err(err)?.value;
        ensure((total - hand).abs() <= 1e-12, || {
            format!("case {case}: {total} vs hand-composed {hand}")
        })?;
    }
    Ok(())
}

/// Smallest gap between predicted and target mass, per pixel and per
/// segment. SIM and oSIM are not differentiable where a gap closes.
fn min_gap(pred: &SaliencyMap, gt: &SaliencyMap, pan: &PanopticMap) -> Result<f64, String> {
    let p = pred.normalize_unit_sum().map_err(err)?;
    let g = gt.normalize_unit_sum().map_err(err)?;
    let mut seg = std::collections::BTreeMap::<u32, f64>::new();
    let mut gap = f64::INFINITY;
    for ((a, b), id) in p.values().iter().zip(g.values()).zip(pan.segment_ids()) {
        gap = gap.min((a - b).abs());
        *seg.entry(*id).or_default() += a - b;
    }
    Ok(seg.values().fold(gap, |m, d| m.min(d.abs())))
}

fn loss_gradient(rng: &mut ChaCha8Rng, _fault: bool) -> Result<(), String> {
    let w = LossWeights::default();
    let mut case = 0;
    while case < 20 {
        let pred = positive_map(rng, 8, 8);
        let gt = positive_map(rng, 8, 8);
        let fix = random_fixation_map(rng, 8, 8, 10);
        let pan = {
            let k = rng.gen_range(1..=8);
            random_partition(rng, 8, 8, k)
        };
        if min_gap(&pred, &gt, &pan)? < KINK_MARGIN {
            continue;
        }
        let analytic = grad_combined_loss(&pred, &gt, &fix, &pan, &w).map_err(err)?;
        let f = loss_fn(8, 8, &gt, &fix, &pan, w, LossOptions::default());
        let numeric = fd_gradient(f, pred.values(), FD_STEP);
        let cmp = GradComparison::new(&analytic, &numeric, FD_FLOOR);
        ensure(cmp.passes(1e-5, 1e-8), || format!("case {case}: {cmp:?}"))?;
        case += 1;
    }
    Ok(())
}

fn encoder_gradients(rng: &mut ChaCha8Rng, _fault: bool) -> Result<(), String> {
    let dims = EncoderDims {
        node_features: 5,
        hidden: 4,
        attributes: 3,
        token: 3,
        mlp_hidden: 4,
    };
    for case in 0..5 {
        let r = encoder_grad_check_random(rng, &dims, Activation::Relu, 6, 3, FD_STEP, FD_FLOOR)
            .map_err(err)?;
        ensure(r.comparison.passes(1e-5, 1e-8), || {
            format!("case {case}, relu: {r:?}")
        })?;
        let r = encoder_grad_check_random(rng, &dims, Activation::Identity, 6, 3, 1e-2, FD_FLOOR)
            .map_err(err)?;
        ensure(r.comparison.passes(1e-7, 1e-8), || {
            format!("case {case}, identity: {r:?}")
        })?;
    }
    Ok(())
}

fn permutation_invariance(rng: &mut ChaCha8Rng, _fault: bool) -> Result<(), String> {
    let dims = EncoderDims {
        hidden: 8,
        token: 6,
        mlp_hidden: 16,
        ..EncoderDims::default()
    };
    for case in 0..50 {
        let params = GraphEncoderParams::random(rng, &dims).map_err(err)?;
        let mut graphs = Vec::new();
        for _ in 0..rng.gen_range(1..=5) {
            let m = rng.gen_range(1..=12);
            let g = random_graph(rng, m, dims.node_features, dims.attributes).map_err(err)?;
            let mut perm: Vec<usize> = (0..m).collect();
            perm.shuffle(rng);
            graphs.push((g.clone(), g.permuted(&perm).map_err(err)?));
        }
        let x = Array3::from_shape_fn((3, 4, dims.hidden), |_| rng.gen_range(-1.0..1.0));
        let original: Vec<_> = graphs.iter().map(|p| p.0.clone()).collect();
        let mut shuffled: Vec<_> = graphs.into_iter().map(|p| p.1).collect();
        shuffled.shuffle(rng);
        let a = context_block(&x, &original, &params).map_err(err)?;
        let b = context_block(&x, &shuffled, &params).map_err(err)?;
        let diff = a
            .iter()
            .zip(&b)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        ensure(diff <= 1e-12, || {
            format!("case {case}: outputs differ by {diff}")
        })?;
    }
    Ok(())
}

fn gtgen_window(rng: &mut ChaCha8Rng, _fault: bool) -> Result<(), String> {
    let cfg = GtGenConfig::new(2.0);
    for case in 0..20 {
        let pts: Vec<Fixation> = (0..rng.gen_range(3..=8))
            .map(|_| Fixation::new(rng.gen_range(0.0..39.0), rng.gen_range(0.0..23.0)))
            .collect();
        let all =
            render_ground_truth(&FixationSet::new("f", pts.clone()), &cfg, 40, 24).map_err(err)?;
        let tail = pts[pts.len() - cfg.fixation_window..].to_vec();
        let last = render_ground_truth(&FixationSet::new("f", tail), &cfg, 40, 24).map_err(err)?;
        let diff = all
            .values()
            .iter()
            .zip(last.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        ensure(diff <= 1e-12 && (all.total() - 1.0).abs() <= 1e-9, || {
            format!("case {case}: max difference {diff}, total {}", all.total())
        })?;
    }
    Ok(())
}
