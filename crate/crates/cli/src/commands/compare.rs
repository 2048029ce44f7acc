use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use objsal_core::ingest::{scan_dataset, Dataset};
use objsal_core::Metric;
use serde::Serialize;

use crate::engine::{evaluate_dataset, worker_count, FrameRecord, LossRequest};
use crate::output::write_atomic;
use crate::report::{
    aggregate, f17, fmt4, fmt_signed, skipped_line, table_header, table_row, to_json, tool,
    Aggregate, ConfigEcho, PerMetric, Tool, F17, SCHEMA_VERSION,
};
use crate::{load_config, CompareArgs, Failure};

#[derive(Debug, Serialize)]
struct Side {
    root: String,
    frames: usize,
    skipped: BTreeMap<String, usize>,
}

#[derive(Debug, Serialize)]
struct Unmatched {
    only_in_a: Vec<String>,
    only_in_b: Vec<String>,
}

#[derive(Debug, Serialize)]
struct PairedAggregate {
    a: PerMetric<Aggregate>,
    b: PerMetric<Aggregate>,
    /// Mean and spread of the per-frame differences b - a.
    delta: PerMetric<Aggregate>,
}

#[derive(Debug, Serialize)]
struct LossSummary {
    a: Aggregate,
    b: Aggregate,
    delta: Aggregate,
}

#[derive(Debug, Serialize)]
struct FrameDelta {
    frame_id: String,
    delta: PerMetric<Option<F17>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loss_delta: Option<Option<F17>>,
}

#[derive(Debug, Serialize)]
struct CompareReport {
    schema_version: u32,
    tool: Tool,
    command: &'static str,
    config: ConfigEcho,
    a: Side,
    b: Side,
    paired_frames: usize,
    unmatched: Unmatched,
    aggregate: PairedAggregate,
    #[serde(skip_serializing_if = "Option::is_none")]
    loss: Option<LossSummary>,
    frames: Vec<FrameDelta>,
}

fn side(ds: &Dataset) -> Side {
    Side {
        root: ds.root.display().to_string(),
        frames: ds.len(),
        skipped: ds.skipped.clone(),
    }
}

fn diff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(b? - a?)
}

pub fn run(args: &CompareArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let mut config = load_config(args.common.config.as_ref())?;
    config.things_only |= args.common.things_only;
    let options = config.metric_options();
    let jobs = worker_count(args.common.jobs, &config);

    let mut ds_a = scan_dataset(&args.root_a, &config)?;
    let mut ds_b = scan_dataset(&args.root_b, &config)?;
    let ids_a: BTreeSet<String> = ds_a.frames.iter().map(|f| f.frame_id.clone()).collect();
    let ids_b: BTreeSet<String> = ds_b.frames.iter().map(|f| f.frame_id.clone()).collect();
    let unmatched = Unmatched {
        only_in_a: ids_a.difference(&ids_b).cloned().collect(),
        only_in_b: ids_b.difference(&ids_a).cloned().collect(),
    };
    let shared: BTreeSet<&String> = ids_a.intersection(&ids_b).collect();
    if shared.is_empty() {
        return Err(Failure::Input(format!(
            "{} and {} share no frame ids",
            args.root_a.display(),
            args.root_b.display()
        )));
    }
    let n_unmatched = unmatched.only_in_a.len() + unmatched.only_in_b.len();
    if n_unmatched > 0 {
        eprintln!("warning: {n_unmatched} frames present on one side only are excluded");
    }
    let (side_a, side_b) = (side(&ds_a), side(&ds_b));
    ds_a.frames.retain(|f| shared.contains(&f.frame_id));
    ds_b.frames.retain(|f| shared.contains(&f.frame_id));

    let loss = args.loss.then(|| LossRequest {
        weights: config.loss.weights,
        options: config.loss_options(),
    });
    let rec_a = evaluate_dataset(&ds_a, &options, loss, jobs, "compare (a)")?;
    let rec_b = evaluate_dataset(&ds_b, &options, loss, jobs, "compare (b)")?;

    let values = |recs: &[FrameRecord], m: Metric| -> Vec<Option<f64>> {
        recs.iter().map(|r| r.report.get(m)).collect()
    };
    let deltas = PerMetric::from_fn(|m| {
        values(&rec_a, m)
            .into_iter()
            .zip(values(&rec_b, m))
            .map(|(a, b)| diff(a, b))
            .collect::<Vec<_>>()
    });
    // Aggregate only over frames where both sides are defined.
    let paired_agg = |recs: &[FrameRecord]| {
        PerMetric::from_fn(|m| {
            aggregate(
                rec_a
                    .iter()
                    .zip(&rec_b)
                    .zip(recs)
                    .filter(|((a, b), _)| a.report.get(m).is_some() && b.report.get(m).is_some())
                    .filter_map(|(_, r)| r.report.get(m)),
            )
        })
    };
    let aggregate_doc = PairedAggregate {
        a: paired_agg(&rec_a),
        b: paired_agg(&rec_b),
        delta: PerMetric::from_fn(|m| aggregate(deltas.get(m).iter().flatten().copied())),
    };
    let loss_summary = args.loss.then(|| {
        let both: Vec<(f64, f64)> = rec_a
            .iter()
            .zip(&rec_b)
            .filter_map(|(a, b)| Some((a.loss?, b.loss?)))
            .collect();
        LossSummary {
            a: aggregate(both.iter().map(|p| p.0)),
            b: aggregate(both.iter().map(|p| p.1)),
            delta: aggregate(both.iter().map(|p| p.1 - p.0)),
        }
    });
    let frames = rec_a
        .iter()
        .zip(&rec_b)
        .enumerate()
        .map(|(i, (a, b))| FrameDelta {
            frame_id: a.report.frame_id.clone(),
            delta: PerMetric::from_fn(|m| f17(deltas.get(m)[i])),
            loss_delta: args.loss.then(|| f17(diff(a.loss, b.loss))),
        })
        .collect();

    let doc = CompareReport {
        schema_version: SCHEMA_VERSION,
        tool: tool(),
        command: "compare",
        config: ConfigEcho::new(&config, options),
        a: side_a,
        b: side_b,
        paired_frames: rec_a.len(),
        unmatched,
        aggregate: aggregate_doc,
        loss: loss_summary,
        frames,
    };
    let elapsed = start.elapsed().as_secs_f64();
    let fmt = args.common.format;
    if fmt.json() {
        write_atomic(&args.common.output.join("compare.json"), &to_json(&doc))?;
    }
    if fmt.markdown() {
        write_atomic(
            &args.common.output.join("compare.md"),
            markdown(&doc, elapsed, jobs).as_bytes(),
        )?;
    }
    eprintln!(
        "compare: {} paired frames in {elapsed:.3} s, {n_unmatched} unmatched",
        doc.paired_frames
    );
    Ok(())
}

fn markdown(doc: &CompareReport, wall_seconds: f64, jobs: usize) -> String {
    let mut md = String::from("# Saliency comparison\n\n");
    md.push_str(&format!(
        "- A: `{}` (skipped: {})\n",
        doc.a.root,
        skipped_line(&doc.a.skipped)
    ));
    md.push_str(&format!(
        "- B: `{}` (skipped: {})\n",
        doc.b.root,
        skipped_line(&doc.b.skipped)
    ));
    md.push_str(&format!("- paired frames: {}\n", doc.paired_frames));
    let un = doc.unmatched.only_in_a.len() + doc.unmatched.only_in_b.len();
    if un > 0 {
        md.push_str(&format!(
            "- excluded, present on one side only: {} in A, {} in B\n",
            doc.unmatched.only_in_a.len(),
            doc.unmatched.only_in_b.len()
        ));
    }
    md.push_str(&format!(
        "- wall time: {wall_seconds:.3} s on {jobs} worker(s)\n\n"
    ));
    md.push_str(&table_header(""));
    let agg = &doc.aggregate;
    md.push_str(&table_row("A", &agg.a, |a| fmt4(a.mean)));
    md.push_str(&table_row("B", &agg.b, |a| fmt4(a.mean)));
    md.push_str(&table_row("Δ (B − A)", &agg.delta, |a| {
        fmt_signed(a.mean)
    }));
    if let Some(l) = &doc.loss {
        md.push_str(&format!(
            "\nComposite loss: A {}, B {}, Δ {}\n",
            fmt4(l.a.mean),
            fmt4(l.b.mean),
            fmt_signed(l.delta.mean)
        ));
    }
    md
}
