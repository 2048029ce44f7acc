use std::time::Instant;

use objsal_core::ingest::scan_dataset;

use crate::engine::{evaluate_dataset, worker_count};
use crate::output::write_atomic;
use crate::report::{
    eval_markdown, exclusions, frame_json, metric_aggregates, to_json, tool, warnings, ConfigEcho,
    EvalReport, SCHEMA_VERSION,
};
use crate::{load_config, EvalArgs, Failure};

pub fn run(args: &EvalArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let mut config = load_config(args.common.config.as_ref())?;
    config.things_only |= args.common.things_only;
    let mut options = config.metric_options();
    options.per_segment |= args.per_segment;
    let jobs = worker_count(args.common.jobs, &config);

    let dataset = scan_dataset(&args.root, &config)?;
    let records = evaluate_dataset(&dataset, &options, None, jobs, "eval")?;

    let doc = EvalReport {
        schema_version: SCHEMA_VERSION,
        tool: tool(),
        command: "eval",
        root: args.root.display().to_string(),
        config: ConfigEcho::new(&config, options),
        frames_evaluated: records.len(),
        skipped: dataset.skipped.clone(),
        warnings: warnings(&records),
        aggregate: metric_aggregates(&records),
        exclusions: exclusions(&records),
        frames: records.iter().map(frame_json).collect(),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let fmt = args.common.format;
    if fmt.json() {
        write_atomic(&args.common.output.join("report.json"), &to_json(&doc))?;
    }
    if fmt.markdown() {
        let md = eval_markdown(&doc, elapsed, jobs);
        write_atomic(&args.common.output.join("report.md"), md.as_bytes())?;
    }
    if doc.warnings.unknown_segment_pixels > 0 {
        eprintln!(
            "warning: {} pixels in {} frames carried segment ids missing from their table",
            doc.warnings.unknown_segment_pixels, doc.warnings.frames_with_unknown_segments
        );
    }
    eprintln!(
        "eval: {} frames in {elapsed:.3} s on {jobs} worker(s), skipped {}",
        doc.frames_evaluated,
        crate::report::skipped_line(&doc.skipped)
    );
    Ok(())
}
