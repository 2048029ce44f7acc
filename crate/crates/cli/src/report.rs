//! Report documents. JSON field order is fixed by declaration order and
//! every float is written with 17 significant digits, so identical inputs
//! give byte-identical files.

use std::collections::BTreeMap;

use objsal_core::ingest::{GtGenSection, LayoutConfig, RunConfig};
use objsal_core::metrics::{MetricOptions, SegmentMass};
use objsal_core::Metric;
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;

use crate::engine::FrameRecord;

pub const SCHEMA_VERSION: u32 = 1;

/// A float serialized as `d.dddddddddddddddde±x`; non-finite becomes null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw =
            RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

pub fn f17(v: Option<f64>) -> Option<F17> {
    v.map(F17)
}

/// One value per metric, serialized as a map in table column order.
#[derive(Debug, Clone)]
pub struct PerMetric<T>(pub [T; 6]);

impl<T> PerMetric<T> {
    pub fn from_fn(f: impl FnMut(Metric) -> T) -> Self {
        PerMetric(Metric::ALL.map(f))
    }

    pub fn get(&self, m: Metric) -> &T {
        &self.0[Metric::ALL
            .iter()
            .position(|x| *x == m)
            .expect("metric in ALL")]
    }
}

impl<T: Serialize> Serialize for PerMetric<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(6))?;
        for (m, v) in Metric::ALL.iter().zip(&self.0) {
            map.serialize_entry(m.key(), v)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

pub fn tool() -> Tool {
    Tool {
        name: "objsal",
        version: env!("CARGO_PKG_VERSION"),
    }
}

/// Mean and population standard deviation over the frames where a value
/// is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: Option<F17>,
    pub std: Option<F17>,
    pub count: usize,
}

pub fn aggregate(values: impl IntoIterator<Item = f64>) -> Aggregate {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return Aggregate {
            mean: None,
            std: None,
            count: 0,
        };
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Aggregate {
        mean: Some(F17(mean)),
        std: Some(F17(var.sqrt())),
        count: v.len(),
    }
}

/// Settings that influence the numbers. Worker count is left out so that
/// reports do not depend on it.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub metrics: MetricOptions,
    pub gtgen: GtGenSection,
    pub layout: LayoutConfig,
}

impl ConfigEcho {
    pub fn new(config: &RunConfig, metrics: MetricOptions) -> Self {
        Self {
            metrics,
            gtgen: config.gtgen,
            layout: config.layout.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentJson {
    pub pred_mass: F17,
    pub gt_mass: F17,
    pub contribution: F17,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameJson {
    pub frame_id: String,
    #[serde(flatten)]
    pub values: PerMetric<Option<F17>>,
    /// Reason codes for metrics that are null.
    pub undefined: BTreeMap<&'static str, &'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_segment: Option<BTreeMap<u32, SegmentJson>>,
}

fn segment_json(m: &SegmentMass) -> SegmentJson {
    SegmentJson {
        pred_mass: F17(m.pred_mass),
        gt_mass: F17(m.gt_mass),
        contribution: F17(m.contribution),
    }
}

pub fn frame_json(r: &FrameRecord) -> FrameJson {
    let rep = &r.report;
    FrameJson {
        frame_id: rep.frame_id.clone(),
        values: PerMetric::from_fn(|m| f17(rep.get(m))),
        undefined: rep
            .undefined
            .iter()
            .map(|(m, why)| (m.key(), *why))
            .collect(),
        per_segment: rep
            .per_segment
            .as_ref()
            .map(|p| p.iter().map(|(id, m)| (*id, segment_json(m))).collect()),
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Warnings {
    pub unknown_segment_pixels: usize,
    pub frames_with_unknown_segments: usize,
    pub fixations_from_ground_truth_maxima: usize,
}

pub fn warnings(records: &[FrameRecord]) -> Warnings {
    let mut w = Warnings::default();
    for r in records {
        w.unknown_segment_pixels += r.unknown_segment_pixels;
        w.frames_with_unknown_segments += usize::from(r.unknown_segment_pixels > 0);
        w.fixations_from_ground_truth_maxima += usize::from(
            r.fixation_origin == objsal_core::ingest::FixationOrigin::GroundTruthMaxima,
        );
    }
    w
}

pub fn metric_aggregates(records: &[FrameRecord]) -> PerMetric<Aggregate> {
    PerMetric::from_fn(|m| aggregate(records.iter().filter_map(|r| r.report.get(m))))
}

/// Per metric, how many frames were left out of the aggregate and why.
pub fn exclusions(records: &[FrameRecord]) -> PerMetric<BTreeMap<&'static str, usize>> {
    PerMetric::from_fn(|m| {
        let mut out = BTreeMap::new();
        for r in records {
            if let Some(why) = r.report.undefined.get(&m) {
                *out.entry(*why).or_insert(0) += 1;
            }
        }
        out
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub tool: Tool,
    pub command: &'static str,
    pub root: String,
    pub config: ConfigEcho,
    pub frames_evaluated: usize,
    pub skipped: BTreeMap<String, usize>,
    pub warnings: Warnings,
    pub aggregate: PerMetric<Aggregate>,
    pub exclusions: PerMetric<BTreeMap<&'static str, usize>>,
    pub frames: Vec<FrameJson>,
}

pub fn to_json<T: Serialize>(doc: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(doc).expect("report serializes");
    out.push(b'\n');
    out
}

pub fn fmt4(v: Option<F17>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| format!("{:.4}", x.0))
}

pub fn fmt_signed(v: Option<F17>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| format!("{:+.4}", x.0))
}

/// `| CC ↑ | KLD ↓ | ... |` header plus separator.
pub fn table_header(first: &str) -> String {
    let mut head = format!("| {first} |");
    let mut sep = String::from("|---|");
    for m in Metric::ALL {
        let arrow = if m.higher_is_better() { "↑" } else { "↓" };
        head.push_str(&format!(" {} {arrow} |", m.label()));
        sep.push_str("---:|");
    }
    format!("{head}\n{sep}\n")
}

pub fn table_row<T>(label: &str, values: &PerMetric<T>, cell: impl Fn(&T) -> String) -> String {
    let mut row = format!("| {label} |");
    for v in &values.0 {
        row.push_str(&format!(" {} |", cell(v)));
    }
    row.push('\n');
    row
}

pub fn skipped_line(skipped: &BTreeMap<String, usize>) -> String {
    if skipped.is_empty() {
        return "none".into();
    }
    skipped
        .iter()
        .map(|(k, v)| format!("{k}: {v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn eval_markdown(doc: &EvalReport, wall_seconds: f64, jobs: usize) -> String {
    let mut md = String::from("# Saliency evaluation\n\n");
    md.push_str(&format!("- dataset: `{}`\n", doc.root));
    md.push_str(&format!("- frames evaluated: {}\n", doc.frames_evaluated));
    md.push_str(&format!(
        "- frames skipped: {}\n",
        skipped_line(&doc.skipped)
    ));
    if doc.config.metrics.things_only {
        md.push_str("- oSIM restricted to thing segments\n");
    }
    md.push_str(&format!(
        "- wall time: {wall_seconds:.3} s on {jobs} worker(s)\n\n"
    ));
    md.push_str(&table_header(""));
    md.push_str(&table_row("mean", &doc.aggregate, |a| fmt4(a.mean)));
    md.push_str(&table_row("std", &doc.aggregate, |a| fmt4(a.std)));
    md.push_str(&table_row("frames", &doc.aggregate, |a| {
        a.count.to_string()
    }));
    md
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        let s = serde_json::to_string(&[F17(0.1), F17(1.0), F17(-2.5e-12)]).unwrap();
        assert_eq!(
            s,
            "[1.0000000000000001e-1,1.0000000000000000e0,-2.4999999999999998e-12]"
        );
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![0.1, 1.0, -2.5e-12]);
        assert_eq!(serde_json::to_string(&F17(f64::NAN)).unwrap(), "null");
    }

    #[test]
    fn aggregate_population_std() {
        let a = aggregate([1.0, 3.0]);
        assert_eq!(a.mean, Some(F17(2.0)));
        assert_eq!(a.std, Some(F17(1.0)));
        assert_eq!(a.count, 2);
        assert_eq!(aggregate([]).count, 0);
    }

    #[test]
    fn per_metric_order() {
        let p = PerMetric::from_fn(|m| m.key());
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(
            s,
            r#"{"cc":"cc","kld":"kld","auc":"auc","sim":"sim","nss":"nss","osim":"osim"}"#
        );
        assert!(table_header("").contains("| CC ↑ | KLD ↓ | AUC ↑ | SIM ↑ | NSS ↑ | oSIM ↑ |"));
    }
}
