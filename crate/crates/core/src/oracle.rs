//! Naive reference implementations of every metric.
//!
//! These work on plain slices with direct nested loops and share no code
//! with the kernels in [`crate::metrics`]. They exist to cross-check the
//! kernels in tests and in the CLI `selfcheck` command.

fn normalized(values: &[f64]) -> Vec<f64> {
    let mut total = 0.0;
    for v in values {
        total += v;
    }
    values.iter().map(|v| v / total).collect()
}

fn mean(values: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in values {
        s += v;
    }
    s / values.len() as f64
}

fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    let mut s = 0.0;
    for v in values {
        s += (v - m) * (v - m);
    }
    (s / values.len() as f64).sqrt()
}

pub fn sim(predicted: &[f64], ground_truth: &[f64]) -> f64 {
    let p = normalized(predicted);
    let g = normalized(ground_truth);
    let mut s = 0.0;
    for i in 0..p.len() {
        s += if p[i] < g[i] { p[i] } else { g[i] };
    }
    s
}

/// One full pass over the image per distinct segment id.
pub fn osim(predicted: &[f64], ground_truth: &[f64], segment_ids: &[u32]) -> f64 {
    osim_filtered(predicted, ground_truth, segment_ids, |_| true)
}

pub fn osim_filtered(
    predicted: &[f64],
    ground_truth: &[f64],
    segment_ids: &[u32],
    include: impl Fn(u32) -> bool,
) -> f64 {
    let p = normalized(predicted);
    let g = normalized(ground_truth);
    let mut ids: Vec<u32> = Vec::new();
    for id in segment_ids {
        if !ids.contains(id) {
            ids.push(*id);
        }
    }
    ids.sort_unstable();
    let mut total = 0.0;
    for id in ids {
        if !include(id) {
            continue;
        }
        let mut mp = 0.0;
        let mut mg = 0.0;
        for i in 0..segment_ids.len() {
            if segment_ids[i] == id {
                mp += p[i];
                mg += g[i];
            }
        }
        total += mp.min(mg);
    }
    total
}

/// Textbook Pearson correlation: covariance over the product of standard
/// deviations, each from its own pass.
pub fn cc(predicted: &[f64], ground_truth: &[f64]) -> f64 {
    let n = predicted.len() as f64;
    let mp = mean(predicted);
    let mg = mean(ground_truth);
    let mut cov = 0.0;
    for i in 0..predicted.len() {
        cov += (predicted[i] - mp) * (ground_truth[i] - mg);
    }
    cov / n / (population_std(predicted) * population_std(ground_truth))
}

pub fn kld(predicted: &[f64], ground_truth: &[f64], epsilon: f64) -> f64 {
    let p = normalized(predicted);
    let g = normalized(ground_truth);
    let mut s = 0.0;
    for i in 0..p.len() {
        if g[i] > 0.0 {
            s += g[i] * ((g[i] + epsilon) / (p[i] + epsilon)).ln();
        }
    }
    s
}

pub fn nss(predicted: &[f64], fixated: &[bool]) -> f64 {
    let m = mean(predicted);
    let sd = population_std(predicted);
    let mut s = 0.0;
    let mut k = 0usize;
    for i in 0..predicted.len() {
        if fixated[i] {
            s += (predicted[i] - m) / sd;
            k += 1;
        }
    }
    s / k as f64
}

/// Judd AUC by enumerating every threshold (each distinct fixated value)
/// and counting true and false positives with a full scan per threshold.
pub fn auc_judd(predicted: &[f64], fixated: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = Vec::new();
    let mut n_pos = 0usize;
    for i in 0..predicted.len() {
        if fixated[i] {
            n_pos += 1;
            if !thresholds.contains(&predicted[i]) {
                thresholds.push(predicted[i]);
            }
        }
    }
    let n_neg = predicted.len() - n_pos;
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut tpr = vec![0.0];
    let mut fpr = vec![0.0];
    for t in &thresholds {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for i in 0..predicted.len() {
            if predicted[i] >= *t {
                if fixated[i] {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        tpr.push(tp as f64 / n_pos as f64);
        fpr.push(fp as f64 / n_neg as f64);
    }
    tpr.push(1.0);
    fpr.push(1.0);
    let mut area = 0.0;
    for k in 1..tpr.len() {
        area += (fpr[k] - fpr[k - 1]) * (tpr[k] + tpr[k - 1]) / 2.0;
    }
    area
}

pub fn mse(predicted: &[f64], ground_truth: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..predicted.len() {
        let d = predicted[i] - ground_truth[i];
        s += d * d;
    }
    s / predicted.len() as f64
}

pub fn mse_normalized(predicted: &[f64], ground_truth: &[f64]) -> f64 {
    mse(&normalized(predicted), &normalized(ground_truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_hand_case() {
        // Fixated values {3, 1}, non-fixated {2}: thresholds 3 then 1.
        // Curve (0,0) (0,.5) (1,1) (1,1) -> 0.75.
        let a = auc_judd(&[3.0, 2.0, 1.0], &[true, false, true]);
        assert!((a - 0.75).abs() < 1e-15);
    }

    #[test]
    fn nss_hand_case() {
        let v = nss(&[0.0, 0.0, 0.0, 1.0], &[false, false, false, true]);
        assert!((v - 3f64.sqrt()).abs() < 1e-12);
    }
}
