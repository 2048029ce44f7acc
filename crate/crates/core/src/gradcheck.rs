//! Central finite differences and analytic-vs-numeric gradient comparison.

/// Central-difference gradient of `f` at `x`:
/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Worst-case discrepancy between two gradients.
///
/// Components where both magnitudes fall below `abs_floor` are compared
/// absolutely; all others relative to the larger magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradComparison {
    pub max_rel_error: f64,
    pub max_abs_error_small: f64,
    pub worst_index: usize,
}

impl GradComparison {
    pub fn new(analytic: &[f64], numeric: &[f64], abs_floor: f64) -> Self {
        assert_eq!(analytic.len(), numeric.len());
        let mut out = GradComparison::default();
        for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
            let scale = a.abs().max(n.abs());
            let diff = (a - n).abs();
            if scale < abs_floor {
                out.max_abs_error_small = out.max_abs_error_small.max(diff);
            } else {
                let rel = diff / scale;
                if rel > out.max_rel_error || rel.is_nan() {
                    out.max_rel_error = rel;
                    out.worst_index = i;
                }
            }
        }
        out
    }

    pub fn passes(&self, rel_tol: f64, abs_tol: f64) -> bool {
        self.max_rel_error <= rel_tol && self.max_abs_error_small <= abs_tol
    }
}
