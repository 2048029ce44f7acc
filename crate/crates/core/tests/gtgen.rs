use objsal_core::gtgen::{render_ground_truth, GtGenConfig};
use objsal_core::{Fixation, FixationSet};
use proptest::prelude::*;

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(
            (0, f64::MIN),
            |(bi, bv), (i, x)| if *x > bv { (i, *x) } else { (bi, bv) },
        )
        .0
}

#[test]
fn window_three_keeps_only_last_three() {
    let pts: Vec<Fixation> = [
        (3.0, 4.0),
        (20.0, 5.0),
        (7.2, 17.6),
        (30.0, 12.0),
        (12.0, 9.4),
    ]
    .iter()
    .map(|(x, y)| Fixation::new(*x, *y))
    .collect();
    let cfg = GtGenConfig::new(2.0);
    let all = render_ground_truth(&FixationSet::new("f", pts.clone()), &cfg, 40, 24).unwrap();
    let last =
        render_ground_truth(&FixationSet::new("f", pts[2..].to_vec()), &cfg, 40, 24).unwrap();
    for (a, b) in all.values().iter().zip(last.values()) {
        assert!((a - b).abs() <= 1e-12);
    }
    assert!((all.total() - 1.0).abs() <= 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_fixation_peaks_at_its_pixel(x in 0.0f64..47.0, y in 0.0f64..31.0, ppd in 0.3f64..3.0) {
        let set = FixationSet::new("f", vec![Fixation::new(x, y)]);
        let m = render_ground_truth(&set, &GtGenConfig::new(ppd), 48, 32).unwrap();
        let (px, py) = (x.round() as usize, y.round() as usize);
        prop_assert_eq!(argmax(m.values()), py * 48 + px);
        prop_assert!((m.total() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn translation_moves_the_map(dx in 0usize..8, dy in 0usize..8) {
        // Far from the border nothing is clipped, so shifting the fixation
        // shifts every pixel.
        let cfg = GtGenConfig { sigma_dva: 1.0, truncation_radius: 3.0, ..GtGenConfig::new(1.0) };
        let base = FixationSet::new("f", vec![Fixation::new(10.0, 10.0)]);
        let moved = FixationSet::new("f", vec![Fixation::new(10.0 + dx as f64, 10.0 + dy as f64)]);
        let a = render_ground_truth(&base, &cfg, 32, 32).unwrap();
        let b = render_ground_truth(&moved, &cfg, 32, 32).unwrap();
        for y in 0..24 {
            for x in 0..24 {
                prop_assert!((a.get(x, y) - b.get(x + dx, y + dy)).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn decays_monotonically_from_centre(ppd in 0.5f64..2.0) {
        let set = FixationSet::new("f", vec![Fixation::new(20.0, 20.0)]);
        let m = render_ground_truth(&set, &GtGenConfig::new(ppd), 41, 41).unwrap();
        for d in 1..=20 {
            prop_assert!(m.get(20 + d, 20) <= m.get(20 + d - 1, 20));
        }
    }
}

#[test]
fn window_one_depends_only_on_last() {
    let cfg = GtGenConfig {
        fixation_window: 1,
        ..GtGenConfig::new(1.0)
    };
    let a = FixationSet::new("f", vec![Fixation::new(1.0, 1.0), Fixation::new(9.0, 9.0)]);
    let b = FixationSet::new("f", vec![Fixation::new(15.0, 3.0), Fixation::new(9.0, 9.0)]);
    assert_eq!(
        render_ground_truth(&a, &cfg, 20, 20).unwrap(),
        render_ground_truth(&b, &cfg, 20, 20).unwrap()
    );
}
