use std::collections::HashSet;

use ifacm::dataset::{split_indices, standardize, Dataset, Example, Label, SplitSpec, Task};
use ifacm::icp::{counting_member, threshold, CalibrationTable, PredictionOutput};
use ifacm::metrics::{dcv, dcv_from_probs, inefficiency, objective};
use ifacm::optimizer::minimize;
use proptest::prelude::*;

fn flagged_objects() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>)> {
    (8usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

fn intervals() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-50.0f64..50.0, 0.0f64..10.0), 1..30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dcv_ignores_row_order((objs, flags) in flagged_objects(), rot in 0usize..40) {
        let refs: Vec<&[f64]> = objs.iter().map(Vec::as_slice).collect();
        let (a, _) = dcv(&refs, &flags, 0.1, 1e-3).unwrap();
        let k = rot % refs.len();
        let mut r2 = refs.clone();
        let mut f2 = flags.clone();
        r2.rotate_left(k);
        f2.rotate_left(k);
        r2.reverse();
        f2.reverse();
        let (b, _) = dcv(&r2, &f2, 0.1, 1e-3).unwrap();
        prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }

    #[test]
    fn dcv_is_bounded_by_worst_deviation(probs in prop::collection::vec(0.0f64..=1.0, 1..50), conf in 0.5f64..0.99) {
        let d = dcv_from_probs(&probs, conf);
        let worst = probs.iter().map(|p| (p - conf).abs()).fold(0.0, f64::max);
        prop_assert!(d >= 0.0 && d <= worst + 1e-15);
        prop_assert!(d <= conf.max(1.0 - conf));
    }

    #[test]
    fn objective_is_monotone_in_inefficiency(d in 0.0f64..1.0, w in 0.0f64..10.0, dw in 0.0f64..10.0, w0 in 0.1f64..10.0, c in 0.0f64..5.0) {
        let a = objective(d, w, w0, c);
        let b = objective(d, w + dw, w0, c);
        prop_assert!(b >= a);
        prop_assert!(objective(d, w.min(w0), w0, c) == d);
    }

    #[test]
    fn inefficiency_ignores_translation(iv in intervals(), shift in -100.0f64..100.0) {
        let base: Vec<_> = iv.iter().map(|&(lo, w)| PredictionOutput::Interval { lo, hi: lo + w }).collect();
        let moved: Vec<_> = iv.iter().map(|&(lo, w)| PredictionOutput::Interval { lo: lo + shift, hi: lo + w + shift }).collect();
        let (a, b) = (inefficiency(&base).unwrap(), inefficiency(&moved).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn threshold_matches_counting_rule(
        scores in prop::collection::vec(-20i32..20, 1..60),
        cand in -21i32..21,
        eps in 0.01f64..0.99,
    ) {
        let scores: Vec<f64> = scores.into_iter().map(|s| s as f64 * 0.25).collect();
        let cand = cand as f64 * 0.25;
        let t = threshold(&CalibrationTable::from_scores(scores.clone(), eps).unwrap());
        prop_assert_eq!(t.admits(cand), counting_member(&scores, cand, eps));
    }

    #[test]
    fn prediction_sets_grow_as_epsilon_shrinks(
        scores in prop::collection::vec(-20.0f64..20.0, 1..60),
        cand in -21.0f64..21.0,
        e1 in 0.01f64..0.99,
        e2 in 0.01f64..0.99,
    ) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let table = CalibrationTable::from_scores(scores, hi).unwrap();
        let strict = threshold(&table);
        let loose = threshold(&table.with_epsilon(lo).unwrap());
        prop_assert!(!strict.admits(cand) || loose.admits(cand));
    }

    #[test]
    fn split_partitions_rows(n in 3usize..200, a in 0usize..80, b in 0usize..80, c in 0usize..80, seed: u64, shuffle: bool) {
        let spec = SplitSpec { train: a, cal: b, test: c, seed, shuffle };
        match split_indices(n, &spec) {
            Err(_) => prop_assert!(a + b + c > n),
            Ok(parts) => {
                prop_assert_eq!(parts[0].len(), a);
                prop_assert_eq!(parts[1].len(), b);
                prop_assert_eq!(parts[2].len(), c);
                let all: HashSet<usize> = parts.iter().flatten().copied().collect();
                prop_assert_eq!(all.len(), a + b + c);
                prop_assert!(all.iter().all(|&i| i < n));
                prop_assert_eq!(split_indices(n, &spec).unwrap(), parts);
            }
        }
    }

    #[test]
    fn standardized_training_columns_have_unit_scale(
        rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 3..50),
    ) {
        let n = rows.len();
        let examples = rows.iter().map(|r| Example::new(r.clone(), Label::Real(0.0))).collect();
        let data = Dataset::new(examples, Task::Regression, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let fit: Vec<usize> = (0..n).collect();
        let std = standardize(&data, &fit).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = std.examples().iter().map(|e| e.object[j]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let (_, sd) = std.standardization().unwrap().stats[j];
            prop_assert!(mean.abs() < 1e-9);
            if sd > 0.0 {
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
            } else {
                prop_assert!(col.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn optimizer_never_worsens_start_or_overspends(
        cx in -5.0f64..5.0, cy in -5.0f64..5.0, sx in -5.0f64..5.0, sy in -5.0f64..5.0, budget in 3usize..60,
    ) {
        let f = |p: [f64; 2]| (p[0] - cx).powi(2) + 3.0 * (p[1] - cy).powi(2) + (p[0] * p[1]).sin();
        let mut calls = 0;
        let m = minimize(|p| { calls += 1; f(p) }, [sx, sy], budget, 1e-8);
        prop_assert!(m.value <= f([sx, sy]));
        prop_assert!(m.evaluations <= budget && calls <= budget);
        prop_assert_eq!(m.value, f(m.point));
    }
}
