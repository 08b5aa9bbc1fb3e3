//! Algebraic properties of the metrics plus recomputation of published
//! metric values from their own precision/recall pairs.

use facemt_core::dataset::Label;
use facemt_core::metrics::{bias_factor, confusion, f1_score, metric_set, ConfusionMatrix, Favored};
use proptest::prelude::*;

fn label() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::Fake), Just(Label::Real)]
}

fn pairs(max: usize) -> impl Strategy<Value = Vec<(Label, Label)>> {
    prop::collection::vec((label(), label()), 1..max)
}

/// Independent recount straight from the definitions.
fn recount(p: &[(Label, Label)]) -> (u64, u64, u64, u64) {
    let c = |pred: Label, truth: Label| p.iter().filter(|&&x| x == (pred, truth)).count() as u64;
    (c(Label::Fake, Label::Fake), c(Label::Fake, Label::Real), c(Label::Real, Label::Real), c(Label::Real, Label::Fake))
}

proptest! {
    #[test]
    fn counts_match_a_brute_force_recount(p in pairs(60)) {
        let cm = confusion(p.iter().copied()).unwrap();
        prop_assert_eq!((cm.tp, cm.fp, cm.tn, cm.r#fn), recount(&p));
    }

    #[test]
    fn merging_disjoint_sets_adds_counts(a in pairs(40), b in pairs(40)) {
        let whole: Vec<_> = a.iter().chain(&b).copied().collect();
        prop_assert_eq!(confusion(whole).unwrap(), confusion(a).unwrap() + confusion(b).unwrap());
    }

    #[test]
    fn f1_lies_between_precision_and_recall(p in pairs(60)) {
        let m = metric_set(&confusion(p).unwrap());
        if let (Some(f1), Some(pr), Some(rc)) = (m.f1, m.precision, m.recall) {
            prop_assert!(f1 >= pr.min(rc) - 1e-9 && f1 <= pr.max(rc) + 1e-9);
        }
        let acc = m.accuracy.unwrap();
        prop_assert!((0.0..=100.0).contains(&acc));
    }

    #[test]
    fn accuracy_is_exactly_correct_over_total(tp in 0u64..50, fp in 0u64..50, tn in 0u64..50, fn_ in 0u64..50) {
        let cm = ConfusionMatrix { tp, fp, tn, r#fn: fn_ };
        prop_assume!(cm.total() > 0);
        prop_assert_eq!(cm.metrics().accuracy, Some((tp + tn) as f64 * 100.0 / cm.total() as f64));
        prop_assert_eq!(cm.metrics(), metric_set(&cm));
    }

    #[test]
    fn bias_is_symmetric_and_zero_only_on_ties(a in 0.0f64..100.0, b in 0.0f64..100.0) {
        let x = bias_factor(a, b);
        let y = bias_factor(b, a);
        prop_assert_eq!(x.bias_factor, y.bias_factor);
        prop_assert!(x.bias_factor >= 0.0);
        prop_assert_eq!(x.bias_factor == 0.0, a == b);
        prop_assert_eq!(x.favored_gender == Favored::None, a == b);
    }
}

/// (precision, recall, published F1) for male and female rows of eight
/// evaluation settings.
const PUBLISHED_F1: [(f64, f64, f64); 16] = [
    (83.71, 90.16, 86.82),
    (88.59, 92.2, 90.36),
    (93.62, 28.3, 43.46),
    (95.61, 44.22, 60.47),
    (94.11, 6.5, 12.16),
    (97.96, 24.34, 38.99),
    (96.25, 7.81, 14.45),
    (98.58, 28.1, 43.73),
    (92.11, 21.51, 34.88),
    (95.6, 50.71, 66.27),
    (82.21, 86.21, 84.16),
    (87.94, 90.67, 89.28),
    (80.83, 85.18, 82.95),
    (87.84, 89.84, 88.83),
    (94.23, 10.15, 18.33),
    (97.57, 33.36, 49.72),
];

#[test]
fn published_f1_cells_follow_from_precision_and_recall() {
    for (p, r, want) in PUBLISHED_F1 {
        let got = f1_score(p, r).unwrap();
        assert!((got - want).abs() <= 0.02, "P={p} R={r}: {got:.4} vs {want}");
    }
}

#[test]
fn published_bias_factors() {
    for (m, f, want) in [(83.35, 87.44, 4.09), (83.02, 87.08, 4.06), (83.22, 87.22, 4.00), (86.36, 90.1, 3.74)] {
        let b = bias_factor(m, f);
        assert_eq!(format!("{:.2}", b.bias_factor), format!("{want:.2}"));
        assert_eq!(b.favored_gender, Favored::Female);
    }
}
