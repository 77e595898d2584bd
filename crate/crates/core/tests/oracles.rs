mod common;

use common::oracle::{classify_pairs, tukey_five, tukey_outliers};
use common::{arb_steps, fixture, session};
use evalcards_core::metrics::linearity_of_session;
use evalcards_core::survey::likert_box;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn likert_box_matches_depth_counting(ratings in prop::collection::vec(1u8..=5, 1..=50)) {
        let b = likert_box(&ratings).unwrap();
        prop_assert_eq!((b.min, b.lower_hinge, b.median, b.upper_hinge, b.max), tukey_five(&ratings));
        prop_assert_eq!(b.outliers, tukey_outliers(&ratings));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn linearity_matches_pairwise_classification(name in prop_oneof![Just("visus"), Just("tworavens")], steps in arb_steps(6, 60)) {
        let model = fixture(name);
        let s = session(&model, "u", "t", &steps);
        let order = model.canonical_order();
        let seq: Vec<&str> = s.records.iter().map(|r| r.comp_id.as_str()).collect();
        let (f, b, same) = classify_pairs(&seq, &order);
        let l = linearity_of_session(&s, &order).unwrap();
        prop_assert_eq!((l.forward_count, l.backward_count, l.self_count), (f, b, same));
        let expected = if f + b == 0 { 1.0 } else { f as f64 / (f + b) as f64 };
        prop_assert_eq!(l.value, expected);
    }
}

#[test]
fn oracle_agrees_with_hand_worked_lists() {
    assert_eq!(tukey_five(&[1, 2, 3, 4, 5]), (1.0, 2.0, 3.0, 4.0, 5.0));
    assert_eq!(tukey_five(&[1, 2, 3, 4]), (1.0, 1.5, 2.5, 3.5, 4.0));
    assert_eq!(tukey_five(&[4]), (4.0, 4.0, 4.0, 4.0, 4.0));
    assert_eq!(tukey_outliers(&[3, 3, 3, 3, 1, 5]), vec![1.0, 5.0]);
}
