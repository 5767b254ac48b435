mod common;

use common::{auc_mismatches, brute_binary_auc, brute_macro_auc, rng};
use neurodiff::harness::{binary_auc, compute_auc};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn separated_scores_give_one() {
    let scores = [0.9, 0.1, 0.8, 0.2, 0.3, 0.7];
    let labels = [0, 0, 1];
    let col: Vec<f64> = (0..3).map(|i| scores[i * 2]).collect();
    let pos: Vec<bool> = labels.iter().map(|&l| l == 0).collect();
    assert_eq!(binary_auc(&col, &pos), Some(1.0));
}

#[test]
fn five_point_case_matches_pair_enumeration() {
    let scores = [0.2, 0.7, 0.7, 0.1, 0.9];
    let pos = [false, true, false, true, true];
    // pairs: (0.7>0.2) (0.7=0.7) (0.1<0.2) (0.1<0.7) (0.9>0.2) (0.9>0.7) → 3.5 of 6
    assert_eq!(binary_auc(&scores, &pos), Some(3.5 / 6.0));
    assert_eq!(binary_auc(&scores, &pos), brute_binary_auc(&scores, &pos));
}

#[test]
fn uniform_scores_are_at_chance() {
    let mut g = rng(17);
    let (n, k) = (10_000, 4);
    let scores: Vec<f64> = (0..n * k).map(|_| g.gen()).collect();
    let labels: Vec<usize> = (0..n).map(|_| g.gen_range(0..k)).collect();
    let auc = compute_auc(&scores, k, &labels).unwrap().macro_auc;
    assert!((auc - 0.5).abs() <= 0.02, "{auc}");
}

#[test]
fn random_instances_match_brute_force() {
    assert_eq!(auc_mismatches(300, 99), 0);
}

proptest! {
    #[test]
    fn rank_auc_equals_pair_count(
        rows in prop::collection::vec((0u8..6, 0usize..3), 2..40),
    ) {
        let k = 3;
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for (i, (s, l)) in rows.iter().enumerate() {
            for c in 0..k {
                scores.push(((*s as usize + i * c) % 7) as f64 / 7.0);
            }
            labels.push(*l);
        }
        let fast = compute_auc(&scores, k, &labels).ok().map(|r| r.macro_auc);
        let slow = brute_macro_auc(&scores, k, &labels);
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn auc_is_bounded_and_flips_under_negation(
        scores in prop::collection::vec(-5.0f64..5.0, 2..60),
        seed in any::<u64>(),
    ) {
        let mut g = rng(seed);
        let pos: Vec<bool> = scores.iter().map(|_| g.gen_bool(0.5)).collect();
        if let Some(a) = binary_auc(&scores, &pos) {
            prop_assert!((0.0..=1.0).contains(&a));
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let b = binary_auc(&neg, &pos).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }
}
