//! Property-based tests for the store, scoring and alignment invariants.

mod common;

use cebench::alignment::{self, ScoredModel};
use cebench::scoring::{self, Pooling, ScoreConfig};
use cebench::store::{self, ActivationArchive, StoryActivations, TokenActivation};
use common::*;
use proptest::prelude::*;

fn token_strategy(d: u32) -> impl Strategy<Value = TokenActivation> {
    proptest::collection::btree_map(0..d, 0.0f32..5.0, 0..=d as usize)
        .prop_map(|m| TokenActivation::new(m.into_iter().collect()).unwrap())
}

fn story_strategy(d: u32) -> impl Strategy<Value = StoryActivations> {
    proptest::collection::vec(token_strategy(d), 1..6).prop_map(StoryActivations::new)
}

fn models(p: &[f64], r: &[f64]) -> Vec<ScoredModel> {
    p.iter()
        .zip(r)
        .enumerate()
        .map(|(i, (&a, &b))| ScoredModel::new(i.to_string(), a, b))
        .collect()
}

fn score_pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..10).prop_flat_map(|n| {
        (
            proptest::collection::vec(-5.0f64..5.0, n),
            proptest::collection::vec(-5.0f64..5.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn story_mean_is_permutation_equivariant(
        (d, story, seed) in (1u32..12).prop_flat_map(|d| (Just(d), story_strategy(d), any::<u64>()))
    ) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let perm = random_permutation(&mut rng, d as usize);
        let permuted = StoryActivations::new(story.tokens.iter().map(|t| {
            let mut e: Vec<(u32, f32)> = t.entries().iter().map(|&(j, v)| (perm[j as usize], v)).collect();
            e.sort_by_key(|x| x.0);
            TokenActivation::new(e).unwrap()
        }).collect());
        let v = store::story_mean(&story, d as usize).unwrap();
        let pv = store::story_mean(&permuted, d as usize).unwrap();
        for (j, &to) in perm.iter().enumerate() {
            prop_assert_eq!(v.0[j], pv.0[to as usize]);
        }
    }

    #[test]
    fn story_mean_ignores_repetition(
        (d, story, k) in (1u32..12).prop_flat_map(|d| (Just(d), story_strategy(d), 2usize..4))
    ) {
        let repeated = StoryActivations::new(
            (0..k).flat_map(|_| story.tokens.iter().cloned()).collect(),
        );
        let v = store::story_mean(&story, d as usize).unwrap();
        let rv = store::story_mean(&repeated, d as usize).unwrap();
        for (a, b) in v.0.iter().zip(&rv.0) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            prop_assert!(*b >= 0.0);
        }
    }

    #[test]
    fn archive_bytes_round_trip(seed in any::<u64>()) {
        let a = random_archive(seed, &SMALL);
        let bytes = a.to_bytes();
        let back = ActivationArchive::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        prop_assert_eq!(back, a);
    }

    #[test]
    fn truncated_archives_never_panic(seed in any::<u64>(), cut in 0usize..400) {
        let bytes = random_archive(seed, &SMALL).to_bytes();
        let cut = cut.min(bytes.len().saturating_sub(1));
        prop_assert!(ActivationArchive::from_bytes(&bytes[..cut]).is_err());
    }

    #[test]
    fn evaluation_matches_oracle(seed in any::<u64>(), pooling in 0usize..3, alpha in 0.0f64..2.0) {
        let a = random_archive(seed, &SMALL);
        let cfg = ScoreConfig { alpha, pooling: Pooling::ALL[pooling], ..Default::default() };
        let got = scoring::evaluate_sae(&a, &cfg).unwrap();
        let want = oracle_evaluate(&a, &cfg);
        prop_assert!((got.interpretability - want.interpretability).abs() <= 1e-9);
        prop_assert_eq!(got.interpretability, got.contrastive_agg + got.independence_agg - alpha * got.sparsity);
    }

    #[test]
    fn crpr_is_symmetric((p, r) in score_pairs()) {
        let forward = alignment::crpr(&models(&p, &r)).unwrap();
        let backward = alignment::crpr(&models(&r, &p)).unwrap();
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn correlations_are_symmetric_and_bounded((p, r) in score_pairs()) {
        let m = models(&p, &r);
        let t = models(&r, &p);
        if let (Ok(a), Ok(b)) = (alignment::spearman(&m), alignment::spearman(&t)) {
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a));
        }
        if let (Ok(a), Ok(b)) = (alignment::pearson(&m), alignment::pearson(&t)) {
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn rank_metrics_ignore_monotone_transforms((p, r) in score_pairs()) {
        let cubed: Vec<f64> = p.iter().map(|x| x.powi(3) + 7.0).collect();
        let base = models(&p, &r);
        let moved = models(&cubed, &r);
        prop_assert_eq!(alignment::crpr(&base).unwrap(), alignment::crpr(&moved).unwrap());
        if let (Ok(a), Ok(b)) = (alignment::spearman(&base), alignment::spearman(&moved)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn pearson_ignores_positive_affine_maps((p, r) in score_pairs(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let moved: Vec<f64> = p.iter().map(|x| scale * x + shift).collect();
        if let (Ok(a), Ok(b)) = (alignment::pearson(&models(&p, &r)), alignment::pearson(&models(&moved, &r))) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn rank_pearson_equals_sum_d2_formula_without_ties(n in 2usize..12, seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p: Vec<f64> = random_permutation(&mut rng, n).into_iter().map(f64::from).collect();
        let r: Vec<f64> = random_permutation(&mut rng, n).into_iter().map(f64::from).collect();
        let nn = n as f64;
        let sd2: f64 = p.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum();
        let formula = 1.0 - 6.0 * sd2 / (nn * (nn * nn - 1.0));
        let got = alignment::spearman(&models(&p, &r)).unwrap();
        prop_assert!((got - formula).abs() <= 1e-12);
    }
}
