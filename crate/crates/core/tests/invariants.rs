use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lrmm::data::{DataConfig, Dataset, SplitName, SyntheticConfig};
use lrmm::eval::{mae, rmse, Regime};
use lrmm::fusion::{kl_sparsity, regression_loss};
use lrmm::imputation::{apply_mask, sample_mask, MDropConfig};
use lrmm::ModalityMask;

fn dataset(seed: u64) -> Dataset {
    let raw = SyntheticConfig {
        n_reviews: 150,
        n_users: 20,
        n_items: 8,
        feature_dim: 4,
        seed,
        ..Default::default()
    }
    .generate()
    .0;
    Dataset::build(
        raw,
        &DataConfig {
            min_freq: 1,
            l_max: 12,
            seed,
            ..Default::default()
        },
    )
    .unwrap()
}

fn flags(bits: u8) -> ModalityMask {
    ModalityMask::from_flags([bits & 1 != 0, bits & 2 != 0, bits & 4 != 0, bits & 8 != 0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masks_keep_at_least_one_modality(p_m in 0.0f64..=1.0, seed in any::<u64>()) {
        let cfg = MDropConfig::with_rate(p_m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            prop_assert!(sample_mask(&cfg, &mut rng).count() >= cfg.min_kept);
        }
    }

    #[test]
    fn masking_is_idempotent(bits in 1u8..16, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slots: [Option<Vec<f64>>; 4] = std::array::from_fn(|_| {
            Some((0..3).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect())
        });
        let mask = flags(bits);
        let once = apply_mask(&slots, mask, 3).unwrap();
        let again = apply_mask(&once.clone().map(Some), mask, 3).unwrap();
        prop_assert_eq!(once, again);
    }

    #[test]
    fn regime_masks_compose_idempotently(bits in 0u8..16) {
        let base = flags(bits);
        for r in Regime::ALL {
            let once = base.and(&r.mask());
            prop_assert_eq!(once.and(&r.mask()), once);
        }
    }

    #[test]
    fn losses_are_non_negative(
        rows in proptest::collection::vec(proptest::collection::vec(0.001f64..0.999, 5), 1..8),
        rho in 0.01f64..0.99,
        pairs in proptest::collection::vec((-2.0f64..7.0, 1.0f64..5.0), 1..20),
        lambda in 0.0f64..1.0,
    ) {
        prop_assert!(kl_sparsity(&rows, rho).unwrap() >= -1e-12);
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let theta = [0.3, -0.2];
        prop_assert!(regression_loss(&p, &t, lambda, &[&theta], false).unwrap() >= 0.0);
        prop_assert!(rmse(&p, &t).unwrap() >= 0.0 && mae(&p, &t).unwrap() >= 0.0);
    }

    #[test]
    fn sparsify_is_monotone(seed in 0u64..50, small in 0usize..4, extra in 0usize..4) {
        let ds = dataset(seed % 5);
        let big = small + extra;
        let (a, b) = (ds.sparsify_items(Some(small), seed), ds.sparsify_items(Some(big), seed));
        for item in ds.item_train_ratings().keys() {
            let (sa, sb) = (a.item_review_indices(item), b.item_review_indices(item));
            prop_assert!(sa.len() <= small);
            prop_assert!(sa.iter().all(|i| sb.contains(i)));
        }
    }
}

#[test]
fn sparsify_extremes() {
    let ds = dataset(1);
    let all = ds.sparsify_items(None, 3);
    assert_eq!(all.split_manifest(), ds.split_manifest());
    for item in ds.item_train_ratings().keys() {
        assert_eq!(all.item_review_indices(item), ds.item_review_indices(item));
    }
    let none = ds.sparsify_items(Some(0), 3);
    assert!(none.samples(SplitName::Train).unwrap().iter().all(|s| !s.mask.o));
    let one = ds.sparsify_items(Some(1), 3);
    assert!(ds.item_train_ratings().keys().all(|i| one.item_review_count(i) <= 1));
}
