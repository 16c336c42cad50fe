//! Synthetic multimodal review corpora with a planted rating model.
//!
//! Every user has a discrete bias level and every item a discrete quality
//! level. The rating is linear in both:
//!
//! `rating = clamp(3 + user_weight * user_level + item_weight * item_level + noise, 1, 5)`
//!
//! with levels spread evenly over `[-1, 1]`. The user level is written into
//! every review the user authors (so it reaches the `u` document); the item
//! level is written into its reviews, its metadata and its image features
//! (so `o`, `m` and `v` all carry it). Informative tokens lead each review.
//!
//! With `user_item_correlation > 0`, users tend to review items whose level
//! matches their own, so item-side modalities also say something about the
//! user.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::RawData;
use super::features::FeatureTable;
use super::reviews::{ItemMeta, ReviewRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_reviews: usize,
    pub n_levels: usize,
    pub synonyms: usize,
    pub filler_vocab: usize,
    pub filler_per_review: usize,
    pub n_categories: usize,
    pub feature_dim: usize,
    pub user_weight: f64,
    pub item_weight: f64,
    pub rating_noise: f64,
    pub feature_noise: f64,
    /// Fraction of items without an image feature vector.
    pub missing_image_rate: f64,
    /// Fraction of items without metadata.
    pub missing_meta_rate: f64,
    /// Probability that a review goes to an item at the author's level.
    pub user_item_correlation: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_users: 200,
            n_items: 100,
            n_reviews: 2000,
            n_levels: 5,
            synonyms: 3,
            filler_vocab: 30,
            filler_per_review: 6,
            n_categories: 4,
            feature_dim: 32,
            user_weight: 0.9,
            item_weight: 1.0,
            rating_noise: 0.1,
            feature_noise: 0.1,
            missing_image_rate: 0.0,
            missing_meta_rate: 0.0,
            user_item_correlation: 0.0,
            seed: 7,
        }
    }
}

/// Latent levels behind a generated corpus, for oracle computations.
#[derive(Debug, Clone, Default)]
pub struct PlantedTruth {
    pub user_level: BTreeMap<String, f64>,
    pub item_level: BTreeMap<String, f64>,
}

impl SyntheticConfig {
    fn level_value(&self, level: usize) -> f64 {
        if self.n_levels <= 1 {
            0.0
        } else {
            -1.0 + 2.0 * level as f64 / (self.n_levels - 1) as f64
        }
    }

    /// Noise-free planted rating before clamping.
    pub fn planted_rating(&self, user_level: f64, item_level: f64) -> f64 {
        3.0 + self.user_weight * user_level + self.item_weight * item_level
    }

    pub fn generate(&self) -> (RawData, PlantedTruth) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.rating_noise.max(0.0)).expect("valid std");
        let fnoise = Normal::new(0.0, self.feature_noise.max(0.0)).expect("valid std");

        let users: Vec<(String, usize)> = (0..self.n_users)
            .map(|k| (format!("U{k:05}"), rng.random_range(0..self.n_levels)))
            .collect();
        let items: Vec<(String, usize, usize)> = (0..self.n_items)
            .map(|k| {
                (
                    format!("I{k:05}"),
                    rng.random_range(0..self.n_levels),
                    rng.random_range(0..self.n_categories.max(1)),
                )
            })
            .collect();

        let pick = |rng: &mut ChaCha8Rng, prefix: &str, level: usize| {
            format!("{prefix}{level}x{}", rng.random_range(0..self.synonyms.max(1)))
        };
        let mut by_level: Vec<Vec<usize>> = vec![Vec::new(); self.n_levels.max(1)];
        for (k, (_, l, _)) in items.iter().enumerate() {
            by_level[*l].push(k);
        }

        let filler = |rng: &mut ChaCha8Rng| format!("w{}", rng.random_range(0..self.filler_vocab.max(1)));

        let mut reviews = Vec::with_capacity(self.n_reviews);
        for k in 0..self.n_reviews {
            // every user and item appears at least once when counts allow
            let (uid, ul) = if k < self.n_users {
                &users[k]
            } else {
                &users[rng.random_range(0..self.n_users)]
            };
            let item_idx = if k < self.n_items {
                k
            } else if self.user_item_correlation > 0.0
                && !by_level[*ul].is_empty()
                && rng.random::<f64>() < self.user_item_correlation
            {
                let same = &by_level[*ul];
                same[rng.random_range(0..same.len())]
            } else {
                rng.random_range(0..self.n_items)
            };
            let (iid, il, _) = &items[item_idx];
            let mut words = vec![pick(&mut rng, "u", *ul), pick(&mut rng, "q", *il)];
            words.push(pick(&mut rng, "u", *ul));
            words.push(pick(&mut rng, "q", *il));
            for _ in 0..self.filler_per_review {
                words.push(filler(&mut rng));
            }
            let clean = self.planted_rating(self.level_value(*ul), self.level_value(*il));
            let rating = (clean + noise.sample(&mut rng)).clamp(1.0, 5.0);
            reviews.push(ReviewRecord {
                user_id: uid.clone(),
                item_id: iid.clone(),
                rating,
                text: words.join(" "),
            });
        }

        let mut meta = BTreeMap::new();
        let mut features = FeatureTable::new(self.feature_dim);
        // fixed random directions: one for quality, one per category
        let dirs: Vec<Vec<f64>> = (0..=self.n_categories.max(1))
            .map(|_| {
                let v: Vec<f64> = (0..self.feature_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.into_iter().map(|x| x / n * (self.feature_dim as f64).sqrt() * 0.5).collect()
            })
            .collect();
        for (iid, il, cat) in &items {
            if rng.random::<f64>() >= self.missing_meta_rate {
                let title = format!("{} {} c{cat}", pick(&mut rng, "t", *il), pick(&mut rng, "t", *il));
                let description = (0..4).map(|_| filler(&mut rng)).collect::<Vec<_>>().join(" ");
                meta.insert(iid.clone(), ItemMeta { title, description });
            }
            if rng.random::<f64>() >= self.missing_image_rate {
                let q = self.level_value(*il);
                let v = (0..self.feature_dim)
                    .map(|j| q * dirs[0][j] + 0.5 * dirs[1 + cat][j] + fnoise.sample(&mut rng))
                    .map(|x| x as f32 as f64)
                    .collect();
                features.insert(iid, v).expect("dim matches");
            }
        }

        let truth = PlantedTruth {
            user_level: users.iter().map(|(u, l)| (u.clone(), self.level_value(*l))).collect(),
            item_level: items.iter().map(|(i, l, _)| (i.clone(), self.level_value(*l))).collect(),
        };
        (
            RawData {
                reviews,
                meta,
                features,
            },
            truth,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticConfig {
            n_reviews: 50,
            ..Default::default()
        };
        let (a, _) = cfg.generate();
        let (b, _) = cfg.generate();
        assert_eq!(a.reviews, b.reviews);
        assert_eq!(a.features, b.features);
    }

    #[test]
    fn correlation_aligns_user_and_item_levels() {
        let agree = |c: f64| {
            let cfg = SyntheticConfig {
                user_item_correlation: c,
                ..Default::default()
            };
            let (raw, truth) = cfg.generate();
            let n = raw
                .reviews
                .iter()
                .filter(|r| truth.user_level[&r.user_id] == truth.item_level[&r.item_id])
                .count();
            n as f64 / raw.reviews.len() as f64
        };
        assert!(agree(0.0) < 0.3);
        assert!(agree(0.8) > 0.7);
    }

    #[test]
    fn ratings_follow_planted_model_without_noise() {
        let cfg = SyntheticConfig {
            n_reviews: 200,
            rating_noise: 0.0,
            ..Default::default()
        };
        let (raw, truth) = cfg.generate();
        for r in &raw.reviews {
            let expected = cfg.planted_rating(truth.user_level[&r.user_id], truth.item_level[&r.item_id]);
            assert!((r.rating - expected.clamp(1.0, 5.0)).abs() < 1e-12);
        }
    }
}
