//! Document construction, leave-one-out samples and split bookkeeping.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::FeatureTable;
use super::reviews::{ItemMeta, ReviewRecord};
use super::split::{split, SplitName, SplitRatios};
use super::vocab::{Vocabulary, PAD};
use crate::error::{Error, Result};
use crate::modality::{Modality, ModalityMask};

/// A token sequence truncated to the configured maximum length.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub token_ids: Vec<u32>,
    /// Length before truncation.
    pub original_length: usize,
}

impl Document {
    /// Concatenates `parts` in order and keeps the first `l_max` tokens.
    pub fn concat<'a, I>(parts: I, l_max: usize) -> Self
    where
        I: IntoIterator<Item = &'a [u32]>,
    {
        let mut token_ids = Vec::new();
        let mut original_length = 0;
        for p in parts {
            original_length += p.len();
            let room = l_max.saturating_sub(token_ids.len());
            token_ids.extend_from_slice(&p[..room.min(p.len())]);
        }
        Document {
            token_ids,
            original_length,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.iter().all(|&t| t == PAD)
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub key: String,
    pub review_index: usize,
    pub user_id: String,
    pub item_id: String,
    pub user_doc: Document,
    pub item_doc: Document,
    pub meta_doc: Document,
    pub image_feat: Option<Arc<Vec<f64>>>,
    pub rating: f64,
    /// Data availability; a flag is false iff the matching payload is empty.
    pub mask: ModalityMask,
}

impl Sample {
    pub fn document(&self, m: Modality) -> Option<&Document> {
        match m {
            Modality::User => Some(&self.user_doc),
            Modality::Item => Some(&self.item_doc),
            Modality::Meta => Some(&self.meta_doc),
            Modality::Visual => None,
        }
    }
}

/// Everything read from disk for one domain.
#[derive(Debug, Clone, Default)]
pub struct RawData {
    pub reviews: Vec<ReviewRecord>,
    pub meta: BTreeMap<String, ItemMeta>,
    pub features: FeatureTable,
}

impl RawData {
    pub fn meta_text(m: &ItemMeta) -> String {
        format!("{} {}", m.title, m.description)
    }

    /// Keeps the first `n` reviews (file order).
    pub fn truncated(&self, n: usize) -> RawData {
        RawData {
            reviews: self.reviews.iter().take(n).cloned().collect(),
            meta: self.meta.clone(),
            features: self.features.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub min_freq: usize,
    pub l_max: usize,
    pub ratios: SplitRatios,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            min_freq: 20,
            l_max: 100,
            ratios: SplitRatios::default(),
            seed: 0,
        }
    }
}

/// Full (no exclusion) documents keyed by user, item and item metadata.
#[derive(Debug, Clone, Default)]
pub struct DocumentMaps {
    pub users: BTreeMap<String, Document>,
    pub items: BTreeMap<String, Document>,
    pub meta: BTreeMap<String, Document>,
}

pub fn build_documents(
    records: &[ReviewRecord],
    meta: &BTreeMap<String, ItemMeta>,
    vocab: &Vocabulary,
    l_max: usize,
) -> DocumentMaps {
    let tokens: Vec<Vec<u32>> = records.iter().map(|r| vocab.encode(&r.text)).collect();
    let mut by_user: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut by_item: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_user.entry(&r.user_id).or_default().push(i);
        by_item.entry(&r.item_id).or_default().push(i);
    }
    let collect = |m: BTreeMap<&str, Vec<usize>>| {
        m.into_iter()
            .map(|(k, idx)| (k.to_string(), Document::concat(idx.iter().map(|&i| tokens[i].as_slice()), l_max)))
            .collect()
    };
    DocumentMaps {
        users: collect(by_user),
        items: collect(by_item),
        meta: meta
            .iter()
            .map(|(k, m)| {
                let t = vocab.encode(&RawData::meta_text(m));
                (k.clone(), Document::concat([t.as_slice()], l_max))
            })
            .collect(),
    }
}

/// A domain's data bound to a vocabulary and a train/valid/test partition.
///
/// User and item documents are always drawn from training reviews only, and
/// a sample's own review is excluded from both of its documents.
#[derive(Debug, Clone)]
pub struct Dataset {
    raw: Arc<RawData>,
    vocab: Arc<Vocabulary>,
    review_tokens: Arc<Vec<Vec<u32>>>,
    meta_tokens: Arc<BTreeMap<String, Vec<u32>>>,
    splits: [Vec<usize>; 3],
    user_reviews: BTreeMap<String, Vec<usize>>,
    item_reviews: BTreeMap<String, Vec<usize>>,
    pub l_max: usize,
}

impl Dataset {
    /// Splits, then builds the vocabulary from training text only.
    pub fn build(raw: RawData, cfg: &DataConfig) -> Result<Self> {
        let (train, valid, test) = split((0..raw.reviews.len()).collect(), cfg.ratios, cfg.seed)?;
        let vocab = {
            let mut train_items: Vec<&str> = train.iter().map(|&i| raw.reviews[i].item_id.as_str()).collect();
            train_items.sort_unstable();
            train_items.dedup();
            let meta_texts: Vec<String> = train_items
                .iter()
                .filter_map(|i| raw.meta.get(*i))
                .map(RawData::meta_text)
                .collect();
            let texts = train
                .iter()
                .map(|&i| raw.reviews[i].text.as_str())
                .chain(meta_texts.iter().map(String::as_str));
            Vocabulary::build(texts, cfg.min_freq)
        };
        Ok(Self::assemble(raw, vocab, [train, valid, test], cfg.l_max))
    }

    /// Uses an existing vocabulary (e.g. a source domain's); unknown tokens
    /// map to UNK.
    pub fn with_vocabulary(raw: RawData, vocab: Vocabulary, cfg: &DataConfig) -> Result<Self> {
        let (train, valid, test) = split((0..raw.reviews.len()).collect(), cfg.ratios, cfg.seed)?;
        Ok(Self::assemble(raw, vocab, [train, valid, test], cfg.l_max))
    }

    fn assemble(raw: RawData, vocab: Vocabulary, mut splits: [Vec<usize>; 3], l_max: usize) -> Self {
        let review_tokens: Vec<Vec<u32>> = raw.reviews.iter().map(|r| vocab.encode(&r.text)).collect();
        let meta_tokens = raw
            .meta
            .iter()
            .map(|(k, m)| (k.clone(), vocab.encode(&RawData::meta_text(m))))
            .collect();
        for s in splits.iter_mut() {
            s.sort_unstable();
        }
        let mut user_reviews: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut item_reviews: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for &i in &splits[0] {
            let r = &raw.reviews[i];
            user_reviews.entry(r.user_id.clone()).or_default().push(i);
            item_reviews.entry(r.item_id.clone()).or_default().push(i);
        }
        Dataset {
            raw: Arc::new(raw),
            vocab: Arc::new(vocab),
            review_tokens: Arc::new(review_tokens),
            meta_tokens: Arc::new(meta_tokens),
            splits,
            user_reviews,
            item_reviews,
            l_max,
        }
    }

    pub fn raw(&self) -> &RawData {
        &self.raw
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn feature_dim(&self) -> usize {
        self.raw.features.dim
    }

    pub fn indices(&self, split: SplitName) -> &[usize] {
        &self.splits[split as usize]
    }

    pub fn review(&self, index: usize) -> &ReviewRecord {
        &self.raw.reviews[index]
    }

    pub fn review_tokens(&self, index: usize) -> &[u32] {
        &self.review_tokens[index]
    }

    /// Concatenated training reviews of `user`, minus `exclude`.
    pub fn user_document(&self, user: &str, exclude: Option<usize>) -> Result<Document> {
        let idx = self
            .user_reviews
            .get(user)
            .ok_or_else(|| Error::MissingEntity(format!("user `{user}`")))?;
        Ok(self.history_document(idx, exclude))
    }

    /// Concatenated (retained) training reviews of `item`, minus `exclude`.
    pub fn item_document(&self, item: &str, exclude: Option<usize>) -> Result<Document> {
        let idx = self
            .item_reviews
            .get(item)
            .ok_or_else(|| Error::MissingEntity(format!("item `{item}`")))?;
        Ok(self.history_document(idx, exclude))
    }

    pub fn meta_document(&self, item: &str) -> Result<Document> {
        let t = self
            .meta_tokens
            .get(item)
            .ok_or_else(|| Error::MissingEntity(format!("metadata for item `{item}`")))?;
        Ok(Document::concat([t.as_slice()], self.l_max))
    }

    fn history_document(&self, idx: &[usize], exclude: Option<usize>) -> Document {
        Document::concat(
            idx.iter()
                .filter(|&&i| Some(i) != exclude)
                .map(|&i| self.review_tokens[i].as_slice()),
            self.l_max,
        )
    }

    fn or_empty(r: Result<Document>) -> Result<Document> {
        match r {
            Err(Error::MissingEntity(_)) => Ok(Document::default()),
            other => other,
        }
    }

    pub fn sample(&self, index: usize) -> Result<Sample> {
        let r = &self.raw.reviews[index];
        let user_doc = Self::or_empty(self.user_document(&r.user_id, Some(index)))?;
        let item_doc = Self::or_empty(self.item_document(&r.item_id, Some(index)))?;
        let meta_doc = Self::or_empty(self.meta_document(&r.item_id))?;
        let image_feat = self.raw.features.get(&r.item_id).cloned();
        let mask = ModalityMask {
            u: !user_doc.is_empty(),
            o: !item_doc.is_empty(),
            m: !meta_doc.is_empty(),
            v: image_feat.is_some(),
        };
        Ok(Sample {
            key: format!("{}|{}|{index}", r.user_id, r.item_id),
            review_index: index,
            user_id: r.user_id.clone(),
            item_id: r.item_id.clone(),
            user_doc,
            item_doc,
            meta_doc,
            image_feat,
            rating: r.rating,
            mask,
        })
    }

    /// Samples of a split, skipping those with no modality at all.
    pub fn samples(&self, split: SplitName) -> Result<Vec<Sample>> {
        let mut out = Vec::with_capacity(self.indices(split).len());
        let mut dropped = 0;
        for &i in self.indices(split) {
            let s = self.sample(i)?;
            if s.mask.any() {
                out.push(s);
            } else {
                dropped += 1;
            }
        }
        if dropped > 0 {
            log::warn!("{dropped} {} samples have no modality and were skipped", split.as_str());
        }
        Ok(out)
    }

    pub fn train_ratings(&self) -> Vec<f64> {
        self.splits[0].iter().map(|&i| self.raw.reviews[i].rating).collect()
    }

    /// Ratings of the retained training reviews of each item.
    pub fn item_train_ratings(&self) -> BTreeMap<&str, Vec<f64>> {
        self.item_reviews
            .iter()
            .map(|(k, idx)| (k.as_str(), idx.iter().map(|&i| self.raw.reviews[i].rating).collect()))
            .collect()
    }

    pub fn item_review_count(&self, item: &str) -> usize {
        self.item_reviews.get(item).map_or(0, Vec::len)
    }

    /// Review indices behind an item's document.
    pub fn item_review_indices(&self, item: &str) -> &[usize] {
        self.item_reviews.get(item).map_or(&[], Vec::as_slice)
    }

    pub fn with_l_max(&self, l_max: usize) -> Dataset {
        Dataset {
            l_max,
            ..self.clone()
        }
    }

    /// Keeps at most `k` training reviews per item for item documents and
    /// per-item statistics (`None` keeps everything). The retained set for a
    /// smaller `k` is always a subset of the set for a larger `k`.
    pub fn sparsify_items(&self, k: Option<usize>, seed: u64) -> Dataset {
        let Some(k) = k else { return self.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut item_reviews = BTreeMap::new();
        for (item, idx) in &self.item_reviews {
            let mut order = idx.clone();
            order.shuffle(&mut rng);
            order.truncate(k);
            order.sort_unstable();
            item_reviews.insert(item.clone(), order);
        }
        Dataset {
            item_reviews,
            ..self.clone()
        }
    }

    /// CSV of `sample_key,split` in review order.
    pub fn split_manifest(&self) -> String {
        let mut rows: Vec<(usize, SplitName)> = Vec::new();
        for s in [SplitName::Train, SplitName::Valid, SplitName::Test] {
            rows.extend(self.indices(s).iter().map(|&i| (i, s)));
        }
        rows.sort_unstable();
        let mut out = String::from("sample_key,split\n");
        for (i, s) in rows {
            let r = &self.raw.reviews[i];
            out.push_str(&format!("{}|{}|{i},{}\n", r.user_id, r.item_id, s.as_str()));
        }
        out
    }
}
