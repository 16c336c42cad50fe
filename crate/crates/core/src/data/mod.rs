//! Ingestion, vocabulary, documents, features and splits.

pub mod dataset;
pub mod features;
pub mod reviews;
pub mod split;
pub mod synthetic;
pub mod vocab;

pub use dataset::{build_documents, DataConfig, Dataset, Document, DocumentMaps, RawData, Sample};
pub use features::{load_image_features, FeatureTable};
pub use reviews::{load_metadata, load_reviews, metadata_to_jsonl, reviews_to_jsonl, ItemMeta, LoadedReviews, ReviewRecord};
pub use split::{split, SplitName, SplitRatios};
pub use synthetic::{PlantedTruth, SyntheticConfig};
pub use vocab::{tokenize, Vocabulary, PAD, UNK};
