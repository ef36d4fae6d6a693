//! Semantic feature directions in LLM token-embedding matrices.
//!
//! The crate covers the whole analysis path: loading embedding matrices
//! ([`embed_store`]), antonym lexicons and human rating tables ([`lexicon`]),
//! direction extraction, projection, whitening and token steering ([`axes`]),
//! correlational and factorial structure ([`structure`]), and the
//! antonym-association probe protocol used to measure steering side effects
//! against an external logits service ([`probe`]).
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.
//! Every reduction is performed in a fixed order, so results are bit-identical
//! across thread counts and with or without the feature.

pub mod axes;
pub mod embed_store;
pub mod error;
pub mod lexicon;
pub mod par;
pub mod probe;
pub mod report;
pub mod structure;

pub use axes::{
    apply_whitening, extract_all, extract_direction, fit_whitening, intervene, predicted_offtarget,
    project, FeatureDirection, InterventionSpec, PredictedOffTarget, ProjectionTable, Sign,
    WhitenedSpace,
};
pub use embed_store::{
    load_container, load_embeddings, load_word2vec_text, resolve_word, save_container,
    EmbeddingSpace, TokenResolution, Variant, Vocabulary,
};
pub use error::{Error, ErrorKind, Result};
pub use lexicon::{align, load_lexicon, load_survey, AlignedPanel, AntonymPair, FeatureLexicon, FeatureSpec, SurveyRatings};
pub use structure::{
    correspondence, direction_cosine_matrix, feature_correlation_matrix, pca, pearson,
    survey_compare, ColumnTable, CorrespondenceScore, MatrixKind, PcaResult, SquareMatrixReport,
};

/// Toolkit version recorded in run manifests and JSON reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
