//! Antonym-pair lexicons and human survey ratings.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed_store::{resolve_word, EmbeddingSpace};
use crate::error::{Error, Result};

/// One antonym pair, positive pole first. Serialized as a two-element array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(String, String)", into = "(String, String)")]
pub struct AntonymPair {
    pub positive: String,
    pub negative: String,
}

impl AntonymPair {
    pub fn new(positive: impl Into<String>, negative: impl Into<String>) -> Self {
        Self { positive: positive.into(), negative: negative.into() }
    }
}

impl From<(String, String)> for AntonymPair {
    fn from((positive, negative): (String, String)) -> Self {
        Self { positive, negative }
    }
}

impl From<AntonymPair> for (String, String) {
    fn from(p: AntonymPair) -> Self {
        (p.positive, p.negative)
    }
}

/// A bipolar semantic feature defined by its antonym pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub positive_pole: String,
    pub pairs: Vec<AntonymPair>,
    /// Survey scale this feature is compared against. Defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<String>,
    /// Set when a high survey rating means the negative pole.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reverse_scale: bool,
}

impl FeatureSpec {
    pub fn new(name: impl Into<String>, pairs: Vec<AntonymPair>) -> Self {
        let positive_pole = pairs.first().map(|p| p.positive.clone()).unwrap_or_default();
        Self { name: name.into(), positive_pole, pairs, scale: None, reverse_scale: false }
    }

    pub fn scale_name(&self) -> &str {
        self.scale.as_deref().unwrap_or(&self.name)
    }

    fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Validation("feature with empty name".into()));
        }
        if self.pairs.is_empty() {
            return Err(Error::Validation(format!("feature `{}` has no antonym pairs", self.name)));
        }
        for p in &self.pairs {
            if p.positive == p.negative {
                return Err(Error::Validation(format!(
                    "feature `{}`: pair ({:?}, {:?}) has identical poles",
                    self.name, p.positive, p.negative
                )));
            }
            if p.positive.is_empty() || p.negative.is_empty() {
                return Err(Error::Validation(format!("feature `{}`: empty antonym", self.name)));
            }
        }
        if self.positive_pole != self.pairs[0].positive {
            return Err(Error::Validation(format!(
                "feature `{}`: positive_pole {:?} must be the first word of the first pair",
                self.name, self.positive_pole
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLexicon {
    features: Vec<FeatureSpec>,
}

#[derive(Deserialize)]
struct RawLexicon {
    features: Vec<RawFeature>,
}

#[derive(Deserialize)]
struct RawFeature {
    name: String,
    #[serde(default)]
    positive_pole: Option<String>,
    pairs: Vec<AntonymPair>,
    #[serde(default)]
    scale: Option<String>,
    #[serde(default)]
    reverse_scale: bool,
}

#[derive(Serialize)]
struct LexiconOut<'a> {
    features: &'a [FeatureSpec],
}

impl FeatureLexicon {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &features {
            f.validate()?;
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Validation(format!("duplicate feature name `{}`", f.name)));
            }
        }
        Ok(Self { features })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawLexicon =
            serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line() as u64, message: e.to_string() })?;
        let features = raw
            .features
            .into_iter()
            .map(|f| {
                let positive_pole = f
                    .positive_pole
                    .unwrap_or_else(|| f.pairs.first().map(|p| p.positive.clone()).unwrap_or_default());
                FeatureSpec { name: f.name, positive_pole, pairs: f.pairs, scale: f.scale, reverse_scale: f.reverse_scale }
            })
            .collect();
        Self::new(features)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LexiconOut { features: &self.features }).expect("lexicon serializes")
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }
}

/// Illustrative 28-feature lexicon shipped with the crate. It is a
/// reconstruction for demonstrations and tests, not a curated word list.
pub const RECONSTRUCTED_LEXICON_JSON: &str = include_str!("../data/lexicon_reconstructed.json");

pub fn reconstructed_lexicon() -> FeatureLexicon {
    FeatureLexicon::from_json(RECONSTRUCTED_LEXICON_JSON).expect("bundled lexicon is valid")
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<FeatureLexicon> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FeatureLexicon::from_json(&text)
}

/// Human mean ratings, word x scale, with absent cells as `None`.
///
/// Words and scales are kept in sorted order so the table does not depend on
/// the row order of the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyRatings {
    words: Vec<String>,
    scales: Vec<String>,
    values: Vec<Option<f64>>,
}

impl SurveyRatings {
    pub fn new(words: Vec<String>, scales: Vec<String>, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != words.len() * scales.len() {
            return Err(Error::Validation("survey matrix shape does not match labels".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("survey contains a non-finite rating".into()));
        }
        Ok(Self { words, scales, values })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn scales(&self) -> &[String] {
        &self.scales
    }

    pub fn get(&self, word: usize, scale: usize) -> Option<f64> {
        self.values[word * self.scales.len() + scale]
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.words.iter().position(|w| w == word)
    }

    pub fn scale_index(&self, scale: &str) -> Option<usize> {
        self.scales.iter().position(|s| s == scale)
    }

    pub fn rating(&self, word: &str, scale: &str) -> Option<f64> {
        self.get(self.word_index(word)?, self.scale_index(scale)?)
    }

    pub fn has_any_rating(&self, word: usize) -> bool {
        (0..self.scales.len()).any(|s| self.get(word, s).is_some())
    }

    /// Sub-table with the given words, in the given order. Unknown words are
    /// skipped.
    pub fn restrict_words(&self, words: &[String]) -> SurveyRatings {
        let index: HashMap<&str, usize> = self.words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let mut kept = Vec::new();
        let mut values = Vec::new();
        for w in words {
            if let Some(&i) = index.get(w.as_str()) {
                kept.push(w.clone());
                values.extend_from_slice(&self.values[i * self.scales.len()..(i + 1) * self.scales.len()]);
            }
        }
        SurveyRatings { words: kept, scales: self.scales.clone(), values }
    }

    /// Re-expresses the survey in feature terms: one column per lexicon
    /// feature whose scale is present, named after the feature, negated when
    /// the feature declares a reversed scale.
    pub fn as_features(&self, lexicon: &FeatureLexicon) -> Result<SurveyRatings> {
        let mut cols = Vec::new();
        for f in lexicon.features() {
            if let Some(s) = self.scale_index(f.scale_name()) {
                cols.push((f.name.clone(), s, if f.reverse_scale { -1.0 } else { 1.0 }));
            }
        }
        if cols.is_empty() {
            return Err(Error::Alignment("no lexicon feature matches a survey scale".into()));
        }
        let mut values = Vec::with_capacity(self.words.len() * cols.len());
        for w in 0..self.words.len() {
            for &(_, s, sign) in &cols {
                values.push(self.get(w, s).map(|v| sign * v));
            }
        }
        Ok(SurveyRatings {
            words: self.words.clone(),
            scales: cols.into_iter().map(|(n, _, _)| n).collect(),
            values,
        })
    }
}

pub fn load_survey(path: impl AsRef<Path>) -> Result<SurveyRatings> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_survey(file)
}

/// Parses `word,scale,mean_rating` CSV. Repeated (word, scale) rows are
/// averaged; empty ratings are treated as missing.
pub fn read_survey<R: Read>(reader: R) -> Result<SurveyRatings> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != ["word", "scale", "mean_rating"] {
        return Err(Error::Parse { line: 1, message: "header must be word,scale,mean_rating".into() });
    }
    let mut cells: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    let mut words = std::collections::BTreeSet::new();
    let mut scales = std::collections::BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 3 {
            return Err(Error::Parse { line, message: format!("expected 3 fields, found {}", rec.len()) });
        }
        let (word, scale, raw) = (&rec[0], &rec[1], &rec[2]);
        if word.is_empty() || scale.is_empty() {
            return Err(Error::Parse { line, message: "empty word or scale".into() });
        }
        words.insert(word.to_string());
        scales.insert(scale.to_string());
        if raw.is_empty() {
            continue;
        }
        let v: f64 = raw.parse().map_err(|_| Error::Parse { line, message: format!("non-numeric rating {raw:?}") })?;
        if !v.is_finite() {
            return Err(Error::Parse { line, message: format!("non-finite rating {raw:?}") });
        }
        cells.entry((word.to_string(), scale.to_string())).or_default().push(v);
    }
    let words: Vec<String> = words.into_iter().collect();
    let scales: Vec<String> = scales.into_iter().collect();
    let scale_idx: HashMap<&str, usize> = scales.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let word_idx: HashMap<&str, usize> = words.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut values = vec![None; words.len() * scales.len()];
    for ((w, s), mut vals) in cells {
        // sorted before summing so the mean is independent of row order
        vals.sort_by(f64::total_cmp);
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        values[word_idx[w.as_str()] * scales.len() + scale_idx[s.as_str()]] = Some(mean);
    }
    SurveyRatings::new(words, scales, values)
}

/// Survey words that resolve to a single token and carry at least one rating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlignedPanel {
    pub words: Vec<String>,
    pub token_ids: Vec<usize>,
}

impl AlignedPanel {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn rows(&self) -> Vec<(String, usize)> {
        self.words.iter().cloned().zip(self.token_ids.iter().copied()).collect()
    }
}

pub fn align(space: &EmbeddingSpace, survey: &SurveyRatings) -> Result<AlignedPanel> {
    let mut words = Vec::new();
    let mut token_ids = Vec::new();
    for (i, w) in survey.words().iter().enumerate() {
        if !survey.has_any_rating(i) {
            continue;
        }
        if let Some(id) = resolve_word(space, w).token_id {
            words.push(w.clone());
            token_ids.push(id);
        }
    }
    if words.is_empty() {
        return Err(Error::Alignment("no survey word resolves to a single token".into()));
    }
    Ok(AlignedPanel { words, token_ids })
}
