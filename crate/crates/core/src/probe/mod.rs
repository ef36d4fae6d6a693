//! Antonym-association probes against a logits service.
//!
//! For a word and an antonym pair the model is asked, as a chat exchange with
//! an assistant prefill, which of the two antonyms it associates with the
//! word. The two candidates' log-probabilities are turned into a two-way
//! normalized probability. Averaging the positive antonym's share over all
//! pairs of a feature and both presentation orders gives the word's
//! normalized association with the feature's positive pole.
//!
//! Steering experiments repeat the probes with one token's embedding row
//! replaced (sent as an override), and relate the change on every other
//! feature to the cosine between the two feature directions.

mod client;
pub mod stub;
pub mod wire;

pub use client::HttpLogitsClient;
pub use wire::{ChatMessage, EmbeddingOverride, ScoreRequest};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::axes::{extract_all, steer_vector, FeatureDirection, Sign};
use crate::embed_store::{resolve_word, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::lexicon::{FeatureLexicon, FeatureSpec};
use crate::par;
use crate::structure::{fit_line, LineFit};

/// Anything that can return continuation log-probabilities for candidates.
///
/// Implementations return one log-probability per candidate, in request
/// order; `f64::NEG_INFINITY` stands for probability zero.
pub trait LogitsClient: Sync {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>>;
}

impl<T: LogitsClient + ?Sized + Send> LogitsClient for std::sync::Arc<T> {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>> {
        (**self).score(request)
    }
}

pub fn user_question(word: &str, first: &str, second: &str) -> String {
    format!(
        "Do you associate {word} more with {first} or {second}? Please select one of these two words with no formatting."
    )
}

pub fn assistant_prefill(word: &str, first: &str, second: &str) -> String {
    format!("Between {first} or {second}, I think {word} is more")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbePrompt {
    pub word: String,
    pub antonym_first: String,
    pub antonym_second: String,
    /// Whether `antonym_first` is the feature's positive antonym.
    pub positive_first: bool,
    pub messages: Vec<ChatMessage>,
    pub prefill: String,
}

impl ProbePrompt {
    pub fn new(word: &str, first: &str, second: &str, positive_first: bool) -> Self {
        Self {
            word: word.to_string(),
            antonym_first: first.to_string(),
            antonym_second: second.to_string(),
            positive_first,
            messages: vec![ChatMessage::user(user_question(word, first, second))],
            prefill: assistant_prefill(word, first, second),
        }
    }

    pub fn request(&self, overrides: &[EmbeddingOverride]) -> ScoreRequest {
        ScoreRequest {
            messages: self.messages.clone(),
            prefill: self.prefill.clone(),
            candidates: vec![self.antonym_first.clone(), self.antonym_second.clone()],
            embedding_overrides: overrides.to_vec(),
            first_token_only: false,
        }
    }
}

/// Two prompts per antonym pair: positive first, then negative first.
pub fn build_prompts(word: &str, feature: &FeatureSpec) -> Vec<ProbePrompt> {
    feature
        .pairs
        .iter()
        .flat_map(|p| {
            [
                ProbePrompt::new(word, &p.positive, &p.negative, true),
                ProbePrompt::new(word, &p.negative, &p.positive, false),
            ]
        })
        .collect()
}

/// Normalizes two log-probabilities into probabilities summing to one.
pub fn normalize_pair(l_first: f64, l_second: f64) -> Result<(f64, f64)> {
    if l_first.is_nan() || l_second.is_nan() || l_first == f64::INFINITY || l_second == f64::INFINITY {
        return Err(Error::Protocol(format!("invalid log-probabilities ({l_first}, {l_second})")));
    }
    let m = l_first.max(l_second);
    if m == f64::NEG_INFINITY {
        return Err(Error::Protocol("both candidates have zero probability".into()));
    }
    let (a, b) = ((l_first - m).exp(), (l_second - m).exp());
    Ok((a / (a + b), b / (a + b)))
}

/// Scores one prompt, returning `(p_first, p_second)` normalized to sum to 1.
pub fn score_pair(
    client: &dyn LogitsClient,
    prompt: &ProbePrompt,
    overrides: &[EmbeddingOverride],
) -> Result<(f64, f64)> {
    let logprobs = client.score(&prompt.request(overrides))?;
    match logprobs.as_slice() {
        [a, b] => normalize_pair(*a, *b),
        other => Err(Error::Protocol(format!("expected 2 log-probabilities, got {}", other.len()))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptScore {
    pub antonym_first: String,
    pub antonym_second: String,
    pub p_first: f64,
    pub p_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub word: String,
    pub feature: String,
    /// Mean share of the positive antonym over pairs and both orderings.
    pub p_norm_positive: f64,
    /// Always `2 * pairs_used`.
    pub n_prompts: usize,
    pub per_prompt: Vec<PromptScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Probes one word on one feature.
///
/// A pair whose prompts fail is left out (both orderings) and noted in
/// `warnings`; if every pair fails the last error is returned. Capability
/// errors abort immediately.
pub fn probe_feature(
    client: &dyn LogitsClient,
    word: &str,
    feature: &FeatureSpec,
    overrides: &[EmbeddingOverride],
) -> Result<ProbeResult> {
    let prompts = build_prompts(word, feature);
    let mut per_prompt = Vec::with_capacity(prompts.len());
    let mut positive_shares = Vec::with_capacity(prompts.len());
    let mut warnings = Vec::new();
    let mut last_err = None;
    for (pair, both) in feature.pairs.iter().zip(prompts.chunks_exact(2)) {
        let scored: Result<Vec<(f64, f64)>> = both.iter().map(|p| score_pair(client, p, overrides)).collect();
        match scored {
            Ok(s) => {
                for (p, &(a, b)) in both.iter().zip(&s) {
                    positive_shares.push(if p.positive_first { a } else { b });
                    per_prompt.push(PromptScore {
                        antonym_first: p.antonym_first.clone(),
                        antonym_second: p.antonym_second.clone(),
                        p_first: a,
                        p_second: b,
                    });
                }
            }
            Err(e @ Error::Capability(_)) => return Err(e),
            Err(e) => {
                warnings.push(format!("pair ({}, {}) skipped: {e}", pair.positive, pair.negative));
                last_err = Some(e);
            }
        }
    }
    if positive_shares.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::Protocol("no prompts".into())));
    }
    Ok(ProbeResult {
        word: word.to_string(),
        feature: feature.name.clone(),
        p_norm_positive: positive_shares.iter().sum::<f64>() / positive_shares.len() as f64,
        n_prompts: positive_shares.len(),
        per_prompt,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    /// Steering magnitude as a fraction of the token norm.
    pub scale_c: f64,
    /// Upper bound on concurrently running probes.
    pub max_in_flight: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self { scale_c: crate::axes::DEFAULT_SCALE, max_in_flight: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffTargetRecord {
    pub target_feature: String,
    pub offtarget_feature: String,
    pub cosine: f64,
    /// Mean change of the off-target feature's positive-pole probability.
    pub mean_signed_effect: f64,
    pub mean_abs_effect: f64,
    pub n_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeredProbe {
    pub target_feature: String,
    pub result: ProbeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub word: String,
    pub target_feature: Option<String>,
    pub probed_feature: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffTargetExperiment {
    pub scale_c: f64,
    pub words: Vec<String>,
    pub unresolved_words: Vec<String>,
    pub baseline: Vec<ProbeResult>,
    pub steered: Vec<SteeredProbe>,
    /// Target-major, one record per ordered pair of distinct features.
    pub records: Vec<OffTargetRecord>,
    /// Effect of each push on its own feature (cosine 1).
    pub on_target: Vec<OffTargetRecord>,
    pub fit_signed: Option<LineFit>,
    pub fit_abs: Option<LineFit>,
    pub failures: Vec<CellFailure>,
}

enum Job {
    Baseline { word: usize, probed: usize },
    Steered { word: usize, target: usize, probed: usize },
}

/// Runs baseline probes, steers every word along every feature (positive
/// pole, magnitude `scale_c * |w|`), re-probes every feature and aggregates
/// per ordered feature pair.
pub fn run_offtarget_experiment(
    space: &EmbeddingSpace,
    lexicon: &FeatureLexicon,
    words: &[String],
    client: &dyn LogitsClient,
    opts: &ExperimentOptions,
) -> Result<OffTargetExperiment> {
    if !(opts.scale_c >= 0.0) || !opts.scale_c.is_finite() {
        return Err(Error::Validation(format!("scale must be a non-negative number, got {}", opts.scale_c)));
    }
    let directions = extract_all(space, lexicon)?;
    let features = lexicon.features();

    let mut resolved: Vec<(String, usize)> = Vec::new();
    let mut unresolved_words = Vec::new();
    for w in words {
        match resolve_word(space, w).token_id {
            Some(id) => resolved.push((w.clone(), id)),
            None => unresolved_words.push(w.clone()),
        }
    }
    if resolved.is_empty() {
        return Err(Error::Alignment("none of the probe words resolves to a single token".into()));
    }
    for (w, id) in &resolved {
        if space.row_norm(*id) == 0.0 {
            return Err(Error::Validation(format!("token for {w:?} has a zero-norm vector")));
        }
    }

    let token_of = |id: usize| space.vocab().token(id).unwrap_or_default().to_string();
    check_override_capability(client, &resolved[0].0, &token_of(resolved[0].1), space.row(resolved[0].1), &features[0])?;

    let steered_rows: Vec<Vec<EmbeddingOverride>> = resolved
        .iter()
        .flat_map(|(_, id)| directions.iter().map(move |d| (*id, d)))
        .map(|(id, d)| vec![EmbeddingOverride { token: token_of(id), vector: steered_row(space, id, d, opts.scale_c) }])
        .collect();

    let (n_w, n_f) = (resolved.len(), features.len());
    let mut jobs = Vec::with_capacity(n_w * n_f * (n_f + 1));
    for word in 0..n_w {
        for probed in 0..n_f {
            jobs.push(Job::Baseline { word, probed });
        }
        for target in 0..n_f {
            for probed in 0..n_f {
                jobs.push(Job::Steered { word, target, probed });
            }
        }
    }

    let outcomes = par::map_bounded(&jobs, opts.max_in_flight, |job| match *job {
        Job::Baseline { word, probed } => probe_feature(client, &resolved[word].0, &features[probed], &[]),
        Job::Steered { word, target, probed } => {
            probe_feature(client, &resolved[word].0, &features[probed], &steered_rows[word * n_f + target])
        }
    });

    let mut baseline = Vec::new();
    let mut steered = Vec::new();
    let mut failures = Vec::new();
    let mut base_p: HashMap<(usize, usize), f64> = HashMap::new();
    let mut steer_p: HashMap<(usize, usize, usize), f64> = HashMap::new();
    for (job, outcome) in jobs.iter().zip(outcomes) {
        let (word, target, probed) = match *job {
            Job::Baseline { word, probed } => (word, None, probed),
            Job::Steered { word, target, probed } => (word, Some(target), probed),
        };
        match outcome {
            Ok(r) => match target {
                None => {
                    base_p.insert((word, probed), r.p_norm_positive);
                    baseline.push(r);
                }
                Some(t) => {
                    steer_p.insert((word, t, probed), r.p_norm_positive);
                    steered.push(SteeredProbe { target_feature: features[t].name.clone(), result: r });
                }
            },
            Err(e @ Error::Capability(_)) => return Err(e),
            Err(e) => failures.push(CellFailure {
                word: resolved[word].0.clone(),
                target_feature: target.map(|t| features[t].name.clone()),
                probed_feature: features[probed].name.clone(),
                error: e.to_string(),
            }),
        }
    }

    let aggregate = |f: usize, g: usize| -> OffTargetRecord {
        let (mut sum, mut abs_sum, mut n) = (0.0, 0.0, 0usize);
        for w in 0..n_w {
            if let (Some(b), Some(a)) = (base_p.get(&(w, g)), steer_p.get(&(w, f, g))) {
                let delta = a - b;
                sum += delta;
                abs_sum += delta.abs();
                n += 1;
            }
        }
        let denom = n.max(1) as f64;
        OffTargetRecord {
            target_feature: features[f].name.clone(),
            offtarget_feature: features[g].name.clone(),
            cosine: directions[f].cosine(&directions[g]),
            mean_signed_effect: sum / denom,
            mean_abs_effect: abs_sum / denom,
            n_tokens: n,
        }
    };
    let mut records = Vec::new();
    let mut on_target = Vec::new();
    for f in 0..n_f {
        for g in 0..n_f {
            if f == g {
                on_target.push(aggregate(f, g));
            } else {
                records.push(aggregate(f, g));
            }
        }
    }
    let (fit_signed, fit_abs) = fit_records(&records);

    Ok(OffTargetExperiment {
        scale_c: opts.scale_c,
        words: resolved.iter().map(|(w, _)| w.clone()).collect(),
        unresolved_words,
        baseline,
        steered,
        records,
        on_target,
        fit_signed,
        fit_abs,
        failures,
    })
}

/// Least-squares fits of signed effect on cosine and absolute effect on
/// absolute cosine, over records that have at least one token.
pub fn fit_records(records: &[OffTargetRecord]) -> (Option<LineFit>, Option<LineFit>) {
    let usable: Vec<&OffTargetRecord> = records.iter().filter(|r| r.n_tokens > 0).collect();
    let x: Vec<f64> = usable.iter().map(|r| r.cosine).collect();
    let y: Vec<f64> = usable.iter().map(|r| r.mean_signed_effect).collect();
    let xa: Vec<f64> = x.iter().map(|c| c.abs()).collect();
    let ya: Vec<f64> = usable.iter().map(|r| r.mean_abs_effect).collect();
    (fit_line(&x, &y).ok(), fit_line(&xa, &ya).ok())
}

fn steered_row(space: &EmbeddingSpace, id: usize, d: &FeatureDirection, scale_c: f64) -> Vec<f32> {
    let w = space.row(id);
    if scale_c == 0.0 {
        return w.to_vec();
    }
    steer_vector(w, &d.vector, Sign::Positive, scale_c)
        .map(|v| v.into_iter().map(|x| x as f32).collect())
        .unwrap_or_else(|| w.to_vec())
}

/// Sends one real probe carrying an identity override. Servers without
/// override support answer with a capability error.
fn check_override_capability(
    client: &dyn LogitsClient,
    word: &str,
    token: &str,
    row: &[f32],
    feature: &FeatureSpec,
) -> Result<()> {
    let prompt = build_prompts(word, feature).swap_remove(0);
    let over = [EmbeddingOverride { token: token.to_string(), vector: row.to_vec() }];
    match score_pair(client, &prompt, &over) {
        Err(e @ Error::Capability(_)) => Err(e),
        Err(Error::Protocol(m)) if m.contains("override") => Err(Error::Capability(m)),
        Err(e) => Err(e),
        Ok(_) => Ok(()),
    }
}
