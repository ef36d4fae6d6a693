//! Standalone subcommands, each runnable on the outputs of earlier stages.

use std::path::{Path, PathBuf};

use semaxes_core::axes::{extract_all, intervene, project_labeled, FeatureDirection, InterventionSpec, Sign};
use semaxes_core::embed_store::{save_word2vec_text, EmbeddingSpace};
use semaxes_core::lexicon::{load_lexicon, load_survey, FeatureLexicon};
use semaxes_core::probe::{probe_feature, run_offtarget_experiment, ExperimentOptions, HttpLogitsClient, LogitsClient, ProbeResult};
use semaxes_core::report::{self, scatter_svg, write_json, write_text};
use semaxes_core::structure::{correspondence, direction_cosine_matrix, feature_correlation_matrix, CorrespondenceScore};
use semaxes_core::{load_embeddings, par, resolve_word, save_container, Error};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{record_run, Manifest};
use crate::stages::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportFormat {
    Semx,
    Word2vec,
}

/// Converts an embedding file between the binary container and word2vec text.
pub fn import(input: &Path, output: &Path, format: ExportFormat) -> CliResult<()> {
    if !input.is_file() {
        return Err(CliError::Config(format!("input {} does not exist", input.display())));
    }
    let space = load_embeddings(input)?;
    match format {
        ExportFormat::Semx => save_container(&space, output)?,
        ExportFormat::Word2vec => save_word2vec_text(&space, output)?,
    }
    println!("wrote {} tokens x {} dims to {}", space.len(), space.dim(), output.display());
    Ok(())
}

fn load_space(cfg: &RunConfig, rec: &mut crate::manifest::Recorder, path: &Path) -> CliResult<EmbeddingSpace> {
    rec.input("embedding", path)?;
    let space = load_embeddings(path)?;
    if cfg.whiten {
        whiten(&space)
    } else {
        Ok(space)
    }
}

/// Directions from an explicit file, or else extracted from the lexicon.
fn directions(
    cfg: &RunConfig,
    rec: &mut crate::manifest::Recorder,
    file: Option<&Path>,
    space: &EmbeddingSpace,
) -> CliResult<Vec<FeatureDirection>> {
    let dirs = match file {
        Some(p) => {
            rec.input("directions", p)?;
            report::load_directions(p)?
        }
        None => {
            let lex = cfg.lexicon.as_ref().ok_or_else(|| CliError::Config("need --directions or --lexicon".into()))?;
            rec.input("lexicon", lex)?;
            extract_all(space, &load_lexicon(lex)?)?
        }
    };
    if let Some(d) = dirs.iter().find(|d| d.dim() != space.dim()) {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: d.dim() }.into());
    }
    Ok(dirs)
}

fn existing(p: Option<PathBuf>, key: &str) -> CliResult<Option<PathBuf>> {
    match p {
        Some(p) if !p.is_file() => Err(CliError::Config(format!("`{key}` path {} does not exist", p.display()))),
        other => Ok(other),
    }
}

pub fn axes(cfg: &RunConfig) -> CliResult<Manifest> {
    let embedding = cfg.require_file(&cfg.embedding, "embedding")?;
    let lexicon = cfg.require_file(&cfg.lexicon, "lexicon")?;
    let out = cfg.output_dir()?;
    record_run(&out, "axes", cfg, |rec, stage| {
        let space = load_space(cfg, rec, &embedding)?;
        rec.input("lexicon", &lexicon)?;
        let lex = load_lexicon(&lexicon)?;
        *stage = "extract";
        write_directions(rec, &extract_all(&space, &lex)?)
    })
}

pub fn project(cfg: &RunConfig, directions_file: Option<PathBuf>) -> CliResult<Manifest> {
    let embedding = cfg.require_file(&cfg.embedding, "embedding")?;
    let words = cfg.optional_file(&cfg.words, "words")?;
    let directions_file = existing(directions_file, "directions")?;
    let out = cfg.output_dir()?;
    record_run(&out, "project", cfg, |rec, stage| {
        let space = load_space(cfg, rec, &embedding)?;
        let dirs = directions(cfg, rec, directions_file.as_deref(), &space)?;
        let words = match &words {
            Some(p) => {
                rec.input("words", p)?;
                Some(read_words(p)?)
            }
            None => None,
        };
        *stage = "project";
        let selection = select_rows(&space, words.as_deref(), cfg.max_rows, cfg.seed)?;
        write_projections(rec, &project_labeled(&space, &selection.rows, &dirs)?)
    })
}

#[derive(Serialize)]
struct MatrixCorrespondence {
    projections_vs_survey: Option<CorrespondenceScore>,
    cosines_vs_survey: Option<CorrespondenceScore>,
}

pub fn matrices(cfg: &RunConfig, projections: PathBuf, directions_file: Option<PathBuf>) -> CliResult<Manifest> {
    let projections = cfg.require_file(&Some(projections), "projections")?;
    let directions_file = existing(directions_file, "directions")?;
    let survey = cfg.optional_file(&cfg.survey, "survey")?;
    let lexicon = cfg.optional_file(&cfg.lexicon, "lexicon")?;
    if survey.is_some() && lexicon.is_none() {
        return Err(CliError::Config("a survey needs --lexicon to map scales to features".into()));
    }
    let out = cfg.output_dir()?;
    record_run(&out, "matrices", cfg, |rec, stage| {
        rec.input("projections", &projections)?;
        let table = report::read_projection_csv(&projections)?;
        *stage = "matrices";
        let proj = feature_correlation_matrix(&table)?;
        write_matrix(rec, "projection_correlations", &proj, "Projection correlations")?;
        let cos = match &directions_file {
            Some(p) => {
                rec.input("directions", p)?;
                let m = direction_cosine_matrix(&report::load_directions(p)?)?;
                write_matrix(rec, "direction_cosines", &m, "Direction cosines")?;
                Some(m)
            }
            None => None,
        };
        if let (Some(s), Some(l)) = (&survey, &lexicon) {
            rec.input("survey", s)?;
            rec.input("lexicon", l)?;
            let ratings = load_survey(s)?.as_features(&load_lexicon(l)?)?.restrict_words(&table.row_words);
            let sm = feature_correlation_matrix(&ratings)?;
            write_matrix(rec, "survey_correlations", &sm, "Survey rating correlations")?;
            let report = MatrixCorrespondence {
                projections_vs_survey: correspondence(&proj, &sm).ok(),
                cosines_vs_survey: cos.as_ref().and_then(|c| correspondence(c, &sm).ok()),
            };
            write_json(rec.path("correspondence.json"), "correspondence", &report)?;
            rec.artifact("correspondence", &["correspondence.json"])?;
        }
        Ok(())
    })
}

pub fn pca(cfg: &RunConfig, projections: PathBuf) -> CliResult<Manifest> {
    let projections = cfg.require_file(&Some(projections), "projections")?;
    let out = cfg.output_dir()?;
    record_run(&out, "pca", cfg, |rec, stage| {
        rec.input("projections", &projections)?;
        let table = report::read_projection_csv(&projections)?;
        *stage = "pca";
        write_pca(rec, &run_pca(&table, cfg.pca_standardize, cfg.top_n)?)
    })
}

pub fn survey_compare(cfg: &RunConfig) -> CliResult<Manifest> {
    let embedding = cfg.require_file(&cfg.embedding, "embedding")?;
    let lexicon = cfg.require_file(&cfg.lexicon, "lexicon")?;
    let survey = cfg.require_file(&cfg.survey, "survey")?;
    let out = cfg.output_dir()?;
    record_run(&out, "survey-compare", cfg, |rec, stage| {
        rec.input("embedding", &embedding)?;
        rec.input("lexicon", &lexicon)?;
        rec.input("survey", &survey)?;
        let space = load_embeddings(&embedding)?;
        let (lex, ratings) = (load_lexicon(&lexicon)?, load_survey(&survey)?);
        *stage = "survey-compare";
        write_survey(rec, &space, &lex, &ratings)
    })
}

#[derive(Serialize)]
struct InterventionReport {
    word: String,
    token: String,
    feature: String,
    sign: String,
    scale_c: f64,
    norm_before: f64,
    norm_after: f64,
    projections: Vec<ProjectionChange>,
}

#[derive(Serialize)]
struct ProjectionChange {
    feature: String,
    before: f64,
    after: f64,
}

pub struct InterveneArgs {
    pub directions: Option<PathBuf>,
    pub word: String,
    pub feature: String,
    pub negative: bool,
}

pub fn intervene_cmd(cfg: &RunConfig, args: InterveneArgs) -> CliResult<Manifest> {
    let embedding = cfg.require_file(&cfg.embedding, "embedding")?;
    let directions_file = existing(args.directions.clone(), "directions")?;
    let out = cfg.output_dir()?;
    cfg.check_scale()?;
    record_run(&out, "intervene", cfg, |rec, stage| {
        let space = load_space(cfg, rec, &embedding)?;
        let dirs = directions(cfg, rec, directions_file.as_deref(), &space)?;
        let f = dirs
            .iter()
            .position(|d| d.name == args.feature)
            .ok_or_else(|| Error::Validation(format!("no direction named `{}`", args.feature)))?;
        let id = resolve_word(&space, &args.word)
            .token_id
            .ok_or_else(|| Error::Alignment(format!("`{}` does not resolve to a single token", args.word)))?;
        *stage = "intervene";
        let sign = if args.negative { Sign::Negative } else { Sign::Positive };
        let mut spec = InterventionSpec::new(id, &dirs[f], sign);
        spec.scale_c = cfg.scale_c;
        let steered = intervene(&space, &spec)?;
        save_container(&steered, rec.path("steered.semx"))?;
        let label = vec![(args.word.clone(), id)];
        let (before, after) = (project_labeled(&space, &label, &dirs)?, project_labeled(&steered, &label, &dirs)?);
        let rep = InterventionReport {
            word: args.word.clone(),
            token: space.vocab().token(id).unwrap_or_default().to_string(),
            feature: args.feature.clone(),
            sign: if args.negative { "negative" } else { "positive" }.into(),
            scale_c: cfg.scale_c,
            norm_before: space.row_norm(id),
            norm_after: steered.row_norm(id),
            projections: dirs
                .iter()
                .enumerate()
                .map(|(j, d)| ProjectionChange { feature: d.name.clone(), before: before.get(0, j), after: after.get(0, j) })
                .collect(),
        };
        write_json(rec.path("intervention.json"), "intervention", &rep)?;
        rec.artifact("intervention", &["steered.semx", "intervention.json"])
    })
}

pub fn offtarget(cfg: &RunConfig, directions_file: Option<PathBuf>) -> CliResult<Manifest> {
    let embedding = cfg.require_file(&cfg.embedding, "embedding")?;
    let words = cfg.optional_file(&cfg.words, "words")?;
    let directions_file = existing(directions_file, "directions")?;
    let out = cfg.output_dir()?;
    cfg.check_scale()?;
    record_run(&out, "offtarget", cfg, |rec, stage| {
        let space = load_space(cfg, rec, &embedding)?;
        let dirs = directions(cfg, rec, directions_file.as_deref(), &space)?;
        let words = match &words {
            Some(p) => {
                rec.input("words", p)?;
                Some(read_words(p)?)
            }
            None => None,
        };
        *stage = "offtarget";
        let selection = select_rows(&space, words.as_deref(), cfg.max_rows, cfg.seed)?;
        write_predicted(rec, &predicted(&dirs, &space, &selection.token_ids(), cfg.scale_c)?)
    })
}

#[derive(Serialize)]
struct BaselineRow<'a> {
    word: &'a str,
    feature: &'a str,
    p_norm_positive: f64,
    n_prompts: usize,
}

fn write_baseline(rec: &mut crate::manifest::Recorder, results: &[ProbeResult]) -> CliResult<()> {
    let rows: Vec<BaselineRow> = results
        .iter()
        .map(|r| BaselineRow { word: &r.word, feature: &r.feature, p_norm_positive: r.p_norm_positive, n_prompts: r.n_prompts })
        .collect();
    report::write_records_csv(&rows, rec.path("baseline.csv"))?;
    rec.artifact("baseline", &["baseline.csv"])
}

/// Probes every word on every feature against a scoring service and, unless
/// `baseline_only`, runs the steering experiment.
pub fn probe(cfg: &RunConfig, baseline_only: bool) -> CliResult<Manifest> {
    let endpoint = cfg.endpoint()?;
    let lexicon = cfg.require_file(&cfg.lexicon, "lexicon")?;
    let words = cfg.require_file(&cfg.words, "words")?;
    let embedding = if baseline_only { cfg.optional_file(&cfg.embedding, "embedding")? } else { Some(cfg.require_file(&cfg.embedding, "embedding")?) };
    let out = cfg.output_dir()?;
    cfg.check_scale()?;
    let mut client = HttpLogitsClient::new(&endpoint);
    client.max_retries = cfg.retries;
    client.first_token_only = cfg.first_token_only;

    record_run(&out, "probe", cfg, |rec, stage| {
        rec.input("lexicon", &lexicon)?;
        rec.input("words", &words)?;
        let lex = load_lexicon(&lexicon)?;
        let word_list = read_words(&words)?;
        if baseline_only {
            *stage = "probe";
            let results = baseline(&client, &lex, &word_list, cfg.max_in_flight)?;
            write_json(rec.path("probes.json"), "probes", &results)?;
            rec.artifact("probes", &["probes.json"])?;
            return write_baseline(rec, &results);
        }
        let embedding = embedding.as_deref().expect("checked above");
        rec.input("embedding", embedding)?;
        let space = load_embeddings(embedding)?;
        *stage = "probe";
        let opts = ExperimentOptions { scale_c: cfg.scale_c, max_in_flight: cfg.max_in_flight };
        let exp = run_offtarget_experiment(&space, &lex, &word_list, &client, &opts)?;
        write_json(rec.path("experiment.json"), "offtarget-experiment", &exp)?;
        rec.artifact("experiment", &["experiment.json"])?;
        write_baseline(rec, &exp.baseline)?;
        report::write_records_csv(&exp.records, rec.path("offtarget_records.csv"))?;
        report::write_records_csv(&exp.on_target, rec.path("ontarget_records.csv"))?;
        let signed: Vec<(f64, f64)> = exp.records.iter().map(|r| (r.cosine, r.mean_signed_effect)).collect();
        let abs: Vec<(f64, f64)> = exp.records.iter().map(|r| (r.cosine.abs(), r.mean_abs_effect)).collect();
        write_text(rec.path("offtarget_signed.svg"), &scatter_svg(&signed, "cosine(target, off-target)", "mean signed change in p_norm", exp.fit_signed.as_ref()))?;
        write_text(rec.path("offtarget_abs.svg"), &scatter_svg(&abs, "|cosine|", "mean absolute change in p_norm", exp.fit_abs.as_ref()))?;
        rec.artifact(
            "offtarget_records",
            &["offtarget_records.csv", "ontarget_records.csv", "offtarget_signed.svg", "offtarget_abs.svg"],
        )
    })
}

fn baseline(client: &dyn LogitsClient, lex: &FeatureLexicon, words: &[String], max_in_flight: usize) -> CliResult<Vec<ProbeResult>> {
    let cells: Vec<(&String, usize)> = words.iter().flat_map(|w| (0..lex.len()).map(move |f| (w, f))).collect();
    let results = par::map_bounded(&cells, max_in_flight, |(w, f)| probe_feature(client, w, &lex.features()[*f], &[]));
    Ok(results.into_iter().collect::<Result<Vec<_>, _>>()?)
}
