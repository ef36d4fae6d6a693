//! Building blocks shared by the pipeline and the standalone subcommands.
//! Each `write_*` function writes its files and registers them as one
//! manifest artifact.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semaxes_core::axes::{
    extract_all, fit_whitening, predicted_offtarget_all, project_labeled, FeatureDirection, PredictedOffTarget,
    ProjectionTable, Sign,
};
use semaxes_core::lexicon::{align, FeatureLexicon, SurveyRatings};
use semaxes_core::report::{self, heatmap_svg, scatter_svg, scree_svg, write_json, write_text};
use semaxes_core::structure::{
    correspondence, direction_cosine_matrix, feature_correlation_matrix, fit_line, pca_with, survey_compare,
    CorrespondenceScore, PcaOptions, PcaResult, SquareMatrixReport,
};
use semaxes_core::{resolve_word, EmbeddingSpace, Error};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::manifest::Recorder;

/// One word per line; blank lines and `#` comments are ignored.
pub fn read_words(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

pub struct RowSelection {
    pub rows: Vec<(String, usize)>,
}

impl RowSelection {
    pub fn token_ids(&self) -> Vec<usize> {
        self.rows.iter().map(|(_, id)| *id).collect()
    }
}

/// Rows to analyse: the given words that resolve to single tokens, or else
/// the whole vocabulary, subsampled to `max_rows` with a seeded generator.
pub fn select_rows(space: &EmbeddingSpace, words: Option<&[String]>, max_rows: usize, seed: u64) -> CliResult<RowSelection> {
    if let Some(words) = words {
        let mut rows = Vec::new();
        let mut unresolved = Vec::new();
        for w in words {
            match resolve_word(space, w).token_id {
                Some(id) => rows.push((w.clone(), id)),
                None => unresolved.push(w.clone()),
            }
        }
        if rows.is_empty() {
            return Err(Error::Alignment("none of the listed words resolves to a single token".into()).into());
        }
        if !unresolved.is_empty() {
            eprintln!("warning: {} words do not resolve to a single token: {}", unresolved.len(), unresolved.join(", "));
        }
        return Ok(RowSelection { rows });
    }
    let n = space.len();
    let mut ids: Vec<usize> = if n > max_rows {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, n, max_rows).into_vec()
    } else {
        (0..n).collect()
    };
    ids.sort_unstable();
    let rows = ids.into_iter().map(|id| (space.vocab().token(id).unwrap_or_default().to_string(), id)).collect();
    Ok(RowSelection { rows })
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e }.into())
}

pub fn whiten(space: &EmbeddingSpace) -> CliResult<EmbeddingSpace> {
    Ok(fit_whitening(space)?.whiten_space(space)?)
}

pub fn write_directions(rec: &mut Recorder, dirs: &[FeatureDirection]) -> CliResult<()> {
    report::save_directions(dirs, rec.path("directions.json"))?;
    rec.artifact("directions", &["directions.json"])
}

pub fn write_projections(rec: &mut Recorder, table: &ProjectionTable) -> CliResult<()> {
    report::write_projection_csv(table, rec.path("projections.csv"))?;
    rec.artifact("projections", &["projections.csv"])
}

pub fn write_matrix(rec: &mut Recorder, name: &str, m: &SquareMatrixReport, title: &str) -> CliResult<()> {
    let (csv, svg) = (format!("{name}.csv"), format!("{name}.svg"));
    report::write_matrix_csv(m, rec.path(&csv))?;
    write_text(rec.path(&svg), &heatmap_svg(m, title))?;
    rec.artifact(name, &[&csv, &svg])
}

pub fn write_pca(rec: &mut Recorder, result: &PcaResult) -> CliResult<()> {
    write_json(rec.path("pca.json"), "pca", result)?;
    report::write_pca_csv(result, rec.path("pca_loadings.csv"), rec.path("pca_variance.csv"))?;
    write_text(rec.path("pca_scree.svg"), &scree_svg(result))?;
    rec.artifact("pca", &["pca.json", "pca_loadings.csv", "pca_variance.csv", "pca_scree.svg"])
}

pub fn write_predicted(rec: &mut Recorder, rows: &[PredictedOffTarget]) -> CliResult<()> {
    report::write_records_csv(rows, rec.path("predicted_offtarget.csv"))?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.cosine, r.mean_delta)).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let fit = fit_line(&x, &y).ok();
    let svg = scatter_svg(&points, "cosine(target, off-target)", "mean change in projection", fit.as_ref());
    write_text(rec.path("predicted_offtarget.svg"), &svg)?;
    rec.artifact("predicted_offtarget", &["predicted_offtarget.csv", "predicted_offtarget.svg"])
}

pub fn predicted(dirs: &[FeatureDirection], space: &EmbeddingSpace, ids: &[usize], scale_c: f64) -> CliResult<Vec<PredictedOffTarget>> {
    Ok(predicted_offtarget_all(dirs, space, ids, Sign::Positive, scale_c)?)
}

pub fn pca_options(standardize: bool, top_n: usize) -> PcaOptions {
    PcaOptions { standardize, top_n }
}

pub fn run_pca(table: &ProjectionTable, standardize: bool, top_n: usize) -> CliResult<PcaResult> {
    Ok(pca_with(table, &pca_options(standardize, top_n))?)
}

#[derive(Serialize)]
struct CorrespondenceReport {
    panel_words: usize,
    projections_vs_survey: Option<CorrespondenceScore>,
    cosines_vs_survey: Option<CorrespondenceScore>,
    issues: Vec<String>,
}

/// Survey comparison on the unwhitened space `space`: per-feature
/// correlations (plain and whitened), the survey's own feature correlation
/// matrix, and its correspondence with the projection and cosine matrices.
pub fn write_survey(
    rec: &mut Recorder,
    space: &EmbeddingSpace,
    lexicon: &FeatureLexicon,
    survey: &SurveyRatings,
) -> CliResult<()> {
    let by_feature = survey.as_features(lexicon)?;
    let panel = align(space, &by_feature)?;
    let rows = panel.rows();

    let dirs = extract_all(space, lexicon)?;
    let table = project_labeled(space, &rows, &dirs)?;
    let white_space = whiten(space)?;
    let white_dirs = extract_all(&white_space, lexicon)?;
    let white_table = project_labeled(&white_space, &rows, &white_dirs)?;
    let comparison = survey_compare(&panel, &table, &by_feature, Some(&white_table))?;
    write_json(rec.path("survey_compare.json"), "survey-compare", &comparison)?;
    report::write_records_csv(&comparison.features.iter().map(SurveyRow::from).collect::<Vec<_>>(), rec.path("survey_compare.csv"))?;
    rec.artifact("survey_compare", &["survey_compare.json", "survey_compare.csv"])?;

    let survey_matrix = feature_correlation_matrix(&by_feature.restrict_words(&panel.words))?;
    write_matrix(rec, "survey_correlations", &survey_matrix, "Survey rating correlations")?;

    let mut issues = Vec::new();
    let common: Vec<String> = survey_matrix.labels.iter().filter(|l| table.col_features.contains(l)).cloned().collect();
    let restrict = |m: &SquareMatrixReport| -> CliResult<SquareMatrixReport> { subset(m, &common) };
    let proj_matrix = feature_correlation_matrix(&table)?;
    let cos_matrix = direction_cosine_matrix(&dirs)?;
    let score = |a: &SquareMatrixReport, issues: &mut Vec<String>, what: &str| -> CliResult<Option<CorrespondenceScore>> {
        Ok(correspondence(&restrict(a)?, &restrict(&survey_matrix)?)
            .map_err(|e| issues.push(format!("{what}: {e}")))
            .ok())
    };
    let projections_vs_survey = score(&proj_matrix, &mut issues, "projections")?;
    let cosines_vs_survey = score(&cos_matrix, &mut issues, "cosines")?;
    let out = CorrespondenceReport { panel_words: panel.len(), projections_vs_survey, cosines_vs_survey, issues };
    write_json(rec.path("correspondence.json"), "correspondence", &out)?;
    rec.artifact("correspondence", &["correspondence.json"])
}

#[derive(Serialize)]
struct SurveyRow<'a> {
    feature: &'a str,
    n_words: usize,
    r_plain: Option<f64>,
    r_whitened: Option<f64>,
}

impl<'a> From<&'a semaxes_core::structure::FeatureSurveyCorrelation> for SurveyRow<'a> {
    fn from(f: &'a semaxes_core::structure::FeatureSurveyCorrelation) -> Self {
        SurveyRow { feature: &f.feature, n_words: f.n_words, r_plain: f.r_plain, r_whitened: f.r_whitened }
    }
}

/// The sub-matrix over `labels`, in that order.
fn subset(m: &SquareMatrixReport, labels: &[String]) -> CliResult<SquareMatrixReport> {
    let idx: Vec<usize> = labels
        .iter()
        .map(|l| m.labels.iter().position(|x| x == l).ok_or_else(|| CliError::Internal(format!("label {l} missing"))))
        .collect::<CliResult<_>>()?;
    let values = idx.iter().flat_map(|&i| idx.iter().map(move |&j| (i, j))).map(|(i, j)| m.get(i, j)).collect();
    Ok(SquareMatrixReport { kind: m.kind, labels: labels.to_vec(), values, missing: Vec::new() })
}
