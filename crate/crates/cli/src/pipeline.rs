//! The end-to-end run: extract, project, matrices, PCA, optional survey
//! comparison and predicted off-target effects.

use semaxes_core::axes::{extract_all, project_labeled};
use semaxes_core::lexicon::{load_lexicon, load_survey};
use semaxes_core::structure::{direction_cosine_matrix, feature_correlation_matrix};
use semaxes_core::load_embeddings;

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::manifest::{record_run, Manifest};
use crate::stages::*;

/// Validates the configuration (no output is created if that fails), then
/// runs every stage. A manifest is written whether or not a stage fails.
pub fn run(cfg: &RunConfig) -> CliResult<Manifest> {
    let embedding = cfg.require_file(&cfg.embedding, "embedding")?;
    let lexicon_path = cfg.require_file(&cfg.lexicon, "lexicon")?;
    let survey_path = cfg.optional_file(&cfg.survey, "survey")?;
    let words_path = cfg.optional_file(&cfg.words, "words")?;
    let out = cfg.output_dir()?;
    cfg.check_scale()?;

    record_run(&out, "pipeline", cfg, |rec, stage| {
        rec.input("embedding", &embedding)?;
        rec.input("lexicon", &lexicon_path)?;
        if let Some(p) = &survey_path {
            rec.input("survey", p)?;
        }
        if let Some(p) = &words_path {
            rec.input("words", p)?;
        }
        let base = load_embeddings(&embedding)?;
        let lexicon = load_lexicon(&lexicon_path)?;
        let survey = survey_path.as_ref().map(load_survey).transpose()?;
        let words = words_path.as_deref().map(read_words).transpose()?;

        let space = if cfg.whiten {
            *stage = "whiten";
            whiten(&base)?
        } else {
            base.clone()
        };

        *stage = "extract";
        let dirs = extract_all(&space, &lexicon)?;
        write_directions(rec, &dirs)?;

        *stage = "project";
        let selection = select_rows(&space, words.as_deref(), cfg.max_rows, cfg.seed)?;
        let table = project_labeled(&space, &selection.rows, &dirs)?;
        write_projections(rec, &table)?;

        *stage = "matrices";
        write_matrix(rec, "projection_correlations", &feature_correlation_matrix(&table)?, "Projection correlations")?;
        write_matrix(rec, "direction_cosines", &direction_cosine_matrix(&dirs)?, "Direction cosines")?;

        *stage = "pca";
        write_pca(rec, &run_pca(&table, cfg.pca_standardize, cfg.top_n)?)?;

        if let Some(survey) = &survey {
            *stage = "survey-compare";
            write_survey(rec, &base, &lexicon, survey)?;
        }

        *stage = "offtarget";
        write_predicted(rec, &predicted(&dirs, &space, &selection.token_ids(), cfg.scale_c)?)
    })
}
