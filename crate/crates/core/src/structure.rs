//! Correlational and factorial structure of feature tables.
//!
//! Everything here works on a [`ColumnTable`]: projection tables and survey
//! ratings both present themselves as words x features with possibly missing
//! cells. Correlations use pairwise-complete observations; PCA imputes
//! missing cells with the column mean and reports how many it filled.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::axes::{FeatureDirection, ProjectionTable};
use crate::error::{Error, Result};
use crate::lexicon::{AlignedPanel, SurveyRatings};
use crate::par;

/// Minimum number of complete pairs for a correlation.
pub const MIN_PAIRS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    PearsonProjections,
    PearsonSurvey,
    CosineDirections,
}

pub trait ColumnTable {
    const KIND: MatrixKind;
    fn row_labels(&self) -> &[String];
    fn col_labels(&self) -> &[String];
    fn value(&self, row: usize, col: usize) -> Option<f64>;

    fn n_rows(&self) -> usize {
        self.row_labels().len()
    }

    fn n_cols(&self) -> usize {
        self.col_labels().len()
    }

    fn column_values(&self, col: usize) -> Vec<Option<f64>> {
        (0..self.n_rows()).map(|r| self.value(r, col)).collect()
    }
}

impl ColumnTable for ProjectionTable {
    const KIND: MatrixKind = MatrixKind::PearsonProjections;

    fn row_labels(&self) -> &[String] {
        &self.row_words
    }

    fn col_labels(&self) -> &[String] {
        &self.col_features
    }

    fn value(&self, row: usize, col: usize) -> Option<f64> {
        Some(self.get(row, col))
    }
}

impl ColumnTable for SurveyRatings {
    const KIND: MatrixKind = MatrixKind::PearsonSurvey;

    fn row_labels(&self) -> &[String] {
        self.words()
    }

    fn col_labels(&self) -> &[String] {
        self.scales()
    }

    fn value(&self, row: usize, col: usize) -> Option<f64> {
        self.get(row, col)
    }
}

/// Product-moment correlation of two complete samples.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    pearson_core(x.iter().copied().zip(y.iter().copied()))
}

/// Correlation over the positions where both samples are present.
pub fn pearson_pairwise(x: &[Option<f64>], y: &[Option<f64>]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    pearson_core(x.iter().zip(y).filter_map(|(a, b)| Some(((*a)?, (*b)?))))
}

fn pearson_core(pairs: impl Iterator<Item = (f64, f64)>) -> Result<f64> {
    let pairs: Vec<(f64, f64)> = pairs.collect();
    let n = pairs.len();
    if n < MIN_PAIRS {
        return Err(Error::UndefinedCorrelation(format!("{n} complete pairs, need at least {MIN_PAIRS}")));
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingCell {
    pub row: String,
    pub col: String,
    pub reason: String,
}

/// Symmetric `k x k` matrix over feature labels. Undefined cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrixReport {
    pub kind: MatrixKind,
    pub labels: Vec<String>,
    /// Row-major `k x k`.
    pub values: Vec<Option<f64>>,
    #[serde(default)]
    pub missing: Vec<MissingCell>,
}

impl SquareMatrixReport {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.labels.len() + j]
    }

    /// Upper-triangle off-diagonal entries, row by row.
    pub fn upper_triangle(&self) -> Vec<Option<f64>> {
        let k = self.size();
        (0..k).flat_map(|i| ((i + 1)..k).map(move |j| (i, j))).map(|(i, j)| self.get(i, j)).collect()
    }

    /// Same matrix with rows and columns in the order of `labels`.
    pub fn reordered(&self, labels: &[String]) -> Result<SquareMatrixReport> {
        let pos: HashMap<&str, usize> = self.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let idx: Vec<usize> = labels
            .iter()
            .map(|l| pos.get(l.as_str()).copied().ok_or_else(|| Error::Alignment(format!("label `{l}` missing"))))
            .collect::<Result<_>>()?;
        if idx.len() != self.size() {
            return Err(Error::Alignment("label sets differ in size".into()));
        }
        let k = idx.len();
        let mut values = Vec::with_capacity(k * k);
        for &i in &idx {
            for &j in &idx {
                values.push(self.get(i, j));
            }
        }
        Ok(SquareMatrixReport { kind: self.kind, labels: labels.to_vec(), values, missing: self.missing.clone() })
    }
}

pub fn feature_correlation_matrix<T: ColumnTable + Sync>(table: &T) -> Result<SquareMatrixReport> {
    if table.n_rows() < MIN_PAIRS {
        return Err(Error::Validation(format!("{} rows, need at least {MIN_PAIRS}", table.n_rows())));
    }
    let k = table.n_cols();
    let columns: Vec<Vec<Option<f64>>> = par::map_range(k, |c| table.column_values(c));
    let cells: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let results = par::map_slice(&cells, |&(i, j)| pearson_pairwise(&columns[i], &columns[j]));
    let labels = table.col_labels().to_vec();
    let mut values = vec![None; k * k];
    let mut missing = Vec::new();
    for (&(i, j), r) in cells.iter().zip(results) {
        match r {
            Ok(v) => {
                let v = if i == j { 1.0 } else { v };
                values[i * k + j] = Some(v);
                values[j * k + i] = Some(v);
            }
            Err(e) => missing.push(MissingCell { row: labels[i].clone(), col: labels[j].clone(), reason: e.to_string() }),
        }
    }
    Ok(SquareMatrixReport { kind: T::KIND, labels, values, missing })
}

pub fn direction_cosine_matrix(directions: &[FeatureDirection]) -> Result<SquareMatrixReport> {
    let k = directions.len();
    if let Some(first) = directions.first() {
        for d in directions {
            if d.dim() != first.dim() {
                return Err(Error::DimensionMismatch { expected: first.dim(), found: d.dim() });
            }
        }
    }
    let mut values = vec![None; k * k];
    for i in 0..k {
        values[i * k + i] = Some(1.0);
        for j in (i + 1)..k {
            let c = directions[i].cosine(&directions[j]);
            values[i * k + j] = Some(c);
            values[j * k + i] = Some(c);
        }
    }
    Ok(SquareMatrixReport {
        kind: MatrixKind::CosineDirections,
        labels: directions.iter().map(|d| d.name.clone()).collect(),
        values,
        missing: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceScore {
    pub value: f64,
    pub n_pairs: usize,
}

/// Pearson correlation between the off-diagonal entries of two matrices
/// over the same labels. `b` is reordered to `a`'s label order first.
pub fn correspondence(a: &SquareMatrixReport, b: &SquareMatrixReport) -> Result<CorrespondenceScore> {
    let mut la = a.labels.clone();
    let mut lb = b.labels.clone();
    la.sort();
    lb.sort();
    if la != lb {
        return Err(Error::Alignment("matrices are over different label sets".into()));
    }
    let b = b.reordered(&a.labels)?;
    let (xa, xb) = (a.upper_triangle(), b.upper_triangle());
    let n_pairs = xa.iter().zip(&xb).filter(|(x, y)| x.is_some() && y.is_some()).count();
    let value = pearson_pairwise(&xa, &xb)?;
    Ok(CorrespondenceScore { value, n_pairs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcaOptions {
    /// Factor the correlation matrix instead of the covariance matrix.
    pub standardize: bool,
    /// Extreme words listed per pole per component.
    pub top_n: usize,
}

impl Default for PcaOptions {
    fn default() -> Self {
        Self { standardize: true, top_n: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredWord {
    pub word: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub standardized: bool,
    /// Features kept, in input order. Loadings rows follow this order.
    pub labels: Vec<String>,
    pub dropped_columns: Vec<MissingCell>,
    pub imputed_cells: usize,
    pub row_labels: Vec<String>,
    pub eigenvalues: Vec<f64>,
    pub variance_fraction: Vec<f64>,
    /// Row-major `k x k`; column `c` is component `c`.
    pub loadings: Vec<f64>,
    /// Row-major `m x k`.
    pub scores: Vec<f64>,
    pub top_words: Vec<Vec<ScoredWord>>,
    pub bottom_words: Vec<Vec<ScoredWord>>,
}

impl PcaResult {
    pub fn n_components(&self) -> usize {
        self.labels.len()
    }

    pub fn loading(&self, feature: usize, component: usize) -> f64 {
        self.loadings[feature * self.labels.len() + component]
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        (0..self.labels.len()).map(|f| self.loading(f, c)).collect()
    }

    pub fn score(&self, row: usize, component: usize) -> f64 {
        self.scores[row * self.labels.len() + component]
    }

    /// Features sorted by absolute loading on component `c`, largest first.
    pub fn highest_loading(&self, c: usize) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> =
            self.labels.iter().enumerate().map(|(f, l)| (l.clone(), self.loading(f, c))).collect();
        v.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
        v
    }

    pub fn cumulative_variance(&self, n: usize) -> f64 {
        self.variance_fraction.iter().take(n).sum()
    }
}

pub fn pca<T: ColumnTable + Sync>(table: &T, standardize: bool) -> Result<PcaResult> {
    pca_with(table, &PcaOptions { standardize, ..PcaOptions::default() })
}

/// Components are sorted by eigenvalue. Each component's sign is chosen so
/// its largest-magnitude loading is positive.
pub fn pca_with<T: ColumnTable + Sync>(table: &T, opts: &PcaOptions) -> Result<PcaResult> {
    let m = table.n_rows();
    if m < 2 {
        return Err(Error::Validation("PCA needs at least two rows".into()));
    }
    let mut kept: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut dropped = Vec::new();
    let mut imputed = 0usize;
    for c in 0..table.n_cols() {
        let col = table.column_values(c);
        let present: Vec<f64> = col.iter().flatten().copied().collect();
        let label = table.col_labels()[c].clone();
        if present.is_empty() {
            dropped.push(MissingCell { row: label.clone(), col: label, reason: "no observations".into() });
            continue;
        }
        let mean = present.iter().sum::<f64>() / present.len() as f64;
        imputed += col.len() - present.len();
        let centered: Vec<f64> = col.iter().map(|v| v.unwrap_or(mean) - mean).collect();
        let ss: f64 = centered.iter().map(|x| x * x).sum();
        if !(ss > 0.0) {
            dropped.push(MissingCell { row: label.clone(), col: label, reason: "zero variance".into() });
            continue;
        }
        let centered = if opts.standardize {
            let sd = (ss / (m - 1) as f64).sqrt();
            centered.into_iter().map(|x| x / sd).collect()
        } else {
            centered
        };
        kept.push((c, centered));
    }
    if kept.is_empty() {
        return Err(Error::Validation("no column with positive variance".into()));
    }
    let k = kept.len();
    let data = DMatrix::from_fn(m, k, |r, c| kept[c].1[r]);
    let cov = data.tr_mul(&data) / (m - 1) as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let variance_fraction: Vec<f64> = eigenvalues.iter().map(|l| l / total).collect();

    let mut loadings = vec![0.0; k * k];
    for (c, &src) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for f in 1..k {
            if v[f].abs() > v[pivot].abs() {
                pivot = f;
            }
        }
        let s = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for f in 0..k {
            loadings[f * k + c] = s * v[f];
        }
    }
    let load_m = DMatrix::from_row_slice(k, k, &loadings);
    let scores_m = &data * &load_m;
    let mut scores = vec![0.0; m * k];
    for r in 0..m {
        for c in 0..k {
            scores[r * k + c] = scores_m[(r, c)];
        }
    }

    let row_labels = table.row_labels().to_vec();
    let mut top_words = Vec::with_capacity(k);
    let mut bottom_words = Vec::with_capacity(k);
    for c in 0..k {
        let mut ranked: Vec<usize> = (0..m).collect();
        ranked.sort_by(|&a, &b| scores[b * k + c].total_cmp(&scores[a * k + c]).then(a.cmp(&b)));
        let take = |idx: &mut dyn Iterator<Item = &usize>| {
            idx.take(opts.top_n)
                .map(|&r| ScoredWord { word: row_labels[r].clone(), score: scores[r * k + c] })
                .collect::<Vec<_>>()
        };
        top_words.push(take(&mut ranked.iter()));
        bottom_words.push(take(&mut ranked.iter().rev()));
    }

    Ok(PcaResult {
        standardized: opts.standardize,
        labels: kept.iter().map(|(c, _)| table.col_labels()[*c].clone()).collect(),
        dropped_columns: dropped,
        imputed_cells: imputed,
        row_labels,
        eigenvalues,
        variance_fraction,
        loadings,
        scores,
        top_words,
        bottom_words,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSurveyCorrelation {
    pub feature: String,
    pub n_words: usize,
    pub r_plain: Option<f64>,
    pub r_whitened: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub issues: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyComparison {
    pub features: Vec<FeatureSurveyCorrelation>,
    pub mean_plain: Option<f64>,
    pub mean_whitened: Option<f64>,
    /// `1 - mean_whitened / mean_plain`.
    pub relative_reduction: Option<f64>,
}

/// Per-feature correlation between projections and survey ratings over the
/// panel words. `survey` columns must be named after the features (see
/// [`SurveyRatings::as_features`]).
pub fn survey_compare(
    panel: &AlignedPanel,
    table: &ProjectionTable,
    survey: &SurveyRatings,
    whitened: Option<&ProjectionTable>,
) -> Result<SurveyComparison> {
    if panel.is_empty() {
        return Err(Error::Alignment("empty panel".into()));
    }
    let gather = |t: &ProjectionTable, col: usize| -> Vec<Option<f64>> {
        panel.words.iter().map(|w| t.row_index(w).map(|r| t.get(r, col))).collect()
    };
    let mut features = Vec::new();
    for (col, name) in table.col_features.iter().enumerate() {
        let Some(scale) = survey.scale_index(name) else { continue };
        let ratings: Vec<Option<f64>> =
            panel.words.iter().map(|w| survey.word_index(w).and_then(|i| survey.get(i, scale))).collect();
        let plain = gather(table, col);
        let n_words = plain.iter().zip(&ratings).filter(|(a, b)| a.is_some() && b.is_some()).count();
        let mut issues = Vec::new();
        let r_plain = pearson_pairwise(&plain, &ratings).map_err(|e| issues.push(format!("plain: {e}"))).ok();
        let r_whitened = whitened.and_then(|wt| {
            let Some(wc) = wt.col_features.iter().position(|c| c == name) else {
                issues.push("whitened: feature missing".into());
                return None;
            };
            pearson_pairwise(&gather(wt, wc), &ratings).map_err(|e| issues.push(format!("whitened: {e}"))).ok()
        });
        features.push(FeatureSurveyCorrelation { feature: name.clone(), n_words, r_plain, r_whitened, issues });
    }
    if features.is_empty() {
        return Err(Error::Alignment("no projection column matches a survey scale".into()));
    }
    let mean = |f: fn(&FeatureSurveyCorrelation) -> Option<f64>| {
        let v: Vec<f64> = features.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let mean_plain = mean(|f| f.r_plain);
    let mean_whitened = mean(|f| f.r_whitened);
    let relative_reduction = match (mean_plain, mean_whitened) {
        (Some(p), Some(w)) if p != 0.0 => Some(1.0 - w / p),
        _ => None,
    };
    Ok(SurveyComparison { features, mean_plain, mean_whitened, relative_reduction })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub pearson: Option<f64>,
    pub n: usize,
}

/// Ordinary least-squares line `y = slope * x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Validation("line fit needs at least two points".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Validation("line fit needs non-constant x".into()));
    }
    let slope = sxy / sxx;
    Ok(LineFit { slope, intercept: my - slope * mx, pearson: pearson(x, y).ok(), n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn table(cols: &[&str], rows: &[&[f64]]) -> ProjectionTable {
        ProjectionTable::new(
            (0..rows.len()).map(|i| format!("w{i}")).collect(),
            cols.iter().map(|s| s.to_string()).collect(),
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn pearson_closed_forms() {
        assert_abs_diff_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0, epsilon = 1e-15);
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        let x = [Some(1.0), None, Some(2.0), Some(3.0)];
        let y = [Some(2.0), Some(100.0), Some(4.0), Some(6.0)];
        assert_abs_diff_eq!(pearson_pairwise(&x, &y).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn identical_columns_correlate_fully() {
        let t = table(&["a", "b"], &[&[1.0, 1.0], &[2.0, 2.0], &[5.0, 5.0]]);
        let m = feature_correlation_matrix(&t).unwrap();
        assert_eq!(m.kind, MatrixKind::PearsonProjections);
        assert_abs_diff_eq!(m.get(0, 1).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(m.get(0, 0), Some(1.0));
    }

    #[test]
    fn constant_column_is_reported_missing() {
        let t = table(&["a", "b"], &[&[1.0, 1.0], &[2.0, 1.0], &[5.0, 1.0]]);
        let m = feature_correlation_matrix(&t).unwrap();
        assert_eq!(m.get(0, 1), None);
        assert_eq!(m.get(1, 1), None);
        assert_eq!(m.missing.len(), 2);
        assert!(feature_correlation_matrix(&table(&["a"], &[&[1.0], &[2.0]])).is_err());
    }

    #[test]
    fn cosine_matrix_closed_forms() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let d = vec![
            FeatureDirection::from_vector("x", vec![1.0, 0.0]).unwrap(),
            FeatureDirection::from_vector("y", vec![0.0, 1.0]).unwrap(),
            FeatureDirection::from_vector("z", vec![h, h]).unwrap(),
        ];
        let m = direction_cosine_matrix(&d).unwrap();
        assert_abs_diff_eq!(m.get(0, 1).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(0, 2).unwrap(), 0.7071, epsilon = 1e-4);
        assert_eq!(m.get(2, 2), Some(1.0));
        let bad = vec![d[0].clone(), FeatureDirection::from_vector("w", vec![1.0, 0.0, 0.0]).unwrap()];
        assert!(direction_cosine_matrix(&bad).is_err());
    }

    #[test]
    fn correspondence_self_and_negated() {
        let t = table(&["a", "b", "c"], &[&[1.0, 2.0, 0.0], &[2.0, 1.0, 1.0], &[5.0, 3.0, 0.5], &[0.0, 1.0, 3.0]]);
        let a = feature_correlation_matrix(&t).unwrap();
        assert_abs_diff_eq!(correspondence(&a, &a).unwrap().value, 1.0, epsilon = 1e-12);
        let mut neg = a.clone();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    neg.values[i * 3 + j] = neg.values[i * 3 + j].map(|v| -v);
                }
            }
        }
        let s = correspondence(&a, &neg).unwrap();
        assert_abs_diff_eq!(s.value, -1.0, epsilon = 1e-12);
        assert_eq!(s.n_pairs, 3);

        let shuffled = a.reordered(&["c".into(), "a".into(), "b".into()]).unwrap();
        assert_abs_diff_eq!(correspondence(&a, &shuffled).unwrap().value, 1.0, epsilon = 1e-12);

        let mut other = a.clone();
        other.labels[0] = "zzz".into();
        assert!(matches!(correspondence(&a, &other), Err(Error::Alignment(_))));
    }

    #[test]
    fn pca_identical_columns() {
        let t = table(&["a", "b"], &[&[1.0, 1.0], &[2.0, 2.0], &[4.0, 4.0], &[-1.0, -1.0]]);
        for standardize in [true, false] {
            let p = pca(&t, standardize).unwrap();
            assert_abs_diff_eq!(p.variance_fraction[0], 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(p.variance_fraction.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!(p.loading(0, 0) > 0.0);
        }
    }

    #[test]
    fn pca_drops_constant_and_imputes_missing() {
        let s = SurveyRatings::new(
            (0..4).map(|i| format!("w{i}")).collect(),
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                Some(1.0), Some(3.0), Some(7.0),
                Some(2.0), None, Some(7.0),
                Some(3.0), Some(1.0), Some(7.0),
                Some(5.0), Some(2.0), Some(7.0),
            ],
        )
        .unwrap();
        let p = pca(&s, true).unwrap();
        assert_eq!(p.labels, vec!["a", "b"]);
        assert_eq!(p.dropped_columns.len(), 1);
        assert_eq!(p.imputed_cells, 1);
        assert_eq!(p.top_words[0].len(), 4);
        assert_eq!(p.top_words[0][0].word, p.bottom_words[0][3].word);
    }

    #[test]
    fn line_fit() {
        let f = fit_line(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert_abs_diff_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.intercept, 1.0, epsilon = 1e-12);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }
}
