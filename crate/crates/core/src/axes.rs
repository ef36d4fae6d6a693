//! Feature directions and the operations built on them.
//!
//! A feature direction is the normalized mean of the normalized differences
//! between the vectors of its antonym pairs. Tokens are scored against a
//! direction by cosine similarity. Steering moves one token row along a
//! direction by a fixed fraction of its own norm and then restores the norm.
//!
//! Storage is `f32`; every accumulation here runs in `f64`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::embed_store::{resolve_word, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::lexicon::{AntonymPair, FeatureLexicon, FeatureSpec};
use crate::par;

/// Norm below which the mean pair difference is considered degenerate.
pub const DEGENERATE_NORM: f64 = 1e-10;

/// Default steering magnitude as a fraction of the token norm.
pub const DEFAULT_SCALE: f64 = 0.35;

/// Default eigenvalue floor for whitening, relative to the largest eigenvalue.
pub const DEFAULT_EIGEN_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    PositiveUnresolved,
    NegativeUnresolved,
    SameToken,
    ZeroDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub pair: AntonymPair,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDirection {
    pub name: String,
    pub vector: Vec<f64>,
    /// Antonym pairs that contributed. Zero for directions not built from pairs.
    pub n_pairs_used: usize,
    pub pairs_skipped: Vec<SkippedPair>,
}

impl FeatureDirection {
    /// Wraps an arbitrary vector, normalizing it.
    pub fn from_vector(name: impl Into<String>, vector: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let norm = l2(&vector);
        if !(norm >= DEGENERATE_NORM) || vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateDirection(name));
        }
        Ok(Self {
            name,
            vector: vector.into_iter().map(|x| x / norm).collect(),
            n_pairs_used: 0,
            pairs_skipped: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn cosine(&self, other: &FeatureDirection) -> f64 {
        cosine(&self.vector, &other.vector)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, clamped to [-1, 1]. Zero vectors give 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let denom = l2(a) * l2(b);
    if denom == 0.0 {
        return 0.0;
    }
    (dot(a, b) / denom).clamp(-1.0, 1.0)
}

fn cosine_f32(w: &[f32], d: &[f64], d_norm: f64) -> Option<f64> {
    let mut ww = 0.0;
    let mut wd = 0.0;
    for (&x, &y) in w.iter().zip(d) {
        let x = f64::from(x);
        ww += x * x;
        wd += x * y;
    }
    let denom = ww.sqrt() * d_norm;
    (denom > 0.0).then(|| (wd / denom).clamp(-1.0, 1.0))
}

pub fn extract_direction(space: &EmbeddingSpace, feature: &FeatureSpec) -> Result<FeatureDirection> {
    let n = space.dim();
    let mut acc = vec![0.0f64; n];
    let mut used = 0usize;
    let mut skipped = Vec::new();
    for pair in &feature.pairs {
        let pos = resolve_word(space, &pair.positive).token_id;
        let neg = resolve_word(space, &pair.negative).token_id;
        let reason = match (pos, neg) {
            (None, _) => Some(SkipReason::PositiveUnresolved),
            (_, None) => Some(SkipReason::NegativeUnresolved),
            (Some(p), Some(q)) if p == q => Some(SkipReason::SameToken),
            _ => None,
        };
        if let Some(reason) = reason {
            skipped.push(SkippedPair { pair: pair.clone(), reason });
            continue;
        }
        let (p, q) = (space.row(pos.unwrap()), space.row(neg.unwrap()));
        let diff: Vec<f64> = p.iter().zip(q).map(|(&a, &b)| f64::from(a) - f64::from(b)).collect();
        let norm = l2(&diff);
        if norm == 0.0 {
            skipped.push(SkippedPair { pair: pair.clone(), reason: SkipReason::ZeroDifference });
            continue;
        }
        for (a, d) in acc.iter_mut().zip(&diff) {
            *a += d / norm;
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::Extraction {
            feature: feature.name.clone(),
            reason: format!("none of {} antonym pairs is usable", feature.pairs.len()),
        });
    }
    for a in acc.iter_mut() {
        *a /= used as f64;
    }
    let norm = l2(&acc);
    if norm < DEGENERATE_NORM {
        return Err(Error::DegenerateDirection(feature.name.clone()));
    }
    Ok(FeatureDirection {
        name: feature.name.clone(),
        vector: acc.into_iter().map(|x| x / norm).collect(),
        n_pairs_used: used,
        pairs_skipped: skipped,
    })
}

/// Extracts every feature of the lexicon, in lexicon order.
pub fn extract_all(space: &EmbeddingSpace, lexicon: &FeatureLexicon) -> Result<Vec<FeatureDirection>> {
    par::map_slice(lexicon.features(), |f| extract_direction(space, f)).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedRow {
    pub word: String,
    pub token_id: usize,
    pub reason: String,
}

/// Words x features matrix of cosine projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionTable {
    pub row_words: Vec<String>,
    pub col_features: Vec<String>,
    /// Row-major, `row_words.len() * col_features.len()` entries.
    pub values: Vec<f64>,
    #[serde(default)]
    pub excluded: Vec<ExcludedRow>,
}

impl ProjectionTable {
    pub fn new(row_words: Vec<String>, col_features: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != row_words.len() * col_features.len() {
            return Err(Error::Validation("projection table shape does not match labels".into()));
        }
        Ok(Self { row_words, col_features, values, excluded: Vec::new() })
    }

    pub fn n_rows(&self) -> usize {
        self.row_words.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_features.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.col_features.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let k = self.col_features.len();
        &self.values[row * k..(row + 1) * k]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.get(r, col)).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.col_features.iter().position(|c| c == name).map(|c| self.column(c))
    }

    pub fn row_index(&self, word: &str) -> Option<usize> {
        self.row_words.iter().position(|w| w == word)
    }
}

/// Projects tokens onto directions; rows are labeled with vocabulary strings.
pub fn project(space: &EmbeddingSpace, token_ids: &[usize], directions: &[FeatureDirection]) -> Result<ProjectionTable> {
    let rows: Vec<(String, usize)> = token_ids
        .iter()
        .map(|&id| {
            space.check_id(id)?;
            Ok((space.vocab().token(id).unwrap_or_default().to_string(), id))
        })
        .collect::<Result<_>>()?;
    project_labeled(space, &rows, directions)
}

/// Projects `(label, token id)` rows onto directions.
///
/// Zero-norm token rows are left out of the table and listed in
/// [`ProjectionTable::excluded`].
pub fn project_labeled(
    space: &EmbeddingSpace,
    rows: &[(String, usize)],
    directions: &[FeatureDirection],
) -> Result<ProjectionTable> {
    for d in directions {
        if d.dim() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: d.dim() });
        }
    }
    for (_, id) in rows {
        space.check_id(*id)?;
    }
    let norms: Vec<f64> = directions.iter().map(|d| l2(&d.vector)).collect();
    let computed = par::map_slice(rows, |(_, id)| {
        let w = space.row(*id);
        directions
            .iter()
            .zip(&norms)
            .map(|(d, &dn)| cosine_f32(w, &d.vector, dn))
            .collect::<Option<Vec<f64>>>()
    });
    let mut table = ProjectionTable {
        row_words: Vec::with_capacity(rows.len()),
        col_features: directions.iter().map(|d| d.name.clone()).collect(),
        values: Vec::with_capacity(rows.len() * directions.len()),
        excluded: Vec::new(),
    };
    for ((word, id), vals) in rows.iter().zip(computed) {
        match vals {
            Some(v) if !directions.is_empty() => {
                table.row_words.push(word.clone());
                table.values.extend(v);
            }
            Some(_) => table.row_words.push(word.clone()),
            None => table.excluded.push(ExcludedRow {
                word: word.clone(),
                token_id: *id,
                reason: "zero-norm token vector".into(),
            }),
        }
    }
    Ok(table)
}

/// A fitted whitening map `x -> transform * (x - mean)`, with
/// `transform = U diag(max(lambda, floor)^-1/2) U^T` from the covariance of
/// the space it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhitenedSpace {
    pub dim: usize,
    pub mean: Vec<f64>,
    /// Row-major `dim x dim`, symmetric.
    pub transform: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenvalue_floor: f64,
    pub n_clamped: usize,
}

impl WhitenedSpace {
    /// Builds a whitening map from explicit parts.
    pub fn from_parts(mean: Vec<f64>, transform: Vec<f64>) -> Result<Self> {
        let dim = mean.len();
        if transform.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: transform.len() });
        }
        Ok(Self { dim, mean, transform, eigenvalues: Vec::new(), eigenvalue_floor: 0.0, n_clamped: 0 })
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        let centered: Vec<f64> = v.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        Ok(self.transform.chunks_exact(self.dim).map(|row| dot(row, &centered)).collect())
    }

    fn apply_f32(&self, v: &[f32]) -> Vec<f32> {
        let centered: Vec<f64> = v.iter().zip(&self.mean).map(|(&x, m)| f64::from(x) - m).collect();
        self.transform.chunks_exact(self.dim).map(|row| dot(row, &centered) as f32).collect()
    }

    /// Applies the map to every row, producing a new space with the same
    /// vocabulary. Directions extracted from the result live in whitened
    /// coordinates.
    pub fn whiten_space(&self, space: &EmbeddingSpace) -> Result<EmbeddingSpace> {
        if space.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: space.dim() });
        }
        let ids: Vec<usize> = (0..space.len()).collect();
        let rows = par::map_chunks(&ids, 512, |chunk| {
            chunk.iter().flat_map(|&i| self.apply_f32(space.row(i))).collect::<Vec<f32>>()
        });
        let matrix: Vec<f32> = rows.into_iter().flatten().collect();
        EmbeddingSpace::new(space.vocab().clone(), matrix, space.dim())
    }
}

const COV_CHUNK: usize = 1024;

/// Column means and sample covariance (divisor `V - 1`) of all rows.
pub fn covariance(space: &EmbeddingSpace) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (v, n) = (space.len(), space.dim());
    if v < 2 {
        return Err(Error::Validation("covariance needs at least two rows".into()));
    }
    let ids: Vec<usize> = (0..v).collect();
    let partial_sums = par::map_chunks(&ids, COV_CHUNK, |chunk| {
        let mut s = vec![0.0f64; n];
        for &i in chunk {
            for (a, &x) in s.iter_mut().zip(space.row(i)) {
                *a += f64::from(x);
            }
        }
        s
    });
    let mut mean = vec![0.0f64; n];
    for s in &partial_sums {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= v as f64;
    }
    let partial_cov = par::map_chunks(&ids, COV_CHUNK, |chunk| {
        let block = DMatrix::from_fn(chunk.len(), n, |r, c| f64::from(space.row(chunk[r])[c]) - mean[c]);
        block.tr_mul(&block)
    });
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for p in &partial_cov {
        cov += p;
    }
    cov /= (v - 1) as f64;
    if cov.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("covariance has non-finite entries".into()));
    }
    Ok((mean, cov))
}

pub fn fit_whitening(space: &EmbeddingSpace) -> Result<WhitenedSpace> {
    fit_whitening_with_floor(space, DEFAULT_EIGEN_FLOOR)
}

/// Fits whitening, clamping eigenvalues below `floor_ratio` times the largest.
pub fn fit_whitening_with_floor(space: &EmbeddingSpace, floor_ratio: f64) -> Result<WhitenedSpace> {
    let (mean, cov) = covariance(space)?;
    let n = cov.nrows();
    let eig = SymmetricEigen::new(cov);
    let max_ev = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if !(max_ev > 0.0) {
        return Err(Error::Validation("covariance is zero; nothing to whiten".into()));
    }
    let floor = floor_ratio * max_ev;
    let mut n_clamped = 0;
    let inv_sqrt: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| {
            if l < floor {
                n_clamped += 1;
            }
            1.0 / l.max(floor).sqrt()
        })
        .collect();
    let u = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(n, n, |r, c| u[(r, c)] * inv_sqrt[c]);
    let t = &scaled * u.transpose();
    let mut transform = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            transform[r * n + c] = 0.5 * (t[(r, c)] + t[(c, r)]);
        }
    }
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok(WhitenedSpace { dim: n, mean, transform, eigenvalues, eigenvalue_floor: floor, n_clamped })
}

pub fn apply_whitening(ws: &WhitenedSpace, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    vectors.iter().map(|v| ws.apply(v)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct InterventionSpec<'a> {
    pub token_id: usize,
    pub feature: &'a FeatureDirection,
    pub sign: Sign,
    /// Steering magnitude as a fraction of the token norm.
    pub scale_c: f64,
}

impl<'a> InterventionSpec<'a> {
    pub fn new(token_id: usize, feature: &'a FeatureDirection, sign: Sign) -> Self {
        Self { token_id, feature, sign, scale_c: DEFAULT_SCALE }
    }
}

/// `normalize(w + sign * c * |w| * d) * |w|`, with `d` assumed unit length.
///
/// Returns `None` for a zero-norm `w`.
pub fn steer_vector(w: &[f32], direction: &[f64], sign: Sign, scale_c: f64) -> Option<Vec<f64>> {
    let w64: Vec<f64> = w.iter().map(|&x| f64::from(x)).collect();
    let norm = l2(&w64);
    if !(norm > 0.0) {
        return None;
    }
    let step = sign.value() * scale_c * norm;
    let moved: Vec<f64> = w64.iter().zip(direction).map(|(x, d)| x + step * d).collect();
    let moved_norm = l2(&moved);
    if !(moved_norm > 0.0) {
        return None;
    }
    Some(moved.into_iter().map(|x| x * norm / moved_norm).collect())
}

/// Steers one token row, returning a new space that shares all other rows.
///
/// `scale_c == 0` is accepted and leaves the space unchanged.
pub fn intervene(space: &EmbeddingSpace, spec: &InterventionSpec<'_>) -> Result<EmbeddingSpace> {
    space.check_id(spec.token_id)?;
    if spec.feature.dim() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: spec.feature.dim() });
    }
    if !(spec.scale_c >= 0.0) || !spec.scale_c.is_finite() {
        return Err(Error::Validation(format!("intervention scale must be a non-negative number, got {}", spec.scale_c)));
    }
    let w = space.row(spec.token_id);
    let steered = steer_vector(w, &spec.feature.vector, spec.sign, spec.scale_c).ok_or_else(|| {
        Error::Validation(format!("token {} has a zero-norm vector and cannot be steered", spec.token_id))
    })?;
    if spec.scale_c == 0.0 {
        return Ok(space.clone());
    }
    space.with_row(spec.token_id, steered.into_iter().map(|x| x as f32).collect())
}

/// Embedding-level prediction of steering side effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedOffTarget {
    pub target_feature: String,
    pub offtarget_feature: String,
    pub cosine: f64,
    /// Mean over tokens of `cos(w', d_g) - cos(w, d_g)`.
    pub mean_delta: f64,
    pub mean_abs_delta: f64,
    pub n_tokens: usize,
}

/// For target direction `target`, steers each token along it and reports,
/// for every other direction, the mean change in the token's projection.
pub fn predicted_offtarget(
    directions: &[FeatureDirection],
    target: usize,
    space: &EmbeddingSpace,
    token_ids: &[usize],
    sign: Sign,
    scale_c: f64,
) -> Result<Vec<PredictedOffTarget>> {
    let d_f = directions
        .get(target)
        .ok_or_else(|| Error::Validation(format!("target index {target} out of range")))?;
    for d in directions {
        if d.dim() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: d.dim() });
        }
    }
    if !(scale_c >= 0.0) || !scale_c.is_finite() {
        return Err(Error::Validation(format!("intervention scale must be a non-negative number, got {scale_c}")));
    }
    if token_ids.is_empty() {
        return Err(Error::Validation("no tokens to steer".into()));
    }
    for &id in token_ids {
        space.check_id(id)?;
    }
    let norms: Vec<f64> = directions.iter().map(|d| l2(&d.vector)).collect();
    let per_token = par::map_slice(token_ids, |&id| -> Result<Vec<f64>> {
        let w = space.row(id);
        let steered = steer_vector(w, &d_f.vector, sign, scale_c)
            .ok_or_else(|| Error::Validation(format!("token {id} has a zero-norm vector and cannot be steered")))?;
        let steered: Vec<f32> = steered.into_iter().map(|x| x as f32).collect();
        Ok(directions
            .iter()
            .zip(&norms)
            .map(|(d, &dn)| {
                let before = cosine_f32(w, &d.vector, dn).unwrap_or(0.0);
                let after = cosine_f32(&steered, &d.vector, dn).unwrap_or(0.0);
                after - before
            })
            .collect())
    });
    let mut sum = vec![0.0; directions.len()];
    let mut abs_sum = vec![0.0; directions.len()];
    for deltas in per_token {
        for (g, delta) in deltas?.into_iter().enumerate() {
            sum[g] += delta;
            abs_sum[g] += delta.abs();
        }
    }
    let m = token_ids.len() as f64;
    Ok(directions
        .iter()
        .enumerate()
        .filter(|&(g, _)| g != target)
        .map(|(g, d_g)| PredictedOffTarget {
            target_feature: d_f.name.clone(),
            offtarget_feature: d_g.name.clone(),
            cosine: d_f.cosine(d_g),
            mean_delta: sum[g] / m,
            mean_abs_delta: abs_sum[g] / m,
            n_tokens: token_ids.len(),
        })
        .collect())
}

/// [`predicted_offtarget`] for every target, target-major.
pub fn predicted_offtarget_all(
    directions: &[FeatureDirection],
    space: &EmbeddingSpace,
    token_ids: &[usize],
    sign: Sign,
    scale_c: f64,
) -> Result<Vec<PredictedOffTarget>> {
    let mut out = Vec::new();
    for f in 0..directions.len() {
        out.extend(predicted_offtarget(directions, f, space, token_ids, sign, scale_c)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pair_space(rows: Vec<(&str, Vec<f32>)>) -> EmbeddingSpace {
        EmbeddingSpace::from_rows(rows).unwrap()
    }

    #[test]
    fn single_pair_is_normalized_difference() {
        let s = pair_space(vec![("hot", vec![2.0, 0.0]), ("cold", vec![0.0, 0.0])]);
        let d = extract_direction(&s, &FeatureSpec::new("hot-cold", vec![AntonymPair::new("hot", "cold")])).unwrap();
        assert_eq!(d.vector, vec![1.0, 0.0]);
        assert_eq!(d.n_pairs_used, 1);
    }

    #[test]
    fn two_orthogonal_pairs() {
        let s = pair_space(vec![
            ("a", vec![1.0, 0.0]),
            ("b", vec![0.0, 0.0]),
            ("c", vec![0.0, 1.0]),
            ("e", vec![0.0, 0.0]),
        ]);
        let f = FeatureSpec::new("x", vec![AntonymPair::new("a", "b"), AntonymPair::new("c", "e")]);
        let d = extract_direction(&s, &f).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(d.vector[0], h, epsilon = 1e-12);
        assert_abs_diff_eq!(d.vector[1], h, epsilon = 1e-12);
    }

    #[test]
    fn skipped_pairs_are_reported() {
        let s = pair_space(vec![("a", vec![1.0, 0.0]), ("b", vec![0.0, 0.0]), ("c", vec![0.0, 0.0])]);
        let f = FeatureSpec::new(
            "x",
            vec![
                AntonymPair::new("a", "b"),
                AntonymPair::new("zz", "b"),
                AntonymPair::new("a", "qq"),
                AntonymPair::new("b", "c"),
            ],
        );
        let d = extract_direction(&s, &f).unwrap();
        assert_eq!(d.n_pairs_used, 1);
        let reasons: Vec<SkipReason> = d.pairs_skipped.iter().map(|p| p.reason).collect();
        assert_eq!(
            reasons,
            vec![SkipReason::PositiveUnresolved, SkipReason::NegativeUnresolved, SkipReason::ZeroDifference]
        );

        let none = FeatureSpec::new("y", vec![AntonymPair::new("zz", "b")]);
        assert!(matches!(extract_direction(&s, &none), Err(Error::Extraction { .. })));
    }

    #[test]
    fn opposing_pairs_are_degenerate() {
        let s = pair_space(vec![("a", vec![1.0, 0.0]), ("b", vec![0.0, 0.0])]);
        let f = FeatureSpec::new("x", vec![AntonymPair::new("a", "b"), AntonymPair::new("b", "a")]);
        assert!(matches!(extract_direction(&s, &f), Err(Error::DegenerateDirection(_))));
    }

    #[test]
    fn projection_basics() {
        let s = pair_space(vec![("x", vec![1.0, 0.0]), ("y", vec![0.0, 1.0]), ("z", vec![0.0, 0.0])]);
        let d = FeatureDirection::from_vector("f", vec![1.0, 0.0]).unwrap();
        let t = project(&s, &[0, 1, 2], &[d]).unwrap();
        assert_eq!(t.row_words, vec!["x", "y"]);
        assert_eq!(t.values, vec![1.0, 0.0]);
        assert_eq!(t.excluded.len(), 1);
        assert_eq!(t.excluded[0].token_id, 2);
        assert!(project(&s, &[7], &[]).is_err());
        let bad = FeatureDirection::from_vector("g", vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(project(&s, &[0], &[bad]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn whitening_closed_forms() {
        // 2000 rows (+-a, 0), (0, +-b) scaled so the sample covariance is diag(4, 1)
        let a = (4.0f64 * 1999.0 / 1000.0).sqrt() as f32;
        let b = (1999.0f64 / 1000.0).sqrt() as f32;
        let mut rows = Vec::new();
        for i in 0..500 {
            for s in [1.0f32, -1.0] {
                rows.push((format!("a{i}{s}"), vec![a * s, 0.0]));
                rows.push((format!("b{i}{s}"), vec![0.0, b * s]));
            }
        }
        let space = EmbeddingSpace::from_rows(rows).unwrap();
        let ws = fit_whitening(&space).unwrap();
        let t = &ws.transform;
        assert_abs_diff_eq!(t[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(t[3], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(t[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(t[2], 0.0, epsilon = 1e-9);
        assert_eq!(ws.n_clamped, 0);
    }

    #[test]
    fn apply_identity() {
        let ws = WhitenedSpace::from_parts(vec![0.0; 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(apply_whitening(&ws, &[vec![3.0, -4.0]]).unwrap(), vec![vec![3.0, -4.0]]);
        assert!(ws.apply(&[1.0]).is_err());
    }

    #[test]
    fn intervention_closed_form() {
        let s = pair_space(vec![("w", vec![1.0, 0.0])]);
        let d = FeatureDirection::from_vector("f", vec![0.0, 1.0]).unwrap();
        let up = intervene(&s, &InterventionSpec::new(0, &d, Sign::Positive)).unwrap();
        assert_abs_diff_eq!(up.row(0)[0], 0.9439, epsilon = 1e-4);
        assert_abs_diff_eq!(up.row(0)[1], 0.3304, epsilon = 1e-4);
        let down = intervene(&s, &InterventionSpec::new(0, &d, Sign::Negative)).unwrap();
        assert_abs_diff_eq!(down.row(0)[0], 0.9439, epsilon = 1e-4);
        assert_abs_diff_eq!(down.row(0)[1], -0.3304, epsilon = 1e-4);
        assert_eq!(s.row(0), &[1.0, 0.0]);

        let zero = pair_space(vec![("w", vec![0.0, 0.0])]);
        assert!(intervene(&zero, &InterventionSpec::new(0, &d, Sign::Positive)).is_err());
        let mut spec = InterventionSpec::new(0, &d, Sign::Positive);
        spec.scale_c = -0.1;
        assert!(intervene(&s, &spec).is_err());
        spec.scale_c = 0.0;
        assert_eq!(intervene(&s, &spec).unwrap(), s);
    }

    #[test]
    fn offtarget_orthogonal_geometry() {
        let s = pair_space(vec![("w", vec![0.0, 0.0, 1.0])]);
        let dirs = vec![
            FeatureDirection::from_vector("f", vec![1.0, 0.0, 0.0]).unwrap(),
            FeatureDirection::from_vector("g", vec![0.0, 1.0, 0.0]).unwrap(),
            FeatureDirection::from_vector("f2", vec![1.0, 0.0, 0.0]).unwrap(),
        ];
        let rows = predicted_offtarget(&dirs, 0, &s, &[0], Sign::Positive, 0.35).unwrap();
        assert_eq!(rows.len(), 2);
        assert_abs_diff_eq!(rows[0].mean_delta, 0.0, epsilon = 1e-9);
        assert!(rows[1].mean_delta > rows[0].mean_delta);
        assert_eq!(rows[1].cosine, 1.0);
    }
}
