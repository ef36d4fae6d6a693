//! Reading and writing analysis artifacts: CSV tables, versioned JSON
//! documents, direction files and simple SVG figures.
//!
//! Floating-point values are written in their shortest round-trip form, so a
//! table read back is bit-identical to the one written.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::axes::{FeatureDirection, ProjectionTable};
use crate::embed_store::{load_container, save_container, EmbeddingSpace, SEMX_MAGIC};
use crate::error::{Error, Result};
use crate::structure::{LineFit, MatrixKind, PcaResult, SquareMatrixReport};

/// Version of every JSON document written by this module.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub schema: String,
    pub schema_version: u32,
    pub toolkit_version: String,
    pub data: T,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `data` wrapped in a [`Document`] with the given schema name.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, schema: &str, data: &T) -> Result<()> {
    let doc = Document {
        schema: schema.to_string(),
        schema_version: SCHEMA_VERSION,
        toolkit_version: crate::VERSION.to_string(),
        data,
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Reads a [`Document`], checking schema name and version.
pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>, schema: &str) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: Document<T> =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if doc.schema != schema {
        return Err(Error::Format(format!("{}: expected schema `{schema}`, found `{}`", path.display(), doc.schema)));
    }
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!("{}: unsupported schema version {}", path.display(), doc.schema_version)));
    }
    Ok(doc.data)
}

/// `word,<feature...>` with one row per word.
pub fn write_projection_csv(table: &ProjectionTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = std::iter::once("word").chain(table.col_features.iter().map(String::as_str));
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for (r, word) in table.row_words.iter().enumerate() {
        let cells = std::iter::once(word.clone()).chain(table.row(r).iter().map(|x| x.to_string()));
        w.write_record(cells).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_projection_csv(path: impl AsRef<Path>) -> Result<ProjectionTable> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.get(0) != Some("word") {
        return Err(Error::Format(format!("{}: first column must be `word`", path.display())));
    }
    let cols: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i as u64 + 2;
        if rec.len() != cols.len() + 1 {
            return Err(Error::Parse { line, message: format!("expected {} fields, found {}", cols.len() + 1, rec.len()) });
        }
        rows.push(rec[0].to_string());
        for cell in rec.iter().skip(1) {
            values.push(cell.trim().parse::<f64>().map_err(|e| Error::Parse { line, message: format!("{cell:?}: {e}") })?);
        }
    }
    ProjectionTable::new(rows, cols, values)
}

/// `feature,<label...>`; undefined cells are left empty.
pub fn write_matrix_csv(report: &SquareMatrixReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = std::iter::once("feature").chain(report.labels.iter().map(String::as_str));
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for (i, label) in report.labels.iter().enumerate() {
        let cells = std::iter::once(label.clone())
            .chain((0..report.size()).map(|j| report.get(i, j).map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(cells).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix_csv(path: impl AsRef<Path>, kind: MatrixKind) -> Result<SquareMatrixReport> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let labels: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().skip(1).map(str::to_string).collect();
    let mut values = Vec::with_capacity(labels.len() * labels.len());
    let mut n_rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i as u64 + 2;
        if rec.len() != labels.len() + 1 || rec.get(0) != labels.get(i).map(String::as_str) {
            return Err(Error::Parse { line, message: "row does not match the header labels".into() });
        }
        for cell in rec.iter().skip(1) {
            let cell = cell.trim();
            values.push(if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|e| Error::Parse { line, message: format!("{cell:?}: {e}") })?)
            });
        }
        n_rows += 1;
    }
    if n_rows != labels.len() {
        return Err(Error::Format(format!("{}: matrix is not square", path.display())));
    }
    Ok(SquareMatrixReport { kind, labels, values, missing: Vec::new() })
}

/// Any serializable record type as CSV with a header row.
pub fn write_records_csv<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

/// Loadings as `feature,PC1,...` and the variance table as
/// `component,eigenvalue,variance_fraction,cumulative`.
pub fn write_pca_csv(result: &PcaResult, loadings: impl AsRef<Path>, variance: impl AsRef<Path>) -> Result<()> {
    let k = result.n_components();
    let path = loadings.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = std::iter::once("feature".to_string()).chain((1..=k).map(|c| format!("PC{c}"))).collect();
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (f, label) in result.labels.iter().enumerate() {
        let cells = std::iter::once(label.clone()).chain((0..k).map(|c| result.loading(f, c).to_string()));
        w.write_record(cells).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let path = variance.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["component", "eigenvalue", "variance_fraction", "cumulative"]).map_err(|e| csv_err(path, e))?;
    let mut cumulative = 0.0;
    for c in 0..k {
        cumulative += result.variance_fraction[c];
        let cells = [
            format!("PC{}", c + 1),
            result.eigenvalues[c].to_string(),
            result.variance_fraction[c].to_string(),
            cumulative.to_string(),
        ];
        w.write_record(&cells).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Directions as JSON, exact in `f64`.
pub fn save_directions(directions: &[FeatureDirection], path: impl AsRef<Path>) -> Result<()> {
    write_json(path, "directions", &directions)
}

/// Directions as a binary container with one row per feature (`f32`).
pub fn save_directions_container(directions: &[FeatureDirection], path: impl AsRef<Path>) -> Result<()> {
    let rows = directions.iter().map(|d| (d.name.clone(), d.vector.iter().map(|&x| x as f32).collect())).collect();
    save_container(&EmbeddingSpace::from_rows(rows)?, path)
}

/// Loads directions from either format. Container rows are renormalized
/// and carry no pair statistics.
pub fn load_directions(path: impl AsRef<Path>) -> Result<Vec<FeatureDirection>> {
    let path = path.as_ref();
    let head = fs::read(path).map_err(|e| Error::io(path, e))?;
    if head.starts_with(SEMX_MAGIC) {
        let space = load_container(path)?;
        return (0..space.len())
            .map(|i| FeatureDirection::from_vector(space.vocab().token(i).unwrap_or_default(), space.row_f64(i)))
            .collect();
    }
    read_json(path, "directions")
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Diverging blue-white-red fill for a value in [-1, 1]; grey when undefined.
fn diverging(v: Option<f64>) -> String {
    let Some(v) = v else { return "#cccccc".into() };
    let t = v.clamp(-1.0, 1.0);
    let fade = |full: f64| (255.0 - (255.0 - full) * t.abs()).round() as u8;
    let (r, g, b) = if t >= 0.0 { (fade(178.0), fade(24.0), fade(43.0)) } else { (fade(33.0), fade(102.0), fade(172.0)) };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heat map of a square matrix, cells coloured on [-1, 1].
pub fn heatmap_svg(report: &SquareMatrixReport, title: &str) -> String {
    let k = report.size();
    let cell = 18.0;
    let margin = 130.0;
    let side = margin + cell * k as f64 + 20.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}" height="{side}" font-family="sans-serif" font-size="10">"#);
    let _ = writeln!(s, r#"<text x="{}" y="16" font-size="13">{}</text>"#, margin, esc(title));
    for (i, label) in report.labels.iter().enumerate() {
        let y = margin + cell * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, margin - 4.0, y + cell * 0.7, esc(label));
        let x = margin + cell * i as f64 + cell * 0.7;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" transform="rotate(-60 {x} {})">{}</text>"#,
            margin - 4.0,
            margin - 4.0,
            esc(label)
        );
        for j in 0..k {
            let v = report.get(i, j);
            let title = v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "undefined".into());
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{y}" width="{cell}" height="{cell}" fill="{}"><title>{} / {}: {title}</title></rect>"#,
                margin + cell * j as f64,
                diverging(v),
                esc(label),
                esc(&report.labels[j]),
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Bar chart of explained variance per component.
pub fn scree_svg(result: &PcaResult) -> String {
    let (w, h, pad) = (520.0, 300.0, 40.0);
    let k = result.n_components().max(1);
    let top = result.variance_fraction.iter().copied().fold(0.0f64, f64::max).max(1e-12);
    let bar = (w - 2.0 * pad) / k as f64;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">"#);
    let _ = writeln!(s, r#"<text x="{pad}" y="20" font-size="13">Explained variance by component</text>"#);
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - pad, w - pad, h - pad);
    for (c, frac) in result.variance_fraction.iter().enumerate() {
        let bh = (h - 2.0 * pad - 10.0) * frac / top;
        let x = pad + bar * c as f64;
        let _ = writeln!(
            s,
            r##"<rect x="{x}" y="{}" width="{}" height="{bh}" fill="#4477aa"><title>PC{}: {:.2}%</title></rect>"##,
            h - pad - bh,
            (bar - 2.0).max(1.0),
            c + 1,
            frac * 100.0
        );
    }
    let _ = writeln!(s, r#"<text x="{pad}" y="{}">PC1</text>"#, h - pad + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">PC{}</text>"#, w - pad, h - pad + 14.0, result.n_components());
    s.push_str("</svg>\n");
    s
}

/// Scatter plot with an optional fitted line.
pub fn scatter_svg(points: &[(f64, f64)], x_label: &str, y_label: &str, fit: Option<&LineFit>) -> String {
    let (w, h, pad) = (480.0, 360.0, 50.0);
    let finite: Vec<(f64, f64)> = points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    let span = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = span(&mut finite.iter().map(|p| p.0));
    let (y0, y1) = span(&mut finite.iter().map(|p| p.1));
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">"#);
    let _ = writeln!(s, r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#, w - 2.0 * pad, h - 2.0 * pad);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, esc(x_label));
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#, h / 2.0, h / 2.0, esc(y_label));
    let _ = writeln!(s, r#"<text x="{pad}" y="{}">{x0:.3}</text><text x="{}" y="{}" text-anchor="end">{x1:.3}</text>"#, h - pad + 14.0, w - pad, h - pad + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y0:.3}</text><text x="{}" y="{}" text-anchor="end">{y1:.3}</text>"#, pad - 4.0, h - pad, pad - 4.0, pad + 8.0);
    for (x, y) in &finite {
        let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#4477aa" fill-opacity="0.7"/>"##, sx(*x), sy(*y));
    }
    if let Some(f) = fit {
        let (ya, yb) = (f.slope * x0 + f.intercept, f.slope * x1 + f.intercept);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#cc3311"/>"##,
            sx(x0),
            sy(ya),
            sx(x1),
            sy(yb)
        );
        let r = f.pearson.map(|r| format!(", r = {r:.3}")).unwrap_or_default();
        let _ = writeln!(s, r#"<text x="{}" y="{}">slope = {:.4}{r}</text>"#, pad + 4.0, pad - 8.0, f.slope);
    }
    s.push_str("</svg>\n");
    s
}
