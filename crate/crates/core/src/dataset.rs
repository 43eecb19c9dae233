//! Tabular data model shared by every stage of the pipeline.
//!
//! Matrices are dense and row-major. A missing cell is stored as `NaN`
//! and surfaced through [`FeatureMatrix::get`] as `None`; complete datasets
//! ([`LabeledDataset`]) never contain one.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Name of the label column in the CSV format.
pub const LABEL_COLUMN: &str = "outcome";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Binary,
    Categorical { level_count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default)]
    pub source_code: Option<String>,
    #[serde(default)]
    pub is_rare_lab: bool,
}

impl FeatureMeta {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: FeatureKind::Continuous, source_code: None, is_rare_lab: false }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: FeatureKind::Binary, source_code: None, is_rare_lab: false }
    }

    pub fn categorical(name: impl Into<String>, level_count: usize) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical { level_count },
            source_code: None,
            is_rare_lab: false,
        }
    }
}

/// Checks the per-feature and cross-feature metadata invariants.
pub fn validate_meta(meta: &[FeatureMeta]) -> Result<()> {
    let mut seen = HashSet::new();
    for m in meta {
        if let FeatureKind::Categorical { level_count } = m.kind {
            if level_count < 2 {
                return Err(Error::validation(format!(
                    "feature '{}' is categorical with {} levels (need at least 2)",
                    m.name, level_count
                )));
            }
        }
        if !seen.insert(m.name.as_str()) {
            return Err(Error::validation(format!("duplicate feature name '{}'", m.name)));
        }
    }
    Ok(())
}

pub fn read_meta(path: impl AsRef<Path>) -> Result<Vec<FeatureMeta>> {
    let meta: Vec<FeatureMeta> = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    validate_meta(&meta)?;
    Ok(meta)
}

pub fn write_meta(path: impl AsRef<Path>, meta: &[FeatureMeta]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, meta)?;
    w.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major values; `NaN` marks a missing cell.
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::validation(format!("matrix must be non-empty, got {n_rows}x{n_cols}")));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::validation(format!(
                "expected {} values for a {n_rows}x{n_cols} matrix, got {}",
                n_rows * n_cols,
                values.len()
            )));
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::validation("matrix contains an infinite value"));
        }
        Ok(Self { n_rows, n_cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_cols) {
            return Err(Error::validation(format!("row {i} has {} entries, expected {n_cols}", r.len())));
        }
        Self::new(rows.len(), n_cols, rows.concat())
    }

    pub fn from_optional_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let dense: Vec<Vec<f64>> =
            rows.iter().map(|r| r.iter().map(|v| v.unwrap_or(f64::NAN)).collect()).collect();
        Self::from_rows(&dense)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.values[row * self.n_cols + col];
        (!v.is_nan()).then_some(v)
    }

    /// Raw cell value; `NaN` when missing.
    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Option<f64>) {
        self.values[row * self.n_cols + col] = value.unwrap_or(f64::NAN);
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.value(i, col)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(|v| v.is_nan())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self::new(rows.len(), self.n_cols, values)
    }

    pub fn select_cols(&self, cols: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            let row = self.row(i);
            values.extend(cols.iter().map(|&c| row[c]));
        }
        Self::new(self.n_rows, cols.len(), values)
    }

    /// Overwrites the listed columns with the columns of `block`, in order.
    pub fn replace_cols(&mut self, cols: &[usize], block: &FeatureMatrix) -> Result<()> {
        if block.n_rows != self.n_rows || block.n_cols != cols.len() {
            return Err(Error::validation("replacement block shape mismatch"));
        }
        for i in 0..self.n_rows {
            for (k, &c) in cols.iter().enumerate() {
                self.values[i * self.n_cols + c] = block.value(i, k);
            }
        }
        Ok(())
    }
}

/// Complete features plus binary labels. Construction rejects missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x: FeatureMatrix,
    pub y: Vec<u8>,
    pub meta: Vec<FeatureMeta>,
}

impl LabeledDataset {
    pub fn new(x: FeatureMatrix, y: Vec<u8>, meta: Vec<FeatureMeta>) -> Result<Self> {
        if x.has_missing() {
            return Err(Error::validation(format!(
                "labeled dataset has {} missing cells; impute first",
                x.n_missing()
            )));
        }
        check_labels(&y, x.n_rows())?;
        check_meta_len(&meta, x.n_cols())?;
        validate_meta(&meta)?;
        Ok(Self { x, y, meta })
    }

    /// Convenience constructor with continuous features named `x0..`.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<u8>) -> Result<Self> {
        let x = FeatureMatrix::from_rows(rows)?;
        let meta = (0..x.n_cols()).map(|j| FeatureMeta::continuous(format!("x{j}"))).collect();
        Self::new(x, y, meta)
    }

    pub fn n_rows(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.n_cols()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.meta.iter().map(|m| m.name.clone()).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        class_counts(&self.y)
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Ok(Self {
            x: self.x.select_rows(rows)?,
            y: rows.iter().map(|&r| self.y[r]).collect(),
            meta: self.meta.clone(),
        })
    }

    pub fn with_x(&self, x: FeatureMatrix) -> Result<Self> {
        Self::new(x, self.y.clone(), self.meta.clone())
    }
}

/// Labels and features where cells may be missing; the on-disk form.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub x: FeatureMatrix,
    pub y: Vec<u8>,
    pub meta: Vec<FeatureMeta>,
}

impl RawDataset {
    pub fn new(x: FeatureMatrix, y: Vec<u8>, meta: Vec<FeatureMeta>) -> Result<Self> {
        check_labels(&y, x.n_rows())?;
        check_meta_len(&meta, x.n_cols())?;
        validate_meta(&meta)?;
        Ok(Self { x, y, meta })
    }

    pub fn into_labeled(self) -> Result<LabeledDataset> {
        LabeledDataset::new(self.x, self.y, self.meta)
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Ok(Self {
            x: self.x.select_rows(rows)?,
            y: rows.iter().map(|&r| self.y[r]).collect(),
            meta: self.meta.clone(),
        })
    }
}

impl From<LabeledDataset> for RawDataset {
    fn from(d: LabeledDataset) -> Self {
        Self { x: d.x, y: d.y, meta: d.meta }
    }
}

fn check_labels(y: &[u8], n_rows: usize) -> Result<()> {
    if y.len() != n_rows {
        return Err(Error::validation(format!("{} labels for {n_rows} rows", y.len())));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::validation(format!("label {bad} is not binary")));
    }
    Ok(())
}

fn check_meta_len(meta: &[FeatureMeta], n_cols: usize) -> Result<()> {
    if meta.len() != n_cols {
        return Err(Error::validation(format!("{} metadata entries for {n_cols} columns", meta.len())));
    }
    Ok(())
}

pub fn class_counts(y: &[u8]) -> [usize; 2] {
    let pos = y.iter().filter(|&&v| v == 1).count();
    [y.len() - pos, pos]
}

fn is_missing_token(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t == "NA"
}

/// Reads the CSV format: header row, `outcome` label column, `NA`/empty = missing.
///
/// When `schema` is given its names must equal the header's feature columns in
/// order; otherwise columns whose observed values are all 0/1 are typed binary
/// and the rest continuous.
pub fn load_dataset(path: impl AsRef<Path>, schema: Option<&[FeatureMeta]>) -> Result<RawDataset> {
    read_dataset(File::open(path)?, schema)
}

pub fn read_dataset<R: Read>(reader: R, schema: Option<&[FeatureMeta]>) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(Error::Parse { line: 1, message: "empty file: missing header row".into() }),
    };
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    let label_pos = names
        .iter()
        .position(|n| n == LABEL_COLUMN)
        .ok_or_else(|| Error::Parse { line: 1, message: format!("no '{LABEL_COLUMN}' column in header") })?;
    let feature_names: Vec<String> =
        names.iter().enumerate().filter(|&(i, _)| i != label_pos).map(|(_, n)| n.clone()).collect();
    if feature_names.is_empty() {
        return Err(Error::Parse { line: 1, message: "header has no feature columns".into() });
    }
    if let Some(s) = schema {
        let schema_names: Vec<&str> = s.iter().map(|m| m.name.as_str()).collect();
        let header_names: Vec<&str> = feature_names.iter().map(String::as_str).collect();
        if schema_names != header_names {
            return Err(Error::validation("CSV header does not match the feature metadata"));
        }
    }

    let mut values = Vec::new();
    let mut y = Vec::new();
    for (k, rec) in records.enumerate() {
        let line = k + 2;
        let rec = rec?;
        if rec.len() == 1 && rec.get(0).is_some_and(|s| s.trim().is_empty()) {
            continue;
        }
        if rec.len() != names.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", names.len(), rec.len()),
            });
        }
        for (i, field) in rec.iter().enumerate() {
            if i == label_pos {
                y.push(parse_label(field, line)?);
            } else if is_missing_token(field) {
                values.push(f64::NAN);
            } else {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("cannot parse '{}' in column '{}' as a number", field, names[i]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line, message: format!("non-finite value '{field}'") });
                }
                values.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::Parse { line: 2, message: "no data rows".into() });
    }
    let x = FeatureMatrix::new(y.len(), feature_names.len(), values)?;
    let meta = match schema {
        Some(s) => s.to_vec(),
        None => infer_meta(&x, &feature_names),
    };
    RawDataset::new(x, y, meta)
}

fn parse_label(field: &str, line: usize) -> Result<u8> {
    let t = field.trim();
    match t.parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(0),
        Ok(v) if v == 1.0 => Ok(1),
        _ => Err(Error::validation(format!("line {line}: label '{t}' is not 0 or 1"))),
    }
}

fn infer_meta(x: &FeatureMatrix, names: &[String]) -> Vec<FeatureMeta> {
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let binary = (0..x.n_rows()).filter_map(|i| x.get(i, j)).all(|v| v == 0.0 || v == 1.0);
            if binary {
                FeatureMeta::binary(name.clone())
            } else {
                FeatureMeta::continuous(name.clone())
            }
        })
        .collect()
}

/// Writes the CSV format with the label as the last column.
pub fn write_dataset<W: Write>(writer: W, x: &FeatureMatrix, y: &[u8], meta: &[FeatureMeta]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = meta.iter().map(|m| m.name.as_str()).collect();
    header.push(LABEL_COLUMN);
    w.write_record(&header)?;
    let mut buf = Vec::with_capacity(x.n_cols() + 1);
    for (i, label) in y.iter().enumerate() {
        buf.clear();
        buf.extend(x.row(i).iter().map(|v| if v.is_nan() { "NA".to_string() } else { format!("{v}") }));
        buf.push(label.to_string());
        w.write_record(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(path: impl AsRef<Path>, data: &RawDataset) -> Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), &data.x, &data.y, &data.meta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub constant_flags: Vec<bool>,
}

/// Centers and scales each column to population unit variance.
///
/// Without `stats`, per-column statistics are computed from `x`. With
/// `stats` (the held-out path) they are applied unchanged. Zero-variance
/// columns get std 1 and a constant flag.
pub fn standardize(x: &FeatureMatrix, stats: Option<&StandardizationStats>) -> Result<(FeatureMatrix, StandardizationStats)> {
    if x.has_missing() {
        return Err(Error::validation("cannot standardize a matrix with missing cells"));
    }
    let stats = match stats {
        Some(s) => {
            if s.means.len() != x.n_cols() || s.stds.len() != x.n_cols() || s.constant_flags.len() != x.n_cols() {
                return Err(Error::validation(format!(
                    "standardization stats cover {} columns, matrix has {}",
                    s.means.len(),
                    x.n_cols()
                )));
            }
            if s.stds.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
                return Err(Error::validation("standardization stds must be positive"));
            }
            s.clone()
        }
        None => column_stats(x),
    };
    let d = x.n_cols();
    let values = x
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let j = k % d;
            (v - stats.means[j]) / stats.stds[j]
        })
        .collect();
    Ok((FeatureMatrix::new(x.n_rows(), d, values)?, stats))
}

fn column_stats(x: &FeatureMatrix) -> StandardizationStats {
    let n = x.n_rows() as f64;
    let d = x.n_cols();
    let mut means = vec![0.0; d];
    let mut stds = vec![1.0; d];
    let mut constant_flags = vec![false; d];
    for j in 0..d {
        let mean = (0..x.n_rows()).map(|i| x.value(i, j)).sum::<f64>() / n;
        let var = (0..x.n_rows()).map(|i| (x.value(i, j) - mean).powi(2)).sum::<f64>() / n;
        means[j] = mean;
        let all_equal = (0..x.n_rows()).all(|i| x.value(i, j) == x.value(0, j));
        if all_equal || var <= f64::EPSILON * f64::EPSILON * mean.abs().max(1.0).powi(2) {
            // centering on the column's own value maps it to exactly zero
            means[j] = x.value(0, j);
            constant_flags[j] = true;
        } else {
            stds[j] = var.sqrt();
        }
    }
    StandardizationStats { means, stds, constant_flags }
}

/// Stratified split of row indices into `(train, test)`, each sorted ascending.
///
/// The test set gets `round(N * test_fraction)` rows, apportioned to classes
/// by largest remainder so each class is within one row of proportional.
pub fn stratified_split(y: &[u8], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::validation(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    let counts = class_counts(y);
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::validation(format!(
            "each class needs at least 2 samples to split, got {} negatives and {} positives",
            counts[0], counts[1]
        )));
    }
    let n = y.len();
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let exact: Vec<f64> = counts.iter().map(|&c| c as f64 * n_test as f64 / n as f64).collect();
    let mut alloc: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut remaining = n_test - alloc.iter().sum::<usize>();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &c in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if alloc[c] < counts[c] {
            alloc[c] += 1;
            remaining -= 1;
        }
    }

    let mut rng = seed::rng(seed, &[0x5917]);
    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..n).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        test.extend_from_slice(&idx[..alloc[class as usize]]);
        train.extend_from_slice(&idx[alloc[class as usize]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_train_test(data: &LabeledDataset, test_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = stratified_split(&data.y, test_fraction, seed)?;
    Ok((data.subset(&train)?, data.subset(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn csv_with_one_na_cell() {
        let csv = "a,b,outcome\n1,2,0\nNA,4,1\n5,6,1\n";
        let d = read_dataset(csv.as_bytes(), None).unwrap();
        assert_eq!(d.x.n_rows(), 3);
        assert_eq!(d.x.n_missing(), 1);
        assert_eq!(d.x.get(1, 0), None);
        assert_eq!(d.y, vec![0, 1, 1]);
    }

    #[test]
    fn empty_cell_is_missing() {
        let d = read_dataset("a,outcome\n,1\n2,0\n".as_bytes(), None).unwrap();
        assert_eq!(d.x.n_missing(), 1);
    }

    #[test]
    fn non_binary_label_is_validation_error() {
        let err = read_dataset("a,outcome\n1,2\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn empty_file_is_parse_error() {
        assert!(matches!(read_dataset("".as_bytes(), None), Err(Error::Parse { .. })));
        assert!(matches!(read_dataset("a,outcome\n".as_bytes(), None), Err(Error::Parse { .. })));
    }

    #[test]
    fn wrong_arity_reports_line() {
        let err = read_dataset("a,b,outcome\n1,2,0\n1,0\n".as_bytes(), None).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn schema_mismatch_rejected() {
        let schema = vec![FeatureMeta::continuous("b")];
        assert!(read_dataset("a,outcome\n1,0\n".as_bytes(), Some(&schema)).is_err());
    }

    #[test]
    fn meta_invariants() {
        assert!(validate_meta(&[FeatureMeta::categorical("c", 1)]).is_err());
        assert!(validate_meta(&[FeatureMeta::binary("a"), FeatureMeta::binary("a")]).is_err());
    }

    #[test]
    fn standardize_column_123() {
        let x = FeatureMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let (z, s) = standardize(&x, None).unwrap();
        assert!(approx(s.means[0], 2.0, 1e-15));
        assert!(approx(s.stds[0], (2.0f64 / 3.0).sqrt(), 1e-15));
        assert!(approx(z.value(0, 0), -1.224744871391589, 1e-12));
        assert!(approx(z.value(1, 0), 0.0, 1e-15));
        assert!(approx(z.value(2, 0), 1.224744871391589, 1e-12));
    }

    #[test]
    fn standardize_constant_column() {
        let x = FeatureMatrix::from_rows(&[vec![5.0], vec![5.0], vec![5.0]]).unwrap();
        let (z, s) = standardize(&x, None).unwrap();
        assert_eq!(z.column(0), vec![0.0, 0.0, 0.0]);
        assert!(s.constant_flags[0]);
        assert_eq!(s.stds[0], 1.0);
    }

    #[test]
    fn standardize_dimension_mismatch() {
        let x = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let stats = StandardizationStats { means: vec![0.0], stds: vec![1.0], constant_flags: vec![false] };
        assert!(standardize(&x, Some(&stats)).is_err());
    }

    #[test]
    fn split_balanced_ten() {
        let y = vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let (tr, te) = stratified_split(&y, 0.5, 3).unwrap();
        assert_eq!(tr.len(), 5);
        assert_eq!(te.len(), 5);
        let pos_tr = tr.iter().filter(|&&i| y[i] == 1).count();
        let pos_te = te.iter().filter(|&&i| y[i] == 1).count();
        assert!((pos_tr as i64 - pos_te as i64).abs() <= 1);
        assert_eq!(stratified_split(&y, 0.5, 3).unwrap(), (tr, te));
    }

    #[test]
    fn split_rejects_singleton_class() {
        assert!(stratified_split(&[1, 0, 0, 0], 0.5, 0).is_err());
    }
}
