//! Dataset ingestion, centering, mask application, masked-data persistence,
//! and mean imputation.
//!
//! On disk, masked entries are empty CSV fields (the text "NaN" is also
//! accepted on read). In memory, the mask lives in per-row observation
//! patterns and masked payload cells are zeroed, so arithmetic never
//! silently propagates missingness.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::adversary::{sample_pattern_index, MissingnessMechanism, ObservationPattern};
use crate::error::{Error, Result};
use crate::seed::row_rng;

/// A fully observed dataset: named columns over an n×d value matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    values: DMatrix<f64>,
    centered: bool,
}

impl Dataset {
    pub fn new(columns: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if columns.len() != values.ncols() {
            return Err(Error::Dimension(format!(
                "{} column names for {} columns",
                columns.len(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("non-finite entry in dataset".into()));
        }
        Ok(Dataset {
            columns,
            values,
            centered: false,
        })
    }

    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let columns = (1..=values.ncols()).map(|j| j.to_string()).collect();
        Dataset::new(columns, values)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Subtracts each column's mean.
    pub fn center(mut self) -> Self {
        for j in 0..self.values.ncols() {
            let mean = self.values.column(j).mean();
            for i in 0..self.values.nrows() {
                self.values[(i, j)] -= mean;
            }
        }
        self.centered = true;
        self
    }

    /// Empirical second-moment matrix XᵀX / n.
    pub fn empirical_covariance(&self) -> DMatrix<f64> {
        let n = self.n_rows() as f64;
        self.values.transpose() * &self.values / n
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.values.row(i).transpose()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        write_csv(&mut w, &self.columns, self.n_rows(), |i, j| {
            Some(self.values[(i, j)])
        })
        .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Loads a fully observed CSV (header row mandatory, no missing cells).
/// With `center`, the columns are shifted to mean zero.
pub fn load_dataset(path: impl AsRef<Path>, center: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let (columns, rows) = read_csv(path, false)?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::Precondition(format!(
            "{}: dataset has no data rows",
            path.display()
        )));
    }
    let d = columns.len();
    let mut values = DMatrix::zeros(n, d);
    for (i, row) in rows.iter().enumerate() {
        for j in 0..d {
            values[(i, j)] = row[j].expect("checked by read_csv");
        }
    }
    let ds = Dataset::new(columns, values)?;
    Ok(if center { ds.center() } else { ds })
}

/// A dataset with per-row observation patterns; masked payload cells are
/// zeroed and only reachable through the mask-aware accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedDataset {
    columns: Vec<String>,
    values: DMatrix<f64>,
    patterns: Vec<ObservationPattern>,
}

impl MaskedDataset {
    pub fn new(
        columns: Vec<String>,
        mut values: DMatrix<f64>,
        patterns: Vec<ObservationPattern>,
    ) -> Result<Self> {
        if columns.len() != values.ncols() {
            return Err(Error::Dimension("column name count mismatch".into()));
        }
        if patterns.len() != values.nrows() {
            return Err(Error::Dimension("one pattern per row required".into()));
        }
        for (i, p) in patterns.iter().enumerate() {
            p.check_dim(values.ncols())?;
            for j in 0..values.ncols() {
                if p.is_observed(j) {
                    if !values[(i, j)].is_finite() {
                        return Err(Error::Precondition(format!(
                            "non-finite observed entry at row {i}, column {j}"
                        )));
                    }
                } else {
                    values[(i, j)] = 0.0;
                }
            }
        }
        Ok(MaskedDataset {
            columns,
            values,
            patterns,
        })
    }

    /// View of a fully observed dataset as a masked one.
    pub fn fully_observed(ds: &Dataset) -> Self {
        MaskedDataset {
            columns: ds.columns().to_vec(),
            values: ds.values().clone(),
            patterns: vec![ObservationPattern::all_observed(ds.n_cols()); ds.n_rows()],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn patterns(&self) -> &[ObservationPattern] {
        &self.patterns
    }

    pub fn pattern(&self, i: usize) -> &ObservationPattern {
        &self.patterns[i]
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        if self.patterns[i].is_observed(j) {
            Some(self.values[(i, j)])
        } else {
            None
        }
    }

    /// Observed sub-vector of a row, in ascending column order.
    pub fn observed_values(&self, i: usize) -> DVector<f64> {
        let obs = self.patterns[i].observed_indices();
        DVector::from_iterator(obs.len(), obs.iter().map(|&j| self.values[(i, j)]))
    }

    /// Payload matrix with masked entries zeroed.
    pub fn masked_values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn overall_missing_rate(&self) -> f64 {
        let total = (self.n_rows() * self.n_cols()) as f64;
        let masked: usize = self.patterns.iter().map(|p| p.masked_count()).sum();
        masked as f64 / total
    }

    pub fn column_missing_rates(&self) -> Vec<f64> {
        let n = self.n_rows() as f64;
        (0..self.n_cols())
            .map(|j| {
                self.patterns
                    .iter()
                    .filter(|p| !p.is_observed(j))
                    .count() as f64
                    / n
            })
            .collect()
    }

    /// Mean missing rate over a column subset.
    pub fn missing_rate_on(&self, cols: &[usize]) -> f64 {
        let rates = self.column_missing_rates();
        cols.iter().map(|&j| rates[j]).sum::<f64>() / cols.len() as f64
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_masked(self, path)
    }
}

/// Draws one observation pattern per row from the mechanism. Row i uses its
/// own counter-derived sub-stream of `seed`, so the result is reproducible
/// and independent of evaluation order.
pub fn apply_mechanism(
    ds: &Dataset,
    mech: &dyn MissingnessMechanism,
    seed: u64,
) -> Result<MaskedDataset> {
    if mech.dim() != ds.n_cols() {
        return Err(Error::Dimension(format!(
            "mechanism over {} variables applied to {} columns",
            mech.dim(),
            ds.n_cols()
        )));
    }
    let support = mech.support();
    let patterns: Vec<ObservationPattern> = (0..ds.n_rows())
        .map(|i| {
            let probs = mech.pattern_probs(&ds.row(i));
            let mut rng = row_rng(seed, i);
            support[sample_pattern_index(&probs, &mut rng)].clone()
        })
        .collect();
    MaskedDataset::new(ds.columns().to_vec(), ds.values().clone(), patterns)
}

/// Replaces each masked entry by its column's observed mean.
pub fn mean_impute(mds: &MaskedDataset) -> Result<Dataset> {
    let (n, d) = (mds.n_rows(), mds.n_cols());
    let mut means = vec![0.0f64; d];
    let mut counts = vec![0usize; d];
    for i in 0..n {
        for j in 0..d {
            if let Some(v) = mds.value(i, j) {
                means[j] += v;
                counts[j] += 1;
            }
        }
    }
    for j in 0..d {
        if counts[j] == 0 {
            return Err(Error::Imputation(format!(
                "column '{}' has no observed values",
                mds.columns()[j]
            )));
        }
        means[j] /= counts[j] as f64;
    }
    let mut values = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            values[(i, j)] = mds.value(i, j).unwrap_or(means[j]);
        }
    }
    Dataset::new(mds.columns().to_vec(), values)
}

/// Writes a masked dataset as CSV with empty cells for masked entries.
pub fn save_masked(mds: &MaskedDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    write_csv(&mut w, mds.columns(), mds.n_rows(), |i, j| mds.value(i, j))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a masked CSV; empty cells and "NaN" mark masked entries.
pub fn load_masked(path: impl AsRef<Path>) -> Result<MaskedDataset> {
    let path = path.as_ref();
    let (columns, rows) = read_csv(path, true)?;
    if rows.is_empty() {
        return Err(Error::Precondition(format!(
            "{}: dataset has no data rows",
            path.display()
        )));
    }
    let (n, d) = (rows.len(), columns.len());
    let mut values = DMatrix::zeros(n, d);
    let mut patterns = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        let mut bits = vec![false; d];
        for j in 0..d {
            if let Some(v) = row[j] {
                values[(i, j)] = v;
                bits[j] = true;
            }
        }
        patterns.push(ObservationPattern::new(bits));
    }
    MaskedDataset::new(columns, values, patterns)
}

fn write_csv<W: Write>(
    w: &mut W,
    columns: &[String],
    n_rows: usize,
    cell: impl Fn(usize, usize) -> Option<f64>,
) -> std::io::Result<()> {
    writeln!(w, "{}", columns.join(","))?;
    let d = columns.len();
    let mut line = String::new();
    for i in 0..n_rows {
        line.clear();
        for j in 0..d {
            if j > 0 {
                line.push(',');
            }
            if let Some(v) = cell(i, j) {
                line.push_str(&format_cell(v));
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Shortest round-trippable decimal representation.
fn format_cell(v: f64) -> String {
    let s = format!("{v}");
    debug_assert_eq!(s.parse::<f64>().ok(), Some(v));
    s
}

type CsvRows = (Vec<String>, Vec<Vec<Option<f64>>>);

fn read_csv(path: &Path, allow_missing: bool) -> Result<CsvRows> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: e.to_string(),
        })?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if columns.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: "empty header row".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line,
            msg: e.to_string(),
        })?;
        if record.len() != columns.len() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line,
                msg: format!("{} fields, expected {}", record.len(), columns.len()),
            });
        }
        let mut row = Vec::with_capacity(columns.len());
        for (j, field) in record.iter().enumerate() {
            let cell = if field.is_empty() || field.eq_ignore_ascii_case("nan") {
                if !allow_missing {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line,
                        msg: format!("missing value in column '{}'", columns[j]),
                    });
                }
                None
            } else {
                Some(field.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line,
                    msg: format!("non-numeric cell '{}' in column '{}'", field, columns[j]),
                })?)
            };
            row.push(cell);
        }
        rows.push(row);
    }
    Ok((columns, rows))
}
