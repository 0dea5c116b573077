//! Ingestion of raw mark counts, normalization to the unit interval,
//! tie-breaking jitter and descriptive summaries.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{has_ties, Error, Result};

/// Recommended jitter standard deviation for breaking ties in mark data.
pub const DEFAULT_JITTER_SD: f64 = 1e-5;

/// Maximum number of re-draws `jitter` makes before giving up on ties.
pub const MAX_JITTER_RETRIES: usize = 100;

/// Name of the identifier column in the standard mark file layout.
pub const DEFAULT_ID_COLUMN: &str = "student_id";

/// One count column of the input file and its test length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub max_items: u32,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, max_items: u32) -> Self {
        Self {
            name: name.into(),
            max_items,
        }
    }
}

/// Which columns to read from a mark file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    /// Optional identifier column; read and kept, never normalized.
    pub id_column: Option<String>,
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new(id_column: Option<String>, columns: Vec<ColumnSpec>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidArgument("schema has no columns".into()));
        }
        if let Some(c) = columns.iter().find(|c| c.max_items == 0) {
            return Err(Error::InvalidArgument(format!(
                "max_items for `{}` must be positive",
                c.name
            )));
        }
        Ok(Self { id_column, columns })
    }

    /// Mathematics/reading/spelling layout with test lengths 65, 45 and 80.
    pub fn three_subjects() -> Self {
        Self {
            id_column: Some(DEFAULT_ID_COLUMN.to_string()),
            columns: ["mathematics", "reading", "spelling"]
                .iter()
                .map(|name| ColumnSpec::new(*name, default_max_items(name).unwrap()))
                .collect(),
        }
    }
}

/// Test length of the three standard subjects, by column name.
pub fn default_max_items(column: &str) -> Option<u32> {
    match column.to_ascii_lowercase().as_str() {
        "mathematics" => Some(65),
        "reading" => Some(45),
        "spelling" => Some(80),
        _ => None,
    }
}

/// Raw integer counts, one row per student, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScores {
    pub column_names: Vec<String>,
    pub ids: Option<Vec<String>>,
    pub rows: Vec<Vec<u32>>,
    pub max_items: Vec<u32>,
}

impl RawScores {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Reads the header row of a CSV file.
pub fn read_header(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().from_reader(file);
    let headers = reader.headers().map_err(|e| Error::Csv {
        row: 0,
        message: e.to_string(),
    })?;
    Ok(headers.iter().map(|h| h.trim().to_string()).collect())
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawScores> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, schema)
}

/// Parses mark data from any reader. Data rows are numbered from 1 in errors.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<RawScores> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();

    let locate = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let positions = schema
        .columns
        .iter()
        .map(|c| locate(&c.name))
        .collect::<Result<Vec<_>>>()?;
    // A missing id column is tolerated; it is only carried along.
    let id_position = schema
        .id_column
        .as_deref()
        .and_then(|name| headers.iter().position(|h| h == name));

    let mut rows = Vec::new();
    let mut ids = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        let mut counts = Vec::with_capacity(positions.len());
        for (spec, &pos) in schema.columns.iter().zip(&positions) {
            let cell = record.get(pos).unwrap_or("");
            let value: u32 = cell.parse().map_err(|_| Error::NotAnInteger {
                row,
                column: spec.name.clone(),
                value: cell.to_string(),
            })?;
            if value > spec.max_items {
                return Err(Error::CountExceedsMax {
                    row,
                    column: spec.name.clone(),
                    value,
                    max: spec.max_items,
                });
            }
            counts.push(value);
        }
        if let Some(pos) = id_position {
            ids.push(record.get(pos).unwrap_or("").to_string());
        }
        rows.push(counts);
    }
    if rows.is_empty() {
        return Err(Error::NoRows);
    }
    log::debug!("read {} rows", rows.len());

    Ok(RawScores {
        column_names: schema.columns.iter().map(|c| c.name.clone()).collect(),
        ids: id_position.map(|_| ids),
        rows,
        max_items: schema.columns.iter().map(|c| c.max_items).collect(),
    })
}

/// Columns of marks rescaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSample {
    pub column_names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl NormalizedSample {
    pub fn new(column_names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if column_names.len() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} columns",
                column_names.len(),
                columns.len()
            )));
        }
        if let Some(first) = columns.first() {
            if let Some(bad) = columns.iter().find(|c| c.len() != first.len()) {
                return Err(Error::LengthMismatch {
                    x: first.len(),
                    y: bad.len(),
                });
            }
        }
        if columns.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(
                "normalized values must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            column_names,
            columns,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.index_of(name).map(|i| self.columns[i].as_slice())
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }
}

/// Divides every count by its column's test length.
pub fn normalize(raw: &RawScores) -> NormalizedSample {
    let columns = (0..raw.column_names.len())
        .map(|j| {
            let max = f64::from(raw.max_items[j]);
            raw.rows.iter().map(|row| f64::from(row[j]) / max).collect()
        })
        .collect();
    NormalizedSample {
        column_names: raw.column_names.clone(),
        columns,
    }
}

/// Ordered pairs `(x_i, y_i)`: `x` explanatory, `y` response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PairedSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                x: x.len(),
                y: y.len(),
            });
        }
        if x.len() < 2 {
            return Err(Error::TooFewObservations {
                needed: 2,
                got: x.len(),
            });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite observation".into()));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Same pairs with the roles of `x` and `y` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }

    /// True when neither coordinate has repeated values.
    pub fn is_tie_free(&self) -> bool {
        !has_ties(&self.x) && !has_ties(&self.y)
    }
}

/// Builds the ordered pair (`x_name` explanatory, `y_name` response).
pub fn pair(sample: &NormalizedSample, x_name: &str, y_name: &str) -> Result<PairedSample> {
    let x = sample.column(x_name)?.to_vec();
    let y = sample.column(y_name)?.to_vec();
    PairedSample::new(x, y)
}

/// Adds independent `N(0, sd²)` noise to every coordinate.
///
/// The generator is ChaCha8 seeded with `seed`; if the result still has a
/// tie, the draw is repeated on the next stream of the same seed.
pub fn jitter(sample: &PairedSample, sd: f64, seed: u64) -> Result<PairedSample> {
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "jitter sd must be a finite non-negative number, got {sd}"
        )));
    }
    if sd == 0.0 {
        return Ok(sample.clone());
    }
    let noise = Normal::new(0.0, sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for attempt in 0..=MAX_JITTER_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let x: Vec<f64> = sample
            .x
            .iter()
            .map(|v| v + noise.sample(&mut rng))
            .collect();
        let y: Vec<f64> = sample
            .y
            .iter()
            .map(|v| v + noise.sample(&mut rng))
            .collect();
        let candidate = PairedSample { x, y };
        if candidate.is_tie_free() {
            return Ok(candidate);
        }
        log::debug!("jitter attempt {attempt} left ties, redrawing");
    }
    Err(Error::JitterTiesPersist(MAX_JITTER_RETRIES))
}

/// Descriptive summary of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub mean: f64,
    pub max: f64,
    pub sd: f64,
}

/// Quantile by linear interpolation between order statistics at plotting
/// positions `(k − 1)/(n − 1)`. `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Min, quartiles, mean, max and sample standard deviation (divisor `n − 1`).
pub fn summarize(column: &[f64]) -> Result<SummaryStats> {
    if column.is_empty() {
        return Err(Error::EmptyColumn);
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        let ss: f64 = sorted.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(SummaryStats {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        mean,
        max: sorted[n - 1],
        sd,
    })
}

/// Lower and upper edges of `bin_count` equal-width bins over `[min, max]`.
pub fn bin_edges(column: &[f64], bin_count: usize) -> Vec<f64> {
    let (lo, hi) = min_max(column);
    let width = (hi - lo) / bin_count as f64;
    (0..=bin_count)
        .map(|k| {
            if k == bin_count {
                hi
            } else {
                lo + k as f64 * width
            }
        })
        .collect()
}

/// Counts over equal-width, right-closed bins spanning `[min, max]`; the
/// first bin also holds the minimum.
pub fn histogram(column: &[f64], bin_count: usize) -> Vec<usize> {
    let bin_count = bin_count.max(1);
    let mut counts = vec![0; bin_count];
    if column.is_empty() {
        return counts;
    }
    let (lo, hi) = min_max(column);
    let width = (hi - lo) / bin_count as f64;
    for &v in column {
        let idx = if width > 0.0 && v > lo {
            ((v - lo) / width).ceil() as usize - 1
        } else {
            0
        };
        counts[idx.min(bin_count - 1)] += 1;
    }
    counts
}

fn min_max(column: &[f64]) -> (f64, f64) {
    column
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}
