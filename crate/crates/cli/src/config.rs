use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use locindex::dataset::{
    default_max_items, read_header, ColumnSpec, DEFAULT_ID_COLUMN, DEFAULT_JITTER_SD,
};
use locindex::smoothing::DEFAULT_GRID_SIZE;
use locindex::{BandwidthRule, LossKind, Schema};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossChoice {
    Mean,
    Median,
    Both,
}

impl LossChoice {
    pub fn kinds(self) -> Vec<LossKind> {
        match self {
            LossChoice::Mean => vec![LossKind::Quadratic],
            LossChoice::Median => vec![LossKind::median()],
            LossChoice::Both => vec![LossKind::Quadratic, LossKind::median()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Table,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Table => "table",
        })
    }
}

/// Options shared by every subcommand. Unset flags fall back to the config
/// file, then to the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// CSV file of integer counts with a header row
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,

    /// TOML config file
    #[arg(long, global = true, env = "LOCINDEX_CONFIG")]
    pub config: Option<PathBuf>,

    /// Count columns to read, comma separated (default: every non-id column)
    #[arg(long, global = true, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,

    /// Maximum possible count of each column, in column order
    #[arg(long, global = true, value_delimiter = ',')]
    pub max_items: Option<Vec<u32>>,

    /// Identifier column, never normalized
    #[arg(long, global = true)]
    pub id_column: Option<String>,

    #[arg(long, global = true, value_enum)]
    pub loss: Option<LossChoice>,

    /// Number of grid points of each fitted curve
    #[arg(long, global = true)]
    pub grid: Option<usize>,

    /// Number of pieces of the step approximation; must equal --grid
    #[arg(long, global = true)]
    pub m: Option<usize>,

    /// Standard deviation of the tie-breaking noise
    #[arg(long, global = true)]
    pub jitter_sd: Option<f64>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Fixed bandwidth instead of the plug-in rule
    #[arg(long, global = true)]
    pub bandwidth: Option<f64>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    input: Option<PathBuf>,
    columns: Option<Vec<String>>,
    max_items: Option<Vec<u32>>,
    id_column: Option<String>,
    loss: Option<LossChoice>,
    grid: Option<usize>,
    m: Option<usize>,
    jitter_sd: Option<f64>,
    seed: Option<u64>,
    bandwidth: Option<f64>,
    format: Option<Format>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        // relative input paths are taken relative to the config file
        if let (Some(input), Some(dir)) = (&cfg.input, path.parent()) {
            if input.is_relative() {
                cfg.input = Some(dir.join(input));
            }
        }
        Ok(cfg)
    }
}

pub const DEFAULT_SEED: u64 = 42;

/// Fully resolved settings of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub schema: Schema,
    pub loss: LossChoice,
    /// Grid size of fitted curves, which is also the step count `m`.
    pub grid_size: usize,
    pub jitter_sd: f64,
    pub seed: u64,
    pub bandwidth: BandwidthRule,
    pub format: Format,
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };

        let input = args
            .input
            .clone()
            .or(file.input)
            .context("no input file; pass --input or set `input` in the config")?;

        let grid = args.grid.or(file.grid);
        let m = args.m.or(file.m);
        let grid_size = match (grid, m) {
            (Some(g), Some(m)) if g != m => {
                bail!("--m ({m}) must equal --grid ({g}); the step function takes one piece per grid point")
            }
            (Some(g), _) | (None, Some(g)) => g,
            (None, None) => DEFAULT_GRID_SIZE,
        };
        if grid_size < 2 {
            bail!("grid size must be at least 2, got {grid_size}");
        }

        let jitter_sd = args
            .jitter_sd
            .or(file.jitter_sd)
            .unwrap_or(DEFAULT_JITTER_SD);
        if !(jitter_sd >= 0.0 && jitter_sd.is_finite()) {
            bail!("jitter sd must be a finite non-negative number, got {jitter_sd}");
        }

        let bandwidth = match args.bandwidth.or(file.bandwidth) {
            Some(b) if !(b > 0.0 && b.is_finite()) => bail!("bandwidth must be positive, got {b}"),
            Some(b) => BandwidthRule::Fixed(b),
            None => BandwidthRule::Dpi,
        };

        let id_column = args
            .id_column
            .clone()
            .or(file.id_column)
            .unwrap_or_else(|| DEFAULT_ID_COLUMN.to_string());
        let columns = args.columns.clone().or(file.columns);
        let max_items = args.max_items.clone().or(file.max_items);
        let schema = build_schema(&input, id_column, columns, max_items)?;

        Ok(Self {
            input,
            schema,
            loss: args.loss.or(file.loss).unwrap_or(LossChoice::Both),
            grid_size,
            jitter_sd,
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            bandwidth,
            format: args.format.or(file.format).unwrap_or(Format::Table),
        })
    }
}

fn build_schema(
    input: &Path,
    id_column: String,
    columns: Option<Vec<String>>,
    max_items: Option<Vec<u32>>,
) -> Result<Schema> {
    let columns = match columns {
        Some(c) => c,
        None => read_header(input)?
            .into_iter()
            .filter(|h| *h != id_column)
            .collect(),
    };
    if columns.is_empty() {
        bail!("{} has no count columns", input.display());
    }
    let max_items = match max_items {
        Some(m) if m.len() != columns.len() => bail!(
            "--max-items has {} values for {} columns ({})",
            m.len(),
            columns.len(),
            columns.join(",")
        ),
        Some(m) => m,
        None => columns
            .iter()
            .map(|c| {
                default_max_items(c)
                    .with_context(|| format!("no known maximum for column `{c}`; pass --max-items"))
            })
            .collect::<Result<_>>()?,
    };
    let specs = columns
        .into_iter()
        .zip(max_items)
        .map(|(name, max)| ColumnSpec::new(name, max))
        .collect();
    Ok(Schema::new(Some(id_column), specs)?)
}
