use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use locindex::association::{
    association_report, empirical_ranks, loc_matrix, pair_loc, pair_seed, rank_step_function,
    MatrixSpec, PairLoc,
};
use locindex::dataset::{bin_edges, histogram, jitter, load_csv, normalize, pair, summarize};
use locindex::rearrangement::{increasing_rearrangement, loc_index, step_from_curve};
use locindex::{
    AssociationReport, LocMatrix, LossKind, MatrixEntry, NormalizedSample, PairedSample,
    SummaryStats,
};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::output::{self, fixed, method_name};

/// Whether every requested quantity was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Complete,
    Partial,
}

impl Status {
    fn from_failures(any: bool) -> Self {
        if any {
            Status::Partial
        } else {
            Status::Complete
        }
    }
}

pub struct Outcome {
    pub text: String,
    pub status: Status,
}

fn load(cfg: &RunConfig) -> Result<NormalizedSample> {
    let raw = load_csv(&cfg.input, &cfg.schema)?;
    log::info!("{} rows from {}", raw.len(), cfg.input.display());
    Ok(normalize(&raw))
}

/// The pair `(x, y)` and its column indices, which fix the jitter seed.
fn load_pair(cfg: &RunConfig, x: &str, y: &str) -> Result<(PairedSample, u64)> {
    let sample = load(cfg)?;
    let p = pair(&sample, x, y)?;
    let seed = pair_seed(cfg.seed, sample.index_of(x)?, sample.index_of(y)?);
    Ok((p, seed))
}

fn spec_for(cfg: &RunConfig, loss: LossKind) -> MatrixSpec {
    MatrixSpec {
        loss,
        bandwidth: cfg.bandwidth,
        grid_size: cfg.grid_size,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn x1000(v: Option<f64>) -> Option<f64> {
    v.map(|v| v * 1000.0)
}

fn cell(v: Option<f64>) -> String {
    v.map(fixed).unwrap_or_else(|| "NA".into())
}

#[derive(Serialize)]
struct ColumnSummary<'a> {
    name: &'a str,
    stats: SummaryStats,
    bin_edges: Vec<f64>,
    counts: Vec<usize>,
}

#[derive(Serialize)]
struct SummaryOutput<'a> {
    n: usize,
    columns: Vec<ColumnSummary<'a>>,
}

pub fn summarize_cmd(cfg: &RunConfig, bins: usize) -> Result<Outcome> {
    let sample = load(cfg)?;
    let columns = sample
        .column_names
        .iter()
        .zip(&sample.columns)
        .map(|(name, col)| {
            Ok(ColumnSummary {
                name,
                stats: summarize(col)?,
                bin_edges: bin_edges(col, bins),
                counts: histogram(col, bins),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let stat_rows = |c: &ColumnSummary| {
        let s = c.stats;
        [
            ("min", s.min),
            ("q1", s.q1),
            ("median", s.median),
            ("q3", s.q3),
            ("mean", s.mean),
            ("max", s.max),
            ("sd", s.sd),
        ]
    };
    let text = match cfg.format {
        Format::Json => output::json(&SummaryOutput {
            n: sample.len(),
            columns,
        })?,
        Format::Table => {
            let mut header = vec!["statistic".to_string()];
            header.extend(columns.iter().map(|c| c.name.to_string()));
            let per_column: Vec<_> = columns.iter().map(stat_rows).collect();
            let rows: Vec<Vec<String>> = (0..7)
                .map(|k| {
                    let mut row = vec![per_column[0][k].0.to_string()];
                    row.extend(per_column.iter().map(|r| fixed(r[k].1)));
                    row
                })
                .collect();
            let mut text = format!("n = {}\n", sample.len());
            text.push_str(&output::table(&header, &rows));
            for c in &columns {
                text.push_str(&format!("\nhistogram of {}\n", c.name));
                let rows: Vec<Vec<String>> = c
                    .counts
                    .iter()
                    .enumerate()
                    .map(|(k, n)| {
                        vec![
                            fixed(c.bin_edges[k]),
                            fixed(c.bin_edges[k + 1]),
                            n.to_string(),
                        ]
                    })
                    .collect();
                text.push_str(&output::table(
                    &["lower".into(), "upper".into(), "count".into()],
                    &rows,
                ));
            }
            text
        }
        Format::Csv => {
            let mut rows = Vec::new();
            for c in &columns {
                for (label, v) in stat_rows(c) {
                    rows.push(vec![
                        c.name.to_string(),
                        label.into(),
                        String::new(),
                        String::new(),
                        v.to_string(),
                    ]);
                }
                for (k, n) in c.counts.iter().enumerate() {
                    rows.push(vec![
                        c.name.to_string(),
                        "count".into(),
                        c.bin_edges[k].to_string(),
                        c.bin_edges[k + 1].to_string(),
                        n.to_string(),
                    ]);
                }
            }
            let header = ["column", "statistic", "lower", "upper", "value"].map(String::from);
            output::csv(&header, &rows)?
        }
    };
    Ok(Outcome {
        text,
        status: Status::Complete,
    })
}

#[derive(Serialize)]
struct CurveReport {
    loss: String,
    bandwidth: Option<f64>,
    method: Option<&'static str>,
    fallback: bool,
    loc: Option<f64>,
    loc_x1000: Option<f64>,
    file: Option<PathBuf>,
    error: Option<String>,
}

impl CurveReport {
    fn ok(loss: LossKind, r: &PairLoc, file: Option<PathBuf>) -> Self {
        Self {
            loss: loss.label(),
            bandwidth: Some(r.bandwidth.value),
            method: Some(method_name(r.bandwidth.method)),
            fallback: r.bandwidth.is_fallback(),
            loc: Some(r.loc.value),
            loc_x1000: Some(r.loc.value * 1000.0),
            file,
            error: None,
        }
    }

    fn failed(loss: LossKind, e: &dyn std::fmt::Display) -> Self {
        Self {
            loss: loss.label(),
            bandwidth: None,
            method: None,
            fallback: false,
            loc: None,
            loc_x1000: None,
            file: None,
            error: Some(e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct FileReport {
    x: String,
    y: String,
    files: Vec<PathBuf>,
    curves: Vec<CurveReport>,
}

fn render_curves(cfg: &RunConfig, report: &FileReport) -> Result<String> {
    let header: Vec<String> = [
        "curve",
        "bandwidth",
        "method",
        "fallback",
        "loc",
        "loc_x1000",
    ]
    .map(String::from)
    .to_vec();
    let rows: Vec<Vec<String>> = report
        .curves
        .iter()
        .map(|c| match &c.error {
            Some(e) => vec![
                c.loss.clone(),
                "NA".into(),
                "NA".into(),
                "NA".into(),
                "NA".into(),
                format!("error: {e}"),
            ],
            None => vec![
                c.loss.clone(),
                cell(c.bandwidth),
                c.method.unwrap_or("").into(),
                c.fallback.to_string(),
                cell(c.loc),
                cell(c.loc_x1000),
            ],
        })
        .collect();
    Ok(match cfg.format {
        Format::Json => output::json(report)?,
        Format::Csv => output::csv(&header, &rows)?,
        Format::Table => {
            let mut text = format!("X = {}, Y = {}\n", report.x, report.y);
            text.push_str(&output::table(&header, &rows));
            text.push_str("\nfiles written:\n");
            for f in &report.files {
                text.push_str(&format!("  {}\n", f.display()));
            }
            text
        }
    })
}

pub fn fit_cmd(cfg: &RunConfig, x: &str, y: &str, out_dir: &Path) -> Result<Outcome> {
    let (p, seed) = load_pair(cfg, x, y)?;
    ensure_dir(out_dir)?;
    let stem = format!("{x}_{y}");
    let mut files = vec![output::write_dat(
        out_dir,
        &format!("{stem}_scatter.dat"),
        &format!("{x} {y}"),
        p.x().iter().copied().zip(p.y().iter().copied()),
    )?];

    let mut curves = Vec::new();
    for loss in cfg.loss.kinds() {
        match pair_loc(&p, &spec_for(cfg, loss), cfg.jitter_sd, seed) {
            Ok(r) => {
                let file = output::write_dat(
                    out_dir,
                    &format!("{stem}_{}.dat", loss.label()),
                    &format!("{x} fitted_{}_{y}", loss.label()),
                    r.curve.grid.iter().copied().zip(r.curve.clamped_values()),
                )?;
                files.push(file.clone());
                curves.push(CurveReport::ok(loss, &r, Some(file)));
            }
            Err(e) => {
                log::error!("{} curve of ({x}, {y}) failed: {e}", loss.label());
                curves.push(CurveReport::failed(loss, &e));
            }
        }
    }
    let status = Status::from_failures(curves.iter().any(|c| c.error.is_some()));
    let report = FileReport {
        x: x.into(),
        y: y.into(),
        files,
        curves,
    };
    Ok(Outcome {
        text: render_curves(cfg, &report)?,
        status,
    })
}

/// A tie-free copy for rank plots, jittered exactly as the rank statistics are.
fn rank_sample(p: &PairedSample, cfg: &RunConfig, seed: u64) -> Result<PairedSample> {
    if p.is_tie_free() {
        Ok(p.clone())
    } else {
        Ok(jitter(p, cfg.jitter_sd, seed)?)
    }
}

pub fn plot_data_cmd(cfg: &RunConfig, x: &str, y: &str, out_dir: &Path) -> Result<Outcome> {
    let (p, seed) = load_pair(cfg, x, y)?;
    ensure_dir(out_dir)?;
    let stem = format!("{x}_{y}");

    let ranked = rank_sample(&p, cfg, seed)?;
    let ranks = empirical_ranks(&ranked)?;
    let rank_step = rank_step_function(&ranked)?;
    let mut files = vec![
        output::write_dat(
            out_dir,
            &format!("{stem}_rank_scatter.dat"),
            &format!("F({x}) G({y})"),
            ranks.fx.iter().copied().zip(ranks.gy.iter().copied()),
        )?,
        output::write_dat(
            out_dir,
            &format!("{stem}_rank_step.dat"),
            "t rank_step",
            output::step_points(rank_step.taus()),
        )?,
        output::write_dat(
            out_dir,
            &format!("{stem}_rank_rearranged.dat"),
            "t rearranged_rank_step",
            output::step_points(increasing_rearrangement(&rank_step).taus()),
        )?,
    ];

    let mut curves = Vec::new();
    for loss in cfg.loss.kinds() {
        let label = loss.label();
        match pair_loc(&p, &spec_for(cfg, loss), cfg.jitter_sd, seed) {
            Ok(r) => {
                let step = step_from_curve(&r.curve);
                let sorted = increasing_rearrangement(&step);
                files.push(output::write_dat(
                    out_dir,
                    &format!("{stem}_{label}_step.dat"),
                    &format!("t {label}_step"),
                    output::step_points(step.taus()),
                )?);
                files.push(output::write_dat(
                    out_dir,
                    &format!("{stem}_{label}_rearranged.dat"),
                    &format!("t {label}_rearranged"),
                    output::step_points(sorted.taus()),
                )?);
                curves.push(CurveReport::ok(loss, &r, None));
            }
            Err(e) => {
                log::error!("{label} curve of ({x}, {y}) failed: {e}");
                curves.push(CurveReport::failed(loss, &e));
            }
        }
    }
    curves.insert(
        0,
        CurveReport {
            loss: "ranks".into(),
            bandwidth: None,
            method: Some("none"),
            fallback: false,
            loc: Some(loc_index(&rank_step).value),
            loc_x1000: Some(loc_index(&rank_step).value * 1000.0),
            file: None,
            error: None,
        },
    );
    let status = Status::from_failures(curves.iter().any(|c| c.error.is_some()));
    let report = FileReport {
        x: x.into(),
        y: y.into(),
        files,
        curves,
    };
    Ok(Outcome {
        text: render_curves(cfg, &report)?,
        status,
    })
}

#[derive(Serialize)]
struct FailureJson<'a> {
    x: &'a str,
    y: &'a str,
    error: &'a str,
}

#[derive(Serialize)]
struct MatrixJson<'a> {
    labels: &'a [String],
    loss: String,
    entries: Vec<Vec<Option<f64>>>,
    entries_x1000: Vec<Vec<Option<f64>>>,
    failures: Vec<FailureJson<'a>>,
}

impl<'a> MatrixJson<'a> {
    fn new(m: &'a LocMatrix) -> Self {
        let entries: Vec<Vec<Option<f64>>> = m
            .entries
            .iter()
            .map(|row| row.iter().map(MatrixEntry::value).collect())
            .collect();
        Self {
            labels: &m.labels,
            loss: m.loss.label(),
            entries_x1000: entries
                .iter()
                .map(|row| row.iter().map(|v| x1000(*v)).collect())
                .collect(),
            entries,
            failures: m
                .failures()
                .into_iter()
                .map(|(i, j, error)| FailureJson {
                    x: &m.labels[i],
                    y: &m.labels[j],
                    error,
                })
                .collect(),
        }
    }
}

pub fn loc_matrix_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let sample = load(cfg)?;
    let matrices = cfg
        .loss
        .kinds()
        .into_iter()
        .map(|loss| {
            Ok(loc_matrix(
                &sample,
                &spec_for(cfg, loss),
                cfg.jitter_sd,
                cfg.seed,
            )?)
        })
        .collect::<Result<Vec<_>>>()?;
    for m in &matrices {
        for (i, j, msg) in m.failures() {
            eprintln!(
                "{} LOC ({}, {}) failed: {msg}",
                m.loss.label(),
                m.labels[i],
                m.labels[j]
            );
        }
    }
    let status = Status::from_failures(matrices.iter().any(|m| !m.failures().is_empty()));

    let scaled_rows = |m: &LocMatrix| -> Vec<Vec<String>> {
        m.labels
            .iter()
            .enumerate()
            .map(|(i, label)| {
                let mut row = vec![label.clone()];
                row.extend((0..m.labels.len()).map(|j| cell(x1000(m.get(i, j)))));
                row
            })
            .collect()
    };
    let text = match cfg.format {
        Format::Json => {
            let json: Vec<MatrixJson> = matrices.iter().map(MatrixJson::new).collect();
            match json.as_slice() {
                [single] => output::json(single)?,
                _ => output::json(&json)?,
            }
        }
        Format::Csv => {
            let mut header = vec!["loss".to_string(), "X\\Y".to_string()];
            header.extend(sample.column_names.iter().cloned());
            let rows: Vec<Vec<String>> = matrices
                .iter()
                .flat_map(|m| {
                    scaled_rows(m).into_iter().map(move |mut row| {
                        row.insert(0, m.loss.label());
                        row
                    })
                })
                .collect();
            output::csv(&header, &rows)?
        }
        Format::Table => {
            let mut header = vec!["X\\Y".to_string()];
            header.extend(sample.column_names.iter().cloned());
            matrices
                .iter()
                .map(|m| {
                    format!(
                        "conditional-{} LOC matrix (entries x 1000)\n{}",
                        m.loss.label(),
                        output::table(&header, &scaled_rows(m))
                    )
                })
                .collect::<Vec<_>>()
                .join("\n")
        }
    };
    Ok(Outcome { text, status })
}

#[derive(Serialize)]
struct CompareOutput<'a> {
    x: &'a str,
    y: &'a str,
    n: usize,
    #[serde(flatten)]
    report: &'a AssociationReport,
    loc_mean_x1000: Option<f64>,
    loc_median_x1000: Option<f64>,
}

pub fn compare_cmd(cfg: &RunConfig, x: &str, y: &str) -> Result<Outcome> {
    let (p, seed) = load_pair(cfg, x, y)?;
    let mut report = association_report(&p, cfg.jitter_sd, seed)?;
    if report.jittered {
        log::info!("({x}, {y}) has ties; rank statistics use a jittered copy");
    }
    let mut failed = false;
    for loss in cfg.loss.kinds() {
        let value = match pair_loc(&p, &spec_for(cfg, loss), cfg.jitter_sd, seed) {
            Ok(r) => Some(r.loc.value),
            Err(e) => {
                eprintln!("{} LOC ({x}, {y}) failed: {e}", loss.label());
                failed = true;
                None
            }
        };
        match loss {
            LossKind::Quadratic => report.loc_mean = value,
            LossKind::Quantile(_) => report.loc_median = value,
        }
    }

    let out = CompareOutput {
        x,
        y,
        n: p.len(),
        report: &report,
        loc_mean_x1000: x1000(report.loc_mean),
        loc_median_x1000: x1000(report.loc_median),
    };
    let rows: Vec<Vec<String>> = [
        ("pearson", Some(report.pearson)),
        ("spearman", Some(report.spearman)),
        ("zeta_quadratic", Some(report.zeta)),
        ("zeta_absolute", Some(report.zeta_absolute)),
        ("finite_population_i", Some(report.finite_i)),
        ("rank_loc", Some(report.rank_loc)),
        ("loc_mean", report.loc_mean),
        ("loc_median", report.loc_median),
        ("loc_mean_x1000", out.loc_mean_x1000),
        ("loc_median_x1000", out.loc_median_x1000),
    ]
    .into_iter()
    .map(|(k, v)| vec![k.to_string(), cell(v)])
    .chain([
        vec![
            "rank_identity_holds".into(),
            report.rank_identity_holds.to_string(),
        ],
        vec!["jittered".into(), report.jittered.to_string()],
    ])
    .collect();
    let header = vec!["statistic".to_string(), "value".to_string()];
    let text = match cfg.format {
        Format::Json => output::json(&out)?,
        Format::Csv => output::csv(&header, &rows)?,
        Format::Table => format!(
            "X = {x}, Y = {y}, n = {}\n{}",
            p.len(),
            output::table(&header, &rows)
        ),
    };
    Ok(Outcome {
        text,
        status: Status::from_failures(failed),
    })
}
