use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{BandwidthEstimate, BandwidthRule};
use crate::dataset::{jitter, pair, NormalizedSample, PairedSample};
use crate::rearrangement::{loc_index, step_from_curve, LocValue};
use crate::smoothing::{fit_curve, FitSpec, FittedCurve, LossKind, DEFAULT_GRID_SIZE};
use crate::{Error, Result};

/// How each ordered pair of a LOC matrix is smoothed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub loss: LossKind,
    pub bandwidth: BandwidthRule,
    /// Grid size of the fitted curve, which is also the piece count `m`.
    pub grid_size: usize,
}

impl MatrixSpec {
    pub fn new(loss: LossKind) -> Self {
        Self {
            loss,
            bandwidth: BandwidthRule::Dpi,
            grid_size: DEFAULT_GRID_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixEntry {
    Value(f64),
    Failed(String),
}

impl MatrixEntry {
    pub fn value(&self) -> Option<f64> {
        match self {
            MatrixEntry::Value(v) => Some(*v),
            MatrixEntry::Failed(_) => None,
        }
    }
}

/// Entry `(i, j)` is the LOC index of column `i` as `X` and column `j` as `Y`.
/// Values are unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocMatrix {
    pub labels: Vec<String>,
    pub loss: LossKind,
    pub entries: Vec<Vec<MatrixEntry>>,
}

impl LocMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries[i][j].value()
    }

    /// Value by column labels.
    pub fn entry(&self, x: &str, y: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == x)?;
        let j = self.labels.iter().position(|l| l == y)?;
        self.get(i, j)
    }

    /// `(i, j, message)` for every pair that could not be computed.
    pub fn failures(&self) -> Vec<(usize, usize, &str)> {
        let mut out = Vec::new();
        for (i, row) in self.entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                if let MatrixEntry::Failed(msg) = e {
                    out.push((i, j, msg.as_str()));
                }
            }
        }
        out
    }
}

/// Seed for the ordered pair `(i, j)` derived from a master seed
/// (SplitMix64 finalizer over the packed triple).
pub fn pair_seed(seed: u64, i: usize, j: usize) -> u64 {
    let mut z = seed
        ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (j as u64)
            .wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
            .rotate_left(31);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything computed for one ordered pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairLoc {
    /// The jittered pairs the curve was fitted to.
    pub sample: PairedSample,
    pub bandwidth: BandwidthEstimate,
    pub curve: FittedCurve,
    pub loc: LocValue,
}

/// jitter → bandwidth → fitted curve → step function → LOC index.
pub fn pair_loc(
    sample: &PairedSample,
    spec: &MatrixSpec,
    jitter_sd: f64,
    seed: u64,
) -> Result<PairLoc> {
    let sample = jitter(sample, jitter_sd, seed)?;
    let bandwidth = spec.bandwidth.resolve(&sample, spec.loss)?;
    let fit = FitSpec::new(spec.loss, bandwidth.clone(), spec.grid_size)?;
    let curve = fit_curve(&sample, &fit)?;
    let loc = loc_index(&step_from_curve(&curve));
    Ok(PairLoc {
        sample,
        bandwidth,
        curve,
        loc,
    })
}

/// LOC index for every ordered pair of columns. Pairs run in parallel; a
/// failing pair is recorded in place and does not stop the others.
pub fn loc_matrix(
    sample: &NormalizedSample,
    spec: &MatrixSpec,
    jitter_sd: f64,
    seed: u64,
) -> Result<LocMatrix> {
    let k = sample.column_names.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "a LOC matrix needs at least 2 columns, got {k}"
        )));
    }
    let loss = spec.loss.validate()?;
    let cells: Vec<(usize, usize)> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
    let values: Vec<MatrixEntry> = cells
        .par_iter()
        .map(|&(i, j)| {
            if i == j {
                return MatrixEntry::Value(0.0);
            }
            let names = &sample.column_names;
            let result = pair(sample, &names[i], &names[j])
                .and_then(|p| pair_loc(&p, spec, jitter_sd, pair_seed(seed, i, j)));
            match result {
                Ok(r) => MatrixEntry::Value(r.loc.value),
                Err(e) => {
                    log::warn!("pair ({}, {}): {e}", names[i], names[j]);
                    MatrixEntry::Failed(e.to_string())
                }
            }
        })
        .collect();
    let entries = values.chunks(k).map(<[MatrixEntry]>::to_vec).collect();
    Ok(LocMatrix {
        labels: sample.column_names.clone(),
        loss,
        entries,
    })
}
