//! Classical and rank-based association coefficients and their bridge to
//! the LOC index.
//!
//! With induced ranks `r_i` (the rank of the `y` paired with the `i`-th
//! smallest `x`), the finite-population quantity
//! `I_{n,x,y} = (1/2n³) Σ (i − r_i)²` is the expectation part of Liebscher's
//! ζ under `ψ(u) = u²/2` and, at the same time, the LOC index of the rank
//! step function `t ↦ r_i/n` on `((i − 1)/n, i/n]`.

mod matrix;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{jitter, PairedSample};
use crate::rearrangement::{loc_index, StepFunction};
use crate::{compensated_sum, has_ties, Error, Result};

pub use matrix::{loc_matrix, pair_loc, pair_seed, LocMatrix, MatrixEntry, MatrixSpec, PairLoc};

/// Tolerance of the adaptive quadrature used for custom ψ.
const PSI_QUADRATURE_TOL: f64 = 1e-10;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Product-moment correlation of two equally long slices.
pub fn pearson_slices(x: &[f64], y: &[f64]) -> Result<f64> {
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
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ConstantCoordinate("x"));
    }
    if syy == 0.0 {
        return Err(Error::ConstantCoordinate("y"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson(sample: &PairedSample) -> Result<f64> {
    pearson_slices(sample.x(), sample.y())
}

/// Empirical-cdf ranks of a tie-free sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranks {
    /// Rank of `x_i` in `1..=n`, by original row.
    pub x_rank: Vec<usize>,
    /// Rank of `y_i` in `1..=n`, by original row.
    pub y_rank: Vec<usize>,
    /// `F_n(x_i) = x_rank_i / n`.
    pub fx: Vec<f64>,
    /// `G_n(y_i) = y_rank_i / n`.
    pub gy: Vec<f64>,
    /// `r_i = n G_n(y_(i))` with pairs sorted by `x`.
    pub induced: Vec<usize>,
}

fn ranks_of(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut rank = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    rank
}

/// Requires distinct `x` values and distinct `y` values.
pub fn empirical_ranks(sample: &PairedSample) -> Result<Ranks> {
    if has_ties(sample.x()) {
        return Err(Error::Ties("x"));
    }
    if has_ties(sample.y()) {
        return Err(Error::Ties("y"));
    }
    let n = sample.len();
    let x_rank = ranks_of(sample.x());
    let y_rank = ranks_of(sample.y());
    let mut induced = vec![0; n];
    for i in 0..n {
        induced[x_rank[i] - 1] = y_rank[i];
    }
    let nf = n as f64;
    Ok(Ranks {
        fx: x_rank.iter().map(|&r| r as f64 / nf).collect(),
        gy: y_rank.iter().map(|&r| r as f64 / nf).collect(),
        x_rank,
        y_rank,
        induced,
    })
}

/// Pearson correlation of `(F_n(x_i), G_n(y_i))`.
///
/// Ranks are centred in integers as `2r − n − 1`, whose squares sum to
/// `n(n² − 1)/3` over a permutation, so the final division is the only
/// rounding.
pub fn spearman(sample: &PairedSample) -> Result<f64> {
    let ranks = empirical_ranks(sample)?;
    let n = sample.len() as i128;
    let centred = |r: usize| 2 * r as i128 - n - 1;
    let sxy: i128 = ranks
        .x_rank
        .iter()
        .zip(&ranks.y_rank)
        .map(|(&a, &b)| centred(a) * centred(b))
        .sum();
    let sxx = n * (n * n - 1) / 3;
    Ok(sxy as f64 / sxx as f64)
}

/// Penalty `ψ` of Liebscher's coefficient: non-negative, symmetric on
/// `[−1, 1]`, `ψ(0) = 0`.
#[derive(Clone)]
pub enum PsiFunction {
    /// `ψ(u) = u²/2`.
    Quadratic,
    /// `ψ(u) = |u|`.
    Absolute,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for PsiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiFunction::Quadratic => f.write_str("Quadratic"),
            PsiFunction::Absolute => f.write_str("Absolute"),
            PsiFunction::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl PsiFunction {
    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        PsiFunction::Custom(Arc::new(f))
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            PsiFunction::Quadratic => 0.5 * u * u,
            PsiFunction::Absolute => u.abs(),
            PsiFunction::Custom(f) => f(u),
        }
    }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    (fa, fm, fb): (f64, f64, f64),
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, m, (fa, flm, fm), left, 0.5 * tol, depth - 1)
        + adaptive_simpson(f, m, b, (fm, frm, fb), right, 0.5 * tol, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive_simpson(f, a, b, (fa, fm, fb), whole, tol, 50)
}

/// `c_ψ = 2 ∫₀¹ (1 − u) ψ(u) du`.
pub fn psi_norm_constant(psi: &PsiFunction) -> Result<f64> {
    let c = match psi {
        PsiFunction::Quadratic => 1.0 / 12.0,
        PsiFunction::Absolute => 1.0 / 3.0,
        PsiFunction::Custom(f) => {
            let at_zero = f(0.0);
            if at_zero.abs() > 1e-12 {
                return Err(Error::InvalidPsi(format!("psi(0) = {at_zero}, expected 0")));
            }
            for k in 1..=16 {
                let u = k as f64 / 16.0;
                let (p, q) = (f(u), f(-u));
                if !(p >= 0.0 && q >= 0.0) {
                    return Err(Error::InvalidPsi(format!("psi is negative near ±{u}")));
                }
                if (p - q).abs() > 1e-12 * (1.0 + p.abs()) {
                    return Err(Error::InvalidPsi(format!("psi is not symmetric at ±{u}")));
                }
            }
            let integrand = |u: f64| 2.0 * (1.0 - u) * f(u);
            integrate(&integrand, 0.0, 1.0, PSI_QUADRATURE_TOL)
        }
    };
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidPsi(format!(
            "normalizing constant must be positive, got {c}"
        )));
    }
    Ok(c)
}

/// Empirical `ζ = 1 − (1/c_ψ)(1/n) Σ ψ(F_n(x_i) − G_n(y_i))`.
///
/// For the built-in penalties the whole numerator is an integer
/// (`1 − 6S/n³` and `1 − 3A/n²` with `S`, `A` the sums of squared and
/// absolute rank differences), so ζ is rounded once. Custom penalties sum
/// `ψ((r_x − r_y)/n)` with compensation.
pub fn liebscher_zeta(sample: &PairedSample, psi: &PsiFunction) -> Result<f64> {
    let c = psi_norm_constant(psi)?;
    let ranks = empirical_ranks(sample)?;
    let diffs = ranks
        .x_rank
        .iter()
        .zip(&ranks.y_rank)
        .map(|(&a, &b)| a as i128 - b as i128);
    let n_int = sample.len() as i128;
    match psi {
        PsiFunction::Quadratic => {
            let s: i128 = diffs.map(|d| d * d).sum();
            let cube = n_int * n_int * n_int;
            return Ok((cube - 6 * s) as f64 / cube as f64);
        }
        PsiFunction::Absolute => {
            let a: i128 = diffs.map(i128::abs).sum();
            let square = n_int * n_int;
            return Ok((square - 3 * a) as f64 / square as f64);
        }
        PsiFunction::Custom(_) => {}
    }
    let n = sample.len() as f64;
    let total = compensated_sum(
        ranks
            .x_rank
            .iter()
            .zip(&ranks.y_rank)
            .map(|(&a, &b)| psi.eval((a as f64 - b as f64) / n)),
    );
    Ok(1.0 - total / n / c)
}

/// `I_{n,x,y} = (1/2n³) Σ (i − r_i)²`, summed exactly in integers.
pub fn finite_population_i(sample: &PairedSample) -> Result<f64> {
    let ranks = empirical_ranks(sample)?;
    let sum: u128 = ranks
        .induced
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let d = (i + 1).abs_diff(r) as u128;
            d * d
        })
        .sum();
    let n = sample.len() as f64;
    Ok(sum as f64 / (2.0 * n * n * n))
}

/// Step function with value `r_i/n` on `((i − 1)/n, i/n]`.
pub fn rank_step_function(sample: &PairedSample) -> Result<StepFunction> {
    let ranks = empirical_ranks(sample)?;
    let n = sample.len() as f64;
    StepFunction::new(ranks.induced.iter().map(|&r| r as f64 / n).collect())
}

/// True when `a` and `b` agree to `rel_tol` relative error (or both are 0).
pub fn agrees(a: f64, b: f64, rel_tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    scale == 0.0 || (a - b).abs() <= rel_tol * scale
}

/// Side-by-side coefficients for one ordered pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationReport {
    pub pearson: f64,
    pub spearman: f64,
    /// ζ with `ψ(u) = u²/2`.
    pub zeta: f64,
    /// ζ with `ψ(u) = |u|`.
    pub zeta_absolute: f64,
    pub finite_i: f64,
    /// LOC index of the rank step function.
    pub rank_loc: f64,
    /// Whether `rank_loc` reproduces `finite_i`.
    pub rank_identity_holds: bool,
    /// Whether rank statistics were computed on a jittered copy.
    pub jittered: bool,
    pub loc_mean: Option<f64>,
    pub loc_median: Option<f64>,
}

/// Relative tolerance of the rank-LOC identity check in reports.
pub const RANK_IDENTITY_TOL: f64 = 1e-12;

/// Pearson on the raw pairs and rank-based coefficients on a tie-free copy.
///
/// When the raw pairs contain ties, the rank statistics use
/// `jitter(sample, jitter_sd, seed)`. LOC fields are left empty.
pub fn association_report(
    sample: &PairedSample,
    jitter_sd: f64,
    seed: u64,
) -> Result<AssociationReport> {
    let pearson = pearson(sample)?;
    let (ranked, jittered) = if sample.is_tie_free() {
        (sample.clone(), false)
    } else {
        log::info!("ties present; jittering with sd {jitter_sd} before rank statistics");
        (jitter(sample, jitter_sd, seed)?, true)
    };
    let finite_i = finite_population_i(&ranked)?;
    let rank_loc = loc_index(&rank_step_function(&ranked)?).value;
    Ok(AssociationReport {
        pearson,
        spearman: spearman(&ranked)?,
        zeta: liebscher_zeta(&ranked, &PsiFunction::Quadratic)?,
        zeta_absolute: liebscher_zeta(&ranked, &PsiFunction::Absolute)?,
        finite_i,
        rank_loc,
        rank_identity_holds: agrees(rank_loc, finite_i, RANK_IDENTITY_TOL),
        jittered,
        loc_mean: None,
        loc_median: None,
    })
}
