//! Global bandwidth selection for the local linear smoother.
//!
//! The conditional-mean bandwidth is a direct plug-in estimate of the
//! AMISE-optimal bandwidth
//!
//! ```text
//! b = [ R(K) σ² (max x − min x) / (n μ₂(K)² θ₂₂) ]^{1/5}
//! ```
//!
//! with `θ₂₂ = ∫ h''(x)² f(x) dx` and the residual variance `σ²` both taken
//! from quartic least-squares fits on `N` blocks of the sorted sample. `N`
//! minimizes Mallows' Cp over `1..=N_max`, `N_max = max(min(⌊n/20⌋, 5), 1)`.
//!
//! Quantile fits reuse the same bandwidth scaled by
//! `{τ(1 − τ)/φ(Φ⁻¹(τ))²}^{1/5}`, which is `(π/2)^{1/5}` at the median.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::PairedSample;
use crate::smoothing::LossKind;
use crate::{Error, Result};

/// Smallest sample the blocked quartic fits accept.
pub const MIN_DPI_OBSERVATIONS: usize = 20;
const BLOCK_DIVISOR: usize = 20;
const MAX_BLOCKS: usize = 5;
const QUARTIC_PARAMS: usize = 5;
/// Relative floor on `θ₂₂`, in units of `(range(y)/range(x)²)²`.
const CURVATURE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    /// `R(K) = ∫ K²`.
    pub roughness: f64,
    /// `μ₂(K) = ∫ u² K(u) du`.
    pub second_moment: f64,
}

impl KernelConstants {
    /// Standard normal kernel: `R(K) = 1/(2√π)`, `μ₂(K) = 1`.
    pub fn gaussian() -> Self {
        Self {
            roughness: 1.0 / (2.0 * PI.sqrt()),
            second_moment: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMethod {
    Dpi,
    MedianAdjusted,
    Fixed,
}

/// Intermediate quantities of the plug-in estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpiDiagnostics {
    /// Number of blocks chosen by Mallows' Cp.
    pub blocks: usize,
    pub theta22: f64,
    pub sigma2: f64,
    /// The oversmoothed fallback `range(x)·n^{-1/5}` was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthEstimate {
    pub value: f64,
    pub method: BandwidthMethod,
    pub diagnostics: Option<DpiDiagnostics>,
    pub warning: Option<String>,
}

impl BandwidthEstimate {
    pub fn fixed(value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive and finite, got {value}"
            )));
        }
        Ok(Self {
            value,
            method: BandwidthMethod::Fixed,
            diagnostics: None,
            warning: None,
        })
    }

    pub fn is_fallback(&self) -> bool {
        self.diagnostics.is_some_and(|d| d.fallback)
    }
}

/// How a pipeline picks its bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// Plug-in estimate, quantile-adjusted for quantile loss.
    Dpi,
    /// The given value for every loss.
    Fixed(f64),
}

impl BandwidthRule {
    pub fn resolve(&self, sample: &PairedSample, loss: LossKind) -> Result<BandwidthEstimate> {
        match *self {
            BandwidthRule::Fixed(value) => BandwidthEstimate::fixed(value),
            BandwidthRule::Dpi => {
                let b = dpi_bandwidth(sample, &KernelConstants::gaussian())?;
                match loss {
                    LossKind::Quadratic => Ok(b),
                    LossKind::Quantile(tau) => median_adjust(&b, tau),
                }
            }
        }
    }
}

struct QuarticFit {
    center: f64,
    half_width: f64,
    coef: [f64; QUARTIC_PARAMS],
}

impl QuarticFit {
    fn second_derivative(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.half_width;
        let c = &self.coef;
        (2.0 * c[2] + 6.0 * c[3] * u + 12.0 * c[4] * u * u) / (self.half_width * self.half_width)
    }
}

/// Least-squares quartic in the block's own rescaled coordinate, which keeps
/// the design well conditioned and makes the fit equivariant under affine
/// maps of `x`.
fn fit_quartic(x: &[f64], y: &[f64]) -> (QuarticFit, f64) {
    let lo = x[0];
    let hi = x[x.len() - 1];
    let center = 0.5 * (lo + hi);
    let half_width = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
    let design = DMatrix::from_fn(x.len(), QUARTIC_PARAMS, |i, k| {
        ((x[i] - center) / half_width).powi(k as i32)
    });
    let rhs = DVector::from_column_slice(y);
    let svd = design.clone().svd(true, true);
    let eps = svd.singular_values.max() * 1e-12;
    let sol = svd
        .solve(&rhs, eps)
        .expect("both singular vector sets were requested");
    let resid = &rhs - &design * &sol;
    let mut coef = [0.0; QUARTIC_PARAMS];
    coef.copy_from_slice(sol.as_slice());
    (
        QuarticFit {
            center,
            half_width,
            coef,
        },
        resid.norm_squared(),
    )
}

/// Splits `n` sorted observations into `blocks` consecutive groups of
/// `⌊n/blocks⌋`, the last one taking the remainder.
fn block_ranges(n: usize, blocks: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    let size = n / blocks;
    (0..blocks).map(move |j| {
        let start = j * size;
        let end = if j + 1 == blocks { n } else { start + size };
        start..end
    })
}

fn blocked_fits(
    x: &[f64],
    y: &[f64],
    blocks: usize,
) -> (Vec<(std::ops::Range<usize>, QuarticFit)>, f64) {
    let mut rss = 0.0;
    let fits = block_ranges(x.len(), blocks)
        .map(|r| {
            let (fit, block_rss) = fit_quartic(&x[r.clone()], &y[r.clone()]);
            rss += block_rss;
            (r, fit)
        })
        .collect();
    (fits, rss)
}

/// Direct plug-in bandwidth for local linear regression.
pub fn dpi_bandwidth(sample: &PairedSample, kernel: &KernelConstants) -> Result<BandwidthEstimate> {
    let n = sample.len();
    if n < MIN_DPI_OBSERVATIONS {
        return Err(Error::TooFewObservations {
            needed: MIN_DPI_OBSERVATIONS,
            got: n,
        });
    }
    let mut pairs: Vec<(f64, f64)> = sample
        .x()
        .iter()
        .copied()
        .zip(sample.y().iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();

    let range_x = x[n - 1] - x[0];
    if !(range_x > 0.0) {
        return Err(Error::DegenerateX);
    }
    let (y_lo, y_hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range_y = y_hi - y_lo;

    let max_blocks = (n / BLOCK_DIVISOR).clamp(1, MAX_BLOCKS);
    let rss: Vec<f64> = (1..=max_blocks)
        .map(|b| blocked_fits(&x, &y, b).1)
        .collect();
    let rss_max = rss[max_blocks - 1];
    let blocks = if rss_max > 0.0 {
        let sigma2_max = rss_max / (n - QUARTIC_PARAMS * max_blocks) as f64;
        let cp =
            |b: usize| rss[b - 1] / sigma2_max - (n as f64 - 2.0 * (QUARTIC_PARAMS * b) as f64);
        (1..=max_blocks)
            .min_by(|&a, &b| cp(a).total_cmp(&cp(b)))
            .unwrap_or(1)
    } else {
        1
    };

    let (fits, rss_chosen) = blocked_fits(&x, &y, blocks);
    let sigma2 = rss_chosen / (n - QUARTIC_PARAMS * blocks) as f64;
    let theta22 = fits
        .iter()
        .flat_map(|(r, fit)| {
            x[r.clone()]
                .iter()
                .map(move |&xi| fit.second_derivative(xi).powi(2))
        })
        .sum::<f64>()
        / n as f64;

    let floor = CURVATURE_FLOOR * (range_y / (range_x * range_x)).powi(2);
    let warning = if range_y == 0.0 || theta22 < floor {
        Some("estimated curvature below floor; using oversmoothed bandwidth")
    } else if !(sigma2 > 0.0) {
        Some("estimated residual variance is zero; using oversmoothed bandwidth")
    } else {
        None
    };

    let mut value = f64::NAN;
    if warning.is_none() {
        value = (kernel.roughness * sigma2 * range_x
            / (n as f64 * kernel.second_moment.powi(2) * theta22))
            .powf(0.2);
    }
    let warning = match warning {
        None if !(value > 0.0 && value.is_finite()) => {
            Some("plug-in estimate not finite; using oversmoothed bandwidth")
        }
        w => w,
    };
    let fallback = warning.is_some();
    if fallback {
        value = range_x * (n as f64).powf(-0.2);
        log::warn!("{}", warning.unwrap());
    }

    Ok(BandwidthEstimate {
        value,
        method: BandwidthMethod::Dpi,
        diagnostics: Some(DpiDiagnostics {
            blocks,
            theta22,
            sigma2,
            fallback,
        }),
        warning: warning.map(str::to_string),
    })
}

/// `{τ(1 − τ)/φ(Φ⁻¹(τ))²}^{1/5}`.
pub fn quantile_adjust_factor(tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tau must lie in (0, 1), got {tau}"
        )));
    }
    let z = Normal::standard().inverse_cdf(tau);
    let density = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    Ok((tau * (1.0 - tau) / (density * density)).powf(0.2))
}

/// Converts a conditional-mean bandwidth to one for the `tau` conditional
/// quantile.
pub fn median_adjust(b: &BandwidthEstimate, tau: f64) -> Result<BandwidthEstimate> {
    if !(b.value > 0.0) {
        return Err(Error::InvalidArgument("bandwidth must be positive".into()));
    }
    Ok(BandwidthEstimate {
        value: b.value * quantile_adjust_factor(tau)?,
        method: BandwidthMethod::MedianAdjusted,
        diagnostics: b.diagnostics,
        warning: b.warning.clone(),
    })
}
