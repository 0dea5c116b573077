//! Local linear curve fitting with a Gaussian kernel.
//!
//! At each evaluation point `x0` the fit minimizes
//! `Σ L(y_i − β₀ − β₁(x_i − x0)) K((x_i − x0)/b)` and reports `ĥ(x0) = β₀`.
//! Quadratic loss gives the conditional-mean smoother in closed form; the
//! check loss `ρ_τ` gives the conditional-quantile smoother (the median at
//! `τ = 0.5`), solved by iteratively reweighted least squares.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthEstimate;
use crate::dataset::PairedSample;
use crate::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 1000;

/// Kernel weights below this are treated as zero.
const WEIGHT_CUTOFF: f64 = 1e-12;
/// Smoothing of `|r|` in the IRLS majorizer, relative to `range(y)`.
const IRLS_SMOOTHING: f64 = 1e-6;
/// Stopping rule on parameter change, relative to the data scale.
const IRLS_TOLERANCE: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `L(r) = r²`: conditional mean.
    Quadratic,
    /// Check loss `ρ_τ(r) = r (τ − 1{r < 0})`: conditional `τ`-quantile.
    Quantile(f64),
}

impl LossKind {
    pub fn median() -> Self {
        LossKind::Quantile(0.5)
    }

    pub fn validate(self) -> Result<Self> {
        match self {
            LossKind::Quantile(tau) if !(tau > 0.0 && tau < 1.0) => Err(Error::InvalidArgument(
                format!("quantile level must lie in (0, 1), got {tau}"),
            )),
            _ => Ok(self),
        }
    }

    /// Short label used in reports: `mean`, `median` or `quantile(τ)`.
    pub fn label(&self) -> String {
        match self {
            LossKind::Quadratic => "mean".into(),
            LossKind::Quantile(tau) if *tau == 0.5 => "median".into(),
            LossKind::Quantile(tau) => format!("quantile({tau})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub loss: LossKind,
    pub bandwidth: BandwidthEstimate,
    pub grid_size: usize,
}

impl FitSpec {
    pub fn new(loss: LossKind, bandwidth: BandwidthEstimate, grid_size: usize) -> Result<Self> {
        let loss = loss.validate()?;
        if grid_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid size must be at least 2, got {grid_size}"
            )));
        }
        if !(bandwidth.value > 0.0 && bandwidth.value.is_finite()) {
            return Err(Error::InvalidArgument("bandwidth must be positive".into()));
        }
        Ok(Self {
            loss,
            bandwidth,
            grid_size,
        })
    }
}

/// Fitted values `ĥ(t_k)` on an equispaced grid over `[min x, max x]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub spec: FitSpec,
}

impl FittedCurve {
    /// Values clipped to `[0, 1]` for display; never used in computations.
    pub fn clamped_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.clamp(0.0, 1.0)).collect()
    }
}

/// Intercept and slope of the local fit; `beta0` is `ĥ(x0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalFit {
    pub beta0: f64,
    pub beta1: f64,
}

fn gaussian_kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

fn data_range(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

/// Kernel weights and offsets `x_i − x0` at one evaluation point.
struct Window {
    weights: Vec<f64>,
    offsets: Vec<f64>,
}

impl Window {
    fn new(sample: &PairedSample, x0: f64, bandwidth: f64) -> Result<Self> {
        let offsets: Vec<f64> = sample.x().iter().map(|&xi| xi - x0).collect();
        let weights: Vec<f64> = offsets
            .iter()
            .map(|&d| {
                let w = gaussian_kernel(d / bandwidth);
                if w < WEIGHT_CUTOFF {
                    0.0
                } else {
                    w
                }
            })
            .collect();
        let mut support = offsets
            .iter()
            .zip(&weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&d, _)| d);
        let first = support.next();
        let distinct = match first {
            Some(d0) => support.any(|d| d != d0),
            None => false,
        };
        if !distinct {
            return Err(Error::DegenerateWindow { x0 });
        }
        Ok(Self { weights, offsets })
    }

    /// Minimizes `½ Σ c_i r_i² + Σ g_i r_i` with `r_i = y_i − β₀ − β₁ d_i`:
    /// weighted normal equations plus a linear term, solved after centering
    /// the offsets.
    fn solve(&self, y: &[f64], c: &[f64], g: &[f64], x0: f64) -> Result<LocalFit> {
        let s0: f64 = c.iter().sum();
        let dbar = c.iter().zip(&self.offsets).map(|(w, d)| w * d).sum::<f64>() / s0;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        let mut t0 = 0.0;
        for i in 0..y.len() {
            if c[i] == 0.0 && g[i] == 0.0 {
                continue;
            }
            let dc = self.offsets[i] - dbar;
            sxx += c[i] * dc * dc;
            sxy += c[i] * dc * y[i] + g[i] * dc;
            t0 += c[i] * y[i] + g[i];
        }
        let spread = self
            .offsets
            .iter()
            .zip(c)
            .filter(|(_, &w)| w > 0.0)
            .map(|(d, _)| d.abs())
            .fold(0.0, f64::max);
        if !(sxx > 1e-14 * s0 * spread * spread) || !(s0 > 0.0) {
            return Err(Error::SingularDesign { x0 });
        }
        let beta1 = sxy / sxx;
        let beta0 = t0 / s0 - beta1 * dbar;
        Ok(LocalFit { beta0, beta1 })
    }
}

/// Weighted check-loss objective `Σ w_i ρ_τ(y_i − β₀ − β₁(x_i − x0))`.
pub fn check_loss_objective(
    sample: &PairedSample,
    x0: f64,
    bandwidth: f64,
    tau: f64,
    fit: LocalFit,
) -> f64 {
    sample
        .x()
        .iter()
        .zip(sample.y())
        .map(|(&xi, &yi)| {
            let w = gaussian_kernel((xi - x0) / bandwidth);
            let w = if w < WEIGHT_CUTOFF { 0.0 } else { w };
            let r = yi - fit.beta0 - fit.beta1 * (xi - x0);
            w * r * (tau - if r < 0.0 { 1.0 } else { 0.0 })
        })
        .sum()
}

impl Window {
    fn objective(&self, y: &[f64], tau: f64, fit: LocalFit) -> f64 {
        (0..y.len())
            .filter(|&i| self.weights[i] > 0.0)
            .map(|i| {
                let r = y[i] - fit.beta0 - fit.beta1 * self.offsets[i];
                self.weights[i] * r * (tau - if r < 0.0 { 1.0 } else { 0.0 })
            })
            .sum()
    }

    /// Best line through observation `k` under the check loss.
    ///
    /// Along lines through `k` the objective is convex and piecewise linear
    /// in the slope, with kinks at the slopes to the other observations; the
    /// minimizer is the kink where the one-sided derivative turns
    /// non-negative. Returns the line and the observation it pivots onto.
    fn rotate_about(&self, y: &[f64], tau: f64, k: usize) -> Option<(LocalFit, usize)> {
        let mut kinks: Vec<(f64, f64, f64, usize)> = (0..y.len())
            .filter(|&i| i != k && self.weights[i] > 0.0)
            .filter_map(|i| {
                let dz = self.offsets[i] - self.offsets[k];
                if dz == 0.0 {
                    return None;
                }
                let slope = (y[i] - y[k]) / dz;
                let c = self.weights[i] * dz.abs();
                let level = if dz > 0.0 { tau } else { 1.0 - tau };
                Some((slope, c, level, i))
            })
            .collect();
        if kinks.is_empty() {
            return None;
        }
        kinks.sort_by(|a, b| a.0.total_cmp(&b.0));
        // derivative just right of kink j: Σ_{≤j} (1 − level) c − Σ_{>j} level c
        let mut deriv: f64 = -kinks.iter().map(|&(_, c, level, _)| level * c).sum::<f64>();
        let mut chosen = kinks.len() - 1;
        for (j, &(_, c, _, _)) in kinks.iter().enumerate() {
            deriv += c;
            if deriv >= 0.0 {
                chosen = j;
                break;
            }
        }
        let (slope, _, _, pivot) = kinks[chosen];
        Some((
            LocalFit {
                beta0: y[k] - slope * self.offsets[k],
                beta1: slope,
            },
            pivot,
        ))
    }

    /// Walks the vertices of the check-loss linear program (lines through
    /// two observations) starting near `start`, rotating about one of the
    /// two defining observations at a time until neither rotation improves.
    fn vertex_descent(&self, y: &[f64], tau: f64, start: LocalFit) -> LocalFit {
        let anchor = (0..y.len())
            .filter(|&i| self.weights[i] > 0.0)
            .min_by(|&a, &b| {
                let ra = (y[a] - start.beta0 - start.beta1 * self.offsets[a]).abs();
                let rb = (y[b] - start.beta0 - start.beta1 * self.offsets[b]).abs();
                ra.total_cmp(&rb)
            });
        let Some(anchor) = anchor else { return start };
        let Some((mut fit, mut other)) = self.rotate_about(y, tau, anchor) else {
            return start;
        };
        let mut pair = (anchor, other);
        let mut best = self.objective(y, tau, fit);
        for _ in 0..4 * y.len() {
            let mut improved = false;
            for pivot in [pair.1, pair.0] {
                if let Some((cand, next)) = self.rotate_about(y, tau, pivot) {
                    let value = self.objective(y, tau, cand);
                    if value < best - 1e-15 * best.abs() {
                        fit = cand;
                        best = value;
                        other = next;
                        pair = (pivot, other);
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        if best <= self.objective(y, tau, start) {
            fit
        } else {
            start
        }
    }
}

/// Local linear estimate at `x0`.
pub fn local_linear_fit(
    sample: &PairedSample,
    x0: f64,
    bandwidth: f64,
    loss: LossKind,
) -> Result<LocalFit> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive and finite, got {bandwidth}"
        )));
    }
    let loss = loss.validate()?;
    let window = Window::new(sample, x0, bandwidth)?;
    let y = sample.y();
    let zeros = vec![0.0; y.len()];
    let ls = window.solve(y, &window.weights, &zeros, x0)?;

    let tau = match loss {
        LossKind::Quadratic => return Ok(ls),
        LossKind::Quantile(tau) => tau,
    };

    // Majorize |r|/2 by r²/(4a) + a/4 with a = sqrt(r₀² + ε²): each step is a
    // weighted least-squares problem with weights w/(2a) and a linear term
    // (τ − ½) w coming from ρ_τ(r) = |r|/2 + (τ − ½) r.
    let range_y = data_range(y);
    if range_y == 0.0 {
        return Ok(ls);
    }
    let eps = IRLS_SMOOTHING * range_y;
    let range_x = data_range(sample.x()).max(f64::MIN_POSITIVE);
    let tol0 = IRLS_TOLERANCE * range_y;
    let tol1 = IRLS_TOLERANCE * range_y / range_x;
    let linear: Vec<f64> = window.weights.iter().map(|w| (tau - 0.5) * w).collect();

    let mut fit = ls;
    let mut c = vec![0.0; y.len()];
    for _ in 0..IRLS_MAX_ITER {
        for i in 0..y.len() {
            let r = y[i] - fit.beta0 - fit.beta1 * window.offsets[i];
            c[i] = window.weights[i] / (2.0 * (r * r + eps * eps).sqrt());
        }
        let next = window.solve(y, &c, &linear, x0)?;
        let done = (next.beta0 - fit.beta0).abs() < tol0 && (next.beta1 - fit.beta1).abs() < tol1;
        fit = next;
        if done {
            break;
        }
    }

    Ok(window.vertex_descent(y, tau, fit))
}

/// Equispaced grid of `size` points from `lo` to `hi` inclusive.
pub fn grid(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    let step = (hi - lo) / (size - 1) as f64;
    (0..size)
        .map(|k| {
            if k + 1 == size {
                hi
            } else {
                lo + k as f64 * step
            }
        })
        .collect()
}

/// Evaluates the local linear fit on `spec.grid_size` points spanning the
/// observed range of `x`. Grid points are computed in parallel.
pub fn fit_curve(sample: &PairedSample, spec: &FitSpec) -> Result<FittedCurve> {
    if sample.len() < 4 {
        return Err(Error::TooFewObservations {
            needed: 4,
            got: sample.len(),
        });
    }
    let spec = FitSpec::new(spec.loss, spec.bandwidth.clone(), spec.grid_size)?;
    let (lo, hi) = sample
        .x()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(hi > lo) {
        return Err(Error::DegenerateX);
    }
    let grid = grid(lo, hi, spec.grid_size);
    let fits: Vec<Result<f64>> = grid
        .par_iter()
        .map(|&t| local_linear_fit(sample, t, spec.bandwidth.value, spec.loss).map(|f| f.beta0))
        .collect();
    let values = fits
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::GridPoint {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FittedCurve { grid, values, spec })
}
