//! Lack-of-co-monotonicity (LOC) index for paired variables.
//!
//! The crate fits nonparametric curves `y = h(x)` to scatterplots (local
//! linear regression under quadratic or check loss), turns the fitted curve
//! into a step function and measures how far it is from being non-decreasing:
//!
//! ```text
//! L(h) = ∫₀¹ t (I_h(t) − h(t)) dt
//! ```
//!
//! where `I_h` is the increasing rearrangement of `h`. For a step function
//! with values `τ₁..τ_m` on equal pieces this reduces to
//! `(1/m²) Σ i (τ_{i:m} − τ_i)`, see [`rearrangement::loc_index`].
//!
//! Alongside the index the crate computes the classical coefficients it is
//! usually compared with: Pearson, Spearman, Liebscher's ζ and the
//! finite-population quantity `I_{n,x,y}`, which equals the LOC index of the
//! rank step function.
//!
//! ```
//! use locindex::rearrangement::{loc_index, StepFunction};
//!
//! let step = StepFunction::new(vec![0.5, 0.9, 0.1]).unwrap();
//! let loc = loc_index(&step);
//! assert!((loc.value - 1.2 / 9.0).abs() < 1e-15);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod association;
pub mod bandwidth;
pub mod dataset;
mod error;
pub mod rearrangement;
pub mod smoothing;

pub use association::{AssociationReport, LocMatrix, MatrixEntry, MatrixSpec, PsiFunction, Ranks};
pub use bandwidth::{BandwidthEstimate, BandwidthMethod, BandwidthRule, KernelConstants};
pub use dataset::{ColumnSpec, NormalizedSample, PairedSample, RawScores, Schema, SummaryStats};
pub use error::{Error, Result};
pub use rearrangement::{LocValue, Refinement, StepFunction};
pub use smoothing::{FitSpec, FittedCurve, LocalFit, LossKind};

/// Tie check on a slice compared with exact equality.
pub(crate) fn has_ties(values: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
