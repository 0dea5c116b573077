//! Step functions on `[0, 1]`, their increasing rearrangement and the LOC
//! index.
//!
//! A step function with `m` pieces takes the value `τ_i` on
//! `((i − 1)/m, i/m]` (and `τ_1` at `t = 0`). Viewed as a random variable on
//! `[0, 1]` with Lebesgue measure, its distribution function is
//! `G(x) = #{i : τ_i ≤ x}/m` and its quantile function, the increasing
//! rearrangement, is the step function with the sorted values.
//!
//! The LOC index `∫ t (I(t) − D(t)) dt` of a step function is then
//! `(1/m²) Σ i (τ_{i:m} − τ_i)`, which is what [`loc_index`] evaluates.

use serde::{Deserialize, Serialize};

use crate::smoothing::FittedCurve;
use crate::{compensated_sum, Error, Result};

/// Piecewise-constant function on `m` equal-width pieces of `[0, 1]`.
///
/// Serializes as a plain JSON array of the piece values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StepFunction {
    taus: Vec<f64>,
}

impl StepFunction {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::InvalidArgument(
                "step function needs at least one piece".into(),
            ));
        }
        if taus.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(
                "step function values must be finite".into(),
            ));
        }
        Ok(Self { taus })
    }

    /// Samples `f` at the midpoint of each of `m` pieces.
    pub fn from_fn<F: Fn(f64) -> f64>(m: usize, f: F) -> Result<Self> {
        let mf = m as f64;
        Self::new((1..=m).map(|i| f((i as f64 - 0.5) / mf)).collect())
    }

    pub fn m(&self) -> usize {
        self.taus.len()
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    /// Value at `t`; `t ≤ 0` maps to the first piece and `t ≥ 1` to the last.
    pub fn eval(&self, t: f64) -> f64 {
        let m = self.m();
        let idx = if t <= 0.0 {
            0
        } else {
            ((t * m as f64).ceil() as usize).clamp(1, m) - 1
        };
        self.taus[idx]
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.taus.windows(2).all(|w| w[0] <= w[1])
    }
}

impl TryFrom<Vec<f64>> for StepFunction {
    type Error = Error;

    fn try_from(taus: Vec<f64>) -> Result<Self> {
        Self::new(taus)
    }
}

impl From<StepFunction> for Vec<f64> {
    fn from(step: StepFunction) -> Self {
        step.taus
    }
}

/// LOC index value together with the piece count it was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocValue {
    pub value: f64,
    pub m: usize,
}

/// Direct transfer of grid values: grid point `k` stands for piece `k`.
pub fn step_from_curve(curve: &FittedCurve) -> StepFunction {
    StepFunction {
        taus: curve.values.clone(),
    }
}

/// `G(x) = λ{t ∈ [0, 1] : D(t) ≤ x} = #{i : τ_i ≤ x}/m`.
pub fn distribution(step: &StepFunction, x: f64) -> f64 {
    let count = step.taus.iter().filter(|&&t| t <= x).count();
    count as f64 / step.m() as f64
}

/// The non-decreasing step function with the same value distribution.
pub fn increasing_rearrangement(step: &StepFunction) -> StepFunction {
    let mut taus = step.taus.clone();
    // stable; ties keep their order, which does not affect any value
    taus.sort_by(f64::total_cmp);
    StepFunction { taus }
}

/// `(1/m)² Σ_{i=1}^m i (τ_{i:m} − τ_i)`.
///
/// Exactly zero when the values are already non-decreasing.
pub fn loc_index(step: &StepFunction) -> LocValue {
    let sorted = increasing_rearrangement(step);
    let m = step.m();
    let sum = compensated_sum(
        sorted
            .taus
            .iter()
            .zip(&step.taus)
            .enumerate()
            .map(|(i, (s, t))| (i + 1) as f64 * (s - t)),
    );
    let mf = m as f64;
    LocValue {
        // the exact value is non-negative; clamp rounding noise
        value: (sum / (mf * mf)).max(0.0),
        m,
    }
}

/// Result of evaluating the LOC index on a refinement schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    /// One entry per piece count in the schedule.
    pub levels: Vec<LocValue>,
    /// The value at the finest level.
    pub value: LocValue,
    /// Whether the last two levels differ by less than the tolerance.
    pub converged: bool,
    /// Numerical estimate of `2 ∫ |D_m − h|` at the finest level, an upper
    /// bound on `|L(D_m) − L(h)|`.
    pub error_bound: Option<f64>,
}

/// Sub-samples per piece used to estimate the `L¹` distance in the bound.
const BOUND_SUBSAMPLES: usize = 16;

/// Evaluates the LOC index of `curve` on step approximations with the piece
/// counts in `m_schedule`, sampling each piece at its midpoint.
///
/// Convergence is reported, not enforced: an exhausted schedule returns the
/// last value with `converged == false`.
pub fn loc_refined<F: Fn(f64) -> f64>(
    curve: F,
    m_schedule: &[usize],
    tol: f64,
) -> Result<Refinement> {
    if m_schedule.is_empty() {
        return Err(Error::InvalidArgument("empty refinement schedule".into()));
    }
    if m_schedule[0] == 0 || m_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "refinement schedule must be strictly increasing positive counts".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }

    let mut levels = Vec::with_capacity(m_schedule.len());
    let mut finest = None;
    for &m in m_schedule {
        let step = StepFunction::from_fn(m, &curve)?;
        levels.push(loc_index(&step));
        finest = Some(step);
    }
    let finest = finest.expect("schedule is non-empty");
    let converged = match levels.as_slice() {
        [.., a, b] => (a.value - b.value).abs() < tol,
        _ => false,
    };

    let m = finest.m();
    let h = 1.0 / (m * BOUND_SUBSAMPLES) as f64;
    let l1 = compensated_sum((0..m * BOUND_SUBSAMPLES).map(|k| {
        let t = (k as f64 + 0.5) * h;
        (finest.eval(t) - curve(t)).abs() * h
    }));
    let error_bound = (2.0 * l1).is_finite().then_some(2.0 * l1);

    Ok(Refinement {
        value: *levels.last().unwrap(),
        levels,
        converged,
        error_bound,
    })
}
