//! The three private mean estimators and their shared clipping primitive.
//!
//! Each estimator privatizes a two-dimensional aggregate of the dataset and
//! post-processes it into a mean that always lies in `[lower, upper]`:
//!
//! | mechanism     | aggregate                          | noise scales                   |
//! |---------------|------------------------------------|--------------------------------|
//! | `independent` | `(sum, count)`                     | `2 max(|l|,|u|)/eps`, `2/eps`  |
//! | `shifted`     | `(sum of x - m, count)`            | `(u - l)/eps`, `2/eps`         |
//! | `transformed` | `(s1, s2) = (sum x', n - sum x')`  | `1/eps`, `1/eps`               |
//!
//! where `m = (l + u)/2` and `x' = (x - l)/(u - l)`.
//!
//! The `estimate_*` functions take the noise as an argument; [`run_mechanism`]
//! is the only place that samples it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::noise::{laplace_sample, LaplaceParams, RandomStream, StreamCursor};
use crate::numeric::compensated_sum;

/// A multiset of reals declared to lie in `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedDataset {
    values: Vec<f64>,
    lower: f64,
    upper: f64,
}

impl BoundedDataset {
    pub fn new(values: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        check_bounds(lower, upper)?;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= lower && **v <= upper))
        {
            return Err(Error::Domain(format!(
                "value {v} at index {i} lies outside [{lower}, {upper}]"
            )));
        }
        Ok(Self { values, lower, upper })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `u - l`.
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// `(l + u) / 2`.
    pub fn midpoint(&self) -> f64 {
        midpoint(self.lower, self.upper)
    }

    /// Add-remove neighbor obtained by inserting `x`.
    pub fn with_added(&self, x: f64) -> Result<Self> {
        let mut values = self.values.clone();
        values.push(x);
        Self::new(values, self.lower, self.upper)
    }

    /// Add-remove neighbor obtained by deleting the element at `index`.
    pub fn with_removed(&self, index: usize) -> Self {
        let mut values = self.values.clone();
        values.remove(index);
        Self { values, lower: self.lower, upper: self.upper }
    }
}

pub(crate) fn check_bounds(lower: f64, upper: f64) -> Result<()> {
    if !(lower.is_finite() && upper.is_finite() && lower < upper) {
        return param(format!("bounds must be finite with lower < upper, got [{lower}, {upper}]"));
    }
    Ok(())
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) / 2.0
}

/// The privacy parameter `eps`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PrivacyBudget(f64);

impl PrivacyBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return param(format!("epsilon must be positive and finite, got {epsilon}"));
        }
        Ok(Self(epsilon))
    }

    pub fn epsilon(&self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PrivacyBudget {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<PrivacyBudget> for f64 {
    fn from(b: PrivacyBudget) -> f64 {
        b.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Noisy sum over noisy count, budget split in half.
    Independent,
    /// Like `Independent` but the data are centered at the interval midpoint first.
    Shifted,
    /// Noisy `(s1, s2)` pair with correlated numerator and denominator noise.
    Transformed,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Independent, Mechanism::Shifted, Mechanism::Transformed];

    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::Independent => "independent",
            Mechanism::Shifted => "shifted",
            Mechanism::Transformed => "transformed",
        }
    }

    pub fn aggregate_kind(&self) -> AggregateKind {
        match self {
            Mechanism::Independent => AggregateKind::SumCount,
            Mechanism::Shifted => AggregateKind::ShiftedSumCount,
            Mechanism::Transformed => AggregateKind::TransformedPair,
        }
    }

    /// Laplace scales `(scale_a, scale_b)` of the two noise coordinates.
    pub fn noise_scales(&self, lower: f64, upper: f64, eps: PrivacyBudget) -> (f64, f64) {
        let e = eps.epsilon();
        match self {
            Mechanism::Independent => (2.0 * lower.abs().max(upper.abs()) / e, 2.0 / e),
            Mechanism::Shifted => ((upper - lower) / e, 2.0 / e),
            Mechanism::Transformed => (1.0 / e, 1.0 / e),
        }
    }

    /// Draws this mechanism's noise pair from `cursor`, first coordinate first.
    pub fn draw_noise(
        &self,
        lower: f64,
        upper: f64,
        eps: PrivacyBudget,
        cursor: &mut StreamCursor,
    ) -> Result<NoisePair> {
        let (sa, sb) = self.noise_scales(lower, upper, eps);
        let (pa, pb) = (LaplaceParams::new(sa)?, LaplaceParams::new(sb)?);
        let za = laplace_sample(cursor, &pa);
        let zb = laplace_sample(cursor, &pb);
        Ok(NoisePair { za, zb })
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(Mechanism::Independent),
            "shifted" => Ok(Mechanism::Shifted),
            "transformed" => Ok(Mechanism::Transformed),
            other => param(format!("unknown mechanism {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregateKind {
    SumCount,
    ShiftedSumCount,
    TransformedPair,
}

/// Two-dimensional statistic released by a mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateVector {
    pub first: f64,
    pub second: f64,
    pub kind: AggregateKind,
}

impl AggregateVector {
    pub fn from_dataset(d: &BoundedDataset, kind: AggregateKind) -> Self {
        let n = d.len() as f64;
        let (first, second) = match kind {
            AggregateKind::SumCount => (compensated_sum(d.values.iter().copied()), n),
            AggregateKind::ShiftedSumCount => {
                let m = d.midpoint();
                (compensated_sum(d.values.iter().map(|x| x - m)), n)
            }
            AggregateKind::TransformedPair => {
                let s1 = normalized_sum(d).clamp(0.0, n);
                (s1, n - s1)
            }
        };
        Self { first, second, kind }
    }

    pub fn perturbed(&self, noise: NoisePair) -> Self {
        Self { first: self.first + noise.za, second: self.second + noise.zb, kind: self.kind }
    }
}

/// `sum (x - l)/(u - l)`, the scaled sum of the data mapped into `[0, 1]`.
pub(crate) fn normalized_sum(d: &BoundedDataset) -> f64 {
    let (lo, w) = (d.lower, d.width());
    compensated_sum(d.values.iter().map(|x| (x - lo) / w))
}

/// Additive noise for the two aggregate coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoisePair {
    pub za: f64,
    pub zb: f64,
}

impl NoisePair {
    pub fn new(za: f64, zb: f64) -> Self {
        Self { za, zb }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub value: f64,
    pub mechanism: Mechanism,
    /// The privatized aggregate the value was computed from.
    pub noisy_aggregates: AggregateVector,
}

/// `max(lo, min(x, hi))`; NaN maps to the midpoint of `[lo, hi]`.
pub fn clip(x: f64, lo: f64, hi: f64) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return param(format!("clip interval [{lo}, {hi}] is empty"));
    }
    Ok(clip_unchecked(x, lo, hi))
}

pub(crate) fn clip_unchecked(x: f64, lo: f64, hi: f64) -> f64 {
    if x.is_nan() {
        midpoint(lo, hi)
    } else {
        lo.max(x.min(hi))
    }
}

/// `num / den` with a zero denominator read as `sign(num) * inf` and `0/0`
/// as NaN, independent of the sign of the zero.
pub(crate) fn noisy_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 || num.is_nan() {
            f64::NAN
        } else {
            num.signum() * f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Maps `c` in `[0, 1]` back to `[lo, hi]`.
pub(crate) fn rescale_unit(c: f64, lo: f64, hi: f64) -> f64 {
    ((hi - lo) * c + lo).clamp(lo, hi)
}

/// Exact sample mean with compensated summation.
pub fn true_mean(d: &BoundedDataset) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::Domain("mean of an empty dataset".into()));
    }
    Ok(compensated_sum(d.values.iter().copied()) / d.len() as f64)
}

fn require_nonempty(d: &BoundedDataset) -> Result<()> {
    if d.is_empty() {
        return Err(Error::Domain("cannot estimate the mean of an empty dataset".into()));
    }
    Ok(())
}

/// Post-processing of a privatized aggregate into a mean in `[lo, hi]`.
pub(crate) fn release(noisy: &AggregateVector, lo: f64, hi: f64) -> f64 {
    match noisy.kind {
        AggregateKind::SumCount => clip_unchecked(noisy_ratio(noisy.first, noisy.second), lo, hi),
        AggregateKind::ShiftedSumCount => {
            let half = (hi - lo) / 2.0;
            let m = midpoint(lo, hi);
            (clip_unchecked(noisy_ratio(noisy.first, noisy.second), -half, half) + m).clamp(lo, hi)
        }
        AggregateKind::TransformedPair => {
            let ratio = noisy_ratio(noisy.first, noisy.first + noisy.second);
            rescale_unit(clip_unchecked(ratio, 0.0, 1.0), lo, hi)
        }
    }
}

fn estimate_with(d: &BoundedDataset, mechanism: Mechanism, noise: NoisePair) -> Result<MeanEstimate> {
    require_nonempty(d)?;
    let noisy = AggregateVector::from_dataset(d, mechanism.aggregate_kind()).perturbed(noise);
    Ok(MeanEstimate { value: release(&noisy, d.lower, d.upper), mechanism, noisy_aggregates: noisy })
}

/// Noisy sum over noisy count, clipped to `[l, u]`. `noise.za` perturbs the
/// sum and `noise.zb` the count.
pub fn estimate_independent(d: &BoundedDataset, _eps: PrivacyBudget, noise: NoisePair) -> Result<MeanEstimate> {
    estimate_with(d, Mechanism::Independent, noise)
}

/// Shifts the data by the midpoint, then noisy sum over noisy count clipped
/// to `[-w/2, w/2]`, shifted back.
pub fn estimate_shifted(d: &BoundedDataset, _eps: PrivacyBudget, noise: NoisePair) -> Result<MeanEstimate> {
    estimate_with(d, Mechanism::Shifted, noise)
}

/// Releases `(s1 + z1, s2 + z2)` and outputs
/// `w * clip(s1^ / (s1^ + s2^), 0, 1) + l`.
///
/// `s2` is computed as the count minus `s1`, which equals
/// `sum (1 - x')` and keeps `s1 + s2 = n`.
pub fn estimate_transformed(d: &BoundedDataset, _eps: PrivacyBudget, noise: NoisePair) -> Result<MeanEstimate> {
    estimate_with(d, Mechanism::Transformed, noise)
}

pub fn estimate(d: &BoundedDataset, eps: PrivacyBudget, mechanism: Mechanism, noise: NoisePair) -> Result<MeanEstimate> {
    match mechanism {
        Mechanism::Independent => estimate_independent(d, eps, noise),
        Mechanism::Shifted => estimate_shifted(d, eps, noise),
        Mechanism::Transformed => estimate_transformed(d, eps, noise),
    }
}

/// Samples the mechanism's noise from `stream` and runs it once.
pub fn run_mechanism(
    d: &BoundedDataset,
    eps: PrivacyBudget,
    mechanism: Mechanism,
    stream: RandomStream,
) -> Result<MeanEstimate> {
    require_nonempty(d)?;
    let noise = mechanism.draw_noise(d.lower, d.upper, eps, &mut stream.cursor())?;
    estimate(d, eps, mechanism, noise)
}

/// Precomputed aggregate for repeated runs of one mechanism on one dataset.
#[derive(Debug, Clone, Copy)]
pub struct PreparedRun {
    mechanism: Mechanism,
    eps: PrivacyBudget,
    aggregate: AggregateVector,
    lower: f64,
    upper: f64,
}

impl PreparedRun {
    pub fn new(d: &BoundedDataset, eps: PrivacyBudget, mechanism: Mechanism) -> Result<Self> {
        require_nonempty(d)?;
        Ok(Self {
            mechanism,
            eps,
            aggregate: AggregateVector::from_dataset(d, mechanism.aggregate_kind()),
            lower: d.lower,
            upper: d.upper,
        })
    }

    pub fn release_with(&self, noise: NoisePair) -> f64 {
        release(&self.aggregate.perturbed(noise), self.lower, self.upper)
    }

    /// Same result as [`run_mechanism`] on the same stream.
    pub fn run(&self, stream: RandomStream) -> Result<f64> {
        let noise = self.mechanism.draw_noise(self.lower, self.upper, self.eps, &mut stream.cursor())?;
        Ok(self.release_with(noise))
    }
}
