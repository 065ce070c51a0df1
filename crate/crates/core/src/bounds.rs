//! Closed-form error quantities: min-max leading terms, per-dataset MSE
//! bounds for the shifted and transformed estimators, the clipped-ratio
//! decomposition bound, and the geometric-mechanism count variance.
//!
//! All min-max values are leading terms of asymptotic statements. They are
//! reported as-is, with [`RiskReport::asymptotic`] set, and no finite-n
//! correction is ever folded in.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanisms::{check_bounds, normalized_sum, true_mean, BoundedDataset, Mechanism, PrivacyBudget};
use crate::numeric::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborModel {
    Swap,
    AddRemove,
}

/// A leading term in normalized units (`|D|² · MSE`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub model: NeighborModel,
    pub leading_term: f64,
    pub formula_id: String,
    /// The value omits a `1 ± o(1)` factor.
    pub asymptotic: bool,
}

fn plug_in(eps: f64, lo: f64, hi: f64) -> Result<f64> {
    let eps = PrivacyBudget::new(eps)?.epsilon();
    check_bounds(lo, hi)?;
    let w = hi - lo;
    Ok(2.0 * w * w / (eps * eps))
}

/// `2 (u - l)² / eps²`, achieved by the Laplace mechanism with public count.
pub fn swap_minmax_leading(eps: f64, lo: f64, hi: f64) -> Result<f64> {
    plug_in(eps, lo, hi)
}

/// `2 (u - l)² / eps²`, achieved by the transformed estimator.
pub fn add_remove_minmax_leading(eps: f64, lo: f64, hi: f64) -> Result<f64> {
    plug_in(eps, lo, hi)
}

/// `2 (u - l)² / eps²`. The `1 - o(1)` factor is reported as 1.
pub fn lower_bound_leading(eps: f64, lo: f64, hi: f64) -> Result<f64> {
    plug_in(eps, lo, hi)
}

pub fn minmax_reports(eps: f64, lo: f64, hi: f64) -> Result<Vec<RiskReport>> {
    let report = |model, leading_term, id: &str| RiskReport {
        model,
        leading_term,
        formula_id: id.to_string(),
        asymptotic: true,
    };
    Ok(vec![
        report(NeighborModel::Swap, swap_minmax_leading(eps, lo, hi)?, "swap_minmax"),
        report(NeighborModel::AddRemove, add_remove_minmax_leading(eps, lo, hi)?, "add_remove_upper"),
        report(NeighborModel::AddRemove, lower_bound_leading(eps, lo, hi)?, "add_remove_lower"),
        report(NeighborModel::AddRemove, 2.0 * add_remove_minmax_leading(eps, lo, hi)?, "shifted_worst_case"),
    ])
}

fn per_dataset(d: &BoundedDataset, eps: PrivacyBudget) -> Result<(f64, f64, f64, f64)> {
    let mu = true_mean(d)?;
    let n = d.len() as f64;
    let e = eps.epsilon();
    Ok((d.width(), mu - d.midpoint(), n * n * e * e, mu))
}

/// `(2 (u - l)² + 8 (mu - m)²) / (|D|² eps²)`: leading MSE term of the
/// shifted estimator.
pub fn alg2_mse_bound_leading(d: &BoundedDataset, eps: PrivacyBudget) -> Result<f64> {
    let (w, dev, denom, _) = per_dataset(d, eps)?;
    Ok((2.0 * w * w + 8.0 * dev * dev) / denom)
}

/// `((u - l)² + 4 (mu - m)²) / (|D|² eps²)`: leading MSE term of the
/// transformed estimator.
pub fn alg3_mse_bound_leading(d: &BoundedDataset, eps: PrivacyBudget) -> Result<f64> {
    let (w, dev, denom, _) = per_dataset(d, eps)?;
    Ok((w * w + 4.0 * dev * dev) / denom)
}

/// Inputs and terms of the bound
///
/// ```text
/// E[(Clip((a + Za)/(b + Zb)) - a/b)²] <= E[C²] + E[F²] + 2 sqrt(E[C²] E[F²]) + 4 M² Pr(Zb < -b/2)
/// ```
///
/// with `C = Za/b - a Zb/b²` and `F = |2 M Zb²/b²| + |2 Za Zb/b²|`.
/// `E[F²]` is replaced by its bound `(8 M² E[Zb⁴] + 8 E[Za² Zb²]) / b⁴`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma1Terms {
    pub a: f64,
    pub b: f64,
    pub m_bound: f64,
    /// Laplace scale of `Za`.
    pub scale_a: f64,
    /// Laplace scale of `Zb`, or of each summand when `Zb` is a sum of two.
    pub scale_b: f64,
    pub c_sq: f64,
    pub f_sq_bound: f64,
    /// `4 M² Pr(Zb < -b/2)`.
    pub tail: f64,
}

struct NoiseMoments {
    var_a: f64,
    var_b: f64,
    cov_ab: f64,
    zb_fourth: f64,
    za2_zb2: f64,
    zb_tail: f64,
}

impl Lemma1Terms {
    fn from_moments(a: f64, b: f64, m_bound: f64, scale_a: f64, scale_b: f64, mo: NoiseMoments) -> Result<Self> {
        if !(b > 0.0 && m_bound > 0.0) {
            return Err(Error::Precondition(format!("need b > 0 and M > 0, got b = {b}, M = {m_bound}")));
        }
        if a.abs() / b > m_bound * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!("|a|/b = {} exceeds M = {m_bound}", a.abs() / b)));
        }
        let (b2, b4) = (b * b, b * b * b * b);
        let c_sq = (mo.var_a / b2 - 2.0 * a * mo.cov_ab / (b2 * b) + a * a * mo.var_b / b4).max(0.0);
        let f_sq_bound = (8.0 * m_bound * m_bound * mo.zb_fourth + 8.0 * mo.za2_zb2) / b4;
        let tail = 4.0 * m_bound * m_bound * mo.zb_tail;
        Ok(Self { a, b, m_bound, scale_a, scale_b, c_sq, f_sq_bound, tail })
    }

    /// Independent `Za ~ Lap(scale_a)` and `Zb ~ Lap(scale_b)`.
    pub fn independent_laplace(a: f64, b: f64, m_bound: f64, scale_a: f64, scale_b: f64) -> Result<Self> {
        let (sa2, sb2) = (scale_a * scale_a, scale_b * scale_b);
        let mo = NoiseMoments {
            var_a: 2.0 * sa2,
            var_b: 2.0 * sb2,
            cov_ab: 0.0,
            zb_fourth: 24.0 * sb2 * sb2,
            za2_zb2: 4.0 * sa2 * sb2,
            zb_tail: 0.5 * (-b / (2.0 * scale_b)).exp(),
        };
        Self::from_moments(a, b, m_bound, scale_a, scale_b, mo)
    }

    /// `Za = Z1`, `Zb = Z1 + Z2` with `Z1, Z2 ~ Lap(scale)` independent:
    /// `Var Zb = 4 s²`, `Cov(Za, Zb) = 2 s²`, `E[Zb⁴] = 72 s⁴`,
    /// `E[Za² Zb²] = 28 s⁴`, and
    /// `Pr(Zb < -t) = e^{-t/s} (2 + t/s) / 4`.
    pub fn correlated_pair(a: f64, b: f64, m_bound: f64, scale: f64) -> Result<Self> {
        let s2 = scale * scale;
        let t = b / (2.0 * scale);
        let mo = NoiseMoments {
            var_a: 2.0 * s2,
            var_b: 4.0 * s2,
            cov_ab: 2.0 * s2,
            zb_fourth: 72.0 * s2 * s2,
            za2_zb2: 28.0 * s2 * s2,
            zb_tail: 0.25 * (-t).exp() * (2.0 + t),
        };
        Self::from_moments(a, b, m_bound, scale, scale, mo)
    }

    pub fn upper_bound(&self) -> f64 {
        self.c_sq + self.f_sq_bound + 2.0 * (self.c_sq * self.f_sq_bound).sqrt() + self.tail
    }
}

pub fn lemma1_upper_bound(terms: &Lemma1Terms) -> f64 {
    terms.upper_bound()
}

/// Instantiates the decomposition for one estimator on one dataset.
/// Returns the terms and the factor converting the bound into an MSE of
/// the mean (`(u - l)²` for the transformed estimator, which works on
/// normalized data, and 1 otherwise).
pub fn lemma1_terms_for(d: &BoundedDataset, eps: PrivacyBudget, mech: Mechanism) -> Result<(Lemma1Terms, f64)> {
    if d.is_empty() {
        return Err(Error::Domain("empty dataset".into()));
    }
    let n = d.len() as f64;
    let (sa, sb) = mech.noise_scales(d.lower(), d.upper(), eps);
    match mech {
        Mechanism::Independent => {
            let sum = compensated_sum(d.values().iter().copied());
            let m = d.lower().abs().max(d.upper().abs());
            Ok((Lemma1Terms::independent_laplace(sum, n, m, sa, sb)?, 1.0))
        }
        Mechanism::Shifted => {
            let mid = d.midpoint();
            let sum = compensated_sum(d.values().iter().map(|x| x - mid));
            Ok((Lemma1Terms::independent_laplace(sum, n, d.width() / 2.0, sa, sb)?, 1.0))
        }
        Mechanism::Transformed => {
            let s1 = normalized_sum(d).clamp(0.0, n);
            Ok((Lemma1Terms::correlated_pair(s1, n, 1.0, sa)?, d.width() * d.width()))
        }
    }
}

/// Upper bound on the MSE of the mean for one estimator on one dataset.
pub fn lemma1_mse_bound(d: &BoundedDataset, eps: PrivacyBudget, mech: Mechanism) -> Result<f64> {
    let (terms, factor) = lemma1_terms_for(d, eps, mech)?;
    Ok(factor * terms.upper_bound())
}

/// `2 alpha / (1 - alpha)²` with `alpha = e^-eps`: the variance of the
/// two-sided geometric mechanism, i.e. the MSE of the noisy count.
pub fn geometric_count_variance(eps: f64) -> Result<f64> {
    let eps = PrivacyBudget::new(eps)?.epsilon();
    let alpha = (-eps).exp();
    let one_minus = -(-eps).exp_m1();
    Ok(2.0 * alpha / (one_minus * one_minus))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(values: Vec<f64>, lo: f64, hi: f64) -> BoundedDataset {
        BoundedDataset::new(values, lo, hi).unwrap()
    }

    fn eps(e: f64) -> PrivacyBudget {
        PrivacyBudget::new(e).unwrap()
    }

    #[test]
    fn minmax_examples() {
        assert_eq!(swap_minmax_leading(0.5, 0.0, 1.0).unwrap(), 8.0);
        assert_eq!(swap_minmax_leading(1.0, 0.0, 2.0).unwrap(), 8.0);
        assert_eq!(swap_minmax_leading(0.5, 2.0, 4.0).unwrap(), 32.0);
        assert_eq!(add_remove_minmax_leading(0.5, 0.0, 1.0).unwrap(), 8.0);
        assert!((add_remove_minmax_leading(0.1, 0.0, 1.0).unwrap() - 200.0).abs() < 1e-12);
        assert_eq!(lower_bound_leading(0.5, 0.0, 1.0).unwrap(), 8.0);
        assert_eq!(lower_bound_leading(1.0, 0.0, 1.0).unwrap(), 2.0);
        assert!(swap_minmax_leading(0.0, 0.0, 1.0).is_err());
        assert!(lower_bound_leading(0.5, 1.0, 0.0).is_err());
        let r = minmax_reports(0.5, 0.0, 1.0).unwrap();
        assert!(r.iter().all(|r| r.asymptotic && r.leading_term > 0.0));
    }

    #[test]
    fn per_dataset_examples() {
        let center = ds(vec![0.5; 1000], 0.0, 1.0);
        assert!((alg2_mse_bound_leading(&center, eps(0.5)).unwrap() - 8e-6).abs() < 1e-18);
        assert!((alg3_mse_bound_leading(&center, eps(0.5)).unwrap() - 4e-6).abs() < 1e-18);
        let edge = ds(vec![1.0; 1000], 0.0, 1.0);
        assert!((alg2_mse_bound_leading(&edge, eps(0.5)).unwrap() - 4.0 / (1e6 * 0.25)).abs() < 1e-18);
        assert!((alg3_mse_bound_leading(&edge, eps(0.5)).unwrap() - 2.0 / (1e6 * 0.25)).abs() < 1e-18);
        let mut last = 0.0;
        for k in 0..=10 {
            let d = ds(vec![0.5 + 0.05 * k as f64; 10], 0.0, 1.0);
            let b = alg2_mse_bound_leading(&d, eps(1.0)).unwrap();
            assert!(b >= last);
            last = b;
            assert_eq!(b, 2.0 * alg3_mse_bound_leading(&d, eps(1.0)).unwrap());
        }
        assert!(alg3_mse_bound_leading(&ds(vec![], 0.0, 1.0), eps(1.0)).is_err());
    }

    #[test]
    fn c_term_with_a_zero() {
        let t = Lemma1Terms::independent_laplace(0.0, 10.0, 1.0, 3.0, 2.0).unwrap();
        assert!((t.c_sq - 2.0 * 9.0 / 100.0).abs() < 1e-15);
        assert!(Lemma1Terms::independent_laplace(11.0, 10.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn shifted_instantiation_approaches_leading_term() {
        let e = eps(0.5);
        let mut prev = f64::INFINITY;
        for n in [1_000usize, 10_000, 100_000, 1_000_000] {
            let mut v = vec![0.0; n / 4];
            v.extend(vec![1.0; n - n / 4]);
            let d = ds(v, 0.0, 1.0);
            let (t, f) = lemma1_terms_for(&d, e, Mechanism::Shifted).unwrap();
            let lead = alg2_mse_bound_leading(&d, e).unwrap();
            assert!((f * t.c_sq - lead).abs() <= 1e-12 * lead);
            let ratio = f * t.upper_bound() / lead;
            assert!(ratio >= 1.0 && ratio < prev);
            prev = ratio;
        }
        assert!(prev < 1.01, "{prev}");
    }

    #[test]
    fn transformed_instantiation_approaches_leading_term() {
        let e = eps(0.5);
        for (n, frac) in [(1_000usize, 0.5), (100_000, 0.25), (1_000_000, 0.9)] {
            let k = (n as f64 * frac) as usize;
            let mut v = vec![3.0; k];
            v.extend(vec![1.0; n - k]);
            let d = ds(v, 1.0, 3.0);
            let (t, f) = lemma1_terms_for(&d, e, Mechanism::Transformed).unwrap();
            let lead = alg3_mse_bound_leading(&d, e).unwrap();
            assert!((f * t.c_sq - lead).abs() <= 1e-12 * lead, "{} vs {lead}", f * t.c_sq);
            if n >= 100_000 {
                assert!(f * t.upper_bound() / lead < 1.05);
            }
        }
    }

    #[test]
    fn correlated_tail_matches_quadrature() {
        // density of the sum of two Lap(s): (1 + |x|/s) e^{-|x|/s} / (4 s)
        let s: f64 = 2.0;
        let t: f64 = 3.0;
        let h = 1e-3;
        let mut acc = 0.0;
        let mut x = t + h / 2.0;
        while x < t + 200.0 {
            acc += (1.0 + x / s) * (-x / s).exp() / (4.0 * s) * h;
            x += h;
        }
        let terms = Lemma1Terms::correlated_pair(0.0, 2.0 * t, 1.0, s).unwrap();
        assert!((terms.tail / 4.0 - acc).abs() < 1e-6, "{} vs {acc}", terms.tail / 4.0);
    }

    #[test]
    fn geometric_variance_examples() {
        // 2 sum_k k^2 (1-a)/(1+a) a^k summed to convergence
        assert!((geometric_count_variance(0.5).unwrap() - 7.835_396_178_065_529).abs() < 1e-9);
        assert!((geometric_count_variance(1.0).unwrap() - 1.841_347_188_415_584_8).abs() < 1e-9);
        let r = geometric_count_variance(1e-4).unwrap() / (2.0 / 1e-8);
        assert!((r - 1.0).abs() < 1e-6);
        assert!(geometric_count_variance(-1.0).is_err());
    }
}
