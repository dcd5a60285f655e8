//! Closed-form population moments and regression coefficients.
//!
//! All coefficients are population OLS slopes under stationarity with
//! Var(e) = 1. For the latent-factor family the outcome is additionally
//! normalized to Var(y) = 1, so slopes and correlations coincide.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{bt_var_y, solve_sigma2_for_unit_var, ModelParams, Variant};
use crate::scalar::Scalar;

/// Analytic moments of one transmission process.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSet<T> {
    /// β₋ₖ: slope of child status on the status of the ancestor k generations back.
    pub beta_k: BTreeMap<u32, T>,
    /// Parent slope in the child–parent–grandparent regression (same lineage).
    pub beta_p: T,
    /// Grandparent slope, same lineage.
    pub beta_gp_same: T,
    /// Grandparent slope with parent and grandparent from different lineages.
    pub beta_gp_cross: Option<T>,
    /// Grandparent slope when both parents are controlled for.
    pub beta_gp_both: Option<T>,
    pub spousal_corr_e: Option<T>,
    pub spousal_corr_y: Option<T>,
    /// One-parent transferability: λ, λ̃(1+m)/2, or λ_I.
    pub lambda_eff: T,
    pub var_y: T,
}

impl<T: Scalar> MomentSet<T> {
    pub fn beta(&self, k: u32) -> Option<T> {
        self.beta_k.get(&k).copied()
    }
}

fn unit_interval_open_left<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must lie in (0, 1], got {v}")))
    }
}

fn unit_interval<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v >= T::zero() && v <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn nonzero<T: Scalar>(what: &str, denom: T) -> Result<T> {
    if denom.abs() <= T::epsilon() {
        Err(Error::Degenerate(format!("{what} vanishes")))
    } else {
        Ok(denom)
    }
}

/// Grandparent coefficient implied by the pairwise coefficients of a
/// stationary chain: (β₋₂ − β₋₁²)/(1 − β₋₁²).
pub fn duality_gp<T: Scalar>(beta1: T, beta2: T) -> Result<T> {
    if beta1.abs() >= T::one() {
        return Err(Error::Degenerate(format!("|beta1| = {} leaves no residual variation", beta1.abs())));
    }
    Ok((beta2 - beta1 * beta1) / (T::one() - beta1 * beta1))
}

/// Grandparent coefficient without stationarity:
/// (β₋₂ − β^{gp→p} β^{p→c}) · Var(y_{t−2}) / Var(ỹ_{t−2}).
pub fn duality_gp_nonstationary<T: Scalar>(beta2: T, beta1_gp_p: T, beta1_p_c: T, var_ratio: T) -> Result<T> {
    if !(var_ratio > T::zero()) {
        return Err(Error::InvalidParams(format!("variance ratio must be > 0, got {var_ratio}")));
    }
    Ok((beta2 - beta1_gp_p * beta1_p_c) * var_ratio)
}

/// Multigenerational regression coefficients of the simplified Becker–Tomes
/// process `y_t = (γ+λ) y_{t−1} − γλ y_{t−2} + ρ v_t`.
pub fn simplified_bt_coeffs<T: Scalar>(gamma: T, lambda: T) -> Result<(T, T)> {
    if gamma * lambda >= T::one() {
        return Err(Error::NonStationary { gamma: gamma.as_f64(), gamma_lambda: (gamma * lambda).as_f64() });
    }
    Ok((gamma + lambda, -gamma * lambda))
}

/// Stationary parent slope in the three-generation regression.
fn parent_slope<T: Scalar>(beta1: T, beta2: T) -> T {
    beta1 * (T::one() - beta2) / (T::one() - beta1 * beta1)
}

/// Latent-factor moments with Var(y) = Var(e) = 1.
pub fn lf_moments<T: Scalar>(rho: T, lambda: T, k_max: u32) -> Result<MomentSet<T>> {
    unit_interval_open_left("rho", rho)?;
    unit_interval_open_left("lambda", lambda)?;
    let one = T::one();
    let rho2 = rho * rho;
    let rho4 = rho2 * rho2;
    let lam2 = lambda * lambda;

    let beta_k: BTreeMap<u32, T> = (1..=k_max.max(2)).map(|k| (k, rho2 * lambda.powi(k as i32))).collect();
    let denom = nonzero("1 - rho^4 lambda^2", one - rho4 * lam2)?;
    let beta_gp_same = (rho2 * lam2 - rho4 * lam2) / denom;
    let beta_p = parent_slope(beta_k[&1], beta_k[&2]);

    Ok(MomentSet {
        beta_k,
        beta_p,
        beta_gp_same,
        beta_gp_cross: None,
        beta_gp_both: None,
        spousal_corr_e: None,
        spousal_corr_y: None,
        lambda_eff: lambda,
        var_y: one,
    })
}

/// Grandparent coefficient of the original Becker–Tomes model under the
/// Var(y) = 1 normalization. With A = ρ²λ/(1−γλ):
/// β_gp = A(λ − γ − A) / (1 − (γ + A)²).
pub fn bt_gp_normalized<T: Scalar>(gamma: T, lambda: T, rho: T) -> Result<T> {
    solve_sigma2_for_unit_var(gamma, lambda, rho)?;
    let one = T::one();
    let a = rho * rho * lambda / (one - gamma * lambda);
    let b1 = gamma + a;
    let denom = nonzero("1 - (gamma + A)^2", one - b1 * b1)?;
    Ok(a * (lambda - gamma - a) / denom)
}

fn bt_gp_parts<T: Scalar>(gamma: T, lambda: T, rho: T, s2: T) -> (T, T) {
    let one = T::one();
    let two = T::lit(2.0);
    let (g, l) = (gamma, lambda);
    let r2 = rho * rho;
    let r4 = r2 * r2;
    let gl1 = g * l - one;
    let num = l * r2 * (g * g * l * s2 + g * (l * l - one) * r2 - g * (l * l + one) * s2 + l * s2);
    let den = -two * r2 * s2 * gl1 + s2 * s2 * gl1 * gl1 - (l * l - one) * r4;
    (num, den)
}

/// Grandparent coefficient of the original Becker–Tomes model for an
/// arbitrary outcome-noise variance σ² (no outcome normalization).
pub fn bt_gp_general<T: Scalar>(gamma: T, lambda: T, rho: T, sigma2_u: T) -> Result<T> {
    bt_var_y(gamma, lambda, rho, sigma2_u)?;
    let (num, den) = bt_gp_parts(gamma, lambda, rho, sigma2_u);
    Ok(num / nonzero("grandparent-coefficient denominator", den)?)
}

/// ∂β_gp/∂γ of [`bt_gp_general`]; negative whenever λ > 0 and ρ > 0.
pub fn bt_gp_dgamma<T: Scalar>(gamma: T, lambda: T, rho: T, sigma2_u: T) -> Result<T> {
    bt_var_y(gamma, lambda, rho, sigma2_u)?;
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    let (g, l, s) = (gamma, lambda, sigma2_u);
    let r2 = rho * rho;
    let r4 = r2 * r2;
    let r6 = r4 * r2;
    let l2 = l * l;
    let gl1 = g * l - one;

    let (_, den) = bt_gp_parts(gamma, lambda, rho, sigma2_u);
    nonzero("grandparent-coefficient denominator", den)?;

    let inner_a = r2 * s * s * (g * g * (l2 * l2 + l2) - four * g * l - l2 + three)
        + (l2 - one) * r4 * s * (two * g * l - l2 - three);
    // The (λ²−1)²ρ⁶ term enters with a negative sign; at σ² = 0 this gives −λ.
    let inner_b = (l2 - one) * s * s * s * gl1 * gl1 - (l2 - one) * (l2 - one) * r6;
    Ok(l * r2 * (inner_b - inner_a) / (den * den))
}

/// Moments of the Becker–Tomes family (original or simplified) for any σ².
pub fn bt_moments<T: Scalar>(gamma: T, lambda: T, rho: T, sigma2_u: T, k_max: u32) -> Result<MomentSet<T>> {
    let var_y = bt_var_y(gamma, lambda, rho, sigma2_u)?;
    let one = T::one();
    // Cov(e_t, y_{t−k}) = λᵏ ρ/(1−γλ); β₋ₖ = γβ₋ₖ₊₁ + ρ Cov(e_t, y_{t−k}) / Var(y).
    let cov_ey = rho / (one - gamma * lambda);
    let mut beta_k = BTreeMap::new();
    let mut prev = one;
    for k in 1..=k_max.max(2) {
        let b = gamma * prev + rho * lambda.powi(k as i32) * cov_ey / var_y;
        beta_k.insert(k, b);
        prev = b;
    }
    let (b1, b2) = (beta_k[&1], beta_k[&2]);
    let beta_gp_same = duality_gp(b1, b2)?;
    Ok(MomentSet {
        beta_k,
        beta_p: parent_slope(b1, b2),
        beta_gp_same,
        beta_gp_cross: None,
        beta_gp_both: None,
        spousal_corr_e: None,
        spousal_corr_y: None,
        lambda_eff: lambda,
        var_y,
    })
}

/// Latent-factor model with direct assortative mating of strength `m`.
///
/// Only k ≤ 2 is reported for β₋ₖ.
pub fn direct_am_moments<T: Scalar>(lambda_tilde: T, m: T, rho: T) -> Result<MomentSet<T>> {
    unit_interval_open_left("lambda_tilde", lambda_tilde)?;
    unit_interval("m", m)?;
    unit_interval_open_left("rho", rho)?;
    let one = T::one();
    let two = T::lit(2.0);
    let lam = lambda_tilde * (one + m) / two;
    let (r2, lam2) = (rho * rho, lam * lam);
    let r4 = r2 * r2;
    let m2 = m * m;

    let beta_k: BTreeMap<u32, T> = [(1, r2 * lam), (2, r2 * lam2)].into_iter().collect();
    let same = (r2 * lam2 - r4 * lam2) / nonzero("1 - rho^4 lambda^2", one - r4 * lam2)?;
    // Cov(y_father, y_maternal_gp) = ρ² m λ, so the cross-lineage slope is
    // (β₋₂ − β₋₁·mρ²λ) / (1 − m²ρ⁴λ²).
    let cross = r2 * lam2 * (one - m * r2) / nonzero("1 - m^2 rho^4 lambda^2", one - m2 * r4 * lam2)?;
    let both_den = one - m2 * r4 + r4 * lam2 * (m2 * (two * r2 - one) - one);
    // Vanishes only at m = ρ = 1, where the two parents' outcomes coincide.
    let both = nonzero("both-parents denominator", both_den).ok().map(|d| r2 * lam2 * (r2 - one) * (m * r2 - one) / d);

    Ok(MomentSet {
        beta_p: parent_slope(beta_k[&1], beta_k[&2]),
        beta_k,
        beta_gp_same: same,
        beta_gp_cross: Some(cross),
        beta_gp_both: both,
        spousal_corr_e: Some(m),
        spousal_corr_y: Some(r2 * m),
        lambda_eff: lam,
        var_y: one,
    })
}

/// λ_I = λ̃ / (2 − mλ̃).
pub fn family_lambda<T: Scalar>(lambda_tilde: T, m: T) -> T {
    lambda_tilde / (T::lit(2.0) - m * lambda_tilde)
}

/// β₋₂/β₋₁ under family-based matching: (λ̃ + m(2 − mλ̃))/2.
pub fn family_am_ratio<T: Scalar>(lambda_tilde: T, m: T) -> T {
    (lambda_tilde + m * (T::lit(2.0) - m * lambda_tilde)) / T::lit(2.0)
}

/// β₋₂/β₋₁ under direct matching: λ̃(1 + m)/2.
pub fn direct_am_ratio<T: Scalar>(lambda_tilde: T, m: T) -> T {
    lambda_tilde * (T::one() + m) / T::lit(2.0)
}

/// Latent-factor model where the choosing mother-in-law's endowment drives
/// the match. Same lineage means mother and maternal grandmother.
pub fn family_am_moments<T: Scalar>(lambda_tilde: T, m: T, rho: T) -> Result<MomentSet<T>> {
    unit_interval_open_left("lambda_tilde", lambda_tilde)?;
    unit_interval("m", m)?;
    unit_interval_open_left("rho", rho)?;
    let one = T::one();
    let two = T::lit(2.0);
    let lam_i = family_lambda(lambda_tilde, m);
    let r2 = rho * rho;
    let r4 = r2 * r2;

    let beta1 = r2 * lam_i;
    let beta2 = r2 * (lambda_tilde * lambda_tilde + m * lambda_tilde * (two - m * lambda_tilde))
        / (T::lit(4.0) - two * m * lambda_tilde);
    let denom = nonzero("1 - rho^4 lambda_I^2", one - r4 * lam_i * lam_i)?;
    let same = (r2 * lambda_tilde * (lam_i + m) / two - r4 * lam_i * lam_i) / denom;

    Ok(MomentSet {
        beta_k: [(1, beta1), (2, beta2)].into_iter().collect(),
        beta_p: parent_slope(beta1, beta2),
        beta_gp_same: same,
        beta_gp_cross: None,
        beta_gp_both: None,
        spousal_corr_e: Some(m * lam_i),
        spousal_corr_y: Some(r2 * m * lam_i),
        lambda_eff: lam_i,
        var_y: one,
    })
}

/// Dispatches to the closed forms matching `p.variant()`.
///
/// Latent-factor variants assume the unit-variance normalization; a
/// non-normalized latent-factor process is handled by the Becker–Tomes
/// formulas with γ = 0.
pub fn model_moments<T: Scalar>(p: &ModelParams<T>, k_max: u32) -> Result<MomentSet<T>> {
    match p.variant() {
        Variant::SimplifiedBt | Variant::OriginalBt => bt_moments(p.gamma(), p.lambda(), p.rho(), p.sigma2_u(), k_max),
        Variant::LatentFactor if p.normalize_y() => lf_moments(p.rho(), p.lambda(), k_max),
        Variant::LatentFactor => bt_moments(T::zero(), p.lambda(), p.rho(), p.sigma2_u(), k_max),
        Variant::LatentFactorDirectAm | Variant::LatentFactorFamilyAm if !p.normalize_y() => {
            Err(Error::InvalidParams("assortative moments require normalize_y = true".into()))
        }
        Variant::LatentFactorDirectAm => direct_am_moments(p.lambda(), p.m(), p.rho()),
        Variant::LatentFactorFamilyAm => family_am_moments(p.lambda(), p.m(), p.rho()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn duality_examples() {
        assert_abs_diff_eq!(duality_gp(0.5, 0.25).unwrap(), 0.0, epsilon = 1e-15);
        let v: f64 = duality_gp(0.4657, 0.3074).unwrap();
        assert!((v - 0.1156).abs() < 5e-4, "{v}");
        assert!(matches!(duality_gp(1.0, 0.3), Err(Error::Degenerate(_))));
        assert!(matches!(duality_gp(-1.0, 0.3), Err(Error::Degenerate(_))));
    }

    #[test]
    fn nonstationary_duality_examples() {
        for r in [0.3, 1.0, 7.0] {
            assert_abs_diff_eq!(duality_gp_nonstationary(0.25, 0.5, 0.5, r).unwrap(), 0.0, epsilon = 1e-15);
        }
        let v: f64 = duality_gp_nonstationary(0.312, 0.638, 0.516, 1.0).unwrap();
        assert_abs_diff_eq!(v, 0.312 - 0.638 * 0.516, epsilon = 1e-15);
        assert!((v + 0.0172).abs() < 5e-5);
        assert!(duality_gp_nonstationary(0.3, 0.5, 0.5, 0.0).is_err());
    }

    #[test]
    fn simplified_bt_examples() {
        assert_eq!(simplified_bt_coeffs(0.0, 0.4).unwrap(), (0.4, 0.0));
        let (bp, bgp) = simplified_bt_coeffs(0.2, 0.5).unwrap();
        assert_abs_diff_eq!(bp, 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(bgp, -0.1, epsilon = 1e-15);
        let (bp, bgp) = simplified_bt_coeffs(0.33, 0.33).unwrap();
        assert_abs_diff_eq!(bp, 0.66, epsilon = 1e-15);
        assert_abs_diff_eq!(bgp, -0.1089, epsilon = 1e-15);
    }

    #[test]
    fn lf_examples() {
        let ms = lf_moments(1.0, 0.7, 3).unwrap();
        assert_abs_diff_eq!(ms.beta(1).unwrap(), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(ms.beta_gp_same, 0.0, epsilon = 1e-15);

        let ms = lf_moments(0.84f64, 0.66, 3).unwrap();
        assert!((ms.beta_gp_same - 0.11).abs() <= 0.01);
        assert_abs_diff_eq!(ms.beta(1).unwrap(), 0.4657, epsilon = 1e-4);
        assert_abs_diff_eq!(ms.beta(2).unwrap(), 0.3074, epsilon = 1e-4);
        assert_abs_diff_eq!(ms.beta(3).unwrap(), 0.2029, epsilon = 1e-4);
        // same value through the duality route
        let via = duality_gp(ms.beta(1).unwrap(), ms.beta(2).unwrap()).unwrap();
        assert_abs_diff_eq!(ms.beta_gp_same, via, epsilon = 1e-14);
        assert!(lf_moments(1.0, 1.0, 2).is_err());
    }

    #[test]
    fn bt_normalized_examples() {
        let lf = lf_moments(0.84, 0.66, 2).unwrap();
        assert_abs_diff_eq!(bt_gp_normalized(0.0, 0.66, 0.84).unwrap(), lf.beta_gp_same, epsilon = 1e-14);
        let red: f64 = bt_gp_normalized(0.33, 0.33, 0.84).unwrap();
        assert!((red + 0.1050).abs() < 5e-4, "{red}");
        assert!(bt_gp_normalized(0.5, 0.3, 0.3).unwrap() < 0.0);
        assert!(matches!(bt_gp_normalized(0.5, 0.5, 1.0), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn bt_general_examples() {
        for (g, l, r) in [(0.2, 0.5, 0.9), (0.6, 0.9, 0.3), (0.1, 0.1, 1.0)] {
            assert_abs_diff_eq!(bt_gp_general(g, l, r, 0.0).unwrap(), -g * l, epsilon = 1e-12);
        }
        let s = solve_sigma2_for_unit_var(0.33, 0.33, 0.84).unwrap();
        assert_abs_diff_eq!(
            bt_gp_general(0.33, 0.33, 0.84, s).unwrap(),
            bt_gp_normalized(0.33, 0.33, 0.84).unwrap(),
            epsilon = 1e-12
        );
        assert!(bt_gp_general(1.0, 0.5, 0.5, 0.1).is_err());
    }

    #[test]
    fn bt_moments_consistent_with_general_form() {
        for (g, l, r, s) in [(0.3, 0.5, 0.8, 0.2), (0.6, 0.2, 0.7, 0.5), (0.0, 0.66, 0.84, 0.2944)] {
            let ms = bt_moments(g, l, r, s, 4).unwrap();
            assert_abs_diff_eq!(ms.beta_gp_same, bt_gp_general(g, l, r, s).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_at_zero_noise_is_minus_lambda() {
        for (g, l, r) in [(0.2, 0.5, 0.9), (0.7, 0.3, 0.4)] {
            assert_abs_diff_eq!(bt_gp_dgamma(g, l, r, 0.0).unwrap(), -l, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_matches_central_difference_example() {
        let h = 1e-6;
        let fd = (bt_gp_general(0.3 + h, 0.5, 0.8, 0.2).unwrap() - bt_gp_general(0.3 - h, 0.5, 0.8, 0.2).unwrap())
            / (2.0 * h);
        let cf: f64 = bt_gp_dgamma(0.3, 0.5, 0.8, 0.2).unwrap();
        assert!(((cf - fd) / fd).abs() < 1e-4, "closed {cf} vs fd {fd}");
        assert!(bt_gp_dgamma(1e-6, 0.5, 0.8, 0.2).unwrap() < 0.0);
    }

    #[test]
    fn direct_am_boundaries() {
        let ms = direct_am_moments(0.8, 1.0, 0.9).unwrap();
        assert_abs_diff_eq!(ms.beta_gp_cross.unwrap(), ms.beta_gp_same, epsilon = 1e-14);

        let ms = direct_am_moments(0.8, 0.0, 0.9).unwrap();
        let lam = 0.4;
        assert_abs_diff_eq!(ms.beta_gp_cross.unwrap(), 0.81 * lam * lam, epsilon = 1e-14);
        assert_abs_diff_eq!(ms.beta_gp_cross.unwrap(), ms.beta(2).unwrap(), epsilon = 1e-14);
        let lf = lf_moments(0.9, lam, 2).unwrap();
        assert_abs_diff_eq!(ms.beta_gp_both.unwrap(), lf.beta_gp_same, epsilon = 1e-14);
    }

    #[test]
    fn direct_am_ordering() {
        let ms = direct_am_moments(0.8, 0.5, 0.9).unwrap();
        let (cross, same, both) = (ms.beta_gp_cross.unwrap(), ms.beta_gp_same, ms.beta_gp_both.unwrap());
        assert!(cross > same && same > both, "{cross} {same} {both}");
        assert_abs_diff_eq!(ms.lambda_eff, 0.6, epsilon = 1e-15);
        assert_eq!(ms.spousal_corr_e, Some(0.5));
    }

    #[test]
    fn family_am_examples() {
        let ms = family_am_moments(0.8, 0.0, 0.9).unwrap();
        assert_abs_diff_eq!(ms.lambda_eff, 0.4, epsilon = 1e-15);
        assert_eq!(ms.spousal_corr_e, Some(0.0));

        let fam = family_am_moments(0.8, 0.5, 0.9).unwrap();
        assert_abs_diff_eq!(fam.lambda_eff, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(fam.spousal_corr_e.unwrap(), 0.25, epsilon = 1e-15);
        let ratio_f = fam.beta(2).unwrap() / fam.beta(1).unwrap();
        assert_abs_diff_eq!(ratio_f, 0.8, epsilon = 1e-14);
        assert_abs_diff_eq!(family_am_ratio(0.8, 0.5), 0.8, epsilon = 1e-15);
        let dir = direct_am_moments(0.8, 0.5, 0.9).unwrap();
        let ratio_d = dir.beta(2).unwrap() / dir.beta(1).unwrap();
        assert_abs_diff_eq!(ratio_d, 0.6, epsilon = 1e-14);
        assert!(fam.spousal_corr_e.unwrap() < dir.spousal_corr_e.unwrap());

        let k = family_am_moments(1.0, 1.0, 0.9).unwrap();
        assert_abs_diff_eq!(k.lambda_eff, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(family_am_ratio(1.0, 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(family_am_ratio(1.0, 1.0), direct_am_ratio(1.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn family_same_lineage_slope_equals_duality() {
        for (lt, m, r) in [(0.8, 0.5, 0.9), (0.3, 0.9, 0.6), (1.0, 0.2, 0.84)] {
            let ms = family_am_moments(lt, m, r).unwrap();
            let via = duality_gp(ms.beta(1).unwrap(), ms.beta(2).unwrap()).unwrap();
            assert_abs_diff_eq!(ms.beta_gp_same, via, epsilon = 1e-13);
        }
    }

    #[test]
    fn dispatch_matches_direct_calls() {
        let p = ModelParams::latent_factor(0.66, 0.84).unwrap();
        assert_eq!(model_moments(&p, 3).unwrap(), lf_moments(0.84, 0.66, 3).unwrap());
        let p = ModelParams::family_am(0.8, 0.5, 0.9).unwrap();
        assert_eq!(model_moments(&p, 3).unwrap(), family_am_moments(0.8, 0.5, 0.9).unwrap());
        let p = ModelParams::original_bt_normalized(0.33, 0.33, 0.84).unwrap();
        let ms = model_moments(&p, 5).unwrap();
        assert_abs_diff_eq!(ms.var_y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ms.beta_gp_same, bt_gp_normalized(0.33, 0.33, 0.84).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn f32_evaluation_tracks_f64() {
        let a = lf_moments(0.84f32, 0.66, 2).unwrap().beta_gp_same as f64;
        let b = lf_moments(0.84f64, 0.66, 2).unwrap().beta_gp_same;
        assert!((a - b).abs() < 1e-6);
    }
}
