//! Structural parameters of the transmission models and their steady-state
//! variance algebra.
//!
//! Endowments are normalized to unit steady-state variance throughout. The
//! one-parent processes are
//!
//! ```text
//! e_t = λ e_{t-1} + v_t,            Var(v) = 1 - λ²
//! y_t = γ y_{t-1} + ρ e_t + u_t,    Var(u) = σ²
//! ```
//!
//! with `γ = 0` for the latent-factor family and `σ² = 0` for the simplified
//! Becker–Tomes process. The two-parent assortative-mating variants replace
//! `λ` by the average-parent transferability `λ̃` and add a matching strength
//! `m`; their moments live in [`crate::moments`] and [`crate::pedigree`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which structural equations generate the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    SimplifiedBt,
    OriginalBt,
    LatentFactor,
    LatentFactorDirectAm,
    LatentFactorFamilyAm,
}

impl Variant {
    pub fn is_assortative(self) -> bool {
        matches!(self, Variant::LatentFactorDirectAm | Variant::LatentFactorFamilyAm)
    }

    /// Variants with a single-parent chain structure.
    pub fn is_one_parent(self) -> bool {
        !self.is_assortative()
    }

    pub fn has_direct_effect(self) -> bool {
        matches!(self, Variant::SimplifiedBt | Variant::OriginalBt)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::SimplifiedBt => "simplified_bt",
            Variant::OriginalBt => "original_bt",
            Variant::LatentFactor => "latent_factor",
            Variant::LatentFactorDirectAm => "latent_factor_direct_am",
            Variant::LatentFactorFamilyAm => "latent_factor_family_am",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "simplified_bt" => Variant::SimplifiedBt,
            "original_bt" => Variant::OriginalBt,
            "latent_factor" => Variant::LatentFactor,
            "latent_factor_direct_am" => Variant::LatentFactorDirectAm,
            "latent_factor_family_am" => Variant::LatentFactorFamilyAm,
            other => return Err(Error::InvalidParams(format!("unknown variant '{other}'"))),
        })
    }
}

/// Flat key-value form of [`ModelParams`], as it appears in config files and
/// JSON sidecars. Keys: `variant, gamma, lambda, rho, m, sigma2_u, normalize_y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamConfig<T> {
    pub variant: Variant,
    #[serde(default)]
    pub gamma: T,
    pub lambda: T,
    pub rho: T,
    #[serde(default)]
    pub m: T,
    #[serde(default)]
    pub sigma2_u: T,
    #[serde(default)]
    pub normalize_y: bool,
}

/// A validated parameter bundle for one transmission process.
///
/// `lambda` is the one-parent transferability λ for one-parent variants and
/// the average-parent transferability λ̃ for the assortative variants.
/// `sigma2_u` always holds the effective outcome-noise variance; when
/// `normalize_y` is set it is the value solved for unit outcome variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamConfig<T>", into = "ParamConfig<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ModelParams<T: Scalar> {
    variant: Variant,
    gamma: T,
    lambda: T,
    rho: T,
    m: T,
    sigma2_u: T,
    normalize_y: bool,
}

impl<T: Scalar> ModelParams<T> {
    /// Validates a raw configuration.
    pub fn new(cfg: ParamConfig<T>) -> Result<Self> {
        let ParamConfig { variant, gamma, lambda, rho, m, sigma2_u, normalize_y } = cfg;
        let zero = T::zero();
        let one = T::one();
        let bad = |msg: String| Err(Error::InvalidParams(msg));

        for (name, v) in [("gamma", gamma), ("lambda", lambda), ("rho", rho), ("m", m), ("sigma2_u", sigma2_u)] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        if !(gamma >= zero && gamma < one) {
            return bad(format!("gamma must lie in [0, 1), got {gamma}"));
        }
        if !(lambda > zero && lambda <= one) {
            return bad(format!("lambda must lie in (0, 1], got {lambda}"));
        }
        if !(rho > zero && rho <= one) {
            return bad(format!("rho must lie in (0, 1], got {rho}"));
        }
        if !(m >= zero && m <= one) {
            return bad(format!("m must lie in [0, 1], got {m}"));
        }
        if sigma2_u < zero {
            return bad(format!("sigma2_u must be >= 0, got {sigma2_u}"));
        }
        if gamma * lambda >= one {
            return Err(Error::NonStationary { gamma: gamma.as_f64(), gamma_lambda: (gamma * lambda).as_f64() });
        }
        if !variant.is_assortative() && m != zero {
            return bad(format!("m is only defined for assortative variants; {variant} got m={m}"));
        }
        if !variant.has_direct_effect() && gamma != zero {
            return bad(format!("{variant} has no direct parental effect; got gamma={gamma}"));
        }

        let effective_sigma2 = match variant {
            Variant::SimplifiedBt => {
                if sigma2_u != zero {
                    return bad(format!("simplified_bt has no outcome noise; got sigma2_u={sigma2_u}"));
                }
                zero
            }
            _ if normalize_y => {
                let solved = match variant {
                    Variant::OriginalBt => solve_sigma2_for_unit_var(gamma, lambda, rho)?,
                    // γ = 0: Var(y) = ρ² + σ².
                    _ => one - rho * rho,
                };
                if sigma2_u != zero && (sigma2_u - solved).abs() > T::lit(1e-9) {
                    return bad(format!(
                        "normalize_y solves sigma2_u={solved}, conflicting with the supplied {sigma2_u}"
                    ));
                }
                solved
            }
            _ => sigma2_u,
        };

        Ok(Self { variant, gamma, lambda, rho, m, sigma2_u: effective_sigma2, normalize_y })
    }

    pub fn simplified_bt(gamma: T, lambda: T, rho: T) -> Result<Self> {
        Self::new(ParamConfig {
            variant: Variant::SimplifiedBt,
            gamma,
            lambda,
            rho,
            m: T::zero(),
            sigma2_u: T::zero(),
            normalize_y: false,
        })
    }

    pub fn original_bt(gamma: T, lambda: T, rho: T, sigma2_u: T) -> Result<Self> {
        Self::new(ParamConfig {
            variant: Variant::OriginalBt,
            gamma,
            lambda,
            rho,
            m: T::zero(),
            sigma2_u,
            normalize_y: false,
        })
    }

    /// Original Becker–Tomes with σ² solved so that Var(y) = 1.
    pub fn original_bt_normalized(gamma: T, lambda: T, rho: T) -> Result<Self> {
        Self::new(ParamConfig {
            variant: Variant::OriginalBt,
            gamma,
            lambda,
            rho,
            m: T::zero(),
            sigma2_u: T::zero(),
            normalize_y: true,
        })
    }

    /// Latent-factor model with Var(y) = 1.
    pub fn latent_factor(lambda: T, rho: T) -> Result<Self> {
        Self::normalized_lf(Variant::LatentFactor, lambda, rho, T::zero())
    }

    pub fn direct_am(lambda_tilde: T, m: T, rho: T) -> Result<Self> {
        Self::normalized_lf(Variant::LatentFactorDirectAm, lambda_tilde, rho, m)
    }

    pub fn family_am(lambda_tilde: T, m: T, rho: T) -> Result<Self> {
        Self::normalized_lf(Variant::LatentFactorFamilyAm, lambda_tilde, rho, m)
    }

    fn normalized_lf(variant: Variant, lambda: T, rho: T, m: T) -> Result<Self> {
        Self::new(ParamConfig { variant, gamma: T::zero(), lambda, rho, m, sigma2_u: T::zero(), normalize_y: true })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }
    pub fn gamma(&self) -> T {
        self.gamma
    }
    /// λ for one-parent variants, λ̃ for the assortative variants.
    pub fn lambda(&self) -> T {
        self.lambda
    }
    pub fn rho(&self) -> T {
        self.rho
    }
    pub fn m(&self) -> T {
        self.m
    }
    /// Effective Var(u).
    pub fn sigma2_u(&self) -> T {
        self.sigma2_u
    }
    pub fn normalize_y(&self) -> bool {
        self.normalize_y
    }

    pub fn to_config(&self) -> ParamConfig<T> {
        ParamConfig {
            variant: self.variant,
            gamma: self.gamma,
            lambda: self.lambda,
            rho: self.rho,
            m: self.m,
            sigma2_u: self.sigma2_u,
            normalize_y: self.normalize_y,
        }
    }

    /// Same parameters with a different direct effect (used for grid sweeps).
    pub fn with_gamma(&self, gamma: T) -> Result<Self> {
        Self::new(ParamConfig { gamma, ..self.to_config() })
    }
}

impl<T: Scalar> TryFrom<ParamConfig<T>> for ModelParams<T> {
    type Error = Error;

    fn try_from(cfg: ParamConfig<T>) -> Result<Self> {
        Self::new(cfg)
    }
}

impl<T: Scalar> From<ModelParams<T>> for ParamConfig<T> {
    fn from(p: ModelParams<T>) -> Self {
        p.to_config()
    }
}

impl<T: Scalar> fmt::Display for ModelParams<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}(gamma={}, lambda={}, rho={}, m={}, sigma2_u={})",
            self.variant, self.gamma, self.lambda, self.rho, self.m, self.sigma2_u
        )
    }
}

/// Stationary second moments of a one-parent chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState<T> {
    pub var_y: T,
    /// Always one: endowments are normalized.
    pub var_e: T,
    /// Cov(e_t, y_t) = ρ / (1 − γλ).
    pub cov_ey: T,
}

fn check_stationary<T: Scalar>(gamma: T, lambda: T) -> Result<()> {
    if gamma >= T::one() || gamma * lambda >= T::one() {
        return Err(Error::NonStationary { gamma: gamma.as_f64(), gamma_lambda: (gamma * lambda).as_f64() });
    }
    Ok(())
}

/// Var(y) = (ρ² + σ² + 2γρ²λ/(1−γλ)) / (1−γ²).
pub fn bt_var_y<T: Scalar>(gamma: T, lambda: T, rho: T, sigma2: T) -> Result<T> {
    check_stationary(gamma, lambda)?;
    let one = T::one();
    let two = T::lit(2.0);
    let rho2 = rho * rho;
    Ok((rho2 + sigma2 + two * gamma * rho2 * lambda / (one - gamma * lambda)) / (one - gamma * gamma))
}

/// Stationary outcome variance of a one-parent process.
///
/// The assortative variants have no single-chain variance and are rejected;
/// query [`crate::pedigree::build_pedigree_covariance`] instead.
pub fn steady_state_var_y<T: Scalar>(p: &ModelParams<T>) -> Result<T> {
    if p.variant().is_assortative() {
        return Err(Error::InvalidParams(format!(
            "{} has no single-chain outcome variance; use the pedigree covariance",
            p.variant()
        )));
    }
    bt_var_y(p.gamma(), p.lambda(), p.rho(), p.sigma2_u())
}

pub fn steady_state<T: Scalar>(p: &ModelParams<T>) -> Result<SteadyState<T>> {
    let var_y = steady_state_var_y(p)?;
    Ok(SteadyState { var_y, var_e: T::one(), cov_ey: p.rho() / (T::one() - p.gamma() * p.lambda()) })
}

/// The σ² that makes the stationary Var(y) exactly one.
///
/// Fails with [`Error::Infeasible`] when the noise-free variance already
/// exceeds one; the error carries the excess.
pub fn solve_sigma2_for_unit_var<T: Scalar>(gamma: T, lambda: T, rho: T) -> Result<T> {
    check_stationary(gamma, lambda)?;
    let noise_free = bt_var_y(gamma, lambda, rho, T::zero())?;
    // Var(y) is affine in σ² with slope 1/(1−γ²).
    let sigma2 = (T::one() - noise_free) * (T::one() - gamma * gamma);
    if sigma2 < T::zero() {
        return Err(Error::Infeasible { deficit: (noise_free - T::one()).as_f64() });
    }
    Ok(sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn latent_factor_variance_collapses_cross_term() {
        let v = bt_var_y(0.0, 0.66, 0.84, 0.2944).unwrap();
        assert_abs_diff_eq!(v, 0.84 * 0.84 + 0.2944, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn simplified_bt_variance_reduces() {
        let (g, l, r): (f64, f64, f64) = (0.5, 0.9, 1.0);
        let v = bt_var_y(g, l, r, 0.0).unwrap();
        let expected = r * r * (1.0 + 2.0 * g * l / (1.0 - g * l)) / (1.0 - g * g);
        assert_abs_diff_eq!(v, expected, epsilon = 1e-14);
    }

    #[test]
    fn solve_sigma2_examples() {
        assert_abs_diff_eq!(solve_sigma2_for_unit_var(0.0, 0.66, 0.84).unwrap(), 1.0 - 0.7056, epsilon = 1e-15);
        let s: f64 = solve_sigma2_for_unit_var(0.33, 0.33, 0.84).unwrap();
        assert!((s - 0.0131).abs() < 1e-4, "{s}");
        assert_abs_diff_eq!(bt_var_y(0.33, 0.33, 0.84, s).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(bt_var_y(0.33, 0.33, 0.84, 0.01307).unwrap(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn infeasible_normalization_reports_deficit() {
        match solve_sigma2_for_unit_var(0.5, 0.5, 1.0) {
            Err(Error::Infeasible { deficit }) => {
                // ρ²(1 + 2γλ/(1−γλ))/(1−γ²) − 1 = (5/3)/(3/4) − 1 = 11/9
                assert_abs_diff_eq!(deficit, 11.0 / 9.0, epsilon = 1e-12);
            }
            other => panic!("expected Infeasible, got {other:?}"),
        }
        assert!(matches!(ModelParams::original_bt_normalized(0.5, 0.5, 1.0), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn nonstationary_rejected() {
        assert!(matches!(bt_var_y(1.0, 0.5, 1.0, 0.0), Err(Error::NonStationary { .. })));
        assert!(matches!(solve_sigma2_for_unit_var(0.99, 1.0 / 0.99, 1.0), Err(Error::NonStationary { .. })));
    }

    #[test]
    fn construction_rules() {
        // m on a one-parent variant fails loudly
        let cfg = ParamConfig { m: 0.3, ..ModelParams::latent_factor(0.5, 0.8).unwrap().to_config() };
        assert!(ModelParams::new(cfg).is_err());
        // σ² on the simplified model
        let cfg = ParamConfig { sigma2_u: 0.1, ..ModelParams::simplified_bt(0.2, 0.5, 1.0).unwrap().to_config() };
        assert!(ModelParams::new(cfg).is_err());
        // γ on a latent-factor model
        let cfg = ParamConfig { gamma: 0.1, ..ModelParams::latent_factor(0.5, 0.8).unwrap().to_config() };
        assert!(ModelParams::new(cfg).is_err());
        // closed upper bounds are allowed
        assert!(ModelParams::direct_am(1.0, 1.0, 1.0).is_ok());
        assert!(ModelParams::latent_factor(0.0, 0.5).is_err());
        assert!(ModelParams::simplified_bt(1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn normalize_resolves_noise() {
        let p = ModelParams::latent_factor(0.66, 0.84).unwrap();
        assert_abs_diff_eq!(p.sigma2_u(), 0.2944, epsilon = 1e-15);
        let p = ModelParams::original_bt_normalized(0.33, 0.33, 0.84).unwrap();
        assert_abs_diff_eq!(steady_state_var_y(&p).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn am_variants_reject_single_chain_variance() {
        let p = ModelParams::direct_am(0.8, 0.5, 0.9).unwrap();
        assert!(steady_state_var_y(&p).is_err());
    }

    #[test]
    fn steady_state_cov_ey() {
        let p = ModelParams::original_bt(0.3, 0.6, 0.7, 0.4).unwrap();
        let ss = steady_state(&p).unwrap();
        assert_abs_diff_eq!(ss.cov_ey * (1.0 - 0.3 * 0.6), 0.7, epsilon = 1e-12);
        assert_eq!(ss.var_e, 1.0);
    }

    #[test]
    fn model_nesting() {
        let bt = ModelParams::original_bt(0.0, 0.6, 0.7, 0.3).unwrap();
        let lf = ModelParams::new(ParamConfig {
            variant: Variant::LatentFactor,
            gamma: 0.0,
            lambda: 0.6,
            rho: 0.7,
            m: 0.0,
            sigma2_u: 0.3,
            normalize_y: false,
        })
        .unwrap();
        assert_eq!(steady_state(&bt).unwrap(), steady_state(&lf).unwrap());

        let bt0 = ModelParams::original_bt(0.4, 0.6, 0.7, 0.0).unwrap();
        let sbt = ModelParams::simplified_bt(0.4, 0.6, 0.7).unwrap();
        assert_eq!(steady_state(&bt0).unwrap(), steady_state(&sbt).unwrap());
    }

    #[test]
    fn round_trip_grid() {
        for gi in 0..10 {
            for li in 0..10 {
                for ri in 2..=10 {
                    let (g, l, r) = (gi as f64 / 10.0, li as f64 / 10.0, ri as f64 / 10.0);
                    if let Ok(s) = solve_sigma2_for_unit_var(g, l, r) {
                        assert_abs_diff_eq!(bt_var_y(g, l, r, s).unwrap(), 1.0, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn config_round_trip_json() {
        let p = ModelParams::original_bt_normalized(0.33, 0.33, 0.84).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: ModelParams<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
        let bad = r#"{"variant":"latent_factor","lambda":0.5,"rho":0.8,"m":0.2}"#;
        assert!(serde_json::from_str::<ModelParams<f64>>(bad).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let s = solve_sigma2_for_unit_var(0.33f32, 0.33, 0.84).unwrap();
        assert!((bt_var_y(0.33f32, 0.33, 0.84, s).unwrap() - 1.0).abs() < 1e-5);
    }
}
