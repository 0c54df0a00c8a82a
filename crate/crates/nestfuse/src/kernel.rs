//! Bivariate fusion kernels and the per-document relevance estimate.
//!
//! Four kernels over score pairs `(u, v)` in the open unit square:
//!
//! * Clayton copula: `(u^-t + v^-t - 1)^(-1/t)`, `t > 0`
//! * Gumbel copula: `exp(-[(-ln u)^t + (-ln v)^t]^(1/t))`, `t >= 1`
//! * Power-function composition: `(u^-tp + v^-tp - 1)^(-1/tg)`
//! * Exponential-logarithmic composition:
//!   `exp(-[(-ln u)^tp + (-ln v)^tp]^(1/tg))`
//!
//! The compositions generalize the copulas by decoupling the inner parameter
//! `theta_p` from the outer `theta_g`; they coincide with the corresponding
//! copula when `theta_p == theta_g`. All four are symmetric and strictly
//! increasing in each argument for fixed parameters, and map into `(0, 1]`.
//!
//! Negative powers are evaluated as `exp(-theta * ln u)` so every kernel goes
//! through the same guarded log path; scores produced by the rank transform
//! are at least `1/(m+1)`, which bounds `-ln u`.

use thiserror::Error;

use crate::concordance::KernelFamily;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("score {value} outside the open interval (0, 1)")]
    ScoreOutOfRange { value: f64 },
    #[error("theta {value} outside the {family} domain")]
    ThetaOutOfDomain { value: f64, family: &'static str },
    #[error("match count {match_count} exceeds query length {query_length}")]
    MatchExceedsQueryLength { match_count: u32, query_length: u32 },
    #[error("query length must be at least 1")]
    EmptyQuery,
}

#[inline]
fn check_unit(u: f64) -> Result<(), KernelError> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(KernelError::ScoreOutOfRange { value: u })
    }
}

#[inline]
fn check_theta_positive(theta: f64, family: &'static str) -> Result<(), KernelError> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(KernelError::ThetaOutOfDomain {
            value: theta,
            family,
        })
    }
}

#[inline]
fn check_theta_ge_one(theta: f64, family: &'static str) -> Result<(), KernelError> {
    if theta >= 1.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(KernelError::ThetaOutOfDomain {
            value: theta,
            family,
        })
    }
}

/// `u^(-theta)` through the shared log path.
#[inline]
fn neg_pow(u: f64, theta: f64) -> f64 {
    (-theta * u.ln()).exp()
}

/// Clayton copula.
pub fn clayton(u: f64, v: f64, theta: f64) -> Result<f64, KernelError> {
    check_unit(u)?;
    check_unit(v)?;
    check_theta_positive(theta, "clayton")?;
    let s = neg_pow(u, theta) + neg_pow(v, theta) - 1.0;
    Ok((-s.ln() / theta).exp())
}

/// Gumbel copula.
pub fn gumbel(u: f64, v: f64, theta: f64) -> Result<f64, KernelError> {
    check_unit(u)?;
    check_unit(v)?;
    check_theta_ge_one(theta, "gumbel")?;
    let t = (-u.ln()).powf(theta) + (-v.ln()).powf(theta);
    Ok((-t.powf(1.0 / theta)).exp())
}

/// Power-function composition; reduces to [`clayton`] when
/// `theta_p == theta_g`.
pub fn f_pf(u: f64, v: f64, params: KernelParams) -> Result<f64, KernelError> {
    check_unit(u)?;
    check_unit(v)?;
    check_theta_positive(params.theta_g, "power-function theta_g")?;
    check_theta_positive(params.theta_p, "power-function theta_p")?;
    let s = neg_pow(u, params.theta_p) + neg_pow(v, params.theta_p) - 1.0;
    Ok((-s.ln() / params.theta_g).exp())
}

/// Exponential-logarithmic composition; reduces to [`gumbel`] when
/// `theta_p == theta_g`.
pub fn f_el(u: f64, v: f64, params: KernelParams) -> Result<f64, KernelError> {
    check_unit(u)?;
    check_unit(v)?;
    check_theta_ge_one(params.theta_g, "exp-log theta_g")?;
    check_theta_positive(params.theta_p, "exp-log theta_p")?;
    let t = (-u.ln()).powf(params.theta_p) + (-v.ln()).powf(params.theta_p);
    Ok((-t.powf(1.0 / params.theta_g)).exp())
}

/// Parameter pair of one kernel evaluation.
///
/// Invariant kept by the constructors: `theta_p <= theta_g`, with
/// `theta_p == theta_g` exactly for copula kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub theta_g: f64,
    pub theta_p: f64,
}

impl KernelParams {
    /// Copula parameters: a single theta on both levels.
    pub fn copula(theta: f64) -> Self {
        Self {
            theta_g: theta,
            theta_p: theta,
        }
    }
}

/// Scale `theta_g` by the document relevance into `theta_p`.
///
/// `theta_p = min(theta_g, theta_g * rel_d)`, floored at `epsilon_p`: a zero
/// `theta_p` would collapse the composition kernels to a constant. When
/// `theta_g` itself sits below `epsilon_p`, the cap wins and
/// `theta_p = theta_g`.
pub fn modulate_theta(theta_g: f64, rel_d: f64, epsilon_p: f64) -> KernelParams {
    let theta_p = theta_g.min((theta_g * rel_d).max(epsilon_p));
    KernelParams { theta_g, theta_p }
}

/// Unsupervised relevance estimate for one document under one list pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelevanceEstimate {
    /// Fraction of query tokens matched by the document, in `[0, 1]`.
    pub query_cov: f64,
    /// Rank-consistency coefficient `u*v / (u + v)`, in `(0, 0.5)` for
    /// scores inside the unit interval.
    pub cons_irs: f64,
    /// `query_cov + cons_irs`.
    pub rel_d: f64,
}

/// Estimate a document's relevance from query coverage and the consistency
/// of its scores in the two lists being fused.
///
/// Coverage rewards documents matching many query tokens independently of
/// any retrieval system; consistency is small when the document sits deep in
/// either list or when the two lists disagree about it.
pub fn estimate_relevance(
    u: f64,
    v: f64,
    match_count: u32,
    query_length: u32,
) -> Result<RelevanceEstimate, KernelError> {
    check_unit(u)?;
    check_unit(v)?;
    if query_length == 0 {
        return Err(KernelError::EmptyQuery);
    }
    if match_count > query_length {
        return Err(KernelError::MatchExceedsQueryLength {
            match_count,
            query_length,
        });
    }
    let query_cov = f64::from(match_count) / f64::from(query_length);
    let cons_irs = u * v / (u + v);
    Ok(RelevanceEstimate {
        query_cov,
        cons_irs,
        rel_d: query_cov + cons_irs,
    })
}

/// The four bivariate fusion kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FusionKernel {
    Clayton,
    Gumbel,
    /// Power-function composition with relevance-modulated `theta_p`.
    PowerFunction,
    /// Exponential-logarithmic composition with relevance-modulated
    /// `theta_p`.
    ExpLog,
}

impl FusionKernel {
    /// Family that drives the tau-to-theta mapping and the theta domain.
    pub fn family(self) -> KernelFamily {
        match self {
            Self::Clayton | Self::PowerFunction => KernelFamily::Clayton,
            Self::Gumbel | Self::ExpLog => KernelFamily::Gumbel,
        }
    }

    /// Copula kernels tie `theta_p` to `theta_g`; composition kernels
    /// modulate it per document.
    pub fn is_copula(self) -> bool {
        matches!(self, Self::Clayton | Self::Gumbel)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Clayton => "clayton",
            Self::Gumbel => "gumbel",
            Self::PowerFunction => "pf",
            Self::ExpLog => "el",
        }
    }

    pub fn evaluate(self, u: f64, v: f64, params: KernelParams) -> Result<f64, KernelError> {
        match self {
            Self::Clayton => clayton(u, v, params.theta_g),
            Self::Gumbel => gumbel(u, v, params.theta_g),
            Self::PowerFunction => f_pf(u, v, params),
            Self::ExpLog => f_el(u, v, params),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clayton_values() {
        // (0.5^-2 + 0.5^-2 - 1)^(-1/2) = 7^(-1/2)
        let c = clayton(0.5, 0.5, 2.0).unwrap();
        assert!((c - 7f64.powf(-0.5)).abs() < 1e-12);
        // boundary: C(u, 1) = u
        let c = clayton(0.4, 1.0 - 1e-12, 2.0).unwrap();
        assert!((c - 0.4).abs() < 1e-9);
        // theta -> 0 limit is the product copula
        let c = clayton(0.5, 0.5, 1e-4).unwrap();
        assert!((c - 0.25).abs() < 1e-3);
    }

    #[test]
    fn gumbel_values() {
        // theta = 1 is independence
        let g = gumbel(0.3, 0.7, 1.0).unwrap();
        assert!((g - 0.21).abs() < 1e-12);
        // exp(-sqrt(2) * ln 2) = 2^(-sqrt(2))
        let g = gumbel(0.5, 0.5, 2.0).unwrap();
        assert!((g - 2f64.powf(-2f64.sqrt())).abs() < 1e-12);
        let g = gumbel(0.4, 1.0 - 1e-12, 3.0).unwrap();
        assert!((g - 0.4).abs() < 1e-9);
    }

    #[test]
    fn power_function_values() {
        // (0.5^-1 + 0.5^-1 - 1)^(-1/2) = 3^(-1/2)
        let f = f_pf(
            0.5,
            0.5,
            KernelParams {
                theta_g: 2.0,
                theta_p: 1.0,
            },
        )
        .unwrap();
        assert!((f - 3f64.powf(-0.5)).abs() < 1e-12);
        // theta_p near zero flattens the score toward 1
        let f = f_pf(
            0.5,
            0.5,
            KernelParams {
                theta_g: 2.0,
                theta_p: 1e-3,
            },
        )
        .unwrap();
        assert!(f > 0.999);
    }

    #[test]
    fn exp_log_values() {
        // exp(-(2 ln 2)^(1/2))
        let f = f_el(
            0.5,
            0.5,
            KernelParams {
                theta_g: 2.0,
                theta_p: 1.0,
            },
        )
        .unwrap();
        assert!((f - (-(2.0 * 2f64.ln()).sqrt()).exp()).abs() < 1e-12);
        // exp(-2) at u = v = exp(-1), both thetas 1
        let e_inv = (-1f64).exp();
        let f = f_el(e_inv, e_inv, KernelParams::copula(1.0)).unwrap();
        assert!((f - (-2f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn reductions_are_exact() {
        let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
        for &u in &grid {
            for &v in &grid {
                for &theta in &[0.5, 1.0, 2.0, 5.0] {
                    assert_eq!(
                        f_pf(u, v, KernelParams::copula(theta)).unwrap(),
                        clayton(u, v, theta).unwrap(),
                    );
                    if theta >= 1.0 {
                        assert_eq!(
                            f_el(u, v, KernelParams::copula(theta)).unwrap(),
                            gumbel(u, v, theta).unwrap(),
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn domain_contracts() {
        assert!(matches!(
            clayton(0.0, 0.5, 1.0).unwrap_err(),
            KernelError::ScoreOutOfRange { .. }
        ));
        assert!(matches!(
            clayton(0.5, 1.0, 1.0).unwrap_err(),
            KernelError::ScoreOutOfRange { .. }
        ));
        assert!(matches!(
            clayton(0.5, 0.5, 0.0).unwrap_err(),
            KernelError::ThetaOutOfDomain { .. }
        ));
        assert!(matches!(
            gumbel(0.5, 0.5, 0.9).unwrap_err(),
            KernelError::ThetaOutOfDomain { .. }
        ));
        assert!(matches!(
            f_el(
                0.5,
                0.5,
                KernelParams {
                    theta_g: 0.5,
                    theta_p: 0.5
                }
            )
            .unwrap_err(),
            KernelError::ThetaOutOfDomain { .. }
        ));
    }

    #[test]
    fn relevance_estimate_examples() {
        let r = estimate_relevance(0.8, 0.8, 2, 3).unwrap();
        assert!((r.query_cov - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.cons_irs - 0.4).abs() < 1e-15);
        assert!((r.rel_d - (2.0 / 3.0 + 0.4)).abs() < 1e-15);

        // both components vanish with no matches and bottom scores
        let r = estimate_relevance(1e-9, 1e-9, 0, 3).unwrap();
        assert!(r.rel_d < 1e-8);

        // full coverage and top scores approach the 1.5 ceiling
        let r = estimate_relevance(1.0 - 1e-12, 1.0 - 1e-12, 3, 3).unwrap();
        assert!((r.rel_d - 1.5).abs() < 1e-9);
    }

    #[test]
    fn relevance_contracts() {
        assert!(matches!(
            estimate_relevance(0.5, 0.5, 4, 3).unwrap_err(),
            KernelError::MatchExceedsQueryLength { .. }
        ));
        assert!(matches!(
            estimate_relevance(0.5, 0.5, 0, 0).unwrap_err(),
            KernelError::EmptyQuery
        ));
        assert!(matches!(
            estimate_relevance(0.0, 0.5, 1, 2).unwrap_err(),
            KernelError::ScoreOutOfRange { .. }
        ));
    }

    #[test]
    fn theta_modulation() {
        let eps = 1e-3;
        // rel_d above 1 is capped at theta_g
        let p = modulate_theta(2.0, 2.0 / 3.0 + 0.4, eps);
        assert_eq!(p.theta_p, 2.0);
        // rel_d of zero hits the floor
        let p = modulate_theta(2.0, 0.0, eps);
        assert_eq!(p.theta_p, eps);
        // proportional in between
        let p = modulate_theta(2.0, 0.5, eps);
        assert_eq!(p.theta_p, 1.0);
        // a theta_g below the floor wins the cap
        let p = modulate_theta(1e-6, 0.5, eps);
        assert_eq!(p.theta_p, 1e-6);
    }

    #[test]
    fn kernels_symmetric_and_in_range() {
        let params = KernelParams {
            theta_g: 2.0,
            theta_p: 0.7,
        };
        for kernel in [
            FusionKernel::Clayton,
            FusionKernel::Gumbel,
            FusionKernel::PowerFunction,
            FusionKernel::ExpLog,
        ] {
            let p = if kernel.is_copula() {
                KernelParams::copula(2.0)
            } else {
                params
            };
            for &(u, v) in &[(0.2, 0.9), (0.5, 0.5), (0.01, 0.99)] {
                let a = kernel.evaluate(u, v, p).unwrap();
                let b = kernel.evaluate(v, u, p).unwrap();
                assert_eq!(a, b, "{kernel:?} not symmetric at ({u}, {v})");
                assert!(a > 0.0 && a <= 1.0, "{kernel:?} out of range: {a}");
            }
        }
    }
}
