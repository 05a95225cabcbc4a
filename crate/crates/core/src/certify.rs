//! Semi-local convergence certificates.
//!
//! Given `b ≥ ‖F'(x0)⁻¹F(x0)‖`, a Lipschitz constant `L` for `F'(x0)⁻¹F'` on
//! the domain ball `B[x0, R]`, and `2bL ≤ 1`, Newton's method from `x0` stays
//! in `B(x0, t*)`, converges to the unique zero in `B[x0, t*]`, and obeys the
//! a priori bounds `‖x* − x_k‖ ≤ t* − t_k`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::majorant::{MajorantAnalysis, MajorantParams};
use crate::precondition::PreconditionedSystem;
use crate::problem::{NormKind, ProblemSpec};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_GUARD_SAMPLES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CertificateStatus {
    CertifiedStrict,
    CertifiedBoundary,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RejectionReason {
    #[serde(rename = "HYPOTHESIS_2BL")]
    Hypothesis2bL,
    #[serde(rename = "BALL_OUTSIDE_DOMAIN")]
    BallOutsideDomain,
    #[serde(rename = "SINGULAR_BASE_POINT")]
    SingularBasePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RateKind {
    /// Error halves every step.
    QLinear,
    /// Error bounded by `L/(2 sqrt(1 − 2bL))` times the previous error squared.
    QQuadratic,
}

/// Verdict of the hypothesis check plus every guaranteed radius and rate.
///
/// Fields that only exist for a certified verdict are `None` on rejection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub status: CertificateStatus,
    pub reason: Option<RejectionReason>,
    /// Infinite when the base-point Jacobian could not be inverted.
    pub b: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub t_star: Option<f64>,
    pub t_star2: Option<f64>,
    pub theta: Option<f64>,
    pub existence_radius: Option<f64>,
    /// Supremum radius of the uniqueness region; see `uniqueness_open`.
    pub uniqueness_radius: Option<f64>,
    /// The uniqueness region excludes its bounding sphere.
    pub uniqueness_open: bool,
    pub rate: Option<RateKind>,
    pub quadratic_coefficient: Option<f64>,
    pub predicted_gaps: Vec<f64>,
    pub norm: NormKind,
    pub warnings: Vec<String>,
    #[serde(skip)]
    majorant: Option<MajorantParams>,
}

impl Certificate {
    fn rejected(b: f64, lipschitz: f64, radius: f64, norm: NormKind, reason: RejectionReason) -> Self {
        Certificate {
            status: CertificateStatus::Rejected,
            reason: Some(reason),
            b,
            lipschitz,
            radius,
            t_star: None,
            t_star2: None,
            theta: None,
            existence_radius: None,
            uniqueness_radius: None,
            uniqueness_open: false,
            rate: None,
            quadratic_coefficient: None,
            predicted_gaps: Vec::new(),
            norm,
            warnings: Vec::new(),
            majorant: None,
        }
    }

    /// Rejection for a problem whose `F'(x0)` is (numerically) singular.
    pub fn singular_base_point(lipschitz: f64, radius: f64, norm: NormKind, cond: f64) -> Self {
        let mut cert = Self::rejected(
            f64::INFINITY,
            lipschitz,
            radius,
            norm,
            RejectionReason::SingularBasePoint,
        );
        cert.warnings
            .push(format!("F'(x0) is singular (condition estimate {cond:e})"));
        cert
    }

    pub fn is_certified(&self) -> bool {
        self.status != CertificateStatus::Rejected
    }

    pub fn is_strict(&self) -> bool {
        self.status == CertificateStatus::CertifiedStrict
    }

    /// Majorant parameters; present whenever `2bL ≤ 1`.
    pub fn majorant(&self) -> Option<&MajorantParams> {
        self.majorant.as_ref()
    }

    pub fn analysis(&self) -> Option<MajorantAnalysis> {
        self.majorant.map(|m| m.analyze())
    }

    pub(crate) fn certified_majorant(&self) -> Result<MajorantParams> {
        match (self.is_certified(), self.majorant) {
            (true, Some(m)) => Ok(m),
            _ => Err(Error::InvalidInput("operation requires a certified certificate".into())),
        }
    }
}

/// Check the hypotheses against `(b, L, R)` and build the certificate with
/// predicted gaps `t* − t_k` for `k ≤ k_max`.
pub fn certify(b: f64, lipschitz: f64, radius: f64, norm: NormKind, k_max: usize) -> Result<Certificate> {
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::InvalidInput(format!(
            "L must be finite and positive, got {lipschitz}"
        )));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidInput(format!(
            "R must be finite and positive, got {radius}"
        )));
    }
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "b must be finite and nonnegative, got {b}"
        )));
    }

    let majorant = match MajorantParams::new(b, lipschitz) {
        Ok(m) => m,
        Err(Error::HypothesisViolated { .. }) => {
            return Ok(Certificate::rejected(
                b,
                lipschitz,
                radius,
                norm,
                RejectionReason::Hypothesis2bL,
            ));
        }
        Err(e) => return Err(e),
    };
    let a = majorant.analyze();

    let mut warnings = Vec::new();
    if a.fragile {
        warnings.push(format!(
            "2bL = {} is within {:e} of 1; strict/boundary classification is numerically fragile",
            majorant.product(),
            crate::majorant::FRAGILE_BAND
        ));
    }

    if a.t_star > radius {
        let mut cert = Certificate::rejected(b, lipschitz, radius, norm, RejectionReason::BallOutsideDomain);
        cert.t_star = Some(a.t_star);
        cert.t_star2 = Some(a.t_star2);
        cert.theta = Some(a.theta);
        cert.warnings = warnings;
        cert.majorant = Some(majorant);
        return Ok(cert);
    }

    if b == 0.0 {
        warnings.push("b = 0: x0 is already a root".to_string());
    }

    let (status, uniqueness_radius, uniqueness_open, rate) = if a.strict {
        (
            CertificateStatus::CertifiedStrict,
            radius.min(a.t_star2),
            true,
            RateKind::QQuadratic,
        )
    } else {
        (CertificateStatus::CertifiedBoundary, a.t_star, false, RateKind::QLinear)
    };
    let k_cap = u32::try_from(k_max).unwrap_or(u32::MAX);
    let predicted_gaps = (0..=k_cap).map(|k| majorant.closed_form_gap(k)).collect();

    Ok(Certificate {
        status,
        reason: None,
        b,
        lipschitz,
        radius,
        t_star: Some(a.t_star),
        t_star2: Some(a.t_star2),
        theta: Some(a.theta),
        existence_radius: Some(a.t_star),
        uniqueness_radius: Some(uniqueness_radius),
        uniqueness_open,
        rate: Some(rate),
        quadratic_coefficient: majorant.uniform_quadratic_coefficient(),
        predicted_gaps,
        norm,
        warnings,
        majorant: Some(majorant),
    })
}

/// Where the Lipschitz constant of a problem comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LipschitzSource {
    /// Taken as given.
    Supplied(f64),
    /// The problem's analytic constant, or its structural upper bound.
    Known,
    /// Taken as given, after checking it against a sampled lower bound.
    EstimateGuarded(f64),
}

/// Build the preconditioner, compute `b`, resolve `L`, and certify.
pub fn certify_problem(
    ps: ProblemSpec,
    source: LipschitzSource,
    k_max: usize,
) -> Result<(PreconditionedSystem, Certificate)> {
    let pcs = PreconditionedSystem::build(ps)?;
    let b = pcs.compute_b();
    let mut warnings = Vec::new();
    let lipschitz = match source {
        LipschitzSource::Supplied(l) => l,
        LipschitzSource::Known => match (pcs.problem().known_lipschitz, pcs.problem().lipschitz_bound) {
            (Some(l), _) => l,
            (None, Some(bound)) => {
                warnings.push(format!(
                    "L = {bound} is a structural upper bound, not the exact constant"
                ));
                bound
            }
            (None, None) => {
                return Err(Error::InvalidInput(format!(
                    "problem '{}' declares no Lipschitz constant; supply L",
                    pcs.problem().name
                )))
            }
        },
        LipschitzSource::EstimateGuarded(l) => {
            let estimate = pcs.estimate_lipschitz(pcs.radius(), DEFAULT_GUARD_SAMPLES, DEFAULT_SEED)?;
            if estimate > l * (1.0 + 1e-9) {
                warnings.push(format!(
                    "supplied L = {l} is below the sampled lower bound {estimate}; certificate is unsound"
                ));
            }
            l
        }
    };
    let mut cert = certify(b, lipschitz, pcs.radius(), pcs.norm(), k_max)?;
    cert.warnings.extend(warnings);
    Ok((pcs, cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{builtin, BuiltinParams};
    use approx::assert_relative_eq;

    #[test]
    fn strict_example() {
        let cert = certify(0.25, 1.0, 1.0, NormKind::Euclidean, 5).unwrap();
        assert_eq!(cert.status, CertificateStatus::CertifiedStrict);
        assert_relative_eq!(cert.t_star.unwrap(), 0.292_893_218_813_452_5, max_relative = 1e-14);
        assert_eq!(cert.uniqueness_radius, Some(1.0));
        assert!(cert.uniqueness_open);
        assert_eq!(cert.rate, Some(RateKind::QQuadratic));
        assert_relative_eq!(cert.quadratic_coefficient.unwrap(), 0.5f64.sqrt(), max_relative = 1e-14);
        assert_eq!(cert.predicted_gaps.len(), 6);
    }

    #[test]
    fn boundary_example() {
        let cert = certify(0.5, 1.0, 1.0, NormKind::Euclidean, 4).unwrap();
        assert_eq!(cert.status, CertificateStatus::CertifiedBoundary);
        assert_eq!(cert.t_star, Some(1.0));
        assert_eq!(cert.rate, Some(RateKind::QLinear));
        assert_eq!(cert.quadratic_coefficient, None);
        assert_eq!(cert.uniqueness_radius, Some(1.0));
        assert!(!cert.uniqueness_open);
        assert_eq!(cert.predicted_gaps, vec![1.0, 0.5, 0.25, 0.125, 0.0625]);
        assert!(!cert.warnings.is_empty());
    }

    #[test]
    fn rejections() {
        let cert = certify(0.6, 1.0, 2.0, NormKind::Euclidean, 5).unwrap();
        assert_eq!(cert.status, CertificateStatus::Rejected);
        assert_eq!(cert.reason, Some(RejectionReason::Hypothesis2bL));
        assert!(cert.predicted_gaps.is_empty());

        let cert = certify(0.25, 1.0, 0.2, NormKind::Euclidean, 5).unwrap();
        assert_eq!(cert.reason, Some(RejectionReason::BallOutsideDomain));

        assert!(matches!(
            certify(0.1, 0.0, 1.0, NormKind::Euclidean, 5),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            certify(0.1, 1.0, -1.0, NormKind::Euclidean, 5),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn zero_residual_is_trivially_certified() {
        let cert = certify(0.0, 3.0, 1.0, NormKind::Max, 3).unwrap();
        assert_eq!(cert.status, CertificateStatus::CertifiedStrict);
        assert_eq!(cert.existence_radius, Some(0.0));
        assert_eq!(cert.predicted_gaps, vec![0.0; 4]);
    }

    #[test]
    fn predicted_gaps_match_closed_form() {
        let cert = certify(0.3, 1.4, 5.0, NormKind::Euclidean, 12).unwrap();
        let m = cert.majorant().unwrap();
        let t_star = cert.t_star.unwrap();
        for (k, gap) in cert.predicted_gaps.iter().enumerate() {
            assert_relative_eq!(
                *gap,
                t_star - m.closed_form_t(k as u32),
                max_relative = 1e-10,
                epsilon = 1e-15
            );
        }
        for w in cert.predicted_gaps.windows(2) {
            assert!(w[1] <= w[0] / 2.0);
        }
    }

    #[test]
    fn uniqueness_region_strictly_contains_existence_ball() {
        let cert = certify(0.1, 2.0, 10.0, NormKind::Euclidean, 3).unwrap();
        assert!(cert.uniqueness_radius.unwrap() > cert.existence_radius.unwrap());
        assert_eq!(cert.uniqueness_radius, cert.t_star2);
    }

    #[test]
    fn problem_examples() {
        let ps = builtin(
            "scalar-sqrt",
            &BuiltinParams::new().set("c", 2.0).x0(vec![1.5]).radius(1.0),
        )
        .unwrap();
        let (_, cert) = certify_problem(ps, LipschitzSource::Known, 10).unwrap();
        assert_eq!(cert.status, CertificateStatus::CertifiedStrict);
        assert_relative_eq!(cert.t_star.unwrap(), 1.5 - 2f64.sqrt(), max_relative = 1e-12);

        let ps = builtin(
            "scalar-sqrt",
            &BuiltinParams::new().set("c", 2.0).x0(vec![1.0]).radius(1.5),
        )
        .unwrap();
        let (_, cert) = certify_problem(ps, LipschitzSource::Known, 10).unwrap();
        assert_eq!(cert.status, CertificateStatus::CertifiedBoundary);
        assert_eq!(cert.t_star, Some(1.0));

        let ps = builtin("scalar-majorant", &BuiltinParams::new().radius(0.2)).unwrap();
        let (_, cert) = certify_problem(ps, LipschitzSource::Known, 10).unwrap();
        assert_eq!(cert.reason, Some(RejectionReason::BallOutsideDomain));
    }

    #[test]
    fn guarded_source_warns_on_small_l() {
        let ps = builtin("scalar-sqrt", &BuiltinParams::new().x0(vec![1.5])).unwrap();
        let (_, cert) = certify_problem(ps.clone(), LipschitzSource::EstimateGuarded(1.0 / 3.0), 5).unwrap();
        assert!(cert.warnings.iter().any(|w| w.contains("unsound")));
        let (_, cert) = certify_problem(ps, LipschitzSource::EstimateGuarded(2.0 / 3.0), 5).unwrap();
        assert!(cert.warnings.is_empty());
    }

    #[test]
    fn missing_lipschitz_is_an_input_error() {
        use crate::problem::{ProblemSpec, ResidualFn, Vector};
        use std::sync::Arc;
        let residual: ResidualFn = Arc::new(|x: &Vector| x.map(|v| v * v - 2.0));
        let ps = ProblemSpec::new("custom", Vector::from_element(1, 1.5), 1.0, residual);
        assert!(matches!(
            certify_problem(ps, LipschitzSource::Known, 5),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn json_field_names() {
        let cert = certify(0.25, 1.0, 1.0, NormKind::Euclidean, 2).unwrap();
        let v = serde_json::to_value(&cert).unwrap();
        for key in [
            "status",
            "b",
            "L",
            "R",
            "t_star",
            "t_star2",
            "theta",
            "existence_radius",
            "uniqueness_radius",
            "uniqueness_open",
            "rate",
            "quadratic_coefficient",
            "predicted_gaps",
            "norm",
            "warnings",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["status"], "CERTIFIED_STRICT");
        assert_eq!(v["rate"], "Q_QUADRATIC");
        assert_eq!(v["norm"], "euclidean");
        let v = serde_json::to_value(certify(0.6, 1.0, 1.0, NormKind::Euclidean, 2).unwrap()).unwrap();
        assert_eq!(v["reason"], "HYPOTHESIS_2BL");
    }
}
