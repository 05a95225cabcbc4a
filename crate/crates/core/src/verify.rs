//! Numerical audit of every inequality behind the convergence theorem.
//!
//! Each check is recorded as `lhs ≤ rhs` with `margin = rhs − lhs`, and
//! passes when `margin ≥ −slack`. The base slack is `64·eps·max(1, |lhs|,
//! |rhs|)`. Checks that involve the limit `x*` use the final iterate `x_K` in
//! its place; since `‖x* − x_K‖ ≤ e := t* − t_K`, their slack also carries the
//! largest change that substitution can cause in `rhs − lhs`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::certify::Certificate;
use crate::error::{Error, Result};
use crate::majorant::MajorantParams;
use crate::newton::{roundoff_slack, NewtonTrace};
use crate::precondition::PreconditionedSystem;
use crate::problem::{sample_in_ball, smallest_singular_value, NormKind, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckId {
    /// `‖x_{k+1} − x_k‖ ≤ t_{k+1} − t_k`
    StepVsGap,
    /// `‖x* − x_k‖ ≤ t* − t_k`
    TailEnvelope,
    /// `‖x* − x_{k+1}‖ ≤ ½‖x* − x_k‖`
    QLinear,
    /// `‖x* − x_{k+1}‖ ≤ ((1 − θ^{2^k})/(1 + θ^{2^k}))·L/(2 sqrt(1 − 2bL))·‖x* − x_k‖²`
    QQuadratic,
    /// `‖x* − x_{k+1}‖ ≤ (t* − t_{k+1})/(t* − t_k)²·‖x* − x_k‖²`
    RatioRate,
    /// `x_k ∈ K(t_k)`
    KMembership,
    /// `‖G'(x)⁻¹‖ ≤ 1/|f'(t)|` on `B(x0, t)`
    InvNorm,
    /// `‖G(y) − G(x) − G'(x)(y − x)‖ ≤ (L/2)‖y − x‖²`
    Linearization,
    /// Contraction toward, and envelope around, any root in `B[x0, t*]`
    UniquenessRate,
    /// Known roots agree with the limit or lie outside the uniqueness region
    UniquenessCross,
}

impl CheckId {
    pub const ALL: [CheckId; 10] = [
        CheckId::StepVsGap,
        CheckId::TailEnvelope,
        CheckId::QLinear,
        CheckId::QQuadratic,
        CheckId::RatioRate,
        CheckId::KMembership,
        CheckId::InvNorm,
        CheckId::Linearization,
        CheckId::UniquenessRate,
        CheckId::UniquenessCross,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub id: CheckId,
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub slack: f64,
    pub pass: bool,
    /// Which half of a compound condition, or which known root.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl BoundCheck {
    fn new(id: CheckId, k: usize, lhs: f64, rhs: f64) -> Self {
        Self::with_extra_slack(id, k, lhs, rhs, 0.0)
    }

    fn with_extra_slack(id: CheckId, k: usize, lhs: f64, rhs: f64, extra: f64) -> Self {
        let margin = rhs - lhs;
        let slack = 64.0 * f64::EPSILON * lhs.abs().max(rhs.abs()).max(1.0) + extra;
        BoundCheck {
            id,
            k,
            lhs,
            rhs,
            margin,
            slack,
            pass: margin >= -slack,
            detail: None,
        }
    }

    fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
    pub all_pass: bool,
    /// Checks that were skipped, and why.
    pub notices: Vec<String>,
    pub summary: ReportSummary,
}

impl BoundReport {
    pub fn new(mut checks: Vec<BoundCheck>, notices: Vec<String>) -> Self {
        // stable: ties keep generation order
        checks.sort_by_key(|c| (c.id, c.k));
        let passed = checks.iter().filter(|c| c.pass).count();
        let summary = ReportSummary {
            total: checks.len(),
            passed,
            failed: checks.len() - passed,
        };
        BoundReport {
            all_pass: summary.failed == 0,
            checks,
            notices,
            summary,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &BoundCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn count(&self, id: CheckId) -> usize {
        self.checks.iter().filter(|c| c.id == id).count()
    }
}

fn gap(m: &MajorantParams, k: usize) -> f64 {
    m.closed_form_gap(u32::try_from(k).unwrap_or(u32::MAX))
}

/// Slack for `‖x̂ − a‖ ≤ c·‖x̂ − b‖^p` when `x̂` stands in for `x*` with
/// `‖x* − x̂‖ ≤ e`: the left side moves by at most `e`, the right side by at
/// most `c((d + e)^p − d^p)`.
fn proxy_slack(e: f64, coefficient: f64, d: f64, power: i32) -> f64 {
    if e == 0.0 {
        return 0.0;
    }
    e + coefficient * ((d + e).powi(power) - d.powi(power))
}

/// Check the trajectory inequalities along a Newton trace.
pub fn verify_trace(pcs: &PreconditionedSystem, cert: &Certificate, trace: &NewtonTrace) -> Result<BoundReport> {
    if trace.len() < 2 {
        return Err(Error::InsufficientTrace(trace.len()));
    }
    let m = cert.certified_majorant()?;
    let t_star = m.analyze().t_star;
    let norm = pcs.norm();
    let last = trace.len() - 1;
    let proxy = trace.last();
    let proxy_err = gap(&m, last);
    let to_proxy: Vec<f64> = trace.iterates.iter().map(|x| norm.vector(&(proxy - x))).collect();

    let mut checks = Vec::new();
    for k in 0..=last {
        let g_k = gap(&m, k);
        checks.push(BoundCheck::with_extra_slack(
            CheckId::TailEnvelope,
            k,
            to_proxy[k],
            g_k,
            proxy_slack(proxy_err, 0.0, 0.0, 1),
        ));
        checks.push(BoundCheck::new(CheckId::KMembership, k, trace.distances_from_x0[k], t_star - g_k).detail("ball"));
        checks.push(
            BoundCheck::new(CheckId::KMembership, k, trace.residual_norms[k], m.eval_at_gap(g_k)).detail("residual"),
        );
        if k == last {
            break;
        }
        let g_next = gap(&m, k + 1);
        checks.push(BoundCheck::new(
            CheckId::StepVsGap,
            k,
            trace.step_norms[k],
            g_k - g_next,
        ));

        let (d_k, d_next) = (to_proxy[k], to_proxy[k + 1]);
        checks.push(BoundCheck::with_extra_slack(
            CheckId::QLinear,
            k,
            d_next,
            0.5 * d_k,
            proxy_slack(proxy_err, 0.5, d_k, 1),
        ));
        let ratio = m.gap_rate_factor(g_k);
        checks.push(BoundCheck::with_extra_slack(
            CheckId::RatioRate,
            k,
            d_next,
            ratio * d_k * d_k,
            proxy_slack(proxy_err, ratio, d_k, 2),
        ));
        if let Some(c) = m.quadratic_coefficient(u32::try_from(k).unwrap_or(u32::MAX)) {
            checks.push(BoundCheck::with_extra_slack(
                CheckId::QQuadratic,
                k,
                d_next,
                c * d_k * d_k,
                proxy_slack(proxy_err, c, d_k, 2),
            ));
        }
    }
    Ok(BoundReport::new(checks, Vec::new()))
}

fn check_t(m: &MajorantParams, t: f64) -> Result<()> {
    let t_star = m.analyze().t_star;
    if !(t >= 0.0 && t < t_star) {
        return Err(Error::DomainError(format!(
            "t = {t} outside [0, t*) with t* = {t_star}"
        )));
    }
    Ok(())
}

/// `σ_min(G'(x)) ≥ |f'(t)|` for points sampled in `B(x0, t)`. Euclidean norm
/// only; under the max norm the check is skipped and the notice returned.
pub fn check_inverse_bound(
    pcs: &PreconditionedSystem,
    cert: &Certificate,
    t: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<BoundCheck>, Option<String>)> {
    let m = cert.certified_majorant()?;
    check_t(&m, t)?;
    if pcs.norm() == NormKind::Max {
        return Ok((
            Vec::new(),
            Some("INV_NORM skipped: inverse norm bound is only checked in the Euclidean norm".into()),
        ));
    }
    let bound = m.derivative(t).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let x = sample_in_ball(&mut rng, pcs.x0(), t, NormKind::Euclidean);
        let sigma = smallest_singular_value(&pcs.g_jacobian(&x)?);
        checks.push(BoundCheck::new(CheckId::InvNorm, i, bound, sigma).detail(format!("t={t}")));
    }
    Ok((checks, None))
}

fn linearization_check(
    pcs: &PreconditionedSystem,
    lipschitz: f64,
    x: &Vector,
    y: &Vector,
    k: usize,
) -> Result<BoundCheck> {
    let norm = pcs.norm();
    let dx = y - x;
    let remainder = pcs.g_residual(y) - pcs.g_residual(x) - pcs.g_jacobian(x)? * &dx;
    let d = norm.vector(&dx);
    Ok(BoundCheck::new(
        CheckId::Linearization,
        k,
        norm.vector(&remainder),
        0.5 * lipschitz * d * d,
    ))
}

/// First-order remainder bound for `n_pairs` seeded pairs in the domain ball.
pub fn check_linearization(
    pcs: &PreconditionedSystem,
    lipschitz: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<BoundCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x0, radius, norm) = (pcs.x0(), pcs.radius(), pcs.norm());
    (0..n_pairs)
        .map(|i| {
            let x = sample_in_ball(&mut rng, x0, radius, norm);
            let y = sample_in_ball(&mut rng, x0, radius, norm);
            linearization_check(pcs, lipschitz, &x, &y, i)
        })
        .collect()
}

/// Cross-checks against the problem's known roots.
///
/// A root `y` inside `B[x0, t*]` must be the limit, must satisfy
/// `‖y − x_k‖ ≤ t* − t_k`, and must attract the iterates at the ratio rate.
/// Any other root must lie outside the certified uniqueness region.
pub fn uniqueness_checks(
    pcs: &PreconditionedSystem,
    cert: &Certificate,
    trace: &NewtonTrace,
) -> Result<(Vec<BoundCheck>, Option<String>)> {
    let m = cert.certified_majorant()?;
    let roots = &pcs.problem().known_roots;
    if roots.is_empty() {
        return Ok((
            Vec::new(),
            Some(format!(
                "uniqueness checks skipped: '{}' has no known roots",
                pcs.problem().name
            )),
        ));
    }
    if trace.is_empty() {
        return Err(Error::InsufficientTrace(0));
    }
    let t_star = m.analyze().t_star;
    let norm = pcs.norm();
    let last = trace.len() - 1;
    let proxy_err = gap(&m, last);
    let unique_radius = cert.uniqueness_radius.unwrap_or(t_star);

    let mut checks = Vec::new();
    for (r, y) in roots.iter().enumerate() {
        let from_x0 = pcs.problem().distance_from_x0(y);
        if from_x0 <= t_star + roundoff_slack(t_star) {
            let dist: Vec<f64> = trace.iterates.iter().map(|x| norm.vector(&(y - x))).collect();
            for k in 0..=last {
                let g_k = gap(&m, k);
                checks.push(
                    BoundCheck::new(CheckId::UniquenessRate, k, dist[k], g_k).detail(format!("root {r} envelope")),
                );
                if k < last {
                    let ratio = m.gap_rate_factor(g_k);
                    checks.push(
                        BoundCheck::new(CheckId::UniquenessRate, k, dist[k + 1], ratio * dist[k] * dist[k])
                            .detail(format!("root {r} contraction")),
                    );
                }
            }
            checks.push(
                BoundCheck::with_extra_slack(CheckId::UniquenessCross, last, dist[last], 0.0, proxy_err)
                    .detail(format!("root {r} is the limit")),
            );
        } else {
            let detail = if cert.uniqueness_open { "open" } else { "closed" };
            checks.push(
                BoundCheck::new(CheckId::UniquenessCross, 0, unique_radius, from_x0)
                    .detail(format!("root {r} outside {detail} uniqueness region")),
            );
        }
    }
    Ok((checks, None))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 32,
            seed: crate::certify::DEFAULT_SEED,
        }
    }
}

/// Fractions of `t*` at which the inverse-norm bound is sampled.
pub const INVERSE_BOUND_FRACTIONS: [f64; 3] = [0.0, 0.5, 0.9];

/// Trace inequalities, inverse and linearization bounds, and uniqueness
/// cross-checks, assembled into a single report.
pub fn full_verification(
    pcs: &PreconditionedSystem,
    cert: &Certificate,
    trace: &NewtonTrace,
    opts: &VerifyOptions,
) -> Result<BoundReport> {
    let m = cert.certified_majorant()?;
    let t_star = m.analyze().t_star;
    let (mut checks, mut notices) = if trace.len() < 2 {
        (
            Vec::new(),
            vec![format!(
                "trajectory checks skipped: trace has {} iterate(s)",
                trace.len()
            )],
        )
    } else {
        let base = verify_trace(pcs, cert, trace)?;
        (base.checks, base.notices)
    };

    if t_star > 0.0 {
        for (i, fraction) in INVERSE_BOUND_FRACTIONS.iter().enumerate() {
            let seed = opts.seed.wrapping_add(i as u64);
            let (c, notice) = check_inverse_bound(pcs, cert, fraction * t_star, opts.samples, seed)?;
            checks.extend(c);
            if let Some(n) = notice {
                notices.push(n);
                break;
            }
        }
    }
    checks.extend(check_linearization(pcs, cert.lipschitz, opts.samples, opts.seed)?);
    let (c, notice) = uniqueness_checks(pcs, cert, trace)?;
    checks.extend(c);
    notices.extend(notice);
    Ok(BoundReport::new(checks, notices))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{certify_problem, LipschitzSource};
    use crate::newton::{solve, StopCriteria};
    use crate::problem::{builtin, BuiltinParams, BUILTINS};
    use approx::assert_abs_diff_eq;

    fn run(
        name: &str,
        params: BuiltinParams,
        source: LipschitzSource,
    ) -> (PreconditionedSystem, Certificate, NewtonTrace) {
        let ps = builtin(name, &params).unwrap();
        let (pcs, cert) = certify_problem(ps, source, 100).unwrap();
        let trace = solve(&pcs, &cert, &StopCriteria::default()).unwrap();
        (pcs, cert, trace)
    }

    fn sqrt_params(x0: f64, radius: f64) -> BuiltinParams {
        BuiltinParams::new().set("c", 2.0).x0(vec![x0]).radius(radius)
    }

    #[test]
    fn boundary_tail_envelope_by_hand() {
        let (pcs, cert, trace) = run("scalar-sqrt", sqrt_params(1.0, 1.5), LipschitzSource::Known);
        let report = verify_trace(&pcs, &cert, &trace).unwrap();
        assert!(report.all_pass, "{:?}", report.failures().collect::<Vec<_>>());
        let tail: Vec<_> = report.checks.iter().filter(|c| c.id == CheckId::TailEnvelope).collect();
        let sqrt2 = 2f64.sqrt();
        for (k, expected_lhs) in [(0, sqrt2 - 1.0), (1, 1.5 - sqrt2), (2, 17.0 / 12.0 - sqrt2)] {
            assert_abs_diff_eq!(tail[k].lhs, expected_lhs, epsilon = 1e-15);
            assert_eq!(tail[k].rhs, 0.5f64.powi(k as i32));
        }
        assert_eq!(report.count(CheckId::QQuadratic), 0);
    }

    #[test]
    fn majorant_problem_is_tight() {
        for b in [0.1, 0.25, 0.4] {
            let (pcs, cert, trace) = run(
                "scalar-majorant",
                BuiltinParams::new().set("b", b),
                LipschitzSource::Known,
            );
            let report = verify_trace(&pcs, &cert, &trace).unwrap();
            assert!(report.all_pass);
            for c in &report.checks {
                if matches!(c.id, CheckId::StepVsGap | CheckId::TailEnvelope | CheckId::RatioRate) {
                    assert!(c.margin.abs() <= 1e-10, "{c:?}");
                }
            }
        }
    }

    #[test]
    fn short_trace_is_rejected() {
        let (pcs, cert, trace) = run(
            "scalar-majorant",
            BuiltinParams::new().set("b", 0.0),
            LipschitzSource::Known,
        );
        assert_eq!(trace.len(), 1);
        assert!(matches!(
            verify_trace(&pcs, &cert, &trace),
            Err(Error::InsufficientTrace(1))
        ));
    }

    #[test]
    fn inverse_bound_examples() {
        let (pcs, cert, _) = run("scalar-sqrt", sqrt_params(1.0, 1.5), LipschitzSource::Known);
        let (checks, notice) = check_inverse_bound(&pcs, &cert, 0.5, 16, 1).unwrap();
        assert!(notice.is_none());
        assert!(checks.iter().all(|c| c.pass && c.lhs == 0.5));

        let (checks, _) = check_inverse_bound(&pcs, &cert, 0.0, 3, 1).unwrap();
        assert!(checks
            .iter()
            .all(|c| c.pass && c.lhs == 1.0 && (c.rhs - 1.0).abs() < 1e-15));

        assert!(matches!(
            check_inverse_bound(&pcs, &cert, 1.0, 3, 1),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn inverse_bound_detects_halved_lipschitz() {
        // true L = 1 for x0 = 1; certify with L = 1/2 instead
        let (pcs, cert, _) = run("scalar-sqrt", sqrt_params(1.0, 1.5), LipschitzSource::Supplied(0.5));
        assert!(cert.is_certified());
        let (checks, _) = check_inverse_bound(&pcs, &cert, 0.5, 32, 4).unwrap();
        assert!(checks.iter().any(|c| !c.pass));
    }

    #[test]
    fn inverse_bound_skipped_under_max_norm() {
        let (pcs, cert, _) = run(
            "circle-line",
            BuiltinParams::new().norm(NormKind::Max),
            LipschitzSource::Known,
        );
        let (checks, notice) = check_inverse_bound(&pcs, &cert, 0.0, 3, 1).unwrap();
        assert!(checks.is_empty() && notice.is_some());
    }

    #[test]
    fn linearization_examples() {
        let (pcs, cert, _) = run("scalar-sqrt", sqrt_params(1.0, 1.5), LipschitzSource::Known);
        for c in check_linearization(&pcs, cert.lipschitz, 20, 2).unwrap() {
            assert!(c.pass);
            assert!(c.margin.abs() <= 1e-14 * c.rhs.max(1.0), "{c:?}");
        }
        let x = Vector::from_element(1, 1.2);
        let c = linearization_check(&pcs, 1.0, &x, &x, 0).unwrap();
        assert_eq!((c.lhs, c.rhs, c.pass), (0.0, 0.0, true));

        let (pcs, cert, _) = run("scalar-exp", BuiltinParams::new(), LipschitzSource::Known);
        for c in check_linearization(&pcs, cert.lipschitz, 20, 2).unwrap() {
            assert!(c.pass && c.margin > 0.0, "{c:?}");
        }
    }

    #[test]
    fn uniqueness_examples() {
        let (pcs, cert, trace) = run("scalar-sqrt", sqrt_params(1.5, 1.0), LipschitzSource::Known);
        let (checks, notice) = uniqueness_checks(&pcs, &cert, &trace).unwrap();
        assert!(notice.is_none());
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
        let outside: Vec<_> = checks
            .iter()
            .filter(|c| c.detail.as_deref().unwrap().contains("outside"))
            .collect();
        assert_eq!(outside.len(), 1);
        assert_abs_diff_eq!(outside[0].rhs, 1.5 + 2f64.sqrt(), epsilon = 1e-15);

        let (pcs, cert, trace) = run("circle-line", BuiltinParams::new(), LipschitzSource::Known);
        let (checks, _) = uniqueness_checks(&pcs, &cert, &trace).unwrap();
        assert!(checks.iter().all(|c| c.pass));
        assert!(checks.iter().any(|c| c.id == CheckId::UniquenessCross && c.k == 0));

        let (pcs, cert, trace) = run("discrete-bvp", BuiltinParams::new(), LipschitzSource::Known);
        let (checks, notice) = uniqueness_checks(&pcs, &cert, &trace).unwrap();
        assert!(checks.is_empty() && notice.is_some());
    }

    #[test]
    fn foreign_root_inside_uniqueness_region_fails() {
        // claim uniqueness out to R = 3 with an L so small that t** exceeds the distance to −√2
        let (pcs, cert, trace) = run("scalar-sqrt", sqrt_params(1.5, 3.0), LipschitzSource::Supplied(0.2));
        assert!(cert.uniqueness_radius.unwrap() > 1.5 + 2f64.sqrt());
        let (checks, _) = uniqueness_checks(&pcs, &cert, &trace).unwrap();
        assert!(checks.iter().any(|c| c.id == CheckId::UniquenessCross && !c.pass));
    }

    #[test]
    fn full_sweep_covers_every_check_on_builtins_with_roots() {
        for info in BUILTINS {
            let (pcs, cert, trace) = run(info.name, BuiltinParams::new(), LipschitzSource::Known);
            let report = full_verification(&pcs, &cert, &trace, &VerifyOptions::default()).unwrap();
            assert!(
                report.all_pass,
                "{}: {:?}",
                info.name,
                report.failures().collect::<Vec<_>>()
            );
            if !pcs.problem().known_roots.is_empty() {
                for id in CheckId::ALL {
                    assert!(report.count(id) > 0, "{} missing {id:?}", info.name);
                }
            }
        }
    }

    #[test]
    fn report_is_ordered_and_serializable() {
        let (pcs, cert, trace) = run("circle-line", BuiltinParams::new(), LipschitzSource::Known);
        let report = full_verification(&pcs, &cert, &trace, &VerifyOptions::default()).unwrap();
        for w in report.checks.windows(2) {
            assert!((w[0].id, w[0].k) <= (w[1].id, w[1].k));
        }
        let v = serde_json::to_value(&report).unwrap();
        let first = &v["checks"][0];
        for key in ["id", "k", "lhs", "rhs", "margin", "slack", "pass"] {
            assert!(first.get(key).is_some(), "{key}");
        }
        assert_eq!(first["id"], "STEP_VS_GAP");
        assert_eq!(v["summary"]["failed"], 0);
    }
}
