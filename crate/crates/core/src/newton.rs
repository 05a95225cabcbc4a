//! Pure Newton iteration on the preconditioned system, with stopping driven
//! by the majorant gap.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::certify::Certificate;
use crate::error::{Error, Result};
use crate::precondition::PreconditionedSystem;
use crate::problem::{smallest_singular_value, Matrix, Vector};

/// Slack used for floating-point comparisons against radii and `f(t)`.
pub(crate) fn roundoff_slack(scale: f64) -> f64 {
    64.0 * f64::EPSILON * scale.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    MajorantGapTol,
    StepTol,
    KmaxReached,
    SingularJacobian,
    /// An iterate reached distance `t*` from `x0`. Impossible under valid
    /// hypotheses, so it indicts the inputs (`L`, `R`, or the evaluators).
    LeftCertifiedBall,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria {
    /// Stop once the a priori bound `t* − t_k` is at most this.
    pub majorant_tol: f64,
    pub step_tol: f64,
    pub k_max: usize,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria {
            majorant_tol: 1e-12,
            step_tol: 1e-14,
            k_max: 100,
        }
    }
}

impl StopCriteria {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.majorant_tol) || !ok(self.step_tol) || self.k_max < 1 {
            return Err(Error::InvalidInput(format!("invalid stop criteria {self:?}")));
        }
        Ok(())
    }
}

/// Iterates and per-iterate diagnostics of one Newton run.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonTrace {
    pub iterates: Vec<Vector>,
    /// `‖x_{k+1} − x_k‖`, one fewer entry than `iterates`.
    pub step_norms: Vec<f64>,
    /// `‖G(x_k)‖`.
    pub residual_norms: Vec<f64>,
    /// `σ_min(G'(x_k))`; NaN where `G'` could not be evaluated.
    pub sigma_mins: Vec<f64>,
    pub distances_from_x0: Vec<f64>,
    pub stop_reason: StopReason,
}

impl NewtonTrace {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn last(&self) -> &Vector {
        self.iterates.last().expect("trace holds at least x0")
    }
}

impl Serialize for NewtonTrace {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let iterates: Vec<&[f64]> = self.iterates.iter().map(|x| x.as_slice()).collect();
        let mut s = serializer.serialize_struct("NewtonTrace", 6)?;
        s.serialize_field("iterates", &iterates)?;
        s.serialize_field("step_norms", &self.step_norms)?;
        s.serialize_field("residual_norms", &self.residual_norms)?;
        s.serialize_field("sigma_mins", &self.sigma_mins)?;
        s.serialize_field("distances_from_x0", &self.distances_from_x0)?;
        s.serialize_field("stop_reason", &self.stop_reason)?;
        s.end()
    }
}

fn singular_threshold(jac: &Matrix) -> f64 {
    100.0 * f64::EPSILON * crate::problem::operator_norm(jac, crate::problem::NormKind::Euclidean)
}

fn step_with(jac: &Matrix, residual: &Vector) -> Result<Vector> {
    let sigma_min = smallest_singular_value(jac);
    let threshold = singular_threshold(jac);
    if sigma_min.is_nan() || sigma_min < threshold || sigma_min == 0.0 {
        return Err(Error::SingularJacobian { sigma_min, threshold });
    }
    jac.clone()
        .lu()
        .solve(residual)
        .ok_or(Error::SingularJacobian { sigma_min, threshold })
}

/// `N(x) = x − G'(x)⁻¹G(x)`, through a fresh factorization of `G'(x)`.
pub fn newton_step(pcs: &PreconditionedSystem, x: &Vector) -> Result<Vector> {
    pcs.problem().check_in_domain(x)?;
    let jac = pcs.g_jacobian(x)?;
    Ok(x - step_with(&jac, &pcs.g_residual(x))?)
}

struct Recorder<'a> {
    pcs: &'a PreconditionedSystem,
    trace: NewtonTrace,
}

impl Recorder<'_> {
    /// Append `x` with its diagnostics and return `G'(x)` if it evaluates.
    fn push(&mut self, x: Vector) -> Option<Matrix> {
        let pcs = self.pcs;
        let norm = pcs.norm();
        let jac = pcs.g_jacobian(&x).ok();
        self.trace.residual_norms.push(norm.vector(&pcs.g_residual(&x)));
        self.trace
            .sigma_mins
            .push(jac.as_ref().map_or(f64::NAN, smallest_singular_value));
        self.trace.distances_from_x0.push(pcs.problem().distance_from_x0(&x));
        if let Some(prev) = self.trace.iterates.last() {
            self.trace.step_norms.push(norm.vector(&(&x - prev)));
        }
        self.trace.iterates.push(x);
        jac
    }
}

/// Run Newton's method from `x0` under a certified certificate.
pub fn solve(pcs: &PreconditionedSystem, cert: &Certificate, stop: &StopCriteria) -> Result<NewtonTrace> {
    stop.validate()?;
    let majorant = cert.certified_majorant()?;
    let t_star = majorant.analyze().t_star;
    let ball_limit = t_star + roundoff_slack(t_star);

    let mut rec = Recorder {
        pcs,
        trace: NewtonTrace {
            iterates: Vec::new(),
            step_norms: Vec::new(),
            residual_norms: Vec::new(),
            sigma_mins: Vec::new(),
            distances_from_x0: Vec::new(),
            stop_reason: StopReason::KmaxReached,
        },
    };
    let mut jac = rec.push(pcs.x0().clone());

    let mut k: usize = 0;
    let reason = loop {
        if majorant.closed_form_gap(u32::try_from(k).unwrap_or(u32::MAX)) <= stop.majorant_tol {
            break StopReason::MajorantGapTol;
        }
        if k >= stop.k_max {
            break StopReason::KmaxReached;
        }
        let Some(j) = jac.as_ref() else {
            break StopReason::SingularJacobian;
        };
        let x = rec.trace.last().clone();
        let step = match step_with(j, &pcs.g_residual(&x)) {
            Ok(step) => step,
            Err(_) => break StopReason::SingularJacobian,
        };
        jac = rec.push(x - step);
        k += 1;
        if rec.trace.distances_from_x0[k] >= ball_limit {
            break StopReason::LeftCertifiedBall;
        }
        if rec.trace.step_norms[k - 1] <= stop.step_tol {
            break StopReason::StepTol;
        }
    };
    rec.trace.stop_reason = reason;
    Ok(rec.trace)
}

/// Membership of `x` in `K(t) = {x ∈ B[x0, t] : ‖G(x)‖ ≤ f(t)}`.
pub fn k_membership(pcs: &PreconditionedSystem, cert: &Certificate, x: &Vector, t: f64) -> Result<bool> {
    let majorant = cert.certified_majorant()?;
    let t_star = majorant.analyze().t_star;
    if !(t >= 0.0 && t < t_star) {
        return Err(Error::DomainError(format!(
            "t = {t} outside [0, t*) with t* = {t_star}"
        )));
    }
    let in_ball = pcs.problem().distance_from_x0(x) <= t + roundoff_slack(t);
    let residual = pcs.norm().vector(&pcs.g_residual(x));
    Ok(in_ball && residual <= majorant.eval(t) + roundoff_slack(majorant.b()))
}
