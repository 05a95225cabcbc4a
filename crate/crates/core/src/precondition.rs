//! The normalized system `G = F'(x0)⁻¹F`, for which `G'(x0) = I`.
//!
//! `G` is never materialized as a new problem: `F'(x0)` is factorized once
//! and every evaluation of `G` or `G'` is a solve against that factorization.
//! Newton steps are unchanged by the normalization, while `b` and `L` become
//! the affine-covariant constants that enter the certificate.

use nalgebra::{Dyn, LU};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problem::{operator_norm, sample_in_ball, Matrix, NormKind, ProblemSpec, Vector};

/// Base-point condition numbers above this are treated as singular.
pub fn singularity_threshold() -> f64 {
    1.0 / (100.0 * f64::EPSILON)
}

/// 2-norm condition number `σ_max/σ_min`; infinite when singular.
pub(crate) fn condition_number(m: &Matrix) -> f64 {
    if m.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let (max, min) = (sv.max(), sv.min());
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub struct PreconditionedSystem {
    base: ProblemSpec,
    base_factorization: LU<f64, Dyn, Dyn>,
    cond_estimate: f64,
}

impl std::fmt::Debug for PreconditionedSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PreconditionedSystem")
            .field("base", &self.base)
            .field("cond_estimate", &self.cond_estimate)
            .finish()
    }
}

impl PreconditionedSystem {
    /// Factorize `F'(x0)` with partial pivoting.
    pub fn build(base: ProblemSpec) -> Result<Self> {
        if base.dim == 0 || base.x0.len() != base.dim {
            return Err(Error::InvalidInput(format!(
                "problem '{}' has inconsistent dimension",
                base.name
            )));
        }
        if !(base.radius.is_finite() && base.radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "domain radius must be positive, got {}",
                base.radius
            )));
        }
        let jac = base.jacobian(&base.x0)?;
        let cond_estimate = condition_number(&jac);
        if cond_estimate.is_nan() || cond_estimate > singularity_threshold() {
            return Err(Error::SingularBasePoint { cond: cond_estimate });
        }
        Ok(PreconditionedSystem {
            base_factorization: jac.lu(),
            base,
            cond_estimate,
        })
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.base
    }

    pub fn x0(&self) -> &Vector {
        &self.base.x0
    }

    pub fn norm(&self) -> NormKind {
        self.base.norm
    }

    pub fn radius(&self) -> f64 {
        self.base.radius
    }

    pub fn cond_estimate(&self) -> f64 {
        self.cond_estimate
    }

    fn solve_base(&self, rhs: &Vector) -> Vector {
        // nonsingularity was established in build()
        self.base_factorization
            .solve(rhs)
            .expect("base factorization is nonsingular")
    }

    /// `G(x) = F'(x0)⁻¹F(x)`.
    pub fn g_residual(&self, x: &Vector) -> Vector {
        self.solve_base(&self.base.residual(x))
    }

    /// `G'(x) = F'(x0)⁻¹F'(x)`.
    pub fn g_jacobian(&self, x: &Vector) -> Result<Matrix> {
        let jac = self.base.jacobian(x)?;
        Ok(self
            .base_factorization
            .solve(&jac)
            .expect("base factorization is nonsingular"))
    }

    /// `b = ‖F'(x0)⁻¹F(x0)‖`, the tight value.
    pub fn compute_b(&self) -> f64 {
        self.norm().vector(&self.g_residual(self.x0()))
    }

    /// Sampled lower bound on the Lipschitz constant of `G'` over
    /// `B[x0, radius]`: the largest `‖G'(y) − G'(x)‖ / ‖y − x‖` over all pairs
    /// of `n_samples` seeded points. A valid `L` can never be smaller.
    pub fn estimate_lipschitz(&self, radius: f64, n_samples: usize, seed: u64) -> Result<f64> {
        if radius > self.radius() {
            return Err(Error::DomainViolation {
                distance: radius,
                radius: self.radius(),
            });
        }
        if n_samples < 2 {
            return Err(Error::InvalidInput(
                "estimate_lipschitz needs at least 2 samples".into(),
            ));
        }
        let norm = self.norm();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let x = sample_in_ball(&mut rng, self.x0(), radius, norm);
            let jac = self.g_jacobian(&x)?;
            points.push((x, jac));
        }
        let mut best = 0.0f64;
        for (i, (x, jx)) in points.iter().enumerate() {
            for (y, jy) in &points[i + 1..] {
                let dist = norm.vector(&(y - x));
                if dist > 0.0 {
                    best = best.max(operator_norm(&(jy - jx), norm) / dist);
                }
            }
        }
        Ok(best)
    }
}
