//! Scalar analytics of the quadratic majorant
//!
//! ```text
//! f(t) = (L/2) t² − t + b
//! ```
//!
//! Newton's method on `f` from `t0 = 0` produces the sequence `t_k` that
//! dominates the vector iteration: `‖x_{k+1} − x_k‖ ≤ t_{k+1} − t_k` and
//! `‖x* − x_k‖ ≤ t* − t_k`. Everything else in the crate reads its radii,
//! gaps, and rate constants from here.
//!
//! Near the smaller root the textbook expressions lose all their digits to
//! cancellation (`1 − sqrt(1 − 2bL)` for small `bL`, `f(t)/f'(t)` near a
//! double root), so the implementation works in gap coordinates
//! `g = t* − t` using the identity `−f'(t) = sqrt(1 − 2bL) + L·g`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Width of the band around `2bL = 1` inside which the strict/boundary
/// classification is flagged as numerically fragile.
pub const FRAGILE_BAND: f64 = 1e-12;

/// The pair `(b, L)` defining the majorant. Only constructible when `2bL ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MajorantParams {
    b: f64,
    #[serde(rename = "L")]
    lipschitz: f64,
}

/// Roots, root ratio, and classification of a majorant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MajorantAnalysis {
    pub t_star: f64,
    pub t_star2: f64,
    pub theta: f64,
    pub strict: bool,
    /// `1 − 2bL`, never negative.
    pub disc: f64,
    /// `|1 − 2bL| ≤ FRAGILE_BAND`.
    pub fragile: bool,
}

/// The majorant sequence `t_0 = 0, t_{k+1} = n_f(t_k)` and its gaps `t* − t_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MajorantTrajectory {
    pub t: Vec<f64>,
    pub gaps: Vec<f64>,
    pub k_max: usize,
}

impl MajorantParams {
    pub fn new(b: f64, lipschitz: f64) -> Result<Self> {
        if !b.is_finite() || b < 0.0 {
            return Err(Error::InvalidInput(format!(
                "b must be finite and nonnegative, got {b}"
            )));
        }
        if !lipschitz.is_finite() || lipschitz <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "L must be finite and positive, got {lipschitz}"
            )));
        }
        let product = 2.0 * b * lipschitz;
        if product > 1.0 {
            return Err(Error::HypothesisViolated { product });
        }
        Ok(MajorantParams { b, lipschitz })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `2bL`.
    pub fn product(&self) -> f64 {
        2.0 * self.b * self.lipschitz
    }

    /// `f(t) = (L/2)t² − t + b`.
    pub fn eval(&self, t: f64) -> f64 {
        0.5 * self.lipschitz * t * t - t + self.b
    }

    /// `f'(t) = Lt − 1`.
    pub fn derivative(&self, t: f64) -> f64 {
        self.lipschitz * t - 1.0
    }

    fn sqrt_disc(&self) -> f64 {
        (1.0 - self.product()).max(0.0).sqrt()
    }

    /// Roots `t* ≤ t**` and the ratio `θ = t*/t**`.
    pub fn analyze(&self) -> MajorantAnalysis {
        let disc = (1.0 - self.product()).max(0.0);
        let sd = disc.sqrt();
        let t_star = 2.0 * self.b / (1.0 + sd);
        let t_star2 = (1.0 + sd) / self.lipschitz;
        let theta = if self.b == 0.0 {
            0.0
        } else if disc == 0.0 {
            1.0
        } else {
            t_star / t_star2
        };
        MajorantAnalysis {
            t_star,
            t_star2,
            theta,
            strict: disc > 0.0,
            disc,
            fragile: (1.0 - self.product()).abs() <= FRAGILE_BAND,
        }
    }

    fn check_domain(&self, t: f64) -> Result<f64> {
        let t_star = self.analyze().t_star;
        let guard = t_star - 4.0 * f64::EPSILON * t_star.max(1.0);
        if !t.is_finite() || t < 0.0 || t >= guard {
            return Err(Error::DomainError(format!(
                "t = {t} outside [0, t*) with t* = {t_star}"
            )));
        }
        Ok(t_star)
    }

    /// One scalar Newton step `n_f(t) = t − f(t)/f'(t)` for `t ∈ [0, t*)`.
    pub fn newton_map(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(t - self.eval(t) / self.derivative(t))
    }

    /// Exact quadratic coefficient `L/(−2f'(t_k))` linking consecutive gaps.
    pub fn rate_factor(&self, t_k: f64) -> Result<f64> {
        self.check_domain(t_k)?;
        Ok(self.lipschitz / (-2.0 * self.derivative(t_k)))
    }

    /// Same coefficient as [`rate_factor`](Self::rate_factor), parametrized by
    /// the gap `g = t* − t`. Stable all the way down to `g = 0`.
    pub fn gap_rate_factor(&self, gap: f64) -> f64 {
        self.lipschitz / (2.0 * (self.sqrt_disc() + self.lipschitz * gap))
    }

    /// `f(t)` at `t = t* − gap`, as `gap·(sqrt(1 − 2bL) + L·gap/2)`.
    pub fn eval_at_gap(&self, gap: f64) -> f64 {
        gap * (self.sqrt_disc() + 0.5 * self.lipschitz * gap)
    }

    /// `t_0 .. t_{k_max}` by iterating the scalar Newton map.
    pub fn sequence(&self, k_max: usize) -> MajorantTrajectory {
        let t_star = self.analyze().t_star;
        let sd = self.sqrt_disc();
        let l = self.lipschitz;
        let mut gaps = Vec::with_capacity(k_max + 1);
        let mut gap = t_star;
        gaps.push(gap);
        for _ in 0..k_max {
            // t* − n_f(t) = L (t* − t)² / (−2 f'(t)), with −f'(t) = sd + L·gap
            gap = if gap == 0.0 {
                0.0
            } else {
                l * gap * gap / (2.0 * (sd + l * gap))
            };
            gaps.push(gap);
        }
        let t = gaps.iter().map(|g| t_star - g).collect();
        MajorantTrajectory { t, gaps, k_max }
    }

    /// `θ^{2^k}` together with `∏_{j<k} (1 + θ^{2^j})`.
    fn theta_powers(theta: f64, k: u32) -> (f64, f64) {
        let mut q = theta;
        let mut prod = 1.0;
        for _ in 0..k {
            if q == 0.0 {
                break;
            }
            prod *= 1.0 + q;
            q *= q;
        }
        (q, prod)
    }

    /// Closed-form gap `t* − t_k`.
    ///
    /// With `1 − θ^{2^k} = (1 − θ) ∏_{j<k}(1 + θ^{2^j})` the textbook
    /// expression reduces to `t** θ^{2^k} / ∏_{j<k}(1 + θ^{2^j})`, which has
    /// no subtraction. At `2bL = 1` it is the limit `t*·2^{−k}`.
    pub fn closed_form_gap(&self, k: u32) -> f64 {
        let a = self.analyze();
        if a.t_star == 0.0 {
            return 0.0;
        }
        if !a.strict {
            return a.t_star * 0.5f64.powi(k.min(i32::MAX as u32) as i32);
        }
        let (q, prod) = Self::theta_powers(a.theta, k);
        a.t_star2 * q / prod
    }

    /// Closed-form `t_k`.
    pub fn closed_form_t(&self, k: u32) -> f64 {
        (self.analyze().t_star - self.closed_form_gap(k)).max(0.0)
    }

    /// The k-dependent Q-quadratic coefficient
    /// `((1 − θ^{2^k})/(1 + θ^{2^k})) · L / (2 sqrt(1 − 2bL))`.
    ///
    /// Only meaningful when `2bL < 1`; returns `None` on the boundary.
    pub fn quadratic_coefficient(&self, k: u32) -> Option<f64> {
        let a = self.analyze();
        if !a.strict {
            return None;
        }
        let sd = a.disc.sqrt();
        let (q, prod) = Self::theta_powers(a.theta, k);
        let one_minus_theta = 2.0 * sd / (1.0 + sd);
        let ratio = one_minus_theta * prod / (1.0 + q);
        Some(ratio * self.lipschitz / (2.0 * sd))
    }

    /// The uniform bound `L / (2 sqrt(1 − 2bL))`, `None` on the boundary.
    pub fn uniform_quadratic_coefficient(&self) -> Option<f64> {
        let a = self.analyze();
        a.strict.then(|| self.lipschitz / (2.0 * a.disc.sqrt()))
    }
}
