//! Nonlinear systems `F: R^n → R^n`, the builtin registry, and the norm
//! machinery shared by the rest of the crate.
//!
//! The domain `C` of the residual is always the closed ball `B[x0, R]`, so
//! containment conditions like `B[x0, t*] ⊂ C` reduce to `t* ≤ R`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub type ResidualFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// Vector norm used for every distance, radius, and residual size. Matrix
/// norms are the induced operator norms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[default]
    Euclidean,
    Max,
}

impl NormKind {
    pub fn vector(self, v: &Vector) -> f64 {
        match self {
            NormKind::Euclidean => v.norm(),
            NormKind::Max => v.amax(),
        }
    }

    pub fn operator(self, m: &Matrix) -> f64 {
        operator_norm(m, self)
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::Euclidean => "euclidean",
            NormKind::Max => "max",
        })
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" | "2" => Ok(NormKind::Euclidean),
            "max" | "inf" | "linf" => Ok(NormKind::Max),
            other => Err(Error::InvalidInput(format!("unknown norm '{other}'"))),
        }
    }
}

/// Induced operator norm: largest singular value (Euclidean) or maximum
/// absolute row sum (max norm).
pub fn operator_norm(m: &Matrix, norm: NormKind) -> f64 {
    match norm {
        NormKind::Euclidean => {
            if m.is_empty() {
                return 0.0;
            }
            m.clone().svd(false, false).singular_values.max()
        }
        NormKind::Max => m
            .row_iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
    }
}

/// `σ_min(m)`; zero signals singularity. `‖m⁻¹‖₂ = 1/σ_min`.
pub fn smallest_singular_value(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.min()
}

/// A nonlinear system together with its base point and domain ball.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub dim: usize,
    residual: ResidualFn,
    jacobian: Option<JacobianFn>,
    pub x0: Vector,
    /// Radius `R` of the domain ball `B[x0, R]`.
    pub radius: f64,
    /// Lipschitz constant of `F'(x0)⁻¹F'` on `B[x0, R]` in `norm`, when known
    /// analytically.
    pub known_lipschitz: Option<f64>,
    /// Rigorous but loose upper bound on the same constant, for problems
    /// whose exact constant is not available in closed form.
    pub lipschitz_bound: Option<f64>,
    pub known_roots: Vec<Vector>,
    pub params: BTreeMap<String, f64>,
    pub norm: NormKind,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("x0", &self.x0.as_slice())
            .field("radius", &self.radius)
            .field("known_lipschitz", &self.known_lipschitz)
            .field("lipschitz_bound", &self.lipschitz_bound)
            .field("known_roots", &self.known_roots.len())
            .field("params", &self.params)
            .field("norm", &self.norm)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(name: impl Into<String>, x0: Vector, radius: f64, residual: ResidualFn) -> Self {
        ProblemSpec {
            name: name.into(),
            dim: x0.len(),
            residual,
            jacobian: None,
            x0,
            radius,
            known_lipschitz: None,
            lipschitz_bound: None,
            known_roots: Vec::new(),
            params: BTreeMap::new(),
            norm: NormKind::Euclidean,
        }
    }

    pub fn with_jacobian(mut self, jacobian: JacobianFn) -> Self {
        self.jacobian = Some(jacobian);
        self
    }

    pub fn with_known_lipschitz(mut self, l: Option<f64>) -> Self {
        self.known_lipschitz = l;
        self
    }

    pub fn with_known_roots(mut self, roots: Vec<Vector>) -> Self {
        self.known_roots = roots;
        self
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    pub fn with_norm(mut self, norm: NormKind) -> Self {
        self.norm = norm;
        self
    }

    pub fn residual(&self, x: &Vector) -> Vector {
        (self.residual)(x)
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Analytic Jacobian when available, central differences otherwise.
    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        match &self.jacobian {
            Some(jac) => Ok(jac(x)),
            None => fd_jacobian(self, x),
        }
    }

    pub fn distance_from_x0(&self, x: &Vector) -> f64 {
        self.norm.vector(&(x - &self.x0))
    }

    pub(crate) fn check_in_domain(&self, x: &Vector) -> Result<()> {
        let distance = self.distance_from_x0(x);
        if distance.is_nan() || distance > self.radius * (1.0 + 4.0 * f64::EPSILON) {
            return Err(Error::DomainViolation {
                distance,
                radius: self.radius,
            });
        }
        Ok(())
    }
}

/// Central-difference Jacobian with steps `h_j = cbrt(eps)·max(1, |x_j|)`.
/// Every probe must stay inside `B[x0, R]`.
pub fn fd_jacobian(ps: &ProblemSpec, x: &Vector) -> Result<Matrix> {
    let n = x.len();
    let mut jac = Matrix::zeros(n, n);
    let base_step = f64::EPSILON.cbrt();
    for j in 0..n {
        let h = base_step * x[j].abs().max(1.0);
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[j] += h;
        minus[j] -= h;
        ps.check_in_domain(&plus)?;
        ps.check_in_domain(&minus)?;
        // actual spacing, after rounding of x ± h
        let width = plus[j] - minus[j];
        let column = (ps.residual(&plus) - ps.residual(&minus)) / width;
        jac.set_column(j, &column);
    }
    Ok(jac)
}

/// Uniform sample in the ball of `radius` around `center`, in the geometry of
/// `norm` (Euclidean ball or axis-aligned cube).
pub(crate) fn sample_in_ball<R: Rng + ?Sized>(rng: &mut R, center: &Vector, radius: f64, norm: NormKind) -> Vector {
    let n = center.len();
    match norm {
        NormKind::Euclidean => {
            let mut dir = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let len = dir.norm();
            if len == 0.0 {
                return center.clone();
            }
            dir /= len;
            let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
            center + dir * r
        }
        NormKind::Max => center + Vector::from_fn(n, |_, _| radius * rng.gen_range(-1.0..=1.0)),
    }
}

/// Parameters accepted by [`builtin`]. Missing entries fall back to each
/// problem's defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuiltinParams {
    pub values: BTreeMap<String, f64>,
    pub x0: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub norm: NormKind,
}

impl BuiltinParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    pub fn x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn radius(mut self, r: f64) -> Self {
        self.radius = Some(r);
        self
    }

    pub fn norm(mut self, norm: NormKind) -> Self {
        self.norm = norm;
        self
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.values.get(key).copied().unwrap_or(default)
    }

    fn scalar_x0(&self, default: f64) -> Result<f64> {
        match &self.x0 {
            None => Ok(self.get("x0", default)),
            Some(v) if v.len() == 1 => Ok(v[0]),
            Some(v) => Err(Error::InvalidInput(format!(
                "scalar problem expects 1-element x0, got {}",
                v.len()
            ))),
        }
    }
}

/// Registry entry.
#[derive(Debug, Clone, Serialize)]
pub struct BuiltinInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub params: &'static [&'static str],
}

pub const BUILTINS: &[BuiltinInfo] = &[
    BuiltinInfo {
        name: "scalar-majorant",
        description: "F = f itself: (L/2)x^2 - x + b, x0 = 0",
        params: &["b=0.25", "L=1", "x0=0", "R=2/L"],
    },
    BuiltinInfo {
        name: "scalar-sqrt",
        description: "F(x) = x^2 - c",
        params: &["c=2", "x0=1.5", "R=1"],
    },
    BuiltinInfo {
        name: "circle-line",
        description: "F(x, y) = (x^2 + y^2 - 1, x - y)",
        params: &["x0=(0.8,0.6)", "R=1"],
    },
    BuiltinInfo {
        name: "scalar-exp",
        description: "F(x) = exp(x) - c",
        params: &["c=2", "x0=0.7", "R=0.5"],
    },
    BuiltinInfo {
        name: "discrete-bvp",
        description: "n-point discretization of -u'' + u^3 = s on (0,1), u(0) = u(1) = 0",
        params: &["n=8", "s=1", "x0=0", "R=1"],
    },
];

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be finite and positive, got {v}"
        )))
    }
}

/// Construct a registered problem.
pub fn builtin(name: &str, params: &BuiltinParams) -> Result<ProblemSpec> {
    let norm = params.norm;
    let spec = match name {
        "scalar-majorant" => {
            let b = params.get("b", 0.25);
            let l = positive("L", params.get("L", 1.0))?;
            let majorant = crate::majorant::MajorantParams::new(b, l)?;
            let analysis = majorant.analyze();
            let x0 = params.scalar_x0(0.0)?;
            let radius = positive("R", params.radius.unwrap_or_else(|| params.get("R", 2.0 / l)))?;
            let slope = (l * x0 - 1.0).abs();
            let residual: ResidualFn = Arc::new(move |x: &Vector| Vector::from_element(1, majorant.eval(x[0])));
            let jacobian: JacobianFn =
                Arc::new(move |x: &Vector| Matrix::from_element(1, 1, majorant.derivative(x[0])));
            ProblemSpec::new(name, Vector::from_element(1, x0), radius, residual)
                .with_jacobian(jacobian)
                .with_known_lipschitz((slope > 0.0).then(|| l / slope))
                .with_known_roots(vec![
                    Vector::from_element(1, analysis.t_star),
                    Vector::from_element(1, analysis.t_star2),
                ])
                .with_params(BTreeMap::from([("L".to_string(), l), ("b".to_string(), b)]))
        }
        "scalar-sqrt" => {
            let c = positive("c", params.get("c", 2.0))?;
            let x0 = params.scalar_x0(1.5)?;
            let radius = positive("R", params.radius.unwrap_or_else(|| params.get("R", 1.0)))?;
            let residual: ResidualFn = Arc::new(move |x: &Vector| Vector::from_element(1, x[0] * x[0] - c));
            let jacobian: JacobianFn = Arc::new(|x: &Vector| Matrix::from_element(1, 1, 2.0 * x[0]));
            // G'(x) = x / x0
            ProblemSpec::new(name, Vector::from_element(1, x0), radius, residual)
                .with_jacobian(jacobian)
                .with_known_lipschitz((x0 != 0.0).then(|| 1.0 / x0.abs()))
                .with_known_roots(vec![
                    Vector::from_element(1, c.sqrt()),
                    Vector::from_element(1, -c.sqrt()),
                ])
                .with_params(BTreeMap::from([("c".to_string(), c)]))
        }
        "circle-line" => {
            let x0 = match &params.x0 {
                Some(v) if v.len() == 2 => Vector::from_row_slice(v),
                Some(v) => {
                    return Err(Error::InvalidInput(format!(
                        "circle-line expects 2-element x0, got {}",
                        v.len()
                    )))
                }
                None => Vector::from_row_slice(&[0.8, 0.6]),
            };
            let radius = positive("R", params.radius.unwrap_or_else(|| params.get("R", 1.0)))?;
            let residual: ResidualFn =
                Arc::new(|x: &Vector| Vector::from_row_slice(&[x[0] * x[0] + x[1] * x[1] - 1.0, x[0] - x[1]]));
            let jacobian: JacobianFn =
                Arc::new(|x: &Vector| Matrix::from_row_slice(2, 2, &[2.0 * x[0], 2.0 * x[1], 1.0, -1.0]));
            // F'(x0)⁻¹[F'(y) − F'(x)] = (1, 1)ᵀ (y − x)ᵀ / (a + c) for x0 = (a, c)
            let sum = (x0[0] + x0[1]).abs();
            let scale = match norm {
                NormKind::Euclidean => std::f64::consts::SQRT_2,
                NormKind::Max => 2.0,
            };
            let h = std::f64::consts::FRAC_1_SQRT_2;
            ProblemSpec::new(name, x0, radius, residual)
                .with_jacobian(jacobian)
                .with_known_lipschitz((sum > 0.0).then(|| scale / sum))
                .with_known_roots(vec![Vector::from_row_slice(&[h, h]), Vector::from_row_slice(&[-h, -h])])
        }
        "scalar-exp" => {
            let c = positive("c", params.get("c", 2.0))?;
            let x0 = params.scalar_x0(0.7)?;
            let radius = positive("R", params.radius.unwrap_or_else(|| params.get("R", 0.5)))?;
            let residual: ResidualFn = Arc::new(move |x: &Vector| Vector::from_element(1, x[0].exp() - c));
            let jacobian: JacobianFn = Arc::new(|x: &Vector| Matrix::from_element(1, 1, x[0].exp()));
            // |G''(x)| = exp(x − x0) ≤ exp(R) on B[x0, R]
            ProblemSpec::new(name, Vector::from_element(1, x0), radius, residual)
                .with_jacobian(jacobian)
                .with_known_lipschitz(Some(radius.exp()))
                .with_known_roots(vec![Vector::from_element(1, c.ln())])
                .with_params(BTreeMap::from([("c".to_string(), c)]))
        }
        "discrete-bvp" => discrete_bvp(params)?,
        other => return Err(Error::UnknownProblem(other.to_string())),
    };
    Ok(spec.with_norm(norm))
}

fn discrete_bvp(params: &BuiltinParams) -> Result<ProblemSpec> {
    let n_param = params.get("n", 8.0);
    if !(n_param >= 1.0 && n_param.fract() == 0.0 && n_param <= 1000.0) {
        return Err(Error::InvalidInput(format!(
            "n must be an integer in [1, 1000], got {n_param}"
        )));
    }
    let n = n_param as usize;
    let s = params.get("s", 1.0);
    if !s.is_finite() {
        return Err(Error::InvalidInput("s must be finite".into()));
    }
    let x0 = match &params.x0 {
        Some(v) if v.len() == n => Vector::from_row_slice(v),
        Some(v) if v.len() == 1 => Vector::from_element(n, v[0]),
        Some(v) => {
            return Err(Error::InvalidInput(format!(
                "discrete-bvp expects {n}-element x0, got {}",
                v.len()
            )))
        }
        None => Vector::from_element(n, params.get("x0", 0.0)),
    };
    let radius = positive("R", params.radius.unwrap_or_else(|| params.get("R", 1.0)))?;
    let inv_h2 = ((n + 1) * (n + 1)) as f64;

    let residual: ResidualFn = Arc::new(move |u: &Vector| {
        Vector::from_fn(n, |i, _| {
            let left = if i == 0 { 0.0 } else { u[i - 1] };
            let right = if i + 1 == n { 0.0 } else { u[i + 1] };
            (2.0 * u[i] - left - right) * inv_h2 + u[i].powi(3) - s
        })
    });
    let jacobian: JacobianFn = Arc::new(move |u: &Vector| {
        Matrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0 * inv_h2 + 3.0 * u[i] * u[i]
            } else if i.abs_diff(j) == 1 {
                -inv_h2
            } else {
                0.0
            }
        })
    });

    // F'(x0)⁻¹[F'(y) − F'(x)] = F'(x0)⁻¹ diag(3(y_i + x_i)(y_i − x_i)), and
    // |y_i + x_i| ≤ 2(‖x0‖∞ + R) on the domain ball.
    let base_inverse = jacobian(&x0)
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("discrete-bvp Jacobian at x0 is singular".into()))?;
    let lipschitz_bound = operator_norm(&base_inverse, params.norm) * 6.0 * (x0.amax() + radius);

    let mut spec = ProblemSpec::new("discrete-bvp", x0, radius, residual)
        .with_jacobian(jacobian)
        .with_params(BTreeMap::from([("n".to_string(), n as f64), ("s".to_string(), s)]));
    spec.lipschitz_bound = Some(lipschitz_bound);
    Ok(spec)
}

/// On-disk problem description: a builtin name plus its parametrization.
///
/// The optional run settings let a single file reproduce a whole CLI run;
/// command-line flags take precedence over anything set here.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(rename = "R", default)]
    pub radius: Option<f64>,
    #[serde(rename = "L", default)]
    pub lipschitz: Option<f64>,
    #[serde(default)]
    pub norm: Option<NormKind>,
    #[serde(default)]
    pub k_max: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub majorant_tol: Option<f64>,
    #[serde(default)]
    pub step_tol: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("problem file: {e}")))
    }

    pub fn builtin_params(&self) -> BuiltinParams {
        BuiltinParams {
            values: self.params.clone(),
            x0: self.x0.clone(),
            radius: self.radius,
            norm: self.norm.unwrap_or_default(),
        }
    }

    pub fn to_spec(&self) -> Result<ProblemSpec> {
        builtin(&self.name, &self.builtin_params())
    }
}
