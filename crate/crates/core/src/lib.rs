//! Certified Newton's method for finite-dimensional nonlinear systems.
//!
//! The quadratic majorant `f(t) = (L/2)t² − t + b` turns two numbers measured
//! at the starting point, the normalized residual `b` and the
//! affine-covariant Lipschitz constant `L`, into a certificate: an existence
//! ball, a uniqueness region, and a table of a priori error bounds for every
//! Newton iterate. The [`verify`] module then audits those bounds against an
//! actual run.
//!
//! ```
//! use kantorovich::certify::{certify_problem, LipschitzSource};
//! use kantorovich::newton::{solve, StopCriteria};
//! use kantorovich::problem::{builtin, BuiltinParams};
//!
//! let ps = builtin("scalar-sqrt", &BuiltinParams::new().set("c", 2.0).x0(vec![1.5])).unwrap();
//! let (pcs, cert) = certify_problem(ps, LipschitzSource::Known, 20).unwrap();
//! assert!(cert.is_strict());
//! let trace = solve(&pcs, &cert, &StopCriteria::default()).unwrap();
//! assert!((trace.last()[0] - 2f64.sqrt()).abs() < 1e-15);
//! ```

pub mod certify;
pub mod cli;
pub mod error;
pub mod majorant;
pub mod newton;
pub mod precondition;
pub mod problem;
pub mod verify;

pub use certify::{certify, certify_problem, Certificate, CertificateStatus, LipschitzSource, RejectionReason};
pub use error::{Error, Result};
pub use majorant::{MajorantAnalysis, MajorantParams, MajorantTrajectory};
pub use newton::{newton_step, solve, NewtonTrace, StopCriteria, StopReason};
pub use precondition::PreconditionedSystem;
pub use problem::{builtin, BuiltinParams, NormKind, ProblemFile, ProblemSpec};
pub use verify::{full_verification, BoundCheck, BoundReport, CheckId, VerifyOptions};
