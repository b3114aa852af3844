//! First-order stable spline (TC) kernel `K_ij = λ α^max(i,j)` and the
//! machinery around it:
//!
//! - [`kernel`]: closed-form factorization `K = U W Uᵀ`, tridiagonal inverse
//!   and log-determinant.
//! - [`maxent`]: maximum-entropy (central) completion of partially specified
//!   band matrices, its banded inverse factorization, and a brute-force
//!   coordinate-ascent oracle.
//! - [`sysid`]: Gaussian-process impulse-response estimation with
//!   marginal-likelihood hyperparameter tuning, plus a data simulator.
//! - [`io`], [`cli`], [`verify`]: file formats, the `stable-spline` command
//!   line tool and its property suites.
//!
//! ```
//! use stable_spline::kernel::StableSplineKernel;
//!
//! let k = StableSplineKernel::new(3, 0.5, 1.0).unwrap();
//! assert_eq!(k.inverse().unwrap().diag(), &[4.0, 12.0, 16.0]);
//! assert!((k.log_det() - 0.00390625_f64.ln()).abs() < 1e-12);
//! ```

pub mod cli;
pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod maxent;
pub mod sysid;
pub mod verify;

pub use error::{Error, Result};
