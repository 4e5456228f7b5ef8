//! Explicit tamed order-1.5 strong Taylor scheme for SDEs whose drift and
//! diffusion grow superlinearly.
//!
//! The crate is split along the pipeline a strong-convergence study follows:
//!
//! - [`model`]: SDE problems, their derivatives, and the operators `L⁰`, `L¹`
//!   and `L¹L¹` evaluated at a point.
//! - [`taming`]: the uniform taming factor `1 / (1 + n^{-θ}|x|^{2ρθ})`.
//! - [`brownian`]: reproducible `(ΔW, ΔZ)` increments and exact fine-to-coarse
//!   aggregation.
//! - [`schemes`]: tamed Euler, tamed Milstein and tamed order-1.5 Taylor steps.
//! - [`experiments`]: coupled Monte Carlo strong errors, rate fits and moment
//!   probes, plus CSV/JSON output.
//! - [`assumptions`]: numeric checks of the coercivity, monotonicity and
//!   Hölder-type conditions the convergence result relies on.
//!
//! ```
//! use tamed_taylor::model::{builtin_problem, BuiltinKind};
//! use tamed_taylor::schemes::{Scheme, SchemeKind};
//! use tamed_taylor::brownian::generate_path;
//!
//! let problem = builtin_problem(BuiltinKind::Ginzburg, 0.02, false).unwrap();
//! let incs = generate_path(42, 0, 64, problem.horizon()).unwrap();
//! let outcome = tamed_taylor::schemes::simulate_path(
//!     &problem,
//!     Scheme::tamed(SchemeKind::Taylor15),
//!     &incs,
//!     false,
//! )
//! .unwrap();
//! assert!(outcome.terminal().unwrap()[0].is_finite());
//! ```

pub mod assumptions;
pub mod brownian;
pub mod error;
pub mod experiments;
pub mod model;
pub mod output;
pub mod schemes;
pub mod taming;

pub use brownian::{IncrementPair, PathIncrements};
pub use error::{Error, Result};
pub use experiments::{ErrorRow, ErrorTable, RateFit};
pub use model::{BuiltinKind, Coefficients, OperatorBundle, Problem};
pub use schemes::{PathOutcome, Scheme, SchemeKind};
pub use taming::{TamedBundle, TamingConfig};
