//! SDE problems and the Itô–Taylor operators evaluated on them.
//!
//! A [`Problem`] wraps a [`Coefficients`] implementation (drift `b`, diffusion
//! `σ` with a single noise column, and their first and second derivatives)
//! together with the growth exponent `ρ`, the Hölder exponent `β`, the
//! initial state and the horizon.
//!
//! For a coefficient `f` and one-dimensional noise the operators are
//!
//! ```text
//! L⁰f⁽ᵏ⁾   = Σᵤ b⁽ᵘ⁾ ∂ᵤf⁽ᵏ⁾ + ½ Σᵤₗ σ⁽ᵘ⁾σ⁽ˡ⁾ ∂²ᵤₗf⁽ᵏ⁾
//! L¹f⁽ᵏ⁾   = Σᵤ σ⁽ᵘ⁾ ∂ᵤf⁽ᵏ⁾
//! L¹L¹σ⁽ᵏ⁾ = Σᵤₗ σ⁽ᵘ⁾ ∂ᵤσ⁽ˡ⁾ ∂ₗσ⁽ᵏ⁾ + Σᵤₗ σ⁽ᵘ⁾σ⁽ˡ⁾ ∂²ᵤₗσ⁽ᵏ⁾
//! ```

mod builtin;
mod fd;
mod operators;
pub mod user;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builtin::{
    builtin_problem, BuiltinKind, Ginzburg, Holder, OrnsteinUhlenbeck, Scalar, ScalarSde,
};
pub use fd::{validate_derivatives, DerivativeCheck, DerivativeReport, FiniteDifferences, FD_STEP};
pub use operators::{eval_operator_bundle, BundleEvaluator, BundleTerms, OperatorBundle};

/// Drift and diffusion of an SDE with one noise column, plus derivatives.
///
/// Matrix outputs are row-major: the Jacobian slot `out[i * d + u]` holds
/// `∂ᵤ f⁽ⁱ⁾`, and the Hessian slot `out[i * d * d + u * d + l]` holds
/// `∂²ᵤₗ f⁽ⁱ⁾`. Implementations must be deterministic.
pub trait Coefficients: Send + Sync {
    fn dim(&self) -> usize;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, x: &[f64], out: &mut [f64]);
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]);
    fn drift_hessians(&self, x: &[f64], out: &mut [f64]);
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]);
    fn diffusion_hessians(&self, x: &[f64], out: &mut [f64]);
}

/// Where a problem's derivatives come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSource {
    Analytic,
    /// Central differences with step [`FD_STEP`]; lower accuracy.
    FiniteDifference,
}

impl fmt::Display for DerivativeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DerivativeSource::Analytic => f.write_str("analytic"),
            DerivativeSource::FiniteDifference => f.write_str("finite-difference"),
        }
    }
}

/// Scalar parameters shared by every problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemParams {
    /// Growth exponent `ρ` (0 for globally Lipschitz problems).
    pub rho: f64,
    /// Hölder exponent `β` of the diffusion's second derivative.
    pub beta: f64,
    pub x0: Vec<f64>,
    pub horizon: f64,
}

#[derive(Clone)]
pub struct Problem {
    name: String,
    params: ProblemParams,
    derivatives: DerivativeSource,
    builtin: Option<(BuiltinKind, f64)>,
    coefficients: Arc<dyn Coefficients>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("derivatives", &self.derivatives)
            .finish_non_exhaustive()
    }
}

impl Problem {
    /// Problem with analytically supplied derivatives.
    pub fn new(
        name: impl Into<String>,
        coefficients: Arc<dyn Coefficients>,
        params: ProblemParams,
    ) -> Result<Self> {
        Self::build(
            name.into(),
            coefficients,
            params,
            DerivativeSource::Analytic,
        )
    }

    /// Problem whose derivatives are approximated by central differences of
    /// the supplied drift and diffusion.
    pub fn with_finite_differences<B, S>(
        name: impl Into<String>,
        dim: usize,
        drift: B,
        diffusion: S,
        params: ProblemParams,
    ) -> Result<Self>
    where
        B: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        S: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        let coefficients = Arc::new(FiniteDifferences::new(dim, drift, diffusion));
        Self::build(
            name.into(),
            coefficients,
            params,
            DerivativeSource::FiniteDifference,
        )
    }

    fn build(
        name: String,
        coefficients: Arc<dyn Coefficients>,
        params: ProblemParams,
        derivatives: DerivativeSource,
    ) -> Result<Self> {
        let d = coefficients.dim();
        if d == 0 {
            return Err(Error::parameter("d", "state dimension must be at least 1"));
        }
        check_params(&params, d)?;
        Ok(Self {
            name,
            params,
            derivatives,
            builtin: None,
            coefficients,
        })
    }

    pub(crate) fn mark_builtin(mut self, kind: BuiltinKind, xi: f64) -> Self {
        self.builtin = Some((kind, xi));
        self
    }

    /// Same coefficients started from a different initial state.
    pub fn with_x0(mut self, x0: Vec<f64>) -> Result<Self> {
        let params = ProblemParams {
            x0,
            ..self.params.clone()
        };
        check_params(&params, self.dim())?;
        self.params = params;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        let params = ProblemParams {
            horizon,
            ..self.params.clone()
        };
        check_params(&params, self.dim())?;
        self.params = params;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.coefficients.dim()
    }

    /// Noise dimension; always 1.
    pub fn noise_dim(&self) -> usize {
        1
    }

    pub fn rho(&self) -> f64 {
        self.params.rho
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn x0(&self) -> &[f64] {
        &self.params.x0
    }

    pub fn horizon(&self) -> f64 {
        self.params.horizon
    }

    pub fn derivatives(&self) -> DerivativeSource {
        self.derivatives
    }

    /// Built-in kind and noise intensity `ξ`, if this is a built-in problem.
    pub fn builtin(&self) -> Option<(BuiltinKind, f64)> {
        self.builtin
    }

    pub fn coefficients(&self) -> &dyn Coefficients {
        self.coefficients.as_ref()
    }

    /// Theoretical strong rate `1 + β/2`.
    pub fn theoretical_rate(&self) -> f64 {
        1.0 + self.params.beta / 2.0
    }

    pub fn drift_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.coefficients.drift(x, &mut out);
        out
    }

    pub fn diffusion_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.coefficients.diffusion(x, &mut out);
        out
    }
}

fn check_params(params: &ProblemParams, d: usize) -> Result<()> {
    if params.x0.len() != d {
        return Err(Error::parameter(
            "x0",
            format!("expected {d} components, got {}", params.x0.len()),
        ));
    }
    if params.x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::parameter("x0", "initial state must be finite"));
    }
    if !(params.horizon > 0.0 && params.horizon.is_finite()) {
        return Err(Error::parameter("T", "horizon must be positive and finite"));
    }
    if !(params.beta > 0.0 && params.beta <= 1.0) {
        return Err(Error::parameter(
            "beta",
            "Hölder exponent must lie in (0, 1]",
        ));
    }
    if !(params.rho >= 0.0 && params.rho.is_finite()) {
        return Err(Error::parameter(
            "rho",
            "growth exponent must be finite and non-negative",
        ));
    }
    Ok(())
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    if x.len() == 1 {
        x[0].abs()
    } else {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}
