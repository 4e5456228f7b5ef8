use serde::{Deserialize, Serialize};

use super::{Coefficients, Problem};
use crate::error::{Error, Result};

/// Central-difference step used for derivative fallbacks and checks.
pub const FD_STEP: f64 = 1e-5;

/// Deviation above which [`validate_derivatives`] rejects a problem.
pub const VALIDATION_TOLERANCE: f64 = 1e-4;

/// `out[i * d + u] ≈ ∂ᵤ f⁽ⁱ⁾(x)` by central differences.
pub(crate) fn central_jacobian<F>(f: F, x: &[f64], h: f64, out: &mut [f64])
where
    F: Fn(&[f64], &mut [f64]),
{
    let d = x.len();
    let mut probe = x.to_vec();
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    for u in 0..d {
        probe[u] = x[u] + h;
        f(&probe, &mut plus);
        probe[u] = x[u] - h;
        f(&probe, &mut minus);
        probe[u] = x[u];
        for i in 0..d {
            out[i * d + u] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
}

/// Hessians from central differences of a Jacobian evaluator, symmetrised.
pub(crate) fn central_hessians<J>(jac: J, x: &[f64], h: f64, out: &mut [f64])
where
    J: Fn(&[f64], &mut [f64]),
{
    let d = x.len();
    let mut probe = x.to_vec();
    let mut plus = vec![0.0; d * d];
    let mut minus = vec![0.0; d * d];
    // raw[i][u][l] = ∂ₗ J[i][u]
    let mut raw = vec![0.0; d * d * d];
    for l in 0..d {
        probe[l] = x[l] + h;
        jac(&probe, &mut plus);
        probe[l] = x[l] - h;
        jac(&probe, &mut minus);
        probe[l] = x[l];
        for i in 0..d {
            for u in 0..d {
                raw[i * d * d + u * d + l] = (plus[i * d + u] - minus[i * d + u]) / (2.0 * h);
            }
        }
    }
    for i in 0..d {
        for u in 0..d {
            for l in 0..d {
                let a = raw[i * d * d + u * d + l];
                let b = raw[i * d * d + l * d + u];
                out[i * d * d + u * d + l] = if u == l { a } else { 0.5 * (a + b) };
            }
        }
    }
}

/// Coefficients whose derivatives are approximated from drift and diffusion
/// alone.
pub struct FiniteDifferences<B, S> {
    dim: usize,
    drift: B,
    diffusion: S,
}

impl<B, S> FiniteDifferences<B, S> {
    pub fn new(dim: usize, drift: B, diffusion: S) -> Self {
        Self {
            dim,
            drift,
            diffusion,
        }
    }
}

impl<B, S> Coefficients for FiniteDifferences<B, S>
where
    B: Fn(&[f64], &mut [f64]) + Send + Sync,
    S: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        central_jacobian(&self.drift, x, FD_STEP, out)
    }
    fn drift_hessians(&self, x: &[f64], out: &mut [f64]) {
        central_hessians(|y, o| self.drift_jacobian(y, o), x, FD_STEP, out)
    }
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) {
        central_jacobian(&self.diffusion, x, FD_STEP, out)
    }
    fn diffusion_hessians(&self, x: &[f64], out: &mut [f64]) {
        central_hessians(|y, o| self.diffusion_jacobian(y, o), x, FD_STEP, out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub evaluator: String,
    pub max_deviation: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub checks: Vec<DerivativeCheck>,
}

impl DerivativeReport {
    pub fn max_deviation(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.max_deviation)
            .fold(0.0, f64::max)
    }
}

/// Compares the supplied Jacobians against central differences of the
/// coefficients, and the supplied Hessians against central differences of
/// the supplied Jacobians.
///
/// Deviations are `|analytic − fd| / max(|analytic|, |fd|, 1)`, so values of
/// order one or less are compared absolutely.
pub fn validate_derivatives(problem: &Problem, grid: &[Vec<f64>]) -> Result<DerivativeReport> {
    if grid.is_empty() {
        return Err(Error::parameter("probe_grid", "grid must not be empty"));
    }
    let d = problem.dim();
    let c = problem.coefficients();
    let names = [
        "drift_jacobian",
        "drift_hessians",
        "diffusion_jacobian",
        "diffusion_hessians",
    ];
    let mut checks: Vec<DerivativeCheck> = names
        .iter()
        .map(|n| DerivativeCheck {
            evaluator: n.to_string(),
            max_deviation: 0.0,
            worst_point: grid[0].clone(),
        })
        .collect();

    let mut analytic_j = vec![0.0; d * d];
    let mut numeric_j = vec![0.0; d * d];
    let mut analytic_h = vec![0.0; d * d * d];
    let mut numeric_h = vec![0.0; d * d * d];

    for x in grid {
        if x.len() != d || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::parameter(
                "probe_grid",
                format!("point {x:?} is not a finite {d}-vector"),
            ));
        }
        c.drift_jacobian(x, &mut analytic_j);
        central_jacobian(|y, o| c.drift(y, o), x, FD_STEP, &mut numeric_j);
        record(&mut checks[0], x, &analytic_j, &numeric_j);

        c.drift_hessians(x, &mut analytic_h);
        central_hessians(|y, o| c.drift_jacobian(y, o), x, FD_STEP, &mut numeric_h);
        record(&mut checks[1], x, &analytic_h, &numeric_h);

        c.diffusion_jacobian(x, &mut analytic_j);
        central_jacobian(|y, o| c.diffusion(y, o), x, FD_STEP, &mut numeric_j);
        record(&mut checks[2], x, &analytic_j, &numeric_j);

        c.diffusion_hessians(x, &mut analytic_h);
        central_hessians(
            |y, o| c.diffusion_jacobian(y, o),
            x,
            FD_STEP,
            &mut numeric_h,
        );
        record(&mut checks[3], x, &analytic_h, &numeric_h);
    }

    for (check, name) in checks.iter().zip(names) {
        if check.max_deviation.is_nan() || check.max_deviation > VALIDATION_TOLERANCE {
            return Err(Error::Validation {
                evaluator: name,
                point: check.worst_point.clone(),
                deviation: check.max_deviation,
            });
        }
    }
    Ok(DerivativeReport { checks })
}

fn record(check: &mut DerivativeCheck, x: &[f64], analytic: &[f64], numeric: &[f64]) {
    let dev = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            let diff = (a - n).abs();
            if diff == 0.0 {
                0.0
            } else {
                diff / a.abs().max(n.abs()).max(1.0)
            }
        })
        .fold(
            0.0,
            |acc: f64, v| if v.is_nan() { f64::NAN } else { acc.max(v) },
        );
    if dev.is_nan() || dev > check.max_deviation {
        check.max_deviation = dev;
        check.worst_point = x.to_vec();
    }
}
