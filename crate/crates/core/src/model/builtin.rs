use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Coefficients, Problem, ProblemParams};
use crate::assumptions::parameter_ranges;
use crate::error::{Error, Result};

/// A scalar SDE `dx = b(x) dt + σ(x) dw` with hand-written derivatives.
pub trait ScalarSde: Send + Sync {
    fn drift(&self, x: f64) -> f64;
    fn drift_d1(&self, x: f64) -> f64;
    fn drift_d2(&self, x: f64) -> f64;
    fn diffusion(&self, x: f64) -> f64;
    fn diffusion_d1(&self, x: f64) -> f64;
    fn diffusion_d2(&self, x: f64) -> f64;
}

/// Adapts a [`ScalarSde`] to the vector-valued [`Coefficients`] interface.
#[derive(Debug, Clone)]
pub struct Scalar<T>(pub T);

impl<T: ScalarSde> Coefficients for Scalar<T> {
    fn dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.0.drift(x[0]);
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.0.diffusion(x[0]);
    }
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.0.drift_d1(x[0]);
    }
    fn drift_hessians(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.0.drift_d2(x[0]);
    }
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.0.diffusion_d1(x[0]);
    }
    fn diffusion_hessians(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.0.diffusion_d2(x[0]);
    }
}

/// `dx = x(1 − x²) dt + ξ(1 − x²) dw`.
#[derive(Debug, Clone, Copy)]
pub struct Ginzburg {
    pub xi: f64,
}

impl ScalarSde for Ginzburg {
    fn drift(&self, x: f64) -> f64 {
        x * (1.0 - x * x)
    }
    fn drift_d1(&self, x: f64) -> f64 {
        1.0 - 3.0 * x * x
    }
    fn drift_d2(&self, x: f64) -> f64 {
        -6.0 * x
    }
    fn diffusion(&self, x: f64) -> f64 {
        self.xi * (1.0 - x * x)
    }
    fn diffusion_d1(&self, x: f64) -> f64 {
        -2.0 * self.xi * x
    }
    fn diffusion_d2(&self, _x: f64) -> f64 {
        -2.0 * self.xi
    }
}

/// `dx = x(1 − |x|³) dt + ξ|x|^{5/2} dw`; the diffusion's second derivative
/// is only ½-Hölder at the origin.
#[derive(Debug, Clone, Copy)]
pub struct Holder {
    pub xi: f64,
}

impl ScalarSde for Holder {
    fn drift(&self, x: f64) -> f64 {
        let a = x.abs();
        x * (1.0 - a * a * a)
    }
    fn drift_d1(&self, x: f64) -> f64 {
        let a = x.abs();
        1.0 - 4.0 * a * a * a
    }
    fn drift_d2(&self, x: f64) -> f64 {
        -12.0 * x * x.abs()
    }
    fn diffusion(&self, x: f64) -> f64 {
        let a = x.abs();
        self.xi * a * a * a.sqrt()
    }
    fn diffusion_d1(&self, x: f64) -> f64 {
        // (5/2) ξ sgn(x) |x|^{3/2}
        2.5 * self.xi * x * x.abs().sqrt()
    }
    fn diffusion_d2(&self, x: f64) -> f64 {
        3.75 * self.xi * x.abs().sqrt()
    }
}

/// Ornstein–Uhlenbeck `dx = −x dt + ξ dw`, used as a closed-form calibration
/// problem.
#[derive(Debug, Clone, Copy)]
pub struct OrnsteinUhlenbeck {
    pub xi: f64,
}

impl ScalarSde for OrnsteinUhlenbeck {
    fn drift(&self, x: f64) -> f64 {
        -x
    }
    fn drift_d1(&self, _x: f64) -> f64 {
        -1.0
    }
    fn drift_d2(&self, _x: f64) -> f64 {
        0.0
    }
    fn diffusion(&self, _x: f64) -> f64 {
        self.xi
    }
    fn diffusion_d1(&self, _x: f64) -> f64 {
        0.0
    }
    fn diffusion_d2(&self, _x: f64) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinKind {
    Ginzburg,
    Holder,
    Ou,
}

impl BuiltinKind {
    pub const ALL: [BuiltinKind; 3] = [BuiltinKind::Ginzburg, BuiltinKind::Holder, BuiltinKind::Ou];

    pub fn as_str(self) -> &'static str {
        match self {
            BuiltinKind::Ginzburg => "ginzburg",
            BuiltinKind::Holder => "holder",
            BuiltinKind::Ou => "ou",
        }
    }
}

impl fmt::Display for BuiltinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BuiltinKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ginzburg" => Ok(BuiltinKind::Ginzburg),
            "holder" | "hölder" => Ok(BuiltinKind::Holder),
            "ou" => Ok(BuiltinKind::Ou),
            other => Err(Error::parameter(
                "problem",
                format!("unknown problem `{other}` (expected ginzburg, holder or ou)"),
            )),
        }
    }
}

/// One of the shipped problems, all with `x₀ = 3` and `T = 1`.
///
/// For the two superlinear problems `|ξ|` must not exceed the admissible
/// bound from [`parameter_ranges`] unless `allow_out_of_range` is set.
pub fn builtin_problem(kind: BuiltinKind, xi: f64, allow_out_of_range: bool) -> Result<Problem> {
    if !xi.is_finite() {
        return Err(Error::parameter("xi", "noise intensity must be finite"));
    }
    if kind != BuiltinKind::Ou && !allow_out_of_range {
        let ranges = parameter_ranges(kind)?;
        if xi.abs() > ranges.xi_max {
            return Err(Error::parameter(
                "xi",
                format!(
                    "|ξ| = {} exceeds the admissible bound {:.4} for {kind} \
                     (p₀ ≥ {} requires ξ² ≤ 2/(p₀ − 1)); pass the override flag to run anyway",
                    xi.abs(),
                    ranges.xi_max,
                    ranges.min_p0
                ),
            ));
        }
    }
    let (coefficients, rho, beta): (Arc<dyn Coefficients>, f64, f64) = match kind {
        BuiltinKind::Ginzburg => (Arc::new(Scalar(Ginzburg { xi })), 2.0, 1.0),
        BuiltinKind::Holder => (Arc::new(Scalar(Holder { xi })), 4.0, 0.5),
        BuiltinKind::Ou => (Arc::new(Scalar(OrnsteinUhlenbeck { xi })), 0.0, 1.0),
    };
    let params = ProblemParams {
        rho,
        beta,
        x0: vec![3.0],
        horizon: 1.0,
    };
    Ok(Problem::new(kind.as_str(), coefficients, params)?.mark_builtin(kind, xi))
}
