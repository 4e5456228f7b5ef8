//! Scalar problems described in a JSON file.
//!
//! Each coefficient is a sum of terms `coef · |x|^power`, multiplied by
//! `sgn(x)` when `odd` is set, so `x − x³` is
//! `[{"coef": 1, "power": 1, "odd": true}, {"coef": -1, "power": 3, "odd": true}]`.
//!
//! ```json
//! {
//!   "name": "cubic",
//!   "rho": 2, "beta": 1, "x0": 3.0, "horizon": 1.0,
//!   "drift": [{"coef": 1, "power": 1, "odd": true}, {"coef": -1, "power": 3, "odd": true}],
//!   "diffusion": [{"coef": 0.02, "power": 0}, {"coef": -0.02, "power": 2}],
//!   "finite_differences": false
//! }
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Problem, ProblemParams, Scalar, ScalarSde};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coef: f64,
    pub power: f64,
    #[serde(default)]
    pub odd: bool,
}

impl PowerTerm {
    fn value(&self, x: f64) -> f64 {
        let v = self.coef * x.abs().powf(self.power);
        if self.odd && x < 0.0 {
            -v
        } else {
            v
        }
    }

    /// `d/dx (c |x|^p sgnᵒ(x)) = c p |x|^{p−1} sgnᵒ⁺¹(x)`; constants vanish.
    fn derivative(&self) -> Option<PowerTerm> {
        if self.coef == 0.0 || self.power == 0.0 {
            return None;
        }
        Some(PowerTerm {
            coef: self.coef * self.power,
            power: self.power - 1.0,
            odd: !self.odd,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProblemFile {
    pub name: String,
    pub rho: f64,
    pub beta: f64,
    pub x0: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub drift: Vec<PowerTerm>,
    pub diffusion: Vec<PowerTerm>,
    #[serde(default)]
    pub finite_differences: bool,
}

fn default_horizon() -> f64 {
    1.0
}

#[derive(Debug, Clone)]
struct PowerSeries {
    f: Vec<PowerTerm>,
    d1: Vec<PowerTerm>,
    d2: Vec<PowerTerm>,
}

impl PowerSeries {
    fn new(f: Vec<PowerTerm>) -> Self {
        let d1: Vec<_> = f.iter().filter_map(PowerTerm::derivative).collect();
        let d2 = d1.iter().filter_map(PowerTerm::derivative).collect();
        Self { f, d1, d2 }
    }
}

fn eval(terms: &[PowerTerm], x: f64) -> f64 {
    terms.iter().map(|t| t.value(x)).sum()
}

#[derive(Debug, Clone)]
struct PowerSde {
    drift: PowerSeries,
    diffusion: PowerSeries,
}

impl ScalarSde for PowerSde {
    fn drift(&self, x: f64) -> f64 {
        eval(&self.drift.f, x)
    }
    fn drift_d1(&self, x: f64) -> f64 {
        eval(&self.drift.d1, x)
    }
    fn drift_d2(&self, x: f64) -> f64 {
        eval(&self.drift.d2, x)
    }
    fn diffusion(&self, x: f64) -> f64 {
        eval(&self.diffusion.f, x)
    }
    fn diffusion_d1(&self, x: f64) -> f64 {
        eval(&self.diffusion.d1, x)
    }
    fn diffusion_d2(&self, x: f64) -> f64 {
        eval(&self.diffusion.d2, x)
    }
}

impl UserProblemFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn into_problem(self) -> Result<Problem> {
        let terms = self.drift.iter().chain(&self.diffusion);
        if terms
            .clone()
            .any(|t| !t.coef.is_finite() || !t.power.is_finite() || t.power < 0.0)
        {
            return Err(Error::parameter(
                "problem",
                "terms need finite coefficients and non-negative powers",
            ));
        }
        let params = ProblemParams {
            rho: self.rho,
            beta: self.beta,
            x0: vec![self.x0],
            horizon: self.horizon,
        };
        if self.finite_differences {
            let drift = self.drift;
            let diffusion = self.diffusion;
            Problem::with_finite_differences(
                self.name,
                1,
                move |x, o| o[0] = eval(&drift, x[0]),
                move |x, o| o[0] = eval(&diffusion, x[0]),
                params,
            )
        } else {
            let sde = PowerSde {
                drift: PowerSeries::new(self.drift),
                diffusion: PowerSeries::new(self.diffusion),
            };
            Problem::new(self.name, Arc::new(Scalar(sde)), params)
        }
    }
}
