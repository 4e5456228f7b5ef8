//! One-step maps of the tamed schemes and the path integrator.
//!
//! With `Δ` the step, `(ΔW, ΔZ)` the increments and every coefficient tamed
//! at the current state `X`, the order-1.5 step is
//!
//! ```text
//! X' = X + bⁿΔ + σⁿΔW + L^{n,1}b ΔZ + ½L^{n,0}b Δ²
//!        + ½L^{n,1}σ (ΔW² − Δ) + L^{n,0}σ (ΔW Δ − ΔZ)
//!        + ½L^{n,1}L¹σ (⅓ΔW² − Δ) ΔW
//! ```
//!
//! Tamed Milstein keeps the first two lines' `b`, `σ` and `L¹σ` terms, tamed
//! Euler only `bⁿΔ + σⁿΔW`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brownian::{IncrementPair, PathIncrements};
use crate::error::{Error, Result};
use crate::model::{BundleEvaluator, BundleTerms, Problem};
use crate::taming::{TamedBundle, TamingConfig, DEFAULT_THETA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "euler")]
    TamedEuler,
    #[serde(rename = "milstein")]
    TamedMilstein,
    #[serde(rename = "taylor15")]
    Taylor15,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [
        SchemeKind::TamedEuler,
        SchemeKind::TamedMilstein,
        SchemeKind::Taylor15,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::TamedEuler => "euler",
            SchemeKind::TamedMilstein => "milstein",
            SchemeKind::Taylor15 => "taylor15",
        }
    }

    pub fn terms(self) -> BundleTerms {
        match self {
            SchemeKind::TamedEuler => BundleTerms::Basic,
            SchemeKind::TamedMilstein => BundleTerms::Milstein,
            SchemeKind::Taylor15 => BundleTerms::Full,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" | "tamed_euler" => Ok(SchemeKind::TamedEuler),
            "milstein" | "tamed_milstein" => Ok(SchemeKind::TamedMilstein),
            "taylor15" | "taylor" => Ok(SchemeKind::Taylor15),
            other => Err(Error::parameter(
                "scheme",
                format!("unknown scheme `{other}` (expected euler, milstein or taylor15)"),
            )),
        }
    }
}

/// A scheme together with its taming switch and rate parameter `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub kind: SchemeKind,
    pub taming: bool,
    pub theta: f64,
}

impl Scheme {
    pub fn tamed(kind: SchemeKind) -> Self {
        Self {
            kind,
            taming: true,
            theta: DEFAULT_THETA,
        }
    }

    pub fn untamed(kind: SchemeKind) -> Self {
        Self {
            taming: false,
            ..Self::tamed(kind)
        }
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Self { theta, ..self }
    }

    /// Taming configuration for `steps` steps over `[0, horizon]`; the taming
    /// parameter is `n = ⌈N / T⌉`.
    pub fn taming_config(&self, rho: f64, steps: usize, horizon: f64) -> Result<TamingConfig> {
        let n = (steps as f64 / horizon).ceil().max(1.0) as u64;
        Ok(TamingConfig::new(rho, n)?
            .with_theta(self.theta)?
            .with_enabled(self.taming))
    }
}

/// States with a component beyond this magnitude count as exploded.
pub const EXPLOSION_BOUND: f64 = 1e10;

/// Everything one step needs: the state, the increments, and the tamed
/// bundle evaluated at that state.
#[derive(Debug, Clone, Copy)]
pub struct StepInputs<'a> {
    pub x: &'a [f64],
    pub pair: IncrementPair,
    pub tamed: &'a TamedBundle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("step produced a non-finite state")]
pub struct NonFiniteState;

fn finish(out: &[f64]) -> std::result::Result<(), NonFiniteState> {
    if out.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NonFiniteState)
    }
}

pub fn step_tamed_euler(
    inputs: &StepInputs,
    out: &mut [f64],
) -> std::result::Result<(), NonFiniteState> {
    let t = &inputs.tamed.terms;
    let IncrementPair { dw, dt, .. } = inputs.pair;
    for (k, o) in out.iter_mut().enumerate() {
        *o = inputs.x[k] + t.b[k] * dt + t.sigma[k] * dw;
    }
    finish(out)
}

pub fn step_tamed_milstein(
    inputs: &StepInputs,
    out: &mut [f64],
) -> std::result::Result<(), NonFiniteState> {
    let t = &inputs.tamed.terms;
    let IncrementPair { dw, dt, .. } = inputs.pair;
    let ito = dw * dw - dt;
    for (k, o) in out.iter_mut().enumerate() {
        *o = inputs.x[k] + t.b[k] * dt + t.sigma[k] * dw + 0.5 * t.l1_sigma[k] * ito;
    }
    finish(out)
}

pub fn step_taylor15(
    inputs: &StepInputs,
    out: &mut [f64],
) -> std::result::Result<(), NonFiniteState> {
    let t = &inputs.tamed.terms;
    let IncrementPair { dw, dz, dt } = inputs.pair;
    let ito = dw * dw - dt;
    let time_noise = dw * dt - dz;
    let triple = (dw * dw / 3.0 - dt) * dw;
    for (k, o) in out.iter_mut().enumerate() {
        *o = inputs.x[k]
            + t.b[k] * dt
            + t.sigma[k] * dw
            + t.l1_b[k] * dz
            + 0.5 * t.l0_b[k] * dt * dt
            + 0.5 * t.l1_sigma[k] * ito
            + t.l0_sigma[k] * time_noise
            + 0.5 * t.l1l1_sigma[k] * triple;
    }
    finish(out)
}

pub fn step(
    kind: SchemeKind,
    inputs: &StepInputs,
    out: &mut [f64],
) -> std::result::Result<(), NonFiniteState> {
    match kind {
        SchemeKind::TamedEuler => step_tamed_euler(inputs, out),
        SchemeKind::TamedMilstein => step_tamed_milstein(inputs, out),
        SchemeKind::Taylor15 => step_taylor15(inputs, out),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PathOutcome {
    Completed {
        terminal: Vec<f64>,
        /// States at `t_0, …, t_N` when requested.
        trajectory: Option<Vec<Vec<f64>>>,
    },
    /// The state (or an operator value) became non-finite, or the state left
    /// `[-EXPLOSION_BOUND, EXPLOSION_BOUND]`, at this step.
    Exploded { step: usize },
}

impl PathOutcome {
    pub fn terminal(&self) -> Option<&[f64]> {
        match self {
            PathOutcome::Completed { terminal, .. } => Some(terminal),
            PathOutcome::Exploded { .. } => None,
        }
    }

    pub fn exploded(&self) -> bool {
        matches!(self, PathOutcome::Exploded { .. })
    }
}

/// Integrates one problem with one scheme, reusing scratch buffers across
/// paths.
pub struct PathSolver<'a> {
    problem: &'a Problem,
    scheme: Scheme,
    eval: BundleEvaluator<'a>,
    tamed: TamedBundle,
    state: Vec<f64>,
    next: Vec<f64>,
}

impl<'a> PathSolver<'a> {
    pub fn new(problem: &'a Problem, scheme: Scheme) -> Self {
        let d = problem.dim();
        Self {
            problem,
            scheme,
            eval: BundleEvaluator::new(problem, scheme.kind.terms()),
            tamed: TamedBundle::zeros(d),
            state: vec![0.0; d],
            next: vec![0.0; d],
        }
    }

    pub fn solve(&mut self, incs: &PathIncrements, record_trajectory: bool) -> Result<PathOutcome> {
        if incs.pairs.len() != incs.steps || incs.steps == 0 {
            return Err(Error::parameter(
                "incs",
                format!("{} pairs for {} steps", incs.pairs.len(), incs.steps),
            ));
        }
        if (incs.horizon - self.problem.horizon()).abs() > 1e-12 * self.problem.horizon() {
            return Err(Error::parameter(
                "incs",
                format!(
                    "increments cover [0, {}] but the problem horizon is {}",
                    incs.horizon,
                    self.problem.horizon()
                ),
            ));
        }
        let cfg = self
            .scheme
            .taming_config(self.problem.rho(), incs.steps, incs.horizon)?;
        self.state.copy_from_slice(self.problem.x0());
        let mut trajectory = record_trajectory.then(|| {
            let mut t = Vec::with_capacity(incs.steps + 1);
            t.push(self.state.clone());
            t
        });

        for (k, pair) in incs.pairs.iter().enumerate() {
            let bundle = match self.eval.eval(&self.state) {
                Ok(b) => b,
                Err(Error::Range { .. }) => return self.exploded(incs, k),
                Err(e) => return Err(e),
            };
            self.tamed.assign(bundle, cfg.factor(&self.state));
            let inputs = StepInputs {
                x: &self.state,
                pair: *pair,
                tamed: &self.tamed,
            };
            if step(self.scheme.kind, &inputs, &mut self.next).is_err()
                || self.next.iter().any(|v| v.abs() > EXPLOSION_BOUND)
            {
                return self.exploded(incs, k);
            }
            std::mem::swap(&mut self.state, &mut self.next);
            if let Some(t) = trajectory.as_mut() {
                t.push(self.state.clone());
            }
        }
        Ok(PathOutcome::Completed {
            terminal: self.state.clone(),
            trajectory,
        })
    }

    fn exploded(&self, incs: &PathIncrements, step: usize) -> Result<PathOutcome> {
        if self.scheme.taming {
            Err(Error::Explosion {
                path: incs.path_index as usize,
                step,
            })
        } else {
            Ok(PathOutcome::Exploded { step })
        }
    }
}

/// Folds the scheme's step over the increments starting from `x₀`.
///
/// Non-finite or out-of-bound states end the path with [`PathOutcome::Exploded`] when taming
/// is off and with [`Error::Explosion`] when it is on.
pub fn simulate_path(
    problem: &Problem,
    scheme: Scheme,
    incs: &PathIncrements,
    record_trajectory: bool,
) -> Result<PathOutcome> {
    PathSolver::new(problem, scheme).solve(incs, record_trajectory)
}
