use serde::{Deserialize, Serialize};

use super::Problem;
use crate::error::{Error, Result};

/// The coefficients and operator values a step needs, all at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorBundle {
    pub b: Vec<f64>,
    pub sigma: Vec<f64>,
    pub l0_b: Vec<f64>,
    pub l1_b: Vec<f64>,
    pub l0_sigma: Vec<f64>,
    pub l1_sigma: Vec<f64>,
    pub l1l1_sigma: Vec<f64>,
}

impl OperatorBundle {
    pub fn zeros(d: usize) -> Self {
        Self {
            b: vec![0.0; d],
            sigma: vec![0.0; d],
            l0_b: vec![0.0; d],
            l1_b: vec![0.0; d],
            l0_sigma: vec![0.0; d],
            l1_sigma: vec![0.0; d],
            l1l1_sigma: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// The seven fields in a fixed order, paired with their operator names.
    pub fn fields(&self) -> [(&'static str, &[f64]); 7] {
        [
            ("b", &self.b),
            ("sigma", &self.sigma),
            ("L0b", &self.l0_b),
            ("L1b", &self.l1_b),
            ("L0sigma", &self.l0_sigma),
            ("L1sigma", &self.l1_sigma),
            ("L1L1sigma", &self.l1l1_sigma),
        ]
    }

    pub(crate) fn fields_mut(&mut self) -> [&mut Vec<f64>; 7] {
        [
            &mut self.b,
            &mut self.sigma,
            &mut self.l0_b,
            &mut self.l1_b,
            &mut self.l0_sigma,
            &mut self.l1_sigma,
            &mut self.l1l1_sigma,
        ]
    }
}

/// Which operator values to compute; the rest are left at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BundleTerms {
    /// `b` and `σ`.
    Basic,
    /// Adds `L¹σ`.
    Milstein,
    /// All seven values.
    Full,
}

/// Reusable scratch space for evaluating bundles along a path.
pub struct BundleEvaluator<'a> {
    problem: &'a Problem,
    terms: BundleTerms,
    drift_jac: Vec<f64>,
    drift_hess: Vec<f64>,
    diff_jac: Vec<f64>,
    diff_hess: Vec<f64>,
    bundle: OperatorBundle,
}

impl<'a> BundleEvaluator<'a> {
    pub fn new(problem: &'a Problem, terms: BundleTerms) -> Self {
        let d = problem.dim();
        Self {
            problem,
            terms,
            drift_jac: vec![0.0; d * d],
            drift_hess: vec![0.0; d * d * d],
            diff_jac: vec![0.0; d * d],
            diff_hess: vec![0.0; d * d * d],
            bundle: OperatorBundle::zeros(d),
        }
    }

    pub fn bundle(&self) -> &OperatorBundle {
        &self.bundle
    }

    pub fn into_bundle(self) -> OperatorBundle {
        self.bundle
    }

    /// Evaluates the requested terms at `x`, failing with a range error on
    /// the first non-finite operator value.
    pub fn eval(&mut self, x: &[f64]) -> Result<&OperatorBundle> {
        let d = self.problem.dim();
        if x.len() != d {
            return Err(Error::parameter(
                "x",
                format!("expected {d} components, got {}", x.len()),
            ));
        }
        let c = self.problem.coefficients();
        let bundle = &mut self.bundle;

        c.drift(x, &mut bundle.b);
        check(x, "b", &bundle.b)?;
        c.diffusion(x, &mut bundle.sigma);
        check(x, "sigma", &bundle.sigma)?;
        if self.terms == BundleTerms::Basic {
            return Ok(&self.bundle);
        }

        c.diffusion_jacobian(x, &mut self.diff_jac);
        directional(&self.diff_jac, &bundle.sigma, &mut bundle.l1_sigma);
        if self.terms == BundleTerms::Milstein {
            check(x, "L1sigma", &bundle.l1_sigma)?;
            return Ok(&self.bundle);
        }

        c.drift_jacobian(x, &mut self.drift_jac);
        c.drift_hessians(x, &mut self.drift_hess);
        c.diffusion_hessians(x, &mut self.diff_hess);

        generator(
            &self.drift_jac,
            &self.drift_hess,
            &bundle.b,
            &bundle.sigma,
            &mut bundle.l0_b,
        );
        check(x, "L0b", &bundle.l0_b)?;
        directional(&self.drift_jac, &bundle.sigma, &mut bundle.l1_b);
        check(x, "L1b", &bundle.l1_b)?;
        generator(
            &self.diff_jac,
            &self.diff_hess,
            &bundle.b,
            &bundle.sigma,
            &mut bundle.l0_sigma,
        );
        check(x, "L0sigma", &bundle.l0_sigma)?;
        check(x, "L1sigma", &bundle.l1_sigma)?;

        // L¹L¹σ = ∇σ · (L¹σ) + σᵀ ∇²σ⁽ᵏ⁾ σ
        for k in 0..d {
            let row = &self.diff_jac[k * d..(k + 1) * d];
            let first: f64 = row.iter().zip(&bundle.l1_sigma).map(|(j, v)| j * v).sum();
            let hess = &self.diff_hess[k * d * d..(k + 1) * d * d];
            bundle.l1l1_sigma[k] = first + quadratic(hess, &bundle.sigma);
        }
        check(x, "L1L1sigma", &bundle.l1l1_sigma)?;
        Ok(&self.bundle)
    }
}

/// All seven operator values of `problem` at `x` (untamed).
pub fn eval_operator_bundle(problem: &Problem, x: &[f64]) -> Result<OperatorBundle> {
    let mut eval = BundleEvaluator::new(problem, BundleTerms::Full);
    eval.eval(x)?;
    Ok(eval.into_bundle())
}

fn check(x: &[f64], operator: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Range {
            operator,
            point: x.to_vec(),
        })
    }
}

/// `out⁽ᵏ⁾ = Σᵤ v⁽ᵘ⁾ J[k][u]`
fn directional(jac: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for (k, o) in out.iter_mut().enumerate() {
        *o = jac[k * d..(k + 1) * d]
            .iter()
            .zip(v)
            .map(|(j, vu)| j * vu)
            .sum();
    }
}

/// `out⁽ᵏ⁾ = Σᵤ b⁽ᵘ⁾ J[k][u] + ½ σᵀ H⁽ᵏ⁾ σ`
fn generator(jac: &[f64], hess: &[f64], b: &[f64], sigma: &[f64], out: &mut [f64]) {
    let d = b.len();
    for (k, o) in out.iter_mut().enumerate() {
        let first: f64 = jac[k * d..(k + 1) * d]
            .iter()
            .zip(b)
            .map(|(j, bu)| j * bu)
            .sum();
        *o = first + 0.5 * quadratic(&hess[k * d * d..(k + 1) * d * d], sigma);
    }
}

fn quadratic(h: &[f64], v: &[f64]) -> f64 {
    let d = v.len();
    let mut acc = 0.0;
    for u in 0..d {
        for l in 0..d {
            acc += v[u] * v[l] * h[u * d + l];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use approx::assert_relative_eq;

    use super::*;
    use crate::model::{builtin_problem, BuiltinKind, Coefficients, ProblemParams};

    #[test]
    fn ginzburg_at_two() {
        let p = builtin_problem(BuiltinKind::Ginzburg, 0.02, false).unwrap();
        let b = eval_operator_bundle(&p, &[2.0]).unwrap();
        assert_relative_eq!(b.b[0], -6.0, max_relative = 1e-14);
        assert_relative_eq!(b.sigma[0], -0.06, max_relative = 1e-14);
        assert_relative_eq!(b.l0_b[0], 65.9784, max_relative = 1e-13);
        assert_relative_eq!(b.l1_b[0], 0.66, max_relative = 1e-13);
        assert_relative_eq!(b.l0_sigma[0], 0.479928, max_relative = 1e-13);
        assert_relative_eq!(b.l1_sigma[0], 0.0048, max_relative = 1e-13);
        assert_relative_eq!(b.l1l1_sigma[0], -0.000528, max_relative = 1e-12);
    }

    #[test]
    fn common_zero_points() {
        let g = builtin_problem(BuiltinKind::Ginzburg, 0.02, false).unwrap();
        let h = builtin_problem(BuiltinKind::Holder, 0.02, false).unwrap();
        for (p, x) in [(&g, 1.0), (&h, 0.0)] {
            let b = eval_operator_bundle(p, &[x]).unwrap();
            for (name, v) in b.fields() {
                assert_eq!(v[0], 0.0, "{name} at {x}");
            }
        }
    }

    #[test]
    fn overflow_is_a_range_error() {
        let p = builtin_problem(BuiltinKind::Ginzburg, 0.02, false).unwrap();
        match eval_operator_bundle(&p, &[1e120]) {
            Err(Error::Range { operator, .. }) => assert_eq!(operator, "b"),
            other => panic!("expected range error, got {other:?}"),
        }
        // b and σ survive, the fifth-power L⁰b does not
        match eval_operator_bundle(&p, &[1e70]) {
            Err(Error::Range { operator, .. }) => assert_eq!(operator, "L0b"),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn basic_terms_skip_derivatives() {
        let p = builtin_problem(BuiltinKind::Ginzburg, 0.02, false).unwrap();
        let mut eval = BundleEvaluator::new(&p, BundleTerms::Basic);
        let b = eval.eval(&[1e70]).unwrap();
        assert!(b.b[0].is_finite());
        assert_eq!(b.l0_b[0], 0.0);
    }

    /// Two uncoupled copies of a scalar problem plus a cross term, to make
    /// sure the vector contractions use the right index order.
    struct Coupled;

    impl Coefficients for Coupled {
        fn dim(&self) -> usize {
            2
        }
        fn drift(&self, x: &[f64], out: &mut [f64]) {
            out[0] = x[0] * x[1];
            out[1] = -x[1];
        }
        fn diffusion(&self, x: &[f64], out: &mut [f64]) {
            out[0] = x[1];
            out[1] = x[0] * x[0];
        }
        fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&[x[1], x[0], 0.0, -1.0]);
        }
        fn drift_hessians(&self, _x: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&[0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        }
        fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&[0.0, 1.0, 2.0 * x[0], 0.0]);
        }
        fn diffusion_hessians(&self, _x: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&[0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn two_dimensional_contractions() {
        let params = ProblemParams {
            rho: 2.0,
            beta: 1.0,
            x0: vec![1.0, 1.0],
            horizon: 1.0,
        };
        let p = Problem::new("coupled", Arc::new(Coupled), params).unwrap();
        let (x0, x1) = (2.0, 3.0);
        let b = eval_operator_bundle(&p, &[x0, x1]).unwrap();
        // b = (6, -3), σ = (3, 4)
        let (b0, b1, s0, s1) = (x0 * x1, -x1, x1, x0 * x0);
        assert_eq!(b.l0_b[0], b0 * x1 + b1 * x0 + 0.5 * (2.0 * s0 * s1));
        assert_eq!(b.l0_b[1], -b1);
        assert_eq!(b.l1_b[0], s0 * x1 + s1 * x0);
        assert_eq!(b.l1_b[1], -s1);
        assert_eq!(b.l1_sigma[0], s1);
        assert_eq!(b.l1_sigma[1], 2.0 * x0 * s0);
        assert_eq!(b.l0_sigma[0], b1);
        assert_eq!(b.l0_sigma[1], 2.0 * x0 * b0 + 0.5 * 2.0 * s0 * s0);
        // ∇σ·L¹σ + σᵀ∇²σσ
        assert_eq!(b.l1l1_sigma[0], b.l1_sigma[1]);
        assert_eq!(b.l1l1_sigma[1], 2.0 * x0 * b.l1_sigma[0] + 2.0 * s0 * s0);
    }
}
