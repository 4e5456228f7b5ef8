//! Uniform taming: every coefficient of a step is divided by the same
//! `1 + n^{-θ}|x|^{2ρθ}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{norm, BundleEvaluator, BundleTerms, OperatorBundle, Problem};

pub const DEFAULT_THETA: f64 = 1.5;

/// Above this value of `ln(n^{-θ}|x|^{2ρθ})` the factor is computed as
/// `n^θ |x|^{-2ρθ}` directly in log space.
const LOG_SPACE_THRESHOLD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TamingConfig {
    pub theta: f64,
    pub rho: f64,
    pub n: u64,
    pub enabled: bool,
}

impl TamingConfig {
    pub fn new(rho: f64, n: u64) -> Result<Self> {
        Self {
            theta: DEFAULT_THETA,
            rho,
            n,
            enabled: true,
        }
        .validated()
    }

    pub fn with_theta(self, theta: f64) -> Result<Self> {
        Self { theta, ..self }.validated()
    }

    pub fn with_enabled(self, enabled: bool) -> Self {
        Self { enabled, ..self }
    }

    fn validated(self) -> Result<Self> {
        if self.n == 0 {
            return Err(Error::parameter("n", "taming parameter must be at least 1"));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::parameter("theta", "must be positive and finite"));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::parameter("rho", "must be finite and non-negative"));
        }
        Ok(self)
    }

    /// `1 / (1 + n^{-θ}|x|^{2ρθ})`, or 1 when taming is disabled.
    ///
    /// With `ρ = 0` the correction is `n^{-θ}` everywhere (`|x|⁰ = 1`).
    pub fn factor(&self, x: &[f64]) -> f64 {
        if !self.enabled {
            return 1.0;
        }
        let exponent = 2.0 * self.rho * self.theta;
        let n = self.n as f64;
        if exponent == 0.0 {
            return 1.0 / (1.0 + n.powf(-self.theta));
        }
        let r = norm(x);
        if r == 0.0 {
            return 1.0;
        }
        let log_term = exponent * r.ln() - self.theta * n.ln();
        if log_term > LOG_SPACE_THRESHOLD {
            (-log_term).exp()
        } else if exponent * r.ln() < LOG_SPACE_THRESHOLD {
            1.0 / (1.0 + n.powf(-self.theta) * r.powf(exponent))
        } else {
            1.0 / (1.0 + log_term.exp())
        }
    }
}

/// An [`OperatorBundle`] with every field multiplied by one shared factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TamedBundle {
    pub factor: f64,
    pub terms: OperatorBundle,
}

impl TamedBundle {
    pub fn zeros(d: usize) -> Self {
        Self {
            factor: 1.0,
            terms: OperatorBundle::zeros(d),
        }
    }

    /// Overwrites `self` with `factor × bundle`, reusing storage.
    pub fn assign(&mut self, bundle: &OperatorBundle, factor: f64) {
        self.factor = factor;
        for (dst, (_, src)) in self.terms.fields_mut().into_iter().zip(bundle.fields()) {
            dst.clear();
            dst.extend(src.iter().map(|v| factor * v));
        }
    }
}

/// Scales `bundle` (evaluated at `x`) by the taming factor at `x`.
pub fn tame(bundle: &OperatorBundle, cfg: &TamingConfig, x: &[f64]) -> TamedBundle {
    let mut out = TamedBundle::zeros(bundle.dim());
    out.assign(bundle, cfg.factor(x));
    out
}

/// Powers of `n` in the linear-growth bounds on each tamed quantity, in
/// [`OperatorBundle::fields`] order. The `σ` bound is on `|σⁿ|²` against
/// `1 + |x|²`.
pub const TAMED_GROWTH_POWERS: [f64; 7] = [0.5, 0.5, 1.0, 0.75, 0.75, 0.5, 0.75];

/// Sup over the grid of each normalised tamed quantity, for one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSweepRow {
    pub n: u64,
    pub sups: [f64; 7],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub quantity: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub quantities: [String; 7],
    pub rows: Vec<BoundSweepRow>,
    /// Largest sup across the sweep; the empirical constant `C`.
    pub constants: [f64; 7],
    pub violations: Vec<BoundViolation>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relative increase of a sup per doubling of `n`, or across the outermost
/// decade of the grid, that counts as unbounded growth.
const GROWTH_TOLERANCE: f64 = 0.05;

/// Sweeps `n` and checks that every tamed quantity stays within
/// `C n^{power} (1 + |x|)` uniformly.
///
/// A quantity violates its bound when its sup grows by more than 5% over the
/// last doubling of `n`, or when the sup is attained in the outermost decade
/// of the grid and exceeds the inner sup by more than 5% (growth in `|x|`).
pub fn check_tamed_growth_bounds(
    problem: &Problem,
    theta: f64,
    enabled: bool,
    grid: &[Vec<f64>],
    n_values: &[u64],
) -> Result<BoundReport> {
    if grid.is_empty() {
        return Err(Error::parameter("grid", "grid must not be empty"));
    }
    if n_values.len() < 2 {
        return Err(Error::parameter(
            "n_values",
            "need at least two values of n",
        ));
    }
    let r_max = grid.iter().map(|x| norm(x)).fold(0.0, f64::max);
    let edge = r_max / 10.0;

    let mut eval = BundleEvaluator::new(problem, BundleTerms::Full);
    let mut bundles = Vec::with_capacity(grid.len());
    for x in grid {
        bundles.push(eval.eval(x)?.clone());
    }

    let mut rows = Vec::with_capacity(n_values.len());
    let mut inner_last = [0.0; 7];
    let mut outer_last = [0.0; 7];
    for &n in n_values {
        let cfg = TamingConfig::new(problem.rho(), n)?
            .with_theta(theta)?
            .with_enabled(enabled);
        let nf = n as f64;
        let mut inner = [0.0f64; 7];
        let mut outer = [0.0f64; 7];
        for (x, bundle) in grid.iter().zip(&bundles) {
            let r = norm(x);
            let factor = cfg.factor(x);
            for (q, (_, values)) in bundle.fields().iter().enumerate() {
                let tamed = factor * norm(values);
                let ratio = if q == 1 {
                    tamed * tamed / (nf.powf(TAMED_GROWTH_POWERS[q]) * (1.0 + r * r))
                } else {
                    tamed / (nf.powf(TAMED_GROWTH_POWERS[q]) * (1.0 + r))
                };
                let slot = if r > edge {
                    &mut outer[q]
                } else {
                    &mut inner[q]
                };
                *slot = slot.max(ratio);
            }
        }
        let mut sups = [0.0; 7];
        for q in 0..7 {
            sups[q] = inner[q].max(outer[q]);
        }
        rows.push(BoundSweepRow { n, sups });
        inner_last = inner;
        outer_last = outer;
    }

    let names = OperatorBundle::zeros(1)
        .fields()
        .map(|(name, _)| format!("{name}^n"));
    let mut constants = [0.0; 7];
    let mut violations = Vec::new();
    let last = &rows[rows.len() - 1];
    let prev = &rows[rows.len() - 2];
    for q in 0..7 {
        constants[q] = rows.iter().map(|r| r.sups[q]).fold(0.0, f64::max);
        if !last.sups[q].is_finite() {
            violations.push(BoundViolation {
                quantity: names[q].clone(),
                reason: "non-finite sup".into(),
            });
        } else if last.sups[q] > prev.sups[q] * (1.0 + GROWTH_TOLERANCE) {
            violations.push(BoundViolation {
                quantity: names[q].clone(),
                reason: format!(
                    "sup grew from {:.6e} to {:.6e} between n = {} and n = {}",
                    prev.sups[q], last.sups[q], prev.n, last.n
                ),
            });
        } else if outer_last[q] > inner_last[q] * (1.0 + GROWTH_TOLERANCE) {
            violations.push(BoundViolation {
                quantity: names[q].clone(),
                reason: format!(
                    "sup {:.6e} attained at the grid edge (inner sup {:.6e}): growth in |x|",
                    outer_last[q], inner_last[q]
                ),
            });
        }
    }
    Ok(BoundReport {
        quantities: names,
        rows,
        constants,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::model::{builtin_problem, eval_operator_bundle, BuiltinKind};

    #[test]
    fn factor_examples() {
        let cfg = TamingConfig::new(2.0, 4).unwrap();
        assert_relative_eq!(cfg.factor(&[2.0]), 1.0 / 9.0, max_relative = 1e-15);
        assert_eq!(cfg.factor(&[0.0]), 1.0);
        let big_n = TamingConfig::new(2.0, 1_000_000).unwrap();
        assert_relative_eq!(
            big_n.factor(&[2.0]),
            1.0 / (1.0 + 6.4e-8),
            max_relative = 1e-15
        );
        assert!((1.0 - big_n.factor(&[2.0]) - 6.4e-8).abs() < 1e-14);
        assert_eq!(cfg.with_enabled(false).factor(&[1e10]), 1.0);
    }

    #[test]
    fn euclidean_norm_in_several_dimensions() {
        let cfg = TamingConfig::new(2.0, 4).unwrap();
        // |(1.2, 1.6)| = 2
        assert_relative_eq!(cfg.factor(&[1.2, 1.6]), 1.0 / 9.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_rho_is_constant_correction() {
        let cfg = TamingConfig::new(0.0, 16).unwrap();
        let expected = 1.0 / (1.0 + 16f64.powf(-1.5));
        assert_eq!(cfg.factor(&[0.0]), expected);
        assert_eq!(cfg.factor(&[123.0]), expected);
    }

    #[test]
    fn log_space_branch_for_huge_states() {
        let cfg = TamingConfig::new(2.0, 1024).unwrap();
        for x in [1e60, 1e150, 1e300] {
            let f = cfg.factor(&[x]);
            assert!(f.is_finite() && f >= 0.0);
            // factor · |x|^{6} ≤ n^{3/2}, in logs
            if f > 0.0 {
                assert!(f.ln() + 6.0 * f64::ln(x) <= 1.5 * 1024f64.ln() + 1e-9);
            }
        }
        // just above the switch both formulas agree
        let x = (705.0 / 6.0f64).exp();
        let log_term = 6.0 * x.ln() - 1.5 * 1024f64.ln();
        assert!(log_term < LOG_SPACE_THRESHOLD);
        assert_relative_eq!(
            cfg.factor(&[x]),
            1.0 / (1.0 + log_term.exp()),
            max_relative = 1e-12
        );
    }

    #[test]
    fn invalid_configs() {
        assert!(TamingConfig::new(2.0, 0).is_err());
        assert!(TamingConfig::new(2.0, 4).unwrap().with_theta(0.0).is_err());
        assert!(TamingConfig::new(-1.0, 4).is_err());
    }

    #[test]
    fn tame_scales_every_field() {
        let p = builtin_problem(BuiltinKind::Ginzburg, 0.02, false).unwrap();
        let bundle = eval_operator_bundle(&p, &[2.0]).unwrap();
        let cfg = TamingConfig::new(2.0, 4).unwrap();
        let tamed = tame(&bundle, &cfg, &[2.0]);
        assert_relative_eq!(tamed.factor, 1.0 / 9.0, max_relative = 1e-15);
        assert_relative_eq!(tamed.terms.l0_b[0], 65.9784 / 9.0, max_relative = 1e-13);
        for ((_, t), (_, u)) in tamed.terms.fields().iter().zip(bundle.fields().iter()) {
            assert_eq!(t[0], tamed.factor * u[0]);
        }
        let off = tame(&bundle, &cfg.with_enabled(false), &[2.0]);
        assert_eq!(off.factor, 1.0);
        assert_eq!(off.terms, bundle);
        let zero = tame(&OperatorBundle::zeros(1), &cfg, &[2.0]);
        assert_eq!(zero.terms, OperatorBundle::zeros(1));
    }

    fn signed_log_grid(max_decade: i32, per_decade: usize) -> Vec<Vec<f64>> {
        let mut grid = vec![vec![0.0]];
        let count = (max_decade + 3) as usize * per_decade;
        for i in 0..=count {
            let r = 10f64.powf(-3.0 + i as f64 / per_decade as f64);
            grid.push(vec![r]);
            grid.push(vec![-r]);
        }
        grid
    }

    fn n_sweep() -> Vec<u64> {
        (4..=14).map(|k| 1u64 << k).collect()
    }

    #[test]
    fn tamed_growth_bounds_hold_for_ginzburg() {
        let p = builtin_problem(BuiltinKind::Ginzburg, 0.02, false).unwrap();
        let report =
            check_tamed_growth_bounds(&p, DEFAULT_THETA, true, &signed_log_grid(6, 40), &n_sweep())
                .unwrap();
        assert!(report.passed(), "{:?}", report.violations);
        let last = &report.rows[report.rows.len() - 1].sups;
        let prev = &report.rows[report.rows.len() - 2].sups;
        for q in 0..7 {
            assert!(last[q] <= prev[q] * 1.05, "quantity {q}");
        }
    }

    #[test]
    fn tamed_growth_bounds_hold_for_holder() {
        let p = builtin_problem(BuiltinKind::Holder, 0.02, false).unwrap();
        let report =
            check_tamed_growth_bounds(&p, DEFAULT_THETA, true, &signed_log_grid(6, 40), &n_sweep())
                .unwrap();
        assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn tamed_growth_bounds_origin_only() {
        let p = builtin_problem(BuiltinKind::Holder, 0.02, false).unwrap();
        let report =
            check_tamed_growth_bounds(&p, DEFAULT_THETA, true, &[vec![0.0]], &n_sweep()).unwrap();
        assert!(report.passed());
        assert_eq!(report.constants[0], 0.0);
    }

    #[test]
    fn untamed_drift_violates_linear_growth() {
        let p = builtin_problem(BuiltinKind::Ginzburg, 0.02, false).unwrap();
        let report = check_tamed_growth_bounds(
            &p,
            DEFAULT_THETA,
            false,
            &signed_log_grid(6, 40),
            &n_sweep(),
        )
        .unwrap();
        assert!(!report.passed());
        assert!(
            report.violations.iter().any(|v| v.quantity == "b^n"),
            "{:?}",
            report.violations
        );
    }

    proptest! {
        #[test]
        fn factor_monotone(a in -1e4f64..1e4, b in -1e4f64..1e4, k in 0u32..20, j in 0u32..20) {
            let (lo, hi) = if a.abs() <= b.abs() { (a, b) } else { (b, a) };
            let (n1, n2) = (1u64 << k.min(j), 1u64 << k.max(j));
            let c1 = TamingConfig::new(2.0, n1).unwrap();
            let c2 = TamingConfig::new(2.0, n2).unwrap();
            prop_assert!(c1.factor(&[hi]) <= c1.factor(&[lo]));
            prop_assert!(c1.factor(&[lo]) <= c2.factor(&[lo]));
            let f = c1.factor(&[lo]);
            prop_assert!(f > 0.0 && f <= 1.0);
            let correction = (n1 as f64).powf(-1.5) * lo.abs().powf(6.0);
            prop_assert!(1.0 - f <= correction * (1.0 + 1e-12) + 1e-16);
        }

        #[test]
        fn factor_stable_for_huge_states(e in 0.0f64..300.0, k in 0u32..30) {
            let cfg = TamingConfig::new(4.0, 1u64 << k).unwrap();
            let x = 10f64.powf(e);
            let f = cfg.factor(&[x]);
            prop_assert!(f.is_finite() && (0.0..=1.0).contains(&f));
            if f >= f64::MIN_POSITIVE {
                prop_assert!(f.ln() + 12.0 * x.ln() <= 1.5 * ((1u64 << k) as f64).ln() + 1e-9);
            }
        }
    }
}
