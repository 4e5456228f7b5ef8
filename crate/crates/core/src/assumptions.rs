//! Admissible parameter ranges for the shipped superlinear problems and grid
//! checks of the growth, monotonicity and smoothness assumptions A-1 … A-5.
//!
//! Each check evaluates a ratio over a grid, reports its supremum as the
//! fitted constant `K`, and fails when the supremum is driven by the grid
//! edge (the last decade of magnitudes) or by the near-diagonal limit
//! (the smallest pair separation), i.e. when no finite `K` is in sight.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{norm, BuiltinKind, Problem};

/// Smallest and largest magnitude of the default grids.
pub const GRID_MIN: f64 = 1e-3;
pub const GRID_MAX: f64 = 1e3;
pub const POINTS_PER_SIGN: usize = 400;
pub const RANDOM_PAIRS: usize = 10_000;
pub const PAIR_SEED: u64 = 0x5EED_A55E;
/// Relative growth of the supremum tolerated across the last decade.
pub const GROWTH_TOLERANCE: f64 = 0.01;
pub const RESIDUAL_SLACK: f64 = 1e-9;
/// Default `p₁` for the monotonicity check.
pub const DEFAULT_P1: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRanges {
    pub kind: BuiltinKind,
    pub rho: f64,
    /// `2(5ρ + 1)`.
    pub min_p0: f64,
    /// Largest `|ξ|` compatible with `p₀ = min_p0`.
    pub xi_max: f64,
    pub p0_interval: String,
    pub p1_interval: String,
}

impl ParameterRanges {
    /// Upper end of the admissible `p₀` interval at noise level `ξ`.
    pub fn p0_max(&self, xi: f64) -> f64 {
        2.0 / (xi * xi) + 1.0
    }

    /// Upper end of the admissible `p₁` interval at noise level `ξ`.
    pub fn p1_max(&self, xi: f64) -> f64 {
        match self.kind {
            BuiltinKind::Holder => 4.0 / (5.0 * xi * xi) + 1.0,
            _ => 1.0 / (xi * xi) + 1.0,
        }
    }
}

/// Lower bound `2(5ρ + 1)` on the moment exponent `p₀`.
pub fn min_p0(rho: f64) -> f64 {
    2.0 * (5.0 * rho + 1.0)
}

pub fn parameter_ranges(kind: BuiltinKind) -> Result<ParameterRanges> {
    let (rho, p1_interval) = match kind {
        BuiltinKind::Ginzburg => (2.0, "(2, 1/ξ² + 1]"),
        BuiltinKind::Holder => (4.0, "(2, 4/(5ξ²) + 1]"),
        BuiltinKind::Ou => {
            return Err(Error::parameter(
                "problem",
                "parameter ranges are only tabulated for ginzburg and holder",
            ))
        }
    };
    let p0 = min_p0(rho);
    Ok(ParameterRanges {
        kind,
        rho,
        min_p0: p0,
        xi_max: (2.0 / (p0 - 1.0)).sqrt(),
        p0_interval: format!("[{p0}, 2/ξ² + 1]"),
        p1_interval: p1_interval.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionEntry {
    pub id: String,
    pub passed: bool,
    /// Exponent the check was run with (`p₀` for A-2, `p₁` for A-3).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exponent: Option<f64>,
    /// Fitted constant: supremum of the ratio over the grid.
    pub constant: f64,
    /// `sup(LHS − K·weight)` over the grid.
    pub residual: f64,
    pub worst_points: Vec<Vec<f64>>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub problem: String,
    pub rho: f64,
    pub beta: f64,
    pub p0: f64,
    pub p1: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ranges: Option<ParameterRanges>,
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn entry(&self, id: &str) -> Option<&AssumptionEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// Where a pair of the A-3/A-4/A-5 grids comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFamily {
    Random,
    /// `(c, c + 10^k u)` around a centre `c`.
    NearDiagonal {
        decade: i32,
    },
    /// `(x, −x)`.
    Antisymmetric,
    /// `(0, h u)`.
    Origin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub family: PairFamily,
}

/// `0` and `±` log-spaced magnitudes in `[lo, hi]`, ascending.
pub fn signed_log_grid(lo: f64, hi: f64, per_sign: usize) -> Vec<f64> {
    let mags = log_spaced(lo, hi, per_sign);
    let mut out: Vec<f64> = mags.iter().rev().map(|m| -m).collect();
    out.push(0.0);
    out.extend(mags);
    out
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)
            }
        })
        .collect()
}

fn diagonal_direction(d: usize) -> Vec<f64> {
    vec![1.0 / (d as f64).sqrt(); d]
}

/// Default point grid for A-2: the signed log grid along the diagonal.
pub fn default_point_grid(d: usize) -> Vec<Vec<f64>> {
    let u = diagonal_direction(d);
    signed_log_grid(GRID_MIN, GRID_MAX, POINTS_PER_SIGN)
        .into_iter()
        .map(|s| u.iter().map(|ui| s * ui).collect())
        .collect()
}

/// Default pair grid for A-3 … A-5: seeded random pairs plus near-diagonal,
/// antisymmetric and origin-anchored families.
pub fn default_pair_grid(d: usize) -> Vec<Pair> {
    let mut rng = StdRng::seed_from_u64(PAIR_SEED);
    let random_point = |rng: &mut StdRng| -> Vec<f64> {
        let mag = 10f64.powf(rng.random_range(GRID_MIN.log10()..=GRID_MAX.log10()));
        let dir: Vec<f64> = if d == 1 {
            vec![if rng.random::<bool>() { 1.0 } else { -1.0 }]
        } else {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let r = norm(&v);
            v.into_iter().map(|c| c / r).collect()
        };
        dir.into_iter().map(|c| c * mag).collect()
    };
    let mut pairs = Vec::new();
    for _ in 0..RANDOM_PAIRS {
        let x = random_point(&mut rng);
        let y = random_point(&mut rng);
        pairs.push(Pair {
            x,
            y,
            family: PairFamily::Random,
        });
    }

    let u = diagonal_direction(d);
    let scaled = |s: f64| -> Vec<f64> { u.iter().map(|c| s * c).collect() };
    for c in signed_log_grid(GRID_MIN, GRID_MAX, 30) {
        for decade in -6..=0 {
            let delta = 10f64.powi(decade);
            pairs.push(Pair {
                x: scaled(c),
                y: scaled(c + delta),
                family: PairFamily::NearDiagonal { decade },
            });
        }
    }
    for m in log_spaced(GRID_MIN, GRID_MAX, 60) {
        pairs.push(Pair {
            x: scaled(m),
            y: scaled(-m),
            family: PairFamily::Antisymmetric,
        });
        pairs.push(Pair {
            x: scaled(0.0),
            y: scaled(m),
            family: PairFamily::Origin,
        });
    }
    pairs
}

/// A-1: the initial value is deterministic, so every moment is finite.
pub fn check_a1(problem: &Problem) -> AssumptionEntry {
    AssumptionEntry {
        id: "A-1".into(),
        passed: problem.x0().iter().all(|v| v.is_finite()),
        exponent: None,
        constant: norm(problem.x0()),
        residual: 0.0,
        worst_points: Vec::new(),
        note: "deterministic initial value".into(),
    }
}

/// One grid evaluation: the left-hand side and the weight it is compared to.
struct Sample {
    lhs: f64,
    weight: f64,
    edge: bool,
    near_decade: Option<i32>,
    points: Vec<Vec<f64>>,
}

fn summarize(id: &str, exponent: Option<f64>, samples: &[Sample]) -> AssumptionEntry {
    let ratio = |s: &Sample| s.lhs / s.weight;
    let mut sup_all = f64::NEG_INFINITY;
    let mut sup_inner = f64::NEG_INFINITY;
    let mut worst = None;
    let mut nonfinite = None;
    for (i, s) in samples.iter().enumerate() {
        let r = ratio(s);
        if !r.is_finite() {
            nonfinite.get_or_insert(i);
            continue;
        }
        if r > sup_all {
            sup_all = r;
            worst = Some(i);
        }
        if !s.edge {
            sup_inner = sup_inner.max(r);
        }
    }
    let decade_sup = |k: i32| {
        samples
            .iter()
            .filter(|s| s.near_decade == Some(k))
            .map(ratio)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let grows =
        |outer: f64, inner: f64| outer > inner + GROWTH_TOLERANCE * inner.abs() + RESIDUAL_SLACK;

    let mut notes = Vec::new();
    let mut worst_points = Vec::new();
    if let Some(i) = nonfinite {
        notes.push("non-finite ratio on the grid".to_string());
        worst_points.extend(samples[i].points.iter().cloned());
    }
    if sup_inner.is_finite() && grows(sup_all, sup_inner) {
        notes.push(format!(
            "edge growth: sup rises from {sup_inner:.6e} to {sup_all:.6e} in the last decade"
        ));
    }
    let finest = samples.iter().filter_map(|s| s.near_decade).min();
    if let Some(k) = finest {
        let (fine, coarse) = (decade_sup(k), decade_sup(k + 1));
        if coarse.is_finite() && grows(fine, coarse) {
            notes.push(format!(
                "near-diagonal growth: sup rises from {coarse:.6e} to {fine:.6e} at separation 1e{k}"
            ));
        }
    }
    if let Some(i) = worst {
        worst_points.extend(samples[i].points.iter().cloned());
    }
    let constant = sup_all;
    let residual = samples
        .iter()
        .map(|s| s.lhs - constant * s.weight)
        .fold(f64::NEG_INFINITY, f64::max);
    let passed = notes.is_empty() && residual <= RESIDUAL_SLACK;
    if passed {
        notes.push("bounded on the grid".into());
    }
    AssumptionEntry {
        id: id.into(),
        passed,
        exponent,
        constant,
        residual,
        worst_points,
        note: notes.join("; "),
    }
}

/// A-2: `2⟨x, b(x)⟩ + (p₀ − 1)|σ(x)|² ≤ K(1 + |x|²)`.
pub fn check_a2(problem: &Problem, p0: f64, grid: &[Vec<f64>]) -> Result<AssumptionEntry> {
    let span = grid.iter().map(|x| norm(x)).fold(0.0, f64::max);
    if span < GRID_MAX * (1.0 - 1e-12) {
        return Err(Error::parameter(
            "grid",
            format!("A-2 grid must reach |x| = {GRID_MAX}, reaches {span}"),
        ));
    }
    let samples: Vec<Sample> = grid
        .iter()
        .map(|x| {
            let b = problem.drift_at(x);
            let s = problem.diffusion_at(x);
            let xb: f64 = x.iter().zip(&b).map(|(a, c)| a * c).sum();
            let s2: f64 = s.iter().map(|v| v * v).sum();
            let r = norm(x);
            Sample {
                lhs: 2.0 * xb + (p0 - 1.0) * s2,
                weight: 1.0 + r * r,
                edge: r > GRID_MAX / 10.0,
                near_decade: None,
                points: vec![x.clone()],
            }
        })
        .collect();
    Ok(summarize("A-2", Some(p0), &samples))
}

fn pair_meta(pair: &Pair) -> Option<(f64, bool, Option<i32>)> {
    let diff: Vec<f64> = pair.x.iter().zip(&pair.y).map(|(a, b)| a - b).collect();
    let delta = norm(&diff);
    if delta == 0.0 {
        return None;
    }
    let edge = norm(&pair.x).max(norm(&pair.y)) > GRID_MAX / 10.0;
    let decade = match pair.family {
        PairFamily::NearDiagonal { decade } => Some(decade),
        _ => None,
    };
    Some((delta, edge, decade))
}

/// A-3: `2⟨x − x̄, b(x) − b(x̄)⟩ + (p₁ − 1)|σ(x) − σ(x̄)|² ≤ K|x − x̄|²`.
pub fn check_a3(problem: &Problem, p1: f64, pairs: &[Pair]) -> Result<AssumptionEntry> {
    let samples: Vec<Sample> = pairs
        .iter()
        .filter_map(|pair| {
            let (delta, edge, near_decade) = pair_meta(pair)?;
            let (bx, by) = (problem.drift_at(&pair.x), problem.drift_at(&pair.y));
            let (sx, sy) = (problem.diffusion_at(&pair.x), problem.diffusion_at(&pair.y));
            let inner: f64 = (0..pair.x.len())
                .map(|i| (pair.x[i] - pair.y[i]) * (bx[i] - by[i]))
                .sum();
            let ds2: f64 = sx.iter().zip(&sy).map(|(a, b)| (a - b) * (a - b)).sum();
            Some(Sample {
                lhs: 2.0 * inner + (p1 - 1.0) * ds2,
                weight: delta * delta,
                edge,
                near_decade,
                points: vec![pair.x.clone(), pair.y.clone()],
            })
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::parameter("pairs", "no pair with x ≠ x̄"));
    }
    Ok(summarize("A-3", Some(p1), &samples))
}

/// Largest Frobenius distance between matching Hessians of two stacks.
fn hessian_gap(d: usize, a: &[f64], b: &[f64]) -> f64 {
    a.chunks(d * d)
        .zip(b.chunks(d * d))
        .map(|(ha, hb)| {
            ha.iter()
                .zip(hb)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// A-4 (drift Hessians, Lipschitz with weight `(1 + |x| + |x̄|)^{ρ−2}`) and
/// A-5 (diffusion Hessians, `β`-Hölder with weight `(1 + |x| + |x̄|)^{(ρ−4)/2}`).
pub fn check_a4_a5(problem: &Problem, pairs: &[Pair]) -> Result<[AssumptionEntry; 2]> {
    let d = problem.dim();
    let coeffs = problem.coefficients();
    let (rho, beta) = (problem.rho(), problem.beta());
    let mut hx = vec![0.0; d * d * d];
    let mut hy = vec![0.0; d * d * d];
    let mut gx = vec![0.0; d * d];
    let mut gy = vec![0.0; d * d];
    let mut a4 = Vec::with_capacity(pairs.len());
    let mut a5 = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let Some((delta, edge, near_decade)) = pair_meta(pair) else {
            continue;
        };
        let scale = 1.0 + norm(&pair.x) + norm(&pair.y);
        coeffs.drift_hessians(&pair.x, &mut hx);
        coeffs.drift_hessians(&pair.y, &mut hy);
        coeffs.diffusion_hessians(&pair.x, &mut gx);
        coeffs.diffusion_hessians(&pair.y, &mut gy);
        let points = vec![pair.x.clone(), pair.y.clone()];
        a4.push(Sample {
            lhs: hessian_gap(d, &hx, &hy),
            weight: scale.powf(rho - 2.0) * delta,
            edge,
            near_decade,
            points: points.clone(),
        });
        a5.push(Sample {
            lhs: hessian_gap(d, &gx, &gy),
            weight: scale.powf((rho - 4.0) / 2.0) * delta.powf(beta),
            edge,
            near_decade,
            points,
        });
    }
    if a4.is_empty() {
        return Err(Error::parameter("pairs", "no pair with x ≠ x̄"));
    }
    Ok([summarize("A-4", None, &a4), summarize("A-5", None, &a5)])
}

/// Runs A-1 … A-5 on the default grids.
///
/// `p0` defaults to `2(5ρ + 1)` and `p1` to [`DEFAULT_P1`].
pub fn check_all(problem: &Problem, p0: Option<f64>, p1: Option<f64>) -> Result<AssumptionReport> {
    let p0 = p0.unwrap_or_else(|| min_p0(problem.rho()));
    let p1 = p1.unwrap_or(DEFAULT_P1);
    let ranges = match problem.builtin() {
        Some((kind, _)) if kind != BuiltinKind::Ou => Some(parameter_ranges(kind)?),
        _ => None,
    };
    let d = problem.dim();
    let points = default_point_grid(d);
    let pairs = default_pair_grid(d);
    let [a4, a5] = check_a4_a5(problem, &pairs)?;
    Ok(AssumptionReport {
        problem: problem.name().to_string(),
        rho: problem.rho(),
        beta: problem.beta(),
        p0,
        p1,
        ranges,
        entries: vec![
            check_a1(problem),
            check_a2(problem, p0, &points)?,
            check_a3(problem, p1, &pairs)?,
            a4,
            a5,
        ],
    })
}
