//! Monte Carlo strong errors against a coupled fine-grid reference, rate
//! regression, and terminal moment probes.
//!
//! Paths are independent work items run on the current rayon pool. Each
//! worker writes into its own slot and the reduction runs sequentially in
//! path order, so results do not depend on the number of threads.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::generate_path;
use crate::error::{Error, Result};
use crate::model::Problem;
use crate::schemes::{PathOutcome, PathSolver, Scheme, SchemeKind};

/// Default coarse grid `2⁴ … 2⁹`.
pub const DEFAULT_N_LIST: [usize; 6] = [16, 32, 64, 128, 256, 512];
pub const DEFAULT_N_REF: usize = 1 << 13;
pub const DEFAULT_PATHS: usize = 1000;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    #[serde(rename = "N")]
    pub n: usize,
    /// `(E|X_T^{ref} − X_T^{N}|²)^{1/2}` over non-exploded paths.
    pub rms_error: f64,
    /// Monte Carlo standard error of the mean squared error.
    pub std_error: f64,
    pub explosions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub problem: String,
    pub scheme: SchemeKind,
    pub taming: bool,
    pub n_list: Vec<usize>,
    pub n_ref: usize,
    pub paths: usize,
    pub master_seed: u64,
    pub rows: Vec<ErrorRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongErrorConfig {
    pub n_list: Vec<usize>,
    pub n_ref: usize,
    pub paths: usize,
    pub master_seed: u64,
}

impl Default for StrongErrorConfig {
    fn default() -> Self {
        Self {
            n_list: DEFAULT_N_LIST.to_vec(),
            n_ref: DEFAULT_N_REF,
            paths: DEFAULT_PATHS,
            master_seed: DEFAULT_SEED,
        }
    }
}

impl StrongErrorConfig {
    fn validate(&self) -> Result<Vec<usize>> {
        if self.paths < 2 {
            return Err(Error::parameter("paths", "need at least two paths"));
        }
        if self.n_ref == 0 {
            return Err(Error::parameter(
                "n_ref",
                "reference grid needs at least one step",
            ));
        }
        let mut n_list = self.n_list.clone();
        n_list.sort_unstable();
        n_list.dedup();
        for &n in &n_list {
            if n == 0 || !self.n_ref.is_multiple_of(n) {
                return Err(Error::parameter(
                    "n_list",
                    format!("N = {n} does not divide N_ref = {}", self.n_ref),
                ));
            }
        }
        Ok(n_list)
    }
}

/// Estimates the strong error of `scheme` at each coarse step count.
///
/// Every path draws its increments once on the reference grid; the
/// reference solution is the same scheme on that grid and each coarse run
/// consumes the aggregated increments of the same path.
pub fn strong_error(
    problem: &Problem,
    scheme: Scheme,
    cfg: &StrongErrorConfig,
) -> Result<ErrorTable> {
    let n_list = cfg.validate()?;
    let per_path: Vec<Vec<Option<f64>>> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| path_errors(problem, scheme, cfg, &n_list, i as u64))
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(n_list.len());
    for (j, &n) in n_list.iter().enumerate() {
        let squared: Vec<f64> = per_path.iter().filter_map(|errs| errs[j]).collect();
        let explosions = cfg.paths - squared.len();
        if squared.is_empty() {
            return Err(Error::Estimation { steps: n });
        }
        let (mean, std_error) = mean_and_std_error(&squared);
        rows.push(ErrorRow {
            n,
            rms_error: mean.sqrt(),
            std_error,
            explosions,
        });
    }
    Ok(ErrorTable {
        problem: problem.name().to_string(),
        scheme: scheme.kind,
        taming: scheme.taming,
        n_list,
        n_ref: cfg.n_ref,
        paths: cfg.paths,
        master_seed: cfg.master_seed,
        rows,
    })
}

fn path_errors(
    problem: &Problem,
    scheme: Scheme,
    cfg: &StrongErrorConfig,
    n_list: &[usize],
    path: u64,
) -> Result<Vec<Option<f64>>> {
    let fine = generate_path(cfg.master_seed, path, cfg.n_ref, problem.horizon())?;
    let mut solver = PathSolver::new(problem, scheme);
    let reference = solver.solve(&fine, false)?;
    let Some(reference) = reference.terminal().map(<[f64]>::to_vec) else {
        return Ok(vec![None; n_list.len()]);
    };
    n_list
        .iter()
        .map(|&n| {
            let coarse = fine.coarsen(cfg.n_ref / n)?;
            Ok(solver.solve(&coarse, false)?.terminal().map(|x| {
                x.iter()
                    .zip(&reference)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            }))
        })
        .collect()
}

fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares fit of `log₂(rms_error)` against `log₂(N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Convergence rate, reported positive (minus the regression slope).
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn fit_rate(table: &ErrorTable) -> Result<RateFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for row in &table.rows {
        if row.rms_error > 0.0 && row.rms_error.is_finite() {
            xs.push((row.n as f64).log2());
            ys.push(row.rms_error.log2());
        } else {
            warn!(
                "excluding N = {} from the rate fit (rms_error = {})",
                row.n, row.rms_error
            );
        }
    }
    if xs.len() < 3 {
        return Err(Error::Fit { usable: xs.len() });
    }
    let (coef, intercept, r_squared) = least_squares(&xs, &ys);
    Ok(RateFit {
        slope: -coef,
        intercept,
        r_squared,
        points: xs.len(),
    })
}

/// Returns `(slope, intercept, r²)` of `y ≈ slope·x + intercept`.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    (slope, intercept, r_squared)
}

/// Runs `paths` independent paths at one step count.
pub fn terminal_states(
    problem: &Problem,
    scheme: Scheme,
    steps: usize,
    paths: usize,
    master_seed: u64,
    record_trajectory: bool,
) -> Result<Vec<PathOutcome>> {
    (0..paths)
        .into_par_iter()
        .map(|i| {
            let incs = generate_path(master_seed, i as u64, steps, problem.horizon())?;
            PathSolver::new(problem, scheme).solve(&incs, record_trajectory)
        })
        .collect()
}

/// Sample statistics of one state component over the completed paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalSummary {
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    pub completed: usize,
    pub explosions: usize,
}

pub fn terminal_summary(outcomes: &[PathOutcome], component: usize) -> TerminalSummary {
    let values: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.terminal().map(|x| x[component]))
        .collect();
    let explosions = outcomes.len() - values.len();
    let (mean, std_error) = if values.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        mean_and_std_error(&values)
    };
    let variance = std_error * std_error * values.len() as f64;
    TerminalSummary {
        mean,
        variance,
        std_error,
        completed: values.len(),
        explosions,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    #[serde(rename = "N")]
    pub n: usize,
    /// Empirical `E|X_T|^p`; `+∞` when any path exploded.
    pub moment: f64,
    pub explosions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub problem: String,
    pub scheme: SchemeKind,
    pub taming: bool,
    pub p: u32,
    pub paths: usize,
    pub master_seed: u64,
    pub rows: Vec<MomentRow>,
}

impl MomentTable {
    /// Ratio of the largest to the smallest row moment.
    pub fn spread(&self) -> f64 {
        let max = self
            .rows
            .iter()
            .map(|r| r.moment)
            .fold(f64::NEG_INFINITY, f64::max);
        let min = self
            .rows
            .iter()
            .map(|r| r.moment)
            .fold(f64::INFINITY, f64::min);
        max / min
    }
}

/// Empirical `p`-th absolute moments of `X_T` for each step count.
pub fn moment_probe(
    problem: &Problem,
    scheme: Scheme,
    p: u32,
    n_list: &[usize],
    paths: usize,
    master_seed: u64,
) -> Result<MomentTable> {
    if p == 0 || !p.is_multiple_of(2) {
        return Err(Error::parameter(
            "p",
            format!("moment order must be even and positive, got {p}"),
        ));
    }
    if paths < 100 {
        return Err(Error::parameter(
            "paths",
            "moment probes need at least 100 paths",
        ));
    }
    let mut n_list = n_list.to_vec();
    n_list.sort_unstable();
    n_list.dedup();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in &n_list {
        if n == 0 {
            return Err(Error::parameter("n_list", "step counts must be positive"));
        }
        let outcomes = terminal_states(problem, scheme, n, paths, master_seed, false)?;
        let explosions = outcomes.iter().filter(|o| o.exploded()).count();
        let moment = if explosions > 0 {
            f64::INFINITY
        } else {
            let sum: f64 = outcomes
                .iter()
                .filter_map(PathOutcome::terminal)
                .map(|x| {
                    let r2: f64 = x.iter().map(|v| v * v).sum();
                    r2.powi(p as i32 / 2)
                })
                .sum();
            sum / paths as f64
        };
        rows.push(MomentRow {
            n,
            moment,
            explosions,
        });
    }
    Ok(MomentTable {
        problem: problem.name().to_string(),
        scheme: scheme.kind,
        taming: scheme.taming,
        p,
        paths,
        master_seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::model::{builtin_problem, BuiltinKind};

    fn table(points: &[(usize, f64)]) -> ErrorTable {
        ErrorTable {
            problem: "synthetic".into(),
            scheme: SchemeKind::Taylor15,
            taming: true,
            n_list: points.iter().map(|p| p.0).collect(),
            n_ref: 1024,
            paths: 10,
            master_seed: 0,
            rows: points
                .iter()
                .map(|&(n, e)| ErrorRow {
                    n,
                    rms_error: e,
                    std_error: 0.0,
                    explosions: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn exact_power_law_fit() {
        let rows: Vec<_> = [16usize, 32, 64, 128]
            .iter()
            .map(|&n| (n, 0.7 * (n as f64).powf(-1.5)))
            .collect();
        let fit = fit_rate(&table(&rows)).unwrap();
        assert_relative_eq!(fit.slope, 1.5, max_relative = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, max_relative = 1e-12);
        assert_relative_eq!(fit.intercept, 0.7f64.log2(), max_relative = 1e-12);
        assert_eq!(fit.points, 4);
    }

    #[test]
    fn zero_rows_excluded_and_too_few_rejected() {
        let fit = fit_rate(&table(&[(16, 0.1), (32, 0.05), (64, 0.025), (1024, 0.0)])).unwrap();
        assert_eq!(fit.points, 3);
        assert_relative_eq!(fit.slope, 1.0, max_relative = 1e-12);
        assert!(matches!(
            fit_rate(&table(&[(16, 0.1), (32, 0.05), (1024, 0.0)])),
            Err(Error::Fit { usable: 2 })
        ));
    }

    #[test]
    fn reference_row_is_exactly_zero() {
        let p = builtin_problem(BuiltinKind::Ginzburg, 0.02, false).unwrap();
        let cfg = StrongErrorConfig {
            n_list: vec![64, 16, 256],
            n_ref: 256,
            paths: 8,
            master_seed: 42,
        };
        let t = strong_error(&p, Scheme::tamed(SchemeKind::Taylor15), &cfg).unwrap();
        assert_eq!(t.n_list, vec![16, 64, 256]);
        assert_eq!(t.rows[2].rms_error, 0.0);
        assert!(t.rows[0].rms_error > t.rows[1].rms_error);
        assert!(t.rows.iter().all(|r| r.explosions == 0));
    }

    #[test]
    fn invalid_grids_rejected() {
        let p = builtin_problem(BuiltinKind::Ou, 0.1, false).unwrap();
        let s = Scheme::tamed(SchemeKind::TamedEuler);
        let bad = StrongErrorConfig {
            n_list: vec![24],
            n_ref: 64,
            paths: 4,
            master_seed: 0,
        };
        assert!(strong_error(&p, s, &bad).is_err());
        let one_path = StrongErrorConfig {
            n_list: vec![16],
            n_ref: 64,
            paths: 1,
            master_seed: 0,
        };
        assert!(strong_error(&p, s, &one_path).is_err());
    }

    #[test]
    fn untamed_explosions_are_counted() {
        let p = builtin_problem(BuiltinKind::Ginzburg, 0.02, false)
            .unwrap()
            .with_x0(vec![10.0])
            .unwrap();
        let cfg = StrongErrorConfig {
            n_list: vec![8],
            n_ref: 64,
            paths: 20,
            master_seed: 1,
        };
        match strong_error(&p, Scheme::untamed(SchemeKind::Taylor15), &cfg) {
            Err(Error::Estimation { steps: 8 }) => {}
            Ok(t) => assert!(t.rows[0].explosions > 0),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn moment_probe_validates_inputs() {
        let p = builtin_problem(BuiltinKind::Ou, 0.1, false).unwrap();
        let s = Scheme::tamed(SchemeKind::Taylor15);
        assert!(moment_probe(&p, s, 3, &[8], 100, 0).is_err());
        assert!(moment_probe(&p, s, 2, &[8], 99, 0).is_err());
        let t = moment_probe(&p, s, 2, &[8], 100, 0).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.rows[0].moment.is_finite());
    }

    #[test]
    fn summary_of_constant_outcomes() {
        let outcomes = vec![
            PathOutcome::Completed {
                terminal: vec![2.0],
                trajectory: None,
            },
            PathOutcome::Completed {
                terminal: vec![4.0],
                trajectory: None,
            },
            PathOutcome::Exploded { step: 3 },
        ];
        let s = terminal_summary(&outcomes, 0);
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.variance, 2.0);
        assert_eq!(s.completed, 2);
        assert_eq!(s.explosions, 1);
    }
}
