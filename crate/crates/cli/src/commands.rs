use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use log::info;
use serde::Serialize;
use tamed_taylor::assumptions::{check_all, AssumptionReport};
use tamed_taylor::experiments::{
    fit_rate, moment_probe, strong_error, terminal_states, terminal_summary, MomentTable,
    StrongErrorConfig,
};
use tamed_taylor::output::{
    error_table_csv, fmt_f64, log2_dat, metadata_lines, moment_table_csv, terminal_states_csv,
    to_json, trajectories_csv, write_text, Format, RateReport,
};
use tamed_taylor::{PathOutcome, Scheme};

use crate::config::{default_n_list, CommandDefaults, CommonArgs, RunConfig, DEFAULT_PATHS_RATE};

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building the worker pool")?
            .install(f)),
        None => Ok(f()),
    }
}

fn write(cfg: &RunConfig, ext: &str, contents: &str) -> Result<()> {
    let path = cfg.out_path(ext);
    write_text(&path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn rate(args: &CommonArgs, threads: Option<usize>) -> Result<bool> {
    let cfg = RunConfig::resolve(
        args,
        threads,
        CommandDefaults {
            name: "rate",
            n_list: default_n_list(),
            paths: DEFAULT_PATHS_RATE,
        },
    )?;
    let problem = cfg.build_problem()?;
    let experiment = StrongErrorConfig {
        n_list: cfg.n_list.clone(),
        n_ref: cfg.n_ref,
        paths: cfg.paths,
        master_seed: cfg.seed,
    };
    info!(
        "strong errors for {} with {} over {} paths",
        problem.name(),
        cfg.scheme,
        cfg.paths
    );
    let table = in_pool(cfg.threads, || {
        strong_error(&problem, cfg.scheme(), &experiment)
    })??;
    let fit = fit_rate(&table)?;

    println!(
        "{:>6}  {:>24}  {:>24}  {:>10}",
        "N", "rms_error", "std_error", "explosions"
    );
    for row in &table.rows {
        println!(
            "{:>6}  {:>24}  {:>24}  {:>10}",
            row.n,
            fmt_f64(row.rms_error),
            fmt_f64(row.std_error),
            row.explosions
        );
    }
    println!(
        "slope {:.4}  theoretical 1 + β/2 = {:.4}  (r² = {:.4}, {} points)",
        fit.slope,
        problem.theoretical_rate(),
        fit.r_squared,
        fit.points
    );

    let meta = cfg.metadata();
    let report = RateReport::new(table)
        .with_fit(fit)
        .with_config(cfg.to_json());
    if cfg.format != Some(Format::Json) {
        write(
            &cfg,
            "csv",
            &error_table_csv(&report.table, report.rate_fit.as_ref(), &meta),
        )?;
    }
    if cfg.format != Some(Format::Csv) {
        write(&cfg, "json", &to_json(&report)?)?;
    }
    write(&cfg, "log2.dat", &log2_dat(&report.table, &meta))?;
    Ok(true)
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    config: serde_json::Value,
    steps: usize,
    explosions: usize,
    outcomes: &'a [PathOutcome],
}

pub fn simulate(args: &CommonArgs, threads: Option<usize>, trajectory: bool) -> Result<bool> {
    let cfg = RunConfig::resolve(
        args,
        threads,
        CommandDefaults {
            name: "simulate",
            n_list: vec![512],
            paths: DEFAULT_PATHS_RATE,
        },
    )?;
    let [steps] = cfg.n_list[..] else {
        bail!("simulate runs a single step count; pass one value to --n-list");
    };
    let problem = cfg.build_problem()?;
    let outcomes = in_pool(cfg.threads, || {
        terminal_states(
            &problem,
            cfg.scheme(),
            steps,
            cfg.paths,
            cfg.seed,
            trajectory,
        )
    })??;
    let summary = terminal_summary(&outcomes, 0);
    println!(
        "{} paths, N = {steps}: {} exploded; mean x0 {:.6}, variance {:.6}",
        outcomes.len(),
        summary.explosions,
        summary.mean,
        summary.variance
    );

    let mut meta = cfg.metadata();
    meta.push(("steps".into(), steps.to_string()));
    match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            write(
                &cfg,
                "csv",
                &terminal_states_csv(&outcomes, problem.dim(), &meta),
            )?;
            if trajectory {
                write(
                    &cfg,
                    "trajectory.csv",
                    &trajectories_csv(&outcomes, problem.dim(), &meta),
                )?;
            }
        }
        Format::Json => {
            let report = SimulateReport {
                config: cfg.to_json(),
                steps,
                explosions: summary.explosions,
                outcomes: &outcomes,
            };
            write(&cfg, "json", &to_json(&report)?)?;
        }
    }
    Ok(true)
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    config: serde_json::Value,
    #[serde(flatten)]
    report: &'a AssumptionReport,
    passed: bool,
}

pub fn check(
    args: &CommonArgs,
    threads: Option<usize>,
    p0: Option<f64>,
    p1: Option<f64>,
) -> Result<bool> {
    let cfg = RunConfig::resolve(
        args,
        threads,
        CommandDefaults {
            name: "check",
            n_list: default_n_list(),
            paths: DEFAULT_PATHS_RATE,
        },
    )?;
    let problem = cfg.build_problem()?;
    let report = check_all(&problem, p0.or(cfg.file.p0), p1.or(cfg.file.p1))?;
    let passed = report.passed();

    println!(
        "problem {} (ρ = {}, β = {})",
        report.problem, report.rho, report.beta
    );
    if let Some(r) = &report.ranges {
        println!(
            "min_p0={}  xi_max={:.4}  p0 ∈ {}  p1 ∈ {}",
            r.min_p0, r.xi_max, r.p0_interval, r.p1_interval
        );
    }
    println!("p0 = {}, p1 = {}", report.p0, report.p1);
    for e in &report.entries {
        println!(
            "{} {}  K = {:.6e}  residual = {:.3e}  {}",
            e.id,
            if e.passed { "PASS" } else { "FAIL" },
            e.constant,
            e.residual,
            e.note
        );
    }

    match cfg.format.unwrap_or(Format::Json) {
        Format::Json => {
            let out = CheckOutput {
                config: cfg.to_json(),
                report: &report,
                passed,
            };
            write(&cfg, "json", &to_json(&out)?)?;
        }
        Format::Csv => {
            let mut meta = cfg.metadata();
            meta.push(("p0".into(), report.p0.to_string()));
            meta.push(("p1".into(), report.p1.to_string()));
            let mut text = metadata_lines(&meta);
            text.push_str("id,passed,constant,residual,note\n");
            for e in &report.entries {
                let _ = writeln!(
                    text,
                    "{},{},{},{},\"{}\"",
                    e.id,
                    e.passed,
                    fmt_f64(e.constant),
                    fmt_f64(e.residual),
                    e.note.replace('"', "'")
                );
            }
            write(&cfg, "csv", &text)?;
        }
    }
    Ok(passed)
}

fn contrast_csv(main: &MomentTable, other: &MomentTable, meta: &[(String, String)]) -> String {
    let (tamed, untamed) = if main.taming {
        (main, other)
    } else {
        (other, main)
    };
    let mut out = metadata_lines(meta);
    out.push_str("N,moment_tamed,explosions_tamed,moment_untamed,explosions_untamed\n");
    for (t, u) in tamed.rows.iter().zip(&untamed.rows) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            t.n,
            fmt_f64(t.moment),
            t.explosions,
            fmt_f64(u.moment),
            u.explosions
        );
    }
    out
}

#[derive(Serialize)]
struct MomentsOutput<'a> {
    config: serde_json::Value,
    #[serde(flatten)]
    table: &'a MomentTable,
    #[serde(skip_serializing_if = "Option::is_none")]
    contrast: Option<&'a MomentTable>,
}

pub fn moments(
    args: &CommonArgs,
    threads: Option<usize>,
    p: Option<u32>,
    contrast: bool,
) -> Result<bool> {
    let cfg = RunConfig::resolve(
        args,
        threads,
        CommandDefaults {
            name: "moments",
            n_list: (3..=9).map(|k| 1usize << k).collect(),
            paths: DEFAULT_PATHS_RATE,
        },
    )?;
    let p = p.or(cfg.file.p).unwrap_or(4);
    let problem = cfg.build_problem()?;
    let scheme = cfg.scheme();
    let table = in_pool(cfg.threads, || {
        moment_probe(&problem, scheme, p, &cfg.n_list, cfg.paths, cfg.seed)
    })??;
    let other = if contrast {
        let flipped = if scheme.taming {
            Scheme::untamed(scheme.kind)
        } else {
            Scheme::tamed(scheme.kind)
        };
        Some(in_pool(cfg.threads, || {
            moment_probe(&problem, flipped, p, &cfg.n_list, cfg.paths, cfg.seed)
        })??)
    } else {
        None
    };

    for row in &table.rows {
        print!(
            "N = {:>6}  E|X_T|^{p} = {}  explosions = {}",
            row.n,
            fmt_f64(row.moment),
            row.explosions
        );
        if let Some(o) = &other {
            if let Some(r) = o.rows.iter().find(|r| r.n == row.n) {
                print!(
                    "  | {} taming: {}  explosions = {}",
                    if o.taming { "with" } else { "without" },
                    fmt_f64(r.moment),
                    r.explosions
                );
            }
        }
        println!();
    }
    println!("spread max/min = {:.4}", table.spread());

    let mut meta = cfg.metadata();
    meta.push(("p".into(), p.to_string()));
    match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let text = match &other {
                Some(o) => contrast_csv(&table, o, &meta),
                None => moment_table_csv(&table, &meta),
            };
            write(&cfg, "csv", &text)?;
        }
        Format::Json => {
            let out = MomentsOutput {
                config: cfg.to_json(),
                table: &table,
                contrast: other.as_ref(),
            };
            write(&cfg, "json", &to_json(&out)?)?;
        }
    }
    Ok(true)
}
