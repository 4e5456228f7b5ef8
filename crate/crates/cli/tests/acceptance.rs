//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use std::fs;
use std::process::Command;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tamed_taylor::assumptions::{check_a2, check_all, default_point_grid, parameter_ranges};
use tamed_taylor::brownian::{aggregate, sample_increment_pair, IncrementPair, StepStream};
use tamed_taylor::experiments::{
    fit_rate, moment_probe, strong_error, terminal_states, terminal_summary, ErrorTable,
    StrongErrorConfig,
};
use tamed_taylor::model::builtin_problem;
use tamed_taylor::schemes::{step_tamed_euler, step_tamed_milstein, step_taylor15, StepInputs};
use tamed_taylor::{BuiltinKind, OperatorBundle, Problem, Scheme, SchemeKind, TamedBundle};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn reference_protocol() -> StrongErrorConfig {
    StrongErrorConfig {
        n_list: (4..=9).map(|k| 1usize << k).collect(),
        n_ref: 1 << 13,
        paths: 1000,
        master_seed: 42,
    }
}

fn problem(kind: BuiltinKind) -> Problem {
    builtin_problem(kind, 0.02, false).expect("builtin problem")
}

/// Error tables for the three tamed schemes on one problem, shared paths.
struct SchemeTables {
    euler: ErrorTable,
    milstein: ErrorTable,
    taylor: ErrorTable,
}

fn scheme_tables(kind: BuiltinKind) -> SchemeTables {
    let p = problem(kind);
    let cfg = reference_protocol();
    let run = |s| strong_error(&p, Scheme::tamed(s), &cfg).expect("strong error");
    SchemeTables {
        euler: run(SchemeKind::TamedEuler),
        milstein: run(SchemeKind::TamedMilstein),
        taylor: run(SchemeKind::Taylor15),
    }
}

fn rate_criterion(tables: &SchemeTables, lo: f64, hi: f64) -> Outcome {
    match fit_rate(&tables.taylor) {
        Ok(fit) => outcome(
            (lo..=hi).contains(&fit.slope),
            format!("slope {:.4}, band [{lo}, {hi}]", fit.slope),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn ordering(name: &str, t: &SchemeTables) -> (bool, String) {
    let mut ok = true;
    let mut bad_n = Vec::new();
    for ((e, m), x) in t
        .euler
        .rows
        .iter()
        .zip(&t.milstein.rows)
        .zip(&t.taylor.rows)
    {
        if !(x.rms_error <= m.rms_error && m.rms_error <= e.rms_error) {
            ok = false;
            bad_n.push(e.n);
        }
    }
    let slopes: Vec<f64> = [&t.taylor, &t.milstein, &t.euler]
        .iter()
        .map(|tab| fit_rate(tab).map(|f| f.slope).unwrap_or(f64::NAN))
        .collect();
    let slopes_ok = slopes[0] > slopes[1] && slopes[1] > slopes[2];
    (
        ok && slopes_ok,
        format!(
            "{name}: rms order violated at N = {bad_n:?}; slopes taylor15 {:.3}, milstein {:.3}, euler {:.3}",
            slopes[0], slopes[1], slopes[2]
        ),
    )
}

fn criterion_3(g: &SchemeTables, h: &SchemeTables) -> Outcome {
    let (a, da) = ordering("ginzburg", g);
    let (b, db) = ordering("holder", h);
    outcome(a && b, format!("{da}; {db}"))
}

struct Moments {
    n: usize,
    var_w: f64,
    var_z: f64,
    cov: f64,
}

fn moments(pairs: impl Iterator<Item = IncrementPair>) -> Moments {
    let (mut n, mut sw, mut sz, mut sww, mut szz, mut swz) = (0usize, 0.0, 0.0, 0.0, 0.0, 0.0);
    for p in pairs {
        n += 1;
        sw += p.dw;
        sz += p.dz;
        sww += p.dw * p.dw;
        szz += p.dz * p.dz;
        swz += p.dw * p.dz;
    }
    let k = n as f64;
    let (mw, mz) = (sw / k, sz / k);
    Moments {
        n,
        var_w: sww / k - mw * mw,
        var_z: szz / k - mz * mz,
        cov: swz / k - mw * mz,
    }
}

fn normalized(m: &Moments, dt: f64) -> [f64; 3] {
    [
        m.var_w / dt,
        3.0 * m.var_z / dt.powi(3),
        2.0 * m.cov / (dt * dt),
    ]
}

fn criterion_4() -> Outcome {
    const SAMPLES: u64 = 1_000_000;
    let dt = 0.01;
    let direct = moments(
        (0..SAMPLES)
            .map(|i| sample_increment_pair(&mut StepStream::new(4, i, 0), dt).expect("sample")),
    );
    let fine_dt = dt / 8.0;
    let aggregated = moments((0..SAMPLES).map(|i| {
        let fine: Vec<IncrementPair> = (0..8)
            .map(|k| sample_increment_pair(&mut StepStream::new(5, i, k), fine_dt).expect("sample"))
            .collect();
        aggregate(&fine).expect("aggregate")
    }));
    let a = normalized(&direct, dt);
    let b = normalized(&aggregated, dt);
    let within = |v: &[f64; 3]| v.iter().all(|r| (0.99..=1.01).contains(r));
    outcome(
        within(&a) && within(&b) && direct.n == aggregated.n,
        format!(
            "direct [{:.4}, {:.4}, {:.4}], aggregated x8 [{:.4}, {:.4}, {:.4}]",
            a[0], a[1], a[2], b[0], b[1], b[2]
        ),
    )
}

fn random_tamed(rng: &mut StdRng, d: usize) -> TamedBundle {
    let mut bundle = OperatorBundle::zeros(d);
    for v in [
        &mut bundle.b,
        &mut bundle.sigma,
        &mut bundle.l0_b,
        &mut bundle.l1_b,
        &mut bundle.l0_sigma,
        &mut bundle.l1_sigma,
        &mut bundle.l1l1_sigma,
    ] {
        v.iter_mut().for_each(|c| *c = rng.random_range(-1.0..=1.0));
    }
    let mut t = TamedBundle::zeros(d);
    t.assign(&bundle, rng.random_range(0.05..=1.0));
    t
}

fn random_pair(rng: &mut StdRng, dt: f64) -> IncrementPair {
    let u1: f64 = rng.sample(rand_distr::StandardNormal);
    let u2: f64 = rng.sample(rand_distr::StandardNormal);
    IncrementPair::from_normals(u1, u2, dt)
}

/// One step of the frozen-coefficient continuous scheme, integrated with
/// the closed forms of the iterated integrals.
fn integrated_step(x: &[f64], t: &OperatorBundle, p: IncrementPair) -> Vec<f64> {
    let IncrementPair { dw, dz, dt } = p;
    let i_w_ds = dz;
    let i_s_ds = 0.5 * dt * dt;
    let i_w_dw = 0.5 * (dw * dw - dt);
    let i_s_dw = dt * dw - dz;
    let i_ww_dw = 0.5 * (dw * dw / 3.0 - dt) * dw;
    (0..x.len())
        .map(|k| {
            x[k] + (t.b[k] * dt + t.l1_b[k] * i_w_ds + t.l0_b[k] * i_s_ds)
                + (t.sigma[k] * dw
                    + t.l1_sigma[k] * i_w_dw
                    + t.l0_sigma[k] * i_s_dw
                    + t.l1l1_sigma[k] * i_ww_dw)
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let mut rng = StdRng::seed_from_u64(55);

    let mut worst_step = 0.0f64;
    for case in 0..10_000 {
        let d = 1 + case % 3;
        let x: Vec<f64> = (0..d)
            .map(|_| rng.random_range(2.0..=10.0) * if rng.random() { 1.0 } else { -1.0 })
            .collect();
        let tamed = random_tamed(&mut rng, d);
        let dt = 10f64.powf(rng.random_range(-4.0..=-1.0));
        let pair = random_pair(&mut rng, dt);
        let mut out = vec![0.0; d];
        step_taylor15(
            &StepInputs {
                x: &x,
                pair,
                tamed: &tamed,
            },
            &mut out,
        )
        .expect("finite");
        for (a, b) in out.iter().zip(integrated_step(&x, &tamed.terms, pair)) {
            worst_step = worst_step.max((a - b).abs() / b.abs());
        }
    }
    let step_ok = worst_step <= 1e-14;

    let mut worst_agg = 0.0f64;
    let mut identity_ok = true;
    for _ in 0..1_000 {
        let delta = 10f64.powf(rng.random_range(-4.0..=-1.0));
        let fine: Vec<IncrementPair> = (0..8).map(|_| random_pair(&mut rng, delta)).collect();
        let single = aggregate(&fine[..1]).expect("aggregate");
        identity_ok &= single == fine[0];
        let all = aggregate(&fine).expect("aggregate");
        // ∫(W_s − W_0) ds over the fine grid via prefix sums.
        let mut w = 0.0;
        let mut z_direct = 0.0;
        for p in &fine {
            z_direct += w * delta + p.dz;
            w += p.dw;
        }
        let halves = [
            aggregate(&fine[..4]).expect("aggregate"),
            aggregate(&fine[4..]).expect("aggregate"),
        ];
        let nested = aggregate(&halves).expect("aggregate");
        let scale_w = fine.iter().map(|p| p.dw.abs()).sum::<f64>();
        let scale_z = fine.iter().map(|p| p.dz.abs()).sum::<f64>() + scale_w * 8.0 * delta;
        worst_agg = worst_agg
            .max((all.dz - z_direct).abs() / scale_z)
            .max((all.dw - nested.dw).abs() / scale_w)
            .max((all.dz - nested.dz).abs() / scale_z);
    }
    let agg_ok = identity_ok && worst_agg <= 1e-14;

    let mut chain_ok = true;
    for case in 0..10_000 {
        let d = 1 + case % 2;
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..=5.0)).collect();
        let mut tamed = random_tamed(&mut rng, d);
        let pair = random_pair(&mut rng, 0.01);
        for v in [
            &mut tamed.terms.l1l1_sigma,
            &mut tamed.terms.l0_sigma,
            &mut tamed.terms.l0_b,
            &mut tamed.terms.l1_b,
        ] {
            v.iter_mut().for_each(|c| *c = 0.0);
        }
        let (mut t, mut m, mut e) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let inputs = StepInputs {
            x: &x,
            pair,
            tamed: &tamed,
        };
        step_taylor15(&inputs, &mut t).expect("finite");
        step_tamed_milstein(&inputs, &mut m).expect("finite");
        chain_ok &= t == m;
        tamed.terms.l1_sigma.iter_mut().for_each(|c| *c = 0.0);
        let inputs = StepInputs {
            x: &x,
            pair,
            tamed: &tamed,
        };
        step_tamed_milstein(&inputs, &mut m).expect("finite");
        step_tamed_euler(&inputs, &mut e).expect("finite");
        chain_ok &= m == e;
    }

    outcome(
        step_ok && agg_ok && chain_ok,
        format!(
            "(a) worst step deviation {worst_step:.2e}; (b) aggregation deviation {worst_agg:.2e}, identity {identity_ok}; (c) degeneracy chain exact {chain_ok}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let p = problem(BuiltinKind::Ginzburg);
    let n_list: Vec<usize> = (3..=9).map(|k| 1usize << k).collect();
    let tamed = match moment_probe(
        &p,
        Scheme::tamed(SchemeKind::Taylor15),
        4,
        &n_list,
        1000,
        42,
    ) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("tamed run failed: {e}")),
    };
    let tamed_explosions: usize = tamed.rows.iter().map(|r| r.explosions).sum();
    let spread = tamed.spread();

    let big = p.clone().with_x0(vec![10.0]).expect("x0");
    let untamed = terminal_states(
        &big,
        Scheme::untamed(SchemeKind::Taylor15),
        8,
        1000,
        42,
        false,
    )
    .expect("untamed run");
    let exploded = untamed.iter().filter(|o| o.exploded()).count();

    let moments: Vec<String> = tamed
        .rows
        .iter()
        .map(|r| format!("{:.3}", r.moment))
        .collect();
    outcome(
        tamed_explosions == 0 && spread < 2.0 && exploded >= 100,
        format!(
            "tamed explosions {tamed_explosions}, E|X_T|^4 over N=8..512 [{}] spread {spread:.2} (need < 2); untamed x0=10 N=8 exploded {exploded}/1000",
            moments.join(", ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let g = parameter_ranges(BuiltinKind::Ginzburg).expect("ranges");
    let h = parameter_ranges(BuiltinKind::Holder).expect("ranges");
    let ranges_ok = format!("{:.4}", g.xi_max) == "0.3086"
        && format!("{:.4}", h.xi_max) == "0.2209"
        && g.min_p0 == 22.0
        && h.min_p0 == 42.0;

    let mut defaults_ok = true;
    let mut failing = Vec::new();
    for kind in [BuiltinKind::Ginzburg, BuiltinKind::Holder] {
        let report = check_all(&problem(kind), None, None).expect("check");
        for e in &report.entries {
            if !e.passed {
                defaults_ok = false;
                failing.push(format!("{kind} {}", e.id));
            }
        }
        defaults_ok &= report.entries.len() == 5;
    }

    let xi = 0.02;
    let grid = default_point_grid(1);
    let bound = 2.0 / (xi * xi) + 1.0;
    let p = problem(BuiltinKind::Ginzburg);
    let above_fail = [bound + 1.0, 6000.0]
        .iter()
        .all(|&p0| !check_a2(&p, p0, &grid).expect("a2").passed);
    let at_min_pass = check_a2(&p, 22.0, &grid).expect("a2").passed;

    outcome(
        ranges_ok && defaults_ok && above_fail && at_min_pass,
        format!(
            "xi_max {:.4}/{:.4}, min_p0 {}/{}; defaults all pass {defaults_ok} {failing:?}; A-2 fails above 2/xi^2+1 {above_fail}",
            g.xi_max, h.xi_max, g.min_p0, h.min_p0
        ),
    )
}

fn criterion_8() -> Outcome {
    let xi = 0.1;
    let p = builtin_problem(BuiltinKind::Ou, xi, false).expect("ou");
    let outcomes = terminal_states(
        &p,
        Scheme::tamed(SchemeKind::Taylor15),
        256,
        2000,
        42,
        false,
    )
    .expect("ou run");
    let s = terminal_summary(&outcomes, 0);
    let mean = 3.0 * (-1.0f64).exp();
    let var = xi * xi * (1.0 - (-2.0f64).exp()) / 2.0;
    let z = (s.mean - mean).abs() / s.std_error;
    let rel = s.variance / var - 1.0;
    outcome(
        s.explosions == 0 && z <= 3.0 && rel.abs() <= 0.05,
        format!(
            "mean {:.6} vs {mean:.6} ({z:.2} standard errors), variance {:.6e} vs {var:.6e} ({:+.2}%)",
            s.mean,
            s.variance,
            100.0 * rel
        ),
    )
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let bin = env!("CARGO_BIN_EXE_tamed-taylor");
    let mut runs = Vec::new();
    for (i, threads) in [1usize, 2, 8, 1].iter().enumerate() {
        let stem = dir.path().join(format!("run{i}"));
        let status = Command::new(bin)
            .env_remove("TAMED_TAYLOR_SEED")
            .args([
                "--threads",
                &threads.to_string(),
                "rate",
                "--problem",
                "holder",
            ])
            .args([
                "--paths",
                "200",
                "--n-ref",
                "2048",
                "--n-list",
                "16,32,64,128,256",
            ])
            .arg("--out")
            .arg(&stem)
            .output()
            .expect("binary runs");
        if !status.status.success() {
            return outcome(false, format!("run with {threads} threads failed"));
        }
        let read = |ext: &str| fs::read(stem.with_extension(ext)).expect("output file");
        runs.push((threads, read("csv"), read("json")));
    }
    let identical = runs
        .windows(2)
        .all(|w| w[0].1 == w[1].1 && w[0].2 == w[1].2);
    outcome(
        identical,
        format!("CSV and JSON byte-identical across --threads 1, 2, 8 and a repeat: {identical}"),
    )
}

fn main() {
    let start = Instant::now();
    let ginzburg = scheme_tables(BuiltinKind::Ginzburg);
    let holder = scheme_tables(BuiltinKind::Holder);

    let results: Vec<(u32, &str, Outcome)> = vec![
        (
            1,
            "rate reproduction, beta = 1 (ginzburg)",
            rate_criterion(&ginzburg, 1.35, 1.70),
        ),
        (
            2,
            "rate reproduction, beta = 0.5 (holder)",
            rate_criterion(&holder, 1.10, 1.45),
        ),
        (3, "scheme ordering", criterion_3(&ginzburg, &holder)),
        (4, "increment distribution", criterion_4()),
        (5, "exact identities", criterion_5()),
        (6, "taming stability vs untamed divergence", criterion_6()),
        (7, "parameter ranges and assumption checks", criterion_7()),
        (8, "OU calibration oracle", criterion_8()),
        (9, "determinism across thread counts", criterion_9()),
    ];

    let mut failed = 0;
    for (id, name, o) in &results {
        if !o.passed {
            failed += 1;
        }
        println!(
            "criterion {id} {}: {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
