//! The five subcommands. Each returns the process exit code on success;
//! errors carry their own code through [`CliError::exit_code`].

use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::thread;

use liquidation_core::feedback::optimal_trajectory_deterministic;
use liquidation_core::model::sweep_assumption;
use liquidation_core::simulate::{compare_strategies_range, full_cost_mc, simulate_policy};
use liquidation_core::verify::{deterministic_slice, run_suite, VerifyOptions};
use liquidation_core::{
    reference_strategies, FeedbackLaw, FundamentalSolution, LawSchedule, McSummary, ModelParams, Policy,
    SignalModel, TimeGrid, DEFAULT_KAPPA_SMALL,
};

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output::{ensure_dir, fmt_f64, write_numeric_csv, write_text, write_trajectory};

pub const STRATEGIES: [&str; 3] = ["adaptive", "no_signal", "temporary_only"];

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SOLVE_SUMMARY_FILE: &str = "summary.csv";
pub const MC_SUMMARY_FILE: &str = "mc_summary.csv";
pub const MC_PAIRED_FILE: &str = "mc_paired.csv";
pub const FULL_COST_FILE: &str = "full_cost.txt";
pub const PATH_DIR: &str = "paths";
pub const VERIFY_FILE: &str = "verify.txt";
pub const SWEEP_FILE: &str = "sweep.txt";
pub const SWEEP_FAILURES_FILE: &str = "sweep_failures.csv";
pub const PLOT_FILE: &str = "plot.gp";

pub fn path_file(strategy: &str, index: usize) -> PathBuf {
    PathBuf::from(PATH_DIR).join(format!("{strategy}_{index:05}.csv"))
}

/// Closed-form optimal path. A random OU signal is replaced by its mean
/// path, for which the law is open-loop optimal.
pub fn solve(cfg: &RunConfig, out: &Path) -> Result<u8, CliError> {
    let p = cfg.params()?;
    let given = cfg.signal()?;
    let signal = deterministic_slice(&given);
    if signal != given {
        println!("signal volatility set to 0: solving on the mean signal path");
    }
    let law = FeedbackLaw::new(&p, signal)?;
    let grid = cfg.grid()?;
    let tr = optimal_trajectory_deterministic(&law, &FundamentalSolution::new(&law, &grid)?)?;
    let (_, min_gap) = law.coefficients().check_assumption(liquidation_core::feedback::ASSUMPTION_GRID)?;

    ensure_dir(out)?;
    write_trajectory(&out.join(TRAJECTORY_FILE), &tr)?;
    let c = tr.cost;
    write_numeric_csv(
        &out.join(SOLVE_SUMMARY_FILE),
        &[
            "signal_gain",
            "transient_cost",
            "temporary_cost",
            "running_penalty",
            "terminal_penalty",
            "reduced_cost",
            "min_gap",
        ],
        std::iter::once(vec![
            c.signal_gain,
            c.transient_cost,
            c.temporary_cost,
            c.running_penalty,
            c.terminal_penalty,
            c.total(),
            min_gap,
        ]),
    )?;
    if cfg.wants(Format::Gnuplot) {
        write_text(&out.join(PLOT_FILE), &plot_script(out))?;
    }
    println!("reduced cost {}; X_T = {}; wrote {}", fmt_f64(c.total()), fmt_f64(tr.x[grid.n_steps()]), out.display());
    Ok(0)
}

// Splits the paths over the available cores; path k always uses stream k,
// so the result does not depend on the split.
fn run_mc(
    p: &ModelParams,
    schedules: &[LawSchedule],
    signal: &SignalModel,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<McSummary, CliError> {
    let workers = thread::available_parallelism().map_or(1, NonZeroUsize::get).min(n_paths).max(1);
    let chunk = n_paths.div_ceil(workers);
    let parts: Vec<liquidation_core::Result<McSummary>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let lo = (w * chunk).min(n_paths) as u64;
                let hi = ((w + 1) * chunk).min(n_paths) as u64;
                s.spawn(move || {
                    let policies: Vec<(&str, &dyn Policy)> =
                        STRATEGIES.iter().zip(schedules).map(|(n, s)| (*n, s as &dyn Policy)).collect();
                    compare_strategies_range(p, &policies, signal, grid, lo..hi, seed)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut costs = vec![Vec::with_capacity(n_paths); STRATEGIES.len()];
    for part in parts {
        let part = part?;
        for (all, mine) in costs.iter_mut().zip(part.costs) {
            all.extend(mine);
        }
    }
    Ok(McSummary {
        names: STRATEGIES.iter().map(|s| s.to_string()).collect(),
        costs,
    })
}

/// Monte Carlo comparison of the three reference strategies.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<u8, CliError> {
    let p = cfg.params()?;
    let signal = cfg.signal()?;
    let grid = cfg.grid()?;
    let laws = reference_strategies(&p, &signal, DEFAULT_KAPPA_SMALL)?;
    let schedules = [
        laws.adaptive.schedule(&grid)?,
        laws.no_signal.schedule(&grid)?,
        laws.temporary_only.schedule(&grid)?,
    ];
    let (n_paths, seed) = (cfg.mc.n_paths, cfg.mc.seed);
    let summary = run_mc(&p, &schedules, &signal, &grid, n_paths, seed)?;

    ensure_dir(&out.join(PATH_DIR))?;
    let mut w = csv::Writer::from_path(out.join(MC_SUMMARY_FILE))?;
    w.write_record(["strategy", "mean_cost", "stderr", "n_paths"])?;
    for (k, name) in STRATEGIES.iter().enumerate() {
        let e = summary.estimate(k);
        w.write_record([name.to_string(), fmt_f64(e.mean), fmt_f64(e.stderr), n_paths.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join(MC_PAIRED_FILE))?;
    w.write_record(["strategy", "versus", "mean_difference", "stderr", "z"])?;
    for (k, other) in STRATEGIES.iter().enumerate().skip(1) {
        let d = summary.paired(0, k);
        w.write_record([
            STRATEGIES[0].to_string(),
            other.to_string(),
            fmt_f64(d.mean),
            fmt_f64(d.stderr),
            fmt_f64(d.z_score()),
        ])?;
    }
    w.flush()?;

    for k in 0..cfg.mc.path_files.min(n_paths) {
        let path = signal.sample_path(&grid, seed, k as u64);
        for (name, sched) in STRATEGIES.iter().zip(&schedules) {
            let tr = simulate_policy(&p, sched, &path)?;
            write_trajectory(&out.join(path_file(name, k)), &tr)?;
        }
    }

    if cfg.mc.martingale_vol > 0.0 && n_paths >= 2 {
        let r = full_cost_mc(&p, &schedules[0], &signal, &grid, n_paths, seed, cfg.mc.martingale_vol, 0.0)?;
        write_text(
            &out.join(FULL_COST_FILE),
            &[
                format!("paths {}", r.n_paths),
                format!("martingale_vol {}", fmt_f64(r.martingale_vol)),
                format!("full_cost_mean {} stderr {}", fmt_f64(r.full_minus_initial_value.mean), fmt_f64(r.full_minus_initial_value.stderr)),
                format!("reduced_cost_mean {} stderr {}", fmt_f64(r.reduced.mean), fmt_f64(r.reduced.stderr)),
                format!("paired_difference {} stderr {}", fmt_f64(r.difference.mean), fmt_f64(r.difference.stderr)),
                format!("consistent {}", r.consistent()),
            ],
        )?;
    }
    if cfg.wants(Format::Gnuplot) {
        write_text(&out.join(PLOT_FILE), &plot_script(out))?;
    }
    for (k, name) in STRATEGIES.iter().enumerate() {
        let e = summary.estimate(k);
        println!("{name:<15} mean {} stderr {}", fmt_f64(e.mean), fmt_f64(e.stderr));
    }
    Ok(0)
}

/// Runs the invariant suite; exit 1 if any check fails.
pub fn verify(cfg: &RunConfig, out: &Path) -> Result<u8, CliError> {
    let raw = cfg.model.raw();
    if raw.kappa == 0.0 {
        return Err(CliError::Unsupported(format!(
            "unsupported boundary: kappa = 0 is outside the closed form; verify the temporary-only proxy with kappa = {DEFAULT_KAPPA_SMALL:e} instead"
        )));
    }
    let p = cfg.params()?;
    let signal = cfg.signal()?;
    let opts = VerifyOptions {
        oracle_steps: cfg.oracle.n_steps,
        oracle_tol: cfg.oracle.tol,
        fine_steps: cfg.oracle.fbsde_steps,
        seed: cfg.mc.seed,
        ..VerifyOptions::default()
    };
    let report = run_suite(&p, &signal, &opts)?;
    let lines: Vec<String> = report
        .outcomes
        .iter()
        .map(|o| format!("{} {:<22} {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail))
        .collect();
    ensure_dir(out)?;
    write_text(&out.join(VERIFY_FILE), &lines)?;
    for l in &lines {
        println!("{l}");
    }
    Ok(if report.passed() { 0 } else { 1 })
}

/// Samples the box `(lo, hi]` and checks the well-posedness condition on
/// every tuple; exit 1 if any tuple fails.
pub fn sweep(cfg: &RunConfig, out: &Path, lo: [f64; 7], hi: [f64; 7], samples: usize, grid_n: usize) -> Result<u8, CliError> {
    let r = sweep_assumption(lo, hi, samples, grid_n, cfg.mc.seed)?;
    ensure_dir(out)?;
    let mut lines = vec![
        format!("box_lo {}", lo.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")),
        format!("box_hi {}", hi.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")),
        format!("seed {}", cfg.mc.seed),
        format!("samples {}", r.samples),
        format!("grid {}", r.grid_n),
        format!("failures {}", r.failures.len()),
        format!("min_gap {}", fmt_f64(r.min_gap)),
    ];
    for f in &r.failures {
        if let Some(e) = &f.error {
            lines.push(format!("error at {:?}: {e}", f.xi));
        }
    }
    write_text(&out.join(SWEEP_FILE), &lines)?;
    write_numeric_csv(
        &out.join(SWEEP_FAILURES_FILE),
        &["lambda", "gamma", "kappa", "rho", "varrho", "phi", "horizon", "min_gap"],
        r.failures.iter().map(|f| f.xi.iter().copied().chain(std::iter::once(f.min_gap)).collect()),
    )?;
    for l in &lines {
        println!("{l}");
    }
    Ok(if r.passed() { 0 } else { 1 })
}

/// gnuplot script for whatever `solve` and `simulate` have left in `out`;
/// all pages when neither has run yet.
pub fn plot_script(out: &Path) -> Vec<String> {
    let have_solve = out.join(TRAJECTORY_FILE).exists();
    let have_paths = STRATEGIES.iter().any(|s| out.join(path_file(s, 0)).exists());
    let (solve_page, paths_page) = if have_solve || have_paths { (have_solve, have_paths) } else { (true, true) };
    let mut s = vec![
        "# Run from the output directory: gnuplot plot.gp".to_string(),
        "set datafile separator ','".to_string(),
        "set terminal pngcairo size 1000,800".to_string(),
        "set key autotitle columnhead".to_string(),
        "set xlabel 't'".to_string(),
    ];
    if solve_page {
        s.extend([
            "set output 'trajectory.png'".to_string(),
            "set multiplot layout 2,1".to_string(),
            "set ylabel 'inventory X'".to_string(),
            format!("plot '{TRAJECTORY_FILE}' using 't':'X' with lines lw 2"),
            "set ylabel 'rate u'".to_string(),
            format!("plot '{TRAJECTORY_FILE}' using 't':'u' with lines lw 2, '' using 't':'zeta' with lines dt 2"),
            "unset multiplot".to_string(),
        ]);
    }
    if paths_page {
        let series = |col: &str| {
            STRATEGIES
                .iter()
                .map(|name| format!("'{}' using 't':'{col}' with lines title '{name}'", path_file(name, 0).display()))
                .collect::<Vec<_>>()
                .join(", ")
        };
        s.extend([
            "set output 'strategies.png'".to_string(),
            "set multiplot layout 3,1".to_string(),
            "set ylabel 'signal rate I'".to_string(),
            format!("plot '{}' using 't':'I' with lines title 'I'", path_file(STRATEGIES[0], 0).display()),
            "set ylabel 'inventory X'".to_string(),
            format!("plot {}", series("X")),
            "set ylabel 'rate u'".to_string(),
            format!("plot {}", series("u")),
            "unset multiplot".to_string(),
        ]);
    }
    s
}

pub fn plot(out: &Path) -> Result<u8, CliError> {
    ensure_dir(out)?;
    let path = out.join(PLOT_FILE);
    write_text(&path, &plot_script(out))?;
    println!("wrote {}", path.display());
    Ok(0)
}
