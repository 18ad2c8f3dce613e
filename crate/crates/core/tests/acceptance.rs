//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//! Runs without the libtest harness so the lines are always printed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use liquidation_core::feedback::deterministic_path;
use liquidation_core::signal::{path_rng, DeterministicRate, OuSignalParams};
use liquidation_core::simulate::{compare_strategies, simulate_policy, Perturbed};
use liquidation_core::verify::{
    comparison_taus, eigen_margin, fbsde_check, gateaux_check, kernel_bounds, liouville_error, oracle_comparison,
    representation_error, smooth_direction,
};
use liquidation_core::*;
use rand::Rng;

const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn random_params<R: Rng>(rng: &mut R) -> ModelParams {
    // Uniform on (0, 100].
    let xi: [f64; 7] = std::array::from_fn(|_| 100.0 * (1.0 - rng.random::<f64>()));
    ModelParams::from_xi(xi, 10.0, 0.0).expect("positive tuple")
}

fn ou_deterministic() -> SignalModel {
    SignalModel::OrnsteinUhlenbeck(OuSignalParams::new(1.0, 0.1, 0.0).unwrap())
}

fn eigen_inequalities() -> Outcome {
    let mut rng = path_rng(SEED, 1);
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        match eigen_margin(&random_params(&mut rng)) {
            Ok(m) => worst = worst.min(m),
            Err(e) => return outcome(false, format!("eigen-system failed: {e}")),
        }
    }
    outcome(worst >= -1e-12, format!("1000 tuples, worst relative margin {worst:.3e} (need >= -1e-12)"))
}

fn matrix_exponential() -> Outcome {
    let mut rng = path_rng(SEED, 2);
    let mut worst = [0.0f64; 2];
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let top = *comparison_taus(&p, 1).unwrap().last().unwrap();
        let tau = top * (1.0 - rng.random::<f64>());
        match representation_error(&p, tau) {
            Ok(e) => worst = [worst[0].max(e[0]), worst[1].max(e[1])],
            Err(e) => return outcome(false, format!("rows failed: {e}")),
        }
    }
    outcome(
        worst[0] <= 1e-8 && worst[1] <= 1e-8,
        format!("100 pairs, max relative deviation vs spectral {:.3e}, vs expm {:.3e} (tol 1e-8)", worst[0], worst[1]),
    )
}

fn kernel_bound_check() -> Outcome {
    let mut sets = vec![ModelParams::baseline()];
    let mut rng = path_rng(SEED, 3);
    sets.extend((0..100).map(|_| random_params(&mut rng)));
    let mut failures = 0;
    let mut first = String::new();
    for p in &sets {
        let b = kernel_bounds(p, 1001).unwrap();
        if !b.holds(1e-10) {
            failures += 1;
            if first.is_empty() {
                first = format!(" first: {:?} -> {b:?}", p.xi());
            }
        }
    }
    outcome(
        failures == 0,
        format!("baseline + 100 tuples on 1001 points, {failures} violations of S44 >= 1 nondecreasing, G3 <= -1{first}"),
    )
}

fn assumption_sweep() -> Outcome {
    let r = model::sweep_assumption([0.0; 7], [100.0; 7], 1000, 1001, SEED).unwrap();
    outcome(
        r.passed(),
        format!("{} tuples, {} violations, smallest |gap| {:.3e} (floor 1e-10)", r.samples, r.failures.len(), r.min_gap),
    )
}

fn oracle_equivalence(signal: &SignalModel) -> Outcome {
    let p = ModelParams::baseline();
    let mut errors = Vec::new();
    let mut gap = f64::NAN;
    for n in [200, 400, 800] {
        match oracle_comparison(&p, signal, n) {
            Ok(c) => {
                errors.push(c.rate_error);
                gap = c.cost_gap;
            }
            Err(e) => return outcome(false, format!("N {n}: {e}")),
        }
    }
    let shrinking = errors.windows(2).all(|w| w[1] < w[0]);
    outcome(
        errors[0] <= 2e-2 && shrinking && gap <= 1e-3,
        format!(
            "rate error N=200/400/800: {:.3e}/{:.3e}/{:.3e} (N=200 tol 2e-2, must shrink), cost gap at 800 {gap:.3e} (tol 1e-3)",
            errors[0], errors[1], errors[2]
        ),
    )
}

fn gateaux() -> Outcome {
    let p = ModelParams::baseline();
    let mut worst_cf = 0.0f64;
    let mut worst_opt = 0.0f64;
    for signal in [SignalModel::Zero, ou_deterministic()] {
        let g = gateaux_check(&p, &signal, 800, 100, SEED).unwrap();
        worst_cf = worst_cf.max(g.closed_form);
        worst_opt = worst_opt.max(g.optimum);
    }
    outcome(
        worst_cf <= 5e-3 && worst_opt <= 1e-8,
        format!(
            "N=800, 100 directions, zero and deterministic OU signal: closed form {worst_cf:.3e} (tol 5e-3), optimum {worst_opt:.3e} (tol 1e-8)"
        ),
    )
}

fn fbsde() -> Outcome {
    let p = ModelParams::baseline();
    let coarse = fbsde_check(&p, &SignalModel::Zero, 2000).unwrap();
    let fine = fbsde_check(&p, &SignalModel::Zero, 4000).unwrap();
    let (a, b) = (coarse.normalized(), fine.normalized());
    let ratios: [f64; 4] = std::array::from_fn(|k| a[k] / b[k]);
    let within = coarse.within(5e-3);
    let order = ratios.iter().all(|r| (1.8..=2.2).contains(r));
    outcome(
        within && order,
        format!(
            "N=2000 normalized [{:.2e}, {:.2e}, {:.2e}, {:.2e}] (tol 5e-3), ratio to N=4000 [{:.3}, {:.3}, {:.3}, {:.3}] (need 1.8..2.2)",
            a[0], a[1], a[2], a[3], ratios[0], ratios[1], ratios[2], ratios[3]
        ),
    )
}

fn liouville() -> Outcome {
    let (err, identity) = liouville_error(&ModelParams::baseline(), &SignalModel::Zero, 2000).unwrap();
    outcome(
        err <= 1e-6 && identity,
        format!("max |det Phi / exp(int tr B) - 1| = {err:.3e} (tol 1e-6), Phi(0) = I exactly: {identity}"),
    )
}

fn monte_carlo() -> Outcome {
    let p = ModelParams::baseline();
    let signal = SignalModel::OrnsteinUhlenbeck(OuSignalParams::baseline());
    let grid = TimeGrid::uniform(p.horizon, 200).unwrap();
    let adaptive = FeedbackLaw::new(&p, signal.clone()).unwrap().schedule(&grid).unwrap();
    let no_signal = FeedbackLaw::new(&p, SignalModel::Zero).unwrap().schedule(&grid).unwrap();
    let mut rng = path_rng(SEED, 10);
    let perturbed: Vec<Perturbed<&_>> = (0..20)
        .map(|_| Perturbed {
            base: &adaptive,
            offset: smooth_direction(grid.nodes(), p.horizon, &mut rng).iter().map(|a| 0.1 * a).collect(),
        })
        .collect();
    let names: Vec<String> = (0..20).map(|k| format!("perturbed_{k}")).collect();
    let mut policies: Vec<(&str, &dyn Policy)> = vec![("adaptive", &adaptive), ("no_signal", &no_signal)];
    for (name, pol) in names.iter().zip(&perturbed) {
        policies.push((name.as_str(), pol));
    }
    let s = compare_strategies(&p, &policies, &signal, &grid, 10_000, SEED).unwrap();
    let vs_no_signal = s.paired(0, 1);
    let z_min = (2..s.names.len()).map(|k| s.paired(0, k).z_score()).fold(f64::INFINITY, f64::min);
    outcome(
        vs_no_signal.z_score() > 3.0 && z_min > 3.0,
        format!(
            "10^4 paths: adaptive - no_signal = {:.4} (z {:.1}); smallest z over 20 perturbed laws {z_min:.1} (need > 3)",
            vs_no_signal.mean,
            vs_no_signal.z_score()
        ),
    )
}

fn qualitative() -> Outcome {
    let p = ModelParams::baseline();
    assert_eq!(p.varrho, 10.0);
    let grid = TimeGrid::uniform(p.horizon, 1000).unwrap();
    let n = grid.n_steps();

    let zero = FeedbackLaw::new(&p, SignalModel::Zero).unwrap();
    let tr = simulate_policy(&p, &zero.schedule(&grid).unwrap(), &SignalPath::zero(&grid)).unwrap();
    let decreasing = tr.x.windows(2).all(|w| w[1] < w[0]);
    let final_small = tr.x[n].abs() < 0.05 * p.x0;
    let first = decreasing && final_small;

    // Signal rate rising linearly from 0 to 4 over the horizon.
    let ramp = SignalModel::Deterministic(DeterministicRate::table(vec![0.0, p.horizon], vec![0.0, 4.0]).unwrap());
    let laws = reference_strategies(&p, &ramp, DEFAULT_KAPPA_SMALL).unwrap();
    let path = deterministic_path(&ramp, &grid).unwrap();
    let run = |law: &FeedbackLaw| simulate_policy(&p, &law.schedule(&grid).unwrap(), &path).unwrap().u[..n].to_vec();
    let (u_trans, u_temp) = (run(&laws.adaptive), run(&laws.temporary_only));
    let sign_change = u_temp.iter().any(|u| *u < 0.0) && u_temp.iter().any(|u| *u > 0.0);
    let sup = |u: &[f64]| u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let closer = sup(&u_trans) < sup(&u_temp);
    let second = if sign_change && closer { "holds" } else { "does not hold (report only)" };
    outcome(
        first,
        format!(
            "zero signal: X strictly decreasing {decreasing}, |X_T| = {:.3e} < 0.5: {final_small}; rising signal: temporary-only min u {:.3}, sup|u| transient-aware {:.3} vs temporary-only {:.3}, second clause {second}",
            tr.x[n].abs(),
            u_temp.iter().cloned().fold(f64::INFINITY, f64::min),
            sup(&u_trans),
            sup(&u_temp)
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("eigen inequalities", Duration::from_secs(1), eigen_inequalities),
        ("matrix exponential equivalence", Duration::from_secs(1), matrix_exponential),
        ("S44 and G3 bounds", Duration::from_secs(5), kernel_bound_check),
        ("assumption sweep", Duration::from_secs(30), assumption_sweep),
        ("oracle equivalence, zero signal", Duration::from_secs(30), || oracle_equivalence(&SignalModel::Zero)),
        ("oracle equivalence, deterministic OU", Duration::from_secs(30), || {
            oracle_equivalence(&ou_deterministic())
        }),
        ("Gateaux residual", Duration::from_secs(10), gateaux),
        ("forward-backward residuals", Duration::from_secs(10), fbsde),
        ("Liouville identity", Duration::from_secs(1), liouville),
        ("Monte Carlo optimality", Duration::from_secs(120), monte_carlo),
        ("qualitative shape", Duration::from_secs(10), qualitative),
    ];
    let mut failed = 0;
    for (k, (name, budget, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let in_time = took <= budget;
        let ok = o.passed && in_time;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<38} {}  {} [{:.2?} of {:?}{}]",
            k + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            o.detail,
            took,
            budget,
            if in_time { "" } else { ", over budget" }
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
