//! Closed-loop simulation of inventory, distortion and cost.
//!
//! Conventions shared by every cost in the crate:
//! * the rate is constant on each step, `u_i` on `[t_i, t_{i+1})`;
//! * `X_k = x0 − Σ_{i<k} u_i Δ_i` and `Y` follows its exact exponential
//!   step for a constant rate;
//! * `∫X dA ≈ Σ X_i ΔA_i` (left point), `κ∫Yu ≈ κ Σ u_i Δ_i (Y_i + Y_{i+1})/2`,
//!   `λ∫u² = λ Σ u_i² Δ_i`, `φ∫X² ≈ φ Σ Δ_i (X_i² + X_{i+1}²)/2`.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::feedback::FeedbackLaw;
use crate::params::{ModelParams, TimeGrid};
use crate::signal::{path_rng, SignalModel, SignalPath};
use crate::stats::{mean_stderr, pairwise_sum};

/// Added to the seed to obtain the generator of the price's Brownian part,
/// keeping it independent of the signal noise.
pub const PRICE_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// A (possibly non-optimal) trading rule evaluated once per step.
pub trait Policy {
    /// Rate on step `node` given the state at its left end.
    fn rate(&self, node: usize, x: f64, y: f64, signal_rate: f64) -> f64;

    /// Signal-driven part of the rate, recorded for output only.
    fn zeta(&self, _node: usize, _signal_rate: f64) -> f64 {
        0.0
    }

    /// Grid the policy was tabulated on, if any.
    fn grid(&self) -> Option<&TimeGrid> {
        None
    }
}

impl<P: Policy + ?Sized> Policy for &P {
    fn rate(&self, node: usize, x: f64, y: f64, signal_rate: f64) -> f64 {
        (**self).rate(node, x, y, signal_rate)
    }

    fn zeta(&self, node: usize, signal_rate: f64) -> f64 {
        (**self).zeta(node, signal_rate)
    }

    fn grid(&self) -> Option<&TimeGrid> {
        (**self).grid()
    }
}

/// The same rate at every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantRate(pub f64);

impl Policy for ConstantRate {
    fn rate(&self, _node: usize, _x: f64, _y: f64, _signal_rate: f64) -> f64 {
        self.0
    }
}

/// A fixed open-loop rate per node (the last entry is used at `T`).
#[derive(Debug, Clone, PartialEq)]
pub struct OpenLoop(pub Vec<f64>);

impl Policy for OpenLoop {
    fn rate(&self, node: usize, _x: f64, _y: f64, _signal_rate: f64) -> f64 {
        self.0[node.min(self.0.len() - 1)]
    }
}

/// `base + offset[node]`.
#[derive(Debug, Clone)]
pub struct Perturbed<P> {
    pub base: P,
    pub offset: Vec<f64>,
}

impl<P: Policy> Policy for Perturbed<P> {
    fn rate(&self, node: usize, x: f64, y: f64, signal_rate: f64) -> f64 {
        self.base.rate(node, x, y, signal_rate) + self.offset[node]
    }

    fn zeta(&self, node: usize, signal_rate: f64) -> f64 {
        self.base.zeta(node, signal_rate)
    }

    fn grid(&self) -> Option<&TimeGrid> {
        self.base.grid()
    }
}

/// Components of the reduced performance `J̃`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostBreakdown {
    /// `∫X dA`.
    pub signal_gain: f64,
    /// `κ∫Y u dt`.
    pub transient_cost: f64,
    /// `λ∫u² dt`.
    pub temporary_cost: f64,
    /// `φ∫X² dt`.
    pub running_penalty: f64,
    /// `ϱX_T²`.
    pub terminal_penalty: f64,
}

impl CostBreakdown {
    /// `J̃` (larger is better).
    pub fn total(&self) -> f64 {
        self.signal_gain - self.transient_cost - self.temporary_cost - self.running_penalty - self.terminal_penalty
    }
}

/// Node and step weights of the quadratures listed in the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    /// `Δ_i` per step.
    pub steps: Vec<f64>,
    /// Trapezoid weight per node: `Δ_0/2, (Δ_0+Δ_1)/2, …, Δ_{N−1}/2`.
    pub nodes: Vec<f64>,
}

impl CostWeights {
    pub fn for_grid(grid: &TimeGrid) -> Self {
        let steps = grid.steps();
        let mut nodes = alloc::vec![0.0; steps.len() + 1];
        for (i, d) in steps.iter().enumerate() {
            nodes[i] += 0.5 * d;
            nodes[i + 1] += 0.5 * d;
        }
        Self { steps, nodes }
    }
}

/// Running sums of the five cost components, one step at a time.
#[derive(Debug, Clone, Copy)]
struct CostAccumulator {
    p: ModelParams,
    c: CostBreakdown,
}

impl CostAccumulator {
    fn new(p: &ModelParams) -> Self {
        Self {
            p: *p,
            c: CostBreakdown::default(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn step(&mut self, x: f64, x_next: f64, y: f64, y_next: f64, u: f64, dt: f64, da: f64) {
        let p = &self.p;
        self.c.signal_gain += 0.5 * (x + x_next) * da;
        self.c.transient_cost += p.kappa * u * dt * 0.5 * (y + y_next);
        self.c.temporary_cost += p.lambda * u * u * dt;
        self.c.running_penalty += p.phi * 0.5 * dt * (x * x + x_next * x_next);
    }

    fn finish(mut self, x_terminal: f64) -> CostBreakdown {
        self.c.terminal_penalty = self.p.varrho * x_terminal * x_terminal;
        self.c
    }
}

/// `J̃` components of given state and rate paths: `x`, `y` per node, `u`
/// per step (extra trailing entries ignored), `increments` per step.
pub fn reduced_cost(
    params: &ModelParams,
    grid: &TimeGrid,
    x: &[f64],
    y: &[f64],
    u: &[f64],
    increments: &[f64],
) -> Result<CostBreakdown> {
    let n = grid.n_steps();
    if x.len() != n + 1 || y.len() != n + 1 {
        return Err(Error::GridMismatch("state paths need one value per node"));
    }
    if u.len() < n || increments.len() != n {
        return Err(Error::GridMismatch("rate and signal increments need one value per step"));
    }
    let mut acc = CostAccumulator::new(params);
    for i in 0..n {
        acc.step(x[i], x[i + 1], y[i], y[i + 1], u[i], grid.step(i), increments[i]);
    }
    Ok(acc.finish(x[n]))
}

/// Per-node record of one simulated or closed-form path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    /// Signal rate `I`.
    pub rate: Vec<f64>,
    /// Cumulative signal `A`.
    pub cumulative: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Rate at each node; entry `i < N` is the rate used on step `i`.
    pub u: Vec<f64>,
    pub zeta: Vec<f64>,
    pub cost: CostBreakdown,
}

impl Trajectory {
    pub fn reduced_cost(&self) -> f64 {
        self.cost.total()
    }
}

fn check_grids<P: Policy + ?Sized>(policy: &P, path: &SignalPath) -> Result<()> {
    match policy.grid() {
        Some(g) if g != path.grid() => Err(Error::GridMismatch("policy and signal path use different grids")),
        _ => Ok(()),
    }
}

// Steps the state forward under `policy`, calling `sink(i, x_i, y_i, u_i)`
// for every node (the rate at node N is the policy's rate there).
fn run<P: Policy + ?Sized>(
    params: &ModelParams,
    policy: &P,
    path: &SignalPath,
    mut sink: impl FnMut(usize, f64, f64, f64),
) -> CostBreakdown {
    let grid = path.grid();
    let n = grid.n_steps();
    let (rho, gamma) = (params.rho, params.gamma);
    let rate = path.rate();
    let da = path.increments();
    let mut acc = CostAccumulator::new(params);
    let mut sold = 0.0;
    let mut x = params.x0;
    let mut y = params.y0;
    for i in 0..n {
        let dt = grid.step(i);
        let u = policy.rate(i, x, y, rate[i]);
        sink(i, x, y, u);
        sold += u * dt;
        let x_next = params.x0 - sold;
        let decay = (-rho * dt).exp();
        let y_next = decay * y + gamma * u * -(-rho * dt).exp_m1() / rho;
        acc.step(x, x_next, y, y_next, u, dt, da[i]);
        x = x_next;
        y = y_next;
    }
    sink(n, x, y, policy.rate(n, x, y, rate[n]));
    acc.finish(x)
}

/// Runs `policy` against the market described by `params` along one
/// signal path and records every node.
pub fn simulate_policy<P: Policy + ?Sized>(params: &ModelParams, policy: &P, path: &SignalPath) -> Result<Trajectory> {
    check_grids(policy, path)?;
    let len = path.grid().nodes().len();
    let (mut x, mut y, mut u, mut zeta) = (
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
    );
    let rate = path.rate();
    let cost = run(params, policy, path, |i, xi, yi, ui| {
        x.push(xi);
        y.push(yi);
        u.push(ui);
        zeta.push(policy.zeta(i, rate[i]));
    });
    Ok(Trajectory {
        grid: path.grid().clone(),
        rate: rate.to_vec(),
        cumulative: path.cumulative().to_vec(),
        x,
        y,
        u,
        zeta,
        cost,
    })
}

/// Cost of `policy` along one path without recording the states.
pub fn policy_cost<P: Policy + ?Sized>(params: &ModelParams, policy: &P, path: &SignalPath) -> Result<CostBreakdown> {
    check_grids(policy, path)?;
    Ok(run(params, policy, path, |_, _, _, _| {}))
}

/// Simulates the optimal law on its own market.
pub fn simulate_closed_loop(law: &FeedbackLaw, path: &SignalPath) -> Result<Trajectory> {
    let schedule = law.schedule(path.grid())?;
    simulate_policy(law.params(), &schedule, path)
}

/// Mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        let (mean, stderr) = mean_stderr(xs);
        Self { mean, stderr }
    }

    /// `mean / stderr`, `±∞` for an exact non-zero mean.
    pub fn z_score(&self) -> f64 {
        if self.stderr > 0.0 {
            self.mean / self.stderr
        } else if self.mean == 0.0 {
            0.0
        } else {
            self.mean.signum() * f64::INFINITY
        }
    }
}

/// Per-path reduced costs of several strategies on common signal paths.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub names: Vec<String>,
    /// `costs[strategy][path]`.
    pub costs: Vec<Vec<f64>>,
}

impl McSummary {
    pub fn n_paths(&self) -> usize {
        self.costs.first().map_or(0, Vec::len)
    }

    pub fn estimate(&self, strategy: usize) -> Estimate {
        Estimate::of(&self.costs[strategy])
    }

    /// Paired difference `cost[a] − cost[b]` over the common paths.
    pub fn paired(&self, a: usize, b: usize) -> Estimate {
        let d: Vec<f64> = self.costs[a].iter().zip(&self.costs[b]).map(|(x, y)| x - y).collect();
        Estimate::of(&d)
    }

    /// Strategy indices ordered from best to worst mean cost.
    pub fn ranking(&self) -> Vec<usize> {
        let means: Vec<f64> = (0..self.costs.len()).map(|i| self.estimate(i).mean).collect();
        let mut idx: Vec<usize> = (0..self.costs.len()).collect();
        idx.sort_by(|&a, &b| means[b].total_cmp(&means[a]));
        idx
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Evaluates every policy on the same `n_paths` signal paths (path `k`
/// comes from stream `k` of `seed`) in the market `params`.
pub fn compare_strategies(
    params: &ModelParams,
    policies: &[(&str, &dyn Policy)],
    signal: &SignalModel,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<McSummary> {
    compare_strategies_range(params, policies, signal, grid, 0..n_paths as u64, seed)
}

/// [`compare_strategies`] restricted to a range of path indices, so that
/// callers can split the work and concatenate the results.
pub fn compare_strategies_range(
    params: &ModelParams,
    policies: &[(&str, &dyn Policy)],
    signal: &SignalModel,
    grid: &TimeGrid,
    paths: core::ops::Range<u64>,
    seed: u64,
) -> Result<McSummary> {
    let n = (paths.end - paths.start) as usize;
    let mut costs: Vec<Vec<f64>> = policies.iter().map(|_| Vec::with_capacity(n)).collect();
    for k in paths {
        let path = signal.sample_path(grid, seed, k);
        for (j, (_, policy)) in policies.iter().enumerate() {
            costs[j].push(policy_cost(params, *policy, &path)?.total());
        }
    }
    Ok(McSummary {
        names: policies.iter().map(|(n, _)| String::from(*n)).collect(),
        costs,
    })
}

/// Result of evaluating the full performance functional with a simulated
/// price `P = P₀ + σ_P W + A`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullCostReport {
    pub n_paths: usize,
    pub martingale_vol: f64,
    /// Full `J` per path minus `x·P₀`.
    pub full_minus_initial_value: Estimate,
    pub reduced: Estimate,
    /// Paired `(J − xP₀) − J̃`.
    pub difference: Estimate,
    /// Largest `|J − xP₀ − J̃|` over the paths.
    pub max_abs_difference: f64,
}

impl FullCostReport {
    /// `|difference| ≤ 3 SE`, with an absolute allowance for rounding when
    /// the difference is exactly zero in exact arithmetic.
    pub fn consistent(&self) -> bool {
        let scale = self.reduced.mean.abs().max(1.0);
        self.difference.mean.abs() <= 3.0 * self.difference.stderr + 1e-9 * scale
    }
}

/// Evaluates `J(u) = ∫P u dt − κ∫Yu − λ∫u² + X_T P_T − φ∫X² − ϱX_T²` on
/// simulated prices, pairing it with `J̃` on the same paths. Each step
/// trades at its average price, `Σ (P_i + P_{i+1})/2 · u_i Δ_i`, which by
/// summation by parts matches the trapezoid signal term of `J̃` exactly.
#[allow(clippy::too_many_arguments)]
pub fn full_cost_mc<P: Policy + ?Sized>(
    params: &ModelParams,
    policy: &P,
    signal: &SignalModel,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    martingale_vol: f64,
    initial_price: f64,
) -> Result<FullCostReport> {
    if n_paths < 2 {
        return Err(Error::InvalidArgument("full-cost Monte Carlo needs at least two paths"));
    }
    if !(martingale_vol >= 0.0 && martingale_vol.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "martingale_vol",
            reason: "must be finite and non-negative",
        });
    }
    let n = grid.n_steps();
    let mut full = Vec::with_capacity(n_paths);
    let mut reduced = Vec::with_capacity(n_paths);
    let mut diff = Vec::with_capacity(n_paths);
    let mut prices = alloc::vec![0.0; n + 1];
    let mut terms = Vec::with_capacity(n + 3);
    for k in 0..n_paths as u64 {
        let path = signal.sample_path(grid, seed, k);
        let mut rng = path_rng(seed.wrapping_add(PRICE_SEED_OFFSET), k);
        prices[0] = initial_price;
        for i in 0..n {
            let xi: f64 = StandardNormal.sample(&mut rng);
            prices[i + 1] = prices[i] + martingale_vol * grid.step(i).sqrt() * xi + path.increments()[i];
        }
        let tr = simulate_policy(params, policy, &path)?;
        terms.clear();
        for i in 0..n {
            terms.push(0.5 * (prices[i] + prices[i + 1]) * tr.u[i] * grid.step(i));
        }
        terms.push(tr.x[n] * prices[n]);
        let c = tr.cost;
        let j = pairwise_sum(&terms)
            - c.transient_cost
            - c.temporary_cost
            - c.running_penalty
            - c.terminal_penalty;
        let j0 = j - params.x0 * initial_price;
        let r = c.total();
        full.push(j0);
        reduced.push(r);
        diff.push(j0 - r);
    }
    Ok(FullCostReport {
        n_paths,
        martingale_vol,
        full_minus_initial_value: Estimate::of(&full),
        reduced: Estimate::of(&reduced),
        difference: Estimate::of(&diff),
        max_abs_difference: diff.iter().fold(0.0, |m, d| m.max(d.abs())),
    })
}
