//! Brute-force ground truth: the discretised reduced cost is a concave
//! quadratic in the per-step rates `u ∈ R^N`, maximised by one dense solve.
//!
//! The discretisation is the one in [`crate::simulate`]; costs are
//! evaluated by running the rates through the same stepper, so a strategy
//! simulated there and the same rates scored here agree to rounding.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::feedback::FeedbackLaw;
use crate::linalg::DenseMatrix;
use crate::params::{ModelParams, TimeGrid};
use crate::signal::SignalPath;
use crate::simulate::{policy_cost, CostBreakdown, CostWeights, OpenLoop, Trajectory};

/// Largest number of steps `solve_foc` accepts by default.
pub const DEFAULT_MAX_STEPS: usize = 2000;

/// Discretised deterministic instance: parameters, grid and known signal.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    params: ModelParams,
    path: SignalPath,
    weights: CostWeights,
    max_steps: usize,
}

impl DiscreteProblem {
    /// `params.kappa = 0` is accepted here (purely temporary impact);
    /// every other parameter must pass the usual validation.
    pub fn new(params: &ModelParams, path: SignalPath) -> Result<Self> {
        let check = if params.kappa == 0.0 { params.with_kappa(1.0) } else { Ok(*params) };
        check?.validate()?;
        if !(params.kappa >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "kappa",
                reason: "must be non-negative",
            });
        }
        let grid = path.grid();
        if grid.n_steps() < 2 {
            return Err(Error::InvalidGrid("oracle needs at least two steps"));
        }
        if (grid.horizon() - params.horizon).abs() > 1e-12 * params.horizon {
            return Err(Error::GridMismatch("grid horizon differs from the model horizon"));
        }
        Ok(Self {
            params: *params,
            weights: CostWeights::for_grid(grid),
            path,
            max_steps: DEFAULT_MAX_STEPS,
        })
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &TimeGrid {
        self.path.grid()
    }

    pub fn path(&self) -> &SignalPath {
        &self.path
    }

    pub fn n(&self) -> usize {
        self.grid().n_steps()
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n() {
            return Err(Error::GridMismatch("strategy needs one rate per step"));
        }
        Ok(())
    }

    /// Cost components of the per-step rates `u`.
    pub fn cost_breakdown(&self, u: &[f64]) -> Result<CostBreakdown> {
        self.check_len(u)?;
        policy_cost(&self.params, &OpenLoop(u.to_vec()), &self.path)
    }

    /// `J̃(u)`.
    pub fn cost(&self, u: &[f64]) -> Result<f64> {
        Ok(self.cost_breakdown(u)?.total())
    }

    // a_j = γ(1 − e^{−ρΔ_j})/ρ: distortion added by a unit rate on step j.
    fn push_factors(&self) -> Vec<f64> {
        let p = &self.params;
        self.weights.steps.iter().map(|&d| p.gamma * -(-p.rho * d).exp_m1() / p.rho).collect()
    }

    /// `∂J̃/∂u_j` from the explicit first-variation formula, in O(N).
    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        let p = &self.params;
        let n = self.n();
        let dt = &self.weights.steps;
        let w = &self.weights.nodes;
        let da = self.path.increments();
        let a = self.push_factors();

        // Forward states.
        let mut x = vec![0.0; n + 1];
        let mut y = vec![0.0; n + 1];
        x[0] = p.x0;
        y[0] = p.y0;
        let mut sold = 0.0;
        for i in 0..n {
            sold += u[i] * dt[i];
            x[i + 1] = p.x0 - sold;
            y[i + 1] = (-p.rho * dt[i]).exp() * y[i] + a[i] * u[i];
        }

        // Backward sums.
        let q: Vec<f64> = (0..n).map(|i| dt[i] * u[i]).collect();
        let mut r = vec![0.0; n + 1];
        for j in (0..n).rev() {
            r[j] = q[j] + (-p.rho * dt[j]).exp() * r[j + 1];
        }
        let mut s = vec![0.0; n + 1];
        for j in (0..n).rev() {
            let decay = if j + 1 < n { (-p.rho * dt[j + 1]).exp() } else { 0.0 };
            s[j] = q[j] + decay * s[j + 1];
        }

        let mut g = vec![0.0; n];
        let mut future_signal = 0.0;
        let mut future_x = 0.0;
        for j in (0..n).rev() {
            let signal_after = future_signal + 0.5 * da[j];
            future_signal += da[j];
            future_x += w[j + 1] * x[j + 1];
            let y_bar = 0.5 * (y[j] + y[j + 1]);
            let impact_on_future = 0.5 * a[j] * (r[j + 1] + s[j]);
            g[j] = -dt[j] * signal_after - p.kappa * dt[j] * y_bar - p.kappa * impact_on_future
                - 2.0 * p.lambda * dt[j] * u[j]
                + 2.0 * p.phi * dt[j] * future_x
                + 2.0 * p.varrho * dt[j] * x[n];
        }
        Ok(g)
    }

    /// Hessian `H` and linear term `g` with `J̃(u) = ½uᵀHu + gᵀu + const`.
    pub fn quadratic_form(&self) -> (DenseMatrix, Vec<f64>) {
        let p = &self.params;
        let n = self.n();
        let dt = &self.weights.steps;
        let w = &self.weights.nodes;
        let nodes = self.grid().nodes();
        let da = self.path.increments();
        let a = self.push_factors();

        // tail_w[k] = Σ_{i ≥ k} w_i
        let mut tail_w = vec![0.0; n + 2];
        for k in (0..=n).rev() {
            tail_w[k] = tail_w[k + 1] + w[k];
        }
        // Kernel K_ij = a_j e^{−ρ(t_i − t_{j+1})} for i > j, averaged over
        // rows i and i + 1.
        let kernel = |i: usize, j: usize| {
            if i > j {
                a[j] * (-p.rho * (nodes[i] - nodes[j + 1])).exp()
            } else {
                0.0
            }
        };
        let mut h = DenseMatrix::zeros(n);
        for j in 0..n {
            for l in 0..=j {
                // Σ_{k > max(j, l)} w_k Δ_j Δ_l = Δ_j Δ_l tail_w[j + 1] for l ≤ j.
                let mut v = -2.0 * p.phi * dt[j] * dt[l] * tail_w[j + 1] - 2.0 * p.varrho * dt[j] * dt[l];
                // −κ (D K̄ + K̄ᵀ D)_{jl}
                let kbar_jl = 0.5 * (kernel(j, l) + kernel(j + 1, l));
                let kbar_lj = 0.5 * (kernel(l, j) + kernel(l + 1, j));
                v -= p.kappa * (dt[j] * kbar_jl + dt[l] * kbar_lj);
                if j == l {
                    v -= 2.0 * p.lambda * dt[j];
                }
                h.set(j, l, v);
                h.set(l, j, v);
            }
        }
        let mut g = vec![0.0; n];
        let mut future_signal = 0.0;
        for j in (0..n).rev() {
            let y_bar0 = 0.5 * p.y0 * ((-p.rho * nodes[j]).exp() + (-p.rho * nodes[j + 1]).exp());
            g[j] = 2.0 * p.phi * p.x0 * dt[j] * tail_w[j + 1] + 2.0 * p.varrho * p.x0 * dt[j]
                - p.kappa * dt[j] * y_bar0
                - dt[j] * (future_signal + 0.5 * da[j]);
            future_signal += da[j];
        }
        (h, g)
    }

    /// Maximiser of the discretised cost from the first-order condition
    /// `H u = −g`, with `−H` factorised by Cholesky.
    pub fn solve_foc(&self) -> Result<OracleSolution> {
        if self.n() > self.max_steps {
            return Err(Error::InvalidArgument("too many steps for the dense oracle"));
        }
        let (h, g) = self.quadratic_form();
        let chol = h
            .negated()
            .cholesky()
            .map_err(|(index, pivot)| Error::NotNegativeDefinite { index, pivot: -pivot })?;
        let u_star = chol.solve(&g);
        let grad = self.gradient(&u_star)?;
        let grad_norm = grad.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let g_scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok(OracleSolution {
            cost: self.cost(&u_star)?,
            grad_norm,
            gradient_scale: g_scale,
            min_pivot: chol.min_pivot(),
            hessian_asymmetry: h.asymmetry(),
            u_star,
        })
    }

    /// `⟨∇J̃(u), α⟩ / (‖α‖ · max(1, ‖∇J̃(u)‖))`, with both norms the
    /// discrete `L²(dt)` norms of step functions (the gradient taken as the
    /// density `∂J̃/∂u_j / Δ_j`).
    pub fn gateaux_residual(&self, u: &[f64], alpha: &[f64]) -> Result<f64> {
        self.check_len(alpha)?;
        let g = self.gradient(u)?;
        let dt = &self.weights.steps;
        let inner: f64 = g.iter().zip(alpha).map(|(a, b)| a * b).sum();
        let alpha_norm = alpha.iter().zip(dt).map(|(a, d)| a * a * d).sum::<f64>().sqrt();
        let grad_norm = g.iter().zip(dt).map(|(a, d)| a * a / d).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            return Err(Error::InvalidArgument("direction must be non-zero"));
        }
        Ok(inner / (alpha_norm * grad_norm.max(1.0)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub u_star: Vec<f64>,
    pub cost: f64,
    /// Max-norm of the explicit gradient at `u_star`.
    pub grad_norm: f64,
    /// Max-norm of the linear term, a natural scale for `grad_norm`.
    pub gradient_scale: f64,
    /// Smallest Cholesky pivot of `−H`.
    pub min_pivot: f64,
    /// `max |H − Hᵀ|`.
    pub hessian_asymmetry: f64,
}

/// Finite-difference residuals of the forward-backward optimality system
/// along a deterministic trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbsdeReport {
    pub n_steps: usize,
    /// Max-norm residuals of: the rate equation, the adjoint equation, the
    /// terminal rate condition and the terminal adjoint condition.
    pub raw: [f64; 4],
    /// Scale each residual is measured against.
    pub scales: [f64; 4],
}

impl FbsdeReport {
    pub fn normalized(&self) -> [f64; 4] {
        core::array::from_fn(|k| self.raw[k] / self.scales[k])
    }

    pub fn within(&self, tol: f64) -> bool {
        self.normalized().iter().all(|r| *r <= tol)
    }
}

/// Checks along `traj` (states and rates per node, signal known):
/// `du/dt = I/(2λ) + κρY/(2λ) − φX/λ + ρZ/(2λ)`, `dZ/dt = ρZ + κγu` by
/// forward differences with the right-hand side at the left node, and the
/// terminal conditions `u_T = ϱX_T/λ − κY_T/(2λ)`, `Z_T = 0` as left limits
/// (compared against the last interior node, where the law does not
/// enforce them by construction). `Z` is recovered from `(X, Y, u)`.
pub fn fbsde_residual(traj: &Trajectory, law: &FeedbackLaw) -> Result<FbsdeReport> {
    let p = law.params();
    let grid = &traj.grid;
    let n = grid.n_steps();
    let nodes = grid.nodes();
    if traj.x.len() != n + 1 || traj.u.len() != n + 1 || traj.rate.len() != n + 1 {
        return Err(Error::GridMismatch("trajectory arrays must have one value per node"));
    }
    if n < 2 {
        return Err(Error::InvalidGrid("need at least two steps"));
    }
    let mut z = Vec::with_capacity(n + 1);
    for (k, t) in nodes.iter().enumerate() {
        z.push(law.adjoint(t.min(p.horizon), traj.x[k], traj.y[k], traj.u[k], traj.rate[k])?);
    }
    let (lam, kap, rho) = (p.lambda, p.kappa, p.rho);
    let mut raw = [0.0f64; 4];
    let mut scales = [0.0f64; 4];
    for i in 0..n {
        let h = grid.step(i);
        let du = (traj.u[i + 1] - traj.u[i]) / h;
        let rhs_u = traj.rate[i] / (2.0 * lam) + kap * rho * traj.y[i] / (2.0 * lam) - p.phi * traj.x[i] / lam
            + rho * z[i] / (2.0 * lam);
        raw[0] = raw[0].max((du - rhs_u).abs());
        scales[0] = scales[0].max(du.abs()).max(rhs_u.abs());
        let dz = (z[i + 1] - z[i]) / h;
        let rhs_z = rho * z[i] + kap * p.gamma * traj.u[i];
        raw[1] = raw[1].max((dz - rhs_z).abs());
        scales[1] = scales[1].max(dz.abs()).max(rhs_z.abs());
    }
    let terminal = law.terminal_rate(traj.x[n], traj.y[n]);
    raw[2] = (traj.u[n - 1] - terminal).abs();
    scales[2] = traj.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    raw[3] = z[n - 1].abs();
    scales[3] = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for s in scales.iter_mut() {
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    Ok(FbsdeReport { n_steps: n, raw, scales })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SignalPath;

    fn problem(n: usize) -> DiscreteProblem {
        let p = ModelParams {
            y0: 0.3,
            ..ModelParams::baseline()
        };
        let grid = TimeGrid::uniform(10.0, n).unwrap();
        let rates = grid.nodes().iter().map(|t| (-0.1 * t).exp()).collect();
        DiscreteProblem::new(&p, SignalPath::from_rates(&grid, rates)).unwrap()
    }

    #[test]
    fn explicit_gradient_matches_quadratic_form() {
        let prob = problem(40);
        let (h, g) = prob.quadratic_form();
        let u: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let hu = h.mul_vec(&u);
        let grad = prob.gradient(&u).unwrap();
        for j in 0..40 {
            assert!((grad[j] - (hu[j] + g[j])).abs() < 1e-10 * (1.0 + grad[j].abs()), "{j}");
        }
        assert_eq!(h.asymmetry(), 0.0);
    }

    #[test]
    fn foc_solution_is_stationary() {
        let prob = problem(60);
        let sol = prob.solve_foc().unwrap();
        assert!(sol.grad_norm <= 1e-9 * sol.gradient_scale);
        assert!(sol.min_pivot > 0.0);
        let mut worse = sol.u_star.clone();
        worse[10] += 0.01;
        assert!(prob.cost(&worse).unwrap() < sol.cost);
    }

    #[test]
    fn empty_position_stays_empty() {
        let p = ModelParams {
            x0: 0.0,
            y0: 0.0,
            ..ModelParams::baseline()
        };
        let grid = TimeGrid::uniform(10.0, 30).unwrap();
        let prob = DiscreteProblem::new(&p, SignalPath::zero(&grid)).unwrap();
        assert!(prob.gradient(&[0.0; 30]).unwrap().iter().all(|g| *g == 0.0));
        let sol = prob.solve_foc().unwrap();
        assert!(sol.u_star.iter().all(|u| *u == 0.0));
    }

    #[test]
    fn zero_kappa_is_accepted() {
        let p = ModelParams {
            kappa: 0.0,
            ..ModelParams::baseline()
        };
        let grid = TimeGrid::uniform(10.0, 30).unwrap();
        assert!(DiscreteProblem::new(&p, SignalPath::zero(&grid)).unwrap().solve_foc().is_ok());
        let bad = ModelParams { kappa: -1.0, ..p };
        assert!(DiscreteProblem::new(&bad, SignalPath::zero(&grid)).is_err());
    }
}
