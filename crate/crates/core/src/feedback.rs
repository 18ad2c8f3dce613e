//! The optimal feedback rate, the signal intercept `ζ̂`, the closed-loop
//! matrix `B(t)` and the fundamental-solution form of the optimal `(X, Y)`.

use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{apply2, det2, inverse2, Mat2};
use crate::model::{CoefficientSet, Coefficients, DEFAULT_GAP_FLOOR};
use crate::params::{ModelParams, TimeGrid};
use crate::signal::{make_predictor, Predictor, SignalModel, SignalPath};
use crate::simulate::{reduced_cost, Policy, Trajectory};

/// κ used by the temporary-only reference law.
pub const DEFAULT_KAPPA_SMALL: f64 = 1e-4;

/// Points of the time-to-go grid on which a new law checks that the gap
/// stays away from zero.
pub const ASSUMPTION_GRID: usize = 1001;

const PHI_DET_FLOOR: f64 = 1e-12;

/// Optimal feedback law `û = v0(v1 X + v2 Y) + ζ̂` for one parameter set and
/// one signal model.
#[derive(Clone)]
pub struct FeedbackLaw {
    coeffs: Coefficients,
    signal: SignalModel,
    predictor: Arc<dyn Predictor>,
}

impl core::fmt::Debug for FeedbackLaw {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FeedbackLaw")
            .field("params", self.params())
            .field("signal", &self.signal)
            .finish()
    }
}

impl FeedbackLaw {
    /// Builds the law after checking the gap on a 1001-point grid.
    pub fn new(params: &ModelParams, signal: SignalModel) -> Result<Self> {
        Self::with_floor(params, signal, DEFAULT_GAP_FLOOR)
    }

    pub fn with_floor(params: &ModelParams, signal: SignalModel, floor: f64) -> Result<Self> {
        let coeffs = Coefficients::new(params)?.with_floor(floor);
        let (holds, _) = coeffs.check_assumption(ASSUMPTION_GRID)?;
        if !holds {
            // Locate the offending time-to-go for the error.
            let h = coeffs.horizon() / (ASSUMPTION_GRID - 1) as f64;
            for i in 0..ASSUMPTION_GRID {
                coeffs.at(i as f64 * h)?;
            }
        }
        let predictor: Arc<dyn Predictor> = Arc::from(make_predictor(&signal));
        Ok(Self {
            coeffs,
            signal,
            predictor,
        })
    }

    /// Replaces the conditional-expectation functional, e.g. for a signal
    /// that is not one of the shipped models.
    pub fn with_predictor(mut self, predictor: Arc<dyn Predictor>) -> Self {
        self.predictor = predictor;
        self
    }

    pub fn params(&self) -> &ModelParams {
        self.coeffs.params()
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn signal(&self) -> &SignalModel {
        &self.signal
    }

    pub fn predictor(&self) -> &dyn Predictor {
        self.predictor.as_ref()
    }

    pub fn horizon(&self) -> f64 {
        self.params().horizon
    }

    fn tau(&self, t: f64) -> Result<f64> {
        let h = self.horizon();
        if !(t >= 0.0 && t <= h) {
            return Err(Error::InvalidArgument("time must lie in [0, T]"));
        }
        Ok(h - t)
    }

    /// `v0..v3` at calendar time `t` (time-to-go `T − t`).
    pub fn coefficients_at(&self, t: f64) -> Result<CoefficientSet> {
        self.coeffs.at(self.tau(t)?)
    }

    /// `ζ̂_t = fixed + per_rate · I_t`; returns `(fixed, per_rate)`.
    pub fn zeta_parts(&self, t: f64) -> Result<(f64, f64)> {
        let tau_t = self.tau(t)?;
        if tau_t == 0.0 {
            return Ok((0.0, 0.0));
        }
        let p = self.params();
        let gap_t = self.coeffs.gap(tau_t);
        if !(gap_t.ln_abs() > self.coeffs.floor().ln()) {
            return Err(Error::AssumptionViolated {
                tau: tau_t,
                gap: gap_t.abs(),
            });
        }
        let horizon = p.horizon;
        let w = |s: f64| self.coeffs.signal_weight(tau_t, &gap_t, horizon - s);
        let (fixed, per_rate) = self.predictor.affine_prediction(t, horizon, &w)?;
        let scale = 1.0 / (2.0 * p.lambda);
        Ok((scale * fixed, scale * per_rate))
    }

    /// `ζ̂_t` given the current signal rate.
    pub fn zeta_hat(&self, t: f64, signal_rate: f64) -> Result<f64> {
        let (fixed, per_rate) = self.zeta_parts(t)?;
        Ok(fixed + per_rate * signal_rate)
    }

    /// The optimal trading rate at `(t, X, Y)`. At `t = T` this is the
    /// terminal value `ϱX/λ − κY/(2λ)`.
    pub fn rate(&self, t: f64, x: f64, y: f64, signal_rate: f64) -> Result<f64> {
        let c = self.coefficients_at(t)?;
        Ok(c.x_gain * x + c.y_gain * y + self.zeta_hat(t, signal_rate)?)
    }

    pub fn terminal_rate(&self, x: f64, y: f64) -> f64 {
        let p = self.params();
        p.varrho * x / p.lambda - p.kappa * y / (2.0 * p.lambda)
    }

    /// `B(t) = ((−v0v1, −v0v2), (γv0v1, γv0v2 − ρ))`.
    pub fn b_matrix(&self, t: f64) -> Result<Mat2> {
        let c = self.coefficients_at(t)?;
        Ok(b_from(&c, self.params()))
    }

    /// The adjoint `Z_t` implied by `(X_t, Y_t, u_t)` and the signal.
    pub fn adjoint(&self, t: f64, x: f64, y: f64, u: f64, signal_rate: f64) -> Result<f64> {
        let tau_t = self.tau(t)?;
        let row = self.coeffs.adjoint_row(tau_t);
        let mut z = -(row[0] * x + row[1] * y + row[2] * u);
        if tau_t > 0.0 {
            let horizon = self.horizon();
            let row_t = self.coeffs.eigen().scaled_row(tau_t);
            let w = |s: f64| self.coeffs.kernel_ratios(&row_t, tau_t, horizon - s).0;
            let (fixed, per_rate) = self.predictor.affine_prediction(t, horizon, &w)?;
            z -= (fixed + per_rate * signal_rate) / (2.0 * self.params().lambda);
        }
        Ok(z)
    }

    /// Gains and `ζ̂` parts tabulated on every node of `grid`.
    pub fn schedule(&self, grid: &TimeGrid) -> Result<LawSchedule> {
        if (grid.horizon() - self.horizon()).abs() > 1e-12 * self.horizon() {
            return Err(Error::GridMismatch("grid horizon differs from the law's horizon"));
        }
        let n = grid.nodes().len();
        let mut s = LawSchedule {
            grid: grid.clone(),
            x_gain: Vec::with_capacity(n),
            y_gain: Vec::with_capacity(n),
            zeta_fixed: Vec::with_capacity(n),
            zeta_per_rate: Vec::with_capacity(n),
        };
        for &t in grid.nodes() {
            let t = t.min(self.horizon());
            let c = self.coefficients_at(t)?;
            let (fixed, per_rate) = self.zeta_parts(t)?;
            s.x_gain.push(c.x_gain);
            s.y_gain.push(c.y_gain);
            s.zeta_fixed.push(fixed);
            s.zeta_per_rate.push(per_rate);
        }
        Ok(s)
    }
}

fn b_from(c: &CoefficientSet, p: &ModelParams) -> Mat2 {
    [
        [-c.x_gain, -c.y_gain],
        [p.gamma * c.x_gain, p.gamma * c.y_gain - p.rho],
    ]
}

/// A [`FeedbackLaw`] tabulated on a grid; the form used for simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct LawSchedule {
    grid: TimeGrid,
    pub x_gain: Vec<f64>,
    pub y_gain: Vec<f64>,
    pub zeta_fixed: Vec<f64>,
    pub zeta_per_rate: Vec<f64>,
}

impl LawSchedule {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
}

impl Policy for LawSchedule {
    fn rate(&self, node: usize, x: f64, y: f64, signal_rate: f64) -> f64 {
        self.x_gain[node] * x + self.y_gain[node] * y + self.zeta(node, signal_rate)
    }

    fn zeta(&self, node: usize, signal_rate: f64) -> f64 {
        self.zeta_fixed[node] + self.zeta_per_rate[node] * signal_rate
    }

    fn grid(&self) -> Option<&TimeGrid> {
        Some(&self.grid)
    }
}

/// Solution `Φ` of `Φ' = B(t)Φ`, `Φ(0) = I`, by classical RK4 on a grid.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    grid: TimeGrid,
    phi: Vec<Mat2>,
    phi_inv: Vec<Mat2>,
    b: [f64; 2],
}

impl FundamentalSolution {
    pub fn new(law: &FeedbackLaw, grid: &TimeGrid) -> Result<Self> {
        if (grid.horizon() - law.horizon()).abs() > 1e-12 * law.horizon() {
            return Err(Error::GridMismatch("grid horizon differs from the law's horizon"));
        }
        let horizon = law.horizon();
        let bm = |t: f64| law.b_matrix(t.min(horizon));
        let nodes = grid.nodes();
        let mut phi = Vec::with_capacity(nodes.len());
        let mut current: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
        phi.push(current);
        let mut b_left = bm(nodes[0])?;
        for w in nodes.windows(2) {
            let (t, h) = (w[0], w[1] - w[0]);
            let b_mid = bm(t + 0.5 * h)?;
            let b_right = bm(w[1])?;
            let f = |b: &Mat2, m: &Mat2| mat2_mul(b, m);
            let k1 = f(&b_left, &current);
            let k2 = f(&b_mid, &axpy(&current, 0.5 * h, &k1));
            let k3 = f(&b_mid, &axpy(&current, 0.5 * h, &k2));
            let k4 = f(&b_right, &axpy(&current, h, &k3));
            for i in 0..2 {
                for j in 0..2 {
                    current[i][j] += h / 6.0 * (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]);
                }
            }
            phi.push(current);
            b_left = b_right;
        }
        let mut phi_inv = Vec::with_capacity(phi.len());
        for (m, &t) in phi.iter().zip(nodes) {
            let det = det2(m);
            if !(det.abs() >= PHI_DET_FLOOR) {
                return Err(Error::SingularPhi { t, det });
            }
            phi_inv.push(inverse2(m));
        }
        Ok(Self {
            grid: grid.clone(),
            phi,
            phi_inv,
            b: [-1.0, law.params().gamma],
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn phi(&self, node: usize) -> &Mat2 {
        &self.phi[node]
    }

    pub fn phi_inv(&self, node: usize) -> &Mat2 {
        &self.phi_inv[node]
    }

    pub fn det(&self, node: usize) -> f64 {
        det2(&self.phi[node])
    }

    /// The input vector `(−1, γ)` through which `ζ̂` enters `(X, Y)`.
    pub fn b_vector(&self) -> [f64; 2] {
        self.b
    }
}

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    crate::linalg::mul2(a, b)
}

fn axpy(m: &Mat2, h: f64, k: &Mat2) -> Mat2 {
    [
        [m[0][0] + h * k[0][0], m[0][1] + h * k[0][1]],
        [m[1][0] + h * k[1][0], m[1][1] + h * k[1][1]],
    ]
}

/// `(X, Y)(t) = Φ(t)((x, y) + ∫₀ᵗ ζ̂_s Φ⁻¹(s) b ds)` with the integral by the
/// trapezoid rule on the grid of `fund`; `u` is the feedback rate at each
/// node. Only for signals whose `ζ̂` is deterministic.
pub fn optimal_trajectory_deterministic(law: &FeedbackLaw, fund: &FundamentalSolution) -> Result<Trajectory> {
    if !law.signal().is_deterministic() {
        return Err(Error::InvalidArgument("the fundamental-solution path needs a deterministic signal"));
    }
    let grid = fund.grid();
    let path = law.signal().sample_path(grid, 0, 0);
    let nodes = grid.nodes();
    let p = law.params();
    let b = fund.b_vector();
    let mut zeta = Vec::with_capacity(nodes.len());
    for (&t, &i) in nodes.iter().zip(path.rate()) {
        zeta.push(law.zeta_hat(t.min(p.horizon), i)?);
    }
    let forcing: Vec<[f64; 2]> = (0..nodes.len())
        .map(|k| {
            let v = apply2(fund.phi_inv(k), b);
            [zeta[k] * v[0], zeta[k] * v[1]]
        })
        .collect();
    let mut acc = [p.x0, p.y0];
    let mut x = Vec::with_capacity(nodes.len());
    let mut y = Vec::with_capacity(nodes.len());
    let mut u = Vec::with_capacity(nodes.len());
    for k in 0..nodes.len() {
        if k > 0 {
            let h = nodes[k] - nodes[k - 1];
            acc[0] += 0.5 * h * (forcing[k - 1][0] + forcing[k][0]);
            acc[1] += 0.5 * h * (forcing[k - 1][1] + forcing[k][1]);
        }
        let s = apply2(fund.phi(k), acc);
        let c = law.coefficients_at(nodes[k].min(p.horizon))?;
        x.push(s[0]);
        y.push(s[1]);
        u.push(c.x_gain * s[0] + c.y_gain * s[1] + zeta[k]);
    }
    let cost = reduced_cost(p, grid, &x, &y, &u, path.increments())?;
    Ok(Trajectory {
        grid: grid.clone(),
        rate: path.rate().to_vec(),
        cumulative: path.cumulative().to_vec(),
        x,
        y,
        u,
        zeta,
        cost,
    })
}

/// Closed-form optimal rate at the midpoint of each step of `grid`, read off
/// the fundamental-solution trajectory on the once-refined grid. This is the
/// per-step rate vector compared against the discretised oracle.
pub fn closed_form_step_rates(law: &FeedbackLaw, grid: &TimeGrid) -> Result<Vec<f64>> {
    let fine = grid.refined();
    let traj = optimal_trajectory_deterministic(law, &FundamentalSolution::new(law, &fine)?)?;
    Ok(traj.u.iter().skip(1).step_by(2).copied().collect())
}

/// The three strategies compared in the illustrations.
#[derive(Debug, Clone)]
pub struct ReferenceLaws {
    /// Optimal law using the signal.
    pub adaptive: FeedbackLaw,
    /// Optimal law for the same impact parameters that ignores the signal.
    pub no_signal: FeedbackLaw,
    /// Signal-adaptive law that treats impact as purely temporary, built as
    /// the law for `κ = kappa_small`.
    pub temporary_only: FeedbackLaw,
}

pub fn reference_strategies(params: &ModelParams, signal: &SignalModel, kappa_small: f64) -> Result<ReferenceLaws> {
    Ok(ReferenceLaws {
        adaptive: FeedbackLaw::new(params, signal.clone())?,
        no_signal: FeedbackLaw::new(params, SignalModel::Zero)?,
        temporary_only: FeedbackLaw::new(&params.with_kappa(kappa_small)?, signal.clone())?,
    })
}

/// Signal path of a deterministic model on `grid` (no randomness involved).
pub fn deterministic_path(signal: &SignalModel, grid: &TimeGrid) -> Result<SignalPath> {
    if !signal.is_deterministic() {
        return Err(Error::InvalidArgument("signal is random"));
    }
    Ok(signal.sample_path(grid, 0, 0))
}
