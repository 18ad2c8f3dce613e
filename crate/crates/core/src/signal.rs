//! Predictive signals: the rate `I` of the drift `A_t = ∫₀ᵗ I_s ds`.

use alloc::boxed::Box;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::Coefficients;
use crate::params::TimeGrid;
use crate::quadrature::integrate;

/// Absolute tolerance of every signal-kernel quadrature.
pub const KERNEL_TOL: f64 = 1e-10;

/// Ornstein–Uhlenbeck rate `dI = −βI dt + σ dW`, `I_0 = ι`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuSignalParams {
    pub iota: f64,
    pub beta: f64,
    pub sigma: f64,
}

impl OuSignalParams {
    pub fn new(iota: f64, beta: f64, sigma: f64) -> Result<Self> {
        let p = Self { iota, beta, sigma };
        p.validate()?;
        Ok(p)
    }

    /// ι = 1, β = 0.1, σ = 0.5.
    pub fn baseline() -> Self {
        Self {
            iota: 1.0,
            beta: 0.1,
            sigma: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.iota.is_finite() {
            return Err(Error::InvalidParameter {
                name: "iota",
                reason: "must be finite",
            });
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: "must be finite and strictly positive",
            });
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: "must be finite and non-negative",
            });
        }
        Ok(())
    }

    /// `E[I_t] = ι e^{−βt}`.
    pub fn mean(&self, t: f64) -> f64 {
        self.iota * (-self.beta * t).exp()
    }

    /// `Var[I_t] = σ²(1 − e^{−2βt})/(2β)`.
    pub fn variance(&self, t: f64) -> f64 {
        self.sigma * self.sigma * -(-2.0 * self.beta * t).exp_m1() / (2.0 * self.beta)
    }
}

/// A known, non-random signal rate `t ↦ I(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DeterministicRate {
    Constant(f64),
    /// `I(t) = initial · e^{−decay·t}`, the noise-free OU mean.
    Exponential { initial: f64, decay: f64 },
    /// Piecewise-linear interpolation of `(times, values)`, held constant
    /// outside the table.
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl DeterministicRate {
    pub fn table(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidArgument("rate table needs equally many (>= 1) times and values"));
        }
        if times.iter().chain(values.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("rate table entries must be finite"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("rate table times must be strictly increasing"));
        }
        Ok(Self::Table { times, values })
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Exponential { initial, decay } => initial * (-decay * t).exp(),
            Self::Table { times, values } => {
                let n = times.len();
                if t <= times[0] {
                    return values[0];
                }
                if t >= times[n - 1] {
                    return values[n - 1];
                }
                let k = times.partition_point(|&x| x <= t);
                let (t0, t1) = (times[k - 1], times[k]);
                let (v0, v1) = (values[k - 1], values[k]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    // Points strictly inside (a, b) where the rate is not smooth.
    fn kinks(&self, a: f64, b: f64) -> Vec<f64> {
        match self {
            Self::Table { times, .. } => times.iter().copied().filter(|&x| x > a && x < b).collect(),
            _ => Vec::new(),
        }
    }
}

/// Which signal drives the price.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalModel {
    Zero,
    Deterministic(DeterministicRate),
    OrnsteinUhlenbeck(OuSignalParams),
}

impl SignalModel {
    pub fn is_deterministic(&self) -> bool {
        match self {
            Self::Zero | Self::Deterministic(_) => true,
            Self::OrnsteinUhlenbeck(ou) => ou.sigma == 0.0,
        }
    }

    /// Path number `index` of the family seeded by `seed`.
    pub fn sample_path(&self, grid: &TimeGrid, seed: u64, index: u64) -> SignalPath {
        match self {
            Self::Zero => SignalPath::from_rates(grid, alloc::vec![0.0; grid.nodes().len()]),
            Self::Deterministic(DeterministicRate::Exponential { initial, decay }) => {
                ou_recursion(grid, *initial, *decay, 0.0, &mut path_rng(seed, index))
            }
            Self::Deterministic(rate) => {
                let rates = grid.nodes().iter().map(|&t| rate.value(t)).collect();
                SignalPath::from_rates(grid, rates)
            }
            Self::OrnsteinUhlenbeck(ou) => ou_recursion(grid, ou.iota, ou.beta, ou.sigma, &mut path_rng(seed, index)),
        }
    }

    /// The conditional-expectation functional matching this signal.
    pub fn predictor(&self) -> Box<dyn Predictor> {
        make_predictor(self)
    }
}

/// Independent generator for path `index`: the ChaCha stream `index` of
/// the key derived from `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn ou_recursion(grid: &TimeGrid, iota: f64, beta: f64, sigma: f64, rng: &mut ChaCha8Rng) -> SignalPath {
    let nodes = grid.nodes();
    let mut rate = Vec::with_capacity(nodes.len());
    let mut i_t = iota;
    rate.push(i_t);
    for w in nodes.windows(2) {
        let dt = w[1] - w[0];
        i_t *= (-beta * dt).exp();
        if sigma != 0.0 {
            let sd = sigma * (-(-2.0 * beta * dt).exp_m1() / (2.0 * beta)).sqrt();
            let xi: f64 = StandardNormal.sample(rng);
            i_t += sd * xi;
        }
        rate.push(i_t);
    }
    SignalPath::from_rates(grid, rate)
}

/// Sample paths `0..n_paths` of an OU signal on `grid`.
pub fn simulate_ou_paths(ou: &OuSignalParams, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<Vec<SignalPath>> {
    ou.validate()?;
    if n_paths == 0 {
        return Err(Error::InvalidArgument("need at least one path"));
    }
    let model = SignalModel::OrnsteinUhlenbeck(*ou);
    Ok((0..n_paths as u64).map(|k| model.sample_path(grid, seed, k)).collect())
}

/// Signal rate, per-step increments and cumulative drift on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPath {
    grid: TimeGrid,
    rate: Vec<f64>,
    increments: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SignalPath {
    /// Builds increments by the trapezoid rule on `rate` (one value per node).
    ///
    /// Panics if `rate` does not have one entry per node.
    pub fn from_rates(grid: &TimeGrid, rate: Vec<f64>) -> Self {
        assert_eq!(rate.len(), grid.nodes().len(), "one rate per grid node");
        let nodes = grid.nodes();
        let increments: Vec<f64> = (0..grid.n_steps())
            .map(|i| 0.5 * (rate[i] + rate[i + 1]) * (nodes[i + 1] - nodes[i]))
            .collect();
        let mut cumulative = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        cumulative.push(acc);
        for d in &increments {
            acc += d;
            cumulative.push(acc);
        }
        Self {
            grid: grid.clone(),
            rate,
            increments,
            cumulative,
        }
    }

    pub fn zero(grid: &TimeGrid) -> Self {
        Self::from_rates(grid, alloc::vec![0.0; grid.nodes().len()])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn rate(&self) -> &[f64] {
        &self.rate
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }
}

/// What is known at time `t`: the current signal rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub horizon: f64,
    pub rate: f64,
}

/// Conditional expectations `E_t[∫_t^T w(s) dA_s]` for a Markov signal.
///
/// Every shipped signal gives a prediction affine in the current rate, so
/// the contract is the pair `(fixed, per_rate)` with
/// `E_t[∫ w dA] = fixed + per_rate · I_t`.
pub trait Predictor: Send + Sync {
    fn affine_prediction(&self, t: f64, horizon: f64, w: &dyn Fn(f64) -> f64) -> Result<(f64, f64)>;

    fn expected_weighted_increments(&self, obs: &Observation, w: &dyn Fn(f64) -> f64) -> Result<f64> {
        let (fixed, per_rate) = self.affine_prediction(obs.t, obs.horizon, w)?;
        Ok(fixed + per_rate * obs.rate)
    }

    /// `true` when predictions never depend on the observed rate.
    fn is_deterministic(&self) -> bool;
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroPredictor;

impl Predictor for ZeroPredictor {
    fn affine_prediction(&self, _t: f64, _horizon: f64, _w: &dyn Fn(f64) -> f64) -> Result<(f64, f64)> {
        Ok((0.0, 0.0))
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// `E_t[dA_s] = I(s) ds` for a known rate.
#[derive(Debug, Clone)]
pub struct DeterministicPredictor {
    pub rate: DeterministicRate,
}

impl Predictor for DeterministicPredictor {
    fn affine_prediction(&self, t: f64, horizon: f64, w: &dyn Fn(f64) -> f64) -> Result<(f64, f64)> {
        if t >= horizon {
            return Ok((0.0, 0.0));
        }
        let mut cuts = self.rate.kinks(t, horizon);
        cuts.insert(0, t);
        cuts.push(horizon);
        let pieces = (cuts.len() - 1) as f64;
        let mut total = 0.0;
        for c in cuts.windows(2) {
            total += integrate(|s| w(s) * self.rate.value(s), c[0], c[1], KERNEL_TOL / pieces)?;
        }
        Ok((total, 0.0))
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// `E_t[dA_s] = I_t e^{−β(s−t)} ds` for an OU rate.
#[derive(Debug, Clone, Copy)]
pub struct OuPredictor {
    pub beta: f64,
}

impl Predictor for OuPredictor {
    fn affine_prediction(&self, t: f64, horizon: f64, w: &dyn Fn(f64) -> f64) -> Result<(f64, f64)> {
        if t >= horizon {
            return Ok((0.0, 0.0));
        }
        let beta = self.beta;
        let k = integrate(|s| (-beta * (s - t)).exp() * w(s), t, horizon, KERNEL_TOL)?;
        Ok((0.0, k))
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}

pub fn make_predictor(model: &SignalModel) -> Box<dyn Predictor> {
    match model {
        SignalModel::Zero => Box::new(ZeroPredictor),
        SignalModel::Deterministic(rate) => Box::new(DeterministicPredictor { rate: rate.clone() }),
        SignalModel::OrnsteinUhlenbeck(ou) => Box::new(OuPredictor { beta: ou.beta }),
    }
}

/// `K1(t) = ∫_t^T e^{−β(s−t)} S₄,₃(T−s) ds / S₄,₄(T−t)` and
/// `K2(t) = ∫_t^T e^{−β(s−t)} G₃(T−s) ds / G₃(T−t)`.
pub fn ou_kernels(t: f64, coeffs: &Coefficients, beta: f64) -> Result<(f64, f64)> {
    let horizon = coeffs.horizon();
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::InvalidArgument("kernel time must lie in [0, T]"));
    }
    if t == horizon {
        return Ok((0.0, 0.0));
    }
    let tau_t = horizon - t;
    let row_t = coeffs.eigen().scaled_row(tau_t);
    let k1 = integrate(
        |s| (-beta * (s - t)).exp() * coeffs.kernel_ratios(&row_t, tau_t, horizon - s).0,
        t,
        horizon,
        KERNEL_TOL,
    )?;
    let k2 = integrate(
        |s| (-beta * (s - t)).exp() * coeffs.kernel_ratios(&row_t, tau_t, horizon - s).1,
        t,
        horizon,
        KERNEL_TOL,
    )?;
    Ok((k1, k2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;
    use crate::quadrature::simpson;

    #[test]
    fn noise_free_ou_is_exponential() {
        let grid = TimeGrid::uniform(10.0, 100).unwrap();
        let ou = OuSignalParams::new(1.0, 0.1, 0.0).unwrap();
        let p = &simulate_ou_paths(&ou, &grid, 1, 3).unwrap()[0];
        for (t, i) in grid.nodes().iter().zip(p.rate()) {
            assert!((i - (-0.1 * t).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn exponential_rate_matches_noise_free_ou_bitwise() {
        let grid = TimeGrid::uniform(10.0, 257).unwrap();
        let a = SignalModel::OrnsteinUhlenbeck(OuSignalParams::new(1.0, 0.1, 0.0).unwrap()).sample_path(&grid, 9, 4);
        let b = SignalModel::Deterministic(DeterministicRate::Exponential {
            initial: 1.0,
            decay: 0.1,
        })
        .sample_path(&grid, 1, 0);
        assert_eq!(a, b);
    }

    #[test]
    fn cumulative_is_running_sum_of_increments() {
        let grid = TimeGrid::uniform(5.0, 50).unwrap();
        let p = SignalModel::OrnsteinUhlenbeck(OuSignalParams::baseline()).sample_path(&grid, 1, 2);
        assert_eq!(p.cumulative()[0], 0.0);
        for i in 0..50 {
            assert_eq!(p.cumulative()[i + 1], p.cumulative()[i] + p.increments()[i]);
        }
    }

    #[test]
    fn paths_reproducible_per_index() {
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let m = SignalModel::OrnsteinUhlenbeck(OuSignalParams::baseline());
        assert_eq!(m.sample_path(&grid, 5, 7), m.sample_path(&grid, 5, 7));
        assert_ne!(m.sample_path(&grid, 5, 7), m.sample_path(&grid, 5, 8));
    }

    #[test]
    fn table_interpolates_and_clamps() {
        let r = DeterministicRate::table(alloc::vec![0.0, 1.0, 3.0], alloc::vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(r.value(-1.0), 0.0);
        assert_eq!(r.value(0.5), 1.0);
        assert_eq!(r.value(2.0), 1.0);
        assert_eq!(r.value(9.0), 0.0);
        assert!(DeterministicRate::table(alloc::vec![1.0, 1.0], alloc::vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn predictor_basics() {
        let w = |_s: f64| 1.0;
        let obs = Observation {
            t: 2.0,
            horizon: 10.0,
            rate: 3.0,
        };
        assert_eq!(ZeroPredictor.expected_weighted_increments(&obs, &w).unwrap(), 0.0);
        let d = DeterministicPredictor {
            rate: DeterministicRate::Constant(0.5),
        };
        assert!((d.expected_weighted_increments(&obs, &w).unwrap() - 4.0).abs() < 1e-12);
        let ou = OuPredictor { beta: 0.1 };
        let expect = 3.0 * (1.0 - (-0.8f64).exp()) / 0.1;
        assert!((ou.expected_weighted_increments(&obs, &w).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn kernels_match_simpson() {
        let c = Coefficients::new(&ModelParams::baseline()).unwrap();
        let (k1, k2) = ou_kernels(0.0, &c, 0.1).unwrap();
        let e = c.eigen();
        let s = |tau: f64| e.s_row4(tau).unwrap();
        let g = |tau: f64| e.g_vec(tau).unwrap();
        let r1 = simpson(|x| (-0.1 * x).exp() * s(10.0 - x)[2], 0.0, 10.0, 100_000) / s(10.0)[3];
        let r2 = simpson(|x| (-0.1 * x).exp() * g(10.0 - x)[2], 0.0, 10.0, 100_000) / g(10.0)[2];
        assert!((k1 - r1).abs() < 1e-8, "{k1} {r1}");
        assert!((k2 - r2).abs() < 1e-8, "{k2} {r2}");
        assert_eq!(ou_kernels(10.0, &c, 0.1).unwrap(), (0.0, 0.0));
        let (b1, b2) = ou_kernels(0.0, &c, 1e6).unwrap();
        assert!(b1.abs() < 1e-4 && b2.abs() < 1e-4);
    }
}
