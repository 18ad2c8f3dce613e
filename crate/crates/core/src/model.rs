//! System matrix, explicit eigen-decomposition and the feedback coefficients.
//!
//! Every time-dependent quantity is a combination of `cosh`/`sinh` of
//! `ν₁τ` and `ν₃τ`. Internally those four functions are evaluated with the
//! common factor `e^{|ν₃|τ}` removed (see [`ScaledRow`]), so the ratios
//! that enter the feedback law never overflow. The unscaled accessors
//! report [`Error::Overflow`] once `|ν₃|τ > 700`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{inverse4, max_abs_diff4, mul4, Mat4, IDENTITY4};
use crate::params::ModelParams;

/// Floor on `|G₃S₄,₄ − G₄S₄,₃|` below which `v0` counts as undefined.
pub const DEFAULT_GAP_FLOOR: f64 = 1e-10;

const OVERFLOW_EXPONENT: f64 = 700.0;
const U_INVERSE_TOL: f64 = 1e-9;

/// The 4×4 matrix driving the linear system in `(X, Y, u, Z)`.
pub fn matrix_l(p: &ModelParams) -> Mat4 {
    let l = p.lambda;
    [
        [0.0, 0.0, -1.0, 0.0],
        [0.0, -p.rho, p.gamma, 0.0],
        [-p.phi / l, p.kappa * p.rho / (2.0 * l), 0.0, p.rho / (2.0 * l)],
        [0.0, 0.0, p.kappa * p.gamma, p.rho],
    ]
}

// Index of each function in `EigenSystem::combos`.
const S41: usize = 0;
const S42: usize = 1;
const S43: usize = 2;
const S44: usize = 3;
const G1: usize = 4;
const G2: usize = 5;
const G3: usize = 6;
const G4: usize = 7;

/// Eigen-decomposition `L = U D U⁻¹` with `D = diag(ν₁, −ν₁, ν₃, −ν₃)`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    params: ModelParams,
    theta: f64,
    c1: f64,
    c2: f64,
    nu1: f64,
    nu3: f64,
    mat_l: Mat4,
    mat_u: Mat4,
    mat_u_inv: Mat4,
    u_inverse_residual: f64,
    explicit_inverse: bool,
    // Coefficients of (cosh ν₁τ, sinh ν₁τ, cosh ν₃τ, sinh ν₃τ) for
    // S₄,₁..S₄,₄ followed by G₁..G₄.
    combos: [[f64; 4]; 8],
    // Same functions as coefficients of e^{dτ} for d in `diagonal()`.
    modes: [[f64; 4]; 8],
}

impl EigenSystem {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let ModelParams {
            lambda: lam,
            gamma: g,
            kappa: k,
            rho: r,
            varrho: vr,
            phi,
            ..
        } = *params;
        let kg = k * g;
        let theta = lam * r * r + r * kg + phi;
        let s = (lam * r * r + r * kg - phi).hypot(2.0 * (phi * r * kg).sqrt());
        let c1 = theta / lam;
        let c2 = s / lam;

        // ν₁² and ν₃² from forms free of the c1 − c2 cancellation.
        let nu1_sq = 2.0 * phi * r * r / (theta + s);
        let nu3_sq = (theta + s) / (2.0 * lam);
        if !(nu1_sq > 0.0) || !nu1_sq.is_finite() || !nu3_sq.is_finite() {
            return Err(Error::NonPositiveDiscriminant(2.0 * nu1_sq));
        }
        let nu1 = -nu1_sq.sqrt();
        let nu3 = -nu3_sq.sqrt();

        // d = ν² − ρ², each computed on the branch without cancellation.
        let a = phi + kg * r - lam * r * r;
        let kr3 = 2.0 * kg * r * r * r;
        let d3 = if a >= 0.0 { (a + s) / (2.0 * lam) } else { kr3 / (s - a) };
        let d1 = if a <= 0.0 { (a - s) / (2.0 * lam) } else { -kr3 / (s + a) };
        let dn = -s / lam;

        let n1m = nu1 - r;
        let n3m = nu3 - r;
        let n1p = d1 / n1m;
        let n3p = d3 / n3m;

        let mat_u = [
            [-n1m / (kg * nu1), -n1p / (kg * nu1), -n3m / (kg * nu3), -n3p / (kg * nu3)],
            [n1m / (k * n1p), n1p / (k * n1m), n3m / (k * n3p), n3p / (k * n3m)],
            [n1m / kg, -n1p / kg, n3m / kg, -n3p / kg],
            [1.0, 1.0, 1.0, 1.0],
        ];
        let f = 1.0 / (4.0 * r * r * dn);
        let kdd = k * d1 * d3;
        let a1 = 2.0 * kg * nu1 * nu3_sq;
        let a3 = 2.0 * kg * nu1_sq * nu3;
        let b = 2.0 * kg * r * r;
        let explicit = [
            [-a1 * n1p * f, -kdd * f, b * n1p * f, -d3 * n1p * n1p * f],
            [-a1 * n1m * f, -kdd * f, -b * n1m * f, -d3 * n1m * n1m * f],
            [a3 * n3p * f, kdd * f, -b * n3p * f, d1 * n3p * n3p * f],
            [a3 * n3m * f, kdd * f, b * n3m * f, d1 * n3m * n3m * f],
        ];
        let residual = |inv: &Mat4| max_abs_diff4(&mul4(&mat_u, inv), &IDENTITY4);
        let explicit_res = residual(&explicit);
        let (mat_u_inv, u_inverse_residual, explicit_inverse) = if explicit_res <= U_INVERSE_TOL {
            (explicit, explicit_res, true)
        } else {
            let numeric = inverse4(&mat_u).ok_or(Error::SingularU(explicit_res))?;
            let numeric_res = residual(&numeric);
            if !(numeric_res <= U_INVERSE_TOL) {
                return Err(Error::SingularU(numeric_res.min(explicit_res)));
            }
            (numeric, numeric_res, false)
        };

        let (n1s, n3s, r2) = (nu1_sq, nu3_sq, r * r);
        let mut combos = [[0.0; 4]; 8];
        {
            let c = kg * nu1 * nu3 / (r2 * dn);
            combos[S41] = [-c * nu1 * nu3, -c * r * nu3, c * nu1 * nu3, c * r * nu1];
            let c = k * d1 * d3 / (2.0 * r2 * dn);
            combos[S42] = [-c, 0.0, c, 0.0];
            let c = kg / dn;
            combos[S43] = [c * r, c * nu1, -c * r, -c * nu3];
            let c = 1.0 / (2.0 * r2 * dn);
            combos[S44] = [
                -c * (n1s + r2) * d3,
                -c * 2.0 * r * nu1 * d3,
                c * d1 * (n3s + r2),
                c * 2.0 * r * nu3 * d1,
            ];
            let c = 1.0 / (2.0 * lam * r2 * dn);
            combos[G1] = [
                c * (2.0 * vr * n3s * d1 + kg * n1s * n3s),
                c * (2.0 * lam * nu1 * n3s * d1 - kg * r * nu1 * n3s),
                -c * (2.0 * vr * n1s * d3 + kg * n1s * n3s),
                -c * (2.0 * lam * n1s * nu3 * d3 - kg * r * n1s * nu3),
            ];
            let c = 1.0 / (4.0 * g * lam * r2 * nu1 * nu3 * dn);
            combos[G2] = [
                c * nu1 * nu3 * d3 * (2.0 * d1 * (vr - lam * r) + kg * (n1s + r2)),
                -c * nu3 * d3 * (2.0 * d1 * (vr * r - lam * n1s) + 2.0 * kg * r * n1s),
                -c * nu1 * nu3 * d1 * (2.0 * d3 * (vr - lam * r) + kg * (n3s + r2)),
                c * nu1 * d1 * (2.0 * d3 * (vr * r - lam * n3s) + 2.0 * kg * r * n3s),
            ];
            let c = 1.0 / (2.0 * lam * nu1 * nu3 * dn);
            combos[G3] = [
                c * nu1 * nu3 * (kg * r - 2.0 * lam * d1),
                -c * nu3 * (kg * n1s + 2.0 * vr * d1),
                -c * nu1 * nu3 * (kg * r - 2.0 * lam * d3),
                c * nu1 * (kg * n3s + 2.0 * vr * d3),
            ];
            let c = d1 * d3 / (4.0 * kg * lam * r2 * nu1 * nu3 * dn);
            let p = 2.0 * vr + kg + 2.0 * lam * r;
            combos[G4] = [
                c * nu1 * nu3 * p,
                c * 2.0 * nu3 * (r * vr + lam * n1s),
                -c * nu1 * nu3 * p,
                -c * 2.0 * nu1 * (r * vr + lam * n3s),
            ];
        }

        let modes = combos.map(|c| {
            [
                0.5 * (c[0] + c[1]),
                0.5 * (c[0] - c[1]),
                0.5 * (c[2] + c[3]),
                0.5 * (c[2] - c[3]),
            ]
        });

        Ok(Self {
            params: *params,
            theta,
            c1,
            c2,
            nu1,
            nu3,
            mat_l: matrix_l(params),
            mat_u,
            mat_u_inv,
            u_inverse_residual,
            explicit_inverse,
            combos,
            modes,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// The slower eigenvalue ν₁ (negative).
    pub fn nu1(&self) -> f64 {
        self.nu1
    }

    /// The faster eigenvalue ν₃ (negative, `|ν₃| ≥ |ν₁|`).
    pub fn nu3(&self) -> f64 {
        self.nu3
    }

    /// `(ν₁, −ν₁, ν₃, −ν₃)`.
    pub fn diagonal(&self) -> [f64; 4] {
        [self.nu1, -self.nu1, self.nu3, -self.nu3]
    }

    pub fn matrix_l(&self) -> &Mat4 {
        &self.mat_l
    }

    pub fn matrix_u(&self) -> &Mat4 {
        &self.mat_u
    }

    pub fn matrix_u_inv(&self) -> &Mat4 {
        &self.mat_u_inv
    }

    /// `‖U·U⁻¹ − I‖_max` of the inverse in use.
    pub fn u_inverse_residual(&self) -> f64 {
        self.u_inverse_residual
    }

    /// Whether the closed-form inverse passed its residual check (otherwise
    /// a numeric inverse is in use).
    pub fn uses_explicit_inverse(&self) -> bool {
        self.explicit_inverse
    }

    /// `U · e^{Dτ} · U⁻¹`.
    pub fn expm_s(&self, tau: f64) -> Result<Mat4> {
        self.check_tau(tau)?;
        let e = self.diagonal().map(|d| (d * tau).exp());
        let mut ue = self.mat_u;
        for row in ue.iter_mut() {
            for (x, ej) in row.iter_mut().zip(e.iter()) {
                *x *= ej;
            }
        }
        Ok(mul4(&ue, &self.mat_u_inv))
    }

    /// `(cosh ν₁τ, sinh ν₁τ, cosh ν₃τ, sinh ν₃τ) · e^{−|ν₃|τ}` and the
    /// removed exponent `|ν₃|τ`.
    pub fn scaled_hyperbolics(&self, tau: f64) -> ([f64; 4], f64) {
        let a = -self.nu1;
        let b = -self.nu3;
        let lead = (-(b - a) * tau).exp();
        let e1 = (-2.0 * a * tau).exp_m1();
        let e3 = (-2.0 * b * tau).exp_m1();
        (
            [
                lead * (2.0 + e1) * 0.5,
                lead * e1 * 0.5,
                (2.0 + e3) * 0.5,
                e3 * 0.5,
            ],
            b * tau,
        )
    }

    /// Fourth row of `exp(Lτ)` and the `G` row, both scaled by `e^{−|ν₃|τ}`.
    pub fn scaled_row(&self, tau: f64) -> ScaledRow {
        let (h, log_scale) = self.scaled_hyperbolics(tau);
        let eval = |c: &[f64; 4]| c[0] * h[0] + c[1] * h[1] + c[2] * h[2] + c[3] * h[3];
        let mut s = [0.0; 4];
        let mut g = [0.0; 4];
        for j in 0..4 {
            s[j] = eval(&self.combos[S41 + j]);
            g[j] = eval(&self.combos[G1 + j]);
        }
        ScaledRow { s, g, log_scale }
    }

    /// `(S₄,₁(τ), …, S₄,₄(τ))` from the explicit hyperbolic formulas.
    pub fn s_row4(&self, tau: f64) -> Result<[f64; 4]> {
        self.check_tau(tau)?;
        self.scaled_row(tau).s_unscaled()
    }

    /// `(G₁(τ), …, G₄(τ)) = (ϱ/λ, −κ/(2λ), −1, 0) · exp(Lτ)` from the
    /// explicit hyperbolic formulas.
    pub fn g_vec(&self, tau: f64) -> Result<[f64; 4]> {
        self.check_tau(tau)?;
        self.scaled_row(tau).g_unscaled()
    }

    /// The row vector `(ϱ/λ, −κ/(2λ), −1, 0)` that defines `G`.
    pub fn terminal_row(&self) -> [f64; 4] {
        let p = &self.params;
        [p.varrho / p.lambda, -p.kappa / (2.0 * p.lambda), -1.0, 0.0]
    }

    /// `P(τ_t)Q(τ_s) − R(τ_t)S(τ_s)` scaled by `e^{−(|ν₁|+|ν₃|)τ_t}`, for
    /// pairs where `(P, R)` are entries of one row of `exp(Lτ)`-combinations
    /// and `(Q, S)` the matching entries of another, so that the products of
    /// equal eigen-modes cancel identically. Those terms are dropped rather
    /// than evaluated; every remaining exponent is non-positive when
    /// `τ_s ≤ τ_t`.
    fn cross(&self, p: usize, q: usize, r: usize, s: usize, tau_t: f64, tau_s: f64) -> f64 {
        let d = self.diagonal();
        let shift = (self.nu1 + self.nu3) * tau_t;
        let (mp, mq, mr, ms) = (&self.modes[p], &self.modes[q], &self.modes[r], &self.modes[s]);
        let mut acc = 0.0;
        for k in 0..4 {
            for l in 0..4 {
                if k != l {
                    let c = mp[k] * mq[l] - mr[k] * ms[l];
                    acc += c * (d[k] * tau_t + d[l] * tau_s + shift).exp();
                }
            }
        }
        acc
    }

    fn cross_log_scale(&self, tau: f64) -> f64 {
        -(self.nu1 + self.nu3) * tau
    }

    fn check_tau(&self, tau: f64) -> Result<()> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument("time-to-go must be finite and non-negative"));
        }
        let e = -self.nu3 * tau;
        if e > OVERFLOW_EXPONENT {
            return Err(Error::Overflow(e));
        }
        Ok(())
    }
}

/// `S₄,·(τ)` and `G(τ)` multiplied by `e^{−log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledRow {
    pub s: [f64; 4],
    pub g: [f64; 4],
    pub log_scale: f64,
}

impl ScaledRow {
    pub fn s_unscaled(&self) -> Result<[f64; 4]> {
        let f = self.factor()?;
        Ok(self.s.map(|x| x * f))
    }

    pub fn g_unscaled(&self) -> Result<[f64; 4]> {
        let f = self.factor()?;
        Ok(self.g.map(|x| x * f))
    }

    /// `ln S₄,₄(τ)`, NaN when the scaled value is not positive.
    pub fn ln_s44(&self) -> f64 {
        if self.s[3] > 0.0 {
            self.s[3].ln() + self.log_scale
        } else {
            f64::NAN
        }
    }

    /// `ln(−G₃(τ))`, NaN when the scaled value is not negative.
    pub fn ln_neg_g3(&self) -> f64 {
        if self.g[2] < 0.0 {
            (-self.g[2]).ln() + self.log_scale
        } else {
            f64::NAN
        }
    }

    fn factor(&self) -> Result<f64> {
        if self.log_scale > OVERFLOW_EXPONENT {
            return Err(Error::Overflow(self.log_scale));
        }
        Ok(self.log_scale.exp())
    }
}

/// Values of `v0..v3` at one time-to-go, plus the products `v0·v1` and
/// `v0·v2` that the feedback law actually multiplies `X` and `Y` by.
///
/// `v0` grows like `e^{(|ν₃|−|ν₁|)τ}` and may be `+∞` for long horizons;
/// the products stay bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    pub v0: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub x_gain: f64,
    pub y_gain: f64,
}

/// The gap `G₃S₄,₄ − G₄S₄,₃` at one time-to-go, stored as a scaled value
/// and the removed exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub scaled: f64,
    pub log_scale: f64,
}

impl Gap {
    /// `|G₃S₄,₄ − G₄S₄,₃|`, saturating to `+∞`.
    pub fn abs(&self) -> f64 {
        let ln = self.ln_abs();
        if ln > 709.0 {
            f64::INFINITY
        } else {
            ln.exp()
        }
    }

    pub fn ln_abs(&self) -> f64 {
        self.scaled.abs().ln() + self.log_scale
    }
}

/// Evaluator of the feedback coefficients `v0..v3` as functions of
/// time-to-go, together with the signal weights that enter `ζ̂`.
#[derive(Debug, Clone)]
pub struct Coefficients {
    eig: EigenSystem,
    floor: f64,
}

impl Coefficients {
    pub fn new(params: &ModelParams) -> Result<Self> {
        Ok(Self::from_eigen(EigenSystem::new(params)?))
    }

    pub fn from_eigen(eig: EigenSystem) -> Self {
        Self {
            eig,
            floor: DEFAULT_GAP_FLOOR,
        }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn eigen(&self) -> &EigenSystem {
        &self.eig
    }

    pub fn params(&self) -> &ModelParams {
        self.eig.params()
    }

    pub fn horizon(&self) -> f64 {
        self.eig.params().horizon
    }

    /// `G₃(τ)S₄,₄(τ) − G₄(τ)S₄,₃(τ)`.
    pub fn gap(&self, tau: f64) -> Gap {
        Gap {
            scaled: self.eig.cross(G3, S44, G4, S43, tau, tau),
            log_scale: self.eig.cross_log_scale(tau),
        }
    }

    /// `v0..v3` at time-to-go `tau`.
    pub fn at(&self, tau: f64) -> Result<CoefficientSet> {
        check_time_to_go(tau)?;
        let row = self.eig.scaled_row(tau);
        let gap = self.gap(tau);
        if !(gap.ln_abs() > self.floor.ln()) {
            return Err(Error::AssumptionViolated { tau, gap: gap.abs() });
        }
        let e = &self.eig;
        let (s, g) = (&row.s, &row.g);
        let v3 = g[3] / g[2];
        let v1 = v3 * s[0] / s[3] - g[0] / g[2];
        let v2 = v3 * s[1] / s[3] - g[1] / g[2];
        // v0 = G₃S₄,₄ / gap; numerator carries e^{2|ν₃|τ}, gap e^{(|ν₁|+|ν₃|)τ}.
        let v0 = g[2] * s[3] / gap.scaled * ((e.nu1 - e.nu3) * tau).exp();
        let x_gain = e.cross(G4, S41, G1, S44, tau, tau) / gap.scaled;
        let y_gain = e.cross(G4, S42, G2, S44, tau, tau) / gap.scaled;
        Ok(CoefficientSet {
            v0,
            v1,
            v2,
            v3,
            x_gain,
            y_gain,
        })
    }

    /// Weight of `dA_s` inside `2λ·ζ̂_t`, i.e. `v0(T−t)·w(s)` with
    /// `w(s) = v3(T−t)·S₄,₃(T−s)/S₄,₄(T−t) − G₃(T−s)/G₃(T−t)`; equals `−1`
    /// at `s = t`. Arguments are time-to-go values with `tau_s ≤ tau_t`.
    pub fn signal_weight(&self, tau_t: f64, gap_t: &Gap, tau_s: f64) -> f64 {
        self.eig.cross(G4, S43, S44, G3, tau_t, tau_s) / gap_t.scaled
    }

    /// Ratios `(S₄,₃(T−s)/S₄,₄(T−t), G₃(T−s)/G₃(T−t))` for `tau_s ≤ tau_t`.
    pub fn kernel_ratios(&self, row_t: &ScaledRow, tau_t: f64, tau_s: f64) -> (f64, f64) {
        let row_s = self.eig.scaled_row(tau_s);
        let decay = (self.eig.nu3 * (tau_t - tau_s)).exp();
        (decay * row_s.s[2] / row_t.s[3], decay * row_s.g[2] / row_t.g[2])
    }

    /// `S₄,·(T−t)/S₄,₄(T−t)`, the row that expresses `Z` in terms of
    /// `(X, Y, u)`.
    pub fn adjoint_row(&self, tau: f64) -> [f64; 4] {
        let row = self.eig.scaled_row(tau);
        row.s.map(|x| x / row.s[3])
    }

    /// Evaluates the gap `G₃S₄,₄ − G₄S₄,₃` on `grid_n` equally spaced
    /// time-to-go values over `[0, T]`; returns whether its absolute value
    /// stays above the floor everywhere and the smallest absolute value.
    pub fn check_assumption(&self, grid_n: usize) -> Result<(bool, f64)> {
        if grid_n < 2 {
            return Err(Error::InvalidArgument("assumption grid needs at least two points"));
        }
        let h = self.horizon() / (grid_n - 1) as f64;
        let mut min_gap = f64::INFINITY;
        for i in 0..grid_n {
            let gap = self.gap(i as f64 * h).abs();
            // NaN propagates as a failure.
            if !(gap >= min_gap) {
                min_gap = gap;
            }
        }
        Ok((min_gap > self.floor, min_gap))
    }
}

fn check_time_to_go(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument("time-to-go must be finite and non-negative"));
    }
    Ok(())
}

/// Convenience wrapper around [`Coefficients::check_assumption`].
pub fn check_assumption(params: &ModelParams, grid_n: usize) -> Result<(bool, f64)> {
    Coefficients::new(params)?.check_assumption(grid_n)
}

/// One failing sample of an assumption sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    /// `(λ, γ, κ, ρ, ϱ, φ, T)`.
    pub xi: [f64; 7],
    pub min_gap: f64,
    pub error: Option<Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub samples: usize,
    pub grid_n: usize,
    pub failures: Vec<SweepFailure>,
    /// Smallest `|G₃S₄,₄ − G₄S₄,₃|` over all successfully evaluated samples.
    pub min_gap: f64,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Samples `(λ, γ, κ, ρ, ϱ, φ, T)` uniformly from the half-open box
/// `(lo, hi]` and runs the assumption check on each tuple.
pub fn sweep_assumption(
    lo: [f64; 7],
    hi: [f64; 7],
    samples: usize,
    grid_n: usize,
    seed: u64,
) -> Result<SweepReport> {
    for i in 0..7 {
        if !(lo[i] >= 0.0 && lo[i] <= hi[i] && hi[i] > 0.0 && hi[i].is_finite()) {
            return Err(Error::InvalidArgument("sweep box needs 0 <= lo <= hi, hi > 0, finite"));
        }
    }
    if grid_n < 2 {
        return Err(Error::InvalidArgument("assumption grid needs at least two points"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut min_gap = f64::INFINITY;
    for _ in 0..samples {
        let mut xi = [0.0; 7];
        for j in 0..7 {
            let u: f64 = rng.random();
            xi[j] = hi[j] - (hi[j] - lo[j]) * u;
        }
        let outcome = ModelParams::from_xi(xi, 1.0, 0.0).and_then(|p| check_assumption(&p, grid_n));
        match outcome {
            Ok((holds, gap)) => {
                min_gap = min_gap.min(gap);
                if !holds {
                    failures.push(SweepFailure {
                        xi,
                        min_gap: gap,
                        error: None,
                    });
                }
            }
            Err(e) => failures.push(SweepFailure {
                xi,
                min_gap: f64::NAN,
                error: Some(e),
            }),
        }
    }
    Ok(SweepReport {
        samples,
        grid_n,
        failures,
        min_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm4, max_abs4, scale4, vec_mul4};

    fn baseline() -> EigenSystem {
        EigenSystem::new(&ModelParams::baseline()).unwrap()
    }

    #[test]
    fn system_matrix_entries() {
        let l = matrix_l(&ModelParams::baseline());
        assert_eq!(l[2], [-0.2, 1.0, 0.0, 1.0]);
        assert_eq!(l[0][2], -1.0);
        assert_eq!(l[3][3], 1.0);
    }

    #[test]
    fn baseline_constants() {
        let e = baseline();
        assert!((e.theta() - 1.6).abs() < 1e-14);
        assert!((e.c1() - 3.2).abs() < 1e-14);
        // c2 = sqrt(1.4² + 0.4) / 0.5
        assert!((e.c2() - 2.0 * 2.36f64.sqrt()).abs() < 1e-13);
        assert!((e.nu1() + ((e.c1() - e.c2()) / 2.0).sqrt()).abs() < 1e-12);
        assert!((e.nu3() + ((e.c1() + e.c2()) / 2.0).sqrt()).abs() < 1e-12);
        assert!((e.nu1() + 0.252_529).abs() < 1e-5);
        assert!((e.nu3() + 1.770_940).abs() < 1e-5);
        assert!(e.uses_explicit_inverse());
    }

    #[test]
    fn decomposition_reproduces_l() {
        let e = baseline();
        let d = e.diagonal();
        let mut ud = *e.matrix_u();
        for row in ud.iter_mut() {
            for j in 0..4 {
                row[j] *= d[j];
            }
        }
        let rebuilt = mul4(&ud, e.matrix_u_inv());
        assert!(max_abs_diff4(&rebuilt, e.matrix_l()) <= 1e-9 * max_abs4(e.matrix_l()));
    }

    #[test]
    fn rows_at_zero() {
        let e = baseline();
        let s = e.s_row4(0.0).unwrap();
        let g = e.g_vec(0.0).unwrap();
        for (a, b) in s.iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-13);
        }
        for (a, b) in g.iter().zip([20.0, -1.0, -1.0, 0.0]) {
            assert!((a - b).abs() < 1e-12, "{g:?}");
        }
        assert_eq!(e.expm_s(0.0).unwrap().map(|r| r.map(|x| (x * 1e9).round() / 1e9)), IDENTITY4);
    }

    #[test]
    fn explicit_rows_match_matrix_exponential() {
        let e = baseline();
        for tau in [0.3, 1.0, 2.0, 5.0, 10.0] {
            let reference = expm4(&scale4(e.matrix_l(), tau));
            let s = e.s_row4(tau).unwrap();
            let scale = reference[3].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for j in 0..4 {
                assert!((s[j] - reference[3][j]).abs() <= 1e-10 * scale, "tau {tau} j {j}");
            }
            let gref = vec_mul4(&e.terminal_row(), &reference);
            let g = e.g_vec(tau).unwrap();
            let gscale = gref.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for j in 0..4 {
                assert!((g[j] - gref[j]).abs() <= 1e-9 * gscale, "tau {tau} j {j}");
            }
        }
    }

    #[test]
    fn coefficients_at_terminal_time() {
        let c = Coefficients::new(&ModelParams::baseline()).unwrap();
        let v = c.at(0.0).unwrap();
        assert_eq!(v.v3, 0.0);
        assert!((v.v0 - 1.0).abs() < 1e-14);
        // v1 = −G1/G3 = ϱ/λ, v2 = −G2/G3 = −κ/(2λ)
        assert!((v.v1 - 20.0).abs() < 1e-12);
        assert!((v.v2 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn coefficients_finite_on_baseline_grid() {
        let c = Coefficients::new(&ModelParams::baseline()).unwrap();
        for i in 0..=100 {
            let v = c.at(i as f64 * 0.1).unwrap();
            assert!(v.v0.is_finite() && v.v1.is_finite() && v.v2.is_finite() && v.v3.is_finite());
            assert!((v.x_gain - v.v0 * v.v1).abs() <= 1e-7 * v.x_gain.abs().max(1.0));
            assert!((v.y_gain - v.v0 * v.v2).abs() <= 1e-7 * v.y_gain.abs().max(1.0));
        }
        // Reference values from a direct evaluation of the ratios.
        let v = c.at(1.0).unwrap();
        assert!((v.v0 - 1.570_844_082_587_828).abs() < 1e-9);
        assert!((v.v3 - 0.619_315_019_791_149).abs() < 1e-12);
        let v = c.at(10.0).unwrap();
        assert!((v.v0 / 596_156.961_943_938 - 1.0).abs() < 1e-6);
        let (holds, gap) = c.check_assumption(1001).unwrap();
        assert!(holds);
        assert!((gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn floor_triggers_assumption_error() {
        let c = Coefficients::new(&ModelParams::baseline()).unwrap().with_floor(2.0);
        assert!(matches!(c.at(0.0), Err(Error::AssumptionViolated { .. })));
        assert!(!c.check_assumption(11).unwrap().0);
    }

    #[test]
    fn overflow_is_reported() {
        let e = baseline();
        assert!(matches!(e.s_row4(1000.0), Err(Error::Overflow(_))));
        assert!(matches!(e.expm_s(1000.0), Err(Error::Overflow(_))));
        let row = e.scaled_row(1000.0);
        assert!(row.ln_s44() > 0.0);
        let c = Coefficients::from_eigen(e);
        let v = c.at(1000.0).unwrap();
        assert!(v.x_gain.is_finite() && v.y_gain.is_finite());
        assert!(c.gap(1000.0).ln_abs().is_finite());
    }

    #[test]
    fn sweep_edge_cases() {
        let xi = ModelParams::baseline().xi();
        let r = sweep_assumption(xi, xi, 5, 101, 1).unwrap();
        assert_eq!(r.samples, 5);
        assert!(r.passed());
        let empty = sweep_assumption([0.01; 7], [100.0; 7], 0, 101, 1).unwrap();
        assert!(empty.passed() && empty.samples == 0);
        assert!(sweep_assumption([2.0; 7], [1.0; 7], 1, 11, 0).is_err());
    }
}
