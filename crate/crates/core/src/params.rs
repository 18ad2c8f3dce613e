use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Impact, penalty and initial-state parameters of the liquidation problem.
///
/// Units: `lambda` is price per unit trading rate, `gamma` distortion per
/// share per unit time, `kappa` price per unit distortion, `rho` 1/time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Temporary impact λ.
    pub lambda: f64,
    /// Rate γ at which trading pushes the distortion.
    pub gamma: f64,
    /// Price sensitivity κ to the distortion.
    pub kappa: f64,
    /// Resilience ρ.
    pub rho: f64,
    /// Terminal inventory penalty ϱ.
    pub varrho: f64,
    /// Running inventory penalty φ.
    pub phi: f64,
    /// Horizon T.
    pub horizon: f64,
    /// Initial inventory x.
    pub x0: f64,
    /// Initial distortion y.
    pub y0: f64,
}

impl ModelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lambda: f64,
        gamma: f64,
        kappa: f64,
        rho: f64,
        varrho: f64,
        phi: f64,
        horizon: f64,
        x0: f64,
        y0: f64,
    ) -> Result<Self> {
        let p = Self {
            lambda,
            gamma,
            kappa,
            rho,
            varrho,
            phi,
            horizon,
            x0,
            y0,
        };
        p.validate()?;
        Ok(p)
    }

    /// The illustration set: λ = 0.5, γ = κ = ρ = 1, ϱ = 10, φ = 0.1,
    /// T = 10, x = 10, y = 0.
    pub fn baseline() -> Self {
        Self {
            lambda: 0.5,
            gamma: 1.0,
            kappa: 1.0,
            rho: 1.0,
            varrho: 10.0,
            phi: 0.1,
            horizon: 10.0,
            x0: 10.0,
            y0: 0.0,
        }
    }

    /// Builds a tuple from `(λ, γ, κ, ρ, ϱ, φ, T)` with the given initial state.
    pub fn from_xi(xi: [f64; 7], x0: f64, y0: f64) -> Result<Self> {
        Self::new(xi[0], xi[1], xi[2], xi[3], xi[4], xi[5], xi[6], x0, y0)
    }

    /// The seven structural parameters `(λ, γ, κ, ρ, ϱ, φ, T)`.
    pub fn xi(&self) -> [f64; 7] {
        [
            self.lambda,
            self.gamma,
            self.kappa,
            self.rho,
            self.varrho,
            self.phi,
            self.horizon,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("rho", self.rho),
            ("varrho", self.varrho),
            ("phi", self.phi),
            ("horizon", self.horizon),
        ];
        for (name, v) in positive {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite",
                });
            }
            if v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be strictly positive",
                });
            }
        }
        for (name, v) in [("x0", self.x0), ("y0", self.y0)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite and non-negative",
                });
            }
        }
        Ok(())
    }

    /// Same parameters with a different κ (validated).
    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        let p = Self { kappa, ..*self };
        p.validate()?;
        Ok(p)
    }
}

/// Strictly increasing time nodes `0 = t_0 < … < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, n_steps: usize) -> Result<Self> {
        if n_steps < 1 {
            return Err(Error::InvalidGrid("need at least one step"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid("horizon must be positive"));
        }
        let h = horizon / n_steps as f64;
        let mut nodes: Vec<f64> = (0..=n_steps).map(|i| i as f64 * h).collect();
        nodes[n_steps] = horizon;
        Ok(Self { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid("need at least two nodes"));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidGrid("first node must be 0"));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("nodes must be finite"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("nodes must be strictly increasing"));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Length of step `i` (between nodes `i` and `i + 1`).
    pub fn step(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    pub fn steps(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Grid with every step split in two; even nodes coincide with `self`.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.horizon());
        Self { nodes }
    }
}
