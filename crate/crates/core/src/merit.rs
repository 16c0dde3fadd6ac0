//! ℓ2 merit function `φ(x, τ) = τf + ‖c‖₂`, its linear-model reduction and
//! the merit-parameter rule.

use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, Vector};

pub fn merit_value(tau: f64, f: f64, c: &Vector) -> f64 {
    tau * f + c.norm()
}

/// `Δl = −τgᵀd + ‖c‖ − ‖c + Jd‖`.
pub fn model_reduction(tau: f64, g: &Vector, c: &Vector, j: &Matrix, d: &Vector) -> f64 {
    -tau * g.dot(d) + c.norm() - (c + j * d).norm()
}

/// `None` stands for +∞, returned when `gᵀd + max{uᵀHu, λ_u‖u‖²} ≤ 0`.
pub fn tau_trial(
    g_dot_d: f64,
    curvature: f64,
    c_norm: f64,
    c_lin_norm: f64,
    sigma_c: f64,
    sigma_r: f64,
) -> Option<f64> {
    let denom = g_dot_d + curvature;
    if denom <= 0.0 {
        return None;
    }
    Some((1.0 - sigma_c / sigma_r) * (c_norm - c_lin_norm) / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauState {
    pub tau: f64,
    /// `(iteration, τ)` after each update.
    pub history: Vec<(usize, f64)>,
}

impl TauState {
    pub fn new(tau: f64) -> Self {
        assert!(tau > 0.0 && tau.is_finite());
        Self { tau, history: Vec::new() }
    }

    /// Records τ unchanged (TT1 and TT2 case-2 iterations).
    pub fn keep(&mut self, iteration: usize) {
        self.history.push((iteration, self.tau));
    }

    pub fn update(&mut self, iteration: usize, trial: Option<f64>, sigma_tau: f64) {
        self.tau = tau_update(self.tau, trial, sigma_tau);
        self.history.push((iteration, self.tau));
    }
}

/// Keeps `τ_prev` if `τ_prev ≤ (1−σ_τ)·trial`, otherwise returns `(1−σ_τ)·trial`.
pub fn tau_update(tau_prev: f64, trial: Option<f64>, sigma_tau: f64) -> f64 {
    match trial {
        None => tau_prev,
        Some(t) => {
            let target = (1.0 - sigma_tau) * t;
            if tau_prev <= target {
                tau_prev
            } else {
                target
            }
        }
    }
}
