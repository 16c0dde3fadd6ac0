//! Step-size controllers: the adaptive rule and the relaxed backtracking line
//! search.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{quad_form, Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepSizeError {
    #[error("zero search direction")]
    DegenerateDirection,
    #[error("invalid step-size parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveParams {
    pub beta: f64,
    pub eta: f64,
    pub theta: f64,
    pub chi0: f64,
    pub zeta0: f64,
    pub xi0: f64,
    pub sigma_chi: f64,
    pub sigma_zeta: f64,
    pub sigma_xi: f64,
    /// Random unit directions used to estimate L and Γ at x0.
    pub lipschitz_directions: usize,
    pub lipschitz_delta: f64,
    pub lipschitz_floor: f64,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            eta: 0.5,
            theta: 1e4,
            chi0: 1e-3,
            zeta0: 1e3,
            xi0: 1.0,
            sigma_chi: 0.5,
            sigma_zeta: 0.5,
            sigma_xi: 0.1,
            lipschitz_directions: 10,
            lipschitz_delta: 1e-2,
            lipschitz_floor: 1e-4,
        }
    }
}

impl AdaptiveParams {
    pub fn validate(&self) -> Result<(), StepSizeError> {
        let open01 = |x: f64| x > 0.0 && x < 1.0;
        let ok = self.beta > 0.0
            && self.beta <= 1.0
            && open01(self.eta)
            && self.theta > 0.0
            && self.chi0 > 0.0
            && self.zeta0 > 0.0
            && self.xi0 > 0.0
            && self.sigma_chi > 0.0
            && open01(self.sigma_zeta)
            && open01(self.sigma_xi)
            && self.lipschitz_directions > 0
            && self.lipschitz_delta > 0.0
            && self.lipschitz_floor > 0.0
            && self.theta.is_finite()
            && self.chi0.is_finite()
            && self.zeta0.is_finite()
            && self.xi0.is_finite();
        if ok {
            Ok(())
        } else {
            Err(StepSizeError::InvalidParams(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveState {
    pub chi: f64,
    pub zeta: f64,
    pub xi: f64,
    pub l_est: f64,
    pub gamma_est: f64,
}

impl AdaptiveState {
    /// Floors both estimates and raises Γ so that
    /// `τL + Γ ≥ 2(1−η)βξ₋₁·max{τ₋₁, 1}` for every `τ ∈ (0, τ₋₁]`, which
    /// keeps `α_min ≤ 1` however far τ decreases.
    pub fn new(p: &AdaptiveParams, l_est: f64, gamma_est: f64, tau0: f64) -> Self {
        let l_est = l_est.max(p.lipschitz_floor);
        let need = 2.0 * (1.0 - p.eta) * p.beta * p.xi0 * tau0.max(1.0);
        let gamma_est = gamma_est.max(p.lipschitz_floor).max(need);
        Self { chi: p.chi0, zeta: p.zeta0, xi: p.xi0, l_est, gamma_est }
    }

    /// `‖u‖² ≥ χ‖v‖²`.
    pub fn tangential_dominated(&self, u: &Vector, v: &Vector) -> bool {
        u.norm_squared() >= self.chi * v.norm_squared()
    }
}

pub fn update_chi_zeta(state: &mut AdaptiveState, p: &AdaptiveParams, u: &Vector, v: &Vector, d: &Vector, h: &Matrix) {
    let uu = u.norm_squared();
    if uu >= state.chi * v.norm_squared() && 0.5 * quad_form(h, d) < 0.25 * state.zeta * uu {
        state.chi *= 1.0 + p.sigma_chi;
        state.zeta *= 1.0 - p.sigma_zeta;
    }
}

/// Call after [`update_chi_zeta`] so that the tangential test uses `χ_k`.
pub fn xi_update(
    state: &mut AdaptiveState,
    p: &AdaptiveParams,
    delta_l: f64,
    tau: f64,
    u: &Vector,
    v: &Vector,
    d: &Vector,
) -> Result<f64, StepSizeError> {
    let dd = d.norm_squared();
    if dd == 0.0 {
        return Err(StepSizeError::DegenerateDirection);
    }
    let trial = if state.tangential_dominated(u, v) { delta_l / (tau * dd) } else { delta_l / dd };
    if state.xi > trial {
        state.xi = ((1.0 - p.sigma_xi) * state.xi).min(trial);
    }
    Ok(trial)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaChoice {
    pub alpha: f64,
    pub alpha_suff: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

/// `α = Proj_[α_min, α_max](α_suff)`.
pub fn adaptive_alpha(
    state: &AdaptiveState,
    p: &AdaptiveParams,
    delta_l: f64,
    tau: f64,
    u: &Vector,
    v: &Vector,
    d: &Vector,
) -> Result<AlphaChoice, StepSizeError> {
    let dd = d.norm_squared();
    if dd == 0.0 {
        return Err(StepSizeError::DegenerateDirection);
    }
    let denom = tau * state.l_est + state.gamma_est;
    let scale = 2.0 * (1.0 - p.eta) * p.beta;
    let alpha_suff = (scale * delta_l / (denom * dd)).min(1.0);
    let alpha_min = if state.tangential_dominated(u, v) {
        scale * state.xi * tau / denom
    } else {
        scale * state.xi / denom
    };
    let alpha_max = alpha_min + p.theta * p.beta;
    let alpha = alpha_suff.min(alpha_max).max(alpha_min);
    Ok(AlphaChoice { alpha, alpha_suff, alpha_min, alpha_max })
}

/// `ε_A = 2τε_f + 4ε_c + τα_uε_g‖d‖ + α_uε_J‖d‖`.
pub fn epsilon_ak(tau: f64, eps_f: f64, eps_c: f64, eps_g: f64, eps_j: f64, alpha_u: f64, d_norm: f64) -> f64 {
    2.0 * tau * eps_f + 4.0 * eps_c + tau * alpha_u * eps_g * d_norm + alpha_u * eps_j * d_norm
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchParams {
    pub alpha_u: f64,
    pub nu: f64,
    pub eta: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self { alpha_u: 1.0, nu: 0.5, eta: 1e-3, max_backtracks: 60 }
    }
}

impl LineSearchParams {
    pub fn validate(&self) -> Result<(), StepSizeError> {
        let open01 = |x: f64| x > 0.0 && x < 1.0;
        if self.alpha_u > 0.0 && self.alpha_u <= 1.0 && open01(self.nu) && open01(self.eta) {
            Ok(())
        } else {
            Err(StepSizeError::InvalidParams(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    pub backtracks: usize,
    /// Merit value at the accepted trial point.
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LineSearchError<E> {
    #[error("no acceptable step after {0} backtracks")]
    Exhausted(usize),
    #[error("merit evaluation failed")]
    Eval(E),
}

/// Accepts the first `α ∈ {α_u, να_u, ν²α_u, …}` with
/// `φ(α) ≤ φ₀ − ηαΔl + relax`. `merit` is called once per trial.
pub fn line_search_alpha<E, F>(
    mut merit: F,
    phi0: f64,
    delta_l: f64,
    relax: f64,
    p: &LineSearchParams,
) -> Result<LineSearchOutcome, LineSearchError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let mut alpha = p.alpha_u;
    for backtracks in 0..=p.max_backtracks {
        let phi = merit(alpha).map_err(LineSearchError::Eval)?;
        // Differences avoid `φ₀ − ηαΔl` rounding back to `φ₀` for tiny α.
        if phi - phi0 <= relax - p.eta * alpha * delta_l {
            return Ok(LineSearchOutcome { alpha, backtracks, phi });
        }
        alpha *= p.nu;
    }
    Err(LineSearchError::Exhausted(p.max_backtracks))
}
