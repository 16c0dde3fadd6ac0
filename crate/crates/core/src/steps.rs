//! Normal and tangential step computation.
//!
//! The normal step `v` approximately minimizes `½‖c̄ + J̄v‖²` over a ball of
//! radius `σ_Jc‖J̄ᵀc̄‖` with CG-Steihaug. The tangential step `u` comes from
//! MINRES applied to
//!
//! ```text
//! [ H  J̄ᵀ ] [u]     [ḡ + Hv]
//! [ J̄  0  ] [y] = − [  0   ]
//! ```
//!
//! and is accepted at the first Krylov iterate that passes the applicable
//! termination test together with a residual gate. Termination Test 1 applies
//! when `‖c̄‖ ≤ ε_o`, Termination Test 2 otherwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    cg_steihaug, dense_kkt_solve, inf_norm, quad_form, LinalgError, Matrix, MinresState, MinresStep, Vector,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("J̄ᵀc̄ vanishes numerically")]
    ZeroInfeasibleStationarity,
    #[error("no termination test holds, even for the exact subproblem solution: {0}")]
    TestUnsatisfiable(String),
    #[error("invalid test parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestParams {
    pub lambda_rho_r: f64,
    pub kappa_rho_r: f64,
    pub lambda_u: f64,
    pub lambda_uv: f64,
    pub lambda_v: f64,
    pub sigma_u: f64,
    pub sigma_c: f64,
    pub sigma_r: f64,
    pub gamma_c: f64,
    pub sigma_jc: f64,
}

impl Default for TestParams {
    fn default() -> Self {
        Self {
            lambda_rho_r: 0.5,
            kappa_rho_r: 1e2,
            lambda_u: 5e-9,
            lambda_uv: 1e2,
            lambda_v: 1.0,
            sigma_u: 0.99,
            sigma_c: 0.1,
            sigma_r: 0.9999,
            gamma_c: 0.9,
            sigma_jc: 1e2,
        }
    }
}

impl TestParams {
    pub fn validate(&self) -> Result<(), StepError> {
        let open01 = |x: f64| x > 0.0 && x < 1.0;
        let checks = [
            (open01(self.lambda_rho_r), "lambda_rho_r in (0,1)"),
            (self.kappa_rho_r > 0.0, "kappa_rho_r > 0"),
            (self.lambda_u > 0.0, "lambda_u > 0"),
            (self.lambda_uv > 0.0, "lambda_uv > 0"),
            (self.lambda_v > 0.0, "lambda_v > 0"),
            (open01(self.sigma_u), "sigma_u in (0,1)"),
            (open01(self.sigma_c), "sigma_c in (0,1)"),
            (self.sigma_r > self.sigma_c && self.sigma_r < 1.0, "sigma_r in (sigma_c,1)"),
            (self.gamma_c > 0.0 && self.gamma_c <= 1.0, "gamma_c in (0,1]"),
            (self.sigma_jc > 0.0, "sigma_jc > 0"),
        ];
        for (ok, what) in checks {
            if !ok || !self.all_finite() {
                return Err(StepError::InvalidParams(what.to_string()));
            }
        }
        Ok(())
    }

    fn all_finite(&self) -> bool {
        [
            self.lambda_rho_r,
            self.kappa_rho_r,
            self.lambda_u,
            self.lambda_uv,
            self.lambda_v,
            self.sigma_u,
            self.sigma_c,
            self.sigma_r,
            self.gamma_c,
            self.sigma_jc,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

/// Subproblem accuracy. Exact mode replaces `κ·min{ε_c, ε_f}` by `1e-10`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Inexactness {
    Exact,
    Inexact { kappa_u: f64, kappa_v: f64 },
}

pub const EXACT_FACTOR: f64 = 1e-10;

impl Inexactness {
    pub fn inexact(kappa: f64) -> Self {
        Inexactness::Inexact { kappa_u: kappa, kappa_v: kappa }
    }

    pub fn normal_factor(&self, eps_f: f64, eps_c: f64) -> f64 {
        match *self {
            Inexactness::Exact => EXACT_FACTOR,
            Inexactness::Inexact { kappa_v, .. } => kappa_v * eps_c.min(eps_f),
        }
    }

    pub fn tangential_factor(&self, eps_f: f64, eps_c: f64) -> f64 {
        match *self {
            Inexactness::Exact => EXACT_FACTOR,
            Inexactness::Inexact { kappa_u, .. } => kappa_u * eps_c.min(eps_f),
        }
    }

    /// `exact` or `inexact:{kappa_u}`.
    pub fn label(&self) -> String {
        match *self {
            Inexactness::Exact => "exact".into(),
            Inexactness::Inexact { kappa_u, .. } => format!("inexact:{kappa_u}"),
        }
    }

    pub fn parse(label: &str) -> Option<Self> {
        if label == "exact" {
            return Some(Inexactness::Exact);
        }
        let k: f64 = label.strip_prefix("inexact:")?.parse().ok()?;
        (k > 0.0 && k.is_finite()).then(|| Inexactness::inexact(k))
    }
}

/// Which test accepted the tangential step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestOutcome {
    Tt1,
    Tt2Case2,
    Tt2Cond1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_camel_case_types)]
pub enum TestTag {
    TT1,
    TT2_case2,
    TT2_cond1,
    exact_fallback,
}

impl TestTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            TestTag::TT1 => "TT1",
            TestTag::TT2_case2 => "TT2_case2",
            TestTag::TT2_cond1 => "TT2_cond1",
            TestTag::exact_fallback => "exact_fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepBundle {
    pub v: Vector,
    pub u: Vector,
    pub d: Vector,
    pub y: Vector,
    pub rho: Vector,
    pub r: Vector,
    pub outcome: TestOutcome,
    /// Accepted after the dense fallback solve.
    pub fallback: bool,
    pub minres_iters: usize,
    pub cg_iters: usize,
}

impl StepBundle {
    pub fn test(&self) -> TestTag {
        if self.fallback {
            return TestTag::exact_fallback;
        }
        match self.outcome {
            TestOutcome::Tt1 => TestTag::TT1,
            TestOutcome::Tt2Case2 => TestTag::TT2_case2,
            TestOutcome::Tt2Cond1 => TestTag::TT2_cond1,
        }
    }
}

/// Noisy data of one iteration's subproblems.
#[derive(Debug, Clone, Copy)]
pub struct Subproblem<'a> {
    pub h: &'a Matrix,
    pub g: &'a Vector,
    pub c: &'a Vector,
    pub j: &'a Matrix,
}

impl Subproblem<'_> {
    pub fn jtc(&self) -> Vector {
        self.j.transpose() * self.c
    }
}

/// Cauchy direction `−J̄ᵀc̄` and step `min{σ_Jc, ‖J̄ᵀc̄‖²/‖J̄J̄ᵀc̄‖²}`.
pub fn cauchy_normal_step(c: &Vector, j: &Matrix, sigma_jc: f64) -> Result<(Vector, f64), StepError> {
    let jtc = j.transpose() * c;
    if jtc.amax() == 0.0 {
        return Err(StepError::ZeroInfeasibleStationarity);
    }
    let jjtc = j * &jtc;
    let denom = jjtc.norm_squared();
    let alpha = if denom == 0.0 { sigma_jc } else { sigma_jc.min(jtc.norm_squared() / denom) };
    Ok((-jtc, alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalStep {
    pub v: Vector,
    pub cg_iters: usize,
}

/// CG-Steihaug on `J̄ᵀJ̄`, stopped once the Cauchy decrease holds and
/// `‖J̄ᵀJ̄v + J̄ᵀc̄‖_∞ ≤ factor·max{1, ‖J̄ᵀc̄‖_∞}`.
pub fn normal_step(
    c: &Vector,
    j: &Matrix,
    params: &TestParams,
    inexactness: Inexactness,
    eps_f: f64,
    eps_c: f64,
    tol_jc: f64,
) -> Result<NormalStep, StepError> {
    let jtc = j.transpose() * c;
    if inf_norm(&jtc) <= tol_jc {
        return Err(StepError::ZeroInfeasibleStationarity);
    }
    let (vc, alpha_c) = cauchy_normal_step(c, j, params.sigma_jc)?;
    let c_norm = c.norm();
    let cauchy_decrease = c_norm - (c + j * &vc * alpha_c).norm();
    let target = params.gamma_c * cauchy_decrease;
    let decrease = |v: &Vector| c_norm - (c + j * v).norm();
    let tol = inexactness.normal_factor(eps_f, eps_c) * inf_norm(&jtc).max(1.0);

    let jtj = j.transpose() * j;
    let n = c.len().max(j.ncols());
    let out = cg_steihaug(
        |p| &jtj * p,
        &jtc,
        params.sigma_jc * jtc.norm(),
        |v, res| decrease(v) >= target && inf_norm(res) <= tol,
        2 * n,
    );
    // CG iterates never increase ½‖c̄+J̄v‖² past the Cauchy point; the
    // fallback only triggers under rounding.
    let v = if decrease(&out.v) >= target { out.v } else { vc * alpha_c };
    Ok(NormalStep { v, cg_iters: out.iterations })
}

/// `max{‖ρ‖, ‖r‖} ≤ λ_ρr·min{max{‖u‖, ‖J̄ᵀc̄‖}, κ_ρr}`.
fn residual_condition(u: &Vector, rho: &Vector, r: &Vector, jtc_norm: f64, p: &TestParams) -> bool {
    rho.norm().max(r.norm()) <= p.lambda_rho_r * u.norm().max(jtc_norm).min(p.kappa_rho_r)
}

fn curvature_term(u: &Vector, uhu: f64, p: &TestParams) -> f64 {
    uhu.max(p.lambda_u * u.norm_squared())
}

/// `Δl̄(τ, w) = −τḡᵀw + ‖c̄‖ − ‖c̄ + J̄w‖`.
fn reduction(sub: &Subproblem, tau: f64, w: &Vector) -> f64 {
    -tau * sub.g.dot(w) + sub.c.norm() - (sub.c + sub.j * w).norm()
}

pub fn check_tt1(
    sub: &Subproblem,
    u: &Vector,
    rho: &Vector,
    r: &Vector,
    tau_prev: f64,
    params: &TestParams,
    eps_o: f64,
) -> bool {
    let uhu = quad_form(sub.h, u);
    residual_condition(u, rho, r, sub.jtc().norm(), params)
        && uhu >= params.lambda_u * u.norm_squared() - eps_o
        && sub.g.dot(u) + 0.5 * uhu <= eps_o
        && reduction(sub, tau_prev, u) >= tau_prev * params.sigma_u * curvature_term(u, uhu, params) - eps_o
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tt2Result {
    Fail,
    Case2,
    Cond1,
}

pub fn check_tt2(
    sub: &Subproblem,
    v: &Vector,
    u: &Vector,
    rho: &Vector,
    r: &Vector,
    tau_prev: f64,
    params: &TestParams,
) -> Tt2Result {
    let jtc_norm = sub.jtc().norm();
    if !residual_condition(u, rho, r, jtc_norm, params) {
        return Tt2Result::Fail;
    }
    let uhu = quad_form(sub.h, u);
    let v_norm = v.norm();
    let cond2 = u.norm() <= params.lambda_uv * v_norm
        || (uhu >= params.lambda_u * u.norm_squared()
            && (sub.g + sub.h * v).dot(u) + 0.5f64.max(1.0 - jtc_norm) * uhu <= params.lambda_v * v_norm);
    if !cond2 {
        return Tt2Result::Fail;
    }
    let c_norm = sub.c.norm();
    let normal_decrease = c_norm - (sub.c + sub.j * v).norm();
    let d = v + u;
    if reduction(sub, tau_prev, &d)
        >= tau_prev * params.sigma_u * curvature_term(u, uhu, params) + params.sigma_c * normal_decrease
    {
        return Tt2Result::Case2;
    }
    let full_decrease = c_norm - (sub.c + sub.j * v + r).norm();
    if normal_decrease > 0.0 && full_decrease >= params.sigma_r * normal_decrease {
        return Tt2Result::Cond1;
    }
    Tt2Result::Fail
}

/// Configuration of one tangential solve.
#[derive(Debug, Clone, Copy)]
pub struct TangentialConfig {
    pub tau_prev: f64,
    pub eps_o: f64,
    pub eps_f: f64,
    pub eps_c: f64,
    pub inexactness: Inexactness,
    /// Defaults to `2(n+m)` when `None`.
    pub max_iters: Option<usize>,
}

fn kkt_apply(sub: &Subproblem, z: &Vector) -> Vector {
    let n = sub.g.len();
    let m = sub.c.len();
    let u = z.rows(0, n);
    let y = z.rows(n, m);
    let mut out = Vector::zeros(n + m);
    out.rows_mut(0, n).copy_from(&(sub.h * u + sub.j.transpose() * y));
    out.rows_mut(n, m).copy_from(&(sub.j * u));
    out
}

/// Tangential step for a given normal step `v` (zero on the feasible branch).
pub fn tangential_step(
    sub: &Subproblem,
    v: &Vector,
    cfg: &TangentialConfig,
    params: &TestParams,
    cg_iters: usize,
) -> Result<StepBundle, StepError> {
    let n = sub.g.len();
    let m = sub.c.len();
    let feasible_branch = sub.c.norm() <= cfg.eps_o;
    let gv = sub.g + sub.h * v;
    let jtc_inf = inf_norm(&sub.jtc());
    let factor = cfg.inexactness.tangential_factor(cfg.eps_f, cfg.eps_c);
    let max_iters = cfg.max_iters.unwrap_or(2 * (n + m));

    let evaluate = |u: &Vector, y: &Vector| -> (Vector, Vector, Option<TestOutcome>) {
        let rho = sub.h * u + sub.j.transpose() * y + &gv;
        let r = sub.j * u;
        let outcome = if feasible_branch {
            check_tt1(sub, u, &rho, &r, cfg.tau_prev, params, cfg.eps_o).then_some(TestOutcome::Tt1)
        } else {
            match check_tt2(sub, v, u, &rho, &r, cfg.tau_prev, params) {
                Tt2Result::Case2 => Some(TestOutcome::Tt2Case2),
                Tt2Result::Cond1 => Some(TestOutcome::Tt2Cond1),
                Tt2Result::Fail => None,
            }
        };
        (rho, r, outcome)
    };
    let bundle = |u: Vector, y: Vector, rho, r, outcome, fallback, iters| StepBundle {
        d: v + &u,
        v: v.clone(),
        u,
        y,
        rho,
        r,
        outcome,
        fallback,
        minres_iters: iters,
        cg_iters,
    };

    let mut rhs = Vector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&-&gv);
    let mut state = MinresState::new(&rhs);
    loop {
        let z = state.solution();
        let u = z.rows(0, n).into_owned();
        let y = z.rows(n, m).into_owned();
        let (rho, r, outcome) = evaluate(&u, &y);
        let res_inf = inf_norm(&rho).max(inf_norm(&r));
        let gate = factor * inf_norm(&u).max(jtc_inf).clamp(1e-2, 1e2);
        if let (Some(outcome), true) = (outcome, res_inf <= gate) {
            return Ok(bundle(u, y, rho, r, outcome, false, state.iterations()));
        }
        if state.iterations() >= max_iters || state.advance(|z| kkt_apply(sub, z)) == MinresStep::Breakdown {
            break;
        }
    }

    let iters = state.iterations();
    let sol = dense_kkt_solve(sub.h, sub.j, &gv)?;
    let (rho, r, outcome) = evaluate(&sol.u, &sol.y);
    match outcome {
        Some(outcome) => Ok(bundle(sol.u, sol.y, rho, r, outcome, true, iters)),
        None => Err(StepError::TestUnsatisfiable(format!(
            "{} branch, ‖c̄‖ = {:e}, ‖v‖ = {:e}, ‖u*‖ = {:e}",
            if feasible_branch { "feasible" } else { "infeasible" },
            sub.c.norm(),
            v.norm(),
            sol.u.norm()
        ))),
    }
}
