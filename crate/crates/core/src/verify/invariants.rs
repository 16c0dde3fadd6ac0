//! Per-iteration invariants re-derived from recorded trace data.

use serde::Serialize;

use crate::driver::{Branch, IterRecord, RunTrace, SolverParams, Variant};
use crate::linalg::{Matrix, Vector};
use crate::problems::ProblemSpec;
use crate::steps::TestOutcome;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub iteration: usize,
    pub rule: &'static str,
    pub detail: String,
}

/// Slack for recomputed inequalities; the solver evaluates them with a
/// different operation order.
fn slack(a: f64, b: f64) -> f64 {
    1e-10 * (1.0 + a.abs() + b.abs())
}

fn le(a: f64, b: f64) -> bool {
    a <= b + slack(a, b)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= slack(a, b)
}

struct Checker<'a> {
    out: Vec<Violation>,
    k: usize,
    h: &'a Matrix,
    params: &'a SolverParams,
}

impl Checker<'_> {
    fn require(&mut self, ok: bool, rule: &'static str, detail: impl FnOnce() -> String) {
        if !ok {
            self.out.push(Violation { iteration: self.k, rule, detail: detail() });
        }
    }

    fn uhu(&self, u: &Vector) -> f64 {
        u.dot(&(self.h * u))
    }

    fn residual_gate(&self, rec: &IterRecord, u: &Vector, rho: &Vector, r: &Vector) -> bool {
        let t = &self.params.tests;
        let jtc = (rec.noisy.j_bar.transpose() * &rec.noisy.c_bar).norm();
        le(rho.norm().max(r.norm()), t.lambda_rho_r * u.norm().max(jtc).min(t.kappa_rho_r))
    }

    fn check_step(&mut self, rec: &IterRecord, eps_o: f64) {
        let Some(b) = &rec.bundle else { return };
        let t = self.params.tests;
        let (g, c, j) = (&rec.noisy.g_bar, &rec.noisy.c_bar, &rec.noisy.j_bar);
        let c_norm = c.norm();

        self.require(b.d == &b.v + &b.u, "d_equals_v_plus_u", || "d differs from v + u".into());
        self.require(
            close_vec(&b.rho, &(self.h * (&b.u + &b.v) + j.transpose() * &b.y + g)) && close_vec(&b.r, &(j * &b.u)),
            "residual_definition",
            || "recorded (ρ, r) disagree with the KKT residual".into(),
        );
        let feasible = c_norm <= eps_o;
        self.require(
            feasible == (rec.branch == Branch::FeasibleBranch),
            "branch",
            || format!("‖c̄‖ = {c_norm:e}, ε_o = {eps_o:e}, branch {:?}", rec.branch),
        );

        let gate = self.residual_gate(rec, &b.u, &b.rho, &b.r);
        let uhu = self.uhu(&b.u);
        let curv = uhu.max(t.lambda_u * b.u.norm_squared());
        let dl_prev = -rec.tau_prev * g.dot(&b.d) + c_norm - (c + j * &b.d).norm();

        match b.outcome {
            TestOutcome::Tt1 => {
                self.require(b.v.amax() == 0.0, "tt1_zero_normal", || format!("‖v‖ = {:e}", b.v.norm()));
                let cond2 = le(t.lambda_u * b.u.norm_squared() - eps_o, uhu);
                let cond3 = le(g.dot(&b.u) + 0.5 * uhu, eps_o);
                let cond4 = le(rec.tau_prev * t.sigma_u * curv - eps_o, dl_prev);
                self.require(gate && cond2 && cond3 && cond4, "tt1", || {
                    format!("gate {gate}, curvature {cond2}, model {cond3}, reduction {cond4}")
                });
            }
            TestOutcome::Tt2Case2 | TestOutcome::Tt2Cond1 => {
                let v_norm = b.v.norm();
                let jtc = (j.transpose() * c).norm();
                let lin_v = (c + j * &b.v).norm();
                let small_u = le(b.u.norm(), t.lambda_uv * v_norm);
                let curved = le(t.lambda_u * b.u.norm_squared(), uhu)
                    && le((g + self.h * &b.v).dot(&b.u) + 0.5f64.max(1.0 - jtc) * uhu, t.lambda_v * v_norm);
                let cond2 = small_u || curved;
                let case2 = le(rec.tau_prev * t.sigma_u * curv + t.sigma_c * (c_norm - lin_v), dl_prev);
                let lin_vr = (c + j * &b.v + &b.r).norm();
                let cond1 = le(t.sigma_r * (c_norm - lin_v), c_norm - lin_vr) && c_norm - lin_v > 0.0;
                let declared = if b.outcome == TestOutcome::Tt2Case2 { case2 } else { cond1 };
                self.require(gate && cond2 && declared, "tt2", || {
                    format!("gate {gate}, cond2 {cond2}, declared {:?} holds: {declared}", b.outcome)
                });
                if b.outcome == TestOutcome::Tt2Case2 {
                    self.require(rec.tau == rec.tau_prev, "tau_case2_kept", || {
                        format!("τ changed from {:e} to {:e}", rec.tau_prev, rec.tau)
                    });
                } else {
                    let denom = g.dot(&b.d) + curv;
                    let expected = if denom <= 0.0 {
                        rec.tau_prev
                    } else {
                        let trial = (1.0 - t.sigma_c / t.sigma_r) * (c_norm - lin_vr) / denom;
                        let cap = (1.0 - self.params.sigma_tau) * trial;
                        if rec.tau_prev <= cap {
                            rec.tau_prev
                        } else {
                            cap
                        }
                    };
                    self.require(close(rec.tau, expected), "tau_update_rule", || {
                        format!("τ = {:e}, rule gives {expected:e}", rec.tau)
                    });
                }
                self.check_cauchy(rec, &b.v);
            }
        }

        if let Some(dl) = rec.delta_l {
            let recomputed = -rec.tau * g.dot(&b.d) + c_norm - (c + j * &b.d).norm();
            self.require(close(dl, recomputed), "delta_l", || format!("recorded {dl:e}, recomputed {recomputed:e}"));
        }
    }

    fn check_cauchy(&mut self, rec: &IterRecord, v: &Vector) {
        let t = &self.params.tests;
        let (c, j) = (&rec.noisy.c_bar, &rec.noisy.j_bar);
        let jtc = j.transpose() * c;
        let radius = t.sigma_jc * jtc.norm();
        self.require(v.norm() <= radius * (1.0 + 1e-12), "normal_radius", || {
            format!("‖v‖ = {:e} > {radius:e}", v.norm())
        });
        let jjtc = j * &jtc;
        let alpha_c = if jjtc.norm_squared() == 0.0 {
            t.sigma_jc
        } else {
            t.sigma_jc.min(jtc.norm_squared() / jjtc.norm_squared())
        };
        let cauchy = c.norm() - (c - &jjtc * alpha_c).norm();
        let achieved = c.norm() - (c + j * v).norm();
        self.require(le(t.gamma_c * cauchy, achieved), "cauchy_decrease", || {
            format!("decrease {achieved:e} < γ_c·{cauchy:e}")
        });
    }
}

fn close_vec(a: &Vector, b: &Vector) -> bool {
    a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs())))
}

/// Re-checks every recorded iteration. An empty list means the trace passes.
pub fn assert_trace_invariants(trace: &RunTrace, problem: &ProblemSpec, params: &SolverParams) -> Vec<Violation> {
    let h = problem.hessian_or_identity();
    let mut ck = Checker { out: Vec::new(), k: 0, h: &h, params };
    let noise = params.resolved_noise();
    let ap = &params.adaptive;
    let (mut chi, mut zeta, mut xi) = (ap.chi0, ap.zeta0, ap.xi0);
    let mut tau_prev = params.tau0;

    for (i, rec) in trace.records.iter().enumerate() {
        ck.k = rec.k;
        ck.require(rec.k == i, "iteration_index", || format!("record {i} has k = {}", rec.k));
        ck.require(rec.tau_prev == tau_prev, "tau_chain", || {
            format!("τ_prev = {:e}, previous τ = {tau_prev:e}", rec.tau_prev)
        });
        ck.require(rec.tau <= rec.tau_prev, "tau_monotone", || {
            format!("τ rose from {:e} to {:e}", rec.tau_prev, rec.tau)
        });
        tau_prev = rec.tau;
        ck.require(
            rec.counters_after.weighted_total >= rec.counters_before.weighted_total,
            "counters_monotone",
            || "evaluation counters decreased".into(),
        );
        ck.check_step(rec, trace.eps_o);

        if let (Some(a), Some(b), Some(dl)) = (&rec.adaptive, &rec.bundle, rec.delta_l) {
            let s = &a.state;
            ck.require(s.chi >= chi, "chi_monotone", || format!("χ fell from {chi:e} to {:e}", s.chi));
            ck.require(s.zeta <= zeta, "zeta_monotone", || format!("ζ rose from {zeta:e} to {:e}", s.zeta));
            ck.require(s.xi <= xi, "xi_monotone", || format!("ξ rose from {xi:e} to {:e}", s.xi));
            (chi, zeta, xi) = (s.chi, s.zeta, s.xi);
            let denom = rec.tau * s.l_est + s.gamma_est;
            let suff = (2.0 * (1.0 - ap.eta) * ap.beta * dl / (denom * b.d.norm_squared())).min(1.0);
            let alpha = rec.alpha.unwrap_or(a.choice.alpha);
            ck.require(close(suff, a.choice.alpha_suff), "alpha_suff_formula", || {
                format!("recorded {:e}, recomputed {suff:e}", a.choice.alpha_suff)
            });
            ck.require(le(alpha, suff) && suff <= 1.0, "alpha_le_suff_le_one", || {
                format!("α = {alpha:e}, α_suff = {suff:e}")
            });
            ck.require(
                le(a.choice.alpha_min, alpha) && le(alpha, a.choice.alpha_max),
                "alpha_projection",
                || format!("α = {alpha:e} outside [{:e}, {:e}]", a.choice.alpha_min, a.choice.alpha_max),
            );
        }

        if let (Some(ls), Some(b), Some(dl), Some(alpha)) = (&rec.line_search, &rec.bundle, rec.delta_l, rec.alpha) {
            let lp = &params.line_search;
            let d = b.d.norm();
            let relax = 2.0 * rec.tau * noise.eps_f
                + 4.0 * noise.eps_c
                + rec.tau * lp.alpha_u * noise.eps_g * d
                + lp.alpha_u * noise.eps_j * d;
            ck.require(close(relax, ls.relax), "relaxation_term", || {
                format!("recorded {:e}, recomputed {relax:e}", ls.relax)
            });
            ck.require(alpha == lp.alpha_u * lp.nu.powi(ls.backtracks as i32), "backtrack_grid", || {
                format!("α = {alpha:e} after {} backtracks", ls.backtracks)
            });
            ck.require(ls.phi_accepted - ls.phi0 <= relax - lp.eta * alpha * dl, "relaxed_armijo", || {
                format!("φ − φ₀ = {:e} > {:e}", ls.phi_accepted - ls.phi0, relax - lp.eta * alpha * dl)
            });
        }

        if let (Some(alpha), Some(b)) = (rec.alpha, &rec.bundle) {
            let next = trace.records.get(i + 1).map(|r| &r.x).unwrap_or(&trace.final_x);
            ck.require(close_vec(next, &(&rec.x + &b.d * alpha)), "iterate_update", || {
                "x_{k+1} ≠ x_k + α d".into()
            });
        }
    }
    if params.variant == Variant::LineSearch {
        let stray = trace.records.iter().filter(|r| r.adaptive.is_some()).count();
        ck.k = 0;
        ck.require(stray == 0, "variant_records", || format!("{stray} adaptive records in a line-search run"));
    }
    ck.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{solve, Optimism};
    use crate::problems::builtin;
    use crate::steps::Inexactness;

    fn run(name: &str, variant: Variant, eps: f64) -> (RunTrace, ProblemSpec, SolverParams) {
        let p = builtin(name).unwrap();
        let mut params = SolverParams::preset(variant, Optimism::Optimistic, Inexactness::inexact(1e-2), eps, eps);
        params.budgets.max_iters = 60;
        let t = solve(&p, &params, 3).unwrap();
        (t, p, params)
    }

    #[test]
    fn clean_traces_pass() {
        for variant in [Variant::Adaptive, Variant::LineSearch] {
            for name in ["unit-circle", "hs7", "quad-eq-5"] {
                let (t, p, params) = run(name, variant, 1e-3);
                let v = assert_trace_invariants(&t, &p, &params);
                assert!(v.is_empty(), "{name} {variant:?}: {v:?}");
            }
        }
    }

    #[test]
    fn corrupted_tau_is_reported() {
        let (mut t, p, params) = run("unit-circle", Variant::LineSearch, 1e-3);
        t.records[5].tau = t.records[5].tau_prev * 2.0;
        let v = assert_trace_invariants(&t, &p, &params);
        assert!(v.iter().any(|x| x.iteration == 5 && x.rule == "tau_monotone"), "{v:?}");
    }
}
