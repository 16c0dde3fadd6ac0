//! Steihaug–Toint truncated conjugate gradient for
//! `min gᵀv + ½ vᵀHv  s.t. ‖v‖ ≤ radius` with symmetric positive semidefinite H.
//!
//! Starting from v = 0, every iterate lies in the Krylov space generated by
//! `g`. For the normal subproblem (H = J̄ᵀJ̄, g = J̄ᵀc̄) that space is contained
//! in Range(J̄ᵀ), and the first iterate is the Cauchy point.

use super::Vector;

#[derive(Debug, Clone, PartialEq)]
pub struct SteihaugOutcome {
    pub v: Vector,
    pub hit_boundary: bool,
    pub iterations: usize,
    /// Model gradient H v + g at the returned point.
    pub residual: Vector,
}

fn boundary_step(z: &Vector, d: &Vector, radius: f64) -> f64 {
    let a = d.dot(d);
    let b = 2.0 * z.dot(d);
    let c = z.dot(z) - radius * radius;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    // c <= 0 inside the region, so the positive root is well defined.
    if b >= 0.0 {
        (-2.0 * c) / (b + disc.sqrt())
    } else {
        (-b + disc.sqrt()) / (2.0 * a)
    }
}

/// `stop(v, residual)` is consulted after every interior iterate; returning
/// `true` accepts that iterate. Boundary hits and negative curvature always
/// terminate.
pub fn cg_steihaug<F, S>(
    apply_h: F,
    g: &Vector,
    radius: f64,
    mut stop: S,
    max_iters: usize,
) -> SteihaugOutcome
where
    F: Fn(&Vector) -> Vector,
    S: FnMut(&Vector, &Vector) -> bool,
{
    let n = g.len();
    let mut z = Vector::zeros(n);
    let mut r = g.clone();
    let mut d = -g;
    let mut rr = r.dot(&r);
    let mut iterations = 0;

    if rr == 0.0 || radius <= 0.0 {
        return SteihaugOutcome { v: z, hit_boundary: false, iterations, residual: r };
    }

    while iterations < max_iters.max(1) {
        iterations += 1;
        let hd = apply_h(&d);
        let curv = d.dot(&hd);
        if curv <= 0.0 {
            let t = boundary_step(&z, &d, radius);
            z.axpy(t, &d, 1.0);
            let residual = apply_h(&z) + g;
            return SteihaugOutcome { v: z, hit_boundary: true, iterations, residual };
        }
        let alpha = rr / curv;
        let z_next = &z + &d * alpha;
        if z_next.norm() >= radius {
            let t = boundary_step(&z, &d, radius);
            z.axpy(t, &d, 1.0);
            let residual = apply_h(&z) + g;
            return SteihaugOutcome { v: z, hit_boundary: true, iterations, residual };
        }
        z = z_next;
        r.axpy(alpha, &hd, 1.0);
        let rr_next = r.dot(&r);
        if rr_next == 0.0 || stop(&z, &r) {
            break;
        }
        let beta = rr_next / rr;
        rr = rr_next;
        d = &d * beta - &r;
    }
    SteihaugOutcome { v: z, hit_boundary: false, iterations, residual: r }
}
