//! Built-in test problems.
//!
//! | name                  | n  | m  | notes                                   |
//! |-----------------------|----|----|-----------------------------------------|
//! | unit-circle           | 2  | 1  | linear objective on the circle          |
//! | unit-sphere-5         | 5  | 1  | unit-norm linear objective on the sphere|
//! | quad-linear           | 4  | 2  | ½‖x‖² on a linear subspace              |
//! | quad-eq-5/10/20       | n  | n/2| random strictly convex QPs, fixed seed  |
//! | rosenbrock-circle     | 2  | 1  | Rosenbrock (weight 1) on the circle     |
//! | rosenbrock-sphere-4   | 4  | 1  | chained Rosenbrock on ‖x‖² = 2          |
//! | hs6, hs7, hs28, hs48  |    |    | Hock–Schittkowski equality problems     |
//! | rank-deficient-start  | 3  | 2  | J(x0) has rank one                      |
//!
//! The Rosenbrock problems, hs28 and hs48 carry a constant H for the
//! tangential subproblem close to the Lagrangian Hessian at the solution.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{quadratic_problem, ExactEvaluation, ProblemError, ProblemSpec};
use crate::linalg::{Matrix, Vector};

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn problem<F>(name: &str, n: usize, m: usize, x0: &[f64], f: F) -> ProblemSpec
where
    F: Fn(&Vector) -> ExactEvaluation + Send + Sync + 'static,
{
    ProblemSpec::new(name, n, m, v(x0), Arc::new(f))
}

fn unit_circle() -> ProblemSpec {
    let s = 0.5f64.sqrt();
    problem("unit-circle", 2, 1, &[0.8, 0.9], |x| ExactEvaluation {
        f: x[0] + x[1],
        g: v(&[1.0, 1.0]),
        c: v(&[x[0] * x[0] + x[1] * x[1] - 1.0]),
        j: Matrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]]),
    })
    .with_kkt(v(&[-s, -s]), v(&[s]))
}

fn unit_sphere_5() -> ProblemSpec {
    // Unit-norm cost so the Lagrangian Hessian at the solution is I.
    let a = v(&[1.0, 2.0, 3.0, 4.0, 5.0]).normalize();
    let x_star = -&a;
    let ac = a.clone();
    problem("unit-sphere-5", 5, 1, &[0.5; 5], move |x| ExactEvaluation {
        f: ac.dot(x),
        g: ac.clone(),
        c: v(&[x.norm_squared() - 1.0]),
        j: Matrix::from_row_slice(1, x.len(), (x * 2.0).as_slice()),
    })
    .with_kkt(x_star, v(&[0.5]))
}

fn quad_linear() -> ProblemSpec {
    let a = Matrix::from_row_slice(2, 4, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    quadratic_problem(
        "quad-linear",
        Matrix::identity(4, 4),
        Vector::zeros(4),
        a,
        Vector::zeros(2),
        v(&[1.0, -1.0, 2.0, 0.5]),
    )
}

/// `Q = MᵀM/n + I`, entries of M, q, A, b, x0 uniform on [-1, 1].
fn quad_eq(n: usize) -> ProblemSpec {
    let m = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + n as u64);
    let mut draw = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
    let mm = draw(n, n);
    let q_mat = mm.transpose() * &mm / n as f64 + Matrix::identity(n, n);
    let q = draw(n, 1).column(0).into_owned();
    let a = draw(m, n);
    let b = draw(m, 1).column(0).into_owned();
    let x0 = draw(n, 1).column(0).into_owned();
    quadratic_problem(&format!("quad-eq-{n}"), q_mat, q, a, b, x0)
}

const ROSENBROCK_WEIGHT: f64 = 1.0;

fn rosenbrock_circle() -> ProblemSpec {
    problem("rosenbrock-circle", 2, 1, &[-0.6, 0.6], |x| {
        let w = ROSENBROCK_WEIGHT;
        let t = x[1] - x[0] * x[0];
        ExactEvaluation {
            f: (1.0 - x[0]).powi(2) + w * t * t,
            g: v(&[-2.0 * (1.0 - x[0]) - 4.0 * w * t * x[0], 2.0 * w * t]),
            c: v(&[x[0] * x[0] + x[1] * x[1] - 1.0]),
            j: Matrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]]),
        }
    })
    .with_hessian(Matrix::from_row_slice(2, 2, &[7.7, -3.2, -3.2, 2.2]))
}

fn rosenbrock_sphere_4() -> ProblemSpec {
    problem("rosenbrock-sphere-4", 4, 1, &[-0.7, 0.7, -0.7, 0.7], |x| {
        let w = ROSENBROCK_WEIGHT;
        let mut f = 0.0;
        let mut g = Vector::zeros(4);
        for i in 0..3 {
            let t = x[i + 1] - x[i] * x[i];
            f += (1.0 - x[i]).powi(2) + w * t * t;
            g[i] += -2.0 * (1.0 - x[i]) - 4.0 * w * t * x[i];
            g[i + 1] += 2.0 * w * t;
        }
        ExactEvaluation {
            f,
            g,
            c: v(&[x.norm_squared() - 2.0]),
            j: Matrix::from_row_slice(1, x.len(), (x * 2.0).as_slice()),
        }
    })
    .with_hessian(Matrix::from_row_slice(
        4,
        4,
        &[8.4, -3.5, 0.0, 0.0, -3.5, 9.5, -3.2, 0.0, 0.0, -3.2, 8.5, -2.7, 0.0, 0.0, -2.7, 2.5],
    ))
}

fn hs6() -> ProblemSpec {
    problem("hs6", 2, 1, &[-1.2, 1.0], |x| ExactEvaluation {
        f: (1.0 - x[0]).powi(2),
        g: v(&[-2.0 * (1.0 - x[0]), 0.0]),
        c: v(&[10.0 * (x[1] - x[0] * x[0])]),
        j: Matrix::from_row_slice(1, 2, &[-20.0 * x[0], 10.0]),
    })
    .with_kkt(v(&[1.0, 1.0]), v(&[0.0]))
}

fn hs7() -> ProblemSpec {
    let r3 = 3f64.sqrt();
    problem("hs7", 2, 1, &[2.0, 2.0], |x| {
        let s = 1.0 + x[0] * x[0];
        ExactEvaluation {
            f: s.ln() - x[1],
            g: v(&[2.0 * x[0] / s, -1.0]),
            c: v(&[s * s + x[1] * x[1] - 4.0]),
            j: Matrix::from_row_slice(1, 2, &[4.0 * x[0] * s, 2.0 * x[1]]),
        }
    })
    .with_kkt(v(&[0.0, r3]), v(&[1.0 / (2.0 * r3)]))
}

fn hs28() -> ProblemSpec {
    problem("hs28", 3, 1, &[-4.0, 1.0, 1.0], |x| {
        let (a, b) = (x[0] + x[1], x[1] + x[2]);
        ExactEvaluation {
            f: a * a + b * b,
            g: v(&[2.0 * a, 2.0 * (a + b), 2.0 * b]),
            c: v(&[x[0] + 2.0 * x[1] + 3.0 * x[2] - 1.0]),
            j: Matrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]),
        }
    })
    .with_hessian(Matrix::from_row_slice(3, 3, &[2.0, 2.0, 0.0, 2.0, 4.0, 2.0, 0.0, 2.0, 2.0]))
    .with_kkt(v(&[0.5, -0.5, 0.5]), v(&[0.0]))
}

fn hs48() -> ProblemSpec {
    problem("hs48", 5, 2, &[3.0, 5.0, -3.0, 2.0, -2.0], |x| {
        let (a, b, e) = (x[0] - 1.0, x[1] - x[2], x[3] - x[4]);
        ExactEvaluation {
            f: a * a + b * b + e * e,
            g: v(&[2.0 * a, 2.0 * b, -2.0 * b, 2.0 * e, -2.0 * e]),
            c: v(&[x.sum() - 5.0, x[2] - 2.0 * (x[3] + x[4]) + 3.0]),
            j: Matrix::from_row_slice(2, 5, &[1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, -2.0, -2.0]),
        }
    })
    .with_hessian(Matrix::from_row_slice(
        5,
        5,
        &[
            2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, -2.0, 0.0, 0.0, 0.0, -2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0,
            -2.0, 0.0, 0.0, 0.0, -2.0, 2.0,
        ],
    ))
    .with_kkt(Vector::from_element(5, 1.0), v(&[0.0, 0.0]))
}

/// Both constraint gradients are parallel at x0 = (½, ½, 1); the Jacobian has
/// full rank at the solution (1, 0, 0).
fn rank_deficient_start() -> ProblemSpec {
    problem("rank-deficient-start", 3, 2, &[0.5, 0.5, 1.0], |x| ExactEvaluation {
        f: x[1] + 0.5 * x[2] * x[2],
        g: v(&[0.0, 1.0, x[2]]),
        c: v(&[x[0] + x[1] - 1.0, x[0] * x[0] + x[1] * x[1] - 1.0]),
        j: Matrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 2.0 * x[0], 2.0 * x[1], 0.0]),
    })
    .with_full_rank(false)
    .with_kkt(v(&[1.0, 0.0, 0.0]), v(&[-1.0, 0.5]))
}

const NAMES: &[&str] = &[
    "unit-circle",
    "unit-sphere-5",
    "quad-linear",
    "quad-eq-5",
    "quad-eq-10",
    "quad-eq-20",
    "rosenbrock-circle",
    "rosenbrock-sphere-4",
    "hs6",
    "hs7",
    "hs28",
    "hs48",
    "rank-deficient-start",
];

pub fn builtin_names() -> &'static [&'static str] {
    NAMES
}

pub fn builtin(name: &str) -> Result<ProblemSpec, ProblemError> {
    Ok(match name {
        "unit-circle" => unit_circle(),
        "unit-sphere-5" => unit_sphere_5(),
        "quad-linear" => quad_linear(),
        "quad-eq-5" => quad_eq(5),
        "quad-eq-10" => quad_eq(10),
        "quad-eq-20" => quad_eq(20),
        "rosenbrock-circle" => rosenbrock_circle(),
        "rosenbrock-sphere-4" => rosenbrock_sphere_4(),
        "hs6" => hs6(),
        "hs7" => hs7(),
        "hs28" => hs28(),
        "hs48" => hs48(),
        "rank-deficient-start" => rank_deficient_start(),
        _ => return Err(ProblemError::Unknown(name.to_string())),
    })
}

pub fn builtin_registry() -> Vec<ProblemSpec> {
    NAMES.iter().map(|n| builtin(n).expect("registry names resolve")).collect()
}
