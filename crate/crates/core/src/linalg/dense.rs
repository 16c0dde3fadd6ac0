use super::{matrix_inf_norm, LinalgError, Matrix, Vector};

const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Least-squares multiplier `argmin_y ‖g + Jᵀy‖₂` from the normal equations
/// `(JJᵀ + δI) y = −Jg` with `δ = 1e-12·(1 + ‖JJᵀ‖_∞)`.
///
/// The ridge makes the system solvable when J is rank-deficient and selects
/// the minimum-norm minimizer in that case.
pub fn least_squares_multiplier(j: &Matrix, g: &Vector) -> Vector {
    let m = j.nrows();
    if m == 0 {
        return Vector::zeros(0);
    }
    let jjt = j * j.transpose();
    let ridge = 1e-12 * (1.0 + matrix_inf_norm(&jjt));
    let a = &jjt + Matrix::identity(m, m) * ridge;
    let rhs = -(j * g);
    match a.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        // Only reachable for non-finite input; LU keeps the function total.
        None => a.full_piv_lu().solve(&rhs).unwrap_or_else(|| Vector::zeros(m)),
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted in
/// ascending order. Sweeps stop once the off-diagonal Frobenius mass falls
/// below `1e-14·‖A‖_F`.
pub fn jacobi_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.nrows();
    let mut a = (a + a.transpose()) * 0.5;
    let total = a.norm();
    if total == 0.0 {
        return vec![0.0; n];
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
        }
        if off.sqrt() <= JACOBI_TOL * total {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// The `min(m, n)` singular values of J in descending order, from the Jacobi
/// eigenvalues of the smaller Gram matrix.
pub fn singular_values(j: &Matrix) -> Vec<f64> {
    let gram = if j.nrows() <= j.ncols() {
        j * j.transpose()
    } else {
        j.transpose() * j
    };
    let mut sv: Vec<f64> = jacobi_eigenvalues(&gram)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    sv.reverse();
    sv
}

pub fn smallest_singular_value(j: &Matrix) -> f64 {
    singular_values(j).last().copied().unwrap_or(0.0)
}

pub fn spectral_norm(j: &Matrix) -> f64 {
    singular_values(j).first().copied().unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub u: Vector,
    pub y: Vector,
    /// The (2,2) block had to be regularized because J is (numerically)
    /// rank-deficient.
    pub regularized: bool,
}

fn assemble_kkt(h: &Matrix, j: &Matrix, reg: f64) -> Matrix {
    let n = h.nrows();
    let m = j.nrows();
    let mut k = Matrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    k.view_mut((0, n), (n, m)).copy_from(&j.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(j);
    for i in 0..m {
        k[(n + i, n + i)] = -reg;
    }
    k
}

fn lu_solve(k: Matrix, rhs: &Vector) -> Option<Vector> {
    let lu = k.full_piv_lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows().min(u.ncols())).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 || min <= 1e-13 * max {
        return None;
    }
    lu.solve(rhs).filter(|x| x.iter().all(|v| v.is_finite()))
}

/// Dense solve of `[[H, Jᵀ], [J, 0]] [u; y] = [−rhs_top; 0]`.
///
/// A plain pivoted LU is tried first; when J is numerically rank-deficient the
/// (2,2) block is replaced by `−1e-12·max(1, ‖H‖_∞)·I`. The u-component is
/// unique either way.
pub fn dense_kkt_solve(h: &Matrix, j: &Matrix, rhs_top: &Vector) -> Result<KktSolution, LinalgError> {
    let n = h.nrows();
    let m = j.nrows();
    if h.ncols() != n || j.ncols() != n || rhs_top.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "H is {}x{}, J is {}x{}, rhs has {} entries",
            h.nrows(),
            h.ncols(),
            m,
            j.ncols(),
            rhs_top.len()
        )));
    }
    let mut rhs = Vector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-rhs_top));

    let (sol, regularized) = match lu_solve(assemble_kkt(h, j, 0.0), &rhs) {
        Some(s) => (s, false),
        None => {
            let reg = 1e-12 * matrix_inf_norm(h).max(1.0);
            let k = assemble_kkt(h, j, reg);
            let s = k
                .full_piv_lu()
                .solve(&rhs)
                .filter(|x| x.iter().all(|v| v.is_finite()))
                .ok_or_else(|| LinalgError::SingularSystem("regularized KKT matrix is singular".into()))?;
            (s, true)
        }
    };
    let u = sol.rows(0, n).into_owned();
    let y = sol.rows(n, m).into_owned();
    let scale = 1.0 + super::inf_norm(rhs_top);
    if super::inf_norm(&(j * &u)) > 1e-8 * scale {
        return Err(LinalgError::SingularSystem("solution violates J u = 0".into()));
    }
    Ok(KktSolution { u, y, regularized })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> Vector {
        Vector::from_row_slice(x)
    }

    #[test]
    fn multiplier_full_rank() {
        let j = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let y = least_squares_multiplier(&j, &v(&[-2.0, 0.0]));
        assert!((y[0] - 2.0).abs() < 1e-10);
        let res = v(&[-2.0, 0.0]) + j.transpose() * &y;
        assert!(res.amax() < 1e-10);
    }

    #[test]
    fn multiplier_orthogonal_gradient() {
        let j = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let g = v(&[0.0, 3.0]);
        let y = least_squares_multiplier(&j, &g);
        assert_eq!(y[0], 0.0);
        assert_eq!(g + j.transpose() * y, v(&[0.0, 3.0]));
    }

    #[test]
    fn multiplier_duplicated_rows() {
        let j = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let g = v(&[-2.0, 0.0]);
        let y = least_squares_multiplier(&j, &g);
        assert!((g + j.transpose() * &y).norm() < 1e-9);
        assert!((y[0] + y[1] - 2.0).abs() < 1e-9);
        // Brute-force grid over y confirms no better residual exists.
        let mut best = f64::INFINITY;
        for a in -40..=40 {
            for b in -40..=40 {
                let yy = v(&[a as f64 * 0.1, b as f64 * 0.1]);
                best = best.min((v(&[-2.0, 0.0]) + j.transpose() * yy).norm());
            }
        }
        assert!((v(&[-2.0, 0.0]) + j.transpose() * &y).norm() <= best + 1e-9);
    }

    #[test]
    fn singular_value_probes() {
        assert!((smallest_singular_value(&Matrix::identity(2, 2)) - 1.0).abs() < 1e-14);
        let dup = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert!(smallest_singular_value(&dup) < 1e-12);
    }

    #[test]
    fn singular_values_match_bidiagonalization_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let j = Matrix::from_fn(3, 5, |_, _| rng.gen_range(-1.0..1.0));
            let mut oracle: Vec<f64> = j.clone().svd(false, false).singular_values.iter().cloned().collect();
            oracle.sort_by(|a, b| b.total_cmp(a));
            let ours = singular_values(&j);
            for (a, b) in ours.iter().zip(oracle.iter()) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn kkt_examples() {
        let h = Matrix::identity(2, 2);
        let j = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let s = dense_kkt_solve(&h, &j, &v(&[0.0, 1.0])).unwrap();
        assert!((s.u - v(&[0.0, -1.0])).amax() < 1e-14);
        assert!(s.y.amax() < 1e-14);

        let z = dense_kkt_solve(&h, &j, &v(&[0.0, 0.0])).unwrap();
        assert_eq!(z.u.amax(), 0.0);
        assert_eq!(z.y.amax(), 0.0);

        let dup = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let s = dense_kkt_solve(&h, &dup, &v(&[0.0, 1.0])).unwrap();
        assert!(s.regularized);
        assert!((&s.u - v(&[0.0, -1.0])).amax() < 1e-10);
        assert!((&dup * &s.u).amax() < 1e-10);
    }

    #[test]
    fn kkt_dimension_mismatch() {
        let h = Matrix::identity(2, 2);
        let j = Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        assert!(matches!(
            dense_kkt_solve(&h, &j, &v(&[0.0, 1.0])),
            Err(LinalgError::DimensionMismatch(_))
        ));
    }

    proptest! {
        #[test]
        fn kkt_back_substitution(seed in 0u64..500, n in 2usize..7, m_frac in 0.1f64..0.9) {
            let m = ((n as f64 * m_frac) as usize).clamp(1, n - 1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = Matrix::identity(n, n) * rng.gen_range(0.5..3.0);
            let j = Matrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
            let rhs = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let s = dense_kkt_solve(&h, &j, &rhs).unwrap();
            let top = &h * &s.u + j.transpose() * &s.y + &rhs;
            let bottom = &j * &s.u;
            let scale = 1.0 + rhs.amax();
            prop_assert!(top.amax() <= 1e-8 * scale);
            prop_assert!(bottom.amax() <= 1e-8 * scale);
        }

        #[test]
        fn multiplier_beats_random_cloud(seed in 0u64..200, m in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = m + 2;
            let j = Matrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
            let g = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let y = least_squares_multiplier(&j, &g);
            let base = (&g + j.transpose() * &y).norm();
            for _ in 0..1000 {
                let dy = Vector::from_fn(m, |_, _| rng.gen_range(-0.1..0.1));
                let other = (&g + j.transpose() * (&y + dy)).norm();
                prop_assert!(base <= other + 1e-8);
            }
        }
    }
}
