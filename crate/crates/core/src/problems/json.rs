//! On-disk quadratic problems (`*.qp.json`):
//!
//! ```text
//! { "name": "...", "Q": [[..]], "q": [..], "A": [[..]], "b": [..], "x0": [..] }
//! ```
//!
//! defining `f = ½xᵀQx + qᵀx` and `c = Ax − b`. `Q` is symmetrized as
//! `(Q + Qᵀ)/2`. An optional `"H"` overrides the tangential-subproblem matrix.

use std::sync::Arc;

use serde::Deserialize;

use super::{ExactEvaluation, ProblemError, ProblemSpec};
use crate::linalg::{is_finite_matrix, is_finite_vector, Matrix, Vector};

pub const QP_FILE_SUFFIX: &str = ".qp.json";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QpFile {
    name: String,
    #[serde(rename = "Q")]
    q_mat: Vec<Vec<f64>>,
    q: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    x0: Vec<f64>,
    #[serde(rename = "H", default)]
    h: Option<Vec<Vec<f64>>>,
}

fn backticked(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

fn rows_to_matrix(field: &str, rows: &[Vec<f64>], cols: usize) -> Result<Matrix, ProblemError> {
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(ProblemError::DimensionMismatch(format!(
            "`{field}` row {i} has {} entries, expected {cols}",
            r.len()
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Matrix::from_row_slice(rows.len(), cols, &flat))
}

pub fn parse_problem_json(text: &[u8]) -> Result<ProblemSpec, ProblemError> {
    let file: QpFile = serde_json::from_slice(text).map_err(|e| {
        let message = e.to_string();
        ProblemError::Parse {
            line: e.line(),
            column: e.column(),
            field: backticked(&message),
            message,
        }
    })?;

    let n = file.x0.len();
    let m = file.b.len();
    if n == 0 || m == 0 {
        return Err(ProblemError::DimensionMismatch("need at least one variable and one constraint".into()));
    }
    if file.q_mat.len() != n || file.q.len() != n {
        return Err(ProblemError::DimensionMismatch(format!(
            "`Q` has {} rows and `q` {} entries; `x0` implies n = {n}",
            file.q_mat.len(),
            file.q.len()
        )));
    }
    if file.a.len() != m {
        return Err(ProblemError::DimensionMismatch(format!(
            "`A` has {} rows; `b` implies m = {m}",
            file.a.len()
        )));
    }
    let q_mat = rows_to_matrix("Q", &file.q_mat, n)?;
    let a = rows_to_matrix("A", &file.a, n)?;
    let h = file.h.as_ref().map(|h| rows_to_matrix("H", h, n)).transpose()?;
    if let Some(h) = &h {
        if h.nrows() != n {
            return Err(ProblemError::DimensionMismatch(format!("`H` has {} rows, expected {n}", h.nrows())));
        }
    }
    let q = Vector::from_vec(file.q);
    let b = Vector::from_vec(file.b);
    let x0 = Vector::from_vec(file.x0);
    if !(is_finite_matrix(&q_mat) && is_finite_matrix(&a) && is_finite_vector(&q) && is_finite_vector(&b) && is_finite_vector(&x0)) {
        return Err(ProblemError::NonFinite(file.name));
    }
    let mut spec = quadratic_problem(&file.name, q_mat, q, a, b, x0);
    if let Some(h) = h {
        spec = spec.with_hessian((&h + h.transpose()) * 0.5);
    }
    Ok(spec)
}

/// `min ½xᵀQx + qᵀx  s.t. Ax = b`. The KKT point is attached when the KKT
/// matrix is nonsingular.
pub fn quadratic_problem(name: &str, q_mat: Matrix, q: Vector, a: Matrix, b: Vector, x0: Vector) -> ProblemSpec {
    let n = x0.len();
    let m = b.len();
    let q_sym = (&q_mat + q_mat.transpose()) * 0.5;

    let mut kkt = Matrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(&q_sym);
    kkt.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    kkt.view_mut((n, 0), (m, n)).copy_from(&a);
    let mut rhs = Vector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-&q));
    rhs.rows_mut(n, m).copy_from(&b);
    let lu = kkt.full_piv_lu();
    let solution = if lu.is_invertible() { lu.solve(&rhs) } else { None };

    let full_rank = crate::linalg::smallest_singular_value(&a) > 1e-8;
    let (qs, qv, am, bv) = (q_sym.clone(), q.clone(), a.clone(), b.clone());
    let eval = Arc::new(move |x: &Vector| {
        let qx = &qs * x;
        ExactEvaluation {
            f: 0.5 * x.dot(&qx) + qv.dot(x),
            g: qx + &qv,
            c: &am * x - &bv,
            j: am.clone(),
        }
    });
    let mut spec = ProblemSpec::new(name, n, m, x0, eval).with_full_rank(full_rank);
    if let Some(sol) = solution {
        spec = spec.with_kkt(sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned());
    }
    spec
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_file() {
        let text = br#"{"name":"t","Q":[[1,0],[0,1]],"q":[0,0],"A":[[1,1]],"b":[1],"x0":[0,0]}"#;
        let p = parse_problem_json(text).unwrap();
        let e = p.evaluate(&p.x0).unwrap();
        assert_eq!(e.f, 0.0);
        assert_eq!(e.c, Vector::from_vec(vec![-1.0]));
        assert_eq!(e.j, Matrix::from_row_slice(1, 2, &[1.0, 1.0]));
        let kkt = p.known_kkt.unwrap();
        assert!((kkt.x - Vector::from_vec(vec![0.5, 0.5])).amax() < 1e-14);
    }

    #[test]
    fn missing_field_is_named() {
        let text = br#"{"name":"t","Q":[[1,0],[0,1]],"q":[0,0],"b":[1],"x0":[0,0]}"#;
        match parse_problem_json(text) {
            Err(ProblemError::Parse { field, line, .. }) => {
                assert_eq!(field.as_deref(), Some("A"));
                assert_eq!(line, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn asymmetric_q_is_symmetrized() {
        let text = br#"{"name":"t","Q":[[0,2],[0,0]],"q":[0,0],"A":[[1,0]],"b":[0],"x0":[1,3]}"#;
        let p = parse_problem_json(text).unwrap();
        let e = p.evaluate(&p.x0).unwrap();
        // Q_sym = [[0,1],[1,0]] -> f = x1 x2, g = (x2, x1)
        assert_eq!(e.f, 3.0);
        assert_eq!(e.g, Vector::from_vec(vec![3.0, 1.0]));
    }

    #[test]
    fn dimension_mismatch() {
        let text = br#"{"name":"t","Q":[[1,0],[0,1]],"q":[0,0],"A":[[1,1,1]],"b":[1],"x0":[0,0]}"#;
        assert!(matches!(parse_problem_json(text), Err(ProblemError::DimensionMismatch(_))));
    }

    #[test]
    fn syntax_error_reports_position() {
        let text = b"{\n  \"name\": \"t\",\n  \"Q\": [[1,0],[0,1]\n}";
        match parse_problem_json(text) {
            Err(ProblemError::Parse { line, .. }) => assert!(line >= 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
