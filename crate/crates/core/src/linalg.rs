//! Small dense symmetric linear algebra: cyclic-Jacobi eigendecomposition and
//! a pivoted linear solve. Sized for covariance matrices (tens of channels),
//! not for large systems.

use ndarray::{Array1, Array2};

/// Eigendecomposition of a real symmetric matrix.
///
/// `values[i]` corresponds to the column `vectors.column(i)`; pairs are sorted
/// by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

/// Cyclic Jacobi rotations on a symmetric matrix.
///
/// Converges to machine precision for the small, well-scaled matrices used in
/// spatial filtering. The input is only read from its lower triangle being
/// equal to its upper; callers should symmetrize first if in doubt.
pub fn sym_eigen(a: &Array2<f64>) -> SymEigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);

    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(&m)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                // rotation angle zeroing m[p,q]
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap());
    let mut values = Array1::<f64>::zeros(n);
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (out, &i) in idx.iter().enumerate() {
        values[out] = m[[i, i]];
        for k in 0..n {
            vectors[[k, out]] = v[[k, i]];
        }
    }
    SymEigen { values, vectors }
}

fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot falls below `1e-12` times the largest initial
/// entry, i.e. when `a` is singular for practical purposes.
pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.len());
    let mut m = a.clone();
    let mut x = b.clone();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);

    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if m[[row, col]].abs() > m[[pivot, col]].abs() {
                pivot = row;
            }
        }
        if m[[pivot, col]].abs() < 1e-12 * scale {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap([pivot, k], [col, k]);
            }
            x.swap(pivot, col);
        }
        for row in (col + 1)..n {
            let f = m[[row, col]] / m[[col, col]];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[[row, k]] -= f * m[[col, k]];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in (col + 1)..n {
            s -= m[[col, k]] * x[k];
        }
        x[col] = s / m[[col, col]];
    }
    Some(x)
}
