//! Cyclic Jacobi diagonalization of a complex Hermitian matrix.
//!
//! Each step applies the unitary plane rotation
//!
//! ```text
//!        p            q
//! p [    c        s·e^{iφ} ]
//! q [ -s·e^{-iφ}     c     ]
//! ```
//!
//! with `a_pq = |a_pq|·e^{iφ}`, chosen so that `(J^H A J)_pq = 0`. Sweeps
//! repeat over all pairs until the off-diagonal Frobenius norm is negligible.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;
const OFF_DIAGONAL_TOL: f64 = 1e-15;

/// Eigenvalues (descending) and eigenvectors (columns, same order).
pub(crate) fn hermitian_eigen(mut a: Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "Jacobi needs a square matrix");
    let mut v = Array2::<C64>::eye(n);

    let frob = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let skip_below = frob * f64::EPSILON * 1e-3;
    let mut off = off_diagonal_norm(&a);
    let mut sweeps = 0;

    while off > OFF_DIAGONAL_TOL * frob {
        if sweeps == MAX_SWEEPS {
            return Err(Error::JacobiNoConvergence { sweeps, off_norm: off });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                let abs = apq.norm();
                if abs <= skip_below {
                    continue;
                }
                let phase = apq / abs;
                let zeta = (a[[q, q]].re - a[[p, p]].re) / (2.0 * abs);
                let t = if zeta.abs() > 1e150 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + (zeta * zeta + 1.0).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let j_pq = phase * s;
                let j_qp = -phase.conj() * s;

                // A ← A·J
                for i in 0..n {
                    let (aip, aiq) = (a[[i, p]], a[[i, q]]);
                    a[[i, p]] = aip * c + aiq * j_qp;
                    a[[i, q]] = aip * j_pq + aiq * c;
                }
                // A ← J^H·A
                for i in 0..n {
                    let (api, aqi) = (a[[p, i]], a[[q, i]]);
                    a[[p, i]] = api * c + aqi * j_qp.conj();
                    a[[q, i]] = api * j_pq.conj() + aqi * c;
                }
                a[[p, q]] = C64::new(0.0, 0.0);
                a[[q, p]] = C64::new(0.0, 0.0);
                a[[p, p]].im = 0.0;
                a[[q, q]].im = 0.0;
                // V ← V·J
                for i in 0..n {
                    let (vip, viq) = (v[[i, p]], v[[i, q]]);
                    v[[i, p]] = vip * c + viq * j_qp;
                    v[[i, q]] = vip * j_pq + viq * c;
                }
            }
        }
        sweeps += 1;
        off = off_diagonal_norm(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].re.total_cmp(&a[[i, i]].re));
    let values = order.iter().map(|&i| a[[i, i]].re).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    Ok((values, vectors))
}

fn off_diagonal_norm(a: &Array2<C64>) -> f64 {
    let mut acc = 0.0;
    for ((i, j), x) in a.indexed_iter() {
        if i != j {
            acc += x.norm_sqr();
        }
    }
    acc.sqrt()
}
