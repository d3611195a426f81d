//! Small dense complex linear algebra on top of `ndarray`.
//!
//! The Hilbert spaces in this crate are tiny (a two-level emitter times a
//! few Fock states), so everything here is written for clarity rather than
//! asymptotic speed: plain `Array2<Complex64>` matrices, naive O(n³) products
//! via `ndarray::dot`, and a cyclic Jacobi eigensolver for Hermitian matrices.

use alloc::vec::Vec;
use ndarray::{Array1, Array2};
use num_complex::Complex64;
#[allow(unused_imports)] // f64 math methods in no_std builds
use num_traits::Float;

/// Complex scalar shorthand used throughout the crate.
pub type C64 = Complex64;

/// `0 + 0i`.
pub const C_ZERO: C64 = C64::new(0.0, 0.0);
/// `1 + 0i`.
pub const C_ONE: C64 = C64::new(1.0, 0.0);
/// `0 + 1i`.
pub const C_I: C64 = C64::new(0.0, 1.0);

/// Conjugate transpose of a matrix.
pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// Commutator `[a, b] = a·b − b·a`.
pub fn commutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b) - b.dot(a)
}

/// Anticommutator `{a, b} = a·b + b·a`.
pub fn anticommutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b) + b.dot(a)
}

/// Matrix trace.
pub fn trace(m: &Array2<C64>) -> C64 {
    m.diag().sum()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::from_elem((ra * rb, ca * cb), C_ZERO);
    for ia in 0..ra {
        for ja in 0..ca {
            let f = a[(ia, ja)];
            if f == C_ZERO {
                continue;
            }
            for ib in 0..rb {
                for jb in 0..cb {
                    out[(ia * rb + ib, ja * cb + jb)] = f * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Identity matrix of dimension `n`.
pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_elem(n, C_ONE))
}

/// Largest absolute deviation from Hermiticity, `max |m − m†|`.
pub fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let md = dagger(m);
    (m - &md)
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max)
}

/// Frobenius norm.
pub fn frobenius_norm(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues of a Hermitian matrix by the cyclic complex Jacobi method.
///
/// Returns the eigenvalues sorted ascending. The input is assumed Hermitian;
/// only its lower triangle times the conjugate upper triangle is used through
/// symmetric updates. Convergence is driven to machine precision, which the
/// 6–16 dimensional matrices in this crate reach in a handful of sweeps.
pub fn eigvals_hermitian(m: &Array2<C64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigvals_hermitian needs a square matrix");
    let mut a = m.clone();
    // Scale-aware threshold on off-diagonal mass.
    let scale = frobenius_norm(&a).max(1e-300);
    let tol = 1e-15 * scale;

    for _sweep in 0..100 {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += a[(p, q)].norm_sqr();
                }
            }
            s.sqrt()
        };
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() <= tol / (n as f64) {
                    continue;
                }
                // Complex Jacobi rotation zeroing a[(p,q)]:
                // with a_pq = |a_pq| e^{iφ}, rotate by angle θ where
                // tan(2θ) = 2|a_pq| / (a_pp − a_qq).
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let abs = apq.norm();
                let phase = apq / abs;
                let theta = 0.5 * (2.0 * abs).atan2(app - aqq);
                let (s, c) = theta.sin_cos();
                let s_ph = phase * s;

                // Columns p and q: A ← A·G
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * c + aiq * s_ph.conj();
                    a[(i, q)] = -aip * s_ph + aiq * c;
                }
                // Rows p and q: A ← G†·A
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj * c + aqj * s_ph;
                    a[(q, j)] = -apj * s_ph.conj() + aqj * c;
                }
            }
        }
    }

    let mut ev: Vec<f64> = a.diag().iter().map(|z| z.re).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigval_hermitian(m: &Array2<C64>) -> f64 {
    eigvals_hermitian(m)[0]
}

/// Solve the real linear system `A·x = b` by Gaussian elimination with
/// partial pivoting. Returns `None` when a pivot falls below `eps` times the
/// largest row entry (singular to working precision).
pub fn solve_real(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.len());
    let mut m = a.clone();
    let mut rhs = b.clone();

    for col in 0..n {
        let (piv, piv_abs) = (col..n)
            .map(|r| (r, m[(r, col)].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        let row_scale = (0..n)
            .map(|j| m[(piv, j)].abs())
            .fold(0.0_f64, f64::max)
            .max(1e-300);
        if piv_abs < 1e-13 * row_scale {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap((piv, j), (col, j));
            }
            rhs.swap(piv, col);
        }
        for r in (col + 1)..n {
            let f = m[(r, col)] / m[(col, col)];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[(r, j)] -= f * m[(col, j)];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for j in (row + 1)..n {
            acc -= m[(row, j)] * x[j];
        }
        x[row] = acc / m[(row, row)];
    }
    Some(x)
}

/// Invert a real matrix via Gauss–Jordan with partial pivoting.
pub fn invert_real(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut inv = Array2::zeros((n, n));
    for col in 0..n {
        let mut e = Array1::zeros(n);
        e[col] = 1.0;
        let x = solve_real(a, &e)?;
        for row in 0..n {
            inv[(row, col)] = x[row];
        }
    }
    Some(inv)
}
