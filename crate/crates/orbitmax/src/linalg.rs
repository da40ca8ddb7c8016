//! Small dense linear algebra used throughout the crate.
//!
//! Everything here operates on matrices of side at most ~17 (the defining
//! representations of the supported groups at the rank-8 enumeration cap), so
//! the implementations favor clarity and numerical hygiene over blocking or
//! SIMD. Two pieces deserve comment:
//!
//! * [`LogLu`] factors a real square matrix whose entries are stored as
//!   `sign * exp(log_magnitude - row_shift)` pairs and returns the
//!   determinant as `(sign, log|det|)`. Determinant ratios of exponential
//!   kernels overflow `f64` long before the *ratios* become large, so all
//!   determinant work in the orbital-integral oracle stays in the log domain.
//! * [`CMat`] is a dense complex matrix with just the operations the Haar
//!   samplers and adjoint action need (multiply, adjoint, Frobenius norm,
//!   modified Gram–Schmidt).

use num_complex::Complex64;

/// Dense complex matrix, row-major, square side `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    pub n: usize,
    pub a: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, a: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n, "matrix size mismatch");
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self[(i, k)];
                if aik == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += aik * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMat {
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn sub(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n, "matrix size mismatch");
        let mut out = self.clone();
        for (x, y) in out.a.iter_mut().zip(rhs.a.iter()) {
            *x -= y;
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> CMat {
        let mut out = self.clone();
        for x in out.a.iter_mut() {
            *x *= s;
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Re Tr(self * rhs) without forming the product.
    pub fn re_trace_product(&self, rhs: &CMat) -> f64 {
        assert_eq!(self.n, rhs.n, "matrix size mismatch");
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for k in 0..n {
                acc += (self[(i, k)] * rhs[(k, i)]).re;
            }
        }
        acc
    }

    pub fn max_abs_im(&self) -> f64 {
        self.a.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.a[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.a[i * self.n + j]
    }
}

/// Modified Gram–Schmidt on the columns of `m`, in place. Returns the
/// diagonal of R (the pre-normalization column norms are its magnitudes);
/// used by the Haar samplers, which need the R diagonal to fix phases.
///
/// The input columns must be linearly independent; with Gaussian input this
/// holds with probability one, and a near-zero column norm (< 1e-12 of the
/// original) panics rather than silently producing junk.
pub fn mgs_columns(m: &mut CMat) -> Vec<Complex64> {
    let n = m.n;
    let mut rdiag = Vec::with_capacity(n);
    for j in 0..n {
        // Subtract projections onto the already-orthonormal columns 0..j.
        for k in 0..j {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in 0..n {
                dot += m[(i, k)].conj() * m[(i, j)];
            }
            for i in 0..n {
                let mik = m[(i, k)];
                m[(i, j)] -= dot * mik;
            }
        }
        let norm: f64 = (0..n).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "rank-deficient input to Gram-Schmidt");
        for i in 0..n {
            m[(i, j)] /= norm;
        }
        rdiag.push(Complex64::new(norm, 0.0));
    }
    rdiag
}

/// LU factorization of a real matrix given in log-magnitude/sign form,
/// with per-row shifts already removed: entry(i,j) = sign_ij * exp(logmag_ij
/// - shift_i). The caller retains the shifts; `log_abs_det` here refers to
/// the *shifted* matrix, so the true log|det| = sum(shifts) + log_abs_det.
pub struct LogLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    /// Sign of det of the shifted matrix (0.0 if exactly singular).
    pub sign: f64,
    /// log|det| of the shifted matrix (-inf if exactly singular).
    pub log_abs_det: f64,
}

impl LogLu {
    /// Factor the dense row-major `n x n` matrix `a` (plain f64 entries, the
    /// shifted/scaled values). Partial pivoting by absolute value.
    pub fn factor(n: usize, mut a: Vec<f64>) -> LogLu {
        assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0f64;
        let mut log_abs_det = 0.0f64;
        for col in 0..n {
            let mut piv = col;
            let mut best = a[perm[col] * n + col].abs();
            for r in col + 1..n {
                let v = a[perm[r] * n + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return LogLu { n, lu: a, perm, sign: 0.0, log_abs_det: f64::NEG_INFINITY };
            }
            if piv != col {
                perm.swap(col, piv);
                sign = -sign;
            }
            let prow = perm[col];
            let pval = a[prow * n + col];
            sign *= pval.signum();
            log_abs_det += pval.abs().ln();
            for r in col + 1..n {
                let row = perm[r];
                let factor = a[row * n + col] / pval;
                a[row * n + col] = factor;
                for c in col + 1..n {
                    a[row * n + c] -= factor * a[prow * n + c];
                }
            }
        }
        LogLu { n, lu: a, perm, sign, log_abs_det }
    }

    /// Solve A x = b for one right-hand side (A = the factored matrix).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        assert!(self.sign != 0.0, "singular matrix");
        // Forward substitution with the permuted rows.
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = b[self.perm[i]];
            for j in 0..i {
                acc -= self.lu[self.perm[i] * n + j] * y[j];
            }
            y[i] = acc;
        }
        // Back substitution.
        for i in (0..n).rev() {
            for j in i + 1..n {
                let yj = y[j];
                y[i] -= self.lu[self.perm[i] * n + j] * yj;
            }
            y[i] /= self.lu[self.perm[i] * n + i];
        }
        y
    }

    /// Tr(A^{-1} B) for a dense row-major B.
    pub fn trace_solve(&self, b: &[f64]) -> f64 {
        let n = self.n;
        assert_eq!(b.len(), n * n);
        let mut tr = 0.0;
        let mut col = vec![0.0; n];
        for j in 0..n {
            for i in 0..n {
                col[i] = b[i * n + j];
            }
            let x = self.solve(&col);
            tr += x[j];
        }
        tr
    }
}

/// Solve the symmetric positive (semi)definite system `a x = b` by Cholesky
/// with diagonal jitter: if a pivot dips below `eps * max_diag` the jitter is
/// increased and factorization restarts. Used for Newton steps and the
/// min-norm-point subproblems, where `a` is a Gram matrix that may be nearly
/// singular but never indefinite beyond roundoff.
pub fn solve_spd(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(1e-300);
    let mut jitter = 0.0;
    'retry: loop {
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                if i == j {
                    s += jitter;
                }
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= max_diag * 1e-14 {
                        jitter = if jitter == 0.0 { max_diag * 1e-12 } else { jitter * 100.0 };
                        assert!(jitter.is_finite());
                        continue 'retry;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        // Forward/back substitution.
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = b[i];
            for k in 0..i {
                acc -= l[i * n + k] * y[k];
            }
            y[i] = acc / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in i + 1..n {
                acc -= l[k * n + i] * y[k];
            }
            y[i] = acc / l[i * n + i];
        }
        return y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_determinant_matches_cofactor_expansion() {
        // 3x3 with a known determinant: det = 1*(5*9-6*8) - 2*(4*9-6*7) + 3*(4*8-5*7) = 0
        // (singular), so use a perturbed version with det computed by hand.
        let a = vec![2.0, 1.0, 1.0, 1.0, 3.0, 2.0, 1.0, 0.0, 0.0];
        // Expanding along the last row: det = 1*(1*2-1*3) = -1.
        let lu = LogLu::factor(3, a);
        assert!((lu.sign * lu.log_abs_det.exp() - (-1.0)).abs() < 1e-12, "det should be -1");
    }

    #[test]
    fn lu_solve_recovers_rhs() {
        let a = vec![4.0, 1.0, 0.5, 1.0, 3.0, -1.0, 0.5, -1.0, 5.0];
        let lu = LogLu::factor(3, a.clone());
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let mut acc = 0.0;
            for j in 0..3 {
                acc += a[i * 3 + j] * x[j];
            }
            assert!((acc - [1.0, 2.0, 3.0][i]).abs() < 1e-12, "residual too large at row {i}");
        }
    }

    #[test]
    fn trace_solve_matches_explicit_inverse() {
        let a = vec![3.0, 1.0, 1.0, 2.0];
        let b = vec![1.0, 4.0, 2.0, -1.0];
        // A^{-1} = (1/5) [[2,-1],[-1,3]]; A^{-1}B = (1/5)[[0,9],[5,-7]], trace = -7/5.
        let lu = LogLu::factor(2, a);
        assert!((lu.trace_solve(&b) - (0.0 - 7.0 / 5.0)).abs() < 1e-12);
    }

    #[test]
    fn mgs_produces_unitary_columns() {
        let n = 5;
        let mut m = CMat::zeros(n);
        // Deterministic pseudo-random entries (an LCG; trig-lattice formulas
        // are secretly separable and therefore low-rank).
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(next(), next());
            }
        }
        mgs_columns(&mut m);
        let residual = m.adjoint().mul(&m).sub(&CMat::identity(n)).frobenius_norm();
        assert!(residual < 1e-12, "Q*Q - I residual {residual}");
    }

    #[test]
    fn spd_solve_residual_small() {
        let a = vec![4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 5.0];
        let b = vec![1.0, -2.0, 0.5];
        let x = solve_spd(3, &a, &b);
        for i in 0..3 {
            let mut acc = 0.0;
            for j in 0..3 {
                acc += a[i * 3 + j] * x[j];
            }
            assert!((acc - b[i]).abs() < 1e-10);
        }
    }
}
