//! Sparse LDL' factorization for symmetric (possibly indefinite) systems.
//!
//! Up-looking row factorization driven by the elimination tree, without
//! pivoting. The saddle point systems assembled here are ordered velocity
//! block first, pressure block last; in that order every leading principal
//! minor is nonsingular (the velocity block is positive definite, the
//! trailing pressure pivots come from a negative definite Schur complement),
//! so the unpivoted factorization is well defined. Callers pass a
//! permutation to control fill; the factor stores it and applies it on both
//! sides of every solve.

use crate::assembly::SparseMatrix;
use crate::error::{Error, Result};
use crate::CoeffVec;

/// L D L' factorization of a permuted symmetric matrix.
#[derive(Debug)]
pub struct LdlFactor {
    n: usize,
    /// perm[new] = old dof index.
    perm: Vec<usize>,
    /// Columns of unit lower triangular L (diagonal implicit).
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    d: Vec<f64>,
    n_pos: usize,
    n_neg: usize,
}

impl LdlFactor {
    /// Factor P A P' where `perm[new] = old`. The matrix must be symmetric;
    /// only its lower triangle (in the permuted order) is read.
    pub fn new(a: &SparseMatrix, perm: &[usize]) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "matrix must be square");
        assert_eq!(n, perm.len(), "permutation length mismatch");

        // inverse permutation: inv[old] = new
        let mut inv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            assert!(inv[old] == usize::MAX, "permutation repeats index {old}");
            inv[old] = new;
        }

        // Strict lower triangle plus diagonal of PAP', rows in new order with
        // sorted column indices.
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut max_abs = 0.0f64;
        for old_r in 0..n {
            let (cols, vals) = a.row(old_r);
            let new_r = inv[old_r];
            for (&old_c, &v) in cols.iter().zip(vals) {
                let new_c = inv[old_c];
                if new_c <= new_r {
                    rows[new_r].push((new_c, v));
                }
                max_abs = max_abs.max(v.abs());
            }
        }
        for r in rows.iter_mut() {
            r.sort_by_key(|e| e.0);
        }
        let tol = 1e-13 * max_abs;

        // Symbolic pass: elimination tree and column counts.
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut col_count = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &(i0, _) in &rows[k] {
                let mut i = i0;
                while i < k && flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    col_count[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for i in 0..n {
            col_ptr[i + 1] = col_ptr[i] + col_count[i];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0f64; nnz];
        let mut col_len = vec![0usize; n];

        // Numeric pass: compute row k of L by a sparse triangular solve
        // against the columns built so far. The visit marks must start
        // fresh, otherwise leftovers from the symbolic pass could collide
        // with the current row index and truncate the pattern walk.
        for f in flag.iter_mut() {
            *f = usize::MAX;
        }
        let mut d = vec![0.0f64; n];
        let mut y = vec![0.0f64; n];
        let mut pattern = vec![0usize; n];
        let mut n_pos = 0;
        let mut n_neg = 0;
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for &(i0, v) in &rows[k] {
                y[i0] += v;
                // walk up the tree collecting the pattern in topological order
                let mut len = 0;
                let mut i = i0;
                while i < k && flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let (lo, hi) = (col_ptr[i], col_ptr[i] + col_len[i]);
                for p in lo..hi {
                    y[row_idx[p]] -= values[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                row_idx[hi] = k;
                values[hi] = l_ki;
                col_len[i] += 1;
            }
            if d[k].abs() <= tol || d[k].is_nan() {
                return Err(Error::Singular {
                    step: k,
                    n,
                    pivot: d[k],
                });
            }
            if d[k] > 0.0 {
                n_pos += 1;
            } else {
                n_neg += 1;
            }
        }

        Ok(LdlFactor {
            n,
            perm: perm.to_vec(),
            col_ptr,
            row_idx,
            values,
            d,
            n_pos,
            n_neg,
        })
    }

    /// Factor without reordering.
    pub fn new_natural(a: &SparseMatrix) -> Result<Self> {
        let perm: Vec<usize> = (0..a.nrows()).collect();
        LdlFactor::new(a, &perm)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Numbers of positive and negative pivots (the matrix inertia).
    pub fn inertia(&self) -> (usize, usize) {
        (self.n_pos, self.n_neg)
    }

    /// Smallest pivot magnitude of the factorization.
    pub fn min_abs_pivot(&self) -> f64 {
        self.d.iter().fold(f64::INFINITY, |m, &v| m.min(v.abs()))
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &CoeffVec) -> CoeffVec {
        assert_eq!(b.len(), self.n, "right side length mismatch");
        let mut z = vec![0.0f64; self.n];
        for new in 0..self.n {
            z[new] = b[self.perm[new]];
        }
        // forward: L z' = z, with L stored by columns
        for i in 0..self.n {
            let zi = z[i];
            if zi != 0.0 {
                for p in self.col_ptr[i]..self.col_ptr[i + 1] {
                    z[self.row_idx[p]] -= self.values[p] * zi;
                }
            }
        }
        for (zi, di) in z.iter_mut().zip(&self.d) {
            *zi /= di;
        }
        // backward: L' x = z
        for i in (0..self.n).rev() {
            let mut acc = z[i];
            for p in self.col_ptr[i]..self.col_ptr[i + 1] {
                acc -= self.values[p] * z[self.row_idx[p]];
            }
            z[i] = acc;
        }
        let mut x = CoeffVec::zeros(self.n);
        for new in 0..self.n {
            x[self.perm[new]] = z[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_sparse(d: &[&[f64]]) -> SparseMatrix {
        let n = d.len();
        let mut t = Vec::new();
        for (i, row) in d.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn identity_returns_rhs() {
        let a = dense_to_sparse(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let f = LdlFactor::new_natural(&a).unwrap();
        let b = CoeffVec::from_vec(vec![3.0, -4.5]);
        assert_eq!(f.solve(&b), b);
        assert_eq!(f.inertia(), (2, 0));
    }

    #[test]
    fn poisson_tridiagonal_matches_hand_elimination() {
        // 1-D Poisson, h = 1/4, three interior unknowns: A = (1/h)*tridiag(-1,2,-1)
        let a = dense_to_sparse(&[&[8.0, -4.0, 0.0], &[-4.0, 8.0, -4.0], &[0.0, -4.0, 8.0]]);
        let f = LdlFactor::new_natural(&a).unwrap();
        let x = f.solve(&CoeffVec::from_vec(vec![1.0, 1.0, 1.0]));
        let expect = [3.0 / 8.0, 0.5, 3.0 / 8.0];
        for i in 0..3 {
            assert!((x[i] - expect[i]).abs() <= 1e-14, "x[{i}] = {}", x[i]);
        }
    }

    #[test]
    fn zero_row_is_singular() {
        let a = dense_to_sparse(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let err = LdlFactor::new_natural(&a).unwrap_err();
        assert!(matches!(err, Error::Singular { step: 1, .. }));
    }

    #[test]
    fn indefinite_saddle_system_solves() {
        // [[A b]; [b' 0]] with A positive definite leading block
        let a = dense_to_sparse(&[&[4.0, 1.0, 1.0], &[1.0, 3.0, 2.0], &[1.0, 2.0, 0.0]]);
        let f = LdlFactor::new_natural(&a).unwrap();
        assert_eq!(f.inertia(), (2, 1));
        let b = CoeffVec::from_vec(vec![1.0, 0.0, 2.0]);
        let x = f.solve(&b);
        let r = a.mul_vec(&x) - &b;
        assert!(r.amax() <= 1e-12, "residual {}", r.amax());
    }

    #[test]
    fn permutation_round_trips() {
        let a = dense_to_sparse(&[
            &[10.0, 2.0, 0.0, 1.0],
            &[2.0, 9.0, 3.0, 0.0],
            &[0.0, 3.0, 8.0, 1.0],
            &[1.0, 0.0, 1.0, 7.0],
        ]);
        let b = CoeffVec::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let natural = LdlFactor::new_natural(&a).unwrap().solve(&b);
        let permuted = LdlFactor::new(&a, &[3, 1, 0, 2]).unwrap().solve(&b);
        assert!((&natural - &permuted).amax() <= 1e-13);
        let r = a.mul_vec(&natural) - &b;
        assert!(r.amax() <= 1e-13);
    }

    #[test]
    fn random_spd_system_has_small_residual() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        // diagonally dominant random symmetric matrix with scattered pattern
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 10.0 + rng.gen::<f64>()));
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                if j != i {
                    let v = rng.gen::<f64>() - 0.5;
                    t.push((i, j, v));
                    t.push((j, i, v));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, n, t);
        let b = CoeffVec::from_fn(n, |i, _| (i as f64).sin());
        let x = LdlFactor::new_natural(&a).unwrap().solve(&b);
        let r = a.mul_vec(&x) - &b;
        assert!(r.amax() <= 1e-10, "residual {}", r.amax());
    }
}
