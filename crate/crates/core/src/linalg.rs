//! Dense complex matrix helpers that skip structurally zero blocks.
//!
//! The channel matrices of this crate are stored densely but are
//! block-banded; the routines below look at the actual zero pattern, so they
//! are exact for any input and only faster when the structure is there.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{OtfsError, Result};

fn block_is_zero(m: &DMatrix<Complex64>, r0: usize, c0: usize, bs: usize) -> bool {
    (0..bs).all(|c| {
        m.column(c0 + c)
            .rows(r0, bs)
            .iter()
            .all(|z| z.re == 0.0 && z.im == 0.0)
    })
}

/// For each block row, the block columns holding a nonzero entry.
pub fn block_pattern(m: &DMatrix<Complex64>, bs: usize) -> Vec<Vec<usize>> {
    assert!(bs > 0 && m.nrows().is_multiple_of(bs) && m.ncols().is_multiple_of(bs));
    let (rb, cb) = (m.nrows() / bs, m.ncols() / bs);
    (0..rb)
        .map(|r| {
            (0..cb)
                .filter(|&c| !block_is_zero(m, r * bs, c * bs, bs))
                .collect()
        })
        .collect()
}

/// `A M A^H` applied block by block: each `bs x bs` block `B` becomes
/// `A B A^H`. Zero blocks stay zero.
pub fn block_conjugate(
    m: &DMatrix<Complex64>,
    bs: usize,
    a: &DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    let a_h = a.adjoint();
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (r, cols) in block_pattern(m, bs).into_iter().enumerate() {
        for c in cols {
            let b = m.view((r * bs, c * bs), (bs, bs));
            let t = a * b * &a_h;
            out.view_mut((r * bs, c * bs), (bs, bs)).copy_from(&t);
        }
    }
    out
}

/// `H^H H`, accumulating only products of nonzero blocks.
pub fn block_gram(h: &DMatrix<Complex64>, bs: usize) -> DMatrix<Complex64> {
    let n = h.ncols();
    let mut out = DMatrix::zeros(n, n);
    for (r, cols) in block_pattern(h, bs).into_iter().enumerate() {
        for &a in &cols {
            let ha = h.view((r * bs, a * bs), (bs, bs)).adjoint();
            for &b in &cols {
                let hb = h.view((r * bs, b * bs), (bs, bs));
                let mut dst = out.view_mut((a * bs, b * bs), (bs, bs));
                dst.gemm(Complex64::new(1.0, 0.0), &ha, &hb, Complex64::new(1.0, 0.0));
            }
        }
    }
    out
}

/// `P^T M P` for the permutation matrix with `P(i, perm[i]) = 1`, i.e.
/// `out(perm[i], perm[j]) = m(i, j)`.
pub fn permute_congruence(m: &DMatrix<Complex64>, perm: &[usize]) -> DMatrix<Complex64> {
    let n = perm.len();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let v = m[(i, j)];
            if v.re != 0.0 || v.im != 0.0 {
                out[(perm[i], perm[j])] = v;
            }
        }
    }
    out
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Index sets of the connected components of the nonzero pattern of a
/// square matrix, each sorted ascending, ordered by smallest index.
pub fn components(m: &DMatrix<Complex64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    for j in 0..n {
        for i in 0..n {
            let v = m[(i, j)];
            if i != j && (v.re != 0.0 || v.im != 0.0) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
}

/// Solve `A x = b` for Hermitian positive definite `A`, factoring each
/// decoupled component of `A` separately.
pub fn hermitian_solve(
    a: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(OtfsError::dim("hermitian_solve (square)", n, a.ncols()));
    }
    if b.len() != n {
        return Err(OtfsError::dim("hermitian_solve rhs", n, b.len()));
    }
    let mut x = DVector::zeros(n);
    for idx in components(a) {
        let k = idx.len();
        let sub = DMatrix::from_fn(k, k, |r, c| a[(idx[r], idx[c])]);
        let rhs = DVector::from_fn(k, |r, _| b[idx[r]]);
        let chol = sub
            .cholesky()
            .ok_or(OtfsError::Singular("hermitian_solve"))?;
        let sol = chol.solve(&rhs);
        for (r, &i) in idx.iter().enumerate() {
            x[i] = sol[r];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rc(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    fn sparse_block(rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        // 4x4 blocks of size 3, about half of them zero
        let mask: Vec<bool> = (0..16).map(|_| rng.random::<f64>() < 0.5).collect();
        DMatrix::from_fn(12, 12, |i, j| {
            if mask[(i / 3) * 4 + j / 3] {
                Complex64::new(rng.random(), rng.random())
            } else {
                Complex64::default()
            }
        })
    }

    #[test]
    fn block_routines_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let h = sparse_block(&mut rng);
            let a = DMatrix::from_fn(3, 3, |_, _| rc(&mut rng));
            let dense_gram = h.adjoint() * &h;
            assert!((block_gram(&h, 3) - dense_gram).norm() < 1e-12);
            let big_a = DMatrix::<Complex64>::identity(4, 4).kronecker(&a);
            let dense_conj = &big_a * &h * big_a.adjoint();
            assert!((block_conjugate(&h, 3, &a) - dense_conj).norm() < 1e-12);
        }
    }

    #[test]
    fn permute_congruence_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = DMatrix::from_fn(6, 6, |_, _| rc(&mut rng));
        let perm = [3, 0, 5, 1, 4, 2];
        let mut p = DMatrix::<Complex64>::zeros(6, 6);
        for (i, &j) in perm.iter().enumerate() {
            p[(i, j)] = Complex64::new(1.0, 0.0);
        }
        let dense = p.transpose() * &m * &p;
        assert!((permute_congruence(&m, &perm) - dense).norm() < 1e-15);
    }

    #[test]
    fn components_split_block_diagonal() {
        let mut m = DMatrix::<Complex64>::identity(5, 5);
        m[(0, 3)] = Complex64::new(0.1, 0.0);
        m[(3, 0)] = Complex64::new(0.1, 0.0);
        m[(1, 2)] = Complex64::new(0.0, 0.2);
        m[(2, 1)] = Complex64::new(0.0, -0.2);
        assert_eq!(components(&m), vec![vec![0, 3], vec![1, 2], vec![4]]);
    }

    #[test]
    fn hermitian_solve_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = sparse_block(&mut rng);
        let a = h.adjoint() * &h + DMatrix::<Complex64>::identity(12, 12);
        let x = DVector::from_fn(12, |_, _| rc(&mut rng));
        let b = &a * &x;
        let got = hermitian_solve(&a, &b).unwrap();
        assert!((got - x).norm() < 1e-10);
    }

    #[test]
    fn hermitian_solve_reports_singular() {
        let a = DMatrix::<Complex64>::zeros(3, 3);
        let b = DVector::from_element(3, Complex64::new(1.0, 0.0));
        assert!(matches!(
            hermitian_solve(&a, &b),
            Err(OtfsError::Singular(_))
        ));
    }
}
