//! Small dense linear-algebra helpers used by the kernel training step.

use nalgebra::{DMatrix, SymmetricEigen};

/// Householder reflector `H = I - 2 u u^T / (u^T u)` mapping the normalized
/// constant vector onto `e_0`. Columns `1..d` of `H` are an orthonormal basis
/// of the constant vector's orthogonal complement.
#[derive(Clone, Debug)]
pub(crate) struct ConstantComplement {
    u: Vec<f64>,
    scale: f64,
}

impl ConstantComplement {
    pub(crate) fn new(dim: usize) -> Self {
        let inv_sqrt = 1.0 / (dim as f64).sqrt();
        let mut u = vec![inv_sqrt; dim];
        u[0] -= 1.0;
        let norm2: f64 = u.iter().map(|v| v * v).sum();
        // dim == 1: the constant vector already is e_0, H = I
        let scale = if norm2 > 0.0 { 2.0 / norm2 } else { 0.0 };
        ConstantComplement { u, scale }
    }

    /// Coordinates of `x` in the complement basis (drops the DC coordinate).
    pub(crate) fn project(&self, x: &[f64], out: &mut [f64]) {
        let s = self.scale * dot(&self.u, x);
        for ((o, &xi), &ui) in out.iter_mut().zip(&x[1..]).zip(&self.u[1..]) {
            *o = xi - s * ui;
        }
    }

    /// Inverse of [`project`](Self::project) for vectors with zero DC part.
    pub(crate) fn lift(&self, coords: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(coords.len() + 1);
        v.push(0.0);
        v.extend_from_slice(coords);
        let s = self.scale * dot(&self.u, &v);
        for (vi, &ui) in v.iter_mut().zip(&self.u) {
            *vi -= s * ui;
        }
        v
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
/// Equal eigenvalues keep the solver's original order.
pub(crate) fn sorted_symmetric_eigen(matrix: DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let n = matrix.nrows();
    if n == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(matrix);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| {
            (
                eig.eigenvalues[j],
                eig.eigenvectors.column(j).iter().copied().collect(),
            )
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Flips `v` so its largest-magnitude entry is positive; ties go to the
/// lowest index.
pub(crate) fn normalize_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let tie = max * (1.0 - 1e-12);
    if let Some(&lead) = v.iter().find(|x| x.abs() >= tie) {
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_is_orthonormal_and_orthogonal_to_dc() {
        for d in [2usize, 3, 16, 31] {
            let h = ConstantComplement::new(d);
            let dc = vec![1.0 / (d as f64).sqrt(); d];
            let basis: Vec<Vec<f64>> = (0..d - 1)
                .map(|j| {
                    let mut e = vec![0.0; d - 1];
                    e[j] = 1.0;
                    h.lift(&e)
                })
                .collect();
            for (i, bi) in basis.iter().enumerate() {
                assert!(dot(bi, &dc).abs() < 1e-14);
                for (j, bj) in basis.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(bi, bj) - expect).abs() < 1e-14);
                }
            }
            let x: Vec<f64> = (0..d).map(|i| (i * i) as f64 - 3.0).collect();
            let mut coords = vec![0.0; d - 1];
            h.project(&x, &mut coords);
            for (j, bj) in basis.iter().enumerate() {
                assert!((coords[j] - dot(bj, &x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sign_rule() {
        let mut v = vec![0.1, -0.9, 0.3];
        normalize_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.3]);
        let mut tie = vec![-0.5, 0.5];
        normalize_sign(&mut tie);
        assert_eq!(tie, vec![0.5, -0.5]);
    }

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        let pairs = sorted_symmetric_eigen(m);
        let vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        assert!((vals[0] - 5.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        assert!((vals[2] - 1.0).abs() < 1e-12);
    }
}
