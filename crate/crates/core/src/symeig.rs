//! Dense symmetric eigendecomposition by cyclic Jacobi rotations, plus the
//! distance between subspaces spanned by orthonormal column sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from column vectors of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::Dimension {
                    expected: rows,
                    got: c.len(),
                });
            }
            for (i, &v) in c.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// The first `n` columns.
    pub fn leading_columns(&self, n: usize) -> Matrix {
        let mut out = Matrix::zeros(self.rows, n);
        for i in 0..self.rows {
            for j in 0..n {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(l, j);
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `max |(A^T A - I)_{ij}|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.cols {
            for b in a..self.cols {
                let dot: f64 = (0..self.rows)
                    .map(|i| self.get(i, a) * self.get(i, b))
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Symmetric `m x m` matrix stored densely (both triangles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut s = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            s.data[i * s.dim + i] = d;
        }
        s
    }

    /// Accepts row-major data if `|A_ij - A_ji| <= 1e-12 max|A|`; the stored
    /// matrix is the exact symmetric part.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition("matrix has non-finite entries"));
        }
        let scale = data.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let mut sym = data;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (sym[i * dim + j], sym[j * dim + i]);
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::precondition(format!(
                        "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                let avg = 0.5 * (a + b);
                sym[i * dim + j] = avg;
                sym[j * dim + i] = avg;
            }
        }
        Ok(Self { dim, data: sym })
    }

    /// Build from upper-triangle entries in row order
    /// `(0,0), (0,1), ..., (0,m-1), (1,1), ...`.
    pub fn from_upper(dim: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != dim * (dim + 1) / 2 {
            return Err(Error::Dimension {
                expected: dim * (dim + 1) / 2,
                got: upper.len(),
            });
        }
        let mut s = Self::zeros(dim);
        let mut it = upper.iter();
        for i in 0..dim {
            for j in i..dim {
                let v = *it.next().unwrap();
                s.data[i * dim + j] = v;
                s.data[j * dim + i] = v;
            }
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvector
/// columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    /// `max |W diag(lambda) W^T - A|`.
    pub fn reconstruction_error(&self, a: &SymmetricMatrix) -> f64 {
        let m = a.dim();
        let w = &self.eigenvectors;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let r: f64 = (0..m)
                    .map(|k| w.get(i, k) * self.eigenvalues[k] * w.get(j, k))
                    .sum();
                worst = worst.max((r - a.get(i, j)).abs());
            }
        }
        worst
    }
}

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps until the off-diagonal Frobenius norm drops to `1e-14 ||A||_F`.
/// Eigenvalues come back in descending order; tiny negative values (above
/// `-1e-10 lambda_1`) are clamped to zero. Each eigenvector is signed so its
/// largest-magnitude component is positive, earliest index winning ties.
pub fn eigh(a: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let (mut values, vectors) = jacobi(a)?;
    let m = a.dim();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));

    let lead = order.first().map_or(0.0, |&i| values[i]).max(0.0);
    for v in values.iter_mut() {
        if *v < 0.0 && *v >= -1e-10 * lead {
            *v = 0.0;
        }
    }

    let mut w = Matrix::zeros(m, m);
    let mut sorted = Vec::with_capacity(m);
    for (col, &src) in order.iter().enumerate() {
        sorted.push(values[src]);
        let mut v: Vec<f64> = (0..m).map(|i| vectors.get(i, src)).collect();
        fix_sign(&mut v);
        for (i, x) in v.into_iter().enumerate() {
            w.set(i, col, x);
        }
    }
    Ok(EigenDecomposition {
        eigenvalues: sorted,
        eigenvectors: w,
    })
}

/// Flip `v` so its largest-magnitude entry is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn jacobi(a: &SymmetricMatrix) -> Result<(Vec<f64>, Matrix)> {
    let m = a.dim();
    let mut s: Vec<f64> = a.as_slice().to_vec();
    let mut v = Matrix::identity(m);
    let norm = a.frobenius();
    if norm == 0.0 || m < 2 {
        return Ok((a.diagonal(), v));
    }
    let tol = 1e-14 * norm;

    let off = |s: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    acc += s[i * m + j] * s[i * m + j];
                }
            }
        }
        acc.sqrt()
    };

    for _ in 0..MAX_SWEEPS {
        if off(&s) <= tol {
            let diag = (0..m).map(|i| s[i * m + i]).collect();
            return Ok((diag, v));
        }
        for p in 0..m - 1 {
            for q in (p + 1)..m {
                let apq = s[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let app = s[p * m + p];
                let aqq = s[q * m + q];
                // Rotation angle that zeroes (p, q); smaller root for stability.
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;

                for k in 0..m {
                    let skp = s[k * m + p];
                    let skq = s[k * m + q];
                    s[k * m + p] = c * skp - sn * skq;
                    s[k * m + q] = sn * skp + c * skq;
                }
                for k in 0..m {
                    let spk = s[p * m + k];
                    let sqk = s[q * m + k];
                    s[p * m + k] = c * spk - sn * sqk;
                    s[q * m + k] = sn * spk + c * sqk;
                }
                s[p * m + q] = 0.0;
                s[q * m + p] = 0.0;

                for k in 0..m {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - sn * vkq);
                    v.set(k, q, sn * vkp + c * vkq);
                }
            }
        }
    }
    Err(Error::Numerical(format!(
        "Jacobi iteration did not converge in {MAX_SWEEPS} sweeps"
    )))
}

/// Spectral norm of `W1 W1^T - V1 V1^T` for orthonormal `m x n` bases: the
/// sine of the largest principal angle between the two column spans.
pub fn subspace_distance(w1: &Matrix, v1: &Matrix) -> Result<f64> {
    if w1.rows() != v1.rows() || w1.cols() != v1.cols() {
        return Err(Error::precondition(format!(
            "shape mismatch: {}x{} vs {}x{}",
            w1.rows(),
            w1.cols(),
            v1.rows(),
            v1.cols()
        )));
    }
    for (label, b) in [("first", w1), ("second", v1)] {
        let defect = b.orthonormality_defect();
        if defect > 1e-8 {
            return Err(Error::precondition(format!(
                "{label} basis is not orthonormal (defect {defect:e})"
            )));
        }
    }
    let m = w1.rows();
    let mut diff = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let pw: f64 = (0..w1.cols()).map(|k| w1.get(i, k) * w1.get(j, k)).sum();
            let pv: f64 = (0..v1.cols()).map(|k| v1.get(i, k) * v1.get(j, k)).sum();
            diff[i * m + j] = pw - pv;
        }
    }
    let d = SymmetricMatrix::new(m, diff)?;
    let eig = jacobi(&d)?.0;
    let norm = eig.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    Ok(norm.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_quadratic_matrix() {
        let e = eigh(&SymmetricMatrix::from_diag(&[1.0 / 3.0, 1.0 / 3.0])).unwrap();
        for l in e.eigenvalues {
            assert!((l - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_input_is_sorted_with_positive_signs() {
        let e = eigh(&SymmetricMatrix::from_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 2.0, 1.0]);
        let expected = [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(e.eigenvectors.get(i, j), v);
            }
        }
    }

    #[test]
    fn two_by_two() {
        let a = SymmetricMatrix::new(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = eigh(&a).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.eigenvectors.get(0, 0) - s).abs() < 1e-14);
        assert!((e.eigenvectors.get(1, 0) - s).abs() < 1e-14);
        assert!(e.reconstruction_error(&a) < 1e-14);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let err = SymmetricMatrix::new(2, vec![1.0, 2.0, 2.5, 1.0]).unwrap_err();
        assert_eq!(err.tag(), "precondition");
    }

    #[test]
    fn negative_roundoff_is_clamped() {
        let a = SymmetricMatrix::from_diag(&[1.0, -1e-13]);
        let e = eigh(&a).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 0.0]);
    }

    #[test]
    fn distance_identical_and_orthogonal() {
        let e1 = Matrix::from_columns(&[vec![1.0, 0.0]]).unwrap();
        let e2 = Matrix::from_columns(&[vec![0.0, 1.0]]).unwrap();
        assert!(subspace_distance(&e1, &e1).unwrap().abs() < 1e-15);
        assert!((subspace_distance(&e1, &e2).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distance_at_thirty_degrees() {
        // P1 - P2 for e1 and (cos t, sin t) is [[s^2, -cs], [-cs, -s^2]]
        // whose eigenvalues are +-s, so the norm is sin(pi/6) = 0.5.
        let t = std::f64::consts::PI / 6.0;
        let e1 = Matrix::from_columns(&[vec![1.0, 0.0]]).unwrap();
        let v = Matrix::from_columns(&[vec![t.cos(), t.sin()]]).unwrap();
        let (s, c) = (t.sin(), t.cos());
        let explicit = (s.powi(4) + (c * s).powi(2)).sqrt();
        let d = subspace_distance(&e1, &v).unwrap();
        assert!((d - 0.5).abs() < 1e-14);
        assert!((d - explicit).abs() < 1e-14);
    }

    #[test]
    fn distance_shape_errors() {
        let a = Matrix::from_columns(&[vec![1.0, 0.0]]).unwrap();
        let b = Matrix::from_columns(&[vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(subspace_distance(&a, &b).is_err());
        let not_unit = Matrix::from_columns(&[vec![2.0, 0.0]]).unwrap();
        assert!(subspace_distance(&a, &not_unit).is_err());
    }
}
