//! Minimal dense linear algebra for small symmetric positive-definite systems.

use crate::real::Real;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> SquareMatrix<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Option<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return None;
        }
        Some(Self {
            dim,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![T::zero(); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = T::one();
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.dim + j] = v;
    }

    pub fn is_symmetric(&self, rel_tol: T) -> bool {
        (0..self.dim).all(|i| {
            (0..i).all(|j| {
                let (a, b) = (self.get(i, j), self.get(j, i));
                (a - b).abs() <= rel_tol * T::one().max(a.abs().max(b.abs()))
            })
        })
    }
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    lower: SquareMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factorizes `a`; on failure returns the 1-based leading dimension whose pivot is not positive.
    pub fn new(a: &SquareMatrix<T>) -> Result<Self, usize> {
        let n = a.dim();
        let mut l = SquareMatrix {
            dim: n,
            data: vec![T::zero(); n * n],
        };
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d = d - l.get(j, k) * l.get(j, k);
            }
            if !(d > T::zero()) {
                return Err(j + 1);
            }
            let djj = d.sqrt();
            l.set(j, j, djj);
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s = s - l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / djj);
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &SquareMatrix<T> {
        &self.lower
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let n = self.lower.dim();
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for (k, &yk) in y[..i].iter().enumerate() {
                s = s - self.lower.get(i, k) * yk;
            }
            y[i] = s / self.lower.get(i, i);
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[T]) -> Vec<T> {
        let n = self.lower.dim();
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for (k, &xk) in x.iter().enumerate().skip(i + 1) {
                s = s - self.lower.get(k, i) * xk;
            }
            x[i] = s / self.lower.get(i, i);
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.backward(&self.forward(b))
    }

    /// `trace(A⁻¹) = ‖L⁻¹‖²_F`.
    pub fn inverse_trace(&self) -> T {
        let n = self.lower.dim();
        let mut total = T::zero();
        let mut e = vec![T::zero(); n];
        for i in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[i] = T::one();
            total = total + self.forward(&e).iter().map(|&v| v * v).sum::<T>();
        }
        total
    }
}
