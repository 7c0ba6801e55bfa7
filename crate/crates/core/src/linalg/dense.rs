use crate::scalar::Scalar;

/// LU factorization with partial pivoting of a dense row-major square matrix.
#[derive(Debug, Clone)]
pub struct DenseLu<T> {
    n: usize,
    lu: Vec<T>,
    pivots: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singular {
    pub column: usize,
}

impl<T: Scalar> DenseLu<T> {
    /// Factors `a` (row-major, `n * n`) in place.
    pub fn factor(n: usize, mut a: Vec<T>) -> Result<Self, Singular> {
        assert_eq!(a.len(), n * n);
        let mut pivots = vec![0; n];
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -T::one()), |acc, x| if x.1 > acc.1 { x } else { acc });
            if !(best > T::zero()) || !best.is_finite() {
                return Err(Singular { column: k });
            }
            pivots[k] = p;
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let inv = T::one() / a[k * n + k];
            for i in (k + 1)..n {
                let f = a[i * n + k] * inv;
                if f == T::zero() {
                    continue;
                }
                a[i * n + k] = f;
                for j in (k + 1)..n {
                    let akj = a[k * n + j];
                    if akj != T::zero() {
                        a[i * n + j] -= f * akj;
                    }
                }
            }
        }
        Ok(Self { n, lu: a, pivots })
    }

    pub fn solve(&self, b: &mut [T]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.pivots[k]);
        }
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s / self.lu[i * n + i];
        }
    }
}
