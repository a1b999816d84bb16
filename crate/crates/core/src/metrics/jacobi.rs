//! Cyclic Jacobi eigen-decomposition for small dense symmetric matrices.

/// Off-diagonal Frobenius norm at which iteration stops.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    /// Eigenvalues, largest first.
    pub values: Vec<f64>,
    /// `vectors[i][k]` is component `i` of the eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

impl SymmetricEigen {
    /// `Q diag(values) Q^T`.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let n = self.values.len();
        let mut out = vec![vec![0.0; n]; n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..n)
                    .map(|k| self.vectors[i][k] * self.values[k] * self.vectors[j][k])
                    .sum();
            }
        }
        out
    }
}

/// Row-major `n x n` matrix.
fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[i * n + j] * a[i * n + j];
            }
        }
    }
    sum.sqrt()
}

/// Diagonalizes the symmetric matrix `matrix` by sweeping plane rotations
/// over every `(p, q)` pair, `p < q`, in row order. Only the upper triangle
/// needs to be meaningful; the input is symmetrized from it.
pub fn symmetric_eigen(matrix: &[Vec<f64>]) -> SymmetricEigen {
    let n = matrix.len();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = if i <= j { matrix[i][j] } else { matrix[j][i] };
        }
    }
    // Columns of `v` are the eigenvectors; stored transposed so that a
    // rotation touches two contiguous rows.
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }

    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && off_diagonal_norm(&a, n) >= OFF_DIAGONAL_TOLERANCE {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (vt[p * n + k], vt[q * n + k]);
                    vt[p * n + k] = c * vkp - s * vkq;
                    vt[q * n + k] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y * n + y].total_cmp(&a[x * n + x]).then(x.cmp(&y)));
    SymmetricEigen {
        values: order.iter().map(|&k| a[k * n + k]).collect(),
        vectors: (0..n)
            .map(|i| order.iter().map(|&k| vt[k * n + i]).collect())
            .collect(),
        sweeps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_three_by_three() {
        // characteristic polynomial (1 - x)((1 - x)^2 - 1/4): roots 1.5, 1, 0.5
        let m = vec![
            vec![1.0, 0.5, 0.0],
            vec![0.5, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let e = symmetric_eigen(&m);
        for (got, want) in e.values.iter().zip([1.5, 1.0, 0.5]) {
            assert!((got - want).abs() < 1e-12, "{:?}", e.values);
        }
    }

    #[test]
    fn diagonal_input_needs_no_sweep() {
        let e = symmetric_eigen(&[vec![2.0, 0.0], vec![0.0, 3.0]]);
        assert_eq!(e.sweeps, 0);
        assert_eq!(e.values, vec![3.0, 2.0]);
        assert!(symmetric_eigen(&[]).values.is_empty());
    }

    #[test]
    fn all_ones_matrix() {
        let m = vec![vec![1.0; 5]; 5];
        let e = symmetric_eigen(&m);
        assert!((e.values[0] - 5.0).abs() < 1e-12);
        assert!(e.values[1..].iter().all(|v| v.abs() < 1e-12));
    }
}
