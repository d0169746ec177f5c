//! Householder QR for the small dense systems of the detector.

use nalgebra::{DMatrix, DVector};

/// Householder factorization `A = QR` of a tall matrix.
///
/// Reflectors are kept in factored form; `Q` is never formed.
#[derive(Debug, Clone)]
pub struct Householder {
    r: DMatrix<f64>,
    /// (first row, reflector vector, 2/vᵀv); beta = 0 marks an identity step
    reflectors: Vec<(usize, DVector<f64>, f64)>,
}

impl Householder {
    pub fn factor(a: &DMatrix<f64>) -> Self {
        let (rows, cols) = a.shape();
        let mut r = a.clone();
        let steps = cols.min(rows);
        let mut reflectors = Vec::with_capacity(steps);
        for j in 0..steps {
            let x = r.view((j, j), (rows - j, 1)).column(0).clone_owned();
            let norm = x.norm();
            if norm == 0.0 {
                reflectors.push((j, DVector::zeros(rows - j), 0.0));
                continue;
            }
            let alpha = if x[0] >= 0.0 { -norm } else { norm };
            let mut v = x;
            v[0] -= alpha;
            let vv = v.norm_squared();
            if vv == 0.0 {
                reflectors.push((j, v, 0.0));
                continue;
            }
            let beta = 2.0 / vv;
            for c in j..cols {
                let mut col = r.view_mut((j, c), (rows - j, 1));
                let s = beta * v.dot(&col.column(0));
                col.column_mut(0).axpy(-s, &v, 1.0);
            }
            // clean the annihilated part exactly
            r[(j, j)] = alpha;
            for i in j + 1..rows {
                r[(i, j)] = 0.0;
            }
            reflectors.push((j, v, beta));
        }
        Self { r, reflectors }
    }

    /// Full `R` (same shape as the factored matrix, zero below the diagonal).
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Leading `k × k` block of `R`.
    pub fn r_upper(&self, k: usize) -> DMatrix<f64> {
        self.r.view((0, 0), (k, k)).clone_owned()
    }

    /// `y ← Qᵀ y`.
    pub fn apply_qt(&self, y: &mut DVector<f64>) {
        for (j, v, beta) in &self.reflectors {
            if *beta == 0.0 {
                continue;
            }
            let mut seg = y.rows_mut(*j, v.len());
            let s = beta * v.dot(&seg);
            seg.axpy(-s, v, 1.0);
        }
    }

    /// `y ← Q y`.
    pub fn apply_q(&self, y: &mut DVector<f64>) {
        for (j, v, beta) in self.reflectors.iter().rev() {
            if *beta == 0.0 {
                continue;
            }
            let mut seg = y.rows_mut(*j, v.len());
            let s = beta * v.dot(&seg);
            seg.axpy(-s, v, 1.0);
        }
    }
}
