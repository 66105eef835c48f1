//! Two-component PCA for embedding scatter exports.

use super::EvalError;
use nalgebra::{DMatrix, DVector};

/// Top-2 principal axes of a set of vectors.
#[derive(Clone, Debug)]
pub struct Pca2 {
    /// Per-sample projections onto the two components.
    pub coordinates: Vec<[f64; 2]>,
    /// The two largest eigenvalues of the sample covariance, descending.
    pub eigenvalues: [f64; 2],
    /// Unit-norm principal axes; the sign is fixed so each component's first
    /// nonzero entry is positive.
    pub components: [Vec<f64>; 2],
    pub mean: Vec<f64>,
}

/// Mean-centers the rows, eigendecomposes the sample covariance (divisor
/// n−1) and projects every row onto the top-2 eigenvectors.
pub fn pca2(vectors: &[Vec<f64>]) -> Result<Pca2, EvalError> {
    let n = vectors.len();
    if n < 2 {
        return Err(EvalError::BadInput(format!("PCA needs at least 2 vectors, got {n}")));
    }
    let d = vectors[0].len();
    if d < 2 {
        return Err(EvalError::BadInput(format!("PCA needs at least 2 dimensions, got {d}")));
    }
    if let Some(row) = vectors.iter().find(|v| v.len() != d) {
        return Err(EvalError::BadInput(format!(
            "ragged input: expected {d}-dim rows, found {}",
            row.len()
        )));
    }

    let mut mean = vec![0.0; d];
    for row in vectors {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(n, d, |i, j| vectors[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = cov.symmetric_eigen();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let component = |rank: usize| -> Vec<f64> {
        let mut v: DVector<f64> = eig.eigenvectors.column(order[rank]).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        v.iter().copied().collect()
    };
    let components = [component(0), component(1)];
    let eigenvalues = [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]];

    let coordinates = (0..n)
        .map(|i| {
            let mut c = [0.0; 2];
            for (k, comp) in components.iter().enumerate() {
                c[k] = centered.row(i).iter().zip(comp).map(|(x, w)| x * w).sum();
            }
            c
        })
        .collect();
    Ok(Pca2 { coordinates, eigenvalues, components, mean })
}
