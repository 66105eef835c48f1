//! Classical canonical correlation analysis.
//!
//! Used as the ablation fusion: between epochs the training loop refits the
//! projections on the current embeddings and installs them as non-trainable
//! constants ([`install_cca`]). The solver whitens both covariance blocks
//! (eigendecomposition, optional ridge) and reads the canonical system off
//! the SVD of the whitened cross-covariance.

use super::{FusionKind, ModelError, ModelParams};
use crate::tensor::{Real, Tensor, TensorError};
use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

/// A fitted set of canonical directions.
#[derive(Clone, Debug, PartialEq)]
pub struct CcaPairs {
    pub x_mean: Vec<f64>,
    pub y_mean: Vec<f64>,
    /// `[p, k]`; column `i` is the i-th canonical direction for X.
    pub x_proj: Tensor<f64>,
    /// `[q, k]`; column `i` is the i-th canonical direction for Y.
    pub y_proj: Tensor<f64>,
    /// Canonical correlations, descending, each in `[0, 1]`.
    pub correlations: Vec<f64>,
}

fn rank2(op: &'static str, t: &Tensor<f64>) -> Result<(usize, usize), ModelError> {
    match t.shape() {
        [n, p] => Ok((*n, *p)),
        s => Err(TensorError::invalid(op, format!("expected a matrix, got shape {s:?}")).into()),
    }
}

fn center(m: &mut DMatrix<f64>) -> Vec<f64> {
    let (n, p) = m.shape();
    let mut means = vec![0.0; p];
    for j in 0..p {
        let mean = m.column(j).sum() / n as f64;
        means[j] = mean;
        for i in 0..n {
            m[(i, j)] -= mean;
        }
    }
    means
}

/// Inverse matrix square root of a symmetric PSD matrix (already ridged).
fn inverse_sqrt(m: DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>, ModelError> {
    let eig = SymmetricEigen::new(m);
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let mut inv_roots = DVector::zeros(eig.eigenvalues.len());
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= lambda_max * 1e-13 || lambda <= 0.0 {
            if ridge == 0.0 {
                return Err(ModelError::SingularCovariance);
            }
            // Mathematically λ ≥ ridge; this only absorbs rounding noise.
            inv_roots[i] = 1.0 / ridge.sqrt();
        } else {
            inv_roots[i] = 1.0 / lambda.sqrt();
        }
    }
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&inv_roots) * q.transpose())
}

/// Fits canonical directions on rows of `x` (`[n, p]`) and `y` (`[n, q]`).
///
/// Returns `k = min(p, q)` direction pairs ordered by descending
/// correlation; each canonical variate has unit sample variance on the
/// training data. `ridge` is added to both auto-covariance diagonals; with
/// `ridge == 0` a rank-deficient block is reported as
/// [`ModelError::SingularCovariance`].
pub fn cca_fit(x: &Tensor<f64>, y: &Tensor<f64>, ridge: f64) -> Result<CcaPairs, ModelError> {
    let (n, p) = rank2("cca_fit", x)?;
    let (ny, q) = rank2("cca_fit", y)?;
    if n != ny {
        return Err(TensorError::ShapeMismatch {
            op: "cca_fit",
            left: x.shape().to_vec(),
            right: y.shape().to_vec(),
        }
        .into());
    }
    if n <= p.max(q) {
        return Err(TensorError::invalid(
            "cca_fit",
            format!("{n} rows cannot determine {p}+{q} feature covariances"),
        )
        .into());
    }
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(TensorError::invalid("cca_fit", format!("invalid ridge {ridge}")).into());
    }

    let mut xm = DMatrix::from_row_slice(n, p, x.data());
    let mut ym = DMatrix::from_row_slice(n, q, y.data());
    let x_mean = center(&mut xm);
    let y_mean = center(&mut ym);
    let denom = (n - 1) as f64;
    let sxx = xm.transpose() * &xm / denom;
    let syy = ym.transpose() * &ym / denom;
    let sxy = xm.transpose() * &ym / denom;

    let ridged = |s: &DMatrix<f64>| s + DMatrix::identity(s.nrows(), s.ncols()) * ridge;
    let wx = inverse_sqrt(ridged(&sxx), ridge)?;
    let wy = inverse_sqrt(ridged(&syy), ridge)?;

    let k = p.min(q);
    let svd = SVD::new(&wx * &sxy * &wy, true, true);
    let u = svd.u.expect("svd with compute_u");
    let v_t = svd.v_t.expect("svd with compute_v");

    let mut pairs: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::with_capacity(k);
    for i in 0..k {
        let mut a: DVector<f64> = &wx * u.column(i);
        let mut b: DVector<f64> = &wy * v_t.row(i).transpose();
        // Normalize to unit sample variance on the (unridged) data.
        let var_a = (a.transpose() * &sxx * &a)[(0, 0)];
        let var_b = (b.transpose() * &syy * &b)[(0, 0)];
        if var_a > 1e-300 {
            a /= var_a.sqrt();
        }
        if var_b > 1e-300 {
            b /= var_b.sqrt();
        }
        let rho = (a.transpose() * &sxy * &b)[(0, 0)].clamp(0.0, 1.0);
        pairs.push((rho, a, b));
    }
    pairs.sort_by(|l, r| r.0.partial_cmp(&l.0).expect("finite correlations"));

    let correlations = pairs.iter().map(|(rho, _, _)| *rho).collect();
    let x_proj = Tensor::from_fn(vec![p, k], |flat| pairs[flat % k].1[flat / k]);
    let y_proj = Tensor::from_fn(vec![q, k], |flat| pairs[flat % k].2[flat / k]);
    Ok(CcaPairs { x_mean, y_mean, x_proj, y_proj, correlations })
}

/// Projects one `(x, y)` observation pair onto the canonical directions;
/// the result is the X variates followed by the Y variates (`2k` values).
pub fn cca_transform(pairs: &CcaPairs, x_row: &[f64], y_row: &[f64]) -> Vec<f64> {
    let p = pairs.x_mean.len();
    let q = pairs.y_mean.len();
    let k = pairs.correlations.len();
    assert_eq!(x_row.len(), p, "x row length");
    assert_eq!(y_row.len(), q, "y row length");
    let mut out = vec![0.0; 2 * k];
    for j in 0..k {
        for i in 0..p {
            out[j] += (x_row[i] - pairs.x_mean[i]) * pairs.x_proj.data()[i * k + j];
        }
        for i in 0..q {
            out[k + j] += (y_row[i] - pairs.y_mean[i]) * pairs.y_proj.data()[i * k + j];
        }
    }
    out
}

/// Installs fitted directions into a CCA-fusion model as non-trainable
/// constants and marks the fusion as fitted.
pub fn install_cca<F: Real>(
    params: &mut ModelParams<F>,
    pairs: &CcaPairs,
) -> Result<(), ModelError> {
    if params.config().fusion != FusionKind::Cca {
        return Err(ModelError::BadConfig("model does not use CCA fusion".into()));
    }
    let d1 = params.config().image_embedding_dim()?;
    let d2 = params.config().meta_embedding_dim();
    let k = d1.min(d2);
    if pairs.x_mean.len() != d1
        || pairs.y_mean.len() != d2
        || pairs.x_proj.shape() != [d1, k]
        || pairs.y_proj.shape() != [d2, k]
    {
        return Err(ModelError::BadConfig(
            "fitted projections do not match the model dimensions".into(),
        ));
    }
    let to_tensor = |v: &[f64]| Tensor::from_fn(vec![v.len()], |i| F::from_f64(v[i]));
    *params.get_mut("fusion.cca.x_mean") = to_tensor(&pairs.x_mean);
    *params.get_mut("fusion.cca.y_mean") = to_tensor(&pairs.y_mean);
    *params.get_mut("fusion.cca.x_proj") = pairs.x_proj.cast();
    *params.get_mut("fusion.cca.y_proj") = pairs.y_proj.cast();
    *params.get_mut("fusion.cca.state") = Tensor::filled(vec![1], F::one());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Graph, Mode, ModelConfig};
    use crate::preprocess::ClassScheme;
    use crate::rng::Rng;

    fn random_matrix(rng: &mut Rng, n: usize, p: usize) -> Tensor<f64> {
        Tensor::from_fn(vec![n, p], |_| rng.normal())
    }

    /// Correlation of two equal-length samples.
    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
        for (&x, &y) in a.iter().zip(b) {
            cov += (x - ma) * (y - mb);
            va += (x - ma) * (x - ma);
            vb += (y - mb) * (y - mb);
        }
        cov / (va * vb).sqrt()
    }

    #[test]
    fn identical_blocks_have_perfect_correlations() {
        let mut rng = Rng::new(1);
        let x = random_matrix(&mut rng, 200, 4);
        let fit = cca_fit(&x, &x, 1e-8).unwrap();
        assert_eq!(fit.correlations.len(), 4);
        for &rho in &fit.correlations {
            assert!((rho - 1.0).abs() < 1e-6, "rho = {rho}");
        }
    }

    #[test]
    fn independent_blocks_have_near_zero_correlations() {
        let mut rng = Rng::new(2);
        let x = random_matrix(&mut rng, 10_000, 4);
        let y = random_matrix(&mut rng, 10_000, 4);
        let fit = cca_fit(&x, &y, 1e-8).unwrap();
        assert!(fit.correlations[0] < 0.1, "max rho = {}", fit.correlations[0]);
    }

    #[test]
    fn correlations_are_sorted_probabilities_and_variates_reproduce_them() {
        let mut rng = Rng::new(3);
        let n = 2_000;
        let x = random_matrix(&mut rng, n, 4);
        // Planted relation with percolumn noise of different strength.
        let y = Tensor::from_fn(vec![n, 4], |flat| {
            let (i, j) = (flat / 4, flat % 4);
            x.data()[i * 4 + j] + rng.normal() * (0.05 + 0.4 * j as f64)
        });
        let fit = cca_fit(&x, &y, 1e-8).unwrap();
        for w in fit.correlations.windows(2) {
            assert!(w[0] >= w[1], "correlations not sorted: {:?}", fit.correlations);
        }
        for &rho in &fit.correlations {
            assert!((0.0..=1.0).contains(&rho));
        }
        // Transform the training rows and recompute each correlation.
        let k = fit.correlations.len();
        let mut variates = vec![Vec::with_capacity(n); 2 * k];
        for i in 0..n {
            let row = cca_transform(&fit, &x.data()[i * 4..][..4], &y.data()[i * 4..][..4]);
            for (j, v) in row.into_iter().enumerate() {
                variates[j].push(v);
            }
        }
        for j in 0..k {
            let rho = correlation(&variates[j], &variates[k + j]);
            assert!((rho - fit.correlations[j]).abs() < 1e-9, "pair {j}");
            // Unit sample variance.
            let var = variates[j].iter().map(|v| v * v).sum::<f64>()
                - variates[j].iter().sum::<f64>().powi(2) / n as f64;
            assert!((var / (n as f64 - 1.0) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn correlations_are_invariant_under_invertible_transforms() {
        let mut rng = Rng::new(4);
        let n = 2_000;
        let x = random_matrix(&mut rng, n, 4);
        let y = Tensor::from_fn(vec![n, 4], |flat| {
            let (i, j) = (flat / 4, flat % 4);
            x.data()[i * 4 + j] * (1.0 + j as f64) + rng.normal() * 0.3
        });
        // Well-conditioned invertible T plus a shift.
        let t = [
            [2.0, 1.0, 0.0, 0.2],
            [0.0, 1.5, 0.3, 0.0],
            [0.2, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.4, 0.8],
        ];
        let xt = Tensor::from_fn(vec![n, 4], |flat| {
            let (i, j) = (flat / 4, flat % 4);
            (0..4).map(|r| x.data()[i * 4 + r] * t[r][j]).sum::<f64>() + 3.0
        });
        let base = cca_fit(&x, &y, 1e-8).unwrap();
        let moved = cca_fit(&xt, &y, 1e-8).unwrap();
        for (a, b) in base.correlations.iter().zip(&moved.correlations) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn transform_at_the_fitted_mean_is_zero() {
        let mut rng = Rng::new(5);
        let x = random_matrix(&mut rng, 300, 5);
        let y = random_matrix(&mut rng, 300, 3);
        let fit = cca_fit(&x, &y, 1e-6).unwrap();
        assert_eq!(fit.correlations.len(), 3);
        let v = cca_transform(&fit, &fit.x_mean, &fit.y_mean);
        assert_eq!(v.len(), 6);
        assert!(v.iter().all(|&e| e.abs() < 1e-12));
    }

    #[test]
    fn rank_deficiency_without_ridge_is_singular() {
        let mut rng = Rng::new(6);
        let n = 100;
        // Third column duplicates the first: Sxx is rank 2.
        let x = Tensor::from_fn(vec![n, 3], |flat| {
            let j = flat % 3;
            let i = flat / 3;
            let base = ((i * 31 + 7) % 97) as f64 / 97.0;
            match j {
                0 => base,
                1 => rng.normal(),
                _ => base,
            }
        });
        let y = random_matrix(&mut rng, n, 2);
        assert!(matches!(cca_fit(&x, &y, 0.0), Err(ModelError::SingularCovariance)));
        assert!(cca_fit(&x, &y, 1e-6).is_ok());
    }

    #[test]
    fn underdetermined_fits_are_rejected() {
        let x = Tensor::<f64>::zeros(vec![4, 4]);
        let y = Tensor::<f64>::zeros(vec![4, 2]);
        assert!(matches!(cca_fit(&x, &y, 1e-6), Err(ModelError::Tensor(_))));
        let y_short = Tensor::<f64>::zeros(vec![3, 2]);
        assert!(matches!(cca_fit(&x, &y_short, 1e-6), Err(ModelError::Tensor(_))));
    }

    #[test]
    fn installing_a_fit_unlocks_the_fusion_path() {
        let config = ModelConfig::tiny(ClassScheme::Aami, FusionKind::Cca);
        let mut params = ModelParams::<f64>::build(&config, &mut Rng::new(7)).unwrap();
        let d1 = config.image_embedding_dim().unwrap();
        let d2 = config.meta_embedding_dim();
        let mut rng = Rng::new(8);
        let x = random_matrix(&mut rng, 120, d1);
        let y = random_matrix(&mut rng, 120, d2);
        let fit = cca_fit(&x, &y, 1e-6).unwrap();
        install_cca(&mut params, &fit).unwrap();

        let mut g = Graph::new(&params, Mode::Infer);
        let img = g.input(Tensor::from_fn(vec![16, 16, 1], |i| (i % 9) as f64 / 9.0));
        let meta = g.input(Tensor::new(vec![2], vec![0.5, 1.0]).unwrap());
        let out = g.forward(img, meta, &mut Rng::new(0)).unwrap();
        assert_eq!(g.value(out.fused).shape(), &[2 * d1.min(d2)]);
        assert!(g.value(out.probabilities).data().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn installation_validates_the_fusion_kind() {
        let config = ModelConfig::tiny(ClassScheme::Aami, FusionKind::Sacc);
        let mut params = ModelParams::<f64>::build(&config, &mut Rng::new(9)).unwrap();
        let mut rng = Rng::new(10);
        let x = random_matrix(&mut rng, 50, 4);
        let y = random_matrix(&mut rng, 50, 4);
        let fit = cca_fit(&x, &y, 1e-6).unwrap();
        assert!(matches!(install_cca(&mut params, &fit), Err(ModelError::BadConfig(_))));
    }
}
