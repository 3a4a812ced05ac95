//! Dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Dense complex matrix used for channels, precoders, combiners and covariances.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Squared Frobenius norm.
pub fn frobenius_sq(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Matrix with i.i.d. zero-mean, unit-variance circularly symmetric complex
/// Gaussian entries, drawn in row-major order.
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = ComplexMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(i, j)] = Complex64::new(re * scale, im * scale);
        }
    }
    m
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues in ascending order.
///
/// Each eigenvector is rotated so that its first non-negligible entry is real
/// and positive, which makes the output reproducible across runs.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

pub fn hermitian_eigen(m: &ComplexMatrix) -> HermitianEigen {
    assert!(m.is_square(), "eigendecomposition needs a square matrix");
    let n = m.nrows();
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut vectors = ComplexMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let peak = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let phase = col
            .iter()
            .find(|z| z.norm() > 1e-9 * peak.max(f64::MIN_POSITIVE))
            .map(|z| z.conj() / z.norm())
            .unwrap_or(Complex64::new(1.0, 0.0));
        for i in 0..n {
            vectors[(i, dst)] = col[i] * phase;
        }
    }
    HermitianEigen { values, vectors }
}

/// Eigenvectors of the `count` smallest eigenvalues, as columns.
pub fn least_dominant_eigenvectors(m: &ComplexMatrix, count: usize) -> ComplexMatrix {
    let eig = hermitian_eigen(m);
    eig.vectors.columns(0, count).into_owned()
}

/// Eigenvectors of the `count` largest eigenvalues, strongest first.
pub fn most_dominant_eigenvectors(m: &ComplexMatrix, count: usize) -> ComplexMatrix {
    let eig = hermitian_eigen(m);
    let n = m.nrows();
    let mut out = ComplexMatrix::zeros(n, count);
    for j in 0..count {
        out.set_column(j, &eig.vectors.column(n - 1 - j));
    }
    out
}

/// `log2 det(m)` for a Hermitian positive definite matrix, via Cholesky.
///
/// Panics when `m` is not positive definite.
pub fn log2_det_hpd(m: &ComplexMatrix) -> f64 {
    let sym = (m + m.adjoint()).scale(0.5);
    let chol = sym
        .cholesky()
        .expect("covariance must be Hermitian positive definite");
    let l = chol.l_dirty();
    2.0 * (0..m.nrows()).map(|i| l[(i, i)].re.log2()).sum::<f64>()
}

/// Orthonormal basis for the column span of `m` (thin QR), with the phases of
/// `R`'s diagonal absorbed so that Gaussian input gives Haar-distributed output.
pub fn orthonormalize(m: &ComplexMatrix) -> ComplexMatrix {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols().min(r.nrows()) {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..q.nrows() {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// `‖Q*Q − I‖_F`.
pub fn orthonormality_error(q: &ComplexMatrix) -> f64 {
    let gram = q.adjoint() * q;
    let eye = ComplexMatrix::identity(q.ncols(), q.ncols());
    frobenius_sq(&(gram - eye)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn frobenius_matches_naive_double_sum() {
        let mut rng = rng_from_seed(3);
        let h = complex_gaussian(5, 3, &mut rng);
        let mut naive = 0.0;
        for i in 0..5 {
            for j in 0..3 {
                naive += h[(i, j)].re * h[(i, j)].re + h[(i, j)].im * h[(i, j)].im;
            }
        }
        assert!((frobenius_sq(&h) - naive).abs() <= 1e-12 * naive);
    }

    #[test]
    fn adjoint_is_an_involution() {
        let mut rng = rng_from_seed(4);
        let h = complex_gaussian(3, 4, &mut rng);
        assert_eq!(h.adjoint().adjoint(), h);
    }

    #[test]
    fn eigen_reconstructs_and_sorts() {
        let mut rng = rng_from_seed(5);
        let a = complex_gaussian(4, 4, &mut rng);
        let h = &a * a.adjoint();
        let eig = hermitian_eigen(&h);
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let d = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            4,
            eig.values.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        let rebuilt = &eig.vectors * d * eig.vectors.adjoint();
        assert!(frobenius_sq(&(rebuilt - &h)).sqrt() < 1e-10);
        assert!(orthonormality_error(&eig.vectors) < 1e-12);
        for j in 0..4 {
            let first = eig.vectors.column(j).iter().copied().find(|z| z.norm() > 1e-9).unwrap();
            assert!(first.im.abs() < 1e-12 && first.re > 0.0);
        }
    }

    #[test]
    fn log_det_of_scaled_identity() {
        let m = ComplexMatrix::identity(3, 3).scale(2.0);
        assert!((log2_det_hpd(&m) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn orthonormalize_gives_orthonormal_columns() {
        let mut rng = rng_from_seed(6);
        let g = complex_gaussian(6, 2, &mut rng);
        let q = orthonormalize(&g);
        assert_eq!((q.nrows(), q.ncols()), (6, 2));
        assert!(orthonormality_error(&q) < 1e-12);
    }
}
