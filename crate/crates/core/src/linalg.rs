//! Small dense linear-algebra helpers.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fock::{CMatrix, C64};

pub(crate) fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub(crate) fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// Index of the first entry within a relative `1e-9` of the largest magnitude.
fn pivot<I: Iterator<Item = f64> + Clone>(mags: I) -> usize {
    let max = mags.clone().fold(0.0, f64::max);
    mags.into_iter().position(|x| x >= max * (1.0 - 1e-9)).unwrap_or(0)
}

/// Eigenpairs of a real symmetric matrix, ascending, each vector signed so
/// that its pivot component is positive.
pub(crate) fn eigh_real(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("symmetric QR did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let p = pivot(v.iter().map(|x| x.abs()));
        let s = if v[p] < 0.0 { -1.0 } else { 1.0 };
        vectors.column_mut(col).copy_from(&(v * s));
    }
    Ok((values, vectors))
}

/// Eigenpairs of a Hermitian matrix, ascending, each vector phased so that
/// its pivot component is real and positive.
pub(crate) fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if is_real(m) {
        let (values, vectors) = eigh_real(&m.map(|z| z.re))?;
        return Ok((values, vectors.map(|x| C64::new(x, 0.0))));
    }
    let n = m.nrows();
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("Hermitian QR did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let p = pivot(v.iter().map(|z| z.norm()));
        let phase = if v[p].norm() > 0.0 { v[p].conj() / v[p].norm() } else { C64::new(1.0, 0.0) };
        vectors.column_mut(col).copy_from(&(v * phase));
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_eigh_sorted_and_orthonormal() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.5, 0.0, 0.5, -1.0]);
        let (vals, vecs) = eigh_real(&m).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let id = vecs.transpose() * &vecs;
        assert!((id - DMatrix::identity(3, 3)).amax() < 1e-13);
        let recon = &vecs * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals)) * vecs.transpose();
        assert!((recon - m).amax() < 1e-13);
    }

    #[test]
    fn complex_eigh_reconstructs() {
        let i = C64::new(0.0, 1.0);
        let one = C64::new(1.0, 0.0);
        let m = CMatrix::from_row_slice(2, 2, &[one, i * 0.3, -i * 0.3, one * 2.0]);
        let (vals, vecs) = eigh(&m).unwrap();
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(2, vals.iter().map(|&x| C64::new(x, 0.0))));
        let recon = &vecs * d * vecs.adjoint();
        assert!((recon - m).iter().all(|z| z.norm() < 1e-13));
    }
}
