//! Dense linear-algebra helpers built on nalgebra.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

pub(crate) const PSD_TOL: f64 = 1e-12;

pub fn check_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::dim(format!("{what} is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    Ok(())
}

pub fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    check_square(m, what)?;
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::param(format!("{what} is not symmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn check_psd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    check_symmetric(m, what)?;
    let ev = sym_eigenvalues(m);
    let top = ev.last().copied().unwrap_or(0.0).abs().max(1.0);
    if let Some(&low) = ev.first() {
        if low < -PSD_TOL * top {
            return Err(Error::param(format!("{what} has negative eigenvalue {low:e}")));
        }
    }
    Ok(())
}

pub fn check_pd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    check_symmetric(m, what)?;
    if m.clone().cholesky().is_none() {
        return Err(Error::Singular(format!("{what} is not positive definite")));
    }
    Ok(())
}

/// A factor `L` with `L Lᵀ = m` for a symmetric PSD matrix.
/// Uses Cholesky when possible, otherwise the symmetric eigen square root.
pub fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_psd(m, "covariance")?;
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = m.clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&d))
}

pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.inverse()).ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

pub fn check_full_column_rank(x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() < x.ncols() {
        return Err(Error::dim(format!("design is {}x{}: needs rows >= columns", x.nrows(), x.ncols())));
    }
    let sv = x.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(min > 1e-12 * max.max(1e-300)) {
        return Err(Error::Singular("design does not have full column rank".into()));
    }
    Ok(())
}

pub fn sigma_min(x: &DMatrix<f64>) -> f64 {
    x.clone().singular_values().min()
}

pub fn spectral_norm(x: &DMatrix<f64>) -> f64 {
    x.clone().singular_values().max()
}

/// Orthogonal projector onto the column space of `x`.
pub fn ols_projector(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_full_column_rank(x)?;
    let gram = x.transpose() * x;
    let inv = spd_inverse(&gram, "XᵀX")?;
    Ok(x * inv * x.transpose())
}

/// Oblique projector `X (Xᵀ Σ⁻¹ X)⁻¹ Xᵀ Σ⁻¹`.
pub fn gls_projector(x: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_full_column_rank(x)?;
    let si = spd_inverse(sigma, "noise covariance")?;
    let info = x.transpose() * &si * x;
    let inv = spd_inverse(&info, "XᵀΣ⁻¹X")?;
    Ok(x * inv * x.transpose() * si)
}

/// `(Xᵀ Σ⁻¹ X)⁻¹`.
pub fn gls_covariance(x: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_full_column_rank(x)?;
    let si = spd_inverse(sigma, "noise covariance")?;
    spd_inverse(&(x.transpose() * si * x), "XᵀΣ⁻¹X")
}

/// Right singular vector for the smallest singular value, and that value.
pub fn smallest_right_singular(x: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
    let svd = x.clone().svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Singular("SVD failed".into()))?;
    let (idx, &s) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::dim("empty design"))?;
    Ok((vt.row(idx).transpose(), s))
}
