//! Small dense-matrix helpers shared by the engines.

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, UPLO};

use crate::{C64, Result};

/// Hermitian eigendecomposition: eigenvalues ascending, eigenvectors as
/// columns (M = U Λ U†). The backend returns the conjugated basis for complex
/// input; normalize here so callers get the standard convention.
pub fn hermitian_eigen(m: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let (vals, vecs) = m.eigh(UPLO::Lower)?;
    Ok((vals, vecs.mapv(|c| c.conj())))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &Array2<C64>) -> Result<f64> {
    let (vals, _) = hermitian_eigen(m)?;
    Ok(vals.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Max |m_ij - conj(m_ji)| over all entries.
pub fn hermiticity_error(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[[i, j]] - m[[j, i]].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

pub fn trace(m: &Array2<C64>) -> C64 {
    m.diag().sum()
}

/// Sum with pairwise (cascade) reduction; order-stable and accurate.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}
