// Copyright 2026 Quasimode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Thin wrapper over the divide-and-conquer symmetric eigensolver.
//!
//! The exact-diagonalization route diagonalizes real symmetric matrices with
//! thousands of rows. LAPACK's divide-and-conquer driver (`dsyevd`) is close
//! to an order of magnitude faster than the QR driver (`dsyev`) that the
//! `ndarray-linalg` facade binds, so we call it directly; the BLAS backend is
//! already linked by `ndarray-linalg`.

use ndarray::{Array1, Array2, ShapeBuilder};
use std::os::raw::{c_char, c_int};

use crate::error::{Error, Result};

/// Eigendecomposition of a real symmetric matrix (divide and conquer).
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvalues in ascending order
/// and eigenvector `m` stored in column `m` of the returned matrix, i.e.
/// `matrix = V · diag(w) · Vᵀ` with `V` the second return value (the same
/// convention as `ndarray-linalg` and numpy).
///
/// Only the lower triangle of the input is referenced (the input must still
/// be symmetric for the factorization identity above to hold).
pub fn eigh_symmetric(matrix: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (rows, cols) = matrix.dim();
    if rows != cols {
        return Err(Error::ShapeMismatch(format!(
            "eigh_symmetric needs a square matrix, got {rows}x{cols}"
        )));
    }
    let n = rows;
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }

    // LAPACK is column-major; a symmetric matrix equals its transpose, so the
    // row-major buffer can be handed over as-is.
    let mut a: Vec<f64> = matrix.iter().copied().collect();
    let mut w = vec![0.0f64; n];
    let n_i = n as c_int;
    let jobz = b'V' as c_char;
    // The row-major buffer is the transpose, i.e. LAPACK sees the *upper*
    // triangle where the caller filled the lower one; reference 'U' so a
    // caller that only filled its lower triangle still works.
    let uplo = b'U' as c_char;
    let mut info: c_int = 0;

    // Workspace query.
    let mut work_query = [0.0f64];
    let mut iwork_query = [0 as c_int];
    let lwork_query: c_int = -1;
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &n_i,
            a.as_mut_ptr(),
            &n_i,
            w.as_mut_ptr(),
            work_query.as_mut_ptr(),
            &lwork_query,
            iwork_query.as_mut_ptr(),
            &lwork_query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!(
            "dsyevd workspace query failed with info = {info}"
        )));
    }
    let lwork = work_query[0] as c_int;
    let liwork = iwork_query[0];
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    let mut iwork = vec![0 as c_int; liwork.max(1) as usize];

    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &n_i,
            a.as_mut_ptr(),
            &n_i,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("dsyevd failed with info = {info}")));
    }

    // Column m of the column-major output buffer is eigenvector m; reinterpret
    // the buffer with Fortran strides so no copy is needed.
    let vectors = Array2::from_shape_vec((n, n).f(), a)
        .map_err(|e| Error::Linalg(format!("eigenvector reshape failed: {e}")))?;
    Ok((Array1::from_vec(w), vectors))
}
