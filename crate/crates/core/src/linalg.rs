//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{from_usize, Scalar};

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
///
/// Ties keep the solver's order; each eigenvector is normalized so that its
/// first component of non-negligible magnitude is positive.
pub(crate) fn sym_eigen_desc<T: Scalar>(m: &DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(m.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        fix_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

fn fix_sign<T: Scalar>(v: &mut DVector<T>) {
    let thresh = T::eps().sqrt();
    if let Some(first) = v.iter().copied().find(|x| x.abs() > thresh) {
        if first < T::zero() {
            v.neg_mut();
        }
    }
}

/// Orthonormal basis of the column space of a full-column-rank matrix
/// (thin QR with a non-negative diagonal in R).
pub(crate) fn orthonormal_columns<T: Scalar>(a: DMatrix<T>) -> DMatrix<T> {
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < T::zero() {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Numerical rank from singular values, relative to the largest one.
pub(crate) fn numerical_rank<T: Scalar>(singular: &DVector<T>, rel_tol: T) -> usize {
    let smax = singular.iter().copied().fold(T::zero(), T::max);
    if smax == T::zero() {
        return 0;
    }
    singular.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Default relative rank threshold: `max(rows, cols) * eps`.
pub(crate) fn default_rank_tol<T: Scalar>(rows: usize, cols: usize) -> T {
    from_usize::<T>(rows.max(cols)) * T::eps()
}

/// Least-squares / least-norm solution of `a x = b` via the SVD
/// pseudo-inverse. Returns the solution and the numerical rank of `a`.
pub(crate) fn lstsq<T: Scalar>(a: &DMatrix<T>, b: &DVector<T>, rel_tol: T) -> (DVector<T>, usize) {
    let svd = a.clone().svd(true, true);
    let rank = numerical_rank(&svd.singular_values, rel_tol);
    let smax = svd.singular_values.iter().copied().fold(T::zero(), T::max);
    let x = svd
        .solve(b, rel_tol * smax)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()));
    (x, rank)
}
