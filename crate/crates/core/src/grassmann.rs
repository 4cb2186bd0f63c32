//! Projector and Stiefel-frame types, uniform sampling and distances.
//!
//! A point of the Grassmannian `G(k, d)` is stored as its orthogonal
//! projector: a symmetric idempotent `d x d` matrix of trace `k`. The
//! factorized view is a `k x d` matrix `Q` with orthonormal rows and
//! `P = Q^T Q`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_dims, Error, Result};
use crate::linalg::{orthonormal_columns, sym_eigen_desc};
use crate::scalar::{cst, from_usize, Scalar};

/// Symmetric matrix with exact (bitwise) symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T: Scalar>(DMatrix<T>);

impl<T: Scalar> SymMatrix<T> {
    /// Builds from the upper triangle of `f`; the lower triangle mirrors it.
    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    /// Symmetrizes a square matrix as `(M + M^T) / 2`.
    pub fn from_matrix(m: &DMatrix<T>) -> Result<Self> {
        ensure_dims(m.nrows(), m.ncols())?;
        let half = cst::<T>(0.5);
        Ok(Self::from_fn(m.nrows(), |i, j| {
            if i == j {
                m[(i, i)]
            } else {
                (m[(i, j)] + m[(j, i)]) * half
            }
        }))
    }

    pub fn identity(d: usize) -> Self {
        SymMatrix(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        SymMatrix(DMatrix::zeros(d, d))
    }

    pub fn diagonal(diag: &[T]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { T::zero() })
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.0
    }

    pub fn trace(&self) -> T {
        self.0.trace()
    }

    /// `trace(A B)` for symmetric `A`, `B`.
    pub fn trace_product(&self, other: &SymMatrix<T>) -> T {
        self.0.dot(&other.0)
    }

    pub fn frobenius_norm(&self) -> T {
        self.0.norm()
    }
}

/// Orthogonal projector of rank `k` in dimension `d`, `1 <= k <= d - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector<T: Scalar> {
    matrix: SymMatrix<T>,
    rank: usize,
}

impl<T: Scalar> Projector<T> {
    /// Validates `P^2 = P` and `trace(P) = k` within `d * proj_tol`.
    pub fn new(matrix: SymMatrix<T>, rank: usize) -> Result<Self> {
        let d = matrix.dim();
        check_rank(d, rank)?;
        let tol = T::proj_tol() * from_usize::<T>(d);
        let m = matrix.as_matrix();
        let idem = (m * m - m).norm();
        if idem > tol {
            return Err(Error::Validation(format!(
                "matrix is not idempotent: |P^2 - P|_F = {idem:?}"
            )));
        }
        let tr = matrix.trace();
        if (tr - from_usize::<T>(rank)).abs() > tol {
            return Err(Error::Validation(format!(
                "trace {tr:?} does not match rank {rank}"
            )));
        }
        Ok(Projector { matrix, rank })
    }

    /// Projector from `k` orthonormal columns `U` (`d x k`), `P = U U^T`.
    pub(crate) fn from_orthonormal_columns(u: &DMatrix<T>) -> Self {
        let p = u * u.transpose();
        Projector {
            matrix: SymMatrix::from_matrix(&p).expect("square"),
            rank: u.ncols(),
        }
    }

    /// Coordinate projector onto the first `k` axes.
    pub fn coordinate(d: usize, k: usize) -> Result<Self> {
        check_rank(d, k)?;
        let diag: Vec<T> = (0..d)
            .map(|i| if i < k { T::one() } else { T::zero() })
            .collect();
        Ok(Projector {
            matrix: SymMatrix::diagonal(&diag),
            rank: k,
        })
    }

    /// Rank-one projector onto the line spanned by `v` (need not be unit).
    pub fn line(v: &[T]) -> Result<Self> {
        let d = v.len();
        check_rank(d, 1)?;
        let norm2 = v.iter().fold(T::zero(), |acc, &x| acc + x * x);
        if norm2 <= T::zero() {
            return Err(Error::Parameter("zero vector spans no line".into()));
        }
        Ok(Projector {
            matrix: SymMatrix::from_fn(d, |i, j| v[i] * v[j] / norm2),
            rank: 1,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn matrix(&self) -> &SymMatrix<T> {
        &self.matrix
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        self.matrix.as_matrix()
    }

    /// `trace(P R)`.
    pub fn trace_with(&self, other: &Projector<T>) -> T {
        self.matrix.trace_product(&other.matrix)
    }

    /// Conjugation `O P O^T` by an orthogonal matrix.
    pub fn conjugate(&self, o: &DMatrix<T>) -> Result<Self> {
        ensure_dims(self.dim(), o.nrows())?;
        let m = o * self.as_matrix() * o.transpose();
        Ok(Projector {
            matrix: SymMatrix::from_matrix(&m)?,
            rank: self.rank,
        })
    }
}

/// `k x d` matrix with orthonormal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelFrame<T: Scalar> {
    q: DMatrix<T>,
}

impl<T: Scalar> StiefelFrame<T> {
    /// Validates `|Q Q^T - I_k|_F <= d * proj_tol`.
    pub fn new(q: DMatrix<T>) -> Result<Self> {
        let (k, d) = q.shape();
        if k == 0 || k > d {
            return Err(Error::Parameter(format!("frame shape {k}x{d} invalid")));
        }
        let tol = T::proj_tol() * from_usize::<T>(d);
        let err = (&q * q.transpose() - DMatrix::identity(k, k)).norm();
        if err > tol {
            return Err(Error::Validation(format!(
                "rows are not orthonormal: |QQ^T - I|_F = {err:?}"
            )));
        }
        Ok(StiefelFrame { q })
    }

    pub(crate) fn new_unchecked(q: DMatrix<T>) -> Self {
        StiefelFrame { q }
    }

    pub fn rows(&self) -> usize {
        self.q.nrows()
    }

    pub fn cols(&self) -> usize {
        self.q.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.q
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.q
    }
}

fn check_rank(d: usize, k: usize) -> Result<()> {
    if d < 2 || k == 0 || k >= d {
        Err(Error::Parameter(format!(
            "rank {k} must satisfy 1 <= k <= d - 1 with d = {d}"
        )))
    } else {
        Ok(())
    }
}

pub(crate) fn gaussian_matrix<T: Scalar, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> DMatrix<T> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let g: f64 = rng.sample(StandardNormal);
        cst(g)
    })
}

/// Haar-distributed Stiefel frame: orthonormalized Gaussian `d x k` matrix,
/// transposed.
pub fn sample_stiefel<T: Scalar, R: Rng + ?Sized>(
    d: usize,
    k: usize,
    rng: &mut R,
) -> Result<StiefelFrame<T>> {
    check_rank(d, k)?;
    let u = orthonormal_columns(gaussian_matrix::<T, _>(d, k, rng));
    Ok(StiefelFrame::new_unchecked(u.transpose()))
}

/// Sample from the orthogonally invariant probability measure on `G(k, d)`.
pub fn sample_uniform<T: Scalar, R: Rng + ?Sized>(
    d: usize,
    k: usize,
    rng: &mut R,
) -> Result<Projector<T>> {
    check_rank(d, k)?;
    let u = orthonormal_columns(gaussian_matrix::<T, _>(d, k, rng));
    Ok(Projector::from_orthonormal_columns(&u))
}

/// Haar-distributed orthogonal `d x d` matrix.
pub fn sample_orthogonal<T: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<T> {
    orthonormal_columns(gaussian_matrix::<T, _>(d, d, rng))
}

/// Chordal distance `|P - R|_F`.
pub fn chordal_distance<T: Scalar>(p: &Projector<T>, r: &Projector<T>) -> Result<T> {
    ensure_dims(p.dim(), r.dim())?;
    Ok((p.as_matrix() - r.as_matrix()).norm())
}

/// `P = Q^T Q`.
pub fn stiefel_to_projector<T: Scalar>(q: &StiefelFrame<T>) -> Result<Projector<T>> {
    let frame = StiefelFrame::new(q.as_matrix().clone())?;
    if frame.rows() >= frame.cols() {
        return Err(Error::Parameter("frame must have fewer rows than columns".into()));
    }
    Ok(Projector::from_orthonormal_columns(&frame.q.transpose()))
}

/// Some `Q` with `Q^T Q = P`; unique only up to a `k x k` orthogonal factor.
pub fn projector_to_stiefel<T: Scalar>(p: &Projector<T>) -> Result<StiefelFrame<T>> {
    let (d, k) = (p.dim(), p.rank());
    let (vals, vecs) = sym_eigen_desc(p.as_matrix());
    let tol = T::proj_tol() * from_usize::<T>(d);
    for (i, &v) in vals.iter().enumerate() {
        let target = if i < k { T::one() } else { T::zero() };
        if (v - target).abs() > tol {
            return Err(Error::Validation(format!(
                "eigenvalue {v:?} at position {i} is not clustered at {target:?}"
            )));
        }
    }
    let u = vecs.columns(0, k).into_owned();
    Ok(StiefelFrame::new_unchecked(u.transpose()))
}

/// Nearest rank-`k` projector to a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Retraction<T: Scalar> {
    pub projector: Projector<T>,
    /// Eigenvalues `k` and `k + 1` coincide within tolerance, so the
    /// nearest projector is not unique.
    pub tie: bool,
}

/// Projects a symmetric matrix onto `G(k, d)` by keeping its `k` leading
/// eigenvectors.
pub fn project_to_grassmannian<T: Scalar>(a: &SymMatrix<T>, k: usize) -> Result<Retraction<T>> {
    let d = a.dim();
    check_rank(d, k)?;
    let (vals, vecs) = sym_eigen_desc(a.as_matrix());
    let scale = vals.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let tie = (vals[k - 1] - vals[k]).abs() <= T::proj_tol() * scale;
    let u = vecs.columns(0, k).into_owned();
    Ok(Retraction {
        projector: Projector::from_orthonormal_columns(&u),
        tie,
    })
}
