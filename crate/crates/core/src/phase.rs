//! Phase retrieval from projection magnitudes `b_j = |P_j x|^2`.
//!
//! With a degree-2 cubature, `x x^T` follows in closed form. Otherwise the
//! rank-one matrix is sought as a point of the PSD cone in the affine space
//! `{A : trace(P_j A) = b_j}` by alternating projections.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cubature::{certify_cubature, WeightedCubature};
use crate::error::{ensure_dims, Error, Result};
use crate::grassmann::{sample_uniform, Projector, SymMatrix};
use crate::linalg::{numerical_rank, sym_eigen_desc};
use crate::rng;
use crate::scalar::{cst, from_usize, to_f64, Scalar};

/// Magnitude measurements of one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet<T: Scalar> {
    pub d: usize,
    pub k: usize,
    pub projectors: Vec<Projector<T>>,
    pub values: Vec<T>,
    /// `|x|^2`, when known; acts as the constraint `trace(A) = |x|^2`.
    pub norm_sq: Option<T>,
}

impl<T: Scalar> MeasurementSet<T> {
    pub fn new(projectors: Vec<Projector<T>>, values: Vec<T>, norm_sq: Option<T>) -> Result<Self> {
        ensure_dims(projectors.len(), values.len())?;
        let first = projectors
            .first()
            .ok_or_else(|| Error::Parameter("no projectors".into()))?;
        let (d, k) = (first.dim(), first.rank());
        for p in &projectors {
            ensure_dims(d, p.dim())?;
            ensure_dims(k, p.rank())?;
        }
        if values.iter().chain(norm_sq.iter()).any(|&b| b < T::zero()) {
            return Err(Error::Validation("measurements must be nonnegative".into()));
        }
        Ok(MeasurementSet {
            d,
            k,
            projectors,
            values,
            norm_sq,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `b_j = x^T P_j x`, optionally recording `|x|^2`.
pub fn measure<T: Scalar>(
    x: &DVector<T>,
    projectors: Vec<Projector<T>>,
    norm_known: bool,
) -> Result<MeasurementSet<T>> {
    let values = projectors
        .iter()
        .map(|p| {
            ensure_dims(p.dim(), x.len())?;
            Ok(x.dot(&(p.as_matrix() * x)).max(T::zero()))
        })
        .collect::<Result<Vec<_>>>()?;
    let norm = norm_known.then(|| x.norm_squared());
    MeasurementSet::new(projectors, values, norm)
}

/// `alpha = 2k(d-k) / (d(d+2)(d-1))`, `beta = k(kd+k-2) / (d(d+2)(d-1))`.
pub fn alpha_beta<T: Scalar>(k: usize, d: usize) -> Result<(T, T)> {
    if d < 2 || k == 0 || k >= d {
        return Err(Error::Parameter(format!("need 1 <= k <= d - 1 and d >= 2, got k = {k}, d = {d}")));
    }
    let (kf, df) = (k as f64, d as f64);
    let den = df * (df + 2.0) * (df - 1.0);
    Ok((
        cst(2.0 * kf * (df - kf) / den),
        cst(kf * (kf * df + kf - 2.0) / den),
    ))
}

/// Closed-form candidate for `x x^T` and a warning when the weighted
/// projectors are not a certified degree-2 cubature.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm<T: Scalar> {
    pub matrix: SymMatrix<T>,
    pub warning: Option<String>,
}

/// For a degree-2 cubature, `sum_j w_j b_j P_j = alpha x x^T + beta |x|^2 I`
/// and `|x|^2 = (d/k) sum_j w_j b_j`, hence
/// `x x^T = (1/alpha) sum_j w_j b_j P_j - (beta/alpha) (d/k) (sum_j w_j b_j) I`.
pub fn reconstruct_closed_form<T: Scalar>(ms: &MeasurementSet<T>, weights: &[T]) -> Result<ClosedForm<T>> {
    ensure_dims(ms.len(), weights.len())?;
    let (alpha, beta) = alpha_beta::<T>(ms.k, ms.d)?;
    let mut acc = DMatrix::<T>::zeros(ms.d, ms.d);
    let mut s = T::zero();
    for ((p, &b), &w) in ms.projectors.iter().zip(&ms.values).zip(weights) {
        acc += p.as_matrix() * (w * b);
        s += w * b;
    }
    let norm_sq = from_usize::<T>(ms.d) / from_usize::<T>(ms.k) * s;
    let mut a = acc / alpha;
    for i in 0..ms.d {
        a[(i, i)] -= beta / alpha * norm_sq;
    }
    let warning = match WeightedCubature::new(ms.projectors.clone(), weights.to_vec(), 2) {
        Ok(c) => {
            let cert = certify_cubature(&c, 2, cst(1e-8))?;
            (!cert.certified).then(|| {
                format!("projectors are not a certified degree-2 cubature (residual {:?})", cert.residual)
            })
        }
        Err(e) => Some(format!("weights do not form a cubature: {e}")),
    };
    Ok(ClosedForm {
        matrix: SymMatrix::from_matrix(&a)?,
        warning,
    })
}

/// Leading-eigenpair factor `x = sqrt(max(l1, 0)) u1`, sign fixed by making
/// the largest-magnitude entry positive, and the relative residual
/// `|A - x x^T|_F / max(|A|_F, eps)`.
pub fn rank_one_extract<T: Scalar>(a: &SymMatrix<T>) -> (DVector<T>, T) {
    let (vals, vecs) = sym_eigen_desc(a.as_matrix());
    let l1 = vals[0].max(T::zero());
    let mut x: DVector<T> = vecs.column(0) * l1.sqrt();
    let imax = x.iamax();
    if x[imax] < T::zero() {
        x = -x;
    }
    let res = (a.as_matrix() - &x * x.transpose()).norm() / a.frobenius_norm().max(T::eps());
    (x, res)
}

/// `min(|y - x|, |y + x|) / |x|`; the absolute error when `x = 0`.
pub fn relative_error_mod_sign<T: Scalar>(estimate: &DVector<T>, truth: &DVector<T>) -> T {
    let e = (estimate - truth).norm().min((estimate + truth).norm());
    let n = truth.norm();
    if n > T::zero() {
        e / n
    } else {
        e
    }
}

/// Options for [`feasibility_pocs`].
#[derive(Debug, Clone, PartialEq)]
pub struct PocsOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Record the per-cycle sum of squared distances between the iterates.
    pub record_distances: bool,
}

impl Default for PocsOptions {
    fn default() -> Self {
        PocsOptions {
            tol: 1e-7,
            max_iter: 50_000,
            record_distances: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PocsResult<T: Scalar> {
    /// Last PSD iterate.
    pub matrix: SymMatrix<T>,
    pub converged: bool,
    pub iterations: usize,
    /// The constraint functionals are linearly dependent.
    pub redundant: bool,
    /// `|A_i - B_i|^2 + |B_i - A_{i+1}|^2` per cycle, if requested.
    pub distances: Vec<T>,
}

fn psd_part<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    let (vals, vecs) = sym_eigen_desc(a);
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, &l) in vals.iter().enumerate() {
        if l > T::zero() {
            let u = vecs.column(i);
            out += &u * u.transpose() * l;
        }
    }
    out
}

/// Alternating projections between the PSD cone and the affine space of
/// matrices consistent with the measurements.
///
/// The affine projection is the least-norm correction through the
/// pseudo-inverse of the Gram matrix `trace(C_i C_j)` of the constraint
/// matrices, factorized once. Converged means the PSD iterate meets every
/// constraint within `tol` (relative to `max(1, max b)`).
pub fn feasibility_pocs<T: Scalar>(ms: &MeasurementSet<T>, opts: &PocsOptions) -> Result<PocsResult<T>> {
    let d = ms.d;
    let mut cons: Vec<DMatrix<T>> = ms.projectors.iter().map(|p| p.as_matrix().clone()).collect();
    let mut rhs = ms.values.clone();
    if let Some(n) = ms.norm_sq {
        cons.push(DMatrix::identity(d, d));
        rhs.push(n);
    }
    let m = cons.len();
    let c = DMatrix::from_fn(m, d * d, |j, e| cons[j][e]);
    let b = DVector::from_vec(rhs);
    let gram = &c * c.transpose();
    let svd = gram.svd(true, true);
    let rank_tol = from_usize::<T>(m) * T::eps() * cst(16.0);
    let rank = numerical_rank(&svd.singular_values, rank_tol);
    let smax = svd.singular_values.max();
    let gpinv = svd
        .pseudo_inverse(rank_tol * smax)
        .map_err(|e| Error::Internal(e.to_string()))?;
    let correction = c.transpose() * gpinv;
    let affine = |a: &DVector<T>| -> DVector<T> { a - &correction * (&c * a - &b) };
    let tol = cst::<T>(opts.tol);
    let scale = b.amax().max(T::one());
    let as_vec = |a: &DMatrix<T>| DVector::from_column_slice(a.as_slice());
    let as_mat = |v: &DVector<T>| {
        let a = DMatrix::from_column_slice(d, d, v.as_slice());
        (&a + a.transpose()) * cst::<T>(0.5)
    };

    let mut a = affine(&DVector::zeros(d * d));
    let mut distances = Vec::new();
    let mut iterations = 0;
    loop {
        let bm = psd_part(&as_mat(&a));
        let bv = as_vec(&bm);
        let residual = (&c * &bv - &b).amax() / scale;
        if residual <= tol {
            return Ok(PocsResult {
                matrix: SymMatrix::from_matrix(&bm)?,
                converged: true,
                iterations,
                redundant: rank < m,
                distances,
            });
        }
        if iterations >= opts.max_iter {
            return Ok(PocsResult {
                matrix: SymMatrix::from_matrix(&bm)?,
                converged: false,
                iterations,
                redundant: rank < m,
                distances,
            });
        }
        let next = affine(&bv);
        if opts.record_distances {
            distances.push((&a - &bv).norm_squared() + (&bv - &next).norm_squared());
        }
        a = next;
        iterations += 1;
    }
}

/// `n` independent draws from `sum_j w_j delta_{P_j}`.
pub fn sample_from_cubature_measure<T: Scalar, R: Rng + ?Sized>(
    c: &WeightedCubature<T>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Projector<T>>> {
    if let Some(w) = c.weights().iter().find(|&&w| w < T::zero()) {
        return Err(Error::Parameter(format!("negative weight {w:?} is not a probability")));
    }
    let w: Vec<f64> = c.weights().iter().map(|&w| to_f64(w)).collect();
    let dist = WeightedIndex::new(&w).map_err(|e| Error::Parameter(e.to_string()))?;
    Ok((0..n).map(|_| c.points()[dist.sample(rng)].clone()).collect())
}

/// Where the measurement projectors come from.
#[derive(Debug, Clone, Copy)]
pub enum ProjectorSource<'a, T: Scalar> {
    Haar,
    Cubature(&'a WeightedCubature<T>),
}

/// One row of a success-rate sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessReport {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub source: String,
    pub trials: usize,
    pub success_rate: f64,
    pub mean_iterations: f64,
}

/// Fraction of trials in which POCS plus rank-one extraction recovers a
/// random unit `x` to relative error at most `1e-4`, modulo sign. Trial `i`
/// draws from stream `i` of `seed`.
pub fn success_experiment<T: Scalar>(
    d: usize,
    k: usize,
    n: usize,
    source: ProjectorSource<'_, T>,
    norm_known: bool,
    trials: usize,
    opts: &PocsOptions,
    seed: u64,
) -> Result<SuccessReport> {
    if trials == 0 || n == 0 {
        return Err(Error::Parameter("need n >= 1 and trials >= 1".into()));
    }
    let label = match source {
        ProjectorSource::Haar => "haar".to_string(),
        ProjectorSource::Cubature(c) => {
            ensure_dims(d, c.dim())?;
            ensure_dims(k, c.rank())?;
            format!("cubature-t{}", c.degree())
        }
    };
    let outcomes: Vec<(bool, usize)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let projectors = match source {
                ProjectorSource::Haar => (0..n)
                    .map(|_| sample_uniform::<T, _>(d, k, &mut r))
                    .collect::<Result<Vec<_>>>()?,
                ProjectorSource::Cubature(c) => sample_from_cubature_measure(c, n, &mut r)?,
            };
            let mut x = crate::grassmann::gaussian_matrix::<T, _>(d, 1, &mut r).column(0).into_owned();
            x /= x.norm();
            let ms = measure(&x, projectors, norm_known)?;
            let out = feasibility_pocs(&ms, opts)?;
            let (xh, _) = rank_one_extract(&out.matrix);
            Ok((relative_error_mod_sign(&xh, &x) <= cst(1e-4), out.iterations))
        })
        .collect::<Result<_>>()?;
    let succ = outcomes.iter().filter(|o| o.0).count();
    let iters: usize = outcomes.iter().map(|o| o.1).sum();
    Ok(SuccessReport {
        d,
        k,
        n,
        source: label,
        trials,
        success_rate: succ as f64 / trials as f64,
        mean_iterations: iters as f64 / trials as f64,
    })
}

/// CSV with columns `d, k, n, source, trials, success_rate, mean_iterations`.
pub fn write_success_reports<W: Write>(out: W, reports: &[SuccessReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r).map_err(|e| Error::Internal(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))
}
