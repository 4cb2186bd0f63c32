//! Sparse measures from moments.
//!
//! One-dimensional Prony recovery, frames of linear forms built from
//! maximal minors of a Vandermonde matrix, the rank certificate that such a
//! family spans homogeneous polynomials of a given degree, and the lifting of
//! projected moments `E[(Q_j X)^s]` back to all monomial moments `E[X^r]`.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{ensure_dims, Error, Result};
use crate::grassmann::SymMatrix;
use crate::linalg::{default_rank_tol, lstsq, numerical_rank};
use crate::scalar::{cst, from_usize, to_f64, Scalar};

/// Finitely supported measure on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMeasure1D<T: Scalar> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> SparseMeasure1D<T> {
    pub fn new(nodes: Vec<T>, weights: Vec<T>) -> Result<Self> {
        ensure_dims(nodes.len(), weights.len())?;
        for i in 0..nodes.len() {
            for j in (i + 1)..nodes.len() {
                if nodes[i] == nodes[j] {
                    return Err(Error::Parameter(format!("node {:?} repeated", nodes[i])));
                }
            }
        }
        Ok(SparseMeasure1D { nodes, weights })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Power moments `m(0), ..., m(count - 1)`.
    pub fn moments(&self, count: usize) -> Vec<T> {
        (0..count)
            .map(|s| {
                self.nodes
                    .iter()
                    .zip(&self.weights)
                    .fold(T::zero(), |acc, (&x, &a)| acc + a * x.powi(s as i32))
            })
            .collect()
    }

    /// Smallest gap between distinct nodes (infinite for one node).
    pub fn min_separation(&self) -> T {
        let mut sorted = self.nodes.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        sorted
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(cst::<T>(f64::INFINITY), |a, b| a.min(b))
    }
}

/// Conditioning data reported with a Prony solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PronyDiagnostics {
    pub min_separation: f64,
    pub hankel_condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PronyRecovery<T: Scalar> {
    /// Nodes in increasing order.
    pub measure: SparseMeasure1D<T>,
    pub diagnostics: PronyDiagnostics,
}

/// Hankel condition above which recovery is refused.
pub const PRONY_MAX_CONDITION: f64 = 1e12;
/// Largest tolerated imaginary part of a companion eigenvalue.
pub const PRONY_MAX_IMAG: f64 = 1e-6;

/// Recovers an `m`-atom measure from its first `2m` power moments.
///
/// Solves the Hankel system for the Prony polynomial, takes its roots as
/// companion-matrix eigenvalues and fits the weights to all `2m` moments
/// by least squares on the Vandermonde matrix.
pub fn prony_recover_1d<T: Scalar>(moments: &[T], m: usize) -> Result<PronyRecovery<T>> {
    if m == 0 {
        return Err(Error::Parameter("need at least one node".into()));
    }
    if moments.len() < 2 * m {
        return Err(Error::Parameter(format!(
            "{} moments given, {} required",
            moments.len(),
            2 * m
        )));
    }
    let h = DMatrix::from_fn(m, m, |l, k| moments[k + l]);
    let rhs = DVector::from_fn(m, |l, _| -moments[m + l]);
    let sv = h.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > T::zero() {
        to_f64(smax / smin)
    } else {
        f64::INFINITY
    };
    let (p, _) = lstsq(&h, &rhs, T::eps());

    let mut companion = DMatrix::<T>::zeros(m, m);
    for i in 1..m {
        companion[(i, i - 1)] = T::one();
    }
    for i in 0..m {
        companion[(i, m - 1)] = -p[i];
    }
    let roots: Vec<Complex<T>> = companion.complex_eigenvalues().iter().copied().collect();
    let mut nodes: Vec<T> = roots.iter().map(|z| z.re).collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let min_separation = nodes
        .windows(2)
        .map(|w| to_f64(w[1] - w[0]))
        .fold(f64::INFINITY, f64::min);

    if !(condition <= PRONY_MAX_CONDITION) {
        return Err(Error::IllConditioned {
            condition,
            min_separation,
        });
    }
    let imag = roots.iter().map(|z| to_f64(z.im.abs())).fold(0.0, f64::max);
    if imag > PRONY_MAX_IMAG {
        return Err(Error::SpuriousRoot { imag });
    }

    let v = DMatrix::from_fn(2 * m, m, |l, i| nodes[i].powi(l as i32));
    let b = DVector::from_column_slice(&moments[..2 * m]);
    let (w, _) = lstsq(&v, &b, T::eps());
    Ok(PronyRecovery {
        measure: SparseMeasure1D::new(nodes, w.iter().copied().collect())?,
        diagnostics: PronyDiagnostics {
            min_separation,
            hankel_condition: condition,
        },
    })
}

/// Parameters of a minor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MinorProvenance {
    pub t: u32,
    pub v: Vec<f64>,
    pub alpha: Vec<u32>,
}

/// Unit row vectors `Q_j` in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFamily<T: Scalar> {
    rows: DMatrix<T>,
    pub provenance: Option<MinorProvenance>,
}

impl<T: Scalar> FrameFamily<T> {
    /// Rows must have unit length within the weight tolerance.
    pub fn new(rows: DMatrix<T>) -> Result<Self> {
        for (j, r) in rows.row_iter().enumerate() {
            let n = r.norm();
            if (n - T::one()).abs() > T::weight_tol() * cst(16.0) {
                return Err(Error::Validation(format!("row {j} has norm {n:?}")));
            }
        }
        Ok(FrameFamily {
            rows,
            provenance: None,
        })
    }

    /// Normalizes every row; zero rows are rejected.
    pub fn from_unnormalized(mut rows: DMatrix<T>) -> Result<Self> {
        for (j, mut r) in rows.row_iter_mut().enumerate() {
            let n = r.norm();
            if n <= T::zero() {
                return Err(Error::Parameter(format!("row {j} is zero")));
            }
            r /= n;
        }
        Ok(FrameFamily {
            rows,
            provenance: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    /// `n x d`, one frame vector per row.
    pub fn rows(&self) -> &DMatrix<T> {
        &self.rows
    }

    pub fn row(&self, j: usize) -> Vec<T> {
        self.rows.row(j).iter().copied().collect()
    }
}

/// All `r`-element subsets of `0..n` in lexicographic order.
fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < r - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::with_capacity(r), &mut out);
    out
}

/// Default minor-frame parameters `v_i = i` and `alpha_j = j - 1`.
pub fn default_minor_parameters(t: u32, d: usize) -> (Vec<f64>, Vec<u32>) {
    let v = (1..=d).map(|i| i as f64).collect();
    let alpha = (0..(t as usize + d - 1) as u32).collect();
    (v, alpha)
}

/// Frame of `binom(t + d - 1, d - 1)` unit vectors from the maximal minors
/// of the Vandermonde matrix `V = (v_i^{alpha_j})`.
///
/// Each `(d - 1)`-subset `S` of rows of `V` gives the generalized cross
/// product of those rows: entry `c` is `(-1)^c det(V_S without column c)`
/// (columns counted from zero), so the result is orthogonal to every row in
/// `S`. Conditioning degrades quickly as the spread of `v` grows.
pub fn build_minor_frame<T: Scalar>(
    t: u32,
    d: usize,
    v: &[f64],
    alpha: &[u32],
) -> Result<FrameFamily<T>> {
    if d < 2 {
        return Err(Error::Parameter("minor frames need d >= 2".into()));
    }
    if t == 0 {
        return Err(Error::Parameter("degree must be at least 1".into()));
    }
    ensure_dims(d, v.len())?;
    ensure_dims(t as usize + d - 1, alpha.len())?;
    for i in 0..v.len() {
        if !(v[i] > 0.0) {
            return Err(Error::Parameter(format!("v[{i}] = {} is not positive", v[i])));
        }
        if v[..i].contains(&v[i]) {
            return Err(Error::Parameter(format!("v value {} repeated", v[i])));
        }
    }
    for j in 0..alpha.len() {
        if alpha[..j].contains(&alpha[j]) {
            return Err(Error::Parameter(format!("alpha value {} repeated", alpha[j])));
        }
    }
    let big = DMatrix::<T>::from_fn(alpha.len(), d, |j, i| cst::<T>(v[i]).powi(alpha[j] as i32));
    let subsets = combinations(alpha.len(), d - 1);
    let mut rows = DMatrix::<T>::zeros(subsets.len(), d);
    for (r, s) in subsets.iter().enumerate() {
        let sub = big.select_rows(s.iter());
        for c in 0..d {
            let minor = sub.clone().remove_column(c).determinant();
            rows[(r, c)] = if c % 2 == 0 { minor } else { -minor };
        }
        if rows.row(r).norm() <= T::zero() {
            return Err(Error::Internal(format!("minor row {r} vanished")));
        }
    }
    let mut fam = FrameFamily::from_unnormalized(rows)?;
    fam.provenance = Some(MinorProvenance {
        t,
        v: v.to_vec(),
        alpha: alpha.to_vec(),
    });
    Ok(fam)
}

/// Exponent vectors `beta` with `|beta| = t` in `d` variables, in
/// lexicographically decreasing order.
pub fn multi_indices(d: usize, t: u32) -> Vec<Vec<u32>> {
    fn rec(d: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() + 1 == d {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for a in (0..=left).rev() {
            cur.push(a);
            rec(d, left - a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if d > 0 {
        rec(d, t, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

/// `t! / prod beta_i!`.
pub fn multinomial(beta: &[u32]) -> f64 {
    let mut acc = 1.0;
    let mut n = 0u32;
    for &b in beta {
        for i in 1..=b {
            n += 1;
            acc = acc * n as f64 / i as f64;
        }
    }
    acc
}

fn monomial<T: Scalar>(x: &[T], beta: &[u32]) -> T {
    x.iter()
        .zip(beta)
        .fold(T::one(), |acc, (&xi, &b)| acc * xi.powi(b as i32))
}

/// Result of [`frame_rank_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRank<T: Scalar> {
    pub full_rank: bool,
    pub rank: usize,
    pub required: usize,
    /// Smallest singular value; zero when there are fewer rows than needed.
    pub sigma_min: T,
}

/// Whether `{(Q_j x)^t}` spans the homogeneous polynomials of degree `t`.
///
/// Row `j` holds `sqrt(multinomial(t, beta)) Q_j^beta`, so the Gram matrix
/// of the rows is `((Q_i Q_j^T)^t)`.
pub fn frame_rank_check<T: Scalar>(frames: &FrameFamily<T>, t: u32) -> FrameRank<T> {
    let betas = multi_indices(frames.dim(), t);
    let n = frames.len();
    let required = betas.len();
    let rows: Vec<Vec<T>> = (0..n).map(|j| frames.row(j)).collect();
    let m = DMatrix::from_fn(n, required, |j, b| {
        cst::<T>(multinomial(&betas[b]).sqrt()) * monomial(&rows[j], &betas[b])
    });
    let sv = m.singular_values();
    let rank = numerical_rank(&sv, default_rank_tol::<T>(n, required));
    let sigma_min = if n < required { T::zero() } else { sv.min() };
    FrameRank {
        full_rank: rank == required,
        rank,
        required,
        sigma_min,
    }
}

/// Discrete probability-like measure on `R^d`: atoms are rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T: Scalar> {
    atoms: DMatrix<T>,
    weights: Vec<T>,
}

impl<T: Scalar> DiscreteMeasure<T> {
    pub fn new(atoms: DMatrix<T>, weights: Vec<T>) -> Result<Self> {
        ensure_dims(atoms.nrows(), weights.len())?;
        Ok(DiscreteMeasure { atoms, weights })
    }

    pub fn dim(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &DMatrix<T> {
        &self.atoms
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `E[X^beta]`.
    pub fn moment(&self, beta: &[u32]) -> T {
        self.atoms
            .row_iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (x, &w)| {
                let x: Vec<T> = x.iter().copied().collect();
                acc + w * monomial(&x, beta)
            })
    }
}

/// `E[(Q_j X)^s]` for each frame vector and `s = 0..=t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedMoments<T: Scalar> {
    /// `values[j][s]`.
    pub values: Vec<Vec<T>>,
    /// Standard errors, present for Monte Carlo estimates.
    pub std_errors: Option<Vec<Vec<T>>>,
}

/// Exact projected moments of a discrete measure.
pub fn project_moments<T: Scalar>(
    frames: &FrameFamily<T>,
    measure: &DiscreteMeasure<T>,
    t: u32,
) -> Result<ProjectedMoments<T>> {
    ensure_dims(frames.dim(), measure.dim())?;
    let proj = frames.rows() * measure.atoms().transpose();
    let values = (0..frames.len())
        .map(|j| {
            (0..=t)
                .map(|s| {
                    measure
                        .weights()
                        .iter()
                        .enumerate()
                        .fold(T::zero(), |acc, (i, &w)| acc + w * proj[(j, i)].powi(s as i32))
                })
                .collect()
        })
        .collect();
    Ok(ProjectedMoments {
        values,
        std_errors: None,
    })
}

/// Monte Carlo projected moments from `samples` draws of `sampler`.
pub fn project_moments_sampled<T: Scalar, R: Rng + ?Sized>(
    frames: &FrameFamily<T>,
    mut sampler: impl FnMut(&mut R) -> DVector<T>,
    samples: usize,
    t: u32,
    rng: &mut R,
) -> Result<ProjectedMoments<T>> {
    if samples < 2 {
        return Err(Error::Parameter("need at least two samples".into()));
    }
    let (n, deg) = (frames.len(), t as usize + 1);
    let mut sum = vec![vec![T::zero(); deg]; n];
    let mut sum2 = vec![vec![T::zero(); deg]; n];
    for _ in 0..samples {
        let x = sampler(rng);
        ensure_dims(frames.dim(), x.len())?;
        let y = frames.rows() * &x;
        for j in 0..n {
            let mut pw = T::one();
            for s in 0..deg {
                sum[j][s] += pw;
                sum2[j][s] += pw * pw;
                pw *= y[j];
            }
        }
    }
    let ns = from_usize::<T>(samples);
    let mut values = sum.clone();
    let mut errs = sum2;
    for j in 0..n {
        for s in 0..deg {
            let mean = sum[j][s] / ns;
            let var = ((errs[j][s] - ns * mean * mean) / (ns - T::one())).max(T::zero());
            values[j][s] = mean;
            errs[j][s] = (var / ns).sqrt();
        }
    }
    Ok(ProjectedMoments {
        values,
        std_errors: Some(errs),
    })
}

/// All monomial moments `E[X^r]`, `|r| <= max_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable<T: Scalar> {
    pub d: usize,
    pub max_degree: u32,
    pub values: BTreeMap<Vec<u32>, T>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> MomentTable<T> {
    pub fn get(&self, r: &[u32]) -> Option<T> {
        self.values.get(r).copied()
    }
}

/// Recovers all monomial moments up to `max_degree` from projected moments
/// by solving, per degree `s`, the least-squares system
/// `sum_beta multinomial(s, beta) Q_j^beta m_beta = E[(Q_j X)^s]`.
pub fn lift_moments<T: Scalar>(
    frames: &FrameFamily<T>,
    projected: &ProjectedMoments<T>,
    max_degree: u32,
) -> Result<MomentTable<T>> {
    ensure_dims(frames.len(), projected.values.len())?;
    for v in &projected.values {
        if v.len() <= max_degree as usize {
            return Err(Error::Parameter(format!(
                "projected moments stop at degree {}, {} requested",
                v.len().saturating_sub(1),
                max_degree
            )));
        }
    }
    let d = frames.dim();
    let rows: Vec<Vec<T>> = (0..frames.len()).map(|j| frames.row(j)).collect();
    let per_degree: Vec<Vec<(Vec<u32>, T)>> = (0..=max_degree)
        .into_par_iter()
        .map(|s| {
            let betas = multi_indices(d, s);
            let mut a = DMatrix::from_fn(rows.len(), betas.len(), |j, b| {
                cst::<T>(multinomial(&betas[b])) * monomial(&rows[j], &betas[b])
            });
            // unit columns: the monomial columns differ in scale by orders
            // of magnitude for minor frames
            let scales: Vec<T> = a
                .column_iter_mut()
                .map(|mut c| {
                    let n = c.norm();
                    if n > T::zero() {
                        c /= n;
                    }
                    n
                })
                .collect();
            let v = DVector::from_fn(rows.len(), |j, _| projected.values[j][s as usize]);
            let (mut m, rank) = lstsq(&a, &v, default_rank_tol::<T>(a.nrows(), a.ncols()));
            for (x, &n) in m.iter_mut().zip(&scales) {
                if n > T::zero() {
                    *x /= n;
                }
            }
            if rank < betas.len() {
                return Err(Error::Underdetermined {
                    degree: s as usize,
                    rank,
                    required: betas.len(),
                });
            }
            Ok(betas.into_iter().zip(m.iter().copied()).collect())
        })
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    if max_degree as usize > d {
        warnings.push(format!(
            "degree {max_degree} exceeds the dimension {d}; recovery relies on the frame condition alone"
        ));
    }
    Ok(MomentTable {
        d,
        max_degree,
        values: per_degree.into_iter().flatten().collect(),
        warnings,
    })
}

/// Extremes of the rescaled squared-distance ratios of a projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JlDistortion<T: Scalar> {
    pub min_ratio: T,
    pub max_ratio: T,
    /// Coincident pairs that were skipped.
    pub duplicates: usize,
}

/// `(d / k) |P (x_i - x_j)|^2 / |x_i - x_j|^2` over pairs `i < j`, with
/// `k = trace(P)` rounded. `P = I` is allowed.
pub fn jl_distortion<T: Scalar>(points: &[DVector<T>], p: &SymMatrix<T>) -> Result<JlDistortion<T>> {
    let d = p.dim();
    let k = to_f64(p.trace()).round();
    if k < 1.0 {
        return Err(Error::Parameter("projection has rank zero".into()));
    }
    let scale = from_usize::<T>(d) / cst::<T>(k);
    let mut lo = cst::<T>(f64::INFINITY);
    let mut hi = cst::<T>(f64::NEG_INFINITY);
    let mut duplicates = 0;
    let mut pairs = 0;
    for i in 0..points.len() {
        ensure_dims(d, points[i].len())?;
        for j in (i + 1)..points.len() {
            let diff = &points[i] - &points[j];
            let n2 = diff.norm_squared();
            if n2 <= T::zero() {
                duplicates += 1;
                continue;
            }
            let r = scale * (p.as_matrix() * &diff).norm_squared() / n2;
            lo = lo.min(r);
            hi = hi.max(r);
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::Parameter("need at least two distinct points".into()));
    }
    Ok(JlDistortion {
        min_ratio: lo,
        max_ratio: hi,
        duplicates,
    })
}
