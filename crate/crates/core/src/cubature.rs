//! The `t`-fusion frame potential, its gradient on products of Stiefel
//! manifolds, Riemannian minimization and the equality certificate.
//!
//! For weights summing to one,
//! `FFP = sum_{i,j} w_i w_j trace(P_i P_j)^t >= B(t, k, d)` with equality
//! exactly when the weighted points integrate every polynomial of degree
//! `t` on `G(k, d)`. [`certify_cubature`] reports `FFP - B`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{ensure_dims, Error, Result};
use crate::grassmann::{sample_stiefel, Projector, StiefelFrame};
use crate::linalg::{lstsq, numerical_rank, orthonormal_columns};
use crate::rng;
use crate::scalar::{cst, from_usize, to_f64, Scalar};
use crate::zonal::ffp_lower_bound;

/// Provenance of a constructed cubature.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CubatureMetadata {
    pub seed: u64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    /// Index of the restart that produced the points.
    pub restart: usize,
    /// Degrees for which the certificate holds (all `t' <= t` once `t` is
    /// certified, since `trace(P) = k` is constant on `G(k, d)`).
    pub certified_degrees: Vec<u32>,
}

/// Points on `G(k, d)` with real weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCubature<T: Scalar> {
    d: usize,
    k: usize,
    degree: u32,
    points: Vec<Projector<T>>,
    weights: Vec<T>,
    /// `FFP - B` at `degree`.
    pub certificate_residual: T,
    pub metadata: CubatureMetadata,
}

impl<T: Scalar> WeightedCubature<T> {
    /// Validates shapes and the weight sum and fills in the certificate
    /// residual for `degree`.
    pub fn new(points: Vec<Projector<T>>, weights: Vec<T>, degree: u32) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::Parameter("cubature needs at least one point".into()))?;
        let (d, k) = (first.dim(), first.rank());
        ensure_dims(points.len(), weights.len())?;
        for p in &points {
            ensure_dims(d, p.dim())?;
            ensure_dims(k, p.rank())?;
        }
        let sum = weights.iter().fold(T::zero(), |a, &w| a + w);
        if (sum - T::one()).abs() > T::weight_tol() {
            return Err(Error::Validation(format!("weights sum to {sum:?}, not 1")));
        }
        let residual = ffp(&points, &weights, degree)? - lower_bound::<T>(degree, k, d)?;
        Ok(WeightedCubature {
            d,
            k,
            degree,
            points,
            weights,
            certificate_residual: residual,
            metadata: CubatureMetadata::default(),
        })
    }

    /// Equal weights `1 / n`.
    pub fn equal_weights(points: Vec<Projector<T>>, degree: u32) -> Result<Self> {
        let w = T::one() / from_usize::<T>(points.len().max(1));
        let n = points.len();
        Self::new(points, vec![w; n], degree)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Projector<T>] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }
}

fn lower_bound<T: Scalar>(t: u32, k: usize, d: usize) -> Result<T> {
    Ok(cst(ffp_lower_bound::<f64>(t, k, d)?))
}

fn check_lengths<T: Scalar>(points: &[Projector<T>], weights: &[T]) -> Result<()> {
    ensure_dims(points.len(), weights.len())?;
    if let Some(first) = points.first() {
        for p in points {
            ensure_dims(first.dim(), p.dim())?;
        }
    }
    Ok(())
}

/// `sum_{i,j} w_i w_j trace(P_i P_j)^t`.
pub fn ffp<T: Scalar>(points: &[Projector<T>], weights: &[T], t: u32) -> Result<T> {
    check_lengths(points, weights)?;
    let mats: Vec<&DMatrix<T>> = points.iter().map(|p| p.as_matrix()).collect();
    Ok(ffp_matrices(&mats, weights, t))
}

fn ffp_matrices<T: Scalar>(mats: &[&DMatrix<T>], weights: &[T], t: u32) -> T {
    let mut total = T::zero();
    for i in 0..mats.len() {
        total += weights[i] * weights[i] * mats[i].dot(mats[i]).powi(t as i32);
        let mut row = T::zero();
        for j in (i + 1)..mats.len() {
            row += weights[j] * mats[i].dot(mats[j]).powi(t as i32);
        }
        total += cst::<T>(2.0) * weights[i] * row;
    }
    total
}

fn frame_projectors<T: Scalar>(frames: &[StiefelFrame<T>]) -> Vec<DMatrix<T>> {
    frames
        .iter()
        .map(|q| q.as_matrix().transpose() * q.as_matrix())
        .collect()
}

/// Euclidean gradient of the potential with respect to each `Q_i`:
/// `G_i = 4 t w_i sum_j w_j trace(P_i P_j)^(t-1) Q_i P_j`.
pub fn ffp_gradient<T: Scalar>(
    frames: &[StiefelFrame<T>],
    weights: &[T],
    t: u32,
) -> Result<Vec<DMatrix<T>>> {
    ensure_dims(frames.len(), weights.len())?;
    if t == 0 {
        return Err(Error::Parameter("degree must be at least 1".into()));
    }
    if let Some(first) = frames.first() {
        for q in frames {
            ensure_dims(first.cols(), q.cols())?;
        }
    }
    let ps = frame_projectors(frames);
    Ok(gradient_from_projectors(frames, &ps, weights, t))
}

fn gradient_from_projectors<T: Scalar>(
    frames: &[StiefelFrame<T>],
    ps: &[DMatrix<T>],
    weights: &[T],
    t: u32,
) -> Vec<DMatrix<T>> {
    let d = ps.first().map_or(0, |p| p.nrows());
    let scale = cst::<T>(4.0) * from_usize::<T>(t as usize);
    frames
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let mut s = DMatrix::<T>::zeros(d, d);
            for (j, pj) in ps.iter().enumerate() {
                let c = ps[i].dot(pj).powi(t as i32 - 1);
                s += pj * (weights[j] * c);
            }
            q.as_matrix() * s * (scale * weights[i])
        })
        .collect()
}

/// Projection of a Euclidean gradient onto the tangent space of the Stiefel
/// manifold (orthonormal rows) at `q`: `G - sym(G Q^T) Q`.
pub fn tangent_projection<T: Scalar>(q: &StiefelFrame<T>, g: &DMatrix<T>) -> DMatrix<T> {
    let qm = q.as_matrix();
    let a = g * qm.transpose();
    let sym = (&a + a.transpose()) * cst::<T>(0.5);
    g - sym * qm
}

/// QR retraction of `q + xi` back onto the Stiefel manifold.
pub fn retract<T: Scalar>(q: &StiefelFrame<T>, xi: &DMatrix<T>) -> StiefelFrame<T> {
    let moved = (q.as_matrix() + xi).transpose();
    StiefelFrame::new_unchecked(orthonormal_columns(moved).transpose())
}

/// Riemannian gradient norm of the potential at the given frames.
pub fn riemannian_gradient_norm<T: Scalar>(
    frames: &[StiefelFrame<T>],
    weights: &[T],
    t: u32,
) -> Result<T> {
    let g = ffp_gradient(frames, weights, t)?;
    Ok(frames
        .iter()
        .zip(&g)
        .fold(T::zero(), |acc, (q, gi)| acc + tangent_projection(q, gi).norm_squared())
        .sqrt())
}

/// Options for [`minimize_ffp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOptions {
    /// Stop once the tangent gradient norm falls below this.
    pub g_tol: f64,
    pub max_iter: usize,
    /// Independent random starts; the lowest residual wins.
    pub restarts: usize,
    /// Armijo backtracking: first trial step, shrink factor and
    /// sufficient-decrease constant.
    pub initial_step: f64,
    pub shrink: f64,
    pub armijo: f64,
    /// Certification tolerance on `FFP - B`.
    pub cert_tol: f64,
    /// Rounds of weight re-optimization (with points fixed) followed by
    /// further descent. Zero keeps the weights at `1 / n`.
    pub weight_rounds: usize,
    /// Start each backtracking search from the Barzilai-Borwein step
    /// instead of `initial_step` (which is still used on the first
    /// iteration).
    pub bb_step: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            g_tol: 1e-10,
            max_iter: 100_000,
            restarts: 5,
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            cert_tol: 1e-8,
            weight_rounds: 0,
            bb_step: true,
        }
    }
}

struct RunOutcome<T: Scalar> {
    frames: Vec<StiefelFrame<T>>,
    weights: Vec<T>,
    value: T,
    grad_norm: T,
    iterations: usize,
    converged: bool,
}

fn descend<T: Scalar>(
    mut frames: Vec<StiefelFrame<T>>,
    weights: &[T],
    t: u32,
    opts: &MinimizeOptions,
    budget: usize,
) -> (Vec<StiefelFrame<T>>, T, T, usize, bool) {
    let armijo = cst::<T>(opts.armijo);
    let shrink = cst::<T>(opts.shrink);
    let g_tol = cst::<T>(opts.g_tol);
    let min_step = T::eps() * T::eps();
    let (step_lo, step_hi) = (cst::<T>(1e-10), cst::<T>(1e10));
    let mut ps = frame_projectors(&frames);
    let mut value = {
        let refs: Vec<&DMatrix<T>> = ps.iter().collect();
        ffp_matrices(&refs, weights, t)
    };
    let mut prev: Option<(Vec<DMatrix<T>>, Vec<DMatrix<T>>)> = None;
    let mut iterations = 0;
    loop {
        let egrad = gradient_from_projectors(&frames, &ps, weights, t);
        let rgrad: Vec<DMatrix<T>> = frames
            .iter()
            .zip(&egrad)
            .map(|(q, g)| tangent_projection(q, g))
            .collect();
        let gn2 = rgrad.iter().fold(T::zero(), |a, g| a + g.norm_squared());
        let gnorm = gn2.sqrt();
        if gnorm <= g_tol {
            return (frames, value, gnorm, iterations, true);
        }
        if iterations >= budget {
            return (frames, value, gnorm, iterations, false);
        }
        let mut step = cst::<T>(opts.initial_step);
        if opts.bb_step {
            if let Some((pq, pg)) = &prev {
                let (mut ss, mut sy) = (T::zero(), T::zero());
                for i in 0..frames.len() {
                    let s = frames[i].as_matrix() - &pq[i];
                    let y = &rgrad[i] - &pg[i];
                    ss += s.norm_squared();
                    sy += s.dot(&y);
                }
                if sy > T::zero() {
                    step = (ss / sy).max(step_lo).min(step_hi);
                }
            }
        }
        loop {
            let cand: Vec<StiefelFrame<T>> = frames
                .iter()
                .zip(&rgrad)
                .map(|(q, g)| retract(q, &(g * (-step))))
                .collect();
            let cps = frame_projectors(&cand);
            let refs: Vec<&DMatrix<T>> = cps.iter().collect();
            let cv = ffp_matrices(&refs, weights, t);
            if cv <= value - armijo * step * gn2 {
                if opts.bb_step {
                    let old: Vec<DMatrix<T>> = frames.iter().map(|q| q.as_matrix().clone()).collect();
                    prev = Some((old, rgrad));
                }
                frames = cand;
                ps = cps;
                value = cv;
                break;
            }
            step *= shrink;
            if step < min_step {
                // no representable decrease left: stationary at working
                // precision if the predicted decrease is below resolution
                let floor = cst::<T>(100.0) * T::eps() * value.abs().max(T::one());
                let at_floor = gn2 * cst::<T>(opts.initial_step) <= floor;
                return (frames, value, gnorm, iterations, at_floor);
            }
        }
        iterations += 1;
    }
}

fn single_run<T: Scalar>(
    n: usize,
    k: usize,
    d: usize,
    t: u32,
    opts: &MinimizeOptions,
    seed: u64,
    restart: usize,
) -> Result<RunOutcome<T>> {
    let mut rng = rng::stream(seed, restart as u64);
    let frames = (0..n)
        .map(|_| sample_stiefel::<T, _>(d, k, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let mut weights = vec![T::one() / from_usize::<T>(n); n];
    let (mut frames, mut value, mut gnorm, mut iters, mut conv) =
        descend(frames, &weights, t, opts, opts.max_iter);
    for _ in 0..opts.weight_rounds {
        let ps: Vec<Projector<T>> = frames
            .iter()
            .map(|q| Projector::from_orthonormal_columns(&q.as_matrix().transpose()))
            .collect();
        weights = solve_weights(&ps, t)?.weights;
        let budget = opts.max_iter.saturating_sub(iters);
        let (f, v, g, it, c) = descend(frames, &weights, t, opts, budget);
        frames = f;
        value = v;
        gnorm = g;
        iters += it;
        conv = c;
    }
    Ok(RunOutcome {
        frames,
        weights,
        value,
        grad_norm: gnorm,
        iterations: iters,
        converged: conv,
    })
}

/// Numerically constructs a degree-`t` cubature of `n` points on `G(k, d)`
/// by Riemannian gradient descent on `(V(k, d))^n` with Armijo backtracking
/// and QR retraction.
///
/// Restart `r` draws its starting frames from stream `r` of `seed`, so the
/// result depends only on `(seed, opts)`. Non-convergence is reported in
/// the metadata rather than as an error.
pub fn minimize_ffp<T: Scalar>(
    n: usize,
    k: usize,
    d: usize,
    t: u32,
    opts: &MinimizeOptions,
    seed: u64,
) -> Result<WeightedCubature<T>> {
    if n == 0 {
        return Err(Error::Parameter("need at least one point".into()));
    }
    if t == 0 {
        return Err(Error::Parameter("degree must be at least 1".into()));
    }
    let bound = lower_bound::<T>(t, k, d)?;
    let restarts = opts.restarts.max(1);
    let runs: Vec<RunOutcome<T>> = (0..restarts)
        .into_par_iter()
        .map(|r| single_run::<T>(n, k, d, t, opts, seed, r))
        .collect::<Result<_>>()?;
    let (best_idx, best) = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.value
                .partial_cmp(&b.value)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ia.cmp(ib))
        })
        .expect("at least one restart");
    let points: Vec<Projector<T>> = best
        .frames
        .iter()
        .map(|q| Projector::from_orthonormal_columns(&q.as_matrix().transpose()))
        .collect();
    let mut cub = WeightedCubature::new(points, best.weights, t)?;
    debug_assert!((cub.certificate_residual - (best.value - bound)).abs() < cst(1e-9));
    let cert = certify_cubature(&cub, t, cst(opts.cert_tol))?;
    cub.metadata = CubatureMetadata {
        seed,
        iterations: best.iterations,
        grad_norm: to_f64(best.grad_norm),
        converged: best.converged,
        restart: best_idx,
        certified_degrees: if cert.certified { (1..=t).collect() } else { Vec::new() },
    };
    Ok(cub)
}

/// Outcome of [`certify_cubature`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate<T: Scalar> {
    /// `FFP - B(t, k, d)`; nonnegative up to round-off.
    pub residual: T,
    pub certified: bool,
}

/// Compares the potential with its lower bound at degree `t`.
///
/// Certified means `residual <= tol + n^2 eps`, the second term absorbing
/// round-off in the `n^2`-term sum.
pub fn certify_cubature<T: Scalar>(
    c: &WeightedCubature<T>,
    t: u32,
    tol: T,
) -> Result<Certificate<T>> {
    let residual = ffp(&c.points, &c.weights, t)? - lower_bound::<T>(t, c.k, c.d)?;
    let n = from_usize::<T>(c.len());
    let certified = residual <= tol + n * n * T::eps();
    Ok(Certificate { residual, certified })
}

/// Weights minimizing the potential for fixed points.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSolution<T: Scalar> {
    pub weights: Vec<T>,
    /// The kernel matrix `(trace(P_i P_j)^t)` is singular; the least-norm
    /// solution was taken.
    pub rank_deficient: bool,
}

/// Minimizes `w^T M w`, `M_ij = trace(P_i P_j)^t`, subject to
/// `sum w = 1` through the KKT system. Weights may come out negative.
pub fn solve_weights<T: Scalar>(points: &[Projector<T>], t: u32) -> Result<WeightSolution<T>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::Parameter("need at least one point".into()));
    }
    let m = DMatrix::from_fn(n, n, |i, j| points[i].trace_with(&points[j]).powi(t as i32));
    let mut kkt = DMatrix::zeros(n + 1, n + 1);
    kkt.view_mut((0, 0), (n, n)).copy_from(&m);
    for i in 0..n {
        kkt[(i, n)] = T::one();
        kkt[(n, i)] = T::one();
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = T::one();
    let tol = from_usize::<T>(n + 1) * T::eps() * cst(16.0);
    let (sol, _) = lstsq(&kkt, &rhs, tol);
    let sv = m.singular_values();
    let rank_deficient = numerical_rank(&sv, tol) < n;
    Ok(WeightSolution {
        weights: sol.rows(0, n).iter().copied().collect(),
        rank_deficient,
    })
}
