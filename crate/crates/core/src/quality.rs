//! Covering radius estimates, integration-error measurements and rate fits.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cubature::WeightedCubature;
use crate::error::{Error, Result};
use crate::grassmann::{sample_stiefel, sample_uniform, Projector};
use crate::rng;
use crate::scalar::{cst, from_usize, to_f64, Scalar};

/// Squared chordal distance between equal-rank projectors.
fn chordal_sq<T: Scalar>(p: &Projector<T>, r: &Projector<T>) -> T {
    let two = cst::<T>(2.0);
    (two * from_usize::<T>(p.rank()) - two * p.trace_with(r)).max(T::zero())
}

fn nearest_sq<T: Scalar>(p: &Projector<T>, points: &[Projector<T>]) -> T {
    points
        .iter()
        .map(|q| chordal_sq(p, q))
        .fold(T::max_value().unwrap_or_else(T::one), |a, b| a.min(b))
}

/// Draws `n` uniform probes on `G(k, d)`.
pub fn sample_probes<T: Scalar, R: Rng + ?Sized>(
    d: usize,
    k: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Projector<T>>> {
    (0..n).map(|_| sample_uniform(d, k, rng)).collect()
}

/// Covering radius estimate and the probe attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringEstimate<T: Scalar> {
    pub rho_hat: T,
    pub worst_probe: Projector<T>,
}

/// `max` over probes of the chordal distance to the nearest point.
pub fn covering_radius_with_probes<T: Scalar>(
    points: &[Projector<T>],
    probes: &[Projector<T>],
) -> Result<CoveringEstimate<T>> {
    if points.is_empty() || probes.is_empty() {
        return Err(Error::Parameter("points and probes must be nonempty".into()));
    }
    for q in points.iter().chain(probes) {
        crate::error::ensure_dims(points[0].dim(), q.dim())?;
        crate::error::ensure_dims(points[0].rank(), q.rank())?;
    }
    let (idx, worst) = probes
        .par_iter()
        .map(|p| nearest_sq(p, points))
        .enumerate()
        .reduce(
            || (usize::MAX, -T::one()),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(CoveringEstimate {
        rho_hat: worst.sqrt(),
        worst_probe: probes[idx].clone(),
    })
}

/// Covering radius from `n_probe` uniform probes; an underestimate.
pub fn covering_radius_estimate<T: Scalar, R: Rng + ?Sized>(
    points: &[Projector<T>],
    n_probe: usize,
    rng: &mut R,
) -> Result<CoveringEstimate<T>> {
    let first = points
        .first()
        .ok_or_else(|| Error::Parameter("points must be nonempty".into()))?;
    let probes = sample_probes(first.dim(), first.rank(), n_probe, rng)?;
    covering_radius_with_probes(points, &probes)
}

/// Random-perturbation hill climb from `start` that increases the distance
/// to the nearest point. Returns the improved estimate (never smaller).
pub fn polish_covering<T: Scalar, R: Rng + ?Sized>(
    points: &[Projector<T>],
    start: &Projector<T>,
    iterations: usize,
    rng: &mut R,
) -> Result<CoveringEstimate<T>> {
    let mut best = start.clone();
    let mut best_val = nearest_sq(start, points);
    let mut step = cst::<T>(0.1);
    let (d, k) = (start.dim(), start.rank());
    let mut q = crate::grassmann::projector_to_stiefel(start)?;
    for _ in 0..iterations {
        let dir = sample_stiefel::<T, R>(d, k, rng)?;
        let moved = crate::cubature::retract(&q, &(dir.as_matrix() * step));
        let p = Projector::from_orthonormal_columns(&moved.as_matrix().transpose());
        let v = nearest_sq(&p, points);
        if v > best_val {
            best_val = v;
            best = p;
            q = moved;
        } else {
            step *= cst(0.97);
        }
    }
    Ok(CoveringEstimate {
        rho_hat: best_val.sqrt(),
        worst_probe: best,
    })
}

/// `sum_j w_j f(P_j)`.
pub fn integrate_with_cubature<T: Scalar>(
    c: &WeightedCubature<T>,
    f: impl Fn(&Projector<T>) -> T,
) -> T {
    c.points()
        .iter()
        .zip(c.weights())
        .fold(T::zero(), |acc, (p, &w)| acc + w * f(p))
}

/// Mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

/// Monte Carlo integral of `f` over `G(k, d)` with `samples` uniform points.
/// Chunks run on independent streams of `seed`.
pub fn monte_carlo_reference<T: Scalar>(
    f: impl Fn(&Projector<T>) -> T + Sync,
    k: usize,
    d: usize,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if samples < 2 {
        return Err(Error::Parameter("need at least two samples".into()));
    }
    const CHUNK: usize = 10_000;
    let chunks = samples.div_ceil(CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(seed, c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            let mut s = (0.0, 0.0);
            for _ in 0..len {
                let p = sample_uniform::<T, _>(d, k, &mut r)?;
                let v = to_f64(f(&p));
                s.0 += v;
                s.1 += v * v;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(Estimate {
        mean,
        std_err: (var / n).sqrt(),
    })
}

/// Mean and standard deviation over `trials` of the absolute error of the
/// `n`-point equal-weight random estimator. Trial `i` uses stream `i`.
pub fn random_baseline<T: Scalar>(
    f: impl Fn(&Projector<T>) -> T + Sync,
    k: usize,
    d: usize,
    n: usize,
    trials: usize,
    reference: f64,
    seed: u64,
) -> Result<Estimate> {
    if n == 0 || trials == 0 {
        return Err(Error::Parameter("need n >= 1 and trials >= 1".into()));
    }
    let errs: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let mut s = 0.0;
            for _ in 0..n {
                s += to_f64(f(&sample_uniform::<T, _>(d, k, &mut r)?));
            }
            Ok((s / n as f64 - reference).abs())
        })
        .collect::<Result<_>>()?;
    let mean = errs.iter().sum::<f64>() / trials as f64;
    let var = if trials > 1 {
        errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
    } else {
        0.0
    };
    Ok(Estimate {
        mean,
        std_err: var.sqrt(),
    })
}

/// One row of an integration-error experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub t: u32,
    pub n: usize,
    #[serde(skip)]
    pub function: String,
    pub cubature_error: f64,
    pub random_mean: f64,
    pub random_std: f64,
    #[serde(skip)]
    pub reference: f64,
    #[serde(skip)]
    pub reference_uncertainty: f64,
    pub rho_hat: Option<f64>,
}

/// Settings for [`integration_error_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub function: String,
    pub reference: Estimate,
    /// Random-baseline trials per family member.
    pub trials: usize,
    /// Probes for the covering column; zero leaves it empty.
    pub n_probe: usize,
    pub seed: u64,
}

/// Cubature error and matched random baseline for each family member.
/// The covering column, if requested, uses one probe set for all members.
pub fn integration_error_experiment<T: Scalar>(
    family: &[WeightedCubature<T>],
    f: impl Fn(&Projector<T>) -> T + Sync,
    opts: &ExperimentOptions,
) -> Result<Vec<ErrorReport>> {
    let Some(first) = family.first() else {
        return Ok(Vec::new());
    };
    let probes = if opts.n_probe > 0 {
        let mut r = rng::stream(opts.seed, u64::MAX);
        sample_probes::<T, _>(first.dim(), first.rank(), opts.n_probe, &mut r)?
    } else {
        Vec::new()
    };
    family
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let value = to_f64(integrate_with_cubature(c, &f));
            let base = random_baseline(
                &f,
                c.rank(),
                c.dim(),
                c.len(),
                opts.trials,
                opts.reference.mean,
                opts.seed.wrapping_add(i as u64 + 1),
            )?;
            let rho_hat = if probes.is_empty() {
                None
            } else {
                Some(to_f64(covering_radius_with_probes(c.points(), &probes)?.rho_hat))
            };
            Ok(ErrorReport {
                t: c.degree(),
                n: c.len(),
                function: opts.function.clone(),
                cubature_error: (value - opts.reference.mean).abs(),
                random_mean: base.mean,
                random_std: base.std_err,
                reference: opts.reference.mean,
                reference_uncertainty: opts.reference.std_err,
                rho_hat,
            })
        })
        .collect()
}

/// Writes reports as CSV with columns
/// `t, n, cubature_error, random_mean, random_std, rho_hat`.
pub fn write_error_reports<W: Write>(out: W, reports: &[ErrorReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r).map_err(|e| Error::Internal(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))
}

/// Least-squares line through `(ln x, ln y)`: `(slope, intercept)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Parameter("need at least two (x, y) pairs".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Parameter("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("x values must not all coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Fitted decay of the covering radius.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringRate {
    pub slope: f64,
    pub intercept: f64,
    /// `(n, rho_hat)` per family member.
    pub samples: Vec<(usize, f64)>,
}

/// Slope of `ln rho_hat` against `ln n` over a family of point sets, all
/// measured against the same `n_probe` probes drawn from `seed`. The
/// optimal rate is `-1 / (k (d - k))`.
pub fn covering_rate_experiment<T: Scalar>(
    family: &[Vec<Projector<T>>],
    n_probe: usize,
    seed: u64,
) -> Result<CoveringRate> {
    if family.len() < 3 {
        return Err(Error::Parameter(format!(
            "covering rate needs at least 3 family members, got {}",
            family.len()
        )));
    }
    let first = family[0]
        .first()
        .ok_or_else(|| Error::Parameter("family members must be nonempty".into()))?;
    let mut r = rng::seeded(seed);
    let probes = sample_probes::<T, _>(first.dim(), first.rank(), n_probe, &mut r)?;
    let samples = family
        .iter()
        .map(|pts| {
            let est = covering_radius_with_probes(pts, &probes)?;
            Ok((pts.len(), to_f64(est.rho_hat)))
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = samples.iter().map(|s| s.0 as f64).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (slope, intercept) = loglog_slope(&xs, &ys)?;
    Ok(CoveringRate {
        slope,
        intercept,
        samples,
    })
}
