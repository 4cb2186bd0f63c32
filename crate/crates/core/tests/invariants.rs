use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use grasscub::cubature::{ffp, ffp_gradient, tangent_projection};
use grasscub::grassmann::{chordal_distance, sample_stiefel, sample_uniform, Projector, StiefelFrame};
use grasscub::moments::{
    build_minor_frame, default_minor_parameters, frame_rank_check, lift_moments, multi_indices, project_moments,
    prony_recover_1d, DiscreteMeasure, SparseMeasure1D,
};
use grasscub::phase::{feasibility_pocs, measure, MeasurementSet, PocsOptions};
use grasscub::quality::covering_radius_with_probes;
use grasscub::rng::seeded;
use grasscub::zonal::ffp_lower_bound;

fn shape() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=5).prop_flat_map(|d| (Just(d), 1..d))
}

fn random_weights(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|w| w / s).collect()
}

/// `sum_ij w_i w_j trace(Q_i^T Q_i Q_j^T Q_j)^t` for arbitrary (not
/// necessarily orthonormal) `Q_i`.
fn potential_of_frames(qs: &[DMatrix<f64>], w: &[f64], t: u32) -> f64 {
    let ps: Vec<DMatrix<f64>> = qs.iter().map(|q| q.transpose() * q).collect();
    let mut s = 0.0;
    for i in 0..ps.len() {
        for j in 0..ps.len() {
            s += w[i] * w[j] * ps[i].dot(&ps[j]).powi(t as i32);
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn potential_dominates_lower_bound(t in 1u32..=3, (d, k) in shape(), n in 1usize..8, seed in any::<u64>()) {
        let mut r = seeded(seed);
        let pts: Vec<Projector<f64>> = (0..n).map(|_| sample_uniform(d, k, &mut r).unwrap()).collect();
        let w = random_weights(n, &mut r);
        let v = ffp(&pts, &w, t).unwrap();
        let b = ffp_lower_bound::<f64>(t, k, d).unwrap();
        prop_assert!(v >= b - 1e-12, "FFP {v} below bound {b}");
    }

    #[test]
    fn projector_samples_are_projectors((d, k) in shape(), seed in any::<u64>()) {
        let p = sample_uniform::<f64, _>(d, k, &mut seeded(seed)).unwrap();
        let m = p.as_matrix();
        prop_assert!((m * m - m).norm() < 1e-12);
        prop_assert!((m - m.transpose()).norm() < 1e-14);
        prop_assert!((m.trace() - k as f64).abs() < 1e-12);
    }

    #[test]
    fn chordal_distance_is_a_metric((d, k) in shape(), seed in any::<u64>()) {
        let mut r = seeded(seed);
        let [a, b, c]: [Projector<f64>; 3] = std::array::from_fn(|_| sample_uniform(d, k, &mut r).unwrap());
        let ab = chordal_distance(&a, &b).unwrap();
        prop_assert!((ab - chordal_distance(&b, &a).unwrap()).abs() < 1e-14);
        prop_assert!(chordal_distance(&a, &a).unwrap() < 1e-14);
        prop_assert!(ab <= chordal_distance(&a, &c).unwrap() + chordal_distance(&c, &b).unwrap() + 1e-12);
        let max = (2.0 * k.min(d - k) as f64).sqrt();
        prop_assert!(ab <= max + 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences(t in 1u32..=3, (d, k) in shape(), n in 1usize..5, seed in any::<u64>()) {
        let mut r = seeded(seed);
        let frames: Vec<StiefelFrame<f64>> = (0..n).map(|_| sample_stiefel(d, k, &mut r).unwrap()).collect();
        let w = random_weights(n, &mut r);
        let g = ffp_gradient(&frames, &w, t).unwrap();
        let dir: Vec<DMatrix<f64>> = (0..n).map(|_| DMatrix::from_fn(k, d, |_, _| r.random_range(-1.0..1.0))).collect();
        let h = 1e-6;
        let shifted = |s: f64| -> Vec<DMatrix<f64>> {
            frames.iter().zip(&dir).map(|(q, e)| q.as_matrix() + e * s).collect()
        };
        let fd = (potential_of_frames(&shifted(h), &w, t) - potential_of_frames(&shifted(-h), &w, t)) / (2.0 * h);
        let analytic: f64 = g.iter().zip(&dir).map(|(gi, e)| gi.dot(e)).sum();
        prop_assert!((fd - analytic).abs() <= 1e-5 * analytic.abs().max(1.0), "{fd} vs {analytic}");
    }

    #[test]
    fn tangent_projection_is_tangent((d, k) in shape(), seed in any::<u64>()) {
        let mut r = seeded(seed);
        let q = sample_stiefel::<f64, _>(d, k, &mut r).unwrap();
        let g = DMatrix::from_fn(k, d, |_, _| r.random_range(-1.0..1.0));
        let xi = tangent_projection(&q, &g);
        let a = &xi * q.as_matrix().transpose();
        prop_assert!((&a + a.transpose()).norm() < 1e-12);
        let again = tangent_projection(&q, &xi);
        prop_assert!((again - &xi).norm() < 1e-12);
    }

    #[test]
    fn measurements_are_sign_invariant((d, k) in shape(), seed in any::<u64>()) {
        let mut r = seeded(seed);
        let ps: Vec<Projector<f64>> = (0..6).map(|_| sample_uniform(d, k, &mut r).unwrap()).collect();
        let x = DVector::from_fn(d, |_, _| r.random_range(-2.0..2.0));
        let a = measure(&x, ps.clone(), true).unwrap();
        let b = measure(&-&x, ps, true).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn covering_radius_does_not_grow_with_more_points((d, k) in shape(), n in 1usize..6, seed in any::<u64>()) {
        let mut r = seeded(seed);
        let pts: Vec<Projector<f64>> = (0..n + 3).map(|_| sample_uniform(d, k, &mut r).unwrap()).collect();
        let probes: Vec<Projector<f64>> = (0..200).map(|_| sample_uniform(d, k, &mut r).unwrap()).collect();
        let small = covering_radius_with_probes(&pts[..n], &probes).unwrap().rho_hat;
        let large = covering_radius_with_probes(&pts, &probes).unwrap().rho_hat;
        prop_assert!(large <= small);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn prony_round_trip(m in 1usize..=3, seed in any::<u64>()) {
        let mut r = seeded(seed);
        let nodes: Vec<f64> = (0..m).map(|_| r.random_range(-1.0..=1.0)).collect();
        let weights: Vec<f64> = (0..m).map(|_| r.random_range(0.1..=1.0)).collect();
        let mu = SparseMeasure1D::new(nodes, weights).unwrap();
        prop_assume!(mu.min_separation() >= 0.05);
        let rec = prony_recover_1d(&mu.moments(2 * m), m).unwrap();
        let mut want: Vec<(f64, f64)> = mu.nodes().iter().copied().zip(mu.weights().iter().copied()).collect();
        want.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let got: Vec<(f64, f64)> = rec.measure.nodes().iter().copied().zip(rec.measure.weights().iter().copied()).collect();
        for ((x, a), (y, b)) in got.iter().zip(&want) {
            prop_assert!((x - y).abs() < 1e-7 && (a - b).abs() < 1e-7, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn lifting_round_trip(d in 2usize..=4, t in 1u32..=4, atoms in 1usize..=5, seed in any::<u64>()) {
        let mut r = seeded(seed);
        let (v, a) = default_minor_parameters(t, d);
        let f = build_minor_frame::<f64>(t, d, &v, &a).unwrap();
        let x = DMatrix::from_fn(atoms, d, |_, _| r.random_range(-1.0..=1.0));
        let m = DiscreteMeasure::new(x, random_weights(atoms, &mut r)).unwrap();
        let table = lift_moments(&f, &project_moments(&f, &m, t).unwrap(), t).unwrap();
        // the degree-4 system at d = 4 amplifies rounding in the data to ~1e-8
        let tol = if d == 4 && t == 4 { 1e-7 } else { 1e-8 };
        for s in 0..=t {
            for beta in multi_indices(d, s) {
                let err = (table.get(&beta).unwrap() - m.moment(&beta)).abs();
                prop_assert!(err <= tol, "beta {beta:?}: error {err:e}");
            }
        }
    }

    #[test]
    fn lifting_lower_degree_from_higher_frame(d in 2usize..=4, t in 2u32..=4, seed in any::<u64>()) {
        let mut r = seeded(seed);
        let (v, a) = default_minor_parameters(t, d);
        let f = build_minor_frame::<f64>(t, d, &v, &a).unwrap();
        prop_assert!(frame_rank_check(&f, t - 1).full_rank);
        let x = DMatrix::from_fn(3, d, |_, _| r.random_range(-1.0..=1.0));
        let m = DiscreteMeasure::new(x, random_weights(3, &mut r)).unwrap();
        let table = lift_moments(&f, &project_moments(&f, &m, t).unwrap(), t - 1).unwrap();
        prop_assert_eq!(table.max_degree, t - 1);
        for beta in multi_indices(d, t - 1) {
            prop_assert!((table.get(&beta).unwrap() - m.moment(&beta)).abs() <= 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn pocs_convergence_is_honest(d in 3usize..=6, k in 1usize..=2, extra in 0usize..10, seed in any::<u64>()) {
        let mut r = seeded(seed);
        let n = 2 * d + extra;
        let ps: Vec<Projector<f64>> = (0..n).map(|_| sample_uniform(d, k, &mut r).unwrap()).collect();
        let x = DVector::from_fn(d, |_, _| r.random_range(-1.0..=1.0));
        let ms: MeasurementSet<f64> = measure(&x, ps, true).unwrap();
        let opts = PocsOptions { max_iter: 2_000, ..Default::default() };
        let out = feasibility_pocs(&ms, &opts).unwrap();
        let eig = out.matrix.as_matrix().clone().symmetric_eigen();
        prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -opts.tol));
        if out.converged {
            let norm_sq = ms.norm_sq.unwrap();
            let scale = ms.values.iter().fold(norm_sq.max(1.0), |a, &b| a.max(b));
            for (p, &b) in ms.projectors.iter().zip(&ms.values) {
                prop_assert!((p.as_matrix().dot(out.matrix.as_matrix()) - b).abs() <= opts.tol * scale);
            }
            prop_assert!((out.matrix.trace() - norm_sq).abs() <= opts.tol * scale);
        }
    }
}
