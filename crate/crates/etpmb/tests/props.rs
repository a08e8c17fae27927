//! Property tests for the algebraic invariants of the densities, the GP
//! kernel, fusion, assignment, and the set metric.

use nalgebra::{DMatrix, DVector, Vector2};
use proptest::prelude::*;

use etpmb::assignment::{brute_force, solve, CostMatrix};
use etpmb::fusion::{fuse_bernoullis, fuse_gaussians, split_ppp};
use etpmb::gp::{kernel_eval, GpHyperParams, GpModel};
use etpmb::metrics::{gospa, GospaParams};
use etpmb::rfs::{
    gamma_mean, marginal_center, BernoulliComponent, EtState, GammaDensity, GaussianDensity,
    PoissonComponent, PoissonIntensity, TrackId,
};

fn hypers() -> GpHyperParams {
    GpHyperParams::uniform(20, 2.0, 2.0, std::f64::consts::PI / 8.0)
}

/// Random symmetric positive-definite matrix A A^T + eps I.
fn spd(dim: usize, entries: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |i, j| entries[i * dim + j]);
    &a * a.transpose() + DMatrix::identity(dim, dim) * 0.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_periodic(u in -10.0f64..10.0, v in -10.0f64..10.0) {
        let hp = hypers();
        let a = kernel_eval(u + 2.0 * std::f64::consts::PI, v, &hp);
        let b = kernel_eval(u, v, &hp);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gram_matrix_is_psd_for_any_angle_set(mut raw in proptest::collection::vec(0.0f64..1.0, 5..12)) {
        // Map raw draws to strictly increasing angles in [0, 2 pi).
        raw.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut angles = Vec::new();
        let mut last = -1.0;
        for r in raw {
            let a = r * 2.0 * std::f64::consts::PI * 0.999;
            if a > last + 1e-6 {
                angles.push(a);
                last = a;
            }
        }
        prop_assume!(angles.len() >= 3);
        let hp = GpHyperParams { sigma_f2: 2.0, sigma_r2: 2.0, l2: std::f64::consts::PI / 8.0, support_angles: angles };
        let gp = GpModel::new(hp).unwrap();
        let min_eig = gp.gram.clone().symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min_eig > -1e-9, "min eigenvalue {min_eig}");
    }

    #[test]
    fn gaussian_fusion_idempotent_and_consistent(
        entries in proptest::collection::vec(-1.0f64..1.0, 9),
        mx in -5.0f64..5.0,
        my in -5.0f64..5.0,
        mz in -5.0f64..5.0,
        w in 0.05f64..0.95,
    ) {
        let cov = spd(3, &entries);
        let g = GaussianDensity::new_unchecked(DVector::from_column_slice(&[mx, my, mz]), cov);
        let (fused, log_c) = fuse_gaussians(&[&g, &g], &[w, 1.0 - w]).unwrap();
        prop_assert!((&fused.mean - &g.mean).amax() < 1e-9);
        prop_assert!((&fused.cov - &g.cov).amax() < 1e-8);
        prop_assert!(log_c.abs() < 1e-8);
    }

    #[test]
    fn covariance_intersection_identity(
        e1 in proptest::collection::vec(-1.0f64..1.0, 9),
        e2 in proptest::collection::vec(-1.0f64..1.0, 9),
        w in 0.1f64..0.9,
    ) {
        let a = GaussianDensity::new_unchecked(DVector::zeros(3), spd(3, &e1));
        let b = GaussianDensity::new_unchecked(DVector::from_column_slice(&[1.0, -0.5, 2.0]), spd(3, &e2));
        let (fused, _) = fuse_gaussians(&[&a, &b], &[w, 1.0 - w]).unwrap();
        let info = a.cov.clone().try_inverse().unwrap() * w
            + b.cov.clone().try_inverse().unwrap() * (1.0 - w);
        let got = fused.cov.clone().try_inverse().unwrap();
        let rel = (&info - &got).amax() / info.amax();
        prop_assert!(rel < 1e-10, "relative error {rel}");
    }

    #[test]
    fn bernoulli_fusion_idempotent(r in 0.01f64..0.99, w in 0.05f64..0.95) {
        let g = GaussianDensity::new_unchecked(DVector::zeros(1), DMatrix::from_element(1, 1, 1.0));
        let b = BernoulliComponent {
            r,
            state: EtState { rate: GammaDensity::new(5.0, 1.0), spatial: g },
            track_id: TrackId(0),
        };
        let fused = fuse_bernoullis(&[&b, &b], &[w, 1.0 - w]).unwrap();
        prop_assert!((fused.r - r).abs() < 1e-10);
    }

    #[test]
    fn split_ppp_pointwise_conservation(
        weights in proptest::collection::vec(0.01f64..2.0, 1..5),
        m in 1usize..5,
        x in -4.0f64..4.0,
    ) {
        let components = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| PoissonComponent {
                weight: w,
                spatial: GaussianDensity::new_unchecked(
                    DVector::from_column_slice(&[i as f64 - 1.5]),
                    DMatrix::from_element(1, 1, 1.0 + i as f64 * 0.3),
                ),
                rate_prior: GammaDensity::new(5.0, 1.0),
            })
            .collect();
        let ppp = PoissonIntensity { components };
        let parts = split_ppp(&ppp, m);
        prop_assert_eq!(parts.len(), m);
        let xv = DVector::from_column_slice(&[x]);
        let orig = ppp.eval_spatial(&xv).unwrap();
        let sum: f64 = parts.iter().map(|p| p.eval_spatial(&xv).unwrap()).sum();
        prop_assert!((orig - sum).abs() < 1e-12);
    }

    #[test]
    fn assignment_matches_brute_force(
        rows in 1usize..6,
        cols in 1usize..6,
        seed in proptest::collection::vec(0.0f64..100.0, 36),
    ) {
        let c = CostMatrix::new(DMatrix::from_fn(rows, cols, |i, j| seed[i * 6 + j]));
        let got = solve(&c).unwrap();
        let (_, want) = brute_force(&c).unwrap();
        prop_assert!((got.total_cost - want).abs() < 1e-9);
    }

    #[test]
    fn gospa_symmetry(
        a in proptest::collection::vec((-30.0f64..30.0, -30.0f64..30.0), 0..5),
        b in proptest::collection::vec((-30.0f64..30.0, -30.0f64..30.0), 0..5),
    ) {
        let gp = GospaParams::new(20.0, 2.0, 2.0);
        let av: Vec<Vector2<f64>> = a.iter().map(|&(x, y)| Vector2::new(x, y)).collect();
        let bv: Vec<Vector2<f64>> = b.iter().map(|&(x, y)| Vector2::new(x, y)).collect();
        let d1 = gospa(&av, &bv, &gp).distance;
        let d2 = gospa(&bv, &av, &gp).distance;
        prop_assert!((d1 - d2).abs() < 1e-9);
    }

    #[test]
    fn marginal_center_commutes_with_center_pushforward(
        cx in -10.0f64..10.0,
        cy in -10.0f64..10.0,
        shift_x in -5.0f64..5.0,
        shift_y in -5.0f64..5.0,
        entries in proptest::collection::vec(-1.0f64..1.0, 64),
    ) {
        // Affine pushforward acting on the center slots only: translate the
        // center. Marginalizing before or after must agree.
        let dim = 8;
        let cov = spd(dim, &entries);
        let mut mean = DVector::zeros(dim);
        mean[0] = cx;
        mean[1] = cy;
        let state = EtState {
            rate: GammaDensity::new(5.0, 1.0),
            spatial: GaussianDensity::new_unchecked(mean.clone(), cov.clone()),
        };
        let marg_then_shift = {
            let m = marginal_center(&state);
            (m.mean[0] + shift_x, m.mean[1] + shift_y, m.cov.clone())
        };
        let shift_then_marg = {
            let mut shifted = mean;
            shifted[0] += shift_x;
            shifted[1] += shift_y;
            let st = EtState {
                rate: GammaDensity::new(5.0, 1.0),
                spatial: GaussianDensity::new_unchecked(shifted, cov),
            };
            let m = marginal_center(&st);
            (m.mean[0], m.mean[1], m.cov)
        };
        prop_assert!((marg_then_shift.0 - shift_then_marg.0).abs() < 1e-12);
        prop_assert!((marg_then_shift.1 - shift_then_marg.1).abs() < 1e-12);
        prop_assert!((&marg_then_shift.2 - &shift_then_marg.2).amax() < 1e-12);
    }

    #[test]
    fn gamma_mean_is_scale_invariant_under_forgetting(alpha in 0.5f64..50.0, beta in 0.5f64..10.0, eta in 1.01f64..2.0) {
        let g = GammaDensity::new(alpha, beta);
        let predicted = GammaDensity::new(alpha / eta, beta / eta);
        prop_assert!((gamma_mean(&g) - gamma_mean(&predicted)).abs() < 1e-9);
    }
}
