mod common;

use common::*;
use ibpg::block::{bregman_gprox, bregman_prox, Euclidean, NonnegIndicator, SquaredDistance};
use ibpg::matops::{frobenius_norm, nonneg_project, operator_norm_psd};
use ibpg::ncpd::{run_ncpd, NcpdAlgo, NcpdConstants, NcpdInit, NcpdInstance, NcpdOptions};
use ibpg::nmf::{
    ibp_column_update, nmf_objective as lib_nmf_objective, run_nmf, IbpgConstants, NmfAlgo, NmfInit, NmfInstance,
    NmfOptions, RepeatRule,
};
use ibpg::trace::Budget;
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn instance(seed: u64, m: usize, n: usize, r: usize) -> NmfInstance {
    let mut g = rng(seed);
    NmfInstance::new(product(&uniform(&mut g, m, r), &uniform(&mut g, r, n)), r).unwrap()
}

fn tensor(seed: u64, dims: (usize, usize, usize), r: usize) -> NcpdInstance {
    let mut g = rng(seed);
    let t = cp_tensor(&uniform(&mut g, dims.0, r), &uniform(&mut g, dims.1, r), &uniform(&mut g, dims.2, r));
    NcpdInstance::new(t, r).unwrap()
}

fn non_increasing(objs: &[f64]) -> bool {
    objs.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nmf_factors_stay_nonnegative(seed in 0u64..1000, m in 4usize..12, n in 4usize..12, algo in 0usize..6) {
        let r = 1 + (seed as usize % 3).min(m.min(n) - 2);
        let inst = instance(seed, m, n, r);
        let algo = NmfAlgo::ALL[algo];
        let run = run_nmf(&inst, algo, &NmfInit::random(m, n, r, seed + 1), &NmfOptions::new(Budget::iterations(15))).unwrap();
        prop_assert!(run.state.u.iter().chain(run.state.v.iter()).all(|x| *x >= 0.0));
        prop_assert!(run.trace.points.iter().all(|p| p.relerror >= 0.0 && p.relerror.is_finite()));
    }

    #[test]
    fn unaccelerated_nmf_descends(seed in 0u64..1000, m in 4usize..12, n in 4usize..12) {
        let inst = instance(seed, m, n, 2);
        let init = NmfInit::random(m, n, 2, seed + 1);
        let mut opts = NmfOptions::new(Budget::iterations(25));
        let hals = run_nmf(&inst, NmfAlgo::AHals, &init, &opts).unwrap();
        prop_assert!(non_increasing(&hals.trace.points.iter().map(|p| p.objective).collect::<Vec<_>>()));
        opts.ibpg = Some(IbpgConstants { gamma_tilde: 0.0, alpha_breve: 0.0 });
        for algo in [NmfAlgo::Ibpg, NmfAlgo::IbpgA] {
            let run = run_nmf(&inst, algo, &init, &opts).unwrap();
            prop_assert!(non_increasing(&run.trace.points.iter().map(|p| p.objective).collect::<Vec<_>>()), "{}", algo);
        }
        opts.ibp.alpha_start = 0.0;
        let ibp = run_nmf(&inst, NmfAlgo::Ibp, &init, &opts).unwrap();
        prop_assert!(non_increasing(&ibp.trace.points.iter().map(|p| p.objective).collect::<Vec<_>>()));
    }

    #[test]
    fn cached_objective_matches_recomputation(seed in 0u64..1000, iters in 1usize..30, algo in 0usize..6) {
        let inst = instance(seed, 9, 8, 3);
        let algo = NmfAlgo::ALL[algo];
        let run = run_nmf(&inst, algo, &NmfInit::random(9, 8, 3, seed + 1), &NmfOptions::new(Budget::iterations(iters))).unwrap();
        let exact = lib_nmf_objective(inst.data(), run.state.u.view(), run.state.v.view()).unwrap();
        let naive = nmf_objective(&inst.data().to_owned(), &run.state.u, &run.state.v);
        let reported = run.trace.last().unwrap().objective;
        // forming the residual X - UV costs about eps |X| per entry
        let rounding = 1e-14 * frobenius_norm(inst.data()) * (2.0 * naive).sqrt();
        prop_assert!((exact - naive).abs() <= 1e-12 * naive + rounding, "{} vs {}", exact, naive);
        prop_assert!((reported - naive).abs() <= 1e-10 * naive + rounding, "{}: {} vs {}", algo, reported, naive);
    }

    #[test]
    fn single_repeat_ibpg_a_is_ibpg(seed in 0u64..1000, m in 4usize..15, n in 4usize..15) {
        let inst = instance(seed, m, n, 2);
        let init = NmfInit::random(m, n, 2, seed + 1);
        let mut opts = NmfOptions::new(Budget::iterations(20));
        let plain = run_nmf(&inst, NmfAlgo::Ibpg, &init, &opts).unwrap();
        opts.repeat = RepeatRule::SINGLE;
        let single = run_nmf(&inst, NmfAlgo::IbpgA, &init, &opts).unwrap();
        prop_assert_eq!(plain.trace, single.trace);
        prop_assert_eq!(plain.state, single.state);
    }

    #[test]
    fn column_update_scales_with_the_data(seed in 0u64..1000, c in 0.01f64..100.0, beta in 0.01f64..100.0) {
        let mut g = rng(seed);
        let (x, u, v) = (uniform(&mut g, 6, 5), uniform(&mut g, 6, 2), uniform(&mut g, 2, 5));
        let u_hat = uniform(&mut g, 6, 1).column(0).to_owned();
        let base = ibp_column_update(x.view(), u.view(), v.view(), 1, beta, u_hat.view()).unwrap();
        let scaled = ibp_column_update((&x * c).view(), (&u * c).view(), v.view(), 1, beta, (&u_hat * c).view()).unwrap();
        for (a, b) in scaled.iter().zip(base.iter()) {
            prop_assert!((a - c * b).abs() <= 1e-12 * (c * b).abs().max(1.0));
        }
    }

    #[test]
    fn ncpd_factors_stay_nonnegative(seed in 0u64..1000, algo in 0usize..4) {
        let inst = tensor(seed, (4, 5, 3), 2);
        let algo = NcpdAlgo::ALL[algo];
        let run = run_ncpd(&inst, algo, &NcpdInit::random((4, 5, 3), 2, seed + 1), &NcpdOptions::new(Budget::iterations(10))).unwrap();
        prop_assert!(run.state.factors.iter().all(|f| f.iter().all(|x| *x >= 0.0)));
    }

    #[test]
    fn ncpd_without_inertia_descends(seed in 0u64..1000) {
        let inst = tensor(seed, (5, 4, 6), 2);
        let init = NcpdInit::random((5, 4, 6), 2, seed + 7);
        let mut opts = NcpdOptions::new(Budget::iterations(25));
        opts.constants = Some(NcpdConstants { delta_w: 0.0, beta: 1.0 });
        opts.repeat = RepeatRule::SINGLE;
        let run = run_ncpd(&inst, NcpdAlgo::Ibpg, &init, &opts).unwrap();
        prop_assert!(non_increasing(&run.trace.points.iter().map(|p| p.objective).collect::<Vec<_>>()));
        let hals = run_ncpd(&inst, NcpdAlgo::AHals, &init, &NcpdOptions::new(Budget::iterations(25))).unwrap();
        prop_assert!(non_increasing(&hals.trace.points.iter().map(|p| p.objective).collect::<Vec<_>>()));
    }

    #[test]
    fn projection_is_idempotent_and_contractive(a in prop::collection::vec(-5.0f64..5.0, 12), b in prop::collection::vec(-5.0f64..5.0, 12)) {
        let a = Array2::from_shape_vec((3, 4), a).unwrap();
        let b = Array2::from_shape_vec((3, 4), b).unwrap();
        let pa = nonneg_project(a.view());
        prop_assert_eq!(nonneg_project(pa.view()), pa.clone());
        let pb = nonneg_project(b.view());
        prop_assert!(frobenius_norm((&pa - &pb).view()) <= frobenius_norm((&a - &b).view()) + 1e-15);
    }

    #[test]
    fn operator_norm_is_homogeneous(seed in 0u64..1000, c in 0.1f64..10.0) {
        let mut g = rng(seed);
        let a = uniform(&mut g, 6, 4);
        let m = a.t().dot(&a);
        let base = operator_norm_psd(m.view(), 1e-9, 1000).unwrap().value;
        let scaled = operator_norm_psd((&m * c).view(), 1e-9, 1000).unwrap().value;
        prop_assert!((scaled - c * base).abs() <= 1e-8 * c * base);
    }

    #[test]
    fn gprox_is_prox_of_the_gradient_step(v in prop::collection::vec(-3.0f64..3.0, 5), grad in prop::collection::vec(-3.0f64..3.0, 5), beta in 0.01f64..10.0) {
        let (v, grad) = (Array1::from(v), Array1::from(grad));
        let step = &v - &(&grad * beta);
        let direct = bregman_prox(&NonnegIndicator, step.view(), beta, &Euclidean).unwrap();
        let via = bregman_gprox(grad.view(), v.view(), beta, |p, b| bregman_prox(&NonnegIndicator, p, b, &Euclidean), &Euclidean).unwrap();
        prop_assert_eq!(direct, via);
    }

    #[test]
    fn smooth_prox_is_stationary(v in prop::collection::vec(-3.0f64..3.0, 4), center in prop::collection::vec(-3.0f64..3.0, 4), weight in 0.1f64..10.0, beta in 0.01f64..10.0) {
        let phi = SquaredDistance { center: Array1::from(center), weight };
        let v = Array1::from(v);
        let u = bregman_prox(&phi, v.view(), beta, &Euclidean).unwrap();
        let grad_phi = (&u - &phi.center) * weight;
        let residual = &grad_phi + &((&u - &v) / beta);
        let scale = 1.0 + grad_phi.dot(&grad_phi).sqrt();
        prop_assert!(residual.dot(&residual).sqrt() <= 1e-8 * scale);
    }
}

#[test]
fn exact_initialization_stays_exact() {
    let mut g = rng(5);
    let (u, v) = (uniform(&mut g, 8, 2), uniform(&mut g, 2, 7));
    let inst = NmfInstance::new(product(&u, &v), 2).unwrap();
    let init = NmfInit { u, v };
    for algo in NmfAlgo::ALL {
        let run = run_nmf(&inst, algo, &init, &NmfOptions::new(Budget::iterations(3))).unwrap();
        assert!(run.trace.points[0].relerror <= 1e-15, "{algo}");
    }
}
