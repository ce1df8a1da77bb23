mod common;

use common::*;
use ibpg::matops::{cp_reconstruct, khatri_rao, mode_unfold, operator_norm_psd, spectral_norm_psd};
use ibpg::ncpd::{build_khatri_chain, ncpd_gradient, ncpd_gram, ncpd_lipschitz, ncpd_objective as lib_ncpd_objective};
use ibpg::nmf::{
    hals_column_update, hals_row_update, ibp_column_update, ibp_row_update, nesterov_tau_step, nmf_gradients,
    nmf_objective as lib_nmf_objective, NmfBlock,
};
use ndarray::{Array1, Array2};
use rand::Rng;

#[test]
fn nmf_objective_matches_loops() {
    for seed in 0..10 {
        let mut g = rng(seed);
        let (x, u, v) = (uniform(&mut g, 4, 5), uniform(&mut g, 4, 2), uniform(&mut g, 2, 5));
        let lib = lib_nmf_objective(x.view(), u.view(), v.view()).unwrap();
        let oracle = nmf_objective(&x, &u, &v);
        assert!((lib - oracle).abs() <= 1e-12 * oracle.max(1.0));
    }
}

#[test]
fn nmf_gradients_match_finite_differences() {
    for (seed, (m, n)) in (0..10).zip([(4, 5), (5, 6)].into_iter().cycle()) {
        let mut g = rng(100 + seed);
        let (x, u, v) = (uniform(&mut g, m, n), uniform(&mut g, m, 2), uniform(&mut g, 2, n));
        let gu = nmf_gradients(x.view(), u.view(), v.view(), NmfBlock::U).unwrap();
        let fd_u = finite_difference(&u, 1e-6, |u| nmf_objective(&x, u, &v));
        assert!(relative_difference(&gu, &fd_u) <= 1e-6, "seed {seed}: U gradient");
        let gv = nmf_gradients(x.view(), u.view(), v.view(), NmfBlock::V).unwrap();
        let fd_v = finite_difference(&v, 1e-6, |v| nmf_objective(&x, &u, v));
        assert!(relative_difference(&gv, &fd_v) <= 1e-6, "seed {seed}: V gradient");
    }
}

#[test]
fn ncpd_gradients_match_finite_differences() {
    for seed in 0..10 {
        let mut g = rng(200 + seed);
        let t = cp_tensor(&uniform(&mut g, 4, 3), &uniform(&mut g, 5, 3), &uniform(&mut g, 6, 3));
        let f = [uniform(&mut g, 4, 3), uniform(&mut g, 5, 3), uniform(&mut g, 6, 3)];
        for i in 0..3 {
            let grad = ncpd_gradient(t.view(), &f, i).unwrap();
            let fd = finite_difference(&f[i], 1e-6, |xi| {
                let mut g = f.clone();
                g[i] = xi.clone();
                ncpd_objective(&t, &g)
            });
            assert!(relative_difference(&grad, &fd) <= 1e-6, "seed {seed}, mode {i}");
        }
        let lib = lib_ncpd_objective(t.view(), &f).unwrap();
        assert!((lib - ncpd_objective(&t, &f)).abs() <= 1e-12 * lib.max(1.0));
    }
}

#[test]
fn ibp_column_update_matches_entrywise_minimizer() {
    let mut g = rng(300);
    for trial in 0..100 {
        let (m, n, r) = (5, 4, 2);
        let x = uniform(&mut g, m, n);
        let u = uniform(&mut g, m, r);
        let v = uniform(&mut g, r, n);
        let i = trial % r;
        let beta = 10f64.powf(g.gen_range(-3.0..3.0));
        // anchors with negative entries exercise the clamp
        let u_hat = Array1::from_shape_simple_fn(m, || g.gen_range(-1.0..2.0));
        let lib = ibp_column_update(x.view(), u.view(), v.view(), i, beta, u_hat.view()).unwrap();
        let oracle = column_oracle(&x, &u, &v, i, beta, &u_hat);
        let err = (&lib - &oracle).iter().fold(0.0f64, |a, d| a.max(d.abs()));
        assert!(err <= 1e-10, "trial {trial}: {err:e}");

        let vt = v.t().to_owned();
        let ut = u.t().to_owned();
        let row = ibp_row_update(x.view(), u.view(), v.view(), i, beta, u_hat.slice(ndarray::s![..r]).view());
        assert!(row.is_err(), "row update anchor must have n entries");
        let v_hat = Array1::from_shape_simple_fn(n, || g.gen_range(-1.0..2.0));
        let row = ibp_row_update(x.view(), u.view(), v.view(), i, beta, v_hat.view()).unwrap();
        let row_oracle = column_oracle(&x.t().to_owned(), &vt, &ut, i, beta, &v_hat);
        assert!((&row - &row_oracle).iter().all(|d| d.abs() <= 1e-10));
    }
}

#[test]
fn ibp_column_update_tends_to_hals() {
    let mut g = rng(301);
    for trial in 0..100 {
        let x = uniform(&mut g, 6, 5);
        let u = uniform(&mut g, 6, 3);
        let v = uniform(&mut g, 3, 5);
        let i = trial % 3;
        let col = u.column(i).to_owned();
        let ibp = ibp_column_update(x.view(), u.view(), v.view(), i, 1e12, col.view()).unwrap();
        let hals = hals_column_update(x.view(), u.view(), v.view(), i).unwrap().unwrap();
        assert!((&ibp - &hals).iter().all(|d| d.abs() <= 1e-8));
        let row = v.row(i).to_owned();
        let ibp_row = ibp_row_update(x.view(), u.view(), v.view(), i, 1e12, row.view()).unwrap();
        let hals_row = hals_row_update(x.view(), u.view(), v.view(), i).unwrap().unwrap();
        assert!((&ibp_row - &hals_row).iter().all(|d| d.abs() <= 1e-8));
    }
}

#[test]
fn unfoldings_match_index_arithmetic() {
    let mut g = rng(400);
    let t = ndarray::Array3::from_shape_simple_fn((3, 4, 5), || g.gen::<f64>());
    for mode in 0..3 {
        assert_eq!(mode_unfold(t.view(), mode).unwrap(), unfold(&t, mode));
    }
}

#[test]
fn cp_reconstruction_identity() {
    for seed in 0..20 {
        let mut g = rng(500 + seed);
        let r = 1 + (seed as usize % 4);
        let f = [uniform(&mut g, 3 + seed as usize % 3, r), uniform(&mut g, 4, r), uniform(&mut g, 2 + seed as usize % 5, r)];
        let t = cp_reconstruct(f[0].view(), f[1].view(), f[2].view()).unwrap();
        let oracle = cp_tensor(&f[0], &f[1], &f[2]);
        assert!(t.iter().zip(oracle.iter()).all(|(a, b)| (a - b).abs() <= 1e-14 * b.abs().max(1.0)));
        let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        for i in 0..3 {
            let b = build_khatri_chain(&f, i).unwrap();
            assert_eq!(b, kept_chain(&f, i));
            let diff = mode_unfold(t.view(), i).unwrap() - f[i].dot(&b.t());
            assert!(frobenius(&diff) <= 1e-12 * norm, "seed {seed}, mode {i}");
        }
    }
}

#[test]
fn hadamard_gram_matches_eigen_oracle() {
    for seed in 0..20 {
        let mut g = rng(600 + seed);
        let f = [uniform(&mut g, 4, 3), uniform(&mut g, 5, 3), uniform(&mut g, 6, 3)];
        for i in 0..3 {
            let b = kept_chain(&f, i);
            let explicit = b.t().dot(&b);
            let gram = ncpd_gram(&f, i).unwrap();
            assert!((&gram - &explicit).iter().all(|d| d.abs() <= 1e-12 * explicit[[0, 0]].abs()));
            let oracle = jacobi_max_eigenvalue(&explicit);
            let l = ncpd_lipschitz(&f, i).unwrap();
            assert!((l - oracle).abs() <= 1e-8 * oracle, "seed {seed}, mode {i}: {l} vs {oracle}");
        }
    }
}

#[test]
fn rank_one_lipschitz_is_product_of_norms() {
    let mut g = rng(700);
    let f = [uniform(&mut g, 3, 1), uniform(&mut g, 4, 1), uniform(&mut g, 5, 1)];
    let nb = f[1].iter().map(|x| x * x).sum::<f64>();
    let nc = f[2].iter().map(|x| x * x).sum::<f64>();
    assert!((ncpd_lipschitz(&f, 0).unwrap() - nb * nc).abs() <= 1e-12 * nb * nc);
}

#[test]
fn power_iteration_matches_jacobi_and_scales() {
    for seed in 0..20 {
        let mut g = rng(800 + seed);
        let a = uniform(&mut g, 7, 4);
        let m = a.t().dot(&a);
        let oracle = jacobi_max_eigenvalue(&m);
        let est = spectral_norm_psd(m.view()).unwrap();
        assert!((est - oracle).abs() <= 1e-8 * oracle);
        let scaled = operator_norm_psd((&m * 3.5).view(), 1e-9, 1000).unwrap();
        assert!((scaled.value - 3.5 * est).abs() <= 1e-8 * 3.5 * est);
    }
}

#[test]
fn khatri_rao_entries() {
    let mut g = rng(900);
    let (a, b) = (uniform(&mut g, 3, 2), uniform(&mut g, 4, 2));
    let kr = khatri_rao(a.view(), b.view()).unwrap();
    for i in 0..3 {
        for j in 0..4 {
            for c in 0..2 {
                assert_eq!(kr[[i * 4 + j, c]], a[[i, c]] * b[[j, c]]);
            }
        }
    }
}

#[test]
fn tau_sequence_matches_recurrence() {
    let oracle = tau_sequence(100);
    let mut tau = 1.0;
    let mut ratios = Vec::new();
    for (k, want) in oracle.iter().enumerate().skip(1) {
        tau = nesterov_tau_step(tau).unwrap();
        assert!((tau - want).abs() <= 1e-9 * want, "tau_{k}");
        ratios.push((tau - 1.0) / tau);
    }
    assert!((oracle[1] - (1.0 + 5f64.sqrt()) / 2.0).abs() <= 1e-12);
    assert!((oracle[2] - 2.1935).abs() <= 1e-4);
    assert!(ratios.windows(2).all(|w| w[0] < w[1]));
    assert!(ratios.iter().all(|&r| r < 1.0));
    assert!(oracle.windows(2).all(|w| w[0] + 0.5 < w[1]));
}

#[test]
fn one_zero_factor_gives_cross_term_gradient() {
    let mut g = rng(1000);
    let t = cp_tensor(&uniform(&mut g, 3, 2), &uniform(&mut g, 4, 2), &uniform(&mut g, 5, 2));
    let mut f = [uniform(&mut g, 3, 2), uniform(&mut g, 4, 2), uniform(&mut g, 5, 2)];
    f[1] = Array2::zeros((4, 2));
    let grad = ncpd_gradient(t.view(), &f, 1).unwrap();
    let want = -unfold(&t, 1).dot(&kept_chain(&f, 1));
    assert!(relative_difference(&grad, &want) <= 1e-13);
}
