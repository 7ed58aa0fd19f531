use mmsk_conic::InitialPoint;
use mmsk_core::affinity::{
    construct_affinity, load_fixture_affinity, AffinityMatrix, AffinityParams,
};
use mmsk_core::channel::{observe, relu, ChannelResponse, ReceptionConfig};
use mmsk_core::design::{random_book, reference_book, MixtureBook};
use mmsk_core::recovery::*;
use mmsk_core::{rng, Error, Matrix};
use proptest::prelude::*;
use rand::Rng;

fn book() -> MixtureBook {
    reference_book(4, vec![0.01; 20], 50.0).unwrap()
}

/// Noise replaced by its mean: `y = relu(A x + lambda, x_thr)`.
fn mean_noise_output(a: &AffinityMatrix, x: &[f64], cfg: &ReceptionConfig) -> Vec<f64> {
    a.apply(x)
        .into_iter()
        .map(|p| relu(p + cfg.lambda_r, cfg.x_thr))
        .collect()
}

fn planted(book: &MixtureBook, m: usize, level: f64) -> (Vec<f64>, Vec<f64>) {
    let x = (0..book.num_molecules())
        .map(|q| book.reception()[(q, m)] * level)
        .collect();
    let mut w = vec![0.0; book.num_mixtures()];
    w[m] = level;
    (x, w)
}

fn noisy_instance(seed: u64) -> (Vec<f64>, usize) {
    let b = book();
    let mut r = rng::seeded(seed);
    let m = r.random_range(0..b.num_mixtures());
    let (x_bar, _) = planted(&b, m, 50.0);
    let obs = observe(
        &load_fixture_affinity(),
        &x_bar,
        &ReceptionConfig::default(),
        &mut r,
    );
    (obs.y, m)
}

#[test]
fn silent_receptor_constraint_forms_agree() {
    // A x + (lambda - thr) <= sqrt(lambda eps)  <=>  A x + lambda <= thr + sqrt(lambda eps)
    let mut r = rng::seeded(1);
    for _ in 0..10_000 {
        let ax: f64 = r.random_range(-20.0..40.0);
        let lam: f64 = r.random_range(0.0..20.0);
        let thr: f64 = r.random_range(0.0..20.0);
        let eps: f64 = r.random_range(0.01..50.0);
        let post = ax + (lam - thr) <= (lam * eps).sqrt();
        let pre = ax + lam <= thr + (lam * eps).sqrt();
        let margin = (ax + lam - thr - (lam * eps).sqrt()).abs();
        if margin > 1e-9 {
            assert_eq!(post, pre);
        }
    }
}

#[test]
fn silent_array_gives_zero_estimates() {
    let a = load_fixture_affinity();
    let cfg = ReceptionConfig {
        lambda_r: 3.0,
        x_thr: 5.0,
        ..ReceptionConfig::default()
    };
    let rcfg = RecoveryConfig::default();
    let y = vec![0.0; 10];
    let e1 = solve_op1(&y, &a, &cfg, &rcfg).unwrap();
    assert_eq!(e1.status, RecoveryStatus::Optimal);
    assert!(e1.x_hat.iter().all(|v| *v < 1e-6));
    let e2 = solve_op2(&y, &a, book().reception(), &cfg, &rcfg).unwrap();
    assert_eq!(e2.status, RecoveryStatus::Optimal);
    assert!(e2.w_hat.iter().all(|v| *v < 1e-6));
    assert!(e2.active_set.is_empty());
}

#[test]
fn huge_epsilon_makes_zero_optimal() {
    let a = load_fixture_affinity();
    let (y, _) = noisy_instance(3);
    let e = solve_op1(
        &y,
        &a,
        &ReceptionConfig::default(),
        &RecoveryConfig::tied(1e6),
    )
    .unwrap();
    assert_eq!(e.status, RecoveryStatus::Optimal);
    assert!(e.x_hat.iter().sum::<f64>() < 1e-5);
}

#[test]
fn tiny_delta_outside_the_mixture_cone_is_infeasible() {
    let a = load_fixture_affinity();
    let cfg = ReceptionConfig::default();
    // molecule 2 alone cannot be produced by Tx 1's mixtures
    let mut x = vec![0.0; 20];
    x[1] = 80.0;
    let y = mean_noise_output(&a, &x, &cfg);
    let rcfg = RecoveryConfig {
        epsilon: 0.05,
        delta: 1e-4,
        ..RecoveryConfig::default()
    };
    let e = solve_op2(&y, &a, &book().reception_for_tx(0), &cfg, &rcfg).unwrap();
    assert_eq!(e.status, RecoveryStatus::Infeasible);
    assert!(e.w_hat.iter().all(|v| *v == 0.0));
}

#[test]
fn dimension_errors() {
    let a = load_fixture_affinity();
    let cfg = ReceptionConfig::default();
    let rcfg = RecoveryConfig::default();
    assert!(matches!(
        solve_op1(&[0.0; 3], &a, &cfg, &rcfg),
        Err(Error::Dimension(_))
    ));
    assert!(solve_op2(&[0.0; 10], &a, &Matrix::zeros(5, 2), &cfg, &rcfg).is_err());
    assert!(solve_op1(&[f64::NAN; 10], &a, &cfg, &rcfg).is_err());
    assert!(solve_op1(&[0.0; 10], &a, &cfg, &RecoveryConfig::tied(0.0)).is_err());
}

#[test]
fn planted_mixture_is_recovered_and_bounds_the_objective() {
    let a = load_fixture_affinity();
    let cfg = ReceptionConfig::default();
    let b = book();
    for m in 0..b.num_mixtures() {
        let (x, w) = planted(&b, m, 50.0);
        let y = mean_noise_output(&a, &x, &cfg);
        let rcfg = RecoveryConfig::tied(3.0);
        let e = solve_op2(&y, &a, b.reception(), &cfg, &rcfg).unwrap();
        assert_eq!(e.status, RecoveryStatus::Optimal);
        assert_eq!(detect_peak_mixture(&e.w_hat), Some(m));
        let planted_norm: f64 = w.iter().sum();
        let got: f64 = e.w_hat.iter().sum();
        assert!(
            got <= planted_norm + rcfg.solver_tol * planted_norm.max(1.0),
            "{got} > {planted_norm}"
        );
        let e1 = solve_op1(&y, &a, &cfg, &rcfg).unwrap();
        let xs: f64 = x.iter().sum();
        assert!(e1.x_hat.iter().sum::<f64>() <= xs + rcfg.solver_tol * xs.max(1.0));
        let rep = check_constraints(&y, &a, &e1.x_hat, None, &cfg, &rcfg);
        assert!(rep.satisfied(1e-6), "{rep:?}");
    }
}

#[test]
fn adaptive_identifies_the_transmitter() {
    let a = load_fixture_affinity();
    let cfg = ReceptionConfig::default();
    let b = book();
    let mut r = rng::seeded(21);
    // a mixture of transmitter 2
    let m = 5;
    let (x_bar, _) = planted(&b, m, 50.0);
    let obs = observe(&a, &x_bar, &cfg, &mut r);
    let ad = solve_op2_adaptive(&obs.y, &a, &b, &cfg, &RecoveryConfig::tied(3.0)).unwrap();
    assert_eq!(ad.tx, Some(1));
    assert!(!ad.fell_back);
    assert_eq!(ad.refined.w_hat.len(), b.num_mixtures());
    assert_eq!(detect_peak_mixture(&ad.refined.w_hat), Some(m));
    assert!(ad
        .refined
        .w_hat
        .iter()
        .enumerate()
        .all(|(i, v)| b.tx_range(1).contains(&i) || *v == 0.0));
}

#[test]
fn adaptive_with_nothing_detected_keeps_stage_one() {
    let a = load_fixture_affinity();
    let cfg = ReceptionConfig {
        lambda_r: 2.0,
        ..ReceptionConfig::default()
    };
    let ad = solve_op2_adaptive(&[0.0; 10], &a, &book(), &cfg, &RecoveryConfig::default()).unwrap();
    assert_eq!(ad.tx, None);
    assert_eq!(ad.refined, ad.stage1);
}

#[test]
fn single_transmitter_adaptive_equals_plain() {
    let a = load_fixture_affinity();
    let cfg = ReceptionConfig::default();
    let full = book();
    let one = MixtureBook::new(
        vec![full.allocations()[0].clone()],
        vec![full.alphabets()[0].clone()],
        vec![0.01; 20],
        50.0,
    )
    .unwrap();
    let (x_bar, _) = planted(&one, 2, 50.0);
    let obs = observe(&a, &x_bar, &cfg, &mut rng::seeded(4));
    let rcfg = RecoveryConfig::tied(3.0);
    let plain = solve_op2(&obs.y, &a, one.reception(), &cfg, &rcfg).unwrap();
    let ad = solve_op2_adaptive(&obs.y, &a, &one, &cfg, &rcfg).unwrap();
    assert_eq!(ad.tx, Some(0));
    for (p, q) in plain.w_hat.iter().zip(&ad.refined.w_hat) {
        assert!((p - q).abs() < 1e-9);
    }
}

#[test]
fn enlarging_epsilon_never_increases_the_optimum() {
    let a = load_fixture_affinity();
    let cfg = ReceptionConfig::default();
    let b = book();
    let grid = [0.3, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
    for seed in 0..8 {
        let (y, _) = noisy_instance(seed);
        let mut prev: Option<f64> = None;
        for &eps in &grid {
            let rcfg = RecoveryConfig::tied(eps);
            let e = solve_op2(&y, &a, b.reception(), &cfg, &rcfg).unwrap();
            match e.status {
                RecoveryStatus::Optimal => {
                    let obj: f64 = e.w_hat.iter().sum();
                    if let Some(p) = prev {
                        assert!(
                            obj <= p + 1e-6 * p.max(1.0),
                            "seed {seed} eps {eps}: {obj} > {p}"
                        );
                    }
                    prev = Some(obj);
                }
                _ => assert!(
                    prev.is_none(),
                    "seed {seed}: feasible set shrank at eps {eps}"
                ),
            }
        }
    }
}

fn random_interior(cone: &mmsk_conic::ConeSpec, r: &mut rng::Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..cone.nonneg).map(|_| r.random_range(0.2..3.0)).collect();
    for &d in &cone.soc {
        let tail: Vec<f64> = (1..d).map(|_| r.random_range(-2.0..2.0)).collect();
        let norm = tail.iter().map(|t| t * t).sum::<f64>().sqrt();
        v.push(norm + r.random_range(0.2..3.0));
        v.extend(tail);
    }
    v
}

#[test]
fn random_starting_points_reach_the_same_optimum() {
    let a = load_fixture_affinity();
    let cfg = ReceptionConfig::default();
    let b = book();
    let rcfg = RecoveryConfig::tied(3.0);
    let mut r = rng::seeded(77);
    for seed in 0..4 {
        let (y, _) = noisy_instance(100 + seed);
        let prog = build_op2(&y, &a, b.reception(), &cfg, &rcfg).unwrap();
        let base = prog.solve(&rcfg);
        assert_eq!(base.status, RecoveryStatus::Optimal);
        let f0: f64 = base.w_hat.iter().sum();
        for _ in 0..10 {
            let start = InitialPoint {
                x: (0..prog.problem.num_vars())
                    .map(|_| r.random_range(-5.0..50.0))
                    .collect(),
                s: random_interior(&prog.problem.cone, &mut r),
                z: random_interior(&prog.problem.cone, &mut r),
            };
            let e = prog.solve_from(&rcfg, &start).unwrap();
            assert_eq!(e.status, RecoveryStatus::Optimal);
            let f: f64 = e.w_hat.iter().sum();
            assert!(
                (f - f0).abs() <= 10.0 * rcfg.solver_tol * f0.max(1.0),
                "{f} vs {f0}"
            );
        }
    }
}

#[test]
fn oracle_recovers_a_noiseless_one_sparse_support() {
    let a = construct_affinity(&AffinityParams::new(6, 6, 3, 0.3, 0.8, 2)).unwrap();
    let cfg = ReceptionConfig {
        lambda_r: 0.0,
        x_thr: 1.0,
        ..ReceptionConfig::default()
    };
    let grid: Vec<f64> = (1..=8).map(|k| 10.0 * k as f64).collect();
    for q in 0..6 {
        let mut x = vec![0.0; 6];
        x[q] = 40.0;
        let y = expected_output(&a, &x, &cfg);
        let o = brute_force_sparse_oracle(&y, &a, &cfg, 2, &grid, 1e-9).unwrap();
        assert_eq!(o.support, vec![q]);
        assert_eq!(o.concentrations, x);
    }
}

#[test]
fn oracle_on_silent_noiseless_array_is_empty() {
    let a = construct_affinity(&AffinityParams::new(6, 6, 3, 0.3, 0.8, 2)).unwrap();
    let cfg = ReceptionConfig {
        lambda_r: 0.0,
        x_thr: 1.0,
        ..ReceptionConfig::default()
    };
    let o = brute_force_sparse_oracle(&[0.0; 6], &a, &cfg, 2, &[10.0], 1e-9).unwrap();
    assert!(o.support.is_empty() && o.error == 0.0);
}

#[test]
fn oracle_guards() {
    let big = load_fixture_affinity();
    let cfg = ReceptionConfig::default();
    assert!(matches!(
        brute_force_sparse_oracle(&[0.0; 10], &big, &cfg, 1, &[1.0], 1.0),
        Err(Error::OracleGuard(_))
    ));
    let a = construct_affinity(&AffinityParams::new(6, 6, 3, 0.3, 0.8, 2)).unwrap();
    assert!(brute_force_sparse_oracle(&[0.0; 6], &a, &cfg, 4, &[1.0], 1.0).is_err());
    assert!(brute_force_sparse_oracle(&[0.0; 6], &a, &cfg, 1, &[0.0], 1.0).is_err());
    assert!(brute_force_sparse_oracle(&[0.0; 6], &a, &cfg, 1, &vec![1.0; 33], 1.0).is_err());
}

#[test]
fn filter_support_matches_dense_evaluation() {
    let ch = ChannelResponse::default();
    let c = Matrix::from_rows(&[[1.0]]);
    let bank = build_filter_bank(&c, &[ch], 0.2, 1e-3).unwrap();
    let len = bank.taps[0].len();
    let cut = 1e-3 * ch.peak_rate();
    assert!(ch.rate(len as f64 * 0.2) < cut);
    assert!(ch.rate((len - 1) as f64 * 0.2) >= cut);
    // filtering the sampled response itself peaks at lag zero
    let series: Vec<f64> = (0..3 * len).map(|k| ch.rate(k as f64 * 0.2)).collect();
    let out = matched_filter(&[series], &bank).unwrap();
    let peak = detect_peak_mixture(&out[0]).unwrap();
    assert_eq!(peak, 0);
    assert!(matched_filter(&[vec![0.0; 5]], &bank).unwrap()[0]
        .iter()
        .all(|v| *v == 0.0));
    assert!(matched_filter(&[], &bank).is_err());
}

#[test]
fn peak_decision_is_permutation_equivariant() {
    let w = [0.3, 2.0, 0.7, 1.1];
    let perm = [2, 0, 3, 1];
    let pw: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
    let s = one_hot(4, detect_peak_mixture(&w).unwrap());
    let ps = one_hot(4, detect_peak_mixture(&pw).unwrap());
    let s_perm: Vec<u8> = perm.iter().map(|&i| s[i]).collect();
    assert_eq!(ps, s_perm);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimal_solutions_pass_direct_substitution(seed in 0u64..1_000_000, eps_idx in 0usize..6, random in any::<bool>()) {
        let eps = [0.5, 1.0, 2.0, 3.0, 6.0, 12.0][eps_idx];
        let a = load_fixture_affinity();
        let cfg = ReceptionConfig::default();
        let mut r = rng::seeded(seed);
        let b = if random { random_book(&mut r, 4, 4, 4, vec![0.01; 20], 50.0).unwrap() } else { book() };
        let m = r.random_range(0..b.num_mixtures());
        let (x_bar, _) = planted(&b, m, 50.0);
        let obs = observe(&a, &x_bar, &cfg, &mut r);
        let rcfg = RecoveryConfig::tied(eps);
        let e1 = solve_op1(&obs.y, &a, &cfg, &rcfg).unwrap();
        if e1.status == RecoveryStatus::Optimal {
            let rep = check_constraints(&obs.y, &a, &e1.x_hat, None, &cfg, &rcfg);
            prop_assert!(rep.satisfied(1e-6), "{:?}", rep);
        }
        let ad = solve_op2_adaptive(&obs.y, &a, &b, &cfg, &rcfg).unwrap();
        let s1 = &ad.stage1;
        if s1.status == RecoveryStatus::Optimal {
            let rep = check_constraints(&obs.y, &a, &s1.x_hat, Some((&s1.w_hat, b.reception())), &cfg, &rcfg);
            prop_assert!(rep.satisfied(1e-6), "{:?}", rep);
            prop_assert!(s1.x_hat.iter().chain(&s1.w_hat).all(|v| *v >= 0.0));
        }
        if let (Some(k), false) = (ad.tx, ad.fell_back) {
            let rep = check_constraints(&obs.y, &a, &ad.refined.x_hat, Some((&ad.refined.w_hat, b.reception())), &cfg, &rcfg);
            prop_assert!(rep.satisfied(1e-6), "tx {} {:?}", k, rep);
        }
    }

    #[test]
    fn matched_filter_is_linear(
        s1 in prop::collection::vec(-10.0f64..10.0, 30),
        s2 in prop::collection::vec(-10.0f64..10.0, 30),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let c = Matrix::from_rows(&[[0.5, 1.0], [0.5, 0.0]]);
        let chans = [ChannelResponse::default(), ChannelResponse::new(0.3, 1.0, 0.02).unwrap()];
        let bank = build_filter_bank(&c, &chans, 0.2, 1e-3).unwrap();
        let mix: Vec<f64> = s1.iter().zip(&s2).map(|(x, y)| a * x + b * y).collect();
        let f1 = matched_filter(&[s1.clone(), s2.clone()], &bank).unwrap();
        let f2 = matched_filter(&[s2, s1], &bank).unwrap();
        let fm = matched_filter(&[mix.clone(), mix], &bank).unwrap();
        for j in 0..30 {
            let lin0 = a * f1[0][j] + b * f2[0][j];
            prop_assert!((fm[0][j] - lin0).abs() <= 1e-9 * (1.0 + lin0.abs()));
        }
    }
}
