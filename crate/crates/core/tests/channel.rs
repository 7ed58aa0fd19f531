use mmsk_core::affinity::AffinityMatrix;
use mmsk_core::channel::*;
use mmsk_core::design::{build_construction_matrix, Mixture};
use mmsk_core::{rng, Matrix};
use proptest::prelude::*;

/// Composite Gauss-Legendre (5 points) on `[a, b]` split into `n` panels.
fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let mid = a + (i as f64 + 0.5) * h;
            X.iter()
                .zip(&W)
                .map(|(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

fn ch(alpha: f64, beta: f64, gamma: f64) -> ChannelResponse {
    ChannelResponse::new(alpha, beta, gamma).unwrap()
}

#[test]
fn default_channel_peak_and_total() {
    let c = ChannelResponse::default();
    assert!((c.peak_time() - 0.5 * (1.0f64 + 1.7 / 0.5).ln()).abs() < 1e-12);
    assert!((c.integral(0.0, f64::INFINITY).unwrap() - 0.01).abs() < 1e-15);
}

#[test]
fn interval_errors() {
    let c = ChannelResponse::default();
    assert!(c.integral(2.0, 1.0).is_err());
    assert!(c.integral(f64::NAN, 1.0).is_err());
    assert_eq!(c.integral(-3.0, 0.0).unwrap(), 0.0);
    assert_eq!(c.integral(1.0, 1.0).unwrap(), 0.0);
}

#[test]
fn arrivals_reject_bad_input() {
    let c = vec![ChannelResponse::default(); 2];
    let m = Matrix::from_rows(&[[1.0], [0.0]]);
    let cfg = ReceptionConfig::default();
    let ev = |id| ReleaseEvent {
        mixture_id: id,
        release_time: 0.0,
        n_rls: 1.0,
    };
    assert!(expected_arrivals(&[ev(0)], &m, &c, &cfg, 0).is_err());
    assert!(expected_arrivals(&[ev(1)], &m, &c, &cfg, 1).is_err());
    assert!(expected_arrivals(&[ev(0)], &m, &c[..1], &cfg, 1).is_err());
}

#[test]
fn whole_series_collects_every_released_molecule() {
    let mixes = vec![Mixture::from_labels(&[1, 3]).unwrap()];
    let m = build_construction_matrix(&mixes, 3).unwrap();
    let chans = vec![ch(0.5, 1.7, 0.02), ch(0.5, 1.7, 0.01), ch(0.3, 1.0, 0.04)];
    let cfg = ReceptionConfig {
        n_samples: 1000,
        ..ReceptionConfig::default()
    };
    let ev = [ReleaseEvent {
        mixture_id: 0,
        release_time: 0.3,
        n_rls: 1e5,
    }];
    let mut total = [0.0; 3];
    for j in 1..=cfg.n_samples {
        let x = expected_arrivals(&ev, &m, &chans, &cfg, j).unwrap();
        for q in 0..3 {
            total[q] += x[q];
        }
    }
    assert!((total[0] - 1e5 * 0.5 * 0.02).abs() < 1e-6);
    assert_eq!(total[1], 0.0);
    assert!((total[2] - 1e5 * 0.5 * 0.04).abs() < 1e-6);
}

#[test]
fn noiseless_reception_is_thresholded_linear_map() {
    let a = AffinityMatrix::from_rows(&[vec![1.0, -0.3], vec![0.2, 1.0]]).unwrap();
    let cfg = ReceptionConfig {
        lambda_r: 0.0,
        x_thr: 5.0,
        ..ReceptionConfig::default()
    };
    let mut r = rng::seeded(0);
    assert_eq!(receive(&a, &[10, 10], &cfg, &mut r), vec![2.0, 7.0]);
    assert_eq!(receive(&a, &[3, 0], &cfg, &mut r), vec![0.0, 0.0]);
}

#[test]
fn observation_noise_has_poisson_mean() {
    let a = AffinityMatrix::from_rows(&[vec![1.0]]).unwrap();
    let cfg = ReceptionConfig {
        lambda_r: 10.0,
        x_thr: 0.0,
        ..ReceptionConfig::default()
    };
    let mut r = rng::seeded(11);
    let n = 40_000;
    let mean: f64 = (0..n)
        .map(|_| observe(&a, &[20.0], &cfg, &mut r).y[0])
        .sum::<f64>()
        / n as f64;
    // E y = 20 + 10, sd of the mean = sqrt(30 / n)
    assert!((mean - 30.0).abs() < 5.0 * (30.0f64 / n as f64).sqrt());
}

fn params() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.05f64..5.0, 0.05f64..5.0, 1e-4f64..1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn integral_matches_quadrature((a, b, g) in params()) {
        let c = ch(a, b, g);
        let end = 60.0 * a.max(b);
        let q = gauss(|t| c.rate(t), 0.0, end, 4000);
        prop_assert!((c.integral(0.0, f64::INFINITY).unwrap() - g).abs() < 1e-9);
        prop_assert!((q - g).abs() < 1e-9, "quadrature {q} vs gamma {g}");
        let part = gauss(|t| c.rate(t), 0.3, 1.1, 50);
        prop_assert!((c.integral(0.3, 1.1).unwrap() - part).abs() < 1e-10);
    }

    #[test]
    fn peak_time_is_the_rate_maximum((a, b, g) in params()) {
        let c = ch(a, b, g);
        let tp = c.peak_time();
        let h = 1e-4 * tp;
        prop_assert!(c.rate(tp) >= c.rate(tp - h) && c.rate(tp) >= c.rate(tp + h));
        prop_assert!((tp - a * (1.0 + b / a).ln()).abs() < 1e-12 * (1.0 + tp));
    }

    #[test]
    fn integral_is_additive((a, b, g) in params(), t0 in 0.0f64..5.0, d1 in 0.0f64..5.0, d2 in 0.0f64..5.0) {
        let c = ch(a, b, g);
        let (t1, t2) = (t0 + d1, t0 + d1 + d2);
        let lhs = c.integral(t0, t1).unwrap() + c.integral(t1, t2).unwrap();
        prop_assert!((lhs - c.integral(t0, t2).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn arrivals_are_linear_in_releases(
        n1 in 1.0f64..1e5, n2 in 1.0f64..1e5, t1 in 0.0f64..3.0, t2 in 0.0f64..3.0, j in 1usize..40,
    ) {
        let mixes = vec![Mixture::from_labels(&[1, 2]).unwrap(), Mixture::from_labels(&[2, 3]).unwrap()];
        let m = build_construction_matrix(&mixes, 3).unwrap();
        let chans = vec![ch(0.5, 1.7, 0.01), ch(0.2, 0.9, 0.03), ch(1.0, 2.0, 0.02)];
        let cfg = ReceptionConfig::default();
        let e1 = ReleaseEvent { mixture_id: 0, release_time: t1, n_rls: n1 };
        let e2 = ReleaseEvent { mixture_id: 1, release_time: t2, n_rls: n2 };
        let both = expected_arrivals(&[e1, e2], &m, &chans, &cfg, j).unwrap();
        let a = expected_arrivals(&[e1], &m, &chans, &cfg, j).unwrap();
        let b = expected_arrivals(&[e2], &m, &chans, &cfg, j).unwrap();
        let double = expected_arrivals(&[ReleaseEvent { n_rls: 2.0 * n1, ..e1 }], &m, &chans, &cfg, j).unwrap();
        for q in 0..3 {
            prop_assert!((both[q] - a[q] - b[q]).abs() <= 1e-9 * (1.0 + both[q]));
            prop_assert!((double[q] - 2.0 * a[q]).abs() <= 1e-9 * (1.0 + double[q]));
        }
    }

    #[test]
    fn releases_shift_by_whole_samples(t in 0.0f64..2.0, k in 0usize..10, j in 1usize..30) {
        let mixes = vec![Mixture::from_labels(&[1, 2]).unwrap()];
        let m = build_construction_matrix(&mixes, 2).unwrap();
        let chans = vec![ch(0.5, 1.7, 0.01), ch(0.3, 1.2, 0.02)];
        let cfg = ReceptionConfig::default();
        let ev = ReleaseEvent { mixture_id: 0, release_time: t, n_rls: 1e4 };
        let late = ReleaseEvent { release_time: t + k as f64 * cfg.delta_t, ..ev };
        let x = expected_arrivals(&[ev], &m, &chans, &cfg, j).unwrap();
        let y = expected_arrivals(&[late], &m, &chans, &cfg, j + k).unwrap();
        for q in 0..2 {
            prop_assert!((x[q] - y[q]).abs() <= 1e-9 * (1.0 + x[q]));
        }
    }
}
