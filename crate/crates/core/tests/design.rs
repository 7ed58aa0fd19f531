use mmsk_core::affinity::{construct_affinity, load_fixture_affinity, AffinityParams};
use mmsk_core::channel::ReceptionConfig;
use mmsk_core::design::greedy::{allocate_molecules, build_alphabet, is_distinguishable};
use mmsk_core::design::*;
use mmsk_core::rng;
use proptest::prelude::*;

fn mix(labels: &[usize]) -> Mixture {
    Mixture::from_labels(labels).unwrap()
}

fn synthetic(n: usize, seed: u64) -> DissimilarityTable {
    use rand::Rng;
    let mut r = rng::seeded(seed);
    let mut v = vec![vec![f64::NAN; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = r.random_range(0.0..30.0);
            v[i][j] = d;
            v[j][i] = d;
        }
    }
    DissimilarityTable::from_values((0..n).map(Mixture::single).collect(), v).unwrap()
}

#[test]
fn metric_is_symmetric_and_order_free() {
    let a = load_fixture_affinity();
    let cfg = ReceptionConfig::default();
    let mc = MetricConfig::new(100.0, 2000, 3, ConcentrationProfile::SplitTotal);
    let d1 = dissimilarity(&a, &mix(&[4]), &mix(&[8]), &cfg, &mc).unwrap();
    let d2 = dissimilarity(&a, &mix(&[8]), &mix(&[4]), &cfg, &mc).unwrap();
    assert_eq!(d1, d2);
    // the same pair inside a larger table sees the same samples
    let t = dissimilarity_table(&a, &[mix(&[1]), mix(&[4]), mix(&[8])], &cfg, &mc).unwrap();
    assert_eq!(t.get(1, 2), d1);
    assert!(t.get(0, 0).is_nan());
}

#[test]
fn identical_mixtures_are_indistinguishable() {
    let a = load_fixture_affinity();
    let cfg = ReceptionConfig::default();
    let mc = MetricConfig::new(100.0, 500, 3, ConcentrationProfile::SplitTotal);
    let d = dissimilarity(&a, &mix(&[2, 3]), &mix(&[2, 3]), &cfg, &mc).unwrap();
    assert_eq!(d, f64::NEG_INFINITY);
}

#[test]
fn metric_grows_with_signal_level() {
    let a = load_fixture_affinity();
    let cfg = ReceptionConfig::default();
    let lo = MetricConfig::new(20.0, 4000, 5, ConcentrationProfile::SplitTotal);
    let hi = MetricConfig {
        x_bar_mix: 200.0,
        ..lo
    };
    let d_lo = dissimilarity(&a, &mix(&[1]), &mix(&[2]), &cfg, &lo).unwrap();
    let d_hi = dissimilarity(&a, &mix(&[1]), &mix(&[2]), &cfg, &hi).unwrap();
    assert!(d_hi > d_lo + 3.0, "{d_lo} -> {d_hi}");
}

#[test]
fn concentration_profiles() {
    let m = mix(&[2, 5]);
    assert_eq!(
        mixture_expected_concentration(&m, 5, 50.0).unwrap(),
        vec![0.0, 25.0, 0.0, 0.0, 25.0]
    );
    assert_eq!(
        profile_concentration(&m, 5, 50.0, ConcentrationProfile::PerConstituent).unwrap(),
        vec![0.0, 50.0, 0.0, 0.0, 50.0]
    );
    assert!(mixture_expected_concentration(&m, 4, 50.0).is_err());
    assert!(mixture_expected_concentration(&m, 5, 0.0).is_err());
}

#[test]
fn reception_matrix_reweights_by_capture_fraction() {
    let c = build_construction_matrix(&[mix(&[1, 2]), mix(&[3])], 3).unwrap();
    let r = build_reception_matrix(&c, &[0.01, 0.03, 0.02]).unwrap();
    assert!((r[(0, 0)] - 0.25).abs() < 1e-15 && (r[(1, 0)] - 0.75).abs() < 1e-15);
    assert_eq!(r[(2, 1)], 1.0);
    assert!(build_reception_matrix(&c, &[0.01, 0.0, 0.02]).is_err());
    assert!(build_reception_matrix(&c, &[0.01, 0.02]).is_err());
}

#[test]
fn book_ownership_and_json() {
    let b = reference_book(6, vec![0.01; 20], 50.0).unwrap();
    assert_eq!(b.num_tx(), 4);
    assert_eq!(b.num_mixtures(), 24);
    for m in 0..b.num_mixtures() {
        let k = b.owner(m);
        assert!(b.tx_range(k).contains(&m));
        assert!(b
            .mixture(m)
            .constituents()
            .iter()
            .all(|c| b.allocations()[k].contains(c)));
    }
    let sub = b.reception_for_tx(2);
    assert_eq!((sub.rows(), sub.cols()), (20, 6));
    let back = MixtureBook::from_json(&b.to_json().unwrap()).unwrap();
    assert_eq!(back.construction(), b.construction());
    assert!(reference_book(15, vec![0.01; 20], 50.0).is_err());
}

#[test]
fn random_books_are_valid_pairs() {
    let mut r = rng::seeded(9);
    for _ in 0..50 {
        let b = random_book(&mut r, 4, 4, 4, vec![0.01; 20], 50.0).unwrap();
        assert_eq!(b.num_mixtures(), 16);
        for k in 0..4 {
            let alpha = &b.alphabets()[k];
            assert!(alpha.iter().all(|m| m.len() == 2));
            for i in 0..alpha.len() {
                for j in i + 1..alpha.len() {
                    assert_ne!(alpha[i], alpha[j]);
                }
            }
        }
    }
    assert!(random_book(&mut r, 4, 4, 7, vec![0.01; 20], 50.0).is_err());
    assert!(random_book(&mut r, 6, 4, 2, vec![0.01; 20], 50.0).is_err());
}

#[test]
fn design_pipeline_on_a_small_matrix() {
    let a = construct_affinity(&AffinityParams::new(6, 8, 3, 0.3, 0.8, 5)).unwrap();
    let params = DesignParams {
        k: 2,
        q_tx: 3,
        m_mix: 2,
        d_thr: 5.0,
        metric: MetricConfig::new(60.0, 1000, 2, ConcentrationProfile::SplitTotal),
        mixture_profile: ConcentrationProfile::PerConstituent,
    };
    let out = design(&a, &params, &ReceptionConfig::default()).unwrap();
    assert_eq!(out.allocations.len(), 2);
    let mut all: Vec<usize> = out.allocations.iter().flatten().cloned().collect();
    all.sort_unstable();
    all.dedup();
    assert_eq!(all.len(), 6);
    for (k, alpha) in out.alphabets.iter().enumerate() {
        assert!(alpha.iter().all(|m| m
            .constituents()
            .iter()
            .all(|c| out.allocations[k].contains(c))));
        assert_eq!(out.min_metric[k].len() + 1, alpha.len().max(1));
        assert!(out.min_metric[k].iter().all(|v| *v >= 5.0));
    }
    let book = out.book(vec![0.01; 8], 50.0).unwrap();
    let json: serde_json::Value = serde_json::from_str(&out.to_json(&book).unwrap()).unwrap();
    assert!(json["construction"].is_array() && json["min_metric_by_size"].is_array());
}

#[test]
fn allocation_rejects_impossible_requests() {
    let t = synthetic(6, 1);
    assert!(allocate_molecules(&t, 2, 4).is_err());
    assert!(allocate_molecules(&t, 2, 1).is_err());
}

#[test]
fn alphabet_with_unreachable_threshold_is_empty() {
    let t = synthetic(5, 2);
    let a = build_alphabet(&t, 1e3);
    assert!(a.members.is_empty() && a.min_metric.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn allocation_partitions_into_equal_groups(n in 4usize..16, k in 1usize..4, seed in 0u64..10_000) {
        let q_tx = (n / k).max(2);
        prop_assume!(k * q_tx <= n);
        let t = synthetic(n, seed);
        let sets = allocate_molecules(&t, k, q_tx).unwrap();
        prop_assert_eq!(sets.len(), k);
        let mut seen = vec![false; n];
        for s in &sets {
            prop_assert_eq!(s.len(), q_tx);
            for &q in s {
                prop_assert!(!seen[q]);
                seen[q] = true;
            }
        }
    }

    #[test]
    fn alphabet_is_distinguishable_and_running_min_decreases(n in 3usize..14, d_thr in 0.0f64..25.0, seed in 0u64..10_000) {
        let t = synthetic(n, seed);
        let a = build_alphabet(&t, d_thr);
        prop_assert!(is_distinguishable(&t, &a.members, d_thr));
        prop_assert!(a.min_metric.windows(2).all(|w| w[1] <= w[0]));
        if a.members.len() >= 2 {
            prop_assert_eq!(a.min_metric.len(), a.members.len() - 1);
            // the running value is the true minimum over the chosen prefix
            for i in 0..a.min_metric.len() {
                let prefix = &a.members[..i + 2];
                let mut m = f64::INFINITY;
                for x in 0..prefix.len() {
                    for y in x + 1..prefix.len() {
                        m = m.min(t.get(prefix[x], prefix[y]));
                    }
                }
                prop_assert_eq!(a.min_metric[i], m);
            }
        }
        // with no threshold every candidate is eventually taken
        prop_assert_eq!(build_alphabet(&t, f64::NEG_INFINITY).members.len(), n);
    }
}
