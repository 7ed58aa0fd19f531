use mmsk_conic::linalg::{dot, norm2};
use mmsk_conic::{solve, solve_from, ConeSpec, InitialPoint, Matrix, Problem, Settings, Status};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kkt_report(p: &Problem, x: &[f64], s: &[f64], z: &[f64]) -> (f64, f64, f64) {
    let gx = p.g.mul_vec(x);
    let pres: f64 = norm2(
        &gx.iter()
            .zip(s)
            .zip(&p.h)
            .map(|((a, b), h)| a + b - h)
            .collect::<Vec<_>>(),
    );
    let gtz = p.g.tmul_vec(z);
    let dres = norm2(&gtz.iter().zip(&p.c).map(|(a, c)| a + c).collect::<Vec<_>>());
    let gap = dot(&p.c, x) + dot(&p.h, z);
    (pres, dres, gap)
}

#[test]
fn small_lp_vertex() {
    // max x1 + x2 subject to two resource limits
    let g = Matrix::from_rows(&[[1.0, 2.0], [3.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]);
    let p = Problem::new(
        vec![-1.0, -1.0],
        g,
        vec![4.0, 6.0, 0.0, 0.0],
        ConeSpec::new(4, vec![]),
    )
    .unwrap();
    let sol = solve(&p, &Settings::default());
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.x[0] - 1.6).abs() < 1e-7);
    assert!((sol.x[1] - 1.2).abs() < 1e-7);
    assert!((sol.primal_objective + 2.8).abs() < 1e-7);
}

#[test]
fn linear_objective_over_unit_disc() {
    let g = Matrix::from_rows(&[[0.0, 0.0], [-1.0, 0.0], [0.0, -1.0]]);
    let p = Problem::new(
        vec![1.0, 1.0],
        g,
        vec![1.0, 0.0, 0.0],
        ConeSpec::new(0, vec![3]),
    )
    .unwrap();
    let sol = solve(&p, &Settings::default());
    assert_eq!(sol.status, Status::Optimal);
    let r = 0.5_f64.sqrt();
    assert!((sol.x[0] + r).abs() < 1e-7);
    assert!((sol.x[1] + r).abs() < 1e-7);
    assert!((sol.primal_objective + 2.0_f64.sqrt()).abs() < 1e-8);
}

#[test]
fn projection_onto_halfspace_via_epigraph() {
    // min t s.t. |x - a| <= t, x1 + x2 >= 3, a = (0, 0): distance sqrt(4.5)
    let g = Matrix::from_rows(&[
        [0.0, -1.0, -1.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
    ]);
    let p = Problem::new(
        vec![1.0, 0.0, 0.0],
        g,
        vec![-3.0, 0.0, 0.0, 0.0],
        ConeSpec::new(1, vec![3]),
    )
    .unwrap();
    let sol = solve(&p, &Settings::default());
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.x[0] - 4.5_f64.sqrt()).abs() < 1e-7);
    assert!((sol.x[1] - 1.5).abs() < 1e-6);
}

#[test]
fn detects_primal_infeasibility() {
    // x <= -1 and x >= 0
    let g = Matrix::from_rows(&[[1.0], [-1.0]]);
    let p = Problem::new(vec![1.0], g, vec![-1.0, 0.0], ConeSpec::new(2, vec![])).unwrap();
    let sol = solve(&p, &Settings::default());
    assert_eq!(sol.status, Status::PrimalInfeasible);
    // certificate: G^T z = 0, h^T z = -1, z >= 0
    assert!(p.g.tmul_vec(&sol.z)[0].abs() < 1e-7);
    assert!((dot(&p.h, &sol.z) + 1.0).abs() < 1e-9);
    assert!(sol.z.iter().all(|v| *v >= 0.0));
}

#[test]
fn detects_soc_infeasibility() {
    // |x| <= 1 and x >= 2
    let g = Matrix::from_rows(&[[-1.0], [0.0], [-1.0]]);
    let p = Problem::new(
        vec![0.0],
        g,
        vec![-2.0, 1.0, 0.0],
        ConeSpec::new(1, vec![2]),
    )
    .unwrap();
    let sol = solve(&p, &Settings::default());
    assert_eq!(sol.status, Status::PrimalInfeasible);
}

#[test]
fn detects_unboundedness() {
    let g = Matrix::from_rows(&[[-1.0]]);
    let p = Problem::new(vec![-1.0], g, vec![0.0], ConeSpec::new(1, vec![])).unwrap();
    let sol = solve(&p, &Settings::default());
    assert_eq!(sol.status, Status::DualInfeasible);
}

#[test]
fn rejects_inconsistent_dimensions() {
    let g = Matrix::from_rows(&[[1.0, 0.0]]);
    assert!(Problem::new(vec![1.0], g.clone(), vec![0.0], ConeSpec::new(1, vec![])).is_err());
    assert!(Problem::new(
        vec![1.0, 0.0],
        g.clone(),
        vec![0.0],
        ConeSpec::new(0, vec![2])
    )
    .is_err());
    assert!(Problem::new(vec![1.0, f64::NAN], g, vec![0.0], ConeSpec::new(1, vec![])).is_err());
}

fn random_interior(rng: &mut ChaCha8Rng, cone: &ConeSpec) -> Vec<f64> {
    let mut v = vec![0.0; cone.dim()];
    for x in v.iter_mut().take(cone.nonneg) {
        *x = rng.random_range(0.1..3.0);
    }
    for b in cone.soc_blocks() {
        let mut n2 = 0.0;
        for k in b.start + 1..b.end {
            v[k] = rng.random_range(-2.0..2.0);
            n2 += v[k] * v[k];
        }
        v[b.start] = (n2 as f64).sqrt() + rng.random_range(0.1..2.0);
    }
    v
}

/// Primal and dual strictly feasible by construction, so an optimum exists.
fn random_problem(seed: u64, n: usize, nonneg: usize, soc: Vec<usize>) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cone = ConeSpec::new(nonneg, soc);
    let m = cone.dim();
    let mut g = Matrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            g[(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let s0 = random_interior(&mut rng, &cone);
    let z0 = random_interior(&mut rng, &cone);
    let h: Vec<f64> = g.mul_vec(&x0).iter().zip(&s0).map(|(a, b)| a + b).collect();
    let c: Vec<f64> = g.tmul_vec(&z0).iter().map(|v| -v).collect();
    Problem::new(c, g, h, cone).unwrap()
}

fn assert_kkt(p: &Problem, sol: &mmsk_conic::Solution) {
    assert!(sol.status.is_optimal(), "{:?}", sol.status);
    let (pres, dres, gap) = kkt_report(p, &sol.x, &sol.s, &sol.z);
    let scale = 1.0 + sol.primal_objective.abs();
    assert!(pres < 1e-6 * (1.0 + norm2(&p.h)), "pres {pres}");
    assert!(dres < 1e-6 * (1.0 + norm2(&p.c)), "dres {dres}");
    assert!(gap.abs() < 1e-6 * scale, "gap {gap}");
    assert!(p.cone.min_eig(&sol.s) > -1e-7);
    assert!(p.cone.min_eig(&sol.z) > -1e-7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_feasible_problems_satisfy_kkt(
        seed in any::<u64>(),
        n in 1usize..8,
        nonneg in 0usize..10,
        soc in proptest::collection::vec(1usize..5, 0..4),
    ) {
        prop_assume!(nonneg + soc.iter().sum::<usize>() >= n);
        let p = random_problem(seed, n, nonneg, soc);
        let sol = solve(&p, &Settings::default());
        assert_kkt(&p, &sol);
    }

    #[test]
    fn optimum_independent_of_start(seed in any::<u64>()) {
        let p = random_problem(seed, 4, 6, vec![3, 3]);
        let base = solve(&p, &Settings::default());
        assert_kkt(&p, &base);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let start = InitialPoint {
            x: (0..4).map(|_| rng.random_range(-5.0..5.0)).collect(),
            s: random_interior(&mut rng, &p.cone),
            z: random_interior(&mut rng, &p.cone),
        };
        let other = solve_from(&p, &Settings::default(), &start).unwrap();
        assert_kkt(&p, &other);
        let tol = 1e-6 * (1.0 + base.primal_objective.abs());
        prop_assert!((base.primal_objective - other.primal_objective).abs() < tol);
    }
}

#[test]
fn bad_initial_point_rejected() {
    let p = random_problem(1, 2, 3, vec![]);
    let start = InitialPoint {
        x: vec![0.0; 2],
        s: vec![1.0, -1.0, 1.0],
        z: vec![1.0; 3],
    };
    assert!(solve_from(&p, &Settings::default(), &start).is_err());
}
