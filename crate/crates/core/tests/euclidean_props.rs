use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use rcm_core::euclidean::{
    analyze_spectrum, build_system_matrix, predicted_limit, simulate_euclidean, ZERO_EIGENVALUE_TOL,
};
use rcm_core::graph::{generate, Graph, Topology};
use rcm_core::harness::verify::quadratic_roots;
use rcm_core::rng::rng_from_seed;

fn connected_graph(seed: u64) -> Graph {
    let mut rng = rng_from_seed(seed);
    let n = rng.random_range(2..=10);
    let p = rng.random_range(0.2..=1.0);
    generate(Topology::ErdosRenyi(p), n, &mut rng).unwrap()
}

fn normal_vector(len: usize, seed: u64) -> DVector<f64> {
    let mut rng = rng_from_seed(seed);
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn kron_identity(m: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    m.kronecker(&DMatrix::identity(dim, dim))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn spectrum_matches_quadratic_roots(seed in any::<u64>()) {
        let g = connected_graph(seed);
        let l = g.laplacian_matrix();
        let report = analyze_spectrum(&build_system_matrix(&l).unwrap(), ZERO_EIGENVALUE_TOL).unwrap();
        prop_assert!(report.lemma_holds);
        prop_assert_eq!(report.zero_multiplicity, 1);
        prop_assert!(report.max_nonzero_real_part < -1e-6);
        let roots = quadratic_roots(&l);
        for (z, r) in report.eigenvalues.iter().zip(&roots) {
            prop_assert!((z.re - r).abs() <= 1e-9 && z.im.abs() <= 1e-9, "{z} vs {r}");
        }
    }

    #[test]
    fn null_vectors(seed in any::<u64>()) {
        let g = connected_graph(seed);
        let n = g.n_agents();
        let a = build_system_matrix(&g.laplacian_matrix()).unwrap();
        let a = a.matrix();
        let p = DVector::from_fn(2 * n, |i, _| if i < n { 0.0 } else { 1.0 });
        let q = DVector::from_fn(2 * n, |i, _| if i < n { -1.0 } else { 1.0 });
        prop_assert!((a * &p).amax() <= 1e-12);
        prop_assert!((q.transpose() * a).amax() <= 1e-12);
    }

    #[test]
    fn kronecker_apply_matches_dense(seed in any::<u64>(), dim in 1usize..4) {
        let g = connected_graph(seed);
        let a = build_system_matrix(&g.laplacian_matrix()).unwrap();
        let y = normal_vector(2 * g.n_agents() * dim, seed);
        let dense = kron_identity(a.matrix(), dim) * &y;
        prop_assert!((a.apply_kron(&y, dim) - dense).amax() <= 1e-12);
    }

    #[test]
    fn limit_equals_explicit_projector(seed in any::<u64>(), dim in 1usize..4) {
        let g = connected_graph(seed);
        let n = g.n_agents();
        let len = n * dim;
        let z = normal_vector(len, seed);
        let x0 = normal_vector(len, seed ^ 0xabc);
        let limit = predicted_limit(&x0, &z, n, dim).unwrap();
        // (p q^T) kron I_n applied to (v(0), x(0)) with v(0) = x(0) - z
        let p = DVector::from_fn(2 * n, |i, _| if i < n { 0.0 } else { 1.0 });
        let q = DVector::from_fn(2 * n, |i, _| if i < n { -1.0 } else { 1.0 } / n as f64);
        let projector = kron_identity(&(p * q.transpose()), dim);
        let mut y0 = DVector::zeros(2 * len);
        y0.rows_mut(0, len).copy_from(&(&x0 - &z));
        y0.rows_mut(len, len).copy_from(&x0);
        let y_star = projector * y0;
        prop_assert!(y_star.rows(0, len).amax() <= 1e-12);
        prop_assert!((y_star.rows(len, len) - &limit.x_star).amax() <= 1e-12);
        prop_assert_eq!(limit.v_star.amax(), 0.0);
    }
}

/// The distance to the limit decays exponentially: its logarithm is a straight line.
#[test]
fn convergence_is_exponential() {
    for seed in 0..10 {
        let mut rng = rng_from_seed(seed);
        let n = [3, 6, 9][seed as usize % 3];
        let g = generate(Topology::ErdosRenyi(0.6), n, &mut rng).unwrap();
        let z = normal_vector(2 * n, seed);
        let x0 = normal_vector(2 * n, seed + 100);
        let limit = predicted_limit(&x0, &z, n, 2).unwrap();
        let traj = simulate_euclidean(&g.laplacian_matrix(), &z, &x0, 2, 0.05, 2000).unwrap();
        let (xs, ys): (Vec<f64>, Vec<f64>) = traj
            .iter()
            .enumerate()
            .skip(200)
            .map(|(k, s)| (k as f64, ((&s.x - &limit.x_star).norm() + s.v.norm()).ln()))
            .filter(|(_, y)| *y > -25.0)
            .unzip();
        assert!(xs.len() > 100, "seed {seed}: converged too early to fit");
        let m = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = ys.iter().map(|b| (b - my).powi(2)).sum();
        let r2 = sxy * sxy / (sxx * syy);
        assert!(sxy < 0.0 && r2 >= 0.99, "seed {seed}: R^2 {r2}");
    }
}

#[test]
fn disconnected_graph_breaks_simplicity() {
    let g = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
    let report = analyze_spectrum(&build_system_matrix(&g.laplacian_matrix()).unwrap(), ZERO_EIGENVALUE_TOL).unwrap();
    assert_eq!(report.zero_multiplicity, 2);
    assert!(!report.lemma_holds);
}

#[test]
fn euler_step_bound_is_enforced() {
    let g = generate(Topology::Complete, 10, &mut rng_from_seed(0)).unwrap();
    let z = normal_vector(10, 1);
    // largest root magnitude for rho = 10 is (21 + sqrt(41)) / 2, so the bound is about 0.146
    assert!(simulate_euclidean(&g.laplacian_matrix(), &z, &z, 1, 0.15, 10).is_err());
    assert!(simulate_euclidean(&g.laplacian_matrix(), &z, &z, 1, 0.14, 10).is_ok());
}
