use kdmi::clustering::{augment_and_pick, brute_force, brute_force_optima, dmi_score, k_cofactors, random_init};
use kdmi::matrix::determinant;
use kdmi::{dmi_cluster, fixtures, AssignmentMatrix, DenseMatrix, SolverConfig, SolverMode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FIXTURE_30X2: [usize; 30] =
    [0, 1, 1, 0, 2, 1, 0, 1, 2, 0, 1, 0, 2, 2, 0, 0, 0, 1, 2, 1, 2, 0, 0, 0, 2, 2, 1, 1, 1, 2];
const FIXTURE_20X3: [usize; 20] = [1, 1, 2, 1, 0, 0, 0, 2, 0, 1, 1, 0, 2, 2, 0, 1, 2, 0, 2, 0];

fn kcofactors_best(a: &DenseMatrix, restarts: usize) -> f64 {
    let config = SolverConfig { mode: SolverMode::KCofactors, restarts, ..SolverConfig::default() };
    dmi_cluster(a, &config).unwrap().score
}

#[test]
fn fixture_30x2_regression() {
    let a = fixtures::kcofactors_30x2();
    let r = dmi_cluster(&a, &SolverConfig::default()).unwrap();
    assert_eq!(r.assignment.labels(), FIXTURE_30X2);
    // A long restart budget of the local search cannot beat the exact answer.
    assert!(kcofactors_best(&a, 200) <= r.score * (1.0 + 1e-12));
}

#[test]
fn fixture_20x3_regression() {
    let a = fixtures::dmi_20x3();
    let r = dmi_cluster(&a, &SolverConfig::default()).unwrap();
    assert_eq!(r.assignment.labels(), FIXTURE_20X3);
    assert_eq!(r.picked_columns.indices(), &[0, 1, 2]);
    assert!(kcofactors_best(&a, 200) <= r.score * (1.0 + 1e-12));
}

#[test]
fn fixture_7x2_matches_brute_force_and_its_image() {
    let a = fixtures::affine_7x2();
    let (t, b) = fixtures::transform_t_b();
    let moved = a.matmul(&t).unwrap().add_row_vector(&b).unwrap();
    let exact = dmi_cluster(&a, &SolverConfig::default()).unwrap();
    let brute = brute_force(&a.with_ones_column(), 1 << 20).unwrap();
    assert!(exact.assignment.same_partition(&brute.assignment));
    let image = dmi_cluster(&moved, &SolverConfig::default()).unwrap();
    assert_eq!(image.assignment, exact.assignment);
    let det_t = determinant(&t).unwrap().abs();
    assert!((image.score / exact.score - det_t).abs() < 1e-12);
}

#[test]
fn legal_input_is_recovered_by_every_solver() {
    // Vertices of a triangle, repeated.
    let b = [[0.0, 0.0], [3.0, 0.0], [0.0, 2.0]];
    let labels = [0usize, 1, 2, 2, 1, 0, 0, 1];
    let rows: Vec<[f64; 2]> = labels.iter().map(|&l| b[l]).collect();
    let a = DenseMatrix::from_rows(&rows).unwrap();
    let truth = AssignmentMatrix::from_labels(labels.to_vec(), 3).unwrap();
    for mode in [SolverMode::Auto, SolverMode::Exact, SolverMode::KCofactors, SolverMode::BruteForce] {
        let r = dmi_cluster(&a, &SolverConfig { mode, ..SolverConfig::default() }).unwrap();
        assert!(r.assignment.same_partition(&truth), "{mode:?}");
    }
}

fn points(n: std::ops::RangeInclusive<usize>, d: usize) -> impl Strategy<Value = DenseMatrix> {
    n.prop_flat_map(move |n| proptest::collection::vec(-10.0f64..10.0, n * d))
        .prop_map(move |v| DenseMatrix::new(v.len() / d, d, v).unwrap())
}

fn well_conditioned(d: usize) -> impl Strategy<Value = (DenseMatrix, Vec<f64>)> {
    (proptest::collection::vec(-2.0f64..2.0, d * d), proptest::collection::vec(-5.0f64..5.0, d))
        .prop_map(move |(t, b)| (DenseMatrix::new(d, d, t).unwrap(), b))
        .prop_filter("invertible", |(t, _)| determinant(t).unwrap().abs() > 0.05)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auto_solver_is_affine_invariant(a in points(4..=12, 2), (t, b) in well_conditioned(2)) {
        let moved = a.matmul(&t).unwrap().add_row_vector(&b).unwrap();
        let config = SolverConfig::default();
        let (x, y) = (dmi_cluster(&a, &config), dmi_cluster(&moved, &config));
        if let (Ok(x), Ok(y)) = (x, y) {
            // Equal-score optima may be broken differently; compare scores.
            let ratio = y.score / x.score;
            prop_assert!((ratio / determinant(&t).unwrap().abs() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn score_scales_by_the_determinant(a in points(4..=9, 2), (t, b) in well_conditioned(2), seed in any::<u64>()) {
        let aug = augment_and_pick(&a).unwrap();
        prop_assume!(aug.k == 3);
        let moved = augment_and_pick(&a.matmul(&t).unwrap().add_row_vector(&b).unwrap()).unwrap();
        let c = random_init(a.rows(), 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let before = dmi_score(&c, &aug.matrix).unwrap();
        let after = dmi_score(&c, &moved.matrix).unwrap();
        prop_assert!((after - before * determinant(&t).unwrap().abs()).abs() <= 1e-8 * after.max(1.0));
    }

    #[test]
    fn result_is_a_legal_partition(a in points(3..=25, 3)) {
        if let Ok(r) = dmi_cluster(&a, &SolverConfig::default()) {
            prop_assert_eq!(r.assignment.n(), a.rows());
            prop_assert_eq!(r.assignment.k(), r.k);
            prop_assert!(!r.assignment.has_empty_cluster());
            prop_assert_eq!(r.assignment.clone(), r.assignment.canonical());
            prop_assert!(r.score > 0.0);
        }
    }

    /// With k = 3 the score is the product of the cluster sizes times twice
    /// the area of the triangle of cluster means.
    #[test]
    fn score_is_sizes_times_simplex_volume(a in points(3..=12, 2), seed in any::<u64>()) {
        let c = random_init(a.rows(), 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assume!(!c.has_empty_cluster());
        let means: Vec<[f64; 2]> = (0..3).map(|k| {
            let m = c.members(k);
            let s = m.iter().fold([0.0, 0.0], |s, &i| [s[0] + a[(i, 0)], s[1] + a[(i, 1)]]);
            [s[0] / m.len() as f64, s[1] / m.len() as f64]
        }).collect();
        let area2 = ((means[1][0] - means[0][0]) * (means[2][1] - means[0][1])
            - (means[2][0] - means[0][0]) * (means[1][1] - means[0][1])).abs();
        let sizes: f64 = c.cluster_sizes().iter().map(|&s| s as f64).product();
        let score = dmi_score(&c, &a.with_ones_column()).unwrap();
        prop_assert!((score - sizes * area2).abs() <= 1e-9 * score.max(1.0));
    }

    /// For k = 2 every optimum splits the values at the mean.
    #[test]
    fn one_dimensional_optimum_splits_at_the_mean(v in proptest::collection::vec(-5.0f64..5.0, 2..=10)) {
        let a = DenseMatrix::column(&v).unwrap();
        let Ok(opt) = brute_force_optima(&a.with_ones_column(), 1 << 20, 1e-12) else { return Ok(()) };
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        for c in &opt.optima {
            let above: Vec<bool> = (0..v.len()).map(|i| v[i] > mean + 1e-9).collect();
            let side = |i: usize| c.label(i);
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if above[i] && !above[j] && (v[j] - mean).abs() > 1e-9 {
                        prop_assert_ne!(side(i), side(j));
                    }
                }
            }
        }
    }

    #[test]
    fn local_search_never_decreases(a in points(8..=20, 2), seed in any::<u64>()) {
        let aug = augment_and_pick(&a).unwrap();
        prop_assume!(aug.k == 3);
        let init = random_init(a.rows(), 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assume!(!init.has_empty_cluster());
        if let Ok(run) = k_cofactors(&aug.matrix, &init, 200) {
            for w in run.diagnostics.score_trajectory.windows(2) {
                prop_assert!(w[1] >= w[0] * (1.0 - 1e-12));
            }
        }
    }
}
