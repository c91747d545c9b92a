use kdmi::simulator::{generate_single_task, PredictionRule, SingleTaskWorld};
use kdmi::single_task::{
    canonical_orientation, estimate_moments, spectral_truth_serum, surprisingly_popular_single, SignalRecord,
    SingleTaskDataset, SingleTaskError, WorldLabel,
};
use proptest::prelude::*;

fn binary_world(p: f64, q: f64) -> SingleTaskWorld {
    SingleTaskWorld {
        worlds: vec![vec![p, 1.0 - p], vec![q, 1.0 - q]],
        prior: vec![0.5, 0.5],
        prediction: PredictionRule::Posterior,
    }
}

#[test]
fn sampled_moments_are_consistent() {
    let (d, _) = generate_single_task(&binary_world(0.8, 0.3), 400, 3).unwrap();
    let m = estimate_moments(&d).unwrap();
    assert!((m.answer_shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(m.prior_sum_defect.abs() < 1e-9);
    for r in 0..2 {
        // Covariance rows sum to zero because joint rows sum to the prior.
        let s: f64 = (0..2).map(|c| m.covariance[(r, c)]).sum();
        assert!(s.abs() < 1e-9);
    }
}

#[test]
fn spectral_eigenpair_satisfies_its_equation() {
    let world = SingleTaskWorld {
        worlds: vec![vec![0.6, 0.3, 0.1], vec![0.1, 0.3, 0.6]],
        prior: vec![0.5, 0.5],
        prediction: PredictionRule::Posterior,
    };
    for seed in 0..20 {
        let (d, _) = generate_single_task(&world, 300, seed).unwrap();
        let s = spectral_truth_serum(&d).unwrap();
        let norm: f64 = s.eigenvector.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert!(s.residual <= 1e-8);
        assert!(s.eigenvalue >= s.second_eigenvalue);
    }
}

#[test]
fn a_single_signal_is_degenerate() {
    let recs = vec![SignalRecord { signal: 0, prediction: vec![0.5, 0.5] }; 5];
    let d = SingleTaskDataset::new(2, recs).unwrap();
    assert!(matches!(
        spectral_truth_serum(&d),
        Err(SingleTaskError::MissingOption(_)) | Err(SingleTaskError::DegenerateSpectrum { .. })
    ));
}

#[test]
fn dataset_json_round_trip() {
    let (d, _) = generate_single_task(&binary_world(0.7, 0.2), 10, 1).unwrap();
    assert_eq!(SingleTaskDataset::from_json_str(&d.to_json_string()).unwrap(), d);
}

#[test]
fn orientation_makes_the_largest_entry_positive() {
    assert_eq!(canonical_orientation(&[0.2, -0.9, 0.1]), vec![-0.2, 0.9, -0.1]);
    assert_eq!(canonical_orientation(&[-0.5, 0.5]), vec![0.5, -0.5]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// With two options both methods compare the realized share of an
    /// option against its reconstructed prior.
    #[test]
    fn binary_sp_and_spectral_agree(p in 0.55f64..0.95, q in 0.05f64..0.45, seed in any::<u64>()) {
        let (d, _) = generate_single_task(&binary_world(p, q), 200, seed).unwrap();
        let Ok(s) = spectral_truth_serum(&d) else { return Ok(()) };
        let sp = surprisingly_popular_single(&d).unwrap();
        prop_assume!(!sp.tied && s.label.is_some());
        let sp_plus = canonical_orientation(&[1.0, -1.0]) == [1.0, -1.0];
        let expected = if (sp.option == 0) == sp_plus { WorldLabel::Plus } else { WorldLabel::Minus };
        prop_assert_eq!(s.label, Some(expected));
    }
}
