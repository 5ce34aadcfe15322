//! Metrics against brute-force confusion-matrix construction and an
//! independent ECE recomputation from raw predictions.

mod common;

use common::*;
use poscal::binning::reliability_table;
use poscal::metrics::{accuracy, compute_metrics, ece, f1, matthews, F1Mode};
use poscal::BinningConfig;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn ece_matches_brute_recomputation_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x40);
    let cfg = BinningConfig::default();
    for _ in 0..100 {
        let n = rng.gen_range(1..400);
        let k = rng.gen_range(2..6);
        let preds = random_preds(n, k, 4.0, &mut rng);
        let labels = random_labels(n, k, &mut rng);
        let table = reliability_table(&preds, &labels, &cfg).unwrap();
        let got = ece(&table).unwrap();
        let brute = poscal_oracle::brute_ece(&preds_to_vecs(&preds), &labels, 10);
        assert_eq!(got.to_bits(), brute.to_bits());
    }
}

#[test]
fn ece_invariant_under_sample_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x41);
    let cfg = BinningConfig::default();
    let n = 200;
    let preds = random_preds(n, 3, 4.0, &mut rng);
    let labels = random_labels(n, 3, &mut rng);
    let base = ece(&reliability_table(&preds, &labels, &cfg).unwrap()).unwrap();

    // Reverse the sample order.
    let rows: Vec<Vec<f64>> = (0..n).rev().map(|i| preds.row(i).to_vec()).collect();
    let perm_preds =
        poscal::PredictionMatrix::new(poscal::Matrix::from_rows(&rows).unwrap()).unwrap();
    let perm_labels: Vec<usize> = (0..n).rev().map(|i| labels[i]).collect();
    let permuted = ece(&reliability_table(&perm_preds, &perm_labels, &cfg).unwrap()).unwrap();
    assert!((base - permuted).abs() < 1e-12);
}

#[test]
fn ece_invariant_under_class_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x42);
    let cfg = BinningConfig::default();
    let n = 200;
    let k = 4;
    let preds = random_preds(n, k, 4.0, &mut rng);
    let labels = random_labels(n, k, &mut rng);
    let base = ece(&reliability_table(&preds, &labels, &cfg).unwrap()).unwrap();

    // Rotate classes by one, permuting columns and labels together.
    let perm: Vec<usize> = (0..k).map(|j| (j + 1) % k).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0; k];
            for j in 0..k {
                row[perm[j]] = preds.get(i, j);
            }
            row
        })
        .collect();
    let relabeled_preds =
        poscal::PredictionMatrix::new(poscal::Matrix::from_rows(&rows).unwrap()).unwrap();
    let relabeled: Vec<usize> = labels.iter().map(|&y| perm[y]).collect();
    let permuted = ece(&reliability_table(&relabeled_preds, &relabeled, &cfg).unwrap()).unwrap();
    assert!((base - permuted).abs() < 1e-12);
}

#[test]
fn accuracy_and_f1_match_brute_confusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x43);
    for _ in 0..100 {
        let n = rng.gen_range(1..200);
        let k = rng.gen_range(2..6);
        let preds = random_preds(n, k, 4.0, &mut rng);
        let labels = random_labels(n, k, &mut rng);
        let vecs = preds_to_vecs(&preds);
        assert_eq!(
            accuracy(&preds, &labels).unwrap(),
            poscal_oracle::brute_accuracy(&vecs, &labels)
        );
        assert_eq!(
            f1(&preds, &labels, F1Mode::Macro).unwrap(),
            poscal_oracle::brute_macro_f1(&vecs, &labels)
        );
        if k == 2 {
            assert_eq!(
                f1(&preds, &labels, F1Mode::PositiveClass).unwrap(),
                poscal_oracle::brute_positive_f1(&vecs, &labels)
            );
            assert_eq!(
                matthews(&preds, &labels).unwrap(),
                poscal_oracle::brute_matthews(&vecs, &labels)
            );
        }
    }
}

#[test]
fn calibrated_sampler_has_small_ece() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x44);
    let cfg = BinningConfig::default();
    let preds = uniform_binary_preds(50_000, &mut rng);
    let labels = labels_from_preds(&preds, &mut rng);
    let report = compute_metrics(&preds, &labels, &cfg).unwrap();
    assert!(report.ece < 0.05, "ECE {}", report.ece);
}

#[test]
fn report_ranges_are_sane() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x45);
    for _ in 0..20 {
        let n = rng.gen_range(2..100);
        let k = rng.gen_range(2..5);
        let preds = random_preds(n, k, 4.0, &mut rng);
        let labels = random_labels(n, k, &mut rng);
        let report = compute_metrics(&preds, &labels, &BinningConfig::default()).unwrap();
        assert!((0.0..=1.0).contains(&report.accuracy));
        assert!((0.0..=1.0).contains(&report.macro_f1));
        assert!((0.0..=1.0).contains(&report.ece));
        if let Some(m) = report.matthews {
            assert!((-1.0..=1.0).contains(&m));
        }
    }
}
