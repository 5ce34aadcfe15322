//! Property tests for the elementary operations.

use poscal::{bin_index, softmax, BinningConfig, Logits, Matrix};
use proptest::collection::vec;
use proptest::prelude::*;

proptest! {
    #[test]
    fn softmax_rows_sum_to_one_even_for_huge_logits(
        row in vec(-1e4..1e4f64, 2..8)
    ) {
        let logits = Logits::new(Matrix::from_rows(&[row]).unwrap()).unwrap();
        let p = softmax(&logits);
        let sum: f64 = p.row(0).iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        prop_assert!(p.row(0).iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn softmax_preserves_argmax(row in vec(-50.0..50.0f64, 2..8)) {
        let logits = Logits::new(Matrix::from_rows(&[row.clone()]).unwrap()).unwrap();
        let p = softmax(&logits);
        let arg_z = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let arg_p = p.row(0)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        prop_assert_eq!(arg_z, arg_p);
    }

    #[test]
    fn softmax_shift_invariance(
        row in vec(-100.0..100.0f64, 2..8),
        shift in -100.0..100.0f64
    ) {
        let base = Logits::new(Matrix::from_rows(&[row.clone()]).unwrap()).unwrap();
        let shifted_row: Vec<f64> = row.iter().map(|z| z + shift).collect();
        let shifted = Logits::new(Matrix::from_rows(&[shifted_row]).unwrap()).unwrap();
        let (a, b) = (softmax(&base), softmax(&shifted));
        for j in 0..a.cols() {
            prop_assert!((a.get(0, j) - b.get(0, j)).abs() <= 1e-12);
        }
    }

    #[test]
    fn bin_index_is_monotone(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let cfg = BinningConfig::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(bin_index(lo, &cfg).unwrap() <= bin_index(hi, &cfg).unwrap());
    }

    #[test]
    fn bin_preimages_partition_unit_interval(p in 0.0..=1.0f64, bins in 2usize..32) {
        let cfg = BinningConfig::new(bins, 1e-6).unwrap();
        let b = bin_index(p, &cfg).unwrap();
        prop_assert!(b < bins);
        // p lies inside its bin: [lo, hi) except the last bin, which is closed.
        prop_assert!(p >= cfg.bin_lo(b));
        if b + 1 < bins {
            prop_assert!(p < cfg.bin_hi(b));
        } else {
            prop_assert!(p <= cfg.bin_hi(b));
        }
    }
}

#[test]
fn bin_edges_land_in_their_own_bin() {
    let cfg = BinningConfig::default();
    for b in 0..10 {
        let lo = b as f64 / 10.0;
        assert_eq!(bin_index(lo, &cfg).unwrap(), b);
    }
}
