//! Masked sampling, softmax and initialization properties.

use edgecollab_neural::{attention_weights, masked_softmax, orthogonal_init, MaskedCategorical, NeuralError};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn empirical_frequencies_match_renormalized_softmax() {
    let logits = [0.4, -1.2, 2.0, 0.0, 0.9];
    let mask = [true, true, false, true, true];
    let d = MaskedCategorical::new(&logits, &mask).unwrap();
    // Oracle computed independently from the unmasked logits.
    let z: f64 = logits.iter().zip(&mask).filter(|(_, &m)| m).map(|(l, _)| l.exp()).sum();
    let expected: Vec<f64> = logits.iter().zip(&mask).map(|(l, &m)| if m { l.exp() / z } else { 0.0 }).collect();

    let draws = 100_000;
    let mut counts = [0usize; 5];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..draws {
        let (i, logp, _) = d.sample(&mut rng);
        assert!(mask[i]);
        assert!((logp - expected[i].ln()).abs() < 1e-12);
        counts[i] += 1;
    }
    assert_eq!(counts[2], 0);
    for i in 0..5 {
        let freq = counts[i] as f64 / draws as f64;
        assert!((freq - expected[i]).abs() < 0.01, "category {i}: {freq} vs {}", expected[i]);
    }
}

#[test]
fn attention_three_examples() {
    let w = attention_weights(&[1.0, 0.0], &[vec![0.3, 1.0], vec![0.3, 1.0]], 2, &[true, true]).unwrap();
    assert_eq!(w, vec![0.5, 0.5]);
    let w = attention_weights(&[1.0], &[vec![4.0]], 1, &[true]).unwrap();
    assert_eq!(w, vec![1.0]);
    let w = attention_weights(&[2f64.ln()], &[vec![1.0], vec![0.0]], 1, &[true, true]).unwrap();
    assert!((w[0] - 2.0 / 3.0).abs() < 1e-15 && (w[1] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(attention_weights(&[1.0], &[vec![1.0]], 1, &[false]), Err(NeuralError::AllMasked));
}

#[test]
fn orthogonal_two_by_four_rows_are_orthonormal() {
    let w = orthogonal_init(2, 4, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
    for a in 0..2 {
        for b in 0..2 {
            let dot: f64 = w.row(a).iter().zip(w.row(b)).map(|(x, y)| x * y).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            assert!((dot - target).abs() < 1e-5);
        }
    }
}

fn logits_and_mask() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (1usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(-30.0f64..30.0, n),
            prop::collection::vec(any::<bool>(), n),
            0..n,
        )
            .prop_map(|(l, mut m, forced)| {
                m[forced] = true;
                (l, m)
            })
    })
}

proptest! {
    #[test]
    fn softmax_is_a_simplex_with_exact_zeros((logits, mask) in logits_and_mask()) {
        let p = masked_softmax(&logits, &mask).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (pi, &m) in p.iter().zip(&mask) {
            if m { prop_assert!(*pi >= 0.0) } else { prop_assert_eq!(*pi, 0.0) }
        }
    }

    #[test]
    fn sampling_is_unmasked_consistent_and_deterministic((logits, mask) in logits_and_mask(), seed in any::<u64>()) {
        let d = MaskedCategorical::new(&logits, &mask).unwrap();
        let a = d.sample(&mut ChaCha8Rng::seed_from_u64(seed));
        let b = d.sample(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(a, b);
        prop_assert!(mask[a.0]);
        prop_assert!((a.1.exp() - d.probs()[a.0]).abs() < 1e-12);
        prop_assert!(a.2 >= -1e-12);
    }

    #[test]
    fn all_masked_is_an_error(logits in prop::collection::vec(-5.0f64..5.0, 1..6)) {
        let mask = vec![false; logits.len()];
        prop_assert_eq!(MaskedCategorical::new(&logits, &mask), Err(NeuralError::AllMasked));
    }
}
