mod common;

use std::collections::BTreeSet;

use common::invariants::{conservation_errors, representation_errors};
use dclstm::dataio::{decode, encode, split_open_set, FrameFile, SplitSpec};
use dclstm::numcore::Rng;
use dclstm::openset::{recalibrate_with_survival, weibull_cdf, weibull_invf};
use dclstm::siggen::{ModulationType, SignalFrame};
use num_complex::Complex64;
use proptest::prelude::*;

fn samples(max_len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..max_len)
        .prop_filter("non-zero energy", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-6))
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

fn frame(samples: Vec<Complex64>) -> SignalFrame {
    SignalFrame {
        id: 0,
        label: ModulationType::Qpsk,
        snr_db: 0.0,
        samples,
    }
}

proptest! {
    #[test]
    fn representation_is_unit_rms_bounded_and_scale_free(s in samples(96), k in 1e-3f64..1e3) {
        let e = representation_errors(&frame(s), k);
        prop_assert!(e.rms < 1e-6, "rms {e:?}");
        prop_assert!(e.max_phase <= 1.0);
        prop_assert!(e.amplitude < 1e-12);
        prop_assert!(e.scale < 1e-12, "scale {e:?}");
    }

    #[test]
    fn recalibration_conserves_activation_mass(
        logits in prop::collection::vec(-30f64..30.0, 1..12),
        seed in any::<u64>(),
    ) {
        let mut rng = Rng::new(seed, 0);
        let survival: Vec<f64> = logits.iter().map(|_| rng.uniform()).collect();
        let (mass, prob) = conservation_errors(&logits, &survival);
        prop_assert!(mass < 1e-9);
        prop_assert!(prob < 1e-9);
    }

    #[test]
    fn full_survival_never_predicts_unknown(logits in prop::collection::vec(-30f64..30.0, 1..12)) {
        let n = logits.len();
        let p = recalibrate_with_survival(&logits, &vec![1.0; n]).unwrap();
        prop_assert_eq!(p.activations[n], 0.0);
        if logits.iter().any(|&v| v > 0.0) {
            prop_assert!(p.index < n);
        }
    }

    #[test]
    fn weibull_cdf_and_survival_sum_to_one(x in 0f64..50.0, a in 1e-3f64..20.0, b in 0.2f64..8.0) {
        let c = weibull_cdf(x, a, b).unwrap();
        let s = weibull_invf(x, a, b).unwrap();
        prop_assert!((0.0..=1.0).contains(&c) && (0.0..=1.0).contains(&s));
        prop_assert!((c + s - 1.0).abs() < 1e-12);
        let further = weibull_invf(x + 0.5, a, b).unwrap();
        prop_assert!(further <= s);
    }

    #[test]
    fn sigf_round_trip(
        labels in prop::collection::vec(0usize..3, 0..20),
        t_len in 1usize..16,
        seed in any::<u64>(),
    ) {
        let classes = vec![ModulationType::Bpsk, ModulationType::Gfsk, ModulationType::Wbfm];
        let mut rng = Rng::new(seed, 0);
        let frames = labels
            .iter()
            .enumerate()
            .map(|(id, &l)| SignalFrame {
                id: id as u64,
                label: classes[l],
                snr_db: (rng.uniform_range(-20.0, 20.0) as f32).round(),
                // f32-representable values survive the 32-bit storage exactly.
                samples: (0..t_len)
                    .map(|_| Complex64::new(rng.normal() as f32 as f64, rng.normal() as f32 as f64))
                    .collect(),
            })
            .collect();
        let file = FrameFile::new(classes, t_len, frames);
        let back = decode(&encode(&file).unwrap()).unwrap();
        prop_assert_eq!(back, file);
    }

    #[test]
    fn split_partitions_each_class(
        counts in prop::collection::vec(0usize..30, 4),
        known_mask in prop::collection::vec(any::<bool>(), 4),
        fraction in 0.05f64..1.0,
        seed in any::<u64>(),
    ) {
        let classes = vec![ModulationType::Bpsk, ModulationType::Qpsk, ModulationType::Psk8, ModulationType::Qam16];
        let mut frames = Vec::new();
        for (c, &n) in classes.iter().zip(&counts) {
            for _ in 0..n {
                frames.push(SignalFrame { id: frames.len() as u64, label: *c, snr_db: 0.0, samples: vec![Complex64::new(1.0, 0.0)] });
            }
        }
        let source = FrameFile::new(classes.clone(), 1, frames);
        let known: Vec<_> = classes.iter().zip(&known_mask).filter(|(_, &k)| k).map(|(c, _)| *c).collect();
        prop_assume!(!known.is_empty());
        let spec = SplitSpec::complementary(known.clone(), classes.clone(), fraction);
        let (train, test) = split_open_set(&source, &spec, &mut Rng::new(seed, 3)).unwrap();

        let train_ids: BTreeSet<u64> = train.frames.iter().map(|f| f.id).collect();
        let test_ids: BTreeSet<u64> = test.frames.iter().map(|f| f.id).collect();
        prop_assert!(train_ids.is_disjoint(&test_ids));
        prop_assert!(train.frames.iter().all(|f| known.contains(&f.label)));
        for (c, &n) in classes.iter().zip(&counts) {
            let n_train = (fraction * n as f64).round() as usize;
            if known.contains(c) {
                prop_assert_eq!(train.count_of(*c), n_train);
            }
            prop_assert_eq!(test.count_of(*c), n - n_train);
        }

        // Same seed: the test file does not depend on the known set.
        let all = SplitSpec::complementary(classes.clone(), classes.clone(), fraction);
        let (_, test_all) = split_open_set(&source, &all, &mut Rng::new(seed, 3)).unwrap();
        prop_assert_eq!(test_all.frames, test.frames);
    }
}
