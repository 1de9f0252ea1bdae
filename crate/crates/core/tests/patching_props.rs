use patchx::data::TimeSeriesSample;
use patchx::patching::{enumerate_patches, sample_patches, transform, PatchConfig};
use proptest::prelude::*;

fn sample_strategy() -> impl Strategy<Value = TimeSeriesSample> {
    (1usize..4, 1usize..40).prop_flat_map(|(channels, length)| {
        prop::collection::vec(-5.0f64..5.0, channels * length)
            .prop_map(move |values| TimeSeriesSample::new(0, channels, length, values, 1).unwrap())
    })
}

fn config_for(length: usize) -> impl Strategy<Value = (usize, usize)> {
    (1..=length, 1..=length)
}

proptest! {
    #[test]
    fn enumeration_matches_literal_scan(length in 1usize..200, stride in 1usize..60, plen in 1usize..60) {
        prop_assume!(plen <= length);
        let cfg = PatchConfig::plain(stride, plen).unwrap();
        let mut expected = Vec::new();
        for p in 0..=length {
            if p * stride < length {
                expected.push((p, p * stride, (p * stride + plen).min(length)));
            }
        }
        let got: Vec<_> = enumerate_patches(length, &cfg).iter().map(|s| (s.index, s.start, s.end)).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn transform_preserves_length_and_zeroes_outside(
        (sample, (stride, plen)) in sample_strategy().prop_flat_map(|s| { let l = s.length; (Just(s), config_for(l)) }),
        attach: bool,
        notemp: bool,
    ) {
        let cfg = PatchConfig::new(stride, plen, true, attach, notemp).unwrap();
        for span in enumerate_patches(sample.length, &cfg) {
            let inst = transform(&sample, span.index, &cfg, 0).unwrap();
            prop_assert_eq!(inst.length, sample.length);
            prop_assert_eq!(inst.channels, sample.channels + attach as usize);
            prop_assert_eq!(inst.label, sample.label);
            let shift = if notemp { span.start } else { 0 };
            for c in 0..sample.channels {
                for t in 0..sample.length {
                    // Hand-shifted oracle: position t holds source t + shift when in range.
                    let expected = if t + shift >= span.start && t + shift < span.end {
                        sample.channel(c)[t + shift]
                    } else {
                        0.0
                    };
                    prop_assert_eq!(inst.channel(c)[t].to_bits(), expected.to_bits());
                }
            }
            if attach {
                let mask = inst.channel(sample.channels);
                for (t, &m) in mask.iter().enumerate() {
                    let inside = inst.valid_range.contains(&t);
                    prop_assert_eq!(m, if inside { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn coverage_weighted_sum_reconstructs_sample(
        (sample, (stride, plen)) in sample_strategy().prop_flat_map(|s| { let l = s.length; (Just(s), config_for(l)) }),
        attach: bool,
    ) {
        let cfg = PatchConfig::new(stride, plen, true, attach, false).unwrap();
        let patches = sample_patches(&sample, &[cfg]).unwrap();
        let mut coverage = vec![0usize; sample.length];
        for span in enumerate_patches(sample.length, &cfg) {
            for t in span.range() {
                coverage[t] += 1;
            }
        }
        for c in 0..sample.channels {
            for (t, &n) in coverage.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let sum: f64 = patches.iter().map(|p| p.channel(c)[t]).sum();
                let rebuilt = sum / n as f64;
                let orig = sample.channel(c)[t];
                prop_assert!((rebuilt - orig).abs() <= 1e-12 * orig.abs().max(1.0));
            }
        }
    }
}

#[test]
fn configs_without_zero_are_rejected() {
    assert!(PatchConfig::new(5, 10, false, false, false).is_err());
    assert!(PatchConfig::new(5, 10, false, true, true).is_err());
}
