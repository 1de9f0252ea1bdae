use patchx::data::TimeSeriesSample;
use patchx::neuralnet::{dataset_loss, forward, patch_cross_entropy, Network, NetworkSpec};
use patchx::patching::{enumerate_patches, sample_patches, transform, PatchConfig};
use proptest::prelude::*;

fn small_net(channels: usize, length: usize, seed: u64) -> Network {
    Network::new(NetworkSpec::new(channels, length, 2, seed).with_filters(&[4, 4])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn softmax_sums_to_one(values in prop::collection::vec(-50.0f64..50.0, 24), seed in 0u64..1000) {
        let net = small_net(2, 12, seed);
        let out = net.forward(&values).unwrap();
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        prop_assert!(out.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn values_outside_the_patch_never_reach_the_network(
        values in prop::collection::vec(-3.0f64..3.0, 40),
        noise in prop::collection::vec(-100.0f64..100.0, 40),
        attach: bool,
        notemp: bool,
    ) {
        let sample = TimeSeriesSample::new(0, 2, 20, values, 0).unwrap();
        let cfg = PatchConfig::new(4, 6, true, attach, notemp).unwrap();
        let net = small_net(2 + attach as usize, 20, 3);
        for span in enumerate_patches(20, &cfg) {
            let mut perturbed = sample.clone();
            for c in 0..2 {
                for t in (0..20).filter(|t| !span.contains(*t)) {
                    perturbed.channel_mut(c)[t] += noise[c * 20 + t];
                }
            }
            let a = forward(&net, &transform(&sample, span.index, &cfg, 0).unwrap()).unwrap();
            let b = forward(&net, &transform(&perturbed, span.index, &cfg, 0).unwrap()).unwrap();
            prop_assert_eq!(
                a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn dataset_loss_is_mean_of_patch_losses_and_order_free(
        values in prop::collection::vec(-2.0f64..2.0, 3 * 15),
        seed in 0u64..100,
        rotate in 0usize..20,
    ) {
        let samples: Vec<_> = (0..3)
            .map(|i| TimeSeriesSample::new(i, 1, 15, values[i * 15..(i + 1) * 15].to_vec(), i % 2).unwrap())
            .collect();
        let configs = [PatchConfig::plain(3, 5).unwrap(), PatchConfig::plain(5, 10).unwrap()];
        let mut patches: Vec<_> = samples.iter().flat_map(|s| sample_patches(s, &configs).unwrap()).collect();
        let net = small_net(1, 15, seed);

        let mut total = 0.0;
        for p in &patches {
            total += patch_cross_entropy(&forward(&net, p).unwrap(), p.label).unwrap();
        }
        let oracle = total / patches.len() as f64;
        let loss = dataset_loss(&net, &patches).unwrap();
        prop_assert!(loss >= 0.0);
        prop_assert!((loss - oracle).abs() <= 1e-12 * oracle.max(1.0));

        let k = rotate % patches.len();
        patches.rotate_left(k);
        patches.reverse();
        let shuffled = dataset_loss(&net, &patches).unwrap();
        prop_assert!((shuffled - loss).abs() <= 1e-9 * loss.max(1e-300));
    }
}

#[test]
fn empty_patch_list_is_an_error() {
    let net = small_net(1, 10, 0);
    assert!(dataset_loss(&net, &[]).is_err());
}

#[test]
fn cross_entropy_reference_values() {
    assert!(patch_cross_entropy(&[1.0, 0.0], 0).unwrap() <= 1e-11);
    assert!((patch_cross_entropy(&[0.5, 0.5], 1).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    assert!((patch_cross_entropy(&[0.9, 0.1], 1).unwrap() + 0.1f64.ln()).abs() < 1e-9);
    assert!(patch_cross_entropy(&[0.9, 0.1], 2).is_err());
}
