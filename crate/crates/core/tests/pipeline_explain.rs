//! Coherence between the pipeline, its explanations and the bundle format,
//! on a small trained model.

use std::sync::OnceLock;

use patchx::bundle::{read_bundle, to_bytes};
use patchx::data::{generate_anomaly, AnomalyGenSpec, Dataset};
use patchx::explain::{
    boundary_probe, confidence_histogram, explain_sample, mislabel_report, overlay, CategoryThresholds,
};
use patchx::metadata::{extract, MetadataOptions};
use patchx::neuralnet::{Activation, ConvBlock, TrainSpec};
use patchx::patching::{enumerate_patches, PatchConfig};
use patchx::pipeline::{PatchStageSpec, PatchX};
use patchx::shallow::ShallowSpec;

struct Fixture {
    model: PatchX,
    test: Dataset,
    rule_k: f64,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let gen = AnomalyGenSpec {
            train: 240,
            val: 80,
            test: 60,
            seed: 5,
            ..Default::default()
        };
        let (train, val, test) = generate_anomaly(&gen).unwrap();
        let configs = vec![PatchConfig::plain(5, 10).unwrap(), PatchConfig::plain(10, 20).unwrap()];
        let train_spec = TrainSpec {
            epochs: 4,
            early_stopping_patience: 2,
            learning_rate: 3e-3,
            seed: 1,
            ..Default::default()
        };
        let blocks = [4, 8]
            .map(|filters| ConvBlock {
                filters,
                kernel: 3,
                activation: Activation::Relu,
            })
            .to_vec();
        let spec = PatchStageSpec::new(configs, train_spec).with_blocks(blocks);
        let (model, _) = PatchX::fit(&spec, MetadataOptions::default(), &ShallowSpec::svm(), &train, &val).unwrap();
        Fixture {
            model,
            test,
            rule_k: gen.sigma_multiplier,
        }
    })
}

#[test]
fn explanations_agree_with_the_pipeline() {
    let f = fixture();
    let thr = CategoryThresholds::default();
    let predicted = f.model.predict(&f.test).unwrap();
    for (s, &p) in f.test.samples.iter().zip(&predicted) {
        let e = explain_sample(&f.model, s, &thr).unwrap();
        assert_eq!(e.predicted, p);

        let spans: Vec<_> = f
            .model
            .stage
            .configs
            .iter()
            .enumerate()
            .flat_map(|(k, c)| {
                enumerate_patches(s.length, c)
                    .into_iter()
                    .map(move |sp| (k, sp.start, sp.end))
            })
            .collect();
        let got: Vec<_> = e.records.iter().map(|r| (r.config_index, r.start, r.end)).collect();
        assert_eq!(got, spans);

        // The sample prediction is the shallow model applied to the records' softmaxes.
        let pairs: Vec<_> = e.records.iter().map(|r| (r.config_index, r.softmax.clone())).collect();
        let v = extract(s.id, s.label, &pairs, f.model.stage.configs.len(), f.model.metadata).unwrap();
        assert_eq!(f.model.shallow.predict(&v).unwrap(), e.predicted);

        for r in &e.records {
            let max = r.softmax.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(r.confidence, max);
        }
        let rows = overlay(&e, f.model.class_count());
        assert_eq!(rows.len(), e.records.len());
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.alpha)));
    }
}

#[test]
fn histogram_counts_every_patch() {
    let f = fixture();
    let h = confidence_histogram(&f.model, &f.test, 0.05).unwrap();
    let per_sample: usize = f
        .model
        .stage
        .configs
        .iter()
        .map(|c| c.patch_count(f.test.length()))
        .sum();
    assert_eq!(h.total, per_sample * f.test.len());
    assert_eq!(h.counts.iter().sum::<usize>(), h.total);
    assert_eq!(h.edges[0], 0.5);
}

#[test]
fn histogram_of_a_uniform_network_sits_in_the_lowest_bin() {
    let f = fixture();
    let mut model = f.model.clone();
    model.stage.network.zero_head();
    let h = confidence_histogram(&model, &f.test, 0.05).unwrap();
    assert_eq!(h.counts[0], h.total);
}

#[test]
fn probe_identity_and_rule_flip() {
    let f = fixture();
    let thr = CategoryThresholds::default();
    let rule = patchx::data::AnomalyRule { k: f.rule_k };
    let s = &f.test.samples[0];
    let position = 20;
    let probe = boundary_probe(&f.model, s, 0, position, &[0.5, 1.0, 2.0], &rule, &thr).unwrap();
    assert_eq!(probe.steps.len(), 3);
    let plain = explain_sample(&f.model, s, &thr).unwrap();
    assert_eq!(probe.steps[1].records, plain.records);
    assert_eq!(probe.steps[1].sample_prediction, plain.predicted);

    // Scaling a point to a huge value must create an anomaly under the rule.
    let mut spike = s.clone();
    spike.channel_mut(1)[position] = 1.0;
    let factors: Vec<f64> = (0..=60).map(|i| i as f64).collect();
    let probe = boundary_probe(&f.model, &spike, 1, position, &factors, &rule, &thr).unwrap();
    let oracle: Vec<usize> = factors
        .iter()
        .map(|&k| {
            let mut x = spike.clone();
            x.channel_mut(1)[position] = k;
            rule.label(&x)
        })
        .collect();
    let got: Vec<usize> = probe.steps.iter().map(|st| st.ground_truth).collect();
    assert_eq!(got, oracle);
    assert_eq!(*oracle.last().unwrap(), 1);

    assert!(boundary_probe(&f.model, s, 0, 50, &[1.0], &rule, &thr).is_err());
    assert!(boundary_probe(&f.model, s, 0, 3, &[1.0, 1.0], &rule, &thr).is_err());
}

#[test]
fn mislabel_report_matches_evaluation() {
    let f = fixture();
    let thr = CategoryThresholds::default();
    let report = mislabel_report(&f.model, &f.test, &thr).unwrap();
    let eval = f.model.evaluate(&f.test).unwrap();
    assert_eq!(report.len(), eval.total - eval.correct);
    assert!(report.windows(2).all(|w| w[0].margin >= w[1].margin));
    for entry in &report {
        let s = f.test.samples.iter().find(|s| s.id == entry.sample_id).unwrap();
        assert_eq!(entry.records, explain_sample(&f.model, s, &thr).unwrap().records);
        assert_ne!(entry.true_label, entry.predicted);
    }
}

#[test]
fn bundle_round_trip_predicts_identically() {
    let f = fixture();
    let bytes = to_bytes(&f.model).unwrap();
    let loaded = read_bundle(bytes.as_slice()).unwrap();
    assert_eq!(to_bytes(&loaded).unwrap(), bytes);
    for s in &f.test.samples {
        let a = f.model.predict_sample(s).unwrap();
        let b = loaded.predict_sample(s).unwrap();
        assert_eq!(a.predicted, b.predicted);
        assert_eq!(a.patches, b.patches);
    }
}
