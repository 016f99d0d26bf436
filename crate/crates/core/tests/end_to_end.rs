use std::collections::BTreeMap;

use atca_core::atca::{inverse_frequency_weights, AcousticInput, AtcaConfig, FeatureNorm};
use atca_core::baseline::LinearBaseline;
use atca_core::dsp::{stft_logmel, StftConfig};
use atca_core::ensemble::{build_meta_examples, fit_stacked, predict_stacked, StackedConfig};
use atca_core::metrics::{compute_eer, merge_with_protocol};
use atca_core::protocol::{Label, Split};
use atca_core::synth::{plan_corpus, render_clip, CorpusConfig};
use atca_core::text::{toy_embed, ToyEmbedderConfig};
use atca_core::train::{ablate_text, score_protocol, train, TrainConfig};
use proptest::prelude::*;

#[test]
fn small_corpus_trains_scores_and_stacks() {
    let cfg = CorpusConfig {
        n_clips: 48,
        duration_s: 0.5,
        seed: 3,
        ..Default::default()
    };
    let plan = plan_corpus(&cfg).unwrap();
    let stft = StftConfig::default();
    let features: BTreeMap<_, _> = plan
        .manifest
        .clips
        .iter()
        .map(|c| {
            let spec = stft_logmel(&render_clip(&cfg, c).unwrap(), &stft).unwrap();
            (c.utt_id.clone(), AcousticInput { spec, raw: None })
        })
        .collect();
    let emb_cfg = ToyEmbedderConfig {
        dim: 16,
        ..Default::default()
    };
    let embeddings: BTreeMap<_, _> = plan
        .captions
        .iter()
        .map(|c| (c.utt_id.clone(), toy_embed(c, &emb_cfg).unwrap()))
        .collect();

    let protocol = &plan.track1;
    let train_rows: Vec<_> = protocol
        .iter()
        .filter(|e| e.split == Split::Train)
        .collect();
    let n_real = train_rows
        .iter()
        .filter(|e| e.label == Label::Bonafide)
        .count();
    let model = AtcaConfig {
        d_spec: stft.n_mels,
        d_text: 16,
        d_model: 8,
        d_k: 8,
        n_heads: 1,
        gru_hidden: 8,
        class_weights: inverse_frequency_weights(n_real, train_rows.len() - n_real),
        spec_norm: Some(
            FeatureNorm::fit(train_rows.iter().map(|e| &features[&e.utt_id].spec)).unwrap(),
        ),
        ..Default::default()
    };
    let tcfg = TrainConfig {
        epochs: 2,
        ..Default::default()
    };
    let (params, report) = train(protocol, &features, &embeddings, &tcfg, &model).unwrap();
    assert!(report.epochs.len() <= 2);
    assert!(report.best_epoch < report.epochs.len());

    let (again, _) = train(protocol, &features, &embeddings, &tcfg, &model).unwrap();
    assert_eq!(again, params);

    let full = score_protocol(&params, protocol, &features, &embeddings).unwrap();
    let ablated = ablate_text(&params, protocol, &features, &embeddings).unwrap();
    let baseline = LinearBaseline::fit(
        train_rows
            .iter()
            .map(|e| (&features[&e.utt_id].spec, e.label)),
        1.0,
    )
    .unwrap();
    let base: Vec<(String, f64)> = protocol
        .iter()
        .map(|e| {
            (
                e.utt_id.clone(),
                baseline.score(&features[&e.utt_id].spec).unwrap(),
            )
        })
        .collect();
    let pairs = |ts: &[atca_core::metrics::Trial]| {
        ts.iter()
            .map(|t| (t.utt_id.clone(), t.score))
            .collect::<Vec<_>>()
    };
    let sets = vec![pairs(&full), pairs(&ablated), base];

    for set in &sets {
        let trials = merge_with_protocol(set, protocol, Some(Split::Eval)).unwrap();
        let r = compute_eer(&trials).unwrap();
        assert!((0.0..=0.5).contains(&r.eer));
    }

    let meta = build_meta_examples(&sets, &embeddings, protocol).unwrap();
    assert_eq!(meta.len(), protocol.len());
    let fit = fit_stacked(
        &meta,
        &StackedConfig {
            gbm_rounds: 10,
            forest_trees: 5,
            folds: 3,
            ..Default::default()
        },
    )
    .unwrap();
    assert!((fit.model.combine_weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for m in &meta {
        assert!(predict_stacked(&fit.model, &m.features())
            .unwrap()
            .is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn corpus_plan_is_a_function_of_its_seed(seed in any::<u64>(), n in 8usize..40) {
        let cfg = CorpusConfig { seed, n_clips: n, ..Default::default() };
        let a = plan_corpus(&cfg).unwrap();
        let b = plan_corpus(&cfg).unwrap();
        prop_assert_eq!(&a.manifest, &b.manifest);
        prop_assert_eq!(&a.track1, &b.track1);
        prop_assert_eq!(&a.track2, &b.track2);
        prop_assert_eq!(a.manifest.clips.len(), n);
    }
}
