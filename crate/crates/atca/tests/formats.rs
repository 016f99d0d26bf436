use std::path::Path;

use atca::{atfx, captions, checkpoint, embeddings, ensemble_file, tsv, wav, Error};
use atca_core::atca::{AtcaConfig, AtcaParams, FeatureNorm};
use atca_core::dsp::{FeatureMatrix, Origin, Waveform};
use atca_core::ensemble::{fit_stacked, predict_stacked, MetaExample, StackedConfig};
use atca_core::metrics::Trial;
use atca_core::protocol::{Label, ProtocolEntry, Split};
use atca_core::text::{toy_embed, CaptionSet, Style, ToyEmbedderConfig};
use proptest::prelude::*;

fn p() -> &'static Path {
    Path::new("mem")
}

fn small_model(d_spec: usize, d_text: usize, heads: usize, layers: usize, raw: bool) -> AtcaConfig {
    AtcaConfig {
        d_spec,
        d_raw: if raw { 5 } else { 0 },
        d_model: 4 * heads,
        d_k: 4,
        n_heads: heads,
        gru_layers: layers,
        gru_hidden: 3,
        d_text,
        use_raw_branch: raw,
        class_weights: [0.7, 1.3],
        spec_norm: Some(FeatureNorm {
            mean: (0..d_spec).map(|i| i as f64 * 0.1).collect(),
            std: vec![1.5; d_spec],
        }),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wav_roundtrip(samples in prop::collection::vec(-1.2f64..1.2, 1..400), rate in prop::sample::select(vec![8000u32, 16000, 44100, 48000])) {
        let w = Waveform::new(samples, rate).unwrap();
        let a = wav::encode_wav(&w);
        let back = wav::decode_wav(&a, p()).unwrap();
        prop_assert_eq!(back.sample_rate(), rate);
        prop_assert_eq!(wav::encode_wav(&back), a);
    }

    #[test]
    fn atfx_roundtrip(rows in 1usize..20, cols in 1usize..20, seed in any::<u64>()) {
        let mut s = seed | 1;
        let values: Vec<f64> = (0..rows * cols)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                (s % 20001) as f64 / 100.0 - 100.0
            })
            .collect();
        let f = FeatureMatrix::new(rows, cols, values, Origin::Logmel).unwrap();
        let a = atfx::encode_features(&f);
        prop_assert_eq!(a.len(), atfx::HEADER_LEN + 4 * rows * cols);
        let (r, c, v) = atfx::decode_matrix(&a, p()).unwrap();
        prop_assert_eq!((r, c), (rows, cols));
        prop_assert_eq!(atfx::encode_matrix(r, c, &v), a);
    }

    #[test]
    fn score_tsv_roundtrip(scores in prop::collection::vec(-1e4f64..1e4, 0..60)) {
        let trials: Vec<Trial> = scores
            .iter()
            .enumerate()
            .map(|(i, &score)| Trial { utt_id: format!("u{i}"), label: Label::Spoof, score })
            .collect();
        let a = tsv::encode_trials(&trials);
        let back = tsv::decode_scores(&a, p()).unwrap();
        prop_assert_eq!(back.len(), trials.len());
        prop_assert_eq!(tsv::encode_scores(back.iter().map(|(id, s)| (id.as_str(), *s))), a);
    }

    #[test]
    fn checkpoint_roundtrip(d_spec in 1usize..6, d_text in 1usize..6, heads in 1usize..3, layers in 1usize..3, raw in any::<bool>(), seed in any::<u64>()) {
        let params = AtcaParams::init(small_model(d_spec, d_text, heads, layers, raw), seed).unwrap();
        let a = checkpoint::encode_checkpoint(&params);
        let back = checkpoint::decode_checkpoint(&a, p()).unwrap();
        prop_assert_eq!(&back.config, &params.config);
        prop_assert_eq!(checkpoint::encode_checkpoint(&back), a);
    }

    #[test]
    fn ensemble_roundtrip(n in 12usize..30, seed in 0u64..1000) {
        let examples: Vec<MetaExample> = (0..n)
            .map(|i| {
                let x = ((i as u64 * 7919 + seed) % 97) as f64 / 97.0;
                MetaExample {
                    utt_id: format!("u{i}"),
                    base_scores: vec![x, 1.0 - x * x, (x * 13.0).sin()],
                    text_feat: vec![x * 0.5, 0.25],
                    target: Some(if x > 0.5 { 1.0 } else { 0.0 }),
                }
            })
            .collect();
        let cfg = StackedConfig { gbm_rounds: 5, forest_trees: 4, folds: 3, seed, ..Default::default() };
        let fit = fit_stacked(&examples, &cfg).unwrap();
        let a = ensemble_file::encode_ensemble(&fit.model);
        let back = ensemble_file::decode_ensemble(&a, p()).unwrap();
        prop_assert_eq!(ensemble_file::encode_ensemble(&back), a.clone());
        for e in &examples {
            let f = e.features();
            prop_assert_eq!(predict_stacked(&back, &f).unwrap(), predict_stacked(&fit.model, &f).unwrap());
        }
    }
}

#[test]
fn atfx_short_payload_is_shape_mismatch() {
    let mut bytes = atfx::encode_header(2, 3).to_vec();
    for v in [1.0f32, 2.0, 3.0, 4.0, 5.0] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let err = atfx::decode_matrix(&bytes, p()).unwrap_err();
    assert_eq!(err.code(), "SHAPE_MISMATCH");
    bytes.extend_from_slice(&6.0f32.to_le_bytes());
    let (r, c, v) = atfx::decode_matrix(&bytes, p()).unwrap();
    assert_eq!((r, c), (2, 3));
    assert_eq!(v, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
}

#[test]
fn atfx_rejects_bad_magic_version_and_nan() {
    let mut bytes = atfx::encode_matrix(1, 1, &[0.5]);
    bytes[0] = b'X';
    assert!(matches!(
        atfx::decode_matrix(&bytes, p()),
        Err(Error::BadHeader { .. })
    ));
    let mut bytes = atfx::encode_matrix(1, 1, &[0.5]);
    bytes[4] = 2;
    assert!(matches!(
        atfx::decode_matrix(&bytes, p()),
        Err(Error::BadHeader { .. })
    ));
    let bytes = atfx::encode_matrix(1, 2, &[0.5, f64::NAN]);
    assert_eq!(
        atfx::decode_matrix(&bytes, p()).unwrap_err().code(),
        "NON_FINITE"
    );
}

#[test]
fn wav_rejects_non_pcm16_mono() {
    let w = Waveform::new(vec![0.0, 0.25, -0.5], 44100).unwrap();
    let good = wav::encode_wav(&w);

    assert!(matches!(
        wav::decode_wav(b"not a wav file", p()),
        Err(Error::NotWav(_))
    ));

    let mut stereo = good.clone();
    stereo[22] = 2;
    assert!(matches!(
        wav::decode_wav(&stereo, p()),
        Err(Error::UnsupportedFormat { .. })
    ));

    let mut eight_bit = good.clone();
    eight_bit[34] = 8;
    assert!(matches!(
        wav::decode_wav(&eight_bit, p()),
        Err(Error::UnsupportedFormat { .. })
    ));

    let truncated = &good[..good.len() - 3];
    assert!(matches!(
        wav::decode_wav(truncated, p()),
        Err(Error::TruncatedFile(_))
    ));
}

#[test]
fn wav_skips_unknown_chunks() {
    let w = Waveform::new(vec![0.5, -0.5], 16000).unwrap();
    let plain = wav::encode_wav(&w);
    let mut bytes = plain[..36].to_vec();
    bytes.extend_from_slice(b"LIST");
    bytes.extend_from_slice(&3u32.to_le_bytes());
    bytes.extend_from_slice(b"abc\0");
    bytes.extend_from_slice(&plain[36..]);
    let back = wav::decode_wav(&bytes, p()).unwrap();
    assert_eq!(back.samples(), &[0.5, -0.5]);
}

#[test]
fn quantize_clamps() {
    assert_eq!(wav::quantize(1.0), 32767);
    assert_eq!(wav::quantize(-1.0), -32768);
    assert_eq!(wav::quantize(0.5), 16384);
}

#[test]
fn captions_decode_and_errors() {
    let sets = captions::decode_captions(
        r#"{"utt_id":"u1","captions":{"clotho":"rain on a roof"}}"#,
        p(),
    )
    .unwrap();
    assert_eq!(sets.len(), 1);
    assert_eq!(sets[0].captions[&Style::Clotho], "rain on a roof");

    let dup = "{\"utt_id\":\"u1\",\"captions\":{\"clotho\":\"a\"}}\n{\"utt_id\":\"u1\",\"captions\":{\"audioset\":\"b\"}}\n";
    assert_eq!(
        captions::decode_captions(dup, p()).unwrap_err().code(),
        "DUPLICATE_UTT"
    );

    let style = r#"{"utt_id":"u1","captions":{"audioset2":"x"}}"#;
    assert!(matches!(
        captions::decode_captions(style, p()),
        Err(Error::UnknownStyle { .. })
    ));

    assert!(matches!(
        captions::decode_captions("{oops", p()),
        Err(Error::BadJson { line: 1, .. })
    ));

    let text = captions::encode_captions(&sets);
    assert_eq!(
        captions::encode_captions(&captions::decode_captions(&text, p()).unwrap()),
        text
    );
}

#[test]
fn embedding_store_roundtrip() {
    let cfg = ToyEmbedderConfig {
        dim: 8,
        ..Default::default()
    };
    let embs: Vec<_> = ["dog barking", "rain on a tin roof", "a car horn and wind"]
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let c = CaptionSet {
                utt_id: format!("u{i}"),
                captions: [
                    (Style::Audioset, text.to_string()),
                    (Style::Clotho, format!("{text} outside")),
                ]
                .into(),
            };
            toy_embed(&c, &cfg).unwrap()
        })
        .collect();
    let (payload, index) = embeddings::encode_store(&embs).unwrap();
    let back = embeddings::decode_store(&payload, &index, p(), p()).unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in embs.iter().zip(&back) {
        assert_eq!(a.utt_id(), b.utt_id());
        assert_eq!(a.spans(), b.spans());
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-6);
        }
    }
    let (payload2, index2) = embeddings::encode_store(&back).unwrap();
    assert_eq!((payload2, index2), (payload.clone(), index.clone()));

    let short = &payload[..payload.len() - 4];
    assert!(embeddings::decode_store(short, &index, p(), p()).is_err());
}

#[test]
fn protocol_tsv_roundtrip_and_errors() {
    let entries = vec![
        ProtocolEntry {
            utt_id: "a".into(),
            wav_path: "wav/a.wav".into(),
            label: Label::Bonafide,
            generator_id: "real".into(),
            split: Split::Train,
        },
        ProtocolEntry {
            utt_id: "b".into(),
            wav_path: "wav/b.wav".into(),
            label: Label::Spoof,
            generator_id: "fake_hum_phase".into(),
            split: Split::Eval,
        },
    ];
    let text = tsv::encode_protocol(&entries);
    assert_eq!(tsv::decode_protocol(&text, p()).unwrap(), entries);
    assert!(matches!(
        tsv::decode_protocol("a\tb\tc\n", p()),
        Err(Error::BadTsv { line: 1, .. })
    ));
    assert!(matches!(
        tsv::decode_protocol("a\tw\tgenuine\treal\ttrain\n", p()),
        Err(Error::BadTsv { .. })
    ));
    assert!(matches!(
        tsv::decode_scores("a\t0.5\nb\tNaN\n", p()),
        Err(Error::BadTsv { line: 2, .. })
    ));
}

#[test]
fn checkpoint_rejects_corruption() {
    let params = AtcaParams::init(small_model(3, 2, 1, 1, false), 7).unwrap();
    let bytes = checkpoint::encode_checkpoint(&params);
    let mut bad = bytes.clone();
    bad[0] = b'Z';
    assert!(checkpoint::decode_checkpoint(&bad, p()).is_err());
    assert!(checkpoint::decode_checkpoint(&bytes[..bytes.len() - 1], p()).is_err());
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(checkpoint::decode_checkpoint(&trailing, p()).is_err());
}
