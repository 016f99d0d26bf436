//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run a subset with `cargo test -p atca --test acceptance -- 1 5 7`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use atca::config::RunConfig;
use atca::pipeline::{self, SplitSel, TrainData};
use atca::{atfx, checkpoint, ensemble_file, tsv, wav};
use atca_core::atca::{
    count_params, count_params_for, cross_attention, gru_stack, predict, weighted_ce_batch,
    AcousticInput, AtcaConfig, AtcaParams, Weights,
};
use atca_core::autodiff::{Tape, Tensor, Var};
use atca_core::dsp::{stft_logmel, FeatureMatrix, Origin, StftConfig, Waveform};
use atca_core::ensemble::{
    fit_forest, fit_gbm, fit_ridge, fit_stacked, fit_tree, ForestConfig, MetaExample, StackedConfig,
};
use atca_core::metrics::{compute_eer, Trial};
use atca_core::protocol::{Label, ProtocolEntry, Split};
use atca_core::synth::{plan_corpus, render_clip, CorpusConfig};
use atca_core::text::{toy_embed, Style, StyleSpan, TextEmbedding, ToyEmbedderConfig};
use atca_core::train::{batch_loss_and_grad, Sample};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SEEDS: [u64; 3] = [0, 1, 2];

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rand_vec(rng: &mut StdRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn config(
    d_spec: usize,
    d_model: usize,
    heads: usize,
    layers: usize,
    hidden: usize,
    d_text: usize,
) -> AtcaConfig {
    AtcaConfig {
        d_spec,
        d_raw: 0,
        d_model,
        d_k: d_model / heads,
        n_heads: heads,
        gru_layers: layers,
        gru_hidden: hidden,
        d_text,
        use_raw_branch: false,
        class_weights: [1.0, 1.0],
        spec_norm: None,
    }
}

fn text_embedding(rng: &mut StdRng, rows: usize, dim: usize) -> TextEmbedding {
    let spans = vec![StyleSpan {
        style: Style::Audiocaps,
        start: 0,
        end: rows,
    }];
    TextEmbedding::new("u", rows, dim, rand_vec(rng, rows * dim, 1.0), spans).unwrap()
}

fn bind(tape: &mut Tape, p: &AtcaParams) -> Weights<Var> {
    p.weights.map(|t| tape.param(t.clone()))
}

/// Parameter count enumerated layer by layer.
fn hand_count(c: &AtcaConfig) -> u64 {
    let mut n = c.d_spec * c.d_model + c.d_model;
    if c.use_raw_branch {
        n += c.d_raw * c.d_model + c.d_model;
    }
    let inner = c.d_k * c.n_heads;
    n += c.d_model * inner + 2 * c.d_text * inner + inner * c.d_model;
    for l in 0..c.gru_layers {
        let input = if l == 0 { c.d_model } else { c.gru_hidden };
        n += 3 * (input * c.gru_hidden + c.gru_hidden * c.gru_hidden + c.gru_hidden);
    }
    n += c.gru_hidden * 2 + 2;
    n as u64
}

/// Central differences of the weighted batch loss, one coordinate at a time.
/// Returns `(max relative error, probes)`.
fn finite_difference_check(
    params: &AtcaParams,
    samples: &[(AcousticInput, TextEmbedding, Label)],
) -> (f64, usize) {
    let batch: Vec<Sample> = samples
        .iter()
        .map(|(input, text, label)| Sample {
            utt_id: "u",
            input,
            text,
            label: *label,
        })
        .collect();
    let (_, analytic) = batch_loss_and_grad(params, &batch).unwrap();
    let loss = |p: &AtcaParams| {
        let logits: Vec<_> = samples
            .iter()
            .map(|(i, t, y)| (predict(p, i, t).unwrap(), *y))
            .collect();
        weighted_ce_batch(&logits, p.config.class_weights)
    };
    let h = 1e-5;
    let mut work = params.clone();
    let mut worst = 0.0f64;
    let mut probes = 0;
    let n_tensors = params.weights.iter().count();
    for ti in 0..n_tensors {
        for k in 0..analytic[ti].len() {
            let orig = work.weights.iter().nth(ti).unwrap().data()[k];
            work.weights.iter_mut()[ti].data_mut()[k] = orig + h;
            let plus = loss(&work);
            work.weights.iter_mut()[ti].data_mut()[k] = orig - h;
            let minus = loss(&work);
            work.weights.iter_mut()[ti].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(rel_err(analytic[ti].data()[k], numeric));
            probes += 1;
        }
    }
    (worst, probes)
}

fn toy_samples(
    rng: &mut StdRng,
    c: &AtcaConfig,
    t: usize,
    l: usize,
) -> Vec<(AcousticInput, TextEmbedding, Label)> {
    [Label::Bonafide, Label::Spoof]
        .into_iter()
        .map(|y| {
            let spec = FeatureMatrix::new(
                t,
                c.d_spec,
                rand_vec(rng, t * c.d_spec, 1.0),
                Origin::Logmel,
            )
            .unwrap();
            (
                AcousticInput { spec, raw: None },
                text_embedding(rng, l, c.d_text),
                y,
            )
        })
        .collect()
}

fn c1_gradients() -> Check {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    let c = AtcaConfig {
        class_weights: [0.7, 1.6],
        ..config(6, 8, 1, 2, 8, 5)
    };
    let params = AtcaParams::init(c.clone(), 11).unwrap();
    let samples = toy_samples(&mut rng, &c, 4, 3);
    let (worst, probes) = finite_difference_check(&params, &samples);
    let secs = start.elapsed().as_secs_f64();
    ensure(worst < 1e-4, || format!("max rel err {worst:.2e}"))?;
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "{probes} parameters, max rel err {worst:.2e}, {secs:.1} s"
    ))
}

/// Independent quadratic sweep: thresholds at -inf, every midpoint of
/// consecutive distinct scores and +inf; `score >= θ` is accepted.
fn brute_force_eer(trials: &[Trial]) -> f64 {
    let mut scores: Vec<f64> = trials.iter().map(|t| t.score).collect();
    scores.sort_by(f64::total_cmp);
    scores.dedup();
    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(scores.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    thresholds.push(f64::INFINITY);
    let nb = trials.iter().filter(|t| t.label == Label::Bonafide).count() as f64;
    let ns = trials.len() as f64 - nb;
    let rates: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&th| {
            let fa = trials
                .iter()
                .filter(|t| t.label == Label::Spoof && t.score >= th)
                .count() as f64;
            let fr = trials
                .iter()
                .filter(|t| t.label == Label::Bonafide && t.score < th)
                .count() as f64;
            (fa / ns, fr / nb)
        })
        .collect();
    let k = rates.iter().position(|&(far, frr)| frr >= far).unwrap();
    let (far, frr) = rates[k];
    let eer = if frr == far {
        far
    } else if k == 0 {
        0.5 * (far + frr)
    } else {
        let (pf, pr) = rates[k - 1];
        let a = (pf - pr) / ((frr - far) - (pr - pf));
        0.5 * ((pf + a * (far - pf)) + (pr + a * (frr - pr)))
    };
    eer.clamp(0.0, 0.5)
}

fn c2_eer_oracle() -> Check {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n = if case == 0 {
            2
        } else if case == 1 {
            1000
        } else {
            rng.gen_range(2..=1000)
        };
        let levels = rng.gen_range(2..50);
        let trials: Vec<Trial> = (0..n)
            .map(|i| {
                let label = if i == 0 {
                    Label::Bonafide
                } else if i == 1 {
                    Label::Spoof
                } else if rng.gen_bool(0.5) {
                    Label::Bonafide
                } else {
                    Label::Spoof
                };
                let shift = if label == Label::Bonafide { 0.8 } else { 0.0 };
                let score = if rng.gen_bool(0.3) {
                    (rng.gen_range(0..levels) as f64) / levels as f64
                } else {
                    rng.gen_range(-1.0..1.0) + shift
                };
                Trial {
                    utt_id: format!("u{i}"),
                    label,
                    score,
                }
            })
            .collect();
        let fast = compute_eer(&trials).map_err(|e| e.to_string())?.eer;
        let slow = brute_force_eer(&trials);
        worst = worst.max((fast - slow).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-12, || format!("max |diff| {worst:.2e}"))?;
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("200 sets, max |diff| {worst:.1e}, {secs:.1} s"))
}

fn c3_attention() -> Check {
    let mut rng = StdRng::seed_from_u64(3);
    let mut worst_row = 0.0f64;
    let mut worst_single = 0.0f64;
    let mut worst_perm = 0.0f64;
    for case in 0..100 {
        let heads = rng.gen_range(1..=3);
        let d_model = heads * rng.gen_range(1..=4);
        let d_text = rng.gen_range(1..=6);
        let t = rng.gen_range(1..=6);
        let l = rng.gen_range(1..=6);
        let c = config(d_model, d_model, heads, 1, 2, d_text);
        let p = AtcaParams::init(c.clone(), case).unwrap();
        let x = rand_vec(&mut rng, t * d_model, 3.0);
        let txt = rand_vec(&mut rng, l * d_text, 3.0);
        let mut order: Vec<usize> = (0..l).collect();
        for i in (1..l).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let permuted: Vec<f64> = order
            .iter()
            .flat_map(|&r| txt[r * d_text..(r + 1) * d_text].to_vec())
            .collect();
        let one = rand_vec(&mut rng, d_text, 3.0);

        let mut tape = Tape::new();
        let w = bind(&mut tape, &p);
        let xv = tape.constant(Tensor::new(t, d_model, x).unwrap());
        let a = tape.constant(Tensor::new(l, d_text, txt).unwrap());
        let b = tape.constant(Tensor::new(l, d_text, permuted).unwrap());
        let s = tape.constant(Tensor::new(1, d_text, one.clone()).unwrap());
        let oa = cross_attention(&mut tape, xv, a, &w, &c).map_err(|e| e.to_string())?;
        let ob = cross_attention(&mut tape, xv, b, &w, &c).map_err(|e| e.to_string())?;
        let os = cross_attention(&mut tape, xv, s, &w, &c).map_err(|e| e.to_string())?;

        for &m in &oa.weights {
            let m = tape.value(m);
            for r in 0..m.rows() {
                worst_row = worst_row.max((m.row(r).iter().sum::<f64>() - 1.0).abs());
            }
        }
        for (u, v) in tape
            .value(oa.output)
            .data()
            .iter()
            .zip(tape.value(ob.output).data())
        {
            worst_perm = worst_perm.max((u - v).abs());
        }
        // one key: every query row attends fully to it, so attended = (s Wv) Wo
        let wv = &p.weights.wv;
        let wo = &p.weights.wo;
        let v_row: Vec<f64> = (0..wv.cols())
            .map(|j| (0..d_text).map(|i| one[i] * wv.get(i, j)).sum())
            .collect();
        let expect: Vec<f64> = (0..d_model)
            .map(|j| (0..v_row.len()).map(|i| v_row[i] * wo.get(i, j)).sum())
            .collect();
        let att = tape.value(os.attended);
        for r in 0..t {
            for (u, v) in att.row(r).iter().zip(&expect) {
                worst_single = worst_single.max((u - v).abs());
            }
        }
    }
    ensure(worst_row <= 1e-9, || {
        format!("row sum off by {worst_row:.1e}")
    })?;
    ensure(worst_single <= 1e-12, || {
        format!("single-key error {worst_single:.1e}")
    })?;
    ensure(worst_perm <= 1e-12, || {
        format!("permutation error {worst_perm:.1e}")
    })?;
    Ok(format!("100 configs; row sums {worst_row:.1e}, single key {worst_single:.1e}, permutation {worst_perm:.1e}"))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar GRU recurrence over every layer; returns the last layer's states.
fn gru_oracle(x: &[Vec<f64>], p: &AtcaParams) -> Vec<Vec<f64>> {
    let mut input = x.to_vec();
    for g in &p.weights.gru {
        let hsz = g.u_z.rows();
        let mut h = vec![0.0; hsz];
        let mut seq = Vec::new();
        for xt in &input {
            let pre = |w: &Tensor, u: &Tensor, b: &Tensor, hv: &[f64], j: usize| {
                b.get(0, j)
                    + xt.iter()
                        .enumerate()
                        .map(|(i, v)| v * w.get(i, j))
                        .sum::<f64>()
                    + hv.iter()
                        .enumerate()
                        .map(|(i, v)| v * u.get(i, j))
                        .sum::<f64>()
            };
            let z: Vec<f64> = (0..hsz)
                .map(|j| sigmoid(pre(&g.w_z, &g.u_z, &g.b_z, &h, j)))
                .collect();
            let r: Vec<f64> = (0..hsz)
                .map(|j| sigmoid(pre(&g.w_r, &g.u_r, &g.b_r, &h, j)))
                .collect();
            let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
            let cand: Vec<f64> = (0..hsz)
                .map(|j| pre(&g.w_h, &g.u_h, &g.b_h, &rh, j).tanh())
                .collect();
            h = (0..hsz)
                .map(|j| z[j] * h[j] + (1.0 - z[j]) * cand[j])
                .collect();
            seq.push(h.clone());
        }
        input = seq;
    }
    input
}

fn c4_gru() -> Check {
    let mut rng = StdRng::seed_from_u64(4);
    let c = config(3, 3, 1, 2, 4, 2);

    let zero = AtcaParams::zeros(c.clone()).unwrap();
    let mut tape = Tape::new();
    let w = bind(&mut tape, &zero);
    let x = tape.constant(Tensor::new(50, 3, rand_vec(&mut rng, 150, 10.0)).unwrap());
    let out = gru_stack(&mut tape, x, &w, &c, None).map_err(|e| e.to_string())?;
    ensure(
        tape.value(out.sequence).data().iter().all(|&v| v == 0.0),
        || "zero parameters moved h".into(),
    )?;

    let mut max_abs = 0.0f64;
    let mut worst = 0.0f64;
    for draw in 0..100 {
        let scale = [0.1, 1.0, 5.0, 20.0][draw % 4];
        let mut p = AtcaParams::init(c.clone(), draw as u64).unwrap();
        for t in p.weights.iter_mut() {
            for v in t.data_mut() {
                *v = rng.gen_range(-scale..scale);
            }
        }
        let xs = rand_vec(&mut rng, 150, 5.0);
        let mut tape = Tape::new();
        let w = bind(&mut tape, &p);
        let xv = tape.constant(Tensor::new(50, 3, xs.clone()).unwrap());
        let out = gru_stack(&mut tape, xv, &w, &c, None).map_err(|e| e.to_string())?;
        let seq = tape.value(out.sequence);
        max_abs = seq.data().iter().fold(max_abs, |m, v| m.max(v.abs()));
        let rows: Vec<Vec<f64>> = xs.chunks(3).map(<[f64]>::to_vec).collect();
        for (t, row) in gru_oracle(&rows, &p).iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                worst = worst.max((seq.get(t, j) - v).abs());
            }
        }
    }
    ensure(max_abs <= 1.0, || format!("|h| reached {max_abs}"))?;
    ensure(worst <= 1e-12, || format!("oracle error {worst:.1e}"))?;
    Ok(format!(
        "h=0 fixed point; max |h| {max_abs:.6} over 100 draws x 50 steps; oracle error {worst:.1e}"
    ))
}

/// Corpus rendered in memory with default features and embeddings.
struct Corpus {
    track1: Vec<ProtocolEntry>,
    features: BTreeMap<String, AcousticInput>,
    embeddings: BTreeMap<String, TextEmbedding>,
}

impl Corpus {
    fn build(cfg: &CorpusConfig) -> Self {
        let plan = plan_corpus(cfg).unwrap();
        let stft = StftConfig::default();
        let features = plan
            .manifest
            .clips
            .iter()
            .map(|c| {
                let spec = stft_logmel(&render_clip(cfg, c).unwrap(), &stft).unwrap();
                (c.utt_id.clone(), AcousticInput { spec, raw: None })
            })
            .collect();
        let emb = ToyEmbedderConfig::default();
        let embeddings = plan
            .captions
            .iter()
            .map(|c| (c.utt_id.clone(), toy_embed(c, &emb).unwrap()))
            .collect();
        Corpus {
            track1: plan.track1,
            features,
            embeddings,
        }
    }

    fn data(&self) -> TrainData {
        TrainData {
            protocol: self.track1.clone(),
            features: self.features.clone(),
            embeddings: self.embeddings.clone(),
        }
    }
}

fn eval_eer(trials: &[Trial]) -> f64 {
    compute_eer(trials).unwrap().eer
}

fn run_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.train.seed = seed;
    cfg.ensemble.seed = seed;
    cfg
}

fn c5_trainability() -> Check {
    let start = Instant::now();
    let data = Corpus::build(&CorpusConfig::default()).data();
    let mut lines = Vec::new();
    let mut hits = 0;
    for seed in SEEDS {
        let (params, report) =
            pipeline::train_model(&data, &run_config(seed)).map_err(|e| e.to_string())?;
        let eer = eval_eer(
            &pipeline::score_model(&params, &data, SplitSel::Only(Split::Eval), false).unwrap(),
        );
        hits += usize::from(eer <= 0.05);
        lines.push(format!(
            "seed {seed}: {:.2}% (best epoch {})",
            100.0 * eer,
            report.best_epoch + 1
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("{}; {secs:.0} s", lines.join(", "));
    ensure(hits >= 2 && secs < 1200.0, || detail.clone())?;
    Ok(detail)
}

/// Per-seed results on the caption-leak corpus, shared by criteria 6 and 7.
struct LeakRun {
    full_eval: f64,
    ablated_eval: f64,
    base_eval: f64,
    ensemble_eval: f64,
}

fn leak_runs() -> Vec<LeakRun> {
    let cfg = CorpusConfig {
        caption_leak: 1.0,
        ..CorpusConfig::default()
    }
    .with_strength(0.3);
    let data = Corpus::build(&cfg).data();
    let both = |e: &ProtocolEntry| e.split != Split::Train;
    let baseline = pipeline::fit_baseline(&data, 1.0).unwrap();
    let base_trials = pipeline::score_baseline(&baseline, &data, SplitSel::All).unwrap();
    SEEDS
        .iter()
        .map(|&seed| {
            let run = run_config(seed);
            let (params, _) = pipeline::train_model(&data, &run).unwrap();
            let full = pipeline::score_model(&params, &data, SplitSel::All, false).unwrap();
            let ablated = pipeline::score_model(&params, &data, SplitSel::All, true).unwrap();
            let as_scores = |ts: &[Trial]| -> Vec<(String, f64)> {
                ts.iter()
                    .zip(&data.protocol)
                    .filter(|(_, e)| both(e))
                    .map(|(t, _)| (t.utt_id.clone(), t.score))
                    .collect()
            };
            let sets = vec![
                as_scores(&full),
                as_scores(&ablated),
                as_scores(&base_trials),
            ];
            let fit = pipeline::fit_ensemble(
                &sets,
                &data.embeddings,
                &data.protocol,
                SplitSel::Only(Split::Dev),
                &run.ensemble,
            )
            .unwrap();
            let ens = pipeline::score_ensemble(
                &fit.model,
                &sets,
                &data.embeddings,
                &data.protocol,
                SplitSel::Only(Split::Eval),
            )
            .unwrap();
            let on_eval = |ts: &[Trial]| -> Vec<Trial> {
                ts.iter()
                    .zip(&data.protocol)
                    .filter(|(_, e)| e.split == Split::Eval)
                    .map(|(t, _)| t.clone())
                    .collect()
            };
            LeakRun {
                full_eval: eval_eer(&on_eval(&full)),
                ablated_eval: eval_eer(&on_eval(&ablated)),
                base_eval: eval_eer(&on_eval(&base_trials)),
                ensemble_eval: eval_eer(&ens),
            }
        })
        .collect()
}

fn c6_text_direction(runs: &[LeakRun]) -> Check {
    let within = runs.iter().all(|r| r.full_eval <= r.ablated_eval + 0.005);
    let lower = runs.iter().filter(|r| r.full_eval < r.ablated_eval).count();
    let detail = runs
        .iter()
        .zip(SEEDS)
        .map(|(r, s)| {
            format!(
                "seed {s}: full {:.2}% vs ablated {:.2}%",
                100.0 * r.full_eval,
                100.0 * r.ablated_eval
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    ensure(within && lower >= 2, || detail.clone())?;
    Ok(detail)
}

fn c7_ensemble_direction(runs: &[LeakRun]) -> Check {
    let ok = runs
        .iter()
        .all(|r| r.ensemble_eval <= r.full_eval.min(r.ablated_eval).min(r.base_eval) + 0.01);
    let detail = runs
        .iter()
        .zip(SEEDS)
        .map(|(r, s)| {
            format!(
                "seed {s}: ensemble {:.2}% vs min base {:.2}%",
                100.0 * r.ensemble_eval,
                100.0 * r.full_eval.min(r.ablated_eval).min(r.base_eval)
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    ensure(ok, || detail.clone())?;
    Ok(detail)
}

fn c8_ensemble_oracles() -> Check {
    let mut rng = StdRng::seed_from_u64(8);

    // ridge: closed form vs plain gradient descent on the same objective
    let n = 30;
    let xs: Vec<Vec<f64>> = (0..n).map(|_| rand_vec(&mut rng, 3, 1.0)).collect();
    let y: Vec<f64> = xs
        .iter()
        .map(|x| 0.5 + 2.0 * x[0] - x[1] + 0.3 * x[2] + rng.gen_range(-0.1..0.1))
        .collect();
    let lambda = 0.7;
    let ridge = fit_ridge(&xs, &y, lambda).map_err(|e| e.to_string())?;
    let (mut w, mut b) = (vec![0.0; 3], 0.0);
    for _ in 0..100_000 {
        let mut gw = w.iter().map(|v| 2.0 * lambda * v).collect::<Vec<f64>>();
        let mut gb = 0.0;
        for (x, t) in xs.iter().zip(&y) {
            let r = b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() - t;
            gb += 2.0 * r;
            for k in 0..3 {
                gw[k] += 2.0 * r * x[k];
            }
        }
        b -= 0.01 * gb;
        for k in 0..3 {
            w[k] -= 0.01 * gw[k];
        }
    }
    let ridge_err = ridge
        .weights
        .iter()
        .zip(&w)
        .map(|(a, c)| (a - c).abs())
        .fold((ridge.intercept - b).abs(), f64::max);
    ensure(ridge_err <= 1e-6, || format!("ridge vs GD {ridge_err:.1e}"))?;

    // gbm: training MSE never increases with rounds
    let xs: Vec<Vec<f64>> = (0..80).map(|_| rand_vec(&mut rng, 4, 1.0)).collect();
    let y: Vec<f64> = xs
        .iter()
        .map(|x| (3.0 * x[0]).sin() + x[1] * x[2])
        .collect();
    let mse = |f: &dyn Fn(&[f64]) -> f64| {
        xs.iter()
            .zip(&y)
            .map(|(x, t)| (f(x) - t).powi(2))
            .sum::<f64>()
            / y.len() as f64
    };
    let mut prev = f64::INFINITY;
    for rounds in 0..=30 {
        let g = fit_gbm(&xs, &y, rounds, 3, 0.1);
        let m = mse(&|x| g.predict(x));
        ensure(m <= prev + 1e-12, || {
            format!("gbm MSE rose at round {rounds}")
        })?;
        prev = m;
    }

    // forest of one un-bootstrapped tree over all features == one tree
    let all: Vec<usize> = (0..xs.len()).collect();
    for depth in 1..=5 {
        let tree = fit_tree(&xs, &y, &all, depth);
        let forest = fit_forest(
            &xs,
            &y,
            &ForestConfig {
                n_trees: 1,
                max_depth: depth,
                feature_frac: 1.0,
                bootstrap: false,
                seed: 9,
            },
        );
        ensure(forest.trees[0] == tree, || {
            format!("forest differs from tree at depth {depth}")
        })?;
        for x in &xs {
            ensure(forest.predict(x) == tree.predict(x), || {
                "forest prediction differs".into()
            })?;
        }
    }

    // simplex weights: chosen point minimises held-out MSE over the 0.05 grid
    let examples: Vec<MetaExample> = (0..60)
        .map(|i| {
            let s = rand_vec(&mut rng, 3, 1.0);
            let target = if s[0] + 0.5 * s[1] * s[1] + 0.2 * rng.gen_range(-1.0..1.0) > 0.2 {
                1.0
            } else {
                0.0
            };
            MetaExample {
                utt_id: format!("m{i}"),
                base_scores: s,
                text_feat: rand_vec(&mut rng, 2, 1.0),
                target: Some(target),
            }
        })
        .collect();
    let fit = fit_stacked(
        &examples,
        &StackedConfig {
            gbm_rounds: 20,
            forest_trees: 10,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let targets: Vec<f64> = examples.iter().map(|e| e.target.unwrap()).collect();
    let blend = |w: [f64; 3]| {
        fit.oof
            .iter()
            .zip(&targets)
            .map(|(p, t)| (w[0] * p[0] + w[1] * p[1] + w[2] * p[2] - t).powi(2))
            .sum::<f64>()
            / targets.len() as f64
    };
    let mut best = blend([1.0 / 3.0; 3]);
    for i in 0..=20 {
        for j in 0..=(20 - i) {
            best = best.min(blend([
                i as f64 / 20.0,
                j as f64 / 20.0,
                (20 - i - j) as f64 / 20.0,
            ]));
        }
    }
    let chosen = blend(fit.model.combine_weights);
    ensure(
        (chosen - best).abs() <= 1e-12 && (fit.oof_mse - best).abs() <= 1e-12,
        || format!("grid search picked {chosen} vs brute-force {best}"),
    )?;
    Ok(format!("ridge vs GD {ridge_err:.1e}; gbm monotone over 30 rounds; degenerate forest == tree; grid MSE {best:.6}"))
}

fn c9_param_count() -> Check {
    let toy = config(4, 4, 1, 1, 4, 4);
    let toy_count = count_params_for(&toy);
    ensure(toy_count == 202 && hand_count(&toy) == 202, || {
        format!("toy count {toy_count}")
    })?;
    let mut rng = StdRng::seed_from_u64(9);
    let configs = [
        toy.clone(),
        config(6, 8, 1, 2, 8, 5),
        config(3, 6, 2, 1, 3, 4),
        AtcaConfig {
            use_raw_branch: true,
            d_raw: 5,
            ..config(2, 6, 3, 2, 2, 3)
        },
    ];
    for c in &configs {
        let p = AtcaParams::init(c.clone(), 5).unwrap();
        let samples: Vec<_> = toy_samples(&mut rng, c, 3, 2)
            .into_iter()
            .map(|(mut i, t, y)| {
                if c.use_raw_branch {
                    i.raw = Some(
                        FeatureMatrix::new(
                            2,
                            c.d_raw,
                            rand_vec(&mut rng, 2 * c.d_raw, 1.0),
                            Origin::Rawpatch,
                        )
                        .unwrap(),
                    );
                }
                (i, t, y)
            })
            .collect();
        let (_, probes) = finite_difference_check(&p, &samples);
        ensure(
            count_params(&p) == hand_count(c) && probes as u64 == count_params(&p),
            || {
                format!(
                    "count {} hand {} probes {probes}",
                    count_params(&p),
                    hand_count(c)
                )
            },
        )?;
    }
    Ok(format!(
        "toy config 202; {} configs agree with hand count and probe count",
        configs.len()
    ))
}

fn c10_round_trips() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let mut rng = StdRng::seed_from_u64(10);
    let same = |a: &Path, b: &Path, what: &str| -> std::result::Result<(), String> {
        ensure(
            std::fs::read(a).unwrap() == std::fs::read(b).unwrap(),
            || format!("{what} bytes changed"),
        )
    };
    let (a, b) = (d.join("a"), d.join("b"));
    for case in 0..25u64 {
        let n = rng.gen_range(1..2000);
        let w = Waveform::new(
            rand_vec(&mut rng, n, 1.1),
            [16_000, 44_100, 48_000][case as usize % 3],
        )
        .unwrap();
        wav::write_wav(&a, &w).unwrap();
        wav::write_wav(&b, &wav::load_wav(&a).map_err(|e| e.to_string())?).unwrap();
        same(&a, &b, "WAV")?;

        let (r, c) = (rng.gen_range(1..40), rng.gen_range(1..70));
        let f = FeatureMatrix::new(r, c, rand_vec(&mut rng, r * c, 50.0), Origin::Logmel).unwrap();
        atfx::write_features(&a, &f).unwrap();
        atfx::write_features(
            &b,
            &atfx::load_external_features(&a).map_err(|e| e.to_string())?,
        )
        .unwrap();
        same(&a, &b, "feature file")?;

        let heads = rng.gen_range(1..=2);
        let cfg = AtcaConfig {
            use_raw_branch: case % 2 == 0,
            d_raw: 3,
            ..config(
                rng.gen_range(1..6),
                2 * heads,
                heads,
                rng.gen_range(1..=2),
                3,
                rng.gen_range(1..6),
            )
        };
        let p = AtcaParams::init(cfg, case).unwrap();
        checkpoint::save_checkpoint(&a, &p).unwrap();
        checkpoint::save_checkpoint(
            &b,
            &checkpoint::load_checkpoint(&a).map_err(|e| e.to_string())?,
        )
        .unwrap();
        same(&a, &b, "checkpoint")?;

        let examples: Vec<MetaExample> = (0..20)
            .map(|i| MetaExample {
                utt_id: format!("m{i}"),
                base_scores: rand_vec(&mut rng, 3, 1.0),
                text_feat: rand_vec(&mut rng, 2, 1.0),
                target: Some(f64::from(u8::from(rng.gen_bool(0.5)))),
            })
            .collect();
        let fit = fit_stacked(
            &examples,
            &StackedConfig {
                gbm_rounds: 5,
                forest_trees: 3,
                folds: 3,
                seed: case,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        ensemble_file::save_ensemble(&a, &fit.model).unwrap();
        ensemble_file::save_ensemble(
            &b,
            &ensemble_file::load_ensemble(&a).map_err(|e| e.to_string())?,
        )
        .unwrap();
        same(&a, &b, "ensemble model")?;

        let trials: Vec<Trial> = (0..rng.gen_range(1..100))
            .map(|i| Trial {
                utt_id: format!("u{i}"),
                label: Label::Spoof,
                score: rng.gen_range(-50.0..50.0),
            })
            .collect();
        tsv::write_scores(&a, &trials).unwrap();
        let back: Vec<Trial> = tsv::load_scores(&a)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|(utt_id, score)| Trial {
                utt_id,
                label: Label::Spoof,
                score,
            })
            .collect();
        tsv::write_scores(&b, &back).unwrap();
        same(&a, &b, "score TSV")?;
    }
    Ok(
        "WAV, feature file, checkpoint, ensemble model and score TSV: 25 random instances each"
            .into(),
    )
}

fn run_cli(root: &Path, args: &[&str]) -> std::result::Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_atca"))
        .args(args)
        .current_dir(root)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(out.stdout)
}

fn pipeline_tree(root: &Path) -> std::result::Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let steps: &[&[&str]] = &[
        &["corpus", "synth", "--out", "corpus", "--seed", "0"],
        &["featurize", "--corpus", "corpus"],
        &["embed", "--corpus", "corpus", "--seed", "0"],
        &[
            "train", "--corpus", "corpus", "--track", "1", "--epochs", "3", "--seed", "0",
        ],
        &[
            "score",
            "--ckpt",
            "corpus/run_track1/checkpoint.atck",
            "--corpus",
            "corpus",
            "--split",
            "all",
            "--out",
            "full.tsv",
        ],
        &[
            "score",
            "--ckpt",
            "corpus/run_track1/checkpoint.atck",
            "--corpus",
            "corpus",
            "--split",
            "all",
            "--ablate-text",
            "--out",
            "ablated.tsv",
        ],
        &[
            "baseline",
            "--corpus",
            "corpus",
            "--split",
            "all",
            "--out",
            "baseline.tsv",
        ],
        &[
            "ensemble",
            "fit",
            "--scores",
            "full.tsv,ablated.tsv,baseline.tsv",
            "--embeddings",
            "corpus/embeddings",
            "--protocol",
            "corpus/protocol_track1.tsv",
            "--seed",
            "0",
            "--out",
            "ensemble.aten",
        ],
        &[
            "ensemble",
            "score",
            "--model",
            "ensemble.aten",
            "--scores",
            "full.tsv,ablated.tsv,baseline.tsv",
            "--embeddings",
            "corpus/embeddings",
            "--protocol",
            "corpus/protocol_track1.tsv",
            "--out",
            "ensemble.tsv",
        ],
    ];
    for args in steps {
        run_cli(root, args)?;
    }
    let eer = run_cli(
        root,
        &[
            "eer",
            "--scores",
            "ensemble.tsv",
            "--protocol",
            "corpus/protocol_track1.tsv",
            "--split",
            "eval",
        ],
    )?;
    std::fs::write(root.join("eer.txt"), eer).map_err(|e| e.to_string())?;

    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
                files.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
            }
        }
    }
    Ok(files)
}

fn c11_determinism() -> Check {
    let start = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline_tree(a.path())?;
    let second = pipeline_tree(b.path())?;
    let differing: Vec<_> = first
        .keys()
        .chain(second.keys())
        .filter(|k| first.get(*k) != second.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    ensure(differing.is_empty(), || {
        format!("differing files: {}", differing.join(", "))
    })?;
    let bytes: usize = first.values().map(Vec::len).sum();
    Ok(format!(
        "{} files, {bytes} bytes identical across two runs; {:.0} s",
        first.len(),
        start.elapsed().as_secs_f64()
    ))
}

fn main() {
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let selected = |id: u32| wanted.is_empty() || wanted.contains(&id);
    let names = [
        "gradient correctness",
        "EER oracle equivalence",
        "attention invariants",
        "GRU invariants",
        "trainability",
        "text-modality direction",
        "ensemble direction",
        "ensemble component oracles",
        "parameter accounting",
        "format round-trips",
        "CLI determinism",
    ];
    let mut leak: Option<Vec<LeakRun>> = None;
    let mut failed = 0;
    for id in 1..=11u32 {
        if !selected(id) {
            continue;
        }
        let start = Instant::now();
        let outcome = match id {
            1 => c1_gradients(),
            2 => c2_eer_oracle(),
            3 => c3_attention(),
            4 => c4_gru(),
            5 => c5_trainability(),
            6 | 7 => {
                let runs = leak.get_or_insert_with(leak_runs);
                if id == 6 {
                    c6_text_direction(runs)
                } else {
                    c7_ensemble_direction(runs)
                }
            }
            8 => c8_ensemble_oracles(),
            9 => c9_param_count(),
            10 => c10_round_trips(),
            _ => c11_determinism(),
        };
        let secs = start.elapsed().as_secs_f64();
        let name = names[id as usize - 1];
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id:>2} {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
