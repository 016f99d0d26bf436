//! Synthetic environmental-sound corpus: seeded "real" clips, parametric fake
//! families, template captions and two-track protocols.

mod fake;
mod real;

pub use fake::{apply_fake, blackbox_stages, GeneratorKind, GeneratorParams, GeneratorSpec};
pub use real::{plan_events, synth_real, Event, EVENT_VOCAB, PEAK};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::Waveform;
use crate::protocol::{Label, ProtocolEntry, Split};
use crate::rng::{derive_seed, seeded, shuffle};
use crate::text::{CaptionSet, Style};
use crate::{Error, Result};

pub const TRACKS: [&str; 2] = ["track1", "track2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub seed: u64,
    pub n_clips: usize,
    pub real_fraction: f64,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub families: Vec<GeneratorSpec>,
    /// Fake family withheld from training in track 1 and exposed at
    /// `blackbox_fraction` in track 2.
    pub heldout: String,
    pub blackbox_fraction: f64,
    /// train / dev / eval shares for the remaining clips, per generator.
    pub split_fractions: [f64; 3],
    /// Probability that a fake clip's captions mention its artifact.
    pub caption_leak: f64,
    /// Probability that a real clip's captions carry a random artifact word.
    pub caption_noise: f64,
}

pub fn default_families(strength: f64, sample_rate: u32) -> Vec<GeneratorSpec> {
    [
        GeneratorKind::FakeLowpassSmear,
        GeneratorKind::FakeSpectralQuantize,
        GeneratorKind::FakeHumPhase,
        GeneratorKind::FakeBlackbox,
    ]
    .into_iter()
    .map(|kind| GeneratorSpec {
        id: kind.as_str().to_string(),
        kind,
        params: GeneratorParams::at_strength(strength, sample_rate),
    })
    .collect()
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_clips: 500,
            real_fraction: 0.5,
            duration_s: 2.0,
            sample_rate: 44_100,
            families: default_families(1.0, 44_100),
            heldout: GeneratorKind::FakeBlackbox.as_str().to_string(),
            blackbox_fraction: 0.01,
            split_fractions: [0.6, 0.2, 0.2],
            caption_leak: 0.0,
            caption_noise: 0.0,
        }
    }
}

impl CorpusConfig {
    /// Replace the families with the default four at artifact strength `s`.
    pub fn with_strength(mut self, s: f64) -> Self {
        self.families = default_families(s, self.sample_rate);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fakes = self
            .families
            .iter()
            .filter(|g| g.kind != GeneratorKind::Real)
            .count();
        if fakes < 2 {
            return Err(Error::InsufficientFamilies(fakes));
        }
        for g in &self.families {
            g.validate()?;
        }
        let mut ids: Vec<&str> = self.families.iter().map(|g| g.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) || ids.contains(&"real") {
            return Err(Error::InvalidConfig(
                "generator ids must be unique and not \"real\"".into(),
            ));
        }
        if !self
            .families
            .iter()
            .any(|g| g.id == self.heldout && g.kind != GeneratorKind::Real)
        {
            return Err(Error::InvalidConfig(format!(
                "held-out generator {} is not a fake family",
                self.heldout
            )));
        }
        if !(self.duration_s >= 0.5) {
            return Err(Error::InvalidConfig(
                "duration_s must be at least 0.5".into(),
            ));
        }
        if self.sample_rate < 8000 {
            return Err(Error::InvalidConfig(
                "sample_rate must be at least 8000".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.real_fraction) || self.n_clips == 0 {
            return Err(Error::InvalidConfig(
                "real_fraction must lie in [0, 1] and n_clips be positive".into(),
            ));
        }
        if !(self.blackbox_fraction > 0.0 && self.blackbox_fraction <= 1.0) {
            return Err(Error::InvalidConfig(
                "blackbox_fraction must lie in (0, 1]".into(),
            ));
        }
        let total: f64 = self.split_fractions.iter().sum();
        if self.split_fractions.iter().any(|f| *f < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(
                "split_fractions must be non-negative and sum to 1".into(),
            ));
        }
        for p in [self.caption_leak, self.caption_noise] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(
                    "caption probabilities must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub utt_id: String,
    pub generator_id: String,
    pub label: Label,
    pub events: Vec<String>,
    pub duration_s: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub clips: Vec<ClipRecord>,
    /// track → split → utterance ids.
    pub splits: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    pub heldout: String,
    pub blackbox_fraction: f64,
}

/// Everything about a corpus except the audio, which [`render_clip`]
/// produces on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPlan {
    pub manifest: CorpusManifest,
    pub captions: Vec<CaptionSet>,
    pub track1: Vec<ProtocolEntry>,
    pub track2: Vec<ProtocolEntry>,
}

impl CorpusPlan {
    pub fn protocol(&self, track: u8) -> Option<&[ProtocolEntry]> {
        match track {
            1 => Some(&self.track1),
            2 => Some(&self.track2),
            _ => None,
        }
    }
}

pub fn wav_path(utt_id: &str) -> String {
    format!("wav/{utt_id}.wav")
}

fn with_article(tag: &str) -> String {
    let an = tag.starts_with(['a', 'e', 'i', 'o', 'u']);
    format!("{} {tag}", if an { "an" } else { "a" })
}

fn event_phrase(tags: &[String]) -> String {
    let mut uniq: Vec<&str> = Vec::new();
    for t in tags {
        if !uniq.contains(&t.as_str()) {
            uniq.push(t);
        }
    }
    let parts: Vec<String> = uniq.iter().map(|t| with_article(t)).collect();
    match parts.len() {
        0 => "nothing in particular".into(),
        1 => parts[0].clone(),
        n => format!("{} and {}", parts[..n - 1].join(", "), parts[n - 1]),
    }
}

fn capitalise(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}

/// One caption per style from the event tags, optionally coloured by an
/// artifact descriptor.
pub fn captions_for(utt_id: &str, tags: &[String], descriptor: Option<&str>) -> CaptionSet {
    let mut labels: Vec<String> = Vec::new();
    for t in tags {
        let c = capitalise(t);
        if !labels.contains(&c) {
            labels.push(c);
        }
    }
    let events = event_phrase(tags);
    let mut captions = BTreeMap::new();
    let (audioset, audiocaps, clotho) = match descriptor {
        None => (
            format!("{}, Background noise", labels.join(", ")),
            format!("a recording of {events} with background noise"),
            format!(
                "{} can be heard over a steady background noise",
                capitalise(&events)
            ),
        ),
        Some(d) => (
            format!("{}, Background noise, {}", labels.join(", "), capitalise(d)),
            format!("a {d} recording of {events} with background noise"),
            format!(
                "{} can be heard over a steady {d} background noise",
                capitalise(&events)
            ),
        ),
    };
    captions.insert(Style::Audioset, audioset);
    captions.insert(Style::Audiocaps, audiocaps);
    captions.insert(Style::Clotho, clotho);
    CaptionSet {
        utt_id: utt_id.to_string(),
        captions,
    }
}

fn split_counts(n: usize, f: [f64; 3]) -> (usize, usize) {
    let train = libm::floor(f[0] * n as f64 + 0.5) as usize;
    let dev = (libm::floor(f[1] * n as f64 + 0.5) as usize).min(n - train.min(n));
    (train.min(n), dev)
}

/// Number of held-out clips exposed in track-2 training.
pub fn blackbox_train_count(fraction: f64, count: usize) -> usize {
    libm::floor(fraction * count as f64 + 1e-9) as usize
}

pub fn plan_corpus(cfg: &CorpusConfig) -> Result<CorpusPlan> {
    cfg.validate()?;
    let n_real = libm::round(cfg.real_fraction * cfg.n_clips as f64) as usize;
    let fakes: Vec<&GeneratorSpec> = cfg
        .families
        .iter()
        .filter(|g| g.kind != GeneratorKind::Real)
        .collect();
    let mut gens: Vec<Option<&GeneratorSpec>> = (0..n_real).map(|_| None).collect();
    for i in 0..cfg.n_clips - n_real {
        gens.push(Some(fakes[i % fakes.len()]));
    }
    let mut order: Vec<usize> = (0..gens.len()).collect();
    shuffle(&mut seeded(derive_seed(cfg.seed, 0xC0)), &mut order);

    let mut cap_rng = seeded(derive_seed(cfg.seed, 0xCA));
    let mut clips = Vec::with_capacity(cfg.n_clips);
    let mut captions = Vec::with_capacity(cfg.n_clips);
    for (i, &slot) in order.iter().enumerate() {
        let utt_id = format!("clip_{i:05}");
        let seed = derive_seed(cfg.seed, 0x1000 + i as u64);
        let events: Vec<String> = plan_events(seed, cfg.duration_s)
            .into_iter()
            .map(|e| e.tag)
            .collect();
        let g = gens[slot];
        let descriptor = match g {
            Some(g) if cap_rng.gen_bool(cfg.caption_leak) => match g.kind {
                GeneratorKind::FakeBlackbox => blackbox_stages(fake_seed(seed))[0].descriptor(),
                k => k.descriptor(),
            },
            None if cap_rng.gen_bool(cfg.caption_noise) => ["muffled", "metallic", "buzzing"]
                .get(cap_rng.gen_range(0..3))
                .copied(),
            _ => None,
        };
        captions.push(captions_for(&utt_id, &events, descriptor));
        clips.push(ClipRecord {
            utt_id,
            generator_id: g.map_or_else(|| "real".to_string(), |g| g.id.clone()),
            label: if g.is_some() {
                Label::Spoof
            } else {
                Label::Bonafide
            },
            events,
            duration_s: cfg.duration_s,
            seed,
        });
    }

    // Stratified split of everything but the held-out family, shared by both
    // tracks; the held-out family goes to eval (track 1) or is exposed at
    // `blackbox_fraction` (track 2).
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in clips.iter().enumerate() {
        groups.entry(c.generator_id.as_str()).or_default().push(i);
    }
    let mut t1 = alloc::vec![Split::Eval; clips.len()];
    let mut t2 = alloc::vec![Split::Eval; clips.len()];
    for (gid, idx) in &groups {
        if *gid == cfg.heldout {
            let k = blackbox_train_count(cfg.blackbox_fraction, idx.len());
            for &i in &idx[..k] {
                t2[i] = Split::Train;
            }
            continue;
        }
        let (n_train, n_dev) = split_counts(idx.len(), cfg.split_fractions);
        for (pos, &i) in idx.iter().enumerate() {
            let s = if pos < n_train {
                Split::Train
            } else if pos < n_train + n_dev {
                Split::Dev
            } else {
                Split::Eval
            };
            t1[i] = s;
            t2[i] = s;
        }
    }

    let mut splits = BTreeMap::new();
    let mut protocols = Vec::new();
    for (name, assign) in TRACKS.iter().zip([&t1, &t2]) {
        let mut by_split: BTreeMap<String, Vec<String>> = Split::ALL
            .iter()
            .map(|s| (s.as_str().to_string(), Vec::new()))
            .collect();
        let mut entries = Vec::with_capacity(clips.len());
        for (c, s) in clips.iter().zip(assign.iter()) {
            if let Some(v) = by_split.get_mut(s.as_str()) {
                v.push(c.utt_id.clone());
            }
            entries.push(ProtocolEntry {
                utt_id: c.utt_id.clone(),
                wav_path: wav_path(&c.utt_id),
                label: c.label,
                generator_id: c.generator_id.clone(),
                split: *s,
            });
        }
        splits.insert(name.to_string(), by_split);
        protocols.push(entries);
    }
    let track2 = protocols.pop().unwrap_or_default();
    let track1 = protocols.pop().unwrap_or_default();
    Ok(CorpusPlan {
        manifest: CorpusManifest {
            clips,
            splits,
            heldout: cfg.heldout.clone(),
            blackbox_fraction: cfg.blackbox_fraction,
        },
        captions,
        track1,
        track2,
    })
}

fn fake_seed(clip_seed: u64) -> u64 {
    derive_seed(clip_seed, 0xFA4E)
}

/// Render one clip of a planned corpus, peak-normalised.
pub fn render_clip(cfg: &CorpusConfig, clip: &ClipRecord) -> Result<Waveform> {
    let real = real::render_real(clip.seed, clip.duration_s, cfg.sample_rate)?;
    if clip.label == Label::Bonafide {
        return Ok(real);
    }
    let g = cfg
        .families
        .iter()
        .find(|g| g.id == clip.generator_id)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown generator {}", clip.generator_id)))?;
    let mut x = apply_fake(&real, g, fake_seed(clip.seed))?.into_samples();
    real::peak_normalise(&mut x);
    Waveform::new(x, cfg.sample_rate)
}
