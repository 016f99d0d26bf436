//! Corpus directory: `wav/<utt_id>.wav`, `captions.jsonl`,
//! `protocol_track1.tsv`, `protocol_track2.tsv`, `manifest.json`, plus the
//! resolved `corpus_config.json`.

use std::path::{Path, PathBuf};

use atca_core::protocol::ProtocolEntry;
use atca_core::synth::{plan_corpus, render_clip, CorpusConfig, CorpusManifest, CorpusPlan};

use crate::error::{Error, Result};
use crate::{captions, fsutil, tsv, wav};

pub const MANIFEST: &str = "manifest.json";
pub const CAPTIONS: &str = "captions.jsonl";
pub const CONFIG: &str = "corpus_config.json";
const OUTPUTS: [&str; 6] = [
    "wav",
    CAPTIONS,
    "protocol_track1.tsv",
    "protocol_track2.tsv",
    MANIFEST,
    CONFIG,
];

pub fn protocol_path(dir: &Path, track: u8) -> PathBuf {
    dir.join(format!("protocol_track{track}.tsv"))
}

pub fn write_corpus(dir: &Path, cfg: &CorpusConfig, force: bool) -> Result<CorpusPlan> {
    let plan = plan_corpus(cfg)?;
    for name in OUTPUTS {
        fsutil::claim(&dir.join(name), force)?;
    }
    let wav_dir = dir.join("wav");
    fsutil::create_dir(&wav_dir)?;
    for (i, clip) in plan.manifest.clips.iter().enumerate() {
        let w = render_clip(cfg, clip)?;
        wav::write_wav(&dir.join(atca_core::synth::wav_path(&clip.utt_id)), &w)?;
        if (i + 1) % 100 == 0 {
            log::info!("rendered {}/{} clips", i + 1, plan.manifest.clips.len());
        }
    }
    captions::write_captions(&dir.join(CAPTIONS), &plan.captions)?;
    tsv::write_protocol(&protocol_path(dir, 1), &plan.track1)?;
    tsv::write_protocol(&protocol_path(dir, 2), &plan.track2)?;
    fsutil::write_json(&dir.join(MANIFEST), &plan.manifest)?;
    fsutil::write_json(&dir.join(CONFIG), cfg)?;
    Ok(plan)
}

pub fn load_manifest(dir: &Path) -> Result<CorpusManifest> {
    fsutil::read_json(&dir.join(MANIFEST))
}

pub fn load_track(dir: &Path, track: u8) -> Result<Vec<ProtocolEntry>> {
    if !(1..=2).contains(&track) {
        return Err(Error::Usage(format!("track must be 1 or 2, got {track}")));
    }
    tsv::load_protocol(&protocol_path(dir, track))
}
