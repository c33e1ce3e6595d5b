use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::track_csv::read_track;
use crate::error::{invalid, Result};
use crate::networks::{EmotionLabel, Normalization};
use crate::sequence::ExpressionTrack;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    /// Track CSV path, relative to the manifest's directory unless absolute.
    pub path: String,
    pub label: EmotionLabel,
    pub length: usize,
}

/// Index of a dataset on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub n_window: usize,
    pub seed: u64,
    pub clips: Vec<ClipEntry>,
    pub norm: Normalization,
}

/// A manifest with all of its tracks loaded and checked.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub tracks: Vec<(ExpressionTrack, EmotionLabel)>,
}

impl DatasetManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn labels(&self) -> BTreeSet<EmotionLabel> {
        self.clips.iter().map(|c| c.label).collect()
    }
}

impl Dataset {
    /// Reads the manifest and every track it lists, rejecting missing or
    /// inconsistent files and datasets with fewer than two domains.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::read(manifest_path)?;
        let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_manifest(manifest, &base)
    }

    pub fn from_manifest(manifest: DatasetManifest, base: &Path) -> Result<Self> {
        if manifest.version != MANIFEST_VERSION {
            return Err(invalid!("unsupported manifest version {}", manifest.version));
        }
        if manifest.n_window == 0 {
            return Err(invalid!("manifest window length must be positive"));
        }
        manifest.norm.validate()?;
        if manifest.labels().len() < 2 {
            return Err(invalid!("dataset must span at least 2 emotion domains"));
        }
        let mut tracks = Vec::with_capacity(manifest.clips.len());
        for clip in &manifest.clips {
            let p = PathBuf::from(&clip.path);
            let p = if p.is_absolute() { p } else { base.join(p) };
            let track = read_track(&p)?;
            if track.len() != clip.length {
                return Err(invalid!(
                    "{}: manifest says {} frames, file has {}",
                    p.display(),
                    clip.length,
                    track.len()
                ));
            }
            if track.len() < manifest.n_window {
                return Err(invalid!("{}: shorter than the window length {}", p.display(), manifest.n_window));
            }
            tracks.push((track, clip.label));
        }
        Ok(Self { manifest, tracks })
    }

    /// Number of stride-1 windows available per label.
    pub fn windows_per_label(&self) -> Vec<(EmotionLabel, usize)> {
        let n = self.manifest.n_window;
        self.manifest
            .labels()
            .into_iter()
            .map(|l| {
                let count = self
                    .tracks
                    .iter()
                    .filter(|(_, y)| *y == l)
                    .map(|(t, _)| t.len() + 1 - n)
                    .sum();
                (l, count)
            })
            .collect()
    }
}
