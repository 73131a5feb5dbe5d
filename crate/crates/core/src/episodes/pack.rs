//! Frozen, hashed episode packs.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{derive_seed, sha256_hex, to_canonical_json};

use super::family::Family;
use super::generate::{generate_episode_with_id, GenerationError};
use super::spec::EpisodeSpec;

pub const PACK_FORMAT: &str = "closurebench-pack/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackManifest {
    pub format: String,
    pub pack_name: String,
    pub base_seed: u64,
    pub per_family_counts: BTreeMap<Family, usize>,
    /// Sorted ascending.
    pub episode_ids: Vec<String>,
    /// SHA-256 over every episode file's bytes, concatenated in id order.
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pack {
    pub manifest: PackManifest,
    pub episodes: Vec<EpisodeSpec>,
}

#[derive(Debug, Error)]
pub enum PackError {
    #[error("per-family count must be at least 1")]
    EmptyCount,
    #[error("no families selected")]
    NoFamilies,
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed json in {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("pack content hash mismatch: manifest says {expected}, files hash to {actual}")]
    HashMismatch { expected: String, actual: String },
    #[error("manifest lists {listed} episodes but pack holds {found}")]
    EpisodeSetMismatch { listed: usize, found: usize },
}

/// Canonical file bytes for one episode: compact sorted-key JSON plus a newline.
pub fn episode_bytes(spec: &EpisodeSpec) -> Vec<u8> {
    let mut s = to_canonical_json(spec).expect("episode specs always serialize");
    s.push('\n');
    s.into_bytes()
}

pub fn content_hash<'a>(episodes: impl IntoIterator<Item = &'a EpisodeSpec>) -> String {
    let mut all = Vec::new();
    for e in episodes {
        all.extend(episode_bytes(e));
    }
    sha256_hex(&all)
}

pub fn episode_seed(base_seed: u64, family: Family, index: usize) -> u64 {
    derive_seed(&["pack", &base_seed.to_string(), family.as_str(), &index.to_string()])
}

pub fn episode_id(family: Family, index: usize) -> String {
    format!("{}-{index:04}", family.as_str().to_lowercase())
}

/// Generate and validate `per_family_count` episodes for each family.
pub fn build_pack(families: &[Family], per_family_count: usize, base_seed: u64) -> Result<Pack, PackError> {
    let jobs = pack_jobs(families, per_family_count, base_seed)?;
    let episodes =
        jobs.into_iter().map(|(f, seed, id)| generate_episode_with_id(f, seed, &id)).collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_pack(episodes, base_seed))
}

/// The (family, seed, id) triples a pack is built from, for callers that generate in parallel.
pub fn pack_jobs(
    families: &[Family],
    per_family_count: usize,
    base_seed: u64,
) -> Result<Vec<(Family, u64, String)>, PackError> {
    if per_family_count == 0 {
        return Err(PackError::EmptyCount);
    }
    if families.is_empty() {
        return Err(PackError::NoFamilies);
    }
    let mut fams = families.to_vec();
    fams.sort();
    fams.dedup();
    let mut jobs = Vec::new();
    for f in fams {
        for i in 0..per_family_count {
            jobs.push((f, episode_seed(base_seed, f, i), episode_id(f, i)));
        }
    }
    Ok(jobs)
}

/// Sort episodes by id and compute the manifest.
pub fn assemble_pack(mut episodes: Vec<EpisodeSpec>, base_seed: u64) -> Pack {
    episodes.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));
    let mut per_family_counts = BTreeMap::new();
    for e in &episodes {
        *per_family_counts.entry(e.family).or_insert(0) += 1;
    }
    let manifest = PackManifest {
        format: PACK_FORMAT.to_string(),
        pack_name: format!("grid_balanced_{}", episodes.len()),
        base_seed,
        per_family_counts,
        episode_ids: episodes.iter().map(|e| e.episode_id.clone()).collect(),
        content_hash: content_hash(&episodes),
    };
    Pack { manifest, episodes }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PackError + '_ {
    move |source| PackError::Io { path: path.display().to_string(), source }
}

impl Pack {
    /// Write `manifest.json` and `episodes/<id>.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), PackError> {
        let ep_dir = dir.join("episodes");
        fs::create_dir_all(&ep_dir).map_err(io_err(&ep_dir))?;
        for e in &self.episodes {
            let p = ep_dir.join(format!("{}.json", e.episode_id));
            fs::write(&p, episode_bytes(e)).map_err(io_err(&p))?;
        }
        let mp = dir.join("manifest.json");
        let mut m = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        m.push('\n');
        fs::write(&mp, m).map_err(io_err(&mp))
    }

    /// Read a pack and verify its content hash against the raw file bytes.
    pub fn load(dir: &Path) -> Result<Pack, PackError> {
        let mp = dir.join("manifest.json");
        let text = fs::read_to_string(&mp).map_err(io_err(&mp))?;
        let manifest: PackManifest =
            serde_json::from_str(&text).map_err(|source| PackError::Json { path: mp.display().to_string(), source })?;
        let mut all = Vec::new();
        let mut episodes = Vec::with_capacity(manifest.episode_ids.len());
        for id in &manifest.episode_ids {
            let p = dir.join("episodes").join(format!("{id}.json"));
            let bytes = fs::read(&p).map_err(io_err(&p))?;
            all.extend_from_slice(&bytes);
            let spec: EpisodeSpec = serde_json::from_slice(&bytes)
                .map_err(|source| PackError::Json { path: p.display().to_string(), source })?;
            episodes.push(spec);
        }
        let actual = sha256_hex(&all);
        if actual != manifest.content_hash {
            return Err(PackError::HashMismatch { expected: manifest.content_hash.clone(), actual });
        }
        let on_disk = fs::read_dir(dir.join("episodes"))
            .map(|rd| {
                rd.filter(|e| e.as_ref().is_ok_and(|e| e.path().extension().is_some_and(|x| x == "json"))).count()
            })
            .unwrap_or(0);
        if on_disk != manifest.episode_ids.len() {
            return Err(PackError::EpisodeSetMismatch { listed: manifest.episode_ids.len(), found: on_disk });
        }
        Ok(Pack { manifest, episodes })
    }
}
