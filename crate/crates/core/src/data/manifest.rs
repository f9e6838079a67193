use std::fs;
use std::path::{Path, PathBuf};

use super::SamplePair;
use crate::error::{Error, Result};
use crate::raster::{read_png, read_saliency, write_png, write_sal};

/// One line of a dataset manifest: `id, image_path, saliency_path`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub image_path: PathBuf,
    pub saliency_path: PathBuf,
}

/// Parses a manifest. Blank lines and lines starting with `#` are skipped;
/// relative paths are resolved against the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::CorruptFile {
                path: path.to_path_buf(),
                reason: format!("line {}: expected `id, image_path, saliency_path`", n + 1),
            });
        }
        entries.push(ManifestEntry {
            id: fields[0].to_owned(),
            image_path: base.join(fields[1]),
            saliency_path: base.join(fields[2]),
        });
    }
    Ok(entries)
}

/// Loads every pair listed in a manifest.
pub fn load_pairs(manifest: impl AsRef<Path>) -> Result<Vec<SamplePair>> {
    let entries = read_manifest(manifest)?;
    if entries.is_empty() {
        return Err(Error::EmptyDataset);
    }
    entries
        .into_iter()
        .map(|e| SamplePair::new(e.id, read_png(&e.image_path)?, read_saliency(&e.saliency_path)?))
        .collect()
}

/// Writes pairs as `<id>.png` plus `<id>.sal` into `dir` together with a
/// `manifest.txt`, returning the manifest path.
pub fn write_corpus(dir: impl AsRef<Path>, pairs: &[SamplePair]) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut text = String::new();
    for p in pairs {
        let img = format!("{}.png", p.id);
        let sal = format!("{}.sal", p.id);
        write_png(dir.join(&img), &p.image)?;
        write_sal(dir.join(&sal), &p.saliency)?;
        text.push_str(&format!("{}, {img}, {sal}\n", p.id));
    }
    let manifest = dir.join("manifest.txt");
    fs::write(&manifest, text)?;
    Ok(manifest)
}
