use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AnnotatedMask, ProbabilityMap};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    pub prob_path: PathBuf,
    pub label_path: PathBuf,
    pub height: usize,
    pub width: usize,
}

/// Dataset description. Relative paths resolve against the manifest's directory.
///
/// Unknown top-level fields (e.g. fold assignments written by an exporter)
/// are kept and written back unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub num_classes: usize,
    #[serde(default)]
    pub unlabeled_class: u8,
    pub entries: Vec<ManifestEntry>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(num_classes: usize, unlabeled_class: u8, entries: Vec<ManifestEntry>) -> Result<Self> {
        let manifest = Self {
            num_classes,
            unlabeled_class,
            entries,
            extra: BTreeMap::new(),
            base_dir: PathBuf::new(),
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.validate()?;
        Ok(manifest)
    }

    /// Writes pretty-printed JSON with a trailing newline.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        super::write_atomic(path, |w| w.write_all(text.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=256).contains(&self.num_classes) {
            return Err(Error::Validation(format!(
                "num_classes must be in 2..=256, got {}",
                self.num_classes
            )));
        }
        if self.unlabeled_class as usize >= self.num_classes {
            return Err(Error::Validation(format!(
                "unlabeled_class {} is not below num_classes {}",
                self.unlabeled_class, self.num_classes
            )));
        }
        let mut seen = HashSet::new();
        for entry in &self.entries {
            if !seen.insert(entry.image_id.as_str()) {
                return Err(Error::Validation(format!("duplicate image_id {:?}", entry.image_id)));
            }
            if entry.height == 0 || entry.width == 0 {
                return Err(Error::Validation(format!("image {:?} has an empty grid", entry.image_id)));
            }
        }
        Ok(())
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = dir.into();
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load_mask(&self, entry: &ManifestEntry) -> Result<AnnotatedMask> {
        let mask = super::read_mask(&self.resolve(&entry.label_path), self.num_classes)
            .map_err(|e| e.in_image(&entry.image_id))?;
        check_dims(entry, mask.dims()).map_err(|e| e.in_image(&entry.image_id))?;
        Ok(mask)
    }

    pub fn load_probs(&self, entry: &ManifestEntry) -> Result<ProbabilityMap> {
        let probs = super::read_tensor(&self.resolve(&entry.prob_path), Some(self.num_classes))
            .map_err(|e| e.in_image(&entry.image_id))?;
        check_dims(entry, probs.dims()).map_err(|e| e.in_image(&entry.image_id))?;
        Ok(probs)
    }

    /// Loads one image's probabilities and mask, checking both against the entry.
    pub fn load_image(&self, entry: &ManifestEntry) -> Result<(ProbabilityMap, AnnotatedMask)> {
        Ok((self.load_probs(entry)?, self.load_mask(entry)?))
    }
}

fn check_dims(entry: &ManifestEntry, dims: (usize, usize)) -> Result<()> {
    if dims != (entry.height, entry.width) {
        return Err(Error::Shape(format!(
            "loaded {}x{}, manifest declares {}x{}",
            dims.0, dims.1, entry.height, entry.width
        )));
    }
    Ok(())
}
