//! Tab-separated dataset manifest: `split<TAB>label<TAB>image_path<TAB>mask_path?`.
//!
//! Relative paths resolve against the manifest's directory. Lines starting
//! with `#` and blank lines are ignored. Class ids are the indices of the
//! sorted distinct labels; image ids are record indices in file order.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imageio::{read_mask_png, read_rgb_png};
use crate::model::LabeledImage;
use crate::numerics::PixelMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train or test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: usize,
    pub split: Split,
    pub label: String,
    pub image: PathBuf,
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub path: PathBuf,
    pub entries: Vec<ManifestEntry>,
    pub classes: Vec<String>,
}

/// A decoded record: image, class id and optional segmentation.
#[derive(Debug, Clone)]
pub struct Sample {
    pub image: LabeledImage,
    pub mask: Option<PixelMask>,
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Manifest {
    pub fn parse(path: &Path, text: &str) -> Result<Manifest> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |msg: String| Error::input(path, format!("line {}: {msg}", lineno + 1));
            let fields: Vec<&str> = line.split('\t').collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(at(format!("expected 3 or 4 tab-separated fields, found {}", fields.len())));
            }
            let split: Split = fields[0].parse().map_err(at)?;
            let label = fields[1].trim();
            if label.is_empty() {
                return Err(at("empty label".into()));
            }
            let mask = fields.get(3).map(|s| s.trim()).filter(|s| !s.is_empty());
            entries.push(ManifestEntry {
                id: entries.len(),
                split,
                label: label.to_string(),
                image: resolve(base, fields[2].trim()),
                mask: mask.map(|m| resolve(base, m)),
            });
        }
        if entries.is_empty() {
            return Err(Error::input(path, "manifest has no records"));
        }
        let classes: Vec<String> = entries
            .iter()
            .map(|e| e.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let trained: BTreeSet<&str> = entries
            .iter()
            .filter(|e| e.split == Split::Train)
            .map(|e| e.label.as_str())
            .collect();
        if let Some(missing) = classes.iter().find(|c| !trained.contains(c.as_str())) {
            return Err(Error::input(path, format!("class {missing:?} has no train records")));
        }
        Ok(Manifest {
            path: path.to_path_buf(),
            entries,
            classes,
        })
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Manifest::parse(path, &text)
    }

    pub fn class_id(&self, label: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(label)).ok()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Decodes every record of `split` and checks that all images share
    /// `geometry` (channels, height, width) and masks match the image size.
    pub fn load_split(&self, split: Split, geometry: (usize, usize, usize)) -> Result<Vec<Sample>> {
        let records: Vec<&ManifestEntry> = self.split(split).collect();
        use rayon::prelude::*;
        records
            .par_iter()
            .map(|e| self.load_entry(e, geometry))
            .collect()
    }

    pub fn load_entry(&self, e: &ManifestEntry, geometry: (usize, usize, usize)) -> Result<Sample> {
        let image = read_rgb_png(&e.image).map_err(|err| entry_error(e, &e.image, err))?;
        if image.dims3()? != geometry {
            return Err(Error::input(
                &e.image,
                format!(
                    "record {}: geometry {:?} does not match {:?}",
                    e.id,
                    image.shape(),
                    geometry
                ),
            ));
        }
        let mask = match &e.mask {
            Some(p) => {
                let m = read_mask_png(p).map_err(|err| entry_error(e, p, err))?;
                if (m.height(), m.width()) != (geometry.1, geometry.2) {
                    return Err(Error::input(p, format!("record {}: mask size differs from image", e.id)));
                }
                Some(m)
            }
            None => None,
        };
        let label = self.class_id(&e.label).expect("labels come from the manifest");
        Ok(Sample {
            image: LabeledImage { id: e.id as u64, image, label },
            mask,
        })
    }

    /// Writes a manifest with paths relative to its own directory.
    pub fn render(entries: &[(Split, String, String, Option<String>)]) -> String {
        let mut out = String::from("# split\tlabel\timage\tmask\n");
        for (split, label, image, mask) in entries {
            out.push_str(&format!("{split}\t{label}\t{image}"));
            if let Some(m) = mask {
                out.push('\t');
                out.push_str(m);
            }
            out.push('\n');
        }
        out
    }
}

fn entry_error(e: &ManifestEntry, path: &Path, err: Error) -> Error {
    match err {
        Error::Io { source, .. } => Error::input(path, format!("record {}: {source}", e.id)),
        other => Error::input(path, format!("record {}: {other}", e.id)),
    }
}
