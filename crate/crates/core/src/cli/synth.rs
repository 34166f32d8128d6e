use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::data::{generate_sample, Manifest, Split, SynthConfig};
use crate::error::{Error, Result};
use crate::imageio::{write_mask_png, write_rgb_png};

pub const MANIFEST_FILE: &str = "manifest.tsv";

pub fn class_name(class: usize, classes: usize) -> String {
    let width = classes.saturating_sub(1).to_string().len();
    format!("glyph-{class:0width$}")
}

/// Writes images, masks and a manifest under `out`; returns the manifest path.
pub fn gen_synth(cfg: &SynthConfig, out: &Path) -> Result<PathBuf> {
    for sub in ["images", "masks"] {
        let dir = out.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let jobs: Vec<(Split, usize)> = (0..cfg.train)
        .map(|i| (Split::Train, i))
        .chain((0..cfg.test).map(|i| (Split::Test, i)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(split, i)| {
            let sample = generate_sample(cfg, split.name(), i)?;
            let stem = format!("{split}_{i:05}.png");
            let image = format!("images/{stem}");
            let mask = format!("masks/{stem}");
            write_rgb_png(&out.join(&image), &sample.image)?;
            write_mask_png(&out.join(&mask), &sample.mask)?;
            Ok((split, class_name(sample.label, cfg.classes), image, Some(mask)))
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out.join(MANIFEST_FILE);
    std::fs::write(&path, Manifest::render(&records)).map_err(|e| Error::io(&path, e))?;
    let meta = out.join("synth_config.json");
    let mut text = serde_json::to_string_pretty(cfg)?;
    text.push('\n');
    std::fs::write(&meta, text).map_err(|e| Error::io(&meta, e))?;
    Ok(path)
}
