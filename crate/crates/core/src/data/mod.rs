//! Datasets: the synthetic planted-glyph generator and manifest ingestion.

mod manifest;
mod synth;

pub use manifest::{Manifest, ManifestEntry, Sample, Split};
pub use synth::{generate_sample, glyph, glyph_color, Placement, SynthConfig, SynthSample, GLYPH_SIZE};
