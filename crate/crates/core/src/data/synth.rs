//! Planted-glyph synthetic dataset: each class is a small coloured glyph
//! dropped onto a shared noise background, with the glyph support as the
//! ground-truth object mask.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{PixelMask, Rng, Tensor};

pub const GLYPH_SIZE: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Anywhere in the image.
    #[default]
    Uniform,
    /// Touching one of the four image borders.
    Border,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub classes: usize,
    pub train: usize,
    pub test: usize,
    pub size: usize,
    pub placement: Placement,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            classes: 4,
            train: 500,
            test: 200,
            size: 32,
            placement: Placement::Uniform,
            seed: 0,
        }
    }
}

/// Glyph bitmaps on a 7×7 canvas, one per class (cycled when there are
/// more classes than shapes).
pub fn glyph(class: usize) -> [[bool; GLYPH_SIZE]; GLYPH_SIZE] {
    let mut g = [[false; GLYPH_SIZE]; GLYPH_SIZE];
    for (r, row) in g.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            let (ri, ci) = (r as isize, c as isize);
            *v = match class % 6 {
                // thick plus
                0 => (2..=4).contains(&r) || (2..=4).contains(&c),
                // solid 6x6 block
                1 => r < 6 && c < 6,
                // ring with a centre dot
                2 => r == 0 || r == 6 || c == 0 || c == 6 || (r == 3 && c == 3),
                // thick X
                3 => (ri - ci).abs() <= 1 || (ri + ci - 6).abs() <= 1,
                // checkerboard
                4 => (r + c) % 2 == 0,
                // upward triangle
                _ => (ci - 3).abs() <= ri - 1 || r == 6,
            };
        }
    }
    g
}

/// Glyph colour per class.
pub fn glyph_color(class: usize) -> [f64; 3] {
    const COLORS: [[f64; 3]; 8] = [
        [0.95, 0.1, 0.1],
        [0.1, 0.85, 0.1],
        [0.1, 0.2, 0.95],
        [0.95, 0.9, 0.05],
        [0.9, 0.1, 0.9],
        [0.05, 0.9, 0.9],
        [0.98, 0.55, 0.0],
        [0.05, 0.05, 0.05],
    ];
    COLORS[class % COLORS.len()]
}

/// One generated image with its class and glyph mask.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub label: usize,
    pub image: Tensor,
    pub mask: PixelMask,
}

fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Generates sample `index` of a split. Images are quantized to 8 bits so
/// they survive a PNG round trip unchanged.
pub fn generate_sample(cfg: &SynthConfig, split: &str, index: usize) -> Result<SynthSample> {
    let n = cfg.size;
    if n < GLYPH_SIZE + 2 {
        return Err(Error::invalid(format!("image size {n} is too small for the glyphs")));
    }
    if cfg.classes == 0 {
        return Err(Error::invalid("need at least one class"));
    }
    let rng = Rng::new(cfg.seed);
    let mut s = rng.stream(&format!("synth-{split}"), &[index as u64]);
    let label = index % cfg.classes;
    let plane = n * n;
    // grey noise texture shared by all classes
    let mut img = vec![0.0; 3 * plane];
    for i in 0..plane {
        let v = s.random_range(0.35..0.65);
        for ch in 0..3 {
            img[ch * plane + i] = v;
        }
    }
    let span = n - GLYPH_SIZE;
    let (top, left) = match cfg.placement {
        Placement::Uniform => (s.random_range(0..=span), s.random_range(0..=span)),
        Placement::Border => {
            let along = s.random_range(0..=span);
            match s.random_range(0..4) {
                0 => (0, along),
                1 => (span, along),
                2 => (along, 0),
                _ => (along, span),
            }
        }
    };
    let shape = glyph(label);
    let color = glyph_color(label);
    let mut mask = PixelMask::empty(n, n);
    for (r, row) in shape.iter().enumerate() {
        for (c, &on) in row.iter().enumerate() {
            if !on {
                continue;
            }
            let (y, x) = (top + r, left + c);
            mask.set(y, x, true);
            // faint horizontal stripes give each glyph a texture
            let shade = if r % 2 == 0 { 1.0 } else { 0.8 };
            for (ch, &col) in color.iter().enumerate() {
                img[ch * plane + y * n + x] = col * shade;
            }
        }
    }
    let image = Tensor::new(vec![3, n, n], img.into_iter().map(quantize).collect())?;
    Ok(SynthSample { label, image, mask })
}
