//! PNG reading and writing for images, masks and saliency maps.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{PixelMask, Tensor};

fn png_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Png(format!("{}: {e}", path.display()))
}

fn write_png(path: &Path, w: usize, h: usize, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    let mut writer = enc.write_header().map_err(|e| png_err(path, e))?;
    writer.write_image_data(data).map_err(|e| png_err(path, e))?;
    writer.finish().map_err(|e| png_err(path, e))
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a `3×H×W` tensor with values in `[0, 1]` as 8-bit RGB.
pub fn write_rgb_png(path: &Path, image: &Tensor) -> Result<()> {
    let (c, h, w) = image.dims3()?;
    if c != 3 {
        return Err(Error::invalid("RGB PNG needs three channels"));
    }
    let plane = h * w;
    let d = image.data();
    let mut buf = Vec::with_capacity(3 * plane);
    for i in 0..plane {
        for ch in 0..3 {
            buf.push(to_u8(d[ch * plane + i]));
        }
    }
    write_png(path, w, h, png::ColorType::Rgb, png::BitDepth::Eight, &buf)
}

/// Writes an `H×W` map with values in `[0, 1]` as 16-bit grayscale.
pub fn write_gray16_png(path: &Path, map: &Tensor) -> Result<()> {
    let (h, w) = map.dims2()?;
    let mut buf = Vec::with_capacity(2 * h * w);
    for &v in map.data() {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        buf.extend_from_slice(&q.to_be_bytes());
    }
    write_png(path, w, h, png::ColorType::Grayscale, png::BitDepth::Sixteen, &buf)
}

/// Writes a mask as a 1-bit grayscale PNG (white = selected).
pub fn write_mask_png(path: &Path, mask: &PixelMask) -> Result<()> {
    let (h, w) = (mask.height(), mask.width());
    let stride = w.div_ceil(8);
    let mut buf = vec![0u8; stride * h];
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) {
                buf[r * stride + c / 8] |= 0x80 >> (c % 8);
            }
        }
    }
    write_png(path, w, h, png::ColorType::Grayscale, png::BitDepth::One, &buf)
}

struct Decoded {
    width: usize,
    height: usize,
    channels: usize,
    /// Samples scaled to `[0, 1]`, interleaved.
    samples: Vec<f64>,
}

fn decode(path: &Path) -> Result<Decoded> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = png::Decoder::new(BufReader::new(file));
    dec.set_transformations(png::Transformations::EXPAND);
    let mut reader = dec.read_info().map_err(|e| png_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(png_err(path, "unexpanded palette image")),
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let bytes = &buf[..info.buffer_size()];
    let samples: Vec<f64> = match info.bit_depth {
        png::BitDepth::Sixteen => bytes
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0)
            .collect(),
        png::BitDepth::Eight => bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        _ => return Err(png_err(path, "unexpected bit depth after expansion")),
    };
    Ok(Decoded {
        width,
        height,
        channels,
        samples,
    })
}

/// Reads a PNG as a `3×H×W` tensor in `[0, 1]`; grayscale is replicated.
pub fn read_rgb_png(path: &Path) -> Result<Tensor> {
    let d = decode(path)?;
    let plane = d.width * d.height;
    let mut out = vec![0.0; 3 * plane];
    for i in 0..plane {
        for ch in 0..3 {
            let src = if d.channels >= 3 { ch } else { 0 };
            out[ch * plane + i] = d.samples[i * d.channels + src];
        }
    }
    Tensor::new(vec![3, d.height, d.width], out)
}

/// Reads a 16- or 8-bit grayscale PNG as an `H×W` map in `[0, 1]`.
pub fn read_gray_png(path: &Path) -> Result<Tensor> {
    let d = decode(path)?;
    let plane = d.width * d.height;
    Tensor::new(
        vec![d.height, d.width],
        (0..plane).map(|i| d.samples[i * d.channels]).collect(),
    )
}

/// Reads a mask PNG; any non-zero first channel counts as selected.
pub fn read_mask_png(path: &Path) -> Result<PixelMask> {
    let d = decode(path)?;
    let plane = d.width * d.height;
    PixelMask::from_bits(
        d.height,
        d.width,
        (0..plane).map(|i| d.samples[i * d.channels] > 0.0).collect(),
    )
}
