//! Brute-force oracles for the numeric primitives. Each `check_*` runs
//! `n` random instances and reports the first disagreement.

use patchviz::metrics::{relevance, OverlapRegion, IRRELEVANT_BELOW};
use patchviz::network::{Conv2d, Layer, Network, Normalization};
use patchviz::numerics::{
    bicubic_upsample, bounding_box, cubic_kernel, percentile, percentile_threshold_mask, top_fraction_mask,
    BoundingBox, CubicConfig, PercentileMethod, PixelMask, Rng, Tensor,
};
use patchviz::saliency::{Method, PartPatch};
use rand::Rng as _;

use super::{conv_layer, random_tensor};

pub type Check = Result<(), String>;

/// Direct convolution of a `C×H×W` input.
pub fn naive_conv(x: &Tensor, conv: &Conv2d) -> Tensor {
    let (c, h, w) = x.dims3().unwrap();
    let (k, s, p) = (conv.kernel, conv.stride, conv.padding);
    let oh = (h + 2 * p - k) / s + 1;
    let ow = (w + 2 * p - k) / s + 1;
    let wt = conv.weight.data();
    let mut out = Tensor::zeros(&[conv.out_channels, oh, ow]);
    for o in 0..conv.out_channels {
        for r in 0..oh {
            for q in 0..ow {
                let mut acc = 0.0;
                for i in 0..c {
                    for u in 0..k {
                        for v in 0..k {
                            let y = (r * s + u) as isize - p as isize;
                            let z = (q * s + v) as isize - p as isize;
                            if y < 0 || z < 0 || y >= h as isize || z >= w as isize {
                                continue;
                            }
                            acc += wt[((o * c + i) * k + u) * k + v] * x.at3(i, y as usize, z as usize);
                        }
                    }
                }
                out.data_mut()[(o * oh + r) * ow + q] = acc;
            }
        }
    }
    out
}

/// Conv forward against [`naive_conv`], within 1e-12.
pub fn check_conv(n: u64) -> Check {
    for t in 0..n {
        let mut s = Rng::new(t).stream("conv-oracle", &[]);
        let cin = s.random_range(1..4);
        let cout = s.random_range(1..5);
        let kernel = [1, 3, 5][s.random_range(0..3)];
        let stride = s.random_range(1..3);
        let padding = s.random_range(0..=kernel / 2);
        let (h, w) = (s.random_range(kernel..12), s.random_range(kernel..12));
        let layer = conv_layer(&mut s, cin, cout, kernel, stride, padding);
        let Layer::Conv2d(conv) = layer.clone() else { unreachable!() };
        let x = random_tensor(t, "conv-x", &[cin, h, w], -1.0, 1.0);
        let net = Network::new((cin, h, w), Normalization::identity(cin), vec![layer]).unwrap();
        let got = net.features(&x).unwrap();
        let want = naive_conv(&x, &conv);
        if got.shape() != want.shape() {
            return Err(format!("conv instance {t}: shape {:?} vs {:?}", got.shape(), want.shape()));
        }
        if let Some((a, b)) = got.data().iter().zip(want.data()).find(|(a, b)| (*a - *b).abs() > 1e-12) {
            return Err(format!("conv instance {t}: {a} vs {b}"));
        }
    }
    Ok(())
}

/// Bicubic resize as a full sum over a clamped, over-wide index range.
pub fn bicubic_oracle(map: &Tensor, (th, tw): (usize, usize), a: f64) -> Tensor {
    let (h, w) = map.dims2().unwrap();
    let src = |o: usize, n_in: usize, n_out: usize| (o as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5;
    Tensor::from_fn(&[th, tw], |i| {
        let (sy, sx) = (src(i / tw, h, th), src(i % tw, w, tw));
        let mut acc = 0.0;
        for y in -4..h as isize + 4 {
            let ky = cubic_kernel(sy - y as f64, a);
            if ky == 0.0 {
                continue;
            }
            for x in -4..w as isize + 4 {
                let kx = cubic_kernel(sx - x as f64, a);
                let (cy, cx) = (y.clamp(0, h as isize - 1) as usize, x.clamp(0, w as isize - 1) as usize);
                acc += ky * kx * map.at2(cy, cx);
            }
        }
        acc
    })
}

/// Bicubic upsampling against [`bicubic_oracle`], within 1e-12.
pub fn check_bicubic(n: u64) -> Check {
    for t in 0..n {
        let mut s = Rng::new(t).stream("bicubic", &[]);
        let (h, w) = (s.random_range(1..8), s.random_range(1..8));
        let target = (h * s.random_range(1..9), w * s.random_range(1..9) + s.random_range(0..3));
        let map = random_tensor(t, "bicubic-map", &[h, w], -1.0, 1.0);
        let got = bicubic_upsample(&map, target, &CubicConfig::default()).unwrap();
        let want = bicubic_oracle(&map, target, -0.75);
        if let Some((a, b)) = got.data().iter().zip(want.data()).find(|(a, b)| (*a - *b).abs() > 1e-12) {
            return Err(format!("bicubic instance {t}: {a} vs {b}"));
        }
    }
    Ok(())
}

/// Top-fraction masks against a full sort with row-major tie-breaking; exact.
pub fn check_top_fraction(n: u64) -> Check {
    for t in 0..n {
        let mut s = Rng::new(t).stream("topk", &[]);
        let (h, w) = (s.random_range(2..20), s.random_range(2..20));
        // Coarse values force ties.
        let map = Tensor::from_fn(&[h, w], |_| (s.random::<f64>() * 6.0).floor());
        let frac = s.random_range(0.01..1.0);
        let k = (frac * (h * w) as f64 - 1e-9).ceil() as usize;
        let mut idx: Vec<usize> = (0..h * w).collect();
        idx.sort_by(|&i, &j| map.data()[j].partial_cmp(&map.data()[i]).unwrap().then(i.cmp(&j)));
        let mut want = vec![false; h * w];
        idx[..k].iter().for_each(|&i| want[i] = true);
        if top_fraction_mask(&map, frac).unwrap().bits() != &want[..] {
            return Err(format!("top-fraction instance {t}"));
        }
    }
    Ok(())
}

/// Linear-interpolation percentile (within 1e-12) and its threshold mask (exact).
pub fn check_percentile(n: u64) -> Check {
    for t in 0..n {
        let mut s = Rng::new(t).stream("pct", &[]);
        let len = s.random_range(2..300);
        let map = Tensor::from_fn(&[1, len], |_| s.random::<f64>());
        let q = s.random_range(1.0..99.0);
        let mut v = map.data().to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pos = q / 100.0 * (len - 1) as f64;
        let (lo, frac) = (pos.floor() as usize, pos - pos.floor());
        let thr = if lo + 1 < len { v[lo] * (1.0 - frac) + v[lo + 1] * frac } else { v[lo] };
        let got = percentile(map.data(), q, PercentileMethod::Linear).unwrap();
        if (got - thr).abs() > 1e-12 {
            return Err(format!("percentile instance {t}: {got} vs {thr}"));
        }
        let mask = percentile_threshold_mask(&map, q, PercentileMethod::Linear).unwrap();
        for (i, &b) in mask.bits().iter().enumerate() {
            let x = map.data()[i];
            if (x - thr).abs() > 1e-12 && b != (x > thr) {
                return Err(format!("percentile mask instance {t}, pixel {i}"));
            }
        }
    }
    Ok(())
}

fn random_mask(s: &mut impl rand::Rng, h: usize, w: usize, p: f64) -> PixelMask {
    PixelMask::from_bits(h, w, (0..h * w).map(|_| s.random::<f64>() < p).collect()).unwrap()
}

/// Bounding boxes against min/max over the set pixels; exact.
pub fn check_bbox(n: u64) -> Check {
    for t in 0..n {
        let mut s = Rng::new(t).stream("bbox", &[]);
        let (h, w) = (s.random_range(1..16), s.random_range(1..16));
        let p = s.random_range(0.02..0.5);
        let mask = random_mask(&mut s, h, w, p);
        let on: Vec<(usize, usize)> = (0..h * w).filter(|&i| mask.bits()[i]).map(|i| (i / w, i % w)).collect();
        let want = (!on.is_empty()).then(|| BoundingBox {
            top: on.iter().map(|p| p.0).min().unwrap(),
            left: on.iter().map(|p| p.1).min().unwrap(),
            bottom: on.iter().map(|p| p.0).max().unwrap(),
            right: on.iter().map(|p| p.1).max().unwrap(),
        });
        if bounding_box(&mask).ok() != want {
            return Err(format!("bounding-box instance {t}"));
        }
    }
    Ok(())
}

/// Crop-box overlap fractions against a pixel count; exact.
pub fn check_overlap(n: u64) -> Check {
    for t in 0..n {
        let mut s = Rng::new(t).stream("overlap-oracle", &[]);
        let (h, w) = (s.random_range(4..24), s.random_range(4..24));
        let mask = random_mask(&mut s, h, w, 0.1);
        let Ok(bbox) = bounding_box(&mask) else { continue };
        let seg = random_mask(&mut s, h, w, 0.4);
        let patch = PartPatch {
            image_id: t,
            method: Method::Prp,
            crop: Tensor::zeros(&[3, bbox.height(), bbox.width()]),
            mask,
            bbox,
        };
        let (mut inside, mut total) = (0usize, 0usize);
        for i in 0..h * w {
            let (r, c) = (i / w, i % w);
            if r >= bbox.top && r <= bbox.bottom && c >= bbox.left && c <= bbox.right {
                total += 1;
                inside += usize::from(seg.bits()[i]);
            }
        }
        let v = relevance(&patch, &seg, OverlapRegion::CropBox, IRRELEVANT_BELOW).unwrap();
        let want = inside as f64 / total as f64;
        if v.overlap_fraction != want || v.irrelevant != (want < IRRELEVANT_BELOW) {
            return Err(format!("overlap instance {t}: {} vs {want}", v.overlap_fraction));
        }
    }
    Ok(())
}
