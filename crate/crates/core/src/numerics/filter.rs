use super::Tensor;
use crate::error::Result;

/// Normalized 5×5 Gaussian kernel, row-major.
pub fn gaussian_kernel_5x5(sigma: f64) -> [f64; 25] {
    let mut k = [0.0; 25];
    let two_s2 = 2.0 * sigma * sigma;
    for (i, v) in k.iter_mut().enumerate() {
        let dy = (i / 5) as f64 - 2.0;
        let dx = (i % 5) as f64 - 2.0;
        *v = (-(dy * dy + dx * dx) / two_s2).exp();
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// 5×5 Gaussian smoothing with replicate padding.
pub fn gaussian_blur_5x5(map: &Tensor, sigma: f64) -> Result<Tensor> {
    let (h, w) = map.dims2()?;
    let k = gaussian_kernel_5x5(sigma);
    let src = map.data();
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for ky in 0..5 {
                let y = (r as isize + ky as isize - 2).clamp(0, h as isize - 1) as usize;
                for kx in 0..5 {
                    let x = (c as isize + kx as isize - 2).clamp(0, w as isize - 1) as usize;
                    acc += k[ky * 5 + kx] * src[y * w + x];
                }
            }
            out[r * w + c] = acc;
        }
    }
    Tensor::new(vec![h, w], out)
}
