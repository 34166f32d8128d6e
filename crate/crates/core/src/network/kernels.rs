//! Raw loops behind the layer forward and backward passes. All tensors are
//! `C×H×W` row-major slices.

use super::layer::Conv2d;

/// Range of output columns `x` for which `x*s + k - p` lands inside `[0, n)`.
#[inline]
fn valid_range(out: usize, n: usize, k: usize, s: usize, p: usize) -> (usize, usize) {
    // need x*s + k >= p  and  x*s + k - p < n
    let lo = if k >= p { 0 } else { (p - k).div_ceil(s) };
    let hi = if n + p > k { ((n + p - k - 1) / s + 1).min(out) } else { 0 };
    (lo, hi.max(lo))
}

pub(crate) fn conv_forward(
    conv: &Conv2d,
    input: &[f64],
    (h, w): (usize, usize),
    (oh, ow): (usize, usize),
) -> Vec<f64> {
    let (cin, cout, k, s, p) = (
        conv.in_channels,
        conv.out_channels,
        conv.kernel,
        conv.stride,
        conv.padding,
    );
    let wt = conv.weight.data();
    let mut out = vec![0.0; cout * oh * ow];
    for o in 0..cout {
        let out_plane = &mut out[o * oh * ow..(o + 1) * oh * ow];
        for i in 0..cin {
            let in_plane = &input[i * h * w..(i + 1) * h * w];
            for ky in 0..k {
                let (ylo, yhi) = valid_range(oh, h, ky, s, p);
                for kx in 0..k {
                    let wv = wt[((o * cin + i) * k + ky) * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let (xlo, xhi) = valid_range(ow, w, kx, s, p);
                    for y in ylo..yhi {
                        let iy = y * s + ky - p;
                        let orow = &mut out_plane[y * ow..(y + 1) * ow];
                        let irow = &in_plane[iy * w..(iy + 1) * w];
                        if s == 1 {
                            let off = xlo + kx - p;
                            for (ov, iv) in orow[xlo..xhi].iter_mut().zip(&irow[off..off + (xhi - xlo)]) {
                                *ov += wv * iv;
                            }
                        } else {
                            for x in xlo..xhi {
                                orow[x] += wv * irow[x * s + kx - p];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradient w.r.t. the convolution input.
pub(crate) fn conv_backward_input(
    conv: &Conv2d,
    grad_out: &[f64],
    (h, w): (usize, usize),
    (oh, ow): (usize, usize),
) -> Vec<f64> {
    let (cin, cout, k, s, p) = (
        conv.in_channels,
        conv.out_channels,
        conv.kernel,
        conv.stride,
        conv.padding,
    );
    let wt = conv.weight.data();
    let mut gin = vec![0.0; cin * h * w];
    for o in 0..cout {
        let g_plane = &grad_out[o * oh * ow..(o + 1) * oh * ow];
        for i in 0..cin {
            let gi_plane = &mut gin[i * h * w..(i + 1) * h * w];
            for ky in 0..k {
                let (ylo, yhi) = valid_range(oh, h, ky, s, p);
                for kx in 0..k {
                    let wv = wt[((o * cin + i) * k + ky) * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let (xlo, xhi) = valid_range(ow, w, kx, s, p);
                    for y in ylo..yhi {
                        let iy = y * s + ky - p;
                        let grow = &g_plane[y * ow..(y + 1) * ow];
                        let irow = &mut gi_plane[iy * w..(iy + 1) * w];
                        for x in xlo..xhi {
                            irow[x * s + kx - p] += wv * grow[x];
                        }
                    }
                }
            }
        }
    }
    gin
}

/// Gradient w.r.t. the convolution weights.
pub(crate) fn conv_backward_weight(
    conv: &Conv2d,
    input: &[f64],
    grad_out: &[f64],
    (h, w): (usize, usize),
    (oh, ow): (usize, usize),
) -> Vec<f64> {
    let (cin, cout, k, s, p) = (
        conv.in_channels,
        conv.out_channels,
        conv.kernel,
        conv.stride,
        conv.padding,
    );
    let mut gw = vec![0.0; cout * cin * k * k];
    for o in 0..cout {
        let g_plane = &grad_out[o * oh * ow..(o + 1) * oh * ow];
        if g_plane.iter().all(|&g| g == 0.0) {
            continue;
        }
        for i in 0..cin {
            let in_plane = &input[i * h * w..(i + 1) * h * w];
            for ky in 0..k {
                let (ylo, yhi) = valid_range(oh, h, ky, s, p);
                for kx in 0..k {
                    let (xlo, xhi) = valid_range(ow, w, kx, s, p);
                    let mut acc = 0.0;
                    for y in ylo..yhi {
                        let iy = y * s + ky - p;
                        let grow = &g_plane[y * ow..(y + 1) * ow];
                        let irow = &in_plane[iy * w..(iy + 1) * w];
                        for x in xlo..xhi {
                            acc += grow[x] * irow[x * s + kx - p];
                        }
                    }
                    gw[((o * cin + i) * k + ky) * k + kx] = acc;
                }
            }
        }
    }
    gw
}

/// Max pooling; returns outputs and the flat input index of each winner.
/// Ties keep the first index in window scan order.
pub(crate) fn maxpool_forward(
    input: &[f64],
    (c, h, w): (usize, usize, usize),
    (oh, ow): (usize, usize),
    k: usize,
    s: usize,
) -> (Vec<f64>, Vec<usize>) {
    let mut out = vec![0.0; c * oh * ow];
    let mut arg = vec![0usize; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0;
                for ky in 0..k {
                    for kx in 0..k {
                        let i = (ch * h + y * s + ky) * w + x * s + kx;
                        if input[i] > best {
                            best = input[i];
                            best_i = i;
                        }
                    }
                }
                let o = (ch * oh + y) * ow + x;
                out[o] = best;
                arg[o] = best_i;
            }
        }
    }
    (out, arg)
}
