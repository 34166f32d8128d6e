mod common;

use common::{oracles, random_tensor};
use patchviz::numerics::{
    apply_deletion, bicubic_upsample, fraction_count, gaussian_blur_5x5, percentile, top_fraction_mask, CubicConfig,
    PercentileMethod, PixelMask, Rng, Tensor,
};
use proptest::prelude::*;
use rand::Rng as _;

#[test]
fn bicubic_matches_oracle() {
    oracles::check_bicubic(25).unwrap();
}

#[test]
fn bicubic_reproduces_grid_values_at_cell_centres() {
    let map = random_tensor(3, "grid", &[4, 5], 0.0, 1.0);
    let cfg = CubicConfig { align_corners: true, ..CubicConfig::default() };
    let up = bicubic_upsample(&map, (7, 9), &cfg).unwrap();
    for r in 0..4 {
        for c in 0..5 {
            assert!((up.at2(2 * r, 2 * c) - map.at2(r, c)).abs() < 1e-12);
        }
    }
}

#[test]
fn top_fraction_matches_sort_oracle() {
    oracles::check_top_fraction(25).unwrap();
}

#[test]
fn percentile_mask_matches_oracle() {
    oracles::check_percentile(25).unwrap();
    let v: Vec<f64> = (1..=10).map(f64::from).collect();
    assert!((percentile(&v, 95.0, PercentileMethod::Linear).unwrap() - 9.55).abs() < 1e-12);
}

#[test]
fn bounding_box_matches_scan_oracle() {
    oracles::check_bbox(25).unwrap();
}

fn map_strategy() -> impl Strategy<Value = Tensor> {
    (1usize..7, 1usize..7).prop_flat_map(|(h, w)| {
        prop::collection::vec(-10.0f64..10.0, h * w).prop_map(move |v| Tensor::new(vec![h, w], v).unwrap())
    })
}

proptest! {
    #[test]
    fn bicubic_is_linear(m in map_strategy(), k in -3.0f64..3.0, sy in 1usize..5, sx in 1usize..5) {
        let (h, w) = m.dims2().unwrap();
        let other = m.map(|v| (v * 1.7).sin());
        let cfg = CubicConfig::default();
        let t = (h * sy, w * sx);
        let lhs = bicubic_upsample(&m.zip_with(&other, |a, b| k * a + b).unwrap(), t, &cfg).unwrap();
        let a = bicubic_upsample(&m, t, &cfg).unwrap();
        let b = bicubic_upsample(&other, t, &cfg).unwrap();
        for i in 0..lhs.len() {
            prop_assert!((lhs.data()[i] - (k * a.data()[i] + b.data()[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn blur_commutes_with_constant_shift(m in map_strategy(), c in -5.0f64..5.0) {
        let a = gaussian_blur_5x5(&m.map(|v| v + c), 1.0).unwrap();
        let b = gaussian_blur_5x5(&m, 1.0).unwrap();
        for i in 0..a.len() {
            prop_assert!((a.data()[i] - (b.data()[i] + c)).abs() < 1e-9);
        }
    }

    #[test]
    fn top_fraction_keeps_ceil_count(m in map_strategy(), f in 0.001f64..1.0) {
        let mask = top_fraction_mask(&m, f).unwrap();
        let n = m.len();
        prop_assert_eq!(mask.count(), fraction_count(f, n));
        prop_assert!(mask.count() as f64 >= f * n as f64 - 1e-9);
        prop_assert!((mask.count() as f64) < f * n as f64 + 1.0);
    }

    #[test]
    fn deletion_is_idempotent(seed in 0u64..1000, p in 0.0f64..1.0) {
        let img = random_tensor(seed, "del", &[3, 6, 7], 0.0, 1.0);
        let mut s = Rng::new(seed).stream("del-mask", &[]);
        let mask = PixelMask::from_bits(6, 7, (0..42).map(|_| s.random::<f64>() < p).collect()).unwrap();
        let once = apply_deletion(&img, &mask).unwrap();
        prop_assert!(apply_deletion(&once, &mask).unwrap().bit_eq(&once));
        for i in 0..42 {
            for ch in 0..3 {
                let v = once.data()[ch * 42 + i];
                if mask.bits()[i] { prop_assert_eq!(v, 0.0) } else { prop_assert_eq!(v, img.data()[ch * 42 + i]) }
            }
        }
    }
}
