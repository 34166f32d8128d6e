mod common;

use common::{random_tensor, rel_close, tiny_net, TinyNet};
use patchviz::model::SimilarityKind;
use patchviz::network::{
    analytic_receptive_field, decode_model, encode_model, Conv2d, Layer, Network, NetworkConfig, Normalization,
    FORMAT_VERSION,
};
use patchviz::numerics::{Rng, Tensor};
use patchviz::Error;
use rayon::prelude::*;

fn single(layer: Layer, input: (usize, usize, usize)) -> Network {
    Network::new(input, Normalization::identity(input.0), vec![layer]).unwrap()
}

#[test]
fn conv_forward_matches_direct_loops() {
    common::oracles::check_conv(25).unwrap();
}

#[test]
fn identity_1x1_conv_is_exact() {
    let weight = Tensor::from_fn(&[3, 3, 1, 1], |i| if i / 3 == i % 3 { 1.0 } else { 0.0 });
    let net = single(
        Layer::Conv2d(Conv2d { in_channels: 3, out_channels: 3, kernel: 1, stride: 1, padding: 0, weight }),
        (3, 7, 5),
    );
    let x = random_tensor(1, "id", &[3, 7, 5], -2.0, 2.0);
    assert!(net.features(&x).unwrap().bit_eq(&x));
}

#[test]
fn relu_and_maxpool_match_oracles() {
    let x = random_tensor(2, "pool", &[2, 6, 8], -1.0, 1.0);
    let relu = single(Layer::Relu, (2, 6, 8)).features(&x).unwrap();
    assert!(relu.bit_eq(&x.map(|v| v.max(0.0))));
    let pooled = single(Layer::MaxPool2d { kernel: 2, stride: 2 }, (2, 6, 8)).features(&x).unwrap();
    assert_eq!(pooled.shape(), [2, 3, 4]);
    for c in 0..2 {
        for r in 0..3 {
            for q in 0..4 {
                let m = [(0, 0), (0, 1), (1, 0), (1, 1)]
                    .iter()
                    .map(|&(a, b)| x.at3(c, 2 * r + a, 2 * q + b))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(pooled.at3(c, r, q), m);
            }
        }
    }
}

#[test]
fn finite_differences_agree() {
    for seed in 0..2 {
        let (input, param) = common::gradient_check(seed, 60, 1e-5, 1e-3);
        assert!(input < 1e-4, "input gradient rel error {input}");
        assert!(param < 1e-4, "parameter gradient rel error {param}");
    }
}

#[test]
fn gradient_of_linear_net_ignores_input() {
    let net = {
        let mut s = Rng::new(3).stream("lin", &[]);
        Network::new(
            (3, 8, 8),
            Normalization::identity(3),
            vec![common::conv_layer(&mut s, 3, 4, 3, 1, 1), common::conv_layer(&mut s, 4, 2, 3, 1, 0)],
        )
        .unwrap()
    };
    let seed = random_tensor(4, "seed", &[2, 6, 6], -1.0, 1.0);
    let g = |x: &Tensor| {
        let (_, trace) = net.forward(x).unwrap();
        net.input_gradient(&trace, &seed).unwrap()
    };
    let a = g(&random_tensor(5, "a", &[3, 8, 8], 0.0, 1.0));
    let b = g(&random_tensor(6, "b", &[3, 8, 8], -3.0, 3.0));
    for (u, v) in a.data().iter().zip(b.data()) {
        assert!((u - v).abs() <= 1e-12);
    }
}

#[test]
fn zero_seed_gives_zero_gradient() {
    let net = tiny_net(7, &TinyNet { bias: Some(0.1), ..TinyNet::default() });
    let x = random_tensor(7, "x", &[3, 16, 16], 0.0, 1.0);
    let (out, trace) = net.forward(&x).unwrap();
    let g = net.backward(&trace, &Tensor::zeros(out.shape()), true).unwrap();
    assert!(g.input.data().iter().all(|&v| v == 0.0));
    assert!(g.params.unwrap().iter().flatten().flatten().all(|&v| v == 0.0));
}

#[test]
fn weight_gradient_of_1x1_conv_is_the_input() {
    let weight = Tensor::from_fn(&[1, 2, 1, 1], |i| i as f64 + 0.5);
    let net = single(
        Layer::Conv2d(Conv2d { in_channels: 2, out_channels: 1, kernel: 1, stride: 1, padding: 0, weight }),
        (2, 4, 4),
    );
    let x = random_tensor(8, "x", &[2, 4, 4], -1.0, 1.0);
    let (_, trace) = net.forward(&x).unwrap();
    let mut seed = Tensor::zeros(&[1, 4, 4]);
    seed.data_mut()[5] = 1.0;
    let p = net.parameter_gradients(&trace, &seed).unwrap();
    let wg = p[0].as_ref().unwrap();
    assert_eq!(wg, &vec![x.at3(0, 1, 1), x.at3(1, 1, 1)]);
}

#[test]
fn bias_free_relu_net_is_positively_homogeneous() {
    let net = tiny_net(9, &TinyNet { conv_tail: true, ..TinyNet::default() });
    let x = random_tensor(9, "x", &[3, 16, 16], -1.0, 1.0);
    let f = net.features(&x).unwrap();
    for alpha in [0.3, 2.0, 17.0] {
        let fa = net.features(&x.scale(alpha)).unwrap();
        for (a, b) in fa.data().iter().zip(f.data()) {
            assert!(rel_close(*a, alpha * b, 1e-5, 1e-12));
        }
    }
}

/// Union of input pixels with non-zero gradient for one output location.
fn gradient_support(net: &Network, loc: (usize, usize), trials: u64) -> Vec<bool> {
    let (c, h, w) = net.input_shape();
    let (d, oh, ow) = net.output_dims();
    let mut seed = Tensor::zeros(&[d, oh, ow]);
    for ch in 0..d {
        seed.data_mut()[ch * oh * ow + loc.0 * ow + loc.1] = 1.0;
    }
    let mut support = vec![false; h * w];
    for t in 0..trials {
        let x = random_tensor(t, "support", &[c, h, w], -1.0, 1.0);
        let (_, trace) = net.forward(&x).unwrap();
        let g = net.input_gradient(&trace, &seed).unwrap();
        for ch in 0..c {
            for i in 0..h * w {
                support[i] |= g.data()[ch * h * w + i] != 0.0;
            }
        }
    }
    support
}

fn positive_conv(cin: usize, cout: usize, k: usize, padding: usize) -> Layer {
    Layer::Conv2d(Conv2d {
        in_channels: cin,
        out_channels: cout,
        kernel: k,
        stride: 1,
        padding,
        weight: Tensor::full(&[cout, cin, k, k], 0.1),
    })
}

#[test]
fn receptive_field_matches_gradient_support() {
    let cases: Vec<(Vec<Layer>, usize)> = vec![
        (vec![positive_conv(1, 1, 3, 0)], 3),
        (vec![positive_conv(1, 1, 3, 0), positive_conv(1, 1, 3, 0)], 5),
        (
            vec![positive_conv(1, 1, 3, 0), Layer::MaxPool2d { kernel: 2, stride: 2 }, positive_conv(1, 1, 3, 0)],
            8,
        ),
    ];
    for (layers, size) in cases {
        let net = Network::new((1, 20, 20), Normalization::identity(1), layers).unwrap();
        let rf = analytic_receptive_field(&net).unwrap();
        assert_eq!(rf.size, size);
        let (_, oh, ow) = net.output_dims();
        let loc = (oh / 2, ow / 2);
        let support = gradient_support(&net, loc, 40);
        let region = rf.region(loc.0, loc.1);
        for r in 0..20 {
            for c in 0..20 {
                assert_eq!(support[r * 20 + c], region.contains(r, c), "size {size} at ({r}, {c})");
            }
        }
    }
}

#[test]
fn default_network_receptive_field() {
    let net = Network::from_config(&NetworkConfig::default(), &Rng::new(0)).unwrap();
    let rf = analytic_receptive_field(&net).unwrap();
    assert_eq!((rf.size, rf.jump), (22, 8));
    assert_eq!(rf.center(1, 2), (11.5, 19.5));
    let support = gradient_support(&net, (1, 2), 20);
    let region = rf.region(1, 2);
    for (i, &s) in support.iter().enumerate() {
        if s {
            assert!(region.contains(i / 32, i % 32));
        }
    }
}

fn sample_model() -> patchviz::model::PrototypeModel {
    let net = tiny_net(11, &TinyNet { bias: Some(0.05), ..TinyNet::default() });
    let mut m = common::model_on(net, SimilarityKind::Prototree, 11);
    m.prototypes[1].source = Some(patchviz::model::PrototypeSource { image_id: 42, row: 3, col: 1 });
    m
}

#[test]
fn model_file_round_trips() {
    let m = sample_model();
    let bytes = encode_model(&m).unwrap();
    assert_eq!(&bytes[..4], b"PSAN");
    assert_eq!(decode_model(&bytes).unwrap(), m);
}

#[test]
fn model_file_corruption_is_detected() {
    let bytes = encode_model(&sample_model()).unwrap();
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_model(&bad), Err(Error::Format(_))));

    let mut bad = bytes.clone();
    bad[4..6].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    assert!(matches!(decode_model(&bad), Err(Error::Version { .. })));

    let mut bad = bytes.clone();
    let last_payload = bytes.len() - 4 - 1;
    bad[last_payload] ^= 0x40;
    assert!(matches!(decode_model(&bad), Err(Error::Checksum { .. })));

    assert!(matches!(decode_model(&bytes[..bytes.len() / 2]), Err(Error::Truncated(_))));
}

#[test]
fn concurrent_forward_matches_sequential() {
    let net = tiny_net(12, &TinyNet { bias: Some(0.1), ..TinyNet::default() });
    let xs: Vec<Tensor> = (0..16).map(|t| random_tensor(t, "batch", &[3, 16, 16], 0.0, 1.0)).collect();
    let seq: Vec<Tensor> = xs.iter().map(|x| net.features(x).unwrap()).collect();
    let par: Vec<Tensor> = xs.par_iter().map(|x| net.features(x).unwrap()).collect();
    for (a, b) in seq.iter().zip(&par) {
        assert!(a.bit_eq(b));
    }
}
