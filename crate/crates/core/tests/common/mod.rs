#![allow(dead_code)]

pub mod oracles;

use patchviz::model::{PrototypeModel, SimilarityKind};
use patchviz::network::{Conv2d, Layer, Network, Normalization};
use patchviz::numerics::{Rng, Tensor};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

pub fn random_tensor(seed: u64, tag: &str, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let mut s = Rng::new(seed).stream(tag, &[]);
    Tensor::from_fn(shape, |_| lo + (hi - lo) * s.random::<f64>())
}

pub fn conv_layer(stream: &mut impl rand::Rng, cin: usize, cout: usize, kernel: usize, stride: usize, padding: usize) -> Layer {
    let std = (2.0 / (cin * kernel * kernel) as f64).sqrt();
    let normal = Normal::new(0.0, std).unwrap();
    Layer::Conv2d(Conv2d {
        in_channels: cin,
        out_channels: cout,
        kernel,
        stride,
        padding,
        weight: Tensor::from_fn(&[cout, cin, kernel, kernel], |_| normal.sample(stream)),
    })
}

fn bias_layer(stream: &mut impl rand::Rng, channels: usize, scale: f64) -> Layer {
    Layer::AddBias {
        bias: (0..channels).map(|_| scale * (2.0 * stream.random::<f64>() - 1.0)).collect(),
    }
}

pub struct TinyNet {
    pub bias: Option<f64>,
    /// Finish with a 1×1 convolution instead of a ReLU.
    pub conv_tail: bool,
    pub normalization: Normalization,
}

impl Default for TinyNet {
    fn default() -> Self {
        TinyNet {
            bias: None,
            conv_tail: false,
            normalization: Normalization::identity(3),
        }
    }
}

/// Random 3×16×16 network: conv3 → ReLU → maxpool2 → conv3 → ReLU, with
/// optional biases and 1×1 conv tail.
pub fn tiny_net(seed: u64, spec: &TinyNet) -> Network {
    let mut s = Rng::new(seed).stream("tiny-net", &[]);
    let mut layers = vec![conv_layer(&mut s, 3, 4, 3, 1, 1)];
    if let Some(b) = spec.bias {
        layers.push(bias_layer(&mut s, 4, b));
    }
    layers.push(Layer::Relu);
    layers.push(Layer::MaxPool2d { kernel: 2, stride: 2 });
    layers.push(conv_layer(&mut s, 4, 6, 3, 1, 1));
    if let Some(b) = spec.bias {
        layers.push(bias_layer(&mut s, 6, b));
    }
    layers.push(Layer::Relu);
    if spec.conv_tail {
        layers.push(conv_layer(&mut s, 6, 5, 1, 1, 0));
        if let Some(b) = spec.bias {
            layers.push(bias_layer(&mut s, 5, b));
        }
    }
    Network::new((3, 16, 16), spec.normalization.clone(), layers).unwrap()
}

pub fn model_on(network: Network, kind: SimilarityKind, seed: u64) -> PrototypeModel {
    PrototypeModel::new(network, kind, 2, 2, &Rng::new(seed))
}

/// `|a - b| <= rel · max(|a|, |b|, floor)`.
pub fn rel_close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Worst relative error between analytic and central-difference gradients
/// of `⟨seed, f(x)⟩`, over `coords` input and `coords` parameter entries.
pub fn gradient_check(seed: u64, coords: usize, h: f64, floor: f64) -> (f64, f64) {
    let spec = TinyNet {
        bias: Some(0.1),
        conv_tail: true,
        normalization: Normalization {
            mean: vec![0.4, 0.5, 0.6],
            std: vec![0.3, 0.25, 0.2],
        },
    };
    let mut net = tiny_net(seed, &spec);
    let x = random_tensor(seed, "fd-input", &[3, 16, 16], 0.0, 1.0);
    let (out, trace) = net.forward(&x).unwrap();
    let g = random_tensor(seed, "fd-seed", out.shape(), -1.0, 1.0);
    let grads = net.backward(&trace, &g, true).unwrap();
    let objective = |net: &Network, x: &Tensor| -> f64 {
        let f = net.features(x).unwrap();
        f.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
    };

    let mut s = Rng::new(seed).stream("fd-coords", &[]);
    let mut worst_input = 0.0f64;
    for _ in 0..coords {
        let i = s.random_range(0..x.len());
        let mut xp = x.clone();
        xp.data_mut()[i] += h;
        let mut xm = x.clone();
        xm.data_mut()[i] -= h;
        let numeric = (objective(&net, &xp) - objective(&net, &xm)) / (2.0 * h);
        worst_input = worst_input.max(rel_err(grads.input.data()[i], numeric, floor));
    }

    let params = grads.params.unwrap();
    let slots: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .filter_map(|(l, p)| p.as_ref().map(|p| (l, p.len())))
        .collect();
    let total: usize = slots.iter().map(|s| s.1).sum();
    let mut worst_param = 0.0f64;
    for _ in 0..coords {
        let mut k = s.random_range(0..total);
        let &(layer, _) = slots
            .iter()
            .find(|&&(_, n)| {
                if k < n {
                    true
                } else {
                    k -= n;
                    false
                }
            })
            .unwrap();
        let orig = net.layers()[layer].params().unwrap()[k];
        net.layers_mut()[layer].params_mut().unwrap()[k] = orig + h;
        let plus = objective(&net, &x);
        net.layers_mut()[layer].params_mut().unwrap()[k] = orig - h;
        let minus = objective(&net, &x);
        net.layers_mut()[layer].params_mut().unwrap()[k] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let analytic = params[layer].as_ref().unwrap()[k];
        worst_param = worst_param.max(rel_err(analytic, numeric, floor));
    }
    (worst_input, worst_param)
}

/// Bias-free 3×32×32 net of three 3×3 convolutions, one prototype close to
/// the features at the centre location, and a saliency map equal to the
/// summed absolute input gradient of that similarity. Returns the analytic
/// receptive-field fraction and the effective receptive-field area.
pub fn erf_fixture(seed: u64) -> (f64, Option<f64>) {
    use patchviz::metrics::{deletion_curve, effective_rf_area, DeletionConfig};
    use patchviz::model::{DecisionHead, Prototype};
    use patchviz::network::analytic_receptive_field;
    use patchviz::saliency::{score_gradient, Method, SaliencyMap, Target};

    let mut s = Rng::new(seed).stream("erf-fixture", &[]);
    let layers = vec![
        conv_layer(&mut s, 3, 6, 3, 1, 1),
        Layer::Relu,
        conv_layer(&mut s, 6, 6, 3, 1, 1),
        Layer::Relu,
        conv_layer(&mut s, 6, 4, 3, 1, 1),
    ];
    let mut net = Network::new((3, 32, 32), Normalization::identity(3), layers).unwrap();
    let x = random_tensor(seed, "erf-image", &[3, 32, 32], 0.0, 1.0);
    let loc = (16, 16);
    let norm2: f64 = net.features(&x).unwrap().column(loc.0, loc.1).iter().map(|v| v * v).sum();
    let gain = (9.0 / norm2).sqrt();
    if let Some(p) = net.layers_mut()[4].params_mut() {
        p.iter_mut().for_each(|v| *v *= gain);
    }
    let f = net.features(&x).unwrap();
    let vector: Vec<f64> = f.column(loc.0, loc.1).iter().map(|v| 1.1 * v).collect();
    let model = PrototypeModel {
        network: net,
        kind: SimilarityKind::Prototree,
        prototypes: vec![Prototype { index: 0, vector, source: None, class: Some(0) }],
        head: DecisionHead::zeros(1, 1),
    };
    let target = Target { prototype: 0, row: loc.0, col: loc.1 };
    let (f, trace) = model.network.forward(&x).unwrap();
    let g = score_gradient(&model, &f, &trace, target).unwrap();
    let values = Tensor::from_fn(&[32, 32], |i| (0..3).map(|c| g.data()[c * 1024 + i].abs()).sum());
    let map = SaliencyMap { values, method: Method::SmoothgradsInput, target };
    let d = DeletionConfig::default();
    let curve = deletion_curve(&model, 0, &x, &map, d.erf_scan_max, d.step, d.orientation).unwrap();
    let rf = analytic_receptive_field(&model.network).unwrap();
    (rf.area_fraction(loc.0, loc.1), effective_rf_area(&curve, d.erf_threshold, d.erf_scan_max))
}

/// Prototypes placed near the features of `x` so scores are far from zero.
pub fn model_near(seed: u64, spec: &TinyNet, kind: SimilarityKind, x: &Tensor) -> PrototypeModel {
    let mut m = model_on(tiny_net(seed, spec), kind, seed);
    let f = m.network.features(x).unwrap();
    let (_, h, w) = f.dims3().unwrap();
    for p in m.prototypes.iter_mut() {
        let col = f.column(p.index % h, (p.index * 3) % w);
        p.vector = col.iter().enumerate().map(|(d, v)| v + 0.1 * ((d % 3) as f64 - 1.0)).collect();
    }
    m
}

/// Relevance arriving at the feature map: the similarity score split over
/// channels by their share of the squared distance.
pub fn top_relevance(m: &PrototypeModel, f: &Tensor, t: patchviz::saliency::Target, eps: f64) -> Vec<f64> {
    let col = f.column(t.row, t.col);
    let sq: Vec<f64> = col.iter().zip(&m.prototypes[t.prototype].vector).map(|(a, b)| (a - b) * (a - b)).collect();
    let d2: f64 = sq.iter().sum();
    let score = m.kind.score(d2);
    sq.iter().map(|s| score * (s + eps / sq.len() as f64) / (d2 + eps)).collect()
}

pub struct PrpGap {
    /// Worst elementwise relative gap between PRP relevance and gradient ⊙ input.
    pub elementwise: f64,
    /// Relative gap between Σ(gradient ⊙ input) and `⟨f, g⟩` at the target.
    pub homogeneity: f64,
    /// Relative gap between `⟨f, g⟩` and the target similarity.
    pub score: f64,
}

/// Compares PRP on a bias-free ReLU net ending in a convolution with the
/// gradient of `⟨f, g⟩`, `g = R / f` at the target location.
pub fn prp_gradient_gap(seed: u64, kind: SimilarityKind, lrp_epsilon: f64) -> PrpGap {
    use patchviz::saliency::{prp_relevance, SaliencyConfig, Target};
    let spec = TinyNet { conv_tail: true, ..TinyNet::default() };
    let cfg = SaliencyConfig { lrp_epsilon, ..SaliencyConfig::default() };
    let x = random_tensor(seed, "prp-x", &[3, 16, 16], 0.0, 1.0);
    let m = model_near(seed, &spec, kind, &x);
    let (f, trace) = m.network.forward(&x).unwrap();
    let (d, h, w) = f.dims3().unwrap();
    let t = Target { prototype: 1, row: 3, col: 5 };
    let rel = prp_relevance(&m, &trace, t, &cfg).unwrap();

    let top = top_relevance(&m, &f, t, cfg.prp_epsilon);
    let mut g = Tensor::zeros(&[d, h, w]);
    let mut pre = 0.0;
    for ch in 0..d {
        let i = ch * h * w + t.row * w + t.col;
        g.data_mut()[i] = top[ch] / f.data()[i];
        pre += g.data()[i] * f.data()[i];
    }
    let grads = m.network.backward(&trace, &g, false).unwrap();
    let gx = grads.normalized_input.zip_with(trace.normalized_input(), |a, b| a * b).unwrap();
    let scale = gx.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let elementwise = rel
        .data()
        .iter()
        .zip(gx.data())
        .map(|(a, b)| rel_err(*a, *b, 1e-9 * scale))
        .fold(0.0, f64::max);
    PrpGap {
        elementwise,
        homogeneity: rel_err(gx.sum(), pre, 0.0),
        score: rel_err(pre, m.score_at(&f, t.prototype, t.location()), 0.0),
    }
}

/// Relative gap between the PRP pixel-relevance sum and the target score.
pub fn prp_conservation_gap(seed: u64, kind: SimilarityKind, bias: Option<f64>) -> f64 {
    use patchviz::saliency::{prp_relevance, SaliencyConfig, Target};
    let spec = TinyNet { bias, ..TinyNet::default() };
    let x = random_tensor(seed, "cons-x", &[3, 16, 16], 0.0, 1.0);
    let m = model_near(seed, &spec, kind, &x);
    let (f, trace) = m.network.forward(&x).unwrap();
    let t = Target { prototype: 0, row: 0, col: 0 };
    let rel = prp_relevance(&m, &trace, t, &SaliencyConfig::default()).unwrap();
    rel_err(rel.sum(), m.score_at(&f, 0, (0, 0)), 0.0)
}
