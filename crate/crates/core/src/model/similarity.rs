use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Similarity between a feature vector and a prototype as a function of the
/// squared L2 distance `d²` between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SimilarityKind {
    /// `log((d² + 1) / (d² + ε))`
    Protopnet { epsilon: f64 },
    /// `exp(-d²)`
    Prototree,
}

pub const DEFAULT_EPSILON: f64 = 1e-4;

impl Default for SimilarityKind {
    fn default() -> Self {
        SimilarityKind::Protopnet {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl SimilarityKind {
    pub fn name(&self) -> &'static str {
        match self {
            SimilarityKind::Protopnet { .. } => "protopnet",
            SimilarityKind::Prototree => "prototree",
        }
    }

    pub fn parse(name: &str, epsilon: f64) -> Result<Self> {
        match name {
            "protopnet" => Ok(SimilarityKind::Protopnet { epsilon }),
            "prototree" => Ok(SimilarityKind::Prototree),
            other => Err(Error::invalid(format!(
                "unknown similarity kind {other:?} (expected protopnet or prototree)"
            ))),
        }
    }

    #[inline]
    pub fn score(&self, d2: f64) -> f64 {
        match *self {
            SimilarityKind::Protopnet { epsilon } => ((d2 + 1.0) / (d2 + epsilon)).ln(),
            SimilarityKind::Prototree => (-d2).exp(),
        }
    }

    /// `ds/d(d²)`.
    #[inline]
    pub fn derivative(&self, d2: f64) -> f64 {
        match *self {
            SimilarityKind::Protopnet { epsilon } => 1.0 / (d2 + 1.0) - 1.0 / (d2 + epsilon),
            SimilarityKind::Prototree => -(-d2).exp(),
        }
    }
}

/// `s_i(x)` over the feature grid, for one prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    pub values: Tensor,
    pub prototype: usize,
    pub kind: SimilarityKind,
}

/// Highest similarity score of a map and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub row: usize,
    pub col: usize,
    pub score: f64,
}

impl Peak {
    pub fn location(&self) -> (usize, usize) {
        (self.row, self.col)
    }
}

/// Squared distance between `f^{(h,w)}` and `reference` at every location.
pub fn squared_distances(features: &Tensor, reference: &[f64]) -> Result<Tensor> {
    let (d, h, w) = features.dims3()?;
    if reference.len() != d {
        return Err(Error::invalid(format!(
            "prototype has {} dimensions, features have {}",
            reference.len(),
            d
        )));
    }
    let plane = h * w;
    let f = features.data();
    let mut out = vec![0.0; plane];
    for (ch, &r) in reference.iter().enumerate() {
        for (o, &v) in out.iter_mut().zip(&f[ch * plane..(ch + 1) * plane]) {
            let diff = v - r;
            *o += diff * diff;
        }
    }
    Tensor::new(vec![h, w], out)
}

pub fn similarity_map(
    features: &Tensor,
    reference: &[f64],
    prototype: usize,
    kind: SimilarityKind,
) -> Result<SimilarityMap> {
    let d2 = squared_distances(features, reference)?;
    Ok(SimilarityMap {
        values: d2.map(|v| kind.score(v)),
        prototype,
        kind,
    })
}

/// Row-major-first maximum of a non-empty map.
pub fn peak(map: &SimilarityMap) -> Peak {
    let (_, w) = map.values.dims2().expect("similarity maps are 2-D");
    let mut best = 0;
    let v = map.values.data();
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    Peak {
        row: best / w,
        col: best % w,
        score: v[best],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PNET: SimilarityKind = SimilarityKind::Protopnet {
        epsilon: DEFAULT_EPSILON,
    };

    #[test]
    fn closed_forms() {
        assert_eq!(SimilarityKind::Prototree.score(0.0), 1.0);
        assert!((SimilarityKind::Prototree.score(2f64.ln()) - 0.5).abs() < 1e-15);
        assert!((PNET.score(0.0) - 9.210340371976184).abs() < 1e-12);
        assert!((PNET.score(1.0) - 0.693047185559612).abs() < 1e-12);
    }

    #[test]
    fn strictly_decreasing() {
        for kind in [PNET, SimilarityKind::Prototree] {
            let grid: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
            for pair in grid.windows(2) {
                assert!(kind.score(pair[1]) < kind.score(pair[0]), "{kind:?} at {}", pair[1]);
                assert!(kind.derivative(pair[0]) < 0.0);
            }
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        for kind in [PNET, SimilarityKind::Prototree] {
            for &d2 in &[0.01, 0.3, 1.0, 4.0] {
                let h = 1e-6;
                let fd = (kind.score(d2 + h) - kind.score(d2 - h)) / (2.0 * h);
                assert!((fd - kind.derivative(d2)).abs() < 1e-5 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn ranges() {
        for &d2 in &[0.0, 1e-3, 0.5, 3.0, 40.0] {
            let t = SimilarityKind::Prototree.score(d2);
            assert!(t > 0.0 && t <= 1.0);
            let p = PNET.score(d2);
            assert!((0.0..=(1.0 / DEFAULT_EPSILON).ln() + 1e-12).contains(&p));
        }
    }

    #[test]
    fn dimension_mismatch() {
        let f = Tensor::zeros(&[4, 2, 2]);
        assert!(similarity_map(&f, &[0.0; 3], 0, PNET).is_err());
    }

    fn map_of(values: Vec<f64>, h: usize, w: usize) -> SimilarityMap {
        SimilarityMap {
            values: Tensor::new(vec![h, w], values).unwrap(),
            prototype: 0,
            kind: SimilarityKind::Prototree,
        }
    }

    #[test]
    fn peaks() {
        let mut v = vec![0.1; 16];
        v[2 * 4 + 3] = 0.9;
        let p = peak(&map_of(v, 4, 4));
        assert_eq!((p.row, p.col, p.score), (2, 3, 0.9));
        let p = peak(&map_of(vec![0.4; 9], 3, 3));
        assert_eq!((p.row, p.col, p.score), (0, 0, 0.4));
    }

    #[test]
    fn peak_matches_scan() {
        use crate::numerics::Rng;
        use rand::Rng as _;
        let rng = Rng::new(2);
        for t in 0..20u64 {
            let mut s = rng.stream("peak", &[t]);
            let v: Vec<f64> = (0..49).map(|_| (s.random::<f64>() * 8.0).floor()).collect();
            let mut best = (0, v[0]);
            for (i, &x) in v.iter().enumerate() {
                if x > best.1 {
                    best = (i, x);
                }
            }
            let p = peak(&map_of(v, 7, 7));
            assert_eq!((p.row * 7 + p.col, p.score), best);
        }
    }
}
