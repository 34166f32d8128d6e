use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::similarity::{peak, similarity_map, squared_distances, Peak, SimilarityKind, SimilarityMap};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::numerics::{Rng, Tensor};

/// Where a projected prototype was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrototypeSource {
    pub image_id: u64,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub index: usize,
    /// Reference vector `r_i` in latent space.
    pub vector: Vec<f64>,
    /// Set by projection.
    pub source: Option<PrototypeSource>,
    pub class: Option<usize>,
}

/// Weighted-sum decision layer, `classes × prototypes`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionHead {
    pub weights: Tensor,
}

impl DecisionHead {
    pub fn zeros(classes: usize, prototypes: usize) -> Self {
        DecisionHead {
            weights: Tensor::zeros(&[classes, prototypes]),
        }
    }

    /// +1 to the prototype's own class, `negative` elsewhere.
    pub fn class_connected(classes: usize, assignment: &[Option<usize>], negative: f64) -> Self {
        let p = assignment.len();
        let weights = Tensor::from_fn(&[classes, p], |i| {
            let (c, j) = (i / p, i % p);
            match assignment[j] {
                Some(own) if own == c => 1.0,
                Some(_) => negative,
                None => 0.0,
            }
        });
        DecisionHead { weights }
    }

    pub fn classes(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn logits(&self, scores: &[f64]) -> Vec<f64> {
        let p = self.weights.shape()[1];
        self.weights
            .data()
            .chunks(p)
            .map(|row| row.iter().zip(scores).map(|(w, s)| w * s).sum())
            .collect()
    }
}

/// An image with its label and a stable identifier.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub id: u64,
    pub image: Tensor,
    pub label: usize,
}

/// Feature extractor, prototypes and head.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeModel {
    pub network: Network,
    pub kind: SimilarityKind,
    pub prototypes: Vec<Prototype>,
    pub head: DecisionHead,
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub peaks: Vec<Peak>,
}

impl Prediction {
    pub fn class(&self) -> usize {
        argmax(&self.logits)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

impl PrototypeModel {
    /// Randomly initialized prototypes (uniform in `[0, 1)^D`), `per_class`
    /// for each class, with a class-connected head.
    pub fn new(network: Network, kind: SimilarityKind, classes: usize, per_class: usize, rng: &Rng) -> Self {
        Self::with_init_range(network, kind, classes, per_class, 1.0, rng)
    }

    /// As [`PrototypeModel::new`] with prototypes uniform in `[0, range)^D`.
    pub fn with_init_range(
        network: Network,
        kind: SimilarityKind,
        classes: usize,
        per_class: usize,
        range: f64,
        rng: &Rng,
    ) -> Self {
        let (d, _, _) = network.output_dims();
        let mut stream = rng.stream("prototype-init", &[]);
        let prototypes: Vec<Prototype> = (0..classes * per_class)
            .map(|index| Prototype {
                index,
                vector: (0..d).map(|_| range * stream.random::<f64>()).collect(),
                source: None,
                class: Some(index / per_class),
            })
            .collect();
        let assignment: Vec<Option<usize>> = prototypes.iter().map(|p| p.class).collect();
        let head = DecisionHead::class_connected(classes, &assignment, -0.5);
        PrototypeModel {
            network,
            kind,
            prototypes,
            head,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.head.classes()
    }

    pub fn similarity_maps(&self, features: &Tensor) -> Result<Vec<SimilarityMap>> {
        self.prototypes
            .iter()
            .map(|p| similarity_map(features, &p.vector, p.index, self.kind))
            .collect()
    }

    pub fn similarity_map(&self, features: &Tensor, prototype: usize) -> Result<SimilarityMap> {
        let p = self
            .prototypes
            .get(prototype)
            .ok_or_else(|| Error::invalid(format!("no prototype {prototype}")))?;
        similarity_map(features, &p.vector, prototype, self.kind)
    }

    /// Similarity of one prototype at one feature location.
    pub fn score_at(&self, features: &Tensor, prototype: usize, (row, col): (usize, usize)) -> f64 {
        let f = features.column(row, col);
        let d2: f64 = f
            .iter()
            .zip(&self.prototypes[prototype].vector)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        self.kind.score(d2)
    }

    pub fn predict_features(&self, features: &Tensor) -> Result<Prediction> {
        let peaks: Vec<Peak> = self
            .similarity_maps(features)?
            .iter()
            .map(peak)
            .collect();
        let scores: Vec<f64> = peaks.iter().map(|p| p.score).collect();
        Ok(Prediction {
            logits: self.head.logits(&scores),
            peaks,
        })
    }

    pub fn predict(&self, x: &Tensor) -> Result<Prediction> {
        let features = self.network.features(x)?;
        self.predict_features(&features)
    }

    /// Snaps every prototype onto its nearest training feature vector.
    ///
    /// Ties go to the earliest image in `train` order, then the row-major
    /// first location.
    pub fn project_prototypes(&mut self, train: &[LabeledImage]) -> Result<()> {
        if train.is_empty() {
            return Err(Error::invalid("projection needs a non-empty training set"));
        }
        let features: Vec<Tensor> = train
            .par_iter()
            .map(|s| self.network.features(&s.image))
            .collect::<Result<_>>()?;
        let best: Vec<(usize, usize, f64)> = self
            .prototypes
            .par_iter()
            .map(|p| nearest_location(&features, &p.vector))
            .collect::<Result<_>>()?;
        let (_, _, w) = self.network.output_dims();
        for (proto, (img, loc, _)) in self.prototypes.iter_mut().zip(best) {
            let (row, col) = (loc / w, loc % w);
            proto.vector = features[img].column(row, col);
            proto.source = Some(PrototypeSource {
                image_id: train[img].id,
                row,
                col,
            });
        }
        Ok(())
    }
}

/// `(image index, flat location, d²)` of the closest feature vector.
pub(crate) fn nearest_location(features: &[Tensor], reference: &[f64]) -> Result<(usize, usize, f64)> {
    let mut best = (0, 0, f64::INFINITY);
    for (i, f) in features.iter().enumerate() {
        let d2 = squared_distances(f, reference)?;
        for (loc, &v) in d2.data().iter().enumerate() {
            if v < best.2 {
                best = (i, loc, v);
            }
        }
    }
    Ok(best)
}
