//! Prototype similarity layers, projection, peak extraction, the
//! weighted-sum decision head and a small SGD trainer.

mod prototype;
mod similarity;
mod train;

pub use prototype::{
    DecisionHead, LabeledImage, Prediction, Prototype, PrototypeModel, PrototypeSource,
};
pub use similarity::{
    peak, similarity_map, squared_distances, Peak, SimilarityKind, SimilarityMap, DEFAULT_EPSILON,
};
pub use train::{accuracy, example_gradients, example_loss, train_toy, TrainConfig, TrainReport};
