//! Miniature fully convolutional feature extractor with exact forward and
//! backward passes, analytic receptive fields and the model file format.

mod bundle;
mod kernels;
mod layer;
mod lrp;
mod net;
mod receptive;

pub use bundle::{decode_model, encode_model, load_model, save_model, ModelBundle, FORMAT_VERSION, MAGIC};
pub use layer::{Conv2d, Layer, LayerKind};
pub use net::{ActivationTrace, Gradients, Network, NetworkConfig, NetworkHeader, Normalization};
pub use receptive::{analytic_receptive_field, ReceptiveField};
