use super::{postprocess, Method, SaliencyConfig, SaliencyMap, Target};
use crate::error::{Error, Result};
use crate::model::PrototypeModel;
use crate::network::ActivationTrace;
use crate::numerics::Tensor;

/// Pixel relevance (one value per channel and pixel) of the target
/// similarity score, before post-processing.
///
/// The score `R = s_i^{(h,w)}` is split across latent channels in
/// proportion to each channel's share of the squared distance,
/// `R_d = R · ((f_d - r_d)² + ε/D) / (d² + ε)`, and then propagated through
/// the feature extractor.
pub fn prp_relevance(model: &PrototypeModel, trace: &ActivationTrace, target: Target, cfg: &SaliencyConfig) -> Result<Tensor> {
    let features = &trace.output;
    let (d, h, w) = features.dims3()?;
    if target.row >= h || target.col >= w {
        return Err(Error::invalid(format!(
            "target location ({}, {}) outside {}x{} feature map",
            target.row, target.col, h, w
        )));
    }
    let proto = model
        .prototypes
        .get(target.prototype)
        .ok_or_else(|| Error::invalid(format!("no prototype {}", target.prototype)))?;
    let f = features.column(target.row, target.col);
    let sq: Vec<f64> = f.iter().zip(&proto.vector).map(|(a, b)| (a - b) * (a - b)).collect();
    let d2: f64 = sq.iter().sum();
    let score = model.kind.score(d2);
    let eps = cfg.prp_epsilon;
    let denom = d2 + eps;
    let mut top = Tensor::zeros(&[d, h, w]);
    let loc = target.row * w + target.col;
    for (ch, &s) in sq.iter().enumerate() {
        top.data_mut()[ch * h * w + loc] = score * (s + eps / d as f64) / denom;
    }
    model.network.relevance_backward(trace, &top, cfg.lrp_epsilon)
}

pub fn prp(model: &PrototypeModel, trace: &ActivationTrace, target: Target, cfg: &SaliencyConfig) -> Result<SaliencyMap> {
    let raw = prp_relevance(model, trace, target, cfg)?;
    Ok(SaliencyMap {
        values: postprocess(&raw, cfg.blur_sigma)?,
        method: Method::Prp,
        target,
    })
}

/// Checks that the pixel relevance sums to the target score within `rel_tol`.
pub fn check_conservation(relevance: &Tensor, score: f64, rel_tol: f64) -> Result<()> {
    let total = relevance.sum();
    if (total - score).abs() > rel_tol * score.abs() {
        return Err(Error::Conservation {
            expected: score,
            actual: total,
        });
    }
    Ok(())
}
