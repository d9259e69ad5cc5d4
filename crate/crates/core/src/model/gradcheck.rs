//! Central finite-difference verification of the hand-written backward pass.

use crate::error::ModelError;

use super::forward::{backward_pair, forward_pair, loss_and_grad};
use super::params::{Gradients, Parameters};
use super::prep::PairExample;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_slot: String,
    pub coordinates_checked: usize,
    /// Smallest |pre-activation| hitting a LeakyReLU in the forward pass.
    /// Finite differences are only trustworthy away from the kink, so
    /// callers should resample inputs when this margin is below ~10*eps.
    pub lrelu_margin: f64,
}

/// Compares analytic gradients of the single-example loss against central
/// finite differences over every parameter coordinate.
pub fn grad_check(
    example: &PairExample,
    params: &Parameters,
    eps: f64,
) -> Result<GradCheckReport, ModelError> {
    let analytic = analytic_grads(example, params)?;
    let margin = lrelu_margin(example, params)?;

    let mut perturbed = params.clone();
    let mut max_rel_error = 0.0f64;
    let mut worst_slot = String::new();
    for i in 0..perturbed.data.len() {
        let original = perturbed.data[i];
        perturbed.data[i] = original + eps;
        let plus = example_loss(example, &perturbed)?;
        perturbed.data[i] = original - eps;
        let minus = example_loss(example, &perturbed)?;
        perturbed.data[i] = original;
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic.data[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        if rel > max_rel_error {
            max_rel_error = rel;
            worst_slot = slot_of(params, i);
        }
    }
    Ok(GradCheckReport {
        max_rel_error,
        worst_slot,
        coordinates_checked: params.data.len(),
        lrelu_margin: margin,
    })
}

fn example_loss(example: &PairExample, params: &Parameters) -> Result<f64, ModelError> {
    let trace = forward_pair(example, params, None)?;
    let (value, _) = loss_and_grad(&[trace.score], &[example.label])?;
    Ok(value)
}

fn analytic_grads(example: &PairExample, params: &Parameters) -> Result<Gradients, ModelError> {
    let trace = forward_pair(example, params, None)?;
    let mut grads = Gradients::zeros(params);
    // dL/dlogit for BCE through sigmoid.
    let y = if example.label { 1.0 } else { 0.0 };
    let d_logit = trace.score - y;
    backward_pair(example, &trace, d_logit, params, &mut grads);
    Ok(grads)
}

fn lrelu_margin(example: &PairExample, params: &Parameters) -> Result<f64, ModelError> {
    let trace = forward_pair(example, params, None)?;
    let slope = params.cfg.leaky_relu_slope;
    let mut margin = f64::INFINITY;
    for graph in [&trace.question, &trace.sql] {
        for layer in &graph.layers {
            for &v in layer.v.iter() {
                let u = if v > 0.0 { v } else { v / slope };
                margin = margin.min(u.abs());
            }
        }
    }
    Ok(margin)
}

fn slot_of(params: &Parameters, index: usize) -> String {
    for slot in params.layout.slots() {
        if index >= slot.offset && index < slot.offset + slot.len() {
            return slot.name.clone();
        }
    }
    "unknown".into()
}
