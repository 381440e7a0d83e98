//! Reverse-mode tape, forward-mode jets, and sample-coordinate gradients.

pub mod fd;
pub mod scalar;
pub mod tape;

pub use scalar::{Dual, Jet2, Scalar};
pub use tape::{record_scalar_graph, Adjoints, ProgOp, ScalarProgram, Tape, Var};

use crate::{Error, Result};

/// What a gradient is taken with respect to.
#[derive(Clone, Debug, PartialEq)]
pub enum GradientRequest {
    NetworkParams,
    /// Gradient with respect to the coordinates of one sample; `mask[i]`
    /// is true for trainable coordinates and false for frozen ones (e.g.
    /// trunk collocation coordinates in operator-learning RAMS).
    SampleCoordinates { sample_id: usize, mask: Vec<bool> },
}

/// A squared-residual evaluator differentiable in the sample coordinates.
/// The gradient route is implementation-defined (nested forward directions,
/// reverse-over-forward, or a tape); the contract is agreement with finite
/// differences.
pub trait ResidualSq {
    fn value(&self, sample: &[f64]) -> f64;
    /// Full gradient of the squared residual with respect to `sample`.
    fn gradient(&self, sample: &[f64]) -> Vec<f64>;
}

impl<F, G> ResidualSq for (F, G)
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn value(&self, sample: &[f64]) -> f64 {
        (self.0)(sample)
    }
    fn gradient(&self, sample: &[f64]) -> Vec<f64> {
        (self.1)(sample)
    }
}

/// Gradient of a squared residual restricted to unmasked coordinates.
/// Frozen coordinates come back as exact zeros. Errors if the mask selects
/// no coordinates or if the gradient is non-finite.
pub fn sample_gradient(
    residual_sq: &dyn ResidualSq,
    sample: &[f64],
    mask: &[bool],
) -> Result<Vec<f64>> {
    if mask.len() != sample.len() {
        return Err(Error::Structural(format!(
            "mask length {} does not match sample length {}",
            mask.len(),
            sample.len()
        )));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyGradient);
    }
    let mut g = residual_sq.gradient(sample);
    for (gi, &m) in g.iter_mut().zip(mask) {
        if !m {
            *gi = 0.0;
        } else if !gi.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite sample gradient component {gi}"
            )));
        }
    }
    Ok(g)
}
