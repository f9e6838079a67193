use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor;
use crate::error::{Error, Result};

/// A scalar objective over a set of parameter tensors.
pub trait Differentiable {
    fn parameters(&self) -> Vec<&Tensor>;
    fn parameters_mut(&mut self) -> Vec<&mut Tensor>;
    fn loss(&self, input: &Tensor, target: &Tensor) -> Result<f64>;
    /// Loss plus gradients in [`Differentiable::parameters`] order.
    fn loss_and_gradients(&self, input: &Tensor, target: &Tensor) -> Result<(f64, Vec<Tensor>)>;
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub epsilon: f64,
    /// Entries checked per parameter tensor; small tensors are checked
    /// exhaustively.
    pub samples_per_tensor: usize,
    /// Lower bound on the relative-error denominator so that gradients that
    /// vanish on both sides do not divide zero by zero.
    pub denominator_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            samples_per_tensor: 8,
            denominator_floor: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(tensor index, element index)` of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Worst relative error between analytic gradients and central differences.
pub fn gradient_check<N: Differentiable>(net: &mut N, input: &Tensor, target: &Tensor, epsilon: f64) -> Result<f64> {
    let opts = GradCheckOptions {
        epsilon,
        ..GradCheckOptions::default()
    };
    Ok(gradient_check_with(net, input, target, &opts)?.max_relative_error)
}

pub fn gradient_check_with<N: Differentiable>(
    net: &mut N,
    input: &Tensor,
    target: &Tensor,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if !(opts.epsilon > 0.0 && opts.epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gradient check epsilon must be positive, got {}",
            opts.epsilon
        )));
    }
    let (_, grads) = net.loss_and_gradients(input, target)?;
    let sizes: Vec<usize> = net.parameters().iter().map(|t| t.len()).collect();
    if sizes.len() != grads.len() {
        return Err(Error::ShapeMismatch("gradient count differs from parameter count".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (ti, &len) in sizes.iter().enumerate() {
        let indices: Vec<usize> = if len <= opts.samples_per_tensor {
            (0..len).collect()
        } else {
            (0..opts.samples_per_tensor).map(|_| rng.gen_range(0..len)).collect()
        };
        for i in indices {
            let original = net.parameters()[ti].data()[i];
            net.parameters_mut()[ti].data_mut()[i] = original + opts.epsilon;
            let plus = net.loss(input, target);
            net.parameters_mut()[ti].data_mut()[i] = original - opts.epsilon;
            let minus = net.loss(input, target);
            net.parameters_mut()[ti].data_mut()[i] = original;
            let numeric = (plus? - minus?) / (2.0 * opts.epsilon);
            let analytic = grads[ti].data()[i];
            let denom = analytic.abs().max(numeric.abs()).max(opts.denominator_floor);
            let rel = (analytic - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_relative_error || report.checked == 1 {
                report.max_relative_error = rel;
                report.worst = (ti, i);
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
