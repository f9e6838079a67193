use super::Tensor;
use crate::error::{Error, Result};

/// Plain stochastic gradient descent with L2 weight decay and a step
/// learning-rate schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub base_lr: f64,
    /// Multiplier applied every `lr_step` iterations.
    pub lr_gamma: f64,
    pub lr_step: usize,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub iterations: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            base_lr: 1.3e-7,
            lr_gamma: 0.7,
            lr_step: 500,
            weight_decay: 5e-4,
            batch_size: 5,
            iterations: 22_000,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("base_lr {} must be positive", self.base_lr)));
        }
        if !(self.lr_gamma > 0.0 && self.lr_gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("lr_gamma {} must be in (0, 1]", self.lr_gamma)));
        }
        if self.lr_step == 0 {
            return Err(Error::InvalidArgument("lr_step must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument("weight_decay must be non-negative".into()));
        }
        Ok(())
    }

    /// `base_lr * lr_gamma ^ floor(t / lr_step)`.
    pub fn learning_rate(&self, iteration: usize) -> f64 {
        let decays = (iteration / self.lr_step) as i32;
        self.base_lr * self.lr_gamma.powi(decays)
    }
}

/// `p <- p - lr(t) * (g + weight_decay * p)` for every parameter. Returns
/// the learning rate used.
pub fn sgd_step(params: &mut [&mut Tensor], grads: &[Tensor], cfg: &SgdConfig, iteration: usize) -> Result<f64> {
    if params.len() != grads.len() {
        return Err(Error::ShapeMismatch(format!(
            "sgd: {} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::ShapeMismatch(format!(
                "sgd: parameter {:?} vs gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    let lr = cfg.learning_rate(iteration);
    let wd = cfg.weight_decay;
    for (p, g) in params.iter_mut().zip(grads) {
        for (v, d) in p.data_mut().iter_mut().zip(g.data()) {
            *v -= lr * (d + wd * *v);
        }
    }
    Ok(lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let cfg = SgdConfig::default();
        assert_eq!(cfg.learning_rate(0), 1.3e-7);
        assert_eq!(cfg.learning_rate(499), 1.3e-7);
        assert_eq!(cfg.learning_rate(500), 9.1e-8);
        assert_eq!(cfg.learning_rate(1000), 6.37e-8);
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let cfg = SgdConfig {
            weight_decay: 0.0,
            ..SgdConfig::default()
        };
        let mut p = Tensor::filled(&[3], 2.5);
        let before = p.clone();
        sgd_step(&mut [&mut p], &[Tensor::zeros(&[3])], &cfg, 7).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn constant_gradient_moves_by_summed_rates() {
        let cfg = SgdConfig {
            base_lr: 0.01,
            lr_gamma: 0.5,
            lr_step: 3,
            weight_decay: 0.0,
            ..SgdConfig::default()
        };
        let g = Tensor::from_vec(&[2], vec![1.5, -0.25]).unwrap();
        let mut p = Tensor::zeros(&[2]);
        let mut total = 0.0;
        for t in 0..20 {
            total += sgd_step(&mut [&mut p], std::slice::from_ref(&g), &cfg, t).unwrap();
        }
        assert!((p.data()[0] + total * 1.5).abs() < 1e-15);
        assert!((p.data()[1] - total * 0.25).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_shrinks() {
        let cfg = SgdConfig {
            base_lr: 0.1,
            weight_decay: 0.5,
            ..SgdConfig::default()
        };
        let mut p = Tensor::filled(&[1], 2.0);
        sgd_step(&mut [&mut p], &[Tensor::zeros(&[1])], &cfg, 0).unwrap();
        assert!((p.data()[0] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn mismatches_and_bad_configs() {
        let cfg = SgdConfig::default();
        let mut p = Tensor::zeros(&[2]);
        assert!(sgd_step(&mut [&mut p], &[Tensor::zeros(&[3])], &cfg, 0).is_err());
        assert!(sgd_step(&mut [&mut p], &[], &cfg, 0).is_err());
        for bad in [
            SgdConfig { base_lr: 0.0, ..cfg.clone() },
            SgdConfig { lr_gamma: 1.5, ..cfg.clone() },
            SgdConfig { lr_step: 0, ..cfg.clone() },
            SgdConfig { batch_size: 0, ..cfg.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
        assert!(cfg.validate().is_ok());
    }
}
