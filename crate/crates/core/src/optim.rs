//! Adam with L2 weight decay and a step-decayed learning rate.

use serde::{Deserialize, Serialize};

use crate::encoder::{Dense, Encoder, EncoderGrads};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f64,
    /// Multiplier applied to the learning rate every `decay_every` epochs.
    pub decay_factor: f64,
    pub decay_every: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 1e-4,
            decay_factor: 0.9,
            decay_every: 10,
            weight_decay: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.learning_rate) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(positive(self.decay_factor) && self.decay_factor <= 1.0) {
            return Err(Error::Config(format!(
                "decay factor must lie in (0, 1], got {}",
                self.decay_factor
            )));
        }
        if self.decay_every == 0 {
            return Err(Error::Config("decay interval must be at least one epoch".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) || !positive(self.epsilon) {
            return Err(Error::Config(
                "moment coefficients must lie in [0, 1) and epsilon be positive".into(),
            ));
        }
        Ok(())
    }

    /// Learning rate used during zero-based `epoch`.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let decays = (epoch / self.decay_every) as i32;
        self.learning_rate * self.decay_factor.powi(decays)
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    config: OptimConfig,
    first: Vec<Dense>,
    second: Vec<Dense>,
    steps: i32,
}

impl Adam {
    pub fn new(config: OptimConfig, encoder: &Encoder) -> Result<Self> {
        config.validate()?;
        let zeros: Vec<Dense> = encoder
            .layers()
            .iter()
            .map(|l| Dense {
                weights: l.weights.mapv(|_| 0.0),
                bias: l.bias.mapv(|_| 0.0),
            })
            .collect();
        Ok(Adam {
            config,
            second: zeros.clone(),
            first: zeros,
            steps: 0,
        })
    }

    pub fn steps(&self) -> i32 {
        self.steps
    }

    /// Applies one update. Weight decay is folded into the gradient before
    /// the moment estimates.
    pub fn step(&mut self, encoder: &mut Encoder, grads: &EncoderGrads, lr: f64) -> Result<()> {
        if grads.layers.len() != encoder.layers().len() {
            return Err(Error::Shape("gradient layer count differs from encoder".into()));
        }
        self.steps += 1;
        let OptimConfig {
            beta1,
            beta2,
            epsilon,
            weight_decay,
            ..
        } = self.config;
        let fix1 = 1.0 - beta1.powi(self.steps);
        let fix2 = 1.0 - beta2.powi(self.steps);
        let update = |param: &mut f64, grad: f64, m: &mut f64, v: &mut f64| {
            let g = grad + weight_decay * *param;
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *param -= lr * (*m / fix1) / ((*v / fix2).sqrt() + epsilon);
        };
        for (((layer, grad), m), v) in encoder
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            if layer.weights.dim() != grad.weights.dim() || layer.bias.len() != grad.bias.len() {
                return Err(Error::Shape("gradient shape differs from encoder layer".into()));
            }
            for (((p, &g), m), v) in layer
                .weights
                .iter_mut()
                .zip(grad.weights.iter())
                .zip(m.weights.iter_mut())
                .zip(v.weights.iter_mut())
            {
                update(p, g, m, v);
            }
            for (((p, &g), m), v) in layer
                .bias
                .iter_mut()
                .zip(grad.bias.iter())
                .zip(m.bias.iter_mut())
                .zip(v.bias.iter_mut())
            {
                update(p, g, m, v);
            }
        }
        if self
            .second
            .iter()
            .any(|v| v.weights.iter().chain(&v.bias).any(|x| !x.is_finite()))
            || encoder
                .layers()
                .iter()
                .any(|l| l.weights.iter().chain(&l.bias).any(|x| !x.is_finite()))
        {
            return Err(Error::Numerical(format!(
                "optimizer state overflowed at step {}",
                self.steps
            )));
        }
        Ok(())
    }
}
