use serde::{Deserialize, Serialize};

use super::encoder::EncoderParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LarsConfig {
    pub trust: f64,
    pub weight_decay: f64,
    pub momentum: f64,
}

impl Default for LarsConfig {
    fn default() -> Self {
        Self {
            trust: 1e-3,
            weight_decay: 1e-6,
            momentum: 0.9,
        }
    }
}

/// Layer-wise rate `trust * ||w|| / ||g||`, or 1 when either norm vanishes.
pub fn local_rate(weight_norm: f64, grad_norm: f64, trust: f64) -> f64 {
    if weight_norm > 0.0 && grad_norm > 0.0 {
        trust * weight_norm / grad_norm
    } else {
        1.0
    }
}

fn l2(xs: &[f64]) -> f64 {
    xs.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// One momentum step on a parameter group. Weight matrices (`adapt = true`)
/// get weight decay and the trust-ratio scaling; biases use the base rate.
/// Returns the local rate that was applied.
pub fn update_group(
    weights: &mut [f64],
    grad: &[f64],
    velocity: &mut [f64],
    base_lr: f64,
    config: &LarsConfig,
    adapt: bool,
) -> f64 {
    let decay = if adapt { config.weight_decay } else { 0.0 };
    let local = if adapt {
        let g_norm = weights
            .iter()
            .zip(grad)
            .map(|(w, g)| (g + decay * w).powi(2))
            .sum::<f64>()
            .sqrt();
        local_rate(l2(weights), g_norm, config.trust)
    } else {
        1.0
    };
    let rate = base_lr * local;
    for ((w, &g), v) in weights.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = config.momentum * *v + rate * (g + decay * *w);
        *w -= *v;
    }
    local
}

/// LARS optimizer with one velocity buffer per parameter group.
#[derive(Debug, Clone)]
pub struct Lars {
    pub config: LarsConfig,
    velocity: EncoderParams,
}

impl Lars {
    pub fn new(params: &EncoderParams, config: LarsConfig) -> Self {
        Self {
            config,
            velocity: EncoderParams::zeros(params.architecture),
        }
    }

    pub fn step(&mut self, params: &mut EncoderParams, grads: &EncoderParams, base_lr: f64) {
        for ((layer, grad), vel) in params
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.velocity.layers)
        {
            update_group(
                layer.weights.as_slice_mut().expect("standard layout"),
                grad.weights.as_slice().expect("standard layout"),
                vel.weights.as_slice_mut().expect("standard layout"),
                base_lr,
                &self.config,
                true,
            );
            update_group(
                layer.bias.as_slice_mut().expect("standard layout"),
                grad.bias.as_slice().expect("standard layout"),
                vel.bias.as_slice_mut().expect("standard layout"),
                base_lr,
                &self.config,
                false,
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;
    use crate::trainer::encoder::Architecture;

    const NO_DECAY: LarsConfig = LarsConfig {
        trust: 1e-3,
        weight_decay: 0.0,
        momentum: 0.9,
    };

    #[test]
    fn trust_ratio_scales_the_first_step() {
        // ||w|| = 2, ||g|| = 1, base rate 1: update is 0.002 * g
        let mut w = vec![2.0, 0.0];
        let g = [0.0, 1.0];
        let mut v = vec![0.0; 2];
        let local = update_group(&mut w, &g, &mut v, 1.0, &NO_DECAY, true);
        assert!((local - 0.002).abs() < 1e-15);
        assert_eq!(w, vec![2.0, -0.002]);
    }

    #[test]
    fn zero_gradient_leaves_weights_alone() {
        let mut w = vec![1.0, -3.0];
        let mut v = vec![0.0; 2];
        let local = update_group(&mut w, &[0.0, 0.0], &mut v, 0.5, &NO_DECAY, true);
        assert_eq!(local, 1.0);
        assert_eq!(w, vec![1.0, -3.0]);
    }

    #[test]
    fn zero_weights_fall_back_to_base_rate() {
        let mut w = vec![0.0, 0.0];
        let mut v = vec![0.0; 2];
        update_group(&mut w, &[1.0, 2.0], &mut v, 0.1, &NO_DECAY, true);
        assert_eq!(w, vec![-0.1, -0.2]);
    }

    #[test]
    fn momentum_accumulates() {
        let mut w = vec![0.0];
        let mut v = vec![0.0];
        update_group(&mut w, &[1.0], &mut v, 1.0, &NO_DECAY, false);
        update_group(&mut w, &[1.0], &mut v, 1.0, &NO_DECAY, false);
        assert!((v[0] - 1.9).abs() < 1e-15);
        assert!((w[0] + 2.9).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_is_a_no_op() {
        let arch = Architecture {
            input: 3,
            hidden: 4,
            representation: 2,
            head_hidden: 2,
            projection: 2,
        };
        let mut s = RandomStream::new(0);
        let mut p = EncoderParams::init(arch, &mut s);
        let before = p.clone();
        let grads = EncoderParams::init(arch, &mut s);
        let mut opt = Lars::new(&p, LarsConfig::default());
        opt.step(&mut p, &grads, 0.0);
        assert_eq!(p, before);
    }
}
