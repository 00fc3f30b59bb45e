use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RandomStream;

/// Layer widths of the encoder `input → hidden → representation` and of the
/// projection head `representation → head_hidden → projection`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: usize,
    pub hidden: usize,
    pub representation: usize,
    pub head_hidden: usize,
    pub projection: usize,
}

impl Architecture {
    /// 512 → 256 encoder with a 256 → 128 projection head.
    pub fn standard(input: usize) -> Self {
        Self {
            input,
            hidden: 512,
            representation: 256,
            head_hidden: 256,
            projection: 128,
        }
    }

    pub fn layer_shapes(&self) -> [(usize, usize); 4] {
        [
            (self.input, self.hidden),
            (self.hidden, self.representation),
            (self.representation, self.head_hidden),
            (self.head_hidden, self.projection),
        ]
    }
}

/// Fully connected layer, `y = x W + b` with `W` stored `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weights);
        y += &self.bias;
        y
    }
}

/// Encoder plus projection head. `layers[0..2]` produce the representation
/// `h`, `layers[2..4]` the projection `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub architecture: Architecture,
    pub layers: Vec<Dense>,
}

fn relu(mut a: Array2<f64>) -> Array2<f64> {
    a.mapv_inplace(|v| v.max(0.0));
    a
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub pre: [Array2<f64>; 4],
    pub hidden: Array2<f64>,
    pub representation: Array2<f64>,
    pub head_hidden: Array2<f64>,
    pub projection: Array2<f64>,
}

impl EncoderParams {
    pub fn zeros(architecture: Architecture) -> Self {
        let layers = architecture
            .layer_shapes()
            .iter()
            .map(|&(i, o)| Dense::zeros(i, o))
            .collect();
        Self {
            architecture,
            layers,
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(architecture: Architecture, stream: &mut RandomStream) -> Self {
        let mut p = Self::zeros(architecture);
        for layer in &mut p.layers {
            let (fan_in, fan_out) = layer.weights.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            layer
                .weights
                .iter_mut()
                .for_each(|w| *w = stream.uniform_range(-limit, limit));
        }
        p
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.architecture.input {
            return Err(Error::DimensionMismatch {
                expected: self.architecture.input,
                found: cols,
            });
        }
        Ok(())
    }

    /// Batch forward pass over the rows of `x`, keeping every activation.
    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(x.ncols())?;
        let a1 = self.layers[0].apply(x);
        let hidden = relu(a1.clone());
        let a2 = self.layers[1].apply(hidden.view());
        let representation = relu(a2.clone());
        let a3 = self.layers[2].apply(representation.view());
        let head_hidden = relu(a3.clone());
        let projection = self.layers[3].apply(head_hidden.view());
        for (k, a) in [&a1, &a2, &a3, &projection].into_iter().enumerate() {
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteActivation(k));
            }
        }
        Ok(ForwardCache {
            pre: [a1, a2, a3, projection.clone()],
            hidden,
            representation,
            head_hidden,
            projection,
        })
    }

    /// Representation rows only; skips the projection head.
    pub fn represent(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let hidden = relu(self.layers[0].apply(x));
        let h = relu(self.layers[1].apply(hidden.view()));
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteActivation(1));
        }
        Ok(h)
    }
}

/// `(h, z)` for a single input vector.
pub fn encoder_forward(params: &EncoderParams, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let row = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
    let cache = params.forward_cached(row)?;
    Ok((
        cache.representation.index_axis(Axis(0), 0).to_vec(),
        cache.projection.index_axis(Axis(0), 0).to_vec(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny_arch() -> Architecture {
        Architecture {
            input: 2,
            hidden: 2,
            representation: 2,
            head_hidden: 2,
            projection: 2,
        }
    }

    #[test]
    fn zero_params_give_zero_outputs() {
        let p = EncoderParams::zeros(Architecture::standard(8));
        let (h, z) = encoder_forward(&p, &[1.0; 8]).unwrap();
        assert_eq!(h.len(), 256);
        assert_eq!(z.len(), 128);
        assert!(h.iter().chain(&z).all(|&v| v == 0.0));
    }

    #[test]
    fn positive_homogeneity_without_biases() {
        let mut p = EncoderParams::zeros(tiny_arch());
        for l in &mut p.layers {
            l.weights = array![[1.0, 0.0], [0.0, 0.0]];
        }
        let (_, z1) = encoder_forward(&p, &[1.5, -3.0]).unwrap();
        let (_, z2) = encoder_forward(&p, &[3.0, -6.0]).unwrap();
        assert_eq!(z1[0], 1.5);
        assert_eq!(z2[0], 2.0 * z1[0]);
    }

    #[test]
    fn tiny_net_matches_straight_line_evaluation() {
        let mut p = EncoderParams::zeros(tiny_arch());
        p.layers[0].weights = array![[0.5, -1.0], [2.0, 0.25]];
        p.layers[0].bias = array![0.1, -0.2];
        p.layers[1].weights = array![[1.0, -0.5], [0.3, 0.7]];
        p.layers[1].bias = array![0.0, 0.05];
        p.layers[2].weights = array![[-0.4, 0.9], [1.1, 0.2]];
        p.layers[2].bias = array![0.3, -0.1];
        p.layers[3].weights = array![[0.6, -0.8], [0.5, 1.5]];
        p.layers[3].bias = array![-0.05, 0.02];
        let (x0, x1) = (1.0f64, 0.5f64);
        // straight-line oracle, weights indexed [in][out]
        let a1_0 = (x0 * 0.5 + x1 * 2.0 + 0.1).max(0.0); // 1.6
        let a1_1 = (-x0 + x1 * 0.25 - 0.2).max(0.0); // 0
        let h0 = (a1_0 * 1.0 + a1_1 * 0.3 + 0.0).max(0.0);
        let h1 = (a1_0 * -0.5 + a1_1 * 0.7 + 0.05).max(0.0);
        let r0 = (h0 * -0.4 + h1 * 1.1 + 0.3).max(0.0);
        let r1 = (h0 * 0.9 + h1 * 0.2 - 0.1).max(0.0);
        let z0 = r0 * 0.6 + r1 * 0.5 - 0.05;
        let z1 = r0 * -0.8 + r1 * 1.5 + 0.02;
        let (h, z) = encoder_forward(&p, &[x0, x1]).unwrap();
        assert_eq!(h, vec![h0, h1]);
        assert!((z[0] - z0).abs() < 1e-15 && (z[1] - z1).abs() < 1e-15);
        // frozen values of the oracle
        assert!((z0 - 0.62).abs() < 1e-12, "{z0}");
        assert!((z1 - 2.03).abs() < 1e-12, "{z1}");
    }

    #[test]
    fn rejects_wrong_input_width() {
        let p = EncoderParams::zeros(tiny_arch());
        assert!(matches!(
            encoder_forward(&p, &[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn init_respects_glorot_bounds_and_seed() {
        let arch = Architecture::standard(10);
        let a = EncoderParams::init(arch, &mut RandomStream::new(3));
        let b = EncoderParams::init(arch, &mut RandomStream::new(3));
        assert_eq!(a, b);
        for l in &a.layers {
            let (i, o) = l.weights.dim();
            let lim = (6.0 / (i + o) as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= lim));
            assert!(l.bias.iter().all(|&b| b == 0.0));
        }
    }
}
