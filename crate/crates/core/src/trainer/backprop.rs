use ndarray::{Array2, ArrayView2, Axis};

use super::encoder::EncoderParams;
use super::loss::nt_xent_with_grad;
use crate::error::{Error, Result};

fn relu_mask(mut upstream: Array2<f64>, pre: &Array2<f64>) -> Array2<f64> {
    upstream.zip_mut_with(pre, |g, &a| {
        if a <= 0.0 {
            *g = 0.0
        }
    });
    upstream
}

/// Contrastive loss of an interleaved batch of views and its gradient with
/// respect to every parameter, returned in the shape of `params`.
pub fn loss_and_gradients(
    params: &EncoderParams,
    views: ArrayView2<f64>,
    temperature: f64,
) -> Result<(f64, EncoderParams)> {
    let cache = params.forward_cached(views)?;
    let (loss, dz) = nt_xent_with_grad(cache.projection.view(), temperature)?;
    let mut grads = EncoderParams::zeros(params.architecture);

    let inputs = [
        views,
        cache.hidden.view(),
        cache.representation.view(),
        cache.head_hidden.view(),
    ];
    let mut delta = dz;
    for k in (0..4).rev() {
        grads.layers[k].weights = inputs[k].t().dot(&delta);
        grads.layers[k].bias = delta.sum_axis(Axis(0));
        if k > 0 {
            let upstream = delta.dot(&params.layers[k].weights.t());
            delta = relu_mask(upstream, &cache.pre[k - 1]);
        }
    }
    for (k, layer) in grads.layers.iter().enumerate() {
        if layer
            .weights
            .iter()
            .chain(layer.bias.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFiniteGradient(k));
        }
    }
    Ok((loss, grads))
}
