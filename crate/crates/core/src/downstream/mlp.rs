use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::linear::Standardizer;
use crate::numerics::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub l2: f64,
}

/// One hidden ReLU layer and a logistic output on standardized inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub scaler: Standardizer,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

impl MlpModel {
    fn logits(&self, a: &Array2<f64>) -> Array1<f64> {
        let mut hidden = a.dot(&self.w1) + &self.b1;
        hidden.mapv_inplace(|v| v.max(0.0));
        hidden.dot(&self.w2) + self.b2
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<bool> {
        self.logits(&self.scaler.apply(x))
            .iter()
            .map(|&s| s > 0.0)
            .collect()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Mini-batch SGD with momentum on mean cross-entropy. He-uniform hidden
/// weights, Glorot-uniform output weights, zero biases.
pub fn fit_mlp(
    x: ArrayView2<f64>,
    y: &[bool],
    config: &MlpConfig,
    stream: &mut RandomStream,
) -> MlpModel {
    let scaler = Standardizer::fit(x);
    let a = scaler.apply(x);
    let (n, d) = a.dim();
    let h = config.hidden;
    let lim1 = (6.0 / d as f64).sqrt();
    let lim2 = (6.0 / (h + 1) as f64).sqrt();
    let mut model = MlpModel {
        scaler,
        w1: Array2::from_shape_fn((d, h), |_| stream.uniform_range(-lim1, lim1)),
        b1: Array1::zeros(h),
        w2: Array1::from_shape_fn(h, |_| stream.uniform_range(-lim2, lim2)),
        b2: 0.0,
    };
    let target = Array1::from_iter(y.iter().map(|&b| f64::from(u8::from(b))));
    let mut v_w1 = Array2::<f64>::zeros((d, h));
    let mut v_b1 = Array1::<f64>::zeros(h);
    let mut v_w2 = Array1::<f64>::zeros(h);
    let mut v_b2 = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let batch = config.batch_size.clamp(1, n);
    for _ in 0..config.epochs {
        stream.shuffle(&mut order);
        for chunk in order.chunks(batch) {
            let xb = a.select(Axis(0), chunk);
            let tb = target.select(Axis(0), chunk);
            let m = chunk.len() as f64;
            let pre = xb.dot(&model.w1) + &model.b1;
            let hidden = pre.mapv(|v| v.max(0.0));
            let out = hidden.dot(&model.w2) + model.b2;
            let delta = (out.mapv(sigmoid) - &tb) / m;
            let g_w2 = hidden.t().dot(&delta) + config.l2 * &model.w2;
            let g_b2 = delta.sum();
            let mut d_hidden = delta
                .view()
                .insert_axis(Axis(1))
                .dot(&model.w2.view().insert_axis(Axis(0)));
            d_hidden.zip_mut_with(&pre, |g, &p| {
                if p <= 0.0 {
                    *g = 0.0
                }
            });
            let g_w1 = xb.t().dot(&d_hidden) + config.l2 * &model.w1;
            let g_b1 = d_hidden.sum_axis(Axis(0));

            v_w1 = config.momentum * &v_w1 + config.rate * &g_w1;
            v_b1 = config.momentum * &v_b1 + config.rate * &g_b1;
            v_w2 = config.momentum * &v_w2 + config.rate * &g_w2;
            v_b2 = config.momentum * v_b2 + config.rate * g_b2;
            model.w1 -= &v_w1;
            model.b1 -= &v_b1;
            model.w2 -= &v_w2;
            model.b2 -= v_b2;
        }
    }
    model
}
