use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::numerics::RandomStream;

/// Per-column centering and scaling fitted on training rows. Constant columns
/// keep scale 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("non-empty rows");
        let scale = x
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s > 1e-12 { s } else { 1.0 });
        Self { mean, scale }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.scale
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

/// Affine decision rule on standardized inputs; positive scores mean `true`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub scaler: Standardizer,
    pub weights: Array1<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn decision(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.scaler.apply(x).dot(&self.weights) + self.bias
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<bool> {
        self.decision(x).iter().map(|&s| s > 0.0).collect()
    }
}

/// Full-batch gradient descent on mean cross-entropy plus `l2/2 ||w||²`.
/// Returns a note when the final gradient norm is still above `1e-3`.
pub fn fit_logistic(
    x: ArrayView2<f64>,
    y: &[bool],
    epochs: usize,
    rate: f64,
    l2: f64,
) -> (LinearModel, Option<String>) {
    let scaler = Standardizer::fit(x);
    let a = scaler.apply(x);
    let n = a.nrows() as f64;
    let target = Array1::from_iter(y.iter().map(|&b| f64::from(u8::from(b))));
    let mut w = Array1::<f64>::zeros(a.ncols());
    let mut c = 0.0;
    let mut grad_norm = f64::INFINITY;
    for _ in 0..epochs {
        let residual = (a.dot(&w) + c).mapv(sigmoid) - &target;
        let gw = a.t().dot(&residual) / n + l2 * &w;
        let gc = residual.sum() / n;
        grad_norm = (gw.dot(&gw) + gc * gc).sqrt();
        w.scaled_add(-rate, &gw);
        c -= rate * gc;
    }
    let note = (grad_norm > 1e-3).then(|| {
        format!("logistic regression gradient norm {grad_norm:.2e} after {epochs} epochs")
    });
    (
        LinearModel {
            scaler,
            weights: w,
            bias: c,
        },
        note,
    )
}

/// Hinge loss with `l2/2 ||w||²`, plain SGD over shuffled rows with rate
/// `rate / (1 + epoch)`.
pub fn fit_linear_svm(
    x: ArrayView2<f64>,
    y: &[bool],
    epochs: usize,
    rate: f64,
    l2: f64,
    stream: &mut RandomStream,
) -> LinearModel {
    let scaler = Standardizer::fit(x);
    let a = scaler.apply(x);
    let mut w = Array1::<f64>::zeros(a.ncols());
    let mut c = 0.0;
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    for epoch in 0..epochs {
        let eta = rate / (1.0 + epoch as f64);
        stream.shuffle(&mut order);
        for &i in &order {
            let row = a.row(i);
            let label = if y[i] { 1.0 } else { -1.0 };
            let margin = label * (row.dot(&w) + c);
            w *= 1.0 - eta * l2;
            if margin < 1.0 {
                w.scaled_add(eta * label, &row);
                c += eta * label;
            }
        }
    }
    LinearModel {
        scaler,
        weights: w,
        bias: c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn blobs(seed: u64, n: usize) -> (Array2<f64>, Vec<bool>) {
        let mut s = RandomStream::new(seed);
        let mut x = Array2::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let pos = i % 2 == 0;
            let centre = if pos { 3.0 } else { -3.0 };
            x[[i, 0]] = centre + 0.5 * s.normal();
            x[[i, 1]] = centre + 0.5 * s.normal();
            y.push(pos);
        }
        (x, y)
    }

    #[test]
    fn logistic_separates_blobs() {
        for seed in 0..5 {
            let (x, y) = blobs(seed, 200);
            let (m, _) = fit_logistic(x.view(), &y, 500, 0.5, 1e-4);
            let acc = m
                .predict(x.view())
                .iter()
                .zip(&y)
                .filter(|(a, b)| a == b)
                .count() as f64
                / 200.0;
            assert!(acc >= 0.99, "seed {seed}: {acc}");
        }
    }

    #[test]
    fn svm_separates_blobs() {
        for seed in 0..5 {
            let (x, y) = blobs(seed, 200);
            let m = fit_linear_svm(x.view(), &y, 20, 0.1, 1e-4, &mut RandomStream::new(seed));
            let acc = m
                .predict(x.view())
                .iter()
                .zip(&y)
                .filter(|(a, b)| a == b)
                .count() as f64
                / 200.0;
            assert!(acc >= 0.99, "seed {seed}: {acc}");
        }
    }

    #[test]
    fn constant_rows_share_a_label() {
        let (x, y) = blobs(1, 50);
        let (m, _) = fit_logistic(x.view(), &y, 100, 0.5, 1e-4);
        let same = Array2::from_elem((4, 2), 0.7);
        let p = m.predict(same.view());
        assert!(p.iter().all(|&v| v == p[0]));
    }

    #[test]
    fn standardizer_handles_constant_columns() {
        let x = array![[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit(x.view());
        assert_eq!(s.apply(x.view()), array![[-1.0, 0.0], [1.0, 0.0]]);
    }
}
