use ndarray::{Array1, Array2, ArrayView2, Axis};

/// Euclidean k-nearest-neighbour vote over the stored training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub rows: Array2<f64>,
    pub labels: Vec<bool>,
    sq_norms: Array1<f64>,
}

impl KnnModel {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], k: usize) -> Self {
        let rows = x.to_owned();
        let sq_norms = rows.map_axis(Axis(1), |r| r.dot(&r));
        Self {
            k: k.max(1),
            rows,
            labels: y.to_vec(),
            sq_norms,
        }
    }

    /// Majority label of the `k` nearest rows (distance ties to the lower
    /// training index); a tied vote goes to the nearest row's label.
    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<bool> {
        let k = self.k.min(self.rows.nrows());
        let cross = x.dot(&self.rows.t());
        let mut idx: Vec<usize> = (0..self.rows.nrows()).collect();
        x.axis_iter(Axis(0))
            .zip(cross.axis_iter(Axis(0)))
            .map(|(q, c)| {
                let qn = q.dot(&q);
                let dist: Vec<f64> = c
                    .iter()
                    .zip(&self.sq_norms)
                    .map(|(&dot, &rn)| (qn + rn - 2.0 * dot).max(0.0))
                    .collect();
                let by_distance =
                    |a: &usize, b: &usize| dist[*a].total_cmp(&dist[*b]).then(a.cmp(b));
                if k < idx.len() {
                    idx.select_nth_unstable_by(k - 1, by_distance);
                }
                idx[..k].sort_unstable_by(by_distance);
                let positive = idx[..k].iter().filter(|&&i| self.labels[i]).count();
                let label = match (2 * positive).cmp(&k) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => self.labels[idx[0]],
                };
                idx.sort_unstable();
                label
            })
            .collect()
    }
}
