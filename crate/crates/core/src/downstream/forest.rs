use ndarray::{ArrayView1, ArrayView2, Axis};

use crate::numerics::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        positive_rate: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART tree stored as a flat node list, root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn positive_rate(&self, x: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { positive_rate } => return positive_rate,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [bool],
    features_per_split: usize,
    config: ForestConfig,
    nodes: Vec<Node>,
    pairs: Vec<(f64, bool)>,
}

impl Builder<'_> {
    /// Best `(feature, threshold, weighted child impurity)` over a random
    /// feature subset, thresholds at midpoints between distinct values.
    fn best_split(
        &mut self,
        rows: &[usize],
        stream: &mut RandomStream,
    ) -> Option<(usize, f64, f64)> {
        let n = rows.len();
        let total_pos = rows.iter().filter(|&&r| self.y[r]).count();
        let mut best: Option<(usize, f64, f64)> = None;
        for feature in stream.sample_indices(self.x.ncols(), self.features_per_split) {
            self.pairs.clear();
            self.pairs
                .extend(rows.iter().map(|&r| (self.x[[r, feature]], self.y[r])));
            self.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for i in 0..n - 1 {
                left_pos += usize::from(self.pairs[i].1);
                if self.pairs[i].0 == self.pairs[i + 1].0 {
                    continue;
                }
                let left_n = i + 1;
                let score = (left_n as f64 * gini(left_pos, left_n)
                    + (n - left_n) as f64 * gini(total_pos - left_pos, n - left_n))
                    / n as f64;
                if best.map_or(true, |(_, _, b)| score < b) {
                    let threshold = 0.5 * (self.pairs[i].0 + self.pairs[i + 1].0);
                    best = Some((feature, threshold, score));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, stream: &mut RandomStream) -> usize {
        let pos = rows.iter().filter(|&&r| self.y[r]).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            positive_rate: pos as f64 / rows.len() as f64,
        });
        if pos == 0
            || pos == rows.len()
            || rows.len() < self.config.min_samples_split
            || depth >= self.config.max_depth
        {
            return id;
        }
        let Some((feature, threshold, score)) = self.best_split(&rows, stream) else {
            return id;
        };
        if score >= gini(pos, rows.len()) {
            return id;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x[[i, feature]] <= threshold);
        let left = self.grow(l, depth + 1, stream);
        let right = self.grow(r, depth + 1, stream);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Bagged CART trees with Gini splits over `round(sqrt(D))` random features
/// per node; predictions average the trees' leaf positive rates.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(
        x: ArrayView2<f64>,
        y: &[bool],
        config: &ForestConfig,
        stream: &mut RandomStream,
    ) -> Self {
        let n = x.nrows();
        let features_per_split = ((x.ncols() as f64).sqrt().round() as usize).clamp(1, x.ncols());
        let trees = (0..config.trees)
            .map(|t| {
                let mut s = stream.fork(t as u64);
                let rows: Vec<usize> = (0..n).map(|_| s.below(n)).collect();
                let mut b = Builder {
                    x,
                    y,
                    features_per_split,
                    config: *config,
                    nodes: Vec::new(),
                    pairs: Vec::with_capacity(n),
                };
                b.grow(rows, 0, &mut s);
                Tree { nodes: b.nodes }
            })
            .collect();
        Self { trees }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<bool> {
        x.axis_iter(Axis(0))
            .map(|row| {
                let mean = self.trees.iter().map(|t| t.positive_rate(row)).sum::<f64>()
                    / self.trees.len() as f64;
                mean > 0.5
            })
            .collect()
    }
}
