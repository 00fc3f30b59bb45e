use crate::error::{Error, Result};

pub const MI_BINS: usize = 10;
pub const MI_MIN_SAMPLES: usize = 20;

/// Equal-frequency bin of every value. Tied values share the bin of the first
/// rank they occupy, so constant features land in a single bin and any
/// strictly monotone transform yields identical bins.
fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0; n];
    let mut start = 0;
    while start < n {
        let v = values[order[start]];
        let mut end = start + 1;
        while end < n && values[order[end]] == v {
            end += 1;
        }
        let bin = start * bins / n;
        for &i in &order[start..end] {
            out[i] = bin;
        }
        start = end;
    }
    out
}

/// Plug-in mutual information, in bits, between a 10-bin equal-frequency
/// discretization of `feature` and a binary label.
pub fn mutual_information(feature: &[f64], labels: &[bool]) -> Result<f64> {
    if feature.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: feature.len(),
            found: labels.len(),
        });
    }
    let n = feature.len();
    if n < MI_MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "mutual information needs at least {MI_MIN_SAMPLES} samples, got {n}"
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleClassLabels);
    }
    let bins = equal_frequency_bins(feature, MI_BINS);
    let mut joint = [[0usize; 2]; MI_BINS];
    for (&b, &l) in bins.iter().zip(labels) {
        joint[b][l as usize] += 1;
    }
    let label_counts = [n - positives, positives];
    let nf = n as f64;
    let mut mi = 0.0;
    for row in &joint {
        let bin_count = (row[0] + row[1]) as f64;
        for (y, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (c * nf / (bin_count * label_counts[y] as f64)).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}
