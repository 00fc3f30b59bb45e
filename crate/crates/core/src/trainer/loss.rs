use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::numerics::log_sum_exp;

/// Norms below this are treated as this value when normalizing projections.
pub const NORM_FLOOR: f64 = 1e-8;

/// Index of the view paired with view `i`. Views are interleaved: rows `2k`
/// and `2k + 1` are the anchor and positive of pair `k`.
#[inline]
pub fn partner(i: usize) -> usize {
    i ^ 1
}

fn check_batch(z: ArrayView2<f64>, temperature: f64) -> Result<()> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "temperature {temperature} must be positive"
        )));
    }
    if z.nrows() < 4 || z.nrows() % 2 != 0 {
        return Err(Error::BatchTooSmall(z.nrows()));
    }
    Ok(())
}

/// Unit rows and the (floored) norms they were divided by.
fn normalize_rows(z: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
    let norms = z.map_axis(Axis(1), |r| r.dot(&r).sqrt().max(NORM_FLOOR));
    let mut n = z.to_owned();
    for (mut row, &r) in n.axis_iter_mut(Axis(0)).zip(&norms) {
        row /= r;
    }
    (n, norms)
}

/// Per-view terms `-log softmax(s_i,partner)` over the other `2N - 1` views,
/// with `s` the temperature-scaled cosine similarity matrix.
fn view_terms(sim: &Array2<f64>) -> Result<Vec<f64>> {
    let m = sim.nrows();
    let mut others = Vec::with_capacity(m - 1);
    (0..m)
        .map(|i| {
            others.clear();
            others.extend((0..m).filter(|&k| k != i).map(|k| sim[[i, k]]));
            Ok(log_sum_exp(&others)? - sim[[i, partner(i)]])
        })
        .collect()
}

/// NT-Xent loss averaged over all `2N` views of an interleaved batch.
pub fn nt_xent_loss(z: ArrayView2<f64>, temperature: f64) -> Result<f64> {
    check_batch(z, temperature)?;
    let (n, _) = normalize_rows(z);
    let sim = n.dot(&n.t()) / temperature;
    let terms = view_terms(&sim)?;
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Loss and its gradient with respect to the projection rows.
pub fn nt_xent_with_grad(z: ArrayView2<f64>, temperature: f64) -> Result<(f64, Array2<f64>)> {
    check_batch(z, temperature)?;
    let m = z.nrows();
    let (n, norms) = normalize_rows(z);
    let sim = n.dot(&n.t()) / temperature;
    let terms = view_terms(&sim)?;
    let loss = terms.iter().sum::<f64>() / m as f64;

    // g[i,k] = d loss / d sim[i,k]: softmax over k != i minus the target.
    let mut g = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        let lse = terms[i] + sim[[i, partner(i)]];
        for k in (0..m).filter(|&k| k != i) {
            g[[i, k]] = (sim[[i, k]] - lse).exp();
        }
        g[[i, partner(i)]] -= 1.0;
    }
    g /= m as f64;
    let sym = &g + &g.t();
    let dn = sym.dot(&n) / temperature;

    // Back through the normalization; a floored norm is a constant scale.
    let mut dz = dn;
    for ((mut row, nrow), (&r, zrow)) in dz
        .axis_iter_mut(Axis(0))
        .zip(n.axis_iter(Axis(0)))
        .zip(norms.iter().zip(z.axis_iter(Axis(0))))
    {
        let floored = zrow.dot(&zrow).sqrt() < NORM_FLOOR;
        if !floored {
            let radial = nrow.dot(&row);
            row.scaled_add(-radial, &nrow);
        }
        row /= r;
    }
    Ok((loss, dz))
}
