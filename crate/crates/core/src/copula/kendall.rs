use rayon::prelude::*;

use crate::error::{Error, Result};

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::param("series lengths differ"));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "at least two observations are needed".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite observation"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let pairs = |t: u64| t * t.saturating_sub(1) / 2;
    let mut tied_x = 0u64;
    let mut tied_xy = 0u64;
    let (mut run_x, mut run_xy) = (1u64, 1u64);
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if x[a] == x[b] {
            run_x += 1;
            if y[a] == y[b] {
                run_xy += 1;
            } else {
                tied_xy += pairs(run_xy);
                run_xy = 1;
            }
        } else {
            tied_x += pairs(run_x);
            tied_xy += pairs(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    tied_x += pairs(run_x);
    tied_xy += pairs(run_xy);

    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut tied_y = 0u64;
    let mut run_y = 1u64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run_y += 1;
        } else {
            tied_y += pairs(run_y);
            run_y = 1;
        }
    }
    tied_y += pairs(run_y);

    let n0 = pairs(n as u64);
    let s = n0 as f64 - tied_x as f64 - tied_y as f64 + tied_xy as f64 - 2.0 * swaps as f64;
    let denom = ((n0 - tied_x) as f64 * (n0 - tied_y) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::domain("a series is constant"));
    }
    Ok(s / denom)
}

/// Stable merge sort returning the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count =
        merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            j += 1;
            count += (mid - i) as u64;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    let k = k + mid - i;
    buf[k..n].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

/// Symmetric matrix of pairwise tau-b over the given columns.
///
/// Constant columns are reported as [`Error::DegenerateColumn`].
pub fn empirical_kendall_matrix(columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = columns.len();
    if d < 2 {
        return Err(Error::param("need at least two columns"));
    }
    let n = columns[0].len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::param("columns differ in length"));
    }
    for (j, c) in columns.iter().enumerate() {
        if c.iter().all(|&v| v == c[0]) {
            return Err(Error::DegenerateColumn(j));
        }
    }
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .collect();
    let taus: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| kendall_tau_b(&columns[i], &columns[j]))
        .collect::<Result<_>>()?;
    let mut m = vec![vec![1.0; d]; d];
    for (&(i, j), &t) in pairs.iter().zip(&taus) {
        m[i][j] = t;
        m[j][i] = t;
    }
    Ok(m)
}
