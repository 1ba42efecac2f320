//! Minimum-CVaR portfolio weights.
//!
//! The Rockafellar–Uryasev program
//!
//! ```text
//! min ζ + c Σ uᵢ   s.t. uᵢ ≥ Lᵢ·w − ζ, u ≥ 0, Σw = 1, 0 ≤ w ≤ w̄,  c = 1/((1−α)N)
//! ```
//!
//! has N hinge rows but only d + 1 rows in its dual
//!
//! ```text
//! max μ − Σ w̄ⱼνⱼ   s.t. Σ λᵢ Lᵢⱼ − μ + νⱼ ≥ 0, Σλ = 1, 0 ≤ λ ≤ c, ν ≥ 0,
//! ```
//!
//! which a bounded-variable revised simplex handles with a (d+1)² basis. The
//! simplex multipliers of the asset rows are the optimal weights.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-step scenario returns, N rows by d assets, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMatrix {
    pub n: usize,
    pub d: usize,
    pub values: Vec<f64>,
    pub seed: u64,
    /// Free-form description of the model that produced the scenarios.
    pub model: String,
}

impl ScenarioMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 || values.len() != n * d {
            return Err(Error::param(format!(
                "{} values do not fill {n}x{d}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite scenario value at row {}",
                i / d
            )));
        }
        Ok(Self {
            n,
            d,
            values,
            seed: 0,
            model: String::new(),
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    /// Portfolio losses −w·r for every scenario.
    pub fn losses(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| -self.row(i).iter().zip(w).map(|(r, w)| r * w).sum::<f64>())
            .collect()
    }
}

/// Long-only, fully invested weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PortfolioWeights(pub Vec<f64>);

impl PortfolioWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-asset upper bounds on the weights; the default allows anything in [0, 1].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PortfolioConstraints {
    pub max_weight: Option<Vec<f64>>,
}

impl PortfolioConstraints {
    fn upper(&self, d: usize) -> Result<Vec<f64>> {
        let Some(u) = &self.max_weight else {
            return Ok(vec![1.0; d]);
        };
        if u.len() != d {
            return Err(Error::param(format!(
                "{} weight bounds for {d} assets",
                u.len()
            )));
        }
        if u.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Infeasible("negative weight bound".into()));
        }
        if u.iter().map(|v| v.min(1.0)).sum::<f64>() < 1.0 - 1e-12 {
            return Err(Error::Infeasible("weight bounds sum to less than 1".into()));
        }
        Ok(u.iter().map(|v| v.min(1.0)).collect())
    }
}

/// Weights minimizing the sample Rockafellar–Uryasev CVaR of −w·r.
pub fn min_cvar_weights(
    scenarios: &ScenarioMatrix,
    alpha: f64,
    constraints: &PortfolioConstraints,
) -> Result<PortfolioWeights> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "confidence level {alpha} outside (0, 1)"
        )));
    }
    let (n, d) = (scenarios.n, scenarios.d);
    let upper = constraints.upper(d)?;
    if d == 1 {
        return Ok(PortfolioWeights(vec![1.0]));
    }
    let lp = DualLp::build(scenarios, alpha, &upper);
    let y = lp.solve(n)?;
    let mut w: Vec<f64> = y[1..]
        .iter()
        .zip(&upper)
        .map(|(v, u)| v.clamp(0.0, *u))
        .collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("optimizer returned no weight".into()));
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(PortfolioWeights(w))
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Status {
    Basic,
    Lower,
    Upper,
}

/// min cᵀx s.t. Ax = b, l ≤ x ≤ u, columns stored densely.
struct DualLp {
    m: usize,
    cols: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rhs: Vec<f64>,
    lambda_cap: f64,
    order: Vec<usize>,
}

impl DualLp {
    fn build(s: &ScenarioMatrix, alpha: f64, upper: &[f64]) -> Self {
        let (n, d) = (s.n, s.d);
        let m = d + 1;
        let cap = 1.0 / ((1.0 - alpha) * n as f64);
        let bound = 1.0 + s.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let total = n + 1 + 2 * d;
        let mut cols = vec![0.0; total * m];
        let mut cost = vec![0.0; total];
        let mut lo = vec![0.0; total];
        let mut hi = vec![f64::INFINITY; total];
        for i in 0..n {
            let c = &mut cols[i * m..(i + 1) * m];
            c[0] = 1.0;
            for j in 0..d {
                c[1 + j] = -s.row(i)[j];
            }
            hi[i] = cap;
        }
        // μ, bounded by the largest attainable average loss
        let mu = n;
        for j in 0..d {
            cols[mu * m + 1 + j] = -1.0;
        }
        cost[mu] = -1.0;
        lo[mu] = -bound;
        hi[mu] = bound;
        for j in 0..d {
            // surplus sⱼ and bound multiplier νⱼ
            let sj = n + 1 + j;
            let nj = n + 1 + d + j;
            cols[sj * m + 1 + j] = -1.0;
            cols[nj * m + 1 + j] = 1.0;
            cost[nj] = upper[j];
        }
        let mut rhs = vec![0.0; m];
        rhs[0] = 1.0;
        // start with the hinge mass on the worst scenarios of an equal-weight book
        let eq: Vec<f64> = s.losses(&vec![1.0 / d as f64; d]);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| eq[*b].total_cmp(&eq[*a]).then(a.cmp(b)));
        DualLp {
            m,
            cols,
            cost,
            lo,
            hi,
            rhs,
            lambda_cap: cap,
            order,
        }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.m..(j + 1) * self.m]
    }

    /// Solves the program and returns the row multipliers.
    fn solve(&self, n: usize) -> Result<Vec<f64>> {
        let m = self.m;
        let total = self.cost.len();
        let mut status = vec![Status::Lower; total];
        let mut x = self.lo.clone();
        let full = ((1.0 / self.lambda_cap) * (1.0 - 1e-12)).floor() as usize;
        let full = full.min(n - 1);
        for &i in &self.order[..full] {
            status[i] = Status::Upper;
            x[i] = self.lambda_cap;
        }
        let pivot_lambda = self.order[full];
        let mut basis = vec![pivot_lambda];
        basis.extend((0..m - 1).map(|j| n + 1 + j));
        for &b in &basis {
            status[b] = Status::Basic;
        }
        let mut binv = self.refactor(&basis)?;
        self.recompute_basic(&basis, &binv, &mut x);

        let scale = self.cols.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let dtol = 1e-11 * scale;
        let ptol = 1e-11;
        let max_iter = 50 * total + 1000;
        let mut since_refactor = 0;
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            let y = self.duals(&basis, &binv);
            let bland = degenerate_run > 50;
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..total {
                if status[j] == Status::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let dj = self.cost[j] - dot(&y, self.col(j));
                let score = match status[j] {
                    Status::Lower if dj < -dtol => -dj,
                    Status::Upper if dj > dtol => dj,
                    _ => continue,
                };
                if bland {
                    enter = Some((j, score));
                    break;
                }
                if enter.map_or(true, |(_, s)| score > s) {
                    enter = Some((j, score));
                }
            }
            let Some((q, _)) = enter else {
                return Ok(y);
            };
            let sigma = if status[q] == Status::Lower {
                1.0
            } else {
                -1.0
            };
            let alpha: Vec<f64> = (0..m).map(|r| dot(&binv[r], self.col(q))).collect();

            let mut step = self.hi[q] - self.lo[q];
            let mut leave: Option<(usize, Status)> = None;
            let mut best_pivot = 0.0;
            for r in 0..m {
                let a = sigma * alpha[r];
                let b = basis[r];
                let (t, hit) = if a > ptol {
                    ((x[b] - self.lo[b]).max(0.0) / a, Status::Lower)
                } else if a < -ptol && self.hi[b].is_finite() {
                    ((self.hi[b] - x[b]).max(0.0) / -a, Status::Upper)
                } else {
                    continue;
                };
                let tie = (t - step).abs() <= 1e-12 * (1.0 + step);
                let better = if bland {
                    t < step - 1e-12 * (1.0 + step)
                        || (tie && leave.map_or(false, |(lr, _)| b < basis[lr]))
                } else {
                    t < step - 1e-12 * (1.0 + step) || (tie && a.abs() > best_pivot)
                };
                if leave.is_none() && t <= step || better {
                    step = t;
                    leave = Some((r, hit));
                    best_pivot = a.abs();
                }
            }
            if !step.is_finite() {
                return Err(Error::Numerical("unbounded CVaR program".into()));
            }
            degenerate_run = if step <= 1e-14 { degenerate_run + 1 } else { 0 };
            x[q] += sigma * step;
            for r in 0..m {
                x[basis[r]] -= sigma * step * alpha[r];
            }
            match leave {
                None => {
                    status[q] = if status[q] == Status::Lower {
                        Status::Upper
                    } else {
                        Status::Lower
                    };
                    x[q] = if status[q] == Status::Lower {
                        self.lo[q]
                    } else {
                        self.hi[q]
                    };
                }
                Some((r, hit)) => {
                    let out = basis[r];
                    status[out] = hit;
                    x[out] = if hit == Status::Lower {
                        self.lo[out]
                    } else {
                        self.hi[out]
                    };
                    basis[r] = q;
                    status[q] = Status::Basic;
                    pivot(&mut binv, &alpha, r);
                    since_refactor += 1;
                    if since_refactor >= 64 {
                        binv = self.refactor(&basis)?;
                        self.recompute_basic(&basis, &binv, &mut x);
                        since_refactor = 0;
                    }
                }
            }
        }
        Err(Error::Numerical("CVaR simplex did not terminate".into()))
    }

    fn duals(&self, basis: &[usize], binv: &[Vec<f64>]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &b) in basis.iter().enumerate() {
            let cb = self.cost[b];
            if cb != 0.0 {
                for k in 0..m {
                    y[k] += cb * binv[r][k];
                }
            }
        }
        y
    }

    fn refactor(&self, basis: &[usize]) -> Result<Vec<Vec<f64>>> {
        let m = self.m;
        let b = DMatrix::from_fn(m, m, |i, j| self.col(basis[j])[i]);
        let inv = b
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular simplex basis".into()))?;
        Ok((0..m)
            .map(|i| (0..m).map(|j| inv[(i, j)]).collect())
            .collect())
    }

    fn recompute_basic(&self, basis: &[usize], binv: &[Vec<f64>], x: &mut [f64]) {
        let m = self.m;
        let mut r = self.rhs.clone();
        for j in 0..self.cost.len() {
            if basis.contains(&j) || x[j] == 0.0 {
                continue;
            }
            let c = self.col(j);
            for k in 0..m {
                r[k] -= c[k] * x[j];
            }
        }
        for (i, &b) in basis.iter().enumerate() {
            x[b] = dot(&binv[i], &r);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Product-form update of B⁻¹ after column `alpha = B⁻¹a_q` replaces row `r`.
fn pivot(binv: &mut [Vec<f64>], alpha: &[f64], r: usize) {
    let m = alpha.len();
    let p = alpha[r];
    let row_r: Vec<f64> = binv[r].iter().map(|v| v / p).collect();
    for i in 0..m {
        if i == r {
            continue;
        }
        let f = alpha[i];
        if f != 0.0 {
            for k in 0..m {
                binv[i][k] -= f * row_r[k];
            }
        }
    }
    binv[r] = row_r;
}
