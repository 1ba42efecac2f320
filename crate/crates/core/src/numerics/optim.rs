//! Derivative-free simplex search and a quasi-Newton polish, both minimizing.
//!
//! Objectives may return `f64::INFINITY` to mark infeasible points; the
//! simplex treats them as very bad vertices and the line search backtracks
//! away from them.

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            f_tol: 1e-9,
            x_tol: 1e-7,
        }
    }
}

/// Nelder–Mead with adaptive coefficients (Gao & Han) which behaves better
/// than the textbook constants beyond a handful of dimensions.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: &[f64], opts: NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let nf = n as f64;
    let (alpha, gamma) = (1.0, 1.0 + 2.0 / nf);
    let (rho, sigma) = (0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    let mut converged = false;
    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = (worst - best).abs();
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if best.is_finite() && spread <= opts.f_tol * (1.0 + best.abs()) && size <= opts.x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(alpha * gamma);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(alpha * rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink towards the best vertex
        let best_x = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best_x
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + sigma * (v - b))
                .collect();
            let v = eval(&x, &mut evals);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        evaluations: evals,
        converged,
    }
}

/// Central-difference gradient with per-coordinate relative steps.
pub fn numerical_gradient<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x: &[f64],
    rel_step: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = rel_step * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    pub g_tol: f64,
    pub f_tol: f64,
    pub grad_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            g_tol: 1e-6,
            f_tol: 1e-12,
            grad_step: 1e-6,
        }
    }
}

/// BFGS on an inverse-Hessian approximation with Armijo backtracking.
pub fn bfgs<F>(mut f: F, x0: &[f64], opts: BfgsOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut x = x0.to_vec();
    let mut fx = eval(&x, &mut evals);
    let mut g = {
        let mut fe = |p: &[f64]| eval(p, &mut evals);
        numerical_gradient(&mut fe, &x, opts.grad_step)
    };
    let mut h = identity(n);
    let mut converged = false;

    for _ in 0..opts.max_iter {
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !gnorm.is_finite() {
            break;
        }
        if gnorm <= opts.g_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        let mut dir: Vec<f64> = (0..n).map(|i| -dot(&h[i], &g)).collect();
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            h = identity(n);
            dir = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let ft = eval(&trial, &mut evals);
            if ft.is_finite() && ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // No descent along the quasi-Newton direction: a stationary point
            // up to gradient noise.
            converged = gnorm <= 1e-3 * (1.0 + fx.abs());
            break;
        };
        let g_new = {
            let mut fe = |p: &[f64]| eval(p, &mut evals);
            numerical_gradient(&mut fe, &x_new, opts.grad_step)
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let improvement = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if sy > 1e-12 {
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i][j] +=
                        (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        if improvement.abs() <= opts.f_tol * (1.0 + fx.abs()) {
            // stalled: accept only if the gradient is nearly flat as well
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            converged = gnorm <= 10.0 * opts.g_tol * (1.0 + fx.abs());
            break;
        }
    }
    Minimum {
        x,
        value: fx,
        evaluations: evals,
        converged,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let m = nelder_mead(
            rosenbrock,
            &[-1.2, 1.0],
            &[0.5, 0.5],
            NelderMeadOptions {
                max_evals: 5000,
                f_tol: 1e-14,
                x_tol: 1e-10,
            },
        );
        assert!(
            (m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4,
            "{:?}",
            m.x
        );
    }

    #[test]
    fn bfgs_quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2) + x[0] * x[1];
        let m = bfgs(f, &[0.0, 0.0], BfgsOptions::default());
        // stationary point of the quadratic: 2(x-3)+y=0, 20(y+1)+x=0
        let y = (-20.0 - 3.0) / (20.0 - 0.5);
        let x = 3.0 - y / 2.0;
        assert!(
            (m.x[0] - x).abs() < 1e-5 && (m.x[1] - y).abs() < 1e-5,
            "{:?}",
            m.x
        );
        assert!(m.converged);
    }

    #[test]
    fn infeasible_region_is_avoided() {
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                f64::INFINITY
            } else {
                x[0] - x[0].ln()
            }
        };
        let m = nelder_mead(f, &[3.0], &[1.0], NelderMeadOptions::default());
        assert!((m.x[0] - 1.0).abs() < 1e-4);
    }
}
