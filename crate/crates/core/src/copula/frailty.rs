//! Frailty distributions behind the Marshall–Olkin construction.
//!
//! Integer-valued frailties are returned as `f64` so that they can feed the
//! nested samplers directly.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::gamma;

use super::generator::{ArchimedeanGenerator, GeneratorFamily};
use crate::rng::{exp1, open01};

/// Count above which sums of iid frailties switch to a distributional
/// approximation instead of an explicit loop.
const MAX_EXPLICIT_SUM: f64 = 1e6;

/// Same for the tilted stable law, whose explicit cost is about e·v0 stable
/// draws.
const MAX_EXPLICIT_TILTED: f64 = 1e3;

/// Positive α-stable variate with Laplace transform exp(-t^α), α ∈ (0, 1].
///
/// Kanter's representation, evaluated in logs.
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    let th = PI * open01(rng);
    let w = exp1(rng);
    let ln_s = (alpha * th).sin().ln() - th.sin().ln() / alpha
        + (1.0 - alpha) / alpha * (((1.0 - alpha) * th).sin().ln() - w.ln());
    ln_s.exp()
}

/// Sibuya(α) variate, P(X = k) = α Γ(k-α) / (Γ(1-α) k!), α ∈ (0, 1].
pub fn sibuya<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = open01(rng);
    if u <= alpha {
        return 1.0;
    }
    let ginv = ((1.0 - u) * gamma(1.0 - alpha)).powf(-1.0 / alpha);
    let fg = ginv.floor();
    if ginv > 1.0 / f64::EPSILON {
        return fg;
    }
    // 1/(fG·B(fG, 1-α))
    let threshold = (-(fg.ln() + ln_beta(fg, 1.0 - alpha))).exp();
    if 1.0 - u < threshold {
        ginv.ceil()
    } else {
        fg
    }
}

/// Logarithmic-series variate with p = 1 - e^{-θ} (Kemp's LK method).
pub fn log_series<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
    let p = -(-theta).exp_m1();
    let v = open01(rng);
    if v >= p {
        return 1.0;
    }
    let q = -(-theta * open01(rng)).exp_m1();
    if v <= q * q {
        let k = (1.0 + v.ln() / q.ln()).floor();
        return k.max(1.0);
    }
    if v <= q {
        2.0
    } else {
        1.0
    }
}

/// Exponentially tilted stable variate with Laplace transform
/// exp(-v0((1+t)^α - 1)).
///
/// Sum of ⌈v0⌉ pieces, each drawn by rejection from a scaled stable law with
/// acceptance probability at least e⁻¹. Cost is linear in v0, so above
/// [`MAX_EXPLICIT_TILTED`] a gamma law with the same mean v0·α and variance
/// v0·α(1-α) is drawn instead. It is exact as α → 0 and normal as v0·α grows;
/// the skewness error is sqrt(α / (v0 (1-α))).
pub fn tilted_stable<R: Rng + ?Sized>(alpha: f64, v0: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return v0;
    }
    if v0 > MAX_EXPLICIT_TILTED {
        let shape = v0 * alpha / (1.0 - alpha);
        return Gamma::new(shape, 1.0 - alpha)
            .expect("positive shape")
            .sample(rng);
    }
    let m = v0.ceil().max(1.0);
    let scale = (v0 / m).powf(1.0 / alpha);
    let mut total = 0.0;
    for _ in 0..m as u64 {
        total += loop {
            let x = scale * positive_stable(alpha, rng);
            if open01(rng) <= (-x).exp() {
                break x;
            }
        };
    }
    total
}

/// Frailty V₀ of an outer node: the law whose Laplace transform is φ.
pub fn root_frailty<R: Rng + ?Sized>(g: &ArchimedeanGenerator, rng: &mut R) -> f64 {
    let th = g.theta;
    match g.family {
        GeneratorFamily::Gumbel => positive_stable(1.0 / th, rng),
        GeneratorFamily::Clayton => Gamma::new(1.0 / th, 1.0)
            .expect("validated θ")
            .sample(rng)
            .max(f64::MIN_POSITIVE),
        GeneratorFamily::Frank => log_series(th, rng),
        GeneratorFamily::Joe => sibuya(1.0 / th, rng),
    }
}

/// Child frailty V₁ given the parent frailty `v0`, i.e. a draw whose
/// Laplace transform is exp(-v0 φ_parent⁻¹(φ_child(t))).
///
/// Both generators must share a family and satisfy θ_parent ≤ θ_child.
pub fn inner_frailty<R: Rng + ?Sized>(
    parent: &ArchimedeanGenerator,
    child: &ArchimedeanGenerator,
    v0: f64,
    rng: &mut R,
) -> f64 {
    debug_assert_eq!(parent.family, child.family);
    if parent.theta == child.theta {
        return v0;
    }
    let alpha = parent.theta / child.theta;
    match child.family {
        GeneratorFamily::Gumbel => v0.powf(1.0 / alpha) * positive_stable(alpha, rng),
        GeneratorFamily::Clayton => tilted_stable(alpha, v0, rng),
        GeneratorFamily::Frank => frank_inner(alpha, parent.theta, child.theta, v0, rng),
        GeneratorFamily::Joe => {
            if v0 > MAX_EXPLICIT_SUM {
                // stable domain of attraction
                return v0.powf(1.0 / alpha) * positive_stable(alpha, rng);
            }
            (0..v0 as u64).map(|_| sibuya(alpha, rng)).sum()
        }
    }
}

/// Sum of `v0` iid draws with P(X = k) ∝ Sibuya_α(k) p₁ᵏ, p₁ = 1 - e^{-θ₁}.
fn frank_inner<R: Rng + ?Sized>(alpha: f64, theta0: f64, theta1: f64, v0: f64, rng: &mut R) -> f64 {
    let p1 = -(-theta1).exp_m1();
    let p0 = -(-theta0).exp_m1();
    if v0 > MAX_EXPLICIT_SUM {
        // normal approximation from the probability generating function
        let mean = alpha * p1 * (1.0 - p1).powf(alpha - 1.0) / p0;
        let second = alpha * (1.0 - alpha) * p1 * p1 * (1.0 - p1).powf(alpha - 2.0) / p0;
        let var = (second + mean - mean * mean).max(0.0);
        let z: f64 = StandardNormal.sample(rng);
        return (v0 * mean + (v0 * var).sqrt() * z).round().max(v0);
    }
    let mut total = 0.0;
    for _ in 0..v0 as u64 {
        total += if p1 <= 0.9 {
            frank_piece_sequential(alpha, p1, p0, rng)
        } else {
            loop {
                let y = sibuya(alpha, rng);
                if open01(rng) <= p1.powf(y) {
                    break y;
                }
            }
        };
    }
    total
}

fn frank_piece_sequential<R: Rng + ?Sized>(alpha: f64, p1: f64, p0: f64, rng: &mut R) -> f64 {
    let u = open01(rng);
    let mut prob = alpha * p1 / p0;
    let mut cum = prob;
    let mut k = 1.0;
    while u > cum && k < 1e7 {
        prob *= (k - alpha) / (k + 1.0) * p1;
        k += 1.0;
        cum += prob;
        if prob == 0.0 {
            break;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn mean_of(n: usize, mut f: impl FnMut() -> f64) -> f64 {
        (0..n).map(|_| f()).sum::<f64>() / n as f64
    }

    #[test]
    fn stable_laplace_transform() {
        let mut rng = substream(11, 0);
        let alpha = 0.6;
        let xs: Vec<f64> = (0..100_000)
            .map(|_| positive_stable(alpha, &mut rng))
            .collect();
        for &t in &[0.3, 1.0, 2.5] {
            let emp = xs.iter().map(|x| (-t * x).exp()).sum::<f64>() / xs.len() as f64;
            let exact = (-(t as f64).powf(alpha)).exp();
            assert!((emp - exact).abs() < 5e-3, "t={t} emp={emp} exact={exact}");
        }
        assert_eq!(positive_stable(1.0, &mut rng), 1.0);
    }

    #[test]
    fn sibuya_pmf() {
        let mut rng = substream(12, 0);
        let alpha = 0.4;
        let n = 200_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let k = sibuya(alpha, &mut rng) as usize;
            assert!(k >= 1);
            if k <= 3 {
                counts[k] += 1;
            }
        }
        let p1 = alpha;
        let p2 = alpha * (1.0 - alpha) / 2.0;
        let p3 = p2 * (2.0 - alpha) / 3.0;
        for (k, p) in [(1, p1), (2, p2), (3, p3)] {
            let emp = counts[k] as f64 / n as f64;
            assert!(
                (emp - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(),
                "k={k}"
            );
        }
    }

    #[test]
    fn log_series_pmf() {
        let mut rng = substream(13, 0);
        let theta: f64 = 3.0;
        let p = 1.0 - (-theta).exp();
        let n = 200_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            let k = log_series(theta, &mut rng) as usize;
            if k <= 4 {
                counts[k] += 1;
            }
        }
        for k in 1..=4 {
            let pk = -p.powi(k as i32) / (k as f64 * (1.0 - p).ln());
            let emp = counts[k] as f64 / n as f64;
            assert!(
                (emp - pk).abs() < 4.0 * (pk * (1.0 - pk) / n as f64).sqrt(),
                "k={k}"
            );
        }
    }

    #[test]
    fn tilted_stable_laplace_transform() {
        let mut rng = substream(14, 0);
        let (alpha, v0) = (0.5, 2.7);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| tilted_stable(alpha, v0, &mut rng))
            .collect();
        for &t in &[0.2, 1.0] {
            let emp = xs.iter().map(|x| (-t * x).exp()).sum::<f64>() / xs.len() as f64;
            let exact = (-v0 * ((1.0f64 + t).powf(alpha) - 1.0)).exp();
            assert!((emp - exact).abs() < 5e-3, "t={t}");
        }
    }

    #[test]
    fn large_count_tilted_stable_laplace_transform() {
        for (k, (alpha, v0)) in [(0.3, 2.5e3), (1e-4, 1e6), (0.8, 5e3)]
            .into_iter()
            .enumerate()
        {
            let mut rng = substream(17, k as u64);
            let n = 100_000;
            let xs: Vec<f64> = (0..n).map(|_| tilted_stable(alpha, v0, &mut rng)).collect();
            // t where the transform is between e⁻³ and e^-0.3
            for c in [0.3, 1.0, 3.0] {
                let t = c / (v0 * alpha);
                let vals: Vec<f64> = xs.iter().map(|x| (-t * x).exp()).collect();
                let emp = vals.iter().sum::<f64>() / n as f64;
                let sd = (vals.iter().map(|v| (v - emp).powi(2)).sum::<f64>() / n as f64).sqrt();
                let exact = (-v0 * (alpha * t.ln_1p()).exp_m1()).exp();
                assert!(
                    (emp - exact).abs() < 4.0 * sd / (n as f64).sqrt(),
                    "α={alpha} t={t}: {emp} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn inner_frailties_match_their_laplace_transform() {
        // E exp(-t V1) = exp(-v0 φ0⁻¹(φ1(t)))
        let cases = [
            (GeneratorFamily::Gumbel, 1.5, 3.0, 0.8),
            (GeneratorFamily::Clayton, 1.0, 4.0, 1.3),
            (GeneratorFamily::Frank, 2.0, 5.0, 3.0),
            (GeneratorFamily::Frank, 0.5, 4.0, 2.0),
            (GeneratorFamily::Joe, 1.5, 3.0, 2.0),
        ];
        for (i, &(family, th0, th1, v0)) in cases.iter().enumerate() {
            let g0 = ArchimedeanGenerator::new(family, th0).unwrap();
            let g1 = ArchimedeanGenerator::new(family, th1).unwrap();
            let mut rng = substream(15, i as u64);
            let xs: Vec<f64> = (0..60_000)
                .map(|_| inner_frailty(&g0, &g1, v0, &mut rng))
                .collect();
            for &t in &[0.3, 1.5] {
                let emp = xs.iter().map(|x| (-t * x).exp()).sum::<f64>() / xs.len() as f64;
                let exact = (-v0 * g0.laplace_inverse(g1.laplace(t))).exp();
                assert!(
                    (emp - exact).abs() < 8e-3,
                    "{family} t={t} emp={emp} exact={exact}"
                );
            }
        }
    }

    #[test]
    fn root_frailty_means() {
        let g = ArchimedeanGenerator::new(GeneratorFamily::Clayton, 0.5).unwrap();
        let mut rng = substream(16, 0);
        let m = mean_of(100_000, || root_frailty(&g, &mut rng));
        assert!((m - 2.0).abs() < 0.03);
    }
}
