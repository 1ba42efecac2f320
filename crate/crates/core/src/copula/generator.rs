use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate, roots};

/// One-parameter Archimedean family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorFamily {
    Gumbel,
    Clayton,
    Frank,
    Joe,
}

impl GeneratorFamily {
    pub const ALL: [GeneratorFamily; 4] = [
        GeneratorFamily::Gumbel,
        GeneratorFamily::Clayton,
        GeneratorFamily::Frank,
        GeneratorFamily::Joe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorFamily::Gumbel => "gumbel",
            GeneratorFamily::Clayton => "clayton",
            GeneratorFamily::Frank => "frank",
            GeneratorFamily::Joe => "joe",
        }
    }

    /// Smallest admissible dependence parameter (the independence limit).
    pub fn theta_floor(self) -> f64 {
        match self {
            GeneratorFamily::Gumbel | GeneratorFamily::Joe => 1.0,
            GeneratorFamily::Clayton | GeneratorFamily::Frank => 0.0,
        }
    }

    fn admits(self, theta: f64) -> bool {
        theta.is_finite()
            && match self {
                GeneratorFamily::Gumbel | GeneratorFamily::Joe => theta >= 1.0,
                GeneratorFamily::Clayton | GeneratorFamily::Frank => theta > 0.0,
            }
    }
}

impl fmt::Display for GeneratorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gumbel" => Ok(GeneratorFamily::Gumbel),
            "clayton" => Ok(GeneratorFamily::Clayton),
            "frank" => Ok(GeneratorFamily::Frank),
            "joe" => Ok(GeneratorFamily::Joe),
            other => Err(Error::param(format!("unknown copula family `{other}`"))),
        }
    }
}

/// A family together with its dependence parameter θ.
///
/// Two conventions are exposed and named accordingly:
///
/// * [`psi`](Self::psi) / [`psi_inverse`](Self::psi_inverse): the decreasing
///   generator ψ on (0, 1] with ψ(1) = 0, in the usual tabulated form.
/// * [`laplace`](Self::laplace) / [`laplace_inverse`](Self::laplace_inverse):
///   the completely monotone function φ on [0, ∞) with φ(0) = 1, which is
///   the Laplace transform of the family's frailty law. φ⁻¹ equals ψ up to a
///   positive constant (1 except for Clayton, where ψ = φ⁻¹/θ), so both
///   produce the same copula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchimedeanGenerator {
    pub family: GeneratorFamily,
    pub theta: f64,
}

impl ArchimedeanGenerator {
    pub fn new(family: GeneratorFamily, theta: f64) -> Result<Self> {
        if !family.admits(theta) {
            return Err(Error::param(format!(
                "θ = {theta} is outside the {family} domain"
            )));
        }
        Ok(Self { family, theta })
    }

    /// Tabulated generator ψ(t).
    pub fn psi(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::domain(format!(
                "generator argument {t} not in (0, 1]"
            )));
        }
        let v = self.laplace_inverse(t);
        Ok(match self.family {
            GeneratorFamily::Clayton => v / self.theta,
            _ => v,
        })
    }

    /// Inverse of [`psi`](Self::psi) on [0, ∞).
    pub fn psi_inverse(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::domain(format!("inverse generator argument {s} < 0")));
        }
        Ok(match self.family {
            GeneratorFamily::Clayton => self.laplace(self.theta * s),
            _ => self.laplace(s),
        })
    }

    /// Frailty Laplace transform φ(s), s ≥ 0.
    pub fn laplace(&self, s: f64) -> f64 {
        let th = self.theta;
        match self.family {
            GeneratorFamily::Gumbel => (-s.powf(1.0 / th)).exp(),
            GeneratorFamily::Clayton => (-(s.ln_1p()) / th).exp(),
            GeneratorFamily::Frank => {
                let p = -(-th).exp_m1();
                let x = p * (-s).exp();
                if x < 0.5 {
                    -(-x).ln_1p() / th
                } else {
                    // 1 - p e^{-s} = e^{-θ} - p (e^{-s} - 1)
                    -((-th).exp() - p * (-s).exp_m1()).ln() / th
                }
            }
            GeneratorFamily::Joe => 1.0 - (-(-s).exp_m1()).powf(1.0 / th),
        }
    }

    /// φ⁻¹(t) for t ∈ (0, 1].
    pub fn laplace_inverse(&self, t: f64) -> f64 {
        let th = self.theta;
        match self.family {
            GeneratorFamily::Gumbel => (-t.ln()).powf(th),
            GeneratorFamily::Clayton => (-th * t.ln()).exp_m1(),
            GeneratorFamily::Frank => frank_psi(th, t),
            GeneratorFamily::Joe => -(-(1.0 - t).powf(th)).ln_1p(),
        }
    }

    /// ψ(t)/ψ'(t), the integrand of the generator form of Kendall's tau.
    /// Invariant to the scaling of ψ.
    pub fn generator_ratio(&self, t: f64) -> f64 {
        let th = self.theta;
        match self.family {
            GeneratorFamily::Gumbel => t * t.ln() / th,
            GeneratorFamily::Clayton => t * (th * t.ln()).exp_m1() / th,
            GeneratorFamily::Frank => {
                frank_psi(th, t) * (-th * t).exp_m1() / (th * (-th * t).exp())
            }
            GeneratorFamily::Joe => {
                let s = 1.0 - t;
                if s <= 0.0 {
                    return 0.0;
                }
                // 1 - s^θ and its log, each without cancellation
                let ls = th * s.ln();
                let q = -ls.exp_m1();
                if q <= 0.0 {
                    return 0.0;
                }
                let sp = ls.exp();
                let ln_q = if sp < 0.5 { (-sp).ln_1p() } else { q.ln() };
                q * ln_q / (th * s.powf(th - 1.0))
            }
        }
    }

    /// Kendall's tau of the bivariate copula.
    ///
    /// Gumbel and Clayton use their closed forms; Frank goes through the
    /// Debye function of order one; Joe integrates the generator ratio.
    pub fn tau(&self) -> f64 {
        let th = self.theta;
        match self.family {
            GeneratorFamily::Gumbel => 1.0 - 1.0 / th,
            GeneratorFamily::Clayton => th / (th + 2.0),
            GeneratorFamily::Frank => frank_tau(th),
            GeneratorFamily::Joe => {
                if th == 1.0 {
                    0.0
                } else {
                    self.tau_by_quadrature()
                }
            }
        }
    }

    /// τ = 1 + 4∫₀¹ ψ(t)/ψ'(t) dt by adaptive quadrature.
    pub fn tau_by_quadrature(&self) -> f64 {
        let r = integrate(|t| self.generator_ratio(t), 0.0, 1.0, 1e-13);
        1.0 + 4.0 * r.value
    }

    /// Copula C(u) = φ(Σ φ⁻¹(uᵢ)).
    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        if u.len() < 2 {
            return Err(Error::domain("copula dimension must be at least 2"));
        }
        if let Some(bad) = u.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::domain(format!(
                "copula argument {bad} not in (0, 1]"
            )));
        }
        Ok(self.cdf_unchecked(u))
    }

    pub(crate) fn cdf_unchecked(&self, u: &[f64]) -> f64 {
        let mut free = u.iter().copied().filter(|&x| x < 1.0);
        let Some(first) = free.next() else {
            return 1.0;
        };
        let mut rest = free.peekable();
        if rest.peek().is_none() {
            // uniform margin: exact
            return first;
        }
        let s = self.laplace_inverse(first) + rest.map(|x| self.laplace_inverse(x)).sum::<f64>();
        self.laplace(s)
    }

    /// Bivariate density ∂²C/∂u∂v on the open unit square.
    pub fn bivariate_density(&self, u: f64, v: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
            return Err(Error::domain(format!(
                "density argument ({u}, {v}) outside (0,1)²"
            )));
        }
        let th = self.theta;
        Ok(match self.family {
            GeneratorFamily::Gumbel => {
                let x = -u.ln();
                let y = -v.ln();
                let a = x.powf(th) + y.powf(th);
                let a_root = a.powf(1.0 / th);
                let c = (-a_root).exp();
                c / (u * v)
                    * (x * y).powf(th - 1.0)
                    * a.powf(-2.0 + 2.0 / th)
                    * (1.0 + (th - 1.0) / a_root)
            }
            GeneratorFamily::Clayton => {
                let s = u.powf(-th) + v.powf(-th) - 1.0;
                (1.0 + th) * (u * v).powf(-th - 1.0) * s.powf(-1.0 / th - 2.0)
            }
            GeneratorFamily::Frank => {
                let a = -(-th).exp_m1();
                let denom = a - (-th * u).exp_m1() * (-th * v).exp_m1();
                // a - (1-e^{-θu})(1-e^{-θv})
                th * a * (-th * (u + v)).exp() / (denom * denom)
            }
            GeneratorFamily::Joe => {
                let a = (1.0 - u).powf(th);
                let b = (1.0 - v).powf(th);
                let s = a + b - a * b;
                s.powf(1.0 / th - 2.0) * ((1.0 - u) * (1.0 - v)).powf(th - 1.0) * (th - 1.0 + s)
            }
        })
    }
}

/// Frank -ln((1 - e^{-θt}) / (1 - e^{-θ})), accurate near both ends.
fn frank_psi(th: f64, t: f64) -> f64 {
    // r = (e^{-θt} - e^{-θ}) / (1 - e^{-θ})
    let r = (-th * t).exp() * (-th * (1.0 - t)).exp_m1() / (-th).exp_m1();
    if r < 0.5 {
        -(-r).ln_1p()
    } else {
        -((-th * t).exp_m1() / (-th).exp_m1()).ln()
    }
}

/// Frank τ(θ) = (4/θ²) ∫₀^θ h(t) dt with h(t) = t/(eᵗ-1) - 1 + t/2, which is
/// algebraically 1 - 4/θ + 4D₁(θ)/θ without the cancellation at small θ.
fn frank_tau(theta: f64) -> f64 {
    fn h(t: f64) -> f64 {
        if t < 1e-2 {
            let t2 = t * t;
            t2 / 12.0 - t2 * t2 / 720.0 + t2 * t2 * t2 / 30240.0
        } else {
            t / t.exp_m1() - 1.0 + 0.5 * t
        }
    }
    let r = integrate(h, 0.0, theta, 1e-15 * theta.max(1.0));
    4.0 * r.value / (theta * theta)
}

/// Inverts τ(θ) for the given family.
///
/// Gumbel and Clayton are closed form; Frank and Joe use a geometrically
/// expanded bracket followed by safeguarded Newton iterations.
pub fn theta_from_tau(family: GeneratorFamily, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::UnattainableTau {
            family: family.to_string(),
            tau,
        });
    }
    match family {
        GeneratorFamily::Gumbel => Ok(1.0 / (1.0 - tau)),
        GeneratorFamily::Clayton => Ok(2.0 * tau / (1.0 - tau)),
        GeneratorFamily::Frank => invert_numerically(family, tau, 1e-6, 50.0, 0.0),
        GeneratorFamily::Joe => invert_numerically(family, tau, 1.0 + 1e-6, 100.0, 1.0),
    }
}

fn invert_numerically(
    family: GeneratorFamily,
    tau: f64,
    mut lo: f64,
    mut hi: f64,
    floor: f64,
) -> Result<f64> {
    let tau_of = |th: f64| ArchimedeanGenerator { family, theta: th }.tau();
    let unattainable = || Error::UnattainableTau {
        family: family.to_string(),
        tau,
    };
    let mut guard = 0;
    while tau_of(lo) > tau {
        lo = floor + (lo - floor) / 10.0;
        guard += 1;
        if guard > 60 || lo - floor < 1e-300 {
            return Err(unattainable());
        }
    }
    guard = 0;
    while tau_of(hi) < tau {
        hi *= 2.0;
        guard += 1;
        if guard > 40 {
            return Err(unattainable());
        }
    }
    let f = |th: f64| {
        let h = 1e-6 * (th - floor).max(1e-3);
        let d = (tau_of(th + h) - tau_of((th - h).max(floor + 1e-300))) / (2.0 * h);
        (tau_of(th) - tau, d)
    };
    roots::newton_bisect(f, lo, hi, 1e-13).ok_or_else(unattainable)
}
