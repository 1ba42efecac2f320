use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::sstd::SkewedT;
use crate::error::{Error, Result};

/// ARMA(p, q)-APARCH(m, n) orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmaAparchSpec {
    pub p: usize,
    pub q: usize,
    pub m: usize,
    pub n: usize,
}

impl ArmaAparchSpec {
    pub fn new(p: usize, q: usize, m: usize, n: usize) -> Result<Self> {
        if n >= 1 && m == 0 {
            return Err(Error::param(
                "GARCH terms need at least one ARCH term (m ≥ 1 when n ≥ 1)",
            ));
        }
        Ok(Self { p, q, m, n })
    }

    /// Number of free parameters, innovation law included.
    pub fn n_params(&self) -> usize {
        1 + self.p + self.q + 1 + 2 * self.m + self.n + 3
    }

    /// Longest lag the recursions look back.
    pub fn max_lag(&self) -> usize {
        self.p.max(self.q).max(self.m).max(self.n)
    }

    /// Parameter names in vector order.
    pub fn names(&self) -> Vec<String> {
        let mut v = vec!["mu".to_string()];
        v.extend((1..=self.p).map(|i| format!("ar{i}")));
        v.extend((1..=self.q).map(|i| format!("ma{i}")));
        v.push("omega".into());
        v.extend((1..=self.m).map(|i| format!("alpha{i}")));
        v.extend((1..=self.m).map(|i| format!("gamma{i}")));
        v.extend((1..=self.n).map(|i| format!("beta{i}")));
        v.extend(["delta".to_string(), "skew".into(), "shape".into()]);
        v
    }
}

impl Default for ArmaAparchSpec {
    /// The ARMA(1,2)-APARCH(1,1) specification.
    fn default() -> Self {
        Self {
            p: 1,
            q: 2,
            m: 1,
            n: 1,
        }
    }
}

/// Parameters of one ARMA-APARCH model with skewed-t innovations.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmaAparchParams {
    /// Mean intercept, in return units.
    pub mu: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub omega: f64,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub delta: f64,
    pub skew: f64,
    pub shape: f64,
}

impl ArmaAparchParams {
    pub fn spec(&self) -> ArmaAparchSpec {
        ArmaAparchSpec {
            p: self.ar.len(),
            q: self.ma.len(),
            m: self.alpha.len(),
            n: self.beta.len(),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.mu];
        v.extend(&self.ar);
        v.extend(&self.ma);
        v.push(self.omega);
        v.extend(&self.alpha);
        v.extend(&self.gamma);
        v.extend(&self.beta);
        v.extend([self.delta, self.skew, self.shape]);
        v
    }

    pub fn from_vec(spec: &ArmaAparchSpec, v: &[f64]) -> Result<Self> {
        if v.len() != spec.n_params() {
            return Err(Error::param(format!(
                "expected {} parameters, got {}",
                spec.n_params(),
                v.len()
            )));
        }
        let mut it = v.iter().copied();
        let mut take = |k: usize| -> Vec<f64> { (&mut it).take(k).collect() };
        let mu = take(1)[0];
        let ar = take(spec.p);
        let ma = take(spec.q);
        let omega = take(1)[0];
        let alpha = take(spec.m);
        let gamma = take(spec.m);
        let beta = take(spec.n);
        let rest = take(3);
        Ok(Self {
            mu,
            ar,
            ma,
            omega,
            alpha,
            gamma,
            beta,
            delta: rest[0],
            skew: rest[1],
            shape: rest[2],
        })
    }

    /// Checks the positivity and range constraints (not stationarity).
    pub fn validate(&self) -> Result<()> {
        ArmaAparchSpec::new(
            self.ar.len(),
            self.ma.len(),
            self.alpha.len(),
            self.beta.len(),
        )?;
        if self.gamma.len() != self.alpha.len() {
            return Err(Error::param("alpha and gamma must have the same length"));
        }
        if self.to_vec().iter().any(|x| !x.is_finite()) {
            return Err(Error::param("parameters must be finite"));
        }
        if self.omega <= 0.0 {
            return Err(Error::param("omega must be positive"));
        }
        if self.alpha.iter().chain(&self.beta).any(|&x| x < 0.0) {
            return Err(Error::param("alpha and beta must be non-negative"));
        }
        if self.gamma.iter().any(|&g| g <= -1.0 || g >= 1.0) {
            return Err(Error::param("gamma must lie in (-1, 1)"));
        }
        if self.delta <= 0.0 {
            return Err(Error::param("delta must be positive"));
        }
        SkewedT::new(self.skew, self.shape)?;
        Ok(())
    }

    pub fn innovation(&self) -> Result<SkewedT> {
        SkewedT::new(self.skew, self.shape)
    }

    /// 1 − [Σ αⱼ E(|Z| − γⱼZ)^δ + Σ βₖ]; positive iff covariance stationary.
    pub fn stationarity_margin(&self) -> Result<f64> {
        self.validate()?;
        let beta_sum: f64 = self.beta.iter().sum();
        if self.alpha.iter().all(|&a| a == 0.0) {
            return Ok(1.0 - beta_sum);
        }
        let (neg, pos) = self.innovation()?.half_abs_moments(self.delta);
        let arch: f64 = self
            .alpha
            .iter()
            .zip(&self.gamma)
            .map(|(&a, &g)| {
                a * ((1.0 + g).powf(self.delta) * neg + (1.0 - g).powf(self.delta) * pos)
            })
            .sum();
        Ok(1.0 - arch - beta_sum)
    }

    /// Named values in the canonical order.
    pub fn named(&self) -> Vec<(String, f64)> {
        self.spec().names().into_iter().zip(self.to_vec()).collect()
    }
}

impl Serialize for ArmaAparchParams {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let named = self.named();
        let mut map = s.serialize_map(Some(named.len()))?;
        for (k, v) in &named {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for ArmaAparchParams {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = serde_json::Map::<String, serde_json::Value>::deserialize(d)?;
        let count = |prefix: &str| {
            (1..)
                .take_while(|i| map.contains_key(&format!("{prefix}{i}")))
                .count()
        };
        let spec = ArmaAparchSpec::new(count("ar"), count("ma"), count("alpha"), count("beta"))
            .map_err(D::Error::custom)?;
        if count("gamma") != spec.m {
            return Err(D::Error::custom("gamma terms must match alpha terms"));
        }
        let names = spec.names();
        if let Some(extra) = map.keys().find(|k| !names.contains(k)) {
            return Err(D::Error::custom(format!("unknown parameter `{extra}`")));
        }
        let values = names
            .iter()
            .map(|n| {
                map.get(n)
                    .and_then(serde_json::Value::as_f64)
                    .ok_or_else(|| D::Error::custom(format!("missing numeric parameter `{n}`")))
            })
            .collect::<std::result::Result<Vec<f64>, _>>()?;
        let p = ArmaAparchParams::from_vec(&spec, &values).map_err(D::Error::custom)?;
        p.validate().map_err(D::Error::custom)?;
        Ok(p)
    }
}
