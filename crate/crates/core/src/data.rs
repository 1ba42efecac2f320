//! Price ingestion, percent log-returns and descriptive statistics.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::chi_square_sf;

/// Aligned closing prices, one row per date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// `close[t][j]` is ticker j on date t.
    pub close: Vec<Vec<f64>>,
    /// Rows dropped because a ticker had no price.
    pub dropped_rows: usize,
    /// True when the input dates were not in increasing order.
    pub reordered: bool,
}

/// Percent log-returns; `dates[t]` is the later day of each pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnTable {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub returns: Vec<Vec<f64>>,
}

impl ReturnTable {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.tickers.len()
    }

    /// One vector per ticker.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|j| self.returns.iter().map(|r| r[j]).collect())
            .collect()
    }
}

fn is_missing(field: &str) -> bool {
    matches!(
        field.to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "n/a" | "."
    )
}

/// Reads a `date,TICKER1,TICKER2,…` file.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<PriceTable> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file)
}

/// As [`ingest_csv`], from any reader.
pub fn ingest_reader<R: Read>(reader: R) -> Result<PriceTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Data {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("date") {
        return Err(Error::Data {
            line: 1,
            msg: "header must be date,TICKER1,…".into(),
        });
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if let Some(t) = tickers.iter().find(|t| t.is_empty()) {
        return Err(Error::Data {
            line: 1,
            msg: format!("empty ticker name '{t}'"),
        });
    }
    let d = tickers.len();
    let mut rows: Vec<(NaiveDate, Vec<f64>, usize)> = Vec::new();
    let mut dropped = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Data {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() > d + 1 {
            return Err(Error::Data {
                line,
                msg: format!("{} fields, expected {}", rec.len(), d + 1),
            });
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| Error::Data {
            line,
            msg: format!("bad date '{}': {e}", &rec[0]),
        })?;
        let mut prices = Vec::with_capacity(d);
        let mut missing = rec.len() < d + 1;
        for j in 0..d.min(rec.len() - 1) {
            let field = &rec[j + 1];
            if is_missing(field) {
                missing = true;
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Data {
                line,
                msg: format!("bad price '{field}' for {}", tickers[j]),
            })?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Data {
                    line,
                    msg: format!("non-positive price {v} for {}", tickers[j]),
                });
            }
            prices.push(v);
        }
        if missing {
            dropped += 1;
            continue;
        }
        rows.push((date, prices, line));
    }
    if dropped > 0 {
        warn!("dropped {dropped} rows with missing prices");
    }
    let reordered = rows.windows(2).any(|w| w[1].0 <= w[0].0);
    if reordered {
        warn!("dates are not increasing; rows sorted by date");
        rows.sort_by_key(|r| r.0);
    }
    if let Some(w) = rows.windows(2).find(|w| w[1].0 == w[0].0) {
        return Err(Error::Data {
            line: w[1].2,
            msg: format!("duplicate date {}", w[1].0),
        });
    }
    let (dates, close) = rows.into_iter().map(|(d, p, _)| (d, p)).unzip();
    Ok(PriceTable {
        dates,
        tickers,
        close,
        dropped_rows: dropped,
        reordered,
    })
}

/// r_t = 100·(ln p_t − ln p_{t−1}) per column.
pub fn compute_returns(prices: &PriceTable) -> Result<ReturnTable> {
    if prices.close.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} price rows, at least 2 needed",
            prices.close.len()
        )));
    }
    let returns = prices
        .close
        .windows(2)
        .map(|w| {
            w[1].iter()
                .zip(&w[0])
                .map(|(b, a)| 100.0 * (b.ln() - a.ln()))
                .collect()
        })
        .collect();
    Ok(ReturnTable {
        dates: prices.dates[1..].to_vec(),
        tickers: prices.tickers.clone(),
        returns,
    })
}

/// Descriptive statistics of one return series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub ticker: String,
    pub n: usize,
    pub max: f64,
    pub mean: f64,
    pub min: f64,
    /// Sample standard deviation (n − 1 divisor).
    pub std: f64,
    pub skewness: f64,
    /// Raw (not excess) kurtosis.
    pub kurtosis: f64,
    pub jarque_bera: f64,
    pub jb_pvalue: f64,
    /// Constant series: the moment ratios are undefined and reported as NaN.
    pub degenerate: bool,
}

/// Moment statistics and the Jarque–Bera test of one series.
pub fn describe_series(ticker: &str, x: &[f64]) -> Result<SeriesStats> {
    let n = x.len();
    if n < 8 {
        return Err(Error::InsufficientData(format!(
            "{n} returns, at least 8 needed"
        )));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let e = v - mean;
        let e2 = e * e;
        m2 += e2;
        m3 += e2 * e;
        m4 += e2 * e2;
    }
    let std = (m2 / (nf - 1.0)).sqrt();
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let degenerate = max == min;
    let (skewness, kurtosis, jarque_bera, jb_pvalue) = if degenerate {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        let s = m3 / m2.powf(1.5);
        let k = m4 / (m2 * m2);
        let jb = nf / 6.0 * (s * s + (k - 3.0).powi(2) / 4.0);
        (s, k, jb, chi_square_sf(jb, 2))
    };
    Ok(SeriesStats {
        ticker: ticker.to_string(),
        n,
        max,
        mean,
        min,
        std: if degenerate { 0.0 } else { std },
        skewness,
        kurtosis,
        jarque_bera,
        jb_pvalue,
        degenerate,
    })
}

/// Per-ticker statistics of a return table.
pub fn describe(returns: &ReturnTable) -> Result<Vec<SeriesStats>> {
    returns
        .columns()
        .iter()
        .zip(&returns.tickers)
        .map(|(c, t)| describe_series(t, c))
        .collect()
}
