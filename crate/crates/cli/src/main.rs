use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hacvar::copula::empirical_kendall_matrix;
use hacvar::data::{compute_returns, describe, ingest_csv};
use hacvar::hac::estimate_structure_with_taus;
use hacvar::risk::{
    fit_risk_model, pipeline_forecast, risk_report, rolling_backtest, BacktestConfig,
};
use hacvar::volatility::{fit, FitOptions, FitSummary};
use hacvar::{
    ArmaAparchSpec, CopulaMode, GeneratorFamily, PipelineConfig, PortfolioConstraints, ReturnTable,
    RiskModel, SeriesStats,
};
use log::info;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "hacvar",
    version,
    about = "Portfolio VaR/CVaR with ARMA-APARCH margins and hierarchical Archimedean copulas"
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Descriptive statistics of percent log-returns.
    Stats {
        prices: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Fit an ARMA-APARCH model with skewed-t innovations to each column.
    Fit {
        prices: PathBuf,
        #[arg(long, default_value = "1,2,1,1", value_parser = parse_spec)]
        spec: ArmaAparchSpec,
        #[arg(long, default_value_t = 5)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Kendall matrix, HAC tree and parameters.
    Structure {
        prices: PathBuf,
        #[arg(long, default_value = "gumbel")]
        family: GeneratorFamily,
        /// Use the raw returns instead of the filtered residuals.
        #[arg(long)]
        raw: bool,
        #[arg(long, default_value = "1,2,1,1", value_parser = parse_spec)]
        spec: ArmaAparchSpec,
        #[arg(long, default_value_t = 0.10)]
        tail_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Draw one-step return scenarios from a saved model.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(short = 'n', long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scenario CSV; stdout when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// One-day-ahead VaR and CVaR of the min-CVaR portfolio.
    Forecast {
        prices: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Report JSON; stdout when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also save the fitted model for `simulate`.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Rolling out-of-sample VaR back-test with coverage tests.
    Backtest {
        prices: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, default_value_t = 1000)]
        window: usize,
        #[arg(long, default_value_t = 10)]
        refit_every: usize,
        #[arg(long, default_value_t = 1)]
        refit_starts: usize,
        /// Evaluate only the last this many days.
        #[arg(long)]
        eval_days: Option<usize>,
        /// Directory for backtest.json, hits.csv and plot.dat.
        #[arg(long, default_value = "backtest_out")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, default_value = "gumbel")]
    family: GeneratorFamily,
    #[arg(long, default_value = "hac")]
    mode: CopulaMode,
    /// Number of scenarios.
    #[arg(short = 'n', long = "scenarios", default_value_t = 10_000)]
    n_scenarios: usize,
    #[arg(long, default_value_t = 0.95)]
    alpha: f64,
    #[arg(long, default_value_t = 0.10)]
    tail_fraction: f64,
    #[arg(long, default_value = "1,2,1,1", value_parser = parse_spec)]
    spec: ArmaAparchSpec,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optimizer starts per volatility fit.
    #[arg(long, default_value_t = 5)]
    starts: usize,
    /// Upper weight bound per asset, comma separated.
    #[arg(long, value_delimiter = ',')]
    max_weight: Option<Vec<f64>>,
}

impl PipelineArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            family: self.family,
            mode: self.mode,
            n_scenarios: self.n_scenarios,
            alpha: self.alpha,
            tail_fraction: self.tail_fraction,
            spec: self.spec,
            seed: self.seed,
            fit_starts: self.starts,
            constraints: PortfolioConstraints {
                max_weight: self.max_weight.clone(),
            },
        }
    }
}

fn parse_spec(s: &str) -> std::result::Result<ArmaAparchSpec, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}")))
        .collect::<std::result::Result<_, _>>()?;
    let [p, q, m, n] = v[..] else {
        return Err("expected four orders p,q,m,n".into());
    };
    ArmaAparchSpec::new(p, q, m, n).map_err(|e| e.to_string())
}

/// A fitted model with the tickers it belongs to.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    tickers: Vec<String>,
    config: PipelineConfig,
    model: RiskModel,
}

#[derive(Serialize)]
struct StatsReport {
    n_prices: usize,
    dropped_rows: usize,
    reordered: bool,
    series: Vec<SeriesStats>,
}

#[derive(Serialize)]
struct FitEntry {
    ticker: String,
    #[serde(flatten)]
    summary: FitSummary,
}

#[derive(Serialize)]
struct StructureReport {
    tickers: Vec<String>,
    n: usize,
    family: GeneratorFamily,
    source: &'static str,
    kendall: Vec<Vec<f64>>,
    structure: String,
    topology: String,
    labelled: String,
    /// Root first.
    theta: Vec<f64>,
    /// Innermost merge first.
    node_taus: Vec<f64>,
}

fn load_returns(path: &Path) -> Result<ReturnTable> {
    let prices = ingest_csv(path).with_context(|| format!("reading {}", path.display()))?;
    if prices.dropped_rows > 0 {
        eprintln!("dropped {} rows with missing prices", prices.dropped_rows);
    }
    Ok(compute_returns(&prices)?)
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "-".into()
    }
}

/// Replaces the 1-based leaf labels of a topology string with tickers.
fn label_topology(topology: &str, tickers: &[String]) -> String {
    let mut out = String::new();
    let mut num = String::new();
    let flush = |num: &mut String, out: &mut String| {
        if !num.is_empty() {
            let i: usize = num.parse().unwrap_or(0);
            out.push_str(
                tickers
                    .get(i.wrapping_sub(1))
                    .map_or(num.as_str(), |s| s.as_str()),
            );
            num.clear();
        }
    };
    for c in topology.chars() {
        if c.is_ascii_digit() {
            num.push(c);
        } else {
            flush(&mut num, &mut out);
            out.push(c);
        }
    }
    flush(&mut num, &mut out);
    out
}

fn stats(prices: &Path, json: bool) -> Result<()> {
    let table = ingest_csv(prices).with_context(|| format!("reading {}", prices.display()))?;
    let returns = compute_returns(&table)?;
    let report = StatsReport {
        n_prices: table.dates.len(),
        dropped_rows: table.dropped_rows,
        reordered: table.reordered,
        series: describe(&returns)?,
    };
    if json {
        return write_json(&report, None);
    }
    println!(
        "{} price rows, {} dropped",
        report.n_prices, report.dropped_rows
    );
    println!(
        "{:<10} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>12} {:>10}",
        "", "n", "max", "mean", "min", "std", "skewness", "kurtosis", "JB", "JB p"
    );
    for s in &report.series {
        println!(
            "{:<10} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>12} {:>10}",
            s.ticker,
            s.n,
            fmt(s.max),
            fmt(s.mean),
            fmt(s.min),
            fmt(s.std),
            fmt(s.skewness),
            fmt(s.kurtosis),
            fmt(s.jarque_bera),
            fmt(s.jb_pvalue)
        );
    }
    Ok(())
}

fn fit_all(
    prices: &Path,
    spec: ArmaAparchSpec,
    starts: usize,
    seed: u64,
    json: bool,
) -> Result<()> {
    let returns = load_returns(prices)?;
    let mut entries = Vec::new();
    for (j, (ticker, col)) in returns.tickers.iter().zip(returns.columns()).enumerate() {
        info!("fitting {ticker}");
        let options = FitOptions {
            starts,
            seed: hacvar::rng::derive_seed(seed, j as u64),
            ..FitOptions::default()
        };
        let f = fit(&spec, &col, &options).with_context(|| format!("fitting {ticker}"))?;
        entries.push(FitEntry {
            ticker: ticker.clone(),
            summary: f.summary(),
        });
    }
    if json {
        return write_json(&entries, None);
    }
    let names = spec.names();
    print!("{:<10}", "");
    for n in &names {
        print!(" {n:>9}");
    }
    println!(" {:>12} {:>8}", "loglik", "AIC/n");
    for e in &entries {
        print!("{:<10}", e.ticker);
        for v in e.summary.params.to_vec() {
            print!(" {:>9}", fmt(v));
        }
        println!(
            " {:>12.2} {:>8.4}{}",
            e.summary.loglik,
            e.summary.aic_per_obs,
            if e.summary.converged {
                ""
            } else {
                "  (not converged)"
            }
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn structure(
    prices: &Path,
    family: GeneratorFamily,
    raw: bool,
    spec: ArmaAparchSpec,
    tail_fraction: f64,
    seed: u64,
    json: bool,
) -> Result<()> {
    let returns = load_returns(prices)?;
    if returns.dim() < 2 {
        bail!("need at least two tickers for a copula");
    }
    let uniforms = if raw {
        returns.columns()
    } else {
        let config = PipelineConfig {
            family,
            spec,
            tail_fraction,
            seed,
            ..PipelineConfig::default()
        };
        let model = fit_risk_model(&returns.columns(), &config, None)?;
        let fits: Vec<Vec<f64>> = returns
            .columns()
            .iter()
            .zip(&model.assets)
            .map(|(c, a)| {
                hacvar::volatility::aparch_filter(&a.params, c)
                    .map(|o| a.margin.transform(&o.residuals))
            })
            .collect::<hacvar::Result<_>>()?;
        fits
    };
    let kendall = empirical_kendall_matrix(&uniforms)?;
    let est = estimate_structure_with_taus(&kendall, family)?;
    let topology = est.model.topology_string();
    let report = StructureReport {
        labelled: label_topology(&topology, &returns.tickers),
        tickers: returns.tickers.clone(),
        n: returns.len(),
        family,
        source: if raw { "returns" } else { "residuals" },
        structure: est.model.structure_string(),
        topology,
        theta: est.model.theta_vector(),
        node_taus: est.node_taus,
        kendall,
    };
    if json {
        return write_json(&report, None);
    }
    println!("Kendall tau of the {} (n = {})", report.source, report.n);
    print!("{:<10}", "");
    for t in &report.tickers {
        print!(" {t:>9}");
    }
    println!();
    for (t, row) in report.tickers.iter().zip(&report.kendall) {
        print!("{t:<10}");
        for v in row {
            print!(" {v:>9.4}");
        }
        println!();
    }
    println!("tree      {}", report.labelled);
    println!("structure {}", report.structure);
    let theta: Vec<String> = report.theta.iter().map(|v| format!("{v:.4}")).collect();
    println!("theta     {} (root first)", theta.join(" "));
    Ok(())
}

fn simulate(model: &Path, n: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(model).with_context(|| format!("reading {}", model.display()))?;
    let file: ModelFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", model.display()))?;
    if file.tickers.len() != file.model.dim() {
        bail!(
            "model file lists {} tickers for {} assets",
            file.tickers.len(),
            file.model.dim()
        );
    }
    let s = file.model.scenarios(n, seed)?;
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    writeln!(w, "{}", file.tickers.join(","))?;
    for i in 0..s.n {
        let row: Vec<String> = s.row(i).iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn forecast(
    prices: &Path,
    args: &PipelineArgs,
    out: Option<&Path>,
    model_out: Option<&Path>,
) -> Result<()> {
    let returns = load_returns(prices)?;
    let config = args.config();
    let columns = returns.columns();
    let report = match model_out {
        None => pipeline_forecast(&columns, &config)?,
        Some(path) => {
            if returns.len() < hacvar::risk::MIN_OBSERVATIONS {
                bail!(hacvar::Error::InsufficientData(format!(
                    "{} observations, at least {} needed",
                    returns.len(),
                    hacvar::risk::MIN_OBSERVATIONS
                )));
            }
            let model = fit_risk_model(&columns, &config, None)?;
            let scenarios = model.scenarios(config.n_scenarios, config.seed)?;
            let report = risk_report(&model, &scenarios, &config)?;
            let file = ModelFile {
                tickers: returns.tickers.clone(),
                config: config.clone(),
                model,
            };
            write_json(&file, Some(path))?;
            report
        }
    };
    write_json(&report, out)
}

fn backtest(prices: &Path, config: BacktestConfig, out_dir: &Path) -> Result<()> {
    let returns = load_returns(prices)?;
    let run = rolling_backtest(&returns.columns(), &config)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_json(&run.result, Some(&out_dir.join("backtest.json")))?;

    let mut hits = BufWriter::new(File::create(out_dir.join("hits.csv"))?);
    writeln!(hits, "date,var,cvar,realized_return,hit")?;
    let mut plot = BufWriter::new(File::create(out_dir.join("plot.dat"))?);
    writeln!(plot, "# date var realized_return")?;
    for d in &run.days {
        let date = returns.dates[d.index];
        writeln!(
            hits,
            "{date},{:?},{:?},{:?},{}",
            d.forecast_var,
            d.forecast_cvar,
            d.realized_return,
            u8::from(d.hit)
        )?;
        writeln!(plot, "{date} {:?} {:?}", d.forecast_var, d.realized_return)?;
    }
    hits.flush()?;
    plot.flush()?;
    let r = &run.result;
    eprintln!(
        "{} days, {} exceedances ({:.2}%), UC p {:.4}, IND p {:.4}, CC p {:.4}",
        r.n,
        r.x,
        100.0 * r.exceedance_rate,
        r.uc_pvalue,
        r.ind_pvalue,
        r.cc_pvalue
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats { prices, json } => stats(&prices, json),
        Command::Fit {
            prices,
            spec,
            starts,
            seed,
            json,
        } => fit_all(&prices, spec, starts, seed, json),
        Command::Structure {
            prices,
            family,
            raw,
            spec,
            tail_fraction,
            seed,
            json,
        } => structure(&prices, family, raw, spec, tail_fraction, seed, json),
        Command::Simulate {
            model,
            n,
            seed,
            out,
        } => simulate(&model, n, seed, out.as_deref()),
        Command::Forecast {
            prices,
            pipeline,
            out,
            model_out,
        } => forecast(&prices, &pipeline, out.as_deref(), model_out.as_deref()),
        Command::Backtest {
            prices,
            pipeline,
            window,
            refit_every,
            refit_starts,
            eval_days,
            out_dir,
        } => {
            let config = BacktestConfig {
                pipeline: pipeline.config(),
                window,
                refit_every,
                refit_starts,
                eval_days,
            };
            backtest(&prices, config, &out_dir)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<hacvar::Error>()) {
        Some(e) if !e.is_data_error() => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let start = Instant::now();
    let result = run(cli);
    info!("finished in {:.2}s", start.elapsed().as_secs_f64());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
