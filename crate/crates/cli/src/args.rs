use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "marketacf", version, about = "Autocorrelation-based market efficiency analysis of price bars")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate trades (or resample candles) into 5m/1h/1d/1w bar files.
    Bars(BarsArgs),
    /// Run the autocorrelation, Ljung-Box and rolling experiments.
    Analyze(AnalyzeArgs),
    /// Write a synthetic return series.
    Synth(SynthArgs),
    /// Render SVG charts from a result document.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Trades,
    Candles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitArg {
    Auto,
    S,
    Ms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReturnsArg {
    Log,
    Simple,
}

/// Options describing how input files are read.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Input file format.
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    /// Time frame of candle input; inferred from the row spacing when omitted.
    #[arg(long, value_name = "TF")]
    pub candle_tf: Option<String>,
    /// Unit of numeric timestamps.
    #[arg(long, value_enum)]
    pub timestamp_unit: Option<UnitArg>,
    /// Drop data before this ISO-8601 date/time.
    #[arg(long)]
    pub start: Option<String>,
    /// Drop data at or after this ISO-8601 date/time.
    #[arg(long)]
    pub end: Option<String>,
}

#[derive(Debug, Args)]
pub struct BarsArgs {
    /// Trade or candle CSV (optionally .gz).
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub source: InputArgs,
    /// Time frame to emit (5m, 1h, 1d, 1w); repeatable. Defaults to every reachable one.
    #[arg(long = "tf", value_name = "TF")]
    pub time_frames: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Input file, optionally as MARKET=PATH; repeatable. Replaces the manifest's inputs.
    #[arg(long = "input", value_name = "[MARKET=]PATH")]
    pub inputs: Vec<String>,
    /// Flat key-value run manifest; flags override its values.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub source: InputArgs,
    /// Time frame to analyze; repeatable.
    #[arg(long = "tf", value_name = "TF")]
    pub time_frames: Vec<String>,
    /// Largest autocorrelation / Ljung-Box lag.
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Rolling window length in days.
    #[arg(long)]
    pub window_days: Option<u32>,
    /// Rolling window step in bars.
    #[arg(long)]
    pub step: Option<usize>,
    #[arg(long, value_enum)]
    pub returns: Option<ReturnsArg>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip SVG rendering.
    #[arg(long)]
    pub no_plots: bool,
    /// Restrict known markets (BTCUSD, ETHUSD, ETHBTC, XBTUSD) to their reference sample periods.
    #[arg(long)]
    pub reference_ranges: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator: white, ar1 or random-walk.
    #[arg(long, default_value = "white")]
    pub kind: String,
    /// Number of returns.
    #[arg(long, default_value_t = 1_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// AR(1) coefficient.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Spacing of the synthetic timestamps.
    #[arg(long = "tf", default_value = "1d")]
    pub time_frame: String,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Result document written by `analyze`.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}
