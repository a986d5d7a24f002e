//! Run manifest: a flat `key = value` file merged with command-line flags
//! (flags win over the file, the file wins over defaults).
//!
//! Recognised keys:
//!
//! ```text
//! input.<MARKET> = path      # or `input = path`, market taken from the file stem
//! format = trades|candles
//! candle_tf = 5m             # optional, inferred otherwise
//! timestamp_unit = auto|s|ms
//! tf = 5m, 1h, 1d, 1w
//! max_lag = 30
//! alpha = 0.05
//! window_days = 365
//! step = 1
//! returns = log|simple
//! out = results
//! plots = true
//! reference_ranges = false
//! start = 2016-01-01         # also start.<MARKET>, end, end.<MARKET>
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use marketacf_core::experiments::{reference_range, ExperimentConfig};
use marketacf_core::marketdata::{FormatDescriptor, TimeFrame, TimestampUnit};
use marketacf_core::series::ReturnKind;
use marketacf_core::text::parse_iso_timestamp;

use crate::args::{AnalyzeArgs, InputArgs, InputFormat, ReturnsArg, UnitArg};

const GLOBAL_KEYS: [&str; 15] = [
    "input",
    "format",
    "candle_tf",
    "timestamp_unit",
    "tf",
    "max_lag",
    "alpha",
    "window_days",
    "step",
    "returns",
    "out",
    "plots",
    "reference_ranges",
    "start",
    "end",
];
const MARKET_KEYS: [&str; 3] = ["input.", "start.", "end."];

#[derive(Debug, Clone, PartialEq)]
pub struct MarketSource {
    pub market_id: String,
    pub path: PathBuf,
    pub start: Option<i64>,
    pub end: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub markets: Vec<MarketSource>,
    pub format: InputFormat,
    pub descriptor: FormatDescriptor,
    /// Shared experiment settings; `market_id` is filled in per market.
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub plots: bool,
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| anyhow!("manifest line {}: expected `key = value`", i + 1))?;
        let key = key.trim().to_string();
        let known = GLOBAL_KEYS.contains(&key.as_str())
            || MARKET_KEYS.iter().any(|p| key.strip_prefix(p).is_some_and(|m| !m.is_empty()));
        if !known {
            bail!("manifest line {}: unknown key `{key}`", i + 1);
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            bail!("manifest line {}: duplicate key `{key}`", i + 1);
        }
    }
    Ok(map)
}

pub fn parse_time_frames(items: &[String]) -> Result<Vec<TimeFrame>> {
    let mut out: Vec<TimeFrame> = Vec::new();
    for item in items.iter().flat_map(|s| s.split(',')).map(str::trim).filter(|s| !s.is_empty()) {
        let tf: TimeFrame = item.parse()?;
        if !out.contains(&tf) {
            out.push(tf);
        }
    }
    out.sort();
    Ok(out)
}

pub fn parse_instant(s: &str) -> Result<i64> {
    parse_iso_timestamp(s).ok_or_else(|| anyhow!("cannot parse `{s}` as an ISO-8601 date/time"))
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("`{key}` expects true or false, got `{s}`"),
    }
}

fn parse_format(s: &str) -> Result<InputFormat> {
    match s.to_ascii_lowercase().as_str() {
        "trades" => Ok(InputFormat::Trades),
        "candles" => Ok(InputFormat::Candles),
        _ => bail!("unknown input format `{s}` (expected trades or candles)"),
    }
}

fn parse_unit(s: &str) -> Result<TimestampUnit> {
    match s.to_ascii_lowercase().as_str() {
        "auto" => Ok(TimestampUnit::Auto),
        "s" | "seconds" => Ok(TimestampUnit::Seconds),
        "ms" | "milliseconds" => Ok(TimestampUnit::Milliseconds),
        _ => bail!("unknown timestamp unit `{s}` (expected auto, s or ms)"),
    }
}

pub fn unit_from_arg(arg: UnitArg) -> TimestampUnit {
    match arg {
        UnitArg::Auto => TimestampUnit::Auto,
        UnitArg::S => TimestampUnit::Seconds,
        UnitArg::Ms => TimestampUnit::Milliseconds,
    }
}

/// Market label derived from a file name: `btcusd_5m.csv.gz` -> `btcusd_5m`.
pub fn market_from_path(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut stem = name.as_str();
    for ext in [".gz", ".csv"] {
        if stem.len() > ext.len() && stem.to_ascii_lowercase().ends_with(ext) {
            stem = &stem[..stem.len() - ext.len()];
        }
    }
    stem.to_string()
}

/// Splits `MARKET=PATH`; a bare path names its market after the file stem.
pub fn parse_input_spec(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((market, path)) if !market.is_empty() && !market.contains(['/', '\\']) => {
            (market.to_string(), PathBuf::from(path))
        }
        _ => {
            let path = PathBuf::from(spec);
            (market_from_path(&path), path)
        }
    }
}

/// Input options shared by `bars` and `analyze`, merged with manifest values.
pub fn descriptor(
    source: &InputArgs,
    file: &BTreeMap<String, String>,
    default_format: InputFormat,
) -> Result<(InputFormat, FormatDescriptor)> {
    let format = match (source.format, file.get("format")) {
        (Some(f), _) => f,
        (None, Some(s)) => parse_format(s)?,
        (None, None) => default_format,
    };
    let timestamp_unit = match (source.timestamp_unit, file.get("timestamp_unit")) {
        (Some(u), _) => unit_from_arg(u),
        (None, Some(s)) => parse_unit(s)?,
        (None, None) => TimestampUnit::Auto,
    };
    let time_frame = match source.candle_tf.as_deref().or(file.get("candle_tf").map(String::as_str)) {
        Some(s) => Some(s.parse::<TimeFrame>()?),
        None => None,
    };
    Ok((format, FormatDescriptor { timestamp_unit, time_frame }))
}

impl RunManifest {
    /// Merges flags, the optional manifest file and defaults, then validates paths.
    pub fn resolve(args: &AnalyzeArgs) -> Result<Self> {
        let (file, base) = match &args.manifest {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read manifest {}", path.display()))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (parse_key_values(&text).with_context(|| format!("in manifest {}", path.display()))?, base)
            }
            None => (BTreeMap::new(), PathBuf::new()),
        };
        let from_file = |key: &str| file.get(key).map(String::as_str);
        let relative = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };

        let mut config = ExperimentConfig::default();
        let tf_items = if args.time_frames.is_empty() {
            from_file("tf").map(|s| vec![s.to_string()]).unwrap_or_default()
        } else {
            args.time_frames.clone()
        };
        if !tf_items.is_empty() {
            config.time_frames = parse_time_frames(&tf_items)?;
        }
        if let Some(v) = args.max_lag.map(Ok).or(from_file("max_lag").map(|s| s.parse::<usize>())) {
            config.max_lag = v.context("max_lag must be a non-negative integer")?;
        }
        if let Some(v) = args.alpha.map(Ok).or(from_file("alpha").map(|s| s.parse::<f64>())) {
            config.alpha = v.context("alpha must be a number")?;
        }
        if let Some(v) = args.window_days.map(Ok).or(from_file("window_days").map(|s| s.parse::<u32>())) {
            config.rolling_window_days = v.context("window_days must be a non-negative integer")?;
        }
        if let Some(v) = args.step.map(Ok).or(from_file("step").map(|s| s.parse::<usize>())) {
            config.rolling_step = v.context("step must be a non-negative integer")?;
        }
        config.return_kind = match (args.returns, from_file("returns")) {
            (Some(ReturnsArg::Log), _) => ReturnKind::Log,
            (Some(ReturnsArg::Simple), _) => ReturnKind::Simple,
            (None, Some(s)) => s.parse()?,
            (None, None) => ReturnKind::Log,
        };
        config.validate()?;

        let (format, descriptor) = descriptor(&args.source, &file, InputFormat::Candles)?;
        let plots = !args.no_plots && from_file("plots").map(|s| parse_bool("plots", s)).transpose()?.unwrap_or(true);
        let reference = args.reference_ranges
            || from_file("reference_ranges").map(|s| parse_bool("reference_ranges", s)).transpose()?.unwrap_or(false);
        let out = match (&args.out, from_file("out")) {
            (Some(p), _) => p.clone(),
            (None, Some(s)) => relative(s),
            (None, None) => PathBuf::from("results"),
        };

        let mut inputs: Vec<(String, PathBuf)> = Vec::new();
        if args.inputs.is_empty() {
            for (key, value) in &file {
                if key == "input" {
                    let path = relative(value);
                    inputs.push((market_from_path(&path), path));
                } else if let Some(market) = key.strip_prefix("input.") {
                    inputs.push((market.to_string(), relative(value)));
                }
            }
        } else {
            inputs.extend(args.inputs.iter().map(|s| parse_input_spec(s)));
        }
        if inputs.is_empty() {
            bail!("no input files given (use --input or an `input` manifest key)");
        }

        let flag_start = args.source.start.as_deref().map(parse_instant).transpose()?;
        let flag_end = args.source.end.as_deref().map(parse_instant).transpose()?;
        let mut markets = Vec::with_capacity(inputs.len());
        for (market_id, path) in inputs {
            if !path.is_file() {
                bail!("input file not found: {}", path.display());
            }
            let pick = |flag: Option<i64>, key: &str, idx: usize| -> Result<Option<i64>> {
                if flag.is_some() {
                    return Ok(flag);
                }
                if let Some(s) = from_file(&format!("{key}.{market_id}")).or(from_file(key)) {
                    return parse_instant(s).map(Some);
                }
                Ok(reference.then(|| reference_range(&market_id)).flatten().map(|r| if idx == 0 { r.0 } else { r.1 }))
            };
            let start = pick(flag_start, "start", 0)?;
            let end = pick(flag_end, "end", 1)?;
            markets.push(MarketSource { market_id, path, start, end });
        }
        markets.sort_by(|a, b| a.market_id.cmp(&b.market_id));
        if let Some(w) = markets.windows(2).find(|w| w[0].market_id == w[1].market_id) {
            bail!("market `{}` given more than once", w[0].market_id);
        }

        Ok(Self { markets, format, descriptor, config, out, plots })
    }

    /// Creates the output directory and checks that it accepts new files.
    pub fn prepare_output(&self) -> Result<()> {
        ensure_writable_dir(&self.out)
    }
}

pub fn ensure_writable_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("output directory {} is not writable", dir.display()))?;
    Ok(())
}
