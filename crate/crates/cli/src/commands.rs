use std::fmt::Write as _;
use std::io::{self, IsTerminal, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use marketacf_core::experiments::{analyze_market, ExperimentConfig, MarketAnalysis, MarketInput, Verdict};
use marketacf_core::marketdata::{
    open_source, parse_candles, parse_trades, write_candles, Bar, FormatDescriptor, SkipReport, TimeFrame,
};
use marketacf_core::synth::{generate, GeneratorKind, GeneratorSpec};
use marketacf_core::text::{format_sig, parse_iso_timestamp};
use marketacf_core::ReturnSeries;
use rayon::prelude::*;

use crate::args::{AnalyzeArgs, BarsArgs, InputFormat, PlotArgs, SynthArgs};
use crate::document::{
    AnalysisReport, ConfigEcho, MarketReport, ResultDocument, Status, TimeFrameReport, FORMAT_VERSION,
};
use crate::manifest::{
    descriptor, ensure_writable_dir, market_from_path, parse_instant, parse_time_frames, RunManifest,
};
use crate::svg;

pub const RESULT_FILE: &str = "result.json";

/// How a command finished when it did not hit a usage or input error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    PartialFailure,
}

/// Skip-report lines shown before the remainder is summarised.
const MAX_REPORTED_ROWS: usize = 20;

/// Writes `contents` to `path` via a temporary file in the same directory and an atomic rename.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// File-name-safe form of a market label (`BTC/USD` -> `BTC_USD`).
pub fn sanitize(name: &str) -> String {
    let s: String =
        name.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' }).collect();
    if s.is_empty() || s.chars().all(|c| c == '.') {
        "market".to_string()
    } else {
        s
    }
}

fn report_skips(label: &str, report: &SkipReport) {
    if report.skipped() == 0 {
        return;
    }
    let mut err = io::stderr().lock();
    let _ = writeln!(err, "{label}: skipped {} malformed row(s)", report.skipped());
    for row in report.rejected.iter().take(MAX_REPORTED_ROWS) {
        let _ = writeln!(err, "  {row}");
    }
    if report.skipped() > MAX_REPORTED_ROWS {
        let _ = writeln!(err, "  ... {} more", report.skipped() - MAX_REPORTED_ROWS);
    }
}

fn load_input(
    path: &Path,
    format: InputFormat,
    descriptor: &FormatDescriptor,
) -> Result<(MarketInput<f64>, SkipReport)> {
    if !path.is_file() {
        bail!("input file not found: {}", path.display());
    }
    let source = open_source(path).with_context(|| format!("cannot open {}", path.display()))?;
    let context = || format!("cannot parse {}", path.display());
    Ok(match format {
        InputFormat::Trades => {
            let parsed = parse_trades(source, descriptor).with_context(context)?;
            (MarketInput::Trades(parsed.items), parsed.report)
        }
        InputFormat::Candles => {
            let parsed = parse_candles(source, descriptor).with_context(context)?;
            (MarketInput::Bars(parsed.items), parsed.report)
        }
    })
}

/// Time frames reachable from the input: all of them for trades, the source frame
/// and every coarser nesting frame for candles.
fn reachable_time_frames(input: &MarketInput<f64>) -> Vec<TimeFrame> {
    match input {
        MarketInput::Trades(_) => TimeFrame::ALL.to_vec(),
        MarketInput::Bars(bars) => match bars.first() {
            Some(b) => TimeFrame::ALL.into_iter().filter(|tf| b.time_frame.nests_in(*tf)).collect(),
            None => Vec::new(),
        },
    }
}

pub fn bars(args: &BarsArgs) -> Result<Outcome> {
    let (format, descriptor) = descriptor(&args.source, &Default::default(), InputFormat::Trades)?;
    let start = args.source.start.as_deref().map(parse_instant).transpose()?;
    let end = args.source.end.as_deref().map(parse_instant).transpose()?;
    let (input, report) = load_input(&args.input, format, &descriptor)?;
    report_skips(&args.input.display().to_string(), &report);
    let input = input.restrict(start, end);

    let time_frames =
        if args.time_frames.is_empty() { reachable_time_frames(&input) } else { parse_time_frames(&args.time_frames)? };
    let stem = sanitize(&market_from_path(&args.input));
    let mut outputs: Vec<(PathBuf, Vec<Bar<f64>>)> = Vec::new();
    for tf in time_frames {
        let bars = input.bars(tf).with_context(|| format!("cannot build {tf} bars"))?;
        outputs.push((args.out.join(format!("{stem}_{tf}.csv")), bars));
    }
    ensure_writable_dir(&args.out)?;
    let mut stdout = io::stdout().lock();
    for (path, bars) in outputs {
        let mut buf = Vec::new();
        write_candles(&bars, &mut buf)?;
        write_atomic(&path, &buf)?;
        writeln!(stdout, "{} ({} bars)", path.display(), bars.len())?;
    }
    Ok(Outcome::Success)
}

struct LoadedMarket {
    market_id: String,
    source: String,
    skipped: usize,
    input: MarketInput<f64>,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<Outcome> {
    let manifest = RunManifest::resolve(args)?;
    manifest.prepare_output()?;

    let mut loaded = Vec::with_capacity(manifest.markets.len());
    for m in &manifest.markets {
        let (input, report) = load_input(&m.path, manifest.format, &manifest.descriptor)?;
        report_skips(&m.market_id, &report);
        loaded.push(LoadedMarket {
            market_id: m.market_id.clone(),
            source: m.path.display().to_string(),
            skipped: report.skipped(),
            input: input.restrict(m.start, m.end),
        });
    }

    let analyses: Vec<MarketAnalysis<f64>> = loaded
        .par_iter()
        .map(|m| {
            let cfg = ExperimentConfig { market_id: m.market_id.clone(), ..manifest.config.clone() };
            analyze_market(&m.input, &cfg)
        })
        .collect::<Result<_, _>>()?;

    let mut document = ResultDocument {
        format_version: FORMAT_VERSION,
        config: ConfigEcho::from(&manifest.config),
        markets: Vec::with_capacity(loaded.len()),
    };
    let mut failures = 0;
    for (m, analysis) in loaded.iter().zip(&analyses) {
        let mut time_frames = Vec::with_capacity(analysis.results.len());
        for (tf, result) in &analysis.results {
            let report = result
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|a| AnalysisReport::from_analysis(a, manifest.config.alpha).map_err(|e| e.to_string()));
            time_frames.push(match report {
                Ok(a) => TimeFrameReport { time_frame: *tf, status: Status::Ok, error: None, analysis: Some(a) },
                Err(e) => {
                    failures += 1;
                    TimeFrameReport { time_frame: *tf, status: Status::Error, error: Some(e), analysis: None }
                }
            });
        }
        document.markets.push(MarketReport {
            market: m.market_id.clone(),
            source: m.source.clone(),
            skipped_rows: m.skipped,
            time_frames,
        });
    }

    write_atomic(&manifest.out.join(RESULT_FILE), document.to_json()?.as_bytes())?;
    for analysis in &analyses {
        for (tf, result) in &analysis.results {
            if let Ok(a) = result {
                let base = format!("{}_{tf}", sanitize(&analysis.market_id));
                write_atomic(&manifest.out.join(format!("{base}_returns.csv")), &returns_csv(&a.series)?)?;
            }
        }
    }
    for (market, tf, report) in document.analyses() {
        let base = format!("{}_{tf}", sanitize(market));
        for (suffix, table) in tables(report) {
            write_atomic(&manifest.out.join(format!("{base}_{suffix}.csv")), table.as_bytes())?;
        }
    }
    if manifest.plots {
        for (path, svg) in render_charts(&document, &manifest.out)? {
            write_atomic(&path, svg.as_bytes())?;
        }
    }

    print_summary(&document)?;
    Ok(if failures > 0 { Outcome::PartialFailure } else { Outcome::Success })
}

fn returns_csv(series: &ReturnSeries) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    Ok(buf)
}

/// The per-experiment CSV tables for one analysed time frame.
pub fn tables(report: &AnalysisReport) -> [(&'static str, String); 3] {
    let mut acf = String::from("lag,r,band,bonferroni_band\n");
    for (i, r) in report.acf.coefficients.iter().enumerate() {
        let _ = writeln!(
            acf,
            "{},{},{},{}",
            i + 1,
            format_sig(*r),
            format_sig(report.acf.band_half_width),
            format_sig(report.acf.bonferroni_band)
        );
    }
    let lb = &report.ljung_box;
    let mut ljung_box = String::from("lag,q,p_value,critical_value\n");
    for (i, ((q, p), c)) in lb.q_values.iter().zip(&lb.p_values).zip(&lb.critical_values).enumerate() {
        let _ = writeln!(ljung_box, "{},{},{},{}", i + 1, format_sig(*q), format_sig(*p), format_sig(*c));
    }
    let mut rolling = String::from("window_end,r1\n");
    for (end, r1) in report.rolling.window_ends.iter().zip(&report.rolling.r1) {
        let value = r1.map(format_sig).unwrap_or_default();
        let _ = writeln!(rolling, "{end},{value}");
    }
    [("acf", acf), ("ljung_box", ljung_box), ("rolling", rolling)]
}

/// All charts for a document, keyed by output path. Nothing is written here.
pub fn render_charts(document: &ResultDocument, out: &Path) -> Result<Vec<(PathBuf, String)>> {
    let alpha = document.config.alpha;
    let mut charts = Vec::new();
    for (market, tf, report) in document.analyses() {
        let base = format!("{}_{tf}", sanitize(market));
        charts.push((
            out.join(format!("{base}_acf.svg")),
            svg::acf_chart(
                &format!("Autocorrelation of {market} ({tf})"),
                &report.acf.coefficients,
                report.acf.band_half_width,
            ),
        ));
        charts.push((
            out.join(format!("{base}_ljung_box.svg")),
            svg::ljung_box_chart(&format!("Ljung-Box test on {market} ({tf})"), &report.ljung_box.p_values, alpha),
        ));
        let ends = report
            .rolling
            .window_ends
            .iter()
            .map(|s| parse_iso_timestamp(s).ok_or_else(|| anyhow!("bad window end timestamp `{s}`")))
            .collect::<Result<Vec<_>>>()?;
        charts.push((
            out.join(format!("{base}_rolling.svg")),
            svg::rolling_chart(&format!("Rolling autocorrelation on {market} ({tf})"), &ends, &report.rolling.r1),
        ));
    }
    Ok(charts)
}

fn use_color() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && io::stdout().is_terminal()
}

fn print_summary(document: &ResultDocument) -> Result<()> {
    let color = use_color();
    let paint = |code: &str, text: &str| if color { format!("\x1b[{code}m{text}\x1b[0m") } else { text.to_string() };
    let flag = |v: bool| if v { "violated" } else { "ok" };
    let mut out = io::stdout().lock();
    for market in &document.markets {
        writeln!(out, "{}", market.market)?;
        for t in &market.time_frames {
            match (&t.analysis, &t.error) {
                (Some(a), _) => {
                    let v = &a.verdict;
                    let text = v.verdict.to_string();
                    let verdict = match v.verdict {
                        Verdict::Rejected => paint("31", &text),
                        Verdict::Inconclusive => paint("33", &text),
                        Verdict::NotRejected => paint("32", &text),
                    };
                    writeln!(
                        out,
                        "  {:<3} {verdict} (acf {}, ljung-box {}, rolling {}; min p={}, r1={})",
                        t.time_frame.to_string(),
                        flag(v.acf_condition_violated),
                        flag(v.lb_condition_violated),
                        flag(v.rolling_condition_violated),
                        format_sig(v.min_p_value),
                        a.acf.coefficients.first().map(|r| format_sig(*r)).unwrap_or_default(),
                    )?;
                }
                (None, error) => {
                    let msg = error.as_deref().unwrap_or("unknown failure");
                    writeln!(out, "  {:<3} {}: {msg}", t.time_frame.to_string(), paint("31", "failed"))?;
                }
            }
        }
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<Outcome> {
    let kind: GeneratorKind = args.kind.parse()?;
    let time_frame: TimeFrame = args.time_frame.parse()?;
    let spec = GeneratorSpec { kind, n: args.n, seed: args.seed, phi: args.phi, sigma: args.sigma, time_frame };
    spec.validate()?;
    let series = generate::<f64>(&spec)?;
    let echo = format!(
        "synth kind={} n={} seed={} phi={} sigma={} tf={}",
        spec.kind,
        spec.n,
        spec.seed,
        format_sig(spec.phi),
        format_sig(spec.sigma),
        spec.time_frame
    );
    let csv = returns_csv(&series)?;
    match &args.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            }
            write_atomic(path, &csv)?;
            println!("{echo} -> {}", path.display());
        }
        None => {
            eprintln!("{echo}");
            io::stdout().lock().write_all(&csv)?;
        }
    }
    Ok(Outcome::Success)
}

pub fn read_document(path: &Path) -> Result<ResultDocument> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read result document {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a valid result document", path.display()))
}

pub fn plot(args: &PlotArgs) -> Result<Outcome> {
    let document = read_document(&args.input)?;
    if document.analyses().next().is_none() {
        bail!("result document {} contains no analysed time frames", args.input.display());
    }
    let charts = render_charts(&document, &args.out)?;
    ensure_writable_dir(&args.out)?;
    for (path, svg) in &charts {
        write_atomic(path, svg.as_bytes())?;
        println!("{}", path.display());
    }
    Ok(Outcome::Success)
}
