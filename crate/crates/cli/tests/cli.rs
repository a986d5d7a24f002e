use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use marketacf_cli::document::{ConfigEcho, ResultDocument};
use marketacf_core::experiments::ExperimentConfig;
use marketacf_core::marketdata::{
    aggregate_trades, open_source, parse_candles, parse_trades, write_candles, FormatDescriptor, TimeFrame,
};
use marketacf_core::series::ReturnSeries;
use marketacf_core::synth::{bars_from_returns, generate, GeneratorSpec};
use marketacf_core::Bar;

/// White-noise seed whose daily and weekly analyses violate no condition.
const WHITE_NOISE_SEED: u64 = 3;

fn marketacf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_marketacf")).args(args).env("NO_COLOR", "1").output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Daily candle file whose log returns are the series from `spec`.
fn candle_file(dir: &Path, name: &str, spec: &GeneratorSpec) -> PathBuf {
    let series = generate::<f64>(spec).unwrap();
    let bars = bars_from_returns(&series, 100.0);
    let path = dir.join(name);
    write_candles(&bars, std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn read_document(dir: &Path) -> ResultDocument {
    serde_json::from_str(&std::fs::read_to_string(dir.join("result.json")).unwrap()).unwrap()
}

/// Plain two-pass lag-1 autocorrelation.
fn lag1(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let den: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let num: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    num / den
}

#[test]
fn missing_input_is_a_usage_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_trades.csv");
    for args in [
        vec!["bars", "--input", p(&missing), "--out", p(dir.path())],
        vec!["analyze", "--input", p(&missing), "--out", p(dir.path())],
    ] {
        let out = marketacf(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(stderr(&out).contains("no_such_trades.csv"), "{}", stderr(&out));
    }
}

#[test]
fn zero_max_lag_is_rejected_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let input = candle_file(dir.path(), "wn.csv", &GeneratorSpec::white_noise(400, 1));
    let out_dir = dir.path().join("out");
    let out = marketacf(&["analyze", "--input", p(&input), "--max-lag", "0", "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("max_lag"), "{}", stderr(&out));
    assert!(!out_dir.join("result.json").exists());
}

#[test]
fn unknown_manifest_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("run.conf");
    std::fs::write(&manifest, "input = x.csv\nmax_lags = 3\n").unwrap();
    let out = marketacf(&["analyze", "--manifest", p(&manifest)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("max_lags"));
}

#[test]
fn failing_time_frame_does_not_stop_the_others() {
    let dir = tempfile::tempdir().unwrap();
    let input = candle_file(dir.path(), "short.csv", &GeneratorSpec::white_noise(150, 2));
    let out_dir = dir.path().join("out");
    let out = marketacf(&[
        "analyze",
        "--input",
        p(&input),
        "--tf",
        "1d",
        "--tf",
        "1w",
        "--window-days",
        "30",
        "--out",
        p(&out_dir),
        "--no-plots",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let doc = read_document(&out_dir);
    let tfs = &doc.markets[0].time_frames;
    assert_eq!(tfs.len(), 2);
    assert!(tfs[0].analysis.is_some() && tfs[0].error.is_none());
    assert!(tfs[1].analysis.is_none() && tfs[1].error.is_some());
    assert!(out_dir.join("short_1d_acf.csv").exists());
    assert!(!out_dir.join("short_1w_acf.csv").exists());
    assert!(stdout(&out).contains("failed"));
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out =
            marketacf(&["synth", "--kind", "ar1", "--phi", "0.6", "--n", "1000", "--seed", "7", "--out", p(path)]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(stdout(&out).contains("kind=ar1 n=1000 seed=7 phi=0.6"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let piped = marketacf(&["synth", "--kind", "ar1", "--phi", "0.6", "--n", "1000", "--seed", "7"]);
    assert_eq!(piped.stdout, std::fs::read(&a).unwrap());
    assert!(stderr(&piped).contains("kind=ar1"));
}

#[test]
fn synth_rejects_explosive_phi() {
    let out = marketacf(&["synth", "--kind", "ar1", "--phi", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let out = marketacf(&["synth", "--kind", "ar1", "--phi", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_white_noise_has_small_lag1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wn.csv");
    let out = marketacf(&["synth", "--kind", "white", "--n", "100000", "--seed", "1", "--out", p(&path)]);
    assert!(out.status.success());
    let series = ReturnSeries::read_csv(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(series.len(), 100_000);
    let r1 = lag1(series.values());
    assert!(r1.abs() < 4.0 / (100_000f64).sqrt(), "r1 = {r1}");
}

#[test]
fn bars_match_direct_aggregation() {
    let dir = tempfile::tempdir().unwrap();
    let trades_path = dir.path().join("trades.csv");
    let mut csv = String::from("timestamp,price,amount\n");
    // Deliberately unsorted, with a second-resolution gap and a bad row.
    let mut state = 12345u64;
    for i in 0..500u64 {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let t = 1_560_000_000_000 + ((i * 7919) % 500) * 37_000 + (state >> 50);
        let price = 100.0 + (state >> 40) as f64 / 1e7;
        csv.push_str(&format!("{t},{price:.4},{}\n", 0.5 + (i % 7) as f64));
    }
    csv.push_str("1560000000000,-3,1\n");
    std::fs::write(&trades_path, &csv).unwrap();

    let out = marketacf(&["bars", "--input", p(&trades_path), "--tf", "5m", "--out", p(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("reason=non_positive_price"));

    let written = parse_candles::<f64, _>(
        open_source(&dir.path().join("trades_5m.csv")).unwrap(),
        &FormatDescriptor { time_frame: Some(TimeFrame::M5), ..Default::default() },
    )
    .unwrap();
    assert!(written.report.rejected.is_empty());
    let trades = parse_trades::<f64, _>(csv.as_bytes(), &FormatDescriptor::default()).unwrap().items;
    let expected: Vec<Bar> = aggregate_trades(&trades, TimeFrame::M5).unwrap();
    assert_eq!(written.items.len(), expected.len());
    for (w, e) in written.items.iter().zip(&expected) {
        assert!(w.is_consistent());
        assert_eq!((w.open_time, w.trade_count), (e.open_time, e.trade_count));
        for (a, b) in [(w.open, e.open), (w.high, e.high), (w.low, e.low), (w.close, e.close), (w.volume, e.volume)] {
            assert!((a - b).abs() <= 1e-8 * b.abs(), "{a} vs {b}");
        }
    }
    assert!(written.items.windows(2).all(|w| w[0].open_time < w[1].open_time));
}

#[test]
fn three_days_make_one_weekly_bar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("week.csv");
    // Monday 2024-01-01 00:00 UTC, hourly trades for three days, timestamps in seconds.
    let mut csv = String::from("timestamp,price,amount\n");
    for h in 0..72 {
        csv.push_str(&format!("{},{},1\n", 1_704_067_200 + h * 3600, 100 + h));
    }
    std::fs::write(&path, csv).unwrap();
    let out = marketacf(&["bars", "--input", p(&path), "--tf", "1W", "--out", p(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("week_1w.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 2, "{text}");
    assert_eq!(rows[1], "2024-01-01T00:00:00Z,100,171,100,171,72,72");
}

#[test]
fn white_noise_is_not_rejected() {
    let dir = tempfile::tempdir().unwrap();
    candle_file(dir.path(), "noise.csv", &GeneratorSpec::white_noise(3000, WHITE_NOISE_SEED).with_sigma(0.01));
    let out_dir = dir.path().join("out");
    let manifest = dir.path().join("run.conf");
    std::fs::write(&manifest, "input.NOISE = noise.csv\ntf = 1d, 1w\nout = out\nplots = false\n").unwrap();
    let out = marketacf(&["analyze", "--manifest", p(&manifest)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = read_document(&out_dir);
    let verdicts: Vec<_> = doc.analyses().map(|(_, tf, a)| (tf, a.verdict.verdict.to_string())).collect();
    assert_eq!(verdicts.len(), 2);
    for (tf, v) in &verdicts {
        assert_eq!(v, "EMH not rejected", "{tf}");
    }
    assert_eq!(stdout(&out).matches("EMH not rejected").count(), 2);
    assert!(!out_dir.join("NOISE_1d_acf.svg").exists());
    for suffix in ["acf", "ljung_box", "rolling", "returns"] {
        assert!(out_dir.join(format!("NOISE_1d_{suffix}.csv")).exists(), "{suffix}");
    }
}

#[test]
fn flags_override_manifest_values() {
    let dir = tempfile::tempdir().unwrap();
    candle_file(dir.path(), "noise.csv", &GeneratorSpec::white_noise(800, 5));
    let manifest = dir.path().join("run.conf");
    std::fs::write(&manifest, "input = noise.csv\ntf = 1d\nmax_lag = 12\nwindow_days = 100\nplots = false\n").unwrap();
    let out_dir = dir.path().join("flagged");
    let out = marketacf(&["analyze", "--manifest", p(&manifest), "--max-lag", "7", "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = read_document(&out_dir);
    assert_eq!(doc.config.max_lag, 7);
    assert_eq!(doc.config.rolling_window_days, 100);
    assert_eq!(doc.markets[0].market, "noise");
    let (_, _, a) = doc.analyses().next().unwrap();
    assert_eq!(a.acf.coefficients.len(), 7);
    assert_eq!(a.rolling.window_len, 100);
}

#[test]
fn plot_renders_bars_bands_and_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let input = candle_file(dir.path(), "ar.csv", &GeneratorSpec::ar1(0.5, 2000, 9).with_sigma(0.01));
    let out_dir = dir.path().join("out");
    let out = marketacf(&["analyze", "--input", p(&input), "--tf", "1d", "--out", p(&out_dir), "--no-plots"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = read_document(&out_dir);
    let (_, _, a) = doc.analyses().next().unwrap();
    assert!(a.ljung_box.p_values.iter().all(|p| *p < 0.05));

    let plots = dir.path().join("plots");
    let out = marketacf(&["plot", "--input", p(&out_dir.join("result.json")), "--out", p(&plots)]);
    assert!(out.status.success(), "{}", stderr(&out));

    let acf = std::fs::read_to_string(plots.join("ar_1d_acf.svg")).unwrap();
    assert_eq!(acf.matches(r#"class="bar""#).count(), 30);
    assert_eq!(acf.matches(r#"class="band""#).count(), 2);
    assert!(acf.contains("Autocorrelation of ar (1d)"));

    let lb = std::fs::read_to_string(plots.join("ar_1d_ljung_box.svg")).unwrap();
    let threshold_line = lb.lines().find(|l| l.contains(r#"class="threshold""#)).unwrap();
    let threshold_y: f64 = threshold_line.split("y1=\"").nth(1).unwrap().split('"').next().unwrap().parse().unwrap();
    let poly = lb.lines().find(|l| l.contains(r#"class="pvalues""#)).unwrap();
    let points = poly.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    let ys: Vec<f64> = points.split(' ').map(|pt| pt.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(ys.len(), 30);
    // SVG y grows downwards: below the threshold on the chart means a larger y.
    assert!(ys.iter().all(|y| *y > threshold_y));

    let rolling = std::fs::read_to_string(plots.join("ar_1d_rolling.svg")).unwrap();
    assert!(rolling.contains(r#"class="r1""#) && rolling.contains(r#"class="zero""#));
}

#[test]
fn empty_document_is_rejected_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let doc = ResultDocument {
        format_version: 1,
        config: ConfigEcho::from(&ExperimentConfig::default()),
        markets: Vec::new(),
    };
    let path = dir.path().join("empty.json");
    std::fs::write(&path, doc.to_json().unwrap()).unwrap();
    let plots = dir.path().join("plots");
    let out = marketacf(&["plot", "--input", p(&path), "--out", p(&plots)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!plots.exists());

    std::fs::write(&path, "{ not json").unwrap();
    let out = marketacf(&["plot", "--input", p(&path), "--out", p(&plots)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!plots.exists());
}
