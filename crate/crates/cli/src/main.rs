use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use prachjam::campaign::{
    read_records, run_campaign, summarize, summary_json, write_outputs, CampaignConfig,
    CampaignError,
};
use prachjam::detector::{calibrate_threshold, measure_false_alarm_rate, DEFAULT_TARGET_FAR};
use prachjam::par::Execution;
use prachjam::prach::{jammer_resource_budget, occasions_in_frame, occupancy_breakdown};
use prachjam::rng::{stream, tag};
use prachjam::zc::{cyclic_shift, generate_zc, periodic_xcorr};
use serde_json::Value;

#[derive(Parser, Debug)]
#[command(
    name = "prachjam",
    version,
    about = "PRACH smart-jamming link simulator"
)]
struct Cli {
    /// Campaign configuration (JSON). Defaults apply to absent fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a configuration value by dotted path, e.g. `spectrum.snr_db=-10`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0, global = true)]
    threads: usize,
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print a ZC sequence, or its periodic correlation, as CSV.
    Zc {
        #[arg(long, default_value_t = 1)]
        root: usize,
        #[arg(long, default_value_t = 139)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        shift: usize,
        /// Emit the normalized correlation against this root instead.
        #[arg(long)]
        correlate_with: Option<usize>,
    },
    /// Print the PRACH resource occupancy and the jammer budget.
    Occupancy,
    /// Run a campaign and write records.jsonl, summary.json and preambles.csv.
    Simulate,
    /// Recompute summary.json from an existing records file.
    Metrics {
        /// Records file; defaults to `<out>/records.jsonl`.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Calibrate the detector threshold for a noise-only false-alarm rate.
    Calibrate {
        #[arg(long, default_value_t = DEFAULT_TARGET_FAR)]
        target_far: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Re-measure the false-alarm rate on this many fresh trials.
        #[arg(long, default_value_t = 0)]
        verify: u64,
    },
}

/// Errors the user fixes by editing the configuration.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn apply_override(root: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("--set {spec}: expected KEY=VALUE")))?;
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| ConfigError(format!("--set {key}: `{part}` is not inside an object")))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), parse_value(raw));
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<CampaignConfig, ConfigError> {
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| ConfigError(format!("{}:{}: {e}", p.display(), e.line())))?
        }
        None => serde_json::to_value(CampaignConfig::default()).expect("serializable"),
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let origin = path.map_or("<defaults>".to_string(), |p| p.display().to_string());
    serde_path_to_error::deserialize(value)
        .map_err(|e| ConfigError(format!("{origin}: field `{}`: {}", e.path(), e.inner())))
}

fn checked(cfg: CampaignConfig) -> anyhow::Result<CampaignConfig> {
    match cfg.validate() {
        Err(CampaignError::Config(msg)) => Err(ConfigError(msg).into()),
        other => other.map(|_| cfg).map_err(Into::into),
    }
}

fn zc_csv(
    root: usize,
    length: usize,
    shift: usize,
    other: Option<usize>,
) -> anyhow::Result<String> {
    let seq = cyclic_shift(&generate_zc(root, length)?, shift)?;
    let mut out = String::new();
    match other {
        None => {
            out.push_str("index,re,im,magnitude\n");
            for (k, x) in seq.samples().iter().enumerate() {
                writeln!(out, "{k},{:.17e},{:.17e},{:.17e}", x.re, x.im, x.norm())?;
            }
        }
        Some(r) => {
            let b = generate_zc(r, length)?;
            let profile = periodic_xcorr(seq.samples(), b.samples(), true)?;
            out.push_str("lag,re,im,magnitude\n");
            for (k, x) in profile.values.iter().enumerate() {
                writeln!(out, "{k},{:.17e},{:.17e},{:.17e}", x.re, x.im, x.norm())?;
            }
        }
    }
    Ok(out)
}

fn occupancy_report(cfg: &CampaignConfig) -> anyhow::Result<String> {
    let b = occupancy_breakdown(&cfg.prach, &cfg.cell).map_err(|e| ConfigError(e.to_string()))?;
    let budget = jammer_resource_budget(&cfg.prach, &cfg.cell);
    let mut out = String::new();
    writeln!(out, "period factor     {:.6}", b.period_factor)?;
    writeln!(out, "temporal factor   {:.6}", b.temporal_factor)?;
    writeln!(out, "bandwidth factor  {:.6}", b.bandwidth_factor)?;
    writeln!(
        out,
        "ratio             {:.7} ({:.4} %)",
        b.ratio,
        b.ratio * 100.0
    )?;
    writeln!(
        out,
        "jammer bandwidth  {:.2} MHz",
        budget.bandwidth_hz / 1e6
    )?;
    writeln!(out, "duty period       {} ms", budget.duty_period_ms)?;
    writeln!(
        out,
        "active per period {:.4} ms",
        budget.active_span_per_period_ms
    )?;
    let frame = cfg.prach.sfn_remainder;
    for o in occasions_in_frame(&cfg.prach, &cfg.cell, frame) {
        writeln!(
            out,
            "occasion sfn {} slot {} symbol {} subcarrier {}",
            o.sfn, o.slot, o.start_symbol, o.first_subcarrier
        )?;
    }
    Ok(out)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let load = || load_config(cli.config.as_deref(), &cli.overrides);

    match cli.command {
        Command::Zc {
            root,
            length,
            shift,
            correlate_with,
        } => print!("{}", zc_csv(root, length, shift, correlate_with)?),
        Command::Occupancy => print!("{}", occupancy_report(&checked(load()?)?)?),
        Command::Simulate => {
            let cfg = checked(load()?)?;
            let out = run_campaign(&cfg, exec)?;
            write_outputs(&out_dir, &out)?;
            print!("{}", summary_json(&out.summary));
        }
        Command::Metrics { records } => {
            let path = records.unwrap_or_else(|| out_dir.join("records.jsonl"));
            let (header, records) = read_records(&path)?;
            let summary = summarize(header.as_ref(), &records)?;
            let text = summary_json(&summary);
            if cli.out.is_some() {
                std::fs::create_dir_all(&out_dir)?;
                let dest = out_dir.join("summary.json");
                std::fs::write(&dest, &text).with_context(|| dest.display().to_string())?;
            }
            print!("{text}");
        }
        Command::Calibrate {
            target_far,
            trials,
            seed,
            verify,
        } => {
            let cfg = checked(load()?)?;
            let len = cfg.prach.preamble_length;
            let mut rng = stream(seed, tag::TRIAL, 0);
            let factor =
                calibrate_threshold(target_far, trials, &cfg.detector, len, exec, &mut rng)?;
            println!("{factor}");
            if verify > 0 {
                let mut det = cfg.detector.clone();
                det.threshold_factor = factor;
                let far = measure_false_alarm_rate(&det, len, verify, seed ^ 0x5EED, exec)?;
                eprintln!("re-measured false-alarm rate {far:.3e} over {verify} trials");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<ConfigError>().is_some()
                || matches!(
                    e.downcast_ref::<CampaignError>(),
                    Some(CampaignError::Config(_))
                );
            ExitCode::from(if config { 1 } else { 2 })
        }
    }
}
