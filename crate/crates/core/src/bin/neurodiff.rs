use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::{error, info};
use serde::Serialize;

use neurodiff::data::{generate_recording, generate_synthetic, EpochSet, SyntheticSpec};
use neurodiff::harness::ablate::{ablate_seeds, split_for};
use neurodiff::harness::args::{parse_band, parse_freq_list, parse_seed_list};
use neurodiff::harness::report::{load_reports, render, write_report};
use neurodiff::harness::train::bundle_file_name;
use neurodiff::harness::{evaluate, train, ModelBundle, MetricsReport, Profile, ReportFormat, RunConfig, Variant};
use neurodiff::prep::{run_pipeline, PassThrough, PrepConfig, Recording};
use neurodiff::{Error, Result};

#[derive(Parser)]
#[command(name = "neurodiff", version, about = "Diffusion-ensemble EEG decoding")]
struct Cli {
    /// TOML file overlaid on the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "desk")]
    profile: Profile,
    #[arg(long, global = true, default_value = "neurodiff-out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic epoch set (or a continuous recording).
    GenData {
        /// Synthetic spec (TOML); defaults to the profile's.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit a continuous recording with events instead of epochs.
        #[arg(long)]
        recording: bool,
    },
    /// Filter, re-reference and epoch a recording.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = band_arg)]
        band: Option<[f64; 2]>,
        #[arg(long, value_parser = list_arg)]
        notch: Option<FreqList>,
        #[arg(long, value_parser = band_arg)]
        hgamma: Option<[f64; 2]>,
        #[arg(long)]
        epoch_sec: Option<f64>,
        #[arg(long)]
        baseline_ms: Option<f64>,
    },
    /// Train the ensemble; writes bundles, the held-out set and loss curves.
    Train {
        /// Epoch set to train on; synthesized from the config if absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "full")]
        variant: Variant,
    },
    /// Evaluate trained bundles on the held-out set.
    Eval {
        /// Directory written by `train`; defaults to --out-dir.
        #[arg(long)]
        run_dir: Option<PathBuf>,
        /// Test set; defaults to the run's held-out set.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run all three ablation variants over one or more seeds.
    Ablate {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_parser = seeds_arg)]
        seeds: Option<SeedList>,
    },
    /// Render metrics files as csv, json or a markdown table.
    Report {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

// Aliases keep clap from treating the comma lists as repeated arguments.
type FreqList = Vec<f64>;
type SeedList = Vec<u64>;

fn band_arg(s: &str) -> std::result::Result<[f64; 2], String> {
    parse_band(s).map_err(|e| e.to_string())
}

fn list_arg(s: &str) -> std::result::Result<Vec<f64>, String> {
    parse_freq_list(s).map_err(|e| e.to_string())
}

fn seeds_arg(s: &str) -> std::result::Result<Vec<u64>, String> {
    parse_seed_list(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("NEURODIFF_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    error!("could not size the thread pool: {e}");
                }
            }
            _ => {
                error!("NEURODIFF_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            if let Error::Divergence {
                last_good_checkpoint: Some(p),
                ..
            } = &e
            {
                error!("last good checkpoint: {}", p.display());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(cli.profile, p)?,
        None => RunConfig::profile(cli.profile),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct TrainLog<'a> {
    variant: Variant,
    seed: u64,
    config_hash: String,
    split_hash: &'a str,
    train_size: usize,
    test_size: usize,
    loss_curves: &'a [neurodiff::harness::EpochLosses],
}

#[derive(Serialize)]
struct Timing {
    command: &'static str,
    seconds: f64,
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let out_dir = cli.out_dir.clone();
    let started = Instant::now();
    match cli.command {
        Command::GenData { spec, out, recording } => {
            let spec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    SyntheticSpec::from_toml(&text)?
                }
                None => cfg.data.clone(),
            };
            ensure_dir(&out_dir)?;
            if recording {
                let path = out.unwrap_or_else(|| out_dir.join("recording.ndc1"));
                let rec = generate_recording(&spec, cfg.seed)?;
                rec.save(&path)?;
                info!("wrote {} ({} channels, {} samples, {} events)", path.display(), rec.channels(), rec.samples(), rec.events.len());
            } else {
                let path = out.unwrap_or_else(|| out_dir.join("epochs.ndc1"));
                let set = generate_synthetic(&spec, cfg.seed)?;
                set.save(&path)?;
                info!("wrote {} ({} epochs)", path.display(), set.len());
            }
        }
        Command::Preprocess {
            input,
            out,
            band,
            notch,
            hgamma,
            epoch_sec,
            baseline_ms,
        } => {
            let mut pc = PrepConfig::default();
            if let Some(b) = band {
                pc.band = b;
            }
            if let Some(n) = notch {
                pc.notches = n;
            }
            if let Some(h) = hgamma {
                pc.hgamma = h;
            }
            if let Some(s) = epoch_sec {
                pc.epoch_sec = s;
            }
            if let Some(b) = baseline_ms {
                pc.baseline_ms = b;
            }
            let rec = Recording::load(&input)?;
            let (set, report) = run_pipeline(&rec, &pc, &PassThrough)?;
            ensure_dir(&out_dir)?;
            let path = out.unwrap_or_else(|| out_dir.join("epochs.ndc1"));
            set.save(&path)?;
            write_json(&out_dir.join("prep_report.json"), &report)?;
            info!(
                "wrote {} ({} epochs kept, {} dropped; stages {})",
                path.display(),
                report.kept_epochs,
                report.dropped_epochs,
                report.stages.join(" -> ")
            );
        }
        Command::Train { data, variant } => {
            let set = match data {
                Some(p) => EpochSet::load(p)?,
                None => generate_synthetic(&cfg.data, cfg.seed)?,
            };
            let sp = split_for(&cfg, &set)?;
            ensure_dir(&out_dir)?;
            let outcome = train(&cfg, &sp.train, variant, Some(&out_dir))?;
            for b in &outcome.bundles {
                b.save(out_dir.join(bundle_file_name(b.kernel_size)))?;
            }
            let mut test = sp.test.clone();
            test.meta.insert("split_hash".into(), sp.hash.clone());
            test.save(out_dir.join("test.ndc1"))?;
            std::fs::write(out_dir.join("config.toml"), cfg.to_toml()).map_err(|e| Error::io(&out_dir, e))?;
            write_json(
                &out_dir.join("train.json"),
                &TrainLog {
                    variant,
                    seed: cfg.seed,
                    config_hash: cfg.hash(),
                    split_hash: &sp.hash,
                    train_size: sp.train.len(),
                    test_size: sp.test.len(),
                    loss_curves: &outcome.curves,
                },
            )?;
            write_json(
                &out_dir.join("timing_train.json"),
                &Timing {
                    command: "train",
                    seconds: started.elapsed().as_secs_f64(),
                },
            )?;
            info!("trained {} members into {}", outcome.bundles.len(), out_dir.display());
        }
        Command::Eval { run_dir, data } => {
            let run_dir = run_dir.unwrap_or_else(|| out_dir.clone());
            let saved = run_dir.join("config.toml");
            let cfg = if saved.exists() && cli.config.is_none() {
                let mut c = RunConfig::load(cli.profile, &saved)?;
                if let Some(s) = cli.seed {
                    c.seed = s;
                }
                c
            } else {
                cfg
            };
            let test = EpochSet::load(data.unwrap_or_else(|| run_dir.join("test.ndc1")))?;
            let bundles = cfg
                .kernel_sizes
                .iter()
                .map(|&k| ModelBundle::load(run_dir.join(bundle_file_name(k))))
                .collect::<Result<Vec<_>>>()?;
            let variant = bundles[0].variant;
            let log: serde_json::Value = match std::fs::read_to_string(run_dir.join("train.json")) {
                Ok(t) => serde_json::from_str(&t).map_err(|e| Error::Data(format!("train.json: {e}")))?,
                Err(_) => serde_json::Value::Null,
            };
            let curves = serde_json::from_value(log["loss_curves"].clone()).unwrap_or_default();
            let split_hash = test.meta.get("split_hash").cloned().unwrap_or_default();
            let ev = evaluate(&bundles, &test, &cfg)?;
            let report: MetricsReport = ev.into_report(&cfg, variant, &split_hash, curves);
            ensure_dir(&out_dir)?;
            write_json(&out_dir.join("metrics.json"), &report)?;
            write_json(
                &out_dir.join("timing.json"),
                &Timing {
                    command: "eval",
                    seconds: started.elapsed().as_secs_f64(),
                },
            )?;
            info!("accuracy {:.2}%  macro AUC {:.2}%", report.accuracy, report.auc);
        }
        Command::Ablate { data, seeds } => {
            let seeds = seeds.unwrap_or_else(|| vec![cfg.seed]);
            let set = data.map(EpochSet::load).transpose()?;
            let runs = ablate_seeds(&cfg, &seeds, set.as_ref())?;
            let reports: Vec<MetricsReport> = runs.iter().flat_map(|r| r.reports.clone()).collect();
            ensure_dir(&out_dir)?;
            write_report(&reports, ReportFormat::Json, &out_dir.join("ablation.json"))?;
            write_report(&reports, ReportFormat::Csv, &out_dir.join("ablation.csv"))?;
            write_report(&reports, ReportFormat::Markdown, &out_dir.join("ablation.md"))?;
            write_json(
                &out_dir.join("timing.json"),
                &Timing {
                    command: "ablate",
                    seconds: started.elapsed().as_secs_f64(),
                },
            )?;
            print!("{}", render(&reports, ReportFormat::Markdown)?);
        }
        Command::Report { inputs, format, out } => {
            let mut reports = Vec::new();
            for p in &inputs {
                reports.extend(load_reports(p)?);
            }
            match out {
                Some(p) => write_report(&reports, format, &p)?,
                None => print!("{}", render(&reports, format)?),
            }
        }
    }
    Ok(())
}
