use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use patchx::explain::CategoryThresholds;
use patchx::neuralnet::gradcheck::GradCheckConfig;
use patchx_cli::commands::{
    cmd_explain, cmd_generate, cmd_gradcheck, cmd_histogram, cmd_probe, factor_range, load_inputs,
};
use patchx_cli::{bench, run, CliError, RunConfig};

#[derive(Parser)]
#[command(
    name = "patchx",
    version,
    about = "Patch-based interpretable time-series classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command that reads a run configuration.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set train.epochs=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed (falls back to the config file, then PATCHX_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Patch configs as `stride:length` tokens.
    #[arg(long, value_delimiter = ',')]
    configs: Option<Vec<String>>,
    /// Append the mask channel to every patch.
    #[arg(long)]
    attach: bool,
    /// Shift patch content to the start of the frame.
    #[arg(long)]
    notemp: bool,
    /// Sample-level classifier: svm, forest or trivial.
    #[arg(long)]
    shallow: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Parent directory for run outputs.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut overrides = Vec::new();
        if let Some(c) = &self.configs {
            let quoted: Vec<String> = c.iter().map(|t| format!("{:?}", t)).collect();
            overrides.push(format!("patching.configs=[{}]", quoted.join(",")));
        }
        if self.attach {
            overrides.push("patching.attach=true".into());
        }
        if self.notemp {
            overrides.push("patching.notemp=true".into());
        }
        if let Some(s) = &self.shallow {
            overrides.push(format!("shallow.kind={s:?}"));
        }
        if let Some(e) = self.epochs {
            overrides.push(format!("train.epochs={e}"));
        }
        if let Some(o) = &self.out {
            overrides.push(format!("output_dir={:?}", o.display().to_string()));
        }
        // Explicit --set entries win over the convenience flags.
        overrides.extend(self.overrides.iter().cloned());
        RunConfig::load(self.config.as_deref(), &overrides, self.seed)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write generated train/val/test dataset files.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Destination directory.
        #[arg(long)]
        dir: PathBuf,
    },
    /// Train, evaluate and persist one pipeline.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the config-set x classifier grid and the whole-sample baseline.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Also run the four transformation-flag rows.
        #[arg(long)]
        flag_rows: bool,
    },
    /// Export per-patch records, overlays and the mislabel report.
    Explain {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Sample ids to explain; all samples when omitted.
        #[arg(long, value_delimiter = ',')]
        ids: Vec<usize>,
        #[arg(long, default_value = "explain")]
        dir: PathBuf,
        #[arg(long, default_value_t = 0.9)]
        class_specific: f64,
        #[arg(long, default_value_t = 0.1)]
        unrelated_margin: f64,
    },
    /// Scale one point of a sample and record how predictions follow.
    Probe {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        sample: usize,
        #[arg(long, default_value_t = 0)]
        channel: usize,
        #[arg(long)]
        position: usize,
        /// Explicit increasing factors; overrides the range options.
        #[arg(long, value_delimiter = ',')]
        factors: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 2.0)]
        to: f64,
        #[arg(long, default_value_t = 41)]
        steps: usize,
        /// Multiplier of the mean + k * std labeling rule.
        #[arg(long, default_value_t = 4.0)]
        k: f64,
        #[arg(long, default_value = "probe.json")]
        output: PathBuf,
    },
    /// Histogram of the winning softmax value of every patch.
    Histogram {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        bin_width: f64,
        #[arg(long, default_value = "histogram.json")]
        output: PathBuf,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Generate { cfg, dir } => {
            let cfg = cfg.load()?;
            for path in cmd_generate(&cfg, &dir)? {
                println!("{}", path.display());
            }
        }
        Command::Run { cfg } => {
            let cfg = cfg.load()?;
            let (dir, art) = run::cmd_run(&cfg)?;
            println!("run directory: {}", dir.display());
            println!(
                "test accuracy {:.4} ({} of {}), patch accuracy {:.4}",
                art.metrics.test.accuracy,
                art.metrics.test.correct,
                art.metrics.test.total,
                art.metrics.patch_accuracy_test
            );
        }
        Command::Bench { cfg, flag_rows } => {
            let mut cfg = cfg.load()?;
            cfg.bench.flag_rows |= flag_rows;
            let (dir, report) = bench::cmd_bench(&cfg)?;
            println!("{}", bench::render(&report));
            println!("bench directory: {}", dir.display());
        }
        Command::Explain {
            cfg,
            bundle,
            data,
            ids,
            dir,
            class_specific,
            unrelated_margin,
        } => {
            let cfg = cfg.load()?;
            let (model, dataset) = load_inputs(&bundle, &data, &cfg)?;
            let thresholds = CategoryThresholds {
                class_specific,
                unrelated_margin,
            };
            cmd_explain(&model, &dataset, &ids, &thresholds, &dir)?;
            println!("explanations written to {}", dir.display());
        }
        Command::Probe {
            cfg,
            bundle,
            data,
            sample,
            channel,
            position,
            factors,
            from,
            to,
            steps,
            k,
            output,
        } => {
            let cfg = cfg.load()?;
            let (model, dataset) = load_inputs(&bundle, &data, &cfg)?;
            let factors = if factors.is_empty() {
                factor_range(from, to, steps)?
            } else {
                factors
            };
            cmd_probe(&model, &dataset, sample, channel, position, &factors, k, &output)?;
            println!("probe written to {}", output.display());
        }
        Command::Histogram {
            cfg,
            bundle,
            data,
            bin_width,
            output,
        } => {
            let cfg = cfg.load()?;
            let (model, dataset) = load_inputs(&bundle, &data, &cfg)?;
            cmd_histogram(&model, &dataset, bin_width, &output)?;
            println!("histogram written to {}", output.display());
        }
        Command::Gradcheck { seeds, tolerance } => {
            let cfg = GradCheckConfig {
                tolerance,
                ..Default::default()
            };
            let reports = cmd_gradcheck(seeds, &cfg);
            let mut failed = false;
            for (name, r) in &reports {
                println!(
                    "{} {name}: {} values, max relative error {:.2e}",
                    if r.passed { "ok  " } else { "FAIL" },
                    r.checked,
                    r.max_rel_error
                );
                if !r.passed {
                    failed = true;
                    for m in &r.worst {
                        println!(
                            "      index {} analytic {:e} numeric {:e} rel {:.2e}",
                            m.index, m.analytic, m.numeric, m.rel_error
                        );
                    }
                }
            }
            return Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS });
        }
    }
    Ok(ExitCode::SUCCESS)
}
