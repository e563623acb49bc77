//! Batch pipeline driver: preprocess, kernel learning, visualization,
//! calibration and cross-validated evaluation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use csnn::pipeline::{self, config::KEY_HELP, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "csnn",
    about = "Convolutional spiking network pipeline: learn kernels from an image corpus, \
             port them into a rate-coded spiking network, train and evaluate a columnar classifier.",
    after_long_help = key_reference()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn key_reference() -> String {
    let mut out = String::from(
        "CONFIG FILE\n  Flat `key = value` lines, `#` comments. Unknown keys are errors.\n\nKEYS\n",
    );
    for (key, help) in KEY_HELP {
        out.push_str(&format!("  {key:<24} {help}\n"));
    }
    out
}

#[derive(Args)]
struct Common {
    /// Config file (flat key = value text). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's fold count.
    #[arg(long)]
    folds: Option<usize>,
    /// Override the config's kernel count.
    #[arg(long)]
    kernels: Option<usize>,
    /// Override the work directory (output location).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<PipelineConfig, csnn::Error> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(folds) = self.folds {
            cfg.folds = folds;
        }
        if let Some(kernels) = self.kernels {
            cfg.kernels = kernels;
        }
        if let Some(out) = &self.out {
            cfg.work_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Normalize raw annotated images into 31x31 heat-map patches.
    Prep(Common),
    /// Learn the convolution kernel bank from the patch corpus.
    Learn(Common),
    /// Render the kernel bank as a color-coded PNG grid.
    Viz {
        #[command(flatten)]
        common: Common,
        /// Output image path (default: <work_dir>/kernels.png).
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Find the weight scale hitting the target mean pooling rate.
    Calibrate(Common),
    /// Stratified k-fold training and evaluation of the full network.
    Eval(Common),
    /// Generate the bundled synthetic three-class patch corpus.
    Synth(Common),
}

fn run() -> Result<bool, csnn::Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Prep(common) => {
            let cfg = common.resolve()?;
            let stats = pipeline::cmd_prep(&cfg)?;
            println!(
                "wrote {} patches ({} rows skipped) to {}",
                stats.written,
                stats.skipped,
                cfg.work_dir.display()
            );
            println!(
                "corpus mean brightness: {:.2} (brightness_threshold candidate)",
                stats.mean_brightness
            );
            Ok(true)
        }
        Command::Learn(common) => {
            let cfg = common.resolve()?;
            let outcome = pipeline::cmd_learn(&cfg)?;
            println!(
                "learned {} kernels from {} patches (l = {:e})",
                cfg.kernels, outcome.corpus_size, outcome.effective_learning_rate
            );
            println!("bank: {}", outcome.bank_path.display());
            println!("log:  {}", outcome.log_path.display());
            Ok(true)
        }
        Command::Viz { common, image } => {
            let cfg = common.resolve()?;
            let path = pipeline::cmd_viz(&cfg, image.as_deref())?;
            println!("kernel grid: {}", path.display());
            Ok(true)
        }
        Command::Calibrate(common) => {
            let cfg = common.resolve()?;
            let outcome = pipeline::cmd_calibrate(&cfg)?;
            print!("{}", outcome.report(cfg.target_hz));
            Ok(true)
        }
        Command::Eval(common) => {
            let cfg = common.resolve()?;
            let report = pipeline::cmd_eval(&cfg)?;
            print!("{}", report.summary());
            Ok(report.failed_folds() == 0)
        }
        Command::Synth(common) => {
            let cfg = common.resolve()?;
            let manifest = pipeline::cmd_synth(&cfg)?;
            println!("synthetic corpus manifest: {}", manifest.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
