//! `bfa-elm`: generate synthetic flight records, train and evaluate ELM or
//! BFA-ELM predictors, run the paired comparison, compute FPI values and
//! screen feature correlations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bfa_elm::data::{self, FlightTrace};
use bfa_elm::metrics;
use bfa_elm::numerics::{Activation, RandomStream};
use bfa_elm::pipeline::{self, Mode, PipelineConfig, Predictor};
use bfa_elm::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Records in the dataset `compare` generates when no `--data` is given.
const DEFAULT_RECORDS: usize = 200;
const DEFAULT_NOISE: f64 = 0.02;

#[derive(Parser)]
#[command(name = "bfa-elm", version, about = "ELM and BFA-ELM flight-performance prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset CSV.
    Generate {
        /// Number of records.
        #[arg(long)]
        n: usize,
        /// Standard deviation of the Gaussian noise added to the target.
        #[arg(long, default_value_t = DEFAULT_NOISE)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a predictor on a dataset and write the model and a report.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::BfaElm)]
        mode: ModeArg,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Model JSON destination.
        #[arg(long)]
        out: PathBuf,
        /// Report JSON destination [default: <out>.report.json].
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score a saved model on a dataset and write predictions.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Predictions CSV destination.
        #[arg(long, default_value = "predictions.csv")]
        out: PathBuf,
    },
    /// Paired ELM vs BFA-ELM comparison over several splits.
    Compare {
        /// Dataset CSV; a synthetic set of 200 records is generated when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Seed of the generated dataset.
        #[arg(long, default_value_t = 42)]
        data_seed: u64,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Directory receiving per_seed.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Flight performance index of an altitude trace CSV (`h_ac,h_ex`).
    Fpi {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Pearson correlation of each feature with FPI, as JSON.
    Correlate {
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Elm,
    BfaElm,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Elm => Mode::Elm,
            ModeArg::BfaElm => Mode::BfaElm,
        }
    }
}

/// Pipeline settings. Precedence: these flags, then the `--config` file,
/// then built-in defaults.
#[derive(Args)]
struct PipelineArgs {
    /// JSON pipeline configuration; keys left out keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Hidden-node candidates, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    activation: Option<Activation>,
    #[arg(long)]
    train_ratio: Option<f64>,
}

impl PipelineArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = read(path)?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))?
            }
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(hidden) = &self.hidden {
            cfg.l_candidates = hidden.clone();
        }
        if let Some(activation) = self.activation {
            cfg.activation = activation;
        }
        if let Some(ratio) = self.train_ratio {
            cfg.train_ratio = ratio;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn default_report_path(model: &Path) -> PathBuf {
    let stem = model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    model.with_file_name(format!("{stem}.report.json"))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { n, noise, seed, out } => {
            let ds = data::generate_synthetic(n, noise, &mut RandomStream::new(seed))?;
            data::save_csv(&ds, &out)?;
            println!("{} records written to {}", ds.len(), out.display());
        }
        Command::Train {
            data: data_path,
            mode,
            pipeline: args,
            out,
            report,
        } => {
            let cfg = args.resolve()?;
            let ds = data::load_csv(&data_path)?;
            let fit = pipeline::fit(&ds, &cfg, mode.into())?;
            write(&out, &fit.predictor().to_json()?)?;
            let report = report.unwrap_or_else(|| default_report_path(&out));
            write(&report, &fit.to_json()?)?;
            println!("chosen_L {}", fit.chosen_l);
            println!("best_fitness {}", fit.best_fitness);
        }
        Command::Evaluate { model, data: data_path, out } => {
            let predictor = Predictor::from_json(&read(&model)?)?;
            let ds = data::load_csv(&data_path)?;
            let truth = ds.targets();
            let pred = predictor.predict_dataset(&ds)?;
            let report = metrics::report(&truth, &pred)?;
            let mut csv = String::from("index,true,predicted\n");
            for (i, (t, p)) in truth.iter().zip(&pred).enumerate() {
                csv.push_str(&format!("{i},{t},{p}\n"));
            }
            write(&out, &csv)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Compare {
            data: data_path,
            data_seed,
            seeds,
            pipeline: args,
            out,
        } => {
            let cfg = args.resolve()?;
            let ds = match &data_path {
                Some(path) => data::load_csv(path)?,
                None => data::generate_synthetic(
                    DEFAULT_RECORDS,
                    DEFAULT_NOISE,
                    &mut RandomStream::new(data_seed),
                )?,
            };
            let report = pipeline::compare_models(&ds, &cfg, seeds)?;
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            write(&out.join("per_seed.csv"), &report.to_csv())?;
            write(&out.join("summary.json"), &report.to_json()?)?;
            println!("{}", serde_json::to_string_pretty(&report.medians)?);
        }
        Command::Fpi { trace } => {
            let trace = FlightTrace::load_csv(&trace)?;
            println!("{}", data::compute_fpi(&trace));
        }
        Command::Correlate { data: data_path } => {
            let ds = data::load_csv(&data_path)?;
            let screen = data::correlation_screen(&ds)?;
            println!("{}", serde_json::to_string_pretty(&screen)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
