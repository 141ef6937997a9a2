use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cyclevc_core::align::path_to_csv;
use cyclevc_core::cyclegan::{Direction, LossForm};
use cyclevc_core::format::write_text;
use cyclevc_core::net::DEFAULT_HIDDEN;
use cyclevc_core::pipeline::{
    cmd_align, cmd_convert, cmd_eval, cmd_gen_synthetic, cmd_stats, cmd_train, ConversionReport, ConvertConfig, Method,
    SyntheticSpec, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "cyclevc",
    version,
    about = "CycleGAN-based nonparallel voice conversion on vocoder features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one speaker's normalization and log-F0 statistics.
    Stats {
        /// Directories of `*.mcep.ftr` utterances or individual mcep files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Directory receiving norm.txt and logf0.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a conversion model.
    Train(TrainArgs),
    /// Convert utterances with a trained model.
    Convert(ConvertArgs),
    /// DTW-align two feature files and print the path as CSV.
    Align {
        a: PathBuf,
        b: PathBuf,
        /// Align on every column instead of the 25 lower-order statics.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate two synthetic speakers.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        /// JSON generator spec; the built-in toy preset is used when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Distance between the toy speakers' mixture means.
        #[arg(long, default_value_t = 6.0)]
        separation: f64,
        /// Also emit time-warped parallel utterances and pairs.csv.
        #[arg(long)]
        parallel: bool,
        /// Write the effective spec to this file.
        #[arg(long)]
        dump_spec: Option<PathBuf>,
    },
    /// Mel-cepstral distortion of converted utterances against references.
    Eval {
        #[arg(long, required = true, num_args = 1..)]
        converted: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        reference: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Cyclegan,
    GanParallel,
    MseParallel,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cyclegan => Method::CycleGan,
            MethodArg::GanParallel => Method::GanParallel,
            MethodArg::MseParallel => Method::MseParallel,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Lsgan,
    Log,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    X2y,
    Y2x,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "cyclegan")]
    method: MethodArg,
    /// Source-speaker utterances (directories or mcep files).
    #[arg(long, num_args = 1..)]
    source: Vec<PathBuf>,
    /// Target-speaker utterances.
    #[arg(long, num_args = 1..)]
    target: Vec<PathBuf>,
    /// CSV of parallel `source,target` mcep paths.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    source_stats: PathBuf,
    #[arg(long)]
    target_stats: PathBuf,
    #[arg(long)]
    model_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    /// Defaults to 400 (cyclegan, gan-parallel) or 60 (mse-parallel).
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 0.001)]
    lr_g: f64,
    #[arg(long, default_value_t = 0.0001)]
    lr_d: f64,
    #[arg(long, value_enum, default_value = "lsgan")]
    loss: LossArg,
    /// Weight of the MSE term of the gan-parallel generator.
    #[arg(long, default_value_t = 1.0)]
    mse_weight: f64,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_HIDDEN)]
    hidden: Vec<usize>,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    model_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "x2y")]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value = "on")]
    mlpg: Toggle,
    #[arg(long, default_value_t = 0.0)]
    postfilter_beta: f64,
    /// List the pipeline stages executed for each utterance.
    #[arg(long)]
    trace: bool,
    /// Write the conversion report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn print_report(report: &ConversionReport) {
    for u in &report.utterances {
        println!("{}\tframes={}\tmcd_db={:.4}", u.name, u.frames, u.mcd_db);
    }
    if let Some(m) = report.mean_mcd() {
        println!("mean\tutterances={}\tmcd_db={m:.4}", report.utterances.len());
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let mut config = TrainConfig::new(args.method.into(), args.source_stats, args.target_stats, args.model_dir);
    config.source = args.source;
    config.target = args.target;
    config.pairs = args.pairs;
    config.seed = args.seed;
    config.lambda = args.lambda;
    config.batch_frames = args.batch;
    config.epochs = args.epochs;
    config.lr_generator = args.lr_g;
    config.lr_discriminator = args.lr_d;
    config.loss_form = match args.loss {
        LossArg::Lsgan => LossForm::Lsgan,
        LossArg::Log => LossForm::Log,
    };
    config.mse_weight = args.mse_weight;
    config.hidden = args.hidden;
    if config.method == Method::CycleGan
        && config.pairs.is_none()
        && (config.source.is_empty() || config.target.is_empty())
    {
        bail!("cyclegan training needs --source and --target (or --pairs)");
    }
    let summary = cmd_train(&config)?;
    println!(
        "method={} epochs={} lambda={} batch={} lr_g={} lr_d={} seed={}",
        config.method,
        config.epochs(),
        config.lambda,
        config.batch_frames,
        config.lr_generator,
        config.lr_discriminator,
        config.seed
    );
    println!(
        "source_frames={} target_frames={}",
        summary.source_frames, summary.target_frames
    );
    if let Some(last) = summary.loss_rows.last() {
        let cols: Vec<String> = summary.loss_header[1..]
            .iter()
            .zip(last)
            .map(|(h, v)| format!("{h}={v:.6}"))
            .collect();
        println!("final {}", cols.join(" "));
    }
    Ok(())
}

fn convert(args: ConvertArgs) -> Result<()> {
    let mut config = ConvertConfig::new(args.model_dir, args.inputs, args.out);
    config.direction = match args.direction {
        DirectionArg::X2y => Direction::XToY,
        DirectionArg::Y2x => Direction::YToX,
    };
    config.mlpg = args.mlpg == Toggle::On;
    config.postfilter_beta = args.postfilter_beta;
    let report = cmd_convert(&config)?;
    if args.trace {
        for u in &report.utterances {
            println!("trace {}: {}", u.name, report.stages.join(" -> "));
        }
    }
    print_report(&report);
    if let Some(path) = args.report {
        write_text(&path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats { inputs, out } => {
            let stats = cmd_stats(&inputs, &out)?;
            println!(
                "wrote {} (75 dims) and {} (log-F0 mean {:.6}, std {:.6}, {} voiced frames)",
                out.join("norm.txt").display(),
                out.join("logf0.txt").display(),
                stats.logf0.mean,
                stats.logf0.std,
                stats.logf0.voiced_count
            );
        }
        Command::Train(args) => train(args)?,
        Command::Convert(args) => convert(args)?,
        Command::Align { a, b, full, out } => {
            let path = cmd_align(&a, &b, full)?;
            let csv = path_to_csv(&path);
            match out {
                Some(p) => write_text(&p, &csv)?,
                None => print!("{csv}"),
            }
            log::info!("alignment cost {}", path.cost);
        }
        Command::GenSynthetic {
            out,
            spec,
            seed,
            separation,
            parallel,
            dump_spec,
        } => {
            let mut spec = match spec {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<SyntheticSpec>(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => SyntheticSpec::toy(seed, separation),
            };
            spec.parallel |= parallel;
            if let Some(p) = dump_spec {
                write_text(&p, &(serde_json::to_string_pretty(&spec)? + "\n"))?;
            }
            let dirs = cmd_gen_synthetic(&spec, &out)?;
            for d in dirs {
                println!("{}", d.display());
            }
        }
        Command::Eval {
            converted,
            reference,
            json,
        } => {
            let report = cmd_eval(&converted, &reference)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print_report(&report);
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        // library errors already embed their sources in the message
        let mut msg = e.to_string();
        for cause in e.chain().skip(1) {
            let c = cause.to_string();
            if !msg.contains(&c) {
                msg = format!("{msg}: {c}");
            }
        }
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
}
