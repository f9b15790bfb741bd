//! `defmag` — facial deformation magnification pipeline.
//!
//! Subcommands map onto the pipeline stages: `synth` generates a labeled
//! synthetic mesh dataset, `extract` turns one mesh sequence into a fan
//! file, `dsf` computes dense scalar fields, `magnify` amplifies them,
//! `train` cross-validates a classifier and saves the final model,
//! `classify` applies a saved model, and `run` chains everything.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 numerical
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use nalgebra::Point3;

use defmag_core::classify::{LabeledSequence, TrainedModel};
use defmag_core::config::{ClassifierKind, PipelineConfig};
use defmag_core::error::Error;
use defmag_core::io::{read_dsf, read_fans, read_labels, write_dsf, write_fans};
use defmag_core::pipeline::{
    extract_fan_sequence, load_sequence_dir, run_pipeline, train_and_report, ExtractOptions,
    PipelineInput, RunOptions,
};
use defmag_core::report::{write_confusion_csv, write_summary_csv};
use defmag_core::synth::{synth_generate, SynthSpec};

#[derive(Parser)]
#[command(name = "defmag", version, about = "Dense 3D facial deformation analysis, magnification, and expression classification")]
struct Cli {
    /// Flat `key = value` configuration file applied before flag overrides.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled mesh-sequence dataset.
    Synth(SynthArgs),
    /// Extract radial-curve fans from one mesh-sequence directory.
    Extract(ExtractArgs),
    /// Compute dense scalar fields from fan files.
    Dsf(DsfArgs),
    /// Magnify a DSF sequence.
    Magnify(MagnifyArgs),
    /// Cross-validate a classifier on labeled DSF sequences and save the
    /// final model.
    Train(TrainArgs),
    /// Classify one DSF sequence with a saved model.
    Classify(ClassifyArgs),
    /// Run the full pipeline end to end.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset directory.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    spec: SynthOverrides,
}

#[derive(Args)]
struct SynthOverrides {
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    sequences_per_class: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    amplitude_scale: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    rings: Option<usize>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    subject_rotation_deg: Option<f64>,
    #[arg(long)]
    frame_jitter_rotation_deg: Option<f64>,
}

impl SynthOverrides {
    fn apply(&self, spec: &mut SynthSpec) {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    spec.$field = v;
                }
            };
        }
        set!(subjects);
        set!(sequences_per_class);
        set!(frames);
        set!(amplitude_scale);
        set!(noise_sigma);
        set!(rings);
        set!(segments);
        set!(subject_rotation_deg);
        set!(frame_jitter_rotation_deg);
    }
}

#[derive(Args)]
struct ExtractArgs {
    /// Directory of `.obj` frames (one mesh sequence).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    curves: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    crop_radius: Option<f64>,
    /// Explicit nose-tip coordinates `x,y,z`, bypassing detection.
    #[arg(long)]
    nose: Option<String>,
    /// Output fan file.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct DsfArgs {
    /// A fan file, or a directory of fan files for batch mode.
    #[arg(long)]
    fans: PathBuf,
    /// Sample rate in frames per second.
    #[arg(long)]
    rate: Option<u32>,
    /// Output `.dsf` file (or directory in batch mode).
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct MagnifyArgs {
    /// Input `.dsf` file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    /// Pass band `lo,hi` in Hz.
    #[arg(long)]
    band: Option<String>,
    /// Output `.dsf` file.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Classifier kind: `svm` or `hmm`.
    #[arg(long)]
    model: String,
    /// Directory with `labels.csv` and the referenced `.dsf` files.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    folds: Option<usize>,
    /// Pooling layout `AxR` for HMM frame features.
    #[arg(long)]
    pool: Option<String>,
    /// HMM state count.
    #[arg(long)]
    states: Option<usize>,
    /// Report output directory.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Saved model JSON from `train`.
    #[arg(long)]
    model_file: PathBuf,
    /// Input `.dsf` file.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Existing dataset directory (`labels.csv` plus mesh sequences).
    #[arg(long, conflicts_with = "synth")]
    input: Option<PathBuf>,
    /// Generate a synthetic dataset instead of reading one.
    #[arg(long)]
    synth: bool,
    #[command(flatten)]
    synth_overrides: SynthOverrides,
    /// Evaluate both the unmagnified (WV) and magnified (MWV) conditions.
    #[arg(long)]
    compare: bool,
    /// Classifier: `svm`, `hmm`, or `both`.
    #[arg(long)]
    classifier: Option<String>,
    /// Cross-validation fold count.
    #[arg(long)]
    folds: Option<usize>,
    /// Output directory for every intermediate and report.
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits with 2 by default; usage errors are 1 here.
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli_config: &Option<PathBuf>, cli_seed: Option<u64>) -> Result<PipelineConfig, Error> {
    let mut cfg = match cli_config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli_seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    let cfg = load_config(&cli.config, cli.seed)?;
    match cli.command {
        Command::Synth(args) => cmd_synth(args, &cfg),
        Command::Extract(args) => cmd_extract(args, &cfg),
        Command::Dsf(args) => cmd_dsf(args, &cfg),
        Command::Magnify(args) => cmd_magnify(args, &cfg),
        Command::Train(args) => cmd_train(args, &cfg),
        Command::Classify(args) => cmd_classify(args),
        Command::Run(args) => cmd_run(args, &cfg),
    }
}

fn cmd_synth(args: SynthArgs, cfg: &PipelineConfig) -> Result<(), Error> {
    let mut spec = SynthSpec::default();
    args.spec.apply(&mut spec);
    let entries = synth_generate(&spec, cfg.seed, &args.output)?;
    info!(
        "wrote {} sequences to {}",
        entries.len(),
        args.output.display()
    );
    Ok(())
}

fn parse_nose(text: &str) -> Result<Point3<f64>, Error> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::config(format!(
            "--nose expects `x,y,z`, got `{text}`"
        )));
    }
    let mut coords = [0.0; 3];
    for (c, p) in coords.iter_mut().zip(&parts) {
        *c = p
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("invalid nose coordinate `{p}`")))?;
    }
    Ok(Point3::new(coords[0], coords[1], coords[2]))
}

fn cmd_extract(args: ExtractArgs, cfg: &PipelineConfig) -> Result<(), Error> {
    let mut opts = ExtractOptions::from_config(cfg);
    if let Some(c) = args.curves {
        opts.curves = c;
    }
    if let Some(s) = args.samples {
        opts.samples = s;
    }
    if let Some(r) = args.crop_radius {
        opts.crop_radius = r;
    }
    if let Some(nose) = &args.nose {
        opts.nose = Some(parse_nose(nose)?);
    }
    let frames = load_sequence_dir(&args.input).map_err(|e| e.in_stage("extract"))?;
    let fans = extract_fan_sequence(&frames, &opts).map_err(|e| e.in_stage("extract"))?;
    write_fans(&args.output, &fans)?;
    info!(
        "extracted {} frames x {} curves x {} samples to {}",
        fans.len(),
        opts.curves,
        opts.samples,
        args.output.display()
    );
    Ok(())
}

fn cmd_dsf(args: DsfArgs, cfg: &PipelineConfig) -> Result<(), Error> {
    let rate = args.rate.unwrap_or(cfg.magnify.sample_rate as u32);
    if args.fans.is_dir() {
        std::fs::create_dir_all(&args.output)?;
        let mut fan_files: Vec<PathBuf> = std::fs::read_dir(&args.fans)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "fan"))
            .collect();
        fan_files.sort();
        if fan_files.is_empty() {
            return Err(Error::format(format!(
                "no .fan files in {}",
                args.fans.display()
            )));
        }
        for path in fan_files {
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            let out = args.output.join(format!("{stem}.dsf"));
            dsf_one(&path, rate, &out)?;
        }
    } else {
        dsf_one(&args.fans, rate, &args.output)?;
    }
    Ok(())
}

fn dsf_one(fan_path: &Path, rate: u32, out: &Path) -> Result<(), Error> {
    let fans = read_fans(fan_path).map_err(|e| e.in_stage("dsf"))?;
    let seq = defmag_core::dsf::dsf_sequence(&fans, rate).map_err(|e| e.in_stage("dsf"))?;
    write_dsf(out, &seq)?;
    info!("wrote {}", out.display());
    Ok(())
}

fn parse_band(text: &str) -> Result<(f64, f64), Error> {
    let (lo, hi) = text
        .split_once(',')
        .ok_or_else(|| Error::config(format!("--band expects `lo,hi`, got `{text}`")))?;
    Ok((
        lo.trim()
            .parse()
            .map_err(|_| Error::config(format!("invalid band edge `{lo}`")))?,
        hi.trim()
            .parse()
            .map_err(|_| Error::config(format!("invalid band edge `{hi}`")))?,
    ))
}

fn cmd_magnify(args: MagnifyArgs, cfg: &PipelineConfig) -> Result<(), Error> {
    let seq = read_dsf(&args.input).map_err(|e| e.in_stage("magnify"))?;
    let mut mcfg = cfg.magnify.clone();
    mcfg.sample_rate = seq.sample_rate as f64;
    if let Some(z) = args.zeta {
        mcfg.zeta = z;
    }
    if let Some(g) = args.gamma {
        mcfg.gamma = g;
    }
    if let Some(l) = args.levels {
        mcfg.levels = l;
    }
    if let Some(b) = &args.band {
        mcfg.band = parse_band(b)?;
    }
    info!(
        "magnify: zeta={} gamma={} levels={} band=({}, {}) rate={}",
        mcfg.zeta, mcfg.gamma, mcfg.levels, mcfg.band.0, mcfg.band.1, mcfg.sample_rate
    );
    let result = defmag_core::magnify::magnify_sequence(&seq, &mcfg)
        .map_err(|e| e.in_stage("magnify"))?;
    info!("{} entries clamped to zero", result.clamp_count);
    write_dsf(&args.output, &result.sequence)?;
    info!("wrote {}", args.output.display());
    Ok(())
}

fn load_labeled_dsfs(dir: &Path) -> Result<Vec<LabeledSequence>, Error> {
    let entries = read_labels(dir.join("labels.csv"))?;
    entries
        .iter()
        .map(|e| {
            Ok(LabeledSequence {
                sequence: read_dsf(dir.join(&e.path))?,
                label: e.label,
                subject: e.subject.clone(),
            })
        })
        .collect()
}

fn cmd_train(args: TrainArgs, cfg: &PipelineConfig) -> Result<(), Error> {
    let mut cfg = cfg.clone();
    cfg.classifier = args.model.parse()?;
    if let Some(f) = args.folds {
        cfg.folds = f;
    }
    if let Some(p) = &args.pool {
        cfg.pool = defmag_core::config::parse_pool(p)?;
    }
    if let Some(s) = args.states {
        cfg.states = s;
    }
    let data = load_labeled_dsfs(&args.input).map_err(|e| e.in_stage("train"))?;
    info!(
        "training {} on {} sequences, {}-fold CV, seed {}",
        cfg.classifier,
        data.len(),
        cfg.folds,
        cfg.seed
    );
    let (report, model) =
        train_and_report(&data, &cfg, cfg.classifier).map_err(|e| e.in_stage("train"))?;
    std::fs::create_dir_all(&args.report)?;
    write_confusion_csv(args.report.join("confusion.csv"), &report.confusion)?;
    write_summary_csv(
        args.report.join("summary.csv"),
        &[(
            "accuracy".to_string(),
            report.mean_accuracy,
            report.std_accuracy,
        )],
    )?;
    let json = serde_json::to_string_pretty(&model)
        .map_err(|e| Error::format(format!("model serialization failed: {e}")))?;
    std::fs::write(args.report.join("model.json"), json)?;
    println!(
        "accuracy,{},{}",
        report.mean_accuracy, report.std_accuracy
    );
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> Result<(), Error> {
    let json = std::fs::read_to_string(&args.model_file)?;
    let model: TrainedModel = serde_json::from_str(&json)
        .map_err(|e| Error::format(format!("invalid model file: {e}")))?;
    let seq = read_dsf(&args.input).map_err(|e| e.in_stage("classify"))?;
    let (label, scores) = model.predict(&seq).map_err(|e| e.in_stage("classify"))?;
    println!("label,{label}");
    for (class, score) in scores {
        println!("score,{class},{score}");
    }
    Ok(())
}

fn cmd_run(args: RunArgs, cfg: &PipelineConfig) -> Result<(), Error> {
    let mut cfg = cfg.clone();
    if let Some(f) = args.folds {
        cfg.folds = f;
    }
    let cfg = &cfg;
    let input = if args.synth {
        let mut spec = SynthSpec::default();
        args.synth_overrides.apply(&mut spec);
        PipelineInput::Synth(Box::new(spec))
    } else {
        match &args.input {
            Some(dir) => PipelineInput::Dataset(dir.clone()),
            None => {
                return Err(Error::config(
                    "run needs either --input <dir> or --synth".to_string(),
                ))
            }
        }
    };
    let classifiers = match args.classifier.as_deref() {
        None => vec![cfg.classifier],
        Some("both") => vec![ClassifierKind::Svm, ClassifierKind::Hmm],
        Some(one) => vec![one.parse()?],
    };
    let opts = RunOptions {
        compare: args.compare,
        classifiers,
    };
    let summary = run_pipeline(&input, cfg, &opts, &args.output)?;
    for result in &summary.results {
        println!(
            "accuracy_{}_{},{},{}",
            result.condition,
            result.classifier,
            result.report.mean_accuracy,
            result.report.std_accuracy
        );
    }
    info!("reports under {}", summary.output_dir.join("reports").display());
    Ok(())
}
