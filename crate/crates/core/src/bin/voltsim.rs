use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use voltsim::ecc;
use voltsim::faults::{export_faults_csv, generate_faults, FaultError, PlatformProfile, VulnerabilityProfile};
use voltsim::fxp::FixedPointFormat;
use voltsim::memmap::{self, BramGeometry, MapError};
use voltsim::mnist;
use voltsim::model::{self, Topology, TrainError, TrainParams};
use voltsim::sweep::{
    self, characterize, export_report, parse_seeds, read_report, Characterization, ExperimentConfig, Mitigation,
    ReportFormat, RunOptions, SweepContext, SweepError,
};

#[derive(Parser)]
#[command(name = "voltsim", version, about = "Reduced-voltage BRAM fault simulation for a quantized MNIST MLP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the reference MLP and write a quantized weight file.
    Train(TrainArgs),
    /// Classify BRAMs by fault count at the crash voltage.
    Characterize(CharacterizeArgs),
    /// Sweep the supply voltage and evaluate accuracy under faults.
    Sweep(SweepArgs),
    /// Convert a JSON sweep report to CSV and print a summary.
    Report(ReportArgs),
    /// Write the faulty cells of one voltage as CSV.
    Faults(FaultsArgs),
    /// Write the weight placement as JSON.
    Memmap(MemmapArgs),
    /// Write the SECDED parity-check matrix.
    Hmatrix {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = TrainParams::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = TrainParams::default().learning_rate)]
    learning_rate: f32,
    /// Directory with the four MNIST IDX files.
    #[arg(long, default_value = "data/mnist")]
    mnist: PathBuf,
}

#[derive(Args)]
struct CharacterizeArgs {
    /// Platform file (.toml or .json) or built-in name.
    #[arg(long)]
    platform: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    platform: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    mnist: PathBuf,
    #[arg(long, default_value = "none")]
    mitigation: Mitigation,
    /// Classification from `voltsim characterize`; required for imm.
    #[arg(long)]
    classes: Option<PathBuf>,
    /// `1..10`, `3` or `1,2,5`.
    #[arg(long, default_value = "1..10", value_parser = |s: &str| parse_seeds(s).map(Seeds))]
    seeds: Seeds,
    #[arg(long)]
    out: PathBuf,
    /// Evaluate on the first N test images only.
    #[arg(long)]
    images: Option<usize>,
    /// Comma-separated voltages in mV instead of the full grid.
    #[arg(long, value_delimiter = ',')]
    voltages: Option<Vec<u32>>,
    #[arg(long, default_value_t = sweep::DEFAULT_STEP_MV)]
    step: u32,
    #[arg(long, default_value_t = sweep::DEFAULT_LOSS_THRESHOLD_PP)]
    threshold: f64,
    /// Worker threads (0: one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Recompute every point instead of using the cache.
    #[arg(long)]
    no_cache: bool,
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct FaultsArgs {
    #[arg(long)]
    platform: PathBuf,
    #[arg(long)]
    voltage: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MemmapArgs {
    #[arg(long)]
    platform: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "none")]
    mitigation: Mitigation,
    #[arg(long)]
    classes: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Data(String),
    Config(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Config(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Config(m) => m,
        }
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        if e.is_data_error() {
            Failure::Data(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<FaultError> for Failure {
    fn from(e: FaultError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<MapError> for Failure {
    fn from(e: MapError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<model::ModelFileError> for Failure {
    fn from(e: model::ModelFileError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<mnist::MnistError> for Failure {
    fn from(e: mnist::MnistError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

fn train(args: TrainArgs) -> Result<(), Failure> {
    let train = mnist::load_train_split(&args.mnist)?;
    let test = mnist::load_test_split(&args.mnist)?;
    let params = TrainParams {
        epochs: args.epochs,
        seed: args.seed,
        learning_rate: args.learning_rate,
        ..TrainParams::default()
    };
    let model = model::train_reference(&train, &test, &Topology::default(), FixedPointFormat::Q1_7, &params)
        .map_err(|e| match e {
            TrainError::BelowFloor { .. } => Failure::Data(e.to_string()),
            _ => Failure::Config(e.to_string()),
        })?;
    model::save_model(&model, &args.out)?;
    println!(
        "wrote {} (test accuracy {:.4})",
        args.out.display(),
        model.clean_accuracy.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn run_characterize(args: CharacterizeArgs) -> Result<(), Failure> {
    let platform = PlatformProfile::load(&args.platform)?;
    let c = characterize(&platform, args.seed)?;
    c.save(&args.out)?;
    for w in &c.classification.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{}: {} faults at {} mV, {} BRAMs High",
        c.platform,
        c.fault_count,
        c.voltage_mv,
        c.classification.high().len()
    );
    Ok(())
}

fn load_classes(path: Option<&Path>, platform: &PlatformProfile, mitigation: Mitigation) -> Result<Option<Characterization>, Failure> {
    let Some(path) = path else {
        return if mitigation.uses_imm() {
            Err(Failure::Usage(format!("--mitigation {mitigation} needs --classes FILE")))
        } else {
            Ok(None)
        };
    };
    let c = Characterization::load(path)?;
    if c.bram_count != platform.bram_count {
        return Err(Failure::Config(format!(
            "classification covers {} BRAMs, platform {} has {}",
            c.bram_count, platform.name, platform.bram_count
        )));
    }
    Ok(Some(c))
}

fn run_sweep(args: SweepArgs) -> Result<(), Failure> {
    let platform = PlatformProfile::load(&args.platform)?;
    let classes = load_classes(args.classes.as_deref(), &platform, args.mitigation)?;
    let model = model::load_model(&args.model)?;
    let data = mnist::load_test_split(&args.mnist)?;

    let mut cfg = ExperimentConfig::new(platform, args.mitigation, args.seeds.0);
    cfg.step_mv = args.step;
    cfg.accuracy_loss_threshold_pp = args.threshold;
    cfg.image_limit = args.images;
    cfg.voltages_mv = args.voltages;
    cfg.model_path = Some(args.model.display().to_string());
    cfg.dataset_path = Some(args.mnist.display().to_string());
    let ctx = SweepContext::new(cfg, model, data, classes.map(|c| c.classification))?;
    let opts = RunOptions {
        workers: args.workers,
        cache: (!args.no_cache).then(sweep::default_cache_dir),
    };
    let report = sweep::run_sweep(&ctx, &opts)?;
    export_report(&report, ReportFormat::Json, &args.out)?;
    for f in &report.failures {
        eprintln!("failed: {} mV seed {}: {}", f.voltage_mv, f.seed, f.error);
    }
    let r = &report.regions;
    println!(
        "{} {}: clean {:.4}, v_first_fault {}, v_min {} mV, v_crash {} mV",
        report.config.platform.name,
        report.config.mitigation,
        report.clean_accuracy,
        r.v_first_fault_mv.map_or("-".to_owned(), |v| format!("{v} mV")),
        r.v_min_mv,
        r.v_crash_mv
    );
    if !report.is_complete() {
        return Err(Failure::Data(format!("{} points failed; partial report written", report.failures.len())));
    }
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<(), Failure> {
    let report = read_report(&args.input)?;
    if let Some(csv) = &args.csv {
        export_report(&report, ReportFormat::Csv, csv)?;
    }
    println!("{:>7} {:>10} {:>10} {:>9} {:>9} {:>8}", "mV", "region", "faults", "loss_pp", "p90", "saving");
    for p in &report.points {
        let region = report.regions.region_of(p.voltage_mv).map_or("", |r| r.as_str());
        println!(
            "{:>7} {:>10} {:>10} {:>9.3} {:>9.3} {:>8.3}",
            p.voltage_mv, region, p.fault_count_median, p.loss_pp_median, p.loss_pp_p90, p.power_saving
        );
    }
    Ok(())
}

fn run_faults(args: FaultsArgs) -> Result<(), Failure> {
    let platform = PlatformProfile::load(&args.platform)?;
    let vuln = VulnerabilityProfile::for_platform(&platform);
    let faults = generate_faults(&vuln, args.voltage, args.seed)?;
    export_faults_csv(&faults, &args.out)?;
    println!("{} faults ({:.2}/Mbit)", faults.len(), faults.rate_per_mbit());
    Ok(())
}

fn run_memmap(args: MemmapArgs) -> Result<(), Failure> {
    let platform = PlatformProfile::load(&args.platform)?;
    let classes = load_classes(args.classes.as_deref(), &platform, args.mitigation)?;
    let model = model::load_model(&args.model)?;
    let words = memmap::pack_words(&model, args.mitigation.uses_ecc())?;
    let geometry = BramGeometry::new(platform.bram_count);
    let map = match classes {
        Some(c) if args.mitigation.uses_imm() => memmap::map_imm(&words, geometry, &c.classification.labels, memmap::DEFAULT_SPREAD)?,
        _ => memmap::map_default(&words, geometry, memmap::DEFAULT_SPREAD)?,
    };
    let json = serde_json::to_vec_pretty(&map.to_export()).expect("map serializes");
    write_file(&args.out, &json)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Characterize(a) => run_characterize(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Report(a) => run_report(a),
        Command::Faults(a) => run_faults(a),
        Command::Memmap(a) => run_memmap(a),
        Command::Hmatrix { out } => write_file(&out, ecc::parity_check_matrix_text().as_bytes()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
