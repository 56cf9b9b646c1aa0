use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use rcpu::compensation::CompensationKind;
use rcpu::error::Error;
use rcpu::gen::{generate, GenSpec};
use rcpu::io::{read_tensor, write_tensor};
use rcpu::model::{load_model, save_model, Nonlinearity};
use rcpu::pipeline::{evaluate, prune_model, ActivationMode, PruneConfig};
use rcpu::scoring::{ScoreVariant, VarianceMode};
use rcpu::sweep::{run_sweep, SweepRow, SweepSpec};
use rcpu::Result;

#[derive(Parser)]
#[command(
    name = "rcpu",
    version,
    about = "Structured column pruning with rotation-constrained error compensation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded toy model plus calibration and held-out tensors
    Gen(GenArgs),
    /// Prune a model against a calibration set and write the result
    Prune(PruneArgs),
    /// Run a ratio/score/variant cross-product and emit a csv table
    Sweep(SweepArgs),
    /// Compare a model against a reference on held-out inputs
    Eval(EvalArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output directory (created if missing)
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform layer width (with --depth)
    #[arg(long, default_value_t = 32, conflicts_with = "dims")]
    dim: usize,
    /// Number of layers (with --dim)
    #[arg(long, default_value_t = 4, conflicts_with = "dims")]
    depth: usize,
    /// Explicit width chain, e.g. 64,48,48,32
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, default_value = "relu")]
    nonlinearity: Nonlinearity,
    #[arg(long, default_value_t = 256)]
    n_calib: usize,
    #[arg(long, default_value_t = 512)]
    n_eval: usize,
    /// Head-like group size for every layer
    #[arg(long)]
    groups: Option<usize>,
}

#[derive(Args)]
struct PruneArgs {
    /// Model directory to prune
    #[arg(long)]
    model: PathBuf,
    /// Calibration tensor file
    #[arg(long)]
    calib: PathBuf,
    /// Output model directory
    #[arg(long)]
    out: PathBuf,
    /// Report file (default: <out>/prune_report.toml)
    #[arg(long)]
    report: Option<PathBuf>,
    /// Optional toml config; explicit flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    score_variant: Option<ScoreVariant>,
    #[arg(long)]
    compensation_variant: Option<CompensationKind>,
    #[arg(long)]
    activation_mode: Option<ActivationMode>,
    #[arg(long)]
    variance_mode: Option<VarianceMode>,
    #[arg(long)]
    rcond: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    width_propagation: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    calib: PathBuf,
    /// Held-out input tensor file
    #[arg(long)]
    eval: PathBuf,
    /// Output directory for table.csv and manifest.toml
    #[arg(long)]
    out: PathBuf,
    /// Optional toml config; explicit flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    score_variants: Option<Vec<ScoreVariant>>,
    #[arg(long, value_delimiter = ',')]
    compensation_variants: Option<Vec<CompensationKind>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    calib_sizes: Option<Vec<usize>>,
    #[arg(long)]
    activation_mode: Option<ActivationMode>,
    #[arg(long)]
    variance_mode: Option<VarianceMode>,
    #[arg(long)]
    rcond: Option<f64>,
    #[arg(long)]
    width_propagation: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    /// Held-out input tensor file
    #[arg(long)]
    eval: PathBuf,
}

/// Optional-field mirror of PruneConfig for config files.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PruneConfigFile {
    ratio: Option<f64>,
    score_variant: Option<ScoreVariant>,
    compensation_variant: Option<CompensationKind>,
    activation_mode: Option<ActivationMode>,
    variance_mode: Option<VarianceMode>,
    rcond: Option<f64>,
    seed: Option<u64>,
    width_propagation: Option<bool>,
}

/// Optional-field mirror of SweepSpec for config files.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSpecFile {
    ratios: Option<Vec<f64>>,
    score_variants: Option<Vec<ScoreVariant>>,
    compensation_variants: Option<Vec<CompensationKind>>,
    seeds: Option<Vec<u64>>,
    calib_sizes: Option<Vec<usize>>,
    activation_mode: Option<ActivationMode>,
    variance_mode: Option<VarianceMode>,
    rcond: Option<f64>,
    width_propagation: Option<bool>,
}

#[derive(Serialize)]
struct SweepManifest<'a> {
    model: String,
    calib: String,
    eval: String,
    rows: usize,
    spec: &'a SweepSpec,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Prune(args) => cmd_prune(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Eval(args) => cmd_eval(args),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn read_config<T: Default + for<'de> Deserialize<'de>>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            toml::from_str(&text).map_err(|e| Error::Format {
                path: p.to_path_buf(),
                reason: e.to_string(),
            })
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let dims = match args.dims {
        Some(dims) => dims,
        None => vec![args.dim; args.depth + 1],
    };
    let spec = GenSpec {
        seed: args.seed,
        dims,
        nonlinearity: args.nonlinearity,
        n_calib: args.n_calib,
        n_eval: args.n_eval,
        groups: args.groups,
    };
    let generated = generate(&spec)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    save_model(args.out.join("model"), &generated.model)?;
    write_tensor(args.out.join("calib.rcpu"), &generated.calib)?;
    write_tensor(args.out.join("eval.rcpu"), &generated.eval)?;
    println!(
        "generated model depth={} dims={:?} calib={} eval={} at {}",
        spec.depth(),
        spec.dims,
        spec.n_calib,
        spec.n_eval,
        args.out.display()
    );
    Ok(())
}

fn cmd_prune(args: PruneArgs) -> Result<()> {
    let file: PruneConfigFile = read_config(args.config.as_deref())?;
    let defaults = PruneConfig::default();
    let config = PruneConfig {
        ratio: args.ratio.or(file.ratio).unwrap_or(defaults.ratio),
        score_variant: args
            .score_variant
            .or(file.score_variant)
            .unwrap_or(defaults.score_variant),
        compensation_variant: args
            .compensation_variant
            .or(file.compensation_variant)
            .unwrap_or(defaults.compensation_variant),
        activation_mode: args
            .activation_mode
            .or(file.activation_mode)
            .unwrap_or(defaults.activation_mode),
        variance_mode: args
            .variance_mode
            .or(file.variance_mode)
            .unwrap_or(defaults.variance_mode),
        rcond: args.rcond.or(file.rcond).unwrap_or(defaults.rcond),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        width_propagation: args.width_propagation
            || file.width_propagation.unwrap_or(defaults.width_propagation),
    };
    let model = load_model(&args.model)?;
    let calib = read_tensor(&args.calib)?;
    let (pruned, report) = prune_model(&model, &calib, &config)?;
    save_model(&args.out, &pruned)?;
    let report_path = args
        .report
        .unwrap_or_else(|| args.out.join("prune_report.toml"));
    fs::write(&report_path, report.to_toml()?).map_err(|e| Error::Io {
        path: report_path.clone(),
        source: e,
    })?;
    for record in &report.records {
        println!("{}", record.line());
    }
    println!(
        "pruned {} layers -> {} (report: {})",
        report.records.len(),
        args.out.display(),
        report_path.display()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let file: SweepSpecFile = read_config(args.config.as_deref())?;
    let defaults = SweepSpec::default();
    let spec = SweepSpec {
        ratios: args.ratios.or(file.ratios).unwrap_or(defaults.ratios),
        score_variants: args
            .score_variants
            .or(file.score_variants)
            .unwrap_or(defaults.score_variants),
        compensation_variants: args
            .compensation_variants
            .or(file.compensation_variants)
            .unwrap_or(defaults.compensation_variants),
        seeds: args.seeds.or(file.seeds).unwrap_or(defaults.seeds),
        calib_sizes: args
            .calib_sizes
            .or(file.calib_sizes)
            .unwrap_or(defaults.calib_sizes),
        activation_mode: args
            .activation_mode
            .or(file.activation_mode)
            .unwrap_or(defaults.activation_mode),
        variance_mode: args
            .variance_mode
            .or(file.variance_mode)
            .unwrap_or(defaults.variance_mode),
        rcond: args.rcond.or(file.rcond).unwrap_or(defaults.rcond),
        width_propagation: args.width_propagation
            || file.width_propagation.unwrap_or(defaults.width_propagation),
    };
    let model = load_model(&args.model)?;
    let calib = read_tensor(&args.calib)?;
    let eval_inputs = read_tensor(&args.eval)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let table_path = args.out.join("table.csv");
    let mut table = File::create(&table_path).map_err(|e| Error::Io {
        path: table_path.clone(),
        source: e,
    })?;
    let as_io = |e: std::io::Error| Error::Io {
        path: table_path.clone(),
        source: e,
    };
    writeln!(table, "{}", SweepRow::csv_header()).map_err(as_io)?;
    table.flush().map_err(as_io)?;
    // Flush after every cell so partial results survive interruption.
    let rows = run_sweep(&spec, &model, &calib, &eval_inputs, |row| {
        writeln!(table, "{}", row.to_csv()).map_err(as_io)?;
        table.flush().map_err(as_io)
    })?;
    let manifest = SweepManifest {
        model: args.model.display().to_string(),
        calib: args.calib.display().to_string(),
        eval: args.eval.display().to_string(),
        rows: rows.len(),
        spec: &spec,
    };
    let manifest_path = args.out.join("manifest.toml");
    let text = toml::to_string(&manifest).map_err(|e| Error::InvalidArgument {
        arg: "manifest",
        reason: e.to_string(),
    })?;
    fs::write(&manifest_path, text).map_err(|e| Error::Io {
        path: manifest_path,
        source: e,
    })?;
    println!("sweep complete: {} rows -> {}", rows.len(), table_path.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let reference = load_model(&args.reference)?;
    let eval_inputs = read_tensor(&args.eval)?;
    let metrics = evaluate(&model, &eval_inputs, &reference)?;
    println!("heldout_rel_error = {:?}", metrics.relative_error);
    for layer in &metrics.per_layer {
        match layer.relative_error {
            Some(e) => println!("layer={} rel_error={:?}", layer.layer, e),
            None => println!("layer={} rel_error=n/a", layer.layer),
        }
    }
    Ok(())
}
