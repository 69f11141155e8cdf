use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use scbit_core::baseline::run_tree_inner_product;
use scbit_core::engine::{run_inner_product, EngineConfig, ShiftDirection};
use scbit_core::eval::{
    run_accuracy_sweep, run_canceler_experiment, run_fault_sweep, write_canceler_csv, Design, ExperimentConfig,
    ExperimentMeta, Metric,
};
use scbit_core::trace::{EncodedStream, StreamFormat};
use scbit_core::RandomSource;

#[derive(Parser, Debug)]
#[command(name = "scbit", version, about = "Bit-true stochastic-computing arithmetic and inner-product simulator")]
struct Cli {
    /// Worker threads for trial-parallel experiments (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode a value as a stochastic stream and write it as CSV.
    Encode {
        #[arg(long)]
        format: StreamFormat,
        #[arg(long, allow_hyphen_values = true)]
        value: f64,
        #[arg(long, default_value_t = 10_000)]
        len: usize,
        #[arg(long, env = "SCBIT_SEED", default_value_t = 1)]
        seed: u64,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode a stream CSV and print its value.
    Decode {
        #[arg(long)]
        format: StreamFormat,
        /// Stream file written by `encode`.
        input: PathBuf,
    },
    /// Estimate the inner product of two vector files (one real per line).
    InnerProduct(InnerProductArgs),
    /// Run an experiment and write CSV plus meta.json next to it.
    Sweep {
        kind: SweepKind,
        #[command(flatten)]
        overrides: Overrides,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct InnerProductArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long, default_value = "novel")]
    design: Design,
    /// Must match the vector length when given.
    #[arg(long)]
    lanes: Option<usize>,
    #[arg(long, default_value_t = 6)]
    carry_len: usize,
    #[arg(long, default_value_t = 4)]
    counter_bits: u32,
    #[arg(long, default_value_t = 10_000)]
    len: usize,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    cc: Switch,
    #[arg(long, default_value = "opposite")]
    direction: ShiftDirection,
    #[arg(long, env = "SCBIT_SEED", default_value_t = 1)]
    seed: u64,
}

/// Flags that override fields of the JSON experiment config.
#[derive(Args, Debug)]
struct Overrides {
    /// JSON file with experiment-config fields; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "SCBIT_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    len: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Restricts the sweep to one vector length.
    #[arg(long)]
    lanes: Option<usize>,
    /// Restricts the sweep to one carry register length.
    #[arg(long)]
    carry_len: Option<usize>,
    /// Restricts the sweep to one counter width.
    #[arg(long)]
    counter_bits: Option<u32>,
    #[arg(long, value_enum)]
    cc: Option<Switch>,
    #[arg(long)]
    direction: Option<ShiftDirection>,
    /// Restricts the sweep to one design.
    #[arg(long)]
    design: Option<Design>,
    #[arg(long)]
    metric: Option<Metric>,
    /// Flip probability for accuracy runs; a single-point grid for fault runs.
    #[arg(long)]
    p_flip: Option<f64>,
    #[arg(long)]
    input_scale: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    Accuracy,
    Fault,
    Canceler,
}

impl SweepKind {
    fn name(self) -> &'static str {
        match self {
            SweepKind::Accuracy => "accuracy",
            SweepKind::Fault => "fault",
            SweepKind::Canceler => "canceler",
        }
    }
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
enum Failure {
    /// Bad arguments, config or input files: exit 2.
    Usage(anyhow::Error),
    /// Output could not be written: exit 1.
    Io(anyhow::Error),
}

type CliResult<T> = Result<T, Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn io_failure<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Io(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage(anyhow::anyhow!("--jobs must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(usage)?;
    }
    match cli.command {
        Command::Encode { format, value, len, seed, out } => cmd_encode(format, value, len, seed, out.as_deref()),
        Command::Decode { format, input } => cmd_decode(format, &input),
        Command::InnerProduct(args) => cmd_inner_product(&args),
        Command::Sweep { kind, overrides, out } => cmd_sweep(kind, &overrides, &out),
    }
}

fn cmd_encode(format: StreamFormat, value: f64, len: usize, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let stream = EncodedStream::encode(format, value, len, &mut RandomSource::new(seed)).map_err(usage)?;
    match out {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("creating {}", path.display()))
                .map_err(io_failure)?;
            let mut w = BufWriter::new(file);
            stream.write_csv(&mut w).map_err(io_failure)?;
            w.flush().map_err(io_failure)
        }
        None => stream.write_csv(io::stdout().lock()).map_err(io_failure),
    }
}

fn cmd_decode(format: StreamFormat, input: &Path) -> CliResult<()> {
    let file = File::open(input)
        .with_context(|| format!("opening {}", input.display()))
        .map_err(usage)?;
    let stream = EncodedStream::read_csv(format, BufReader::new(file))
        .with_context(|| format!("reading {}", input.display()))
        .map_err(usage)?;
    println!("{}", stream.decode().map_err(usage)?);
    Ok(())
}

fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| (i, line.trim()))
        .filter(|(_, line)| !line.is_empty() && !line.starts_with('#'))
        .map(|(i, line)| {
            line.parse::<f64>()
                .with_context(|| format!("{}:{}: `{line}` is not a number", path.display(), i + 1))
                .map_err(usage)
        })
        .collect()
}

fn cmd_inner_product(args: &InnerProductArgs) -> CliResult<()> {
    let x = read_vector(&args.x)?;
    let y = read_vector(&args.y)?;
    if x.len() != y.len() {
        return Err(usage(anyhow::anyhow!("vector lengths differ: {} vs {}", x.len(), y.len())));
    }
    if let Some(k) = args.lanes {
        if k != x.len() {
            return Err(usage(anyhow::anyhow!("--lanes {k} but the vectors have {} entries", x.len())));
        }
    }
    let rng = RandomSource::new(args.seed);
    let truth: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let (estimate, diagnostics) = match args.design {
        Design::Novel => {
            let cfg = EngineConfig::new(x.len(), args.carry_len, args.len)
                .with_cc(args.cc == Switch::On)
                .with_direction(args.direction);
            cfg.validate().map_err(usage)?;
            let (z, d) = run_inner_product(&x, &y, cfg, &rng).map_err(usage)?;
            (z.decode().map_err(usage)?, serde_json::to_value(d).map_err(io_failure)?)
        }
        Design::Baseline => {
            let (z, d) = run_tree_inner_product(&x, &y, args.counter_bits, args.len, &rng).map_err(usage)?;
            (z.decode().map_err(usage)?, serde_json::to_value(d).map_err(io_failure)?)
        }
    };
    let overflow = diagnostics
        .get("overflow_events")
        .or_else(|| diagnostics.get("saturation_events"))
        .cloned()
        .unwrap_or_default();
    let report = serde_json::json!({
        "design": args.design.as_str(),
        "lanes": x.len(),
        "len": args.len,
        "seed": args.seed,
        "estimate": estimate,
        "truth": truth,
        "abs_error": (estimate - truth).abs(),
        "overflow_events": overflow,
        "diagnostics": diagnostics,
    });
    println!("{}", serde_json::to_string_pretty(&report).map_err(io_failure)?);
    Ok(())
}

fn load_config(overrides: &Overrides) -> CliResult<ExperimentConfig> {
    let mut cfg = match &overrides.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(usage)?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(usage)?
        }
        None => ExperimentConfig::default(),
    };
    let o = overrides;
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.len {
        cfg.len = v;
    }
    if let Some(v) = o.trials {
        cfg.trials = v;
        cfg.canceler_trials = v;
    }
    if let Some(v) = o.lanes {
        cfg.lanes = v;
        cfg.lanes_grid = vec![v];
        cfg.canceler_lanes = vec![v];
    }
    if let Some(v) = o.carry_len {
        cfg.carry_len = v;
        cfg.carry_len_grid = vec![v];
    }
    if let Some(v) = o.counter_bits {
        cfg.counter_bits = v;
        cfg.counter_bits_grid = vec![v];
    }
    if let Some(v) = o.cc {
        cfg.cc = v == Switch::On;
    }
    if let Some(v) = o.direction {
        cfg.direction = v;
    }
    if let Some(v) = o.design {
        cfg.design = v;
        cfg.designs = vec![v];
    }
    if let Some(v) = o.metric {
        cfg.metric = v;
    }
    if let Some(v) = o.p_flip {
        cfg.p_flip = v;
        cfg.p_flip_grid = vec![v];
    }
    if let Some(v) = o.input_scale {
        cfg.input_scale = v;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn cmd_sweep(kind: SweepKind, overrides: &Overrides, out: &Path) -> CliResult<()> {
    let cfg = load_config(overrides)?;
    let mut csv = Vec::new();
    let mut meta = serde_json::to_value(ExperimentMeta::new(kind.name(), &cfg)).map_err(io_failure)?;
    match kind {
        SweepKind::Accuracy => {
            let result = run_accuracy_sweep(&cfg).map_err(usage)?;
            result.write_csv(&mut csv).map_err(io_failure)?;
            meta["thresholds"] = serde_json::to_value(&result.thresholds).map_err(io_failure)?;
        }
        SweepKind::Fault => {
            run_fault_sweep(&cfg).map_err(usage)?.write_csv(&mut csv).map_err(io_failure)?;
        }
        SweepKind::Canceler => {
            let rows = run_canceler_experiment(&cfg).map_err(usage)?;
            write_canceler_csv(&rows, &mut csv).map_err(io_failure)?;
        }
    }
    fs::write(out, &csv)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(io_failure)?;
    let meta_path = out.parent().unwrap_or(Path::new("")).join("meta.json");
    let meta_text = serde_json::to_string_pretty(&meta).map_err(io_failure)? + "\n";
    fs::write(&meta_path, meta_text)
        .with_context(|| format!("writing {}", meta_path.display()))
        .map_err(io_failure)?;
    eprintln!("wrote {} and {}", out.display(), meta_path.display());
    Ok(())
}
