use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use convpipe_core::accelmodel::{PassEstimate, PassMode};
use convpipe_core::checkpoint;
use convpipe_core::pipeline::{speedup_summary, ExecutionMode, LatencyTotals};
use convpipe_core::training::{evaluate, pass_estimates, Dataset};
use convpipe_core::{run_training, Config};

#[derive(Parser)]
#[command(
    name = "convpipe",
    version,
    about = "Host/accelerator split CNN trainer and accelerator schedule model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on MNIST-format IDX files, evaluating on the test set after each epoch.
    Train(TrainArgs),
    /// Run inference over the test set with a saved checkpoint.
    Test(TestArgs),
    /// Print the accelerator schedule and latency model without touching data.
    Estimate(EstimateArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// TOML config file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_multipliers: Option<u64>,
    #[arg(long)]
    max_adders: Option<u64>,
    #[arg(long)]
    pipeline_depth: Option<u64>,
    #[arg(long)]
    clock_ns: Option<f64>,
    /// Unroll factors of the batch and hidden loops of the hidden layer, e.g. `4,4`.
    #[arg(long, value_parser = parse_pair)]
    unroll_fc: Option<[u64; 2]>,
    /// Unroll factors of the batch and class loops of the output layer, e.g. `4,10`.
    #[arg(long, value_parser = parse_pair)]
    unroll_out: Option<[u64; 2]>,
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding the four MNIST IDX files.
    #[arg(long, env = "CONVPIPE_DATA_DIR")]
    data_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ExecutionMode>,
    /// Where to write the trained weights and optimizer state.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Where to write the JSON run report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also export the per-epoch table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Training images per epoch, used to scale per-batch costs.
    #[arg(long, default_value_t = 60_000)]
    train_images: usize,
    /// Test images per epoch.
    #[arg(long, default_value_t = 10_000)]
    test_images: usize,
    /// Host-stage time per batch in microseconds, for the mode comparison.
    #[arg(long)]
    host_us_per_batch: Option<f64>,
    /// Print the estimate as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn parse_pair(s: &str) -> Result<[u64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok([
            a.parse().map_err(|e| format!("`{a}`: {e}"))?,
            b.parse().map_err(|e| format!("`{b}`: {e}"))?,
        ]),
        _ => Err(format!("expected two comma-separated factors, got `{s}`")),
    }
}

fn parse_mode(s: &str) -> Result<ExecutionMode, String> {
    s.parse().map_err(|e: convpipe_core::Error| e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

impl ModelArgs {
    fn resolve(&self) -> Result<Config> {
        let mut c = load_config(self.config.as_deref())?;
        if let Some(b) = self.batch_size {
            c.dims.batch_size = b;
        }
        if let Some(m) = self.max_multipliers {
            c.budget.max_multipliers = m;
        }
        if let Some(a) = self.max_adders {
            c.budget.max_adders = a;
        }
        if let Some(d) = self.pipeline_depth {
            c.budget.pipeline_depth = d;
        }
        if let Some(ns) = self.clock_ns {
            c.budget.clock_ns = ns;
        }
        if let Some(u) = self.unroll_fc {
            c.unroll.fc = u;
        }
        if let Some(u) = self.unroll_out {
            c.unroll.out = u;
        }
        Ok(c)
    }
}

impl DataArgs {
    fn apply(&self, config: &mut Config) -> Result<()> {
        if let Some(d) = &self.data_dir {
            config.data_dir = Some(d.clone());
        }
        match &config.data_dir {
            None => bail!("no data directory: pass --data-dir or set CONVPIPE_DATA_DIR"),
            Some(d) if !d.is_dir() => bail!("data directory {} does not exist", d.display()),
            Some(_) => Ok(()),
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn train(args: TrainArgs) -> Result<()> {
    let mut config = args.model.resolve()?;
    args.data.apply(&mut config)?;
    if let Some(e) = args.epochs {
        config.epochs = e;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(m) = args.mode {
        config.mode = m;
    }
    if args.checkpoint.is_some() {
        config.checkpoint = args.checkpoint;
    }
    if args.report.is_some() {
        config.report = args.report;
    }
    if args.csv.is_some() {
        config.csv = args.csv;
    }
    config.validate()?;

    let run = run_training(&config)?;
    let report = &run.report;
    println!(
        "initial test accuracy {}",
        pct(report.initial_test_accuracy)
    );
    for e in &report.epochs {
        let t = &e.train_latency;
        println!(
            "epoch {:>3}  loss {:.4}  train {}  test {}  | host {:.3}s  accel(model) {:.3}s  sequential {:.3}s  pipelined {:.3}s",
            e.epoch,
            e.mean_loss,
            pct(e.train_accuracy),
            pct(e.test_accuracy),
            t.host_seconds,
            t.accel_seconds,
            t.sequential_seconds,
            t.pipelined_seconds,
        );
    }
    let s = &report.latency_model.training_speedup;
    println!(
        "pipelining speedup {:.2}x (bottleneck: {:?}, host share {:.2})",
        s.pipelining_speedup, s.bottleneck, s.host_share
    );

    if let Some(path) = &config.report {
        let json = serde_json::to_string_pretty(report)?;
        fs::write(path, json).with_context(|| format!("writing report {}", path.display()))?;
        println!("report written to {}", path.display());
    }
    if let Some(path) = &config.csv {
        fs::write(path, report.epochs_csv())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &config.checkpoint {
        println!("checkpoint written to {}", path.display());
    }
    Ok(())
}

fn test(args: TestArgs) -> Result<()> {
    let mut config = args.model.resolve()?;
    args.data.apply(&mut config)?;
    config.validate()?;

    let mut state = checkpoint::load(&args.checkpoint, config.adam)?;
    if state.weights.w1.shape() != (config.dims.pool_map_length, config.dims.layer_size)
        || state.weights.w2.shape() != (config.dims.layer_size, config.dims.class_size)
    {
        bail!(
            "checkpoint {} has weights {:?}/{:?}, which do not match the configured model sizes",
            args.checkpoint.display(),
            state.weights.w1.shape(),
            state.weights.w2.shape()
        );
    }
    let data = Dataset::load_test(&config)?;
    let (_, inference) = pass_estimates(&config)?;
    let eval = evaluate(&config, &mut state, &data, &inference)?;

    println!(
        "test accuracy {} over {} images (loss {:.4})",
        pct(eval.accuracy),
        eval.samples,
        eval.mean_loss
    );
    print_latency(
        "inference",
        &inference,
        &eval.latency,
        config.budget.clock_ns,
    );
    Ok(())
}

fn print_latency(label: &str, pass: &PassEstimate, totals: &LatencyTotals, clock_ns: f64) {
    println!(
        "{label}: {} accelerator cycles/batch ({:.3} ms at {} ns), {} batches",
        pass.total_cycles,
        pass.seconds_per_batch * 1e3,
        clock_ns,
        totals.batches
    );
    println!(
        "{label}: host {:.4}s  accel(model) {:.4}s  sequential {:.4}s  pipelined {:.4}s",
        totals.host_seconds,
        totals.accel_seconds,
        totals.sequential_seconds,
        totals.pipelined_seconds
    );
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let config = args.model.resolve()?;
    config.validate()?;
    let (training, inference) = pass_estimates(&config)?;
    let batch = config.dims.batch_size;
    let epoch = |pass: &PassEstimate, images: usize| {
        let n = images / batch;
        let accel = vec![pass.seconds_per_batch; n];
        let host = vec![args.host_us_per_batch.unwrap_or(0.0) * 1e-6; n];
        LatencyTotals::from_stages(&host, &accel)
    };
    let train_epoch = epoch(&training, args.train_images);
    let test_epoch = epoch(&inference, args.test_images);

    if args.json {
        let doc = serde_json::json!({
            "config": config,
            "training_pass": training,
            "inference_pass": inference,
            "training_epoch": train_epoch,
            "test_epoch": test_epoch,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(());
    }

    for pass in [&inference, &training] {
        let title = match pass.mode {
            PassMode::Inference => "inference pass",
            PassMode::Training => "training pass",
        };
        println!("{title}");
        println!(
            "  {:<18} {:>9} {:>4} {:>7} {:>9} {:>9} {:>6}",
            "nest", "cycles", "II", "tiles", "mults", "adders", "stalls"
        );
        for n in &pass.nests {
            println!(
                "  {:<18} {:>9} {:>4} {:>7} {:>4}/{:<4} {:>4}/{:<4} {:>6}",
                n.nest,
                n.cycles,
                n.effective_ii,
                n.tiles,
                n.multipliers_used,
                n.multipliers_demanded,
                n.adders_used,
                n.adders_demanded,
                n.stall_events.len()
            );
        }
        println!(
            "  compute {} + transfer {} = {} cycles/batch; peak {} multipliers, {} adders",
            pass.compute_cycles,
            pass.transfer_cycles,
            pass.total_cycles,
            pass.peak_multipliers,
            pass.peak_adders
        );
        for s in &pass.storage {
            println!(
                "  storage {:?}: {} arrays, {} elements, {} banks",
                s.class, s.arrays, s.elements, s.banks
            );
        }
    }
    print_latency(
        "training epoch",
        &training,
        &train_epoch,
        config.budget.clock_ns,
    );
    print_latency(
        "test epoch",
        &inference,
        &test_epoch,
        config.budget.clock_ns,
    );
    if args.host_us_per_batch.is_some() {
        let s = speedup_summary(&train_epoch);
        println!(
            "training pipelining speedup {:.2}x (bottleneck: {:?})",
            s.pipelining_speedup, s.bottleneck
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Test(a) => test(a),
        Command::Estimate(a) => estimate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
