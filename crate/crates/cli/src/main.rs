//! `iqp`: generate datasets, train base circuits and controllers, sample,
//! and emit reports. Every command that writes files also writes a
//! `<output>.manifest.json` that `iqp replay` can re-run.

mod config;
mod files;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use iqp_core::analysis::{hw_histogram, overhead_report, parameter_heatmap, BiasReport};
use iqp_core::controller::{ControlObjective, ControllerBundle, ObjectiveKind};
use iqp_core::crz::to_crz_program;
use iqp_core::datasets::{blob_dataset, blob_patterns, ising_gibbs_sample, IsingConfig};
use iqp_core::evaluator::{full_distribution, sample};
use iqp_core::rng;
use iqp_core::trainer::{prepare_base, prepare_bias_mitigated, prepare_conditional, train_observed, TrainHistory};
use iqp_core::IqpCircuit;

use config::RunConfig;
use manifest::Manifest;

const THREADS_ENV: &str = "IQP_THREADS";

#[derive(Parser)]
#[command(name = "iqp", version, about = "IQP circuit generative models with lightweight controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark dataset.
    GenData {
        #[command(subcommand)]
        kind: GenData,
    },
    /// Train a full-order base circuit on a dataset.
    TrainBase(TrainBaseArgs),
    /// Train a controller on top of a frozen base circuit.
    TrainController(TrainControllerArgs),
    /// Retrain a base circuit with the pattern-variance penalty.
    TrainBias(TrainBiasArgs),
    /// Draw samples from a circuit (optionally with a controller).
    Sample(SampleArgs),
    /// Emit a CSV (and SVG for heatmaps) report.
    Report {
        #[command(subcommand)]
        kind: Report,
    },
    /// Write the circuit as an OpenQASM 3 program of h, cx and rz gates.
    ExportQasm(ExportArgs),
    /// Re-run the command recorded in a manifest after checking its inputs.
    Replay { manifest: PathBuf },
}

#[derive(Subcommand)]
enum GenData {
    /// Metropolis samples of the periodic 2D Ising model.
    Ising {
        #[arg(long, default_value_t = 4)]
        side: usize,
        #[arg(long, default_value_t = 2.0)]
        temperature: f64,
        #[arg(long, default_value_t = 10_000)]
        burn_in: usize,
        #[arg(long, default_value_t = 10)]
        thinning: usize,
        #[arg(long, default_value_t = 5000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Eight 2×2 blobs on a 4×4 grid with bit-flip noise.
    Blob {
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainCommon {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
    /// Overrides `train.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Training history CSV; defaults to `<out>.history.csv`.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Add a per-iteration wall-clock column to the history.
    #[arg(long)]
    with_time: bool,
    /// Write `<out>.ckpt-<iter>` every this many iterations.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainBaseArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    common: TrainCommon,
}

#[derive(Args)]
struct TrainControllerArgs {
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    objective: Option<Objective>,
    #[command(flatten)]
    common: TrainCommon,
}

#[derive(Args)]
struct TrainBiasArgs {
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// One pattern bitstring per line; defaults to the eight blob patterns.
    #[arg(long)]
    patterns: Option<PathBuf>,
    #[command(flatten)]
    common: TrainCommon,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Objective {
    HighWeight,
    LowWeight,
    Balanced,
}

impl From<Objective> for ObjectiveKind {
    fn from(o: Objective) -> Self {
        match o {
            Objective::HighWeight => ObjectiveKind::HighWeight,
            Objective::LowWeight => ObjectiveKind::LowWeight,
            Objective::Balanced => ObjectiveKind::Balanced,
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long)]
    controller: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    shots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// One bitstring per line.
    #[arg(long)]
    out: PathBuf,
    /// Also write `bitstring,count` here.
    #[arg(long)]
    counts: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Report {
    /// Hamming-weight histogram of a sample or dataset file.
    Hw {
        #[arg(long)]
        samples: PathBuf,
        /// Print the mass in `lo:hi` (inclusive).
        #[arg(long)]
        range: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pattern frequencies and their spread, from samples or from a circuit's exact distribution.
    Bias {
        #[arg(long, conflicts_with = "circuit")]
        samples: Option<PathBuf>,
        #[arg(long)]
        circuit: Option<PathBuf>,
        #[arg(long, requires = "circuit")]
        controller: Option<PathBuf>,
        #[arg(long)]
        patterns: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Controller parameter overhead relative to the order-6 base.
    Overhead {
        /// Comma-separated qubit counts.
        #[arg(long, default_value = "16")]
        n: String,
        /// Comma-separated numbers of controlled modes.
        #[arg(long, default_value = "1,3,5,7")]
        modes: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pairwise parameter magnitudes as `<out>.csv` and `<out>.svg`.
    Heatmap {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        controller: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long)]
    controller: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match configure_threads().and_then(|_| run(cli.command, &argv)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}

/// 1 generic, 3 I/O, 4 capacity, 5 malformed input, 6 numerical failure.
fn exit_status(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<iqp_core::Error>() {
            return match err {
                iqp_core::Error::Capacity { .. } => 4,
                iqp_core::Error::Parse { .. } => 5,
                iqp_core::Error::NonFinite { .. } => 6,
                iqp_core::Error::Io(_) => 3,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().ok().filter(|&n| n > 0).with_context(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(command: Command, argv: &[String]) -> Result<()> {
    match command {
        Command::GenData { kind } => gen_data(kind, argv),
        Command::TrainBase(a) => train_base_cmd(a, argv),
        Command::TrainController(a) => train_controller_cmd(a, argv),
        Command::TrainBias(a) => train_bias_cmd(a, argv),
        Command::Sample(a) => sample_cmd(a, argv),
        Command::Report { kind } => report_cmd(kind, argv),
        Command::ExportQasm(a) => export_cmd(a, argv),
        Command::Replay { manifest } => replay(&manifest),
    }
}

fn replay(path: &Path) -> Result<()> {
    let m = Manifest::load(path)?;
    if m.version != env!("CARGO_PKG_VERSION") {
        bail!("manifest written by version {}, this is {}", m.version, env!("CARGO_PKG_VERSION"));
    }
    m.verify_inputs()?;
    let cli = Cli::try_parse_from(std::iter::once("iqp".to_string()).chain(m.argv.iter().cloned()))
        .context("manifest arguments no longer parse")?;
    if matches!(cli.command, Command::Replay { .. }) {
        bail!("a manifest cannot record a replay");
    }
    run(cli.command, &m.argv)
}

fn gen_data(kind: GenData, argv: &[String]) -> Result<()> {
    let (data, seed, out) = match kind {
        GenData::Ising { side, temperature, burn_in, thinning, samples, seed, out } => {
            let cfg = IsingConfig { side, temperature, burn_in_sweeps: burn_in, thinning };
            (ising_gibbs_sample(&cfg, samples, &mut rng::seeded(seed))?, seed, out)
        }
        GenData::Blob { noise, samples, seed, out } => (blob_dataset(noise, samples, &mut rng::seeded(seed))?, seed, out),
    };
    let mut provenance = data.provenance.clone();
    provenance.seed = Some(seed);
    files::write(&out, &data.to_text())?;
    let meta = files::sibling(&out, ".meta.json");
    files::write(&meta, &(serde_json::to_string_pretty(&provenance)? + "\n"))?;
    let mut m = Manifest::new("gen-data", argv);
    m.seed = Some(seed);
    m.output(&out);
    m.output(&meta);
    m.write_beside(&out)?;
    println!("wrote {} samples of {} bits to {}", data.len(), data.n(), out.display());
    Ok(())
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().with_context(|| format!("missing required flag --{flag}"))
}

/// Loads the configuration, or prints it and returns `None` for `--dump-config`.
fn load_config(c: &TrainCommon) -> Result<Option<RunConfig>> {
    let mut cfg = RunConfig::load(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.train.seed = s;
    }
    if c.dump_config {
        print!("{}", cfg.to_toml());
        return Ok(None);
    }
    if c.checkpoint_every == Some(0) {
        bail!("--checkpoint-every must be positive");
    }
    Ok(Some(cfg))
}

fn start_manifest(command: &str, argv: &[String], c: &TrainCommon, cfg: &RunConfig) -> Result<Manifest> {
    let mut m = Manifest::new(command, argv);
    m.seed = Some(cfg.train.seed);
    m.config(cfg)?;
    if let Some(p) = &c.config {
        m.input(p)?;
    }
    Ok(m)
}

/// Writes the history CSV and the manifest for a finished training run.
fn finish_training(mut m: Manifest, c: &TrainCommon, out: &Path, history: &TrainHistory) -> Result<()> {
    let hist_path = c.history.clone().unwrap_or_else(|| files::sibling(out, ".history.csv"));
    files::write(&hist_path, &history.to_csv(c.with_time))?;
    m.output(out);
    m.output(&hist_path);
    m.write_beside(out)?;
    let last = history.records.last().map_or(f64::NAN, |r| r.loss);
    match history.converged_at {
        Some(it) => println!("converged after {it} iterations, final loss {last:.6e}"),
        None => println!("stopped at {} iterations, final loss {last:.6e}", history.iterations()),
    }
    Ok(())
}

fn checkpointer<'a>(
    c: &'a TrainCommon,
    out: &'a Path,
    render: impl Fn(&[f64]) -> Result<String> + 'a,
) -> impl FnMut(usize, &[f64]) -> iqp_core::Result<()> + 'a {
    move |iter, theta| {
        if let Some(k) = c.checkpoint_every {
            if iter % k == 0 {
                let text = render(theta).map_err(|e| iqp_core::Error::InvalidArgument(format!("{e:#}")))?;
                files::write(&files::sibling(out, &format!(".ckpt-{iter}")), &text)
                    .map_err(|e| iqp_core::Error::Io(std::io::Error::other(format!("{e:#}"))))?;
            }
        }
        Ok(())
    }
}

fn train_base_cmd(a: TrainBaseArgs, argv: &[String]) -> Result<()> {
    let Some(cfg) = load_config(&a.common)? else { return Ok(()) };
    let data_path = required(&a.data, "data")?;
    let out = required(&a.common.out, "out")?;
    let data = files::read_dataset(data_path)?;
    let mut m = start_manifest("train-base", argv, &a.common, &cfg)?;
    m.input(data_path)?;
    let (start, objective) = prepare_base(&data, cfg.base.max_order, cfg.base.init(), &cfg.train)?;
    let mut observe = checkpointer(&a.common, out, |t| Ok(start.with_theta(t.to_vec())?.to_text()));
    let (trained, history) =
        train_observed(&start, &objective, &vec![true; start.len()], &cfg.train, &mut observe)?;
    files::write(out, &trained.to_text())?;
    finish_training(m, &a.common, out, &history)
}

fn train_controller_cmd(a: TrainControllerArgs, argv: &[String]) -> Result<()> {
    let Some(cfg) = load_config(&a.common)? else { return Ok(()) };
    let base_path = required(&a.base, "base")?;
    let data_path = required(&a.data, "data")?;
    let objective = ObjectiveKind::from(*required(&a.objective, "objective")?);
    let out = required(&a.common.out, "out")?;
    let base = files::read_circuit(base_path)?;
    let data = files::read_dataset(data_path)?;
    let mut m = start_manifest("train-controller", argv, &a.common, &cfg)?;
    m.input(base_path)?;
    m.input(data_path)?;
    let obj = ControlObjective::new(objective);
    let (bundle, loss) = prepare_conditional(&base, obj, &data, cfg.controller.spread(), &cfg.train)?;
    let seed = cfg.train.seed;
    let render = |t: &[f64]| -> Result<String> {
        Ok(ControllerBundle { circuit: bundle.circuit.with_theta(t.to_vec())?, objective: obj }.to_text(seed))
    };
    let mut observe = checkpointer(&a.common, out, render);
    let (circuit, history) =
        train_observed(&bundle.circuit, &loss, &vec![true; bundle.circuit.len()], &cfg.train, &mut observe)?;
    files::write(out, &ControllerBundle { circuit, objective: obj }.to_text(seed))?;
    finish_training(m, &a.common, out, &history)
}

fn read_patterns(path: Option<&Path>, m: &mut Manifest) -> Result<(usize, Vec<u64>)> {
    match path {
        None => Ok((iqp_core::datasets::BLOB_BITS, blob_patterns())),
        Some(p) => {
            m.input(p)?;
            files::read_bitstrings(p)
        }
    }
}

fn train_bias_cmd(a: TrainBiasArgs, argv: &[String]) -> Result<()> {
    let Some(cfg) = load_config(&a.common)? else { return Ok(()) };
    let base_path = required(&a.base, "base")?;
    let data_path = required(&a.data, "data")?;
    let out = required(&a.common.out, "out")?;
    let base = files::read_circuit(base_path)?;
    let data = files::read_dataset(data_path)?;
    let mut m = start_manifest("train-bias", argv, &a.common, &cfg)?;
    m.input(base_path)?;
    m.input(data_path)?;
    let (pn, patterns) = read_patterns(a.patterns.as_deref(), &mut m)?;
    if pn != base.n_qubits() {
        bail!("patterns have {pn} bits but the circuit has {} qubits", base.n_qubits());
    }
    let (start, loss) = prepare_bias_mitigated(&base, &data, &patterns, cfg.controller.spread(), &cfg.train)?;
    let mut observe = checkpointer(&a.common, out, |t| Ok(start.with_theta(t.to_vec())?.to_text()));
    let (trained, history) = train_observed(&start, &loss, &vec![true; start.len()], &cfg.train, &mut observe)?;
    files::write(out, &trained.to_text())?;
    finish_training(m, &a.common, out, &history)
}

fn model_with_inputs(circuit: &Path, controller: Option<&Path>, m: &mut Manifest) -> Result<IqpCircuit> {
    m.input(circuit)?;
    if let Some(c) = controller {
        m.input(c)?;
    }
    files::read_model(circuit, controller)
}

fn sample_cmd(a: SampleArgs, argv: &[String]) -> Result<()> {
    let mut m = Manifest::new("sample", argv);
    m.seed = Some(a.seed);
    let c = model_with_inputs(&a.circuit, a.controller.as_deref(), &mut m)?;
    let shots = sample(&c, a.shots, &mut rng::seeded(a.seed))?;
    files::write(&a.out, &files::samples_text(&shots, c.n_qubits()))?;
    m.output(&a.out);
    if let Some(p) = &a.counts {
        files::write(p, &files::counts_csv(&shots, c.n_qubits()))?;
        m.output(p);
    }
    m.write_beside(&a.out)?;
    Ok(())
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let (lo, hi) = s.split_once(':').with_context(|| format!("range must look like lo:hi, got {s:?}"))?;
    Ok((lo.trim().parse()?, hi.trim().parse()?))
}

fn report_cmd(kind: Report, argv: &[String]) -> Result<()> {
    let mut m = Manifest::new("report", argv);
    let out = match kind {
        Report::Hw { samples, range, out } => {
            m.input(&samples)?;
            let (n, xs) = files::read_bitstrings(&samples)?;
            let h = hw_histogram(&xs, n)?;
            files::write(&out, &h.to_csv())?;
            if let Some(r) = range {
                let (lo, hi) = parse_range(&r)?;
                println!("mass in [{lo}, {hi}]: {:.4}", h.mass_in_range(lo, hi));
            }
            println!("mean weight {:.4}, std {:.4}", h.mean(), h.std());
            out
        }
        Report::Bias { samples, circuit, controller, patterns, out } => {
            let (pn, patterns) = read_patterns(patterns.as_deref(), &mut m)?;
            let report = match (samples, circuit) {
                (Some(s), None) => {
                    m.input(&s)?;
                    let (n, xs) = files::read_bitstrings(&s)?;
                    if n != pn {
                        bail!("samples have {n} bits but patterns have {pn}");
                    }
                    BiasReport::from_samples(&xs, &patterns)?
                }
                (None, Some(c)) => {
                    let model = model_with_inputs(&c, controller.as_deref(), &mut m)?;
                    if model.n_qubits() != pn {
                        bail!("circuit has {} qubits but patterns have {pn} bits", model.n_qubits());
                    }
                    BiasReport::from_distribution(&full_distribution(&model)?, &patterns)?
                }
                _ => bail!("give exactly one of --samples or --circuit"),
            };
            files::write(&out, &report.to_csv())?;
            println!(
                "std {:.4}, max/min {:.3}, total deviation {:.4}",
                report.std, report.max_min_ratio, report.total_deviation
            );
            out
        }
        Report::Overhead { n, modes, out } => {
            let r = overhead_report(&files::parse_list(&n)?, &files::parse_list(&modes)?)?;
            files::write(&out, &r.to_csv())?;
            out
        }
        Report::Heatmap { circuit, controller, out } => {
            let model = model_with_inputs(&circuit, controller.as_deref(), &mut m)?;
            let (csv, svg) = parameter_heatmap(&model);
            let (csv_path, svg_path) = (files::sibling(&out, ".csv"), files::sibling(&out, ".svg"));
            files::write(&csv_path, &csv)?;
            files::write(&svg_path, &svg)?;
            m.output(&svg_path);
            csv_path
        }
    };
    m.output(&out);
    m.write_beside(&out)?;
    Ok(())
}

fn export_cmd(a: ExportArgs, argv: &[String]) -> Result<()> {
    let mut m = Manifest::new("export-qasm", argv);
    let c = model_with_inputs(&a.circuit, a.controller.as_deref(), &mut m)?;
    files::write(&a.out, &to_crz_program(&c).to_qasm())?;
    m.output(&a.out);
    m.write_beside(&a.out)?;
    Ok(())
}
