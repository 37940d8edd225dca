use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hybridq::datapipe::synthetic;
use hybridq::harness::{
    default_subset, evaluate_streaming, noise_sweep, render_report, render_table, run_matrix, run_pipeline, shot_sweep,
    sweep_csv, write_matrix, write_report, ArtifactBundle, Backend, DatasetKind, ExperimentConfig, ModelKind,
    StopAfter, Store,
};

#[derive(Parser)]
#[command(name = "hybridq", version, about = "Hybrid MLP + quantum-kernel / VQC classifiers on NSL-KDD and Ling-Spam")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a default experiment config.
    Init {
        #[arg(long, value_enum)]
        dataset: DatasetArg,
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "experiment")]
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset in the real on-disk layout.
    Synth {
        #[arg(long, value_enum)]
        dataset: DatasetArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        size: usize,
    },
    /// Load, split and transform the dataset.
    Preprocess(RunArgs),
    /// Train the MLP encoder and fit the embedding scaler.
    TrainEncoder(RunArgs),
    /// Compute and center the train Gram and the validation block.
    BuildKernel(RunArgs),
    /// Cross-validate C and fit the kernel SVM.
    TrainQsvm(RunArgs),
    /// Train the variational classifier on the frozen encoder.
    TrainVqc(RunArgs),
    /// Run every stage and print validation/test metrics.
    Evaluate(RunArgs),
    /// Stream the evaluation subset one sample at a time as CSV audit lines.
    StreamEval {
        #[command(flatten)]
        run: RunArgs,
        /// Stream the whole test split instead of the stratified subset.
        #[arg(long)]
        all: bool,
        /// Also append the audit lines to this file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run several configs over repeated seeds.
    Matrix {
        /// Config files; directories are scanned for `*.toml`.
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value = "artifacts")]
        artifacts: PathBuf,
        #[arg(long, default_value_t = 3)]
        repeats: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Circuit summaries, metrics and plot-ready sweeps for a finished run.
    Report {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated shot counts for a metric-vs-shots CSV.
        #[arg(long, value_delimiter = ',')]
        sweep_shots: Vec<u64>,
        /// Comma-separated noise multipliers for a metric-vs-noise CSV.
        #[arg(long, value_delimiter = ',')]
        sweep_noise: Vec<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetArg {
    Nslkdd,
    Lingspam,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Qsvm,
    Vqc,
    ClassicalBaseline,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "artifacts")]
    artifacts: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    vqc_reps: Option<usize>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    depol1: Option<f64>,
    #[arg(long)]
    depol2: Option<f64>,
    #[arg(long, overrides_with = "no_mitigate")]
    mitigate: bool,
    #[arg(long)]
    no_mitigate: bool,
    /// Sets the split, encoder and quantum seeds together.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, value_enum)]
    backend: Option<Backend>,
}

impl Overrides {
    fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(d) = &self.data {
            c.data.root = d.clone();
        }
        if let Some(v) = self.qubits {
            c.qubits = v;
        }
        if let Some(v) = self.reps {
            c.reps = v;
        }
        if let Some(v) = self.vqc_reps {
            c.vqc_reps = v;
        }
        if let Some(v) = self.shots {
            c.shots = v;
        }
        if let Some(v) = self.depol1 {
            c.noise.depol1 = v;
        }
        if let Some(v) = self.depol2 {
            c.noise.depol2 = v;
        }
        if self.mitigate {
            c.mitigate = true;
        }
        if self.no_mitigate {
            c.mitigate = false;
        }
        if let Some(s) = self.seed {
            c.seeds.split = s;
            c.seeds.encoder = s;
            c.seeds.quantum = s;
        }
        if let Some(v) = self.backend {
            c.backend = v;
        }
        let schedule = if c.model == ModelKind::Vqc {
            c.vqc_schedule.get_or_insert_with(|| c.schedule.clone())
        } else {
            &mut c.schedule
        };
        if let Some(v) = self.lr {
            schedule.lr = v;
        }
        if let Some(v) = self.weight_decay {
            schedule.weight_decay = v;
        }
        if let Some(v) = self.patience {
            schedule.patience = v;
        }
    }
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    overrides.apply(&mut c);
    c.validate()?;
    Ok(c)
}

fn run(args: &RunArgs, stop: StopAfter, require: Option<ModelKind>) -> Result<(ExperimentConfig, Store, PathBuf)> {
    let config = load_config(&args.config, &args.overrides)?;
    if let Some(m) = require {
        if config.model != m {
            bail!("config {} has model {:?}, this command needs {m:?}", args.config.display(), config.model);
        }
    }
    let store = Store::new(&args.artifacts)?;
    let out = run_pipeline(&config, &store, stop)?;
    for s in &out.manifest.stages {
        eprintln!("{:<10} {}", s.name, store.resolve(s).display());
    }
    Ok((config, store, out.run_dir))
}

fn collect_configs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "toml"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!("no config files found");
    }
    Ok(out)
}

struct Tee<'a> {
    out: io::StdoutLock<'a>,
    log: Option<File>,
}

impl Write for Tee<'_> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.out.write_all(buf)?;
        if let Some(f) = &mut self.log {
            f.write_all(buf)?;
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        self.out.flush()?;
        if let Some(f) = &mut self.log {
            f.flush()?;
        }
        Ok(())
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Init { dataset, model, data, id, out } => {
            let dataset = match dataset {
                DatasetArg::Nslkdd => DatasetKind::Nslkdd,
                DatasetArg::Lingspam => DatasetKind::Lingspam,
            };
            let model = match model {
                ModelArg::Qsvm => ModelKind::Qsvm,
                ModelArg::Vqc => ModelKind::Vqc,
                ModelArg::ClassicalBaseline => ModelKind::ClassicalBaseline,
            };
            let text = ExperimentConfig::new(&id, dataset, model, &data).to_toml()?;
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Synth { dataset, out, seed, size } => match dataset {
            DatasetArg::Nslkdd => synthetic::write_nslkdd(&out, size, size / 2, 0.6, seed)?,
            DatasetArg::Lingspam => synthetic::write_lingspam(&out, size, 0.17, 0.3, seed)?,
        },
        Command::Preprocess(a) => {
            run(&a, StopAfter::Preprocess, None)?;
        }
        Command::TrainEncoder(a) => {
            run(&a, StopAfter::Encoder, None)?;
        }
        Command::BuildKernel(a) => {
            run(&a, StopAfter::Kernel, Some(ModelKind::Qsvm))?;
        }
        Command::TrainQsvm(a) => {
            run(&a, StopAfter::Model, Some(ModelKind::Qsvm))?;
        }
        Command::TrainVqc(a) => {
            run(&a, StopAfter::Model, Some(ModelKind::Vqc))?;
        }
        Command::Evaluate(a) => {
            let (_, store, dir) = run(&a, StopAfter::Evaluate, None)?;
            let bundle = ArtifactBundle::open(&dir, &store)?;
            let e = bundle.manifest.evaluation.as_ref().context("run has no evaluation")?;
            println!("{}", serde_json::to_string_pretty(e)?);
        }
        Command::StreamEval { run: a, all, log } => {
            let (config, store, dir) = run(&a, StopAfter::Evaluate, None)?;
            let bundle = ArtifactBundle::open(&dir, &store)?;
            let indices = if all { (0..bundle.split.test.len()).collect() } else { default_subset(&bundle)? };
            let log = match log {
                Some(p) => Some(File::create(&p).with_context(|| format!("creating {}", p.display()))?),
                None => None,
            };
            let mut tee = Tee { out: io::stdout().lock(), log };
            let outcome = evaluate_streaming(&bundle, &indices, config.backend, &mut tee)?;
            tee.flush()?;
            eprintln!("{}", serde_json::to_string_pretty(&outcome.report)?);
        }
        Command::Matrix { configs, artifacts, repeats, workers, overrides } => {
            let configs =
                collect_configs(&configs)?.iter().map(|p| load_config(p, &overrides)).collect::<Result<Vec<_>>>()?;
            let store = Store::new(&artifacts)?;
            let result = run_matrix(&configs, repeats, &store, workers)?;
            write_matrix(&result, &artifacts)?;
            print!("{}", render_table(&result));
            for r in result.rows.iter().filter(|r| r.error.is_some()) {
                eprintln!("{} repeat {:?}: {}", r.id, r.repeat, r.error.as_deref().unwrap_or_default());
            }
        }
        Command::Report { run: a, sweep_shots, sweep_noise } => {
            let (_, store, dir) = run(&a, StopAfter::Evaluate, None)?;
            let bundle = ArtifactBundle::open(&dir, &store)?;
            let report = write_report(&bundle, &dir)?;
            print!("{}", render_report(&report));
            if !sweep_shots.is_empty() || !sweep_noise.is_empty() {
                let subset = default_subset(&bundle)?;
                if !sweep_shots.is_empty() {
                    let path = dir.join("metric_vs_shots.csv");
                    std::fs::write(&path, sweep_csv(&shot_sweep(&bundle, &subset, &sweep_shots)?))?;
                    eprintln!("wrote {}", path.display());
                }
                if !sweep_noise.is_empty() {
                    let path = dir.join("metric_vs_noise.csv");
                    std::fs::write(&path, sweep_csv(&noise_sweep(&bundle, &subset, &sweep_noise)?))?;
                    eprintln!("wrote {}", path.display());
                }
            }
        }
    }
    Ok(())
}
