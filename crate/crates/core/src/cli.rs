//! The `wncs-alloc` command line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::ChannelSim;
use crate::config::{PipelineConfig, SystemConfig};
use crate::dataset::{
    self, read_dataset, read_gains_csv, write_atomic, write_dataset, DATASET_FORMAT_VERSION,
};
use crate::ddpm::{self, Denoiser, ModelCheckpoint, SampleOptions, TrainingSet, CHECKPOINT_FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::eval::{self, DdpmDecider, Decider, Policy, PolicyResult, RandomDecider, SolverDecider, TimingResult};
use crate::solver;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const RESULTS_FORMAT_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "wncs-alloc", about = "Power-minimal blocklength allocation for wireless control loops", disable_version_flag = true)]
struct Cli {
    /// Pipeline config file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw of the command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print program and file-format versions.
    #[arg(long)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate frames and solve each for the training corpus.
    GenDataset(GenDatasetArgs),
    /// Solve the allocation problem for every row of a gains file.
    Solve(SolveArgs),
    /// Train a diffusion model on a dataset.
    Train(TrainArgs),
    /// Generate blocklengths with a trained model.
    Infer(InferArgs),
    /// Compare policies on simulated channels.
    Eval(EvalArgs),
    /// Rebuild report tables from saved evaluation results.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GenDatasetArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// CSV with columns `frame,g_1..g_N`.
    #[arg(long)]
    gains: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Gains CSV, or `simulate` to draw frames from the channel model.
    #[arg(long)]
    gains: String,
    #[arg(long)]
    out: PathBuf,
    /// Frames to draw with `--gains simulate`.
    #[arg(long, default_value_t = 100)]
    frames: usize,
    /// No injected noise in the reverse process.
    #[arg(long)]
    deterministic: bool,
    /// Also output blocklengths projected onto the feasible set.
    #[arg(long)]
    project_feasible: bool,
    /// Use the raw instead of the EMA parameters.
    #[arg(long)]
    no_ema: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Checkpoint for the ddpm policy; repeat for several node counts.
    #[arg(long)]
    ckpt: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    project_feasible: bool,
    /// Skip the latency benchmark.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// `results.json` written by `eval`.
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Record written next to every output.
#[derive(Debug, Serialize)]
struct RunManifest {
    format_version: u32,
    program_version: &'static str,
    subcommand: String,
    config: PipelineConfig,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    formats: Formats,
    started_unix_s: u64,
    wall_clock_s: f64,
}

#[derive(Debug, Serialize)]
struct Formats {
    dataset: u32,
    checkpoint: u32,
    results: u32,
    manifest: u32,
}

fn formats() -> Formats {
    Formats {
        dataset: DATASET_FORMAT_VERSION,
        checkpoint: CHECKPOINT_FORMAT_VERSION,
        results: RESULTS_FORMAT_VERSION,
        manifest: MANIFEST_FORMAT_VERSION,
    }
}

fn version_text() -> String {
    let f = formats();
    format!(
        "wncs-alloc {}\ndataset format {}\ncheckpoint format {}\nresults format {}\nmanifest format {}",
        env!("CARGO_PKG_VERSION"),
        f.dataset,
        f.checkpoint,
        f.results,
        f.manifest
    )
}

/// Run the CLI on `argv` (without the program name) and return the exit
/// code: 0 on success, 1 on domain or I/O errors, 2 on usage errors.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args = std::iter::once(std::ffi::OsString::from("wncs-alloc")).chain(argv.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if cli.version {
        println!("{}", version_text());
        return 0;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (see --help)");
        return 2;
    };
    let threads = cli.threads.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return 1;
        }
    };
    let ctx = Context { config_path: cli.config, seed: cli.seed };
    match pool.install(|| dispatch(&ctx, command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Context {
    config_path: Option<PathBuf>,
    seed: Option<u64>,
}

impl Context {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config_path {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::from_toml_with_env("", "<defaults>", std::env::vars())?,
        };
        if let Some(s) = self.seed {
            cfg.dataset.seed = s;
            cfg.train.seed = s;
            cfg.eval.seed = s;
        }
        Ok(cfg)
    }

    fn inputs(&self, extra: &[&Path]) -> Vec<PathBuf> {
        self.config_path.iter().cloned().chain(extra.iter().map(|p| p.to_path_buf())).collect()
    }
}

fn dispatch(ctx: &Context, command: Command) -> Result<()> {
    let started = Instant::now();
    let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let (name, cfg, inputs, outputs) = match command {
        Command::GenDataset(a) => ("gen-dataset", gen_dataset(ctx, &a)?, ctx.inputs(&[]), vec![a.out.clone(), dataset::sidecar_path(&a.out)]),
        Command::Solve(a) => ("solve", solve(ctx, &a)?, ctx.inputs(&[&a.gains]), vec![a.out.clone()]),
        Command::Train(a) => ("train", train(ctx, &a)?, ctx.inputs(&[&a.dataset]), vec![a.out.clone()]),
        Command::Infer(a) => {
            let cfg = infer(ctx, &a)?;
            let mut inputs = ctx.inputs(&[&a.ckpt]);
            if a.gains != "simulate" {
                inputs.push(PathBuf::from(&a.gains));
            }
            ("infer", cfg, inputs, vec![a.out.clone()])
        }
        Command::Eval(a) => {
            let cfg = eval_cmd(ctx, &a)?;
            let ckpts: Vec<&Path> = a.ckpt.iter().map(PathBuf::as_path).collect();
            ("eval", cfg, ctx.inputs(&ckpts), vec![a.out.clone()])
        }
        Command::Report(a) => ("report", report_cmd(ctx, &a)?, ctx.inputs(&[&a.results]), vec![a.out.clone()]),
    };
    let manifest = RunManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        program_version: env!("CARGO_PKG_VERSION"),
        subcommand: name.to_string(),
        config: cfg,
        seed: ctx.seed,
        inputs,
        outputs: outputs.clone(),
        formats: formats(),
        started_unix_s,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    let dir = manifest_dir(&outputs[0], name);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&dir.join(format!("{name}.manifest.json")), json.as_bytes())
}

/// Directory outputs go into: the path itself for directory outputs, else
/// its parent.
fn manifest_dir(out: &Path, name: &str) -> PathBuf {
    if matches!(name, "eval" | "report") {
        return out.to_path_buf();
    }
    match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn gen_dataset(ctx: &Context, a: &GenDatasetArgs) -> Result<PipelineConfig> {
    let mut cfg = ctx.config()?;
    if let Some(f) = a.frames {
        cfg.dataset.frames = f;
    }
    let data = dataset::generate_dataset(&cfg.system, &cfg.dataset)?;
    write_dataset(&a.out, &data)?;
    eprintln!(
        "wrote {} frames ({} skipped as infeasible) to {}",
        data.records.len(),
        data.meta.skipped_frames.len(),
        a.out.display()
    );
    Ok(cfg)
}

fn solve(ctx: &Context, a: &SolveArgs) -> Result<PipelineConfig> {
    let cfg = ctx.config()?;
    let sys = &cfg.system;
    let rows = read_gains_csv(&a.gains)?;
    let mut out = String::from("frame,node,m,k,h_s,p,tx_power_w,avg_power_w,total_avg_power_w,status\n");
    let mut failed = 0;
    for (frame, gains) in &rows {
        if gains.len() != sys.node_count {
            return Err(Error::Mismatch(format!(
                "{}: frame {frame} has {} gains, config has N = {}",
                a.gains.display(),
                gains.len(),
                sys.node_count
            )));
        }
        match solver::solve_network(gains, sys) {
            Ok(alloc) => {
                for n in &alloc.nodes {
                    writeln!(
                        out,
                        "{frame},{},{},{},{:e},{:e},{:e},{:e},{:e},ok",
                        n.node_id + 1,
                        n.m,
                        n.k,
                        n.h_s,
                        n.p,
                        n.tx_power_w,
                        n.avg_power_w,
                        alloc.total_avg_power_w
                    )
                    .unwrap();
                }
            }
            Err(e @ (Error::InfeasibleLink { .. } | Error::NetworkInfeasible { .. })) => {
                failed += 1;
                eprintln!("frame {frame}: {e}");
                writeln!(out, "{frame},,,,,,,,,infeasible").unwrap();
            }
            Err(e) => return Err(e),
        }
    }
    write_atomic(&a.out, out.as_bytes())?;
    eprintln!("solved {} of {} frames into {}", rows.len() - failed, rows.len(), a.out.display());
    Ok(cfg)
}

fn train(ctx: &Context, a: &TrainArgs) -> Result<PipelineConfig> {
    let mut cfg = ctx.config()?;
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    let data = read_dataset(&a.dataset)?;
    if ctx.config_path.is_some() && data.meta.config != cfg.system {
        eprintln!("warning: dataset was generated with a different system config; using the dataset's");
    }
    cfg.system = data.meta.config.clone();
    let set = TrainingSet::from_dataset(&data)?;
    let sched = cfg.ddpm.schedule()?;
    let arch = cfg.ddpm.denoiser(data.meta.n);
    let epochs = cfg.train.epochs;
    let trained = ddpm::train(&set, &arch, &sched, &cfg.train, |log| {
        eprintln!("epoch {}/{epochs}: loss {:.6} lr {:.3e}", log.epoch + 1, log.mean_loss, log.learning_rate);
    })?;
    let ckpt = ModelCheckpoint {
        params: trained.params,
        ema: trained.ema,
        schedule: sched,
        condition: data.meta.condition.clone(),
        codec: data.meta.codec,
        system: data.meta.config.clone(),
        ddpm: cfg.ddpm.clone(),
        train: cfg.train.clone(),
        epoch_losses: trained.epoch_losses,
    };
    ckpt.save(&a.out)?;
    eprintln!("saved checkpoint to {}", a.out.display());
    Ok(cfg)
}

fn infer(ctx: &Context, a: &InferArgs) -> Result<PipelineConfig> {
    let ckpt = ModelCheckpoint::load(&a.ckpt)?;
    let mut cfg = ctx.config()?;
    if ctx.config_path.is_some() {
        ckpt.check_compatible(&cfg.system)?;
    } else {
        cfg.system = ckpt.system.clone();
    }
    let sys = &cfg.system;
    let seed = ctx.seed.unwrap_or(0);

    let rows: Vec<(u64, Vec<f64>)> = if a.gains == "simulate" {
        let mut sim = ChannelSim::new(sys, seed);
        (0..a.frames as u64).map(|f| (f, sim.next_gains())).collect()
    } else {
        read_gains_csv(Path::new(&a.gains))?
    };
    if rows.is_empty() {
        return Err(Error::Domain("no frames to infer".into()));
    }
    let gains: Vec<Vec<f64>> = rows.iter().map(|(_, g)| g.clone()).collect();
    let opts = SampleOptions {
        deterministic: a.deterministic,
        use_ema: !a.no_ema,
        posterior_variance: ckpt.ddpm.posterior_variance,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(32);
    let (_, ms) = ckpt.sample_gains(&gains, &mut rng, &opts)?;

    let n = ckpt.n();
    let mut out = String::from("frame");
    for i in 1..=n {
        write!(out, ",m_{i}").unwrap();
    }
    if a.project_feasible {
        for i in 1..=n {
            write!(out, ",projected_m_{i}").unwrap();
        }
    }
    out.push_str(",total_avg_power_w,violations\n");
    for ((frame, g), m) in rows.iter().zip(&ms) {
        let c1: Vec<f64> = g.iter().map(|&x| sys.c1_for_gain(x)).collect();
        let score = eval::score_blocklengths(m, &c1, sys)?;
        write!(out, "{frame}").unwrap();
        for v in m {
            write!(out, ",{v}").unwrap();
        }
        if a.project_feasible {
            match eval::project_feasible(m, &c1, sys) {
                Ok(pm) => pm.iter().for_each(|v| write!(out, ",{v}").unwrap()),
                Err(Error::InfeasibleLink { .. } | Error::NetworkInfeasible { .. }) => (0..n).for_each(|_| out.push(',')),
                Err(e) => return Err(e),
            }
        }
        let labels: Vec<&str> = score.violated.iter().map(|c| c.label()).collect();
        writeln!(out, ",{:e},{}", score.total_power_w, labels.join(";")).unwrap();
    }
    write_atomic(&a.out, out.as_bytes())?;
    eprintln!("wrote {} allocations to {}", rows.len(), a.out.display());
    Ok(cfg)
}

#[derive(Serialize, serde::Deserialize)]
struct ResultsFile {
    format_version: u32,
    results: Vec<PolicyResult>,
    timing: Vec<TimingResult>,
}

fn eval_cmd(ctx: &Context, a: &EvalArgs) -> Result<PipelineConfig> {
    let mut cfg = ctx.config()?;
    let opts = &mut cfg.eval;
    if let Some(p) = &a.policies {
        opts.policies = p.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    if let Some(s) = a.seeds {
        opts.seeds = s;
    }
    if let Some(e) = a.episodes {
        opts.episodes = e;
    }
    if let Some(n) = &a.n {
        opts.ns = n.clone();
    }
    opts.deterministic |= a.deterministic;
    opts.project_feasible |= a.project_feasible;
    let opts = cfg.eval.clone();
    if opts.ns.is_empty() || opts.ns.contains(&0) {
        return Err(Error::Usage("--n needs positive node counts".into()));
    }

    let ckpts = a.ckpt.iter().map(|p| ModelCheckpoint::load(p)).collect::<Result<Vec<_>>>()?;
    let want_ddpm = opts.policies.contains(&Policy::Ddpm);
    if want_ddpm && ckpts.is_empty() {
        return Err(Error::Usage("the ddpm policy needs --ckpt".into()));
    }

    let mut results = Vec::new();
    for &n in &opts.ns {
        let sys = SystemConfig { node_count: n, ..cfg.system.clone() };
        let ckpt = ckpts.iter().find(|c| c.n() == n);
        let policies: Vec<Policy> = opts.policies.iter().copied().filter(|&p| p != Policy::Ddpm || ckpt.is_some()).collect();
        if want_ddpm && ckpt.is_none() {
            eprintln!("warning: no checkpoint for N = {n}; skipping the ddpm policy there");
        }
        if policies.is_empty() {
            continue;
        }
        eprintln!("evaluating {} at N = {n}", policies.iter().map(|p| p.name()).collect::<Vec<_>>().join(","));
        results.extend(eval::evaluate_policies(&policies, &sys, &opts, ckpt)?);
    }
    if results.is_empty() {
        return Err(Error::Usage("nothing was evaluated".into()));
    }

    let mut timing = Vec::new();
    if !a.no_timing {
        for &p in &opts.policies {
            timing.extend(time_policy(p, &opts, &cfg.system, &ckpts)?);
        }
    }

    let summary = eval::report(&results, &timing, &a.out)?;
    let file = ResultsFile { format_version: RESULTS_FORMAT_VERSION, results, timing };
    let json = serde_json::to_string(&file).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&a.out.join("results.json"), json.as_bytes())?;
    for e in &summary.entries {
        eprintln!(
            "{:>6} N={:<3} mean power {:.4e} W, any-violation rate {:.4}",
            e.policy.name(),
            e.n,
            e.mean_power_w,
            e.any_violation_rate
        );
    }
    Ok(cfg)
}

/// Latency per N. The ddpm policy uses the matching checkpoint where one
/// exists and an untrained network of the same architecture elsewhere:
/// latency depends on shapes, not weights.
fn time_policy(p: Policy, opts: &eval::EvalOptions, base: &SystemConfig, ckpts: &[ModelCheckpoint]) -> Result<Vec<TimingResult>> {
    let seed = opts.seed;
    eval::timing_benchmark(p.name(), &opts.ns, base, opts.timing_reps, seed, |cfg| -> Result<Box<dyn Decider>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(48);
        Ok(match p {
            Policy::Solver => Box::new(SolverDecider { cfg: cfg.clone() }),
            Policy::Random => Box::new(RandomDecider { cfg: cfg.clone(), rng }),
            Policy::Ddpm => {
                let ckpt = match ckpts.iter().find(|c| c.n() == cfg.node_count) {
                    Some(c) => c.clone(),
                    None => {
                        let template = ckpts.first().expect("checked by caller");
                        resized_checkpoint(template, cfg, &mut rng)?
                    }
                };
                Box::new(DdpmDecider { ckpt, rng, opts: SampleOptions::default() })
            }
        })
    })
}

fn resized_checkpoint(template: &ModelCheckpoint, cfg: &SystemConfig, rng: &mut ChaCha8Rng) -> Result<ModelCheckpoint> {
    let n = cfg.node_count;
    let arch = template.ddpm.denoiser(n);
    let params = Denoiser::init_dense(arch, rng);
    Ok(ModelCheckpoint {
        ema: params.clone(),
        params,
        schedule: template.schedule.clone(),
        condition: dataset::ConditionStats {
            mean_db: vec![template.condition.mean_db.iter().sum::<f64>() / template.n() as f64; n],
            std_db: vec![template.condition.std_db.iter().sum::<f64>() / template.n() as f64; n],
        },
        codec: template.codec,
        system: cfg.clone(),
        ddpm: template.ddpm.clone(),
        train: template.train.clone(),
        epoch_losses: Vec::new(),
    })
}

fn report_cmd(ctx: &Context, a: &ReportArgs) -> Result<PipelineConfig> {
    let cfg = ctx.config()?;
    let text = std::fs::read_to_string(&a.results).map_err(|e| Error::io(&a.results, e))?;
    let file: ResultsFile = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", a.results.display())))?;
    if file.format_version != RESULTS_FORMAT_VERSION {
        return Err(Error::Format(format!("{}: results format version {}", a.results.display(), file.format_version)));
    }
    eval::report(&file.results, &file.timing, &a.out)?;
    Ok(cfg)
}
