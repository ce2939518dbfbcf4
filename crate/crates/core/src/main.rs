//! `cacmda` command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use cacmda::config::RunConfigFile;
use cacmda::data::{apply_scalers, load_manifest, make_ood_split, min_max_scale, write_manifest, Dataset, ScaleFit};
use cacmda::evaluation::{
    emit_report, evaluate_mse, run_cacm_space_ablation, run_domain_adaptation, run_ood_experiment,
    variable_importance, ExperimentSetup, Standardization,
};
use cacmda::nn::{load_bundle, save_bundle, InputMode};
use cacmda::objectives::CausalSpec;
use cacmda::synth::{describe_ground_truth, generate_synthetic, GroundTruth};
use cacmda::training::{pretrain_encoder, train_with_hook};
use cacmda::Error;

#[derive(Parser, Debug)]
#[command(name = "cacmda", version, about = "Organic-matter regression with causal and contrastive regularization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug)]
struct Global {
    /// Base seed; overrides every seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory. Defaults to `$CACMDA_RUN_DIR/<name>`, else `runs/<name>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overwrite a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads for parallel experiment runs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Dataset directory (with manifest.csv) or manifest file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Held-out site codes, comma separated.
    #[arg(long, value_delimiter = ',')]
    test_sites: Vec<String>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Mode {
    SatelliteOnly,
    SatellitePlusAttrs,
}

impl From<Mode> for InputMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::SatelliteOnly => InputMode::SatelliteOnly,
            Mode::SatellitePlusAttrs => InputMode::SatellitePlusAttrs,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Scaling {
    ZScore,
    MinMax,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset with ground-truth metadata.
    Synth,
    /// Pretrain the image encoder by tile reconstruction.
    Pretrain {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train one model on the training sites.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Start from this bundle (e.g. a pretrained encoder).
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, value_enum)]
        input_mode: Option<Mode>,
    },
    /// Print the test MSE of a saved bundle.
    Eval {
        #[arg(long)]
        bundle: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Defaults to the bundle's training input mode.
        #[arg(long, value_enum)]
        input_mode: Option<Mode>,
    },
    /// K-fold domain adaptation over fine-tune strategies.
    Adapt {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Leave-one-attribute-out variable importance.
    Importance {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        input_mode: Option<Mode>,
        #[arg(long, value_enum)]
        standardization: Option<Scaling>,
    },
    /// Causal penalty on encoder embeddings versus model outputs.
    AblateCacmSpace {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Out-of-distribution comparison of every model row.
    Report {
        #[command(flatten)]
        data: DataArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Pretrain { .. } => "pretrain",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Adapt { .. } => "adapt",
            Command::Importance { .. } => "importance",
            Command::AblateCacmSpace { .. } => "ablate-cacm-space",
            Command::Report { .. } => "report",
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.global.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("For more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

struct Ctx {
    cfg: RunConfigFile,
    global: Global,
}

impl Ctx {
    fn out_dir(&self, command: &str) -> PathBuf {
        if let Some(o) = &self.global.out {
            return o.clone();
        }
        if let Some(o) = &self.cfg.out {
            return o.clone();
        }
        let root = std::env::var_os("CACMDA_RUN_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"));
        root.join(self.cfg.name.as_deref().unwrap_or(command))
    }

    fn data_path(&self, args: &DataArgs) -> Outcome<PathBuf> {
        args.data
            .clone()
            .or_else(|| self.cfg.data.clone())
            .ok_or_else(|| Failure::Usage("no dataset given; pass --data or set `data` in the config".into()))
    }

    fn test_sites(&self, args: &DataArgs, ds: &Dataset) -> Outcome<Vec<String>> {
        let sites = if !args.test_sites.is_empty() {
            args.test_sites.clone()
        } else if !self.cfg.experiment.test_sites.is_empty() {
            self.cfg.experiment.test_sites.clone()
        } else {
            match ds.active_sites().first() {
                Some(s) => vec![s.code.clone()],
                None => return Err(Error::Invalid("dataset has no sites".into()).into()),
            }
        };
        Ok(sites)
    }

    fn setup(&self) -> ExperimentSetup {
        ExperimentSetup {
            train: self.cfg.train.clone(),
            forest: self.cfg.forest.clone(),
            whole_dataset_scaling: self.cfg.experiment.whole_dataset_scaling,
        }
    }

    fn seeds(&self) -> Vec<u64> {
        self.cfg.experiment.seeds()
    }
}

fn run(cli: Cli) -> Outcome<()> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfigFile::load(p)?,
        None => RunConfigFile::default(),
    };
    if let Some(s) = cli.global.seed {
        cfg.synth.seed = s;
        cfg.train.seed = s;
        cfg.experiment.seed = s;
    }
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            return Err(Failure::Usage("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    }
    let ctx = Ctx { cfg, global: cli.global };
    let name = cli.command.name();
    match cli.command {
        Command::Synth => cmd_synth(&ctx, name),
        Command::Pretrain { data } => cmd_pretrain(&ctx, name, &data),
        Command::Train { data, init, input_mode } => cmd_train(&ctx, name, &data, init.as_deref(), input_mode),
        Command::Eval { bundle, data, input_mode } => cmd_eval(&ctx, &bundle, &data, input_mode),
        Command::Adapt { data } => cmd_adapt(&ctx, name, &data),
        Command::Importance {
            data,
            input_mode,
            standardization,
        } => cmd_importance(&ctx, name, &data, input_mode, standardization),
        Command::AblateCacmSpace { data } => cmd_ablate(&ctx, name, &data),
        Command::Report { data } => cmd_report(&ctx, name, &data),
    }
}

/// Creates `dir`, refusing to reuse a non-empty one without `--force`.
fn prepare_out(dir: &Path, force: bool) -> Outcome<()> {
    if let Ok(mut entries) = std::fs::read_dir(dir) {
        if entries.next().is_some() && !force {
            return Err(Error::Invalid(format!(
                "output directory {} is not empty; pass --force to overwrite",
                dir.display()
            ))
            .into());
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

/// Standard run directory with `config`, `logs`, `checkpoints` and
/// `reports`, plus the echoed configuration.
fn prepare_run_dir(ctx: &Ctx, dir: &Path) -> Outcome<()> {
    prepare_out(dir, ctx.global.force)?;
    for sub in ["config", "logs", "checkpoints", "reports"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let p = dir.join("config").join("run.toml");
    std::fs::write(&p, ctx.cfg.to_toml()?).map_err(|e| Error::io(&p, e))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Outcome<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn data_dir(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

fn load_data(ctx: &Ctx, args: &DataArgs) -> Outcome<(Dataset, CausalSpec)> {
    let path = ctx.data_path(args)?;
    let ds = load_manifest(&path)?;
    let spec = match &ctx.cfg.causal {
        Some(s) => s.clone(),
        None => {
            let gt_path = data_dir(&path).join("ground_truth.json");
            if gt_path.exists() {
                let text = std::fs::read_to_string(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
                let gt: GroundTruth = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", gt_path.display())))?;
                gt.causal_spec
            } else {
                CausalSpec::excluding_all(ds.attribute_schema())
            }
        }
    };
    Ok((ds, spec))
}

fn cmd_synth(ctx: &Ctx, name: &str) -> Outcome<()> {
    let out = ctx.out_dir(name);
    prepare_out(&out, ctx.global.force)?;
    let (ds, gt) = generate_synthetic(&ctx.cfg.synth)?;
    let manifest = write_manifest(&ds, &out)?;
    let json = serde_json::to_string_pretty(&gt).map_err(|e| Error::Invalid(e.to_string()))?;
    write_text(&out.join("ground_truth.json"), &(json + "\n"))?;
    write_text(&out.join("ground_truth.txt"), &describe_ground_truth(&gt))?;
    let synth_cfg = toml::to_string(&ctx.cfg.synth).map_err(|e| Error::Config(e.to_string()))?;
    write_text(&out.join("synth.toml"), &synth_cfg)?;
    println!("wrote {} samples to {}", ds.len(), manifest.display());
    Ok(())
}

fn cmd_pretrain(ctx: &Ctx, name: &str, args: &DataArgs) -> Outcome<()> {
    let (ds, _) = load_data(ctx, args)?;
    let ds = min_max_scale(&ds, &ScaleFit::AllSamples)?;
    let out = ctx.out_dir(name);
    prepare_run_dir(ctx, &out)?;
    let (bundle, log) = pretrain_encoder(&ds, &ctx.cfg.train)?;
    log.write_csv(&out.join("logs").join("pretrain_log.csv"))?;
    let p = out.join("pretrained");
    save_bundle(&bundle, &p)?;
    if let Some(last) = log.rows.last() {
        println!("final reconstruction mse {}", last.components.recon);
    }
    println!("wrote {}", p.display());
    Ok(())
}

fn cmd_train(ctx: &Ctx, name: &str, args: &DataArgs, init: Option<&Path>, mode: Option<Mode>) -> Outcome<()> {
    let (ds, spec) = load_data(ctx, args)?;
    let sites = ctx.test_sites(args, &ds)?;
    let refs: Vec<&str> = sites.iter().map(String::as_str).collect();
    let plan = make_ood_split(&ds, &refs)?;
    let init = init.map(load_bundle).transpose()?;
    let ds = match init.as_ref().and_then(|b| b.scalers()) {
        Some(sc) => apply_scalers(&ds, sc)?,
        None => min_max_scale(&ds, &ScaleFit::for_plan(&plan, ctx.cfg.experiment.whole_dataset_scaling))?,
    };
    let mut cfg = ctx.cfg.train.clone();
    if let Some(m) = mode {
        cfg.input_mode = m.into();
    }
    let out = ctx.out_dir(name);
    prepare_run_dir(ctx, &out)?;
    let split_json = serde_json::to_string_pretty(&plan).map_err(|e| Error::Invalid(e.to_string()))?;
    write_text(&out.join("config").join("split.json"), &(split_json + "\n"))?;
    let every = cfg.checkpoint_every;
    let ckpt = out.join("checkpoints");
    let mut hook = |epoch: usize, b: &cacmda::nn::ModelBundle| -> cacmda::Result<()> {
        if every > 0 && epoch % every == 0 {
            save_bundle(b, &ckpt.join(format!("epoch_{epoch:04}")))?;
        }
        Ok(())
    };
    let (bundle, log) = train_with_hook(&ds, &plan, &spec, &cfg, init.as_ref(), &mut hook)?;
    log.write_csv(&out.join("logs").join("train_log.csv"))?;
    save_bundle(&bundle, &out.join("final"))?;
    let mse = evaluate_mse(&bundle, &ds, &plan.test_envs, cfg.input_mode)?;
    write_text(&out.join("reports").join("test_mse.txt"), &format!("{mse}\n"))?;
    info!("trained {} epochs", cfg.epochs);
    println!("test mse {mse}");
    println!("wrote {}", out.join("final").display());
    Ok(())
}

fn cmd_eval(ctx: &Ctx, bundle: &Path, args: &DataArgs, mode: Option<Mode>) -> Outcome<()> {
    let b = load_bundle(bundle)?;
    let (ds, _) = load_data(ctx, args)?;
    let ds = match b.scalers() {
        Some(sc) => apply_scalers(&ds, sc)?,
        None => ds,
    };
    let sites = ctx.test_sites(args, &ds)?;
    let refs: Vec<&str> = sites.iter().map(String::as_str).collect();
    let envs = ds
        .environments()
        .into_iter()
        .filter(|e| refs.contains(&e.site.as_str()))
        .collect();
    let mode = mode.map(InputMode::from).unwrap_or(b.input_mode());
    let mse = evaluate_mse(&b, &ds, &envs, mode)?;
    if let Some(out) = &ctx.global.out {
        prepare_out(out, ctx.global.force)?;
        write_text(&out.join("eval_mse.txt"), &format!("{mse}\n"))?;
    }
    println!("mse {mse}");
    Ok(())
}

fn finish_report(out: &Path, report: &dyn cacmda::evaluation::ReportOutput) -> Outcome<()> {
    for p in emit_report(report, &out.join("reports"))? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_adapt(ctx: &Ctx, name: &str, args: &DataArgs) -> Outcome<()> {
    let (ds, spec) = load_data(ctx, args)?;
    let out = ctx.out_dir(name);
    prepare_run_dir(ctx, &out)?;
    let e = &ctx.cfg.experiment;
    let r = run_domain_adaptation(&ds, &spec, &ctx.setup(), &e.adapt_models, &e.strategies, &ctx.seeds())?;
    print!("{}", r.table());
    finish_report(&out, &r)
}

fn cmd_importance(
    ctx: &Ctx,
    name: &str,
    args: &DataArgs,
    mode: Option<Mode>,
    scaling: Option<Scaling>,
) -> Outcome<()> {
    let (ds, spec) = load_data(ctx, args)?;
    let sites = ctx.test_sites(args, &ds)?;
    let refs: Vec<&str> = sites.iter().map(String::as_str).collect();
    let mut opts = ctx.cfg.experiment.importance.clone();
    if let Some(m) = mode {
        opts.input_mode = m.into();
    }
    if let Some(s) = scaling {
        opts.standardization = match s {
            Scaling::ZScore => Standardization::ZScore,
            Scaling::MinMax => Standardization::MinMax,
        };
    }
    let out = ctx.out_dir(name);
    prepare_run_dir(ctx, &out)?;
    let r = variable_importance(&ds, &spec, &ctx.setup(), &refs, &opts, &ctx.seeds())?;
    for e in &r.entries {
        println!("{:>2}  {:<16} {:+.4}  (raw {:+.6})", e.rank, e.attribute, e.standardized_gain, e.raw_gain);
    }
    finish_report(&out, &r)
}

fn cmd_ablate(ctx: &Ctx, name: &str, args: &DataArgs) -> Outcome<()> {
    let (ds, spec) = load_data(ctx, args)?;
    let sites = ctx.test_sites(args, &ds)?;
    let refs: Vec<&str> = sites.iter().map(String::as_str).collect();
    let out = ctx.out_dir(name);
    prepare_run_dir(ctx, &out)?;
    let r = run_cacm_space_ablation(&ds, &spec, &ctx.setup(), &refs, &ctx.seeds())?;
    print!("{}", r.table());
    finish_report(&out, &r)
}

fn cmd_report(ctx: &Ctx, name: &str, args: &DataArgs) -> Outcome<()> {
    let (ds, spec) = load_data(ctx, args)?;
    let sites = ctx.test_sites(args, &ds)?;
    let refs: Vec<&str> = sites.iter().map(String::as_str).collect();
    let out = ctx.out_dir(name);
    prepare_run_dir(ctx, &out)?;
    let r = run_ood_experiment(&ds, &spec, &ctx.setup(), &refs, &ctx.cfg.experiment.models, &ctx.seeds())?;
    print!("{}", r.table());
    finish_report(&out, &r)
}
