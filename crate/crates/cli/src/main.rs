use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gleak_cli::artifacts::{self, Needs, CONFIG_FILE};
use gleak_cli::config::{ConfigError, EmbeddingSource, ExperimentConfig, MembershipMode};
use gleak_cli::pipeline::{
    load_base_graph, run_attacks, run_seed, AttackSelection, TargetArtifacts,
};
use gleak_cli::report::{aggregates_csv, AuditReport, SeedReport};
use gleak_core::attack::DecoderMode;
use rayon::prelude::*;

/// Privacy audits of graph learning models.
#[derive(Parser, Debug)]
#[command(name = "gleak", version)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run this single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Seeds processed in parallel.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output directory; overrides `output_dir` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the targets and run every configured attack.
    Run,
    /// Train the targets and save their artifacts for `gleak attack`.
    Train,
    /// Run one attack against saved artifacts.
    Attack {
        #[command(subcommand)]
        attack: AttackCommand,
    },
    /// Repeat an experiment over a list of values.
    Sweep {
        #[command(subcommand)]
        sweep: SweepCommand,
    },
    /// Aggregate metrics from report files.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Print the configuration with every default filled in.
    Config,
}

#[derive(Subcommand, Debug)]
enum AttackCommand {
    Membership {
        /// Attack modes; defaults to the configured list.
        #[arg(long = "mode", value_enum)]
        modes: Vec<ModeArg>,
    },
    Reconstruct(ReconstructArgs),
    Attribute {
        #[arg(long, value_enum)]
        source: Option<SourceArg>,
    },
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[arg(long, value_enum)]
    source: Option<SourceArg>,
    #[arg(long, value_enum)]
    decoder: Option<DecoderArg>,
}

#[derive(Subcommand, Debug)]
enum SweepCommand {
    /// Membership inference against targets of each depth.
    Layers {
        #[arg(required = true)]
        layers: Vec<usize>,
    },
    /// Reconstruction and attribute inference at each auxiliary fraction.
    Aux {
        #[arg(required = true)]
        fractions: Vec<f64>,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Confidence,
    Shadow,
    Whitebox,
}

impl From<ModeArg> for MembershipMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Confidence => Self::Confidence,
            ModeArg::Shadow => Self::Shadow,
            ModeArg::Whitebox => Self::Whitebox,
        }
    }
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum SourceArg {
    Gae,
    Gnn,
    Walk,
}

impl From<SourceArg> for EmbeddingSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Gae => Self::Gae,
            SourceArg::Gnn => Self::Gnn,
            SourceArg::Walk => Self::Walk,
        }
    }
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum DecoderArg {
    InnerProduct,
    Bilinear,
}

impl From<DecoderArg> for DecoderMode {
    fn from(d: DecoderArg) -> Self {
        match d {
            DecoderArg::InnerProduct => Self::InnerProduct,
            DecoderArg::Bilinear => Self::Bilinear,
        }
    }
}

/// Exit status for a run whose report records stage failures.
const PARTIAL_FAILURE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

struct Setup {
    cfg: ExperimentConfig,
    out: PathBuf,
    jobs: usize,
}

fn load_config(cli: &Cli, fallback: Option<&Path>) -> Result<ExperimentConfig> {
    let path = match (&cli.config, fallback) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) if p.exists() => p.to_path_buf(),
        _ => bail!("no configuration given; pass --config <file>"),
    };
    let mut cfg = ExperimentConfig::load(&path).map_err(|e| config_error(&path, e))?;
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    cfg.validate().map_err(|e| config_error(&path, e))?;
    Ok(cfg)
}

fn config_error(path: &Path, e: ConfigError) -> anyhow::Error {
    anyhow::anyhow!("invalid configuration {}: {e}", path.display())
}

fn setup(cli: &Cli, fallback_from_out: bool) -> Result<Setup> {
    let fallback = match (&cli.out, fallback_from_out) {
        (Some(out), true) => Some(out.join(CONFIG_FILE)),
        _ => None,
    };
    let cfg = load_config(cli, fallback.as_deref())?;
    let out = cfg.output_dir(cli.out.as_deref());
    Ok(Setup {
        cfg,
        out,
        jobs: cli.jobs.max(1),
    })
}

/// Maps `f` over the configured seeds on `jobs` threads, in seed order.
fn per_seed<T: Send>(
    cfg: &ExperimentConfig,
    jobs: usize,
    f: impl Fn(u64) -> T + Sync,
) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("starting worker threads")?;
    Ok(pool.install(|| cfg.seeds.par_iter().map(|&s| f(s)).collect()))
}

fn finish(report: &AuditReport, path: &Path) -> Result<u8> {
    report.save(path)?;
    println!("{}", path.display());
    for s in &report.seeds {
        for e in &s.errors {
            eprintln!("seed {}: {} failed: {}", s.seed, e.stage, e.message);
        }
    }
    Ok(if report.has_errors() {
        PARTIAL_FAILURE
    } else {
        0
    })
}

fn run_all(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<SeedReport>> {
    let base = load_base_graph(cfg)?;
    per_seed(cfg, jobs, |seed| run_seed(cfg, base.as_ref(), seed))
}

fn cmd_run(cli: &Cli) -> Result<u8> {
    let ctx = setup(cli, false)?;
    let start = Instant::now();
    let seeds = run_all(&ctx.cfg, ctx.jobs)?;
    let report = AuditReport::new("run", ctx.cfg, seeds, start.elapsed().as_secs_f64());
    finish(&report, &ctx.out.join("report.json"))
}

fn cmd_train(cli: &Cli) -> Result<u8> {
    let ctx = setup(cli, false)?;
    let base = load_base_graph(&ctx.cfg)?;
    std::fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    let config_path = ctx.out.join(CONFIG_FILE);
    std::fs::write(&config_path, ctx.cfg.to_toml())
        .with_context(|| format!("writing {}", config_path.display()))?;
    let built = per_seed(&ctx.cfg, ctx.jobs, |seed| {
        TargetArtifacts::build(&ctx.cfg, base.as_ref(), seed)
    })?;
    let mut failed = false;
    for arts in built {
        let arts = arts?;
        artifacts::save(&arts, &ctx.out)?;
        for e in &arts.errors {
            eprintln!("seed {}: {} failed: {}", arts.seed, e.stage, e.message);
            failed = true;
        }
        println!("{}", artifacts::seed_dir(&ctx.out, arts.seed).display());
    }
    Ok(if failed { PARTIAL_FAILURE } else { 0 })
}

fn cmd_attack(cli: &Cli, attack: &AttackCommand) -> Result<u8> {
    let mut ctx = setup(cli, true)?;
    let cfg = &mut ctx.cfg;
    let (select, command, file) = match attack {
        AttackCommand::Membership { modes } => {
            let mc = cfg.attacks.membership.get_or_insert_with(Default::default);
            if !modes.is_empty() {
                mc.modes = modes.iter().map(|&m| m.into()).collect();
            }
            let mut names: Vec<_> = mc.modes.iter().map(|m| m.name()).collect();
            names.sort();
            names.dedup();
            let select = AttackSelection {
                membership: true,
                reconstruction: false,
                attribute: false,
            };
            (
                select,
                "attack membership",
                format!("attack-membership-{}.json", names.join("-")),
            )
        }
        AttackCommand::Reconstruct(args) => {
            let rc = cfg
                .attacks
                .reconstruction
                .get_or_insert_with(Default::default);
            if let Some(s) = args.source {
                rc.source = s.into();
            }
            if let Some(d) = args.decoder {
                rc.autoencoder.decoder = d.into();
            }
            let file = format!(
                "attack-reconstruction-{}-{}.json",
                rc.source.name(),
                rc.autoencoder.decoder.name()
            );
            let select = AttackSelection {
                membership: false,
                reconstruction: true,
                attribute: false,
            };
            (select, "attack reconstruct", file)
        }
        AttackCommand::Attribute { source } => {
            let ac = cfg.attacks.attribute.get_or_insert_with(Default::default);
            if let Some(s) = source {
                ac.source = (*s).into();
            }
            let file = format!("attack-attribute-{}.json", ac.source.name());
            let select = AttackSelection {
                membership: false,
                reconstruction: false,
                attribute: true,
            };
            (select, "attack attribute", file)
        }
    };
    cfg.validate()
        .context("invalid configuration after command-line overrides")?;
    let cfg = &ctx.cfg;
    let needs = Needs::for_config(
        cfg,
        select.membership,
        select.reconstruction,
        select.attribute,
    );
    let start = Instant::now();
    let loaded = per_seed(cfg, ctx.jobs, |seed| -> Result<SeedReport> {
        let arts = artifacts::load(&ctx.out, seed, needs)?;
        Ok(run_attacks(cfg, &arts, select))
    })?;
    let seeds = loaded.into_iter().collect::<Result<Vec<_>>>()?;
    let report = AuditReport::new(command, cfg.clone(), seeds, start.elapsed().as_secs_f64());
    finish(&report, &ctx.out.join(file))
}

fn sweep_table(name: &str, rows: &[(String, AuditReport)]) -> String {
    let mut out = format!("{name},metric,mean,std,n\n");
    for (value, report) in rows {
        for line in aggregates_csv(&report.aggregates).lines().skip(1) {
            let _ = writeln!(out, "{value},{line}");
        }
    }
    out
}

fn cmd_sweep(cli: &Cli, sweep: &SweepCommand) -> Result<u8> {
    let ctx = setup(cli, false)?;
    let (name, variants): (&str, Vec<(String, ExperimentConfig)>) = match sweep {
        SweepCommand::Layers { layers } => {
            let variants = layers
                .iter()
                .map(|&l| {
                    let mut cfg = ctx.cfg.clone();
                    cfg.target.gnn.num_layers = l;
                    cfg.target.gnn.embedding_layer =
                        cfg.target.gnn.embedding_layer.min(l.saturating_sub(1));
                    cfg.attacks.membership.get_or_insert_with(Default::default);
                    cfg.attacks.reconstruction = None;
                    cfg.attacks.attribute = None;
                    (l.to_string(), cfg)
                })
                .collect();
            ("layers", variants)
        }
        SweepCommand::Aux { fractions } => {
            let variants = fractions
                .iter()
                .map(|&f| {
                    let mut cfg = ctx.cfg.clone();
                    cfg.aux_fraction = f;
                    cfg.attacks.membership = None;
                    (f.to_string(), cfg)
                })
                .collect();
            ("aux", variants)
        }
    };
    let prefix = if name == "layers" { "L" } else { "aux-" };
    let mut rows = Vec::new();
    let mut code = 0;
    for (value, cfg) in variants {
        cfg.validate()
            .with_context(|| format!("invalid configuration for {name} = {value}"))?;
        let start = Instant::now();
        let seeds = run_all(&cfg, ctx.jobs)?;
        let report = AuditReport::new(
            &format!("sweep {name}"),
            cfg,
            seeds,
            start.elapsed().as_secs_f64(),
        );
        let path = ctx
            .out
            .join(format!("sweep-{name}"))
            .join(format!("{prefix}{value}"))
            .join("report.json");
        code = code.max(finish(&report, &path)?);
        rows.push((value, report));
    }
    let table = ctx.out.join(format!("sweep-{name}.csv"));
    std::fs::write(&table, sweep_table(name, &rows))
        .with_context(|| format!("writing {}", table.display()))?;
    println!("{}", table.display());
    Ok(code)
}

fn per_seed_csv(seeds: &[(String, SeedReport)]) -> String {
    let mut out = String::from("file,seed,metric,value\n");
    for (file, s) in seeds {
        for (k, v) in s.flat_metrics() {
            let _ = writeln!(out, "{file},{},{k},{v}", s.seed);
        }
    }
    out
}

fn cmd_report(cli: &Cli, files: &[PathBuf]) -> Result<u8> {
    let mut tagged = Vec::new();
    for f in files {
        let report = AuditReport::load(f)?;
        tagged.extend(
            report
                .seeds
                .into_iter()
                .map(|s| (f.display().to_string(), s)),
        );
    }
    let seeds: Vec<SeedReport> = tagged.iter().map(|(_, s)| s.clone()).collect();
    let summary = aggregates_csv(&gleak_cli::report::aggregate(&seeds));
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, text) in [
                ("summary.csv", summary),
                ("per_seed.csv", per_seed_csv(&tagged)),
            ] {
                let path = dir.join(name);
                std::fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))?;
                println!("{}", path.display());
            }
        }
        None => print!("{summary}"),
    }
    Ok(0)
}

fn execute(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Run => cmd_run(cli),
        Command::Train => cmd_train(cli),
        Command::Attack { attack } => cmd_attack(cli, attack),
        Command::Sweep { sweep } => cmd_sweep(cli, sweep),
        Command::Report { files } => cmd_report(cli, files),
        Command::Config => {
            let cfg = load_config(cli, None)?;
            print!("{}", cfg.to_toml());
            Ok(0)
        }
    }
}
