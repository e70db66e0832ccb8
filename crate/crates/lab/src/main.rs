use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixpred_lab::{csv_export, find, registry, run, ExperimentConfig, ExperimentResult, LabError, LabResult};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "mixpred", version, about = "Run and export mixture-prediction experiments")]
struct Cli {
    /// Master seed; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root; results go to <out>/<id>/.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. Affects wall time only.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiments from config files or by id with default settings.
    Run {
        configs: Vec<PathBuf>,
        /// Registered id to run with its default config (repeatable).
        #[arg(long = "id")]
        ids: Vec<String>,
        /// Run every registered experiment with its default config.
        #[arg(long, conflicts_with_all = ["configs", "ids"])]
        all: bool,
    },
    /// List registered experiments.
    List,
    /// Show one experiment and its default config.
    Describe { id: String },
    /// Write default configs, one `<id>.toml` per experiment, or print one to stdout.
    Export {
        /// Directory for the templates; stdout when omitted.
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long = "id")]
        ids: Vec<String>,
    },
}

fn default_config(id: &str) -> LabResult<ExperimentConfig> {
    ExperimentConfig::parse(find(id)?.template)
}

fn execute(cli: &Cli, configs: Vec<ExperimentConfig>) -> LabResult<bool> {
    let out_root = cli.out.clone();
    let results: Vec<LabResult<ExperimentResult>> = configs
        .into_par_iter()
        .map(|mut cfg| {
            if cli.seed.is_some() {
                cfg.experiment.seed = cli.seed;
            }
            if out_root.is_some() {
                cfg.experiment.out.clone_from(&out_root);
            }
            run(&cfg)
        })
        .collect();
    let mut all_pass = true;
    let mut first_error = None;
    for r in results {
        let r = match r {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e}");
                first_error.get_or_insert(e);
                continue;
            }
        };
        let failed = r.verdicts.iter().filter(|c| !c.pass).count();
        println!(
            "{:<24} {:<16} {:>3} checks  {:>3} failed  {:>9.3}s  {}",
            r.id,
            r.anchor,
            r.verdicts.len(),
            failed,
            r.wall_time.as_secs_f64(),
            if r.pass() { "PASS" } else { "FAIL" }
        );
        for c in r.verdicts.iter().filter(|c| !c.pass) {
            println!("    fail {}: lhs {} rhs {} tol {}", c.id, c.lhs, c.rhs, c.tolerance);
        }
        if let Some(root) = &r.config.experiment.out {
            let dir = root.join(&r.id);
            csv_export(&r, &dir)?;
        }
        all_pass &= r.pass();
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(all_pass),
    }
}

fn write_templates(dir: Option<&Path>, ids: &[String]) -> LabResult<()> {
    let chosen: Vec<_> = if ids.is_empty() {
        registry().iter().collect()
    } else {
        ids.iter().map(|id| find(id)).collect::<LabResult<_>>()?
    };
    match dir {
        None => {
            for e in chosen {
                print!("{}", e.template);
            }
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| LabError::Io { path: dir.to_path_buf(), source: e })?;
            for e in chosen {
                let path = dir.join(format!("{}.toml", e.id));
                std::fs::write(&path, e.template).map_err(|err| LabError::Io { path: path.clone(), source: err })?;
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main_inner(cli: &Cli) -> LabResult<bool> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Run { configs, ids, all } => {
            let mut cfgs = Vec::new();
            for p in configs {
                cfgs.push(ExperimentConfig::load(p)?);
            }
            for id in ids {
                cfgs.push(default_config(id)?);
            }
            if *all {
                for e in registry() {
                    cfgs.push(default_config(e.id)?);
                }
            }
            if cfgs.is_empty() {
                return Err(LabError::Config("nothing to run: give config files, --id or --all".into()));
            }
            execute(cli, cfgs)
        }
        Command::List => {
            for e in registry() {
                let seed = if e.stochastic { "seeded" } else { "exact" };
                println!("{:<24} {:<16} {:<7} {}", e.id, e.anchor, seed, e.summary);
            }
            Ok(true)
        }
        Command::Describe { id } => {
            let e = find(id)?;
            println!("{}  [{}]", e.id, e.anchor);
            println!("{}", e.summary);
            println!("stochastic: {}", e.stochastic);
            println!("measures:   {}", if e.measures.is_empty() { "-".into() } else { e.measures.join(", ") });
            println!("params:     {}", if e.params.is_empty() { "-".into() } else { e.params.join(", ") });
            println!();
            print!("{}", e.template);
            Ok(true)
        }
        Command::Export { dir, ids } => {
            write_templates(dir.as_deref(), ids)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
