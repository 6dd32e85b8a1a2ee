//! `wfren`: batch experiments for renormalized Wright-Fisher diffusions.
//!
//! Seeds: the root seed comes from `--seed`, then the config file, then
//! `WFREN_SEED`, then a fixed default. Each subcommand draws from the child
//! stream labelled with its own name; inside it every purpose has its own
//! label and every replica its own stream index, so adding replicas never
//! changes existing ones.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or invalid
//! input, 3 numerical guard.

mod commands;
mod config;
mod dispatch;
mod expr;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use wfren_core::rng::Seeder;

use commands::{
    branching::BranchingArgs, campbell::CampbellArgs, hierarchical::HierarchicalArgs,
    invariant_law::InvariantLawArgs, loglaplace::LoglaplaceArgs, pde_flow::PdeFlowArgs,
    renorm_iterate::RenormIterateArgs, solve_pstar::SolvePstarArgs, verify::VerifyArgs, Ctx,
};
use config::{read_config, Settings, UsageError};
use manifest::Manifest;

const DEFAULT_SEED: u64 = 20240611;

#[derive(Parser, Debug)]
#[command(name = "wfren", version, about = "Renormalized Wright-Fisher diffusions: experiments and checks")]
pub struct Cli {
    /// Root seed (falls back to the config file, then WFREN_SEED)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` settings file; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: out/<subcommand>]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads [default: available cores]
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Invariant law, paths, coupling and dual chain of one WF site
    InvariantLaw(InvariantLawArgs),
    /// The log-Laplace operator U_γ and its iterates
    Loglaplace(LoglaplaceArgs),
    /// Iterated renormalization of w^{α,p}
    RenormIterate(RenormIterateArgs),
    /// The 2D fixed-point flow from a chosen boundary pattern
    PdeFlow(PdeFlowArgs),
    /// The boundary value problem for p*
    SolvePstar(SolvePstarArgs),
    /// Poisson-cluster branching and embedded particle systems
    Branching(BranchingArgs),
    /// Size-biased trees from the immortal particle
    Campbell(CampbellArgs),
    /// Interacting diffusions on the hierarchical group
    Hierarchical(HierarchicalArgs),
    /// Run the acceptance checks
    Verify(VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::InvariantLaw(_) => "invariant-law",
            Command::Loglaplace(_) => "loglaplace",
            Command::RenormIterate(_) => "renorm-iterate",
            Command::PdeFlow(_) => "pde-flow",
            Command::SolvePstar(_) => "solve-pstar",
            Command::Branching(_) => "branching",
            Command::Campbell(_) => "campbell",
            Command::Hierarchical(_) => "hierarchical",
            Command::Verify(_) => "verify",
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let file = match &cli.config {
        Some(p) => read_config(p)?,
        None => Default::default(),
    };
    let mut settings = Settings::new(file);
    let from_file = cli.seed.is_none() && settings.has_file_key("seed");
    let env_seed = match std::env::var("WFREN_SEED") {
        Ok(s) => match s.trim().parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => return config::usage(format!("WFREN_SEED is not an integer: {s:?}")),
        },
        Err(_) => None,
    };
    let seed = settings.get("seed", cli.seed, env_seed.unwrap_or(DEFAULT_SEED))?;
    let source = match (cli.seed, from_file, env_seed) {
        (Some(_), _, _) => "flag",
        (None, true, _) => "config",
        (None, false, Some(_)) => "env",
        _ => "default",
    };
    let name = cli.command.name();
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let jobs = settings.get("jobs", cli.jobs, cores)?;
    if jobs == 0 {
        return config::usage("--jobs must be at least 1");
    }
    // a pool may already exist when run in-process; its size then stands
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().ok();
    let out = settings.get("out", cli.out.map(|p| p.display().to_string()), format!("out/{name}"))?;

    let mut ctx = Ctx {
        settings,
        manifest: Manifest::new(name, seed, source),
        seeder: Seeder::new(seed).derive(name, 0),
        out: PathBuf::from(out),
    };
    let ok = match &cli.command {
        Command::InvariantLaw(a) => commands::invariant_law::run(a, &mut ctx)?,
        Command::Loglaplace(a) => commands::loglaplace::run(a, &mut ctx)?,
        Command::RenormIterate(a) => commands::renorm_iterate::run(a, &mut ctx)?,
        Command::PdeFlow(a) => commands::pde_flow::run(a, &mut ctx)?,
        Command::SolvePstar(a) => commands::solve_pstar::run(a, &mut ctx)?,
        Command::Branching(a) => commands::branching::run(a, &mut ctx)?,
        Command::Campbell(a) => commands::campbell::run(a, &mut ctx)?,
        Command::Hierarchical(a) => commands::hierarchical::run(a, &mut ctx)?,
        Command::Verify(a) => commands::verify::run(a, &mut ctx, seed)?,
    };
    let path = ctx.manifest.write(&ctx.out, ctx.settings.echo(), rayon::current_num_threads())?;
    eprintln!("wrote {}", path.display());
    Ok(ok)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<wfren_core::Error>() {
            return match err {
                wfren_core::Error::Numerical(_) => 3,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
