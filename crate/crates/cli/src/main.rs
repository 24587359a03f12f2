use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

/// Simulation and verification of divergent perpetuities and their extremal limits.
#[derive(Parser, Debug)]
#[command(name = "divperp", version, propagate_version = true)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Coefficient family: cauchy, reg_var, heavy_neg_m, convergent, expanding, degenerate.
    #[arg(long, global = true)]
    law: Option<String>,
    #[arg(long, global = true)]
    a: Option<f64>,
    #[arg(long, global = true)]
    c: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    rate: Option<f64>,
    #[arg(long, global = true)]
    m: Option<f64>,
    #[arg(long, global = true)]
    q: Option<f64>,
    /// P{M > 0}.
    #[arg(long = "p-m", global = true)]
    p_m: Option<f64>,
    /// P{Q > 0}.
    #[arg(long = "p-q", global = true)]
    p_q: Option<f64>,
    #[arg(long, global = true)]
    n: Option<u64>,
    /// Time horizon.
    #[arg(long = "T", global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    u: Option<f64>,
    /// Replications.
    #[arg(long = "R", global = true)]
    replications: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores. Outputs do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; without it the main artifact goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long = "grid-points", global = true)]
    grid_points: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate backward or forward paths to CSV.
    Simulate {
        /// backward (perpetuity) or forward (random difference equation).
        #[arg(long)]
        process: Option<String>,
        /// none, thm11 (divide by a n) or thm15 (divide by b_n).
        #[arg(long)]
        scale: Option<String>,
        /// Initial value of the forward chain.
        #[arg(long)]
        x0: Option<f64>,
    },
    /// Limit objects: Poisson measures, extremal paths, CDF tables.
    Limits {
        #[command(subcommand)]
        what: LimitsCommand,
    },
    /// Run verification suites; exit code 2 if any check fails.
    Verify {
        /// Theorem tag, comma-separated list, or `all`.
        #[arg(long)]
        theorem: Option<String>,
        /// Path theorem examined by functional-sup.
        #[arg(long)]
        target: Option<String>,
        /// `simulation` (default) or `limit` to self-test the limit sampler.
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long = "limit-c")]
        limit_c: Option<f64>,
    },
    /// Condition report and decay table for the deterministic functional limit.
    Theorem21 {
        /// Bundled instance: mixed_sign, all_plus or single_atom.
        #[arg(long)]
        instance: Option<String>,
        /// JSON instance description; overrides --instance.
        #[arg(long = "instance-file")]
        instance_file: Option<PathBuf>,
    },
    /// Classify the regime of a coefficient law.
    Classify {
        #[arg(long = "mc-samples")]
        mc_samples: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
enum LimitsCommand {
    /// Sample truncated Poisson random measures.
    Prm,
    /// Sample extremal limit paths.
    Path {
        /// backward_thm11, forward_thm11 or sup_thm15.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Tabulate a limit CDF.
    Cdf {
        /// thm11 or thm15.
        #[arg(long)]
        kind: Option<String>,
        /// Ratio c/a for thm11.
        #[arg(long)]
        ca: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        xs: Option<Vec<f64>>,
    },
}

fn flags_config(common: &Common, command: &Command) -> RunConfig {
    let mut cfg = RunConfig {
        law: common.law.clone(),
        a: common.a,
        c: common.c,
        alpha: common.alpha,
        beta: common.beta,
        rate: common.rate,
        m: common.m,
        q: common.q,
        p_m: common.p_m,
        p_q: common.p_q,
        n: common.n,
        horizon: common.horizon,
        u: common.u,
        replications: common.replications,
        seed: common.seed,
        jobs: common.jobs,
        out: common.out.clone(),
        threshold: common.threshold,
        gamma: common.gamma,
        grid_points: common.grid_points,
        ..Default::default()
    };
    match command {
        Command::Simulate { process, scale, x0 } => {
            cfg.command = Some("simulate".into());
            cfg.process = process.clone();
            cfg.scale = scale.clone();
            cfg.x0 = *x0;
        }
        Command::Limits { what } => match what {
            LimitsCommand::Prm => cfg.command = Some("limits prm".into()),
            LimitsCommand::Path { kind } => {
                cfg.command = Some("limits path".into());
                cfg.kind = kind.clone();
            }
            LimitsCommand::Cdf { kind, ca, xs } => {
                cfg.command = Some("limits cdf".into());
                cfg.kind = kind.clone();
                cfg.ca = *ca;
                cfg.xs = xs.clone();
            }
        },
        Command::Verify {
            theorem,
            target,
            source,
            level,
            x0,
            limit_c,
        } => {
            cfg.command = Some("verify".into());
            cfg.theorem = theorem.clone();
            cfg.target = target.clone();
            cfg.source = source.clone();
            cfg.level = *level;
            cfg.x0 = *x0;
            cfg.limit_c = *limit_c;
        }
        Command::Theorem21 {
            instance,
            instance_file,
        } => {
            cfg.command = Some("theorem21".into());
            cfg.instance = instance.clone();
            cfg.instance_file = instance_file.clone();
        }
        Command::Classify { mc_samples } => {
            cfg.command = Some("classify".into());
            cfg.mc_samples = *mc_samples;
        }
    }
    cfg
}

fn main() -> ExitCode {
    ExitCode::from(run_cli(std::env::args_os()))
}

/// Parses `args`, runs the command and returns the exit status: 0 on
/// success, 1 on misuse, 2 when a verification or condition check fails.
fn run_cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let common = cli.common;
    let flags = flags_config(&common, &cli.command);
    let cfg = match &common.config {
        Some(path) => match RunConfig::load(path) {
            Ok(file) => {
                if file.command.is_some() && file.command != flags.command {
                    eprintln!(
                        "error: config is for '{}', not '{}'",
                        file.command.as_deref().unwrap_or(""),
                        flags.command.as_deref().unwrap_or("")
                    );
                    return 1;
                }
                file.overlaid(&flags)
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                return 1;
            }
        },
        None => flags,
    };
    match commands::run(cfg) {
        Ok(commands::Outcome::Success) => 0,
        Ok(commands::Outcome::Failed) => 2,
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::exit_code(&e)
        }
    }
}
