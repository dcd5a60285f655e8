use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use multigen_cli::commands::{execute, Command};
use multigen_cli::config::{Format, RunConfig, Sampler, VerifyConfig};
use multigen_cli::CliError;
use multigen_core::{ReadMode, Variant};

#[derive(Parser)]
#[command(name = "multigen", version, about = "Multigenerational transmission: moments, simulation, estimation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    format: Option<Format>,

    #[command(flatten)]
    keys: Overrides,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Draw a pedigree panel and write panel.csv with its sidecar.
    Simulate,
    /// Closed-form moments of the configured model.
    Moments,
    /// Fit a specification template to a panel CSV.
    Fit,
    /// Run the cross-validation grid; exit status 1 on any failing check.
    Verify,
    /// Correlations of the two comparison processes, as CSV and SVG.
    ReproduceFigure2,
    /// Arithmetic on the published intergenerational estimates.
    ReproduceTable2Check,
}

/// One flag per config key.
#[derive(Args)]
struct Overrides {
    #[arg(long, global = true, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    rho: Option<f64>,
    #[arg(long, global = true)]
    m: Option<f64>,
    #[arg(long = "sigma2-u", global = true)]
    sigma2_u: Option<f64>,
    #[arg(long = "normalize-y", global = true)]
    normalize_y: Option<bool>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long = "burn-in", global = true)]
    burn_in: Option<usize>,
    #[arg(long, global = true)]
    generations: Option<usize>,
    #[arg(long, global = true)]
    sampler: Option<Sampler>,
    #[arg(long, global = true)]
    template: Option<String>,
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<ReadMode>,
    #[arg(long = "k-max", global = true)]
    k_max: Option<u32>,
    /// Small verification sizes for smoke runs.
    #[arg(long, global = true)]
    quick: bool,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: multigen_core::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<ReadMode, String> {
    match s {
        "standardized" => Ok(ReadMode::Standardized),
        "years_of_education" => Ok(ReadMode::YearsOfEducation),
        other => Err(format!("unknown mode {other:?} (standardized|years_of_education)")),
    }
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    let k = &cli.keys;
    if k.variant.is_some()
        || k.gamma.is_some()
        || k.lambda.is_some()
        || k.rho.is_some()
        || k.m.is_some()
        || k.sigma2_u.is_some()
        || k.normalize_y.is_some()
    {
        let mut mc = cfg.model_config();
        mc.variant = k.variant.unwrap_or(mc.variant);
        mc.gamma = k.gamma.unwrap_or(mc.gamma);
        mc.lambda = k.lambda.unwrap_or(mc.lambda);
        mc.rho = k.rho.unwrap_or(mc.rho);
        mc.m = k.m.unwrap_or(mc.m);
        mc.sigma2_u = k.sigma2_u.unwrap_or(mc.sigma2_u);
        mc.normalize_y = k.normalize_y.unwrap_or(mc.normalize_y);
        cfg.model = Some(mc);
    }
    cfg.sim.n = k.n.unwrap_or(cfg.sim.n);
    cfg.sim.burn_in = k.burn_in.unwrap_or(cfg.sim.burn_in);
    cfg.sim.generations = k.generations.unwrap_or(cfg.sim.generations);
    cfg.sim.sampler = k.sampler.unwrap_or(cfg.sim.sampler);
    if let Some(t) = &k.template {
        cfg.spec.template = t.clone();
    }
    if k.input.is_some() {
        cfg.io.input = k.input.clone();
    }
    cfg.io.mode = k.mode.unwrap_or(cfg.io.mode);
    cfg.moments.k_max = k.k_max.unwrap_or(cfg.moments.k_max);
    if k.quick {
        cfg.verify = VerifyConfig::quick();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::Moments => Command::Moments,
        Cmd::Fit => Command::Fit,
        Cmd::Verify => Command::Verify,
        Cmd::ReproduceFigure2 => Command::ReproduceFigure2,
        Cmd::ReproduceTable2Check => Command::ReproduceTable2Check,
    };
    let result = effective_config(&cli).and_then(|cfg| execute(command, &cfg));
    match result {
        Ok(out) => {
            print!("{}", out.body);
            match out.verdict {
                Some(e) => {
                    eprintln!("multigen {command}: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("multigen {command}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
