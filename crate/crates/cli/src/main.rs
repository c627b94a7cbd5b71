use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rlsa_cli::config::{parse_checkpoints, parse_seeds, GapChoice};
use rlsa_cli::experiment::{self, FitOutcome};
use rlsa_cli::validate::{self, ValidateOptions};
use rlsa_cli::{ExperimentConfig, HarnessError, HarnessResult, Overrides};
use rlsa_core::problems::{default_zoo, make_non_monotone, Family};
use rlsa_core::Checkpoints;

/// Randomized Lagrangian stochastic approximation for constrained
/// stochastic monotone variational inequalities.
#[derive(Parser)]
#[command(name = "rlsa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// A parsed seed list; a newtype so clap treats it as one value.
#[derive(Clone)]
struct SeedList(Vec<u64>);

#[derive(Subcommand)]
enum Command {
    /// Run one solve and write trace.csv, summary.json and descriptor.json.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Run seed (noise and index streams).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run several seeds, then write per-seed traces, aggregate.csv and
    /// rate_report.json.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated list or a range `a..b`.
        #[arg(long, value_parser = |s: &str| parse_seeds(s).map(SeedList))]
        seeds: Option<SeedList>,
    },
    /// Check the invariant suite on the default zoo or on one instance.
    Validate {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Also check a deliberately non-monotone instance.
        #[arg(long)]
        non_monotone: bool,
        /// Seed of the random states and sample points.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Clone, Default)]
struct InstanceArgs {
    /// Experiment config JSON; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<Family>,
    /// Dimension (players for nash-cournot, block size for bilinear-minimax).
    #[arg(long)]
    n: Option<usize>,
    /// Number of functional constraints.
    #[arg(long = "J")]
    constraints: Option<usize>,
    #[arg(long)]
    instance_seed: Option<u64>,
    /// Noise level of the stochastic mapping.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Clone)]
struct CommonArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Output directory (default: $RLSA_OUT_DIR/<label> or rlsa-out/<label>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `geometric` or `linear:N`.
    #[arg(long, value_parser = parse_checkpoints)]
    checkpoints: Option<Checkpoints>,
    /// `affine`, `sampled` or `none`.
    #[arg(long)]
    gap_method: Option<GapChoice>,
    /// Enforce the step-size coupling condition before running.
    #[arg(long)]
    check_coupling: bool,
    /// Write elapsed milliseconds into traces (breaks byte reproducibility).
    #[arg(long)]
    record_wall_time: bool,
}

impl CommonArgs {
    fn overrides(&self, seeds: Option<Vec<u64>>) -> Overrides {
        let i = &self.instance;
        Overrides {
            family: i.family,
            n: i.n,
            constraints: i.constraints,
            instance_seed: i.instance_seed,
            noise_level: i.noise,
            seeds,
            iterations: self.iters,
            rho: self.rho,
            gamma: self.gamma,
            out: self.out.clone(),
            checkpoints: self.checkpoints.clone(),
            gap: self.gap_method,
            check_coupling: self.check_coupling.then_some(true),
            record_wall_time: self.record_wall_time.then_some(true),
        }
    }
}

fn fmt_fit(f: &FitOutcome) -> String {
    match f {
        FitOutcome::Fit(r) => format!("slope {:.4} (r^2 {:.4}, {} points)", r.slope, r.r_squared, r.points),
        FitOutcome::Failed { error } => format!("unavailable: {error}"),
    }
}

fn run(cli: Cli) -> HarnessResult<()> {
    match cli.command {
        Command::Solve { common, seed } => {
            let config = ExperimentConfig::resolve(common.instance.config.as_deref(), &common.overrides(seed.map(|s| vec![s])))?;
            let out = experiment::solve(&config)?;
            println!("wrote {}", out.dir.display());
            println!("{}", serde_json::to_string_pretty(&out.summary).expect("summary serializes"));
        }
        Command::Bench { common, seeds } => {
            let config = ExperimentConfig::resolve(common.instance.config.as_deref(), &common.overrides(seeds.map(|s| s.0)))?;
            let out = experiment::bench(&config)?;
            println!("wrote {}", out.dir.display());
            println!("gap:            {}", fmt_fit(&out.report.gap));
            println!("infeasibility:  {}", fmt_fit(&out.report.infeasibility));
        }
        Command::Validate {
            instance,
            non_monotone,
            seed,
        } => {
            let mut targets = Vec::new();
            if instance.config.is_some() || instance.family.is_some() {
                let common = CommonArgs {
                    instance: instance.clone(),
                    iters: None,
                    rho: None,
                    gamma: None,
                    out: None,
                    checkpoints: None,
                    gap_method: None,
                    check_coupling: false,
                    record_wall_time: false,
                };
                let config = ExperimentConfig::resolve(instance.config.as_deref(), &common.overrides(None))?;
                let d = config.descriptor()?;
                targets.push((d.label(), d.build()?));
            } else {
                for d in default_zoo() {
                    targets.push((d.label(), d.build()?));
                }
            }
            if non_monotone {
                targets.push(("non-monotone-n2".to_string(), make_non_monotone(2)?));
            }
            let opts = ValidateOptions {
                seed,
                ..Default::default()
            };
            let mut rows = Vec::new();
            for (label, inst) in &targets {
                rows.extend(validate::validate_instance(label, inst, &opts));
            }
            print!("{}", validate::render_table(&rows));
            let failed = validate::failures(&rows);
            if !failed.is_empty() {
                return Err(HarnessError::Validation(failed));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
