use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use dddm::commands::{self, EvalArgs, OracleArgs, SampleArgs};
use dddm::config::{RunConfig, KEYS};
use dddm::data::parse_list;
use dddm::oracle::{DivergenceConfig, GaussianSpec};
use dddm::sampler::SampleRun;

#[derive(Parser)]
#[command(name = "dddm", version, about = "Directly denoising diffusion models on toy data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a key = value config file (see `print-config` for every key).
    Train {
        /// Config file path.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's out_dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Generate points by fixed-point iteration at t = T.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Fixed-point iterations s.
        #[arg(long, default_value_t = 1)]
        steps: usize,
        /// Number of points M.
        #[arg(long, default_value_t = 4096)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "samples.csv")]
        out: PathBuf,
        /// Also write every iterate as (sample_id, iteration, coords...).
        #[arg(long)]
        log_trajectory: Option<PathBuf>,
        /// Sample with raw training weights instead of the EMA.
        #[arg(long, default_value_t = false)]
        raw_weights: bool,
        /// Write an SVG scatter of the samples (2-D only).
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Sliced Wasserstein and MMD between two point CSVs.
    Eval {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        #[arg(long, default_value_t = 256)]
        n_proj: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write an SVG scatter of both sets (2-D only).
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Compare the learned map with the Gaussian probability-flow ODE solution.
    OracleCheck {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Data mean in the model's coordinates, comma separated.
        #[arg(long, default_value = "2,0", allow_hyphen_values = true)]
        mu: String,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        /// Maximum estimate iterations per draw.
        #[arg(long, default_value_t = 10)]
        iters: usize,
        /// Number of draws M.
        #[arg(long, default_value_t = 1024)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// RK4 steps for the reference solution.
        #[arg(long, default_value_t = 500)]
        ode_steps: usize,
        /// Early stop once no estimate moves more than this.
        #[arg(long, default_value_t = 1e-6)]
        stop_below: f64,
        /// Per-sample error CSV.
        #[arg(long, default_value = "oracle_errors.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = false)]
        raw_weights: bool,
    },
    /// Print every config key with its default and meaning.
    PrintConfig,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train { config, out_dir } => {
            let mut cfg = RunConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(dir) = out_dir {
                cfg.out_dir = dir;
            }
            let outcome = commands::cmd_train(&cfg)?;
            match (outcome.records.first(), outcome.records.last()) {
                (Some(first), Some(last)) => println!(
                    "trained {} epochs: mean loss {:.5} -> {:.5}, drift {:.5} -> {:.5}",
                    outcome.records.len(),
                    first.mean_loss,
                    last.mean_loss,
                    first.mean_drift,
                    last.mean_drift
                ),
                _ => println!("no epochs run; wrote initial checkpoint"),
            }
            println!("outputs in {}", cfg.out_dir.display());
        }
        Command::Sample {
            checkpoint,
            steps,
            count,
            seed,
            out,
            log_trajectory,
            raw_weights,
            plot,
        } => {
            let args = SampleArgs {
                checkpoint,
                run: SampleRun {
                    steps,
                    seed,
                    count,
                    log_trajectory: false,
                },
                out,
                trajectory_out: log_trajectory,
                use_ema: !raw_weights,
                plot,
            };
            let res = commands::cmd_sample(&args)?;
            println!("wrote {} samples to {}", res.samples.len(), args.out.display());
        }
        Command::Eval {
            samples,
            reference,
            out,
            n_proj,
            seed,
            plot,
        } => {
            let args = EvalArgs {
                samples,
                reference,
                out,
                n_proj,
                seed,
                plot,
            };
            let rep = commands::cmd_eval(&args)?;
            println!("swd {:.6} mmd {:.6}", rep.swd, rep.mmd);
        }
        Command::OracleCheck {
            checkpoint,
            mu,
            sigma2,
            iters,
            batch,
            seed,
            ode_steps,
            stop_below,
            out,
            raw_weights,
        } => {
            let args = OracleArgs {
                checkpoint,
                spec: GaussianSpec::new(parse_list(&mu)?, sigma2)?,
                divergence: DivergenceConfig {
                    batch,
                    seed,
                    iters,
                    stop_below,
                    ode_steps,
                },
                out: Some(out),
                use_ema: !raw_weights,
            };
            let rep = commands::cmd_oracle_check(&args)?;
            println!("divergence {:.6} after {} iterations", rep.mean, rep.iterations);
        }
        Command::PrintConfig => {
            for (k, default, doc) in KEYS {
                println!("{k} = {default}  # {doc}");
            }
        }
    }
    Ok(())
}
