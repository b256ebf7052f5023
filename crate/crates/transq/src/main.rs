use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use transq::commands::{compare, eval, rollout, trace, train};
use transq::CheckpointError;

#[derive(Parser)]
#[command(name = "transq", version, about = "Model-regularized deep Q-learning on desk-scale pixel games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Transq,
    Dqn,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; writes metrics.csv, config.cfg and checkpoints/ under --out.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// `dqn` zeroes every regularizer coefficient.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// Override train.total_steps.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Evaluate a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        frame_size: Option<usize>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        step_cap: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Sum unclipped game rewards.
        #[arg(long)]
        raw_rewards: bool,
        /// Metrics CSV to append the result to.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Unroll the model next to the live game and write frame pairs.
    Rollout {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 11)]
        horizon: usize,
        #[arg(long, default_value = "rollout")]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        warmup: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare evaluation curves of two agents across games.
    Compare {
        /// `game=path/metrics.csv`; repeat per game.
        #[arg(long, required = true)]
        ours: Vec<String>,
        #[arg(long, required = true)]
        baseline: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        window: usize,
    },
    /// Record a trajectory trace of random play.
    Trace {
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 40)]
        frame_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        steps: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Train {
            config,
            seed,
            mode,
            resume,
            out,
            steps,
        } => {
            let mode = mode.map(|m| match m {
                ModeArg::Transq => train::Mode::Transq,
                ModeArg::Dqn => train::Mode::Dqn,
            });
            let s = train::run(&train::TrainArgs {
                config,
                seed,
                mode,
                resume,
                out,
                steps,
            })?;
            println!(
                "trained {} steps ({} updates, {} episodes){}",
                s.steps,
                s.updates,
                s.episodes,
                s.last_eval.map_or(String::new(), |m| format!(", last eval mean {m}"))
            );
        }
        Command::Eval {
            checkpoint,
            env,
            frame_size,
            episodes,
            eps,
            step_cap,
            seed,
            raw_rewards,
            out,
        } => {
            let report = eval::run(&eval::EvalArgs {
                checkpoint,
                env,
                frame_size,
                episodes,
                epsilon: eps,
                step_cap,
                seed,
                raw_rewards,
                out,
            })?;
            eval::print(&report);
        }
        Command::Rollout {
            checkpoint,
            horizon,
            out,
            warmup,
            seed,
        } => {
            let steps = rollout::run(&rollout::RolloutArgs {
                checkpoint,
                horizon,
                out: out.clone(),
                warmup,
                seed,
            })?;
            println!("wrote {} frame pairs and report.txt to {}", steps.len(), out.display());
        }
        Command::Compare {
            ours,
            baseline,
            out,
            window,
        } => {
            let rows = compare::run(&compare::CompareArgs {
                ours,
                baseline,
                out,
                window,
            })?;
            print!("{}", compare::table(&rows));
        }
        Command::Trace {
            env,
            frame_size,
            seed,
            steps,
            out,
        } => {
            let text = trace::run(&env, frame_size, seed, steps, out.as_deref())?;
            if out.is_none() {
                print!("{text}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<CheckpointError>())
                .map_or(1, CheckpointError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
