use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use transq_core::eval::{EvalConfig, EvalTarget, Policy};
use transq_core::trainer::{Observer, Trainer};
use transq_core::transcoder::LossBreakdown;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::metrics::{MetricsRow, MetricsWriter};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Transq,
    Dqn,
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub resume: Option<PathBuf>,
    pub out: PathBuf,
    /// Overrides `train.total_steps`.
    pub steps: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub steps: u64,
    pub updates: u64,
    pub episodes: u64,
    pub last_eval: Option<f64>,
}

pub fn checkpoint_path(out: &Path, step: u64) -> PathBuf {
    out.join("checkpoints").join(format!("step_{step:010}.trq"))
}

/// Seed of the evaluation run at training step `step`.
pub fn eval_seed(train_seed: u64, step: u64) -> u64 {
    train_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ step
}

struct CliObserver {
    config: RunConfig,
    out: PathBuf,
    metrics: MetricsWriter,
    threads: usize,
    failure: Option<anyhow::Error>,
    /// Return of the most recently finished episode, reported on loss rows.
    last_return: Option<f64>,
    last_eval: Option<f64>,
}

impl CliObserver {
    fn fail(&mut self, e: anyhow::Error) -> transq_core::Error {
        let msg = format!("{e:#}");
        self.failure = Some(e);
        transq_core::Error::Contract(msg)
    }

    fn checkpoint(&mut self, trainer: &Trainer) -> anyhow::Result<()> {
        let step = trainer.step_count();
        Checkpoint::capture(trainer, &self.config).save(&checkpoint_path(&self.out, step))?;
        let eval = EvalConfig {
            episodes: self.config.train_eval_episodes,
            seed: eval_seed(self.config.train.seed, step),
            ..self.config.eval
        };
        let t = &self.config.train;
        let target = EvalTarget {
            game: &t.game,
            frame_size: t.model.frame_size,
            env: t.env,
        };
        let policy = Policy::Greedy {
            net: trainer.net(),
            params: trainer.params(),
        };
        let report = parallel::evaluate(&policy, target, &eval, step, self.threads)?;
        self.last_eval = Some(report.mean);
        self.metrics.write(&MetricsRow::eval(step, report.mean, eval.epsilon))?;
        self.metrics.flush()?;
        Ok(())
    }
}

impl Observer for CliObserver {
    fn on_update(&mut self, t: u64, loss: &LossBreakdown, epsilon: f64) -> transq_core::Result<()> {
        let row = MetricsRow::train(t, loss, self.last_return, epsilon);
        self.metrics.write(&row).map_err(|e| self.fail(e.into()))
    }

    fn on_episode_end(&mut self, _t: u64, ret: f64) -> transq_core::Result<()> {
        self.last_return = Some(ret);
        Ok(())
    }

    fn on_checkpoint(&mut self, trainer: &Trainer) -> transq_core::Result<()> {
        self.checkpoint(trainer).map_err(|e| self.fail(e))
    }
}

pub fn run(args: &TrainArgs) -> anyhow::Result<TrainSummary> {
    let (mut config, mut trainer) = match &args.resume {
        Some(path) => {
            let ckpt = super::load_checkpoint(path)?;
            ckpt.restore().with_context(|| format!("restoring {}", path.display()))?
        }
        None => {
            let Some(path) = &args.config else {
                bail!("either --config or --resume is required");
            };
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut config = RunConfig::parse(&text).with_context(|| format!("in {}", path.display()))?;
            if let Some(seed) = args.seed {
                config.train.seed = seed;
            }
            if args.mode == Some(Mode::Dqn) {
                config.set_dqn_mode();
            }
            if let Some(steps) = args.steps {
                config.train.total_steps = steps;
                config.train.warmup_steps = config.train.warmup_steps.min(steps);
            }
            config.validate()?;
            let trainer = Trainer::new(config.train.clone())?;
            (config, trainer)
        }
    };
    if args.resume.is_some() {
        if args.seed.is_some() || args.mode.is_some() {
            bail!("--seed and --mode cannot change a resumed run");
        }
        if let Some(steps) = args.steps {
            config.train.total_steps = steps;
        }
    }
    fs::create_dir_all(args.out.join("checkpoints"))
        .with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join("config.cfg"), config.to_text())?;
    let mut obs = CliObserver {
        metrics: MetricsWriter::open(&args.out.join("metrics.csv"))?,
        out: args.out.clone(),
        threads: parallel::thread_count(),
        failure: None,
        last_return: trainer.progress().last_return,
        last_eval: None,
        config: config.clone(),
    };
    let result = trainer.run_until(config.train.total_steps, &mut obs);
    if let Some(e) = obs.failure.take() {
        return Err(e);
    }
    result?;
    obs.metrics.flush()?;
    let p = trainer.progress();
    Ok(TrainSummary {
        steps: p.step,
        updates: p.updates,
        episodes: p.episodes,
        last_eval: obs.last_eval,
    })
}
