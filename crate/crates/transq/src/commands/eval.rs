use std::path::PathBuf;

use anyhow::bail;
use transq_core::env::game_spec;
use transq_core::eval::{EvalReport, EvalTarget, Policy};
use transq_core::transcoder::Transcoder;

use crate::metrics::{MetricsRow, MetricsWriter};
use crate::parallel;

#[derive(Debug, Clone, Default)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    /// Game to evaluate on; defaults to the checkpoint's.
    pub env: Option<String>,
    pub frame_size: Option<usize>,
    pub episodes: Option<usize>,
    pub epsilon: Option<f64>,
    pub step_cap: Option<u64>,
    pub seed: Option<u64>,
    pub raw_rewards: bool,
    /// Metrics CSV to append the report to.
    pub out: Option<PathBuf>,
}

pub fn run(args: &EvalArgs) -> anyhow::Result<EvalReport> {
    let ckpt = super::load_checkpoint(&args.checkpoint)?;
    let config = ckpt.config()?;
    let t = &config.train;
    let game = args.env.clone().unwrap_or_else(|| t.game.clone());
    let expected = t.model.frame_size;
    let frame_size = args.frame_size.unwrap_or(expected);
    if frame_size != expected {
        bail!("geometry mismatch: checkpoint expects frame_size {expected}, got frame_size {frame_size}");
    }
    let spec = game_spec(&game, frame_size)?;
    if spec.action_count != t.model.action_count {
        bail!(
            "geometry mismatch: checkpoint has {} actions, {game} has {}",
            t.model.action_count,
            spec.action_count
        );
    }
    let mut eval = config.eval;
    if let Some(n) = args.episodes {
        eval.episodes = n;
    }
    if let Some(e) = args.epsilon {
        if !(0.0..=1.0).contains(&e) {
            bail!("--eps must lie in [0, 1]");
        }
        eval.epsilon = e;
    }
    if let Some(c) = args.step_cap {
        eval.step_cap = c;
    }
    eval.seed = args.seed.unwrap_or(t.seed);
    eval.raw_rewards |= args.raw_rewards;
    let net = Transcoder::new(t.model.clone())?;
    net.check_params(&ckpt.params)?;
    let policy = Policy::Greedy {
        net: &net,
        params: &ckpt.params,
    };
    let target = EvalTarget {
        game: &game,
        frame_size,
        env: t.env,
    };
    let report = parallel::evaluate(&policy, target, &eval, ckpt.step, parallel::thread_count())?;
    if let Some(out) = &args.out {
        let mut w = MetricsWriter::open(out)?;
        w.write(&MetricsRow::eval(report.step, report.mean, report.epsilon))?;
        w.flush()?;
    }
    Ok(report)
}

pub fn print(report: &EvalReport) {
    for (i, r) in report.returns.iter().enumerate() {
        println!("episode {i}: return {r}");
    }
    println!(
        "step {}: mean return {} over {} episodes (epsilon {})",
        report.step,
        report.mean,
        report.episodes(),
        report.epsilon
    );
}
