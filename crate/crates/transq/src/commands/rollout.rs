use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context as _};
use transq_core::env::{make_game, Env};
use transq_core::trainer::{argmax, select_action_with, state_batch};
use transq_core::transcoder::{unroll, Transcoder};
use transq_core::Rng;

use crate::pgm;

#[derive(Debug, Clone)]
pub struct RolloutArgs {
    pub checkpoint: PathBuf,
    pub horizon: usize,
    pub out: PathBuf,
    /// Policy steps before the unroll starts.
    pub warmup: u64,
    pub seed: Option<u64>,
}

/// Live transition against the model's prediction, one per unroll step.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub action: usize,
    pub reward: i8,
    pub terminal: bool,
    pub predicted_reward: i8,
    pub reward_probs: [f32; 3],
    pub terminal_prob: f32,
    /// Mean absolute pixel error of the predicted frame.
    pub pixel_error: f64,
}

pub fn run(args: &RolloutArgs) -> anyhow::Result<Vec<RolloutStep>> {
    if args.horizon == 0 {
        bail!("--horizon must be at least 1");
    }
    let ckpt = super::load_checkpoint(&args.checkpoint)?;
    let config = ckpt.config()?;
    let t = &config.train;
    let net = Transcoder::new(t.model.clone())?;
    net.check_params(&ckpt.params)?;
    let root = Rng::new(args.seed.unwrap_or(t.seed)).split("rollout");
    let mut env = Env::new(make_game(&t.game, t.model.frame_size, root.split("env"))?, t.env);
    let mut rng = root.split("act");
    let eps = config.eval.epsilon;
    let actions = t.model.action_count;
    let act = |env: &Env, rng: &mut Rng| {
        select_action_with(actions, eps, rng, || {
            let q = net.q_values(&ckpt.params, state_batch::<f32>(env.state()))?;
            Ok(argmax(q.data()))
        })
    };
    for _ in 0..args.warmup {
        let a = act(&env, &mut rng)?;
        if env.step(a)?.terminal {
            env.restart();
        }
    }
    let start = env.state().to_tensor::<f32>();
    let mut taken = Vec::with_capacity(args.horizon);
    let mut live = Vec::with_capacity(args.horizon);
    for _ in 0..args.horizon {
        let a = act(&env, &mut rng)?;
        let r = env.step(a)?;
        taken.push(a);
        live.push((r, env.state().newest().to_vec()));
        if r.terminal {
            env.restart();
        }
    }
    let predicted = unroll(&net, &ckpt.params, &start, &taken)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let f = t.model.frame_size;
    let mut steps = Vec::with_capacity(args.horizon);
    let mut report = String::from("k,action,reward,predicted_reward,p_minus,p_zero,p_plus,terminal,p_terminal,pixel_error\n");
    for (k, ((a, (r, gt)), p)) in taken.iter().zip(&live).zip(&predicted).enumerate() {
        let k = k + 1;
        let pred: Vec<u8> = p.frame.iter().map(|&v| pgm::quantize(v as f64)).collect();
        pgm::write(&args.out.join(format!("gt_{k}.pgm")), f, f, gt)?;
        pgm::write(&args.out.join(format!("pred_{k}.pgm")), f, f, &pred)?;
        let err = gt
            .iter()
            .zip(&p.frame)
            .map(|(&g, &q)| (g as f64 / 255.0 - q as f64).abs())
            .sum::<f64>()
            / gt.len() as f64;
        let step = RolloutStep {
            action: *a,
            reward: r.reward,
            terminal: r.terminal,
            predicted_reward: p.reward,
            reward_probs: p.reward_probs,
            terminal_prob: p.terminal_prob,
            pixel_error: err,
        };
        let _ = writeln!(
            report,
            "{k},{},{},{},{},{},{},{},{},{}",
            step.action,
            step.reward,
            step.predicted_reward,
            step.reward_probs[0],
            step.reward_probs[1],
            step.reward_probs[2],
            step.terminal as u8,
            step.terminal_prob,
            step.pixel_error
        );
        steps.push(step);
    }
    fs::write(args.out.join("report.txt"), report)?;
    Ok(steps)
}
