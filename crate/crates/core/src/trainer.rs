//! The interaction/update loop: epsilon-greedy acting, replay storage,
//! periodic compound-loss updates with Adam, and target-network syncs.

use alloc::string::String;
use alloc::vec::Vec;

use crate::codec::{Decoder, Encoder};
use crate::env::{make_game, Env, EnvConfig};
use crate::nn::{clip_global_norm, AdamConfig, AdamState, ParamSet, Tensor};
use crate::replay::{ReplayMemory, Transition};
use crate::rng::fnv1a64;
use crate::transcoder::{compound_loss, dqn_loss, LossBreakdown, LossConfig, Transcoder, TranscoderConfig};
use crate::{Error, Result, Rng, Scalar};

/// Which gradient the update step follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    /// Bellman loss plus the weighted prediction losses.
    #[default]
    Compound,
    /// Bellman loss through the encoder and Q head only.
    DqnReference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub game: String,
    pub env: EnvConfig,
    pub model: TranscoderConfig,
    pub total_steps: u64,
    pub warmup_steps: u64,
    pub update_period: u64,
    pub target_sync_period: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_anneal_steps: u64,
    pub loss: LossConfig,
    pub batch: usize,
    pub traj_len: usize,
    pub grad_clip: f64,
    pub eval_period: u64,
    pub replay_capacity: usize,
    pub adam: AdamConfig,
    pub objective: Objective,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults for `game` on the desk-scale network.
    pub fn new(game: &str, frame_size: usize) -> Result<Self> {
        let spec = crate::env::game_spec(game, frame_size)?;
        let mut model = TranscoderConfig::desk(spec.action_count);
        model.frame_size = frame_size;
        Ok(TrainConfig {
            game: game.into(),
            env: EnvConfig::default(),
            model,
            total_steps: 5_000_000,
            warmup_steps: 50_000,
            update_period: 4,
            target_sync_period: 32_000,
            eps_start: 1.0,
            eps_end: 0.1,
            eps_anneal_steps: 1_000_000,
            loss: LossConfig::default(),
            batch: 32,
            traj_len: 4,
            grad_clip: 1.0,
            eval_period: 100_000,
            replay_capacity: 1_000_000,
            adam: AdamConfig::default(),
            objective: Objective::Compound,
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let spec = crate::env::game_spec(&self.game, self.model.frame_size)?;
        self.model.validate()?;
        self.loss.validate()?;
        if self.model.action_count != spec.action_count {
            return Err(Error::config(
                "model.action_count",
                alloc::format!("{} has {} actions, model has {}", self.game, spec.action_count, self.model.action_count),
            ));
        }
        if self.model.history != self.env.history {
            return Err(Error::config("env.history", "must equal the model's frame history"));
        }
        let positive = [
            ("train.update_period", self.update_period),
            ("train.target_sync_period", self.target_sync_period),
            ("train.eval_period", self.eval_period),
            ("train.eps_anneal_steps", self.eps_anneal_steps),
            ("train.batch", self.batch as u64),
            ("train.traj_len", self.traj_len as u64),
            ("replay.capacity", self.replay_capacity as u64),
            ("env.frame_skip", self.env.frame_skip as u64),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.eps_end) || !(0.0..=1.0).contains(&self.eps_start) || self.eps_start < self.eps_end {
            return Err(Error::config("train.eps_start", "need 1 >= eps_start >= eps_end >= 0"));
        }
        if self.warmup_steps > self.total_steps {
            return Err(Error::config("train.warmup_steps", "exceeds train.total_steps"));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::config("train.grad_clip", "must be positive"));
        }
        Ok(())
    }
}

/// Exploration rate at step `t`: `eps_start` through warm-up, then linear
/// down to `eps_end` over `eps_anneal_steps`.
pub fn epsilon(t: u64, cfg: &TrainConfig) -> f64 {
    if t <= cfg.warmup_steps {
        return cfg.eps_start;
    }
    let frac = ((t - cfg.warmup_steps) as f64 / cfg.eps_anneal_steps as f64).min(1.0);
    cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start)
}

/// Index of the largest value, lowest index on ties.
pub fn argmax<S: Scalar>(q: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy choice. Draws one uniform number, plus a second one when
/// exploring.
pub fn select_action<S: Scalar>(q: &[S], eps: f64, rng: &mut Rng) -> usize {
    select_action_with(q.len(), eps, rng, || Ok(argmax(q))).expect("infallible")
}

/// [`select_action`] that only evaluates `greedy` when exploiting.
pub fn select_action_with(
    actions: usize,
    eps: f64,
    rng: &mut Rng,
    greedy: impl FnOnce() -> Result<usize>,
) -> Result<usize> {
    if rng.next_f64() < eps {
        Ok(rng.below(actions as u64) as usize)
    } else {
        greedy()
    }
}

/// Hash of every parameter's bytes, in order.
pub fn param_digest(params: &ParamSet<f32>) -> u64 {
    let mut bytes = Vec::with_capacity(params.scalar_count() * 4);
    for (_, p) in params.iter() {
        for v in p.tensor.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fnv1a64(&bytes)
}

/// Hooks called by [`Trainer::run`].
pub trait Observer {
    fn on_update(&mut self, _t: u64, _loss: &LossBreakdown, _epsilon: f64) -> Result<()> {
        Ok(())
    }

    /// `ret` is the clipped return of an episode that just ended.
    fn on_episode_end(&mut self, _t: u64, _ret: f64) -> Result<()> {
        Ok(())
    }

    /// Every `eval_period` steps.
    fn on_checkpoint(&mut self, _trainer: &Trainer) -> Result<()> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct NoObserver;

impl Observer for NoObserver {}

/// Counters carried across checkpoints.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Progress {
    pub step: u64,
    pub updates: u64,
    pub syncs: u64,
    pub episodes: u64,
    pub episode_return: f64,
    pub last_return: Option<f64>,
}

pub struct Trainer {
    config: TrainConfig,
    net: Transcoder,
    params: ParamSet<f32>,
    target: ParamSet<f32>,
    adam: AdamState<f32>,
    replay: ReplayMemory,
    env: Env,
    act_rng: Rng,
    sample_rng: Rng,
    progress: Progress,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let root = Rng::new(config.seed);
        let net = Transcoder::new(config.model.clone())?;
        let params = net.init_params::<f32>(&mut root.split("init"));
        let game = make_game(&config.game, config.model.frame_size, root.split("env"))?;
        let env = Env::new(game, config.env);
        let mut replay = ReplayMemory::new(config.replay_capacity, config.model.history, config.model.frame_size)?;
        replay.begin_episode(env.state().newest());
        let adam = AdamState::new(config.adam, &params);
        let mut t = Trainer {
            target: params.clone(),
            params,
            adam,
            net,
            replay,
            env,
            act_rng: root.split("act"),
            sample_rng: root.split("replay"),
            progress: Progress::default(),
            config,
        };
        t.sync_target();
        Ok(t)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn net(&self) -> &Transcoder {
        &self.net
    }

    pub fn params(&self) -> &ParamSet<f32> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<f32> {
        &mut self.params
    }

    pub fn target_params(&self) -> &ParamSet<f32> {
        &self.target
    }

    pub fn adam(&self) -> &AdamState<f32> {
        &self.adam
    }

    pub fn adam_mut(&mut self) -> &mut AdamState<f32> {
        &mut self.adam
    }

    pub fn replay(&self) -> &ReplayMemory {
        &self.replay
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn progress(&self) -> &Progress {
        &self.progress
    }

    pub fn step_count(&self) -> u64 {
        self.progress.step
    }

    /// The acting and sampling streams.
    pub fn rngs(&self) -> [&Rng; 2] {
        [&self.act_rng, &self.sample_rng]
    }

    pub fn set_rngs(&mut self, act: Rng, sample: Rng) {
        self.act_rng = act;
        self.sample_rng = sample;
    }

    /// `θ⁻ ← θ`.
    pub fn sync_target(&mut self) {
        self.target = self.params.clone();
        self.progress.syncs += 1;
    }

    pub fn epsilon(&self) -> f64 {
        epsilon(self.progress.step, &self.config)
    }

    /// One agent step, plus the update, sync and restart it triggers.
    pub fn step(&mut self, obs: &mut dyn Observer) -> Result<()> {
        let eps = self.epsilon();
        let (net, params, state) = (&self.net, &self.params, self.env.state());
        let action = select_action_with(self.config.model.action_count, eps, &mut self.act_rng, || {
            let q = net.q_values(params, state_batch(state))?;
            Ok(argmax(q.data()))
        })?;
        let r = self.env.step(action)?;
        self.replay.push(
            self.env.state().newest(),
            Transition {
                action,
                reward: r.reward,
                terminal: r.terminal,
            },
        )?;
        self.progress.episode_return += r.reward as f64;
        self.progress.step += 1;
        let t = self.progress.step;
        let cfg = &self.config;
        if t > cfg.warmup_steps && (t - cfg.warmup_steps).is_multiple_of(cfg.update_period) {
            if let Some(loss) = self.update()? {
                obs.on_update(t, &loss, eps)?;
            }
        }
        if t.is_multiple_of(self.config.target_sync_period) {
            self.sync_target();
        }
        if r.terminal {
            let ret = self.progress.episode_return;
            self.progress.episodes += 1;
            self.progress.last_return = Some(ret);
            self.progress.episode_return = 0.0;
            obs.on_episode_end(t, ret)?;
            self.env.restart();
            self.replay.begin_episode(self.env.state().newest());
        }
        if t.is_multiple_of(self.config.eval_period) {
            obs.on_checkpoint(self)?;
        }
        Ok(())
    }

    /// Samples a batch and applies one clipped Adam step. `None` while replay
    /// holds no valid trajectory.
    fn update(&mut self) -> Result<Option<LossBreakdown>> {
        let cfg = &self.config;
        let batch = match self.replay.sample::<f32>(cfg.batch, cfg.traj_len, &mut self.sample_rng) {
            Ok(b) => b.transitions,
            Err(Error::NotReady) => return Ok(None),
            Err(e) => return Err(e),
        };
        let (loss, mut grads) = match cfg.objective {
            Objective::Compound => compound_loss(&self.net, &self.params, &self.target, &batch, &cfg.loss)?,
            Objective::DqnReference => dqn_loss(&self.net, &self.params, &self.target, &batch, &cfg.loss)?,
        };
        if !loss.all_finite() || !grads.all_finite() {
            return Err(Error::contract(alloc::format!(
                "non-finite loss or gradient at step {}",
                self.progress.step
            )));
        }
        clip_global_norm(&mut grads, cfg.grad_clip as f32);
        self.adam.step(&mut self.params, &grads)?;
        self.progress.updates += 1;
        Ok(Some(loss))
    }

    /// Steps until `total_steps`.
    pub fn run(&mut self, obs: &mut dyn Observer) -> Result<()> {
        self.run_until(self.config.total_steps, obs)
    }

    pub fn run_until(&mut self, t_end: u64, obs: &mut dyn Observer) -> Result<()> {
        while self.progress.step < t_end {
            self.step(obs)?;
        }
        Ok(())
    }

    /// Target network, counters, environment and replay.
    pub fn encode_runtime(&self, enc: &mut Encoder) {
        let p = &self.progress;
        enc.u64(p.step);
        enc.u64(p.updates);
        enc.u64(p.syncs);
        enc.u64(p.episodes);
        enc.f64(p.episode_return);
        match p.last_return {
            Some(r) => {
                enc.u8(1);
                enc.f64(r);
            }
            None => enc.u8(0),
        }
        for (_, param) in self.target.iter() {
            for &v in param.tensor.data() {
                enc.f32(v);
            }
        }
        self.env.encode_state(enc);
        self.replay.encode(enc);
    }

    pub fn decode_runtime(&mut self, dec: &mut Decoder<'_>) -> Result<()> {
        let mut p = Progress {
            step: dec.u64()?,
            updates: dec.u64()?,
            syncs: dec.u64()?,
            episodes: dec.u64()?,
            episode_return: dec.f64()?,
            last_return: None,
        };
        if dec.u8()? == 1 {
            p.last_return = Some(dec.f64()?);
        }
        let ids: Vec<_> = self.target.iter().map(|(id, _)| id).collect();
        for id in ids {
            for v in self.target.values_mut(id) {
                *v = dec.f32()?;
            }
        }
        self.env.decode_state(dec)?;
        let replay = ReplayMemory::decode(dec)?;
        if replay.capacity() != self.config.replay_capacity || replay.history() != self.config.model.history {
            return Err(Error::Decode("replay geometry differs from the configuration".into()));
        }
        self.replay = replay;
        self.progress = p;
        Ok(())
    }
}

/// `[1, h, F, F]` batch of one state.
pub fn state_batch<S: Scalar>(state: &crate::env::StackedState) -> Tensor<S> {
    let t = state.to_tensor::<S>();
    let mut dims = Vec::with_capacity(4);
    dims.push(1);
    dims.extend_from_slice(t.dims());
    t.reshape(&dims).expect("same length")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TrainConfig {
        let mut c = TrainConfig::new("catch", 20).unwrap();
        c.model = TranscoderConfig::tiny(3);
        c.model.history = 4;
        c.total_steps = 200;
        c.warmup_steps = 64;
        c.target_sync_period = 50;
        c.eval_period = 100;
        c.replay_capacity = 1000;
        c.batch = 4;
        c
    }

    #[test]
    fn epsilon_schedule() {
        let c = TrainConfig::new("catch", 40).unwrap();
        assert_eq!(epsilon(0, &c), 1.0);
        assert_eq!(epsilon(50_000, &c), 1.0);
        assert!((epsilon(550_000, &c) - 0.55).abs() < 1e-12);
        assert!((epsilon(1_050_000, &c) - 0.1).abs() < 1e-12);
        assert!((epsilon(9_000_000, &c) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn greedy_choice_breaks_ties_low() {
        let mut rng = Rng::new(0);
        assert_eq!(select_action(&[1.0f32, 3.0, 2.0], 0.0, &mut rng), 1);
        assert_eq!(select_action(&[2.0f32, 2.0, 0.0], 0.0, &mut rng), 0);
    }

    #[test]
    fn warmup_leaves_params_alone_and_cadence_holds() {
        let mut t = Trainer::new(cfg()).unwrap();
        let before = param_digest(t.params());
        t.run_until(64, &mut NoObserver).unwrap();
        assert_eq!(param_digest(t.params()), before);
        assert_eq!(t.progress().updates, 0);
        t.run_until(200, &mut NoObserver).unwrap();
        assert_eq!(t.progress().updates, (200 - 64) / 4);
        assert_eq!(t.progress().syncs, 200 / 50 + 1);
        assert_ne!(param_digest(t.params()), before);
    }

    #[test]
    fn sync_copies_without_aliasing() {
        let mut t = Trainer::new(cfg()).unwrap();
        t.run_until(120, &mut NoObserver).unwrap();
        t.sync_target();
        assert_eq!(t.params(), t.target_params());
        let snapshot = t.target_params().clone();
        let id = t.params().iter().next().unwrap().0;
        t.params_mut().values_mut(id)[0] += 1.0;
        assert_eq!(t.target_params(), &snapshot);
    }
}
