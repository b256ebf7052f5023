use alloc::boxed::Box;
use alloc::vec::Vec;

use super::{EnvSpec, Frame, Game, NOOP};
use crate::codec::{Decoder, Encoder};
use crate::nn::Tensor;
use crate::{Error, Result, Scalar};

/// The last `h` frames, newest last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StackedState {
    history: usize,
    frame_size: usize,
    frames: Vec<u8>,
}

impl StackedState {
    /// `history` copies of `frame`.
    pub fn filled(history: usize, frame_size: usize, frame: &[u8]) -> Self {
        assert_eq!(frame.len(), frame_size * frame_size, "frame size mismatch");
        let mut frames = Vec::with_capacity(history * frame.len());
        for _ in 0..history {
            frames.extend_from_slice(frame);
        }
        StackedState {
            history,
            frame_size,
            frames,
        }
    }

    /// `history` frames concatenated, oldest first.
    pub fn from_bytes(history: usize, frame_size: usize, frames: Vec<u8>) -> Self {
        assert_eq!(frames.len(), history * frame_size * frame_size, "stack size mismatch");
        StackedState {
            history,
            frame_size,
            frames,
        }
    }

    /// Drops the oldest frame and appends `frame`.
    pub fn push(&mut self, frame: &[u8]) {
        let px = self.frame_size * self.frame_size;
        assert_eq!(frame.len(), px, "frame size mismatch");
        self.frames.drain(..px);
        self.frames.extend_from_slice(frame);
    }

    pub fn history(&self) -> usize {
        self.history
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    /// Frame `i`, 0 = oldest.
    pub fn frame(&self, i: usize) -> &[u8] {
        let px = self.frame_size * self.frame_size;
        &self.frames[i * px..(i + 1) * px]
    }

    pub fn newest(&self) -> &[u8] {
        self.frame(self.history - 1)
    }

    pub fn bytes(&self) -> &[u8] {
        &self.frames
    }

    /// Pixels in `[0, 1]` appended to `out`.
    pub fn extend_pixels<S: Scalar>(&self, out: &mut Vec<S>) {
        out.extend(self.frames.iter().map(|&b| pixel::<S>(b)));
    }

    /// `[h, F, F]` tensor of pixels in `[0, 1]`.
    pub fn to_tensor<S: Scalar>(&self) -> Tensor<S> {
        let mut data = Vec::with_capacity(self.frames.len());
        self.extend_pixels(&mut data);
        let f = self.frame_size;
        Tensor::new(&[self.history, f, f], data).expect("consistent dims")
    }
}

/// Byte to intensity in `[0, 1]`.
#[inline]
pub fn pixel<S: Scalar>(b: u8) -> S {
    S::from_f64(b as f64 / 255.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvConfig {
    pub history: usize,
    /// Inner frames per agent step.
    pub frame_skip: usize,
    /// Restarts draw `0..=noop_max` no-op frames.
    pub noop_max: u64,
    /// Overrides the game's episode cap (agent steps).
    pub max_episode_steps: Option<u64>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            history: 4,
            frame_skip: 4,
            noop_max: 30,
            max_episode_steps: Some(27_000),
        }
    }
}

/// Outcome of one agent step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrappedStep {
    /// Sign of the reward accumulated over the skipped frames.
    pub reward: i8,
    pub raw_reward: f64,
    /// Learning terminal flag: game over, life lost or episode cap reached.
    pub terminal: bool,
    pub game_over: bool,
    pub life_lost: bool,
    pub truncated: bool,
}

/// A game behind frame skipping, reward clipping, frame stacking, random
/// no-op restarts and an episode cap.
pub struct Env {
    game: Box<dyn Game>,
    config: EnvConfig,
    stack: StackedState,
    episode_steps: u64,
    needs_restart: bool,
    last_noops: u64,
}

impl Env {
    /// Wraps `game` and performs an initial [`Env::reset`].
    pub fn new(game: Box<dyn Game>, config: EnvConfig) -> Self {
        let f = game.spec().frame_size;
        let frame = game.render();
        let mut env = Env {
            stack: StackedState::filled(config.history.max(1), f, &frame),
            game,
            config,
            episode_steps: 0,
            needs_restart: false,
            last_noops: 0,
        };
        env.reset();
        env
    }

    pub fn spec(&self) -> &EnvSpec {
        self.game.spec()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn game(&self) -> &dyn Game {
        self.game.as_ref()
    }

    pub fn game_mut(&mut self) -> &mut dyn Game {
        self.game.as_mut()
    }

    pub fn state(&self) -> &StackedState {
        &self.stack
    }

    pub fn episode_steps(&self) -> u64 {
        self.episode_steps
    }

    /// Number of no-op frames drawn by the latest restart.
    pub fn last_noops(&self) -> u64 {
        self.last_noops
    }

    pub fn episode_cap(&self) -> u64 {
        match self.config.max_episode_steps {
            Some(c) => c.min(self.spec().max_episode_steps),
            None => self.spec().max_episode_steps,
        }
    }

    /// New game, then `k ~ U{0..=noop_max}` no-op frames; the stack holds `h`
    /// copies of the resulting frame.
    pub fn reset(&mut self) -> &StackedState {
        self.game.reset();
        self.noop_start();
        &self.stack
    }

    /// Restart after a terminal flag: a fresh game when the game is over or
    /// the episode hit its cap, otherwise (life lost) a no-op start on the
    /// continuing game.
    pub fn restart(&mut self) -> &StackedState {
        let truncated = self.episode_steps >= self.episode_cap();
        if self.game.is_over() || truncated {
            self.reset()
        } else {
            self.noop_start();
            &self.stack
        }
    }

    fn noop_start(&mut self) {
        let k = self.game.rng_mut().inclusive(self.config.noop_max);
        self.last_noops = k;
        let mut frame = self.game.render();
        for _ in 0..k {
            let r = self.game.step(NOOP).expect("game not over during no-op start");
            frame = r.frame;
            if r.terminal {
                frame = self.game.reset();
            }
        }
        self.stack = StackedState::filled(self.config.history, self.spec().frame_size, &frame);
        self.episode_steps = 0;
        self.needs_restart = false;
    }

    /// One agent step: repeat `action` for `frame_skip` frames (stopping at a
    /// terminal event or life loss), sum and sign-clip the rewards and push
    /// the last frame onto the stack.
    pub fn step(&mut self, action: usize) -> Result<WrappedStep> {
        if self.needs_restart {
            return Err(Error::contract("env: step after terminal flag; restart first"));
        }
        if action >= self.spec().action_count {
            return Err(Error::contract(alloc::format!(
                "env: action {action} out of range 0..{}",
                self.spec().action_count
            )));
        }
        let mut raw = 0.0;
        let mut frame: Frame = Vec::new();
        let (mut game_over, mut life_lost) = (false, false);
        for _ in 0..self.config.frame_skip.max(1) {
            let r = self.game.step(action)?;
            raw += r.raw_reward;
            frame = r.frame;
            game_over |= r.terminal;
            life_lost |= r.life_lost;
            if r.terminal || r.life_lost {
                break;
            }
        }
        self.episode_steps += 1;
        let truncated = self.episode_steps >= self.episode_cap();
        let terminal = game_over || life_lost || truncated;
        self.stack.push(&frame);
        self.needs_restart = terminal;
        Ok(WrappedStep {
            reward: clip_reward(raw),
            raw_reward: raw,
            terminal,
            game_over,
            life_lost,
            truncated,
        })
    }

    pub fn encode_state(&self, enc: &mut Encoder) {
        self.game.encode_state(enc);
        enc.blob(self.stack.bytes());
        enc.u64(self.episode_steps);
        enc.u8(self.needs_restart as u8);
        enc.u64(self.last_noops);
    }

    pub fn decode_state(&mut self, dec: &mut Decoder<'_>) -> Result<()> {
        self.game.decode_state(dec)?;
        let bytes = dec.blob()?;
        if bytes.len() != self.stack.frames.len() {
            return Err(Error::Decode("frame stack size mismatch".into()));
        }
        self.stack.frames.copy_from_slice(bytes);
        self.episode_steps = dec.u64()?;
        self.needs_restart = dec.u8()? != 0;
        self.last_noops = dec.u64()?;
        Ok(())
    }
}

/// Sign clipping to `{-1, 0, +1}`.
pub fn clip_reward(raw: f64) -> i8 {
    if raw > 0.0 {
        1
    } else if raw < 0.0 {
        -1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Catch, Game, StepResult};
    use crate::Rng;

    /// Emits scripted per-frame rewards.
    struct Script {
        spec: EnvSpec,
        rewards: Vec<f64>,
        terminal_at: Option<usize>,
        t: usize,
        rng: Rng,
    }

    impl Script {
        fn boxed(rewards: &[f64], terminal_at: Option<usize>) -> Box<dyn Game> {
            Box::new(Script {
                spec: EnvSpec {
                    name: "script",
                    frame_size: 2,
                    action_count: 2,
                    action_labels: &["NOOP", "GO"],
                    max_episode_steps: 1000,
                    random_score: 0.0,
                    human_score: 1.0,
                },
                rewards: rewards.to_vec(),
                terminal_at,
                t: 0,
                rng: Rng::new(0),
            })
        }
    }

    impl Game for Script {
        fn spec(&self) -> &EnvSpec {
            &self.spec
        }
        fn reset(&mut self) -> Frame {
            self.t = 0;
            self.render()
        }
        fn step(&mut self, _action: usize) -> Result<StepResult> {
            let r = self.rewards.get(self.t).copied().unwrap_or(0.0);
            self.t += 1;
            Ok(StepResult {
                frame: self.render(),
                raw_reward: r,
                terminal: Some(self.t) == self.terminal_at,
                life_lost: false,
            })
        }
        fn render(&self) -> Frame {
            alloc::vec![self.t as u8; 4]
        }
        fn lives(&self) -> u32 {
            1
        }
        fn is_over(&self) -> bool {
            Some(self.t) == self.terminal_at
        }
        fn rng_mut(&mut self) -> &mut Rng {
            &mut self.rng
        }
        fn encode_state(&self, _enc: &mut Encoder) {}
        fn decode_state(&mut self, _dec: &mut Decoder<'_>) -> Result<()> {
            Ok(())
        }
        fn scripted_action(&self) -> usize {
            0
        }
    }

    fn no_noops() -> EnvConfig {
        EnvConfig {
            noop_max: 0,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn rewards_accumulate_then_clip() {
        let mut env = Env::new(Script::boxed(&[0.0, 0.0, 1.0, 0.0], None), no_noops());
        let s = env.step(1).unwrap();
        assert_eq!((s.reward, s.raw_reward), (1, 1.0));

        let mut env = Env::new(Script::boxed(&[3.0, 4.0, 0.0, 0.0], None), no_noops());
        assert_eq!(env.step(1).unwrap().reward, 1);
        let mut env = Env::new(Script::boxed(&[-1.0, -2.0, 0.0, 0.0], None), no_noops());
        assert_eq!(env.step(1).unwrap().reward, -1);
        let mut env = Env::new(Script::boxed(&[0.0; 4], None), no_noops());
        assert_eq!(env.step(1).unwrap().reward, 0);
        assert_eq!(clip_reward(7.0), 1);
        assert_eq!(clip_reward(-3.0), -1);
    }

    #[test]
    fn inner_terminal_stops_skip_loop() {
        let mut env = Env::new(Script::boxed(&[0.0; 8], Some(2)), no_noops());
        let s = env.step(1).unwrap();
        assert!(s.terminal && s.game_over);
        // the newest frame is the one rendered at the terminal frame
        assert_eq!(env.state().newest(), &[2u8; 4]);
        assert!(matches!(env.step(1), Err(Error::Contract(_))));
    }

    #[test]
    fn stack_shifts_by_one() {
        let mut env = Env::new(Box::new(Catch::new(40, Rng::new(3)).unwrap()), EnvConfig::default());
        for a in [0, 1, 2, 2, 1] {
            let before = env.state().clone();
            env.step(a).unwrap();
            let after = env.state();
            for i in 0..3 {
                assert_eq!(after.frame(i), before.frame(i + 1));
            }
        }
    }

    #[test]
    fn zero_noops_fills_stack_with_initial_frame() {
        let mut env = Env::new(Box::new(Catch::new(40, Rng::new(3)).unwrap()), no_noops());
        env.reset();
        let first = env.game().render();
        for i in 0..4 {
            assert_eq!(env.state().frame(i), first.as_slice());
        }
    }

    #[test]
    fn episode_cap_sets_terminal() {
        let cfg = EnvConfig {
            max_episode_steps: Some(3),
            ..no_noops()
        };
        let mut env = Env::new(Script::boxed(&[0.0; 64], None), cfg);
        assert!(!env.step(0).unwrap().terminal);
        assert!(!env.step(0).unwrap().terminal);
        let s = env.step(0).unwrap();
        assert!(s.terminal && s.truncated && !s.game_over);
        env.restart();
        assert_eq!(env.episode_steps(), 0);
    }
}
