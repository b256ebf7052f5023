//! Environments, the frame-skip/stack wrapper and the built-in games.
//!
//! Games render native grayscale frames as bytes (`value / 255` is the pixel
//! intensity in `[0, 1]`); the same bytes are stored in replay and hashed for
//! golden traces.

mod catch;
mod seek;
mod trace;
mod wrapper;

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

pub use catch::Catch;
pub use seek::Seek;
pub use trace::{format_trace, record_trace, TraceLine};
pub use wrapper::{clip_reward, pixel, Env, EnvConfig, StackedState, WrappedStep};

use crate::codec::{Decoder, Encoder};
use crate::{Error, Result, Rng};

/// A quantized grayscale frame, row-major, `frame_size²` bytes.
pub type Frame = Vec<u8>;

/// Action 0 is a no-op in every built-in game.
pub const NOOP: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub frame_size: usize,
    pub action_count: usize,
    pub action_labels: &'static [&'static str],
    /// Agent steps after which an episode is cut off.
    pub max_episode_steps: u64,
    /// Mean evaluation return of a uniform-random policy.
    pub random_score: f64,
    /// Mean evaluation return of the game's scripted reference policy.
    pub human_score: f64,
}

/// Result of one inner (single-frame) step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub frame: Frame,
    pub raw_reward: f64,
    pub terminal: bool,
    pub life_lost: bool,
}

/// Frame-level game dynamics. All randomness comes from the game's own
/// stream, so `(seed, actions)` determines the trajectory.
pub trait Game: Send {
    fn spec(&self) -> &EnvSpec;
    /// Starts a new game and returns its first frame.
    fn reset(&mut self) -> Frame;
    /// Advances one frame. Fails if the game is over.
    fn step(&mut self, action: usize) -> Result<StepResult>;
    fn render(&self) -> Frame;
    fn lives(&self) -> u32;
    fn is_over(&self) -> bool;
    fn rng_mut(&mut self) -> &mut Rng;
    fn encode_state(&self, enc: &mut Encoder);
    fn decode_state(&mut self, dec: &mut Decoder<'_>) -> Result<()>;
    /// An action a scripted near-optimal player would take now.
    fn scripted_action(&self) -> usize;
}

/// Names of the built-in games.
pub const GAMES: [&str; 2] = ["catch", "seek"];

/// Instantiates a built-in game by name.
pub fn make_game(name: &str, frame_size: usize, rng: Rng) -> Result<Box<dyn Game>> {
    match name {
        "catch" => Ok(Box::new(Catch::new(frame_size, rng)?)),
        "seek" => Ok(Box::new(Seek::new(frame_size, rng)?)),
        other => Err(Error::config("env.name", format!("unknown game `{other}`"))),
    }
}

/// Spec of a built-in game at the given frame size.
pub fn game_spec(name: &str, frame_size: usize) -> Result<EnvSpec> {
    Ok(make_game(name, frame_size, Rng::new(0))?.spec().clone())
}
