//! `catch`: a ball falls one row per frame from a random column at the top;
//! a five-pixel paddle on the bottom row must be under it when it lands.
//!
//! Actions: `NOOP`, `LEFT`, `RIGHT` (one column per frame). A landing ball
//! yields `+1` if it is within two columns of the paddle centre and `-1`
//! otherwise, then a new ball appears on the top row. The game ends after
//! ten balls.

use alloc::format;

use super::{EnvSpec, Frame, Game, StepResult};
use crate::codec::{Decoder, Encoder};
use crate::{Error, Result, Rng};

pub const BALL: u8 = 255;
pub const PADDLE: u8 = 170;
const HALF_PADDLE: i32 = 2;
const BALLS_PER_GAME: u32 = 10;

/// `(frame_size, random, scripted)` means over 1000 evaluation episodes,
/// seed 0, clipped rewards. Both depend on the fall height.
const REFERENCE: [(usize, f64, f64); 10] = [
    (8, 2.168, 8.294),
    (12, -1.369, 8.493),
    (16, -3.448, 8.662),
    (20, -4.856, 8.714),
    (24, -5.685, 8.635),
    (32, -6.994, 8.762),
    (40, -7.51, 8.944),
    (48, -7.888, 8.994),
    (64, -8.416, 8.88),
    (84, -8.794, 8.888),
];

/// Reference `(random, scripted)` scores for the nearest tabulated size.
pub fn reference_scores(frame_size: usize) -> (f64, f64) {
    let (_, r, h) = REFERENCE
        .iter()
        .copied()
        .min_by_key(|&(fs, _, _)| fs.abs_diff(frame_size))
        .expect("table is non-empty");
    (r, h)
}

#[derive(Debug, Clone)]
pub struct Catch {
    spec: EnvSpec,
    size: i32,
    paddle: i32,
    ball_row: i32,
    ball_col: i32,
    balls_done: u32,
    balls_per_game: u32,
    over: bool,
    rng: Rng,
}

impl Catch {
    pub fn new(frame_size: usize, rng: Rng) -> Result<Self> {
        if !(8..=1024).contains(&frame_size) {
            return Err(Error::config(
                "env.frame_size",
                format!("catch needs 8..=1024 pixels, got {frame_size}"),
            ));
        }
        let (random_score, human_score) = reference_scores(frame_size);
        let mut c = Catch {
            spec: EnvSpec {
                name: "catch",
                frame_size,
                action_count: 3,
                action_labels: &["NOOP", "LEFT", "RIGHT"],
                max_episode_steps: 27_000,
                random_score,
                human_score,
            },
            size: frame_size as i32,
            paddle: frame_size as i32 / 2,
            ball_row: 0,
            ball_col: 0,
            balls_done: 0,
            balls_per_game: BALLS_PER_GAME,
            over: false,
            rng,
        };
        c.reset();
        Ok(c)
    }

    /// Shortens the game to `balls` balls.
    pub fn with_balls(mut self, balls: u32) -> Self {
        self.balls_per_game = balls.max(1);
        self
    }

    pub fn paddle(&self) -> i32 {
        self.paddle
    }

    pub fn ball(&self) -> (i32, i32) {
        (self.ball_row, self.ball_col)
    }

    pub fn balls_done(&self) -> u32 {
        self.balls_done
    }

    /// Places paddle and ball directly; for tests and scripted scenarios.
    pub fn set_positions(&mut self, paddle: i32, ball_row: i32, ball_col: i32, balls_done: u32) {
        self.paddle = paddle.clamp(HALF_PADDLE, self.size - 1 - HALF_PADDLE);
        self.ball_row = ball_row.clamp(0, self.size - 1);
        self.ball_col = ball_col.clamp(0, self.size - 1);
        self.balls_done = balls_done;
        self.over = false;
    }

    fn spawn_ball(&mut self) {
        self.ball_row = 0;
        self.ball_col = self.rng.below(self.size as u64) as i32;
    }
}

impl Game for Catch {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Frame {
        self.paddle = self.size / 2;
        self.balls_done = 0;
        self.over = false;
        self.spawn_ball();
        self.render()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.over {
            return Err(Error::contract("catch: step after terminal; reset first"));
        }
        if action >= 3 {
            return Err(Error::contract(format!("catch: action {action} out of range")));
        }
        let dx = match action {
            1 => -1,
            2 => 1,
            _ => 0,
        };
        self.paddle = (self.paddle + dx).clamp(HALF_PADDLE, self.size - 1 - HALF_PADDLE);
        self.ball_row += 1;
        let mut reward = 0.0;
        if self.ball_row >= self.size - 1 {
            reward = if (self.ball_col - self.paddle).abs() <= HALF_PADDLE {
                1.0
            } else {
                -1.0
            };
            self.balls_done += 1;
            if self.balls_done >= self.balls_per_game {
                self.over = true;
            } else {
                self.spawn_ball();
            }
        }
        Ok(StepResult {
            frame: self.render(),
            raw_reward: reward,
            terminal: self.over,
            life_lost: false,
        })
    }

    fn render(&self) -> Frame {
        let s = self.size as usize;
        let mut f = alloc::vec![0u8; s * s];
        let bottom = (s - 1) * s;
        for c in (self.paddle - HALF_PADDLE)..=(self.paddle + HALF_PADDLE) {
            f[bottom + c as usize] = PADDLE;
        }
        f[self.ball_row as usize * s + self.ball_col as usize] = BALL;
        f
    }

    fn lives(&self) -> u32 {
        u32::from(!self.over)
    }

    fn is_over(&self) -> bool {
        self.over
    }

    fn rng_mut(&mut self) -> &mut Rng {
        &mut self.rng
    }

    fn encode_state(&self, enc: &mut Encoder) {
        for v in [self.paddle, self.ball_row, self.ball_col] {
            enc.i32(v);
        }
        enc.u32(self.balls_done);
        enc.u32(self.balls_per_game);
        enc.u8(self.over as u8);
        self.rng.encode(enc);
    }

    fn decode_state(&mut self, dec: &mut Decoder<'_>) -> Result<()> {
        self.paddle = dec.i32()?;
        self.ball_row = dec.i32()?;
        self.ball_col = dec.i32()?;
        self.balls_done = dec.u32()?;
        self.balls_per_game = dec.u32()?;
        self.over = dec.u8()? != 0;
        self.rng = Rng::decode(dec)?;
        Ok(())
    }

    fn scripted_action(&self) -> usize {
        match self.ball_col.cmp(&self.paddle) {
            core::cmp::Ordering::Less => 1,
            core::cmp::Ordering::Greater => 2,
            core::cmp::Ordering::Equal => 0,
        }
    }
}
