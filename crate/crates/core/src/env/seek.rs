//! `seek`: an agent walks a walled 10×10 cell grid towards a goal.
//!
//! Actions: `NOOP`, `UP`, `DOWN`, `LEFT`, `RIGHT`. The agent moves one cell
//! every fourth frame. Reaching the goal yields `+1` and the goal respawns on
//! a random free cell. A hazard patrols the middle row back and forth, one
//! cell every eighth frame; touching it yields `-1`, costs a life and sends
//! the agent back to its start cell. The game ends when three lives are lost.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{EnvSpec, Frame, Game, StepResult};
use crate::codec::{Decoder, Encoder};
use crate::{Error, Result, Rng};

pub const GRID: i32 = 10;
pub const WALL: u8 = 80;
pub const GOAL: u8 = 160;
pub const HAZARD: u8 = 110;
pub const AGENT: u8 = 255;
const HAZARD_ROW: i32 = 5;
const START: (i32, i32) = (1, 1);
const LIVES: u32 = 3;
const MOVE_EVERY: u64 = 4;
const HAZARD_EVERY: u64 = 8;
/// Bounce path over columns 1..=8 and back.
const HAZARD_CYCLE: i32 = 2 * (GRID - 3);

#[derive(Debug, Clone)]
pub struct Seek {
    spec: EnvSpec,
    cell: usize,
    agent: (i32, i32),
    goal: (i32, i32),
    hazard_phase: i32,
    frame: u64,
    lives: u32,
    rng: Rng,
}

fn is_wall(r: i32, c: i32) -> bool {
    r <= 0 || c <= 0 || r >= GRID - 1 || c >= GRID - 1
}

impl Seek {
    pub fn new(frame_size: usize, rng: Rng) -> Result<Self> {
        if !(GRID as usize..=1024).contains(&frame_size) {
            return Err(Error::config(
                "env.frame_size",
                format!("seek needs 10..=1024 pixels, got {frame_size}"),
            ));
        }
        let mut s = Seek {
            spec: EnvSpec {
                name: "seek",
                frame_size,
                action_count: 5,
                action_labels: &["NOOP", "UP", "DOWN", "LEFT", "RIGHT"],
                max_episode_steps: 500,
                random_score: -0.392,
                human_score: 86.224,
            },
            cell: frame_size / GRID as usize,
            agent: START,
            goal: (1, 8),
            hazard_phase: 0,
            frame: 0,
            lives: LIVES,
            rng,
        };
        s.reset();
        Ok(s)
    }

    pub fn agent(&self) -> (i32, i32) {
        self.agent
    }

    pub fn goal(&self) -> (i32, i32) {
        self.goal
    }

    /// Hazard cell `(row, col)` for the current phase.
    pub fn hazard(&self) -> (i32, i32) {
        let span = GRID - 3;
        let p = self.hazard_phase;
        let col = if p <= span { 1 + p } else { 1 + 2 * span - p };
        (HAZARD_ROW, col)
    }

    /// Places agent and goal directly; for tests and scripted scenarios.
    pub fn set_positions(&mut self, agent: (i32, i32), goal: (i32, i32)) {
        self.agent = agent;
        self.goal = goal;
    }

    fn spawn_goal(&mut self) {
        let free: Vec<(i32, i32)> = (1..GRID - 1)
            .flat_map(|r| (1..GRID - 1).map(move |c| (r, c)))
            .filter(|&cell| cell.0 != HAZARD_ROW && cell != self.agent)
            .collect();
        self.goal = free[self.rng.below(free.len() as u64) as usize];
    }

    fn hazard_after(&self, phase: i32) -> (i32, i32) {
        let mut probe = self.clone();
        probe.hazard_phase = phase;
        probe.hazard()
    }
}

impl Game for Seek {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Frame {
        self.agent = START;
        self.hazard_phase = 0;
        self.frame = 0;
        self.lives = LIVES;
        self.spawn_goal();
        self.render()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.lives == 0 {
            return Err(Error::contract("seek: step after terminal; reset first"));
        }
        if action >= 5 {
            return Err(Error::contract(format!("seek: action {action} out of range")));
        }
        if self.frame.is_multiple_of(MOVE_EVERY) {
            let (dr, dc) = match action {
                1 => (-1, 0),
                2 => (1, 0),
                3 => (0, -1),
                4 => (0, 1),
                _ => (0, 0),
            };
            let next = (self.agent.0 + dr, self.agent.1 + dc);
            if !is_wall(next.0, next.1) {
                self.agent = next;
            }
        }
        if self.frame.is_multiple_of(HAZARD_EVERY) {
            self.hazard_phase = (self.hazard_phase + 1) % HAZARD_CYCLE;
        }
        self.frame += 1;

        let mut reward = 0.0;
        let mut life_lost = false;
        if self.agent == self.hazard() {
            reward = -1.0;
            life_lost = true;
            self.lives -= 1;
            self.agent = START;
        } else if self.agent == self.goal {
            reward = 1.0;
            self.spawn_goal();
        }
        Ok(StepResult {
            frame: self.render(),
            raw_reward: reward,
            terminal: self.lives == 0,
            life_lost,
        })
    }

    fn render(&self) -> Frame {
        let s = self.spec.frame_size;
        let mut f = vec![WALL; s * s];
        let paint = |f: &mut Frame, (r, c): (i32, i32), v: u8| {
            let (r, c) = (r as usize * self.cell, c as usize * self.cell);
            for y in r..r + self.cell {
                f[y * s + c..y * s + c + self.cell].fill(v);
            }
        };
        for r in 1..GRID - 1 {
            for c in 1..GRID - 1 {
                paint(&mut f, (r, c), 0);
            }
        }
        paint(&mut f, self.goal, GOAL);
        paint(&mut f, self.hazard(), HAZARD);
        paint(&mut f, self.agent, AGENT);
        f
    }

    fn lives(&self) -> u32 {
        self.lives
    }

    fn is_over(&self) -> bool {
        self.lives == 0
    }

    fn rng_mut(&mut self) -> &mut Rng {
        &mut self.rng
    }

    fn encode_state(&self, enc: &mut Encoder) {
        for v in [self.agent.0, self.agent.1, self.goal.0, self.goal.1, self.hazard_phase] {
            enc.i32(v);
        }
        enc.u64(self.frame);
        enc.u32(self.lives);
        self.rng.encode(enc);
    }

    fn decode_state(&mut self, dec: &mut Decoder<'_>) -> Result<()> {
        self.agent = (dec.i32()?, dec.i32()?);
        self.goal = (dec.i32()?, dec.i32()?);
        self.hazard_phase = dec.i32()?;
        self.frame = dec.u64()?;
        self.lives = dec.u32()?;
        self.rng = Rng::decode(dec)?;
        Ok(())
    }

    /// Breadth-first shortest path to the goal that avoids the hazard's
    /// current cell and the cells it occupies during the next two moves.
    fn scripted_action(&self) -> usize {
        let mut blocked = vec![self.hazard()];
        for k in 1..=2 {
            blocked.push(self.hazard_after((self.hazard_phase + k) % HAZARD_CYCLE));
        }
        let idx = |(r, c): (i32, i32)| (r * GRID + c) as usize;
        let mut first = vec![usize::MAX; (GRID * GRID) as usize];
        let mut queue = alloc::collections::VecDeque::new();
        let moves = [(1usize, (-1, 0)), (2, (1, 0)), (3, (0, -1)), (4, (0, 1))];
        for &(a, (dr, dc)) in &moves {
            let n = (self.agent.0 + dr, self.agent.1 + dc);
            if !is_wall(n.0, n.1) && !blocked.contains(&n) && first[idx(n)] == usize::MAX {
                first[idx(n)] = a;
                queue.push_back(n);
            }
        }
        while let Some(p) = queue.pop_front() {
            if p == self.goal {
                return first[idx(p)];
            }
            for &(_, (dr, dc)) in &moves {
                let n = (p.0 + dr, p.1 + dc);
                if !is_wall(n.0, n.1) && n != self.agent && first[idx(n)] == usize::MAX {
                    first[idx(n)] = first[idx(p)];
                    queue.push_back(n);
                }
            }
        }
        0
    }
}
