use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::{make_game, Env, EnvConfig};
use crate::rng::fnv1a64;
use crate::{Error, Result, Rng};

/// One wrapped step of a recorded trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceLine {
    pub step: u64,
    pub action: usize,
    pub reward: i8,
    pub terminal: bool,
    /// FNV-1a 64 of the newest frame's bytes.
    pub frame_hash: u64,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{:016x}",
            self.step, self.action, self.reward, self.terminal as u8, self.frame_hash
        )
    }
}

impl FromStr for TraceLine {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let bad = || Error::Decode(alloc::format!("bad trace line `{line}`"));
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 5 {
            return Err(bad());
        }
        let terminal = match fields[3] {
            "0" => false,
            "1" => true,
            _ => return Err(bad()),
        };
        Ok(TraceLine {
            step: fields[0].parse().map_err(|_| bad())?,
            action: fields[1].parse().map_err(|_| bad())?,
            reward: fields[2].parse().map_err(|_| bad())?,
            terminal,
            frame_hash: u64::from_str_radix(fields[4], 16).map_err(|_| bad())?,
        })
    }
}

/// Plays `steps` wrapped steps of `game` with uniformly random actions drawn
/// from a stream independent of the game's own, restarting after every
/// terminal flag.
pub fn record_trace(game: &str, frame_size: usize, seed: u64, steps: u64) -> Result<Vec<TraceLine>> {
    let root = Rng::new(seed);
    let mut env = Env::new(make_game(game, frame_size, root.split("env"))?, EnvConfig::default());
    let mut policy = root.split("trace-actions");
    let actions = env.spec().action_count as u64;
    let mut out = Vec::with_capacity(steps as usize);
    for step in 0..steps {
        let action = policy.below(actions) as usize;
        let r = env.step(action)?;
        out.push(TraceLine {
            step,
            action,
            reward: r.reward,
            terminal: r.terminal,
            frame_hash: fnv1a64(env.state().newest()),
        });
        if r.terminal {
            env.restart();
        }
    }
    Ok(out)
}

/// One line per step, newline-terminated.
pub fn format_trace(lines: &[TraceLine]) -> String {
    let mut s = String::new();
    for l in lines {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    s
}
