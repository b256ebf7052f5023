//! Experience replay with frame-once storage.
//!
//! The memory is a FIFO sequence of slots. An episode contributes one start
//! slot holding its first frame followed by one slot per transition holding
//! the frame observed after the step. A transition's state `S` is the `h`
//! slots before it and `S'` the `h` slots ending at it, so every stored frame
//! is reused by up to `2h` states.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::codec::{Decoder, Encoder};
use crate::nn::Tensor;
use crate::transcoder::{reward_class, TransitionBatch};
use crate::env::StackedState;
use crate::{Error, Result, Rng, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub action: usize,
    pub reward: i8,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Slot {
    frame: Vec<u8>,
    episode: u64,
    /// Transition number; start slots carry the number of the next step.
    tid: u64,
    step: Option<Transition>,
}

/// Reward (`-1, 0, +1`) and terminal (`0, 1`) class counts of the stored
/// transitions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassStats {
    pub reward: [u64; 3],
    pub terminal: [u64; 2],
    pub total: u64,
}

impl ClassStats {
    pub fn add(&mut self, t: &Transition) {
        self.reward[reward_class(t.reward)] += 1;
        self.terminal[t.terminal as usize] += 1;
        self.total += 1;
    }

    pub fn remove(&mut self, t: &Transition) {
        self.reward[reward_class(t.reward)] -= 1;
        self.terminal[t.terminal as usize] -= 1;
        self.total -= 1;
    }
}

/// Inverse-frequency class weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub reward: [f64; 3],
    pub terminal: [f64; 2],
}

/// `w_c = 1 / (K · max(p̂_c, 1/capacity))`.
pub fn class_weights(stats: &ClassStats, capacity: usize) -> ClassWeights {
    fn weights<const K: usize>(counts: &[u64; K], total: u64, floor: f64) -> [f64; K] {
        let mut w = [0.0; K];
        for (w, &c) in w.iter_mut().zip(counts) {
            let p = if total == 0 { 0.0 } else { c as f64 / total as f64 };
            *w = 1.0 / (K as f64 * p.max(floor));
        }
        w
    }
    let floor = 1.0 / capacity.max(1) as f64;
    ClassWeights {
        reward: weights(&stats.reward, stats.total, floor),
        terminal: weights(&stats.terminal, stats.total, floor),
    }
}

pub struct ReplayMemory {
    capacity: usize,
    history: usize,
    frame_size: usize,
    slots: VecDeque<Slot>,
    /// Absolute index of `slots[0]`.
    base: u64,
    /// Absolute transition number of the oldest stored transition.
    oldest_transition: u64,
    transitions: usize,
    /// Transitions ever pushed.
    pushed: u64,
    stats: ClassStats,
    episode: u64,
    open: bool,
}

/// `batch` trajectories of `len` consecutive transitions, trajectory-major.
pub struct TrajectoryBatch<S> {
    pub transitions: TransitionBatch<S>,
    /// Position (0 = oldest stored transition) of each trajectory's first step.
    pub starts: Vec<usize>,
    pub episodes: Vec<u64>,
}

impl ReplayMemory {
    pub fn new(capacity: usize, history: usize, frame_size: usize) -> Result<Self> {
        if capacity == 0 || history == 0 || frame_size == 0 {
            return Err(Error::config("replay.capacity", "capacity, history and frame size must be positive"));
        }
        Ok(ReplayMemory {
            capacity,
            history,
            frame_size,
            slots: VecDeque::new(),
            base: 0,
            oldest_transition: 0,
            transitions: 0,
            pushed: 0,
            stats: ClassStats::default(),
            episode: 0,
            open: false,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn history(&self) -> usize {
        self.history
    }

    /// Stored transitions.
    pub fn len(&self) -> usize {
        self.transitions
    }

    pub fn is_empty(&self) -> bool {
        self.transitions == 0
    }

    pub fn stats(&self) -> &ClassStats {
        &self.stats
    }

    pub fn weights(&self) -> ClassWeights {
        class_weights(&self.stats, self.capacity)
    }

    /// Current episode id.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    /// Starts a new episode whose first observed frame is `frame`.
    pub fn begin_episode(&mut self, frame: &[u8]) {
        self.check_frame(frame);
        if self.open {
            self.episode += 1;
        }
        self.open = true;
        self.slots.push_back(Slot {
            frame: frame.to_vec(),
            episode: self.episode,
            tid: self.pushed,
            step: None,
        });
    }

    /// Appends a transition of the current episode; `frame` is the frame
    /// observed after the step. Evicts the oldest transitions beyond capacity.
    pub fn push(&mut self, frame: &[u8], t: Transition) -> Result<()> {
        if !self.open {
            return Err(Error::contract("replay: push before begin_episode"));
        }
        self.check_frame(frame);
        self.stats.add(&t);
        self.transitions += 1;
        self.slots.push_back(Slot {
            frame: frame.to_vec(),
            episode: self.episode,
            tid: self.pushed,
            step: Some(t),
        });
        self.pushed += 1;
        while self.transitions > self.capacity {
            self.evict();
        }
        Ok(())
    }

    fn evict(&mut self) {
        if let Some(slot) = self.slots.pop_front() {
            self.base += 1;
            if let Some(t) = slot.step {
                self.stats.remove(&t);
                self.transitions -= 1;
                self.oldest_transition += 1;
            }
        }
    }

    fn check_frame(&self, frame: &[u8]) {
        assert_eq!(frame.len(), self.frame_size * self.frame_size, "replay: frame size mismatch");
    }

    fn end(&self) -> u64 {
        self.base + self.slots.len() as u64
    }

    fn slot(&self, abs: u64) -> &Slot {
        &self.slots[(abs - self.base) as usize]
    }

    /// Whether `len` transitions starting at absolute slot `p` form a valid
    /// trajectory: all inside one episode, with `h` frames before `p`.
    fn valid(&self, p: u64, len: usize) -> bool {
        let h = self.history as u64;
        if p < self.base + h || p + len as u64 > self.end() {
            return false;
        }
        let first = self.slot(p - h).episode;
        first == self.slot(p + len as u64 - 1).episode
    }

    fn position(&self, p: u64) -> usize {
        (self.slot(p).tid - self.oldest_transition) as usize
    }

    fn abs_of_position(&self, pos: usize) -> Option<u64> {
        let tid = self.oldest_transition + pos as u64;
        let i = self.slots.partition_point(|s| s.tid < tid || (s.tid == tid && s.step.is_none()));
        match self.slots.get(i) {
            Some(s) if s.tid == tid && s.step.is_some() => Some(self.base + i as u64),
            _ => None,
        }
    }

    /// Positions (0 = oldest stored transition) at which a trajectory of
    /// `len` transitions may start.
    pub fn valid_starts(&self, len: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut pos = 0;
        for (i, s) in self.slots.iter().enumerate() {
            if s.step.is_some() {
                if self.valid(self.base + i as u64, len) {
                    out.push(pos);
                }
                pos += 1;
            }
        }
        out
    }

    fn valid_abs(&self, len: usize) -> Vec<u64> {
        (self.base..self.end()).filter(|&p| self.valid(p, len)).collect()
    }

    fn sample_start(&self, len: usize, rng: &mut Rng) -> Result<u64> {
        let h = self.history as u64;
        let lo = self.base + h;
        let hi = self.end().saturating_sub(len as u64 - 1);
        if hi <= lo {
            return Err(Error::NotReady);
        }
        for _ in 0..256 {
            let p = lo + rng.below(hi - lo);
            if self.valid(p, len) {
                return Ok(p);
            }
        }
        let all = self.valid_abs(len);
        if all.is_empty() {
            return Err(Error::NotReady);
        }
        Ok(all[rng.below(all.len() as u64) as usize])
    }

    fn write_state<S: Scalar>(&self, last: u64, out: &mut Vec<S>) {
        let h = self.history as u64;
        for abs in last + 1 - h..=last {
            out.extend(self.slot(abs).frame.iter().map(|&b| crate::env::pixel::<S>(b)));
        }
    }

    /// The stacked state ending at absolute slot `last`.
    fn state_bytes(&self, last: u64) -> Vec<u8> {
        let h = self.history as u64;
        let mut out = Vec::with_capacity(self.history * self.frame_size * self.frame_size);
        for abs in last + 1 - h..=last {
            out.extend_from_slice(&self.slot(abs).frame);
        }
        out
    }

    /// `(S, transition, S')` at a position.
    pub fn transition_at(&self, pos: usize) -> Option<(StackedState, Transition, StackedState)> {
        let p = self.abs_of_position(pos)?;
        if !self.valid(p, 1) {
            return None;
        }
        let t = self.slot(p).step?;
        let f = self.frame_size;
        let s = StackedState::from_bytes(self.history, f, self.state_bytes(p - 1));
        let s2 = StackedState::from_bytes(self.history, f, self.state_bytes(p));
        Some((s, t, s2))
    }

    /// Uniformly samples `batch` start positions over valid starts and
    /// gathers the trajectories with class weights from the current stats.
    pub fn sample<S: Scalar>(&self, batch: usize, len: usize, rng: &mut Rng) -> Result<TrajectoryBatch<S>> {
        if batch == 0 || len == 0 {
            return Err(Error::contract("replay: batch and trajectory length must be positive"));
        }
        let mut starts = Vec::with_capacity(batch);
        for _ in 0..batch {
            starts.push(self.sample_start(len, rng)?);
        }
        let n = batch * len;
        let f = self.frame_size;
        let state_len = self.history * f * f;
        let mut states = Vec::with_capacity(n * state_len);
        let mut next = Vec::with_capacity(n * state_len);
        let mut actions = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        let mut terminals = Vec::with_capacity(n);
        let mut rw = Vec::with_capacity(n);
        let mut tw = Vec::with_capacity(n);
        let weights = self.weights();
        let mut episodes = Vec::with_capacity(batch);
        for &p in &starts {
            episodes.push(self.slot(p).episode);
            for k in 0..len as u64 {
                let t = self.slot(p + k).step.expect("valid window holds transitions");
                self.write_state(p + k - 1, &mut states);
                self.write_state(p + k, &mut next);
                actions.push(t.action);
                rewards.push(t.reward);
                terminals.push(t.terminal);
                rw.push(S::from_f64(weights.reward[reward_class(t.reward)]));
                tw.push(S::from_f64(weights.terminal[t.terminal as usize]));
            }
        }
        let dims = [n, self.history, f, f];
        Ok(TrajectoryBatch {
            transitions: TransitionBatch {
                states: Tensor::new(&dims, states)?,
                next_states: Tensor::new(&dims, next)?,
                actions,
                rewards,
                terminals,
                reward_weights: rw,
                terminal_weights: tw,
                traj_len: len,
            },
            starts: starts.iter().map(|&p| self.position(p)).collect(),
            episodes,
        })
    }

    /// Recount of the stored transitions' classes.
    pub fn recount(&self) -> ClassStats {
        let mut s = ClassStats::default();
        for t in self.slots.iter().filter_map(|s| s.step.as_ref()) {
            s.add(t);
        }
        s
    }

    /// Stored transitions, oldest first, with their episode ids.
    pub fn transitions(&self) -> impl Iterator<Item = (u64, &Transition)> + '_ {
        self.slots.iter().filter_map(|s| s.step.as_ref().map(|t| (s.episode, t)))
    }

    pub fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.capacity as u64);
        enc.u64(self.history as u64);
        enc.u64(self.frame_size as u64);
        enc.u64(self.base);
        enc.u64(self.oldest_transition);
        enc.u64(self.episode);
        enc.u8(self.open as u8);
        enc.u64(self.slots.len() as u64);
        for s in &self.slots {
            enc.u64(s.episode);
            match s.step {
                None => enc.u8(0),
                Some(t) => {
                    enc.u8(1);
                    enc.u32(t.action as u32);
                    enc.u8(t.reward as u8);
                    enc.u8(t.terminal as u8);
                }
            }
            enc.raw(&s.frame);
        }
    }

    pub fn decode(dec: &mut Decoder<'_>) -> Result<Self> {
        let capacity = dec.u64()? as usize;
        let history = dec.u64()? as usize;
        let frame_size = dec.u64()? as usize;
        let mut m = ReplayMemory::new(capacity, history, frame_size)
            .map_err(|_| Error::Decode("bad replay geometry".into()))?;
        m.base = dec.u64()?;
        m.oldest_transition = dec.u64()?;
        m.episode = dec.u64()?;
        m.open = dec.u8()? != 0;
        let n = dec.u64()? as usize;
        let px = frame_size * frame_size;
        for _ in 0..n {
            let episode = dec.u64()?;
            let step = match dec.u8()? {
                0 => None,
                1 => {
                    let action = dec.u32()? as usize;
                    let reward = dec.u8()? as i8;
                    let terminal = dec.u8()? != 0;
                    if !(-1..=1).contains(&reward) {
                        return Err(Error::Decode("bad replay reward".into()));
                    }
                    Some(Transition { action, reward, terminal })
                }
                _ => return Err(Error::Decode("bad replay slot tag".into())),
            };
            let frame = dec.take(px)?.to_vec();
            let tid = m.oldest_transition + m.transitions as u64;
            if let Some(t) = &step {
                m.stats.add(t);
                m.transitions += 1;
            }
            m.slots.push_back(Slot { frame, episode, tid, step });
        }
        m.pushed = m.oldest_transition + m.transitions as u64;
        if m.transitions > m.capacity {
            return Err(Error::Decode("replay holds more than its capacity".into()));
        }
        Ok(m)
    }
}
