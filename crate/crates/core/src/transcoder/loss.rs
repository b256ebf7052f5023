//! The compound objective
//! `L = L_Q + λ_F·L_F + λ_R·L_R + λ_S·L_S`
//! over a batch of transitions `(S, a, r, f, S')`.

use alloc::format;
use alloc::vec::Vec;

use super::network::{reward_class, Transcoder};
use crate::nn::{ErrorClip, Grads, ParamSet, Tape, Tensor, Var};
use crate::{Error, Result, Scalar};

/// Regularizer coefficients `λ_F, λ_R, λ_S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lambdas {
    pub terminal: f64,
    pub reward: f64,
    pub frame: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Lambdas {
            terminal: 1.0,
            reward: 1.0,
            frame: 1.0 / 84.0,
        }
    }
}

impl Lambdas {
    pub fn new(terminal: f64, reward: f64, frame: f64) -> Result<Self> {
        let l = Lambdas {
            terminal,
            reward,
            frame,
        };
        l.validate()?;
        Ok(l)
    }

    /// All coefficients zero: the objective degenerates to the DQN loss.
    pub const fn baseline() -> Self {
        Lambdas {
            terminal: 0.0,
            reward: 0.0,
            frame: 0.0,
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.terminal == 0.0 && self.reward == 0.0 && self.frame == 0.0
    }

    /// Either all three coefficients are positive or the set is the baseline.
    pub fn validate(&self) -> Result<()> {
        if self.is_baseline() {
            return Ok(());
        }
        for (key, v) in [
            ("loss.lambda_f", self.terminal),
            ("loss.lambda_r", self.reward),
            ("loss.lambda_s", self.frame),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// How Bellman targets are formed along a sampled trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetMode {
    /// `r_j + γ(1−f_j) max Q⁻(S'_j)` at every trajectory position.
    #[default]
    OneStep,
    /// Discounted rewards to the end of the trajectory, bootstrapped from the
    /// last successor state.
    MultiStep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub gamma: f64,
    pub lambdas: Lambdas,
    pub clip: ErrorClip,
    /// Cap on `-ln p` for the categorical heads (probability floor `e^-cap`).
    pub nll_cap: f64,
    pub target: TargetMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            gamma: 0.99,
            lambdas: Lambdas::default(),
            clip: ErrorClip::Huber,
            nll_cap: 10.0,
            target: TargetMode::OneStep,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("loss.gamma", format!("must lie in (0,1), got {}", self.gamma)));
        }
        if !(self.nll_cap > 0.0) {
            return Err(Error::config("loss.nll_cap", "must be positive"));
        }
        self.lambdas.validate()
    }
}

/// A flat batch of transitions. Consecutive groups of `traj_len` rows form
/// one sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionBatch<S> {
    /// `[N, h, F, F]`
    pub states: Tensor<S>,
    /// `[N, h, F, F]`; the newest frame `S'[-1]` is the frame target.
    pub next_states: Tensor<S>,
    pub actions: Vec<usize>,
    pub rewards: Vec<i8>,
    pub terminals: Vec<bool>,
    pub reward_weights: Vec<S>,
    pub terminal_weights: Vec<S>,
    pub traj_len: usize,
}

impl<S: Scalar> TransitionBatch<S> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn check(&self) -> Result<()> {
        let n = self.actions.len();
        if n == 0 {
            return Err(Error::contract("empty transition batch"));
        }
        let ok = self.states.dims().first() == Some(&n)
            && self.next_states.dims() == self.states.dims()
            && self.rewards.len() == n
            && self.terminals.len() == n
            && self.reward_weights.len() == n
            && self.terminal_weights.len() == n
            && self.traj_len >= 1
            && n.is_multiple_of(self.traj_len);
        if !ok {
            return Err(Error::shape("transition_batch", "fields disagree on batch size"));
        }
        Ok(())
    }

    /// `S'[-1]` for every row, shaped `[N, 1, F, F]`.
    pub fn next_frames(&self) -> Tensor<S> {
        let d = self.next_states.dims();
        let (n, h, f) = (d[0], d[1], d[2]);
        let px = f * f;
        let mut out = Vec::with_capacity(n * px);
        for i in 0..n {
            let start = (i * h + h - 1) * px;
            out.extend_from_slice(&self.next_states.data()[start..start + px]);
        }
        Tensor::new(&[n, 1, f, f], out).expect("consistent dims")
    }

    fn terminal_classes(&self) -> Vec<usize> {
        self.terminals.iter().map(|&f| f as usize).collect()
    }

    fn reward_classes(&self) -> Vec<usize> {
        self.rewards.iter().map(|&r| reward_class(r)).collect()
    }

    fn frame_mask(&self) -> Vec<S> {
        self.terminals
            .iter()
            .map(|&f| if f { S::ZERO } else { S::ONE })
            .collect()
    }
}

/// Component losses, their coefficients and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub q_loss: f64,
    pub f_loss: f64,
    pub r_loss: f64,
    pub s_loss: f64,
    pub total: f64,
    pub lambdas: Lambdas,
}

impl LossBreakdown {
    /// `q + λ_F f + λ_R r + λ_S s` recomputed from the fields.
    pub fn reconstructed_total(&self) -> f64 {
        self.q_loss
            + self.lambdas.terminal * self.f_loss
            + self.lambdas.reward * self.r_loss
            + self.lambdas.frame * self.s_loss
    }

    pub fn all_finite(&self) -> bool {
        [self.q_loss, self.f_loss, self.r_loss, self.s_loss, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Bellman regression targets from target-network Q-values of the successor
/// states. Terminal rows never read `next_q`.
pub fn bellman_targets<S: Scalar>(
    next_q: &Tensor<S>,
    rewards: &[i8],
    terminals: &[bool],
    gamma: f64,
    mode: TargetMode,
    traj_len: usize,
) -> Vec<S> {
    let a = next_q.dims()[1];
    let gamma = S::from_f64(gamma);
    let max_next = |i: usize| {
        let row = &next_q.data()[i * a..(i + 1) * a];
        row.iter().copied().fold(row[0], S::max)
    };
    let one_step = |i: usize| {
        let r = S::from_f64(rewards[i] as f64);
        if terminals[i] {
            r
        } else {
            r + gamma * max_next(i)
        }
    };
    match mode {
        TargetMode::OneStep => (0..rewards.len()).map(one_step).collect(),
        TargetMode::MultiStep => {
            let mut out = Vec::with_capacity(rewards.len());
            for traj in 0..rewards.len() / traj_len {
                let base = traj * traj_len;
                let mut tail = Vec::with_capacity(traj_len);
                let mut acc = one_step(base + traj_len - 1);
                tail.push(acc);
                for j in (0..traj_len - 1).rev() {
                    let i = base + j;
                    let r = S::from_f64(rewards[i] as f64);
                    acc = if terminals[i] { r } else { r + gamma * acc };
                    tail.push(acc);
                }
                tail.reverse();
                out.extend(tail);
            }
            out
        }
    }
}

struct Recorded {
    q: Var,
    f: Var,
    r: Var,
    s: Var,
}

fn targets<S: Scalar>(
    net: &Transcoder,
    target_params: &ParamSet<S>,
    batch: &TransitionBatch<S>,
    cfg: &LossConfig,
) -> Result<Vec<S>> {
    let next_q = net.q_values(target_params, batch.next_states.clone())?;
    Ok(bellman_targets(
        &next_q,
        &batch.rewards,
        &batch.terminals,
        cfg.gamma,
        cfg.target,
        batch.traj_len,
    ))
}

fn record_q<'a, S: Scalar>(
    net: &Transcoder,
    tape: &mut Tape<'a, S>,
    params: &'a ParamSet<S>,
    h_enc: Var,
    batch: &TransitionBatch<S>,
    targets: Vec<S>,
    cfg: &LossConfig,
) -> Result<Var> {
    let q = net.q_head(tape, params, h_enc)?;
    let qa = tape.gather(q, &batch.actions)?;
    tape.clipped_error(qa, targets, cfg.clip)
}

fn record_all<'a, S: Scalar>(
    net: &Transcoder,
    tape: &mut Tape<'a, S>,
    params: &'a ParamSet<S>,
    batch: &TransitionBatch<S>,
    targets: Vec<S>,
    cfg: &LossConfig,
) -> Result<Recorded> {
    let s = tape.input(batch.states.clone());
    let h = net.encode(tape, params, s)?;
    let q = record_q(net, tape, params, h, batch, targets, cfg)?;
    let d = net.action_gate(tape, params, h, &batch.actions)?;
    let (rl, tl) = net.reward_terminal_logits(tape, params, d)?;
    let cap = S::from_f64(cfg.nll_cap);
    let f = tape.categorical_nll(tl, &batch.terminal_classes(), &batch.terminal_weights, cap)?;
    let r = tape.categorical_nll(rl, &batch.reward_classes(), &batch.reward_weights, cap)?;
    let frame = net.predict_frame(tape, params, d)?;
    let s = tape.masked_half_sq(frame, batch.next_frames(), batch.frame_mask())?;
    Ok(Recorded { q, f, r, s })
}

fn scalar_of<S: Scalar>(tape: &Tape<'_, S>, v: Var) -> f64 {
    tape.value(v).data()[0].to_f64()
}

/// Clipped Bellman loss. No gradient path exists to `target_params`.
pub fn q_loss<S: Scalar>(
    net: &Transcoder,
    params: &ParamSet<S>,
    target_params: &ParamSet<S>,
    batch: &TransitionBatch<S>,
    cfg: &LossConfig,
) -> Result<f64> {
    batch.check()?;
    let y = targets(net, target_params, batch, cfg)?;
    let mut tape = Tape::new();
    let s = tape.input(batch.states.clone());
    let h = net.encode(&mut tape, params, s)?;
    let l = record_q(net, &mut tape, params, h, batch, y, cfg)?;
    Ok(scalar_of(&tape, l))
}

fn head_losses<S: Scalar>(
    net: &Transcoder,
    params: &ParamSet<S>,
    batch: &TransitionBatch<S>,
    cfg: &LossConfig,
) -> Result<(f64, f64, f64)> {
    batch.check()?;
    let zeros = alloc::vec![S::ZERO; batch.len()];
    let mut tape = Tape::new();
    let rec = record_all(net, &mut tape, params, batch, zeros, cfg)?;
    Ok((
        scalar_of(&tape, rec.f),
        scalar_of(&tape, rec.r),
        scalar_of(&tape, rec.s),
    ))
}

/// Class-weighted terminal-flag NLL, each term capped at `nll_cap`.
pub fn terminal_loss<S: Scalar>(
    net: &Transcoder,
    params: &ParamSet<S>,
    batch: &TransitionBatch<S>,
    cfg: &LossConfig,
) -> Result<f64> {
    head_losses(net, params, batch, cfg).map(|l| l.0)
}

/// Class-weighted reward NLL over the classes `-1, 0, +1`.
pub fn reward_loss<S: Scalar>(
    net: &Transcoder,
    params: &ParamSet<S>,
    batch: &TransitionBatch<S>,
    cfg: &LossConfig,
) -> Result<f64> {
    head_losses(net, params, batch, cfg).map(|l| l.1)
}

/// `½(1−f)‖M(S,a) − S'[-1]‖²` averaged over the batch.
pub fn frame_loss<S: Scalar>(
    net: &Transcoder,
    params: &ParamSet<S>,
    batch: &TransitionBatch<S>,
    cfg: &LossConfig,
) -> Result<f64> {
    head_losses(net, params, batch, cfg).map(|l| l.2)
}

/// The compound loss and its gradient with respect to `params`.
pub fn compound_loss<S: Scalar>(
    net: &Transcoder,
    params: &ParamSet<S>,
    target_params: &ParamSet<S>,
    batch: &TransitionBatch<S>,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, Grads<S>)> {
    cfg.validate()?;
    batch.check()?;
    let y = targets(net, target_params, batch, cfg)?;
    let mut tape = Tape::new();
    let rec = record_all(net, &mut tape, params, batch, y, cfg)?;
    let l = cfg.lambdas;
    let total = tape.weighted_sum(&[
        (rec.q, S::ONE),
        (rec.f, S::from_f64(l.terminal)),
        (rec.r, S::from_f64(l.reward)),
        (rec.s, S::from_f64(l.frame)),
    ])?;
    let mut breakdown = LossBreakdown {
        q_loss: scalar_of(&tape, rec.q),
        f_loss: scalar_of(&tape, rec.f),
        r_loss: scalar_of(&tape, rec.r),
        s_loss: scalar_of(&tape, rec.s),
        total: 0.0,
        lambdas: l,
    };
    // Reported in f64 from the components so the identity holds exactly; the
    // tape's own total differs from it only by rounding in `S`.
    breakdown.total = breakdown.reconstructed_total();
    let grads = tape.backward(total)?.into_param_grads(params);
    Ok((breakdown, grads))
}

/// Plain DQN objective: only the encoder and the Q head are recorded, the
/// prediction heads are never evaluated. Used as the reference for the
/// baseline arm.
pub fn dqn_loss<S: Scalar>(
    net: &Transcoder,
    params: &ParamSet<S>,
    target_params: &ParamSet<S>,
    batch: &TransitionBatch<S>,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, Grads<S>)> {
    batch.check()?;
    let y = targets(net, target_params, batch, cfg)?;
    let mut tape = Tape::new();
    let s = tape.input(batch.states.clone());
    let h = net.encode(&mut tape, params, s)?;
    let l = record_q(net, &mut tape, params, h, batch, y, cfg)?;
    let q = scalar_of(&tape, l);
    let grads = tape.backward(l)?.into_param_grads(params);
    Ok((
        LossBreakdown {
            q_loss: q,
            f_loss: 0.0,
            r_loss: 0.0,
            s_loss: 0.0,
            total: q,
            lambdas: Lambdas::baseline(),
        },
        grads,
    ))
}
