use alloc::vec::Vec;

use super::network::{Transcoder, REWARD_SUPPORT};
use crate::nn::{ParamSet, Tensor};
use crate::{Error, Result, Scalar};

/// One step of an open-loop model rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct UnrollStep<S> {
    /// Predicted next frame clipped to `[0, 1]`.
    pub frame: Vec<S>,
    /// Most probable reward in `{-1, 0, +1}`.
    pub reward: i8,
    pub reward_probs: [S; 3],
    /// Predicted probability that the transition is terminal.
    pub terminal_prob: S,
}

/// Feeds each clipped predicted frame back as the newest frame of the next
/// input stack (oldest frame dropped) and applies `actions` in order.
pub fn unroll<S: Scalar>(
    net: &Transcoder,
    params: &ParamSet<S>,
    initial_state: &Tensor<S>,
    actions: &[usize],
) -> Result<Vec<UnrollStep<S>>> {
    let cfg = net.config();
    let (h, f) = (cfg.history, cfg.frame_size);
    if initial_state.dims() != [h, f, f] {
        return Err(Error::shape(
            "unroll",
            alloc::format!("initial state must be [{h},{f},{f}], got {:?}", initial_state.dims()),
        ));
    }
    if actions.is_empty() {
        return Err(Error::contract("unroll horizon must be at least 1"));
    }
    let px = f * f;
    let mut stack = initial_state.data().to_vec();
    let mut out = Vec::with_capacity(actions.len());
    for &a in actions {
        let state = Tensor::new(&[1, h, f, f], stack.clone())?;
        let o = net.forward(params, state, &[a])?.remove(0);
        let frame: Vec<S> = o
            .predicted_frame
            .iter()
            .map(|&p| p.max(S::ZERO).min(S::ONE))
            .collect();
        let best = (0..3).fold(0, |b, i| if o.reward_probs[i] > o.reward_probs[b] { i } else { b });
        stack.drain(..px);
        stack.extend_from_slice(&frame);
        out.push(UnrollStep {
            frame,
            reward: REWARD_SUPPORT[best],
            reward_probs: o.reward_probs,
            terminal_prob: o.terminal_probs[1],
        });
    }
    Ok(out)
}
