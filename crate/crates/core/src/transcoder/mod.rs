//! The transcoder network and its compound loss.
//!
//! ```text
//! S ─ conv… ─ FC ─ h_enc ─┬─ FC ─ FC ──────────────────────▶ Q(S,·)
//!                         │
//!  a ─ onehot ─ FC(no b) ─×─ h_dec ─┬─ FC ─┬─ FC ─ SM ────▶ P(r)
//!                                   │      └─ FC ─ SM ────▶ P(f)
//!                                   └─ FC ─ deconv… ──────▶ S'[-1]
//! ```

mod config;
mod loss;
mod network;
mod unroll;

pub use config::{ConvSpec, TranscoderConfig};
pub use loss::{
    bellman_targets, compound_loss, dqn_loss, frame_loss, q_loss, reward_loss, terminal_loss,
    Lambdas, LossBreakdown, LossConfig, TargetMode, TransitionBatch,
};
pub use network::{reward_class, ForwardOutputs, Transcoder, REWARD_SUPPORT};
pub use unroll::{unroll, UnrollStep};
