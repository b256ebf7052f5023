pub mod compare;
pub mod eval;
pub mod rollout;
pub mod trace;
pub mod train;

use std::path::Path;

use anyhow::Context as _;

use crate::checkpoint::Checkpoint;

pub(crate) fn load_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))
}
