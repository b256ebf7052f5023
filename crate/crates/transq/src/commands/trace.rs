use std::path::Path;

use transq_core::env::{format_trace, record_trace, TraceLine};

/// Records a trace and writes it to `out`, or returns it as text.
pub fn run(game: &str, frame_size: usize, seed: u64, steps: u64, out: Option<&Path>) -> anyhow::Result<String> {
    let text = format_trace(&record_trace(game, frame_size, seed, steps)?);
    if let Some(path) = out {
        std::fs::write(path, &text)?;
    }
    Ok(text)
}

pub fn parse(text: &str) -> anyhow::Result<Vec<TraceLine>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.parse::<TraceLine>().map_err(Into::into))
        .collect()
}
