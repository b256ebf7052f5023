//! Evaluation episodes spread over threads.
//!
//! Every episode derives its streams from `(seed, index)`, so the report
//! does not depend on the thread count.

use std::num::NonZeroUsize;
use std::thread;

use transq_core::eval::{run_episode, EvalConfig, EvalReport, EvalTarget, Policy};

/// Thread cap: `TRQ_THREADS` if set, otherwise the available parallelism.
pub fn thread_count() -> usize {
    std::env::var("TRQ_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, NonZeroUsize::get))
}

pub fn evaluate(
    policy: &Policy<'_>,
    target: EvalTarget<'_>,
    cfg: &EvalConfig,
    step: u64,
    threads: usize,
) -> transq_core::Result<EvalReport> {
    let n = cfg.episodes;
    let threads = threads.clamp(1, n.max(1));
    let mut returns = vec![0.0; n];
    if threads == 1 {
        for (i, r) in returns.iter_mut().enumerate() {
            *r = run_episode(policy, target, cfg, i as u64)?;
        }
    } else {
        let chunk = n.div_ceil(threads);
        thread::scope(|s| {
            let handles: Vec<_> = returns
                .chunks_mut(chunk)
                .enumerate()
                .map(|(c, out)| {
                    s.spawn(move || -> transq_core::Result<()> {
                        for (j, r) in out.iter_mut().enumerate() {
                            *r = run_episode(policy, target, cfg, (c * chunk + j) as u64)?;
                        }
                        Ok(())
                    })
                })
                .collect();
            handles
                .into_iter()
                .try_for_each(|h| h.join().expect("evaluation thread panicked"))
        })?;
    }
    Ok(EvalReport::new(step, returns, cfg.epsilon))
}
