//! Offline evaluation, score normalization, median aggregation, smoothing and
//! the first-crossing sample-efficiency measure.

use alloc::vec::Vec;

use crate::env::{make_game, Env, EnvConfig};
use crate::nn::ParamSet;
use crate::trainer::{argmax, select_action_with, state_batch};
use crate::transcoder::Transcoder;
use crate::{Error, Result, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub episodes: usize,
    /// Agent steps per episode.
    pub step_cap: u64,
    pub epsilon: f64,
    /// Sum unclipped game rewards instead of clipped ones.
    pub raw_rewards: bool,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 100,
            step_cap: 4_500,
            epsilon: 0.05,
            raw_rewards: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub step: u64,
    pub returns: Vec<f64>,
    pub mean: f64,
    pub epsilon: f64,
}

impl EvalReport {
    pub fn new(step: u64, returns: Vec<f64>, epsilon: f64) -> Self {
        EvalReport {
            step,
            mean: mean(&returns),
            returns,
            epsilon,
        }
    }

    pub fn episodes(&self) -> usize {
        self.returns.len()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// How actions are chosen during an evaluation episode.
pub enum Policy<'a> {
    /// Epsilon-greedy on the network's Q-values.
    Greedy {
        net: &'a Transcoder,
        params: &'a ParamSet<f32>,
    },
    Random,
    /// The game's scripted reference player.
    Scripted,
}

/// What an evaluation episode plays.
#[derive(Debug, Clone, Copy)]
pub struct EvalTarget<'a> {
    pub game: &'a str,
    pub frame_size: usize,
    pub env: EnvConfig,
}

/// Return of episode `index`. Its environment and action streams derive
/// from `(cfg.seed, index)` only, so episodes can run in any order.
pub fn run_episode(policy: &Policy<'_>, target: EvalTarget<'_>, cfg: &EvalConfig, index: u64) -> Result<f64> {
    let root = Rng::new(cfg.seed).split("eval").split_index(index);
    let game = make_game(target.game, target.frame_size, root.split("env"))?;
    let mut env = Env::new(game, target.env);
    let mut rng = root.split("act");
    let actions = env.spec().action_count;
    let mut ret = 0.0;
    for _ in 0..cfg.step_cap {
        let action = match policy {
            Policy::Greedy { net, params } => select_action_with(actions, cfg.epsilon, &mut rng, || {
                let q = net.q_values(params, state_batch::<f32>(env.state()))?;
                Ok(argmax(q.data()))
            })?,
            Policy::Random => rng.below(actions as u64) as usize,
            Policy::Scripted => env.game().scripted_action(),
        };
        let r = env.step(action)?;
        ret += if cfg.raw_rewards { r.raw_reward } else { r.reward as f64 };
        if r.terminal {
            break;
        }
    }
    Ok(ret)
}

/// Runs `cfg.episodes` episodes one after another.
pub fn evaluate(policy: &Policy<'_>, target: EvalTarget<'_>, cfg: &EvalConfig, step: u64) -> Result<EvalReport> {
    let returns = (0..cfg.episodes as u64)
        .map(|i| run_episode(policy, target, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::new(step, returns, cfg.epsilon))
}

/// `100 · (raw − random) / (human − random)`.
pub fn normalize_score(raw: f64, random: f64, human: f64) -> Result<f64> {
    let span = human - random;
    if span == 0.0 || !span.is_finite() {
        return Err(Error::config("human_score", "must differ from random_score"));
    }
    Ok(100.0 * (raw - random) / span)
}

/// Median; the mean of the central pair for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::contract("median of an empty list"));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// `(step, value)` pairs with strictly increasing steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSeries {
    points: Vec<(u64, f64)>,
}

impl ScoreSeries {
    pub fn new(points: Vec<(u64, f64)>) -> Result<Self> {
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::contract("score series steps must be strictly increasing"));
        }
        Ok(ScoreSeries { points })
    }

    pub fn points(&self) -> &[(u64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn max(&self) -> Option<f64> {
        self.values().reduce(f64::max)
    }

    /// First step whose value reaches `target`.
    pub fn first_reaching(&self, target: f64) -> Option<u64> {
        self.points.iter().find(|p| p.1 >= target).map(|p| p.0)
    }
}

/// Exponential moving average with `α = 2 / (window + 1)`, seeded with the
/// first value.
pub fn smooth(series: &ScoreSeries, window: usize) -> ScoreSeries {
    let alpha = 2.0 / (window.max(1) as f64 + 1.0);
    let mut out = Vec::with_capacity(series.len());
    let mut y = 0.0;
    for (i, &(step, x)) in series.points.iter().enumerate() {
        y = if i == 0 { x } else { (1.0 - alpha) * y + alpha * x };
        out.push((step, y));
    }
    ScoreSeries { points: out }
}

/// Steps at which each agent first reaches the baseline's best value. The
/// baseline always reaches it; `ours` may never.
pub fn sample_efficiency(ours: &ScoreSeries, baseline: &ScoreSeries) -> Result<(Option<u64>, u64)> {
    let target = baseline
        .max()
        .ok_or_else(|| Error::contract("sample efficiency of an empty baseline"))?;
    let base = baseline.first_reaching(target).expect("the maximum is reached");
    Ok((ours.first_reaching(target), base))
}

/// Mean clipped return of a reference policy over `episodes` evaluation
/// episodes (no exploration).
pub fn reference_score(game: &str, frame_size: usize, policy: &Policy<'_>, episodes: usize, seed: u64) -> Result<f64> {
    let cfg = EvalConfig {
        episodes,
        epsilon: 0.0,
        seed,
        ..EvalConfig::default()
    };
    let target = EvalTarget {
        game,
        frame_size,
        env: EnvConfig::default(),
    };
    Ok(evaluate(policy, target, &cfg, 0)?.mean)
}
