//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments run to the end of the line
//! env.name = catch
//! model.preset = desk
//! model.conv = 16x4/4, 32x4/2
//! loss.lambda_s = 1/84
//! train.total_steps = 300000
//! ```
//!
//! `env.name` is required, every other key has a default. Unknown keys and
//! repeated keys are errors. [`RunConfig::to_text`] writes every key, and
//! parsing that text gives back the same configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use transq_core::env::{game_spec, EnvConfig};
use transq_core::eval::EvalConfig;
use transq_core::nn::{AdamConfig, ErrorClip};
use transq_core::trainer::{Objective, TrainConfig};
use transq_core::transcoder::{ConvSpec, Lambdas, TargetMode, TranscoderConfig};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("unknown key `{0}`")]
    Unknown(String),
    #[error("key `{0}` given twice")]
    Duplicate(String),
    #[error("bad value for `{key}`: {detail}")]
    Value { key: String, detail: String },
}

fn value_err(key: &str, detail: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.into(),
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub eval: EvalConfig,
    /// Episodes of the evaluation run at every `train.eval_period`.
    pub train_eval_episodes: usize,
}

const KEYS: &[&str] = &[
    "env.name",
    "env.frame_size",
    "env.history",
    "env.frame_skip",
    "env.noop_max",
    "env.max_episode_steps",
    "model.preset",
    "model.conv",
    "model.hidden",
    "model.gate_width",
    "model.q_hidden",
    "model.head_hidden",
    "model.gate_projection",
    "loss.gamma",
    "loss.lambda_f",
    "loss.lambda_r",
    "loss.lambda_s",
    "loss.clip",
    "loss.nll_cap",
    "loss.target",
    "train.total_steps",
    "train.warmup_steps",
    "train.update_period",
    "train.target_sync_period",
    "train.eps_start",
    "train.eps_end",
    "train.eps_anneal_steps",
    "train.batch",
    "train.traj_len",
    "train.grad_clip",
    "train.eval_period",
    "train.eval_episodes",
    "train.objective",
    "train.seed",
    "replay.capacity",
    "optim.lr",
    "optim.beta1",
    "optim.beta2",
    "optim.eps",
    "eval.episodes",
    "eval.step_cap",
    "eval.epsilon",
    "eval.raw_rewards",
];

struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.take(key) {
            *slot = v.parse().map_err(|e: T::Err| value_err(key, e.to_string()))?;
        }
        Ok(())
    }

    fn fraction(&mut self, key: &str, slot: &mut f64) -> Result<(), ConfigError> {
        if let Some(v) = self.take(key) {
            *slot = parse_fraction(&v).ok_or_else(|| value_err(key, format!("`{v}` is not a number or a/b fraction")))?;
        }
        Ok(())
    }

    fn flag(&mut self, key: &str, slot: &mut bool) -> Result<(), ConfigError> {
        if let Some(v) = self.take(key) {
            *slot = match v.as_str() {
                "true" | "yes" | "1" => true,
                "false" | "no" | "0" => false,
                _ => return Err(value_err(key, format!("`{v}` is not a boolean"))),
            };
        }
        Ok(())
    }
}

/// A decimal number or a fraction `a/b`.
pub fn parse_fraction(s: &str) -> Option<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => s.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

/// `16x4/4, 32x4/2`: channels × kernel / stride per layer.
pub fn parse_conv(s: &str) -> Option<Vec<ConvSpec>> {
    s.split(',')
        .map(|layer| {
            let (ck, stride) = layer.trim().split_once('/')?;
            let (c, k) = ck.split_once('x')?;
            Some(ConvSpec::new(c.trim().parse().ok()?, k.trim().parse().ok()?, stride.trim().parse().ok()?))
        })
        .collect()
}

pub fn format_conv(conv: &[ConvSpec]) -> String {
    conv.iter()
        .map(|c| format!("{}x{}/{}", c.channels, c.kernel, c.stride))
        .collect::<Vec<_>>()
        .join(", ")
}

fn parse_entries(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        if !KEYS.contains(&k) {
            return Err(ConfigError::Unknown(k.into()));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Duplicate(k.into()));
        }
    }
    Ok(map)
}

impl RunConfig {
    /// Defaults for a game.
    pub fn for_game(game: &str, frame_size: usize) -> Result<Self, ConfigError> {
        let train = TrainConfig::new(game, frame_size).map_err(|e| value_err("env.name", e.to_string()))?;
        Ok(RunConfig {
            train,
            eval: EvalConfig::default(),
            train_eval_episodes: 10,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut e = Entries { map: parse_entries(text)? };
        let game = e.take("env.name").ok_or(ConfigError::Missing("env.name"))?;
        let mut frame_size = 40usize;
        e.parse("env.frame_size", &mut frame_size)?;
        let spec = game_spec(&game, frame_size).map_err(|err| value_err("env.name", err.to_string()))?;
        let mut cfg = RunConfig::for_game(&game, frame_size)?;
        let t = &mut cfg.train;

        let mut env = EnvConfig::default();
        e.parse("env.history", &mut env.history)?;
        e.parse("env.frame_skip", &mut env.frame_skip)?;
        e.parse("env.noop_max", &mut env.noop_max)?;
        if let Some(v) = e.take("env.max_episode_steps") {
            env.max_episode_steps = match v.as_str() {
                "none" => None,
                _ => Some(v.parse().map_err(|_| value_err("env.max_episode_steps", format!("`{v}` is not a step count")))?),
            };
        }
        t.env = env;

        let preset = e.take("model.preset").unwrap_or_else(|| "desk".into());
        let mut model = match preset.as_str() {
            "desk" => TranscoderConfig::desk(spec.action_count),
            "atari" => TranscoderConfig::atari(spec.action_count),
            "tiny" => TranscoderConfig::tiny(spec.action_count),
            other => return Err(value_err("model.preset", format!("unknown preset `{other}`"))),
        };
        model.frame_size = frame_size;
        model.history = env.history;
        if let Some(v) = e.take("model.conv") {
            model.conv = parse_conv(&v).ok_or_else(|| value_err("model.conv", format!("`{v}` is not like `16x4/4, 32x4/2`")))?;
        }
        e.parse("model.hidden", &mut model.hidden)?;
        model.gate_width = model.hidden;
        e.parse("model.gate_width", &mut model.gate_width)?;
        e.parse("model.q_hidden", &mut model.q_hidden)?;
        e.parse("model.head_hidden", &mut model.head_hidden)?;
        e.flag("model.gate_projection", &mut model.gate_projection)?;
        t.model = model;

        let l = &mut t.loss;
        e.parse("loss.gamma", &mut l.gamma)?;
        let mut lam = l.lambdas;
        e.fraction("loss.lambda_f", &mut lam.terminal)?;
        e.fraction("loss.lambda_r", &mut lam.reward)?;
        e.fraction("loss.lambda_s", &mut lam.frame)?;
        l.lambdas = lam;
        if let Some(v) = e.take("loss.clip") {
            l.clip = match v.as_str() {
                "huber" => ErrorClip::Huber,
                "truncate" => ErrorClip::GradientTruncation,
                _ => return Err(value_err("loss.clip", format!("`{v}`: expected huber or truncate"))),
            };
        }
        e.parse("loss.nll_cap", &mut l.nll_cap)?;
        if let Some(v) = e.take("loss.target") {
            l.target = match v.as_str() {
                "one_step" => TargetMode::OneStep,
                "multi_step" => TargetMode::MultiStep,
                _ => return Err(value_err("loss.target", format!("`{v}`: expected one_step or multi_step"))),
            };
        }

        e.parse("train.total_steps", &mut t.total_steps)?;
        e.parse("train.warmup_steps", &mut t.warmup_steps)?;
        e.parse("train.update_period", &mut t.update_period)?;
        e.parse("train.target_sync_period", &mut t.target_sync_period)?;
        e.parse("train.eps_start", &mut t.eps_start)?;
        e.parse("train.eps_end", &mut t.eps_end)?;
        e.parse("train.eps_anneal_steps", &mut t.eps_anneal_steps)?;
        e.parse("train.batch", &mut t.batch)?;
        e.parse("train.traj_len", &mut t.traj_len)?;
        e.parse("train.grad_clip", &mut t.grad_clip)?;
        e.parse("train.eval_period", &mut t.eval_period)?;
        e.parse("train.eval_episodes", &mut cfg.train_eval_episodes)?;
        if let Some(v) = e.take("train.objective") {
            t.objective = match v.as_str() {
                "compound" => Objective::Compound,
                "dqn_reference" => Objective::DqnReference,
                _ => return Err(value_err("train.objective", format!("`{v}`: expected compound or dqn_reference"))),
            };
        }
        e.parse("train.seed", &mut t.seed)?;
        e.parse("replay.capacity", &mut t.replay_capacity)?;

        let mut adam = AdamConfig::default();
        e.parse("optim.lr", &mut adam.lr)?;
        e.parse("optim.beta1", &mut adam.beta1)?;
        e.parse("optim.beta2", &mut adam.beta2)?;
        e.parse("optim.eps", &mut adam.eps)?;
        t.adam = adam;

        e.parse("eval.episodes", &mut cfg.eval.episodes)?;
        e.parse("eval.step_cap", &mut cfg.eval.step_cap)?;
        e.parse("eval.epsilon", &mut cfg.eval.epsilon)?;
        e.flag("eval.raw_rewards", &mut cfg.eval.raw_rewards)?;
        debug_assert!(e.map.is_empty(), "every known key is consumed");
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train.validate().map_err(|e| match e {
            transq_core::Error::Config { key, detail } => ConfigError::Value { key, detail },
            other => value_err("config", other.to_string()),
        })?;
        if !(0.0..=1.0).contains(&self.eval.epsilon) {
            return Err(value_err("eval.epsilon", "must lie in [0, 1]"));
        }
        if self.eval.episodes == 0 || self.eval.step_cap == 0 {
            return Err(value_err("eval.episodes", "episodes and step cap must be positive"));
        }
        Ok(())
    }

    /// Every key, one per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let m = &t.model;
        let l = &t.loss;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("env.name", t.game.clone());
        kv("env.frame_size", m.frame_size.to_string());
        kv("env.history", t.env.history.to_string());
        kv("env.frame_skip", t.env.frame_skip.to_string());
        kv("env.noop_max", t.env.noop_max.to_string());
        kv(
            "env.max_episode_steps",
            t.env.max_episode_steps.map_or("none".into(), |v| v.to_string()),
        );
        kv("model.conv", format_conv(&m.conv));
        kv("model.hidden", m.hidden.to_string());
        kv("model.gate_width", m.gate_width.to_string());
        kv("model.q_hidden", m.q_hidden.to_string());
        kv("model.head_hidden", m.head_hidden.to_string());
        kv("model.gate_projection", m.gate_projection.to_string());
        kv("loss.gamma", l.gamma.to_string());
        kv("loss.lambda_f", l.lambdas.terminal.to_string());
        kv("loss.lambda_r", l.lambdas.reward.to_string());
        kv("loss.lambda_s", l.lambdas.frame.to_string());
        kv(
            "loss.clip",
            match l.clip {
                ErrorClip::Huber => "huber",
                ErrorClip::GradientTruncation => "truncate",
            }
            .into(),
        );
        kv("loss.nll_cap", l.nll_cap.to_string());
        kv(
            "loss.target",
            match l.target {
                TargetMode::OneStep => "one_step",
                TargetMode::MultiStep => "multi_step",
            }
            .into(),
        );
        kv("train.total_steps", t.total_steps.to_string());
        kv("train.warmup_steps", t.warmup_steps.to_string());
        kv("train.update_period", t.update_period.to_string());
        kv("train.target_sync_period", t.target_sync_period.to_string());
        kv("train.eps_start", t.eps_start.to_string());
        kv("train.eps_end", t.eps_end.to_string());
        kv("train.eps_anneal_steps", t.eps_anneal_steps.to_string());
        kv("train.batch", t.batch.to_string());
        kv("train.traj_len", t.traj_len.to_string());
        kv("train.grad_clip", t.grad_clip.to_string());
        kv("train.eval_period", t.eval_period.to_string());
        kv("train.eval_episodes", self.train_eval_episodes.to_string());
        kv(
            "train.objective",
            match t.objective {
                Objective::Compound => "compound",
                Objective::DqnReference => "dqn_reference",
            }
            .into(),
        );
        kv("train.seed", t.seed.to_string());
        kv("replay.capacity", t.replay_capacity.to_string());
        kv("optim.lr", t.adam.lr.to_string());
        kv("optim.beta1", t.adam.beta1.to_string());
        kv("optim.beta2", t.adam.beta2.to_string());
        kv("optim.eps", t.adam.eps.to_string());
        kv("eval.episodes", self.eval.episodes.to_string());
        kv("eval.step_cap", self.eval.step_cap.to_string());
        kv("eval.epsilon", self.eval.epsilon.to_string());
        kv("eval.raw_rewards", self.eval.raw_rewards.to_string());
        s
    }

    /// Forces the baseline arm: every regularizer coefficient zero.
    pub fn set_dqn_mode(&mut self) {
        self.train.loss.lambdas = Lambdas::baseline();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions() {
        assert_eq!(parse_fraction("1/84"), Some(1.0 / 84.0));
        assert_eq!(parse_fraction(" 0.5 "), Some(0.5));
        assert_eq!(parse_fraction("1/0"), None);
        assert_eq!(parse_fraction("x"), None);
    }

    #[test]
    fn conv_syntax() {
        let c = parse_conv("16x4/4, 32x4/2").unwrap();
        assert_eq!(c, vec![ConvSpec::new(16, 4, 4), ConvSpec::new(32, 4, 2)]);
        assert_eq!(format_conv(&c), "16x4/4, 32x4/2");
        assert!(parse_conv("16x4").is_none());
    }

    #[test]
    fn missing_name_is_reported() {
        let err = RunConfig::parse("train.seed = 3\n").unwrap_err();
        assert!(err.to_string().contains("env.name"));
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        assert_eq!(
            RunConfig::parse("env.name = catch\ntrain.sed = 1\n").unwrap_err(),
            ConfigError::Unknown("train.sed".into())
        );
        assert!(matches!(
            RunConfig::parse("env.name = catch\ntrain.seed = 1\ntrain.seed = 2\n").unwrap_err(),
            ConfigError::Duplicate(_)
        ));
        assert!(matches!(
            RunConfig::parse("env.name = catch\ntrain.seed = x\n").unwrap_err(),
            ConfigError::Value { key, .. } if key == "train.seed"
        ));
    }

    #[test]
    fn text_round_trip() {
        let cfg = RunConfig::parse(
            "env.name = seek # grid\nloss.lambda_s = 1/84\nmodel.preset = tiny\nenv.history = 2\nenv.frame_size = 20\n",
        )
        .unwrap();
        assert_eq!(cfg.train.loss.lambdas.frame, 1.0 / 84.0);
        let again = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_text(), cfg.to_text());
    }
}
