use statrs::distribution::{ChiSquared, ContinuousCDF};
use transq_core::nn::AdamConfig;
use transq_core::trainer::{epsilon, param_digest, select_action, Observer, TrainConfig, Trainer};
use transq_core::transcoder::{LossBreakdown, TranscoderConfig};
use transq_core::{Result, Rng};

fn small(game: &str, seed: u64) -> TrainConfig {
    let mut c = TrainConfig::new(game, 20).unwrap();
    let actions = c.model.action_count;
    c.model = TranscoderConfig::tiny(actions);
    c.model.history = 4;
    c.total_steps = 600;
    c.warmup_steps = 101;
    c.target_sync_period = 70;
    c.eps_anneal_steps = 300;
    c.batch = 4;
    c.eval_period = 1_000_000;
    c.replay_capacity = 250;
    c.adam = AdamConfig { lr: 1e-3, ..AdamConfig::default() };
    c.seed = seed;
    c
}

#[derive(Default)]
struct Log {
    updates: Vec<u64>,
    losses: Vec<LossBreakdown>,
    episodes: u64,
}

impl Observer for Log {
    fn on_update(&mut self, t: u64, loss: &LossBreakdown, _eps: f64) -> Result<()> {
        self.updates.push(t);
        self.losses.push(*loss);
        Ok(())
    }

    fn on_episode_end(&mut self, _t: u64, _ret: f64) -> Result<()> {
        self.episodes += 1;
        Ok(())
    }
}

#[test]
fn cadence_and_sync_counts_follow_the_schedule() {
    let cfg = small("catch", 1);
    let mut tr = Trainer::new(cfg.clone()).unwrap();
    let mut log = Log::default();
    for _ in 0..cfg.total_steps {
        tr.step(&mut log).unwrap();
        let t = tr.step_count();
        let expected = t.saturating_sub(cfg.warmup_steps) / cfg.update_period;
        assert_eq!(tr.progress().updates, expected, "t = {t}");
        assert_eq!(tr.progress().syncs, t / cfg.target_sync_period + 1);
        assert_eq!(tr.replay().len() as u64, t.min(cfg.replay_capacity as u64));
    }
    assert_eq!(log.updates.len() as u64, tr.progress().updates);
    assert_eq!(tr.progress().episodes, log.episodes);
}

#[test]
fn short_runs_stay_finite_on_both_games() {
    for game in ["catch", "seek"] {
        for seed in 0..3 {
            let cfg = small(game, seed);
            let mut tr = Trainer::new(cfg).unwrap();
            let mut log = Log::default();
            tr.run(&mut log).unwrap();
            assert!(!log.losses.is_empty());
            assert!(log.losses.iter().all(|l| l.all_finite()), "{game} seed {seed}");
            assert!(tr.params().all_finite());
        }
    }
}

#[test]
fn same_seed_gives_identical_parameters() {
    let run = |seed| {
        let mut tr = Trainer::new(small("seek", seed)).unwrap();
        tr.run_until(300, &mut Log::default()).unwrap();
        param_digest(tr.params())
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}

#[test]
fn target_network_is_a_past_snapshot() {
    let cfg = small("catch", 2);
    let mut tr = Trainer::new(cfg.clone()).unwrap();
    let mut snapshots = vec![param_digest(tr.params())];
    for _ in 0..400 {
        tr.step(&mut Log::default()).unwrap();
        snapshots.push(param_digest(tr.params()));
        assert!(snapshots.contains(&param_digest(tr.target_params())));
    }
}

#[test]
fn full_exploration_picks_actions_uniformly() {
    let mut rng = Rng::new(17);
    let q = [0.3f32, 2.0, -1.0, 0.5, 1.9];
    let mut counts = [0u64; 5];
    for _ in 0..10_000 {
        counts[select_action(&q, 1.0, &mut rng)] += 1;
    }
    let e = 2000.0;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new(4.0).unwrap().cdf(stat);
    assert!(p > 0.01, "p = {p}");
    assert_eq!(select_action(&q, 0.0, &mut rng), 1);
}

#[test]
fn epsilon_anneals_after_warmup() {
    let mut cfg = TrainConfig::new("catch", 40).unwrap();
    cfg.warmup_steps = 50_000;
    cfg.eps_anneal_steps = 1_000_000;
    assert_eq!(epsilon(0, &cfg), 1.0);
    assert_eq!(epsilon(50_000, &cfg), 1.0);
    assert!((epsilon(550_000, &cfg) - 0.55).abs() < 1e-12);
    assert!((epsilon(1_050_000, &cfg) - 0.1).abs() < 1e-12);
    assert!((epsilon(9_000_000, &cfg) - 0.1).abs() < 1e-12);
}

#[test]
fn invalid_schedules_are_rejected() {
    let mut cfg = small("catch", 0);
    cfg.update_period = 0;
    assert!(Trainer::new(cfg).is_err());
    let mut cfg = small("catch", 0);
    cfg.eps_end = 0.5;
    cfg.eps_start = 0.2;
    assert!(Trainer::new(cfg).is_err());
    let mut cfg = small("catch", 0);
    cfg.warmup_steps = cfg.total_steps + 1;
    assert!(Trainer::new(cfg).is_err());
}
