use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use transq_core::env::{make_game, pixel, record_trace, Env, EnvConfig, TraceLine};
use transq_core::Rng;

fn env(game: &str, frame_size: usize, seed: u64, config: EnvConfig) -> Env {
    Env::new(make_game(game, frame_size, Rng::new(seed)).unwrap(), config)
}

/// Upper-tail probability of Pearson's statistic for equal expected counts.
fn chi_square_p(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

fn golden(game: &str, text: &str) {
    let want: Vec<TraceLine> = text.lines().map(|l| l.parse().unwrap()).collect();
    let got = record_trace(game, 40, 7, 100).unwrap();
    assert_eq!(got, want);
}

#[test]
fn catch_replays_its_golden_trace() {
    golden("catch", include_str!("golden/catch_40_seed7.csv"));
}

#[test]
fn seek_replays_its_golden_trace() {
    golden("seek", include_str!("golden/seek_40_seed7.csv"));
}

#[test]
fn noop_starts_are_uniform() {
    let mut e = env("catch", 20, 1, EnvConfig::default());
    let mut counts = [0u64; 31];
    for _ in 0..10_000 {
        e.reset();
        counts[e.last_noops() as usize] += 1;
    }
    let p = chi_square_p(&counts);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn reset_fills_the_stack_with_one_frame() {
    for game in ["catch", "seek"] {
        let e = env(game, 30, 2, EnvConfig::default());
        let s = e.state();
        assert_eq!(s.history(), 4);
        for i in 0..4 {
            assert_eq!(s.frame(i), s.newest());
        }
    }
}

#[test]
fn stepping_after_a_terminal_flag_is_refused() {
    let config = EnvConfig {
        max_episode_steps: Some(3),
        ..EnvConfig::default()
    };
    let mut e = env("seek", 20, 3, config);
    for _ in 0..2 {
        assert!(!e.step(0).unwrap().terminal);
    }
    let last = e.step(0).unwrap();
    assert!(last.terminal && last.truncated);
    assert!(e.step(0).is_err());
    e.restart();
    assert_eq!(e.episode_steps(), 0);
    assert!(e.step(0).is_ok());
    assert!(e.step(9).is_err());
}

fn game_name() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("catch"), Just("seek")]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wrapped_steps_keep_their_contracts(
        game in game_name(),
        seed in any::<u64>(),
        frame_size in 12usize..48,
        cap in 1u64..60,
        actions in prop::collection::vec(0usize..5, 1..150),
    ) {
        let config = EnvConfig { max_episode_steps: Some(cap), ..EnvConfig::default() };
        let mut e = env(game, frame_size, seed, config);
        let a_count = e.spec().action_count;
        let mut longest = 0;
        for &a in &actions {
            let a = a % a_count;
            let before = e.state().clone();
            let r = e.step(a).unwrap();
            let after = e.state();
            prop_assert!((-1..=1).contains(&r.reward));
            for i in 0..3 {
                prop_assert_eq!(after.frame(i), before.frame(i + 1));
            }
            let px: Vec<f64> = { let mut v = Vec::new(); after.extend_pixels(&mut v); v };
            prop_assert!(px.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!(e.episode_steps() <= cap);
            longest = longest.max(e.episode_steps());
            if r.terminal {
                e.restart();
            }
        }
        prop_assert!(longest <= cap);
    }

    #[test]
    fn trajectories_are_determined_by_seed_and_actions(
        game in game_name(),
        seed in any::<u64>(),
        actions in prop::collection::vec(0usize..5, 1..120),
    ) {
        let run = || {
            let mut e = env(game, 20, seed, EnvConfig::default());
            let n = e.spec().action_count;
            let mut out = Vec::new();
            for &a in &actions {
                let r = e.step(a % n).unwrap();
                out.push((r.reward, r.terminal, e.state().bytes().to_vec()));
                if r.terminal {
                    e.restart();
                }
            }
            out
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn pixel_bytes_map_into_the_unit_interval(b in any::<u8>()) {
        let p: f64 = pixel(b);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert_eq!((p * 255.0).round() as u8, b);
    }
}
