//! Acceptance suite: one pass/fail line per criterion.
//!
//! Criteria 5 and 6 train for hours and only run with `--ignored` or
//! `--include-ignored`. Bare numbers on the command line select criteria,
//! e.g. `cargo test -p transq --test acceptance -- --include-ignored 5`.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use statrs::distribution::{ChiSquared, ContinuousCDF};
use transq::checkpoint::Checkpoint;
use transq::commands::train::{self, checkpoint_path, eval_seed, TrainArgs};
use transq_core::env::{make_game, Env};
use transq_core::eval::{evaluate, median, normalize_score, sample_efficiency, smooth, EvalConfig, EvalTarget, Policy, ScoreSeries};
use transq_core::nn::{conv2d, conv_out_len, deconv2d, ParamSet, Tape, Tensor};
use transq_core::replay::{ReplayMemory, Transition};
use transq_core::trainer::{argmax, param_digest, select_action_with, state_batch, Objective, Observer, TrainConfig, Trainer};
use transq_core::transcoder::{
    bellman_targets, compound_loss, frame_loss, q_loss, reward_class, unroll, ConvSpec, Lambdas, LossConfig,
    Transcoder, TranscoderConfig, TransitionBatch,
};
use transq_core::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn chi_square_p(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

fn random_batch(cfg: &TranscoderConfig, n: usize, traj_len: usize, terminal: impl Fn(usize) -> bool, rng: &mut Rng) -> TransitionBatch<f64> {
    let dims = [n, cfg.history, cfg.frame_size, cfg.frame_size];
    let len: usize = dims.iter().product();
    let pixels = |rng: &mut Rng| Tensor::new(&dims, (0..len).map(|_| rng.next_f64()).collect()).unwrap();
    TransitionBatch {
        states: pixels(rng),
        next_states: pixels(rng),
        actions: (0..n).map(|_| rng.below(cfg.action_count as u64) as usize).collect(),
        rewards: (0..n).map(|_| rng.below(3) as i8 - 1).collect(),
        terminals: (0..n).map(terminal).collect(),
        reward_weights: (0..n).map(|_| rng.uniform(0.2, 3.0)).collect(),
        terminal_weights: (0..n).map(|_| rng.uniform(0.2, 3.0)).collect(),
        traj_len,
    }
}

/// Which smooth piece of the compound loss `p` sits on.
fn branches(net: &Transcoder, p: &ParamSet<f64>, t: &ParamSet<f64>, b: &TransitionBatch<f64>, c: &LossConfig) -> Vec<bool> {
    let next_q = net.q_values(t, b.next_states.clone()).unwrap();
    let y = bellman_targets(&next_q, &b.rewards, &b.terminals, c.gamma, c.target, b.traj_len);
    let mut tape = Tape::new();
    let s = tape.input(b.states.clone());
    let h = net.encode(&mut tape, p, s).unwrap();
    let q = net.q_head(&mut tape, p, h).unwrap();
    let qa = tape.gather(q, &b.actions).unwrap();
    tape.clipped_error(qa, y, c.clip).unwrap();
    let d = net.action_gate(&mut tape, p, h, &b.actions).unwrap();
    let (rl, tl) = net.reward_terminal_logits(&mut tape, p, d).unwrap();
    let rc: Vec<usize> = b.rewards.iter().map(|&r| reward_class(r)).collect();
    let tc: Vec<usize> = b.terminals.iter().map(|&f| f as usize).collect();
    tape.categorical_nll(rl, &rc, &b.reward_weights, c.nll_cap).unwrap();
    tape.categorical_nll(tl, &tc, &b.terminal_weights, c.nll_cap).unwrap();
    net.predict_frame(&mut tape, p, d).unwrap();
    tape.branch_pattern()
}

fn gradient_oracle() -> Outcome {
    let cfg = TranscoderConfig::tiny(3);
    ensure(cfg.frame_size == 20 && cfg.history == 2 && cfg.conv.len() == 2, || "reduced geometry changed".into())?;
    let net = Transcoder::new(cfg.clone()).unwrap();
    let mut rng = Rng::new(1);
    let mut params: ParamSet<f64> = net.init_params(&mut rng);
    // nonzero biases keep ReLU inputs off the kink at exactly zero
    let bias_ids: Vec<_> = params.iter().filter(|(_, p)| p.name.ends_with(".b")).map(|(id, _)| id).collect();
    for id in bias_ids {
        for v in params.values_mut(id) {
            *v = rng.uniform(-0.1, 0.1);
        }
    }
    let target = net.init_params(&mut rng);
    let b = random_batch(&cfg, 4, 2, |i| i == 2, &mut rng);
    let lc = LossConfig::default();
    let loss = |p: &ParamSet<f64>| compound_loss(&net, p, &target, &b, &lc).unwrap().0.total;
    let (_, grads) = compound_loss(&net, &params, &target, &b, &lc).unwrap();
    let base = branches(&net, &params, &target, &b, &lc);
    let h = 1e-3;
    let mut probe = params.clone();
    let (mut checked, mut skipped, mut worst, mut worst_name) = (0usize, 0usize, 0f64, String::new());
    for (id, p) in params.iter() {
        for i in 0..p.tensor.len() {
            let orig = probe.values_mut(id)[i];
            probe.values_mut(id)[i] = orig + h;
            let up = loss(&probe);
            let smooth_up = branches(&net, &probe, &target, &b, &lc) == base;
            probe.values_mut(id)[i] = orig - h;
            let down = loss(&probe);
            let smooth_down = branches(&net, &probe, &target, &b, &lc) == base;
            probe.values_mut(id)[i] = orig;
            if !(smooth_up && smooth_down) {
                skipped += 1;
                continue;
            }
            checked += 1;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(id).data()[i];
            let e = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            if e > worst {
                worst = e;
                worst_name = format!("{}[{i}]", p.name);
            }
        }
    }
    ensure(skipped * 10 < checked, || format!("{skipped} of {} probes crossed a kink", checked + skipped))?;
    ensure(worst < 1e-4, || format!("relative error {worst:.3e} at {worst_name}"))?;
    Ok(format!("{checked} scalars, worst relative error {worst:.2e}, {skipped} kink-crossing probes skipped"))
}

fn loss_identities() -> Outcome {
    let cfg = TranscoderConfig::tiny(3);
    let net = Transcoder::new(cfg.clone()).unwrap();
    let mut rng = Rng::new(2);
    let params: ParamSet<f64> = net.init_params(&mut rng);
    let target = net.init_params(&mut rng);
    let lc = LossConfig::default();

    let terminal = random_batch(&cfg, 6, 1, |_| true, &mut rng);
    let f = frame_loss(&net, &params, &terminal, &lc).unwrap();
    ensure(f == 0.0, || format!("frame loss {f} on terminal transitions"))?;
    let q = q_loss(&net, &params, &target, &terminal, &lc).unwrap();
    let mut flipped = terminal.clone();
    for v in flipped.next_states.data_mut() {
        *v = 1.0 - *v;
    }
    let q2 = q_loss(&net, &params, &target, &flipped, &lc).unwrap();
    ensure(q.to_bits() == q2.to_bits(), || format!("q loss moved from {q} to {q2} with S' changed"))?;

    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = Rng::new(100 + seed);
        let b = random_batch(&cfg, 4, 2, |i| i == 1, &mut rng);
        let lc = LossConfig {
            lambdas: Lambdas {
                terminal: rng.uniform(0.0, 2.0),
                reward: rng.uniform(0.0, 2.0),
                frame: rng.uniform(0.0, 2.0),
            },
            ..LossConfig::default()
        };
        let (br, _) = compound_loss(&net, &params, &target, &b, &lc).unwrap();
        worst = worst.max((br.total - br.reconstructed_total()).abs());
    }
    ensure(worst < 1e-6, || format!("total differs from its components by {worst:.3e}"))?;

    let mut tape = Tape::<f64>::new();
    let logits = tape.input(Tensor::new(&[2, 2], vec![30.0, -30.0, 0.0, 9.0]).unwrap());
    let l = tape.categorical_nll(logits, &[1, 1], &[1.0, 1.0], 10.0).unwrap();
    // first row: P = e^-60 < e^-10, capped; second row: ln(1 + e^-9)
    let want = (10.0 + (1.0 + (-9f64).exp()).ln()) / 2.0;
    let got = tape.value(l).data()[0];
    ensure((got - want).abs() < 1e-12, || format!("capped nll {got}, expected {want}"))?;
    Ok("terminal masks hold, total within 1e-6, nll capped at 10".into())
}

fn reduced_desk(game: &str) -> TrainConfig {
    let mut c = TrainConfig::new(game, 20).unwrap();
    c.model.conv = vec![ConvSpec::new(8, 4, 2), ConvSpec::new(32, 3, 2)];
    c.model.hidden = 64;
    c.model.gate_width = 64;
    c.model.q_hidden = 64;
    c.model.head_hidden = 32;
    c
}

fn baseline_reduction() -> Outcome {
    let mut cfg = reduced_desk("catch");
    cfg.total_steps = 10_000;
    cfg.warmup_steps = 1_000;
    cfg.target_sync_period = 1_000;
    cfg.eps_anneal_steps = 5_000;
    cfg.replay_capacity = 10_000;
    cfg.eval_period = 1_000_000;
    cfg.loss.lambdas = Lambdas::baseline();
    let run = |objective| {
        let mut c = cfg.clone();
        c.objective = objective;
        let mut t = Trainer::new(c).unwrap();
        t.run(&mut Silent).unwrap();
        t
    };
    let a = run(Objective::Compound);
    let b = run(Objective::DqnReference);
    let bytes = |p: &ParamSet<f32>| -> Vec<u8> { p.iter().flat_map(|(_, e)| e.tensor.data().iter().flat_map(|v| v.to_le_bytes())).collect() };
    ensure(a.progress().updates == 2_250, || format!("{} updates", a.progress().updates))?;
    ensure(bytes(a.params()) == bytes(b.params()), || "online parameters differ".into())?;
    ensure(bytes(a.target_params()) == bytes(b.target_params()), || "target parameters differ".into())?;
    Ok(format!("10000 steps, {} updates, digest {:016x} on both paths", a.progress().updates, param_digest(a.params())))
}

/// Direct quadruple loop over output positions and kernel taps.
fn conv_loop(x: &Tensor<f64>, k: &Tensor<f64>, bias: &[f64], s: usize) -> Vec<f64> {
    let [n, c, h, w] = *x.dims() else { unreachable!() };
    let [ko, _, kh, kw] = *k.dims() else { unreachable!() };
    let (oh, ow) = ((h - kh) / s + 1, (w - kw) / s + 1);
    let (xd, kd) = (x.data(), k.data());
    let mut out = vec![0.0; n * ko * oh * ow];
    for b in 0..n {
        for o in 0..ko {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = bias[o];
                    for ci in 0..c {
                        for u in 0..kh {
                            for v in 0..kw {
                                acc += xd[((b * c + ci) * h + i * s + u) * w + j * s + v] * kd[((o * c + ci) * kh + u) * kw + v];
                            }
                        }
                    }
                    out[((b * ko + o) * oh + i) * ow + j] = acc;
                }
            }
        }
    }
    out
}

fn random_tensor<S: transq_core::Scalar>(dims: &[usize], rng: &mut Rng) -> Tensor<S> {
    let n = dims.iter().product();
    Tensor::new(dims, (0..n).map(|_| S::from_f64(rng.uniform(-1.0, 1.0))).collect()).unwrap()
}

fn adjoint_and_layer_oracles() -> Outcome {
    let mut rng = Rng::new(4);
    let (mut worst_adj, mut worst_loop): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let n = 1 + rng.below(2) as usize;
        let c_in = 1 + rng.below(4) as usize;
        let c_out = 1 + rng.below(4) as usize;
        let kh = 1 + rng.below(5) as usize;
        let kw = 1 + rng.below(5) as usize;
        let s = 1 + rng.below(3) as usize;
        let h = kh + s * rng.below(5) as usize + rng.below(s as u64) as usize;
        let w = kw + s * rng.below(5) as usize + rng.below(s as u64) as usize;
        let (oh, ow) = (conv_out_len(h, kh, s).unwrap(), conv_out_len(w, kw, s).unwrap());

        // adjointness holds for exactly reproducible sides; trim the rest
        let (ah, aw) = ((oh - 1) * s + kh, (ow - 1) * s + kw);
        let k: Tensor<f32> = random_tensor(&[c_out, c_in, kh, kw], &mut rng);
        let x: Tensor<f32> = random_tensor(&[n, c_in, ah, aw], &mut rng);
        let y: Tensor<f32> = random_tensor(&[n, c_out, oh, ow], &mut rng);
        let lhs = conv2d(&x, &k, None, s).unwrap().dot(&y);
        let rhs = x.dot(&deconv2d(&y, &k, None, s).unwrap());
        worst_adj = worst_adj.max(((lhs - rhs).abs() / lhs.abs().max(1.0)) as f64);

        let k: Tensor<f64> = random_tensor(&[c_out, c_in, kh, kw], &mut rng);
        let x: Tensor<f64> = random_tensor(&[n, c_in, h, w], &mut rng);
        let bias: Vec<f64> = (0..c_out).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let fast = conv2d(&x, &k, Some(&Tensor::from_vec(bias.clone())), s).unwrap();
        ensure(fast.dims() == [n, c_out, oh, ow], || format!("conv output dims {:?}", fast.dims()))?;
        let slow = conv_loop(&x, &k, &bias, s);
        for (a, b) in fast.data().iter().zip(&slow) {
            worst_loop = worst_loop.max((a - b).abs());
        }
    }
    ensure(worst_adj < 1e-5, || format!("adjoint gap {worst_adj:.3e}"))?;
    ensure(worst_loop < 1e-6, || format!("conv differs from the loop oracle by {worst_loop:.3e}"))?;
    Ok(format!("100 geometries, adjoint gap {worst_adj:.2e}, loop gap {worst_loop:.2e}"))
}

fn metric_arithmetic() -> Outcome {
    let dqn = [
        22.3, 34.1, 37.4, 20.2, 11.6, 54.9, 234.3, 242.6, 713.2, 91.1, 28.2, 72.8, 582.2, 416.8, 11.3, 50.0, 511.8, -13.7,
        161.1, 66.5,
    ];
    let ours = [
        19.5, 33.3, 46.4, 83.7, 12.3, 86.2, 378.7, 224.5, 663.9, 115.8, 32.4, 93.8, 615.5, 122.6, 13.6, 50.5, 185.7, 5.8,
        167.8, 72.7,
    ];
    // the published values are already percentages of the random-to-human span
    let med = |xs: &[f64]| -> f64 {
        let v: Vec<f64> = xs.iter().map(|&x| normalize_score(x / 100.0, 0.0, 1.0).unwrap()).collect();
        (median(&v).unwrap() * 10.0).round() / 10.0
    };
    let (m_ours, m_dqn) = (med(&ours), med(&dqn));
    ensure(m_ours == 85.0 && m_dqn == 60.7, || format!("medians {m_ours} / {m_dqn}"))?;
    Ok(format!("median {m_ours}% vs {m_dqn}%"))
}

const SMALL_RUN: &str = "\
env.name = seek
env.frame_size = 20
env.history = 2
model.preset = tiny
train.total_steps = 3000
train.warmup_steps = 500
train.target_sync_period = 250
train.eps_anneal_steps = 1000
train.batch = 8
train.eval_period = 1000
train.eval_episodes = 2
eval.step_cap = 200
replay.capacity = 2000
";

fn determinism_and_resume() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let cfg = dir.path().join("seek.cfg");
    fs::write(&cfg, SMALL_RUN).unwrap();
    let train_to = |out: &str, resume: Option<&Path>| {
        let out = dir.path().join(out);
        let args = TrainArgs {
            config: resume.is_none().then(|| cfg.clone()),
            seed: resume.is_none().then_some(11),
            mode: None,
            resume: resume.map(Path::to_path_buf),
            out: out.clone(),
            steps: None,
        };
        train::run(&args).unwrap();
        out
    };
    let a = train_to("a", None);
    let b = train_to("b", None);
    let metrics = |p: &Path| fs::read_to_string(p.join("metrics.csv")).unwrap();
    ensure(metrics(&a) == metrics(&b), || "same seed gave different metrics".into())?;
    let r = train_to("resumed", Some(&checkpoint_path(&a, 1000)));
    let after = |text: String| -> Vec<String> {
        text.lines().skip(1).filter(|l| l.split(',').next().unwrap().parse::<u64>().unwrap() > 1000).map(String::from).collect()
    };
    let (full, cont) = (after(metrics(&a)), after(metrics(&r)));
    ensure(!full.is_empty() && full == cont, || format!("resumed run wrote {} rows, uninterrupted {}", cont.len(), full.len()))?;
    let last = |p: &Path| fs::read(checkpoint_path(p, 3000)).unwrap();
    ensure(last(&a) == last(&r), || "final checkpoints differ".into())?;
    let ck = Checkpoint::load(&checkpoint_path(&a, 2000)).unwrap();
    ensure(ck.to_bytes() == fs::read(checkpoint_path(&a, 2000)).unwrap(), || "save-load-save changed bytes".into())?;
    Ok(format!("{} metric rows identical, {} rows after resume identical", metrics(&a).lines().count() - 1, full.len()))
}

fn frame(id: u32) -> Vec<u8> {
    id.to_le_bytes().to_vec()
}

fn replay_properties() -> Outcome {
    let mut rng = Rng::new(9);
    let mut sampled = 0usize;
    for trial in 0..200 {
        let capacity = 4 + rng.below(60) as usize;
        let history = 1 + rng.below(4) as usize;
        let len = 1 + rng.below(4) as usize;
        let mut m = ReplayMemory::new(capacity, history, 2).unwrap();
        // slot id -> episode, for every frame ever written
        let mut episode_of = Vec::new();
        let mut episode = 0u64;
        m.begin_episode(&frame(0));
        episode_of.push(episode);
        for _ in 0..rng.below(150) {
            let id = episode_of.len() as u32;
            if rng.below(12) == 0 {
                episode += 1;
                m.begin_episode(&frame(id));
                episode_of.push(episode);
                continue;
            }
            let terminal = rng.below(10) == 0;
            let t = Transition { action: 0, reward: rng.below(3) as i8 - 1, terminal };
            m.push(&frame(id), t).unwrap();
            episode_of.push(episode);
            ensure(*m.stats() == m.recount(), || format!("trial {trial}: class counts drifted"))?;
            if terminal {
                episode += 1;
                m.begin_episode(&frame(id + 1));
                episode_of.push(episode);
            }
        }
        let Ok(b) = m.sample::<f32>(16, len, &mut rng) else { continue };
        let tb = &b.transitions;
        let px = history * 4;
        for row in 0..tb.actions.len() {
            let ids = |data: &[f32]| -> Vec<u32> {
                data[row * px..(row + 1) * px]
                    .chunks(4)
                    .map(|c| u32::from_le_bytes(c.iter().map(|&v| (v * 255.0).round() as u8).collect::<Vec<_>>().try_into().unwrap()))
                    .collect()
            };
            let k = row / len;
            for id in ids(tb.states.data()).into_iter().chain(ids(tb.next_states.data())) {
                let e = episode_of[id as usize];
                ensure(e == b.episodes[k], || format!("trial {trial}: window mixes episodes {e} and {}", b.episodes[k]))?;
            }
            sampled += 1;
        }
    }

    let mut m = ReplayMemory::new(60, 4, 2).unwrap();
    let mut id = 0u32;
    m.begin_episode(&frame(id));
    for i in 0..80u32 {
        id += 1;
        let terminal = i % 13 == 12;
        m.push(&frame(id), Transition { action: 0, reward: 0, terminal }).unwrap();
        if terminal {
            id += 1;
            m.begin_episode(&frame(id));
        }
    }
    let starts = m.valid_starts(4);
    let mut counts = vec![0u64; starts.len()];
    let mut rng = Rng::new(10);
    for _ in 0..500 {
        for s in m.sample::<f32>(40, 4, &mut rng).unwrap().starts {
            counts[starts.iter().position(|&v| v == s).unwrap()] += 1;
        }
    }
    let p = chi_square_p(&counts);
    ensure(p > 0.01, || format!("start frequencies non-uniform, p = {p:.4}"))?;
    Ok(format!("{sampled} sampled rows inside one episode, uniformity p = {p:.3}"))
}

struct Silent;

impl Observer for Silent {}

fn model_config() -> TrainConfig {
    let mut c = TrainConfig::new("catch", 40).unwrap();
    c.total_steps = 300_000;
    c.replay_capacity = 300_000;
    c.eval_period = c.total_steps;
    c.seed = 5;
    c
}

fn model_quality() -> Outcome {
    let cfg = model_config();
    let mut trainer = Trainer::new(cfg.clone()).unwrap();
    trainer.run(&mut Silent).unwrap();
    let net = trainer.net();
    let params = trainer.params();
    let f = cfg.model.frame_size;
    let root = Rng::new(cfg.seed).split("held-out");
    let mut env = Env::new(make_game(&cfg.game, f, root.split("env")).unwrap(), cfg.env);
    let mut act_rng = root.split("act");
    let actions = cfg.model.action_count;
    let horizon = 5;
    let (mut pixel_err, mut frames) = (0.0, 0usize);
    let (mut correct, mut total, mut nonzero, mut nonzero_correct) = (0usize, 0usize, 0usize, 0usize);
    while total < 5_000 {
        let start = env.state().to_tensor::<f32>();
        let mut taken = Vec::new();
        let mut live = Vec::new();
        for _ in 0..horizon {
            let a = select_action_with(actions, 0.05, &mut act_rng, || {
                Ok(argmax(net.q_values(params, state_batch::<f32>(env.state()))?.data()))
            })
            .unwrap();
            let r = env.step(a).unwrap();
            taken.push(a);
            live.push((r, env.state().newest().to_vec()));
            if r.terminal {
                break;
            }
        }
        let predicted = unroll(net, params, &start, &taken).unwrap();
        for (k, (p, (r, gt))) in predicted.iter().zip(&live).enumerate() {
            if k == 0 {
                total += 1;
                correct += (p.reward == r.reward) as usize;
                if r.reward != 0 {
                    nonzero += 1;
                    nonzero_correct += (p.reward == r.reward) as usize;
                }
            }
            pixel_err += gt.iter().zip(&p.frame).map(|(&g, &q)| (g as f64 / 255.0 - q as f64).abs()).sum::<f64>() / gt.len() as f64;
            frames += 1;
        }
        if live.last().is_some_and(|l| l.0.terminal) {
            env.restart();
        }
    }
    let mae = pixel_err / frames as f64;
    let acc = correct as f64 / total as f64;
    let detail = format!(
        "5-step pixel error {mae:.4}, reward accuracy {:.2}% ({nonzero_correct}/{nonzero} on nonzero rewards)",
        acc * 100.0
    );
    ensure(mae < 0.05 && acc > 0.95, || detail.clone())?;
    Ok(detail)
}

/// Reduced desk-scale schedule shared by both arms of the sample-efficiency runs.
fn efficiency_config(game: &str, seed: u64, transq: bool) -> (TrainConfig, EvalConfig) {
    let mut c = reduced_desk(game);
    // seek needs several times more experience than catch before any return shows up
    let (steps, anneal, period) = if game == "seek" { (300_000, 100_000, 5_000) } else { (100_000, 40_000, 2_500) };
    c.total_steps = steps;
    c.warmup_steps = 5_000;
    c.eps_anneal_steps = anneal;
    c.target_sync_period = 2_000;
    c.replay_capacity = 100_000;
    c.eval_period = period;
    c.seed = seed;
    if !transq {
        c.loss.lambdas = Lambdas::baseline();
    }
    let e = EvalConfig {
        episodes: 10,
        step_cap: 2_000,
        ..EvalConfig::default()
    };
    (c, e)
}

struct Curve {
    eval: EvalConfig,
    points: Vec<(u64, f64)>,
}

impl Observer for Curve {
    fn on_checkpoint(&mut self, t: &Trainer) -> transq_core::Result<()> {
        let step = t.step_count();
        let c = t.config();
        let eval = EvalConfig {
            seed: eval_seed(c.seed, step),
            ..self.eval
        };
        let target = EvalTarget {
            game: &c.game,
            frame_size: c.model.frame_size,
            env: c.env,
        };
        let r = evaluate(&Policy::Greedy { net: t.net(), params: t.params() }, target, &eval, step)?;
        self.points.push((step, r.mean));
        Ok(())
    }
}

fn learning_curve(game: &str, seed: u64, transq: bool) -> ScoreSeries {
    let (cfg, eval) = efficiency_config(game, seed, transq);
    let mut trainer = Trainer::new(cfg).unwrap();
    let mut curve = Curve { eval, points: Vec::new() };
    trainer.run(&mut curve).unwrap();
    ScoreSeries::new(curve.points).unwrap()
}

fn sample_efficiency_runs() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for game in ["catch", "seek"] {
        let mut wins = 0;
        for seed in 0..5 {
            let started = Instant::now();
            let ours = smooth(&learning_curve(game, seed, true), 100);
            let base = smooth(&learning_curve(game, seed, false), 100);
            let (o, b) = sample_efficiency(&ours, &base).unwrap();
            let win = o.is_some_and(|o| o < b);
            wins += win as usize;
            eprintln!(
                "  {game} seed {seed}: ours {} vs dqn {b} (best smoothed {:.3} vs {:.3}) [{:.0}s]",
                o.map_or("never".into(), |s| s.to_string()),
                ours.max().unwrap(),
                base.max().unwrap(),
                started.elapsed().as_secs_f64()
            );
        }
        pass &= wins >= 4;
        lines.push(format!("{game} {wins}/5"));
    }
    let detail = format!("earlier in {}", lines.join(", "));
    ensure(pass, || detail.clone())?;
    Ok(detail)
}

struct Criterion {
    id: u32,
    name: &'static str,
    long: bool,
    run: fn() -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "gradient oracle", long: false, run: gradient_oracle },
    Criterion { id: 2, name: "loss identities", long: false, run: loss_identities },
    Criterion { id: 3, name: "baseline reduction", long: false, run: baseline_reduction },
    Criterion { id: 4, name: "adjointness and layer oracles", long: false, run: adjoint_and_layer_oracles },
    Criterion { id: 5, name: "model quality", long: true, run: model_quality },
    Criterion { id: 6, name: "sample efficiency", long: true, run: sample_efficiency_runs },
    Criterion { id: 7, name: "metric arithmetic", long: false, run: metric_arithmetic },
    Criterion { id: 8, name: "determinism and resumability", long: false, run: determinism_and_resume },
    Criterion { id: 9, name: "replay properties", long: false, run: replay_properties },
];

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let long = args.iter().any(|a| a == "--ignored" || a == "--include-ignored");
    let only_long = args.iter().any(|a| a == "--ignored");
    let picked: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    // `cargo test --list` and similar probes expect no work
    if args.iter().any(|a| a == "--list") {
        return;
    }
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in CRITERIA {
        if !picked.is_empty() && !picked.contains(&c.id) {
            continue;
        }
        if c.long && !long {
            println!("criterion {}: SKIP {} (long run; pass --include-ignored)", c.id, c.name);
            continue;
        }
        if only_long && !c.long {
            continue;
        }
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {} ({detail}) [{secs:.1}s]", c.id, c.name),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {} ({detail}) [{secs:.1}s]", c.id, c.name);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
