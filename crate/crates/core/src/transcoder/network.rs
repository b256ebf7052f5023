use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::TranscoderConfig;
use crate::nn::{glorot_init, layers, ParamId, ParamSet, Tape, Tensor, Var};
use crate::{Error, Result, Rng, Scalar};

/// Reward classes in head order.
pub const REWARD_SUPPORT: [i8; 3] = [-1, 0, 1];

pub fn reward_class(reward: i8) -> usize {
    match reward {
        r if r < 0 => 0,
        0 => 1,
        _ => 2,
    }
}

/// Outputs of one forward pass for one `(state, action)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutputs<S> {
    pub q_values: Vec<S>,
    /// Probabilities of rewards `-1, 0, +1`.
    pub reward_probs: [S; 3],
    /// Probabilities of `f = 0` and `f = 1`.
    pub terminal_probs: [S; 2],
    /// `frame_size²` pixels, unclipped.
    pub predicted_frame: Vec<S>,
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    w: ParamId,
    b: Option<ParamId>,
}

/// The transcoder: a shared convolutional encoder feeding a Q head and an
/// action-conditioned decoder that predicts reward, terminal flag and the
/// next frame.
#[derive(Debug, Clone)]
pub struct Transcoder {
    config: TranscoderConfig,
    enc_conv: Vec<Layer>,
    enc_fc: Layer,
    q_fc1: Layer,
    q_fc2: Layer,
    gate_action: ParamId,
    gate_proj: Option<ParamId>,
    rt_fc: Layer,
    reward: Layer,
    terminal: Layer,
    dec_fc: Layer,
    dec_deconv: Vec<Layer>,
}

/// Parameter names and shapes in insertion order.
fn layout(cfg: &TranscoderConfig) -> Result<Vec<(alloc::string::String, Vec<usize>)>> {
    cfg.validate()?;
    let mut out = Vec::new();
    let mut push = |name: alloc::string::String, dims: Vec<usize>| out.push((name, dims));
    let mut c_in = cfg.history;
    for (i, c) in cfg.conv.iter().enumerate() {
        push(format!("enc.conv{i}.w"), vec![c.channels, c_in, c.kernel, c.kernel]);
        push(format!("enc.conv{i}.b"), vec![c.channels]);
        c_in = c.channels;
    }
    let (fc, fs) = cfg.feature_map()?;
    let flat = fc * fs * fs;
    push("enc.fc.w".into(), vec![cfg.hidden, flat]);
    push("enc.fc.b".into(), vec![cfg.hidden]);
    push("q.fc1.w".into(), vec![cfg.q_hidden, cfg.hidden]);
    push("q.fc1.b".into(), vec![cfg.q_hidden]);
    push("q.fc2.w".into(), vec![cfg.action_count, cfg.q_hidden]);
    push("q.fc2.b".into(), vec![cfg.action_count]);
    push("gate.action.w".into(), vec![cfg.gate_width, cfg.action_count]);
    if cfg.gate_projection {
        push("gate.proj.w".into(), vec![cfg.gate_width, cfg.hidden]);
    }
    push("rt.fc.w".into(), vec![cfg.head_hidden, cfg.gate_width]);
    push("rt.fc.b".into(), vec![cfg.head_hidden]);
    push("reward.w".into(), vec![3, cfg.head_hidden]);
    push("reward.b".into(), vec![3]);
    push("terminal.w".into(), vec![2, cfg.head_hidden]);
    push("terminal.b".into(), vec![2]);
    push("dec.fc.w".into(), vec![flat, cfg.gate_width]);
    push("dec.fc.b".into(), vec![flat]);
    let n = cfg.conv.len();
    for j in 0..n {
        // deconv j undoes conv (n-1-j); the last one emits a single frame
        let i = n - 1 - j;
        let from = cfg.conv[i].channels;
        let to = if i == 0 { 1 } else { cfg.conv[i - 1].channels };
        let k = cfg.conv[i].kernel;
        push(format!("dec.deconv{j}.w"), vec![from, to, k, k]);
        push(format!("dec.deconv{j}.b"), vec![to]);
    }
    Ok(out)
}

impl Transcoder {
    pub fn new(config: TranscoderConfig) -> Result<Self> {
        let names: Vec<_> = layout(&config)?.into_iter().map(|(n, _)| n).collect();
        let id = |name: &str| ParamId(names.iter().position(|n| n == name).expect("in layout"));
        let layer = |w: &str, b: &str| Layer {
            w: id(w),
            b: Some(id(b)),
        };
        let n = config.conv.len();
        Ok(Transcoder {
            enc_conv: (0..n)
                .map(|i| layer(&format!("enc.conv{i}.w"), &format!("enc.conv{i}.b")))
                .collect(),
            enc_fc: layer("enc.fc.w", "enc.fc.b"),
            q_fc1: layer("q.fc1.w", "q.fc1.b"),
            q_fc2: layer("q.fc2.w", "q.fc2.b"),
            gate_action: id("gate.action.w"),
            gate_proj: config.gate_projection.then(|| id("gate.proj.w")),
            rt_fc: layer("rt.fc.w", "rt.fc.b"),
            reward: layer("reward.w", "reward.b"),
            terminal: layer("terminal.w", "terminal.b"),
            dec_fc: layer("dec.fc.w", "dec.fc.b"),
            dec_deconv: (0..n)
                .map(|j| layer(&format!("dec.deconv{j}.w"), &format!("dec.deconv{j}.b")))
                .collect(),
            config,
        })
    }

    pub fn config(&self) -> &TranscoderConfig {
        &self.config
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init_params<S: Scalar>(&self, rng: &mut Rng) -> ParamSet<S> {
        let mut params = ParamSet::new();
        for (name, dims) in layout(&self.config).expect("validated in new") {
            let t = glorot_init(&dims, rng);
            params.insert(&name, t, true).expect("layout names are unique");
        }
        params
    }

    /// Checks that `params` has exactly this network's layout.
    pub fn check_params<S: Scalar>(&self, params: &ParamSet<S>) -> Result<()> {
        let want = layout(&self.config)?;
        if want.len() != params.len() {
            return Err(Error::shape(
                "transcoder",
                format!("expected {} parameters, got {}", want.len(), params.len()),
            ));
        }
        for ((name, dims), (_, p)) in want.iter().zip(params.iter()) {
            if *name != p.name || dims.as_slice() != p.tensor.dims() {
                return Err(Error::shape(
                    "transcoder",
                    format!("expected `{name}` {dims:?}, got `{}` {:?}", p.name, p.tensor.dims()),
                ));
            }
        }
        Ok(())
    }

    /// Ids of the parameters used by the encoder and the Q head, the part of
    /// the network a plain DQN consists of.
    pub fn dqn_param_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for l in self.enc_conv.iter().chain([&self.enc_fc, &self.q_fc1, &self.q_fc2]) {
            ids.push(l.w);
            ids.extend(l.b);
        }
        ids
    }

    pub fn gate_action_id(&self) -> ParamId {
        self.gate_action
    }

    fn dense<'a, S: Scalar>(
        tape: &mut Tape<'a, S>,
        params: &'a ParamSet<S>,
        x: Var,
        l: Layer,
    ) -> Result<Var> {
        let w = tape.param(params, l.w);
        let b = l.b.map(|b| tape.param(params, b));
        tape.linear(x, w, b)
    }

    /// `[N, h, F, F]` states to `h_enc` of shape `[N, hidden]`.
    pub fn encode<'a, S: Scalar>(
        &self,
        tape: &mut Tape<'a, S>,
        params: &'a ParamSet<S>,
        states: Var,
    ) -> Result<Var> {
        let cfg = &self.config;
        let dims = tape.value(states).dims().to_vec();
        let f = cfg.frame_size;
        if dims.len() != 4 || dims[1] != cfg.history || dims[2] != f || dims[3] != f {
            return Err(Error::shape(
                "encode",
                format!("state must be [N,{},{f},{f}], got {dims:?}", cfg.history),
            ));
        }
        let mut x = states;
        for (l, c) in self.enc_conv.iter().zip(&cfg.conv) {
            let w = tape.param(params, l.w);
            let b = tape.param(params, l.b.expect("conv has bias"));
            x = tape.conv2d(x, w, b, c.stride)?;
            x = tape.relu(x);
        }
        let flat = tape.value(x).len() / dims[0];
        let x = tape.reshape(x, &[dims[0], flat])?;
        let h = Self::dense(tape, params, x, self.enc_fc)?;
        Ok(tape.relu(h))
    }

    /// `h_enc` to Q-values `[N, |A|]`; the last layer is linear.
    pub fn q_head<'a, S: Scalar>(
        &self,
        tape: &mut Tape<'a, S>,
        params: &'a ParamSet<S>,
        h_enc: Var,
    ) -> Result<Var> {
        let h = Self::dense(tape, params, h_enc, self.q_fc1)?;
        let h = tape.relu(h);
        Self::dense(tape, params, h, self.q_fc2)
    }

    /// `h_dec = project(h_enc) ⊙ W_a · onehot(a)` with bias-free layers.
    pub fn action_gate<'a, S: Scalar>(
        &self,
        tape: &mut Tape<'a, S>,
        params: &'a ParamSet<S>,
        h_enc: Var,
        actions: &[usize],
    ) -> Result<Var> {
        let a_count = self.config.action_count;
        if let Some(&bad) = actions.iter().find(|&&a| a >= a_count) {
            return Err(Error::contract(format!("action {bad} out of range 0..{a_count}")));
        }
        let mut onehot = Tensor::zeros(&[actions.len(), a_count]);
        for (i, &a) in actions.iter().enumerate() {
            onehot.data_mut()[i * a_count + a] = S::ONE;
        }
        let onehot = tape.input(onehot);
        let wa = tape.param(params, self.gate_action);
        let embed = tape.linear(onehot, wa, None)?;
        let h = match self.gate_proj {
            Some(p) => {
                let wp = tape.param(params, p);
                tape.linear(h_enc, wp, None)?
            }
            None => h_enc,
        };
        tape.mul(h, embed)
    }

    /// Reward logits `[N, 3]` and terminal logits `[N, 2]`.
    pub fn reward_terminal_logits<'a, S: Scalar>(
        &self,
        tape: &mut Tape<'a, S>,
        params: &'a ParamSet<S>,
        h_dec: Var,
    ) -> Result<(Var, Var)> {
        let h = Self::dense(tape, params, h_dec, self.rt_fc)?;
        let h = tape.relu(h);
        let r = Self::dense(tape, params, h, self.reward)?;
        let t = Self::dense(tape, params, h, self.terminal)?;
        Ok((r, t))
    }

    /// Next-frame prediction `[N, 1, F, F]`, linear output.
    pub fn predict_frame<'a, S: Scalar>(
        &self,
        tape: &mut Tape<'a, S>,
        params: &'a ParamSet<S>,
        h_dec: Var,
    ) -> Result<Var> {
        let cfg = &self.config;
        let n = tape.value(h_dec).dims()[0];
        let (fc, fs) = cfg.feature_map()?;
        let x = Self::dense(tape, params, h_dec, self.dec_fc)?;
        let x = tape.relu(x);
        let mut x = tape.reshape(x, &[n, fc, fs, fs])?;
        let last = self.dec_deconv.len() - 1;
        for (j, l) in self.dec_deconv.iter().enumerate() {
            let stride = cfg.conv[cfg.conv.len() - 1 - j].stride;
            let w = tape.param(params, l.w);
            let b = tape.param(params, l.b.expect("deconv has bias"));
            x = tape.deconv2d(x, w, b, stride)?;
            if j != last {
                x = tape.relu(x);
            }
        }
        Ok(x)
    }

    /// Q-values for a batch of states `[N, h, F, F]`, no gradient.
    pub fn q_values<S: Scalar>(&self, params: &ParamSet<S>, states: Tensor<S>) -> Result<Tensor<S>> {
        let mut tape = Tape::new();
        let s = tape.input(states);
        let h = self.encode(&mut tape, params, s)?;
        let q = self.q_head(&mut tape, params, h)?;
        Ok(tape.value(q).clone())
    }

    /// Full forward pass for a batch of `(state, action)` pairs.
    pub fn forward<S: Scalar>(
        &self,
        params: &ParamSet<S>,
        states: Tensor<S>,
        actions: &[usize],
    ) -> Result<Vec<ForwardOutputs<S>>> {
        let n = states.dims().first().copied().unwrap_or(0);
        if actions.len() != n {
            return Err(Error::shape("forward", "one action per state required"));
        }
        let mut tape = Tape::new();
        let s = tape.input(states);
        let h = self.encode(&mut tape, params, s)?;
        let q = self.q_head(&mut tape, params, h)?;
        let d = self.action_gate(&mut tape, params, h, actions)?;
        let (r, t) = self.reward_terminal_logits(&mut tape, params, d)?;
        let frame = self.predict_frame(&mut tape, params, d)?;
        let a = self.config.action_count;
        let px = self.config.frame_size * self.config.frame_size;
        let rp = layers::softmax(tape.value(r));
        let tp = layers::softmax(tape.value(t));
        let qv = tape.value(q).data();
        let fv = tape.value(frame).data();
        Ok((0..n)
            .map(|i| ForwardOutputs {
                q_values: qv[i * a..(i + 1) * a].to_vec(),
                reward_probs: [rp.data()[i * 3], rp.data()[i * 3 + 1], rp.data()[i * 3 + 2]],
                terminal_probs: [tp.data()[i * 2], tp.data()[i * 2 + 1]],
                predicted_frame: fv[i * px..(i + 1) * px].to_vec(),
            })
            .collect())
    }
}
