//! Binary checkpoint files.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! "TRQ1"  u32 version
//! u32 len, config text
//! u64 step
//! u32 param count, then per param:
//!     u32 len, name   u8 rank   u32 dims[rank]   f32 values
//! Adam: f64 lr β1 β2 ε, u64 step, then per param f32 m values, f32 v values
//! u32 stream count, then per stream: u64 key, u64 counter
//! u32 len, runtime state (target network, counters, environment, replay)
//! u32 CRC32 of every preceding byte
//! ```

use std::fs;
use std::io::Write as _;
use std::path::Path;

use transq_core::codec::{Decoder, Encoder};
use transq_core::nn::{AdamConfig, AdamState, ParamSet, Tensor};
use transq_core::trainer::Trainer;
use transq_core::Rng;

use crate::config::{ConfigError, RunConfig};

pub const MAGIC: &[u8; 4] = b"TRQ1";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("bad magic: not a transq checkpoint")]
    BadMagic,
    #[error("unknown checkpoint version {0}")]
    Version(u32),
    #[error("CRC mismatch: stored {stored:08x}, computed {computed:08x}")]
    Crc { stored: u32, computed: u32 },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CheckpointError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CheckpointError::BadMagic => 3,
            CheckpointError::Version(_) => 4,
            CheckpointError::Crc { .. } => 5,
            CheckpointError::Malformed(_) | CheckpointError::Config(_) => 6,
            CheckpointError::Io(_) => 7,
        }
    }
}

impl From<transq_core::Error> for CheckpointError {
    fn from(e: transq_core::Error) -> Self {
        CheckpointError::Malformed(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_text: String,
    pub step: u64,
    pub params: ParamSet<f32>,
    pub adam: AdamState<f32>,
    pub rngs: Vec<Rng>,
    pub runtime: Vec<u8>,
}

impl Checkpoint {
    pub fn capture(trainer: &Trainer, config: &RunConfig) -> Self {
        let mut runtime = Encoder::new();
        trainer.encode_runtime(&mut runtime);
        Checkpoint {
            config_text: config.to_text(),
            step: trainer.step_count(),
            params: trainer.params().clone(),
            adam: trainer.adam().clone(),
            rngs: trainer.rngs().into_iter().cloned().collect(),
            runtime: runtime.into_bytes(),
        }
    }

    pub fn config(&self) -> Result<RunConfig, CheckpointError> {
        Ok(RunConfig::parse(&self.config_text)?)
    }

    /// A trainer in exactly the captured state.
    pub fn restore(&self) -> Result<(RunConfig, Trainer), CheckpointError> {
        let cfg = self.config()?;
        let mut t = Trainer::new(cfg.train.clone())?;
        t.net().check_params(&self.params)?;
        if t.params().iter().map(|(_, p)| &p.name).ne(self.params.iter().map(|(_, p)| &p.name)) {
            return Err(CheckpointError::Malformed("parameter names differ from the configured network".into()));
        }
        *t.params_mut() = self.params.clone();
        *t.adam_mut() = self.adam.clone();
        let [act, sample] = <[Rng; 2]>::try_from(self.rngs.clone())
            .map_err(|_| CheckpointError::Malformed("expected two random streams".into()))?;
        t.set_rngs(act, sample);
        let mut dec = Decoder::new(&self.runtime);
        t.decode_runtime(&mut dec)?;
        if dec.remaining() != 0 || t.step_count() != self.step {
            return Err(CheckpointError::Malformed("runtime section inconsistent".into()));
        }
        Ok((cfg, t))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.raw(MAGIC);
        e.u32(VERSION);
        e.str(&self.config_text);
        e.u64(self.step);
        e.u32(self.params.len() as u32);
        for (_, p) in self.params.iter() {
            e.str(&p.name);
            e.u8(p.tensor.rank() as u8);
            for &d in p.tensor.dims() {
                e.u32(d as u32);
            }
            for &v in p.tensor.data() {
                e.f32(v);
            }
        }
        let c = &self.adam.config;
        for v in [c.lr, c.beta1, c.beta2, c.eps] {
            e.f64(v);
        }
        e.u64(self.adam.step);
        for (m, v) in self.adam.m.iter().zip(&self.adam.v) {
            for &x in m.data() {
                e.f32(x);
            }
            for &x in v.data() {
                e.f32(x);
            }
        }
        e.u32(self.rngs.len() as u32);
        for r in &self.rngs {
            r.encode(&mut e);
        }
        e.blob(&self.runtime);
        let crc = crc32fast::hash(e.bytes());
        e.u32(crc);
        e.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < 12 {
            return Err(CheckpointError::Malformed("file too short".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(CheckpointError::Crc { stored, computed });
        }
        let mut d = Decoder::new(&body[8..]);
        let config_text = d.string()?;
        let step = d.u64()?;
        let count = d.u32()? as usize;
        let mut params = ParamSet::new();
        for _ in 0..count {
            let name = d.string()?;
            let rank = d.u8()? as usize;
            let dims = (0..rank).map(|_| d.u32().map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
            let len: usize = dims.iter().product();
            let data = (0..len).map(|_| d.f32()).collect::<Result<Vec<_>, _>>()?;
            params.insert(&name, Tensor::new(&dims, data)?, true)?;
        }
        let config = AdamConfig {
            lr: d.f64()?,
            beta1: d.f64()?,
            beta2: d.f64()?,
            eps: d.f64()?,
        };
        let mut adam = AdamState::new(config, &params);
        adam.step = d.u64()?;
        for i in 0..params.len() {
            for x in adam.m[i].data_mut() {
                *x = d.f32()?;
            }
            for x in adam.v[i].data_mut() {
                *x = d.f32()?;
            }
        }
        let streams = d.u32()? as usize;
        let rngs = (0..streams).map(|_| Rng::decode(&mut d)).collect::<Result<Vec<_>, _>>()?;
        let runtime = d.blob()?.to_vec();
        if d.remaining() != 0 {
            return Err(CheckpointError::Malformed("trailing bytes".into()));
        }
        Ok(Checkpoint {
            config_text,
            step,
            params,
            adam,
            rngs,
            runtime,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Checkpoint::from_bytes(&fs::read(path)?)
    }

    /// Writes through a temporary file renamed into place; nothing is left
    /// behind on failure.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let tmp = path.with_extension("tmp");
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        Ok(result?)
    }
}
