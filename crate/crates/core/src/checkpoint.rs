//! Versioned binary checkpoint.
//!
//! All integers are `u64` and all reals `f64`, little-endian, in this order:
//!
//! | field                       | type              |
//! |-----------------------------|-------------------|
//! | magic `DDDMCKPT`            | 8 bytes           |
//! | format version (= 1)        | u32               |
//! | data dim D                  | u64               |
//! | embedding width E           | u64               |
//! | hidden layer count H        | u64               |
//! | hidden widths               | u64 × H           |
//! | steps T, β_min, β_max       | u64, f64, f64     |
//! | epoch counter               | u64               |
//! | parameter count P           | u64               |
//! | parameters                  | f64 × P           |
//! | EMA decay, EMA shadow       | f64, f64 × P      |
//! | Adam β1, β2, ε, step        | f64, f64, f64, u64|
//! | Adam first moments          | f64 × P           |
//! | Adam second moments         | f64 × P           |
//! | bank rows N                 | u64               |
//! | bank estimates              | f64 × N·D         |
//!
//! No timestamps are stored, so identical runs produce identical files.

use std::path::Path;

use crate::error::{Error, Result};
use crate::micronet::{Adam, Architecture, EmaParams, ModelParams};
use crate::scheduler::Schedule;
use crate::trainer::{EstimateBank, TrainState};

pub const MAGIC: &[u8; 8] = b"DDDMCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub schedule: Schedule,
    pub state: TrainState,
}

impl Checkpoint {
    pub fn epoch(&self) -> u64 {
        self.state.bank.epoch()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let st = &self.state;
        let arch = st.params.arch();
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.0.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        w.u64(arch.data_dim as u64);
        w.u64(arch.embed_dim as u64);
        w.u64(arch.hidden.len() as u64);
        arch.hidden.iter().for_each(|h| w.u64(*h as u64));
        w.u64(self.schedule.steps() as u64);
        w.f64(self.schedule.beta_min());
        w.f64(self.schedule.beta_max());
        w.u64(st.bank.epoch());
        w.u64(st.params.as_slice().len() as u64);
        w.f64s(st.params.as_slice());
        w.f64(st.ema.decay);
        w.f64s(st.ema.shadow.as_slice());
        w.f64(st.adam.beta1);
        w.f64(st.adam.beta2);
        w.f64(st.adam.eps);
        w.u64(st.adam.step);
        w.f64s(&st.adam.m);
        w.f64s(&st.adam.v);
        w.u64(st.bank.len() as u64);
        w.f64s(st.bank.as_slice());
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported format version {version}")));
        }
        let data_dim = r.usize()?;
        let embed_dim = r.usize()?;
        let n_hidden = r.usize()?;
        let hidden = (0..n_hidden).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let steps = r.usize()?;
        let (beta_min, beta_max) = (r.f64()?, r.f64()?);
        let schedule = Schedule::linear(steps, beta_min, beta_max)?;
        let arch = Architecture::new(data_dim, embed_dim, hidden, steps)?;
        let epoch = r.u64()?;
        let count = r.usize()?;
        if count != arch.param_count() {
            return Err(bad(&format!("{count} parameters, architecture needs {}", arch.param_count())));
        }
        let params = ModelParams::from_flat(arch.clone(), r.f64s(count)?)?;
        let decay = r.f64()?;
        let shadow = ModelParams::from_flat(arch, r.f64s(count)?)?;
        let ema = EmaParams { shadow, decay };
        let adam = Adam {
            beta1: r.f64()?,
            beta2: r.f64()?,
            eps: r.f64()?,
            step: r.u64()?,
            m: r.f64s(count)?,
            v: r.f64s(count)?,
        };
        let rows = r.usize()?;
        let bank = EstimateBank::from_parts(data_dim, r.f64s(rows * data_dim)?, epoch)?;
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Checkpoint {
            schedule,
            state: TrainState { params, ema, adam, bank },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }
}

fn bad(msg: &str) -> Error {
    Error::Format {
        what: "checkpoint",
        msg: msg.to_string(),
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|v| self.f64(*v));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len()).ok_or_else(|| bad("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| bad("size overflow"))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| bad("size overflow"))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}
