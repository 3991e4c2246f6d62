//! Binary checkpoint container. All integers and floats little-endian:
//!
//! ```text
//! "HPCK"                      4 bytes
//! version = 1                 u32
//! task                        u8   0 distance, 1 depth, 2 joint, 3 sentiment
//! geometry                    u8   0 euclidean, 1 poincare
//! flags                       u8   bit0 use_q, bit1 second layer,
//!                                  bit2 heads present, bit3 heads trainable
//! activation                  u8   0 none, 1 relu, 2 sigmoid, 3 tanh
//! n, k                        u32, u32
//! curvature                   f64  (0 for euclidean)
//! epoch                       u32  epoch the parameters were taken from
//! parameter blocks            f64 × len, in registry order:
//!                             P (n·k), Q (k·k)          poincare
//!                             B1 (n·k), [B2 (k·k)]      euclidean
//!                             [c_pos (k), c_neg (k)]    heads
//! optimizer block count B     u32
//! B × { step u64, lr f64, beta1 f64, beta2 f64, eps f64,
//!       len u32, first moment f64 × len, second moment f64 × len }
//! ```

use super::{Activation, EuclideanProbe, Geometry, Model, PoincareProbe, Probe, SecondLayer, SentimentHeads, Task};
use crate::geometry::Curvature;
use crate::optim::AdamState;
use ndarray::Array2;
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"HPCK";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("invalid checkpoint field: {0}")]
    Invalid(&'static str),
}

/// Trained parameters with the optimizer state they were reached with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub task: Task,
    pub model: Model,
    pub optimizer: Vec<AdamState>,
    pub epoch: u32,
}

fn task_code(t: Task) -> u8 {
    match t {
        Task::Distance => 0,
        Task::Depth => 1,
        Task::Joint => 2,
        Task::Sentiment => 3,
    }
}

fn act_code(a: Activation) -> u8 {
    match a {
        Activation::None => 0,
        Activation::Relu => 1,
        Activation::Sigmoid => 2,
        Activation::Tanh => 3,
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(task_code(ck.task));
    let m = &ck.model;
    let (geom, mut flags, act, curv) = match &m.probe {
        Probe::Poincare(p) => (1u8, u8::from(p.use_q), 0u8, p.c.get()),
        Probe::Euclidean(e) => match &e.second {
            Some(s) => (0, 2, act_code(s.activation), 0.0),
            None => (0, 0, 0, 0.0),
        },
    };
    if let Some(h) = &m.heads {
        flags |= 4;
        if h.trainable {
            flags |= 8;
        }
    }
    out.extend_from_slice(&[geom, flags, act]);
    out.extend_from_slice(&(m.probe.input_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(m.probe.rank() as u32).to_le_bytes());
    out.extend_from_slice(&curv.to_le_bytes());
    out.extend_from_slice(&ck.epoch.to_le_bytes());
    for block in m.blocks() {
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&(ck.optimizer.len() as u32).to_le_bytes());
    for s in &ck.optimizer {
        out.extend_from_slice(&s.step_count.to_le_bytes());
        for v in [s.lr, s.beta1, s.beta2, s.eps] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        for v in s.first_moment.iter().chain(&s.second_moment) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        let s = self
            .buf
            .get(self.pos..self.pos + N)
            .ok_or(CheckpointError::Truncated)?;
        self.pos += N;
        Ok(s.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn vec(&mut self, len: usize) -> Result<Vec<f64>, CheckpointError> {
        if self.buf.len().saturating_sub(self.pos) < len * 8 {
            return Err(CheckpointError::Truncated);
        }
        (0..len).map(|_| self.f64()).collect()
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>, CheckpointError> {
        let v = self.vec(rows * cols)?;
        Ok(Array2::from_shape_vec((rows, cols), v).expect("length checked"))
    }
}

pub fn decode_checkpoint(buf: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { buf, pos: 0 };
    if &r.bytes::<4>().map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let task = match r.u8()? {
        0 => Task::Distance,
        1 => Task::Depth,
        2 => Task::Joint,
        3 => Task::Sentiment,
        _ => return Err(CheckpointError::Invalid("task")),
    };
    let geometry = match r.u8()? {
        0 => Geometry::Euclidean,
        1 => Geometry::Poincare,
        _ => return Err(CheckpointError::Invalid("geometry")),
    };
    let flags = r.u8()?;
    let activation = match r.u8()? {
        0 => Activation::None,
        1 => Activation::Relu,
        2 => Activation::Sigmoid,
        3 => Activation::Tanh,
        _ => return Err(CheckpointError::Invalid("activation")),
    };
    let n = r.u32()? as usize;
    let k = r.u32()? as usize;
    let curvature = r.f64()?;
    let epoch = r.u32()?;
    let probe = match geometry {
        Geometry::Poincare => {
            let c = Curvature::new(curvature).map_err(|_| CheckpointError::Invalid("curvature"))?;
            Probe::Poincare(PoincareProbe {
                p: r.matrix(n, k)?,
                q: r.matrix(k, k)?,
                c,
                use_q: flags & 1 != 0,
            })
        }
        Geometry::Euclidean => {
            let b1 = r.matrix(n, k)?;
            let second = if flags & 2 != 0 {
                Some(SecondLayer {
                    b2: r.matrix(k, k)?,
                    activation,
                })
            } else {
                None
            };
            Probe::Euclidean(EuclideanProbe { b1, second })
        }
    };
    let heads = if flags & 4 != 0 {
        Some(SentimentHeads {
            pos: r.vec(k)?,
            neg: r.vec(k)?,
            trainable: flags & 8 != 0,
        })
    } else {
        None
    };
    let blocks = r.u32()? as usize;
    let mut optimizer = Vec::with_capacity(blocks.min(16));
    for _ in 0..blocks {
        let step_count = r.u64()?;
        let (lr, beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let len = r.u32()? as usize;
        optimizer.push(AdamState {
            step_count,
            first_moment: r.vec(len)?,
            second_moment: r.vec(len)?,
            lr,
            beta1,
            beta2,
            eps,
        });
    }
    if r.pos != buf.len() {
        return Err(CheckpointError::Invalid("trailing bytes"));
    }
    Ok(Checkpoint {
        task,
        model: Model { probe, heads },
        optimizer,
        epoch,
    })
}

pub fn write_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<(), CheckpointError> {
    std::fs::write(path, encode_checkpoint(ck))?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    decode_checkpoint(&std::fs::read(path)?)
}
