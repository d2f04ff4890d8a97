//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "XECK" | version u32
//! descriptor_len u64 | descriptor (UTF-8 JSON)
//! tensor section: params
//! tensor section: buffers
//! adam flag u8 | [t u64 | lr f64 | beta1 f64 | beta2 f64 | eps f64 | section m | section v]
//! ```
//!
//! A tensor section is `count u32` followed by, per tensor, `rank u32`,
//! `rank` dims as u64, then the values as f32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::adam::{AdamConfig, AdamState};
use crate::error::{NnError, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"XECK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Architecture descriptor, a JSON document owned by the caller.
    pub descriptor: String,
    pub params: Vec<Tensor<f32>>,
    pub buffers: Vec<Tensor<f32>>,
    pub adam: Option<AdamState<f32>>,
}

impl Checkpoint {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.descriptor.len() as u64).to_le_bytes())?;
        w.write_all(self.descriptor.as_bytes())?;
        write_section(w, &self.params)?;
        write_section(w, &self.buffers)?;
        match &self.adam {
            None => w.write_all(&[0])?,
            Some(st) => {
                w.write_all(&[1])?;
                w.write_all(&st.t.to_le_bytes())?;
                for v in [st.config.lr, st.config.beta1, st.config.beta2, st.config.eps] {
                    w.write_all(&v.to_le_bytes())?;
                }
                write_section(w, &st.m)?;
                write_section(w, &st.v)?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {version}")));
        }
        let len = read_u64(r)? as usize;
        let mut desc = vec![0u8; len];
        r.read_exact(&mut desc)?;
        let descriptor =
            String::from_utf8(desc).map_err(|_| NnError::Checkpoint("descriptor is not UTF-8".into()))?;
        let params = read_section(r)?;
        let buffers = read_section(r)?;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let adam = match flag[0] {
            0 => None,
            1 => {
                let t = read_u64(r)?;
                let mut f = [0f64; 4];
                for v in &mut f {
                    *v = f64::from_le_bytes(read_array(r)?);
                }
                let config = AdamConfig { lr: f[0], beta1: f[1], beta2: f[2], eps: f[3] };
                let m = read_section(r)?;
                let v = read_section(r)?;
                Some(AdamState { config, t, m, v })
            }
            x => return Err(NnError::Checkpoint(format!("bad optimizer flag {x}"))),
        };
        Ok(Checkpoint { descriptor, params, buffers, adam })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

fn write_section(w: &mut impl Write, tensors: &[Tensor<f32>]) -> Result<()> {
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in tensors {
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 4);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_section(r: &mut impl Read) -> Result<Vec<Tensor<f32>>> {
    let count = read_u32(r)?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let rank = read_u32(r)? as usize;
        if rank > 8 {
            return Err(NnError::Checkpoint(format!("implausible tensor rank {rank}")));
        }
        let shape = (0..rank).map(|_| read_u64(r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; n * 4];
        r.read_exact(&mut bytes)?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        out.push(Tensor::from_vec(&shape, data)?);
    }
    Ok(out)
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}
