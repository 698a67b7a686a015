//! Binary checkpoint of weights and optimizer state.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! "CNNW"                      magic
//! u32                         format version (1)
//! u32 rows, u32 cols, f64*    W1, row-major
//! u32 rows, u32 cols, f64*    W2, row-major
//! -- optional optimizer section, present iff bytes remain --
//! u64                         Adam step counter t
//! u32                         number of tagged arrays (4)
//! repeated: u32 name_len, name (UTF-8), u32 rows, u32 cols, f64*
//! ```
//!
//! Tagged arrays are `mW1`, `vW1`, `mW2`, `vW2` in any order. A weights-only
//! file loads with zeroed moments and `t = 0`.

use std::fs;
use std::path::Path;

use crate::adam::{AdamHyper, AdamState};
use crate::error::{Error, Result};
use crate::neuralcore::{ModelState, Weights};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"CNNW";
pub const VERSION: u32 = 1;

const MOMENT_NAMES: [&str; 4] = ["mW1", "vW1", "mW2", "vW2"];

fn put_matrix(out: &mut Vec<u8>, m: &Matrix) {
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for x in m.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode(state: &ModelState) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 3 * 8 * state.weights.len() * 2);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_matrix(&mut out, &state.weights.w1);
    put_matrix(&mut out, &state.weights.w2);

    out.extend_from_slice(&state.adam.t.to_le_bytes());
    out.extend_from_slice(&(MOMENT_NAMES.len() as u32).to_le_bytes());
    let arrays = [
        &state.adam.m_w1,
        &state.adam.v_w1,
        &state.adam.m_w2,
        &state.adam.v_w2,
    ];
    for (name, m) in MOMENT_NAMES.iter().zip(arrays) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        put_matrix(&mut out, m);
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated while reading {what} at offset {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn matrix(&mut self, what: &str) -> Result<Matrix> {
        let rows = self.u32(what)? as usize;
        let cols = self.u32(what)? as usize;
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Checkpoint(format!("{what} dimensions overflow")))?;
        let raw = self.take(n, what)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Matrix::from_vec(rows, cols, data)
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

/// Decode a checkpoint. Hyper-parameters are not stored and come from the caller.
pub fn decode(bytes: &[u8], hyper: AdamHyper) -> Result<ModelState> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic (expected \"CNNW\")".into()));
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let w1 = c.matrix("W1")?;
    let w2 = c.matrix("W2")?;
    if w1.cols() != w2.rows() {
        return Err(Error::Checkpoint(format!(
            "W1 is {}x{} but W2 is {}x{}",
            w1.rows(),
            w1.cols(),
            w2.rows(),
            w2.cols()
        )));
    }
    let mut state = ModelState::new(Weights { w1, w2 }, hyper);
    if c.done() {
        return Ok(state);
    }

    let t = c.u64("step counter")?;
    let count = c.u32("array count")?;
    let mut found: [Option<Matrix>; 4] = Default::default();
    for _ in 0..count {
        let len = c.u32("array name length")? as usize;
        let name = std::str::from_utf8(c.take(len, "array name")?)
            .map_err(|_| Error::Checkpoint("array name is not UTF-8".into()))?
            .to_owned();
        let slot = MOMENT_NAMES
            .iter()
            .position(|&n| n == name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown array `{name}`")))?;
        let m = c.matrix(&name)?;
        let expected = if slot < 2 {
            state.weights.w1.shape()
        } else {
            state.weights.w2.shape()
        };
        if m.shape() != expected {
            return Err(Error::Checkpoint(format!(
                "`{name}` is {:?}, expected {expected:?}",
                m.shape()
            )));
        }
        found[slot] = Some(m);
    }
    if !c.done() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - c.pos
        )));
    }
    let [m_w1, v_w1, m_w2, v_w2] = found;
    let missing = |i: usize| Error::Checkpoint(format!("missing `{}`", MOMENT_NAMES[i]));
    state.adam = AdamState {
        m_w1: m_w1.ok_or_else(|| missing(0))?,
        v_w1: v_w1.ok_or_else(|| missing(1))?,
        m_w2: m_w2.ok_or_else(|| missing(2))?,
        v_w2: v_w2.ok_or_else(|| missing(3))?,
        t,
    };
    Ok(state)
}

pub fn save(path: &Path, state: &ModelState) -> Result<()> {
    fs::write(path, encode(state)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path, hyper: AdamHyper) -> Result<ModelState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, hyper).map_err(|e| Error::InFile {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}
