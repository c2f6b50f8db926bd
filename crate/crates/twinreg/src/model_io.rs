//! Binary model files.
//!
//! All integers are little-endian `u64` unless noted, all reals are the raw
//! little-endian bits of an `f64`, so a save/load round trip is bit-exact.
//!
//! ```text
//! magic       8 bytes  "TWINREG\0"
//! version     u32
//! d           feature dimension
//! n           anchor count
//! mode        u8: 0 all pairs, 1 nearest neighbors
//!   k         u64, u64::MAX for ALL        (mode 1 only)
//!   reversed  u8                           (mode 1 only)
//!   no_self   u8                           (mode 1 only)
//! params      count, then count reals (network input width is 2d)
//! anchors_x   n * d reals, row-major
//! anchors_y   n reals
//! mean, std   d reals each (standardization of the raw features)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use twinreg_core::data::StandardizationStats;
use twinreg_core::nn::MlpParams;
use twinreg_core::pairing::{NnPairOptions, PairMode};
use twinreg_core::twin::TwinModel;
use twinreg_core::{Matrix, Neighbors};

use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TWINREG\0";
pub const FORMAT_VERSION: u32 = 1;

/// A trained model together with the feature scaling it expects.
#[derive(Debug, Clone)]
pub struct SavedModel {
    pub model: TwinModel,
    pub stats: StandardizationStats,
}

pub fn encode(model: &TwinModel, stats: &StandardizationStats) -> Vec<u8> {
    let d = model.anchors_x().cols();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_u64(&mut out, d as u64);
    put_u64(&mut out, model.n_anchors() as u64);
    match model.train_mode() {
        PairMode::AllPairs => out.push(0),
        PairMode::NearestNeighbors(o) => {
            out.push(1);
            put_u64(
                &mut out,
                match o.k {
                    Neighbors::Count(k) => k as u64,
                    Neighbors::All => u64::MAX,
                },
            );
            out.push(u8::from(o.include_reversed));
            out.push(u8::from(o.exclude_self));
        }
    }
    put_u64(&mut out, model.params().as_flat().len() as u64);
    put_reals(&mut out, model.params().as_flat());
    put_reals(&mut out, model.anchors_x().as_slice());
    put_reals(&mut out, model.anchors_y());
    put_reals(&mut out, &stats.mean);
    put_reals(&mut out, &stats.std);
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<SavedModel, String> {
    let mut r = Cursor { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("not a twinreg model file".into());
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let d = r.usize()?;
    let n = r.usize()?;
    let mode = match r.take(1)?[0] {
        0 => PairMode::AllPairs,
        1 => {
            let k = match r.u64()? {
                u64::MAX => Neighbors::All,
                k => Neighbors::Count(k as usize),
            };
            let include_reversed = r.flag()?;
            let exclude_self = r.flag()?;
            PairMode::NearestNeighbors(NnPairOptions {
                k,
                include_reversed,
                exclude_self,
            })
        }
        t => return Err(format!("unknown pair mode tag {t}")),
    };
    let count = r.usize()?;
    let params = MlpParams::from_flat(2 * d, r.reals(count)?).map_err(|e| e.to_string())?;
    let anchors_x = Matrix::from_vec(n, d, r.reals(n * d)?).map_err(|e| e.to_string())?;
    let anchors_y = r.reals(n)?;
    let mean = r.reals(d)?;
    let std = r.reals(d)?;
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    let model =
        TwinModel::from_parts(params, anchors_x, anchors_y, mode).map_err(|e| e.to_string())?;
    Ok(SavedModel {
        model,
        stats: StandardizationStats { mean, std },
    })
}

pub fn save(path: impl AsRef<Path>, model: &TwinModel, stats: &StandardizationStats) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(model, stats))
        .map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|msg| Error::format(path, msg))
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_reals(out: &mut Vec<u8>, vals: &[f64]) {
    for v in vals {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format!("truncated file at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> std::result::Result<usize, String> {
        usize::try_from(self.u64()?).map_err(|_| "length overflows usize".to_string())
    }

    fn flag(&mut self) -> std::result::Result<bool, String> {
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(format!("bad flag byte {b}")),
        }
    }

    fn reals(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        let bytes = self.take(n.checked_mul(8).ok_or("length overflow")?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }
}
