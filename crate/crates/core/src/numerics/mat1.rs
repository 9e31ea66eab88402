//! MAT1 binary matrix files.
//!
//! Layout (little-endian): `b"MAT1"`, `u8` dtype (0 = f64, 1 = f32),
//! `u32` rows, `u32` cols, then the row-major payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Matrix;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MAT1";
pub const HEADER_LEN: usize = 13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Dtype {
    #[default]
    F64,
    F32,
}

impl Dtype {
    fn flag(self) -> u8 {
        match self {
            Dtype::F64 => 0,
            Dtype::F32 => 1,
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F64 => 8,
            Dtype::F32 => 4,
        }
    }
}

pub fn write_mat1<W: Write>(mut out: W, m: &Matrix, dtype: Dtype) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + m.rows() * m.cols() * dtype.width());
    buf.extend_from_slice(MAGIC);
    buf.push(dtype.flag());
    buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.as_slice() {
        match dtype {
            Dtype::F64 => buf.extend_from_slice(&v.to_le_bytes()),
            Dtype::F32 => buf.extend_from_slice(&(v as f32).to_le_bytes()),
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Read a MAT1 stream. The magic is checked before anything else is read.
pub fn read_mat1<R: Read>(mut input: R) -> Result<Matrix> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_up_to(&mut input, &mut header)?;
    if got < MAGIC.len() || &header[..4] != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: header[..got.min(4)].to_vec(),
        });
    }
    if got < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            actual: got,
        });
    }
    let dtype = match header[4] {
        0 => Dtype::F64,
        1 => Dtype::F32,
        other => {
            return Err(Error::Unsupported {
                what: "MAT1 dtype",
                value: other as u64,
            })
        }
    };
    let rows = u32::from_le_bytes(header[5..9].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[9..13].try_into().unwrap()) as usize;
    let payload_len = rows * cols * dtype.width();
    let mut payload = vec![0u8; payload_len];
    let got = read_up_to(&mut input, &mut payload)?;
    if got < payload_len {
        return Err(Error::Truncated {
            expected: HEADER_LEN + payload_len,
            actual: HEADER_LEN + got,
        });
    }
    let data = match dtype {
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    Matrix::from_vec(rows, cols, data)
}

fn read_up_to<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

pub fn save_mat1(path: impl AsRef<Path>, m: &Matrix, dtype: Dtype) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_mat1(&mut w, m, dtype)?;
    w.flush()?;
    Ok(())
}

pub fn load_mat1(path: impl AsRef<Path>) -> Result<Matrix> {
    read_mat1(BufReader::new(File::open(path)?))
}
