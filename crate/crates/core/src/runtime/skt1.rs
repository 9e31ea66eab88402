//! SKT1 container.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "SKT1"
//!      4     2  version (u16, = 1)
//!      6     4  rows (u32)
//!     10     4  cols (u32)
//!     14     2  gpr (u16)
//!     16     1  bits
//!     17     1  reserved (0)
//!     18        sketched params, rows × gpr × k f32, row-major then group-major
//!               packed indices, one byte-aligned bitstream per row
//! ```
//!
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::packing::{pack_indices, packed_row_len, unpack_indices};
use super::SketchedMatrix;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SKT1";
pub const SKT1_VERSION: u16 = 1;
pub const SKT1_HEADER_LEN: usize = 18;

/// Exact file size: `18 + rows·gpr·k·4 + rows·⌈cols·bits/8⌉`.
pub fn serialized_len(rows: usize, cols: usize, gpr: usize, bits: u8) -> usize {
    SKT1_HEADER_LEN + rows * gpr * (1usize << bits) * 4 + rows * packed_row_len(cols, bits)
}

fn narrow<T: TryFrom<usize>>(value: usize, what: &'static str) -> Result<T> {
    T::try_from(value).map_err(|_| Error::Unsupported {
        what,
        value: value as u64,
    })
}

pub fn write_skt1<W: Write>(mut out: W, sm: &SketchedMatrix) -> Result<()> {
    let mut header = Vec::with_capacity(SKT1_HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&SKT1_VERSION.to_le_bytes());
    header.extend_from_slice(&narrow::<u32>(sm.rows(), "row count")?.to_le_bytes());
    header.extend_from_slice(&narrow::<u32>(sm.cols(), "column count")?.to_le_bytes());
    header.extend_from_slice(&narrow::<u16>(sm.gpr(), "groups per row")?.to_le_bytes());
    header.push(sm.bits());
    header.push(0);
    out.write_all(&header)?;
    let mut params = Vec::with_capacity(sm.sketched().len() * 4);
    for &v in sm.sketched() {
        params.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.write_all(&params)?;
    out.write_all(&pack_indices(sm.indices(), sm.rows(), sm.cols(), sm.bits())?)?;
    out.flush()?;
    Ok(())
}

/// Reads one SKT1 container. The magic is checked before anything else; the
/// reader then requires exactly the payload the header announces.
pub fn read_skt1<R: Read>(mut input: R) -> Result<SketchedMatrix> {
    let mut magic = [0u8; 4];
    let got = read_up_to(&mut input, &mut magic)?;
    if got < 4 || &magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic[..got].to_vec(),
        });
    }
    let mut rest = [0u8; SKT1_HEADER_LEN - 4];
    let got = read_up_to(&mut input, &mut rest)?;
    if got < rest.len() {
        return Err(Error::Truncated {
            expected: SKT1_HEADER_LEN,
            actual: 4 + got,
        });
    }
    let version = u16::from_le_bytes([rest[0], rest[1]]);
    if version != SKT1_VERSION {
        return Err(Error::Unsupported {
            what: "SKT1 version",
            value: version as u64,
        });
    }
    let rows = u32::from_le_bytes(rest[2..6].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(rest[6..10].try_into().expect("4 bytes")) as usize;
    let gpr = u16::from_le_bytes([rest[10], rest[11]]) as usize;
    let bits = rest[12];
    if !(2..=4).contains(&bits) {
        return Err(Error::Unsupported {
            what: "index width (bits)",
            value: bits as u64,
        });
    }
    if rows == 0 || cols == 0 || gpr == 0 || !cols.is_multiple_of(gpr) {
        return Err(Error::invalid(format!(
            "SKT1 header describes an invalid layout: {rows}x{cols}, gpr {gpr}"
        )));
    }

    let total = serialized_len(rows, cols, gpr, bits);
    let mut payload = Vec::with_capacity(total - SKT1_HEADER_LEN);
    input.read_to_end(&mut payload)?;
    if payload.len() != total - SKT1_HEADER_LEN {
        return Err(Error::Truncated {
            expected: total,
            actual: SKT1_HEADER_LEN + payload.len(),
        });
    }
    let n_params = rows * gpr * (1usize << bits);
    let (params, packed) = payload.split_at(n_params * 4);
    let sketched = params
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
        .collect();
    let indices = unpack_indices(packed, rows, cols, bits)?;
    SketchedMatrix::new(rows, cols, gpr, bits, sketched, indices)
}

fn read_up_to<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

impl SketchedMatrix {
    pub fn to_skt1_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(serialized_len(self.rows(), self.cols(), self.gpr(), self.bits()));
        write_skt1(&mut out, self).expect("writing to a Vec cannot fail for a valid sketch");
        out
    }

    pub fn from_skt1_bytes(bytes: &[u8]) -> Result<Self> {
        read_skt1(bytes)
    }
}

pub fn save_skt1(path: impl AsRef<Path>, sm: &SketchedMatrix) -> Result<()> {
    write_skt1(BufWriter::new(File::create(path)?), sm)
}

pub fn load_skt1(path: impl AsRef<Path>) -> Result<SketchedMatrix> {
    read_skt1(BufReader::new(File::open(path)?))
}
