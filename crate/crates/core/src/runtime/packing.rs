//! Fixed-width index codec.
//!
//! Each row is an LSB-first little-endian bitstream: index `j` occupies bits
//! `j·bits .. (j+1)·bits` of the row, and every row starts on a byte
//! boundary.

use crate::{Error, Result};

fn check_bits(bits: u8) -> Result<()> {
    if (2..=4).contains(&bits) {
        Ok(())
    } else {
        Err(Error::Unsupported {
            what: "index width (bits)",
            value: bits as u64,
        })
    }
}

/// Bytes used by one packed row: `⌈cols·bits/8⌉`.
pub fn packed_row_len(cols: usize, bits: u8) -> usize {
    (cols * bits as usize).div_ceil(8)
}

/// Pack a single row, appending to `out`.
pub fn pack_row(indices: &[u8], bits: u8, out: &mut Vec<u8>) -> Result<()> {
    check_bits(bits)?;
    let limit = 1u8 << bits;
    let mut acc: u32 = 0;
    let mut filled = 0u32;
    for &ix in indices {
        if ix >= limit {
            return Err(Error::invalid(format!("index {ix} does not fit in {bits} bits")));
        }
        acc |= (ix as u32) << filled;
        filled += bits as u32;
        while filled >= 8 {
            out.push(acc as u8);
            acc >>= 8;
            filled -= 8;
        }
    }
    if filled > 0 {
        out.push(acc as u8);
    }
    Ok(())
}

/// Unpack one row of `cols` indices from exactly `packed_row_len` bytes.
pub fn unpack_row(bytes: &[u8], cols: usize, bits: u8, out: &mut Vec<u8>) -> Result<()> {
    check_bits(bits)?;
    let expected = packed_row_len(cols, bits);
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let mask = (1u32 << bits) - 1;
    let mut acc: u32 = 0;
    let mut filled = 0u32;
    let mut src = bytes.iter();
    for _ in 0..cols {
        if filled < bits as u32 {
            acc |= (*src.next().expect("length checked") as u32) << filled;
            filled += 8;
        }
        out.push((acc & mask) as u8);
        acc >>= bits;
        filled -= bits as u32;
    }
    Ok(())
}

/// Pack a row-major `rows × cols` index tensor.
pub fn pack_indices(indices: &[u8], rows: usize, cols: usize, bits: u8) -> Result<Vec<u8>> {
    if indices.len() != rows * cols {
        return Err(Error::dims("pack_indices", (1, indices.len()), (rows, cols)));
    }
    check_bits(bits)?;
    let mut out = Vec::with_capacity(rows * packed_row_len(cols, bits));
    if cols == 0 {
        return Ok(out);
    }
    for row in indices.chunks_exact(cols) {
        pack_row(row, bits, &mut out)?;
    }
    Ok(out)
}

/// Inverse of [`pack_indices`]. The stream must hold exactly
/// `rows·⌈cols·bits/8⌉` bytes.
pub fn unpack_indices(bytes: &[u8], rows: usize, cols: usize, bits: u8) -> Result<Vec<u8>> {
    check_bits(bits)?;
    let row_len = packed_row_len(cols, bits);
    let expected = rows * row_len;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let mut out = Vec::with_capacity(rows * cols);
    if row_len == 0 {
        return Ok(out);
    }
    for row in bytes.chunks_exact(row_len) {
        unpack_row(row, cols, bits, &mut out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    /// Reference packer that sets one bit at a time.
    fn bitwise_pack(indices: &[u8], bits: u8) -> Vec<u8> {
        let mut out = vec![0u8; packed_row_len(indices.len(), bits)];
        for (j, &ix) in indices.iter().enumerate() {
            for b in 0..bits as usize {
                if (ix >> b) & 1 == 1 {
                    let pos = j * bits as usize + b;
                    out[pos / 8] |= 1 << (pos % 8);
                }
            }
        }
        out
    }

    #[test]
    fn nibbles_low_first() {
        assert_eq!(pack_indices(&[3, 10], 1, 2, 4).unwrap(), vec![0xA3]);
    }

    #[test]
    fn two_bit_order() {
        assert_eq!(pack_indices(&[0, 1, 2, 3], 1, 4, 2).unwrap(), vec![0xE4]);
    }

    #[test]
    fn three_bit_against_reference() {
        let mut rng = Rng::new(5);
        let idx: Vec<u8> = (0..64).map(|_| rng.below(8) as u8).collect();
        let packed = pack_indices(&idx, 1, 64, 3).unwrap();
        assert_eq!(packed.len(), 24);
        assert_eq!(packed, bitwise_pack(&idx, 3));
        assert_eq!(unpack_indices(&packed, 1, 64, 3).unwrap(), idx);
    }

    #[test]
    fn rows_are_byte_aligned() {
        // 3 indices of 3 bits = 9 bits -> 2 bytes per row
        let idx = [7, 7, 7, 1, 0, 0];
        let packed = pack_indices(&idx, 2, 3, 3).unwrap();
        assert_eq!(packed, vec![0xFF, 0x01, 0x01, 0x00]);
        assert_eq!(unpack_indices(&packed, 2, 3, 3).unwrap(), idx);
    }

    #[test]
    fn truncated_reports_lengths() {
        let err = unpack_indices(&[0u8; 5], 2, 8, 3).unwrap_err();
        assert!(matches!(err, Error::Truncated { expected: 6, actual: 5 }));
    }

    #[test]
    fn rejects_bad_widths_and_values() {
        assert!(pack_indices(&[0], 1, 1, 5).is_err());
        assert!(pack_indices(&[4], 1, 1, 2).is_err());
    }
}
