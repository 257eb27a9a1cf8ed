//! Portable float map, single channel (`Pf`).
//!
//! Header is `Pf\n<W> <H>\n<scale>\n`, a negative scale meaning a
//! little-endian payload. Rows are stored bottom to top.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub fn encode_pfm(map: &Grid<f32>) -> Vec<u8> {
    encode(map, false)
}

/// Big-endian twin (`scale = 1.0`), for interoperability tests.
pub fn encode_pfm_big_endian(map: &Grid<f32>) -> Vec<u8> {
    encode(map, true)
}

fn encode(map: &Grid<f32>, big_endian: bool) -> Vec<u8> {
    let scale = if big_endian { "1.0" } else { "-1.0" };
    let mut out = format!("Pf\n{} {}\n{}\n", map.width, map.height, scale).into_bytes();
    out.reserve(map.data.len() * 4);
    for y in (0..map.height).rev() {
        for &v in map.row(y) {
            out.extend_from_slice(&if big_endian { v.to_be_bytes() } else { v.to_le_bytes() });
        }
    }
    out
}

pub fn write_pfm(map: &Grid<f32>, path: &Path) -> Result<()> {
    super::write_atomic(path, &encode_pfm(map))?;
    Ok(())
}

pub fn read_pfm(path: &Path) -> Result<Grid<f32>> {
    decode_pfm(&super::read_file(path)?)
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Grid<f32>> {
    let bad = |m: &str| Error::PfmParse(m.to_string());
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Result<String> {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(bad("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = token(&mut pos)?;
    if magic != "Pf" {
        return Err(if magic == "PF" {
            bad("three-channel PF maps are not supported")
        } else {
            bad("missing 'Pf' magic")
        });
    }
    let dim = |s: String| -> Result<usize> {
        let v: i64 = s.parse().map_err(|_| bad("dimension is not an integer"))?;
        if v <= 0 {
            return Err(bad("dimensions must be positive"));
        }
        Ok(v as usize)
    };
    let width = dim(token(&mut pos)?)?;
    let height = dim(token(&mut pos)?)?;
    let scale: f64 = token(&mut pos)?.parse().map_err(|_| bad("scale is not a number"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(bad("scale must be non-zero"));
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("truncated header"));
    }
    pos += 1;
    let payload = &bytes[pos..];
    let n = width.checked_mul(height).ok_or_else(|| bad("dimensions overflow"))?;
    if payload.len() != n * 4 {
        return Err(bad(&format!("payload is {} bytes, expected {}", payload.len(), n * 4)));
    }
    let little = scale < 0.0;
    let mut data = vec![0f32; n];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (row_from_bottom, x) = (i / width, i % width);
        data[(height - 1 - row_from_bottom) * width + x] = v;
    }
    Ok(Grid::from_vec(width, height, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_pixel_bytes() {
        let bytes = encode_pfm(&Grid::from_vec(1, 1, vec![3.5f32]));
        let mut expected = b"Pf\n1 1\n-1.0\n".to_vec();
        expected.extend_from_slice(&3.5f32.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn bottom_row_first() {
        let bytes = encode_pfm(&Grid::from_vec(1, 2, vec![1.0f32, 2.0]));
        let payload = &bytes[bytes.len() - 8..];
        assert_eq!(&payload[..4], &2.0f32.to_le_bytes());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(w in 1usize..20, h in 1usize..20, seed in any::<u32>()) {
            let data: Vec<f32> = (0..w * h).map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i as u32 * 7919) & 0x7f7f_ffff)).collect();
            let map = Grid::from_vec(w, h, data);
            let back = decode_pfm(&encode_pfm(&map)).unwrap();
            prop_assert_eq!(back.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), map.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            let be = decode_pfm(&encode_pfm_big_endian(&map)).unwrap();
            prop_assert_eq!(be, back);
        }
    }

    #[test]
    fn malformed_headers() {
        for bad in [
            &b"P5\n1 1\n-1.0\n\0\0\0\0"[..],
            b"Pf\n-1 1\n-1.0\n\0\0\0\0",
            b"Pf\n1 x\n-1.0\n\0\0\0\0",
            b"Pf\n1 1\n0.0\n\0\0\0\0",
            b"Pf\n2 1\n-1.0\n\0\0\0\0",
            b"Pf\n1 1",
        ] {
            assert!(
                matches!(decode_pfm(bad), Err(Error::PfmParse(_))),
                "{:?}",
                String::from_utf8_lossy(bad)
            );
        }
    }

    #[test]
    fn accepts_other_whitespace_layouts() {
        let mut bytes = b"Pf 2 1 -1\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_le_bytes());
        bytes.extend_from_slice(&(-2.0f32).to_le_bytes());
        assert_eq!(decode_pfm(&bytes).unwrap().data, vec![1.5, -2.0]);
    }
}
