//! PEMB embedding container, little-endian throughout:
//!
//! ```text
//! "PEMB"            4 bytes
//! version = 1       u32
//! sentence count S  u32
//! dimension n       u32
//! S × { token count t: u32, t·n f32 values, token-major }
//! ```

use super::{DataError, Result};
use ndarray::Array2;
use std::path::Path;

pub const PEMB_MAGIC: &[u8; 4] = b"PEMB";
pub const PEMB_VERSION: u32 = 1;

/// Per-sentence `t × n` embedding matrices in treebank order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pemb {
    pub dim: usize,
    pub sentences: Vec<Array2<f32>>,
}

impl Pemb {
    pub fn total_rows(&self) -> usize {
        self.sentences.iter().map(|m| m.nrows()).sum()
    }
}

pub fn encode_pemb(pemb: &Pemb) -> Vec<u8> {
    let floats: usize = pemb.sentences.iter().map(|m| m.len()).sum();
    let mut out = Vec::with_capacity(16 + 4 * pemb.sentences.len() + 4 * floats);
    out.extend_from_slice(PEMB_MAGIC);
    out.extend_from_slice(&PEMB_VERSION.to_le_bytes());
    out.extend_from_slice(&(pemb.sentences.len() as u32).to_le_bytes());
    out.extend_from_slice(&(pemb.dim as u32).to_le_bytes());
    for m in &pemb.sentences {
        assert_eq!(m.ncols(), pemb.dim, "matrix width must equal the file dimension");
        out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
        for v in m.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(DataError::Truncated {
                needed: end - self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_pemb(buf: &[u8]) -> Result<Pemb> {
    let mut cur = Cursor { buf, pos: 0 };
    if cur.take(4).map_err(|_| DataError::BadMagic)? != PEMB_MAGIC {
        return Err(DataError::BadMagic);
    }
    let version = cur.u32()?;
    if version != PEMB_VERSION {
        return Err(DataError::Version(version));
    }
    let count = cur.u32()? as usize;
    let dim = cur.u32()? as usize;
    let mut sentences = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let t = cur.u32()? as usize;
        let bytes = cur.take(t * dim * 4)?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        sentences.push(Array2::from_shape_vec((t, dim), data).expect("length checked"));
    }
    if cur.pos != buf.len() {
        return Err(DataError::Trailing(buf.len() - cur.pos));
    }
    Ok(Pemb { dim, sentences })
}

pub fn read_pemb(path: impl AsRef<Path>) -> Result<Pemb> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_pemb(&buf)
}

pub fn write_pemb(path: impl AsRef<Path>, pemb: &Pemb) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pemb(pemb)).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_corpus() {
        let p = Pemb { dim: 8, sentences: vec![] };
        let bytes = encode_pemb(&p);
        assert_eq!(bytes.len(), 16);
        assert_eq!(decode_pemb(&bytes).unwrap(), p);
    }

    #[test]
    fn two_sentence_layout() {
        let a = Array2::from_shape_fn((3, 8), |(i, j)| (i * 8 + j) as f32 * 0.5);
        let b = Array2::from_shape_fn((5, 8), |(i, j)| -((i + j) as f32) / 3.0);
        let p = Pemb { dim: 8, sentences: vec![a.clone(), b.clone()] };
        let bytes = encode_pemb(&p);
        assert_eq!(bytes.len(), 16 + 4 + 3 * 8 * 4 + 4 + 5 * 8 * 4);
        // second block's token count sits right after the first payload
        let off = 16 + 4 + 96;
        assert_eq!(u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()), 5);
        let back = decode_pemb(&bytes).unwrap();
        for (m, orig) in back.sentences.iter().zip([&a, &b]) {
            for (r, o) in m.rows().into_iter().zip(orig.rows()) {
                let n1: f32 = r.iter().map(|v| v * v).sum();
                let n2: f32 = o.iter().map(|v| v * v).sum();
                assert_eq!(n1.to_bits(), n2.to_bits());
            }
        }
    }

    #[test]
    fn rejects_bad_headers_and_truncation() {
        assert!(matches!(decode_pemb(b"NOPE\x01\0\0\0"), Err(DataError::BadMagic)));
        assert!(matches!(decode_pemb(b""), Err(DataError::BadMagic)));
        let mut v = encode_pemb(&Pemb { dim: 2, sentences: vec![] });
        v[4] = 2;
        assert!(matches!(decode_pemb(&v), Err(DataError::Version(2))));
        let full = encode_pemb(&Pemb {
            dim: 2,
            sentences: vec![Array2::zeros((2, 2))],
        });
        assert!(matches!(
            decode_pemb(&full[..full.len() - 3]),
            Err(DataError::Truncated { .. })
        ));
        let mut extra = full.clone();
        extra.push(0);
        assert!(matches!(decode_pemb(&extra), Err(DataError::Trailing(1))));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            dim in 0usize..6,
            rows in proptest::collection::vec(0usize..5, 0..5),
            seed in any::<u32>(),
        ) {
            let mut bits = seed;
            let sentences: Vec<Array2<f32>> = rows.iter().map(|&t| {
                Array2::from_shape_fn((t, dim), |_| {
                    bits = bits.wrapping_mul(1664525).wrapping_add(1013904223);
                    f32::from_bits(bits & 0x7f7f_ffff)
                })
            }).collect();
            let p = Pemb { dim, sentences };
            let back = decode_pemb(&encode_pemb(&p)).unwrap();
            prop_assert_eq!(back.sentences.len(), p.sentences.len());
            for (a, b) in back.sentences.iter().zip(&p.sentences) {
                prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }
}
