//! Binary parameter container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "GIRNET1"                      7-byte header
//! u32                            entry count
//! per entry:
//!   u32 + bytes                  UTF-8 parameter path
//!   u32 + u64 × ndim             shape
//!   f64 × product(shape)         values
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::{ParamStore, Scalar, Tensor};

pub const MAGIC: &[u8; 7] = b"GIRNET1";

pub fn encode<T: Scalar>(store: &ParamStore<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * store.num_scalars());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, p) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let shape = p.value.shape();
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in p.value.data() {
            out.extend_from_slice(&x.as_f64().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<ParamStore<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len()).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Checkpoint("missing GIRNET1 header".into()));
    }
    let count = r.u32()?;
    let mut store = ParamStore::new(0);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| Error::Checkpoint(format!("parameter path is not UTF-8: {e}")))?
            .to_string();
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= bytes.len() / 8)
            .ok_or_else(|| Error::Checkpoint(format!("implausible shape {shape:?} for '{name}'")))?;
        let data = r
            .take(8 * numel)?
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect();
        let value = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("'{name}': {e}")))?;
        store
            .insert(&name, value)
            .map_err(|_| Error::Checkpoint(format!("duplicate parameter '{name}'")))?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(store)
}

pub fn save<T: Scalar>(path: &Path, store: &ParamStore<T>) -> Result<()> {
    fs::write(path, encode(store))?;
    Ok(())
}

pub fn load<T: Scalar>(path: &Path) -> Result<ParamStore<T>> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor64;

    fn sample() -> ParamStore<f64> {
        let mut s = ParamStore::new(0);
        s.insert("a/w", Tensor64::from_rows(&[vec![1.5, -0.0], vec![f64::MIN_POSITIVE, 1e300]]).unwrap())
            .unwrap();
        s.insert("b", Tensor64::vector(&[std::f64::consts::PI])).unwrap();
        s
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = sample();
        let back: ParamStore<f64> = decode(&encode(&s)).unwrap();
        for (name, p) in s.iter() {
            let q = back.value(name).unwrap();
            assert_eq!(p.value.shape(), q.shape());
            let bits = |t: &Tensor64| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&p.value), bits(q));
        }
        assert_eq!(encode(&back), encode(&s));
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode(&sample());
        assert!(decode::<f64>(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode::<f64>(b"GIRNET2\0\0\0\0").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode::<f64>(&extra).is_err());
    }
}
