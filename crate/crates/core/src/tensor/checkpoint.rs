//! Weight checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    b"WSCK"
//! version  u32 (= 1)
//! layers   u32
//! per layer:   name_len u16, name (utf-8), tensors u32,
//!              per tensor: rank u32, dims u32 * rank
//! payload  f32 values of every tensor, in declaration order
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"WSCK";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointLayer {
    pub name: String,
    pub tensors: Vec<CheckpointTensor>,
}

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::input(format!("{what} {v} does not fit in u32")))
}

pub fn write_checkpoint<W: Write>(mut out: W, layers: &[CheckpointLayer]) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&u32_of(layers.len(), "layer count")?.to_le_bytes())?;
    for layer in layers {
        let name = layer.name.as_bytes();
        let len = u16::try_from(name.len())
            .map_err(|_| Error::input(format!("layer name too long: {}", layer.name)))?;
        out.write_all(&len.to_le_bytes())?;
        out.write_all(name)?;
        out.write_all(&u32_of(layer.tensors.len(), "tensor count")?.to_le_bytes())?;
        for t in &layer.tensors {
            let expected: usize = t.dims.iter().product();
            if expected != t.data.len() {
                return Err(Error::shape(format!(
                    "tensor in {} declares {:?} but holds {} values",
                    layer.name,
                    t.dims,
                    t.data.len()
                )));
            }
            out.write_all(&u32_of(t.dims.len(), "rank")?.to_le_bytes())?;
            for &d in &t.dims {
                out.write_all(&u32_of(d, "dimension")?.to_le_bytes())?;
            }
        }
    }
    for t in layers.iter().flat_map(|l| &l.tensors) {
        let mut buf = Vec::with_capacity(t.data.len() * 4);
        for v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Vec<CheckpointLayer>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("not a weight checkpoint (bad magic)".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let layer_count = cur.u32()? as usize;
    let mut layers = Vec::with_capacity(layer_count.min(1 << 16));
    for _ in 0..layer_count {
        let len = cur.u16()? as usize;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::Format("layer name is not utf-8".into()))?
            .to_string();
        let tensor_count = cur.u32()? as usize;
        let mut tensors = Vec::with_capacity(tensor_count.min(64));
        for _ in 0..tensor_count {
            let rank = cur.u32()? as usize;
            let dims = (0..rank)
                .map(|_| cur.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            tensors.push(CheckpointTensor { dims, data: Vec::new() });
        }
        layers.push(CheckpointLayer { name, tensors });
    }
    for t in layers.iter_mut().flat_map(|l| &mut l.tensors) {
        let n: usize = t.dims.iter().product();
        let raw = cur.take(n * 4)?;
        t.data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after checkpoint payload",
            bytes.len() - cur.pos
        )));
    }
    Ok(layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<CheckpointLayer> {
        vec![
            CheckpointLayer {
                name: "conv0".into(),
                tensors: vec![CheckpointTensor { dims: vec![1, 1, 2, 3], data: vec![1.0, -2.0, 3.5, 0.0, 1e-8, 7.0] }],
            },
            CheckpointLayer {
                name: "bn0".into(),
                tensors: vec![
                    CheckpointTensor { dims: vec![3], data: vec![1.0, 1.0, 1.0] },
                    CheckpointTensor { dims: vec![3], data: vec![0.0, 0.5, 0.0] },
                ],
            },
        ]
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample()).unwrap();
        assert_eq!(&buf[..4], b"WSCK");
        assert_eq!(read_checkpoint(&buf[..]).unwrap(), sample());
    }

    #[test]
    fn payload_is_little_endian_f32() {
        let layers = vec![CheckpointLayer {
            name: "x".into(),
            tensors: vec![CheckpointTensor { dims: vec![1], data: vec![1.0] }],
        }];
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &layers).unwrap();
        assert_eq!(&buf[buf.len() - 4..], &1.0f32.to_le_bytes());
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample()).unwrap();
        buf.pop();
        assert!(matches!(read_checkpoint(&buf[..]), Err(Error::Format(_))));
    }
}
