//! CIFAR binary record layout.
//!
//! Each record is the label byte(s) followed by 3072 pixel bytes: three
//! 32x32 planes (red, green, blue), each row-major. The 10-class layout has
//! one label byte; the 100-class layout has a coarse then a fine label byte,
//! and only the fine label is kept.

use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};

const SIDE: usize = 32;
const PLANE: usize = SIDE * SIDE;
const PIXELS: usize = 3 * PLANE;

fn label_bytes(class_count: usize) -> Result<usize> {
    match class_count {
        10 => Ok(1),
        100 => Ok(2),
        other => Err(Error::input(format!("binary layout exists for 10 or 100 classes, not {other}"))),
    }
}

pub fn decode_binary_dataset(bytes: &[u8], class_count: usize) -> Result<LabeledDataset> {
    let lb = label_bytes(class_count)?;
    let record = lb + PIXELS;
    if bytes.len() % record != 0 {
        return Err(Error::Format(format!(
            "{} bytes is not a whole number of {record}-byte records",
            bytes.len()
        )));
    }
    let n = bytes.len() / record;
    let mut pixels = vec![0f32; n * PIXELS];
    let mut labels = Vec::with_capacity(n);
    for (i, rec) in bytes.chunks_exact(record).enumerate() {
        let label = rec[lb - 1] as usize;
        if label >= class_count {
            return Err(Error::Format(format!("record {i} has label {label}")));
        }
        labels.push(label);
        let img = &mut pixels[i * PIXELS..(i + 1) * PIXELS];
        let planes = &rec[lb..];
        for ch in 0..3 {
            for p in 0..PLANE {
                img[p * 3 + ch] = planes[ch * PLANE + p] as f32 / 255.0;
            }
        }
    }
    LabeledDataset::new([SIDE, SIDE, 3], pixels, labels, class_count)
}

pub fn load_binary_dataset(path: impl AsRef<Path>, class_count: usize) -> Result<LabeledDataset> {
    let bytes = std::fs::read(path.as_ref())?;
    decode_binary_dataset(&bytes, class_count)
}

/// Encodes a 32x32x3 dataset; pixel values are quantized to bytes. For
/// 100-class data the coarse label byte is written as zero.
pub fn encode_binary_dataset(data: &LabeledDataset) -> Result<Vec<u8>> {
    let lb = label_bytes(data.class_count())?;
    if data.dims() != [SIDE, SIDE, 3] {
        return Err(Error::input(format!("binary layout needs 32x32x3 images, got {:?}", data.dims())));
    }
    let mut out = Vec::with_capacity(data.len() * (lb + PIXELS));
    for i in 0..data.len() {
        if lb == 2 {
            out.push(0);
        }
        out.push(data.labels()[i] as u8);
        let img = data.image(i);
        for ch in 0..3 {
            for p in 0..PLANE {
                out.push((img[p * 3 + ch].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    Ok(out)
}
