use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::Tensor4;

/// Zero-pad, random crop, random horizontal flip, optional cutout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub pad: usize,
    /// Side of the square crop; `None` keeps the input size.
    #[serde(default)]
    pub crop: Option<usize>,
    pub flip: bool,
    #[serde(default)]
    pub cutout: Option<usize>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { pad: 4, crop: None, flip: true, cutout: None }
    }
}

impl AugmentConfig {
    pub fn identity() -> Self {
        Self { pad: 0, crop: None, flip: false, cutout: None }
    }

    pub fn with_cutout(mut self, size: usize) -> Self {
        self.cutout = Some(size);
        self
    }
}

/// Mirrors one HWC image left to right.
pub fn flip_horizontal(image: &mut [f32], h: usize, w: usize, c: usize) {
    for y in 0..h {
        for x in 0..w / 2 {
            for ch in 0..c {
                image.swap((y * w + x) * c + ch, (y * w + (w - 1 - x)) * c + ch);
            }
        }
    }
}

/// Zeroes a `size x size` square centred at `(cy, cx)`, clipped to the image.
/// Returns the number of pixels masked.
pub fn cutout(image: &mut [f32], h: usize, w: usize, c: usize, cy: usize, cx: usize, size: usize) -> usize {
    let half = size / 2;
    let (y0, y1) = (cy.saturating_sub(half), (cy + size - half).min(h));
    let (x0, x1) = (cx.saturating_sub(half), (cx + size - half).min(w));
    for y in y0..y1 {
        for x in x0..x1 {
            image[(y * w + x) * c..(y * w + x + 1) * c].fill(0.0);
        }
    }
    (y1 - y0) * (x1 - x0)
}

pub fn augment<R: Rng + ?Sized>(batch: &Tensor4<f32>, cfg: &AugmentConfig, rng: &mut R) -> Tensor4<f32> {
    let [n, h, w, c] = batch.dims();
    let crop = cfg.crop.unwrap_or(h.min(w));
    let (ph, pw) = (h + 2 * cfg.pad, w + 2 * cfg.pad);
    assert!(crop <= ph && crop <= pw, "crop {crop} larger than padded {ph}x{pw}");
    let mut out = Tensor4::zeros([n, crop, crop, c]);
    let src = batch.data();
    let per_out = crop * crop * c;
    for (b, dst) in out.data_mut().chunks_exact_mut(per_out).enumerate() {
        let oy = rng.random_range(0..=ph - crop);
        let ox = rng.random_range(0..=pw - crop);
        for y in 0..crop {
            let sy = (y + oy) as isize - cfg.pad as isize;
            if sy < 0 || sy >= h as isize {
                continue;
            }
            for x in 0..crop {
                let sx = (x + ox) as isize - cfg.pad as isize;
                if sx < 0 || sx >= w as isize {
                    continue;
                }
                let s = ((b * h + sy as usize) * w + sx as usize) * c;
                dst[(y * crop + x) * c..(y * crop + x + 1) * c].copy_from_slice(&src[s..s + c]);
            }
        }
        if cfg.flip && rng.random_bool(0.5) {
            flip_horizontal(dst, crop, crop, c);
        }
        if let Some(size) = cfg.cutout {
            let cy = rng.random_range(0..crop);
            let cx = rng.random_range(0..crop);
            cutout(dst, crop, crop, c, cy, cx, size);
        }
    }
    out
}
