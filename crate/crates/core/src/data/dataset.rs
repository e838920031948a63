use crate::error::{Error, Result};
use crate::tensor::Tensor4;

/// Images in height-width-channel order with values in `[0, 1]` before
/// normalization, plus one class index per image.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    dims: [usize; 3],
    pixels: Vec<f32>,
    labels: Vec<usize>,
    class_count: usize,
}

impl LabeledDataset {
    pub fn new(dims: [usize; 3], pixels: Vec<f32>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!("image dims {dims:?} must be positive")));
        }
        let per: usize = dims.iter().product();
        if pixels.len() != per * labels.len() {
            return Err(Error::shape(format!(
                "{} pixel values for {} images of {dims:?}",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::input(format!("label {bad} outside {class_count} classes")));
        }
        Ok(Self { dims, pixels, labels, class_count })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn image_len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    /// Gathers the given images into an NHWC batch.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor4<f32>, Vec<usize>)> {
        if indices.is_empty() {
            return Err(Error::input("empty batch"));
        }
        let mut data = Vec::with_capacity(indices.len() * self.image_len());
        for &i in indices {
            data.extend_from_slice(self.image(i));
        }
        let [h, w, c] = self.dims;
        let t = Tensor4::new([indices.len(), h, w, c], data)?;
        Ok((t, indices.iter().map(|&i| self.labels[i]).collect()))
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * self.image_len());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
        }
        Self {
            dims: self.dims,
            pixels,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }

    /// Appends another dataset with the same image shape and class count.
    pub fn extend(&mut self, other: &LabeledDataset) -> Result<()> {
        if other.dims != self.dims || other.class_count != self.class_count {
            return Err(Error::input("datasets differ in image shape or class count"));
        }
        self.pixels.extend_from_slice(&other.pixels);
        self.labels.extend_from_slice(&other.labels);
        Ok(())
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.class_count];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [f32] {
        &mut self.pixels
    }
}
