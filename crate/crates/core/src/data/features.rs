use super::generate::ClientDataset;
use crate::error::{input, Result};
use crate::nn::Batch;

/// Number of per-pixel features for a window of the given radius: the
/// (2r+1)^2 window plus one image-level context value.
pub fn window_features(radius: usize) -> usize {
    (2 * radius + 1).pow(2) + 1
}

/// Flattened (2r+1)x(2r+1) intensity window around every pixel, row-major,
/// with edge pixels replicated outside the image, followed by the mean
/// intensity of the whole image.
pub fn pixel_features(image: &[f64], height: usize, width: usize, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mean = image.iter().sum::<f64>() / image.len() as f64;
    let mut out = Vec::with_capacity(height * width * window_features(radius));
    for y in 0..height as isize {
        for x in 0..width as isize {
            for dy in -r..=r {
                let yy = (y + dy).clamp(0, height as isize - 1) as usize;
                for dx in -r..=r {
                    let xx = (x + dx).clamp(0, width as isize - 1) as usize;
                    out.push(image[yy * width + xx]);
                }
            }
            out.push(mean);
        }
    }
    out
}

/// Precomputed per-sample features of one client.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    pub pixels: usize,
    pub features: usize,
    samples: Vec<Vec<f64>>,
    masks: Vec<Vec<u8>>,
}

impl FeatureCache {
    pub fn new(data: &ClientDataset, radius: usize) -> Self {
        FeatureCache {
            pixels: data.pixels(),
            features: window_features(radius),
            samples: data
                .images
                .iter()
                .map(|img| pixel_features(img, data.height, data.width, radius))
                .collect(),
            masks: data.masks.clone(),
        }
    }

    /// Concatenates several caches (pooled data); sample indices follow input order.
    pub fn pooled<'a>(caches: impl IntoIterator<Item = &'a FeatureCache>) -> Result<Self> {
        let mut iter = caches.into_iter();
        let first = match iter.next() {
            Some(c) => c.clone(),
            None => return input("nothing to pool"),
        };
        iter.try_fold(first, |mut acc, c| {
            if c.pixels != acc.pixels || c.features != acc.features {
                return input("pooled clients must share image geometry");
            }
            acc.samples.extend(c.samples.iter().cloned());
            acc.masks.extend(c.masks.iter().cloned());
            Ok(acc)
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn batch(&self, indices: &[usize]) -> Result<Batch> {
        let mut inputs = Vec::with_capacity(indices.len() * self.pixels * self.features);
        let mut targets = Vec::with_capacity(indices.len() * self.pixels);
        for &i in indices {
            if i >= self.samples.len() {
                return input(format!("sample index {i} out of range"));
            }
            inputs.extend_from_slice(&self.samples[i]);
            targets.extend_from_slice(&self.masks[i]);
        }
        Batch::new(indices.len(), self.pixels, self.features, inputs, targets)
    }

    pub fn mask(&self, i: usize) -> &[u8] {
        &self.masks[i]
    }
}
