use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::seed;

/// Per-client transform of the synthetic images.
///
/// `raw` images have background 0 and foreground 1 with a blurred edge.
/// Observed intensity is `scale * (raw + noise) + offset`, and the ellipse
/// axis ratio of the foreground is `shape`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub offset: f64,
    pub scale: f64,
    pub shape: f64,
    pub noise_sd: f64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        ShiftSpec { offset: 0.0, scale: 1.0, shape: 1.0, noise_sd: 0.2 }
    }
}

impl ShiftSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) {
            return input("shift scale must be positive");
        }
        if !(self.shape > 0.0) {
            return input("shape parameter must be positive");
        }
        if !(self.noise_sd >= 0.0) {
            return input("noise sd must be non-negative");
        }
        if !self.offset.is_finite() || !self.scale.is_finite() || !self.noise_sd.is_finite() {
            return input("shift parameters must be finite");
        }
        Ok(())
    }

    /// Strongly non-iid preset: offsets spread evenly over [-3, +3] and
    /// axis ratios spread geometrically over [0.5, 2] (one value per client).
    pub fn strongly_non_iid(clients: usize) -> Vec<ShiftSpec> {
        (0..clients)
            .map(|k| {
                let t = if clients == 1 { 0.5 } else { k as f64 / (clients - 1) as f64 };
                ShiftSpec {
                    offset: -3.0 + 6.0 * t,
                    shape: 0.5 * 4f64.powf(t),
                    ..ShiftSpec::default()
                }
            })
            .collect()
    }

    pub fn iid(clients: usize) -> Vec<ShiftSpec> {
        vec![ShiftSpec::default(); clients]
    }
}

/// Index partition of one client's samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SplitTag::Train),
            "val" => Some(SplitTag::Val),
            "test" => Some(SplitTag::Test),
            _ => None,
        }
    }
}

impl Split {
    pub fn tag_of(&self, idx: usize) -> Option<SplitTag> {
        if self.train.contains(&idx) {
            Some(SplitTag::Train)
        } else if self.val.contains(&idx) {
            Some(SplitTag::Val)
        } else if self.test.contains(&idx) {
            Some(SplitTag::Test)
        } else {
            None
        }
    }
}

/// One client's local images, masks and split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientDataset {
    pub client_id: usize,
    pub height: usize,
    pub width: usize,
    pub images: Vec<Vec<f64>>,
    pub masks: Vec<Vec<u8>>,
    pub split: Split,
}

impl ClientDataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

/// Sizes the 60/10/30 train/val/test split: train and val are rounded to the
/// nearest integer and test takes the remainder.
pub fn split_dataset(n: usize) -> Result<Split> {
    if n < 10 {
        return input(format!("need at least 10 samples to split, got {n}"));
    }
    let train = (0.6 * n as f64).round() as usize;
    let val = (0.1 * n as f64).round() as usize;
    Ok(Split {
        train: (0..train).collect(),
        val: (train..train + val).collect(),
        test: (train + val..n).collect(),
    })
}

/// Dataset-size weights `w_k = n_k / sum n_i`.
pub fn client_weights(train_sizes: &[usize]) -> Result<Vec<f64>> {
    if train_sizes.is_empty() {
        return input("no clients");
    }
    if train_sizes.contains(&0) {
        return input("client sizes must be positive");
    }
    let total: usize = train_sizes.iter().sum();
    Ok(train_sizes.iter().map(|&n| n as f64 / total as f64).collect())
}

/// Generates one dataset per client. Pure function of its arguments.
pub fn make_federation(
    sizes: &[usize],
    shifts: &[ShiftSpec],
    height: usize,
    width: usize,
    seed: u64,
) -> Result<Vec<ClientDataset>> {
    if sizes.is_empty() {
        return input("federation needs at least one client");
    }
    if shifts.len() != sizes.len() {
        return input("one shift spec per client is required");
    }
    if height < 4 || width < 4 {
        return input("images must be at least 4x4");
    }
    for s in shifts {
        s.validate()?;
    }
    sizes
        .iter()
        .zip(shifts)
        .enumerate()
        .map(|(k, (&n, shift))| {
            let split = split_dataset(n)?;
            let (images, masks) = (0..n)
                .map(|i| {
                    let mut rng = seed::rng(&[seed::tag::IMAGE, seed, k as u64, i as u64]);
                    render(&mut rng, shift, height, width)
                })
                .unzip();
            Ok(ClientDataset { client_id: k, height, width, images, masks, split })
        })
        .collect()
}

const EDGE_SHARPNESS: f64 = 6.0;

fn render<R: Rng>(rng: &mut R, shift: &ShiftSpec, height: usize, width: usize) -> (Vec<f64>, Vec<u8>) {
    let (h, w) = (height as f64, width as f64);
    let cy = rng.gen_range(0.35..0.65) * h;
    let cx = rng.gen_range(0.35..0.65) * w;
    let radius = rng.gen_range(0.18..0.30) * h.min(w);
    let ry = radius * shift.shape.sqrt();
    let rx = radius / shift.shape.sqrt();
    let angle = rng.gen_range(0.0..std::f64::consts::PI);
    let (sin, cos) = angle.sin_cos();

    let mut image = Vec::with_capacity(height * width);
    let mut mask = Vec::with_capacity(height * width);
    let mut nearest = (f64::INFINITY, 0);
    for y in 0..height {
        for x in 0..width {
            let dy = y as f64 + 0.5 - cy;
            let dx = x as f64 + 0.5 - cx;
            let u = (dx * cos + dy * sin) / rx;
            let v = (-dx * sin + dy * cos) / ry;
            let d = (u * u + v * v).sqrt();
            if d < nearest.0 {
                nearest = (d, mask.len());
            }
            let raw = 1.0 / (1.0 + (-(1.0 - d) * EDGE_SHARPNESS).exp());
            let noise = shift.noise_sd * rng.sample::<f64, _>(StandardNormal);
            image.push(shift.scale * (raw + noise) + shift.offset);
            mask.push(u8::from(d < 1.0));
        }
    }
    if !mask.contains(&1) {
        mask[nearest.1] = 1;
    }
    (image, mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_splits() {
        for (n, expect) in [(32, (19, 3, 10)), (80, (48, 8, 24)), (50, (30, 5, 15)), (204, (122, 20, 62)), (10, (6, 1, 3))] {
            let s = split_dataset(n).unwrap();
            assert_eq!((s.train.len(), s.val.len(), s.test.len()), expect, "n = {n}");
        }
        assert!(split_dataset(9).is_err());
    }

    #[test]
    fn weights() {
        let w = client_weights(&[19, 48, 30, 122]).unwrap();
        let expect = [19.0 / 219.0, 48.0 / 219.0, 30.0 / 219.0, 122.0 / 219.0];
        assert_eq!(w, expect);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(client_weights(&[5, 5]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(client_weights(&[7]).unwrap(), vec![1.0]);
        assert!(client_weights(&[]).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let shifts = ShiftSpec::strongly_non_iid(3);
        let a = make_federation(&[12, 10, 15], &shifts, 16, 16, 9).unwrap();
        let b = make_federation(&[12, 10, 15], &shifts, 16, 16, 9).unwrap();
        assert_eq!(a, b);
        let c = make_federation(&[12, 10, 15], &shifts, 16, 16, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn every_mask_has_foreground() {
        let shifts = ShiftSpec::strongly_non_iid(4);
        let fed = make_federation(&[20; 4], &shifts, 8, 8, 1).unwrap();
        for c in &fed {
            assert!(c.masks.iter().all(|m| m.contains(&1)));
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(make_federation(&[], &[], 16, 16, 0).is_err());
        assert!(make_federation(&[10], &[], 16, 16, 0).is_err());
        let bad = ShiftSpec { scale: 0.0, ..ShiftSpec::default() };
        assert!(make_federation(&[10], &[bad], 16, 16, 0).is_err());
        assert!(make_federation(&[9], &[ShiftSpec::default()], 16, 16, 0).is_err());
    }
}
