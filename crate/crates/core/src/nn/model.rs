use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{check_finite, Layout, ParameterVector};
use crate::error::{config, input, Result};
use crate::seed;

/// Smoothing constant of the soft Dice loss (numerator and denominator).
pub const DICE_SMOOTH: f64 = 1e-5;

/// Per-pixel MLP: optional per-feature affine normalization before any dense
/// layer, tanh hidden layers and a softmax over `classes` outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    /// Position `p` places an affine layer in front of dense layer `p`
    /// (0 = on the input features, `p` = on the output of hidden layer `p`).
    pub norm_positions: Vec<usize>,
}

impl ModelSpec {
    /// Reference segmenter: two hidden layers, input normalization.
    pub fn reference(input_dim: usize) -> Self {
        ModelSpec { input_dim, hidden: vec![16, 16], classes: 2, norm_positions: vec![0] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden.iter().any(|&h| h == 0) {
            return config("layer widths must be positive");
        }
        if self.classes < 2 {
            return config("at least two classes are required");
        }
        if self.norm_positions.is_empty() {
            return config("model needs at least one normalization layer");
        }
        if let Some(&p) = self.norm_positions.iter().find(|&&p| p > self.hidden.len()) {
            return config(format!("normalization position {p} is past the last hidden layer"));
        }
        Ok(())
    }

    fn depth(&self) -> usize {
        self.hidden.len() + 1
    }

    /// Width of the activation entering dense layer `i`.
    fn width_in(&self, i: usize) -> usize {
        if i == 0 {
            self.input_dim
        } else {
            self.hidden[i - 1]
        }
    }

    fn width_out(&self, i: usize) -> usize {
        if i < self.hidden.len() {
            self.hidden[i]
        } else {
            self.classes
        }
    }

    fn has_norm(&self, i: usize) -> bool {
        self.norm_positions.contains(&i)
    }

    pub fn layout(&self) -> Layout {
        let mut blocks = Vec::new();
        for i in 0..self.depth() {
            let (w_in, w_out) = (self.width_in(i), self.width_out(i));
            if self.has_norm(i) {
                blocks.push((format!("norm{i}.scale"), vec![w_in], true));
                blocks.push((format!("norm{i}.shift"), vec![w_in], true));
            }
            blocks.push((format!("dense{i}.weight"), vec![w_out, w_in], false));
            blocks.push((format!("dense{i}.bias"), vec![w_out], false));
        }
        Layout::new(blocks)
    }

    /// Xavier-uniform weights, zero biases, identity normalization.
    pub fn init_params(&self, seed: u64) -> Result<ParameterVector> {
        self.validate()?;
        let layout = Arc::new(self.layout());
        let mut rng = seed::rng(&[seed::tag::INIT, seed]);
        let mut values = vec![0.0; layout.len()];
        for slot in layout.slots() {
            let range = slot.range();
            if slot.name.ends_with(".scale") {
                values[range].iter_mut().for_each(|v| *v = 1.0);
            } else if slot.name.ends_with(".weight") {
                let bound = (6.0 / (slot.shape[0] + slot.shape[1]) as f64).sqrt();
                values[range].iter_mut().for_each(|v| *v = rng.gen_range(-bound..bound));
            }
        }
        ParameterVector::new(layout, values)
    }

    fn check_params(&self, params: &ParameterVector) -> Result<()> {
        self.validate()?;
        if **params.layout() != self.layout() {
            return config("parameter layout does not match the model spec");
        }
        Ok(())
    }
}

/// Inputs (batch x pixels x features) with binary per-pixel targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub batch: usize,
    pub pixels: usize,
    pub features: usize,
    inputs: Vec<f64>,
    targets: Vec<u8>,
}

impl Batch {
    pub fn new(
        batch: usize,
        pixels: usize,
        features: usize,
        inputs: Vec<f64>,
        targets: Vec<u8>,
    ) -> Result<Self> {
        if inputs.len() != batch * pixels * features {
            return input("input tensor size does not match batch x pixels x features");
        }
        if targets.len() != batch * pixels {
            return input("target tensor size does not match batch x pixels");
        }
        check_finite(&inputs)?;
        if targets.iter().any(|&t| t > 1) {
            return input("targets must be binary");
        }
        Ok(Batch { batch, pixels, features, inputs, targets })
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[u8] {
        &self.targets
    }

    pub fn rows(&self) -> usize {
        self.batch * self.pixels
    }

    pub fn is_empty(&self) -> bool {
        self.rows() == 0
    }
}

/// Per-pixel class probabilities, shape batch x pixels x classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    pub batch: usize,
    pub pixels: usize,
    pub classes: usize,
    pub values: Vec<f64>,
}

impl ProbMap {
    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.classes..(row + 1) * self.classes]
    }

    /// Foreground (class 1) probability of every pixel.
    pub fn foreground(&self) -> Vec<f64> {
        self.values.chunks(self.classes).map(|r| r[1]).collect()
    }

    /// Argmax mask; ties resolve to background.
    pub fn hard_mask(&self) -> Vec<u8> {
        self.values
            .chunks(self.classes)
            .map(|r| {
                let best = r
                    .iter()
                    .enumerate()
                    .fold((0, r[0]), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
                u8::from(best.0 == 1)
            })
            .collect()
    }
}

/// Proximal anchor used by FedProx: adds `mu/2 * ||params - anchor||^2`.
#[derive(Debug, Clone, Copy)]
pub struct Prox<'a> {
    pub mu: f64,
    pub anchor: &'a ParameterVector,
}

struct Tape {
    /// Activation entering layer i before its normalization.
    pre_norm: Vec<Vec<f64>>,
    /// Activation entering dense layer i.
    dense_in: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

fn run_layers(spec: &ModelSpec, params: &[f64], layout: &Layout, x: &[f64], rows: usize) -> Tape {
    let depth = spec.depth();
    let mut pre_norm = Vec::with_capacity(depth);
    let mut dense_in = Vec::with_capacity(depth);
    let mut act = x.to_vec();
    for i in 0..depth {
        let (w_in, w_out) = (spec.width_in(i), spec.width_out(i));
        let normed = if spec.has_norm(i) {
            let scale = &params[layout.slot(&format!("norm{i}.scale")).unwrap().range()];
            let shift = &params[layout.slot(&format!("norm{i}.shift")).unwrap().range()];
            let mut out = act.clone();
            for row in out.chunks_mut(w_in) {
                for ((v, s), b) in row.iter_mut().zip(scale).zip(shift) {
                    *v = *v * s + b;
                }
            }
            out
        } else {
            act.clone()
        };
        let weight = &params[layout.slot(&format!("dense{i}.weight")).unwrap().range()];
        let bias = &params[layout.slot(&format!("dense{i}.bias")).unwrap().range()];
        let mut out = vec![0.0; rows * w_out];
        for (a, o) in normed.chunks(w_in).zip(out.chunks_mut(w_out)) {
            for (k, ok) in o.iter_mut().enumerate() {
                let w = &weight[k * w_in..(k + 1) * w_in];
                *ok = bias[k] + w.iter().zip(a).map(|(w, a)| w * a).sum::<f64>();
            }
        }
        if i + 1 < depth {
            out.iter_mut().for_each(|v| *v = v.tanh());
        }
        pre_norm.push(act);
        dense_in.push(normed);
        act = out;
    }
    Tape { pre_norm, dense_in, logits: act }
}

fn softmax_rows(logits: &[f64], classes: usize) -> Vec<f64> {
    let mut out = logits.to_vec();
    for row in out.chunks_mut(classes) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Softmax class probabilities for every pixel of the batch.
pub fn forward(spec: &ModelSpec, params: &ParameterVector, batch: &Batch) -> Result<ProbMap> {
    spec.check_params(params)?;
    if batch.features != spec.input_dim {
        return config(format!(
            "batch has {} features, model expects {}",
            batch.features, spec.input_dim
        ));
    }
    let tape = run_layers(spec, params.values(), params.layout(), batch.inputs(), batch.rows());
    Ok(ProbMap {
        batch: batch.batch,
        pixels: batch.pixels,
        classes: spec.classes,
        values: softmax_rows(&tape.logits, spec.classes),
    })
}

/// Mean cross-entropy plus soft Dice loss of the foreground class.
pub fn segmentation_loss(probs: &ProbMap, targets: &[u8]) -> f64 {
    let rows = probs.batch * probs.pixels;
    let ce = (0..rows)
        .map(|r| -probs.row(r)[targets[r] as usize].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / rows as f64;
    ce + dice_loss(&probs.foreground(), targets)
}

fn dice_terms(fg: &[f64], targets: &[u8]) -> (f64, f64) {
    let mut inter = 0.0;
    let mut denom = 0.0;
    for (p, &t) in fg.iter().zip(targets) {
        let g = t as f64;
        inter += p * g;
        denom += p + g;
    }
    (inter, denom)
}

fn dice_loss(fg: &[f64], targets: &[u8]) -> f64 {
    let (inter, denom) = dice_terms(fg, targets);
    1.0 - (2.0 * inter + DICE_SMOOTH) / (denom + DICE_SMOOTH)
}

/// Loss (CE + soft Dice, plus the proximal term when given) and its exact gradient.
pub fn loss_and_grad(
    spec: &ModelSpec,
    params: &ParameterVector,
    batch: &Batch,
    prox: Option<Prox<'_>>,
) -> Result<(f64, ParameterVector)> {
    if batch.is_empty() {
        return input("empty batch");
    }
    spec.check_params(params)?;
    if batch.features != spec.input_dim {
        return config("batch feature count does not match the model");
    }
    if let Some(p) = &prox {
        params.ensure_same_layout(p.anchor)?;
    }
    let layout = params.layout().clone();
    let theta = params.values();
    let rows = batch.rows();
    let classes = spec.classes;
    let tape = run_layers(spec, theta, &layout, batch.inputs(), rows);

    // log-softmax keeps the CE term finite for saturated logits
    let mut probs = vec![0.0; rows * classes];
    let mut ce = 0.0;
    for (r, (z, p)) in tape.logits.chunks(classes).zip(probs.chunks_mut(classes)).enumerate() {
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for (pc, zc) in p.iter_mut().zip(z) {
            *pc = (zc - lse).exp();
        }
        ce -= z[batch.targets()[r] as usize] - lse;
    }
    let n = rows as f64;
    ce /= n;

    let fg: Vec<f64> = probs.chunks(classes).map(|p| p[1]).collect();
    let (inter, denom) = dice_terms(&fg, batch.targets());
    let dice = (2.0 * inter + DICE_SMOOTH) / (denom + DICE_SMOOTH);
    let mut loss = ce + 1.0 - dice;

    // dL/dlogits
    let mut g = vec![0.0; rows * classes];
    for r in 0..rows {
        let p = &probs[r * classes..(r + 1) * classes];
        let t = batch.targets()[r] as usize;
        let d_fg = -(2.0 * batch.targets()[r] as f64 - dice) / (denom + DICE_SMOOTH);
        for c in 0..classes {
            let onehot = if c == t { 1.0 } else { 0.0 };
            let dice_part = d_fg * p[1] * (if c == 1 { 1.0 } else { 0.0 } - p[c]);
            g[r * classes + c] = (p[c] - onehot) / n + dice_part;
        }
    }

    let mut grad = vec![0.0; theta.len()];
    for i in (0..spec.depth()).rev() {
        let (w_in, w_out) = (spec.width_in(i), spec.width_out(i));
        let w_range = layout.slot(&format!("dense{i}.weight")).unwrap().range();
        let b_range = layout.slot(&format!("dense{i}.bias")).unwrap().range();
        let weight = &theta[w_range.clone()];
        let a_in = &tape.dense_in[i];
        let mut g_in = vec![0.0; rows * w_in];
        {
            let (head, tail) = grad.split_at_mut(b_range.start);
            let gw = &mut head[w_range.clone()];
            let gb = &mut tail[..w_out];
            for r in 0..rows {
                let gr = &g[r * w_out..(r + 1) * w_out];
                let ar = &a_in[r * w_in..(r + 1) * w_in];
                let gir = &mut g_in[r * w_in..(r + 1) * w_in];
                for (k, &gk) in gr.iter().enumerate() {
                    if gk == 0.0 {
                        continue;
                    }
                    gb[k] += gk;
                    let wk = &weight[k * w_in..(k + 1) * w_in];
                    let gwk = &mut gw[k * w_in..(k + 1) * w_in];
                    for j in 0..w_in {
                        gwk[j] += gk * ar[j];
                        gir[j] += gk * wk[j];
                    }
                }
            }
        }
        if spec.has_norm(i) {
            let s_range = layout.slot(&format!("norm{i}.scale")).unwrap().range();
            let h_range = layout.slot(&format!("norm{i}.shift")).unwrap().range();
            let scale = &theta[s_range.clone()];
            let pre = &tape.pre_norm[i];
            for r in 0..rows {
                for j in 0..w_in {
                    let gij = g_in[r * w_in + j];
                    grad[s_range.start + j] += gij * pre[r * w_in + j];
                    grad[h_range.start + j] += gij;
                    g_in[r * w_in + j] = gij * scale[j];
                }
            }
        }
        if i > 0 {
            // pre_norm[i] is the tanh output of hidden layer i-1
            for (gv, h) in g_in.iter_mut().zip(&tape.pre_norm[i]) {
                *gv *= 1.0 - h * h;
            }
        }
        g = g_in;
    }

    if let Some(p) = prox {
        let mut sq = 0.0;
        for ((gr, t), a) in grad.iter_mut().zip(theta).zip(p.anchor.values()) {
            let d = t - a;
            sq += d * d;
            *gr += p.mu * d;
        }
        loss += 0.5 * p.mu * sq;
    }
    if !loss.is_finite() {
        return Err(crate::Error::Numerical("loss is not finite".into()));
    }
    Ok((loss, params.with_values(grad)?))
}

/// Loss only; shares the forward pass with [`loss_and_grad`].
pub fn loss(
    spec: &ModelSpec,
    params: &ParameterVector,
    batch: &Batch,
    prox: Option<Prox<'_>>,
) -> Result<f64> {
    if batch.is_empty() {
        return input("empty batch");
    }
    let probs = forward(spec, params, batch)?;
    let mut l = segmentation_loss(&probs, batch.targets());
    if let Some(p) = prox {
        let d = params.sub(p.anchor)?;
        l += 0.5 * p.mu * d.values().iter().map(|v| v * v).sum::<f64>();
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_batch(features: usize, batch: usize, pixels: usize, seed: u64) -> Batch {
        let mut rng = crate::seed::rng(&[99, seed]);
        let rows = batch * pixels;
        let inputs = (0..rows * features).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let targets = (0..rows).map(|_| rng.gen_range(0..2u8)).collect();
        Batch::new(batch, pixels, features, inputs, targets).unwrap()
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let spec = ModelSpec::reference(9);
        let params = ParameterVector::zeros(Arc::new(spec.layout()));
        let probs = forward(&spec, &params, &random_batch(9, 2, 5, 1)).unwrap();
        assert!(probs.values.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn rows_sum_to_one() {
        let spec = ModelSpec::reference(9);
        let params = spec.init_params(3).unwrap();
        let probs = forward(&spec, &params, &random_batch(9, 3, 7, 2)).unwrap();
        for r in 0..21 {
            assert!((probs.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn layout_mismatch_is_a_config_error() {
        let spec = ModelSpec::reference(9);
        let other = ModelSpec::reference(4).init_params(0).unwrap();
        let err = forward(&spec, &other, &random_batch(9, 1, 2, 0)).unwrap_err();
        assert!(matches!(err, crate::Error::Config(_)));
    }

    #[test]
    fn perfect_prediction_has_near_zero_loss() {
        // Feature = +1 on foreground, -1 on background; a huge output weight
        // saturates the softmax into one-hot predictions.
        let spec = ModelSpec { input_dim: 1, hidden: vec![], classes: 2, norm_positions: vec![0] };
        let layout = Arc::new(spec.layout());
        // norm0.scale, norm0.shift, dense0.weight (2x1), dense0.bias (2)
        let params = ParameterVector::new(layout, vec![1.0, 0.0, -40.0, 40.0, 0.0, 0.0]).unwrap();
        let targets = vec![1, 0, 0, 1, 1, 0];
        let inputs = targets.iter().map(|&t| if t == 1 { 1.0 } else { -1.0 }).collect();
        let batch = Batch::new(1, 6, 1, inputs, targets).unwrap();
        let (l, _) = loss_and_grad(&spec, &params, &batch, None).unwrap();
        assert!(l < 1e-9, "loss {l}");
    }

    #[test]
    fn prox_at_anchor_adds_nothing() {
        let spec = ModelSpec::reference(9);
        let params = spec.init_params(5).unwrap();
        let batch = random_batch(9, 2, 4, 5);
        let (l0, g0) = loss_and_grad(&spec, &params, &batch, None).unwrap();
        let prox = Prox { mu: 0.7, anchor: &params };
        let (l1, g1) = loss_and_grad(&spec, &params, &batch, Some(prox)).unwrap();
        assert_eq!(l0, l1);
        assert_eq!(g0, g1);
    }

    #[test]
    fn empty_batch_rejected() {
        let spec = ModelSpec::reference(9);
        let params = spec.init_params(0).unwrap();
        let batch = Batch::new(0, 4, 9, vec![], vec![]).unwrap();
        assert!(matches!(
            loss_and_grad(&spec, &params, &batch, None),
            Err(crate::Error::Input(_))
        ));
    }

    #[test]
    fn spec_without_norm_is_invalid() {
        let spec = ModelSpec { input_dim: 2, hidden: vec![3], classes: 2, norm_positions: vec![] };
        assert!(spec.validate().is_err());
    }
}
