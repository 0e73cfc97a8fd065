use crate::error::{input, Error, Result};

/// Dice similarity `2|P & G| / (|P| + |G|)`; two empty masks score 1.
pub fn dice(pred: &[u8], gt: &[u8]) -> Result<f64> {
    if pred.len() != gt.len() {
        return input("mask shapes differ");
    }
    let (mut inter, mut sum) = (0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gt) {
        let (p, g) = (p != 0, g != 0);
        inter += usize::from(p && g);
        sum += usize::from(p) + usize::from(g);
    }
    Ok(if sum == 0 { 1.0 } else { 2.0 * inter as f64 / sum as f64 })
}

/// Foreground pixels with at least one 4-neighbour in the background.
/// Pixels outside the image count as background.
pub fn boundary(mask: &[u8], height: usize, width: usize) -> Vec<bool> {
    let at = |y: isize, x: isize| -> bool {
        y >= 0 && x >= 0 && (y as usize) < height && (x as usize) < width && mask[y as usize * width + x as usize] != 0
    };
    let mut out = vec![false; height * width];
    for y in 0..height as isize {
        for x in 0..width as isize {
            if at(y, x) && !(at(y - 1, x) && at(y + 1, x) && at(y, x - 1) && at(y, x + 1)) {
                out[y as usize * width + x as usize] = true;
            }
        }
    }
    out
}

/// Exact 1D squared distance transform (lower envelope of parabolas) with
/// sample spacing `step`. Infinite entries are not sites.
fn dt1d(f: &[f64], step: f64) -> Vec<f64> {
    let n = f.len();
    let s2 = step * step;
    let sites: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if sites.is_empty() {
        return vec![f64::INFINITY; n];
    }
    let key = |q: usize| f[q] + s2 * (q * q) as f64;
    let cross = |q: usize, v: usize| (key(q) - key(v)) / (2.0 * s2 * (q as f64 - v as f64));
    let mut hull: Vec<usize> = Vec::with_capacity(sites.len());
    let mut bounds: Vec<f64> = Vec::with_capacity(sites.len());
    for &q in &sites {
        loop {
            match hull.last() {
                Some(&v) => {
                    let s = cross(q, v);
                    if s <= *bounds.last().unwrap() {
                        hull.pop();
                        bounds.pop();
                    } else {
                        hull.push(q);
                        bounds.push(s);
                        break;
                    }
                }
                None => {
                    hull.push(q);
                    bounds.push(f64::NEG_INFINITY);
                    break;
                }
            }
        }
    }
    let mut out = vec![0.0; n];
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        while k + 1 < hull.len() && bounds[k + 1] < p as f64 {
            k += 1;
        }
        let v = hull[k];
        let d = p as f64 - v as f64;
        *o = s2 * d * d + f[v];
    }
    out
}

/// Squared Euclidean distance from every pixel to the nearest `sites` pixel.
pub(crate) fn squared_distance_map(sites: &[bool], height: usize, width: usize, spacing: (f64, f64)) -> Vec<f64> {
    let mut cols = vec![0.0; height * width];
    let mut column = vec![0.0; height];
    for x in 0..width {
        for y in 0..height {
            column[y] = if sites[y * width + x] { 0.0 } else { f64::INFINITY };
        }
        for (y, d) in dt1d(&column, spacing.0).into_iter().enumerate() {
            cols[y * width + x] = d;
        }
    }
    let mut out = vec![0.0; height * width];
    for y in 0..height {
        let row = &cols[y * width..(y + 1) * width];
        out[y * width..(y + 1) * width].copy_from_slice(&dt1d(row, spacing.1));
    }
    out
}

/// Average symmetric surface distance between mask boundaries, in the units
/// of `spacing = (row spacing, column spacing)`.
pub fn asd(pred: &[u8], gt: &[u8], height: usize, width: usize, spacing: (f64, f64)) -> Result<f64> {
    if pred.len() != gt.len() || pred.len() != height * width {
        return input("mask shapes differ");
    }
    if !(spacing.0 > 0.0 && spacing.1 > 0.0) {
        return input("spacing must be positive");
    }
    if !pred.iter().any(|&p| p != 0) || !gt.iter().any(|&g| g != 0) {
        return Err(Error::UndefinedMetric("surface distance of an empty mask".into()));
    }
    let bp = boundary(pred, height, width);
    let bg = boundary(gt, height, width);
    let to_g = squared_distance_map(&bg, height, width, spacing);
    let to_p = squared_distance_map(&bp, height, width, spacing);
    let mean_dist = |from: &[bool], dist: &[f64]| {
        let (sum, n) = from
            .iter()
            .zip(dist)
            .filter(|(b, _)| **b)
            .fold((0.0, 0usize), |(s, n), (_, d)| (s + d.sqrt(), n + 1));
        sum / n as f64
    };
    Ok(0.5 * (mean_dist(&bp, &to_g) + mean_dist(&bg, &to_p)))
}
