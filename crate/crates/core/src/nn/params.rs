use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// One named block inside a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSlot {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    /// Normalization parameters stay local to each client under FedBN.
    pub is_norm: bool,
}

impl LayerSlot {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Ordered registry of the blocks making up a [`ParameterVector`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    slots: Vec<LayerSlot>,
    total: usize,
}

impl Layout {
    /// Builds a contiguous layout from `(name, shape, is_norm)` triples.
    pub fn new<I, S>(blocks: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<usize>, bool)>,
        S: Into<String>,
    {
        let mut offset = 0;
        let slots = blocks
            .into_iter()
            .map(|(name, shape, is_norm)| {
                let slot = LayerSlot { name: name.into(), shape, offset, is_norm };
                offset += slot.len();
                slot
            })
            .collect();
        Layout { slots, total: offset }
    }

    /// A single unnamed, non-normalization block of `len` values.
    pub fn flat(len: usize) -> Self {
        Layout::new([("theta", vec![len], false)])
    }

    pub fn slots(&self) -> &[LayerSlot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn slot(&self, name: &str) -> Option<&LayerSlot> {
        self.slots.iter().find(|s| s.name == name)
    }

    /// Per-value flag: true where the value belongs to a normalization layer.
    pub fn norm_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.total];
        for slot in self.slots.iter().filter(|s| s.is_norm) {
            mask[slot.range()].iter_mut().for_each(|m| *m = true);
        }
        mask
    }
}

/// Flat array of model parameters plus the layout describing it.
///
/// Values are always finite; every constructor and arithmetic helper checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterVector {
    values: Vec<f64>,
    layout: Arc<Layout>,
}

impl PartialEq for ParameterVector {
    fn eq(&self, other: &Self) -> bool {
        self.same_layout(other) && self.values == other.values
    }
}

impl ParameterVector {
    pub fn new(layout: Arc<Layout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return config(format!(
                "layout describes {} values but {} were given",
                layout.len(),
                values.len()
            ));
        }
        check_finite(&values)?;
        Ok(ParameterVector { values, layout })
    }

    pub fn zeros(layout: Arc<Layout>) -> Self {
        ParameterVector { values: vec![0.0; layout.len()], layout }
    }

    /// Unstructured vector, convenient for toy losses.
    pub fn from_flat(values: Vec<f64>) -> Result<Self> {
        let layout = Arc::new(Layout::flat(values.len()));
        ParameterVector::new(layout, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slot_values(&self, name: &str) -> Option<&[f64]> {
        self.layout.slot(name).map(|s| &self.values[s.range()])
    }

    pub fn same_layout(&self, other: &ParameterVector) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout
    }

    pub fn ensure_same_layout(&self, other: &ParameterVector) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            config("parameter layouts differ")
        }
    }

    /// Replaces the values, keeping the layout. Rejects non-finite input.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        ParameterVector::new(self.layout.clone(), values)
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dot(&self, other: &ParameterVector) -> Result<f64> {
        self.ensure_same_layout(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self + scale * other`.
    pub fn axpy(&self, scale: f64, other: &ParameterVector) -> Result<Self> {
        self.ensure_same_layout(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        self.with_values(values)
    }

    pub fn sub(&self, other: &ParameterVector) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, factor: f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|v| v * factor).collect())
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &ParameterVector) -> Result<f64> {
        self.ensure_same_layout(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Numerical(format!("non-finite value at index {i}"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> Arc<Layout> {
        Arc::new(Layout::new([
            ("norm.scale", vec![2], true),
            ("dense.weight", vec![2, 3], false),
            ("dense.bias", vec![2], false),
        ]))
    }

    #[test]
    fn extents_cover_values() {
        let l = layout();
        assert_eq!(l.len(), 10);
        assert_eq!(l.slots()[2].range(), 8..10);
        let mask = l.norm_mask();
        assert_eq!(mask.iter().filter(|m| **m).count(), 2);
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        assert!(matches!(ParameterVector::new(layout(), vec![0.0; 9]), Err(Error::Config(_))));
        let mut v = vec![0.0; 10];
        v[3] = f64::NAN;
        assert!(matches!(ParameterVector::new(layout(), v), Err(Error::Numerical(_))));
    }

    #[test]
    fn structurally_equal_layouts_combine() {
        let a = ParameterVector::zeros(layout());
        let b = ParameterVector::zeros(layout());
        assert!(a.axpy(1.0, &b).is_ok());
        let c = ParameterVector::from_flat(vec![0.0; 10]).unwrap();
        assert!(matches!(a.axpy(1.0, &c), Err(Error::Config(_))));
    }
}
