#![allow(dead_code)]

use fedcross_core::data::{make_federation, ClientDataset, ShiftSpec};
use fedcross_core::nn::{Batch, ModelSpec, ParameterVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_batch(r: &mut ChaCha8Rng, features: usize, batch: usize, pixels: usize) -> Batch {
    let inputs = (0..batch * pixels * features).map(|_| r.gen_range(-2.0..2.0)).collect();
    let mut targets: Vec<u8> = (0..batch * pixels).map(|_| r.gen_range(0..2)).collect();
    targets[0] = 1;
    Batch::new(batch, pixels, features, inputs, targets).unwrap()
}

/// Parameters with every entry drawn from U(-1, 1) (norm scales around 1).
pub fn random_params(r: &mut ChaCha8Rng, spec: &ModelSpec) -> ParameterVector {
    let base = spec.init_params(0).unwrap();
    let values = base
        .layout()
        .slots()
        .iter()
        .flat_map(|s| {
            let scale = s.name.ends_with(".scale");
            (0..s.len()).map(move |_| scale).collect::<Vec<_>>()
        })
        .map(|scale| if scale { r.gen_range(0.5..1.5) } else { r.gen_range(-1.0..1.0) })
        .collect();
    base.with_values(values).unwrap()
}

pub fn non_iid(sizes: &[usize], seed: u64) -> Vec<ClientDataset> {
    make_federation(sizes, &ShiftSpec::strongly_non_iid(sizes.len()), 8, 8, seed).unwrap()
}
