#![allow(dead_code)]

use epdiff::{FieldPair, GridSpec, ScalarField, State};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn field(g: GridSpec, rng: &mut ChaCha8Rng) -> ScalarField {
    ScalarField::from_index_fn(g, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn pair(g: GridSpec, rng: &mut ChaCha8Rng) -> FieldPair {
    FieldPair::new(field(g, rng), field(g, rng)).unwrap()
}

pub fn state(g: GridSpec, rng: &mut ChaCha8Rng) -> State {
    State::from_velocity(pair(g, rng), 0.0).unwrap()
}

/// Grid sizes, α and an RNG seed.
pub fn grids(max: usize) -> impl Strategy<Value = (GridSpec, u64)> {
    (3..=max, 3..=max, 0.05f64..2.0, any::<u64>())
        .prop_map(|(k, j, a, seed)| (GridSpec::new(k, j, a).unwrap(), seed))
}
