//! Deterministic seed derivation. Every stochastic consumer draws from a
//! stream keyed by `(root seed, label, index)`, so adding a new consumer
//! never perturbs existing ones and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn derive_seed(root: u64, label: &str, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

pub fn rng_for(root: u64, label: &str, index: u64) -> Rng {
    Rng::from_seed(derive_seed(root, label, index))
}
