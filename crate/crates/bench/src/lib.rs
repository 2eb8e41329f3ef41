//! Benchmark fixtures shared by the criterion targets.

use icbell_core::oracle::{random_biases, random_protocol, trial_rng};
use icbell_core::{BiasTable, NsBox, Protocol};

/// Seeded random protocol and box for `n` inputs over `d` symbols.
pub fn fixture(n: usize, d: usize, seed: u64) -> (Protocol, BiasTable, NsBox) {
    let mut rng = trial_rng(seed, 0);
    let p = random_protocol(&mut rng, n, d);
    let e = random_biases(&mut rng, n, n, d);
    let bx = NsBox::from_biases(&e).expect("random biases are valid");
    (p, e, bx)
}
