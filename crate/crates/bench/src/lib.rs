//! Fixed workloads for the benchmarks under `benches/`.

use opcalc_core::{tensor_network, MultiTensor, Primitive, Program};

/// Deterministic weights in `[-1, 1)` from a linear congruential sequence.
fn weights(n: usize, seed: &mut u64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (*seed >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect()
}

/// Dense tanh network with the given layer widths.
pub fn network(widths: &[usize]) -> Program {
    let mut seed = 7;
    let layers = widths
        .windows(2)
        .map(|w| {
            let comps = vec![weights(w[1], &mut seed), weights(w[1] * w[0], &mut seed)];
            let layer = MultiTensor::from_components(w[1], w[0], comps).expect("layer shape");
            (layer, Primitive::tanh())
        })
        .collect();
    tensor_network(layers).expect("network")
}

/// Input point of dimension `m`.
pub fn point(m: usize) -> Vec<f64> {
    (0..m).map(|i| 0.1 + 0.05 * i as f64).collect()
}
