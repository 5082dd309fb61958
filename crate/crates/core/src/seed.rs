//! Deterministic seed derivation.

/// One round of SplitMix64.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random streams used by a run. Each gets an independent seed per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    GradientSet = 1,
    HessianSet = 2,
    Sketch = 3,
    Init = 4,
}

/// Seed for `(run_seed, k, stream, sub)`; `sub` separates e.g. layers.
pub fn derive(run_seed: u64, k: u64, stream: Stream, sub: u64) -> u64 {
    let mut h = splitmix64(run_seed);
    h = splitmix64(h ^ k);
    h = splitmix64(h ^ stream as u64);
    splitmix64(h ^ sub)
}
