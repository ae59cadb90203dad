//! Deterministic PRNG used for dataset generation, weight init and shuffling.
//!
//! Byte-identical output across runs, platforms and thread counts is a hard
//! requirement for the dataset and training pipelines, so the generator is
//! pinned here rather than borrowed from a crate whose stream might change
//! between versions. The algorithm is fixed as a contract:
//!
//! * state seeding: SplitMix64 (Steele/Lea/Flood), one 64-bit seed expanded
//!   into the four xoshiro words;
//! * stream: xoshiro256** (Blackman/Vigna);
//! * bounded draw: `lo + next_u64() % width` (the modulo bias is below 1e-15
//!   for every range used here and the rule is part of the contract);
//! * gaussian draw: Box-Muller on two 53-bit uniforms.

/// SplitMix64 stream. Only used to expand seeds; kept public because tests
/// pin its reference output.
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// xoshiro256** seeded via SplitMix64.
#[derive(Clone)]
pub struct Xoshiro256StarStar {
    s: [u64; 4],
}

impl Xoshiro256StarStar {
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        Self {
            s: [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()],
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform draw from `lo..=hi` via the fixed modulo rule.
    pub fn next_range(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        let width = hi - lo + 1;
        lo + self.next_u64() % width
    }

    /// Uniform f64 in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller. Consumes two uniforms per call; no
    /// spare is cached so the stream position stays easy to reason about.
    pub fn next_gaussian(&mut self) -> f64 {
        // u1 is kept away from zero so ln() stays finite.
        let u1 = (self.next_u64() >> 11).wrapping_add(1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle, descending index order.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_range(0, i as u64) as usize;
            items.swap(i, j);
        }
    }
}
