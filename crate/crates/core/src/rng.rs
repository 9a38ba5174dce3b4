//! Deterministic random generator used everywhere randomness is needed.
//!
//! The generator is xoshiro256** with its four state words initialized from
//! the seed by splitmix64, so a 64-bit seed fully determines every matrix,
//! straggler draw and shuffle transcript. Both algorithms are fixed here
//! bit-exactly; payloads reproduce across platforms and implementations.

/// splitmix64 step: advances `state` and returns the mixed output.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// xoshiro256** seeded via splitmix64.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetRng {
    s: [u64; 4],
}

impl DetRng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        DetRng { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1]
            .wrapping_mul(5)
            .rotate_left(7)
            .wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform draw from (0, 1]: the top 53 bits give a value in [0, 1),
    /// reflected so the open end is at zero (log of the result is finite).
    pub fn next_open01(&mut self) -> f64 {
        let u = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        1.0 - u
    }

    /// Uniform field element, zero included; exact since 2^w divides 2^64.
    pub fn next_field(&mut self, width: crate::gf::FieldWidth) -> u16 {
        (self.next_u64() & width.mask() as u64) as u16
    }
}
