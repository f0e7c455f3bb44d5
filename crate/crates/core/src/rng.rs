//! Seeded random streams.
//!
//! Every stochastic decision in the simulator draws from an [`RngStream`].
//! A stream is a PCG XSL-RR 128/64 generator expanded from a 64-bit seed.
//! Identical seeds give identical draw sequences within one build; nothing is
//! promised across implementations.
//!
//! Draw-order contract for one simulated step of one agent:
//!
//! 1. agent stream: exploration coin (one uniform draw)
//! 2. agent stream: action draw, only when needed (one uniform draw)
//! 3. environment stream: reward coin (one uniform draw)

use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::error::{Error, Result};

/// Offsets used to derive independent per-role streams from one run seed.
pub mod lanes {
    pub const FREEWILL_ENV: u64 = 0;
    pub const BASELINE_ENV: u64 = 0x9E37_79B9_7F4A_7C15;
    pub const FREEWILL_AGENT: u64 = 0xD1B5_4A32_D192_ED03;
    pub const BASELINE_AGENT: u64 = 0x94D0_49BB_1331_11EB;
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: Pcg64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: Pcg64::seed_from_u64(seed),
        }
    }

    /// Stream for one role of a run: the run seed xor-ed with a lane constant.
    pub fn for_lane(run_seed: u64, lane: u64) -> Self {
        Self::new(run_seed ^ lane)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` from a single uniform draw.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let i = (self.uniform() * n as f64) as usize;
        i.min(n - 1)
    }
}

/// Returns 1 with probability `p`, consuming exactly one uniform draw.
pub fn bernoulli(p: f64, rng: &mut RngStream) -> Result<u8> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    Ok(u8::from(rng.uniform() < p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..10_000 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn different_seeds_diverge() {
        let mut a = RngStream::new(1);
        let mut b = RngStream::new(2);
        let same = (0..100).filter(|_| a.uniform() == b.uniform()).count();
        assert!(same < 3);
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = RngStream::new(7);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn bernoulli_certain_and_impossible() {
        let mut r = RngStream::new(3);
        for _ in 0..100 {
            assert_eq!(bernoulli(1.0, &mut r).unwrap(), 1);
            assert_eq!(bernoulli(0.0, &mut r).unwrap(), 0);
        }
    }

    #[test]
    fn bernoulli_rejects_out_of_range() {
        let mut r = RngStream::new(3);
        assert!(bernoulli(1.5, &mut r).is_err());
        assert!(bernoulli(-0.1, &mut r).is_err());
        assert!(bernoulli(f64::NAN, &mut r).is_err());
    }

    #[test]
    fn bernoulli_monte_carlo() {
        let mut r = RngStream::new(11);
        let hits: u32 = (0..10_000)
            .map(|_| u32::from(bernoulli(0.8, &mut r).unwrap()))
            .sum();
        let mean = f64::from(hits) / 10_000.0;
        assert!((0.79..=0.81).contains(&mean), "mean {mean}");
    }

    #[test]
    fn bernoulli_consumes_one_draw() {
        let mut a = RngStream::new(5);
        let mut b = RngStream::new(5);
        bernoulli(0.3, &mut a).unwrap();
        b.uniform();
        assert_eq!(a.uniform(), b.uniform());
    }

    #[test]
    fn lanes_are_distinct_streams() {
        let mut fw = RngStream::for_lane(0, lanes::FREEWILL_ENV);
        let mut base = RngStream::for_lane(0, lanes::BASELINE_ENV);
        assert_ne!(fw.uniform(), base.uniform());
    }
}
