//! Keyed pseudo-random draws. Every draw is a hash of the run seed, a
//! purpose string and the draw's coordinates, so draws are independent of
//! evaluation order and adding new draws never shifts existing ones.

use crate::hash::{tag, Hash};

pub fn draw(seed: u64, purpose: &str, keys: &[u64]) -> u64 {
    let mut buf = Vec::with_capacity(8 + purpose.len() + 1 + 8 * keys.len());
    buf.extend_from_slice(&seed.to_le_bytes());
    buf.extend_from_slice(purpose.as_bytes());
    buf.push(0);
    for k in keys {
        buf.extend_from_slice(&k.to_le_bytes());
    }
    Hash::tagged(tag::DRAW, &buf).prefix_u64()
}

/// Uniform in `[0, 1)`.
pub fn unit(seed: u64, purpose: &str, keys: &[u64]) -> f64 {
    (draw(seed, purpose, keys) >> 11) as f64 / (1u64 << 53) as f64
}

pub fn bernoulli(seed: u64, purpose: &str, keys: &[u64], p: f64) -> bool {
    unit(seed, purpose, keys) < p
}

/// Uniform in `[lo, hi]`.
pub fn range(seed: u64, purpose: &str, keys: &[u64], lo: u64, hi: u64) -> u64 {
    debug_assert!(lo <= hi);
    let span = hi - lo + 1;
    lo + ((draw(seed, purpose, keys) as u128 * span as u128) >> 64) as u64
}

/// Small deterministic stream generator for tests and fuzz drivers.
#[derive(Clone, Debug)]
pub struct Stream {
    seed: u64,
    purpose: &'static str,
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64, purpose: &'static str) -> Self {
        Stream { seed, purpose, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        draw(self.seed, self.purpose, &[self.counter])
    }

    /// Uniform in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    pub fn chance(&mut self, p: f64) -> bool {
        ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64) < p
    }

    pub fn pick<'a, T>(&mut self, xs: &'a [T]) -> Option<&'a T> {
        if xs.is_empty() {
            None
        } else {
            Some(&xs[self.below(xs.len() as u64) as usize])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyed_and_stable() {
        assert_eq!(draw(1, "x", &[2, 3]), draw(1, "x", &[2, 3]));
        assert_ne!(draw(1, "x", &[2, 3]), draw(1, "y", &[2, 3]));
        assert_ne!(draw(1, "x", &[2, 3]), draw(1, "x", &[3, 2]));
        for i in 0..1000 {
            let r = range(9, "r", &[i], 3, 5);
            assert!((3..=5).contains(&r));
            assert!(unit(9, "u", &[i]) < 1.0);
        }
    }
}
