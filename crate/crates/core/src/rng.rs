//! Counter-based Gaussian streams.
//!
//! Path `p` of a run seeded with `seed` always reads ChaCha8 stream `p` under
//! key `seed`, so draws do not depend on which worker simulates the path.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone)]
pub struct PathRng {
    inner: ChaCha8Rng,
    sign: f64,
}

impl PathRng {
    pub fn new(seed: u64, path: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(path);
        Self { inner, sign: 1.0 }
    }

    /// Same stream with every normal draw negated.
    pub fn antithetic(seed: u64, path: u64) -> Self {
        Self {
            sign: -1.0,
            ..Self::new(seed, path)
        }
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.inner);
        self.sign * z
    }

    pub fn fill_normals(&mut self, out: &mut [f64]) {
        for z in out {
            *z = self.normal();
        }
    }
}
