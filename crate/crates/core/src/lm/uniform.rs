use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ProbabilitySource, SourceError, StepContext};

/// Random positive vectors, normalized; deterministic per seed and call
/// sequence.
pub struct UniformSource {
    size: usize,
    rng: Mutex<ChaCha8Rng>,
}

impl UniformSource {
    pub fn new(vocab_size: usize, seed: u64) -> Self {
        UniformSource {
            size: vocab_size,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

impl ProbabilitySource for UniformSource {
    fn vocab_size(&self) -> usize {
        self.size
    }

    fn next_probs(&self, _ctx: &StepContext<'_>) -> Result<Vec<f64>, SourceError> {
        let mut raw = vec![0u32; self.size];
        let mut rng = self.rng.lock().expect("rng lock");
        rng.fill(&mut raw[..]);
        drop(rng);
        // Exact integer total keeps both passes vectorizable.
        let sum = raw.iter().map(|&r| r as u64).sum::<u64>() + self.size as u64;
        let inv = 1.0 / sum as f64;
        let out: Vec<f64> = raw.iter().map(|&r| (r as f64 + 1.0) * inv).collect();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::assert_distribution;

    fn ctx() -> StepContext<'static> {
        StepContext {
            tokens: &[],
            slot: None,
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = UniformSource::new(300, 4);
        let b = UniformSource::new(300, 4);
        for _ in 0..5 {
            assert_eq!(a.next_probs(&ctx()).unwrap(), b.next_probs(&ctx()).unwrap());
        }
        let c = UniformSource::new(300, 5);
        assert_ne!(a.next_probs(&ctx()).unwrap(), c.next_probs(&ctx()).unwrap());
    }

    #[test]
    fn valid_distribution() {
        let a = UniformSource::new(1000, 1);
        for _ in 0..100 {
            assert_distribution(&a.next_probs(&ctx()).unwrap(), 1000);
        }
    }
}
