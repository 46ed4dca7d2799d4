use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Seeded uniformly random permutation: `interleave(x)[i] = x[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
    seed: u64,
}

impl Interleaver {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig(
                "interleaver length must be positive".into(),
            ));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut stream(seed, n as u64, Purpose::Interleaver));
        Ok(Self { perm, seed })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.perm.len() {
            return Err(Error::LengthMismatch {
                expected: self.perm.len(),
                actual: len,
            });
        }
        Ok(())
    }

    pub fn interleave<V: Clone>(&self, seq: &[V]) -> Result<Vec<V>> {
        self.check(seq.len())?;
        Ok(self.perm.iter().map(|&p| seq[p].clone()).collect())
    }

    pub fn deinterleave<V: Clone>(&self, seq: &[V]) -> Result<Vec<V>> {
        self.check(seq.len())?;
        let mut out = seq.to_vec();
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = seq[i].clone();
        }
        Ok(out)
    }
}
