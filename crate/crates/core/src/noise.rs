//! Random streams and Brownian paths.
//!
//! Every random draw comes from a ChaCha8 stream keyed by
//! `(seed, stream kind, a, b)`, so results do not depend on evaluation
//! order or thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::manifolds::{Frame, Manifold};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Langevin = 1,
    Component = 2,
    Bridge = 3,
    Endpoint = 4,
    Coupling = 5,
    Pairs = 6,
    Reference = 7,
    Replicate = 8,
    Probe = 9,
    Initial = 10,
}

/// Independent stream for the key `(seed, stream, a, b)`.
pub fn keyed_rng(seed: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// A child seed derived from a key.
pub fn derive_seed(seed: u64, stream: Stream, a: u64, b: u64) -> u64 {
    keyed_rng(seed, stream, a, b).random()
}

pub fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Standard Gaussian tangent vector at `x`, expressed through `frame`.
pub fn tangent_gaussian<R: Rng + ?Sized>(m: &Manifold, frame: &Frame, rng: &mut R) -> Vec<f64> {
    frame.combine(&standard_normal_vec(rng, m.intrinsic_dim()))
}

#[derive(Clone, Debug)]
struct Midpoints {
    filled: Vec<bool>,
    count: usize,
    data: Vec<f64>,
}

/// Brownian motion in `R^dim` on `[0, horizon]`, sampled on dyadic grids.
///
/// Level `i` holds `B(k T / 2^i)` for `k = 0..=2^i`. Level 0 is `B(0) = 0`
/// and `B(T) ~ N(0, T I)`; each refinement adds midpoints drawn from the
/// Brownian bridge between their neighbours. Midpoint `j` of level `i` uses
/// its own keyed stream, so refining in any order yields the same path.
#[derive(Clone, Debug)]
pub struct DyadicBrownianPath {
    horizon: f64,
    dim: usize,
    seed: u64,
    max_level: u32,
    origin: Vec<f64>,
    endpoint: Vec<f64>,
    levels: Vec<Midpoints>,
}

const MAX_LEVEL: u32 = 30;

impl DyadicBrownianPath {
    pub fn new(horizon: f64, dim: usize, seed: u64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        let mut rng = keyed_rng(seed, Stream::Endpoint, 0, 0);
        let sd = horizon.sqrt();
        let endpoint = standard_normal_vec(&mut rng, dim).into_iter().map(|z| sd * z).collect();
        Ok(Self { horizon, dim, seed, max_level: 0, origin: vec![0.0; dim], endpoint, levels: vec![Midpoints { filled: vec![], count: 0, data: vec![] }] })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Highest fully refined level.
    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn stepsize(&self, level: u32) -> f64 {
        self.horizon / (1u64 << level) as f64
    }

    fn ensure_level_storage(&mut self, level: u32) {
        while self.levels.len() <= level as usize {
            let l = self.levels.len() as u32;
            let count = 1usize << (l - 1);
            self.levels.push(Midpoints { filled: vec![false; count], count: 0, data: vec![0.0; count * self.dim] });
        }
    }

    /// `B(k T / 2^level)` if it has been generated.
    pub fn value(&self, level: u32, k: u64) -> Option<&[f64]> {
        let (mut level, mut k) = (level, k);
        if k > (1u64 << level) {
            return None;
        }
        while level > 0 && k % 2 == 0 {
            k /= 2;
            level -= 1;
        }
        if level == 0 {
            return Some(if k == 0 { &self.origin } else { &self.endpoint });
        }
        let mids = self.levels.get(level as usize)?;
        let j = ((k - 1) / 2) as usize;
        if mids.filled[j] {
            Some(&mids.data[j * self.dim..(j + 1) * self.dim])
        } else {
            None
        }
    }

    fn value_owned(&self, level: u32, k: u64) -> Option<Vec<f64>> {
        self.value(level, k).map(<[f64]>::to_vec)
    }

    /// Generate midpoint `j` of `level` (time `(2j+1) T / 2^level`),
    /// generating any missing coarser values it depends on.
    pub fn refine_midpoint(&mut self, level: u32, j: u64) -> Result<()> {
        if level == 0 || level > MAX_LEVEL || j >= 1u64 << (level - 1) {
            return Err(invalid(format!("no midpoint {j} at level {level}")));
        }
        self.ensure_level_storage(level);
        if self.levels[level as usize].filled[j as usize] {
            return Ok(());
        }
        // Neighbours at level-1 are indices j and j+1.
        for k in [j, j + 1] {
            if self.value_owned(level - 1, k).is_none() {
                let (mut l, mut kk) = (level - 1, k);
                while kk % 2 == 0 {
                    kk /= 2;
                    l -= 1;
                }
                self.refine_midpoint(l, (kk - 1) / 2)?;
            }
        }
        let left = self.value_owned(level - 1, j).expect("left neighbour generated");
        let right = self.value_owned(level - 1, j + 1).expect("right neighbour generated");
        let sd = (self.horizon / (1u64 << (level + 1)) as f64).sqrt();
        let mut rng = keyed_rng(self.seed, Stream::Bridge, level as u64, j);
        let dim = self.dim;
        let mids = &mut self.levels[level as usize];
        for c in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            mids.data[j as usize * dim + c] = 0.5 * (left[c] + right[c]) + sd * z;
        }
        mids.filled[j as usize] = true;
        mids.count += 1;
        while (self.max_level as usize + 1) < self.levels.len() && {
            let next = &self.levels[self.max_level as usize + 1];
            next.count == next.filled.len()
        } {
            self.max_level += 1;
        }
        Ok(())
    }

    /// Refine by one full level.
    pub fn refine(&mut self) -> Result<()> {
        let level = self.max_level + 1;
        for j in 0..(1u64 << (level - 1)) {
            self.refine_midpoint(level, j)?;
        }
        Ok(())
    }

    pub fn refine_to(&mut self, level: u32) -> Result<()> {
        while self.max_level < level {
            self.refine()?;
        }
        Ok(())
    }

    /// `B((k+1) delta_i) - B(k delta_i)` written into `out`.
    pub fn increment_into(&self, level: u32, k: u64, out: &mut [f64]) -> Result<()> {
        let not_refined = || Error::LevelNotRefined { level, max_level: self.max_level };
        if k >= 1u64 << level {
            return Err(invalid(format!("increment index {k} out of range at level {level}")));
        }
        let b = self.value(level, k + 1).ok_or_else(not_refined)?;
        match self.value(level, k) {
            Some(a) => {
                for c in 0..self.dim {
                    out[c] = b[c] - a[c];
                }
            }
            None => return Err(not_refined()),
        }
        Ok(())
    }

    pub fn increment(&self, level: u32, k: u64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.increment_into(level, k, &mut out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyed_streams_are_reproducible_and_distinct() {
        let a: u64 = keyed_rng(7, Stream::Langevin, 1, 2).random();
        let b: u64 = keyed_rng(7, Stream::Langevin, 1, 2).random();
        let c: u64 = keyed_rng(7, Stream::Langevin, 2, 1).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn refined_levels_are_consistent() {
        let mut p = DyadicBrownianPath::new(1.0, 3, 11).unwrap();
        let coarse = p.increment(0, 0).unwrap();
        p.refine_to(4).unwrap();
        let mut sum = [0.0; 3];
        for k in 0..16 {
            let inc = p.increment(4, k).unwrap();
            for c in 0..3 {
                sum[c] += inc[c];
            }
        }
        for c in 0..3 {
            assert!((sum[c] - coarse[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn refine_order_does_not_matter() {
        let mut a = DyadicBrownianPath::new(2.0, 2, 5).unwrap();
        a.refine_to(3).unwrap();
        let mut b = DyadicBrownianPath::new(2.0, 2, 5).unwrap();
        for j in [3, 0, 2, 1] {
            b.refine_midpoint(3, j).unwrap();
        }
        assert_eq!(b.max_level(), 3);
        for k in 0..=8 {
            assert_eq!(a.value(3, k), b.value(3, k));
        }
    }

    #[test]
    fn unrefined_level_is_an_error() {
        let p = DyadicBrownianPath::new(1.0, 2, 0).unwrap();
        assert!(matches!(p.increment(2, 0), Err(Error::LevelNotRefined { .. })));
    }

    #[test]
    fn finest_increment_variance() {
        let mut p = DyadicBrownianPath::new(1.0, 1, 3).unwrap();
        p.refine_to(14).unwrap();
        let n = 1u64 << 14;
        let delta = 1.0 / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            acc += p.increment(14, k).unwrap()[0].powi(2);
        }
        let ratio = acc / n as f64 / delta;
        assert!((ratio - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt(), "ratio {ratio}");
    }
}
