//! The driving system: an i.i.d. or stationary Markov source of environment
//! symbols, and finite environment windows sampled from it.

use std::fmt;
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::{stream_rng, Stream};
use crate::Symbol;

/// Probability vectors must sum to one within this tolerance.
pub const WEIGHT_TOL: f64 = 1e-12;
/// A supplied Markov initial law must match the stationary vector this closely.
pub const STATIONARY_TOL: f64 = 1e-10;

fn check_probability_vector(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidParameter("probability vector is empty".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidParameter("probability vector has negative or non-finite entries".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidParameter(format!("probability vector sums to {sum}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum BaseProcess {
    Iid { weights: Vec<f64> },
    Markov { transition: Matrix, initial: Vec<f64> },
}

impl BaseProcess {
    pub fn iid(weights: Vec<f64>) -> Result<Self> {
        check_probability_vector(&weights)?;
        Ok(Self::Iid { weights })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParameter("base alphabet must be nonempty".into()));
        }
        Ok(Self::Iid { weights: vec![1.0 / size as f64; size] })
    }

    /// Stationary Markov process; the initial law is the stationary vector.
    pub fn markov(transition: Matrix) -> Result<Self> {
        let initial = linalg::stationary_vector(&transition)?;
        Ok(Self::Markov { transition, initial })
    }

    /// Stationary Markov process with an explicitly supplied initial law,
    /// which must be the stationary vector.
    pub fn markov_with_initial(transition: Matrix, initial: Vec<f64>) -> Result<Self> {
        check_probability_vector(&initial)?;
        let pi = linalg::stationary_vector(&transition)?;
        if pi.len() != initial.len() || pi.iter().zip(&initial).any(|(a, b)| (a - b).abs() > STATIONARY_TOL) {
            return Err(Error::InvalidParameter("initial law is not the stationary vector".into()));
        }
        Ok(Self::Markov { transition, initial })
    }

    /// Number of base symbols.
    pub fn alphabet_size(&self) -> usize {
        match self {
            Self::Iid { weights } => weights.len(),
            Self::Markov { transition, .. } => transition.rows(),
        }
    }

    /// One-step marginal law of the environment.
    pub fn stationary(&self) -> &[f64] {
        match self {
            Self::Iid { weights } => weights,
            Self::Markov { initial, .. } => initial,
        }
    }

    pub fn is_iid(&self) -> bool {
        matches!(self, Self::Iid { .. })
    }

    /// Probability that the environment moves from `a` to `b` in one step.
    pub fn step(&self, a: usize, b: usize) -> f64 {
        match self {
            Self::Iid { weights } => weights[b],
            Self::Markov { transition, .. } => transition.get(a, b),
        }
    }

    /// Draws `length` symbols from `rng`.
    pub(crate) fn draw<R: rand::Rng>(&self, length: usize, rng: &mut R) -> Vec<Symbol> {
        let mut symbols = Vec::with_capacity(length);
        match self {
            Self::Iid { weights } => {
                let dist = WeightedIndex::new(weights).expect("validated weights");
                symbols.extend((0..length).map(|_| dist.sample(rng) as Symbol));
            }
            Self::Markov { transition, initial } => {
                let rows: Vec<WeightedIndex<f64>> = (0..transition.rows())
                    .map(|r| WeightedIndex::new(transition.row(r)).expect("validated transition"))
                    .collect();
                let mut state = WeightedIndex::new(initial).expect("validated initial").sample(rng);
                for _ in 0..length {
                    symbols.push(state as Symbol);
                    state = rows[state].sample(rng);
                }
            }
        }
        symbols
    }
}

/// A realized window `ω_start … ω_{L−1}` of the environment.
///
/// Shifting produces a view sharing the underlying buffer.
#[derive(Clone)]
pub struct Environment {
    buffer: Arc<[Symbol]>,
    start: usize,
    seed: Option<u64>,
    process: Arc<BaseProcess>,
}

impl Environment {
    /// Wraps explicit symbols, e.g. a fixed environment for a test.
    pub fn from_symbols(process: BaseProcess, symbols: Vec<Symbol>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::EmptyInput);
        }
        let size = process.alphabet_size();
        if let Some(&bad) = symbols.iter().find(|&&s| s as usize >= size) {
            return Err(Error::InvalidParameter(format!("environment symbol {bad} outside alphabet of size {size}")));
        }
        Ok(Self { buffer: symbols.into(), start: 0, seed: None, process: Arc::new(process) })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.buffer[self.start..]
    }

    pub fn len(&self) -> usize {
        self.buffer.len() - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn at(&self, i: usize) -> usize {
        self.buffer[self.start + i] as usize
    }

    /// Seed this window was sampled from; `None` for hand-built windows.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn process(&self) -> &BaseProcess {
        &self.process
    }

    /// The view `θⁱω`, i.e. symbols `i … L−1`.
    pub fn shift(&self, i: usize) -> Result<Self> {
        if i >= self.len() {
            return Err(Error::OutOfRange { index: i, len: self.len() });
        }
        Ok(Self { start: self.start + i, ..self.clone() })
    }
}

impl PartialEq for Environment {
    fn eq(&self, other: &Self) -> bool {
        self.symbols() == other.symbols()
    }
}

impl fmt::Debug for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Environment")
            .field("len", &self.len())
            .field("start", &self.start)
            .field("seed", &self.seed)
            .finish()
    }
}

/// Samples `ω_0 … ω_{length−1}` deterministically from `(process, length, seed)`.
pub fn sample_environment(process: &BaseProcess, length: usize, seed: u64) -> Result<Environment> {
    if length == 0 {
        return Err(Error::InvalidParameter("environment length must be positive".into()));
    }
    let mut rng = stream_rng(seed, Stream::Environment);
    let symbols = process.draw(length, &mut rng);
    Ok(Environment { buffer: symbols.into(), start: 0, seed: Some(seed), process: Arc::new(process.clone()) })
}

pub fn shift_environment(env: &Environment, i: usize) -> Result<Environment> {
    env.shift(i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(q: f64) -> Matrix {
        Matrix::from_rows(vec![vec![q, 1.0 - q], vec![1.0 - q, q]]).unwrap()
    }

    #[test]
    fn iid_uniform_frequency() {
        let env = sample_environment(&BaseProcess::uniform(2).unwrap(), 1_000_000, 11).unwrap();
        let zeros = env.symbols().iter().filter(|&&s| s == 0).count() as f64 / 1e6;
        // 3σ of a binomial proportion at n = 1e6 is 0.0015.
        assert!((zeros - 0.5).abs() < 0.002, "{zeros}");
    }

    #[test]
    fn near_point_mass() {
        let process = BaseProcess::iid(vec![1.0 - 1e-9, 1e-9]).unwrap();
        let env = sample_environment(&process, 100, 3).unwrap();
        assert!(env.symbols().iter().filter(|&&s| s == 0).count() >= 99);
    }

    #[test]
    fn sampling_is_deterministic() {
        let process = BaseProcess::markov(two_state(0.7)).unwrap();
        let a = sample_environment(&process, 500, 42).unwrap();
        let b = sample_environment(&process, 500, 42).unwrap();
        let c = sample_environment(&process, 500, 43).unwrap();
        assert_eq!(a.symbols(), b.symbols());
        assert_ne!(a.symbols(), c.symbols());
    }

    #[test]
    fn shift_examples() {
        let env = Environment::from_symbols(BaseProcess::uniform(2).unwrap(), vec![0, 1, 0, 1]).unwrap();
        assert_eq!(env.shift(0).unwrap(), env);
        assert_eq!(env.shift(1).unwrap().symbols(), &[1, 0, 1]);
        assert_eq!(env.shift(1).unwrap().shift(2).unwrap(), env.shift(3).unwrap());
        assert_eq!(env.shift(4), Err(Error::OutOfRange { index: 4, len: 4 }));
    }

    #[test]
    fn markov_initial_must_be_stationary() {
        let t = Matrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        assert!(BaseProcess::markov_with_initial(t.clone(), vec![2.0 / 3.0, 1.0 / 3.0]).is_ok());
        assert!(BaseProcess::markov_with_initial(t, vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(BaseProcess::iid(vec![0.5, 0.6]).is_err());
        assert!(BaseProcess::iid(vec![1.5, -0.5]).is_err());
        assert!(BaseProcess::iid(vec![]).is_err());
    }

    #[test]
    fn markov_marginals_are_stationary() {
        // Over many seeds the law of ω_k is π = (2/3, 1/3) for every k.
        let t = Matrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let process = BaseProcess::markov(t).unwrap();
        let runs = 20_000;
        let mut zeros = [0usize; 3];
        for seed in 0..runs {
            let env = sample_environment(&process, 101, seed).unwrap();
            for (slot, k) in [0usize, 10, 100].into_iter().enumerate() {
                zeros[slot] += (env.at(k) == 0) as usize;
            }
        }
        let sd = (2.0 / 9.0 / runs as f64).sqrt();
        for count in zeros {
            let freq = count as f64 / runs as f64;
            assert!((freq - 2.0 / 3.0).abs() < 4.0 * sd, "{freq}");
        }
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn shift_is_a_semigroup(len in 2usize..200, fa in 0.0..1.0f64, fb in 0.0..1.0f64, seed: u64) {
            let env = sample_environment(&BaseProcess::uniform(3).unwrap(), len, seed).unwrap();
            let a = (fa * len as f64) as usize;
            let b = (fb * (len - a) as f64) as usize;
            let twice = env.shift(a).unwrap().shift(b).unwrap();
            prop_assert_eq!(twice.symbols(), &env.symbols()[a + b..]);
            prop_assert_eq!(twice, env.shift(a + b).unwrap());
        }
    }
}
