//! Random Bernoulli fiber measures.
//!
//! Given an environment `ω`, position `i` of a fiber sequence is drawn
//! independently from row `ω_i` of the emission matrix `W`. The sample
//! measure of a cylinder is therefore a product of emission entries along the
//! environment, and the marginal measure integrates that product against the
//! base process.

use rand::distributions::{Distribution, WeightedIndex};
use serde::Serialize;

use crate::base_env::{BaseProcess, Environment};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{stream_rng, Stream};
use crate::Symbol;

/// Emission entries must lie in `[MARGIN, 1 − MARGIN]`.
pub const ENTRY_MARGIN: f64 = 1e-12;
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Words longer than this are multiplied in log-space.
const DIRECT_PRODUCT_MAX: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomBernoulliSystem {
    base: BaseProcess,
    emission: Matrix,
}

impl RandomBernoulliSystem {
    /// `emission` has one row per base symbol and one column per fiber symbol.
    pub fn new(base: BaseProcess, emission: Matrix) -> Result<Self> {
        if emission.rows() != base.alphabet_size() {
            return Err(Error::InvalidParameter(format!(
                "emission matrix has {} rows but the base alphabet has {} symbols",
                emission.rows(),
                base.alphabet_size()
            )));
        }
        if emission.cols() < 2 {
            return Err(Error::InvalidParameter("fiber alphabet needs at least 2 symbols".into()));
        }
        let mut rows = emission.to_rows();
        for (r, row) in rows.iter_mut().enumerate() {
            if row.iter().any(|&w| !(ENTRY_MARGIN..=1.0 - ENTRY_MARGIN).contains(&w)) {
                return Err(Error::InvalidParameter(format!("emission row {r} has an entry outside (0, 1)")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NonStochastic { row: r, sum });
            }
            row.iter_mut().for_each(|w| *w /= sum);
        }
        Ok(Self { base, emission: Matrix::from_rows(rows)? })
    }

    pub fn base(&self) -> &BaseProcess {
        &self.base
    }

    pub fn emission(&self) -> &Matrix {
        &self.emission
    }

    pub fn fiber_size(&self) -> usize {
        self.emission.cols()
    }

    pub fn base_size(&self) -> usize {
        self.emission.rows()
    }

    /// `∫ p_j dℙ` for each fiber symbol `j`, integrating against the
    /// one-step marginal of the base.
    pub fn marginal_emission(&self) -> Vec<f64> {
        let pi = self.base.stationary();
        (0..self.fiber_size())
            .map(|j| pi.iter().enumerate().map(|(a, p)| p * self.emission.get(a, j)).sum())
            .collect()
    }

    fn check_word(&self, word: &[Symbol]) -> Result<()> {
        match word.iter().find(|&&s| s as usize >= self.fiber_size()) {
            Some(&s) => Err(Error::InvalidParameter(format!(
                "fiber symbol {s} outside alphabet of size {}",
                self.fiber_size()
            ))),
            None => Ok(()),
        }
    }

    fn check_env(&self, env: &Environment) -> Result<()> {
        if env.process().alphabet_size() != self.base_size() {
            return Err(Error::InvalidParameter("environment does not match the base alphabet".into()));
        }
        Ok(())
    }

    fn check_window(env: &Environment, offset: usize, len: usize) -> Result<()> {
        if offset + len > env.len() {
            return Err(Error::OutOfRange { index: offset + len, len: env.len() });
        }
        Ok(())
    }

    /// `(p_0(θⁱω), …, p_b(θⁱω))`, the row of `W` selected by `ω_i`.
    pub fn emission_distribution(&self, env: &Environment, position: usize) -> Result<&[f64]> {
        self.check_env(env)?;
        if position >= env.len() {
            return Err(Error::OutOfRange { index: position, len: env.len() });
        }
        Ok(self.emission.row(env.at(position)))
    }

    /// `log μ_{θᵏω}(word)` where `k = offset`.
    pub fn sample_measure_log_cylinder(&self, env: &Environment, word: &[Symbol], offset: usize) -> Result<f64> {
        self.check_env(env)?;
        self.check_word(word)?;
        Self::check_window(env, offset, word.len())?;
        Ok(word
            .iter()
            .enumerate()
            .map(|(i, &x)| self.emission.get(env.at(offset + i), x as usize).ln())
            .sum())
    }

    /// `μ_{θᵏω}([x_0 … x_{m−1}]) = ∏ W[ω_{k+i}, x_i]` where `k = offset`.
    pub fn sample_measure_cylinder(&self, env: &Environment, word: &[Symbol], offset: usize) -> Result<f64> {
        if word.len() > DIRECT_PRODUCT_MAX {
            return self.sample_measure_log_cylinder(env, word, offset).map(f64::exp);
        }
        self.check_env(env)?;
        self.check_word(word)?;
        Self::check_window(env, offset, word.len())?;
        Ok(word
            .iter()
            .enumerate()
            .map(|(i, &x)| self.emission.get(env.at(offset + i), x as usize))
            .product())
    }

    /// Sample measure of a pattern in which `None` positions are free.
    /// A free position contributes its full row sum.
    pub fn sample_measure_pattern(&self, env: &Environment, pattern: &[Option<Symbol>], offset: usize) -> Result<f64> {
        self.check_env(env)?;
        Self::check_window(env, offset, pattern.len())?;
        let mut mass = 1.0;
        for (i, slot) in pattern.iter().enumerate() {
            let row = self.emission.row(env.at(offset + i));
            mass *= match *slot {
                Some(x) => {
                    self.check_word(&[x])?;
                    row[x as usize]
                }
                None => row.iter().sum(),
            };
        }
        Ok(mass)
    }

    /// `μ(word) = ∫ μ_ω(word) dℙ(ω)`.
    ///
    /// For an i.i.d. base this is the product of marginal emissions. For a
    /// Markov base it is the exact forward recursion over base paths.
    pub fn marginal_cylinder(&self, word: &[Symbol]) -> Result<f64> {
        self.check_word(word)?;
        match &self.base {
            BaseProcess::Iid { .. } => {
                let q = self.marginal_emission();
                Ok(word.iter().map(|&x| q[x as usize]).product())
            }
            BaseProcess::Markov { .. } => {
                let pattern: Vec<Option<Symbol>> = word.iter().copied().map(Some).collect();
                Ok(self.forward_mass(&pattern))
            }
        }
    }

    /// Marginal measure of a pattern with free positions.
    pub fn marginal_pattern(&self, pattern: &[Option<Symbol>]) -> Result<f64> {
        for x in pattern.iter().flatten() {
            self.check_word(&[*x])?;
        }
        Ok(self.forward_mass(pattern))
    }

    /// Forward vector after emitting `slot` from weights `v` over base states
    /// and stepping the base once.
    pub(crate) fn forward_step(&self, v: &[f64], slot: Option<Symbol>) -> Vec<f64> {
        let weighted = self.emit(v, slot);
        let n = self.base_size();
        (0..n)
            .map(|b| weighted.iter().enumerate().map(|(a, w)| w * self.base.step(a, b)).sum())
            .collect()
    }

    /// `v[a] · W[a, slot]`, or `v[a] · Σ_j W[a, j]` for a free slot.
    pub(crate) fn emit(&self, v: &[f64], slot: Option<Symbol>) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(a, va)| {
                let row = self.emission.row(a);
                va * match slot {
                    Some(x) => row[x as usize],
                    None => row.iter().sum(),
                }
            })
            .collect()
    }

    fn forward_mass(&self, pattern: &[Option<Symbol>]) -> f64 {
        let Some((last, init)) = pattern.split_last() else {
            return 1.0;
        };
        let v = init
            .iter()
            .fold(self.base.stationary().to_vec(), |v, &slot| self.forward_step(&v, slot));
        self.emit(&v, *last).iter().sum()
    }

    /// Draws `x_0 … x_{n−1}` with `x_i ~ W[ω_i]`, independently across positions.
    pub fn sample_fiber_sequence(&self, env: &Environment, n: usize, seed: u64) -> Result<Vec<Symbol>> {
        self.check_env(env)?;
        if n == 0 {
            return Err(Error::InvalidParameter("fiber sequence length must be positive".into()));
        }
        Self::check_window(env, 0, n)?;
        let rows = self.row_samplers();
        let mut rng = stream_rng(seed, Stream::Fiber);
        Ok(env.symbols()[..n]
            .iter()
            .map(|&a| rows[a as usize].sample(&mut rng) as Symbol)
            .collect())
    }

    pub(crate) fn row_samplers(&self) -> Vec<WeightedIndex<f64>> {
        (0..self.base_size())
            .map(|a| WeightedIndex::new(self.emission.row(a)).expect("validated emission row"))
            .collect()
    }

    fn row_max(&self, a: usize) -> f64 {
        self.emission.row(a).iter().copied().fold(f64::MIN, f64::max)
    }

    /// `max_{C_k} μ_{θᵏω}(C_k)` for `k` = offset. For a product measure the
    /// maximizing cylinder takes the most likely letter at each position.
    pub fn max_cylinder_mass(&self, env: &Environment, k: usize, offset: usize) -> Result<f64> {
        self.check_env(env)?;
        if k == 0 {
            return Err(Error::InvalidParameter("cylinder depth must be positive".into()));
        }
        Self::check_window(env, offset, k)?;
        if k > DIRECT_PRODUCT_MAX {
            return Ok((0..k).map(|i| self.row_max(env.at(offset + i)).ln()).sum::<f64>().exp());
        }
        Ok((0..k).map(|i| self.row_max(env.at(offset + i))).product())
    }
}

/// Calls `visit` on every word of length `k` over `0..alphabet`, in
/// lexicographic order.
pub fn for_each_word(alphabet: usize, k: usize, mut visit: impl FnMut(&[Symbol])) {
    let mut word = vec![0 as Symbol; k];
    loop {
        visit(&word);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            word[i] += 1;
            if (word[i] as usize) < alphabet {
                break;
            }
            word[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_env::sample_environment;

    pub(crate) fn reference_system() -> RandomBernoulliSystem {
        let w = Matrix::from_rows(vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
        RandomBernoulliSystem::new(BaseProcess::uniform(2).unwrap(), w).unwrap()
    }

    fn markov_system() -> RandomBernoulliSystem {
        let t = Matrix::from_rows(vec![vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap();
        let w = Matrix::from_rows(vec![vec![0.7, 0.2, 0.1], vec![0.25, 0.25, 0.5]]).unwrap();
        RandomBernoulliSystem::new(BaseProcess::markov(t).unwrap(), w).unwrap()
    }

    fn env(system: &RandomBernoulliSystem, symbols: Vec<Symbol>) -> Environment {
        Environment::from_symbols(system.base().clone(), symbols).unwrap()
    }

    #[test]
    fn emission_rows() {
        let s = reference_system();
        let e = env(&s, vec![0, 0, 0, 1]);
        assert_eq!(s.emission_distribution(&e, 0).unwrap(), &[0.6, 0.4]);
        assert_eq!(s.emission_distribution(&e, 3).unwrap(), &[0.4, 0.6]);
        assert!(s.emission_distribution(&e, 4).is_err());
    }

    #[test]
    fn rejects_invalid_emission() {
        let base = BaseProcess::uniform(2).unwrap();
        let zero = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(RandomBernoulliSystem::new(base.clone(), zero).is_err());
        let wrong_rows = Matrix::from_rows(vec![vec![0.5, 0.5]]).unwrap();
        assert!(RandomBernoulliSystem::new(base.clone(), wrong_rows).is_err());
        let single = Matrix::from_rows(vec![vec![1.0], vec![1.0]]).unwrap();
        assert!(RandomBernoulliSystem::new(base, single).is_err());
    }

    #[test]
    fn sample_measure_examples() {
        let s = reference_system();
        let e = env(&s, vec![0, 1]);
        assert!((s.sample_measure_cylinder(&e, &[0, 1], 0).unwrap() - 0.36).abs() < 1e-15);
        assert_eq!(s.sample_measure_cylinder(&e, &[], 0).unwrap(), 1.0);
        for offset in 0..2 {
            let total = s.sample_measure_cylinder(&e, &[0], offset).unwrap()
                + s.sample_measure_cylinder(&e, &[1], offset).unwrap();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert!(s.sample_measure_cylinder(&e, &[0, 1], 1).is_err());
    }

    #[test]
    fn long_words_do_not_underflow_in_log_space() {
        let s = reference_system();
        let e = sample_environment(s.base(), 20_000, 1).unwrap();
        let word = vec![0; 20_000];
        let log = s.sample_measure_log_cylinder(&e, &word, 0).unwrap();
        assert!(log.is_finite() && log < -5000.0);
        assert_eq!(s.sample_measure_cylinder(&e, &word, 0).unwrap(), 0.0);
    }

    #[test]
    fn marginal_examples() {
        let s = reference_system();
        assert!((s.marginal_cylinder(&[0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((s.marginal_cylinder(&[0, 1]).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(s.marginal_cylinder(&[]).unwrap(), 1.0);
        assert!(s.marginal_cylinder(&[2]).is_err());
    }

    /// Sums ℙ(path) · ∏ W[path_i, word_i] over every base path.
    fn brute_force_marginal(system: &RandomBernoulliSystem, word: &[Symbol]) -> f64 {
        let mut total = 0.0;
        for_each_word(system.base_size(), word.len(), |path| {
            let mut p = system.base().stationary()[path[0] as usize];
            for i in 1..path.len() {
                p *= system.base().step(path[i - 1] as usize, path[i] as usize);
            }
            for (a, x) in path.iter().zip(word) {
                p *= system.emission().get(*a as usize, *x as usize);
            }
            total += p;
        });
        total
    }

    #[test]
    fn markov_marginal_matches_path_enumeration() {
        let s = markov_system();
        for k in 1..=6 {
            for_each_word(3, k, |word| {
                let fast = s.marginal_cylinder(word).unwrap();
                let brute = brute_force_marginal(&s, word);
                assert!((fast - brute).abs() < 1e-12, "{word:?}: {fast} vs {brute}");
            });
        }
    }

    #[test]
    fn normalization_over_all_cylinders() {
        for s in [reference_system(), markov_system()] {
            let e = sample_environment(s.base(), 8, 5).unwrap();
            for k in 1..=8 {
                let (mut sample, mut marginal) = (0.0, 0.0);
                for_each_word(s.fiber_size(), k, |w| {
                    sample += s.sample_measure_cylinder(&e, w, 0).unwrap();
                    marginal += s.marginal_cylinder(w).unwrap();
                });
                assert!((sample - 1.0).abs() < 1e-10);
                assert!((marginal - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shift_invariance_identity_is_exact() {
        let s = markov_system();
        let e = sample_environment(s.base(), 40, 9).unwrap();
        for i in 0..30 {
            let shifted = e.shift(i).unwrap();
            for_each_word(3, 3, |w| {
                assert_eq!(
                    s.sample_measure_cylinder(&e, w, i).unwrap(),
                    s.sample_measure_cylinder(&shifted, w, 0).unwrap()
                );
            });
        }
    }

    #[test]
    fn fiber_frequency_in_all_zero_environment() {
        let s = reference_system();
        let e = env(&s, vec![0; 100_000]);
        let x = s.sample_fiber_sequence(&e, 100_000, 8).unwrap();
        let freq = x.iter().filter(|&&v| v == 0).count() as f64 / 1e5;
        assert!((freq - 0.6).abs() < 0.005, "{freq}");
        assert_eq!(x, s.sample_fiber_sequence(&e, 100_000, 8).unwrap());
        assert!(s.sample_fiber_sequence(&e, 100_001, 8).is_err());
    }

    #[test]
    fn two_letter_window_frequencies_match_product_formula() {
        let s = markov_system();
        let n = 200_000;
        let e = sample_environment(s.base(), n, 21).unwrap();
        let x = s.sample_fiber_sequence(&e, n, 22).unwrap();
        let windows = (n - 1) as f64;
        for_each_word(3, 2, |w| {
            let observed = x.windows(2).filter(|pair| *pair == w).count() as f64 / windows;
            let predicted = (0..n - 1)
                .map(|i| s.sample_measure_cylinder(&e, w, i).unwrap())
                .sum::<f64>()
                / windows;
            // Indicators at distance ≥ 2 are independent given ω; 2σ covers overlap.
            let sd = (predicted * (1.0 - predicted) * 3.0 / windows).sqrt();
            assert!((observed - predicted).abs() < 4.0 * sd, "{w:?}: {observed} vs {predicted}");
        });
    }

    #[test]
    fn averaged_sample_measure_converges_to_marginal() {
        let s = markov_system();
        let word = [0, 2, 1];
        let reps = 100_000u64;
        let values: Vec<f64> = (0..reps)
            .map(|r| {
                let e = sample_environment(s.base(), 3, r).unwrap();
                s.sample_measure_cylinder(&e, &word, 0).unwrap()
            })
            .collect();
        let mean = values.iter().sum::<f64>() / reps as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        let exact = s.marginal_cylinder(&word).unwrap();
        assert!((mean - exact).abs() < 4.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn max_mass_examples() {
        let s = reference_system();
        let e = env(&s, vec![1, 0, 1, 1]);
        assert!((s.max_cylinder_mass(&e, 3, 0).unwrap() - 0.216).abs() < 1e-15);
        assert_eq!(s.max_cylinder_mass(&e, 1, 0).unwrap(), 0.6);
        assert!(s.max_cylinder_mass(&e, 4, 1).is_err());
    }

    #[test]
    fn max_mass_equals_enumeration() {
        let s = markov_system();
        let e = sample_environment(s.base(), 12, 77).unwrap();
        for k in 1..=8 {
            for offset in [0, 4] {
                let mut best = 0.0f64;
                for_each_word(3, k, |w| best = best.max(s.sample_measure_cylinder(&e, w, offset).unwrap()));
                assert_eq!(s.max_cylinder_mass(&e, k, offset).unwrap(), best);
            }
        }
    }

    #[test]
    fn fibered_mixing_is_exact_by_enumeration() {
        // μ_ω(A ∩ σ^{−g−n}B) summed over every gap filling equals μ_ω(A)·μ_{θ^{n+g}ω}(B).
        let s = markov_system();
        let e = sample_environment(s.base(), 11, 3).unwrap();
        for (n, m, g) in [(1, 1, 1), (2, 3, 2), (4, 4, 3), (3, 2, 1)] {
            for_each_word(3, n, |a| {
                for_each_word(3, m, |b| {
                    let mut joint = 0.0;
                    for_each_word(3, g, |gap| {
                        let word: Vec<Symbol> = a.iter().chain(gap).chain(b).copied().collect();
                        joint += s.sample_measure_cylinder(&e, &word, 0).unwrap();
                    });
                    let split = s.sample_measure_cylinder(&e, a, 0).unwrap()
                        * s.sample_measure_cylinder(&e, b, n + g).unwrap();
                    assert!((joint - split).abs() < 1e-15);
                });
            });
        }
    }
}
