//! Rényi entropy `H₂(μ)` of the marginal measure and the decay rate `h₀`
//! of the largest sample-measure cylinder.
//!
//! All values are in nats. Closed forms exist for an i.i.d. base; for any
//! base the plug-in ladder enumerates cylinders exactly and the coincidence
//! estimator samples pairs from `ν ⊗ ν`.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base_env::{sample_environment, BaseProcess, Environment};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::measures::{for_each_word, RandomBernoulliSystem};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::Symbol;

/// Largest number of cylinders the plug-in estimator will enumerate.
pub const ENUMERATION_LIMIT: f64 = 1e7;
/// Largest number of cylinder pairs the mixing probe will enumerate.
pub const MIXING_LIMIT: f64 = 1e6;
pub const MIN_COINCIDENCE_PAIRS: u64 = 1000;
const COINCIDENCE_CHUNK: u64 = 1 << 14;

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

fn require_iid(system: &RandomBernoulliSystem) -> Result<&[f64]> {
    match system.base() {
        BaseProcess::Iid { weights } => Ok(weights),
        BaseProcess::Markov { .. } => Err(Error::WrongBaseVariant),
    }
}

/// `H₂(μ) = −log Σ_j (∫ p_j dℙ)²` for an i.i.d. base.
pub fn renyi_closed_iid(system: &RandomBernoulliSystem) -> Result<f64> {
    require_iid(system)?;
    Ok(-system.marginal_emission().iter().map(|q| q * q).sum::<f64>().ln())
}

/// `h₀ = −log ∫ max_j p_j dℙ` for an i.i.d. base.
pub fn h0_closed_iid(system: &RandomBernoulliSystem) -> Result<f64> {
    let weights = require_iid(system)?;
    let w = system.emission();
    let mean_max: f64 = weights
        .iter()
        .enumerate()
        .map(|(a, p)| p * w.row(a).iter().copied().fold(f64::MIN, f64::max))
        .sum();
    Ok(-mean_max.ln())
}

/// Classical Markov constant: `−log λ_max` of the entrywise-squared
/// transition matrix.
pub fn renyi_closed_markov(transition: &Matrix) -> Result<f64> {
    transition.check_row_stochastic(linalg::STOCHASTIC_TOL)?;
    Ok(-linalg::perron_root(&transition.map(|p| p * p))?.ln())
}

/// Transfer representation of the marginal measure: a cylinder's mass is
/// `Σ_a v[a] · emit[a, x]`, after which `v` steps through `step`.
struct Transfer {
    start: Vec<f64>,
    emit: Matrix,
    step: Matrix,
}

impl Transfer {
    fn new(system: &RandomBernoulliSystem) -> Self {
        match system.base() {
            // The marginal of an i.i.d. base is itself a product measure.
            BaseProcess::Iid { .. } => Self {
                start: vec![1.0],
                emit: Matrix::from_rows(vec![system.marginal_emission()]).expect("nonempty row"),
                step: Matrix::from_rows(vec![vec![1.0]]).expect("1x1"),
            },
            BaseProcess::Markov { transition, initial } => Self {
                start: initial.clone(),
                emit: system.emission().clone(),
                step: transition.clone(),
            },
        }
    }

    /// Adds `μ(C)²` for every cylinder `C` extending the current prefix into
    /// `sums[depth]`, depth-first.
    fn accumulate(&self, v: &[f64], depth: usize, sums: &mut [f64]) {
        if depth == sums.len() {
            return;
        }
        for x in 0..self.emit.cols() {
            let weighted: Vec<f64> = v.iter().enumerate().map(|(a, va)| va * self.emit.get(a, x)).collect();
            let mass: f64 = weighted.iter().sum();
            sums[depth] += mass * mass;
            if depth + 1 < sums.len() {
                self.accumulate(&self.step.left_mul(&weighted), depth + 1, sums);
            }
        }
    }

    /// `Σ_{C_k} μ(C_k)²` for `k = 1 … k_max`. Top-level branches run in
    /// parallel and are combined in symbol order.
    fn collision_sums(&self, k_max: usize) -> Vec<f64> {
        let branches: Vec<Vec<f64>> = (0..self.emit.cols())
            .into_par_iter()
            .map(|x| {
                let mut sums = vec![0.0; k_max];
                let weighted: Vec<f64> =
                    self.start.iter().enumerate().map(|(a, va)| va * self.emit.get(a, x)).collect();
                let mass: f64 = weighted.iter().sum();
                sums[0] = mass * mass;
                if k_max > 1 {
                    self.accumulate(&self.step.left_mul(&weighted), 1, &mut sums);
                }
                sums
            })
            .collect();
        (0..k_max)
            .map(|d| linalg::pairwise_sum(&branches.iter().map(|b| b[d]).collect::<Vec<_>>()))
            .collect()
    }
}

fn check_enumeration(alphabet: usize, k: usize) -> Result<()> {
    let count = (alphabet as f64).powi(k as i32);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooDeep { count, limit: ENUMERATION_LIMIT });
    }
    Ok(())
}

/// `(k, −(1/k) log Σ_{C_k} μ(C_k)²)` for `k = 1 … k_max`, by exhaustive
/// cylinder enumeration.
pub fn renyi_plugin_ladder(system: &RandomBernoulliSystem, k_max: usize) -> Result<Vec<(usize, f64)>> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    check_enumeration(system.fiber_size(), k_max)?;
    let sums = Transfer::new(system).collision_sums(k_max);
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(i, s)| (i + 1, -s.ln() / (i + 1) as f64))
        .collect())
}

pub fn renyi_plugin(system: &RandomBernoulliSystem, k: usize) -> Result<f64> {
    Ok(renyi_plugin_ladder(system, k)?.last().expect("k ≥ 1").1)
}

/// Draws environment and fiber symbols one position at a time.
struct LazySampler<'a> {
    base: &'a BaseProcess,
    initial: WeightedIndex<f64>,
    transitions: Vec<WeightedIndex<f64>>,
    emissions: Vec<WeightedIndex<f64>>,
}

impl<'a> LazySampler<'a> {
    fn new(system: &'a RandomBernoulliSystem) -> Self {
        let base = system.base();
        let transitions = match base {
            BaseProcess::Iid { .. } => Vec::new(),
            BaseProcess::Markov { transition, .. } => (0..transition.rows())
                .map(|r| WeightedIndex::new(transition.row(r)).expect("validated transition"))
                .collect(),
        };
        Self {
            base,
            initial: WeightedIndex::new(base.stationary()).expect("validated law"),
            transitions,
            emissions: system.row_samplers(),
        }
    }

    fn next_env<R: Rng>(&self, previous: Option<usize>, rng: &mut R) -> usize {
        match (self.base, previous) {
            (BaseProcess::Markov { .. }, Some(a)) => self.transitions[a].sample(rng),
            _ => self.initial.sample(rng),
        }
    }

    /// Whether two independent `ν`-samples agree on their first `k` fiber
    /// symbols. Stops at the first disagreement.
    fn coincide<R: Rng>(&self, k: usize, rng: &mut R) -> bool {
        let (mut a, mut b) = (None, None);
        for _ in 0..k {
            let wa = self.next_env(a, rng);
            let wb = self.next_env(b, rng);
            let x = self.emissions[wa].sample(rng);
            let y = self.emissions[wb].sample(rng);
            if x != y {
                return false;
            }
            a = Some(wa);
            b = Some(wb);
        }
        true
    }
}

/// Estimates `−(1/k) log Σ μ(C_k)²` from the fraction of independent
/// `ν ⊗ ν` pairs whose fiber sequences agree on the first `k` symbols.
/// The standard error uses the delta method.
pub fn renyi_coincidence(system: &RandomBernoulliSystem, k: usize, pairs: u64, seed: u64) -> Result<Estimate> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if pairs < MIN_COINCIDENCE_PAIRS {
        return Err(Error::InvalidParameter(format!("need at least {MIN_COINCIDENCE_PAIRS} pairs, got {pairs}")));
    }
    let sampler = LazySampler::new(system);
    let chunks = pairs.div_ceil(COINCIDENCE_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(derive_seed(seed, &[c]), Stream::Coincidence);
            let size = COINCIDENCE_CHUNK.min(pairs - c * COINCIDENCE_CHUNK);
            (0..size).filter(|_| sampler.coincide(k, &mut rng)).count() as u64
        })
        .sum();
    if hits == 0 {
        return Err(Error::ZeroCoincidences { pairs });
    }
    let p = hits as f64 / pairs as f64;
    let se_p = (p * (1.0 - p) / pairs as f64).sqrt();
    Ok(Estimate { value: -p.ln() / k as f64, stderr: se_p / (k as f64 * p) })
}

/// Monte Carlo estimate of `−(1/k) log ∫ max_{C_k} μ_ω(C_k) dℙ` over
/// `environments` sampled windows.
pub fn h0_plugin(system: &RandomBernoulliSystem, k: usize, environments: usize, seed: u64) -> Result<Estimate> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if environments < 2 {
        return Err(Error::InvalidParameter("need at least 2 environments".into()));
    }
    let logs = (0..environments)
        .into_par_iter()
        .map(|e| {
            let env = sample_environment(system.base(), k, derive_seed(seed, &[Stream::MaxMass as u64, e as u64]))?;
            let w = system.emission();
            Ok((0..k).map(|i| w.row(env.at(i)).iter().copied().fold(f64::MIN, f64::max).ln()).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    // Scale by the largest term so that deep cylinders do not underflow.
    let top = logs.iter().copied().fold(f64::MIN, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let mean = linalg::pairwise_mean(&scaled);
    let var = linalg::pairwise_sum(&scaled.iter().map(|s| (s - mean).powi(2)).collect::<Vec<_>>())
        / (environments - 1) as f64;
    let kf = k as f64;
    Ok(Estimate {
        value: -(top + mean.ln()) / kf,
        stderr: (var / environments as f64).sqrt() / (mean * kf),
    })
}

/// Plug-in `H₂` from overlapping `k`-mer frequencies of one long sample.
///
/// Biased: squared empirical frequencies overestimate `Σ μ(C)²` by roughly
/// `1/N`, and overlapping windows are dependent. Prefer
/// [`renyi_plugin_ladder`] when the measure is known.
pub fn renyi_empirical_kmer(sample: &[Symbol], k: usize) -> Result<f64> {
    if k == 0 || sample.len() < k {
        return Err(Error::InvalidParameter("sample shorter than k".into()));
    }
    let mut counts: HashMap<&[Symbol], u64> = HashMap::new();
    for w in sample.windows(k) {
        *counts.entry(w).or_default() += 1;
    }
    let total = (sample.len() - k + 1) as f64;
    let mut squares: Vec<f64> = counts.values().map(|&c| (c as f64 / total).powi(2)).collect();
    squares.sort_by(f64::total_cmp);
    Ok(-linalg::pairwise_sum(&squares).ln() / k as f64)
}

/// Some column is a row maximum in every row.
pub fn dominant_letter(emission: &Matrix) -> bool {
    (0..emission.cols()).any(|j| {
        (0..emission.rows()).all(|a| emission.row(a).iter().all(|&v| v <= emission.get(a, j)))
    })
}

/// There is a `P` with `P < W[a, j] < P·√(b+1)` for all entries, i.e. the
/// largest entry is below the smallest times `√(b+1)`.
pub fn close_probability_band(emission: &Matrix) -> bool {
    let entries = (0..emission.rows()).flat_map(|a| emission.row(a).iter().copied());
    let (lo, hi) = entries.fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi < lo * (emission.cols() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionFlags {
    pub dominant_letter: bool,
    pub close_probability_band: bool,
    pub h2_lt_2h0: bool,
}

/// The two sufficient conditions for `H₂ < 2h₀` together with the direct
/// check from the closed forms.
pub fn check_conditions(system: &RandomBernoulliSystem) -> Result<ConditionFlags> {
    let h2 = renyi_closed_iid(system)?;
    let h0 = h0_closed_iid(system)?;
    Ok(ConditionFlags {
        dominant_letter: dominant_letter(system.emission()),
        close_probability_band: close_probability_band(system.emission()),
        h2_lt_2h0: h2 < 2.0 * h0,
    })
}

#[derive(Debug, Clone, Copy)]
pub enum MixingMode<'a> {
    /// `|μ_ω(A ∩ σ^{−g−n}B) − μ_ω(A)·μ_{θ^{n+g}ω}(B)|` over cylinders `A` of
    /// depth `n` and `B` of depth `m`.
    Fibered { env: &'a Environment, m: usize },
    /// `|μ(A ∩ σ^{−g−n}A) − μ(A)²|` over cylinders `A` of depth `n`.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingEstimate {
    pub gap: usize,
    pub bound: f64,
    pub cylinder_depth: usize,
}

/// Largest mixing deviation over all cylinders of the given depths, with the
/// `g` gap positions summed out exactly.
pub fn alpha_mixing_probe(
    system: &RandomBernoulliSystem,
    n: usize,
    g: usize,
    mode: MixingMode<'_>,
) -> Result<MixingEstimate> {
    let sigma = system.fiber_size();
    if n == 0 {
        return Err(Error::InvalidParameter("cylinder depth must be positive".into()));
    }
    let gapped = |a: &[Symbol], b: &[Symbol]| -> Vec<Option<Symbol>> {
        a.iter().copied().map(Some).chain(std::iter::repeat(None).take(g)).chain(b.iter().copied().map(Some)).collect()
    };
    let mut bound = 0.0f64;
    match mode {
        MixingMode::Fibered { env, m } => {
            let count = (sigma as f64).powi((n + m) as i32);
            if count > MIXING_LIMIT {
                return Err(Error::TooDeep { count, limit: MIXING_LIMIT });
            }
            let mut failure = None;
            for_each_word(sigma, n, |a| {
                for_each_word(sigma, m, |b| {
                    let deviation = system.sample_measure_pattern(env, &gapped(a, b), 0).and_then(|joint| {
                        let split = system.sample_measure_cylinder(env, a, 0)?
                            * system.sample_measure_cylinder(env, b, n + g)?;
                        Ok((joint - split).abs())
                    });
                    match deviation {
                        Ok(d) => bound = bound.max(d),
                        Err(e) => failure = Some(e),
                    }
                });
            });
            if let Some(e) = failure {
                return Err(e);
            }
        }
        MixingMode::Marginal => {
            let count = (sigma as f64).powi(n as i32);
            if count > MIXING_LIMIT {
                return Err(Error::TooDeep { count, limit: MIXING_LIMIT });
            }
            let mut failure = None;
            for_each_word(sigma, n, |a| {
                let deviation = system.marginal_pattern(&gapped(a, a)).and_then(|joint| {
                    let single = system.marginal_cylinder(a)?;
                    Ok((joint - single * single).abs())
                });
                match deviation {
                    Ok(d) => bound = bound.max(d),
                    Err(e) => failure = Some(e),
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
        }
    }
    Ok(MixingEstimate { gap: g, bound, cylinder_depth: n })
}

/// How `conditions.h2_lt_2h0` was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionBasis {
    ClosedForm,
    /// From plug-in values at the deepest enumerated `k`; not a proof.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportConditions {
    pub h2_lt_2h0: bool,
    pub basis: ConditionBasis,
    pub dominant_letter: bool,
    pub close_probability_band: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Nats,
    Bits,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KValue {
    pub k: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    pub k: usize,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub units: Units,
    pub h2_closed: Option<f64>,
    pub h2_plugin: Vec<KValue>,
    pub h2_coincidence: KEstimate,
    pub h0_closed: Option<f64>,
    pub h0_plugin: Vec<KEstimate>,
    pub conditions: ReportConditions,
    /// Biased empirical k-mer ladder; only filled on request.
    pub h2_empirical: Option<Vec<KValue>>,
}

impl EntropyReport {
    /// Converts every entropy value from nats to bits.
    pub fn into_bits(mut self) -> Self {
        if self.units == Units::Bits {
            return self;
        }
        let f = std::f64::consts::LN_2;
        self.units = Units::Bits;
        self.h2_closed = self.h2_closed.map(|v| v / f);
        self.h0_closed = self.h0_closed.map(|v| v / f);
        for kv in self.h2_plugin.iter_mut().chain(self.h2_empirical.iter_mut().flatten()) {
            kv.value /= f;
        }
        for ke in self.h0_plugin.iter_mut().chain(std::iter::once(&mut self.h2_coincidence)) {
            ke.value /= f;
            ke.stderr /= f;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportSettings {
    pub k_max: usize,
    pub coincidence_k: usize,
    pub coincidence_pairs: u64,
    pub h0_environments: usize,
    /// Length of the single sample for the empirical k-mer ladder, if wanted.
    pub empirical_length: Option<usize>,
    pub seed: u64,
}

/// Runs every estimator applicable to `system`.
pub fn entropy_report(system: &RandomBernoulliSystem, settings: &ReportSettings) -> Result<EntropyReport> {
    let h2_plugin: Vec<KValue> = renyi_plugin_ladder(system, settings.k_max)?
        .into_iter()
        .map(|(k, value)| KValue { k, value })
        .collect();
    let coincidence = renyi_coincidence(
        system,
        settings.coincidence_k,
        settings.coincidence_pairs,
        derive_seed(settings.seed, &[Stream::Coincidence as u64]),
    )?;
    let h0_plugin = (1..=settings.k_max)
        .map(|k| {
            h0_plugin(system, k, settings.h0_environments, derive_seed(settings.seed, &[Stream::MaxMass as u64]))
                .map(|e| KEstimate { k, value: e.value, stderr: e.stderr })
        })
        .collect::<Result<Vec<_>>>()?;
    let (h2_closed, h0_closed, h2_lt_2h0, basis) = if system.base().is_iid() {
        let h2 = renyi_closed_iid(system)?;
        let h0 = h0_closed_iid(system)?;
        (Some(h2), Some(h0), h2 < 2.0 * h0, ConditionBasis::ClosedForm)
    } else {
        let h2 = h2_plugin.last().expect("k_max ≥ 1").value;
        let h0 = h0_plugin.last().expect("k_max ≥ 1").value;
        (None, None, h2 < 2.0 * h0, ConditionBasis::Estimated)
    };
    let h2_empirical = match settings.empirical_length {
        None => None,
        Some(len) => {
            let env = sample_environment(system.base(), len, derive_seed(settings.seed, &[Stream::Environment as u64]))?;
            let x = system.sample_fiber_sequence(&env, len, derive_seed(settings.seed, &[Stream::Fiber as u64]))?;
            Some(
                (1..=settings.k_max.min(len))
                    .map(|k| renyi_empirical_kmer(&x, k).map(|value| KValue { k, value }))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
    };
    Ok(EntropyReport {
        units: Units::Nats,
        h2_closed,
        h2_plugin,
        h2_coincidence: KEstimate {
            k: settings.coincidence_k,
            value: coincidence.value,
            stderr: coincidence.stderr,
        },
        h0_closed,
        h0_plugin,
        conditions: ReportConditions {
            h2_lt_2h0,
            basis,
            dominant_letter: dominant_letter(system.emission()),
            close_probability_band: close_probability_band(system.emission()),
        },
        h2_empirical,
    })
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn admissible_system() -> impl Strategy<Value = RandomBernoulliSystem> {
        (1usize..=4, 2usize..=5).prop_flat_map(|(s, b)| {
            (
                prop::collection::vec(0.01..1.0f64, s),
                prop::collection::vec(prop::collection::vec(0.01..1.0f64, b), s),
            )
                .prop_map(|(weights, rows)| {
                    let total: f64 = weights.iter().sum();
                    let weights = weights.into_iter().map(|v| v / total).collect();
                    let rows = rows
                        .into_iter()
                        .map(|r| {
                            let t: f64 = r.iter().sum();
                            r.into_iter().map(|v| v / t).collect()
                        })
                        .collect();
                    RandomBernoulliSystem::new(BaseProcess::iid(weights).unwrap(), Matrix::from_rows(rows).unwrap())
                        .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn sufficient_conditions_are_sound(system in admissible_system()) {
            let flags = check_conditions(&system).unwrap();
            if flags.dominant_letter || flags.close_probability_band {
                prop_assert!(flags.h2_lt_2h0);
            }
        }

        #[test]
        fn plugin_constant_in_k(system in admissible_system()) {
            let closed = renyi_closed_iid(&system).unwrap();
            for (_, h) in renyi_plugin_ladder(&system, 5).unwrap() {
                prop_assert!((h - closed).abs() < 1e-12);
            }
        }
    }
}
