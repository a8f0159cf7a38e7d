//! Monte Carlo growth experiments for `M_n / log n`.
//!
//! Quenched runs fix an environment and draw both sequences from the same
//! sample measure; annealed runs draw a fresh environment for every
//! sequence. The classical modes drop the random environment entirely and
//! compare i.i.d. or Markov sequences. In every mode the mean match curve
//! is regressed on `log n` and compared with `2 / H₂`.

use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base_env::{sample_environment, BaseProcess, Environment};
use crate::entropy;
use crate::error::{Error, Result};
use crate::linalg::{pairwise_mean, Matrix};
use crate::matching::match_curve;
use crate::measures::RandomBernoulliSystem;
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::Symbol;

const ENVIRONMENT_TAG: u64 = 0x656e76;
const PAIR_TAG: u64 = 0x70616972;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Quenched,
    Annealed,
    ClassicalIid,
    ClassicalMarkov,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Quenched => "quenched",
            Mode::Annealed => "annealed",
            Mode::ClassicalIid => "classical_iid",
            Mode::ClassicalMarkov => "classical_markov",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub base: BaseProcess,
    /// Required in every mode except `ClassicalMarkov`.
    pub emission: Option<Matrix>,
    pub mode: Mode,
    pub ladder: Vec<usize>,
    pub replicates: usize,
    /// Distinct environments in quenched mode; ignored otherwise.
    pub environments: usize,
    pub seed: u64,
    pub burn_in_rungs: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(Error::InvalidParameter("ladder is empty".into()));
        }
        if self.ladder[0] < 2 {
            return Err(Error::InvalidParameter("ladder rungs must be at least 2".into()));
        }
        if self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("ladder must be strictly increasing".into()));
        }
        if self.replicates == 0 || self.environments == 0 {
            return Err(Error::InvalidParameter("replicates and environments must be positive".into()));
        }
        if self.burn_in_rungs >= self.ladder.len() {
            return Err(Error::InvalidParameter("burn_in_rungs must be smaller than the ladder".into()));
        }
        if self.mode != Mode::ClassicalMarkov {
            self.system()?;
        }
        Ok(())
    }

    pub fn system(&self) -> Result<RandomBernoulliSystem> {
        let emission = self
            .emission
            .clone()
            .ok_or_else(|| Error::InvalidParameter(format!("mode {} needs an emission matrix", self.mode.name())))?;
        RandomBernoulliSystem::new(self.base.clone(), emission)
    }

    pub fn max_length(&self) -> usize {
        *self.ladder.last().expect("validated ladder")
    }

    /// `2 / H₂` whenever `H₂` is known in closed form for this mode.
    pub fn theoretical_slope(&self) -> Result<Option<f64>> {
        let h2 = match self.mode {
            Mode::Quenched | Mode::Annealed => match self.base {
                BaseProcess::Iid { .. } => Some(entropy::renyi_closed_iid(&self.system()?)?),
                BaseProcess::Markov { .. } => None,
            },
            Mode::ClassicalIid => {
                let q = self.system()?.marginal_emission();
                Some(-q.iter().map(|p| p * p).sum::<f64>().ln())
            }
            Mode::ClassicalMarkov => match &self.base {
                BaseProcess::Markov { transition, .. } => Some(entropy::renyi_closed_markov(transition)?),
                BaseProcess::Iid { weights } => Some(-weights.iter().map(|p| p * p).sum::<f64>().ln()),
            },
        };
        Ok(h2.map(|h| 2.0 / h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Ordinary least squares of `value` on `log n`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateLadder { points: points.len() });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateLadder { points: points.len() });
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(LinearFit { slope, intercept, stderr: (sse / (n - 2.0) / sxx).sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSummary {
    pub env_index: usize,
    /// Seed of the fixed environment; `None` when environments are fresh
    /// per replicate.
    pub environment_seed: Option<u64>,
    pub mean_curve: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub pair_slopes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub mode: Mode,
    pub ladder: Vec<usize>,
    pub burn_in_rungs: usize,
    pub per_environment: Vec<EnvironmentSummary>,
    pub pooled_curve: Vec<f64>,
    pub pooled_slope: f64,
    pub pooled_intercept: f64,
    pub pooled_slope_stderr: f64,
    /// Monte Carlo standard error of the pooled slope, from the spread of
    /// per-pair slopes.
    pub pooled_slope_mc_se: f64,
    pub theoretical_slope: Option<f64>,
    pub relative_error: Option<f64>,
}

fn regression_points(ladder: &[usize], values: &[f64], burn_in: usize) -> Vec<(f64, f64)> {
    ladder.iter().zip(values).skip(burn_in).map(|(&n, &v)| ((n as f64).ln(), v)).collect()
}

/// How each replicate's pair of sequences is drawn.
enum PairSource<'a> {
    /// Both sequences from `μ_ω` for one fixed `ω`.
    Quenched { system: &'a RandomBernoulliSystem, env: &'a Environment, env_index: u64 },
    /// Each sequence from its own fresh environment.
    Annealed { system: &'a RandomBernoulliSystem },
    /// I.i.d. symbols from a fixed law.
    Iid { law: WeightedIndex<f64> },
    /// Independent runs of the base process itself.
    Base { process: &'a BaseProcess },
}

impl PairSource<'_> {
    fn env_index(&self) -> u64 {
        match self {
            PairSource::Quenched { env_index, .. } => *env_index,
            _ => 0,
        }
    }

    fn draw(&self, n: usize, root: u64, replicate: u64, side: u64) -> Result<Vec<Symbol>> {
        let seed = derive_seed(root, &[PAIR_TAG, self.env_index(), replicate, side]);
        match self {
            PairSource::Quenched { system, env, .. } => system.sample_fiber_sequence(env, n, seed),
            PairSource::Annealed { system } => {
                let env = sample_environment(system.base(), n, seed)?;
                system.sample_fiber_sequence(&env, n, seed)
            }
            PairSource::Iid { law } => {
                let mut rng = stream_rng(seed, Stream::Classical);
                Ok((0..n).map(|_| law.sample(&mut rng) as Symbol).collect())
            }
            PairSource::Base { process } => Ok(sample_environment(process, n, seed)?.symbols().to_vec()),
        }
    }
}

fn summarize(
    config: &ExperimentConfig,
    source: &PairSource<'_>,
    env_index: usize,
    environment_seed: Option<u64>,
) -> Result<EnvironmentSummary> {
    let n = config.max_length();
    let curves = (0..config.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let x = source.draw(n, config.seed, r, 0)?;
            let y = source.draw(n, config.seed, r, 1)?;
            Ok(match_curve(&x, &y, &config.ladder)?.values)
        })
        .collect::<Result<Vec<Vec<usize>>>>()?;
    let mean_curve: Vec<f64> = (0..config.ladder.len())
        .map(|t| pairwise_mean(&curves.iter().map(|c| c[t] as f64).collect::<Vec<_>>()))
        .collect();
    let fit = fit_slope(&regression_points(&config.ladder, &mean_curve, config.burn_in_rungs))?;
    let pair_slopes = curves
        .iter()
        .map(|c| {
            let values: Vec<f64> = c.iter().map(|&v| v as f64).collect();
            fit_slope(&regression_points(&config.ladder, &values, config.burn_in_rungs)).map(|f| f.slope)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EnvironmentSummary {
        env_index,
        environment_seed,
        mean_curve,
        slope: fit.slope,
        intercept: fit.intercept,
        slope_stderr: fit.stderr,
        pair_slopes,
    })
}

fn assemble(config: &ExperimentConfig, per_environment: Vec<EnvironmentSummary>) -> Result<ExperimentResult> {
    let pooled_curve: Vec<f64> = (0..config.ladder.len())
        .map(|t| pairwise_mean(&per_environment.iter().map(|e| e.mean_curve[t]).collect::<Vec<_>>()))
        .collect();
    let fit = fit_slope(&regression_points(&config.ladder, &pooled_curve, config.burn_in_rungs))?;
    let slopes: Vec<f64> = per_environment.iter().flat_map(|e| e.pair_slopes.iter().copied()).collect();
    let mc_se = if slopes.len() > 1 {
        let mean = pairwise_mean(&slopes);
        let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (slopes.len() - 1) as f64;
        (var / slopes.len() as f64).sqrt()
    } else {
        0.0
    };
    let theoretical_slope = config.theoretical_slope()?;
    Ok(ExperimentResult {
        mode: config.mode,
        ladder: config.ladder.clone(),
        burn_in_rungs: config.burn_in_rungs,
        per_environment,
        pooled_curve,
        pooled_slope: fit.slope,
        pooled_intercept: fit.intercept,
        pooled_slope_stderr: fit.stderr,
        pooled_slope_mc_se: mc_se,
        theoretical_slope,
        relative_error: theoretical_slope.map(|t| (fit.slope - t).abs() / t),
    })
}

/// Fixed-environment experiment: for each of `environments` sampled `ω`,
/// `replicates` pairs are drawn from `μ_ω ⊗ μ_ω`.
pub fn run_quenched(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    if config.mode != Mode::Quenched {
        return Err(Error::InvalidParameter(format!("run_quenched called with mode {}", config.mode.name())));
    }
    let system = config.system()?;
    let per_environment = (0..config.environments)
        .map(|e| {
            let env_seed = derive_seed(config.seed, &[ENVIRONMENT_TAG, e as u64]);
            let env = sample_environment(system.base(), config.max_length(), env_seed)?;
            let source = PairSource::Quenched { system: &system, env: &env, env_index: e as u64 };
            summarize(config, &source, e, Some(env_seed))
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(config, per_environment)
}

/// Experiment with a fresh environment per sequence, or one of the
/// classical environment-free modes.
pub fn run_annealed(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let system;
    let source = match config.mode {
        Mode::Annealed => {
            system = config.system()?;
            PairSource::Annealed { system: &system }
        }
        Mode::ClassicalIid => {
            let q = config.system()?.marginal_emission();
            PairSource::Iid { law: WeightedIndex::new(&q).expect("validated emission") }
        }
        Mode::ClassicalMarkov => PairSource::Base { process: &config.base },
        Mode::Quenched => {
            return Err(Error::InvalidParameter("run_annealed called with mode quenched".into()));
        }
    };
    let summary = summarize(config, &source, 0, None)?;
    assemble(config, vec![summary])
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    match config.mode {
        Mode::Quenched => run_quenched(config),
        _ => run_annealed(config),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub mean_mn: f64,
    pub mn_over_logn: f64,
    /// `2 log n / H₂` when `H₂` is known.
    pub theoretical_mn: Option<f64>,
}

pub fn convergence_table(result: &ExperimentResult) -> Result<Vec<ConvergenceRow>> {
    if result.ladder.is_empty() || result.pooled_curve.len() != result.ladder.len() {
        return Err(Error::InvalidParameter("result has no ladder".into()));
    }
    Ok(result
        .ladder
        .iter()
        .zip(&result.pooled_curve)
        .map(|(&n, &mean)| {
            let log_n = (n as f64).ln();
            ConvergenceRow {
                n,
                mean_mn: mean,
                mn_over_logn: mean / log_n,
                theoretical_mn: result.theoretical_slope.map(|s| s * log_n),
            }
        })
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per environment and rung:
/// `mode,env_index,n,mean_Mn,Mn_over_logn,slope,theoretical_slope`.
pub fn to_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("mode,env_index,n,mean_Mn,Mn_over_logn,slope,theoretical_slope\n");
    for env in &result.per_environment {
        for (&n, &mean) in result.ladder.iter().zip(&env.mean_curve) {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                result.mode.name(),
                env.env_index,
                n,
                mean,
                mean / (n as f64).ln(),
                env.slope,
                fmt_opt(result.theoretical_slope)
            )
            .expect("writing to a String");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Box–Muller standard normal.
    fn normal<R: Rng>(rng: &mut R) -> f64 {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let v: f64 = rng.gen();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }

    fn reference_config(mode: Mode) -> ExperimentConfig {
        ExperimentConfig {
            base: BaseProcess::uniform(2).unwrap(),
            emission: Some(Matrix::from_rows(vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap()),
            mode,
            ladder: vec![64, 128, 256, 512, 1024],
            replicates: 4,
            environments: 2,
            seed: 9,
            burn_in_rungs: 0,
        }
    }

    #[test]
    fn fit_exact_affine_and_constant() {
        let pts: Vec<(f64, f64)> = (10..=20).map(|k| {
            let x = (2f64.powi(k)).ln();
            (x, 2.885 * x + 1.0)
        }).collect();
        let fit = fit_slope(&pts).unwrap();
        assert!((fit.slope - 2.885).abs() < 1e-12 && (fit.intercept - 1.0).abs() < 1e-10);
        assert!(fit.stderr < 1e-10);
        let flat: Vec<(f64, f64)> = (1..6).map(|i| (i as f64, 3.0)).collect();
        assert_eq!(fit_slope(&flat).unwrap().slope, 0.0);
    }

    #[test]
    fn fit_degenerate() {
        assert_eq!(fit_slope(&[(1.0, 1.0), (2.0, 2.0)]), Err(Error::DegenerateLadder { points: 2 }));
        assert_eq!(fit_slope(&[(1.0, 1.0); 4]), Err(Error::DegenerateLadder { points: 4 }));
    }

    #[test]
    fn fit_noisy_line_within_three_stderr() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts: Vec<(f64, f64)> = (0..10_000)
            .map(|_| {
                let x: f64 = rng.gen_range(0.0..15.0);
                (x, 1.5 * x - 2.0 + 0.7 * normal(&mut rng))
            })
            .collect();
        let fit = fit_slope(&pts).unwrap();
        assert!((fit.slope - 1.5).abs() < 3.0 * fit.stderr, "{fit:?}");
    }

    #[test]
    fn validation() {
        let mut c = reference_config(Mode::Quenched);
        assert!(c.validate().is_ok());
        c.ladder = vec![8, 8, 16];
        assert!(c.validate().is_err());
        c = reference_config(Mode::Quenched);
        c.burn_in_rungs = 5;
        assert!(c.validate().is_err());
        c = reference_config(Mode::Annealed);
        c.emission = None;
        assert!(c.validate().is_err());
        c.mode = Mode::ClassicalMarkov;
        assert!(c.validate().is_ok());
        assert!(run_annealed(&reference_config(Mode::Quenched)).is_err());
        assert!(run_quenched(&reference_config(Mode::Annealed)).is_err());
    }

    #[test]
    fn single_rung_is_degenerate() {
        let c = ExperimentConfig { ladder: vec![20], replicates: 1, environments: 1, ..reference_config(Mode::Quenched) };
        let system = c.system().unwrap();
        let env = sample_environment(system.base(), 20, 1).unwrap();
        let x = system.sample_fiber_sequence(&env, 20, 5).unwrap();
        let y = system.sample_fiber_sequence(&env, 20, 5).unwrap();
        assert_eq!(match_curve(&x, &y, &[20]).unwrap().values, vec![20]);
        assert_eq!(fit_slope(&[((20f64).ln(), 20.0)]), Err(Error::DegenerateLadder { points: 1 }));
        assert_eq!(run_quenched(&c), Err(Error::DegenerateLadder { points: 1 }));
    }

    #[test]
    fn quenched_shape_and_determinism() {
        let c = reference_config(Mode::Quenched);
        let a = run_quenched(&c).unwrap();
        assert_eq!(a.per_environment.len(), 2);
        assert!(a.per_environment.iter().all(|e| e.pair_slopes.len() == 4 && e.environment_seed.is_some()));
        assert_eq!(a, run_quenched(&c).unwrap());
        assert_eq!(to_csv(&a), to_csv(&run_quenched(&c).unwrap()));
        let other = run_quenched(&ExperimentConfig { seed: 10, ..c }).unwrap();
        assert_ne!(a.pooled_curve, other.pooled_curve);
    }

    #[test]
    fn annealed_and_classical_shapes() {
        for mode in [Mode::Annealed, Mode::ClassicalIid] {
            let r = run_annealed(&reference_config(mode)).unwrap();
            assert_eq!(r.per_environment.len(), 1);
            assert!((r.theoretical_slope.unwrap() - 2.0 / std::f64::consts::LN_2).abs() < 1e-12);
        }
        let markov = ExperimentConfig {
            base: BaseProcess::markov(Matrix::from_rows(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap()).unwrap(),
            emission: None,
            ..reference_config(Mode::ClassicalMarkov)
        };
        let r = run_annealed(&markov).unwrap();
        assert!((r.theoretical_slope.unwrap() - 2.0 / -(0.82f64.ln())).abs() < 1e-9);
        let markov_quenched = ExperimentConfig {
            emission: Some(Matrix::from_rows(vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap()),
            mode: Mode::Quenched,
            ..markov
        };
        assert_eq!(run_quenched(&markov_quenched).unwrap().theoretical_slope, None);
    }

    #[test]
    fn determinism_across_thread_counts() {
        let c = reference_config(Mode::Quenched);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_quenched(&c).unwrap())
        };
        assert_eq!(to_csv(&run(1)), to_csv(&run(4)));
    }

    #[test]
    fn table_and_csv() {
        let r = run_annealed(&reference_config(Mode::ClassicalIid)).unwrap();
        let table = convergence_table(&r).unwrap();
        assert_eq!(table.len(), 5);
        let slope = 2.0 / std::f64::consts::LN_2;
        assert!((table[4].theoretical_mn.unwrap() - slope * 1024f64.ln()).abs() < 1e-12);
        let csv = to_csv(&r);
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("mode,env_index,n,mean_Mn,Mn_over_logn,slope,theoretical_slope\n"));
        let mut empty = r.clone();
        empty.ladder.clear();
        assert!(convergence_table(&empty).is_err());
    }

    #[test]
    fn four_letter_theoretical_column() {
        let mut r = run_annealed(&reference_config(Mode::ClassicalIid)).unwrap();
        r.theoretical_slope = Some(2.0 / 4f64.ln());
        r.ladder = vec![1 << 20];
        r.pooled_curve = vec![0.0];
        let row = convergence_table(&r).unwrap()[0];
        assert!((row.theoretical_mn.unwrap() - 20.0).abs() < 1e-12);
    }
}
