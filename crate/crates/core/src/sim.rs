//! Erase-cycle simulation and efficiency metrics.
//!
//! A cycle starts from the all-zero state and feeds i.i.d. inputs to a code
//! until the encoder asks for an erase. The write that triggers the erase is
//! dropped. Over `M` cycles the engine reports the mean number of
//! incrementing writes `E[R]`, the loss factor `eta = 1 - E[R] / (n(q-1))`
//! and the storage efficiency `gamma = E[R] * H(p_X) / (n(q-1))` in bits per
//! cell level.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ballsbins::balls_until_overflow;
use crate::cell::{CodeKind, CodeParams, WriteOutcome};
use crate::codes::{Code, ModulationCode};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("distribution is empty")]
    EmptyDistribution,
    #[error("probability {value} at index {index} is negative or not finite")]
    BadProbability { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1 within 1e-9")]
    NotNormalized(f64),
    #[error("distribution has {got} entries, the code stores {expected} values")]
    LengthMismatch { expected: u64, got: usize },
    #[error("distribution has a single possible value, so no cycle ever ends")]
    Degenerate,
    #[error("cannot read distribution file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: cannot parse {text:?} as a probability")]
    Parse {
        path: String,
        line: usize,
        text: String,
    },
    #[error("at least one cycle is required")]
    NoCycles,
}

/// Categorical input law over `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    probs: Vec<f64>,
    cdf: Vec<f64>,
    last_supported: usize,
}

impl DistributionSpec {
    pub fn new(probs: Vec<f64>) -> Result<Self, SimError> {
        if probs.is_empty() {
            return Err(SimError::EmptyDistribution);
        }
        if let Some((index, &value)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(SimError::BadProbability { index, value });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() >= 1e-9 {
            return Err(SimError::NotNormalized(total));
        }
        let cdf = probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let last_supported = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Ok(Self {
            probs,
            cdf,
            last_supported,
        })
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size >= 1);
        Self::new(vec![1.0 / size as f64; size]).expect("uniform is normalized")
    }

    pub fn point_mass(size: usize, at: usize) -> Self {
        let mut probs = vec![0.0; size];
        probs[at] = 1.0;
        Self::new(probs).expect("point mass is normalized")
    }

    /// Plain text, one probability per line; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self, SimError> {
        let text = fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, SimError> {
        let mut probs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let p = line.parse::<f64>().map_err(|_| SimError::Parse {
                path: origin.to_string(),
                line: i + 1,
                text: line.to_string(),
            })?;
            probs.push(p);
        }
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }

    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(self)
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.last_supported) as u64
    }
}

pub fn sample_input<R: Rng + ?Sized>(dist: &DistributionSpec, rng: &mut R) -> u64 {
    dist.sample(rng)
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy_bits(dist: &DistributionSpec) -> f64 {
    let h: f64 = dist
        .probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

/// `(log2(k l), k log2 l)`: efficiency bounds for codes that may change one
/// cell per write and codes that may change any number of cells.
pub fn gamma_upper_bounds(k: u32, l: u32) -> (f64, f64) {
    assert!(k >= 1 && l >= 2);
    let (k, l) = (k as f64, l as f64);
    ((k * l).log2(), k * l.log2())
}

/// Per-cycle seed for cycle `index` under `master_seed`.
///
/// SplitMix64: the master seed is advanced by `index + 1` golden-ratio
/// increments and passed through the SplitMix64 output mix.
pub fn split_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn cycle_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split_seed(master_seed, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CycleStats {
    /// Writes that raised a level.
    pub r_inc: u64,
    /// All accepted writes, including ones that left the state unchanged.
    pub r_total: u64,
    pub final_max_level: u32,
}

/// Feeds `inputs` to `code` from the zero state until an erase is required
/// or the inputs run out.
pub fn run_cycle_with_inputs<C, I>(code: &C, inputs: I) -> CycleStats
where
    C: ModulationCode + ?Sized,
    I: IntoIterator<Item = u64>,
{
    let mut state = code.zero_state();
    let mut stats = CycleStats::default();
    for x in inputs {
        match code.encode(&mut state, x) {
            WriteOutcome::Written(_) => {
                stats.r_inc += 1;
                stats.r_total += 1;
            }
            WriteOutcome::NoOp => stats.r_total += 1,
            WriteOutcome::EraseRequired => break,
        }
    }
    stats.final_max_level = state.max_level();
    stats
}

/// One erase cycle with inputs drawn from `dist`.
///
/// Panics if `dist` has fewer than two possible values, since the cycle
/// would then never end.
pub fn run_cycle<C, R>(code: &C, dist: &DistributionSpec, rng: &mut R) -> CycleStats
where
    C: ModulationCode + ?Sized,
    R: Rng + ?Sized,
{
    assert!(dist.support_size() >= 2, "degenerate input distribution");
    assert_eq!(dist.len() as u64, code.params().alphabet_size());
    run_cycle_with_inputs(code, std::iter::repeat_with(|| dist.sample(rng)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStats {
    pub code: String,
    pub k: u32,
    pub l: u32,
    pub q: u32,
    pub n: u64,
    pub cycles: u64,
    pub mean_r_inc: f64,
    pub mean_r_total: f64,
    pub eta: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl ExperimentStats {
    pub fn kind(&self) -> Option<CodeKind> {
        match self.code.as_str() {
            "self-randomized" => Some(CodeKind::SelfRandomized),
            "load-balancing" => Some(CodeKind::LoadBalancing),
            _ => None,
        }
    }
}

fn check_inputs(params: &CodeParams, dist: &DistributionSpec, cycles: u64) -> Result<(), SimError> {
    if cycles == 0 {
        return Err(SimError::NoCycles);
    }
    if dist.len() as u64 != params.alphabet_size() {
        return Err(SimError::LengthMismatch {
            expected: params.alphabet_size(),
            got: dist.len(),
        });
    }
    if dist.support_size() < 2 {
        return Err(SimError::Degenerate);
    }
    Ok(())
}

/// Runs `cycles` independent cycles; entry `i` uses `cycle_rng(master_seed, i)`.
pub fn run_cycles(
    params: &CodeParams,
    dist: &DistributionSpec,
    cycles: u64,
    master_seed: u64,
) -> Result<Vec<CycleStats>, SimError> {
    check_inputs(params, dist, cycles)?;
    let code = Code::new(*params);
    Ok((0..cycles)
        .into_par_iter()
        .map(|i| run_cycle(&code, dist, &mut cycle_rng(master_seed, i)))
        .collect())
}

/// Aggregates per-cycle results into `E[R]`, `eta` and `gamma`.
pub fn summarize(
    params: &CodeParams,
    dist: &DistributionSpec,
    cycles: &[CycleStats],
    master_seed: u64,
) -> ExperimentStats {
    let m = cycles.len() as f64;
    let inc: u64 = cycles.iter().map(|c| c.r_inc).sum();
    let total: u64 = cycles.iter().map(|c| c.r_total).sum();
    let mean_r_inc = inc as f64 / m;
    let capacity = params.capacity() as f64;
    ExperimentStats {
        code: params.kind().name().to_string(),
        k: params.k(),
        l: params.l(),
        q: params.q(),
        n: params.n() as u64,
        cycles: cycles.len() as u64,
        mean_r_inc,
        mean_r_total: total as f64 / m,
        eta: 1.0 - mean_r_inc / capacity,
        gamma: mean_r_inc * entropy_bits(dist) / capacity,
        seed: master_seed,
    }
}

pub fn run_experiment(
    params: &CodeParams,
    dist: &DistributionSpec,
    cycles: u64,
    master_seed: u64,
) -> Result<ExperimentStats, SimError> {
    let per_cycle = run_cycles(params, dist, cycles, master_seed)?;
    Ok(summarize(params, dist, &per_cycle, master_seed))
}

/// Loss factor of plain random loading: `1 - E[balls until overflow] / (n(q-1))`.
pub fn random_loading_eta(n: usize, q: u32, d: usize, trials: u64, master_seed: u64) -> f64 {
    assert!(trials >= 1);
    let total: u64 = (0..trials)
        .into_par_iter()
        .map(|i| balls_until_overflow(n, q, d, &mut cycle_rng(master_seed, i)))
        .sum();
    1.0 - total as f64 / trials as f64 / (n as f64 * (q as f64 - 1.0))
}

/// Result of [`roundtrip_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundTripReport {
    pub written: u64,
    pub noops: u64,
    pub erases: u64,
    /// Writes after which the decoded value differed from the written one.
    pub mismatches: u64,
}

impl RoundTripReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

/// Stores `writes` uniform random values, erasing whenever the code asks,
/// and decodes after every accepted write.
pub fn roundtrip_check(params: &CodeParams, writes: u64, seed: u64) -> RoundTripReport {
    let code = Code::new(*params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = code.zero_state();
    let mut report = RoundTripReport::default();
    let values = params.alphabet_size();
    let mut accepted = 0;
    while accepted < writes {
        let x = rng.random_range(0..values);
        match code.encode(&mut state, x) {
            WriteOutcome::Written(_) => report.written += 1,
            WriteOutcome::NoOp => report.noops += 1,
            WriteOutcome::EraseRequired => {
                report.erases += 1;
                state.erase();
                continue;
            }
        }
        accepted += 1;
        if code.decode(&state) != x {
            report.mismatches += 1;
        }
    }
    report
}

/// Bootstrap estimate of `E[min of N draws]` from the empirical law of `samples`.
pub fn min_of_n_expectation<R: Rng + ?Sized>(
    samples: &[f64],
    n: usize,
    resamples: usize,
    rng: &mut R,
) -> f64 {
    assert!(!samples.is_empty() && n >= 1 && resamples >= 1);
    let total: f64 = (0..resamples)
        .map(|_| {
            (0..n)
                .map(|_| samples[rng.random_range(0..samples.len())])
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / resamples as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_validation() {
        assert!(matches!(
            DistributionSpec::new(vec![]),
            Err(SimError::EmptyDistribution)
        ));
        assert!(matches!(
            DistributionSpec::new(vec![0.5, 0.6]),
            Err(SimError::NotNormalized(_))
        ));
        assert!(matches!(
            DistributionSpec::new(vec![1.5, -0.5]),
            Err(SimError::BadProbability { index: 1, .. })
        ));
        assert!(matches!(
            DistributionSpec::new(vec![f64::NAN, 1.0]),
            Err(SimError::BadProbability { index: 0, .. })
        ));
        assert!(DistributionSpec::new(vec![0.25; 4]).is_ok());
    }

    #[test]
    fn parse_distribution_text() {
        let d = DistributionSpec::parse("# header\n0.5\n\n0.25 # trailing\n0.25\n", "x").unwrap();
        assert_eq!(d.probs(), &[0.5, 0.25, 0.25]);
        assert!(matches!(
            DistributionSpec::parse("0.5\nabc\n", "f"),
            Err(SimError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn sampling_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pm = DistributionSpec::point_mass(8, 3);
        assert!((0..1000).all(|_| sample_input(&pm, &mut rng) == 3));

        let half = DistributionSpec::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!((0..10_000).all(|_| sample_input(&half, &mut rng) < 2));

        let trailing_zero = DistributionSpec::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert!((0..1000).all(|_| sample_input(&trailing_zero, &mut rng) == 1));

        let uni = DistributionSpec::uniform(4);
        let draws = 100_000;
        let mut counts = [0u64; 4];
        for _ in 0..draws {
            counts[sample_input(&uni, &mut rng) as usize] += 1;
        }
        let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!(
                (c as f64 - draws as f64 * 0.25).abs() <= 3.0 * sigma,
                "{counts:?}"
            );
        }
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy_bits(&DistributionSpec::uniform(8)) - 3.0).abs() < 1e-12);
        assert_eq!(entropy_bits(&DistributionSpec::point_mass(4, 1)), 0.0);
        let d = DistributionSpec::new(vec![0.5, 0.25, 0.25]).unwrap();
        assert!((entropy_bits(&d) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn gamma_bound_examples() {
        let (a, b) = gamma_upper_bounds(3, 2);
        assert!((a - 6f64.log2()).abs() < 1e-12 && (a - 2.585).abs() < 1e-3);
        assert_eq!(b, 3.0);
        assert_eq!(gamma_upper_bounds(1, 2), (1.0, 1.0));
        assert_eq!(gamma_upper_bounds(2, 2), (2.0, 2.0));
    }

    #[test]
    fn sr_cycle_from_fixed_stream() {
        let code = Code::new(CodeParams::self_randomized(1, 2).unwrap());
        let stats = run_cycle_with_inputs(&code, [1, 0, 1]);
        assert_eq!(stats.r_inc, 2);
        assert_eq!(stats.r_total, 2);
        assert_eq!(stats.final_max_level, 1);
    }

    #[test]
    fn noops_are_counted_separately() {
        let code = Code::new(CodeParams::self_randomized(2, 4).unwrap());
        let stats = run_cycle_with_inputs(&code, [1, 1, 1, 2, 2]);
        assert_eq!(stats.r_inc, 2);
        assert_eq!(stats.r_total, 5);
    }

    #[test]
    fn q2_never_exceeds_n_increments() {
        for params in [
            CodeParams::self_randomized(3, 2).unwrap(),
            CodeParams::load_balancing(3, 2).unwrap(),
        ] {
            let dist = DistributionSpec::uniform(params.alphabet_size() as usize);
            for c in run_cycles(&params, &dist, 200, 4).unwrap() {
                assert!(c.r_inc <= params.n() as u64);
                assert!(c.r_inc <= c.r_total);
                assert!(c.final_max_level <= 1);
            }
        }
    }

    #[test]
    fn lb_cycle_is_reproducible() {
        let params = CodeParams::load_balancing(1, 3).unwrap();
        let code = Code::new(params);
        let alternating = || (0..).map(|i| i % 2);
        let a = run_cycle_with_inputs(&code, alternating());
        let b = run_cycle_with_inputs(&code, alternating());
        assert_eq!(a, b);
        let dist = DistributionSpec::uniform(2);
        let x = run_cycle(&code, &dist, &mut cycle_rng(99, 0));
        let y = run_cycle(&code, &dist, &mut cycle_rng(99, 0));
        assert_eq!(x, y);
    }

    #[test]
    fn experiment_of_one_cycle_matches_run_cycle() {
        let params = CodeParams::self_randomized(3, 8).unwrap();
        let dist = DistributionSpec::uniform(8);
        let stats = run_experiment(&params, &dist, 1, 7).unwrap();
        let single = run_cycle(&Code::new(params), &dist, &mut cycle_rng(7, 0));
        assert_eq!(stats.mean_r_inc, single.r_inc as f64);
        assert_eq!(stats.mean_r_total, single.r_total as f64);
        assert_eq!(stats.cycles, 1);
        assert_eq!(stats.eta, 1.0 - single.r_inc as f64 / 56.0);
    }

    #[test]
    fn experiment_is_deterministic() {
        let params = CodeParams::load_balancing(3, 8).unwrap();
        let dist = DistributionSpec::uniform(8);
        let a = run_experiment(&params, &dist, 300, 42).unwrap();
        let b = run_experiment(&params, &dist, 300, 42).unwrap();
        assert_eq!(a, b);
        let c = run_experiment(&params, &dist, 300, 43).unwrap();
        assert_ne!(a.mean_r_inc, c.mean_r_inc);
    }

    #[test]
    fn experiment_rejects_bad_inputs() {
        let params = CodeParams::self_randomized(2, 8).unwrap();
        assert!(matches!(
            run_experiment(&params, &DistributionSpec::uniform(8), 10, 0),
            Err(SimError::LengthMismatch {
                expected: 4,
                got: 8
            })
        ));
        assert!(matches!(
            run_experiment(&params, &DistributionSpec::point_mass(4, 2), 10, 0),
            Err(SimError::Degenerate)
        ));
        assert!(matches!(
            run_experiment(&params, &DistributionSpec::uniform(4), 0, 0),
            Err(SimError::NoCycles)
        ));
    }

    #[test]
    fn skewed_inputs_still_spread_writes() {
        // A heavily skewed source still fills the cells evenly, so the loss
        // factor stays close to the uniform-input value.
        let params = CodeParams::self_randomized(3, 16).unwrap();
        let skew =
            DistributionSpec::new(vec![0.65, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05]).unwrap();
        let uni = DistributionSpec::uniform(8);
        let a = run_experiment(&params, &skew, 2000, 1).unwrap();
        let b = run_experiment(&params, &uni, 2000, 1).unwrap();
        assert!((a.eta - b.eta).abs() < 0.03, "{} vs {}", a.eta, b.eta);
        assert!(a.gamma < b.gamma);
        assert!(a.mean_r_total > a.mean_r_inc);
    }

    #[test]
    fn roundtrip_check_counts() {
        let params = CodeParams::load_balancing(2, 4).unwrap();
        let r = roundtrip_check(&params, 5000, 1);
        assert!(r.passed());
        assert_eq!(r.written + r.noops, 5000);
        assert!(r.erases > 0 && r.noops > 0);
    }

    #[test]
    fn seed_split_separates_cycles() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| split_seed(1, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(split_seed(1, 0), split_seed(2, 0));
    }

    #[test]
    fn min_of_n_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(min_of_n_expectation(&[4.0; 10], 7, 100, &mut rng), 4.0);
        assert_eq!(min_of_n_expectation(&[1.0, 2.0], 200, 500, &mut rng), 1.0);

        let samples: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let mean = 49.5;
        let resamples = 20_000;
        let est = min_of_n_expectation(&samples, 1, resamples, &mut rng);
        let sd = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / 100.0).sqrt();
        assert!(
            (est - mean).abs() <= 3.0 * sd / (resamples as f64).sqrt(),
            "{est}"
        );

        // E[min of 2] by brute force over all ordered pairs.
        let brute: f64 = samples
            .iter()
            .flat_map(|a| samples.iter().map(move |b| a.min(*b)))
            .sum::<f64>()
            / 10_000.0;
        let est2 = min_of_n_expectation(&samples, 2, 200_000, &mut rng);
        assert!((est2 - brute).abs() < 0.3, "{est2} vs {brute}");
    }
}
