//! Benchmark harness: timed runs of the clustering pipeline over families
//! of generated matrices, with per-stage statistics, permutation-aligned
//! coarse-matrix comparisons, and quadratic cost-model fits.
//!
//! A plan fixes a generator template, a list of matrix sizes, and a trial
//! count; [`run_bench`] executes every (size, trial) cell, timing the
//! spectral, optimization, and coarse-graining stages separately with a
//! monotonic clock. One warm-up run per size is executed and discarded so
//! cache and allocator effects do not inflate the first recorded trial.
//! A trial that fails (for example because the requested cluster count
//! would split a conjugate pair) is recorded with its error message and
//! does not abort the plan.
//!
//! All matrix content is reproducible: trial `(size, t)` uses the seed
//! `seed_base ^ splitmix64((size << 32) | t)`, so re-running a plan yields
//! bitwise-identical matrices and coarse results. Only the timings vary.

use std::time::Instant;

use itertools::Itertools;
use ndarray::{Array1, Array2};
use ndarray_linalg::{LeastSquaresSvd, SVD};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{generate_circular, generate_nearly_uncoupled, CircularSpec, StochasticMatrix};
use crate::pcca::{coarse_grain, optimize, OptimizeOptions, OptimizerMethod};
use crate::spectral::{EigenSelection, SelectionMode, SpectralBasis, WeightChoice};

/// Matrix family a benchmark draws from. The per-trial dimension comes from
/// the plan's size list; the template fixes everything else. Block counts
/// must divide every requested size.
#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorTemplate {
    /// Block-circulant chains with super-diagonal block structure and an
    /// optional dense perturbation (see [`crate::matrix::CircularSpec`]).
    Circular { blocks: usize, perturbation: f64 },
    /// Nearly uncoupled chains: block-diagonal with `coupling` total
    /// off-block mass per row.
    NearlyUncoupled { blocks: usize, coupling: f64 },
}

impl GeneratorTemplate {
    /// Number of blocks the template tiles the matrix with.
    pub fn blocks(&self) -> usize {
        match self {
            GeneratorTemplate::Circular { blocks, .. } => *blocks,
            GeneratorTemplate::NearlyUncoupled { blocks, .. } => *blocks,
        }
    }

    /// Instantiate the template at a concrete dimension.
    pub fn build(&self, size: usize, seed: u64) -> Result<StochasticMatrix> {
        let blocks = self.blocks();
        if blocks == 0 || size % blocks != 0 {
            return Err(Error::InvalidSpec(format!(
                "size {size} is not divisible into {blocks} blocks"
            )));
        }
        let block_size = size / blocks;
        match self {
            GeneratorTemplate::Circular { perturbation, .. } => {
                let spec = CircularSpec::new(blocks, block_size, *perturbation, seed)?;
                generate_circular(&spec)
            }
            GeneratorTemplate::NearlyUncoupled { coupling, .. } => {
                generate_nearly_uncoupled(blocks, block_size, *coupling, seed)
            }
        }
    }
}

/// Full description of a benchmark: what to generate, how to cluster it,
/// and how many repetitions to time.
#[derive(Clone, Debug)]
pub struct BenchPlan {
    /// Matrix dimensions, strictly increasing.
    pub sizes: Vec<usize>,
    /// Recorded repetitions per size (the warm-up run is extra).
    pub trials_per_size: usize,
    /// Matrix family to draw from.
    pub generator: GeneratorTemplate,
    /// Eigenvalue selection mode for the spectral stage.
    pub mode: SelectionMode,
    /// Number of clusters (dominant eigenvalues) per run.
    pub n_clusters: usize,
    /// Weighting for the inner product (uniform or stationary).
    pub weight: WeightChoice,
    /// Optimizer refining the initial simplex guess.
    pub method: OptimizerMethod,
    /// Iteration budget and tolerance for the optimizer.
    pub options: OptimizeOptions,
    /// Base seed; per-trial seeds are derived via [`trial_seed`].
    pub seed_base: u64,
    /// Run the trials of each size in parallel. Matrix content and coarse
    /// results are unaffected; timings of parallel trials contend for
    /// cores, so leave this off when the timings themselves matter.
    pub parallel: bool,
    /// Also record permutation-aligned pairwise distances between the
    /// coarse matrices of successful trials at the same size.
    pub pairwise_norms: bool,
}

impl BenchPlan {
    /// Plan with the common defaults: magnitude selection, uniform weight,
    /// Nelder-Mead, serial execution, no pairwise norms, seed base 0.
    pub fn new(
        sizes: Vec<usize>,
        trials_per_size: usize,
        generator: GeneratorTemplate,
        n_clusters: usize,
    ) -> Self {
        Self {
            sizes,
            trials_per_size,
            generator,
            mode: SelectionMode::LargestMagnitude,
            n_clusters,
            weight: WeightChoice::Uniform,
            method: OptimizerMethod::NelderMead,
            options: OptimizeOptions::default(),
            seed_base: 0,
            parallel: false,
            pairwise_norms: false,
        }
    }

    /// Check the plan before any work runs. Catches structural problems
    /// (empty or unsorted sizes, indivisible block counts) up front;
    /// per-trial numerical failures are still recorded at run time.
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::InvalidSpec("size list must not be empty".into()));
        }
        if self.sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec(format!(
                "sizes must be strictly increasing, got {:?}",
                self.sizes
            )));
        }
        if self.trials_per_size == 0 {
            return Err(Error::InvalidSpec(
                "trials per size must be at least 1".into(),
            ));
        }
        if self.n_clusters < 2 {
            return Err(Error::InvalidClusterCount(
                self.n_clusters,
                "benchmarking requires at least two clusters",
            ));
        }
        for &size in &self.sizes {
            let blocks = self.generator.blocks();
            if blocks == 0 || size % blocks != 0 {
                return Err(Error::InvalidSpec(format!(
                    "size {size} is not divisible into {blocks} blocks"
                )));
            }
            if self.n_clusters >= size {
                return Err(Error::InvalidEigenCount {
                    count: self.n_clusters,
                    dim: size,
                });
            }
        }
        if self.pairwise_norms && self.n_clusters > 5 {
            return Err(Error::PermutationSearchTooLarge(self.n_clusters));
        }
        Ok(())
    }
}

/// Wall-clock seconds per pipeline stage for one trial. `total` is timed
/// around the whole pipeline (generation excluded), so it is the sum of
/// the stages plus negligible glue.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    /// Eigendecomposition, realification, and orthonormalization.
    pub spectral: f64,
    /// Simplex guess, feasibilization, and optimizer iterations.
    pub optimize: f64,
    /// Projection of the full matrix onto the membership vectors.
    pub coarse_grain: f64,
    /// End-to-end pipeline time.
    pub total: f64,
}

impl StageTimings {
    /// Stage names in report order, matching [`StageTimings::get`].
    pub const STAGES: [&'static str; 4] = ["spectral", "optimize", "coarse_grain", "total"];

    /// Value of the named stage; `None` for an unknown name.
    pub fn get(&self, stage: &str) -> Option<f64> {
        match stage {
            "spectral" => Some(self.spectral),
            "optimize" => Some(self.optimize),
            "coarse_grain" => Some(self.coarse_grain),
            "total" => Some(self.total),
            _ => None,
        }
    }

    fn map2(a: &Self, b: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            spectral: f(a.spectral, b.spectral),
            optimize: f(a.optimize, b.optimize),
            coarse_grain: f(a.coarse_grain, b.coarse_grain),
            total: f(a.total, b.total),
        }
    }
}

/// Outcome of one (size, trial) cell. A failed trial keeps its seed and
/// error message so the run can be reproduced in isolation.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub size: usize,
    pub trial: usize,
    /// Seed the matrix was generated with (derived, not the plan base).
    pub seed: u64,
    /// Stage timings; `None` when the trial failed.
    pub timings: Option<StageTimings>,
    /// Crispness of the optimized membership; `None` when the trial failed.
    pub crispness: Option<f64>,
    /// Coarse transition matrix; `None` when the trial failed.
    pub coarse_matrix: Option<Array2<f64>>,
    /// Error message for a failed trial.
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// Per-size aggregate over the successful trials.
#[derive(Clone, Debug)]
pub struct SizeSummary {
    pub size: usize,
    pub successes: usize,
    pub failures: usize,
    /// Mean stage timings; `None` when every trial failed.
    pub mean: Option<StageTimings>,
    /// Sample standard deviation with the unbiased (n-1) denominator;
    /// `None` with fewer than two successful trials.
    pub std: Option<StageTimings>,
}

/// Permutation-aligned distance between the coarse matrices of two
/// successful trials at the same size, under each supported norm.
#[derive(Clone, Debug)]
pub struct PairwiseDifference {
    pub size: usize,
    pub trial_a: usize,
    pub trial_b: usize,
    /// Induced 1-norm (max column sum) of the aligned difference.
    pub norm_1: f64,
    /// Spectral norm (largest singular value) of the aligned difference.
    pub norm_2: f64,
    /// Induced infinity-norm (max row sum) of the aligned difference.
    pub norm_inf: f64,
}

/// Everything a benchmark run produced: the raw trial records in
/// (size, trial) order, per-size statistics, and (when requested)
/// pairwise coarse-matrix distances.
#[derive(Clone, Debug)]
pub struct BenchReport {
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<SizeSummary>,
    pub pairwise: Vec<PairwiseDifference>,
}

/// SplitMix64 finalizer; a well-dispersed 64-bit mix used to derive
/// independent per-trial seeds from the plan base.
fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-trial seed: the plan base XOR a mix of the (size,
/// trial) cell, so distinct cells get unrelated generator streams while a
/// re-run of the same plan reproduces every matrix exactly.
pub fn trial_seed(seed_base: u64, size: usize, trial: usize) -> u64 {
    let cell = ((size as u64) << 32) | (trial as u64 & 0xFFFF_FFFF);
    seed_base ^ splitmix64(cell)
}

/// Execute a plan: one warm-up per size (discarded), then
/// `trials_per_size` recorded trials, serially or in parallel per the
/// plan. Trial failures are recorded, not propagated; only structural
/// plan errors abort.
pub fn run_bench(plan: &BenchPlan) -> Result<BenchReport> {
    plan.validate()?;
    let mut records = Vec::with_capacity(plan.sizes.len() * plan.trials_per_size);
    for &size in &plan.sizes {
        // Warm-up: the same work as trial 0, timings discarded.
        let _ = execute_trial(plan, size, trial_seed(plan.seed_base, size, 0));
        let trials: Vec<usize> = (0..plan.trials_per_size).collect();
        let run = |&trial: &usize| -> TrialRecord {
            let seed = trial_seed(plan.seed_base, size, trial);
            match execute_trial(plan, size, seed) {
                Ok((timings, crispness, coarse)) => TrialRecord {
                    size,
                    trial,
                    seed,
                    timings: Some(timings),
                    crispness: Some(crispness),
                    coarse_matrix: Some(coarse),
                    error: None,
                },
                Err(e) => TrialRecord {
                    size,
                    trial,
                    seed,
                    timings: None,
                    crispness: None,
                    coarse_matrix: None,
                    error: Some(e.to_string()),
                },
            }
        };
        if plan.parallel {
            records.par_extend(trials.par_iter().map(run));
        } else {
            records.extend(trials.iter().map(run));
        }
    }
    let summaries = summarize(&records, &plan.sizes);
    let pairwise = if plan.pairwise_norms {
        pairwise_differences(&records)?
    } else {
        Vec::new()
    };
    Ok(BenchReport {
        records,
        summaries,
        pairwise,
    })
}

/// One full pipeline pass, timed per stage with a monotonic clock.
/// Generation is setup, not pipeline work, so it runs outside the timers.
fn execute_trial(
    plan: &BenchPlan,
    size: usize,
    seed: u64,
) -> Result<(StageTimings, f64, Array2<f64>)> {
    let matrix = plan.generator.build(size, seed)?;
    let weight = plan.weight.resolve(&matrix)?;
    let selection = EigenSelection {
        mode: plan.mode,
        count: plan.n_clusters,
    };

    let whole = Instant::now();
    let clock = Instant::now();
    let basis = SpectralBasis::build(&matrix, selection, weight)?;
    let spectral = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let result = optimize(&basis, plan.method, &plan.options)?;
    let optimize_secs = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let coarse = coarse_grain(&matrix, result.membership())?;
    let coarse_secs = clock.elapsed().as_secs_f64();
    let total = whole.elapsed().as_secs_f64();

    let timings = StageTimings {
        spectral,
        optimize: optimize_secs,
        coarse_grain: coarse_secs,
        total,
    };
    Ok((timings, result.crispness(), coarse))
}

fn summarize(records: &[TrialRecord], sizes: &[usize]) -> Vec<SizeSummary> {
    sizes
        .iter()
        .map(|&size| {
            let stats: Vec<StageTimings> = records
                .iter()
                .filter(|r| r.size == size)
                .filter_map(|r| r.timings)
                .collect();
            let failures = records
                .iter()
                .filter(|r| r.size == size && !r.succeeded())
                .count();
            let n = stats.len();
            let mean = (n > 0).then(|| {
                let sum = stats
                    .iter()
                    .fold(StageTimings::default(), |acc, t| {
                        StageTimings::map2(&acc, t, |a, b| a + b)
                    });
                StageTimings::map2(&sum, &StageTimings::default(), |a, _| a / n as f64)
            });
            let std = (n > 1).then(|| {
                let m = mean.unwrap();
                let ss = stats.iter().fold(StageTimings::default(), |acc, t| {
                    let d = StageTimings::map2(t, &m, |a, b| a - b);
                    StageTimings::map2(&acc, &d, |a, b| a + b * b)
                });
                StageTimings::map2(&ss, &StageTimings::default(), |a, _| {
                    (a / (n - 1) as f64).sqrt()
                })
            });
            SizeSummary {
                size,
                successes: n,
                failures,
                mean,
                std,
            }
        })
        .collect()
}

fn pairwise_differences(records: &[TrialRecord]) -> Result<Vec<PairwiseDifference>> {
    let mut out = Vec::new();
    let mut sizes: Vec<usize> = records.iter().map(|r| r.size).collect();
    sizes.dedup();
    for size in sizes {
        let ok: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| r.size == size && r.succeeded())
            .collect();
        for (a, b) in ok.iter().tuple_combinations() {
            let (pa, pb) = (
                a.coarse_matrix.as_ref().unwrap(),
                b.coarse_matrix.as_ref().unwrap(),
            );
            out.push(PairwiseDifference {
                size,
                trial_a: a.trial,
                trial_b: b.trial,
                norm_1: compare_coarse(pa, pb, NormKind::One)?,
                norm_2: compare_coarse(pa, pb, NormKind::Two)?,
                norm_inf: compare_coarse(pa, pb, NormKind::Infinity)?,
            });
        }
    }
    Ok(out)
}

/// Matrix norm used by [`compare_coarse`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    /// Induced 1-norm: maximum absolute column sum.
    One,
    /// Spectral norm: largest singular value.
    Two,
    /// Induced infinity-norm: maximum absolute row sum.
    Infinity,
}

impl std::str::FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "one" => Ok(NormKind::One),
            "2" | "two" => Ok(NormKind::Two),
            "inf" | "infinity" => Ok(NormKind::Infinity),
            other => Err(Error::InvalidSpec(format!(
                "unknown norm `{other}` (expected 1, 2, or inf)"
            ))),
        }
    }
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormKind::One => write!(f, "1"),
            NormKind::Two => write!(f, "2"),
            NormKind::Infinity => write!(f, "inf"),
        }
    }
}

fn matrix_norm(m: &Array2<f64>, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::One => Ok(m
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)),
        NormKind::Infinity => Ok(m
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)),
        NormKind::Two => {
            let (_, s, _) = m
                .svd(false, false)
                .map_err(|e| Error::DefectiveOrIllConditioned(format!("norm SVD failed: {e}")))?;
            Ok(s.iter().copied().fold(0.0, f64::max))
        }
    }
}

/// Distance between two coarse transition matrices under the given norm,
/// minimized over simultaneous row/column relabelings of `b` (cluster
/// labels are arbitrary). Exhaustive over permutations, so capped at 5
/// clusters.
pub fn compare_coarse(a: &Array2<f64>, b: &Array2<f64>, norm: NormKind) -> Result<f64> {
    let k = a.nrows();
    if a.dim() != b.dim() || a.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "cannot compare {:?} against {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if k > 5 {
        return Err(Error::PermutationSearchTooLarge(k));
    }
    let mut best = f64::INFINITY;
    for perm in (0..k).permutations(k) {
        let mut diff = Array2::zeros((k, k));
        for i in 0..k {
            for j in 0..k {
                diff[[i, j]] = a[[i, j]] - b[[perm[i], perm[j]]];
            }
        }
        best = best.min(matrix_norm(&diff, norm)?);
    }
    Ok(best)
}

/// Least-squares quadratic fit `y = a x^2 + b x + c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticFit {
    /// Coefficient of x^2.
    pub quadratic: f64,
    /// Coefficient of x.
    pub linear: f64,
    /// Constant term.
    pub constant: f64,
    /// Euclidean norm of the fit residual over the input points.
    pub residual: f64,
}

/// Fit a quadratic cost model to (x, y) samples by linear least squares.
/// Needs at least three distinct x values; an exactly linear relationship
/// is fine and comes back with a (near-)zero quadratic coefficient.
pub fn fit_quadratic(xs: &[f64], ys: &[f64]) -> Result<QuadraticFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} x values vs {} y values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateDesign("inputs must be finite".into()));
    }
    let mut distinct: Vec<f64> = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientPoints(distinct.len()));
    }
    let n = xs.len();
    let mut design = Array2::zeros((n, 3));
    for (i, &x) in xs.iter().enumerate() {
        design[[i, 0]] = x * x;
        design[[i, 1]] = x;
        design[[i, 2]] = 1.0;
    }
    let rhs = Array1::from(ys.to_vec());
    let solution = design
        .least_squares(&rhs)
        .map_err(|e| Error::DegenerateDesign(e.to_string()))?
        .solution;
    let residual = (&design.dot(&solution) - &rhs)
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    Ok(QuadraticFit {
        quadratic: solution[0],
        linear: solution[1],
        constant: solution[2],
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn circular_plan(sizes: Vec<usize>, trials: usize, perturbation: f64) -> BenchPlan {
        let mut plan = BenchPlan::new(
            sizes,
            trials,
            GeneratorTemplate::Circular {
                blocks: 3,
                perturbation,
            },
            3,
        );
        plan.seed_base = 42;
        plan
    }

    fn forward_cycle() -> Array2<f64> {
        array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]
    }

    #[test]
    fn plan_validation_rejects_structural_problems() {
        let template = GeneratorTemplate::Circular {
            blocks: 3,
            perturbation: 0.0,
        };
        let empty = BenchPlan::new(vec![], 1, template.clone(), 3);
        assert!(matches!(empty.validate(), Err(Error::InvalidSpec(_))));

        let unsorted = BenchPlan::new(vec![60, 30], 1, template.clone(), 3);
        assert!(matches!(unsorted.validate(), Err(Error::InvalidSpec(_))));

        let zero_trials = BenchPlan::new(vec![30], 0, template.clone(), 3);
        assert!(matches!(zero_trials.validate(), Err(Error::InvalidSpec(_))));

        let indivisible = BenchPlan::new(vec![31], 1, template.clone(), 3);
        assert!(matches!(indivisible.validate(), Err(Error::InvalidSpec(_))));

        let one_cluster = BenchPlan::new(vec![30], 1, template.clone(), 1);
        assert!(matches!(
            one_cluster.validate(),
            Err(Error::InvalidClusterCount(1, _))
        ));

        let mut pairwise_large = BenchPlan::new(vec![30], 1, template, 6);
        pairwise_large.pairwise_norms = true;
        assert!(matches!(
            pairwise_large.validate(),
            Err(Error::PermutationSearchTooLarge(6))
        ));
    }

    #[test]
    fn trial_seeds_are_dispersed() {
        let base = 42;
        let seeds = [
            trial_seed(base, 30, 0),
            trial_seed(base, 30, 1),
            trial_seed(base, 60, 0),
            trial_seed(base, 60, 1),
        ];
        for (i, a) in seeds.iter().enumerate() {
            assert_ne!(*a, base);
            for b in &seeds[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn reruns_reproduce_coarse_matrices_bitwise() {
        let plan = circular_plan(vec![30], 2, 0.1);
        let first = run_bench(&plan).unwrap();
        let second = run_bench(&plan).unwrap();
        assert_eq!(first.records.len(), 2);
        for (a, b) in first.records.iter().zip(&second.records) {
            assert_eq!(a.seed, b.seed);
            assert!(a.succeeded() && b.succeeded());
            let (pa, pb) = (
                a.coarse_matrix.as_ref().unwrap(),
                b.coarse_matrix.as_ref().unwrap(),
            );
            assert_eq!(pa, pb);
            assert_eq!(a.crispness, b.crispness);
        }
    }

    #[test]
    fn unperturbed_circular_recovers_the_cycle() {
        let plan = circular_plan(vec![30, 60], 2, 0.0);
        let report = run_bench(&plan).unwrap();
        assert_eq!(report.records.len(), 4);
        let cycle = forward_cycle();
        for record in &report.records {
            assert!(record.succeeded(), "{:?}", record.error);
            let coarse = record.coarse_matrix.as_ref().unwrap();
            let dist = compare_coarse(coarse, &cycle, NormKind::Infinity).unwrap();
            assert!(dist <= 1e-2, "size {}: {dist}", record.size);
        }
        for summary in &report.summaries {
            assert_eq!(summary.successes, 2);
            assert_eq!(summary.failures, 0);
            let mean = summary.mean.unwrap();
            assert!(mean.total > 0.0);
            assert!(mean.total >= mean.spectral);
            assert!(summary.std.is_some());
        }
    }

    #[test]
    fn failed_trials_are_recorded_without_aborting() {
        // Two clusters on a three-block circulant always splits the
        // dominant conjugate pair, so every trial fails.
        let mut plan = circular_plan(vec![30], 2, 0.0);
        plan.n_clusters = 2;
        let report = run_bench(&plan).unwrap();
        assert_eq!(report.records.len(), 2);
        for record in &report.records {
            assert!(!record.succeeded());
            assert!(record.error.as_deref().unwrap().contains("conjugate pair"));
            assert!(record.timings.is_none());
        }
        let summary = &report.summaries[0];
        assert_eq!(summary.successes, 0);
        assert_eq!(summary.failures, 2);
        assert!(summary.mean.is_none());
        assert!(summary.std.is_none());
    }

    #[test]
    fn parallel_execution_matches_serial() {
        let mut serial = circular_plan(vec![30], 3, 0.1);
        serial.pairwise_norms = true;
        let mut parallel = serial.clone();
        parallel.parallel = true;
        let a = run_bench(&serial).unwrap();
        let b = run_bench(&parallel).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!((ra.size, ra.trial, ra.seed), (rb.size, rb.trial, rb.seed));
            assert_eq!(ra.coarse_matrix, rb.coarse_matrix);
        }
        assert_eq!(a.pairwise.len(), 3);
        for (pa, pb) in a.pairwise.iter().zip(&b.pairwise) {
            assert_eq!(pa.norm_inf, pb.norm_inf);
        }
    }

    #[test]
    fn pairwise_norms_vanish_for_identical_trials() {
        // With zero perturbation the generator ignores its seed, so all
        // trials share one matrix and the aligned differences vanish.
        let mut plan = circular_plan(vec![30], 3, 0.0);
        plan.pairwise_norms = true;
        let report = run_bench(&plan).unwrap();
        assert_eq!(report.pairwise.len(), 3);
        for pair in &report.pairwise {
            assert!(pair.norm_1 <= 1e-12);
            assert!(pair.norm_2 <= 1e-12);
            assert!(pair.norm_inf <= 1e-12);
        }
    }

    #[test]
    fn nearly_uncoupled_template_yields_block_dominant_coarse_matrix() {
        let mut plan = BenchPlan::new(
            vec![40],
            1,
            GeneratorTemplate::NearlyUncoupled {
                blocks: 4,
                coupling: 0.01,
            },
            4,
        );
        plan.mode = SelectionMode::LargestRealPart;
        plan.seed_base = 7;
        let report = run_bench(&plan).unwrap();
        let record = &report.records[0];
        assert!(record.succeeded(), "{:?}", record.error);
        assert!(record.crispness.unwrap() > 0.8);
        let coarse = record.coarse_matrix.as_ref().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(coarse[[i, i]] > coarse[[i, j]]);
                }
            }
        }
    }

    #[test]
    fn compare_coarse_matches_hand_computed_norms() {
        // Cyclically dominant coarse matrix against the identity: the
        // best alignment is the identity relabeling, and both induced
        // norms equal twice the off-diagonal mass per row.
        let a = array![
            [0.9655, 0.0333, 0.0012],
            [0.0012, 0.9655, 0.0333],
            [0.0333, 0.0012, 0.9655]
        ];
        let eye = Array2::eye(3);
        let expected = 2.0 * (0.0333 + 0.0012);
        let inf = compare_coarse(&a, &eye, NormKind::Infinity).unwrap();
        let one = compare_coarse(&a, &eye, NormKind::One).unwrap();
        let two = compare_coarse(&a, &eye, NormKind::Two).unwrap();
        assert!((inf - expected).abs() <= 1e-6, "{inf}");
        assert!((one - expected).abs() <= 1e-6, "{one}");
        // The spectral norm is sandwiched by max |entry| and the sqrt of
        // the induced-norm product.
        assert!(two >= 0.0345 - 1e-12 && two <= expected + 1e-12, "{two}");
    }

    #[test]
    fn compare_coarse_is_relabeling_invariant() {
        let cycle = forward_cycle();
        // Relabel clusters (0 1 2) -> (1 2 0): still the same cycle.
        let mut relabeled = Array2::zeros((3, 3));
        let perm = [1usize, 2, 0];
        for i in 0..3 {
            for j in 0..3 {
                relabeled[[perm[i], perm[j]]] = cycle[[i, j]];
            }
        }
        for kind in [NormKind::One, NormKind::Two, NormKind::Infinity] {
            let dist = compare_coarse(&cycle, &relabeled, kind).unwrap();
            assert!(dist <= 1e-15, "{kind}: {dist}");
        }
    }

    #[test]
    fn compare_coarse_rejects_bad_shapes() {
        let a = Array2::<f64>::eye(3);
        let b = Array2::<f64>::eye(4);
        assert!(matches!(
            compare_coarse(&a, &b, NormKind::One),
            Err(Error::DimensionMismatch(_))
        ));
        let big = Array2::<f64>::eye(6);
        assert!(matches!(
            compare_coarse(&big, &big, NormKind::One),
            Err(Error::PermutationSearchTooLarge(6))
        ));
    }

    #[test]
    fn norm_parsing_round_trips() {
        for kind in [NormKind::One, NormKind::Two, NormKind::Infinity] {
            let parsed: NormKind = kind.to_string().parse().unwrap();
            assert_eq!(parsed, kind);
        }
        assert!("3".parse::<NormKind>().is_err());
    }

    #[test]
    fn quadratic_fit_recovers_exact_coefficients() {
        let xs: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x * x - x + 3.0).collect();
        let fit = fit_quadratic(&xs, &ys).unwrap();
        assert!((fit.quadratic - 2.0).abs() <= 1e-8);
        assert!((fit.linear + 1.0).abs() <= 1e-8);
        assert!((fit.constant - 3.0).abs() <= 1e-8);
        assert!(fit.residual <= 1e-8);
    }

    #[test]
    fn quadratic_fit_handles_collinear_data() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.0, 2.0, 3.0];
        let fit = fit_quadratic(&xs, &ys).unwrap();
        assert!(fit.quadratic.abs() <= 1e-10);
        assert!((fit.linear - 1.0).abs() <= 1e-10);
        assert!(fit.constant.abs() <= 1e-10);
        assert!(fit.residual <= 1e-10);
    }

    #[test]
    fn quadratic_fit_rejects_degenerate_inputs() {
        assert!(matches!(
            fit_quadratic(&[0.0, 1.0], &[0.0, 1.0]),
            Err(Error::InsufficientPoints(2))
        ));
        // Repeated x values collapse to two distinct points.
        assert!(matches!(
            fit_quadratic(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.1, 1.0, 1.1]),
            Err(Error::InsufficientPoints(2))
        ));
        assert!(matches!(
            fit_quadratic(&[0.0, 1.0, f64::NAN], &[0.0, 1.0, 2.0]),
            Err(Error::DegenerateDesign(_))
        ));
        assert!(matches!(
            fit_quadratic(&[0.0, 1.0], &[0.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
