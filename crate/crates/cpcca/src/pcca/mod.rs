//! Fuzzy clustering of a spectral basis into membership vectors, and
//! coarse-graining of the chain onto the clusters.
//!
//! Rows of the orthonormal basis Y are points in R^{n_c}; metastable (or
//! cyclic) structure makes them cluster near the vertices of a simplex. A
//! nonsingular transform A maps the basis onto membership columns
//! chi = Y A with chi >= 0 and row sums 1. The transform is initialized
//! from the rows themselves (inner simplex guess), repaired onto the
//! feasible set (feasibilize), and tuned to maximize crispness.

mod optimize;

pub use optimize::{optimize, OptimizeOptions, OptimizerMethod, OptimizerTrace};

use itertools::Itertools;
use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Inverse, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{DensityVector, StochasticMatrix};
use crate::spectral::{EigenSelection, SelectionMode, SpectralBasis, WeightChoice};

/// Entries of a returned membership matrix may undershoot zero by at most
/// this much before clamping; anything worse is a hard error.
pub const MEMBERSHIP_GUARD: f64 = 1e-12;

/// Row sums of a membership matrix must be within this of 1.
pub const ROW_SUM_DRIFT: f64 = 1e-10;

/// Row sums of a coarse-grained matrix must be within this of 1.
pub const COARSE_ROW_TOL: f64 = 1e-8;

/// Condition-estimate ceiling for transform and vertex matrices.
const TRANSFORM_CONDITION_CAP: f64 = 1e12;

/// Fuzzy membership matrix chi (N x n_c): nonnegative entries, rows
/// summing to 1, together with the weighting density they were optimized
/// under.
#[derive(Clone, Debug)]
pub struct Membership {
    values: Array2<f64>,
    weight: DensityVector,
}

impl Membership {
    /// Validate and normalize a raw membership matrix: entries must be
    /// >= -1e-12 (then clamped into [0, 1]) and rows must sum to 1 within
    /// 1e-10 (then renormalized exactly).
    pub fn new(raw: Array2<f64>, weight: DensityVector) -> Result<Self> {
        let (n, k) = raw.dim();
        if weight.len() != n || k == 0 {
            return Err(Error::DimensionMismatch(format!(
                "membership {n}x{k} vs weight length {}",
                weight.len()
            )));
        }
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min >= -MEMBERSHIP_GUARD) {
            return Err(Error::MembershipExcursion(min));
        }
        let mut values = raw;
        for (i, mut row) in values.rows_mut().into_iter().enumerate() {
            let sum: f64 = row.iter().sum();
            let deviation = (sum - 1.0).abs();
            if !(deviation <= ROW_SUM_DRIFT) {
                return Err(Error::RowSumViolation {
                    row: i,
                    sum,
                    deviation,
                    tolerance: ROW_SUM_DRIFT,
                });
            }
            row.mapv_inplace(|v| v.clamp(0.0, 1.0));
            let clamped: f64 = row.iter().sum();
            row.mapv_inplace(|v| v / clamped);
        }
        Ok(Self { values, weight })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn weight(&self) -> &DensityVector {
        &self.weight
    }

    /// Number of states N.
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_clusters(&self) -> usize {
        self.values.ncols()
    }

    /// Hard assignment: the argmax cluster per state (lowest index wins
    /// ties).
    pub fn assignments(&self) -> Vec<usize> {
        self.values
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                let mut bestv = f64::NEG_INFINITY;
                for (j, &v) in row.iter().enumerate() {
                    if v > bestv {
                        bestv = v;
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    /// Total weight landing in each cluster: chi^T w.
    pub fn coarse_weights(&self) -> Array1<f64> {
        self.values.t().dot(self.weight.values())
    }
}

/// The n_c x n_c linear map A with chi = Y A. Nonsingular by
/// construction; after feasibilization A 1 = e_1 (first row sums to 1,
/// every other row to 0), which is what makes the chi rows sum to 1 given
/// that Y's first column is constant.
#[derive(Clone, Debug)]
pub struct TransformMatrix {
    values: Array2<f64>,
}

impl TransformMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (r, c) = values.dim();
        if r != c {
            return Err(Error::NotSquare(r, c));
        }
        let cond = condition_estimate(&values)?;
        if !cond.is_finite() || cond > TRANSFORM_CONDITION_CAP {
            return Err(Error::DegenerateSimplex(cond));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Max deviation from the partition-of-unity image A 1 = e_1: first
    /// row sum from 1, remaining row sums from 0. Near zero (1e-12) for
    /// feasibilized transforms; inversion-accuracy for raw simplex guesses.
    pub fn partition_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, row) in self.values.rows().into_iter().enumerate() {
            let sum: f64 = row.iter().sum();
            let target = if i == 0 { 1.0 } else { 0.0 };
            worst = worst.max((sum - target).abs());
        }
        worst
    }
}

/// Everything a clustering run produces: the membership matrix, the
/// transform that generated it, the coarse-grained chain, objective and
/// crispness values, optimizer trace, and spectral diagnostics.
#[derive(Clone, Debug)]
pub struct ClusteringResult {
    membership: Membership,
    transform: TransformMatrix,
    coarse_matrix: Array2<f64>,
    objective: f64,
    crispness: f64,
    trace: OptimizerTrace,
    eigenvalues: Vec<Complex64>,
    subspace_residual: f64,
    vertex_indices: Vec<usize>,
}

impl ClusteringResult {
    /// Internal constructor: derives crispness from the objective and
    /// validates the coarse matrix rows.
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        membership: Membership,
        transform: TransformMatrix,
        coarse_matrix: Array2<f64>,
        objective: f64,
        trace: OptimizerTrace,
        eigenvalues: Vec<Complex64>,
        subspace_residual: f64,
        vertex_indices: Vec<usize>,
    ) -> Result<Self> {
        check_coarse_rows(&coarse_matrix)?;
        let k = membership.n_clusters() as f64;
        let crispness = (k - objective) / k;
        Ok(Self {
            membership,
            transform,
            coarse_matrix,
            objective,
            crispness,
            trace,
            eigenvalues,
            subspace_residual,
            vertex_indices,
        })
    }

    pub fn membership(&self) -> &Membership {
        &self.membership
    }

    pub fn transform(&self) -> &TransformMatrix {
        &self.transform
    }

    /// The n_c x n_c coarse-grained transition matrix P_c.
    pub fn coarse_matrix(&self) -> &Array2<f64> {
        &self.coarse_matrix
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// crispness = (n_c - objective) / n_c, in (0, 1]; 1 means exactly
    /// characteristic memberships.
    pub fn crispness(&self) -> f64 {
        self.crispness
    }

    pub fn trace(&self) -> &OptimizerTrace {
        &self.trace
    }

    /// The selected dominant eigenvalues of the input chain.
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    /// Relative invariant-subspace defect of the basis the clustering ran
    /// on; coarse-graining preserves the dominant eigenvalues when this is
    /// small.
    pub fn subspace_residual(&self) -> f64 {
        self.subspace_residual
    }

    /// States picked as initial simplex vertices.
    pub fn vertex_indices(&self) -> &[usize] {
        &self.vertex_indices
    }

    pub fn n_clusters(&self) -> usize {
        self.membership.n_clusters()
    }
}

/// One candidate row of a cluster-count scan.
#[derive(Clone, Debug)]
pub struct ScanCandidate {
    pub n_clusters: usize,
    /// Minimum entry of the unoptimized guess membership; near 0 marks a
    /// good candidate. None when the candidate was skipped.
    pub min_chi: Option<f64>,
    /// Post-optimization crispness (fast method). None when skipped.
    pub crispness: Option<f64>,
    pub selected: bool,
    /// Why the candidate was skipped (e.g. it would split a conjugate
    /// eigenvalue pair), if it was.
    pub skip_reason: Option<String>,
}

/// Result of scanning a range of cluster counts: one candidate per n_c in
/// ascending order, with the crispness-maximizing count marked selected.
#[derive(Clone, Debug)]
pub struct ClusterScan {
    candidates: Vec<ScanCandidate>,
    selected: usize,
}

impl ClusterScan {
    pub fn candidates(&self) -> &[ScanCandidate] {
        &self.candidates
    }

    /// The selected cluster count (max crispness, ties to the smaller
    /// count).
    pub fn selected(&self) -> usize {
        self.selected
    }
}

/// Initial transform from the geometry of the basis rows: vertex 1 is the
/// row of maximal Euclidean norm; each further vertex is the row farthest
/// from the affine span of the previous ones (successive orthogonal-
/// complement projection); A_0 is the inverse of the vertex-row matrix.
/// Ties break toward the lowest state index.
pub fn inner_simplex_guess(basis: &SpectralBasis) -> Result<(TransformMatrix, Vec<usize>)> {
    let y = basis.vectors();
    let (n, k) = y.dim();
    let row_norm2 = |m: &Array2<f64>, i: usize| m.row(i).iter().map(|v| v * v).sum::<f64>();

    let mut indices = Vec::with_capacity(k);
    let mut best = 0usize;
    let mut bestv = f64::NEG_INFINITY;
    for i in 0..n {
        let v = row_norm2(y, i);
        if v > bestv {
            bestv = v;
            best = i;
        }
    }
    indices.push(best);

    let mut shifted = y.to_owned();
    let pivot = y.row(best).to_owned();
    for mut row in shifted.rows_mut() {
        row.zip_mut_with(&pivot, |a, b| *a -= b);
    }
    for _ in 1..k {
        let mut far = 0usize;
        let mut farv = f64::NEG_INFINITY;
        for i in 0..n {
            let v = row_norm2(&shifted, i);
            if v > farv {
                farv = v;
                far = i;
            }
        }
        let norm = farv.sqrt();
        if norm <= 1e-12 {
            return Err(Error::DegenerateSimplex(norm));
        }
        indices.push(far);
        let u = shifted.row(far).to_owned() / norm;
        let proj = shifted.dot(&u);
        for i in 0..n {
            for c in 0..k {
                shifted[[i, c]] -= proj[i] * u[c];
            }
        }
    }

    let mut vertex = Array2::zeros((k, k));
    for (r, &i) in indices.iter().enumerate() {
        vertex.row_mut(r).assign(&y.row(i));
    }
    let cond = condition_estimate(&vertex)?;
    if !cond.is_finite() || cond > TRANSFORM_CONDITION_CAP {
        return Err(Error::DegenerateSimplex(cond));
    }
    let a = vertex.inv().map_err(|_| Error::DegenerateSimplex(cond))?;
    Ok((TransformMatrix::new(a)?, indices))
}

/// Repair an arbitrary transform candidate onto the feasible set, keeping
/// its lower-right (n_c-1)^2 block: rows 2..n_c of column 1 are set so
/// those rows sum to zero, row 1 is set to the positivity bound
/// A(1,j) = -min_i [Y(:,2..) A(2..,:)](i,j), and the whole matrix is
/// scaled so row 1 sums to 1. The resulting chi = Y A then satisfies
/// nonnegativity and partition of unity to 1e-12.
pub fn feasibilize(a: &Array2<f64>, basis: &SpectralBasis) -> Result<TransformMatrix> {
    TransformMatrix::new(feasibilize_raw(a, basis.vectors())?)
}

/// The feasibilization kernel on raw arrays (optimizer hot path).
fn feasibilize_raw(a: &Array2<f64>, y: &Array2<f64>) -> Result<Array2<f64>> {
    let (r, c) = a.dim();
    let k = y.ncols();
    if r != c || r != k {
        return Err(Error::DimensionMismatch(format!(
            "transform {r}x{c} vs basis with {k} columns"
        )));
    }
    let mut a = a.to_owned();
    for i in 1..k {
        let s: f64 = (1..k).map(|j| a[[i, j]]).sum();
        a[[i, 0]] = -s;
    }
    let body = y.slice(s![.., 1..]).dot(&a.slice(s![1.., ..]));
    for j in 0..k {
        let min = body.column(j).iter().copied().fold(f64::INFINITY, f64::min);
        a[[0, j]] = -min;
    }
    let gamma: f64 = (0..k).map(|j| a[[0, j]]).sum();
    if !(gamma > 0.0) {
        return Err(Error::InfeasibleScaling(gamma));
    }
    a.mapv_inplace(|t| t / gamma);
    Ok(a)
}

/// The crispness defect of a feasible transform:
/// n_c - trace(D_c^{-2} chi^T D^2 chi) with chi = Y A and
/// D_c^2 = diag(chi^T w). Zero for characteristic memberships, n_c - 1
/// for uniform ones.
pub fn objective(a: &TransformMatrix, basis: &SpectralBasis) -> Result<f64> {
    objective_raw(a.values(), basis)
}

fn objective_raw(a: &Array2<f64>, basis: &SpectralBasis) -> Result<f64> {
    membership_objective(&basis.vectors().dot(a), basis.weight())
}

/// The same objective evaluated directly on a membership matrix, for
/// callers that hold chi rather than a transform.
pub fn membership_objective(chi: &Array2<f64>, weight: &DensityVector) -> Result<f64> {
    let (n, k) = chi.dim();
    if weight.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "membership {n}x{k} vs weight length {}",
            weight.len()
        )));
    }
    let w = weight.values();
    let mut total = 0.0;
    for j in 0..k {
        let mut coarse = 0.0;
        let mut second = 0.0;
        for i in 0..n {
            let v = chi[[i, j]];
            coarse += w[i] * v;
            second += w[i] * v * v;
        }
        if coarse <= 1e-300 {
            return Err(Error::SingularDc(j));
        }
        total += second / coarse;
    }
    Ok(k as f64 - total)
}

/// The minimum entry of the *unoptimized* guess membership chi_0 = Y A_0
/// for a candidate cluster count, computed on the leading n_c basis
/// columns. Values near zero (small negative) indicate the rows nearly
/// form an n_c-vertex simplex, i.e. a good candidate.
pub fn min_chi(basis: &SpectralBasis, n_clusters: usize) -> Result<f64> {
    if n_clusters < 2 {
        return Err(Error::InvalidClusterCount(
            n_clusters,
            "the guess-quality indicator needs at least two clusters",
        ));
    }
    let sub = basis.truncate(n_clusters)?;
    let (a0, _) = inner_simplex_guess(&sub)?;
    let chi0 = sub.vectors().dot(a0.values());
    Ok(chi0.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Project the chain onto the clusters:
/// P_c = (chi^T D^2 chi)^{-1} chi^T D^2 P chi with D^2 = diag(w).
/// Rows of P_c sum to 1; its eigenvalues match the selected dominant
/// eigenvalues of P when the basis residual is small.
pub fn coarse_grain(p: &StochasticMatrix, membership: &Membership) -> Result<Array2<f64>> {
    let chi = membership.values();
    if p.dim() != chi.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "matrix dim {} vs membership rows {}",
            p.dim(),
            chi.nrows()
        )));
    }
    let w = membership.weight().values();
    let weighted = scale_rows(chi, w);
    let m1 = chi.t().dot(&weighted);
    let propagated = p.apply_to(chi);
    let m2 = chi.t().dot(&scale_rows(&propagated, w));
    let inv = m1.inv().map_err(|_| {
        Error::SingularProjection("chi^T D^2 chi is not invertible".into())
    })?;
    let pc = inv.dot(&m2);
    check_coarse_rows(&pc)?;
    Ok(pc)
}

/// Coarse-grain entirely inside the basis representation: with chi = Y A
/// and P Y = Y L, P_c reduces to (A^T A)^{-1} A^T L A. Agrees with
/// [`coarse_grain`] up to the subspace residual.
fn spectral_coarse_grain(a: &Array2<f64>, block_spectrum: &Array2<f64>) -> Result<Array2<f64>> {
    let m1 = a.t().dot(a);
    let m2 = a.t().dot(block_spectrum).dot(a);
    let inv = m1
        .inv()
        .map_err(|_| Error::SingularProjection("A^T A is not invertible".into()))?;
    let pc = inv.dot(&m2);
    check_coarse_rows(&pc)?;
    Ok(pc)
}

/// Scan candidate cluster counts lo..=hi: per candidate, record the
/// guess-quality indicator (min chi_0) and the crispness from the fast
/// optimizer (Nelder-Mead), skipping and flagging candidates whose
/// pipeline fails (e.g. splitting a conjugate pair). Selects the candidate
/// of maximal crispness, ties toward the smaller count.
pub fn select_n_clusters(
    p: &StochasticMatrix,
    mode: SelectionMode,
    lo: usize,
    hi: usize,
    weight_choice: &WeightChoice,
    opts: &OptimizeOptions,
) -> Result<ClusterScan> {
    let max = p.dim() - 1;
    if lo < 2 || hi > max || lo > hi {
        return Err(Error::EmptyRange { lo, hi, max });
    }
    let weight = weight_choice.resolve(p)?;
    let mut candidates = Vec::with_capacity(hi - lo + 1);
    let mut best: Option<(usize, f64)> = None;
    for k in lo..=hi {
        let attempt = (|| -> Result<(f64, f64)> {
            let basis =
                SpectralBasis::build(p, EigenSelection::new(mode, k), weight.clone())?;
            let indicator = min_chi(&basis, k)?;
            let result = optimize(&basis, OptimizerMethod::NelderMead, opts)?;
            Ok((indicator, result.crispness()))
        })();
        match attempt {
            Ok((indicator, crispness)) => {
                if best.map_or(true, |(_, b)| crispness > b) {
                    best = Some((candidates.len(), crispness));
                }
                candidates.push(ScanCandidate {
                    n_clusters: k,
                    min_chi: Some(indicator),
                    crispness: Some(crispness),
                    selected: false,
                    skip_reason: None,
                });
            }
            Err(e) => candidates.push(ScanCandidate {
                n_clusters: k,
                min_chi: None,
                crispness: None,
                selected: false,
                skip_reason: Some(e.to_string()),
            }),
        }
    }
    let (pos, _) = best.ok_or(Error::AllCandidatesSkipped)?;
    candidates[pos].selected = true;
    let selected = candidates[pos].n_clusters;
    Ok(ClusterScan { candidates, selected })
}

/// End-to-end clustering: spectral basis, membership optimization, and
/// coarse-graining of the input chain, with diagnostics.
pub fn cluster(
    p: &StochasticMatrix,
    n_clusters: usize,
    mode: SelectionMode,
    weight_choice: &WeightChoice,
    method: OptimizerMethod,
    opts: &OptimizeOptions,
) -> Result<ClusteringResult> {
    if n_clusters == 0 {
        return Err(Error::InvalidClusterCount(0, "cluster count must be at least 1"));
    }
    let weight = weight_choice.resolve(p)?;
    let selection = EigenSelection::new(mode, n_clusters);
    if n_clusters == 1 {
        // single cluster: everything belongs everywhere; defined directly
        // so callers need no special case
        let basis = SpectralBasis::build(p, selection, weight)?;
        let (a0, vertices) = inner_simplex_guess(&basis)?;
        let chi = basis.vectors().dot(a0.values());
        let membership = Membership::new(chi, basis.weight().clone())?;
        let obj = membership_objective(membership.values(), basis.weight())?;
        let pc = coarse_grain(p, &membership)?;
        let trace = OptimizerTrace { method, iterations: 0, converged: true };
        return ClusteringResult::assemble(
            membership,
            a0,
            pc,
            obj,
            trace,
            basis.spectrum().eigenvalues().to_vec(),
            basis.residual(),
            vertices,
        );
    }
    let basis = SpectralBasis::build(p, selection, weight)?;
    let mut result = optimize(&basis, method, opts)?;
    let pc = coarse_grain(p, result.membership())?;
    check_coarse_rows(&pc)?;
    result.coarse_matrix = pc;
    Ok(result)
}

/// Cluster labels are arbitrary: find the relabeling of `b` minimizing the
/// entrywise max distance to `a`. Exhaustive over permutations, so capped
/// at 5 clusters. Returns the distance and the permutation (row/column i
/// of the aligned `b` is row/column perm[i] of the original).
pub fn align_coarse(a: &Array2<f64>, b: &Array2<f64>) -> Result<(f64, Vec<usize>)> {
    let k = a.nrows();
    if a.dim() != b.dim() || a.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "cannot align {:?} against {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if k > 5 {
        return Err(Error::PermutationSearchTooLarge(k));
    }
    let mut best = f64::INFINITY;
    let mut best_perm = (0..k).collect::<Vec<_>>();
    for perm in (0..k).permutations(k) {
        let mut dist = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                dist = dist.max((a[[i, j]] - b[[perm[i], perm[j]]]).abs());
            }
        }
        if dist < best {
            best = dist;
            best_perm = perm;
        }
    }
    Ok((best, best_perm))
}

fn check_coarse_rows(pc: &Array2<f64>) -> Result<()> {
    for (i, row) in pc.rows().into_iter().enumerate() {
        let sum: f64 = row.iter().sum();
        let deviation = (sum - 1.0).abs();
        if !(deviation <= COARSE_ROW_TOL) {
            return Err(Error::RowSumViolation {
                row: i,
                sum,
                deviation,
                tolerance: COARSE_ROW_TOL,
            });
        }
    }
    Ok(())
}

fn scale_rows(m: &Array2<f64>, w: &Array1<f64>) -> Array2<f64> {
    let mut out = m.to_owned();
    for (mut row, &wi) in out.rows_mut().into_iter().zip(w.iter()) {
        row.mapv_inplace(|v| v * wi);
    }
    out
}

fn condition_estimate(m: &Array2<f64>) -> Result<f64> {
    let (_, sigma, _) = m
        .svd(false, false)
        .map_err(|_| Error::DegenerateSimplex(f64::NAN))?;
    let smax = sigma.iter().copied().fold(0.0f64, f64::max);
    let smin = sigma.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(smax / smin)
}
