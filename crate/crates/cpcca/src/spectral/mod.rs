//! Dominant invariant subspaces: eigenvalue selection, realification of
//! conjugate pairs, and weighted orthonormalization.
//!
//! The output of this module is a [`SpectralBasis`]: a real N x n_c matrix
//! X with X^T D^2 X = I (D^2 = diag(w)), first column exactly constant, and
//! a small real block matrix L with P X ~= X L. Complex conjugate
//! eigenvector pairs (v, conj(v)) are replaced by (Re v, Im v), which spans
//! the same invariant subspace; the corresponding block of L is
//! [[a, b], [-b, a]] for the eigenvalue a + bi.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eig, Inverse, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{DensityVector, StochasticMatrix};

/// Default cap on the condition number of the full eigenvector matrix;
/// beyond this the eigenbasis is too close to defective to trust.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

/// Eigenvalues with |imaginary part| at or below this are treated as real.
/// LAPACK returns exactly zero imaginary parts for real eigenvalues of real
/// matrices, so this only guards against foreign inputs.
const REAL_EIG_TOL: f64 = 1e-14;

/// Relative tolerance for matching an eigenvalue with its conjugate.
const PAIR_MATCH_RTOL: f64 = 1e-8;

/// Residual threshold for the span-preservation check in orthonormalize.
const SPAN_TOL: f64 = 1e-10;

/// Absolute key window within which the Perron eigenvalue is pulled to the
/// front of the ranking (breaks the magnitude tie on circular spectra).
const PERRON_TIE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionMode {
    /// Rank eigenvalues by modulus |lambda|.
    LargestMagnitude,
    /// Rank eigenvalues by real part Re(lambda).
    LargestRealPart,
}

impl SelectionMode {
    fn key(&self, lambda: Complex64) -> f64 {
        match self {
            SelectionMode::LargestMagnitude => lambda.norm(),
            SelectionMode::LargestRealPart => lambda.re,
        }
    }
}

impl std::str::FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "magnitude" => Ok(SelectionMode::LargestMagnitude),
            "real" => Ok(SelectionMode::LargestRealPart),
            other => Err(Error::InvalidSpec(format!(
                "unknown selection mode `{other}` (expected magnitude|real)"
            ))),
        }
    }
}

impl std::fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SelectionMode::LargestMagnitude => write!(f, "magnitude"),
            SelectionMode::LargestRealPart => write!(f, "real"),
        }
    }
}

/// How many eigenvalues to keep and under which ranking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EigenSelection {
    pub mode: SelectionMode,
    pub count: usize,
}

impl EigenSelection {
    pub fn new(mode: SelectionMode, count: usize) -> Self {
        Self { mode, count }
    }
}

/// The selected dominant eigenvalues, ranked, with conjugate pairs adjacent
/// (positive imaginary part first).
#[derive(Clone, Debug)]
pub struct DominantSpectrum {
    eigenvalues: Vec<Complex64>,
    /// Index pairs (k, k+1) forming conjugate duos.
    pairs: Vec<(usize, usize)>,
    selection: EigenSelection,
}

impl DominantSpectrum {
    pub fn new(
        eigenvalues: Vec<Complex64>,
        pairs: Vec<(usize, usize)>,
        selection: EigenSelection,
    ) -> Result<Self> {
        for &(a, b) in &pairs {
            if b != a + 1 || b >= eigenvalues.len() {
                return Err(Error::DimensionMismatch(format!(
                    "conjugate pair ({a}, {b}) is not a pair of adjacent indices"
                )));
            }
            let (first, second) = (eigenvalues[a], eigenvalues[b]);
            let gap = (second - first.conj()).norm();
            if first.im <= 0.0 || gap > PAIR_MATCH_RTOL * first.norm().max(1.0) {
                return Err(Error::DimensionMismatch(format!(
                    "indices ({a}, {b}) do not hold a conjugate pair: {first} vs {second}"
                )));
            }
        }
        Ok(Self { eigenvalues, pairs, selection })
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn selection(&self) -> EigenSelection {
        self.selection
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    fn is_pair_start(&self, j: usize) -> bool {
        self.pairs.iter().any(|&(a, _)| a == j)
    }

    fn is_pair_second(&self, j: usize) -> bool {
        self.pairs.iter().any(|&(_, b)| b == j)
    }

    /// Leading prefix of length `count`; fails if it would cut a pair.
    fn truncated(&self, count: usize) -> Result<Self> {
        for &(a, b) in &self.pairs {
            if a < count && b >= count {
                return Err(Error::SplitConjugatePair { count, pair_index: a });
            }
        }
        Ok(Self {
            eigenvalues: self.eigenvalues[..count].to_vec(),
            pairs: self.pairs.iter().copied().filter(|&(_, b)| b < count).collect(),
            selection: EigenSelection::new(self.selection.mode, count),
        })
    }
}

/// One ranked unit: a real eigenvalue or a whole conjugate pair. Pairs are
/// ranked by their positive-imaginary member so a pair can never be split
/// by ordering.
struct RankItem {
    key: f64,
    imag: f64,
    index: usize,
    columns: (usize, Option<usize>),
}

impl RankItem {
    fn width(&self) -> usize {
        if self.columns.1.is_some() {
            2
        } else {
            1
        }
    }
}

/// Compute the full eigendecomposition, rank eigenvalues under the mode,
/// and return the top `selection.count` along with their right
/// eigenvectors. Conjugate pairs are kept adjacent (positive imaginary
/// part first); a count that would split a pair is an error. Uses the
/// default eigenvector-matrix condition cap of 1e12.
pub fn dominant_eigenpairs(
    p: &StochasticMatrix,
    selection: EigenSelection,
) -> Result<(DominantSpectrum, Array2<Complex64>)> {
    dominant_eigenpairs_capped(p, selection, DEFAULT_CONDITION_CAP)
}

pub fn dominant_eigenpairs_capped(
    p: &StochasticMatrix,
    selection: EigenSelection,
    condition_cap: f64,
) -> Result<(DominantSpectrum, Array2<Complex64>)> {
    let dim = p.dim();
    if selection.count < 1 || selection.count >= dim {
        return Err(Error::InvalidEigenCount { count: selection.count, dim });
    }
    let dense = p.to_dense();
    let (values, mut vectors) = dense
        .eig()
        .map_err(|e| Error::DefectiveOrIllConditioned(format!("eigensolver failed: {e}")))?;
    check_condition(&vectors, condition_cap)?;
    phase_normalize(&mut vectors)?;

    let items = rank_items(&values, selection.mode);
    let mut columns: Vec<usize> = Vec::with_capacity(selection.count);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for item in &items {
        if columns.len() == selection.count {
            break;
        }
        if columns.len() + item.width() > selection.count {
            return Err(Error::SplitConjugatePair {
                count: selection.count,
                pair_index: columns.len(),
            });
        }
        match item.columns {
            (a, Some(b)) => {
                pairs.push((columns.len(), columns.len() + 1));
                columns.push(a);
                columns.push(b);
            }
            (a, None) => columns.push(a),
        }
    }

    let eigenvalues: Vec<Complex64> = columns.iter().map(|&j| values[j]).collect();
    let mut selected = Array2::zeros((dim, columns.len()));
    for (out, &j) in columns.iter().enumerate() {
        selected.column_mut(out).assign(&vectors.column(j));
    }
    let spectrum = DominantSpectrum::new(eigenvalues, pairs, selection)?;
    Ok((spectrum, selected))
}

/// Every eigenvalue of P, unordered beyond the solver's output.
pub fn all_eigenvalues(p: &StochasticMatrix) -> Result<Vec<Complex64>> {
    let dense = p.to_dense();
    let (values, _) = dense
        .eig()
        .map_err(|e| Error::DefectiveOrIllConditioned(format!("eigensolver failed: {e}")))?;
    Ok(values.to_vec())
}

/// Largest gap between the N-th roots of unity and their nearest computed
/// eigenvalues: near zero for block-circular chains with N blocks.
pub fn circular_root_gap(p: &StochasticMatrix, blocks: usize) -> Result<f64> {
    if blocks < 2 {
        return Err(Error::InvalidSpec(format!(
            "block count must be at least 2, got {blocks}"
        )));
    }
    let values = all_eigenvalues(p)?;
    let mut worst = 0.0f64;
    for k in 0..blocks {
        let angle = 2.0 * std::f64::consts::PI * k as f64 / blocks as f64;
        let root = Complex64::new(angle.cos(), angle.sin());
        let gap = values
            .iter()
            .map(|&v| (v - root).norm())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(gap);
    }
    Ok(worst)
}

fn check_condition(vectors: &Array2<Complex64>, cap: f64) -> Result<()> {
    let (_, sigma, _) = vectors
        .svd(false, false)
        .map_err(|e| Error::DefectiveOrIllConditioned(format!("svd failed: {e}")))?;
    let smax = sigma.iter().copied().fold(0.0f64, f64::max);
    let smin = sigma.iter().copied().fold(f64::INFINITY, f64::min);
    let cond = smax / smin;
    if !cond.is_finite() || cond > cap {
        return Err(Error::DefectiveOrIllConditioned(format!(
            "eigenvector matrix condition number {cond:.3e} exceeds {cap:.1e}"
        )));
    }
    Ok(())
}

/// Rotate each column so its largest-modulus entry is real and positive;
/// solver output phases are arbitrary and this makes them canonical.
fn phase_normalize(vectors: &mut Array2<Complex64>) -> Result<()> {
    for mut col in vectors.columns_mut() {
        let mut best = 0usize;
        let mut best_norm = -1.0f64;
        for (i, v) in col.iter().enumerate() {
            let n = v.norm();
            if n > best_norm {
                best_norm = n;
                best = i;
            }
        }
        if best_norm <= 0.0 {
            return Err(Error::DefectiveOrIllConditioned(
                "eigenvector column is identically zero".into(),
            ));
        }
        let phase = col[best] / best_norm;
        col.mapv_inplace(|v| v / phase);
    }
    Ok(())
}

/// Group eigenvalues into rank items and order them: descending mode key,
/// then descending imaginary part, then input index. The Perron eigenvalue
/// (real, nearest 1) is pulled to the front among items tying the top key,
/// so the constant eigenvector always leads when |lambda| = 1 ties occur.
fn rank_items(values: &Array1<Complex64>, mode: SelectionMode) -> Vec<RankItem> {
    let n = values.len();
    let mut used = vec![false; n];
    let mut items: Vec<RankItem> = Vec::new();
    for j in 0..n {
        if used[j] {
            continue;
        }
        used[j] = true;
        let lambda = values[j];
        if lambda.im.abs() > REAL_EIG_TOL {
            let tol = PAIR_MATCH_RTOL * lambda.norm().max(1.0);
            let partner = (j + 1..n)
                .find(|&l| !used[l] && (values[l] - lambda.conj()).norm() <= tol);
            // a real matrix always has the conjugate present; treat both as
            // a unit keyed by the positive-imaginary member
            if let Some(l) = partner {
                used[l] = true;
                let (first, second) = if lambda.im > 0.0 { (j, l) } else { (l, j) };
                items.push(RankItem {
                    key: mode.key(values[first]),
                    imag: values[first].im,
                    index: j,
                    columns: (first, Some(second)),
                });
                continue;
            }
        }
        items.push(RankItem {
            key: mode.key(lambda),
            imag: 0.0,
            index: j,
            columns: (j, None),
        });
    }
    items.sort_by(|a, b| {
        b.key
            .total_cmp(&a.key)
            .then(b.imag.total_cmp(&a.imag))
            .then(a.index.cmp(&b.index))
    });
    if let Some(top_key) = items.first().map(|i| i.key) {
        let perron = items
            .iter()
            .enumerate()
            .filter(|(_, it)| it.key >= top_key - PERRON_TIE_TOL && it.columns.1.is_none())
            .min_by(|(_, a), (_, b)| {
                let da = (values[a.columns.0] - 1.0).norm();
                let db = (values[b.columns.0] - 1.0).norm();
                da.total_cmp(&db)
            })
            .map(|(i, _)| i);
        if let Some(i) = perron {
            let item = items.remove(i);
            items.insert(0, item);
        }
    }
    items
}

/// The per-pair 2x2 transform certifying the realification: multiplying the
/// complex column duo (v, conj(v)) by the block recovers (Re v, Im v).
#[derive(Clone, Debug)]
pub struct RealifyCertificate {
    pairs: Vec<(usize, usize)>,
}

impl RealifyCertificate {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// The unique 2x2 block [[1/2, -i/2], [1/2, i/2]], identical for every
    /// pair.
    pub fn block() -> [[Complex64; 2]; 2] {
        let half = Complex64::new(0.5, 0.0);
        let half_i = Complex64::new(0.0, 0.5);
        [[half, -half_i], [half, half_i]]
    }

    /// Max entrywise deviation of (complex pair columns) * block from the
    /// realified columns, over all pairs: certifies that realification
    /// was exactly the invertible per-pair change of basis.
    pub fn max_deviation(&self, complex: &Array2<Complex64>, real: &Array2<f64>) -> f64 {
        let c = Self::block();
        let mut worst = 0.0f64;
        for &(a, b) in &self.pairs {
            for i in 0..complex.nrows() {
                let (v, vbar) = (complex[[i, a]], complex[[i, b]]);
                let col_a = v * c[0][0] + vbar * c[1][0];
                let col_b = v * c[0][1] + vbar * c[1][1];
                let da = (col_a - real[[i, a]]).norm();
                let db = (col_b - real[[i, b]]).norm();
                worst = worst.max(da).max(db);
            }
        }
        worst
    }
}

/// Realified dominant eigenvectors: real columns plus the block spectrum.
pub struct Realified {
    /// N x n_c real matrix: (Re v, Im v) per pair, plain copies otherwise.
    pub vectors: Array2<f64>,
    /// n_c x n_c block-diagonal: lambda on the diagonal for real
    /// eigenvalues, [[a, b], [-b, a]] blocks for pairs a +- bi.
    pub block_spectrum: Array2<f64>,
    pub certificate: RealifyCertificate,
}

/// Replace each conjugate eigenvector duo by its real and imaginary parts.
/// P X = X L transfers exactly: P (Re v) = a Re v - b Im v and
/// P (Im v) = b Re v + a Im v for the eigenvalue a + bi.
pub fn realify(vectors: &Array2<Complex64>, spectrum: &DominantSpectrum) -> Result<Realified> {
    let (n, k) = vectors.dim();
    if k != spectrum.len() {
        return Err(Error::DimensionMismatch(format!(
            "{k} eigenvector columns vs {} eigenvalues",
            spectrum.len()
        )));
    }
    let mut x = Array2::zeros((n, k));
    let mut block = Array2::zeros((k, k));
    for j in 0..k {
        let lambda = spectrum.eigenvalues()[j];
        if spectrum.is_pair_start(j) {
            let (a, b) = (lambda.re, lambda.im);
            for i in 0..n {
                x[[i, j]] = vectors[[i, j]].re;
                x[[i, j + 1]] = vectors[[i, j]].im;
            }
            block[[j, j]] = a;
            block[[j, j + 1]] = b;
            block[[j + 1, j]] = -b;
            block[[j + 1, j + 1]] = a;
        } else if spectrum.is_pair_second(j) {
            // written by the pair-start branch
        } else {
            if lambda.im.abs() > REAL_EIG_TOL {
                return Err(Error::UnpairedComplexColumn(j));
            }
            let worst_imag = vectors
                .column(j)
                .iter()
                .map(|v| v.im.abs())
                .fold(0.0f64, f64::max);
            if worst_imag > 1e-10 {
                return Err(Error::NonNegligibleImaginaryPart {
                    column: j,
                    magnitude: worst_imag,
                });
            }
            for i in 0..n {
                x[[i, j]] = vectors[[i, j]].re;
            }
            block[[j, j]] = lambda.re;
        }
    }
    let certificate = RealifyCertificate { pairs: spectrum.pairs().to_vec() };
    Ok(Realified { vectors: x, block_spectrum: block, certificate })
}

/// Weighted modified Gram-Schmidt with the first output column forced to
/// the exact all-ones vector (unit norm under any density since
/// sum(w) = 1). Two orthogonalization passes per column for stability.
/// Returns (Y, L') with X = Y S and L' = S L S^{-1}, so P Y = Y L'
/// whenever P X = X L.
pub fn orthonormalize(
    x: &Array2<f64>,
    block_spectrum: &Array2<f64>,
    weight: &DensityVector,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let (n, k) = x.dim();
    if weight.len() != n || block_spectrum.dim() != (k, k) || k == 0 {
        return Err(Error::DimensionMismatch(format!(
            "basis {n}x{k}, weight length {}, block {:?}",
            weight.len(),
            block_spectrum.dim()
        )));
    }
    let w = weight.values();
    let mut y = Array2::zeros((n, k));
    y.column_mut(0).fill(1.0);
    for j in 1..k {
        let mut v = x.column(j).to_owned();
        for _pass in 0..2 {
            for l in 0..j {
                let yl = y.column(l);
                let coeff: f64 = (0..n).map(|i| w[i] * yl[i] * v[i]).sum();
                for i in 0..n {
                    v[i] -= coeff * yl[i];
                }
            }
        }
        let norm: f64 = (0..n).map(|i| w[i] * v[i] * v[i]).sum::<f64>().sqrt();
        if norm <= 1e-12 {
            return Err(Error::RankDeficient(j));
        }
        v.mapv_inplace(|t| t / norm);
        y.column_mut(j).assign(&v);
    }

    // Coefficients of the inputs in the new basis: S = Y^T D^2 X. If every
    // input column reconstructs as Y S, the span is preserved; the only way
    // it can fail (rank deficiency is caught above) is the forced constant
    // column changing the span.
    let weighted_x = {
        let mut wx = x.clone();
        for (mut row, &wi) in wx.rows_mut().into_iter().zip(w.iter()) {
            row.mapv_inplace(|t| t * wi);
        }
        wx
    };
    let s_coeff = y.t().dot(&weighted_x);
    let recon = y.dot(&s_coeff);
    let mut worst = 0.0f64;
    for j in 0..k {
        let num: f64 = (0..n)
            .map(|i| (x[[i, j]] - recon[[i, j]]).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = (0..n).map(|i| x[[i, j]].powi(2)).sum::<f64>().sqrt();
        worst = worst.max(num / den.max(f64::MIN_POSITIVE));
    }
    if worst > SPAN_TOL {
        return Err(Error::ConstantVectorNotInSpan(worst));
    }

    let s_inv = s_coeff
        .inv()
        .map_err(|_| Error::RankDeficient(0))?;
    let transformed = s_coeff.dot(block_spectrum).dot(&s_inv);
    Ok((y, transformed))
}

/// Relative invariant-subspace defect ||P Y - Y L||_F / ||Y||_F.
pub fn subspace_residual(
    p: &StochasticMatrix,
    vectors: &Array2<f64>,
    block_spectrum: &Array2<f64>,
) -> Result<f64> {
    let (n, k) = vectors.dim();
    if p.dim() != n || block_spectrum.dim() != (k, k) {
        return Err(Error::DimensionMismatch(format!(
            "matrix dim {}, basis {n}x{k}, block {:?}",
            p.dim(),
            block_spectrum.dim()
        )));
    }
    let defect = p.apply_to(vectors) - vectors.dot(block_spectrum);
    let num = frobenius(&defect);
    let den = frobenius(vectors);
    if den == 0.0 {
        return Err(Error::DimensionMismatch("zero basis".into()));
    }
    Ok(num / den)
}

fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Weighting density for the orthonormalization inner product.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WeightChoice {
    /// w = (1/N, ..., 1/N); the numerically robust default.
    Uniform,
    /// The stationary density (left Perron eigenvector, normalized).
    Stationary,
}

impl WeightChoice {
    pub fn resolve(&self, p: &StochasticMatrix) -> Result<DensityVector> {
        match self {
            WeightChoice::Uniform => Ok(DensityVector::uniform(p.dim())),
            WeightChoice::Stationary => stationary_density(p),
        }
    }
}

impl std::str::FromStr for WeightChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(WeightChoice::Uniform),
            "stationary" => Ok(WeightChoice::Stationary),
            other => Err(Error::InvalidSpec(format!(
                "unknown weight choice `{other}` (expected uniform|stationary)"
            ))),
        }
    }
}

/// Stationary density: the left eigenvector of P at eigenvalue 1,
/// normalized to a strictly positive probability vector. Fails when the
/// chain is reducible enough to make it non-positive.
pub fn stationary_density(p: &StochasticMatrix) -> Result<DensityVector> {
    let dense_t = p.to_dense().reversed_axes().to_owned();
    let (values, mut vectors) = dense_t
        .eig()
        .map_err(|e| Error::DefectiveOrIllConditioned(format!("eigensolver failed: {e}")))?;
    let near_one = (0..values.len())
        .min_by(|&a, &b| (values[a] - 1.0).norm().total_cmp(&(values[b] - 1.0).norm()))
        .expect("dim >= 2");
    if (values[near_one] - 1.0).norm() > 1e-6 {
        return Err(Error::DefectiveOrIllConditioned(format!(
            "no eigenvalue near 1 (closest: {})",
            values[near_one]
        )));
    }
    phase_normalize(&mut vectors)?;
    let col = vectors.column(near_one);
    let worst_imag = col.iter().map(|v| v.im.abs()).fold(0.0f64, f64::max);
    if worst_imag > 1e-8 {
        return Err(Error::DefectiveOrIllConditioned(format!(
            "stationary vector has imaginary parts up to {worst_imag:e}"
        )));
    }
    let real: Array1<f64> = col.iter().map(|v| v.re).collect();
    let total = real.sum();
    let scaled = real / total;
    let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::NonPositiveStationaryDensity(min));
    }
    DensityVector::from_unnormalized(scaled)
}

/// A weighted-orthonormal real basis of the dominant invariant subspace,
/// with its block spectrum, weighting density, the eigenvalue selection
/// it was built from, and the invariant-subspace residual.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    vectors: Array2<f64>,
    block_spectrum: Array2<f64>,
    weight: DensityVector,
    spectrum: DominantSpectrum,
    residual: f64,
}

impl SpectralBasis {
    /// Full pipeline: dominant eigenpairs, realify, orthonormalize, and
    /// residual computation.
    pub fn build(
        p: &StochasticMatrix,
        selection: EigenSelection,
        weight: DensityVector,
    ) -> Result<Self> {
        if weight.len() != p.dim() {
            return Err(Error::DimensionMismatch(format!(
                "weight length {} vs matrix dim {}",
                weight.len(),
                p.dim()
            )));
        }
        let (spectrum, complex_vectors) = dominant_eigenpairs(p, selection)?;
        let realified = realify(&complex_vectors, &spectrum)?;
        let (vectors, block_spectrum) =
            orthonormalize(&realified.vectors, &realified.block_spectrum, &weight)?;
        let residual = subspace_residual(p, &vectors, &block_spectrum)?;
        Ok(Self { vectors, block_spectrum, weight, spectrum, residual })
    }

    /// Assemble a basis from pre-validated parts (tests and internal
    /// fixtures only); `build` is the checked public path.
    #[cfg(test)]
    pub(crate) fn from_parts(
        vectors: Array2<f64>,
        block_spectrum: Array2<f64>,
        weight: DensityVector,
        spectrum: DominantSpectrum,
        residual: f64,
    ) -> Self {
        Self { vectors, block_spectrum, weight, spectrum, residual }
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn block_spectrum(&self) -> &Array2<f64> {
        &self.block_spectrum
    }

    pub fn weight(&self) -> &DensityVector {
        &self.weight
    }

    pub fn spectrum(&self) -> &DominantSpectrum {
        &self.spectrum
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Number of states N.
    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// Number of basis columns n_c.
    pub fn count(&self) -> usize {
        self.vectors.ncols()
    }

    /// Leading `count` columns as a basis in their own right. Orthonormality
    /// and the constant first column carry over; the block spectrum prefix
    /// stays valid because the change-of-basis is upper-triangular past the
    /// first column. The parent's residual is retained as an estimate;
    /// recompute via [`subspace_residual`] where it matters.
    pub fn truncate(&self, count: usize) -> Result<Self> {
        if count < 1 || count > self.count() {
            return Err(Error::InvalidEigenCount { count, dim: self.count() });
        }
        let spectrum = self.spectrum.truncated(count)?;
        Ok(Self {
            vectors: self.vectors.slice(s![.., ..count]).to_owned(),
            block_spectrum: self.block_spectrum.slice(s![..count, ..count]).to_owned(),
            weight: self.weight.clone(),
            spectrum,
            residual: self.residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Fixture;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn example2(x: f64, y: f64) -> StochasticMatrix {
        Fixture::Example2 { x, y }.matrix()
    }

    #[test]
    fn example1_real_mode_top_three() {
        let p = Fixture::Example1.matrix();
        let sel = EigenSelection::new(SelectionMode::LargestRealPart, 3);
        let (spectrum, _) = dominant_eigenpairs(&p, sel).unwrap();
        let ev = spectrum.eigenvalues();
        assert_abs_diff_eq!(ev[0].re, 1.0, epsilon = 5e-5);
        assert_abs_diff_eq!(ev[0].im, 0.0, epsilon = 5e-5);
        assert_abs_diff_eq!(ev[1].re, 0.9557, epsilon = 5e-5);
        assert_abs_diff_eq!(ev[1].im, 0.0177, epsilon = 5e-5);
        assert_abs_diff_eq!(ev[2].re, 0.9557, epsilon = 5e-5);
        assert_abs_diff_eq!(ev[2].im, -0.0177, epsilon = 5e-5);
        assert_eq!(spectrum.pairs(), &[(1, 2)]);
    }

    #[test]
    fn example2_magnitude_mode_top_three() {
        let p = example2(0.9, 0.1);
        let sel = EigenSelection::new(SelectionMode::LargestMagnitude, 3);
        let (spectrum, _) = dominant_eigenpairs(&p, sel).unwrap();
        let ev = spectrum.eigenvalues();
        assert_abs_diff_eq!(ev[0].re, 1.0, epsilon = 5e-5);
        assert_abs_diff_eq!(ev[1].re, -0.5, epsilon = 5e-5);
        assert_abs_diff_eq!(ev[1].im, 0.8660, epsilon = 5e-5);
        assert_abs_diff_eq!(ev[2].re, -0.5, epsilon = 5e-5);
        assert_abs_diff_eq!(ev[2].im, -0.8660, epsilon = 5e-5);
    }

    #[test]
    fn example2_real_mode_top_three() {
        let p = example2(0.9, 0.1);
        let sel = EigenSelection::new(SelectionMode::LargestRealPart, 3);
        let (spectrum, _) = dominant_eigenpairs(&p, sel).unwrap();
        let ev = spectrum.eigenvalues();
        assert_abs_diff_eq!(ev[0].re, 1.0, epsilon = 5e-5);
        assert_abs_diff_eq!(ev[1].re, 0.9483, epsilon = 5e-5);
        assert_abs_diff_eq!(ev[1].im, 0.0279, epsilon = 5e-5);
    }

    #[test]
    fn split_pair_is_rejected_with_suggestion() {
        let p = Fixture::Example1.matrix();
        let sel = EigenSelection::new(SelectionMode::LargestRealPart, 2);
        match dominant_eigenpairs(&p, sel) {
            Err(e @ Error::SplitConjugatePair { count: 2, .. }) => {
                let msg = e.to_string();
                assert!(msg.contains('1') && msg.contains('3'), "{msg}");
            }
            other => panic!("expected SplitConjugatePair, got {other:?}"),
        }
    }

    #[test]
    fn count_bounds_are_enforced() {
        let p = Fixture::Example1.matrix();
        for count in [0, 6, 7] {
            let sel = EigenSelection::new(SelectionMode::LargestMagnitude, count);
            assert!(matches!(
                dominant_eigenpairs(&p, sel),
                Err(Error::InvalidEigenCount { .. })
            ));
        }
    }

    #[test]
    fn condition_cap_is_enforced() {
        let p = Fixture::Example1.matrix();
        let sel = EigenSelection::new(SelectionMode::LargestRealPart, 3);
        assert!(matches!(
            dominant_eigenpairs_capped(&p, sel, 1.0),
            Err(Error::DefectiveOrIllConditioned(_))
        ));
    }

    #[test]
    fn realify_single_pair_reads_off_parts() {
        let vectors = array![[c(1.0, 1.0), c(1.0, -1.0)], [c(2.0, 0.0), c(2.0, 0.0)]];
        let sel = EigenSelection::new(SelectionMode::LargestMagnitude, 2);
        let spectrum =
            DominantSpectrum::new(vec![c(0.5, 0.5), c(0.5, -0.5)], vec![(0, 1)], sel).unwrap();
        let out = realify(&vectors, &spectrum).unwrap();
        assert_eq!(out.vectors, array![[1.0, 1.0], [2.0, 0.0]]);
        assert_eq!(out.block_spectrum, array![[0.5, 0.5], [-0.5, 0.5]]);
        assert_eq!(out.certificate.max_deviation(&vectors, &out.vectors), 0.0);
    }

    #[test]
    fn realify_all_real_passthrough() {
        let vectors = array![[c(1.0, 0.0), c(0.5, 0.0)], [c(-1.0, 0.0), c(0.25, 0.0)]];
        let sel = EigenSelection::new(SelectionMode::LargestMagnitude, 2);
        let spectrum =
            DominantSpectrum::new(vec![c(1.0, 0.0), c(0.5, 0.0)], vec![], sel).unwrap();
        let out = realify(&vectors, &spectrum).unwrap();
        assert_eq!(out.vectors, array![[1.0, 0.5], [-1.0, 0.25]]);
        assert_eq!(out.block_spectrum, array![[1.0, 0.0], [0.0, 0.5]]);
    }

    #[test]
    fn realify_rejects_imaginary_leakage() {
        let vectors = array![[c(1.0, 1e-6)], [c(1.0, 0.0)]];
        let sel = EigenSelection::new(SelectionMode::LargestMagnitude, 1);
        let spectrum = DominantSpectrum::new(vec![c(1.0, 0.0)], vec![], sel).unwrap();
        assert!(matches!(
            realify(&vectors, &spectrum),
            Err(Error::NonNegligibleImaginaryPart { column: 0, .. })
        ));
    }

    #[test]
    fn example1_pair_block_and_residual() {
        let p = Fixture::Example1.matrix();
        let sel = EigenSelection::new(SelectionMode::LargestRealPart, 3);
        let (spectrum, vectors) = dominant_eigenpairs(&p, sel).unwrap();
        let out = realify(&vectors, &spectrum).unwrap();
        let b = &out.block_spectrum;
        assert_abs_diff_eq!(b[[1, 1]], 0.9557, epsilon = 5e-5);
        assert_abs_diff_eq!(b[[1, 2]], 0.0177, epsilon = 5e-5);
        assert_abs_diff_eq!(b[[2, 1]], -0.0177, epsilon = 5e-5);
        assert_abs_diff_eq!(b[[2, 2]], 0.9557, epsilon = 5e-5);
        let res = subspace_residual(&p, &out.vectors, b).unwrap();
        assert!(res <= 1e-10, "residual {res}");
        assert!(out.certificate.max_deviation(&vectors, &out.vectors) <= 1e-12);
    }

    #[test]
    fn orthonormalize_is_idempotent_on_orthonormal_input() {
        let x = array![
            [1.0, 1.0, 1.0],
            [1.0, -1.0, 1.0],
            [1.0, 1.0, -1.0],
            [1.0, -1.0, -1.0],
        ];
        let w = DensityVector::uniform(4);
        let block = Array2::eye(3);
        let (y, transformed) = orthonormalize(&x, &block, &w).unwrap();
        assert_abs_diff_eq!(y, x, epsilon = 1e-12);
        assert_abs_diff_eq!(transformed, block, epsilon = 1e-12);
    }

    #[test]
    fn orthonormalize_example1_satisfies_weighted_identity() {
        let p = Fixture::Example1.matrix();
        let sel = EigenSelection::new(SelectionMode::LargestRealPart, 3);
        let (spectrum, vectors) = dominant_eigenpairs(&p, sel).unwrap();
        let out = realify(&vectors, &spectrum).unwrap();
        let w = DensityVector::uniform(6);
        let (y, _) = orthonormalize(&out.vectors, &out.block_spectrum, &w).unwrap();
        let mut gram = Array2::zeros((3, 3));
        for a in 0..3 {
            for b in 0..3 {
                gram[[a, b]] = (0..6)
                    .map(|i| w.values()[i] * y[[i, a]] * y[[i, b]])
                    .sum::<f64>();
            }
        }
        let worst = (&gram - &Array2::<f64>::eye(3))
            .iter()
            .map(|v| v.abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-12, "gram deviation {worst}");
        for i in 0..6 {
            assert_eq!(y[[i, 0]], 1.0);
        }
    }

    #[test]
    fn orthonormalize_detects_missing_constant_vector() {
        // columns orthogonal to ones: forcing the constant changes the span
        let x = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        let w = DensityVector::uniform(4);
        let block = Array2::eye(2);
        assert!(matches!(
            orthonormalize(&x, &block, &w),
            Err(Error::ConstantVectorNotInSpan(_))
        ));
    }

    #[test]
    fn orthonormalize_detects_rank_deficiency() {
        let x = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let w = DensityVector::uniform(3);
        let block = Array2::eye(2);
        assert!(matches!(orthonormalize(&x, &block, &w), Err(Error::RankDeficient(1))));
    }

    #[test]
    fn residual_flags_broken_invariance() {
        let p = Fixture::Example1.matrix();
        let sel = EigenSelection::new(SelectionMode::LargestRealPart, 3);
        let (spectrum, vectors) = dominant_eigenpairs(&p, sel).unwrap();
        let out = realify(&vectors, &spectrum).unwrap();
        let clean = subspace_residual(&p, &out.vectors, &out.block_spectrum).unwrap();
        assert!(clean <= 1e-12, "clean residual {clean}");

        let mut noisy = out.vectors.clone();
        noisy[[0, 2]] += 1.0;
        noisy[[3, 2]] -= 0.7;
        let broken = subspace_residual(&p, &noisy, &out.block_spectrum).unwrap();
        assert!(broken >= 1e-2, "noisy residual {broken}");
    }

    #[test]
    fn basis_build_example2_residual_small() {
        let p = example2(0.9, 0.1);
        let sel = EigenSelection::new(SelectionMode::LargestMagnitude, 3);
        let basis = SpectralBasis::build(&p, sel, DensityVector::uniform(9)).unwrap();
        assert!(basis.residual() <= 1e-10, "residual {}", basis.residual());
        assert_eq!(basis.count(), 3);
        assert_eq!(basis.dim(), 9);
    }

    #[test]
    fn truncate_respects_pairs() {
        let p = Fixture::Example1.matrix();
        let sel = EigenSelection::new(SelectionMode::LargestRealPart, 3);
        let basis = SpectralBasis::build(&p, sel, DensityVector::uniform(6)).unwrap();
        let one = basis.truncate(1).unwrap();
        assert_eq!(one.count(), 1);
        assert_eq!(one.vectors().ncols(), 1);
        assert!(matches!(
            basis.truncate(2),
            Err(Error::SplitConjugatePair { count: 2, .. })
        ));
        assert!(matches!(basis.truncate(9), Err(Error::InvalidEigenCount { .. })));
    }

    #[test]
    fn stationary_density_is_left_fixed_point() {
        let p = Fixture::Example1.matrix();
        let w = stationary_density(&p).unwrap();
        let propagated = p.transpose_apply(w.values());
        for (a, b) in propagated.iter().zip(w.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!((w.values().sum() - 1.0).abs() <= 1e-12);
        assert!(w.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn weight_choice_parses() {
        assert_eq!("uniform".parse::<WeightChoice>().unwrap(), WeightChoice::Uniform);
        assert_eq!("stationary".parse::<WeightChoice>().unwrap(), WeightChoice::Stationary);
        assert!("mass".parse::<WeightChoice>().is_err());
        assert_eq!(
            "magnitude".parse::<SelectionMode>().unwrap(),
            SelectionMode::LargestMagnitude
        );
        assert_eq!("real".parse::<SelectionMode>().unwrap(), SelectionMode::LargestRealPart);
    }

    #[test]
    fn circular_root_gap_detects_structure() {
        let spec = crate::matrix::CircularSpec::new(4, 3, 0.0, 9).unwrap();
        let m = crate::matrix::generate_circular(&spec).unwrap();
        assert!(circular_root_gap(&m, 4).unwrap() <= 1e-10);
        // heavy perturbation destroys the roots-of-unity structure
        let spec = crate::matrix::CircularSpec::new(4, 3, 0.9, 9).unwrap();
        let m = crate::matrix::generate_circular(&spec).unwrap();
        assert!(circular_root_gap(&m, 4).unwrap() > 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Orthonormalization of a random basis whose span contains the
        /// constant vector: weighted Gram matrix is the identity and every
        /// input column reconstructs in the output basis.
        #[test]
        fn random_basis_orthonormalizes(
            cols in prop::collection::vec(-1.0f64..1.0, 12),
            raw_w in prop::collection::vec(0.05f64..1.0, 6),
        ) {
            let mut x = Array2::ones((6, 3));
            for (t, v) in cols.iter().enumerate() {
                x[[t % 6, 1 + t / 6]] = *v;
            }
            let w = DensityVector::from_unnormalized(Array1::from_vec(raw_w)).unwrap();
            let block = Array2::eye(3);
            if let Ok((y, _)) = orthonormalize(&x, &block, &w) {
                for a in 0..3 {
                    for b in 0..3 {
                        let g: f64 = (0..6)
                            .map(|i| w.values()[i] * y[[i, a]] * y[[i, b]])
                            .sum();
                        let target = if a == b { 1.0 } else { 0.0 };
                        prop_assert!((g - target).abs() <= 1e-10);
                    }
                }
            }
        }
    }
}
