//! Row-stochastic transition matrices and their construction.
//!
//! The central type is [`StochasticMatrix`]: an immutable, validated
//! row-stochastic matrix. Matrices at or below [`DENSE_LIMIT`] states are
//! stored dense; larger ones use coordinate (triplet) storage and are
//! densified on demand by consumers that need LAPACK (the eigensolver).
//!
//! Construction goes through [`StochasticMatrix::validate`] (strict) or
//! [`StochasticMatrix::row_normalize`] (rescales nonnegative rows), through
//! the generators in [`generate`], or through file I/O in [`io`].

mod generate;
mod io;

pub use generate::{generate_circular, generate_nearly_uncoupled, CircularSpec, Fixture};
pub use io::{
    format_matrix, load_matrix, load_matrix_default, parse_matrix, save_matrix, MatrixFormat,
};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Matrices with dimension above this threshold are kept in coordinate
/// storage; smaller ones are dense. Desk-scale focus: consumers densify
/// for the eigensolver regardless of storage kind.
pub const DENSE_LIMIT: usize = 2048;

/// Default tolerance on |row sum - 1| accepted by [`StochasticMatrix::validate`].
/// Double-precision accumulation over <= 10^4 entries stays well inside this.
pub const DEFAULT_ROW_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
enum Storage {
    Dense(Array2<f64>),
    /// Triplets sorted by (row, col), duplicates rejected at construction.
    /// Explicit zeros are kept: the pattern is preserved as loaded.
    Coordinate {
        dim: usize,
        entries: Vec<(usize, usize, f64)>,
    },
}

/// A validated row-stochastic matrix: square, entries >= 0, every row
/// summing to 1 within the tolerance it was validated with.
///
/// Immutable after construction; cheap to share across threads.
#[derive(Clone, Debug)]
pub struct StochasticMatrix {
    storage: Storage,
}

impl StochasticMatrix {
    /// Validate a dense candidate: square, entries nonnegative, row sums
    /// within `tolerance` of 1.
    pub fn validate(candidate: Array2<f64>, tolerance: f64) -> Result<Self> {
        check_square(&candidate)?;
        check_entries(&candidate)?;
        check_row_sums(&candidate, tolerance)?;
        Ok(Self::from_dense_unchecked(candidate))
    }

    /// Rescale each row of a nonnegative square matrix to sum to 1.
    pub fn row_normalize(candidate: Array2<f64>) -> Result<Self> {
        let mut m = candidate;
        check_square(&m)?;
        check_entries(&m)?;
        for (i, mut row) in m.rows_mut().into_iter().enumerate() {
            let sum = row.sum();
            if sum <= 0.0 {
                return Err(Error::ZeroRow(i));
            }
            row.mapv_inplace(|v| v / sum);
        }
        Ok(Self::from_dense_unchecked(m))
    }

    /// Build from already-validated dense data, choosing storage by size.
    pub(crate) fn from_dense_unchecked(dense: Array2<f64>) -> Self {
        let dim = dense.nrows();
        if dim <= DENSE_LIMIT {
            Self { storage: Storage::Dense(dense) }
        } else {
            let mut entries = Vec::new();
            for ((i, j), &v) in dense.indexed_iter() {
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
            Self { storage: Storage::Coordinate { dim, entries } }
        }
    }

    /// Build from coordinate triplets (already bounds-checked and sorted,
    /// duplicates rejected by the caller), validating stochasticity.
    pub(crate) fn from_coordinate(
        dim: usize,
        entries: Vec<(usize, usize, f64)>,
        tolerance: f64,
        normalize: bool,
    ) -> Result<Self> {
        check_dim(dim)?;
        for &(i, j, v) in &entries {
            if v < 0.0 {
                return Err(Error::NegativeEntry { row: i, col: j, value: v });
            }
        }
        let mut sums = vec![0.0f64; dim];
        for &(i, _, v) in &entries {
            sums[i] += v;
        }
        let mut entries = entries;
        if normalize {
            for (i, &s) in sums.iter().enumerate() {
                if s <= 0.0 {
                    return Err(Error::ZeroRow(i));
                }
            }
            for e in &mut entries {
                e.2 /= sums[e.0];
            }
        } else {
            for (i, &s) in sums.iter().enumerate() {
                let dev = (s - 1.0).abs();
                if dev > tolerance {
                    return Err(Error::RowSumViolation {
                        row: i,
                        sum: s,
                        deviation: dev,
                        tolerance,
                    });
                }
            }
        }
        if dim <= DENSE_LIMIT {
            let mut dense = Array2::zeros((dim, dim));
            for &(i, j, v) in &entries {
                dense[[i, j]] = v;
            }
            Ok(Self { storage: Storage::Dense(dense) })
        } else {
            Ok(Self { storage: Storage::Coordinate { dim, entries } })
        }
    }

    /// Number of states (matrix dimension).
    pub fn dim(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.nrows(),
            Storage::Coordinate { dim, .. } => *dim,
        }
    }

    /// True when backed by coordinate (sparse) storage.
    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Coordinate { .. })
    }

    /// Count of stored entries: nonzeros for dense storage, the stored
    /// pattern (explicit zeros included) for coordinate storage.
    pub fn stored_entries(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.iter().filter(|&&v| v != 0.0).count(),
            Storage::Coordinate { entries, .. } => entries.len(),
        }
    }

    /// Materialize as a dense array (clones dense storage).
    pub fn to_dense(&self) -> Array2<f64> {
        match &self.storage {
            Storage::Dense(d) => d.clone(),
            Storage::Coordinate { dim, entries } => {
                let mut dense = Array2::zeros((*dim, *dim));
                for &(i, j, v) in entries {
                    dense[[i, j]] = v;
                }
                dense
            }
        }
    }

    /// Entry accessor; coordinate storage uses binary search on the sorted
    /// triplets.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d[[i, j]],
            Storage::Coordinate { entries, .. } => entries
                .binary_search_by(|&(r, c, _)| (r, c).cmp(&(i, j)))
                .map(|k| entries[k].2)
                .unwrap_or(0.0),
        }
    }

    pub fn row_sums(&self) -> Array1<f64> {
        match &self.storage {
            Storage::Dense(d) => d.sum_axis(ndarray::Axis(1)),
            Storage::Coordinate { dim, entries } => {
                let mut sums = Array1::zeros(*dim);
                for &(i, _, v) in entries {
                    sums[i] += v;
                }
                sums
            }
        }
    }

    /// Minimum entry over the full matrix (structural zeros included).
    pub fn min_entry(&self) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d.iter().copied().fold(f64::INFINITY, f64::min),
            Storage::Coordinate { dim, entries } => {
                let stored_min = entries.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
                if entries.len() < dim * dim {
                    stored_min.min(0.0)
                } else {
                    stored_min
                }
            }
        }
    }

    /// P * rhs without densifying coordinate storage.
    pub fn apply_to(&self, rhs: &Array2<f64>) -> Array2<f64> {
        match &self.storage {
            Storage::Dense(d) => d.dot(rhs),
            Storage::Coordinate { dim, entries } => {
                let mut out = Array2::zeros((*dim, rhs.ncols()));
                for &(i, j, v) in entries {
                    for k in 0..rhs.ncols() {
                        out[[i, k]] += v * rhs[[j, k]];
                    }
                }
                out
            }
        }
    }

    /// P^T * v without densifying coordinate storage.
    pub fn transpose_apply(&self, v: &Array1<f64>) -> Array1<f64> {
        match &self.storage {
            Storage::Dense(d) => d.t().dot(v),
            Storage::Coordinate { dim, entries } => {
                let mut out = Array1::zeros(*dim);
                for &(i, j, val) in entries {
                    out[j] += val * v[i];
                }
                out
            }
        }
    }

    /// Visit stored entries in row-major order: all entries of dense
    /// storage that are nonzero, or the stored coordinate pattern verbatim.
    pub(crate) fn for_each_stored(&self, mut f: impl FnMut(usize, usize, f64)) {
        match &self.storage {
            Storage::Dense(d) => {
                for ((i, j), &v) in d.indexed_iter() {
                    if v != 0.0 {
                        f(i, j, v);
                    }
                }
            }
            Storage::Coordinate { entries, .. } => {
                for &(i, j, v) in entries {
                    f(i, j, v);
                }
            }
        }
    }
}

fn check_square(m: &Array2<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare(m.nrows(), m.ncols()));
    }
    check_dim(m.nrows())
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::DimensionMismatch(format!(
            "matrix dimension must be at least 2, got {dim}"
        )));
    }
    Ok(())
}

fn check_entries(m: &Array2<f64>) -> Result<()> {
    for ((i, j), &v) in m.indexed_iter() {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::NegativeEntry { row: i, col: j, value: v });
        }
    }
    Ok(())
}

fn check_row_sums(m: &Array2<f64>, tolerance: f64) -> Result<()> {
    for (i, row) in m.rows().into_iter().enumerate() {
        let sum = row.sum();
        let dev = (sum - 1.0).abs();
        if dev > tolerance {
            return Err(Error::RowSumViolation { row: i, sum, deviation: dev, tolerance });
        }
    }
    Ok(())
}

/// A strictly positive probability vector used as the weighting density w.
///
/// The clustering machinery weights inner products as
/// `<u, v> = sum_i w_i u_i v_i` (the D^2 = diag(w) convention, which makes a
/// characteristic membership perfectly crisp).
#[derive(Clone, Debug)]
pub struct DensityVector {
    values: Array1<f64>,
}

impl DensityVector {
    /// The default weighting: w = (1/N, ..., 1/N).
    pub fn uniform(n: usize) -> Self {
        Self { values: Array1::from_elem(n, 1.0 / n as f64) }
    }

    /// Validate an explicit density: strictly positive, summing to 1
    /// within 1e-12.
    pub fn new(values: Array1<f64>) -> Result<Self> {
        Self::check(&values)?;
        let sum = values.sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeight(format!("sums to {sum}, expected 1")));
        }
        Ok(Self { values })
    }

    /// Accept any strictly positive vector and rescale it to sum to 1.
    pub fn from_unnormalized(values: Array1<f64>) -> Result<Self> {
        Self::check(&values)?;
        let sum = values.sum();
        Ok(Self { values: values / sum })
    }

    fn check(values: &Array1<f64>) -> Result<()> {
        if values.is_empty() {
            return Err(Error::InvalidWeight("empty density".into()));
        }
        for &v in values {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidWeight(format!("non-positive entry {v}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }
}
