//! Python bindings for the coarse-graining library: matrix construction
//! and I/O, dominant-spectrum extraction, fuzzy clustering, cluster-count
//! scanning, and coarse-matrix comparison.
//!
//! Build with `cargo build -p cpcca-python`; the produced `libcpcca_py.so`
//! loads as module `cpcca_py` once renamed/linked to `cpcca_py.so` (see
//! `python/smoke_test.py`). All domain failures raise `CpccaError` with
//! the stable error code prefixed to the message.

use std::path::PathBuf;

use ndarray::Array1;
use num_complex::Complex64;
use numpy::{IntoPyArray, PyArray1, PyArray2, PyReadonlyArray2};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use cpcca::matrix::{
    generate_circular, generate_nearly_uncoupled, load_matrix_default, save_matrix, CircularSpec,
    Fixture, MatrixFormat,
};
use cpcca::pcca::{self, ClusteringResult, Membership};
use cpcca::spectral::{circular_root_gap, dominant_eigenpairs, EigenSelection, SpectralBasis};
use cpcca::{
    NormKind, OptimizeOptions, OptimizerMethod, SelectionMode, StochasticMatrix, WeightChoice,
};

create_exception!(
    cpcca_py,
    CpccaError,
    PyException,
    "Domain error; the message starts with a stable error code."
);

fn to_py(e: cpcca::Error) -> PyErr {
    CpccaError::new_err(format!("{}: {e}", e.code()))
}

fn parse_mode(s: &str) -> PyResult<SelectionMode> {
    s.parse().map_err(to_py)
}

fn parse_weight(s: &str) -> PyResult<WeightChoice> {
    s.parse().map_err(to_py)
}

fn parse_optimizer(s: &str) -> PyResult<OptimizerMethod> {
    s.parse().map_err(to_py)
}

fn options(max_iterations: Option<usize>, tolerance: Option<f64>) -> OptimizeOptions {
    let mut opts = OptimizeOptions::default();
    if let Some(n) = max_iterations {
        opts.max_iterations = n;
    }
    if let Some(t) = tolerance {
        opts.tolerance = t;
    }
    opts
}

/// A validated row-stochastic transition matrix.
#[pyclass(module = "cpcca_py")]
struct Matrix {
    inner: StochasticMatrix,
}

#[pymethods]
impl Matrix {
    /// Validate a square nonnegative float64 array whose rows sum to 1
    /// within `tolerance`.
    #[new]
    #[pyo3(signature = (rows, tolerance = 1e-12))]
    fn new(rows: PyReadonlyArray2<'_, f64>, tolerance: f64) -> PyResult<Self> {
        let inner = StochasticMatrix::validate(rows.as_array().to_owned(), tolerance)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Rescale each row of a nonnegative square array to sum to 1.
    #[staticmethod]
    fn row_normalize(rows: PyReadonlyArray2<'_, f64>) -> PyResult<Self> {
        let inner = StochasticMatrix::row_normalize(rows.as_array().to_owned()).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Build a named example chain; see `fixture_names()` for spellings.
    #[staticmethod]
    fn fixture(name: &str) -> PyResult<Self> {
        let fixture: Fixture = name.parse().map_err(to_py)?;
        Ok(Self { inner: fixture.matrix() })
    }

    /// Block-circulant chain with an optional random row-stochastic
    /// perturbation of strength `perturbation`.
    #[staticmethod]
    #[pyo3(signature = (blocks = 3, block_size = 10, perturbation = 0.0, seed = 0))]
    fn circular(blocks: usize, block_size: usize, perturbation: f64, seed: u64) -> PyResult<Self> {
        let spec = CircularSpec::new(blocks, block_size, perturbation, seed).map_err(to_py)?;
        Ok(Self { inner: generate_circular(&spec).map_err(to_py)? })
    }

    /// Random block-diagonal metastable chain with off-block `coupling`.
    #[staticmethod]
    #[pyo3(signature = (blocks = 3, block_size = 10, coupling = 0.05, seed = 0))]
    fn nearly_uncoupled(
        blocks: usize,
        block_size: usize,
        coupling: f64,
        seed: u64,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: generate_nearly_uncoupled(blocks, block_size, coupling, seed).map_err(to_py)?,
        })
    }

    /// Load from `.mtx` (matrix-market coordinate) or `.csv` (dense),
    /// chosen by file extension.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let format = MatrixFormat::from_path(&path);
        Ok(Self { inner: load_matrix_default(&path, format).map_err(to_py)? })
    }

    /// Save in the format implied by the file extension.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        let format = MatrixFormat::from_path(&path);
        save_matrix(&self.inner, &path, format).map_err(to_py)
    }

    /// Number of states.
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// True when backed by coordinate (sparse) storage.
    #[getter]
    fn is_sparse(&self) -> bool {
        self.inner.is_sparse()
    }

    /// Materialize as a dense 2-D float64 array.
    fn to_numpy<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.inner.to_dense().into_pyarray(py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Matrix(dim={}, storage={})",
            self.inner.dim(),
            if self.inner.is_sparse() { "coordinate" } else { "dense" }
        )
    }
}

/// Result of a fuzzy clustering run.
#[pyclass(module = "cpcca_py")]
struct ClusterResult {
    inner: ClusteringResult,
}

#[pymethods]
impl ClusterResult {
    /// N x n_c membership matrix (rows sum to 1).
    #[getter]
    fn membership<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.inner.membership().values().to_owned().into_pyarray(py)
    }

    /// n_c x n_c coarse-grained transition matrix.
    #[getter]
    fn coarse_matrix<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.inner.coarse_matrix().to_owned().into_pyarray(py)
    }

    /// Selected dominant eigenvalues of the input chain.
    #[getter]
    fn eigenvalues<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<Complex64>> {
        Array1::from(self.inner.eigenvalues().to_vec()).into_pyarray(py)
    }

    #[getter]
    fn n_clusters(&self) -> usize {
        self.inner.n_clusters()
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.inner.objective()
    }

    /// (n_c - objective) / n_c, in (0, 1]; 1 means crisp memberships.
    #[getter]
    fn crispness(&self) -> f64 {
        self.inner.crispness()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.trace().iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.trace().converged
    }

    /// Relative invariant-subspace defect of the basis clustered on.
    #[getter]
    fn subspace_residual(&self) -> f64 {
        self.inner.subspace_residual()
    }

    /// States picked as initial simplex vertices.
    #[getter]
    fn vertex_indices(&self) -> Vec<usize> {
        self.inner.vertex_indices().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "ClusterResult(n_clusters={}, crispness={:.6}, converged={})",
            self.inner.n_clusters(),
            self.inner.crispness(),
            self.inner.trace().converged
        )
    }
}

/// One candidate from a cluster-count scan.
#[pyclass(module = "cpcca_py")]
struct ScanEntry {
    #[pyo3(get)]
    n_clusters: usize,
    /// Minimum entry of the unoptimized guess membership; None if skipped.
    #[pyo3(get)]
    min_chi: Option<f64>,
    /// Post-optimization crispness; None if skipped.
    #[pyo3(get)]
    crispness: Option<f64>,
    #[pyo3(get)]
    selected: bool,
    /// Why the candidate was skipped, if it was.
    #[pyo3(get)]
    skip_reason: Option<String>,
}

#[pymethods]
impl ScanEntry {
    fn __repr__(&self) -> String {
        match (&self.skip_reason, self.crispness) {
            (Some(reason), _) => {
                format!("ScanEntry(n_clusters={}, skipped: {reason})", self.n_clusters)
            }
            (None, Some(crisp)) => format!(
                "ScanEntry(n_clusters={}, crispness={crisp:.6}, selected={})",
                self.n_clusters, self.selected
            ),
            (None, None) => format!("ScanEntry(n_clusters={})", self.n_clusters),
        }
    }
}

/// Coarse-grain `matrix` into `n_clusters` fuzzy clusters.
///
/// mode: "magnitude" or "real" eigenvalue ordering; weight: "uniform" or
/// "stationary"; optimizer: "nelder-mead", "gauss-newton", or
/// "levenberg-marquardt".
#[pyfunction]
#[pyo3(signature = (
    matrix, n_clusters, *,
    mode = "magnitude", weight = "uniform", optimizer = "nelder-mead",
    max_iterations = None, tolerance = None,
))]
fn cluster(
    matrix: &Matrix,
    n_clusters: usize,
    mode: &str,
    weight: &str,
    optimizer: &str,
    max_iterations: Option<usize>,
    tolerance: Option<f64>,
) -> PyResult<ClusterResult> {
    let inner = pcca::cluster(
        &matrix.inner,
        n_clusters,
        parse_mode(mode)?,
        &parse_weight(weight)?,
        parse_optimizer(optimizer)?,
        &options(max_iterations, tolerance),
    )
    .map_err(to_py)?;
    Ok(ClusterResult { inner })
}

/// Try every cluster count in [lo, hi]; returns (selected_count, entries)
/// where the selected count maximizes crispness (ties to the smaller
/// count) and counts that would split a conjugate eigenvalue pair are
/// skipped with a reason.
#[pyfunction]
#[pyo3(signature = (
    matrix, lo, hi, *,
    mode = "magnitude", weight = "uniform",
    max_iterations = None, tolerance = None,
))]
fn scan_clusters(
    matrix: &Matrix,
    lo: usize,
    hi: usize,
    mode: &str,
    weight: &str,
    max_iterations: Option<usize>,
    tolerance: Option<f64>,
) -> PyResult<(usize, Vec<ScanEntry>)> {
    let scan = pcca::select_n_clusters(
        &matrix.inner,
        parse_mode(mode)?,
        lo,
        hi,
        &parse_weight(weight)?,
        &options(max_iterations, tolerance),
    )
    .map_err(to_py)?;
    let entries = scan
        .candidates()
        .iter()
        .map(|c| ScanEntry {
            n_clusters: c.n_clusters,
            min_chi: c.min_chi,
            crispness: c.crispness,
            selected: c.selected,
            skip_reason: c.skip_reason.clone(),
        })
        .collect();
    Ok((scan.selected(), entries))
}

/// The `count` dominant eigenpairs of `matrix` under the given ordering,
/// as (eigenvalues, eigenvectors): a complex vector and the N x count
/// complex eigenvector matrix. Conjugate pairs are kept adjacent.
#[pyfunction]
#[pyo3(signature = (matrix, count, *, mode = "magnitude"))]
fn spectrum<'py>(
    py: Python<'py>,
    matrix: &Matrix,
    count: usize,
    mode: &str,
) -> PyResult<(Bound<'py, PyArray1<Complex64>>, Bound<'py, PyArray2<Complex64>>)> {
    let selection = EigenSelection::new(parse_mode(mode)?, count);
    let (spectrum, vectors) = dominant_eigenpairs(&matrix.inner, selection).map_err(to_py)?;
    let values = Array1::from(spectrum.eigenvalues().to_vec());
    Ok((values.into_pyarray(py), vectors.into_pyarray(py)))
}

/// Worst distance from the eigenvalue set of `matrix` to the `blocks`-th
/// roots of unity; near 0 certifies a circular transition pattern.
#[pyfunction]
fn circular_gap(matrix: &Matrix, blocks: usize) -> PyResult<f64> {
    circular_root_gap(&matrix.inner, blocks).map_err(to_py)
}

/// Project `matrix` onto the clusters of a membership array `chi`
/// (N x n_c, rows summing to 1), returning the coarse transition matrix.
#[pyfunction]
#[pyo3(signature = (matrix, chi, *, weight = "uniform"))]
fn coarse_grain<'py>(
    py: Python<'py>,
    matrix: &Matrix,
    chi: PyReadonlyArray2<'_, f64>,
    weight: &str,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let density = parse_weight(weight)?.resolve(&matrix.inner).map_err(to_py)?;
    let membership = Membership::new(chi.as_array().to_owned(), density).map_err(to_py)?;
    let coarse = pcca::coarse_grain(&matrix.inner, &membership).map_err(to_py)?;
    Ok(coarse.into_pyarray(py))
}

/// Distance between two k x k coarse matrices (k <= 5) under the induced
/// 1-, spectral 2-, or induced inf-norm ("1", "2", "inf"), minimized over
/// simultaneous row/column relabelings.
#[pyfunction]
#[pyo3(signature = (a, b, *, norm = "2"))]
fn compare_coarse(
    a: PyReadonlyArray2<'_, f64>,
    b: PyReadonlyArray2<'_, f64>,
    norm: &str,
) -> PyResult<f64> {
    let kind: NormKind = norm.parse().map_err(to_py)?;
    cpcca::compare_coarse(&a.as_array().to_owned(), &b.as_array().to_owned(), kind)
        .map_err(to_py)
}

/// Minimum entry of the unoptimized guess membership for a candidate
/// cluster count; values near zero (small negative) mark good candidates.
#[pyfunction]
#[pyo3(signature = (matrix, n_clusters, *, mode = "magnitude", weight = "uniform"))]
fn min_chi(matrix: &Matrix, n_clusters: usize, mode: &str, weight: &str) -> PyResult<f64> {
    let density = parse_weight(weight)?.resolve(&matrix.inner).map_err(to_py)?;
    let selection = EigenSelection::new(parse_mode(mode)?, n_clusters);
    let basis = SpectralBasis::build(&matrix.inner, selection, density).map_err(to_py)?;
    pcca::min_chi(&basis, n_clusters).map_err(to_py)
}

/// Canonical spellings accepted by `Matrix.fixture`.
#[pyfunction]
fn fixture_names() -> Vec<&'static str> {
    Fixture::NAMES.to_vec()
}

#[pymodule]
fn cpcca_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Matrix>()?;
    m.add_class::<ClusterResult>()?;
    m.add_class::<ScanEntry>()?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add_function(wrap_pyfunction!(scan_clusters, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(circular_gap, m)?)?;
    m.add_function(wrap_pyfunction!(coarse_grain, m)?)?;
    m.add_function(wrap_pyfunction!(compare_coarse, m)?)?;
    m.add_function(wrap_pyfunction!(min_chi, m)?)?;
    m.add_function(wrap_pyfunction!(fixture_names, m)?)?;
    m.add("CpccaError", m.py().get_type::<CpccaError>())?;
    Ok(())
}
