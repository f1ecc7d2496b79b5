//! Fuzzy spectral coarse-graining of row-stochastic Markov chains.
//!
//! The pipeline turns an N-state transition matrix into an n_c-cluster
//! fuzzy Markov State Model:
//!
//! 1. [`spectral`]: compute the dominant eigenpairs (largest magnitude or
//!    largest real part), turn conjugate pairs into real 2-column blocks,
//!    and orthonormalize the basis under a weighted inner product.
//! 2. [`pcca`]: map the basis rows into a probability simplex by a linear
//!    transform, optimize the transform for crisp memberships, and project
//!    the chain onto the clusters.
//! 3. [`bench`]: generate families of circular/metastable test matrices,
//!    time the stages, and compare coarse-grained results across runs.
//!
//! Unlike classical spectral clustering this works for non-reversible
//! chains whose dominant eigenvalues are complex: a conjugate eigenvector
//! pair spans the same invariant subspace as its real and imaginary parts,
//! so the membership optimization runs entirely in real arithmetic.


pub mod bench;
pub mod error;
pub mod matrix;
pub mod pcca;
pub mod spectral;




pub use bench::{
    compare_coarse, fit_quadratic, run_bench, trial_seed, BenchPlan, BenchReport,
    GeneratorTemplate, NormKind, PairwiseDifference, QuadraticFit, SizeSummary, StageTimings,
    TrialRecord,
};
pub use error::{Error, Result};
pub use matrix::{
    generate_circular, generate_nearly_uncoupled, CircularSpec, DensityVector, Fixture,
    MatrixFormat, StochasticMatrix,
};
pub use pcca::{
    align_coarse, cluster, coarse_grain, feasibilize, inner_simplex_guess,
    membership_objective, min_chi, objective, optimize, select_n_clusters, ClusterScan,
    ClusteringResult, Membership, OptimizeOptions, OptimizerMethod, OptimizerTrace,
    ScanCandidate, TransformMatrix,
};
pub use spectral::{
    dominant_eigenpairs, realify, stationary_density, subspace_residual, EigenSelection,
    SelectionMode, SpectralBasis, WeightChoice,
};
