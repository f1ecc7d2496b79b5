//! Deterministic matrix generators and the built-in reference fixtures.
//!
//! All randomness comes from ChaCha8 seeded with a caller-supplied 64-bit
//! seed, so identical specs produce bitwise-identical matrices on every
//! platform. Draw order is part of the contract and documented per
//! generator.

use std::fmt;
use std::str::FromStr;

use ndarray::{array, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::StochasticMatrix;

/// Parameters for a block-circular matrix: `blocks` blocks of `block_size`
/// states each, block k feeding block k+1 (mod blocks).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircularSpec {
    pub blocks: usize,
    pub block_size: usize,
    /// Additive uniform noise amplitude in [0, 1); 0 keeps the exact
    /// block-circular zero pattern.
    pub perturbation: f64,
    pub seed: u64,
}

impl CircularSpec {
    pub fn new(blocks: usize, block_size: usize, perturbation: f64, seed: u64) -> Result<Self> {
        let spec = Self { blocks, block_size, perturbation, seed };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        if self.blocks < 2 {
            return Err(Error::InvalidSpec(format!(
                "block count must be at least 2, got {}",
                self.blocks
            )));
        }
        if self.block_size < 1 {
            return Err(Error::InvalidSpec("block size must be at least 1".into()));
        }
        if !self.perturbation.is_finite() || !(0.0..1.0).contains(&self.perturbation) {
            return Err(Error::InvalidSpec(format!(
                "perturbation must lie in [0, 1), got {}",
                self.perturbation
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.blocks * self.block_size
    }
}

/// Block-circular generator. Draw order: the super-diagonal blocks in block
/// order k = 0..N-1, each row-major; then (only when perturbation > 0) one
/// full row-major pass of additive noise in [0, perturbation). Rows are
/// normalized last.
pub fn generate_circular(spec: &CircularSpec) -> Result<StochasticMatrix> {
    spec.check()?;
    let (nb, bs) = (spec.blocks, spec.block_size);
    let dim = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut m = Array2::zeros((dim, dim));
    for k in 0..nb {
        let target = (k + 1) % nb;
        for r in 0..bs {
            for c in 0..bs {
                m[[k * bs + r, target * bs + c]] = rng.random::<f64>();
            }
        }
    }
    if spec.perturbation > 0.0 {
        for v in m.iter_mut() {
            *v += spec.perturbation * rng.random::<f64>();
        }
    }
    StochasticMatrix::row_normalize(m)
}

/// Nearly uncoupled (metastable) generator: random stochastic diagonal
/// blocks carrying row mass 1 - coupling, uniform off-block mass summing to
/// exactly `coupling` per row. `coupling = 0` yields exact block-diagonal
/// structure. Draw order: rows top to bottom; within a row the in-block
/// entries left to right, then (only when coupling > 0) the off-block
/// entries left to right.
pub fn generate_nearly_uncoupled(
    blocks: usize,
    block_size: usize,
    coupling: f64,
    seed: u64,
) -> Result<StochasticMatrix> {
    if blocks < 2 {
        return Err(Error::InvalidSpec(format!(
            "block count must be at least 2, got {blocks}"
        )));
    }
    if block_size < 1 {
        return Err(Error::InvalidSpec("block size must be at least 1".into()));
    }
    if !coupling.is_finite() || !(0.0..1.0).contains(&coupling) {
        return Err(Error::InvalidSpec(format!(
            "coupling must lie in [0, 1), got {coupling}"
        )));
    }
    let dim = blocks * block_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Array2::zeros((dim, dim));
    for i in 0..dim {
        let b = i / block_size;
        let (lo, hi) = (b * block_size, (b + 1) * block_size);
        let draws: Vec<f64> = (0..block_size).map(|_| rng.random::<f64>()).collect();
        let s: f64 = draws.iter().sum();
        if s <= 0.0 {
            return Err(Error::ZeroRow(i));
        }
        for (c, d) in (lo..hi).zip(&draws) {
            m[[i, c]] = d / s * (1.0 - coupling);
        }
        if coupling > 0.0 {
            let off: Vec<f64> = (0..dim - block_size).map(|_| rng.random::<f64>()).collect();
            let so: f64 = off.iter().sum();
            if so <= 0.0 {
                return Err(Error::ZeroRow(i));
            }
            let mut it = off.iter();
            for c in (0..lo).chain(hi..dim) {
                m[[i, c]] = it.next().unwrap() / so * coupling;
            }
        }
    }
    StochasticMatrix::validate(m, super::DEFAULT_ROW_SUM_TOL)
}

/// The built-in reference matrices.
///
/// `Example1` is a 6-state chain with three weakly connected 2-state pairs
/// arranged in a directed ring; its dominant spectrum is {1, a conjugate
/// pair near 1}. `Example2` is a 9-state chain of three 3-cycles coupled in
/// a ring, parameterized by the in-block hop weight x and the forward
/// coupling y with x + y = 1; only (0.9, 0.1) and (0.1, 0.9) are exposed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fixture {
    Example1,
    Example2 { x: f64, y: f64 },
}

/// The admissible (x, y) parameter pairs for `Example2`.
const EXAMPLE2_PAIRS: [(f64, f64); 2] = [(0.9, 0.1), (0.1, 0.9)];

impl Fixture {
    /// Canonical spellings accepted by [`Fixture::from_str`].
    pub const NAMES: [&'static str; 3] = ["example1", "example2:0.9:0.1", "example2:0.1:0.9"];

    pub fn matrix(&self) -> StochasticMatrix {
        let dense = match *self {
            Fixture::Example1 => array![
                [0.25, 0.70, 0.00, 0.00, 0.00, 0.05],
                [0.70, 0.29, 0.01, 0.00, 0.00, 0.00],
                [0.00, 0.05, 0.25, 0.70, 0.00, 0.00],
                [0.00, 0.00, 0.70, 0.29, 0.01, 0.00],
                [0.00, 0.00, 0.00, 0.05, 0.25, 0.70],
                [0.01, 0.00, 0.00, 0.00, 0.70, 0.29],
            ],
            Fixture::Example2 { x, y } => {
                // block layout [[X, Y, 0], [0, X, Y], [Y, 0, X]] with
                // X = [[0,x,0],[0,0,1],[1,0,0]] and Y = y e1 e1^T
                let mut m = Array2::zeros((9, 9));
                for b in 0..3 {
                    let (r, cx, cy) = (3 * b, 3 * b, 3 * ((b + 1) % 3));
                    m[[r, cx + 1]] = x;
                    m[[r + 1, cx + 2]] = 1.0;
                    m[[r + 2, cx]] = 1.0;
                    m[[r, cy]] = y;
                }
                m
            }
        };
        StochasticMatrix::validate(dense, super::DEFAULT_ROW_SUM_TOL)
            .expect("fixture is stochastic by construction")
    }
}

impl FromStr for Fixture {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self> {
        let unknown = || Error::UnknownFixture(name.to_string());
        if name == "example1" {
            return Ok(Fixture::Example1);
        }
        let mut parts = name.split(':');
        if parts.next() != Some("example2") {
            return Err(unknown());
        }
        let x: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(unknown)?;
        let y: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(unknown)?;
        if parts.next().is_some() || !EXAMPLE2_PAIRS.contains(&(x, y)) {
            return Err(unknown());
        }
        Ok(Fixture::Example2 { x, y })
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fixture::Example1 => write!(f, "example1"),
            Fixture::Example2 { x, y } => write!(f, "example2:{x}:{y}"),
        }
    }
}
