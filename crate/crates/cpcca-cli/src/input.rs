//! Input resolution shared by `cluster` and `spectrum`: a matrix file, a
//! named fixture, or an inline generator spec, plus the seed default
//! sourced from the `CPCCA_SEED` environment variable.

use std::path::Path;

use cpcca::matrix::{
    generate_circular, generate_nearly_uncoupled, load_matrix_default, CircularSpec, Fixture,
    MatrixFormat,
};
use cpcca::{Error, StochasticMatrix};

use crate::{Failure, InputArgs};

/// Default seed: `CPCCA_SEED` when set (strict unsigned decimal), else 0.
pub fn default_seed() -> Result<u64, Failure> {
    match std::env::var("CPCCA_SEED") {
        Ok(text) => text.trim().parse().map_err(|_| {
            Failure::from(Error::InvalidSpec(format!(
                "CPCCA_SEED must be an unsigned 64-bit integer, got `{text}`"
            )))
        }),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(Failure::from(Error::InvalidSpec(format!(
            "CPCCA_SEED is not readable: {e}"
        )))),
    }
}

/// An inline generator spec, retained so later stages can inspect the
/// structure they are working with (e.g. `--check-circular` inference).
pub struct InlineSpec {
    pub family: InlineFamily,
    pub blocks: usize,
}

pub enum InlineFamily {
    Circular,
    Uncoupled,
}

/// Parse `circular:<blocks>:<block-size>:<eps>[:<seed>]` or
/// `uncoupled:<blocks>:<block-size>:<coupling>[:<seed>]`.
pub fn parse_inline_spec(text: &str) -> Result<(StochasticMatrix, InlineSpec), Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = |msg: &str| {
        Failure::from(Error::InvalidSpec(format!(
            "inline generator `{text}`: {msg}"
        )))
    };
    if !(4..=5).contains(&parts.len()) {
        return Err(bad(
            "expected <family>:<blocks>:<block-size>:<strength>[:<seed>]",
        ));
    }
    let blocks: usize = parts[1].parse().map_err(|_| bad("blocks must be an integer"))?;
    let block_size: usize = parts[2]
        .parse()
        .map_err(|_| bad("block size must be an integer"))?;
    let strength: f64 = parts[3]
        .parse()
        .map_err(|_| bad("strength must be a number"))?;
    let seed: u64 = match parts.get(4) {
        Some(s) => s.parse().map_err(|_| bad("seed must be an unsigned integer"))?,
        None => default_seed()?,
    };
    let matrix = match parts[0] {
        "circular" => generate_circular(&CircularSpec::new(blocks, block_size, strength, seed)?)?,
        "uncoupled" => generate_nearly_uncoupled(blocks, block_size, strength, seed)?,
        other => return Err(bad(&format!("unknown family `{other}`"))),
    };
    let family = match parts[0] {
        "circular" => InlineFamily::Circular,
        _ => InlineFamily::Uncoupled,
    };
    Ok((matrix, InlineSpec { family, blocks }))
}

/// Resolve the matrix named by `--in` / `--fixture` / `--generate`.
/// Returns the inline spec alongside when that source was used.
pub fn resolve(args: &InputArgs) -> Result<(StochasticMatrix, Option<InlineSpec>), Failure> {
    if let Some(path) = &args.input {
        let format = MatrixFormat::from_path(path);
        let matrix = load_with_context(path, format)?;
        return Ok((matrix, None));
    }
    if let Some(name) = &args.fixture {
        let fixture: Fixture = name.parse()?;
        return Ok((fixture.matrix(), None));
    }
    let spec = args
        .generate
        .as_ref()
        .expect("clap guarantees one input source");
    let (matrix, inline) = parse_inline_spec(spec)?;
    Ok((matrix, Some(inline)))
}

fn load_with_context(path: &Path, format: MatrixFormat) -> Result<StochasticMatrix, Failure> {
    load_matrix_default(path, format).map_err(|e| match e {
        Error::Io(io) => Failure::from(Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        ))),
        other => Failure::from(other),
    })
}
