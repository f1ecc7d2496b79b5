//! The five subcommand implementations. Each returns `Ok(())` on success
//! after writing its files, or a [`Failure`] that main turns into a
//! single-line error JSON and a nonzero exit.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde_json::Value;

use cpcca::bench::{BenchPlan, GeneratorTemplate};
use cpcca::matrix::{save_matrix, Fixture, MatrixFormat};
use cpcca::pcca::{cluster, select_n_clusters};
use cpcca::spectral::{circular_root_gap, EigenSelection, SpectralBasis};
use cpcca::{
    run_bench, Error, OptimizeOptions, OptimizerMethod, SelectionMode, StochasticMatrix,
    WeightChoice,
};

use crate::input::{self, InlineFamily};
use crate::report;
use crate::{BenchArgs, ClusterArgs, Failure, FixturesArgs, GenerateArgs, GenerateFamily, SpectrumArgs};

/// Tolerance for `--check-circular`: the worst distance between a
/// spectrum point and its nearest root of unity.
const CIRCULAR_CHECK_TOL: f64 = 1e-8;

fn parse_mode(text: &str) -> Result<SelectionMode, Failure> {
    Ok(text.parse::<SelectionMode>()?)
}

fn parse_weight(text: &str) -> Result<WeightChoice, Failure> {
    Ok(text.parse::<WeightChoice>()?)
}

fn parse_optimizer(text: &str) -> Result<OptimizerMethod, Failure> {
    Ok(text.parse::<OptimizerMethod>()?)
}

fn optimize_options(max_iterations: Option<usize>, tolerance: Option<f64>) -> OptimizeOptions {
    let mut opts = OptimizeOptions::default();
    if let Some(n) = max_iterations {
        opts.max_iterations = n;
    }
    if let Some(t) = tolerance {
        opts.tolerance = t;
    }
    opts
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON serialization cannot fail");
    text.push('\n');
    write_file(path, &text)
}

pub fn cmd_cluster(args: ClusterArgs) -> Result<(), Failure> {
    let (matrix, _) = input::resolve(&args.input)?;
    let mode = parse_mode(&args.mode)?;
    let weight = parse_weight(&args.weight)?;
    let method = parse_optimizer(&args.optimizer)?;
    let opts = optimize_options(args.max_iterations, args.tolerance);

    let started = Instant::now();
    let (scan, n_clusters) = match (&args.scan, args.n_clusters) {
        (Some(range), None) => {
            let (lo, hi) = parse_scan_range(range)?;
            let scan = select_n_clusters(&matrix, mode, lo, hi, &weight, &opts)?;
            let selected = scan.selected();
            (Some(scan), selected)
        }
        (None, Some(k)) => (None, k),
        (None, None) => {
            return Err(Failure::from(Error::InvalidSpec(
                "pass either --n-clusters or --scan".into(),
            )))
        }
        (Some(_), Some(_)) => unreachable!("clap enforces the exclusive group"),
    };
    let result = cluster(&matrix, n_clusters, mode, &weight, method, &opts)?;
    let seconds = started.elapsed().as_secs_f64();

    fs::create_dir_all(&args.out_dir)?;
    write_file(
        &args.out_dir.join("membership.csv"),
        &report::matrix_csv(result.membership().values()),
    )?;
    write_file(
        &args.out_dir.join("coarse.csv"),
        &report::matrix_csv(result.coarse_matrix()),
    )?;
    let json = report::cluster_report_json(
        &result,
        &mode.to_string(),
        report::weight_name(&weight),
        scan.as_ref().map(|s| s.candidates()),
        seconds,
    );
    write_json(&args.out_dir.join("report.json"), &json)
}

fn parse_scan_range(text: &str) -> Result<(usize, usize), Failure> {
    let bad = || {
        Failure::from(Error::InvalidSpec(format!(
            "scan range `{text}` must be <lo>:<hi> with integers lo <= hi"
        )))
    };
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: usize = lo.parse().map_err(|_| bad())?;
    let hi: usize = hi.parse().map_err(|_| bad())?;
    Ok((lo, hi))
}

pub fn cmd_spectrum(args: SpectrumArgs) -> Result<(), Failure> {
    let (matrix, inline) = input::resolve(&args.input)?;

    // One ordering can fail where the other succeeds (e.g. a conjugate
    // pair straddling the cut under real-part order only), so a mode
    // failure is embedded in its JSON slot instead of aborting; the
    // command fails only when both modes are unusable.
    let mut modes = serde_json::Map::new();
    let mut first_error: Option<Error> = None;
    let mut successes = 0usize;
    for mode in [SelectionMode::LargestMagnitude, SelectionMode::LargestRealPart] {
        let selection = EigenSelection::new(mode, args.count);
        let weight = WeightChoice::Uniform.resolve(&matrix)?;
        let entry = match SpectralBasis::build(&matrix, selection, weight) {
            Ok(basis) => {
                successes += 1;
                serde_json::json!({
                    "eigenvalues": report::eigenvalues_json(basis.spectrum().eigenvalues()),
                    "residual": basis.residual(),
                })
            }
            Err(e) => {
                let entry = serde_json::json!({
                    "error": {"code": e.code(), "message": e.to_string()},
                });
                first_error.get_or_insert(e);
                entry
            }
        };
        modes.insert(mode.to_string(), entry);
    }
    if successes == 0 {
        return Err(Failure::from(
            first_error.expect("both modes failed, so an error was recorded"),
        ));
    }

    let check = match args.check_circular {
        None => Value::Null,
        Some(explicit) => {
            let blocks = match (explicit, &inline) {
                (Some(b), _) => b,
                (None, Some(spec)) if matches!(spec.family, InlineFamily::Circular) => spec.blocks,
                (None, _) => {
                    return Err(Failure::from(Error::InvalidSpec(
                        "--check-circular needs a block count unless the input is an inline circular spec".into(),
                    )))
                }
            };
            let gap = circular_root_gap(&matrix, blocks)?;
            serde_json::json!({
                "blocks": blocks,
                "max_gap": gap,
                "pass": gap <= CIRCULAR_CHECK_TOL,
                "tolerance": CIRCULAR_CHECK_TOL,
            })
        }
    };
    let failed_check = matches!(&check, Value::Object(o) if o["pass"] == Value::Bool(false));

    let json = serde_json::json!({
        "check_circular": check,
        "count": args.count,
        "dim": matrix.dim(),
        "modes": modes,
    });
    write_json(&args.out, &json)?;

    if failed_check {
        return Err(Failure::new(
            "CIRCULAR_CHECK_FAILED",
            format!(
                "spectrum deviates from the roots of unity by more than {CIRCULAR_CHECK_TOL:e} (see {})",
                args.out.display()
            ),
        ));
    }
    Ok(())
}

pub fn cmd_generate(args: GenerateArgs) -> Result<(), Failure> {
    let (matrix, out) = match args.family {
        GenerateFamily::Circular {
            blocks,
            block_size,
            eps,
            seed,
            out,
        } => {
            let seed = match seed {
                Some(s) => s,
                None => input::default_seed()?,
            };
            let spec = cpcca::CircularSpec::new(blocks, block_size, eps, seed)?;
            (cpcca::generate_circular(&spec)?, out)
        }
        GenerateFamily::Uncoupled {
            blocks,
            block_size,
            coupling,
            seed,
            out,
        } => {
            let seed = match seed {
                Some(s) => s,
                None => input::default_seed()?,
            };
            (
                cpcca::generate_nearly_uncoupled(blocks, block_size, coupling, seed)?,
                out,
            )
        }
    };
    let format = MatrixFormat::from_path(&out);
    save_matrix(&matrix, &out, format)?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn cmd_bench(args: BenchArgs) -> Result<(), Failure> {
    let plan = match &args.plan {
        Some(path) => plan_from_file(path)?,
        None => plan_from_flags(&args)?,
    };
    if plan.parallel && args.jobs > 1 {
        // Ignore failure: the global pool can only be initialized once
        // per process, and a second initialization keeps the first size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build_global();
    }
    let report_data = run_bench(&plan)?;
    write_file(&args.out_csv, &report::bench_csv(&report_data))?;
    write_json(&args.out_json, &report::bench_json(&plan, &report_data))
}

fn plan_from_flags(args: &BenchArgs) -> Result<BenchPlan, Failure> {
    let sizes_text = args
        .sizes
        .as_ref()
        .expect("clap requires --sizes without --plan");
    let sizes = parse_sizes(sizes_text)?;
    let generator = match args.gen.as_str() {
        "circular" => GeneratorTemplate::Circular {
            blocks: args.blocks,
            perturbation: args.eps,
        },
        "uncoupled" => GeneratorTemplate::NearlyUncoupled {
            blocks: args.blocks,
            coupling: args.coupling,
        },
        other => {
            return Err(Failure::from(Error::InvalidSpec(format!(
                "unknown generator family `{other}` (expected circular or uncoupled)"
            ))))
        }
    };
    let n_clusters = args.n_clusters.unwrap_or(args.blocks);
    let mut plan = BenchPlan::new(sizes, args.trials, generator, n_clusters);
    plan.mode = parse_mode(&args.mode)?;
    plan.weight = parse_weight(&args.weight)?;
    plan.method = parse_optimizer(&args.optimizer)?;
    plan.seed_base = match args.seed {
        Some(s) => s,
        None => input::default_seed()?,
    };
    plan.parallel = args.jobs > 1;
    plan.pairwise_norms = args.pairwise;
    Ok(plan)
}

fn parse_sizes(text: &str) -> Result<Vec<usize>, Failure> {
    text.split(',')
        .map(|part| {
            part.trim().parse::<usize>().map_err(|_| {
                Failure::from(Error::InvalidSpec(format!(
                    "sizes must be comma-separated integers, got `{part}`"
                )))
            })
        })
        .collect()
}

/// Benchmark plan from a JSON file. Required: `sizes`, `generator`
/// (object with `kind` plus its parameters). Everything else defaults to
/// the same values as the flag interface.
fn plan_from_file(path: &Path) -> Result<BenchPlan, Failure> {
    let text = fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| {
        Failure::from(Error::InvalidSpec(format!(
            "benchmark plan {}: {e}",
            path.display()
        )))
    })?;
    let bad = |msg: String| Failure::from(Error::InvalidSpec(format!("benchmark plan: {msg}")));

    let sizes: Vec<usize> = value["sizes"]
        .as_array()
        .ok_or_else(|| bad("`sizes` must be an array of integers".into()))?
        .iter()
        .map(|v| {
            v.as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| bad(format!("size `{v}` is not an unsigned integer")))
        })
        .collect::<Result<_, _>>()?;

    let gen_obj = value["generator"]
        .as_object()
        .ok_or_else(|| bad("`generator` must be an object with a `kind`".into()))?;
    let blocks = gen_obj
        .get("blocks")
        .and_then(Value::as_u64)
        .unwrap_or(3) as usize;
    let generator = match gen_obj.get("kind").and_then(Value::as_str) {
        Some("circular") => GeneratorTemplate::Circular {
            blocks,
            perturbation: gen_obj
                .get("perturbation")
                .and_then(Value::as_f64)
                .unwrap_or(0.0),
        },
        Some("uncoupled") => GeneratorTemplate::NearlyUncoupled {
            blocks,
            coupling: gen_obj.get("coupling").and_then(Value::as_f64).unwrap_or(0.05),
        },
        other => return Err(bad(format!("unknown generator kind {other:?}"))),
    };

    let trials = value
        .get("trials_per_size")
        .and_then(Value::as_u64)
        .unwrap_or(5) as usize;
    let n_clusters = value
        .get("n_clusters")
        .and_then(Value::as_u64)
        .map(|n| n as usize)
        .unwrap_or(blocks);
    let mut plan = BenchPlan::new(sizes, trials, generator, n_clusters);
    if let Some(mode) = value.get("mode").and_then(Value::as_str) {
        plan.mode = parse_mode(mode)?;
    }
    if let Some(weight) = value.get("weight").and_then(Value::as_str) {
        plan.weight = parse_weight(weight)?;
    }
    if let Some(optimizer) = value.get("optimizer").and_then(Value::as_str) {
        plan.method = parse_optimizer(optimizer)?;
    }
    if let Some(n) = value.get("max_iterations").and_then(Value::as_u64) {
        plan.options.max_iterations = n as usize;
    }
    if let Some(t) = value.get("tolerance").and_then(Value::as_f64) {
        plan.options.tolerance = t;
    }
    if let Some(s) = value.get("seed_base").and_then(Value::as_u64) {
        plan.seed_base = s;
    }
    if let Some(p) = value.get("parallel").and_then(Value::as_bool) {
        plan.parallel = p;
    }
    if let Some(p) = value.get("pairwise_norms").and_then(Value::as_bool) {
        plan.pairwise_norms = p;
    }
    Ok(plan)
}

pub fn cmd_fixtures(args: FixturesArgs) -> Result<(), Failure> {
    if args.list {
        for name in Fixture::NAMES {
            println!("{name}");
        }
        return Ok(());
    }
    let name = args.export.expect("clap enforces list xor export");
    let out = args.out.ok_or_else(|| {
        Failure::from(Error::InvalidSpec(
            "--export needs --out <PATH> to write the matrix to".into(),
        ))
    })?;
    let fixture: Fixture = name.parse()?;
    let matrix: StochasticMatrix = fixture.matrix();
    let format = MatrixFormat::from_path(&out);
    save_matrix(&matrix, &out, format)?;
    println!("wrote {}", out.display());
    Ok(())
}
