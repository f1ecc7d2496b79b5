//! Acceptance gate: one test per criterion, each printing a single
//! `acceptance NN [PASS|FAIL]` line (run with `--nocapture` to see the
//! lines for passing criteria too).

use ndarray::{array, s, Array1, Array2};
use ndarray_linalg::{Eig, Inverse, SVD};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

use cpcca::matrix::{generate_circular, generate_nearly_uncoupled, CircularSpec, DensityVector};
use cpcca::pcca::{align_coarse, cluster, feasibilize, inner_simplex_guess, membership_objective};
use cpcca::spectral::{
    circular_root_gap, dominant_eigenpairs, realify, EigenSelection, SelectionMode, SpectralBasis,
    WeightChoice,
};
use cpcca::{
    compare_coarse, fit_quadratic, run_bench, BenchPlan, GeneratorTemplate, NormKind,
    OptimizeOptions, OptimizerMethod, Fixture, StochasticMatrix,
};

fn report(criterion: usize, label: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {criterion:02} [{status}] {label} ({detail})");
    assert!(pass, "acceptance criterion {criterion} failed: {label} ({detail})");
}

fn default_cluster(
    p: &StochasticMatrix,
    n_clusters: usize,
    mode: SelectionMode,
) -> cpcca::ClusteringResult {
    cluster(
        p,
        n_clusters,
        mode,
        &WeightChoice::Uniform,
        OptimizerMethod::NelderMead,
        &OptimizeOptions::default(),
    )
    .unwrap()
}

/// 3x3 circulant with first row (d, a, b), each row shifted right.
fn circulant3(d: f64, a: f64, b: f64) -> Array2<f64> {
    array![[d, a, b], [b, d, a], [a, b, d]]
}

fn forward_cycle() -> Array2<f64> {
    array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]
}

#[test]
fn criterion_01_six_state_spectrum() {
    let p = Fixture::Example1.matrix();
    let selection = EigenSelection::new(SelectionMode::LargestRealPart, 3);
    let (spectrum, _) = dominant_eigenpairs(&p, selection).unwrap();
    let expected = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.9557, 0.0177),
        Complex64::new(0.9557, -0.0177),
    ];
    let mut worst = 0.0f64;
    for e in expected {
        let gap = spectrum
            .eigenvalues()
            .iter()
            .map(|l| (l - e).norm())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(gap);
    }
    report(
        1,
        "six-state fixture dominant eigenvalues",
        worst <= 5e-4,
        &format!("worst eigenvalue gap {worst:.2e}, tolerance 5e-4"),
    );
}

#[test]
fn criterion_02_six_state_coarse_graining() {
    let p = Fixture::Example1.matrix();
    let result = default_cluster(&p, 3, SelectionMode::LargestRealPart);
    let reference = circulant3(0.9705, 0.0250, 0.0046);
    let (dist, _) = align_coarse(result.coarse_matrix(), &reference).unwrap();

    let labels = result.membership().assignments();
    let mut group_sizes = [0usize; 3];
    for &l in &labels {
        group_sizes[l] += 1;
    }
    let pairs_of_two = group_sizes == [2, 2, 2];

    report(
        2,
        "six-state coarse matrix and pair clusters",
        dist <= 1e-3 && pairs_of_two,
        &format!("aligned max-norm distance {dist:.2e} (tol 1e-3), group sizes {group_sizes:?}"),
    );
}

#[test]
fn criterion_03_nine_state_four_cases() {
    let cycle = forward_cycle();
    let mut details = Vec::new();
    let mut pass = true;

    // Case (i): fast cyclic traffic, magnitude selection -> near a cyclic
    // permutation matrix with crisp, known cluster sets.
    let p = Fixture::Example2 { x: 0.9, y: 0.1 }.matrix();
    let result = default_cluster(&p, 3, SelectionMode::LargestMagnitude);
    let (d1, _) = align_coarse(result.coarse_matrix(), &cycle).unwrap();
    pass &= d1 <= 1e-2;
    details.push(format!("(i) vs cycle {d1:.2e}"));

    let labels = result.membership().assignments();
    let mut groups: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); 3];
    for (state, &l) in labels.iter().enumerate() {
        groups[l].insert(state);
    }
    let found: BTreeSet<BTreeSet<usize>> = groups.into_iter().collect();
    let expected: BTreeSet<BTreeSet<usize>> = [
        BTreeSet::from([0usize, 5, 7]),
        BTreeSet::from([1, 3, 8]),
        BTreeSet::from([2, 4, 6]),
    ]
    .into_iter()
    .collect();
    let sets_ok = found == expected;
    pass &= sets_ok;
    details.push(format!("(i) cluster sets recovered: {sets_ok}"));

    let min_max_membership = result
        .membership()
        .values()
        .rows()
        .into_iter()
        .map(|r| r.iter().copied().fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min);
    pass &= min_max_membership > 0.99;
    details.push(format!("(i) min max-membership {min_max_membership:.4}"));

    // Case (ii): fast traffic, real-part selection -> metastable blocks.
    let result = default_cluster(&p, 3, SelectionMode::LargestRealPart);
    let reference = circulant3(0.9655, 0.0333, 0.0012);
    let (d2, _) = align_coarse(result.coarse_matrix(), &reference).unwrap();
    pass &= d2 <= 1e-3;
    details.push(format!("(ii) vs metastable reference {d2:.2e}"));

    // Case (iii): slow cyclic traffic, magnitude selection.
    let p = Fixture::Example2 { x: 0.1, y: 0.9 }.matrix();
    let result = default_cluster(&p, 3, SelectionMode::LargestMagnitude);
    let (d3, _) = align_coarse(result.coarse_matrix(), &cycle).unwrap();
    pass &= d3 <= 1e-2;
    details.push(format!("(iii) vs cycle {d3:.2e}"));

    // Case (iv): slow traffic, real-part selection. Primary tolerance
    // 1e-3; fall back to 1e-2 with the discrepancy logged.
    let result = default_cluster(&p, 3, SelectionMode::LargestRealPart);
    let reference = circulant3(0.5303, 0.3000, 0.1697);
    let (d4, _) = align_coarse(result.coarse_matrix(), &reference).unwrap();
    if d4 > 1e-3 {
        println!("acceptance 03 note: case (iv) distance {d4:.2e} exceeds 1e-3, falling back to 1e-2");
        pass &= d4 <= 1e-2;
    }
    details.push(format!("(iv) vs mixed reference {d4:.2e}"));

    report(
        3,
        "nine-state fixture, all four selection cases",
        pass,
        &details.join("; "),
    );
}

#[test]
fn criterion_04_realification_certificate() {
    let mut worst_dev = 0.0f64;
    let mut worst_residual = 0.0f64;
    for i in 0..100u64 {
        let block_size = 2 + (i % 8) as usize;
        let eps = 0.02 * (i % 10) as f64;
        let spec = CircularSpec::new(3, block_size, eps, 1000 + i).unwrap();
        let p = generate_circular(&spec).unwrap();
        let selection = EigenSelection::new(SelectionMode::LargestMagnitude, 3);
        let (spectrum, complex_vectors) = dominant_eigenpairs(&p, selection).unwrap();
        assert!(
            !spectrum.pairs().is_empty(),
            "instance {i} has no complex dominant pair"
        );
        let realified = realify(&complex_vectors, &spectrum).unwrap();
        let dev = realified
            .certificate
            .max_deviation(&complex_vectors, &realified.vectors);
        worst_dev = worst_dev.max(dev);

        let weight = DensityVector::uniform(p.dim());
        let basis = SpectralBasis::build(&p, selection, weight).unwrap();
        worst_residual = worst_residual.max(basis.residual());
    }
    report(
        4,
        "realification certificate on 100 random circulants",
        worst_dev <= 1e-12 && worst_residual <= 1e-8,
        &format!("worst transform deviation {worst_dev:.2e} (tol 1e-12), worst subspace residual {worst_residual:.2e} (tol 1e-8)"),
    );
}

#[test]
fn criterion_05_circulant_roots_of_unity() {
    let mut worst_gap = 0.0f64;
    let mut worst_flat = 0.0f64;
    for &blocks in &[3usize, 4, 6] {
        for &block_size in &[1usize, 5, 10] {
            let spec = CircularSpec::new(blocks, block_size, 0.0, 0).unwrap();
            let p = generate_circular(&spec).unwrap();
            let gap = circular_root_gap(&p, blocks).unwrap();
            worst_gap = worst_gap.max(gap);

            // Per-block constancy of the dominant eigenvectors. With one
            // state per block the claim is vacuous, so skip it there.
            if block_size == 1 {
                continue;
            }
            let selection = EigenSelection::new(SelectionMode::LargestMagnitude, blocks);
            let (_, vectors) = dominant_eigenpairs(&p, selection).unwrap();
            for col in vectors.columns() {
                for b in 0..blocks {
                    let chunk = col.slice(s![b * block_size..(b + 1) * block_size]);
                    let mean = chunk.iter().sum::<Complex64>() / block_size as f64;
                    for v in chunk {
                        worst_flat = worst_flat.max((v - mean).norm());
                    }
                }
            }
        }
    }
    report(
        5,
        "unperturbed circulant spectrum at roots of unity",
        worst_gap <= 1e-8 && worst_flat <= 1e-8,
        &format!("worst root gap {worst_gap:.2e}, worst in-block deviation {worst_flat:.2e} (tol 1e-8)"),
    );
}

#[test]
fn criterion_06_spectrum_preservation_and_commutation() {
    let mut worst_eig = 0.0f64;
    let mut worst_comm = 0.0f64;
    for i in 0..50usize {
        let (p, n_clusters, mode) = if i % 2 == 0 {
            let block_size = [5usize, 10, 20, 40][(i / 2) % 4];
            let eps = [0.05, 0.1, 0.15][(i / 2) % 3];
            let spec = CircularSpec::new(3, block_size, eps, 300 + i as u64).unwrap();
            (
                generate_circular(&spec).unwrap(),
                3,
                SelectionMode::LargestMagnitude,
            )
        } else {
            let blocks = 2 + (i / 2) % 3;
            let block_size = 10 + 5 * ((i / 2) % 5);
            let coupling = 0.02 + 0.02 * ((i / 2) % 4) as f64;
            (
                generate_nearly_uncoupled(blocks, block_size, coupling, 700 + i as u64).unwrap(),
                blocks,
                SelectionMode::LargestRealPart,
            )
        };
        assert!(p.dim() <= 120);
        let result = default_cluster(&p, n_clusters, mode);

        // Selected fine-scale eigenvalues must reappear in the coarse
        // matrix's spectrum.
        let (coarse_eigs, _) = result.coarse_matrix().eig().unwrap();
        for lambda in result.eigenvalues() {
            let gap = coarse_eigs
                .iter()
                .map(|c| (c - lambda).norm())
                .fold(f64::INFINITY, f64::min);
            worst_eig = worst_eig.max(gap);
        }

        // Propagate-then-project equals project-then-propagate for k <= 3.
        let chi = result.membership().values();
        let pc = result.coarse_matrix();
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + i as u64);
        let eta0: Array1<f64> = Array1::from_shape_fn(p.dim(), |_| rng.random::<f64>());
        let mut eta = eta0.clone();
        let mut coarse = chi.t().dot(&eta0);
        for _ in 1..=3 {
            eta = p.transpose_apply(&eta);
            coarse = pc.t().dot(&coarse);
            let direct = chi.t().dot(&eta);
            let diff = (&coarse - &direct)
                .iter()
                .map(|v| v.abs())
                .fold(0.0, f64::max);
            worst_comm = worst_comm.max(diff);
        }
    }
    report(
        6,
        "coarse spectrum preservation and k-step commutation",
        worst_eig <= 1e-6 && worst_comm <= 1e-6,
        &format!("worst eigenvalue gap {worst_eig:.2e}, worst commutation defect {worst_comm:.2e} (tol 1e-6)"),
    );
}

#[test]
fn criterion_07_basis_change_invariance() {
    let fixtures: Vec<(StochasticMatrix, SelectionMode)> = vec![
        (Fixture::Example1.matrix(), SelectionMode::LargestRealPart),
        (
            Fixture::Example2 { x: 0.9, y: 0.1 }.matrix(),
            SelectionMode::LargestMagnitude,
        ),
        (
            generate_circular(&CircularSpec::new(3, 10, 0.1, 7).unwrap()).unwrap(),
            SelectionMode::LargestMagnitude,
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    let mut worst_chi = 0.0f64;
    let mut worst_obj = 0.0f64;
    let mut accepted = 0usize;
    while accepted < 50 {
        let (p, mode) = &fixtures[accepted % fixtures.len()];
        let weight = WeightChoice::Uniform.resolve(p).unwrap();
        let basis =
            SpectralBasis::build(p, EigenSelection::new(*mode, 3), weight.clone()).unwrap();
        let (guess, _) = inner_simplex_guess(&basis).unwrap();
        let feasible = feasibilize(guess.values(), &basis).unwrap();
        let a = feasible.values();
        let y = basis.vectors();
        let chi = y.dot(a);
        let obj = membership_objective(&chi, &weight).unwrap();

        // Random basis change with condition number at most 1e3.
        let b = Array2::from_shape_fn((3, 3), |_| rng.random_range(-1.0..1.0));
        let (_, sv, _) = b.svd(false, false).unwrap();
        let (smax, smin) = (
            sv.iter().copied().fold(0.0, f64::max),
            sv.iter().copied().fold(f64::INFINITY, f64::min),
        );
        if smin <= 0.0 || smax / smin > 1e3 {
            continue;
        }
        accepted += 1;

        let transported = b.inv().unwrap().dot(a);
        let chi2 = y.dot(&b).dot(&transported);
        let obj2 = membership_objective(&chi2, &weight).unwrap();
        let chi_diff = (&chi2 - &chi).iter().map(|v| v.abs()).fold(0.0, f64::max);
        worst_chi = worst_chi.max(chi_diff);
        worst_obj = worst_obj.max((obj2 - obj).abs());
    }
    report(
        7,
        "membership and objective invariance under basis changes",
        worst_chi <= 1e-10 && worst_obj <= 1e-10,
        &format!("worst membership deviation {worst_chi:.2e}, worst objective deviation {worst_obj:.2e} (tol 1e-10)"),
    );
}

#[test]
fn criterion_08_feasibilization_fuzzing() {
    let mut rng = ChaCha8Rng::seed_from_u64(8080);
    let mut pairs = 0usize;
    let mut feasible_count = 0usize;
    let mut rejected = 0usize;
    let mut worst_negative = 0.0f64;
    let mut worst_row_sum = 0.0f64;
    let mut seed = 0u64;
    while pairs < 1000 {
        seed += 1;
        let p = match seed % 3 {
            0 => {
                let spec =
                    CircularSpec::new(3, 2 + (seed % 3) as usize, 0.05 * (seed % 4) as f64, seed)
                        .unwrap();
                generate_circular(&spec).unwrap()
            }
            1 => generate_nearly_uncoupled(3, 2 + (seed % 3) as usize, 0.05, seed).unwrap(),
            _ => {
                let n = 6 + (seed % 7) as usize;
                let raw = Array2::from_shape_fn((n, n), |_| rng.random_range(0.01..1.0));
                StochasticMatrix::row_normalize(raw).unwrap()
            }
        };
        let weight = DensityVector::uniform(p.dim());
        let selection = EigenSelection::new(SelectionMode::LargestMagnitude, 3);
        let basis = match SpectralBasis::build(&p, selection, weight) {
            Ok(b) => b,
            // Random matrices can put a conjugate pair across the cut;
            // those instances are not (basis, block) pairs at all.
            Err(_) => continue,
        };
        for _ in 0..5 {
            let mut a = Array2::zeros((3, 3));
            for i in 1..3 {
                for j in 1..3 {
                    a[[i, j]] = rng.random_range(-2.0..2.0);
                }
            }
            pairs += 1;
            match feasibilize(&a, &basis) {
                Ok(transform) => {
                    feasible_count += 1;
                    let chi = basis.vectors().dot(transform.values());
                    let min = chi.iter().copied().fold(f64::INFINITY, f64::min);
                    worst_negative = worst_negative.max((-min).max(0.0));
                    for row in chi.rows() {
                        worst_row_sum = worst_row_sum.max((row.sum() - 1.0).abs());
                    }
                }
                Err(cpcca::Error::InfeasibleScaling(_)) => rejected += 1,
                Err(other) => panic!("unexpected feasibilization error: {other}"),
            }
        }
    }
    report(
        8,
        "feasibilization fuzzing over 1000 (basis, block) pairs",
        worst_negative <= 1e-12 && worst_row_sum <= 1e-12 && feasible_count > 0,
        &format!("{feasible_count} feasible / {rejected} rejected; worst negativity {worst_negative:.2e}, worst row-sum defect {worst_row_sum:.2e} (tol 1e-12)"),
    );
}

#[test]
fn criterion_09_benchmark_protocol() {
    let sizes = vec![30, 60, 90, 120];
    let mut unperturbed = BenchPlan::new(
        sizes.clone(),
        5,
        GeneratorTemplate::Circular {
            blocks: 3,
            perturbation: 0.0,
        },
        3,
    );
    unperturbed.seed_base = 2024;
    unperturbed.pairwise_norms = true;
    let mut perturbed = BenchPlan::new(
        sizes,
        5,
        GeneratorTemplate::Circular {
            blocks: 3,
            perturbation: 0.1,
        },
        3,
    );
    perturbed.seed_base = 2024;

    let report_a = run_bench(&unperturbed).unwrap();
    let report_b = run_bench(&perturbed).unwrap();
    let successes = report_a.records.iter().filter(|r| r.succeeded()).count()
        + report_b.records.iter().filter(|r| r.succeeded()).count();

    let mut worst_pairwise = 0.0f64;
    for pair in &report_a.pairwise {
        worst_pairwise = worst_pairwise
            .max(pair.norm_1)
            .max(pair.norm_2)
            .max(pair.norm_inf);
    }
    let pair_count = report_a.pairwise.len();

    report(
        9,
        "benchmark protocol over sizes 30..120",
        successes == 40 && pair_count == 40 && worst_pairwise <= 1e-6,
        &format!("{successes}/40 successful trials, {pair_count} same-size pairs, worst aligned pairwise norm {worst_pairwise:.2e} (tol 1e-6)"),
    );
}

#[test]
fn criterion_10_quadratic_fit_recovery() {
    let xs: Vec<f64> = vec![30.0, 60.0, 90.0, 120.0];
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x * x - x + 3.0).collect();
    let fit = fit_quadratic(&xs, &ys).unwrap();
    let err = (fit.quadratic - 2.0)
        .abs()
        .max((fit.linear + 1.0).abs())
        .max((fit.constant - 3.0).abs());
    report(
        10,
        "quadratic fit recovers planted coefficients",
        err <= 1e-10,
        &format!("worst coefficient error {err:.2e} (tol 1e-10), residual {:.2e}", fit.residual),
    );
}

// `compare_coarse` and `NormKind` are part of the public benchmarking
// surface exercised above; keep a direct reference so the acceptance
// target fails to compile if they disappear.
#[test]
fn acceptance_surface_is_exported() {
    let eye = Array2::<f64>::eye(3);
    assert_eq!(compare_coarse(&eye, &eye, NormKind::Two).unwrap(), 0.0);
}
