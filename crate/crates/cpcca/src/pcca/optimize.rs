//! Local optimization of the crispness objective over the free transform
//! parameters.
//!
//! Only the lower-right (n_c-1) x (n_c-1) block of the transform is free;
//! every candidate block is repaired onto the feasible set before
//! evaluation. Three methods are offered: a derivative-free Nelder-Mead
//! simplex search (fast, less accurate), and two least-squares methods
//! (Gauss-Newton with backtracking, Levenberg-Marquardt with adaptive
//! damping) built on the residual split
//! s_j = sqrt(max(0, 1 - [D_c^{-2} chi^T D^2 chi]_jj)), whose squared sum
//! equals the objective exactly.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{LeastSquaresSvd, Solve};
use rayon::prelude::*;

use super::{feasibilize_raw, inner_simplex_guess, membership_objective, spectral_coarse_grain};
use super::{ClusteringResult, Membership, TransformMatrix};
use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;

/// Nelder-Mead: relative spread of the initial simplex per parameter, and
/// the absolute offset when the parameter is zero.
const NM_SPREAD: f64 = 0.05;
/// Nelder-Mead stops when the worst-best objective spread falls below
/// this.
const NM_TOL: f64 = 1e-10;
const NM_REFLECTION: f64 = 1.0;
const NM_EXPANSION: f64 = 2.0;
const NM_CONTRACTION: f64 = 0.5;
const NM_SHRINK: f64 = 0.5;

/// Forward-difference Jacobian step: 1e-7 * (1 + |parameter|).
const FD_STEP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerMethod {
    /// Derivative-free simplex search; the fast default.
    NelderMead,
    /// Least-squares steps with backtracking line search.
    GaussNewton,
    /// Least-squares steps with adaptive diagonal damping.
    LevenbergMarquardt,
}

impl std::str::FromStr for OptimizerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nelder-mead" | "nm" => Ok(OptimizerMethod::NelderMead),
            "gauss-newton" | "gn" => Ok(OptimizerMethod::GaussNewton),
            "levenberg-marquardt" | "lm" => Ok(OptimizerMethod::LevenbergMarquardt),
            other => Err(Error::InvalidSpec(format!(
                "unknown optimizer `{other}` (expected nelder-mead|gauss-newton|levenberg-marquardt)"
            ))),
        }
    }
}

impl std::fmt::Display for OptimizerMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            OptimizerMethod::NelderMead => "nelder-mead",
            OptimizerMethod::GaussNewton => "gauss-newton",
            OptimizerMethod::LevenbergMarquardt => "levenberg-marquardt",
        };
        write!(f, "{name}")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OptimizeOptions {
    /// Iteration cap. Nelder-Mead interprets this per free parameter
    /// squared: the evaluation budget is max_iterations * (n_c - 1)^2.
    pub max_iterations: usize,
    /// Objective-improvement threshold declaring convergence for the
    /// least-squares methods.
    pub tolerance: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-12 }
    }
}

/// How an optimization run ended. Hitting the iteration cap is reported
/// here as `converged = false`, never as an error.
#[derive(Clone, Copy, Debug)]
pub struct OptimizerTrace {
    pub method: OptimizerMethod,
    /// Objective evaluations for Nelder-Mead; outer iterations for the
    /// least-squares methods.
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize the crispness defect over the free block, starting from the
/// inner simplex guess. The returned membership is feasible, clamped into
/// [0, 1], and row-renormalized; the final objective never exceeds the
/// initial one (the start point stays in the candidate set throughout).
pub fn optimize(
    basis: &SpectralBasis,
    method: OptimizerMethod,
    opts: &OptimizeOptions,
) -> Result<ClusteringResult> {
    let k = basis.count();
    if k < 2 {
        return Err(Error::InvalidClusterCount(
            k,
            "optimization requires at least two clusters",
        ));
    }
    let (a0, vertices) = inner_simplex_guess(basis)?;
    let a0 = a0.values().clone();
    let p0: Array1<f64> = a0.slice(s![1.., 1..]).iter().copied().collect();

    // infeasible or degenerate candidates score n_c, strictly worse than
    // any feasible objective (which is at most n_c - 1)
    let eval = |p: &Array1<f64>| -> f64 {
        candidate_objective(&a0, p, basis).unwrap_or(k as f64)
    };
    let initial = eval(&p0);
    if initial >= k as f64 {
        // surface the underlying defect instead of optimizing a penalty
        candidate_objective(&a0, &p0, basis)?;
    }

    let (p_best, iterations, converged) = match method {
        OptimizerMethod::NelderMead => nelder_mead(&eval, &p0, opts),
        OptimizerMethod::GaussNewton => gauss_newton(&a0, &p0, basis, opts)?,
        OptimizerMethod::LevenbergMarquardt => levenberg_marquardt(&a0, &p0, basis, opts)?,
    };

    let mut a_final = feasibilize_raw(&embed(&a0, &p_best), basis.vectors())?;
    let mut objective = membership_objective(&basis.vectors().dot(&a_final), basis.weight())?;
    if objective > initial + 1e-12 {
        // the optimizer never accepts ascent, so this is pure paranoia
        a_final = feasibilize_raw(&embed(&a0, &p0), basis.vectors())?;
        objective = initial;
    }
    let transform = TransformMatrix::new(a_final)?;
    let chi = basis.vectors().dot(transform.values());
    let membership = Membership::new(chi, basis.weight().clone())?;
    let coarse = spectral_coarse_grain(transform.values(), basis.block_spectrum())?;
    let trace = OptimizerTrace { method, iterations, converged };
    ClusteringResult::assemble(
        membership,
        transform,
        coarse,
        objective,
        trace,
        basis.spectrum().eigenvalues().to_vec(),
        basis.residual(),
        vertices,
    )
}

/// Write the free parameters into a copy of the template transform.
fn embed(template: &Array2<f64>, p: &Array1<f64>) -> Array2<f64> {
    let k = template.nrows();
    let mut a = template.to_owned();
    for i in 0..k - 1 {
        for j in 0..k - 1 {
            a[[1 + i, 1 + j]] = p[i * (k - 1) + j];
        }
    }
    a
}

fn candidate_objective(
    template: &Array2<f64>,
    p: &Array1<f64>,
    basis: &SpectralBasis,
) -> Result<f64> {
    let a = feasibilize_raw(&embed(template, p), basis.vectors())?;
    membership_objective(&basis.vectors().dot(&a), basis.weight())
}

/// Per-cluster residuals s with sum(s^2) equal to the objective.
fn candidate_residuals(
    template: &Array2<f64>,
    p: &Array1<f64>,
    basis: &SpectralBasis,
) -> Result<Array1<f64>> {
    let a = feasibilize_raw(&embed(template, p), basis.vectors())?;
    let chi = basis.vectors().dot(&a);
    let w = basis.weight().values();
    let (n, k) = chi.dim();
    let mut s = Array1::zeros(k);
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
        s[j] = (1.0 - second / coarse).max(0.0).sqrt();
    }
    Ok(s)
}

/// Forward-difference Jacobian of the residual vector. Columns are
/// evaluated in parallel; each column is a pure function of the base
/// point, so the result is bitwise independent of the scheduling.
fn jacobian(
    template: &Array2<f64>,
    p: &Array1<f64>,
    basis: &SpectralBasis,
    s_base: &Array1<f64>,
) -> Array2<f64> {
    let m = p.len();
    let k = s_base.len();
    let columns: Vec<Array1<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let h = FD_STEP * (1.0 + p[i].abs());
            let mut forward = p.clone();
            forward[i] += h;
            if let Ok(s) = candidate_residuals(template, &forward, basis) {
                return (&s - s_base) / h;
            }
            let mut backward = p.clone();
            backward[i] -= h;
            if let Ok(s) = candidate_residuals(template, &backward, basis) {
                return (s_base - &s) / h;
            }
            Array1::zeros(k)
        })
        .collect();
    let mut jac = Array2::zeros((k, m));
    for (i, col) in columns.into_iter().enumerate() {
        jac.column_mut(i).assign(&col);
    }
    jac
}

fn norm(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Nelder-Mead simplex search with the pinned hyperparameters: 5% initial
/// spread, reflection 1, expansion 2, contraction 0.5, shrink 0.5, stop at
/// objective spread < 1e-10 or the evaluation budget. Returns the best
/// point, the evaluation count, and whether the spread criterion was met.
fn nelder_mead(
    eval: &dyn Fn(&Array1<f64>) -> f64,
    p0: &Array1<f64>,
    opts: &OptimizeOptions,
) -> (Array1<f64>, usize, bool) {
    let n = p0.len();
    let budget = opts.max_iterations * n;
    let mut pts: Vec<Array1<f64>> = Vec::with_capacity(n + 1);
    pts.push(p0.clone());
    for i in 0..n {
        let mut q = p0.clone();
        q[i] += if q[i] != 0.0 { NM_SPREAD * q[i].abs() } else { NM_SPREAD };
        pts.push(q);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();
    let mut evals = n + 1;

    let sort = |pts: &mut Vec<Array1<f64>>, vals: &mut Vec<f64>| {
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        *pts = order.iter().map(|&i| pts[i].clone()).collect();
        *vals = order.iter().map(|&i| vals[i]).collect();
    };

    while evals < budget {
        sort(&mut pts, &mut vals);
        if vals[n] - vals[0] < NM_TOL {
            break;
        }
        // centroid of all but the worst point
        let mut centroid = Array1::zeros(n);
        for p in &pts[..n] {
            centroid += p;
        }
        centroid /= n as f64;

        let reflected = &centroid + &((&centroid - &pts[n]) * NM_REFLECTION);
        let fr = eval(&reflected);
        evals += 1;
        if fr < vals[0] {
            let expanded = &centroid + &((&centroid - &pts[n]) * NM_EXPANSION);
            let fe = eval(&expanded);
            evals += 1;
            if fe < fr {
                pts[n] = expanded;
                vals[n] = fe;
            } else {
                pts[n] = reflected;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = reflected;
            vals[n] = fr;
        } else {
            let contracted = &centroid + &((&pts[n] - &centroid) * NM_CONTRACTION);
            let fc = eval(&contracted);
            evals += 1;
            if fc < vals[n] {
                pts[n] = contracted;
                vals[n] = fc;
            } else {
                let anchor = pts[0].clone();
                for i in 1..=n {
                    pts[i] = &anchor + &((&pts[i] - &anchor) * NM_SHRINK);
                    vals[i] = eval(&pts[i]);
                    evals += 1;
                }
            }
        }
    }
    sort(&mut pts, &mut vals);
    let converged = vals[n] - vals[0] < NM_TOL;
    (pts[0].clone(), evals, converged)
}

/// Gauss-Newton with a halving line search. Accepts only strict descent;
/// converges when the step or the improvement becomes negligible.
fn gauss_newton(
    template: &Array2<f64>,
    p0: &Array1<f64>,
    basis: &SpectralBasis,
    opts: &OptimizeOptions,
) -> Result<(Array1<f64>, usize, bool)> {
    let mut p = p0.clone();
    let mut s = candidate_residuals(template, &p, basis)?;
    let mut objective = s.dot(&s);
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=opts.max_iterations {
        iterations = it;
        let jac = jacobian(template, &p, basis, &s);
        let rhs = s.mapv(|v| -v);
        let delta = match jac.least_squares(&rhs) {
            Ok(sol) => sol.solution,
            Err(_) => break,
        };
        if norm(&delta) <= 1e-14 * (1.0 + norm(&p)) {
            converged = true;
            break;
        }
        let mut accepted = false;
        let mut step = 1.0f64;
        for _ in 0..40 {
            let candidate = &p + &delta.mapv(|v| v * step);
            if let Ok(s_new) = candidate_residuals(template, &candidate, basis) {
                let objective_new = s_new.dot(&s_new);
                if objective_new < objective {
                    let drop = objective - objective_new;
                    p = candidate;
                    s = s_new;
                    objective = objective_new;
                    accepted = true;
                    if drop < opts.tolerance {
                        converged = true;
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // no descent along the Gauss-Newton direction at line-search
            // resolution: treat the point as stationary
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Ok((p, iterations, converged))
}

/// Levenberg-Marquardt: damped normal equations with mu scaled down by 3
/// on acceptance and up by 2 on rejection, starting from
/// mu = 1e-3 * max(diag(J^T J)).
fn levenberg_marquardt(
    template: &Array2<f64>,
    p0: &Array1<f64>,
    basis: &SpectralBasis,
    opts: &OptimizeOptions,
) -> Result<(Array1<f64>, usize, bool)> {
    let m = p0.len();
    let mut p = p0.clone();
    let mut s = candidate_residuals(template, &p, basis)?;
    let mut objective = s.dot(&s);
    let mut mu: Option<f64> = None;
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=opts.max_iterations {
        iterations = it;
        let jac = jacobian(template, &p, basis, &s);
        let jtj = jac.t().dot(&jac);
        let gradient = jac.t().dot(&s);
        if norm(&gradient) <= 1e-15 {
            converged = true;
            break;
        }
        let mu_now = *mu.get_or_insert_with(|| {
            let max_diag = (0..m).map(|i| jtj[[i, i]]).fold(0.0f64, f64::max);
            1e-3 * max_diag.max(f64::MIN_POSITIVE)
        });
        let mut lhs = jtj.clone();
        for i in 0..m {
            lhs[[i, i]] += mu_now;
        }
        let step = lhs.solve(&gradient.mapv(|v| -v));
        let mut accepted = false;
        if let Ok(delta) = step {
            if norm(&delta) <= 1e-14 * (1.0 + norm(&p)) {
                converged = true;
                break;
            }
            let candidate = &p + &delta;
            if let Ok(s_new) = candidate_residuals(template, &candidate, basis) {
                let objective_new = s_new.dot(&s_new);
                if objective_new < objective {
                    let drop = objective - objective_new;
                    p = candidate;
                    s = s_new;
                    objective = objective_new;
                    mu = Some(mu_now / 3.0);
                    accepted = true;
                    if drop < opts.tolerance {
                        converged = true;
                        break;
                    }
                }
            }
        }
        if !accepted {
            let grown = mu_now * 2.0;
            if grown > 1e30 {
                // damping saturated: nothing left to move
                converged = true;
                break;
            }
            mu = Some(grown);
        }
    }
    Ok((p, iterations, converged))
}
