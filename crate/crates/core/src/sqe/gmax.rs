use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::alternating::alternating_solve;
use super::opb::best_opb;
use super::partially_separable::solve_partially_separable_with;
use super::residual::residual_block_order;
use super::{Method, SolverOptions, SpinorDecomposition, SqeSolution};
use crate::error::{Result, SqeError};
use crate::partition::Partition;
use crate::schmidt::bipartite_schmidt;
use crate::tensor::{hermitian_eigen, permute_matrix, CVector, HermitianOperator, PureState};

/// A lower bound within this distance of the upper bound counts as exact.
pub const EXACT_TOL: f64 = 1e-9;
/// A candidate above the upper bound by more than this signals a bug.
const BOUND_SLACK: f64 = 1e-8;

/// Result of [`g_r_max`]: the best value found, where it came from, and
/// whether it meets a rigorous upper bound.
#[derive(Clone, Debug)]
pub struct GrEstimate {
    pub g: f64,
    pub method: Method,
    /// `g` equals `upper_bound` within [`EXACT_TOL`], so it is the true `g_r`.
    pub exact: bool,
    pub upper_bound: f64,
    pub closed_form_g: Option<f64>,
    pub heuristic_g: Option<f64>,
    /// Restarts whose alternating run converged.
    pub converged_restarts: usize,
    pub solution: SqeSolution,
}

/// `L = weight * |psi><psi|` with `weight > 0` and `psi` normalized, if `L` has that form.
pub(crate) fn rank_one_state(l: &HermitianOperator) -> Option<(f64, PureState)> {
    let m = l.matrix();
    let n = m.nrows();
    let (j, d) =
        (0..n).map(|j| (j, m[(j, j)].re)).fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    if d <= 0.0 {
        return None;
    }
    let v = m.column(j).into_owned().unscale(d.sqrt());
    let scale = m.norm().max(1e-300);
    if (m - &v * v.adjoint()).norm() > 1e-10 * scale {
        return None;
    }
    let weight = v.norm_squared();
    let psi = PureState::new(l.shape().clone(), v.unscale(weight.sqrt())).ok()?;
    Some((weight, psi))
}

/// Rigorous upper bound on `g_r`: for `L = w |psi><psi|` the smallest
/// rank-`r` Schmidt weight over all two-block coarsenings, otherwise the
/// largest eigenvalue.
pub fn upper_bound(l: &HermitianOperator, partition: &Partition, r: usize) -> Result<f64> {
    partition.party_dims(l.shape())?;
    if r < 1 {
        return Err(SqeError::InvalidArgument("r must be at least 1".into()));
    }
    if let Some((weight, psi)) = rank_one_state(l) {
        let mut best = 1.0f64;
        for cut in partition.two_block_coarsenings() {
            let sd = bipartite_schmidt(&psi, &cut)?;
            let s: f64 = sd.coefficients.iter().take(r).map(|c| c * c).sum();
            best = best.min(s);
        }
        return Ok(weight * best.min(1.0));
    }
    Ok(l.max_eigenvalue())
}

/// The top eigenvector as a rank-`r` solution on a one-block partition.
pub(crate) fn top_eigen_solution(l: &HermitianOperator, partition: &Partition, r: usize) -> Result<SqeSolution> {
    if !partition.is_trivial() {
        return Err(SqeError::InvalidArgument("expected a single party".into()));
    }
    let lm = permute_matrix(l.shape(), l.matrix(), &partition.site_order())?;
    let eig = hermitian_eigen(&lm);
    let k = (0..eig.eigenvalues.len())
        .max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .ok_or_else(|| SqeError::InvalidShape("empty operator".into()))?;
    let g = eig.eigenvalues[k];
    let top: CVector = eig.eigenvectors.column(k).into_owned();
    let d = top.len();
    let mut rows = vec![top];
    rows.extend((1..r).map(|_| CVector::zeros(d)));
    let spinor = SpinorDecomposition::new(partition.clone(), vec![d], vec![rows])?;
    let (residual_norm, orth) = residual_block_order(&lm, &spinor, g);
    Ok(SqeSolution {
        g,
        spinor,
        residual_norm,
        residual_orthogonality: orth,
        converged: true,
        restarts_used: 0,
        iterations: 0,
        method: Method::PartiallySeparable,
        trace: vec![g],
    })
}

fn closed_form_candidates(
    l: &HermitianOperator,
    partition: &Partition,
    r: usize,
    opts: &SolverOptions,
) -> Result<Vec<SqeSolution>> {
    let mut out = Vec::new();
    if partition.num_blocks() < 2 {
        return Ok(out);
    }
    if let Some((weight, psi)) = rank_one_state(l) {
        if let Some(mut sol) = best_opb(&psi.projector(), &psi, partition, r, opts)? {
            if (weight - 1.0).abs() > 1e-15 {
                sol.g *= weight;
                let lm = permute_matrix(l.shape(), l.matrix(), &partition.site_order())?;
                (sol.residual_norm, sol.residual_orthogonality) = residual_block_order(&lm, &sol.spinor, sol.g);
            }
            out.push(sol);
        }
    }
    match solve_partially_separable_with(l, partition, r, opts) {
        Ok(sol) => out.push(sol),
        Err(SqeError::StructureNotApplicable(_)) | Err(SqeError::SolverFailure { .. }) => {}
        Err(e) => return Err(e),
    }
    Ok(out)
}

/// Runs `opts.restarts` alternating solves with seeds drawn from `opts.seed`.
/// Returns the best converged run, the best value of any run, and the count of converged runs.
fn run_restarts(
    l: &HermitianOperator,
    partition: &Partition,
    r: usize,
    opts: &SolverOptions,
) -> (Option<SqeSolution>, Option<f64>, usize) {
    let mut root = ChaCha8Rng::seed_from_u64(opts.seed);
    let seeds: Vec<u64> = (0..opts.restarts).map(|_| root.next_u64()).collect();
    let runs: Vec<Option<SqeSolution>> = seeds
        .par_iter()
        .map(|&seed| alternating_solve(l, partition, r, &SolverOptions { seed, ..opts.clone() }).ok())
        .collect();
    let mut best: Option<SqeSolution> = None;
    let mut best_any: Option<f64> = None;
    let mut converged = 0;
    for run in runs.into_iter().flatten() {
        best_any = Some(best_any.map_or(run.g, |b: f64| b.max(run.g)));
        if run.converged {
            converged += 1;
            if best.as_ref().is_none_or(|b| run.g > b.g) {
                best = Some(run);
            }
        }
    }
    if let Some(b) = best.as_mut() {
        b.restarts_used = opts.restarts;
    }
    (best, best_any, converged)
}

/// Largest SQE eigenvalue `g_r` of `l` for `partition`: the best of all
/// applicable closed forms and of the alternating solver over restarts.
pub fn g_r_max(l: &HermitianOperator, partition: &Partition, r: usize, opts: &SolverOptions) -> Result<GrEstimate> {
    if r < 1 {
        return Err(SqeError::InvalidArgument("r must be at least 1".into()));
    }
    if opts.restarts < 1 {
        return Err(SqeError::InvalidArgument("restarts must be at least 1".into()));
    }
    let ub = upper_bound(l, partition, r)?;
    if partition.is_trivial() {
        let solution = top_eigen_solution(l, partition, r)?;
        return Ok(GrEstimate {
            g: solution.g,
            method: solution.method,
            exact: true,
            upper_bound: ub,
            closed_form_g: Some(solution.g),
            heuristic_g: None,
            converged_restarts: 0,
            solution,
        });
    }
    let closed = if opts.closed_forms { closed_form_candidates(l, partition, r, opts)? } else { Vec::new() };
    let closed_best = closed.into_iter().max_by(|a, b| a.g.total_cmp(&b.g));
    let closed_g = closed_best.as_ref().map(|s| s.g);
    let closed_exact = closed_g.is_some_and(|g| g >= ub - EXACT_TOL);

    let (heuristic, best_any, converged_restarts) =
        if opts.always_heuristic || !closed_exact { run_restarts(l, partition, r, opts) } else { (None, None, 0) };
    let heuristic_g = heuristic.as_ref().map(|s| s.g);

    let solution = match (closed_best, heuristic) {
        (Some(c), Some(h)) => {
            if h.g > c.g + EXACT_TOL {
                h
            } else {
                c
            }
        }
        (Some(c), None) => c,
        (None, Some(h)) => h,
        (None, None) => {
            return Err(SqeError::SolverFailure {
                message: format!("no restart converged for {} at r = {r}", partition.label()),
                best_g: best_any,
            })
        }
    };
    if solution.g > ub + BOUND_SLACK {
        return Err(SqeError::NumericalInconsistency(format!("value {} exceeds the upper bound {ub}", solution.g)));
    }
    Ok(GrEstimate {
        g: solution.g,
        method: solution.method,
        exact: solution.g >= ub - EXACT_TOL,
        upper_bound: ub,
        closed_form_g: closed_g,
        heuristic_g,
        converged_restarts,
        solution,
    })
}
