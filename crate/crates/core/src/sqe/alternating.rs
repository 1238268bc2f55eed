use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gram::gram_block_order;
use super::residual::residual_block_order;
use super::{Method, SolverOptions, SpinorDecomposition, SqeSolution, GRAM_CUTOFF};
use crate::error::{Result, SqeError};
use crate::partition::Partition;
use crate::tensor::{hermitian_eigen, permute_matrix, CMatrix, CVector, HermitianOperator};

/// Eigenvalues within this (relative) distance of the top one are treated as degenerate.
const DEGENERACY_TOL: f64 = 1e-11;
/// Allowed dip of `g` across one update before it counts as a monotonicity violation.
const MONOTONE_SLACK: f64 = 1e-9;

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Replaces party `q` of `spinor` by the maximizing solution of
/// `L_bar v = g I_bar v` on the range of `I_bar`. Returns the new `g`.
pub(crate) fn update_party(lm: &CMatrix, spinor: &mut SpinorDecomposition, q: usize) -> Result<f64> {
    let gram = gram_block_order(lm, spinor, q);
    let dq = gram.party_dim;
    let r = spinor.rank();

    let eig = hermitian_eigen(&hermitize(&gram.overlaps));
    let s_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if !(s_max > 1e-300) {
        return Err(SqeError::NumericalInconsistency("vanishing spinor Gram matrix".into()));
    }
    let keep: Vec<usize> = (0..r).filter(|&k| eig.eigenvalues[k] > GRAM_CUTOFF * s_max).collect();
    let k = keep.len();
    // whitening W = U_keep diag(s^-1/2), so that W^† G W = 1
    let mut w = CMatrix::zeros(r, k);
    let mut w_pinv = CMatrix::zeros(k, r);
    for (c, &idx) in keep.iter().enumerate() {
        let s = eig.eigenvalues[idx];
        for row in 0..r {
            let u = eig.eigenvectors[(row, idx)];
            w[(row, c)] = u.unscale(s.sqrt());
            w_pinv[(c, row)] = u.conj().scale(s.sqrt());
        }
    }
    let t = w.kronecker(&CMatrix::identity(dq, dq));
    let t_pinv = w_pinv.kronecker(&CMatrix::identity(dq, dq));
    let m = hermitize(&(t.adjoint() * &gram.l_bar * &t));
    let eig_m = hermitian_eigen(&m);

    let top = eig_m.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = top.abs().max(1.0);
    let degenerate: Vec<usize> =
        (0..eig_m.eigenvalues.len()).filter(|&i| eig_m.eigenvalues[i] >= top - DEGENERACY_TOL * scale).collect();

    let v_prev = CVector::from_iterator(r * dq, spinor.party(q).iter().flat_map(|v| v.iter().copied()));
    let y_prev = &t_pinv * v_prev;
    let mut projected = CVector::zeros(k * dq);
    for &i in &degenerate {
        let e = eig_m.eigenvectors.column(i);
        projected += e * e.dotc(&y_prev);
    }
    let y = if projected.norm() > 1e-6 * y_prev.norm().max(1e-300) {
        projected.normalize()
    } else {
        let best = degenerate
            .iter()
            .copied()
            .max_by(|&a, &b| eig_m.eigenvalues[a].total_cmp(&eig_m.eigenvalues[b]))
            .expect("nonempty spectrum");
        eig_m.eigenvectors.column(best).into_owned()
    };
    let g = y.dotc(&(&m * &y)).re;
    let v = t * y;
    for (i, row) in spinor.party_mut(q).iter_mut().enumerate() {
        *row = v.rows(i * dq, dq).into_owned();
    }
    Ok(g)
}

fn block_expectation(lm: &CMatrix, phi: &CVector) -> f64 {
    phi.dotc(&(lm * phi)).re / phi.norm_squared()
}

/// Runs alternating sweeps from a given spinor on an operator already in
/// the spinor's block order.
pub(crate) fn solve_block_order(
    lm: &CMatrix,
    mut spinor: SpinorDecomposition,
    opts: &SolverOptions,
) -> Result<SqeSolution> {
    spinor.normalize()?;
    let n = spinor.num_parties();
    let mut g = block_expectation(lm, &spinor.assemble_block_order());
    let mut trace = vec![g];
    let mut converged = false;
    let mut iterations = 0;
    let (mut res_norm, mut orth) = (f64::INFINITY, f64::INFINITY);
    while iterations < opts.max_iter {
        iterations += 1;
        let g_start = g;
        for q in 0..n {
            let g_new = update_party(lm, &mut spinor, q)?;
            debug_assert!(
                g_new >= g - MONOTONE_SLACK * g.abs().max(1.0),
                "alternating update decreased g from {g} to {g_new}"
            );
            g = g_new;
            trace.push(g);
        }
        spinor.balance();
        (res_norm, orth) = residual_block_order(lm, &spinor, g);
        if (g - g_start).abs() < opts.tol && orth < opts.orth_tol {
            converged = true;
            break;
        }
    }
    spinor.normalize()?;
    Ok(SqeSolution {
        g,
        spinor,
        residual_norm: res_norm,
        residual_orthogonality: orth,
        converged,
        restarts_used: 1,
        iterations,
        method: Method::Alternating,
        trace,
    })
}

fn prepare(l: &HermitianOperator, partition: &Partition, r: usize) -> Result<(CMatrix, Vec<usize>)> {
    if r < 1 {
        return Err(SqeError::InvalidArgument("r must be at least 1".into()));
    }
    let dims = partition.party_dims(l.shape())?;
    let lm = permute_matrix(l.shape(), l.matrix(), &partition.site_order())?;
    Ok((lm, dims))
}

/// One alternating run from a random spinor drawn with `opts.seed`.
pub fn alternating_solve(
    l: &HermitianOperator,
    partition: &Partition,
    r: usize,
    opts: &SolverOptions,
) -> Result<SqeSolution> {
    let (lm, dims) = prepare(l, partition, r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let spinor = SpinorDecomposition::random(partition, &dims, r, &mut rng)?;
    solve_block_order(&lm, spinor, opts)
}

/// One alternating run from a caller-supplied spinor.
pub fn alternating_solve_from(
    l: &HermitianOperator,
    spinor: SpinorDecomposition,
    opts: &SolverOptions,
) -> Result<SqeSolution> {
    let (lm, dims) = prepare(l, spinor.partition(), spinor.rank())?;
    if dims != spinor.party_dims() {
        return Err(SqeError::InvalidShape("spinor does not match operator".into()));
    }
    solve_block_order(&lm, spinor, opts)
}
