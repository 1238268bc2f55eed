use super::{SpinorDecomposition, SqeSolution};
use crate::error::{Result, SqeError};
use crate::partition::Partition;
use crate::tensor::{inverse_permutation, permute_matrix, CMatrix, HermitianOperator, C64};

const UNITARY_TOL: f64 = 1e-10;

fn check_unitaries(partition: &Partition, dims: &[usize], unitaries: &[CMatrix]) -> Result<()> {
    if unitaries.len() != partition.num_blocks() {
        return Err(SqeError::InvalidArgument(format!(
            "{} unitaries for {} parties",
            unitaries.len(),
            partition.num_blocks()
        )));
    }
    for (q, (u, &d)) in unitaries.iter().zip(dims).enumerate() {
        if u.nrows() != d || u.ncols() != d {
            return Err(SqeError::InvalidArgument(format!("unitary {q} is not {d}x{d}")));
        }
        if (u.adjoint() * u - CMatrix::identity(d, d)).norm() > UNITARY_TOL {
            return Err(SqeError::InvalidArgument(format!("matrix {q} is not unitary")));
        }
    }
    Ok(())
}

/// `(U_1 (x) ... (x) U_n) (xi1 + xi2 L) (U_1 (x) ... (x) U_n)^†`, one unitary
/// per party of `partition`.
///
/// For `xi2 > 0` the SQE eigenvalues map as `g' = xi1 + xi2 g`. For
/// `xi2 < 0` the largest `g'` comes from the smallest eigenvalue of `L`.
pub fn local_transform(
    l: &HermitianOperator,
    partition: &Partition,
    unitaries: &[CMatrix],
    xi1: f64,
    xi2: f64,
) -> Result<HermitianOperator> {
    if xi2 == 0.0 {
        return Err(SqeError::InvalidArgument("xi2 must be nonzero".into()));
    }
    let dims = partition.party_dims(l.shape())?;
    check_unitaries(partition, &dims, unitaries)?;
    let order = partition.site_order();
    let lm = permute_matrix(l.shape(), l.matrix(), &order)?;
    let mut u = unitaries[0].clone();
    for v in &unitaries[1..] {
        u = u.kronecker(v);
    }
    let n = lm.nrows();
    let shifted = lm.scale(xi2) + CMatrix::identity(n, n) * C64::new(xi1, 0.0);
    let out = &u * shifted * u.adjoint();
    let block_shape = l.shape().permuted(&order)?;
    let back = permute_matrix(&block_shape, &out, &inverse_permutation(&order))?;
    HermitianOperator::new(l.shape().clone(), (&back + back.adjoint()).scale(0.5))
}

/// The solution for the transformed operator: `g' = xi1 + xi2 g` and every
/// party vector rotated by its unitary.
pub fn transform_solution(solution: &SqeSolution, unitaries: &[CMatrix], xi1: f64, xi2: f64) -> Result<SqeSolution> {
    if xi2 == 0.0 {
        return Err(SqeError::InvalidArgument("xi2 must be nonzero".into()));
    }
    let spinor = &solution.spinor;
    check_unitaries(spinor.partition(), spinor.party_dims(), unitaries)?;
    let rows = (0..spinor.num_parties()).map(|q| spinor.party(q).iter().map(|v| &unitaries[q] * v).collect()).collect();
    let spinor = SpinorDecomposition::new(spinor.partition().clone(), spinor.party_dims().to_vec(), rows)?;
    Ok(SqeSolution {
        g: xi1 + xi2 * solution.g,
        spinor,
        residual_norm: solution.residual_norm * xi2.abs(),
        residual_orthogonality: solution.residual_orthogonality * xi2.abs(),
        converged: solution.converged,
        restarts_used: solution.restarts_used,
        iterations: solution.iterations,
        method: solution.method,
        trace: solution.trace.iter().map(|g| xi1 + xi2 * g).collect(),
    })
}
