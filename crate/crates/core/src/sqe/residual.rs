use super::{SpinorDecomposition, SqeSolution};
use crate::error::{Result, SqeError};
use crate::tensor::{party_embedding, permute_matrix, CMatrix, HermitianOperator};

/// `(||chi||, max_{j,q} ||<a_j^(not q)|chi>||)` with `chi = (L - g)|phi>`,
/// for `L` already in block order.
pub(crate) fn residual_block_order(lm: &CMatrix, spinor: &SpinorDecomposition, g: f64) -> (f64, f64) {
    let phi = spinor.assemble_block_order();
    let norm = phi.norm();
    let phi = phi.unscale(norm.max(1e-300));
    let chi = lm * &phi - phi.scale(g);
    let dims = spinor.party_dims();
    let mut worst = 0.0f64;
    for q in 0..spinor.num_parties() {
        for j in 0..spinor.rank() {
            let b = party_embedding(&spinor.row_except(j, q), dims, q);
            // rows are scaled so that |phi> has unit norm; undo the overall scale of row j
            let scale: f64 = spinor.row_except(j, q).iter().map(|v| v.norm()).product();
            if scale < 1e-150 {
                continue;
            }
            worst = worst.max((b.adjoint() * &chi).norm() / scale);
        }
    }
    (chi.norm(), worst)
}

/// Residual norm and orthogonality violation of a candidate solution.
pub fn second_form_residual(l: &HermitianOperator, solution: &SqeSolution) -> Result<(f64, f64)> {
    let partition = solution.partition();
    let dims = partition.party_dims(l.shape())?;
    if dims != solution.spinor.party_dims() {
        return Err(SqeError::InvalidShape("solution does not match operator".into()));
    }
    let lm = permute_matrix(l.shape(), l.matrix(), &partition.site_order())?;
    Ok(residual_block_order(&lm, &solution.spinor, solution.g))
}
