use crate::error::{Result, SqeError};
use crate::tensor::{hermiticity_defect, party_embedding, permute_matrix, CMatrix, HermitianOperator, C64};

use super::SpinorDecomposition;

/// The operator-valued `r x r` matrices of one party's eigenvalue equation,
/// each stored as a single `(r * d_q) x (r * d_q)` matrix whose `(i, j)`
/// block acts on party `q`.
#[derive(Clone, Debug)]
pub struct GramOperators {
    /// Blocks `<a_i^(not q)| L |a_j^(not q)>`.
    pub l_bar: CMatrix,
    /// Blocks `<a_i^(not q)|a_j^(not q)> * identity`.
    pub i_bar: CMatrix,
    /// The scalar overlaps behind `i_bar`.
    pub overlaps: CMatrix,
    pub party_dim: usize,
}

/// Builds both Gram operators for party `q` from an operator whose
/// subsystems are already in the spinor's block order.
pub(crate) fn gram_block_order(l: &CMatrix, spinor: &SpinorDecomposition, q: usize) -> GramOperators {
    let dims = spinor.party_dims();
    let dq = dims[q];
    let r = spinor.rank();
    let embeds: Vec<CMatrix> = (0..r).map(|j| party_embedding(&spinor.row_except(j, q), dims, q)).collect();
    let l_embeds: Vec<CMatrix> = embeds.iter().map(|b| l * b).collect();
    let mut l_bar = CMatrix::zeros(r * dq, r * dq);
    let mut overlaps = CMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            let block = embeds[i].adjoint() * &l_embeds[j];
            l_bar.view_mut((i * dq, j * dq), (dq, dq)).copy_from(&block);
            let mut ov = C64::new(1.0, 0.0);
            for p in (0..spinor.num_parties()).filter(|&p| p != q) {
                ov *= spinor.party(p)[i].dotc(&spinor.party(p)[j]);
            }
            overlaps[(i, j)] = ov;
        }
    }
    let i_bar = overlaps.kronecker(&CMatrix::identity(dq, dq));
    GramOperators { l_bar, i_bar, overlaps, party_dim: dq }
}

/// Gram operators of `l` for party `q` of `spinor`.
pub fn build_gram(l: &HermitianOperator, spinor: &SpinorDecomposition, q: usize) -> Result<GramOperators> {
    let partition = spinor.partition();
    let dims = partition.party_dims(l.shape())?;
    if dims != spinor.party_dims() {
        return Err(SqeError::InvalidShape(format!(
            "spinor party dims {:?} vs operator party dims {dims:?}",
            spinor.party_dims()
        )));
    }
    if q >= spinor.num_parties() {
        return Err(SqeError::InvalidIndex(format!("party {q}")));
    }
    let lm = permute_matrix(l.shape(), l.matrix(), &partition.site_order())?;
    Ok(gram_block_order(&lm, spinor, q))
}

impl GramOperators {
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.l_bar).max(hermiticity_defect(&self.i_bar))
    }
}
