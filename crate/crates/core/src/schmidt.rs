//! Bipartite Schmidt decompositions across 2-block partitions.

use crate::error::{Result, SqeError};
use crate::partition::Partition;
use crate::tensor::{permute_vector, CMatrix, CVector, PureState};

/// Coefficients below this count as zero when determining the rank.
pub const RANK_TOL: f64 = 1e-9;

/// `|psi> = sum_k lambda_k |l_k>|r_k>` across the two blocks of a partition.
#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    /// Descending, nonnegative.
    pub coefficients: Vec<f64>,
    pub left_vectors: Vec<CVector>,
    pub right_vectors: Vec<CVector>,
    pub rank: usize,
}

impl SchmidtDecomposition {
    /// `sum_k lambda_k |l_k> (x) |r_k>` in block order (left block first).
    pub fn reconstruct(&self) -> CVector {
        let dl = self.left_vectors[0].len();
        let dr = self.right_vectors[0].len();
        let mut out = CVector::zeros(dl * dr);
        for ((c, l), r) in self.coefficients.iter().zip(&self.left_vectors).zip(&self.right_vectors) {
            out += l.kronecker(r).scale(*c);
        }
        out
    }
}

/// Schmidt decomposition of `state` between the two blocks of `partition`.
pub fn bipartite_schmidt(state: &PureState, partition: &Partition) -> Result<SchmidtDecomposition> {
    if partition.num_blocks() != 2 {
        return Err(SqeError::InvalidArgument(format!(
            "bipartite Schmidt decomposition needs 2 blocks, {} has {}",
            partition.label(),
            partition.num_blocks()
        )));
    }
    let dims = partition.party_dims(state.shape())?;
    let v = permute_vector(state.shape(), state.amplitudes(), &partition.site_order())?;
    schmidt_of_vector(&v, dims[0], dims[1])
}

/// Schmidt decomposition of a vector already laid out as `left (x) right`.
pub(crate) fn schmidt_of_vector(v: &CVector, dl: usize, dr: usize) -> Result<SchmidtDecomposition> {
    if dl * dr != v.len() {
        return Err(SqeError::InvalidShape(format!("{} != {dl} x {dr}", v.len())));
    }
    // row-major reshape: M[a, b] = v[a * dr + b]
    let m = CMatrix::from_fn(dl, dr, |a, b| v[a * dr + b]);
    let svd = m.svd(true, true);
    let u = svd.u.expect("left singular vectors");
    let v_t = svd.v_t.expect("right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let coefficients: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let left_vectors = order.iter().map(|&k| u.column(k).into_owned()).collect();
    let right_vectors = order.iter().map(|&k| v_t.row(k).transpose()).collect();
    let rank = coefficients.iter().filter(|&&c| c > RANK_TOL).count();
    Ok(SchmidtDecomposition { coefficients, left_vectors, right_vectors, rank })
}

/// `sum_{k <= r} lambda_k^2`: the maximal squared overlap of `state` with a
/// Schmidt-rank-`r` vector across the cut.
pub fn g_r_bipartite(state: &PureState, partition: &Partition, r: usize) -> Result<f64> {
    if r < 1 {
        return Err(SqeError::InvalidArgument("r must be at least 1".into()));
    }
    let sd = bipartite_schmidt(&state.normalized()?, partition)?;
    if r >= sd.rank {
        return Ok(1.0);
    }
    Ok(sd.coefficients.iter().take(r).map(|c| c * c).sum())
}

/// Maximum bipartite Schmidt rank over every 2-block coarsening of `partition`.
///
/// This is a lower bound on the multipartite Schmidt rank, not its value.
/// For a one-block partition every state has rank 1.
pub fn msn_lower_bound(state: &PureState, partition: &Partition) -> Result<usize> {
    let mut best = 1;
    for cut in partition.two_block_coarsenings() {
        best = best.max(bipartite_schmidt(state, &cut)?.rank);
    }
    Ok(best)
}
