use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SqeError};
use crate::partition::Partition;
use crate::tensor::{inverse_permutation, permute_vector, CVector, PureState, SystemShape, C64};

/// The `r x n` grid of party vectors `|a_i^(q)>` parameterizing a rank-`r`
/// candidate `|phi> = sum_i |a_i^(1), ..., a_i^(n)>`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorDecomposition {
    partition: Partition,
    party_dims: Vec<usize>,
    /// `rows[q][i]` is `|a_i^(q)>`.
    rows: Vec<Vec<CVector>>,
}

impl SpinorDecomposition {
    pub fn new(partition: Partition, party_dims: Vec<usize>, rows: Vec<Vec<CVector>>) -> Result<Self> {
        let n = partition.num_blocks();
        if party_dims.len() != n || rows.len() != n {
            return Err(SqeError::InvalidShape(format!(
                "{} parties, got {} dims and {} spinors",
                n,
                party_dims.len(),
                rows.len()
            )));
        }
        let r = rows[0].len();
        if r == 0 {
            return Err(SqeError::InvalidArgument("rank must be at least 1".into()));
        }
        for (q, spinor) in rows.iter().enumerate() {
            if spinor.len() != r {
                return Err(SqeError::InvalidShape(format!("party {q} has {} rows, expected {r}", spinor.len())));
            }
            if spinor.iter().any(|v| v.len() != party_dims[q]) {
                return Err(SqeError::InvalidShape(format!("party {q} vectors must have dim {}", party_dims[q])));
            }
        }
        Ok(SpinorDecomposition { partition, party_dims, rows })
    }

    /// Complex Gaussian rows, orthonormalized per party where the party
    /// dimension allows, then scaled so the assembled state has unit norm.
    pub fn random<R: Rng>(partition: &Partition, party_dims: &[usize], r: usize, rng: &mut R) -> Result<Self> {
        let rows = party_dims
            .iter()
            .map(|&d| {
                let mut basis: Vec<CVector> = Vec::with_capacity(r);
                for _ in 0..r {
                    let mut v = CVector::from_fn(d, |_, _| {
                        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
                    });
                    if basis.len() < d {
                        for b in &basis {
                            let c = b.dotc(&v);
                            v -= b * c;
                        }
                    }
                    let norm = v.norm();
                    basis.push(if norm > 1e-12 { v.unscale(norm) } else { v });
                }
                basis
            })
            .collect();
        let mut s = SpinorDecomposition::new(partition.clone(), party_dims.to_vec(), rows)?;
        s.normalize()?;
        Ok(s)
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn party_dims(&self) -> &[usize] {
        &self.party_dims
    }

    pub fn rank(&self) -> usize {
        self.rows[0].len()
    }

    pub fn num_parties(&self) -> usize {
        self.rows.len()
    }

    /// The spinor `(|a_1^(q)>, ..., |a_r^(q)>)` of party `q`.
    pub fn party(&self, q: usize) -> &[CVector] {
        &self.rows[q]
    }

    pub(crate) fn party_mut(&mut self, q: usize) -> &mut [CVector] {
        &mut self.rows[q]
    }

    /// Vectors of row `i` on every party except `q`, in party order.
    pub(crate) fn row_except(&self, i: usize, q: usize) -> Vec<&CVector> {
        (0..self.rows.len()).filter(|&p| p != q).map(|p| &self.rows[p][i]).collect()
    }

    /// The product vector of row `i` in block order.
    pub fn row_product(&self, i: usize) -> CVector {
        let mut v = self.rows[0][i].clone();
        for q in 1..self.rows.len() {
            v = v.kronecker(&self.rows[q][i]);
        }
        v
    }

    /// `|phi>` with subsystems in block order (see [`Partition::site_order`]).
    pub fn assemble_block_order(&self) -> CVector {
        let mut v = self.row_product(0);
        for i in 1..self.rank() {
            v += self.row_product(i);
        }
        v
    }

    /// `|phi>` in the original subsystem order of `shape`.
    pub fn assemble(&self, shape: &SystemShape) -> Result<PureState> {
        let order = self.partition.site_order();
        let block_shape = shape.permuted(&order)?;
        let v = self.assemble_block_order();
        let back = permute_vector(&block_shape, &v, &inverse_permutation(&order))?;
        PureState::new(shape.clone(), back)
    }

    pub fn norm(&self) -> f64 {
        self.assemble_block_order().norm()
    }

    /// Rescales party 0 so that `<phi|phi> = 1`.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n < 1e-300 || !n.is_finite() {
            return Err(SqeError::NumericalInconsistency("spinor assembles to the zero vector".into()));
        }
        for v in &mut self.rows[0] {
            v.unscale_mut(n);
        }
        Ok(())
    }

    /// Redistributes the norm of each row evenly across parties. Leaves `|phi>` unchanged.
    pub(crate) fn balance(&mut self) {
        let n = self.rows.len() as f64;
        for i in 0..self.rank() {
            let norms: Vec<f64> = self.rows.iter().map(|s| s[i].norm()).collect();
            if norms.iter().any(|&x| x < 1e-150) {
                continue;
            }
            let geo = norms.iter().map(|x| x.ln()).sum::<f64>() / n;
            let target = geo.exp();
            for (q, s) in self.rows.iter_mut().enumerate() {
                s[i].scale_mut(target / norms[q]);
            }
        }
    }
}
