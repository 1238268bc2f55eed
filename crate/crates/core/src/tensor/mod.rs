//! Dense states and operators over tensor products of finite-dimensional
//! subsystems.
//!
//! Flat indices are row-major over the listed subsystem order: the last
//! subsystem varies fastest. Every partition-aware reshape in the crate is a
//! [`Permute::permute_subsystems`] into block order followed by a plain
//! reshape.

mod json;

pub use json::{read_json, write_json, TensorFile};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Result, SqeError};
use crate::partition::Partition;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Hermiticity and trace tolerance applied at construction.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted for a density operator.
pub const PSD_TOL: f64 = 1e-10;
/// Largest imaginary part tolerated in an expectation value.
pub const IMAG_TOL: f64 = 1e-10;

const MAX_TOTAL_DIM: usize = 1 << 24;

/// Eigendecomposition of a Hermitian matrix.
///
/// nalgebra's QR iteration occasionally returns NaN or infinite eigenvalues
/// on sparse, nearly block-diagonal input. A shift by a multiple of the
/// identity leaves the eigenvectors alone and avoids the breakdown.
pub fn hermitian_eigen(m: &CMatrix) -> SymmetricEigen<C64, nalgebra::Dyn> {
    let finite = |e: &SymmetricEigen<C64, nalgebra::Dyn>| {
        e.eigenvalues.iter().all(|x| x.is_finite())
            && e.eigenvectors.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    };
    let eig = SymmetricEigen::new(m.clone());
    if finite(&eig) || m.nrows() == 0 {
        return eig;
    }
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for c in [0.5, 0.123, 1.7, -0.37] {
        let shift = c * scale;
        let shifted = m + CMatrix::identity(m.nrows(), m.ncols()).scale(shift);
        let mut e = SymmetricEigen::new(shifted);
        if finite(&e) {
            e.eigenvalues.iter_mut().for_each(|x| *x -= shift);
            return e;
        }
    }
    eig
}

/// Local dimensions `d_1, ..., d_N` of an `N`-partite system.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SystemShape {
    dims: Vec<usize>,
    total: usize,
}

impl SystemShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(SqeError::InvalidShape("no subsystems".into()));
        }
        let mut total = 1usize;
        for &d in &dims {
            if d == 0 {
                return Err(SqeError::InvalidShape("zero-dimensional subsystem".into()));
            }
            total = total
                .checked_mul(d)
                .filter(|&t| t <= MAX_TOTAL_DIM)
                .ok_or_else(|| SqeError::Limit(format!("total dimension of {dims:?} too large")))?;
        }
        Ok(SystemShape { dims, total })
    }

    pub fn qubits(n: usize) -> Self {
        SystemShape::new(vec![2; n]).expect("qubit shape")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of subsystems `N`.
    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            out[k] = flat % self.dims[k];
            flat /= self.dims[k];
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    /// Shape after reordering: subsystem `k` of the result is subsystem
    /// `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.len())?;
        SystemShape::new(perm.iter().map(|&p| self.dims[p]).collect())
    }

    /// Shape of the listed subsystems, in the listed order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            if i >= self.len() {
                return Err(SqeError::InvalidIndex(format!(
                    "subsystem {i} out of range for {} subsystems",
                    self.len()
                )));
            }
        }
        SystemShape::new(indices.iter().map(|&i| self.dims[i]).collect())
    }

    pub fn concat(&self, other: &SystemShape) -> Result<Self> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        SystemShape::new(dims)
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(SqeError::InvalidArgument(format!("permutation of length {} for {n} subsystems", perm.len())));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(SqeError::InvalidArgument(format!("{perm:?} is not a bijection")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// For every flat index of the permuted system, the flat index it came from.
fn permutation_source(shape: &SystemShape, perm: &[usize]) -> Vec<usize> {
    let old_strides = shape.strides();
    let new_dims: Vec<usize> = perm.iter().map(|&p| shape.dims[p]).collect();
    let mut source = Vec::with_capacity(shape.total_dim());
    let mut counter = vec![0usize; new_dims.len()];
    for _ in 0..shape.total_dim() {
        source.push(counter.iter().zip(perm).map(|(&c, &p)| c * old_strides[p]).sum());
        for k in (0..counter.len()).rev() {
            counter[k] += 1;
            if counter[k] < new_dims[k] {
                break;
            }
            counter[k] = 0;
        }
    }
    source
}

pub(crate) fn permute_vector(shape: &SystemShape, v: &CVector, perm: &[usize]) -> Result<CVector> {
    check_permutation(perm, shape.len())?;
    let src = permutation_source(shape, perm);
    Ok(CVector::from_iterator(src.len(), src.iter().map(|&s| v[s])))
}

pub(crate) fn permute_matrix(shape: &SystemShape, m: &CMatrix, perm: &[usize]) -> Result<CMatrix> {
    check_permutation(perm, shape.len())?;
    let src = permutation_source(shape, perm);
    let n = src.len();
    Ok(CMatrix::from_fn(n, n, |i, j| m[(src[i], src[j])]))
}

pub(crate) fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

/// Largest entry of `m - m^†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_square(shape: &SystemShape, m: &CMatrix) -> Result<()> {
    let d = shape.total_dim();
    if m.nrows() != d || m.ncols() != d {
        return Err(SqeError::InvalidShape(format!("{}x{} matrix for total dimension {d}", m.nrows(), m.ncols())));
    }
    Ok(())
}

/// A state vector on a multipartite system.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    shape: SystemShape,
    amplitudes: CVector,
}

impl PureState {
    /// Wraps `amplitudes`; normalization is not enforced, see [`Self::normalized`].
    pub fn new(shape: SystemShape, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != shape.total_dim() {
            return Err(SqeError::InvalidShape(format!(
                "{} amplitudes for total dimension {}",
                amplitudes.len(),
                shape.total_dim()
            )));
        }
        Ok(PureState { shape, amplitudes })
    }

    pub fn from_real(shape: SystemShape, amplitudes: &[f64]) -> Result<Self> {
        let v = CVector::from_iterator(amplitudes.len(), amplitudes.iter().map(|&a| C64::new(a, 0.0)));
        PureState::new(shape, v)
    }

    pub fn basis(shape: SystemShape, index: usize) -> Result<Self> {
        if index >= shape.total_dim() {
            return Err(SqeError::InvalidIndex(format!("basis index {index}")));
        }
        let mut v = CVector::zeros(shape.total_dim());
        v[index] = C64::new(1.0, 0.0);
        PureState::new(shape, v)
    }

    /// Single-qubit `|0>`.
    pub fn zero() -> Self {
        PureState::from_real(SystemShape::qubits(1), &[1.0, 0.0]).unwrap()
    }

    /// Single-qubit `|1>`.
    pub fn one() -> Self {
        PureState::from_real(SystemShape::qubits(1), &[0.0, 1.0]).unwrap()
    }

    /// Single-qubit `|+> = (|0> + |1>)/sqrt(2)`.
    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        PureState::from_real(SystemShape::qubits(1), &[h, h]).unwrap()
    }

    /// Single-qubit `|-> = (|0> - |1>)/sqrt(2)`.
    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        PureState::from_real(SystemShape::qubits(1), &[h, -h]).unwrap()
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(SqeError::InvalidArgument("cannot normalize a zero vector".into()));
        }
        Ok(PureState { shape: self.shape.clone(), amplitudes: self.amplitudes.unscale(n) })
    }

    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.shape != other.shape {
            return Err(SqeError::InvalidShape("inner product of mismatched shapes".into()));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|self><self|`.
    pub fn projector(&self) -> HermitianOperator {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        HermitianOperator { shape: self.shape.clone(), matrix: m }
    }

    pub fn to_density(&self) -> Result<DensityOperator> {
        let n = self.normalized()?;
        DensityOperator::new(n.shape.clone(), &n.amplitudes * n.amplitudes.adjoint())
    }
}

/// A valid mixed state: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    shape: SystemShape,
    matrix: CMatrix,
}

impl DensityOperator {
    pub fn new(shape: SystemShape, matrix: CMatrix) -> Result<Self> {
        check_square(&shape, &matrix)?;
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(SqeError::NumericalInconsistency(format!("density matrix not Hermitian (defect {defect:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > HERMITIAN_TOL || tr.im.abs() > HERMITIAN_TOL {
            return Err(SqeError::NumericalInconsistency(format!("density matrix trace {tr}")));
        }
        let min_eig = hermitian_eigen(&matrix).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(SqeError::NumericalInconsistency(format!("density matrix has eigenvalue {min_eig:e}")));
        }
        Ok(DensityOperator { shape, matrix })
    }

    pub fn maximally_mixed(shape: SystemShape) -> Self {
        let d = shape.total_dim();
        let matrix = CMatrix::identity(d, d).unscale(d as f64);
        DensityOperator { shape, matrix }
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Reduced state on the `keep` subsystems (in ascending order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        let (shape, matrix) = partial_trace_matrix(&self.shape, &self.matrix, keep)?;
        Ok(DensityOperator { shape, matrix })
    }
}

/// A Hermitian operator; positivity is not required.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    shape: SystemShape,
    matrix: CMatrix,
}

impl HermitianOperator {
    pub fn new(shape: SystemShape, matrix: CMatrix) -> Result<Self> {
        check_square(&shape, &matrix)?;
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(SqeError::InvalidArgument(format!("operator not Hermitian (defect {defect:e})")));
        }
        Ok(HermitianOperator { shape, matrix })
    }

    pub fn identity(shape: SystemShape) -> Self {
        let d = shape.total_dim();
        HermitianOperator { shape, matrix: CMatrix::identity(d, d) }
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = hermitian_eigen(&self.matrix).eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("nonempty operator")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -PSD_TOL
    }

    pub fn to_density(&self) -> Result<DensityOperator> {
        DensityOperator::new(self.shape.clone(), self.matrix.clone())
    }

    /// The test operator restricted to the `keep` subsystems by tracing out the rest.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<HermitianOperator> {
        partial_trace(self, keep)
    }
}

impl From<DensityOperator> for HermitianOperator {
    fn from(rho: DensityOperator) -> Self {
        HermitianOperator { shape: rho.shape, matrix: rho.matrix }
    }
}

/// Subsystem reordering; `perm[k]` names the old subsystem placed at slot `k`.
pub trait Permute: Sized {
    fn permute_subsystems(&self, perm: &[usize]) -> Result<Self>;
}

impl Permute for PureState {
    fn permute_subsystems(&self, perm: &[usize]) -> Result<Self> {
        Ok(PureState {
            shape: self.shape.permuted(perm)?,
            amplitudes: permute_vector(&self.shape, &self.amplitudes, perm)?,
        })
    }
}

impl Permute for DensityOperator {
    fn permute_subsystems(&self, perm: &[usize]) -> Result<Self> {
        Ok(DensityOperator {
            shape: self.shape.permuted(perm)?,
            matrix: permute_matrix(&self.shape, &self.matrix, perm)?,
        })
    }
}

impl Permute for HermitianOperator {
    fn permute_subsystems(&self, perm: &[usize]) -> Result<Self> {
        Ok(HermitianOperator {
            shape: self.shape.permuted(perm)?,
            matrix: permute_matrix(&self.shape, &self.matrix, perm)?,
        })
    }
}

/// Kronecker product of the parts, in listed order.
pub fn product_state(parts: &[PureState]) -> Result<PureState> {
    let (first, rest) = parts.split_first().ok_or_else(|| SqeError::InvalidArgument("empty product".into()))?;
    let mut shape = first.shape.clone();
    let mut amps = first.amplitudes.clone();
    for p in rest {
        shape = shape.concat(&p.shape)?;
        amps = amps.kronecker(&p.amplitudes);
    }
    PureState::new(shape, amps)
}

pub(crate) fn partial_trace_matrix(shape: &SystemShape, m: &CMatrix, keep: &[usize]) -> Result<(SystemShape, CMatrix)> {
    if keep.is_empty() {
        return Err(SqeError::InvalidArgument("must keep at least one subsystem".into()));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.len() != keep.len() {
        return Err(SqeError::InvalidIndex(format!("repeated index in {keep:?}")));
    }
    let kept_shape = shape.select(&keep_sorted)?;
    let traced: Vec<usize> = (0..shape.len()).filter(|i| !keep_sorted.contains(i)).collect();
    let mut perm = keep_sorted.clone();
    perm.extend(&traced);
    let pm = permute_matrix(shape, m, &perm)?;
    let dk = kept_shape.total_dim();
    let dt = shape.total_dim() / dk;
    let out = CMatrix::from_fn(dk, dk, |i, j| (0..dt).map(|t| pm[(i * dt + t, j * dt + t)]).sum());
    Ok((kept_shape, out))
}

/// Traces out every subsystem not listed in `keep`.
pub fn partial_trace(op: &HermitianOperator, keep: &[usize]) -> Result<HermitianOperator> {
    let (shape, matrix) = partial_trace_matrix(&op.shape, &op.matrix, keep)?;
    Ok(HermitianOperator { shape, matrix })
}

/// Operator `B: H_q -> H` with `B|x> = |v_1, ..., v_{q-1}, x, v_{q+1}, ..., v_n>`,
/// parties ordered as in `party_dims`. `parts` lists the vectors of all
/// parties other than `q`, in party order.
pub(crate) fn party_embedding(parts: &[&CVector], party_dims: &[usize], q: usize) -> CMatrix {
    let one = CVector::from_element(1, C64::new(1.0, 0.0));
    let mut left = one.clone();
    let mut right = one;
    for (k, v) in parts.iter().enumerate() {
        if k < q {
            left = left.kronecker(*v);
        } else {
            right = right.kronecker(*v);
        }
    }
    let dq = party_dims[q];
    let (dl, dr) = (left.len(), right.len());
    let mut b = CMatrix::zeros(dl * dq * dr, dq);
    for l in 0..dl {
        for r in 0..dr {
            let c = left[l] * right[r];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            for x in 0..dq {
                b[((l * dq + x) * dr + r, x)] = c;
            }
        }
    }
    b
}

/// The operator on party `q` obtained by contracting every other party of
/// `op` with `bra_parts` on the left and `ket_parts` on the right.
///
/// Parties follow the canonical block order of `partition`; the part lists
/// skip party `q`. The result is Hermitian only when bra and ket coincide.
pub fn partial_inner(
    bra_parts: &[CVector],
    op: &HermitianOperator,
    ket_parts: &[CVector],
    partition: &Partition,
    q: usize,
) -> Result<CMatrix> {
    if partition.num_sites() != op.shape.len() {
        return Err(SqeError::InvalidShape("partition does not match operator".into()));
    }
    let n = partition.num_blocks();
    if q >= n {
        return Err(SqeError::InvalidIndex(format!("party {q} of {n}")));
    }
    let dims = partition.party_dims(&op.shape)?;
    let expected: Vec<usize> = (0..n).filter(|&p| p != q).map(|p| dims[p]).collect();
    for parts in [bra_parts, ket_parts] {
        let got: Vec<usize> = parts.iter().map(|v| v.len()).collect();
        if got != expected {
            return Err(SqeError::InvalidShape(format!("party vector dims {got:?}, expected {expected:?}")));
        }
    }
    let lm = permute_matrix(&op.shape, &op.matrix, &partition.site_order())?;
    let bra: Vec<&CVector> = bra_parts.iter().collect();
    let ket: Vec<&CVector> = ket_parts.iter().collect();
    let b_bra = party_embedding(&bra, &dims, q);
    let b_ket = party_embedding(&ket, &dims, q);
    Ok(b_bra.adjoint() * lm * b_ket)
}

/// Anything an observable can be evaluated on.
pub trait QuantumState {
    fn shape(&self) -> &SystemShape;
    /// `Tr[rho A]` (or `<psi|A|psi>`) with no reality check.
    fn raw_expectation(&self, a: &CMatrix) -> C64;
}

impl QuantumState for PureState {
    fn shape(&self) -> &SystemShape {
        &self.shape
    }

    fn raw_expectation(&self, a: &CMatrix) -> C64 {
        self.amplitudes.dotc(&(a * &self.amplitudes))
    }
}

impl QuantumState for DensityOperator {
    fn shape(&self) -> &SystemShape {
        &self.shape
    }

    fn raw_expectation(&self, a: &CMatrix) -> C64 {
        // Tr[rho A] = sum_ij rho_ij A_ji
        let n = self.matrix.nrows();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.matrix[(i, j)] * a[(j, i)];
            }
        }
        acc
    }
}

/// `Tr[rho L]`, rejected when the imaginary residue exceeds [`IMAG_TOL`].
pub fn expectation<S: QuantumState + ?Sized>(op: &HermitianOperator, state: &S) -> Result<f64> {
    if op.shape != *state.shape() {
        return Err(SqeError::InvalidShape(format!(
            "operator dims {:?} vs state dims {:?}",
            op.shape.dims(),
            state.shape().dims()
        )));
    }
    let v = state.raw_expectation(&op.matrix);
    if v.im.abs() > IMAG_TOL {
        return Err(SqeError::NumericalInconsistency(format!("expectation has imaginary part {:e}", v.im)));
    }
    Ok(v.re)
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use crate::scenarios::cluster_state;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn approx_vec(a: &CVector, b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, &y)| (x - C64::new(y, 0.0)).norm() <= tol)
    }

    #[test]
    fn zero_dim_rejected() {
        assert!(matches!(SystemShape::new(vec![2, 0]), Err(SqeError::InvalidShape(_))));
    }

    #[test]
    fn product_of_basis_vectors() {
        let s = product_state(&[PureState::zero(), PureState::zero()]).unwrap();
        assert_eq!(s.shape().dims(), &[2, 2]);
        assert!(approx_vec(s.amplitudes(), &[1.0, 0.0, 0.0, 0.0], 0.0));
    }

    #[test]
    fn product_plus_zero() {
        let s = product_state(&[PureState::plus(), PureState::zero()]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(approx_vec(s.amplitudes(), &[h, 0.0, h, 0.0], 1e-15));
    }

    #[test]
    fn first_cluster_term_matches_brute_force() {
        // |+,0,+,0> by explicit index expansion: nonzero where qubits 2 and 4 are 0.
        let s = product_state(&[PureState::plus(), PureState::zero(), PureState::plus(), PureState::zero()]).unwrap();
        let mut expected = [0.0; 16];
        for idx in [0b0000, 0b0010, 0b1000, 0b1010] {
            expected[idx] = 0.5;
        }
        assert!(approx_vec(s.amplitudes(), &expected, 1e-15));
        // and it is exactly the overlap weight 1/2 of the cluster state
        let psi = cluster_state();
        assert!((psi.inner(&s).unwrap().norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn permutation_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let shape = SystemShape::new(vec![2, 3, 2]).unwrap();
        let s = random_state(&mut rng, &shape);
        let swapped = s.permute_subsystems(&[1, 0, 2]).unwrap();
        assert_eq!(swapped.shape().dims(), &[3, 2, 2]);
        let back = swapped.permute_subsystems(&[1, 0, 2]).unwrap();
        assert_eq!(back, s);
        let perm = [2, 0, 1];
        let op = random_hermitian(&mut rng, &shape);
        let p = op.permute_subsystems(&perm).unwrap();
        assert_eq!(p.permute_subsystems(&inverse_permutation(&perm)).unwrap(), op);
        assert_eq!(s.permute_subsystems(&[0, 1, 2]).unwrap(), s);
        assert!((p.trace() - op.trace()).abs() < 1e-12);
        assert!((swapped.norm() - s.norm()).abs() < 1e-14);
    }

    #[test]
    fn non_bijective_permutation_rejected() {
        let s = PureState::basis(SystemShape::qubits(3), 0).unwrap();
        assert!(matches!(s.permute_subsystems(&[0, 0, 1]), Err(SqeError::InvalidArgument(_))));
        assert!(matches!(s.permute_subsystems(&[0, 1]), Err(SqeError::InvalidArgument(_))));
    }

    #[test]
    fn cluster_reordered_has_four_product_terms() {
        // order (1,3,2,4): |psi> = 1/2 (|++>|00> + |+->|01> + |-+>|11> + |-->|10>)
        let psi = cluster_state().permute_subsystems(&[0, 2, 1, 3]).unwrap();
        let (p, m, z, o) = (PureState::plus(), PureState::minus(), PureState::zero(), PureState::one());
        let terms = [[&p, &p, &z, &z], [&p, &m, &z, &o], [&m, &p, &o, &o], [&m, &m, &o, &z]];
        let mut sum = CVector::zeros(16);
        for t in terms {
            let prod = product_state(&[t[0].clone(), t[1].clone(), t[2].clone(), t[3].clone()]).unwrap();
            sum += prod.amplitudes().scale(0.5);
        }
        assert!((sum - psi.amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn trace_nothing_is_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shape = SystemShape::new(vec![2, 3, 2]).unwrap();
        let op = random_hermitian(&mut rng, &shape);
        let r = partial_trace(&op, &[0, 1, 2]).unwrap();
        assert_eq!(r, op);
    }

    #[test]
    fn partial_trace_of_cluster_on_qubits_1_and_3() {
        let l = cluster_state().projector();
        let r = partial_trace(&l, &[0, 2]).unwrap();
        let expected = CMatrix::identity(4, 4).scale(0.25);
        assert!((r.matrix() - expected).norm() < 1e-15);
    }

    #[test]
    fn partial_trace_preserves_trace_against_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shape = SystemShape::new(vec![2, 3, 2]).unwrap();
        for k in 0..10 {
            let op = random_hermitian(&mut rng, &shape);
            // direct summation oracle: the trace is the diagonal sum
            let direct: f64 = (0..12).map(|i| op.matrix()[(i, i)].re).sum();
            let keep: &[usize] = match k % 3 {
                0 => &[0],
                1 => &[1, 2],
                _ => &[2],
            };
            let r = partial_trace(&op, keep).unwrap();
            assert!((r.trace() - direct).abs() < 1e-12);
            assert!(hermiticity_defect(r.matrix()) < 1e-12);
        }
    }

    #[test]
    fn partial_trace_bad_index() {
        let op = HermitianOperator::identity(SystemShape::qubits(2));
        assert!(matches!(partial_trace(&op, &[2]), Err(SqeError::InvalidIndex(_))));
    }

    #[test]
    fn partial_inner_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = SystemShape::new(vec![2, 3, 2]).unwrap();
        let part = Partition::parse("1:2:3").unwrap();
        let parts: Vec<CVector> = [2, 2].iter().map(|&d| random_vector(&mut rng, d).normalize()).collect();
        let r = partial_inner(&parts, &HermitianOperator::identity(shape), &parts, &part, 1).unwrap();
        assert!((r - CMatrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn partial_inner_cluster_leaves_quarter_zero_projector() {
        let l = cluster_state().projector();
        let part = Partition::parse("1:2:3:4").unwrap();
        let parts: Vec<CVector> = [PureState::plus(), PureState::zero(), PureState::plus()]
            .into_iter()
            .map(PureState::into_amplitudes)
            .collect();
        let r = partial_inner(&parts, &l, &parts, &part, 3).unwrap();
        let mut expected = CMatrix::zeros(2, 2);
        expected[(0, 0)] = C64::new(0.25, 0.0);
        assert!((r - expected).norm() < 1e-15);
    }

    #[test]
    fn partial_inner_swap_gives_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shape = SystemShape::new(vec![2, 3, 2]).unwrap();
        let part = Partition::parse("1,3:2").unwrap();
        let op = random_hermitian(&mut rng, &shape);
        for _ in 0..5 {
            let a = vec![random_vector(&mut rng, 4)];
            let b = vec![random_vector(&mut rng, 4)];
            let ab = partial_inner(&a, &op, &b, &part, 1).unwrap();
            let ba = partial_inner(&b, &op, &a, &part, 1).unwrap();
            assert!((ab.adjoint() - ba).norm() < 1e-12);
        }
    }

    #[test]
    fn partial_inner_rejects_bad_dims() {
        let op = HermitianOperator::identity(SystemShape::qubits(3));
        let part = Partition::parse("1:2:3").unwrap();
        let parts = vec![CVector::zeros(2), CVector::zeros(3)];
        assert!(matches!(partial_inner(&parts, &op, &parts, &part, 0), Err(SqeError::InvalidShape(_))));
    }

    #[test]
    fn contraction_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = SystemShape::new(vec![2, 3, 2]).unwrap();
        let part = Partition::parse("1:2:3").unwrap();
        for _ in 0..5 {
            let op = random_hermitian(&mut rng, &shape);
            let vs: Vec<CVector> = [2, 3, 2].iter().map(|&d| random_vector(&mut rng, d).normalize()).collect();
            let full = product_state(
                &vs.iter()
                    .map(|v| PureState::new(SystemShape::new(vec![v.len()]).unwrap(), v.clone()).unwrap())
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            let direct = expectation(&op, &full).unwrap();
            let others = vec![vs[0].clone(), vs[2].clone()];
            let reduced = partial_inner(&others, &op, &others, &part, 1).unwrap();
            let via = vs[1].dotc(&(reduced * &vs[1]));
            assert!((via.re - direct).abs() < 1e-12 && via.im.abs() < 1e-12);
        }
    }

    #[test]
    fn expectation_examples() {
        let psi = cluster_state();
        let l = psi.projector();
        assert!((expectation(&l, &psi).unwrap() - 1.0).abs() < 1e-14);
        let mu = 0.4;
        let m = l.matrix().scale(1.0 - mu) + CMatrix::identity(16, 16).scale(mu / 16.0);
        let rho = DensityOperator::new(SystemShape::qubits(4), m).unwrap();
        assert!((expectation(&l, &rho).unwrap() - 0.625).abs() < 1e-14);
    }

    #[test]
    fn expectation_rejects_non_hermitian_residue() {
        let shape = SystemShape::qubits(1);
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = C64::new(0.0, 1.0);
        // skip validation on purpose to simulate a corrupted observable
        let bad = HermitianOperator { shape: shape.clone(), matrix: m };
        let s = PureState::from_real(shape, &[std::f64::consts::FRAC_1_SQRT_2; 2]).unwrap();
        assert!(matches!(expectation(&bad, &s), Err(SqeError::NumericalInconsistency(_))));
    }

    #[test]
    fn density_validation() {
        let shape = SystemShape::qubits(1);
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(1.5, 0.0), C64::new(-0.5, 0.0)]));
        assert!(DensityOperator::new(shape, m).is_err());
    }
}
