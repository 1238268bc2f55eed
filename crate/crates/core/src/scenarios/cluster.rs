use crate::error::{Result, SqeError};
use crate::tensor::{product_state, PureState, SystemShape, C64};

/// The 4-qubit cluster state
/// `(|+,0,+,0> + |+,0,-,1> + |-,1,-,0> + |-,1,+,1>) / 2`.
pub fn cluster_state() -> PureState {
    let (p, m) = (PureState::plus(), PureState::minus());
    let (z, o) = (PureState::zero(), PureState::one());
    let terms = [[&p, &z, &p, &z], [&p, &z, &m, &o], [&m, &o, &m, &z], [&m, &o, &p, &o]];
    let mut amps = crate::tensor::CVector::zeros(16);
    for t in terms {
        let s = product_state(&t.map(|x| x.clone())).expect("qubit product");
        amps += s.amplitudes() * C64::new(0.5, 0.0);
    }
    PureState::new(SystemShape::qubits(4), amps).expect("16 amplitudes")
}

/// `sum_i lambda_i |i, ..., i>` on `n` sites of dimension `lambdas.len()`.
/// The coefficients are used as given.
pub fn ghz_state(n: usize, lambdas: &[f64]) -> Result<PureState> {
    let d = lambdas.len();
    if n == 0 || d == 0 {
        return Err(SqeError::InvalidArgument("need at least one site and one level".into()));
    }
    let shape = SystemShape::new(vec![d; n])?;
    let total = shape.total_dim();
    let mut amps = crate::tensor::CVector::zeros(total);
    // |i, ..., i> sits at i * (1 + d + ... + d^(n-1))
    let step: usize = (0..n).map(|k| d.pow(k as u32)).sum();
    for (i, &l) in lambdas.iter().enumerate() {
        amps[i * step] = C64::new(l, 0.0);
    }
    PureState::new(shape, amps)
}
