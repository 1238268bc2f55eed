#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use sqe_core::tensor::expectation;
use sqe_core::{CMatrix, CVector, HermitianOperator, PureState, SystemShape, C64};

pub fn gauss<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_state<R: Rng>(rng: &mut R, shape: &SystemShape) -> PureState {
    let v = CVector::from_fn(shape.total_dim(), |_, _| gauss(rng));
    PureState::new(shape.clone(), v.normalize()).unwrap()
}

pub fn random_hermitian<R: Rng>(rng: &mut R, shape: &SystemShape) -> HermitianOperator {
    let n = shape.total_dim();
    let m = CMatrix::from_fn(n, n, |_, _| gauss(rng));
    HermitianOperator::new(shape.clone(), (&m + m.adjoint()).scale(0.5)).unwrap()
}

pub fn random_unitary<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| gauss(rng)).qr().q()
}

fn qubit(th: f64, ph: f64) -> CVector {
    CVector::from_vec(vec![C64::new(th.cos(), 0.0), C64::from_polar(th.sin(), ph)])
}

/// Largest `<a,b|L|a,b>` over product qubit states, by a 4-angle grid that
/// zooms in around the best point.
pub fn product_grid_max(l: &HermitianOperator) -> f64 {
    let eval = |x: &[f64; 4]| {
        let s = PureState::new(SystemShape::qubits(2), qubit(x[0], x[1]).kronecker(&qubit(x[2], x[3]))).unwrap();
        expectation(l, &s).unwrap()
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let pi = std::f64::consts::PI;
    let mut center = [half_pi / 2.0, pi, half_pi / 2.0, pi];
    let mut width = [half_pi, 2.0 * pi, half_pi, 2.0 * pi];
    let mut best = f64::NEG_INFINITY;
    let n = 16;
    for _ in 0..12 {
        let mut arg = center;
        for i in 0..n * n * n * n {
            let idx = [i / (n * n * n), i / (n * n) % n, i / n % n, i % n];
            let x: [f64; 4] = std::array::from_fn(|k| center[k] + width[k] * (idx[k] as f64 / (n - 1) as f64 - 0.5));
            let v = eval(&x);
            if v > best {
                best = v;
                arg = x;
            }
        }
        center = arg;
        width = width.map(|w| w / 4.0);
    }
    best
}
