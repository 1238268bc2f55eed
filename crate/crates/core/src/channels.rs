//! Noise channels: global white noise, single-qubit amplitude loss and
//! collective Fock-basis phase diffusion.

use crate::error::{Result, SqeError};
use crate::tensor::{CMatrix, DensityOperator, SystemShape, C64};

/// Completeness tolerance for Kraus sets.
pub const KRAUS_TOL: f64 = 1e-12;
/// Allowed deviation of `sum |lambda_i|^2` from 1 without renormalization.
pub const NORM_TOL: f64 = 1e-12;
/// Default truncation for geometric GHZ coefficients.
pub const DEFAULT_TRUNCATION: usize = 40;

/// `mu / D * I + (1 - mu) * rho`.
pub fn white_noise(rho: &DensityOperator, mu: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(SqeError::InvalidArgument(format!("mu = {mu} outside [0, 1]")));
    }
    let d = rho.shape().total_dim();
    let m = rho.matrix().scale(1.0 - mu) + CMatrix::identity(d, d).scale(mu / d as f64);
    DensityOperator::new(rho.shape().clone(), m)
}

/// Kraus operators acting on one subsystem.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    target: usize,
    operators: Vec<CMatrix>,
}

impl KrausChannel {
    pub fn new(target: usize, operators: Vec<CMatrix>) -> Result<Self> {
        let d =
            operators.first().map(|e| e.nrows()).ok_or_else(|| SqeError::InvalidArgument("empty Kraus set".into()))?;
        if operators.iter().any(|e| e.nrows() != d || e.ncols() != d) {
            return Err(SqeError::InvalidShape(format!("Kraus operators must all be {d}x{d}")));
        }
        let sum = operators.iter().fold(CMatrix::zeros(d, d), |acc, e| acc + e.adjoint() * e);
        let defect = (sum - CMatrix::identity(d, d)).norm();
        if defect > KRAUS_TOL {
            return Err(SqeError::InvalidArgument(format!("Kraus set not trace preserving (defect {defect:e})")));
        }
        Ok(KrausChannel { target, operators })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    /// `I (x) E (x) I` on the full system.
    fn embed(&self, shape: &SystemShape, e: &CMatrix) -> CMatrix {
        let dims = shape.dims();
        let left: usize = dims[..self.target].iter().product();
        let right: usize = dims[self.target + 1..].iter().product();
        CMatrix::identity(left, left).kronecker(e).kronecker(&CMatrix::identity(right, right))
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        let shape = rho.shape();
        if self.target >= shape.len() {
            return Err(SqeError::InvalidIndex(format!("subsystem {} of {}", self.target, shape.len())));
        }
        let d = shape.dims()[self.target];
        if self.operators[0].nrows() != d {
            return Err(SqeError::InvalidShape(format!(
                "Kraus operators of size {} on a subsystem of dimension {d}",
                self.operators[0].nrows()
            )));
        }
        let n = shape.total_dim();
        let mut out = CMatrix::zeros(n, n);
        for e in &self.operators {
            let big = self.embed(shape, e);
            out += &big * rho.matrix() * big.adjoint();
        }
        let out = (&out + out.adjoint()).scale(0.5);
        DensityOperator::new(shape.clone(), out)
    }
}

/// Beam-splitter loss on a qubit with `|0>` the vacuum: `E0 = diag(1, t)`,
/// `E1 = sqrt(1 - t^2) |0><1|`.
pub fn amplitude_loss_channel(subsystem: usize, t: f64) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&t) {
        return Err(SqeError::InvalidArgument(format!("transmission {t} outside [0, 1]")));
    }
    let z = C64::new(0.0, 0.0);
    let e0 = CMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), z, z, C64::new(t, 0.0)]);
    let e1 = CMatrix::from_row_slice(2, 2, &[z, C64::new((1.0 - t * t).sqrt(), 0.0), z, z]);
    KrausChannel::new(subsystem, vec![e0, e1])
}

pub fn amplitude_loss(rho: &DensityOperator, subsystem: usize, t: f64) -> Result<DensityOperator> {
    let dims = rho.shape().dims();
    match dims.get(subsystem) {
        None => return Err(SqeError::InvalidIndex(format!("subsystem {subsystem} of {}", dims.len()))),
        Some(&d) if d != 2 => {
            return Err(SqeError::InvalidArgument(format!(
                "loss needs a qubit, subsystem {subsystem} has dimension {d}"
            )))
        }
        _ => {}
    }
    amplitude_loss_channel(subsystem, t)?.apply(rho)
}

/// Total phase-diffusion variance `||sigma||^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DephasingSpec {
    sigma_sq_total: f64,
}

impl DephasingSpec {
    pub fn new(sigma_sq_total: f64) -> Result<Self> {
        if !(sigma_sq_total >= 0.0) || !sigma_sq_total.is_finite() {
            return Err(SqeError::InvalidArgument(format!("||sigma||^2 = {sigma_sq_total} must be finite and >= 0")));
        }
        Ok(DephasingSpec { sigma_sq_total })
    }

    /// From the per-site widths `sigma_q`.
    pub fn from_sites(sigmas: &[f64]) -> Result<Self> {
        DephasingSpec::new(sigmas.iter().map(|s| s * s).sum())
    }

    pub fn sigma_sq_total(&self) -> f64 {
        self.sigma_sq_total
    }
}

/// Dephases the coefficient matrix `rho_ij` of a state on span{|i, ..., i>}.
pub fn fock_dephase(coeffs: &CMatrix, spec: DephasingSpec) -> CMatrix {
    let s = spec.sigma_sq_total;
    CMatrix::from_fn(coeffs.nrows(), coeffs.ncols(), |i, j| {
        let k = i as f64 - j as f64;
        coeffs[(i, j)] * (-s * k * k / 2.0).exp()
    })
}

/// Dense form of a correlated coefficient matrix on `n` sites of dimension `d`.
pub fn expand_correlated(coeffs: &CMatrix, n: usize) -> Result<DensityOperator> {
    let d = coeffs.nrows();
    if coeffs.ncols() != d || d == 0 || n == 0 {
        return Err(SqeError::InvalidShape("need a nonempty square coefficient matrix and n >= 1".into()));
    }
    let shape = SystemShape::new(vec![d; n])?;
    let total = shape.total_dim();
    let step: usize = (0..n).map(|k| d.pow(k as u32)).sum();
    let mut m = CMatrix::zeros(total, total);
    for i in 0..d {
        for j in 0..d {
            m[(i * step, j * step)] = coeffs[(i, j)];
        }
    }
    DensityOperator::new(shape, m)
}

/// Independent Gaussian phase diffusion on every site of a dense state:
/// `<x|rho|y>` is damped by `exp(-sum_q sigma_q^2 (x_q - y_q)^2 / 2)`.
pub fn dephase_dense(rho: &DensityOperator, sigmas: &[f64]) -> Result<DensityOperator> {
    let shape = rho.shape();
    if sigmas.len() != shape.len() {
        return Err(SqeError::InvalidArgument(format!("{} widths for {} sites", sigmas.len(), shape.len())));
    }
    let idx: Vec<Vec<usize>> = (0..shape.total_dim()).map(|f| shape.multi_index(f)).collect();
    let n = idx.len();
    let m = CMatrix::from_fn(n, n, |a, b| {
        let e: f64 = sigmas
            .iter()
            .zip(idx[a].iter().zip(&idx[b]))
            .map(|(s, (&x, &y))| {
                let k = x as f64 - y as f64;
                s * s * k * k
            })
            .sum();
        rho.matrix()[(a, b)] * (-e / 2.0).exp()
    });
    DensityOperator::new(shape.clone(), m)
}

/// Coefficients `lambda_i` of a GHZ-type state `sum_i lambda_i |i, ..., i>`.
#[derive(Clone, Debug, PartialEq)]
pub enum GhzCoefficients {
    /// `lambda_i = 2^(-(1+i)/2)`.
    Geometric,
    Explicit(Vec<f64>),
}

impl GhzCoefficients {
    /// The first `d` coefficients (fewer for a shorter explicit list).
    pub fn truncated(&self, d: usize) -> Vec<f64> {
        match self {
            GhzCoefficients::Geometric => (0..d).map(|i| 2f64.powf(-(1.0 + i as f64) / 2.0)).collect(),
            GhzCoefficients::Explicit(v) => v.iter().take(d).copied().collect(),
        }
    }

    /// `sum_{i >= d} |lambda_i|^2`.
    pub fn tail_weight(&self, d: usize) -> f64 {
        match self {
            GhzCoefficients::Geometric => 2f64.powi(-(d as i32)),
            GhzCoefficients::Explicit(v) => v.iter().skip(d).map(|x| x * x).sum(),
        }
    }

    /// `g_r = sum_{i < r} |lambda_i|^2`, unnormalized.
    pub fn level(&self, r: usize) -> f64 {
        match self {
            GhzCoefficients::Geometric => 1.0 - 2f64.powi(-(r as i32)),
            GhzCoefficients::Explicit(v) => v.iter().take(r).map(|x| x * x).sum(),
        }
    }
}

/// Truncated value of `Tr[rho L]` for the dephased GHZ state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GhzValue {
    pub value: f64,
    /// Bound on the omitted terms, `2 sum_{i >= d} |lambda_i|^2`.
    pub tail_bound: f64,
    pub truncation: usize,
}

/// `sum_ij |lambda_i|^2 |lambda_j|^2 exp(-||sigma||^2 (i-j)^2 / 2)` over `i, j < d`.
pub fn ghz_witness_value(coeffs: &GhzCoefficients, sigma_sq: f64, d: usize, renormalize: bool) -> Result<GhzValue> {
    let spec = DephasingSpec::new(sigma_sq)?;
    let mut lambdas = coeffs.truncated(d);
    if lambdas.is_empty() {
        return Err(SqeError::InvalidArgument("no coefficients".into()));
    }
    let norm: f64 = lambdas.iter().map(|x| x * x).sum();
    let mut tail = coeffs.tail_weight(d);
    if renormalize {
        if !(norm > 0.0) {
            return Err(SqeError::InvalidArgument("coefficients vanish".into()));
        }
        lambdas.iter_mut().for_each(|x| *x /= norm.sqrt());
        tail /= norm;
    } else if (norm - 1.0).abs() > NORM_TOL {
        return Err(SqeError::InvalidArgument(format!(
            "sum |lambda_i|^2 = {norm} over {} terms; request renormalization",
            lambdas.len()
        )));
    }
    // rho = |GHZ><GHZ| in coefficient form, L the same projector
    let n = lambdas.len();
    let rho = CMatrix::from_fn(n, n, |i, j| C64::new(lambdas[i] * lambdas[j], 0.0));
    let rho = fock_dephase(&rho, spec);
    let mut value = 0.0;
    for i in 0..n {
        for j in 0..n {
            value += lambdas[i] * rho[(i, j)].re * lambdas[j];
        }
    }
    Ok(GhzValue { value, tail_bound: 2.0 * tail, truncation: n })
}
