use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::{hermitian_eigen, CMatrix, CVector, C64};

/// Largest `d^2 * D^2` for which the commutant is computed.
const MAX_COMMUTANT_ENTRIES: usize = 1 << 20;
const NULL_TOL: f64 = 1e-9;
const OFF_DIAG_TOL: f64 = 1e-10;

/// For `op` on `C^d (x) C^(D/d)` (first factor leading), an orthonormal basis
/// `{|f_i>}` of the first factor with `(<f_i| (x) 1) op (|f_j> (x) 1) = 0` for
/// `i != j`. `None` when only scalars commute with `op` in that factor, or
/// when the problem is too large.
pub(crate) fn party_block_basis(op: &CMatrix, d: usize) -> Option<Vec<CVector>> {
    let n = op.nrows();
    if d < 2 || n % d != 0 {
        return None;
    }
    let rest = n / d;
    if d * d * n * n > MAX_COMMUTANT_ENTRIES {
        return None;
    }
    // column (c, e) of `a` is vec([E_ce (x) 1, op])
    let mut a = CMatrix::zeros(n * n, d * d);
    for c in 0..d {
        for e in 0..d {
            let col = c * d + e;
            for x in 0..rest {
                for row in 0..n {
                    // (E_ce (x) 1) op: row (c, x) takes row (e, x) of op
                    let v = op[(e * rest + x, row)];
                    a[((c * rest + x) * n + row, col)] += v;
                    // op (E_ce (x) 1): column (e, x) takes column (c, x) of op
                    let w = op[(row, c * rest + x)];
                    a[(row * n + e * rest + x, col)] -= w;
                }
            }
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t?;
    let s_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max).max(1.0);
    let null: Vec<CMatrix> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] < NULL_TOL * s_max)
        .map(|k| CMatrix::from_fn(d, d, |c, e| v_t[(k, c * d + e)].conj()))
        .collect();
    if null.len() < 2 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xb10c);
    let mut h = CMatrix::zeros(d, d);
    for x in &null {
        let herm = (x + x.adjoint()).scale(0.5);
        let anti = (x - x.adjoint()) * C64::new(0.0, -0.5);
        h += herm.scale(rng.random_range(-1.0..1.0)) + anti.scale(rng.random_range(-1.0..1.0));
    }
    let eig = hermitian_eigen(&(&h + h.adjoint()).scale(0.5));
    let basis: Vec<CVector> = (0..d).map(|k| eig.eigenvectors.column(k).into_owned()).collect();
    let scale = op.norm().max(1e-300);
    for i in 0..d {
        for j in 0..d {
            if i != j && block(op, &basis[i], &basis[j], d).norm() > OFF_DIAG_TOL * scale {
                return None;
            }
        }
    }
    Some(basis)
}

/// `(<f| (x) 1) op (|g> (x) 1)`.
pub(crate) fn block(op: &CMatrix, f: &CVector, g: &CVector, d: usize) -> CMatrix {
    let rest = op.nrows() / d;
    let mut out = CMatrix::zeros(rest, rest);
    for a in 0..d {
        if f[a] == C64::new(0.0, 0.0) {
            continue;
        }
        for b in 0..d {
            let c = f[a].conj() * g[b];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            out += op.view((a * rest, b * rest), (rest, rest)) * c;
        }
    }
    out
}
