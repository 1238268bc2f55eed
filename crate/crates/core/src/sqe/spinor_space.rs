use super::SpinorDecomposition;
use crate::error::{Result, SqeError};
use crate::tensor::{permute_matrix, CVector, HermitianOperator, C64};

/// Largest `dim(H) * r^n` accepted by [`spinor_space_expectation_check`].
pub const SPINOR_SPACE_LIMIT: usize = 1 << 20;

/// Evaluates `<a^(1), ..., a^(n)| L (x) s s^† |a^(1), ..., a^(n)>` with
/// `s = sum_i e_i^(x)n`, where each spinor `|a^(q)>` lives in `H_q (x) C^r`,
/// next to the plain `<phi|L|phi>` of the assembled state. Returns `(lhs, rhs)`.
pub fn spinor_space_expectation_check(l: &HermitianOperator, spinor: &SpinorDecomposition) -> Result<(f64, f64)> {
    let partition = spinor.partition();
    let dims = partition.party_dims(l.shape())?;
    if dims != spinor.party_dims() {
        return Err(SqeError::InvalidShape("spinor does not match operator".into()));
    }
    let r = spinor.rank();
    let n = spinor.num_parties();
    let total = l.shape().total_dim();
    let size =
        r.checked_pow(n as u32).and_then(|x| x.checked_mul(total)).filter(|&x| x <= SPINOR_SPACE_LIMIT).ok_or_else(
            || SqeError::Limit(format!("spinor space of {total} x {r}^{n} exceeds {SPINOR_SPACE_LIMIT}")),
        )?;

    // |A> = (x)_q |a^(q)>, each factor indexed (x_q, i_q)
    let mut a = CVector::from_element(1, C64::new(1.0, 0.0));
    for (q, &d) in dims.iter().enumerate() {
        let factor = CVector::from_fn(d * r, |k, _| spinor.party(q)[k % r][k / r]);
        a = a.kronecker(&factor);
    }
    debug_assert_eq!(a.len(), size);

    // contract the spinor indices with s: B[x] = sum_{i_1..i_n} s[i] A[x_1, i_1, ..., x_n, i_n]
    let mut b = CVector::zeros(total);
    let mut xs = vec![0usize; n];
    for (x_flat, bx) in b.iter_mut().enumerate() {
        let mut rem = x_flat;
        for q in (0..n).rev() {
            xs[q] = rem % dims[q];
            rem /= dims[q];
        }
        let mut acc = C64::new(0.0, 0.0);
        for i_multi in 0..r.pow(n as u32) {
            let mut is = vec![0usize; n];
            let mut rem = i_multi;
            for q in (0..n).rev() {
                is[q] = rem % r;
                rem /= r;
            }
            if is.iter().any(|&i| i != is[0]) {
                continue;
            }
            let mut idx = 0;
            for q in 0..n {
                idx = idx * dims[q] * r + xs[q] * r + is[q];
            }
            acc += a[idx];
        }
        *bx = acc;
    }
    let lm = permute_matrix(l.shape(), l.matrix(), &partition.site_order())?;
    let lhs = b.dotc(&(&lm * &b)).re;

    let phi = spinor.assemble(l.shape())?;
    let rhs = phi.amplitudes().dotc(&(l.matrix() * phi.amplitudes())).re;
    Ok((lhs, rhs))
}
