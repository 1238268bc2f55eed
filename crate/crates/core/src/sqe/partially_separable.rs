use super::blocks::{block, party_block_basis};
use super::gmax::{g_r_max, rank_one_state, top_eigen_solution};
use super::residual::residual_block_order;
use super::{Method, SolverOptions, SpinorDecomposition, SqeSolution};
use crate::error::{Result, SqeError};
use crate::partition::Partition;
use crate::schmidt::schmidt_of_vector;
use crate::tensor::{permute_matrix, permute_vector, CMatrix, CVector, HermitianOperator, PureState, SystemShape, C64};

const WEIGHT_TOL: f64 = 1e-14;
const RANK_ONE_TOL: f64 = 1e-9;

/// Solves the SQE problem by removing parties in whose basis the operator is
/// block diagonal. Two reductions are tried:
///
/// * `L = sum_i K_i (x) |i><i|` on some party `t`: `g_r = max_i g_r(K_i)` on the
///   remaining parties;
/// * `L = |psi><psi|` whose reduction `Tr_t L` has that form on a party `m`
///   with rank-one blocks: branches are combined over all ways of splitting
///   the rank among them.
pub fn solve_partially_separable(l: &HermitianOperator, partition: &Partition, r: usize) -> Result<SqeSolution> {
    solve_partially_separable_with(l, partition, r, &SolverOptions::default())
}

pub(crate) fn solve_partially_separable_with(
    l: &HermitianOperator,
    partition: &Partition,
    r: usize,
    opts: &SolverOptions,
) -> Result<SqeSolution> {
    if r < 1 {
        return Err(SqeError::InvalidArgument("r must be at least 1".into()));
    }
    let n = partition.num_blocks();
    partition.party_dims(l.shape())?;
    let sub_opts = SolverOptions { always_heuristic: false, ..opts.clone() };
    let mut best: Option<SqeSolution> = None;
    let mut consider = |cand: Option<SqeSolution>| {
        if let Some(c) = cand {
            if best.as_ref().is_none_or(|b| c.g > b.g + 1e-12) {
                best = Some(c);
            }
        }
    };
    if n >= 2 {
        if let Some((weight, psi)) = rank_one_state(l) {
            for t in 0..n {
                for m in 0..n {
                    if t != m {
                        let cand = purification_route(&psi, partition, t, m, r, &sub_opts)?;
                        consider(cand.map(|s| rescale(s, weight, l)));
                    }
                }
            }
        }
        for t in 0..n {
            consider(mixture_route(l, partition, t, r, &sub_opts)?);
        }
    }
    best.ok_or_else(|| SqeError::StructureNotApplicable(format!("no block structure found for {}", partition.label())))
}

fn rescale(mut s: SqeSolution, weight: f64, l: &HermitianOperator) -> SqeSolution {
    if (weight - 1.0).abs() > 1e-15 {
        s.g *= weight;
        for x in &mut s.trace {
            *x *= weight;
        }
        if let Ok(lm) = permute_matrix(l.shape(), l.matrix(), &s.partition().site_order()) {
            (s.residual_norm, s.residual_orthogonality) = residual_block_order(&lm, &s.spinor, s.g);
        }
    }
    s
}

fn finish(l_block: &CMatrix, spinor: SpinorDecomposition, g: f64) -> SqeSolution {
    let (residual_norm, orth) = residual_block_order(l_block, &spinor, g);
    SqeSolution {
        g,
        spinor,
        residual_norm,
        residual_orthogonality: orth,
        converged: true,
        restarts_used: 0,
        iterations: 0,
        method: Method::PartiallySeparable,
        trace: vec![g],
    }
}

/// Parties kept by `without_parties(drop)`, in order.
fn kept_parties(n: usize, drop: &[usize]) -> Vec<usize> {
    (0..n).filter(|q| !drop.contains(q)).collect()
}

/// Sites of every party except `drop`, ascending.
fn rest_sites(partition: &Partition, drop: &[usize]) -> Vec<usize> {
    let mut s: Vec<usize> = kept_parties(partition.num_blocks(), drop)
        .into_iter()
        .flat_map(|q| partition.blocks()[q].iter().copied())
        .collect();
    s.sort_unstable();
    s
}

/// Solution on a sub-partition, falling back to the plain eigenproblem for a single party.
fn sub_solve(k: &HermitianOperator, sub: &Partition, r: usize, opts: &SolverOptions) -> Result<SqeSolution> {
    if sub.is_trivial() {
        return top_eigen_solution(k, sub, r);
    }
    Ok(g_r_max(k, sub, r, opts)?.solution)
}

fn mixture_route(
    l: &HermitianOperator,
    partition: &Partition,
    t: usize,
    r: usize,
    opts: &SolverOptions,
) -> Result<Option<SqeSolution>> {
    let n = partition.num_blocks();
    let shape = l.shape();
    let dims = partition.party_dims(shape)?;
    let rest = rest_sites(partition, &[t]);
    let mut perm = partition.blocks()[t].clone();
    perm.extend(&rest);
    let lm = permute_matrix(shape, l.matrix(), &perm)?;
    let Some(basis) = party_block_basis(&lm, dims[t]) else {
        return Ok(None);
    };
    let (sub, _) = partition.without_parties(&[t]).expect("at least two parties");
    let sub_shape = shape.select(&rest)?;
    let mut best: Option<(SqeSolution, usize)> = None;
    for (i, f) in basis.iter().enumerate() {
        let k = block(&lm, f, f, dims[t]);
        let k = HermitianOperator::new(sub_shape.clone(), (&k + k.adjoint()).scale(0.5))?;
        let sol = match sub_solve(&k, &sub, r, opts) {
            Ok(s) => s,
            Err(SqeError::SolverFailure { .. }) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|(b, _)| sol.g > b.g + 1e-12) {
            best = Some((sol, i));
        }
    }
    let Some((sol, i)) = best else {
        return Ok(None);
    };
    let kept = kept_parties(n, &[t]);
    let mut rows: Vec<Vec<CVector>> = vec![Vec::new(); n];
    for row in 0..sol.rank() {
        rows[t].push(basis[i].clone());
        for (j, &q) in kept.iter().enumerate() {
            rows[q].push(sol.spinor.party(j)[row].clone());
        }
    }
    let spinor = SpinorDecomposition::new(partition.clone(), dims, rows)?;
    let l_block = permute_matrix(shape, l.matrix(), &partition.site_order())?;
    Ok(Some(finish(&l_block, spinor, sol.g)))
}

struct Branch {
    /// Weight `||Psi_i||^2` of the branch.
    weight: f64,
    t_vec: CVector,
    m_vec: CVector,
    /// Normalized state of the remaining parties.
    rest: CVector,
    /// Sub-solutions for ranks `1..`, stopping once the value saturates.
    sols: Vec<SubSolution>,
}

#[derive(Clone)]
struct SubSolution {
    g: f64,
    /// Per remaining party, the row vectors.
    rows: Vec<Vec<CVector>>,
}

impl Branch {
    fn value(&self, r: usize) -> f64 {
        if r == 0 {
            return 0.0;
        }
        let k = (r - 1).min(self.sols.len() - 1);
        self.weight * self.sols[k].g
    }

    fn sub(&self, r: usize) -> &SubSolution {
        &self.sols[(r - 1).min(self.sols.len() - 1)]
    }
}

fn branch_solutions(
    rest: &CVector,
    sub: Option<&(Partition, Vec<usize>)>,
    shape: &SystemShape,
    r: usize,
    opts: &SolverOptions,
) -> Result<Option<Vec<SubSolution>>> {
    match sub {
        None => Ok(Some(vec![SubSolution { g: 1.0, rows: vec![] }])),
        Some((p, _)) if p.is_trivial() => Ok(Some(vec![SubSolution { g: 1.0, rows: vec![vec![rest.clone()]] }])),
        Some((p, sites)) => {
            let sub_shape = shape.select(sites)?;
            let k = PureState::new(sub_shape, rest.clone())?.projector();
            let mut out = Vec::new();
            for rr in 1..=r {
                let sol = match sub_solve(&k, p, rr, opts) {
                    Ok(s) => s,
                    Err(SqeError::SolverFailure { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let rows = (0..p.num_blocks()).map(|q| sol.spinor.party(q).to_vec()).collect();
                let g = sol.g;
                out.push(SubSolution { g, rows });
                if g >= 1.0 - 1e-12 {
                    break;
                }
            }
            Ok(Some(out))
        }
    }
}

fn purification_route(
    psi: &PureState,
    partition: &Partition,
    t: usize,
    m: usize,
    r: usize,
    opts: &SolverOptions,
) -> Result<Option<SqeSolution>> {
    let n = partition.num_blocks();
    let shape = psi.shape();
    let dims = partition.party_dims(shape)?;
    let (dt, dm) = (dims[t], dims[m]);
    let rest = rest_sites(partition, &[t, m]);
    let mut perm = partition.blocks()[t].clone();
    perm.extend(&partition.blocks()[m]);
    perm.extend(&rest);
    let v = permute_vector(shape, psi.amplitudes(), &perm)?;
    let d_rest = v.len() / (dt * dm);
    let y = CMatrix::from_fn(dt, dm * d_rest, |a, bc| v[a * dm * d_rest + bc]);
    let reduced = y.transpose() * y.conjugate();
    let Some(basis) = party_block_basis(&reduced, dm) else {
        return Ok(None);
    };
    let sub = partition.without_parties(&[t, m]);
    let mut branches = Vec::new();
    for f in &basis {
        let psi_i = CVector::from_fn(dt * d_rest, |ac, _| {
            let (a, c) = (ac / d_rest, ac % d_rest);
            (0..dm).map(|b| f[b].conj() * v[(a * dm + b) * d_rest + c]).sum::<C64>()
        });
        let weight = psi_i.norm_squared();
        if weight < WEIGHT_TOL {
            continue;
        }
        let sd = schmidt_of_vector(&psi_i, dt, d_rest)?;
        if sd.coefficients.len() > 1 && sd.coefficients[1] > RANK_ONE_TOL * sd.coefficients[0] {
            return Ok(None);
        }
        branches.push((weight, sd.left_vectors[0].clone(), f.clone(), sd.right_vectors[0].clone()));
    }
    for i in 0..branches.len() {
        for j in i + 1..branches.len() {
            if branches[i].1.dotc(&branches[j].1).norm() > RANK_ONE_TOL {
                return Ok(None);
            }
        }
    }
    let mut full = Vec::with_capacity(branches.len());
    for (weight, t_vec, m_vec, rest_vec) in branches {
        let Some(sols) = branch_solutions(&rest_vec, sub.as_ref(), shape, r, opts)? else {
            return Ok(None);
        };
        full.push(Branch { weight, t_vec, m_vec, rest: rest_vec, sols });
    }
    if full.is_empty() {
        return Ok(None);
    }

    // knapsack over branches: best[j][c] = best value from the first j branches using rank c
    let b = full.len();
    let mut best = vec![vec![f64::NEG_INFINITY; r + 1]; b + 1];
    let mut choice = vec![vec![0usize; r + 1]; b + 1];
    best[0][0] = 0.0;
    for j in 0..b {
        for c in 0..=r {
            if best[j][c] == f64::NEG_INFINITY {
                continue;
            }
            for ri in 0..=(r - c) {
                let val = best[j][c] + full[j].value(ri);
                if val > best[j + 1][c + ri] + 1e-15 {
                    best[j + 1][c + ri] = val;
                    choice[j + 1][c + ri] = ri;
                }
            }
        }
    }
    let (mut c, _) =
        best[b]
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (c, &v)| if v > acc.1 + 1e-15 { (c, v) } else { acc });
    let mut alloc = vec![0usize; b];
    for j in (1..=b).rev() {
        alloc[j - 1] = choice[j][c];
        c -= choice[j][c];
    }

    // phi = sum_i beta_i |e_i, f_i, phi'_i>, beta = conj(c)/||c||, c_i = <psi|e_i, f_i, phi'_i>
    let kept = kept_parties(n, &[t, m]);
    let mut overlaps = Vec::new();
    for (br, &ri) in full.iter().zip(&alloc) {
        if ri == 0 {
            continue;
        }
        let s = br.sub(ri);
        let phi_rest = assemble_rows(&s.rows, br.rest.len());
        let norm = phi_rest.norm();
        overlaps.push(C64::new(br.weight.sqrt(), 0.0) * br.rest.dotc(&phi_rest) / norm);
    }
    let c_norm = overlaps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if c_norm < 1e-150 {
        return Ok(None);
    }
    let mut rows: Vec<Vec<CVector>> = vec![Vec::new(); n];
    let mut k = 0;
    for (br, &ri) in full.iter().zip(&alloc) {
        if ri == 0 {
            continue;
        }
        let s = br.sub(ri);
        let phi_rest_norm = assemble_rows(&s.rows, br.rest.len()).norm();
        let beta = overlaps[k].conj() / c_norm / phi_rest_norm;
        k += 1;
        let count = s.rows.first().map_or(1, |x| x.len());
        for row in 0..count {
            rows[t].push(&br.t_vec * beta);
            rows[m].push(br.m_vec.clone());
            for (j, &q) in kept.iter().enumerate() {
                rows[q].push(s.rows[j][row].clone());
            }
        }
    }
    let used = rows[t].len();
    for _ in used..r.max(used) {
        for (q, d) in dims.iter().enumerate() {
            rows[q].push(CVector::zeros(*d));
        }
    }
    let spinor = SpinorDecomposition::new(partition.clone(), dims, rows)?;
    let l_block = permute_matrix(shape, psi.projector().matrix(), &partition.site_order())?;
    Ok(Some(finish(&l_block, spinor, c_norm * c_norm)))
}

/// `sum_i (x)_q rows[q][i]` with an empty row list standing for the scalar 1.
fn assemble_rows(rows: &[Vec<CVector>], len: usize) -> CVector {
    if rows.is_empty() {
        return CVector::from_element(len.max(1), C64::new(1.0, 0.0));
    }
    let mut out = CVector::zeros(len);
    for i in 0..rows[0].len() {
        let mut v = rows[0][i].clone();
        for q in &rows[1..] {
            v = v.kronecker(&q[i]);
        }
        out += v;
    }
    out
}
