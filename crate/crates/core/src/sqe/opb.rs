use std::collections::HashMap;
use std::f64::consts::PI;

use super::{Method, SolverOptions, SpinorDecomposition, SqeSolution};
use crate::error::{Result, SqeError};
use crate::partition::Partition;
use crate::schmidt::bipartite_schmidt;
use crate::tensor::{permute_matrix, permute_vector, CMatrix, CVector, HermitianOperator, PureState, C64};

const OPB_TOL: f64 = 1e-10;
const COEFF_TOL: f64 = 1e-12;
/// Local-basis search is skipped above this many sites.
const MAX_BASIS_SEARCH_SITES: usize = 10;
/// Pairwise checks are skipped for expansions with more terms than this.
const MAX_CHECKED_TERMS: usize = 256;

/// One term `kappa |b^(1), ..., b^(n)>` of a product expansion, factors normalized
/// and listed in party order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductTerm {
    pub coefficient: C64,
    pub factors: Vec<CVector>,
}

impl ProductTerm {
    pub fn product(&self) -> CVector {
        let mut v = self.factors[0].clone();
        for f in &self.factors[1..] {
            v = v.kronecker(f);
        }
        v * self.coefficient
    }
}

/// True when, for every party `q`, the products of all other factors are
/// pairwise orthonormal across terms.
pub fn detect_opb(terms: &[ProductTerm], partition: &Partition) -> bool {
    let n = partition.num_blocks();
    if terms.is_empty() || terms.iter().any(|t| t.factors.len() != n) {
        return false;
    }
    let dims: Vec<usize> = terms[0].factors.iter().map(|f| f.len()).collect();
    if terms.iter().any(|t| t.factors.iter().map(|f| f.len()).ne(dims.iter().copied())) {
        return false;
    }
    for k in 0..terms.len() {
        for k2 in k..terms.len() {
            let overlaps: Vec<C64> = (0..n).map(|p| terms[k].factors[p].dotc(&terms[k2].factors[p])).collect();
            for q in 0..n {
                let prod: C64 = (0..n).filter(|&p| p != q).map(|p| overlaps[p]).product();
                let target = if k == k2 { 1.0 } else { 0.0 };
                if (prod - C64::new(target, 0.0)).norm() > OPB_TOL {
                    return false;
                }
            }
        }
    }
    true
}

fn assemble_terms(terms: &[ProductTerm]) -> CVector {
    let mut v = terms[0].product();
    for t in &terms[1..] {
        v += t.product();
    }
    v
}

fn sorted_terms(terms: &[ProductTerm]) -> Vec<ProductTerm> {
    let mut t = terms.to_vec();
    t.sort_by(|a, b| b.coefficient.norm().total_cmp(&a.coefficient.norm()));
    t
}

/// `sum_{k <= r} |kappa_k|^2` for terms sorted by decreasing weight.
pub(crate) fn opb_value(terms: &[ProductTerm], r: usize) -> f64 {
    sorted_terms(terms).iter().take(r).map(|t| t.coefficient.norm_sqr()).sum()
}

/// Closed-form solution for `L = |psi><psi|` given an orthonormal product
/// expansion of `psi` in the party order of `partition`.
pub fn solve_opb(l: &HermitianOperator, partition: &Partition, terms: &[ProductTerm], r: usize) -> Result<SqeSolution> {
    if r < 1 {
        return Err(SqeError::InvalidArgument("r must be at least 1".into()));
    }
    let dims = partition.party_dims(l.shape())?;
    if !detect_opb(terms, partition) {
        return Err(SqeError::StructureNotApplicable("terms do not form an orthonormal product basis".into()));
    }
    if terms[0].factors.iter().map(|f| f.len()).ne(dims.iter().copied()) {
        return Err(SqeError::InvalidShape("term factors do not match party dimensions".into()));
    }
    let lm = permute_matrix(l.shape(), l.matrix(), &partition.site_order())?;
    let psi = assemble_terms(terms);
    let purity: f64 = lm.iter().map(|z| z.norm_sqr()).sum();
    if (psi.norm() - 1.0).abs() > 1e-8 || (&lm * &psi - &psi).norm() > 1e-8 || (purity - 1.0).abs() > 1e-8 {
        return Err(SqeError::StructureNotApplicable("operator is not the projector onto the expanded state".into()));
    }
    let terms = sorted_terms(terms);
    let used = r.min(terms.len());
    let g: f64 = terms[..used].iter().map(|t| t.coefficient.norm_sqr()).sum();
    let mut rows: Vec<Vec<CVector>> = vec![Vec::with_capacity(r); dims.len()];
    for k in 0..r {
        for (q, d) in dims.iter().enumerate() {
            let v = if k < used {
                let f = terms[k].factors[q].clone();
                if q == 0 {
                    f * (terms[k].coefficient / g.sqrt())
                } else {
                    f
                }
            } else {
                CVector::zeros(*d)
            };
            rows[q].push(v);
        }
    }
    let spinor = SpinorDecomposition::new(partition.clone(), dims, rows)?;
    let (residual_norm, orth) = super::residual::residual_block_order(&lm, &spinor, g);
    Ok(SqeSolution {
        g,
        spinor,
        residual_norm,
        residual_orthogonality: orth,
        converged: true,
        restarts_used: 0,
        iterations: 0,
        method: Method::ClosedFormOpb,
        trace: vec![g],
    })
}

fn fourier(d: usize) -> CMatrix {
    let s = 1.0 / (d as f64).sqrt();
    CMatrix::from_fn(d, d, |j, k| C64::from_polar(s, 2.0 * PI * (j * k) as f64 / d as f64))
}

/// Applies `m` to site `site` of a row-major vector.
fn apply_site(v: &CVector, dims: &[usize], site: usize, m: &CMatrix) -> CVector {
    let d = dims[site];
    let inner: usize = dims[site + 1..].iter().product();
    let outer: usize = dims[..site].iter().product();
    let mut out = CVector::zeros(v.len());
    for o in 0..outer {
        for a in 0..d {
            for b in 0..d {
                let c = m[(a, b)];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                for i in 0..inner {
                    out[(o * d + a) * inner + i] += c * v[(o * d + b) * inner + i];
                }
            }
        }
    }
    out
}

#[derive(Clone)]
struct WorkTerm {
    coefficient: C64,
    factors: Vec<CVector>,
    ids: Vec<usize>,
}

fn merge_along(terms: &[WorkTerm], q: usize, next_id: &mut usize) -> Vec<WorkTerm> {
    let mut order: Vec<Vec<usize>> = Vec::new();
    let mut groups: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (k, t) in terms.iter().enumerate() {
        let key: Vec<usize> = t.ids.iter().enumerate().filter(|&(p, _)| p != q).map(|(_, &i)| i).collect();
        let slot = *groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            members.push(Vec::new());
            members.len() - 1
        });
        members[slot].push(k);
    }
    let mut out = Vec::with_capacity(members.len());
    for group in members {
        if group.len() == 1 {
            out.push(terms[group[0]].clone());
            continue;
        }
        let mut v = CVector::zeros(terms[group[0]].factors[q].len());
        for &k in &group {
            v += &terms[k].factors[q] * terms[k].coefficient;
        }
        let norm = v.norm();
        if norm < COEFF_TOL {
            continue;
        }
        let mut t = terms[group[0]].clone();
        t.coefficient = C64::new(norm, 0.0);
        t.factors[q] = v.unscale(norm);
        t.ids[q] = *next_id;
        *next_id += 1;
        out.push(t);
    }
    out
}

/// Sequences of distinct parties to merge along, shortest first.
fn merge_sequences(n: usize) -> Vec<Vec<usize>> {
    let max_len = if n <= 4 { n } else { 2 };
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for q in 0..n {
                if !seq.contains(&q) {
                    let mut s: Vec<usize> = seq.clone();
                    s.push(q);
                    next.push(s);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Orthonormal product expansions of `psi` found by a canonical search: the
/// Schmidt form for two parties, otherwise expansions in every product of
/// per-site computational or Fourier bases, with terms that agree on all but
/// one party merged along that party.
pub fn find_opb_decompositions(psi: &PureState, partition: &Partition) -> Result<Vec<Vec<ProductTerm>>> {
    let psi = psi.normalized()?;
    let shape = psi.shape();
    let dims = partition.party_dims(shape)?;
    let n = partition.num_blocks();
    if n == 2 {
        let sd = bipartite_schmidt(&psi, partition)?;
        let terms = (0..sd.rank)
            .map(|k| ProductTerm {
                coefficient: C64::new(sd.coefficients[k], 0.0),
                factors: vec![sd.left_vectors[k].clone(), sd.right_vectors[k].clone()],
            })
            .collect();
        return Ok(vec![terms]);
    }
    if n < 2 {
        return Ok(vec![]);
    }
    let site_dims = shape.dims().to_vec();
    let num_sites = site_dims.len();
    let choices: usize = if num_sites <= MAX_BASIS_SEARCH_SITES { 1 << num_sites } else { 1 };
    let order = partition.site_order();
    let block_shape = shape.permuted(&order)?;
    let sequences = merge_sequences(n);
    let mut found = Vec::new();
    for mask in 0..choices {
        let bases: Vec<CMatrix> =
            (0..num_sites)
                .map(|s| {
                    if mask >> s & 1 == 1 {
                        fourier(site_dims[s])
                    } else {
                        CMatrix::identity(site_dims[s], site_dims[s])
                    }
                })
                .collect();
        let mut coeffs = psi.amplitudes().clone();
        for (s, b) in bases.iter().enumerate() {
            coeffs = apply_site(&coeffs, &site_dims, s, &b.adjoint());
        }
        let coeffs = permute_vector(shape, &coeffs, &order)?;
        // expand into terms
        let mut ids: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let mut terms = Vec::new();
        for (flat, &c) in coeffs.iter().enumerate() {
            if c.norm() < COEFF_TOL {
                continue;
            }
            let multi = block_shape.multi_index(flat);
            let mut factors = Vec::with_capacity(n);
            let mut term_ids = Vec::with_capacity(n);
            let mut pos = 0;
            for (q, block) in partition.blocks().iter().enumerate() {
                let labels: Vec<usize> = multi[pos..pos + block.len()].to_vec();
                let mut f = CVector::from_element(1, C64::new(1.0, 0.0));
                for (&site, &label) in block.iter().zip(&labels) {
                    f = f.kronecker(&bases[site].column(label).into_owned());
                }
                pos += block.len();
                let next = ids.len();
                term_ids.push(*ids.entry((q, labels)).or_insert(next));
                factors.push(f);
            }
            terms.push(WorkTerm { coefficient: c, factors, ids: term_ids });
        }
        if terms.is_empty() {
            continue;
        }
        for seq in &sequences {
            let mut next_id = ids.len();
            let mut current = terms.clone();
            for &q in seq {
                current = merge_along(&current, q, &mut next_id);
            }
            if current.is_empty() || current.len() > MAX_CHECKED_TERMS {
                continue;
            }
            let product_terms: Vec<ProductTerm> =
                current.into_iter().map(|t| ProductTerm { coefficient: t.coefficient, factors: t.factors }).collect();
            debug_assert!(product_terms.iter().all(|t| t.factors.iter().zip(&dims).all(|(f, d)| f.len() == *d)));
            if detect_opb(&product_terms, partition) {
                found.push(sorted_terms(&product_terms));
            }
        }
    }
    Ok(found)
}

/// The best closed-form value at rank `r` over all detected expansions.
pub(crate) fn best_opb(
    l: &HermitianOperator,
    psi: &PureState,
    partition: &Partition,
    r: usize,
    _opts: &SolverOptions,
) -> Result<Option<SqeSolution>> {
    let decomps = find_opb_decompositions(psi, partition)?;
    let best = decomps.iter().max_by(|a, b| opb_value(a, r).total_cmp(&opb_value(b, r)));
    match best {
        Some(terms) => Ok(Some(solve_opb(l, partition, terms, r)?)),
        None => Ok(None),
    }
}
