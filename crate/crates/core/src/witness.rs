//! Witnesses `W = g_r I - L`, certification of `Tr[rho L] > g_r`, and reports
//! over the partition lattice.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SqeError};
use crate::partition::{enumerate_partitions, Partition};
use crate::sqe::{g_r_max, Method, SolverOptions, EXACT_TOL};
use crate::tensor::{expectation, CMatrix, DensityOperator, HermitianOperator, C64};

/// Default slack in `Tr[rho L] > g_r + margin`.
pub const DEFAULT_MARGIN: f64 = 1e-9;
/// Allowed violation of the monotonicity checks when building a table.
const MONOTONE_TOL: f64 = 1e-8;

/// `g_r I - L`.
pub fn make_witness(l: &HermitianOperator, g_r: f64) -> Result<HermitianOperator> {
    if !g_r.is_finite() {
        return Err(SqeError::InvalidArgument(format!("g_r = {g_r} is not finite")));
    }
    let n = l.matrix().nrows();
    let w = CMatrix::identity(n, n) * C64::new(g_r, 0.0) - l.matrix();
    HermitianOperator::new(l.shape().clone(), w)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

fn hash_matrix(dims: &[usize], m: &CMatrix) -> String {
    let mut h = Sha256::new();
    for d in dims {
        h.update((*d as u64).to_le_bytes());
    }
    // row-major, as in the JSON files
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            h.update(m[(i, j)].re.to_le_bytes());
            h.update(m[(i, j)].im.to_le_bytes());
        }
    }
    hex(&h.finalize())
}

/// SHA-256 of the dimensions and matrix entries.
pub fn operator_hash(l: &HermitianOperator) -> String {
    hash_matrix(l.shape().dims(), l.matrix())
}

/// SHA-256 of a state's dimensions and matrix entries.
pub fn state_hash(rho: &DensityOperator) -> String {
    hash_matrix(rho.shape().dims(), rho.matrix())
}

/// One `(partition, r) -> g_r` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrEntry {
    pub partition: Partition,
    pub r: usize,
    pub g: f64,
    pub method: Method,
    /// `g` meets a rigorous upper bound and may be used for certification.
    pub exact: bool,
}

/// All `g_r` values of one test operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GRTable {
    pub operator_hash: String,
    pub entries: Vec<GrEntry>,
}

/// Largest Schmidt number possible for `partition`: `min_q prod_{p != q} d_p`.
pub fn max_rank(l: &HermitianOperator, partition: &Partition) -> Result<usize> {
    let dims = partition.party_dims(l.shape())?;
    let total: usize = dims.iter().product();
    Ok(dims.iter().map(|d| total / d).min().unwrap_or(1))
}

impl GRTable {
    /// Rows `r = 1, 2, ...` for every partition until `g_r` reaches the
    /// largest eigenvalue of `l` or `r` reaches the largest possible rank.
    pub fn build(l: &HermitianOperator, partitions: &[Partition], opts: &SolverOptions) -> Result<GRTable> {
        let lambda_max = l.max_eigenvalue();
        let rows: Vec<Result<Vec<GrEntry>>> = partitions
            .par_iter()
            .map(|p| {
                let cap = max_rank(l, p)?;
                let mut out = Vec::new();
                for r in 1..=cap {
                    let est = g_r_max(l, p, r, opts)?;
                    out.push(GrEntry { partition: p.clone(), r, g: est.g, method: est.method, exact: est.exact });
                    if est.g >= lambda_max - EXACT_TOL {
                        break;
                    }
                }
                Ok(out)
            })
            .collect();
        let mut entries = Vec::new();
        for row in rows {
            entries.extend(row?);
        }
        let table = GRTable { operator_hash: operator_hash(l), entries };
        table.check_monotone()?;
        Ok(table)
    }

    /// Table over every nontrivial partition of the operator's sites.
    pub fn for_operator(l: &HermitianOperator, opts: &SolverOptions) -> Result<GRTable> {
        let parts: Vec<Partition> =
            enumerate_partitions(l.shape().len())?.into_iter().filter(|p| !p.is_trivial()).collect();
        GRTable::build(l, &parts, opts)
    }

    /// Partitions in order of first appearance.
    pub fn partitions(&self) -> Vec<Partition> {
        let mut out: Vec<Partition> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.partition) {
                out.push(e.partition.clone());
            }
        }
        out
    }

    pub fn rows(&self, partition: &Partition) -> Vec<&GrEntry> {
        let mut rows: Vec<&GrEntry> = self.entries.iter().filter(|e| &e.partition == partition).collect();
        rows.sort_by_key(|e| e.r);
        rows
    }

    pub fn get(&self, partition: &Partition, r: usize) -> Option<&GrEntry> {
        self.entries.iter().find(|e| &e.partition == partition && e.r == r)
    }

    /// `g_r`, continuing the last row for `r` past the end of the table.
    pub fn value(&self, partition: &Partition, r: usize) -> Option<f64> {
        let rows = self.rows(partition);
        rows.iter().find(|e| e.r == r).or_else(|| rows.last().filter(|e| e.r < r)).map(|e| e.g)
    }

    /// Checks `g_r <= g_(r+1)` within a partition and `g_r(P') <= g_r(P)` for refinements.
    pub fn check_monotone(&self) -> Result<()> {
        let parts = self.partitions();
        for p in &parts {
            for w in self.rows(p).windows(2) {
                if w[1].g < w[0].g - MONOTONE_TOL {
                    return Err(SqeError::NumericalInconsistency(format!(
                        "{p}: g_{} = {} > g_{} = {}",
                        w[0].r, w[0].g, w[1].r, w[1].g
                    )));
                }
            }
        }
        for fine in &parts {
            for coarse in &parts {
                if fine == coarse || fine.num_sites() != coarse.num_sites() || !fine.is_refinement_of(coarse)? {
                    continue;
                }
                for e in self.rows(fine) {
                    if let Some(gc) = self.value(coarse, e.r) {
                        if e.g > gc + MONOTONE_TOL {
                            return Err(SqeError::NumericalInconsistency(format!(
                                "refinement {fine} has g_{} = {} above {coarse} with {gc}",
                                e.r, e.g
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn check_operator(&self, l: &HermitianOperator) -> Result<()> {
        let h = operator_hash(l);
        if h != self.operator_hash {
            return Err(SqeError::InvalidArgument(format!("table built for operator {}, got {h}", self.operator_hash)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<GRTable> {
        let t: GRTable = serde_json::from_str(s)?;
        Ok(t)
    }

    /// One line per partition: label, r values and g_r values with 12 decimals.
    pub fn to_text(&self) -> String {
        self.to_text_with_labels(|p| p.label())
    }

    pub fn to_text_with_labels(&self, label: impl Fn(&Partition) -> String) -> String {
        let parts = self.partitions();
        let labels: Vec<String> = parts.iter().map(&label).collect();
        let width = labels.iter().map(|s| s.len()).max().unwrap_or(9).max(9);
        let mut out = format!("{:<width$}  {:<12}  g_r\n", "partition", "r values");
        for (p, lab) in parts.iter().zip(&labels) {
            let rows = self.rows(p);
            let rs: Vec<String> = rows.iter().map(|e| e.r.to_string()).collect();
            let gs: Vec<String> = rows.iter().map(|e| format!("{:.12}", e.g)).collect();
            let rs = format!("({})", rs.join(","));
            writeln!(out, "{lab:<width$}  {rs:<12}  ({})", gs.join(", ")).unwrap();
        }
        out
    }
}

/// `Tr[rho L] > g_r + margin`, refusing entries that are not exact.
pub fn certify(rho: &DensityOperator, l: &HermitianOperator, entry: &GrEntry, margin: f64) -> Result<bool> {
    if !entry.exact {
        return Err(SqeError::Soundness(format!(
            "g_{} for {} is a heuristic lower bound and cannot certify",
            entry.r, entry.partition
        )));
    }
    Ok(expectation(l, rho)? > entry.g + margin)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub partition: Partition,
    pub r: usize,
    pub tr_rho_l: f64,
    pub g_r: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub partition: Partition,
    /// Largest certified `r`; the Schmidt number for this partition exceeds it.
    pub max_certified_r: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqeReport {
    pub state_id: String,
    pub operator_hash: String,
    pub margin: f64,
    pub entries: Vec<ReportEntry>,
    pub summary: Vec<PartitionSummary>,
    /// `r = 1` certified for every two-block partition.
    pub genuine_multipartite: bool,
}

/// Evaluates [`certify`] on every exact entry of `table`. Inexact entries are
/// reported as not certified.
pub fn sqe_report(rho: &DensityOperator, l: &HermitianOperator, table: &GRTable, margin: f64) -> Result<SqeReport> {
    if rho.shape() != l.shape() {
        return Err(SqeError::InvalidShape(format!(
            "state dims {:?} vs operator dims {:?}",
            rho.shape().dims(),
            l.shape().dims()
        )));
    }
    table.check_operator(l)?;
    let tr = expectation(l, rho)?;
    let mut entries = Vec::new();
    let mut summary = Vec::new();
    for p in table.partitions() {
        let mut max_r = None;
        for e in table.rows(&p) {
            let certified = e.exact && tr > e.g + margin;
            if certified {
                max_r = Some(max_r.map_or(e.r, |m: usize| m.max(e.r)));
            }
            entries.push(ReportEntry { partition: p.clone(), r: e.r, tr_rho_l: tr, g_r: e.g, certified });
        }
        summary.push(PartitionSummary { partition: p, max_certified_r: max_r });
    }
    let n = l.shape().len();
    let bipartitions: Vec<Partition> = enumerate_partitions(n)?.into_iter().filter(|p| p.num_blocks() == 2).collect();
    let genuine_multipartite = !bipartitions.is_empty()
        && bipartitions.iter().all(|p| entries.iter().any(|e| &e.partition == p && e.r == 1 && e.certified));
    Ok(SqeReport {
        state_id: state_hash(rho),
        operator_hash: table.operator_hash.clone(),
        margin,
        entries,
        summary,
        genuine_multipartite,
    })
}

impl SqeReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let width = self.entries.iter().map(|e| e.partition.label().len()).max().unwrap_or(9).max(9);
        let mut out = format!("{:<width$}  {:>2}  {:>14}  {:>14}  certified\n", "partition", "r", "Tr[rho L]", "g_r");
        for e in &self.entries {
            writeln!(
                out,
                "{:<width$}  {:>2}  {:>14.12}  {:>14.12}  {}",
                e.partition.label(),
                e.r,
                e.tr_rho_l,
                e.g_r,
                if e.certified { "yes" } else { "no" }
            )
            .unwrap();
        }
        writeln!(out, "genuine multipartite entanglement: {}", if self.genuine_multipartite { "yes" } else { "no" })
            .unwrap();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::white_noise;
    use crate::scenarios::cluster_state;
    use crate::tensor::SystemShape;
    use std::sync::OnceLock;

    fn cluster_table() -> &'static GRTable {
        static T: OnceLock<GRTable> = OnceLock::new();
        T.get_or_init(|| {
            let opts = SolverOptions { always_heuristic: false, ..Default::default() };
            GRTable::for_operator(&cluster_state().projector(), &opts).unwrap()
        })
    }

    fn entry(g: f64, exact: bool) -> GrEntry {
        GrEntry { partition: Partition::singletons(4), r: 1, g, method: Method::ClosedFormOpb, exact }
    }

    #[test]
    fn witness_spectrum() {
        let w = make_witness(&cluster_state().projector(), 0.25).unwrap();
        let ev = w.eigenvalues();
        assert!((ev[0] + 0.75).abs() < 1e-12);
        assert!(ev[1..].iter().all(|x| (x - 0.25).abs() < 1e-12));
        let zero = make_witness(&HermitianOperator::identity(SystemShape::qubits(2)), 1.0).unwrap();
        assert!(zero.matrix().norm() == 0.0);
        assert!(make_witness(&zero, f64::NAN).is_err());
    }

    #[test]
    fn witness_detects_the_cluster_state_on_every_cell() {
        let psi = cluster_state();
        let l = psi.projector();
        for e in &cluster_table().entries {
            let w = make_witness(&l, e.g).unwrap();
            let v = expectation(&w, &psi).unwrap();
            assert!((v - (e.g - 1.0)).abs() < 1e-12);
            if e.g < 1.0 - 1e-9 {
                assert!(v < 0.0);
            }
        }
    }

    #[test]
    fn certify_examples() {
        let psi = cluster_state();
        let l = psi.projector();
        let rho = psi.to_density().unwrap();
        assert!(certify(&rho, &l, &entry(0.25, true), DEFAULT_MARGIN).unwrap());
        let noisy = white_noise(&rho, 0.9).unwrap();
        assert!(!certify(&noisy, &l, &entry(0.25, true), DEFAULT_MARGIN).unwrap());
        let mixed = DensityOperator::maximally_mixed(SystemShape::qubits(4));
        assert!(!certify(&mixed, &l, &entry(1.0 / 16.0, true), DEFAULT_MARGIN).unwrap());
        // strict inequality at the boundary
        let tr = expectation(&l, &mixed).unwrap();
        assert!((tr - 1.0 / 16.0).abs() < 1e-15);
        assert!(!certify(&mixed, &l, &entry(tr, true), 0.0).unwrap());
        assert!(matches!(certify(&rho, &l, &entry(0.25, false), DEFAULT_MARGIN), Err(SqeError::Soundness(_))));
    }

    #[test]
    fn table_shape_and_json_round_trip() {
        let t = cluster_table();
        assert_eq!(t.partitions().len(), 14);
        assert_eq!(t.entries.len(), 7 * 2 + 7 * 4);
        assert!(t.entries.iter().all(|e| e.exact));
        let back = GRTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(&back, t);
        let bad = t.to_json().unwrap().replacen("\"operator_hash\"", "\"extra\": 1, \"operator_hash\"", 1);
        assert!(GRTable::from_json(&bad).is_err());
    }

    #[test]
    fn report_on_cluster_and_noise() {
        let psi = cluster_state();
        let l = psi.projector();
        let t = cluster_table();
        let rho = psi.to_density().unwrap();
        let rep = sqe_report(&rho, &l, t, DEFAULT_MARGIN).unwrap();
        for e in &rep.entries {
            assert_eq!(e.certified, e.g_r < 1.0 - 1e-9, "{} r={}", e.partition, e.r);
        }
        assert!(rep.genuine_multipartite);
        let rep = sqe_report(&white_noise(&rho, 0.5).unwrap(), &l, t, DEFAULT_MARGIN).unwrap();
        assert!(rep.genuine_multipartite);
        let rep = sqe_report(&white_noise(&rho, 0.81).unwrap(), &l, t, DEFAULT_MARGIN).unwrap();
        assert!(rep.entries.iter().all(|e| !e.certified));
        assert!(!rep.genuine_multipartite);
        assert!(rep.to_text().contains("genuine multipartite entanglement: no"));
    }

    #[test]
    fn nesting_consistency_over_noise_sweep() {
        let psi = cluster_state();
        let l = psi.projector();
        let t = cluster_table();
        let rho = psi.to_density().unwrap();
        for k in 0..=20 {
            let mu = k as f64 / 20.0;
            let rep = sqe_report(&white_noise(&rho, mu).unwrap(), &l, t, DEFAULT_MARGIN).unwrap();
            for a in rep.entries.iter().filter(|e| e.certified) {
                for b in &rep.entries {
                    let refines = b.partition.is_refinement_of(&a.partition).unwrap();
                    if refines && b.r <= a.r && b.g_r <= a.tr_rho_l - DEFAULT_MARGIN * 2.0 {
                        assert!(b.certified, "mu={mu}: {} r={} but not {} r={}", a.partition, a.r, b.partition, b.r);
                    }
                }
            }
        }
    }

    #[test]
    fn report_rejects_foreign_table_and_shape() {
        let l = cluster_state().projector();
        let other = HermitianOperator::identity(SystemShape::qubits(4));
        let rho = DensityOperator::maximally_mixed(SystemShape::qubits(4));
        assert!(matches!(sqe_report(&rho, &other, cluster_table(), 1e-9), Err(SqeError::InvalidArgument(_))));
        let small = DensityOperator::maximally_mixed(SystemShape::qubits(2));
        assert!(matches!(sqe_report(&small, &l, cluster_table(), 1e-9), Err(SqeError::InvalidShape(_))));
    }
}
