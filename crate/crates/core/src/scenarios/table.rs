use rayon::prelude::*;
use serde::Serialize;

use super::cluster_state;
use super::config::TableConfig;
use crate::error::{Result, SqeError};
use crate::partition::Partition;
use crate::sqe::{g_r_max, SolverOptions};
use crate::witness::GRTable;

/// Heuristic and closed-form values must agree to this.
pub const CROSS_CHECK_TOL: f64 = 1e-8;

/// The fourteen nontrivial partitions of four sites, in the customary
/// listing order and with their customary labels.
pub const CLUSTER_PARTITION_LABELS: [&str; 14] = [
    "1:2,3,4", "2:1,3,4", "3:1,2,4", "4:1,2,3", "1,2:3,4", "1,3:2,4", "1,4:2,3", "1:2:3,4", "1:3:2,4", "1:4:2,3",
    "2:3:1,4", "2:4:1,3", "3:4:1,2", "1:2:3:4",
];

pub fn cluster_partitions() -> Vec<(String, Partition)> {
    CLUSTER_PARTITION_LABELS.iter().map(|s| (s.to_string(), Partition::parse(s).expect("valid label"))).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub label: String,
    pub partition: Partition,
    pub r_values: Vec<usize>,
    pub g: Vec<f64>,
    /// Best alternating-solver value per `r`, when cross-checked.
    pub heuristic: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterTable {
    pub table: GRTable,
    pub rows: Vec<TableRow>,
    /// Largest `|heuristic - closed form|` over all cells.
    pub max_discrepancy: Option<f64>,
}

impl ClusterTable {
    pub fn row(&self, label: &str) -> Option<&TableRow> {
        let p = Partition::parse(label).ok()?;
        self.rows.iter().find(|r| r.partition == p)
    }

    pub fn to_text(&self) -> String {
        let rows = &self.rows;
        self.table.to_text_with_labels(|p| {
            rows.iter().find(|r| &r.partition == p).map_or_else(|| p.label(), |r| r.label.clone())
        })
    }
}

/// `g_r` of the 4-qubit cluster projector for every nontrivial partition,
/// from the closed-form routes, optionally cross-checked with the
/// alternating solver alone.
pub fn run_cluster_table(config: &TableConfig) -> Result<ClusterTable> {
    config.validate()?;
    let l = cluster_state().projector();
    let parts = cluster_partitions();
    let partitions: Vec<Partition> = parts.iter().map(|(_, p)| p.clone()).collect();
    let closed_opts =
        SolverOptions { restarts: config.restarts, seed: config.seed, always_heuristic: false, ..Default::default() };
    let table = GRTable::build(&l, &partitions, &closed_opts)?;

    let heuristic_opts = SolverOptions { closed_forms: false, ..closed_opts.clone() };
    let cells: Vec<(usize, usize, f64)> = parts
        .iter()
        .enumerate()
        .flat_map(|(k, (_, p))| table.rows(p).into_iter().map(move |e| (k, e.r, e.g)))
        .collect();
    let heuristic: Vec<Option<f64>> = if config.cross_check {
        cells
            .par_iter()
            .map(|&(k, r, _)| g_r_max(&l, &partitions[k], r, &heuristic_opts).map(|est| Some(est.g)))
            .collect::<Result<_>>()?
    } else {
        vec![None; cells.len()]
    };

    let mut max_discrepancy: Option<f64> = None;
    for (&(k, r, g), h) in cells.iter().zip(&heuristic) {
        if let Some(h) = h {
            let diff = (h - g).abs();
            if diff > CROSS_CHECK_TOL {
                return Err(SqeError::Mismatch(format!(
                    "{} r = {r}: closed form {g:.12}, alternating {h:.12}",
                    parts[k].0
                )));
            }
            max_discrepancy = Some(max_discrepancy.map_or(diff, |m| m.max(diff)));
        }
    }
    let rows = parts
        .iter()
        .enumerate()
        .map(|(k, (label, p))| {
            let entries = table.rows(p);
            let heur = cells.iter().zip(&heuristic).filter(|((kk, _, _), _)| *kk == k).map(|(_, h)| *h).collect();
            TableRow {
                label: label.clone(),
                partition: p.clone(),
                r_values: entries.iter().map(|e| e.r).collect(),
                g: entries.iter().map(|e| e.g).collect(),
                heuristic: heur,
            }
        })
        .collect();
    Ok(ClusterTable { table, rows, max_discrepancy })
}
