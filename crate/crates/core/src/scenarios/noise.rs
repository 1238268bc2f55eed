use rayon::prelude::*;
use serde::Serialize;

use super::cluster_state;
use super::config::NoiseConfig;
use super::table::cluster_partitions;
use crate::channels::white_noise;
use crate::error::{Result, SqeError};
use crate::partition::Partition;
use crate::sqe::SolverOptions;
use crate::tensor::expectation;
use crate::witness::GRTable;

/// `16 (1 - g) / 15`: white noise below this keeps `Tr[rho L] > g`.
pub fn noise_threshold(g: f64) -> f64 {
    16.0 * (1.0 - g) / 15.0
}

#[derive(Clone, Debug, Serialize)]
pub struct Threshold {
    pub label: String,
    pub partition: Partition,
    pub r: usize,
    pub g: f64,
    pub threshold: f64,
    /// Largest grid `mu` still certified, if any.
    pub last_certified: Option<f64>,
    /// Smallest grid `mu` no longer certified, if any.
    pub first_uncertified: Option<f64>,
}

impl Threshold {
    /// The analytic threshold sits in the half-open grid bracket and the
    /// bracket is one step wide.
    pub fn bracketed(&self, step: f64) -> bool {
        match (self.last_certified, self.first_uncertified) {
            (Some(lo), Some(hi)) => {
                lo < self.threshold + 1e-12 && self.threshold <= hi + 1e-12 && hi - lo <= step * (1.0 + 1e-9)
            }
            _ => false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NoiseResult {
    pub mu_step: f64,
    /// `(mu, Tr[rho_mu L])`.
    pub curve: Vec<(f64, f64)>,
    /// One entry per `(partition, r)` with `g < 1`.
    pub thresholds: Vec<Threshold>,
    /// Below this every two-block partition certifies `r = 1`.
    pub genuine_threshold: f64,
    pub genuine_bracket: (Option<f64>, Option<f64>),
    /// Below this at least one cell is certified.
    pub partial_threshold: f64,
    pub partial_bracket: (Option<f64>, Option<f64>),
}

/// `(lo, hi]` with `-` for a missing end.
pub fn show_bracket((lo, hi): (Option<f64>, Option<f64>)) -> String {
    let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
    format!("({}, {}]", f(lo), f(hi))
}

fn bracket(curve: &[(f64, f64)], g: f64, margin: f64) -> (Option<f64>, Option<f64>) {
    let lo = curve
        .iter()
        .filter(|(_, v)| *v > g + margin)
        .map(|(m, _)| *m)
        .fold(None, |a: Option<f64>, m| Some(a.map_or(m, |x| x.max(m))));
    let hi = curve
        .iter()
        .filter(|(_, v)| *v <= g + margin)
        .map(|(m, _)| *m)
        .fold(None, |a: Option<f64>, m| Some(a.map_or(m, |x| x.min(m))));
    (lo, hi)
}

/// White noise on the cluster state: the expectation curve on a `mu` grid
/// and, for every exact table cell, the analytic threshold against the
/// grid bracket where certification stops.
pub fn run_white_noise(config: &NoiseConfig) -> Result<NoiseResult> {
    config.validate()?;
    let psi = cluster_state();
    let l = psi.projector();
    let rho = psi.to_density()?;
    let parts = cluster_partitions();
    let partitions: Vec<Partition> = parts.iter().map(|(_, p)| p.clone()).collect();
    let table = GRTable::build(&l, &partitions, &SolverOptions { always_heuristic: false, ..Default::default() })?;

    let n = ((config.mu_max - config.mu_min) / config.mu_step).round() as usize;
    let curve: Vec<(f64, f64)> = (0..=n)
        .into_par_iter()
        .map(|k| {
            let mu = config.mu_min + (config.mu_max - config.mu_min) * (k as f64 / n as f64);
            let v = expectation(&l, &white_noise(&rho, mu)?)?;
            Ok((mu, v))
        })
        .collect::<Result<_>>()?;

    let mut thresholds = Vec::new();
    for (label, p) in &parts {
        for e in table.rows(p) {
            if !e.exact {
                return Err(SqeError::Soundness(format!("{label} r = {} is not exact", e.r)));
            }
            if e.g >= 1.0 - 1e-9 {
                continue;
            }
            let (lo, hi) = bracket(&curve, e.g, config.margin);
            thresholds.push(Threshold {
                label: label.clone(),
                partition: p.clone(),
                r: e.r,
                g: e.g,
                threshold: noise_threshold(e.g),
                last_certified: lo,
                first_uncertified: hi,
            });
        }
    }
    // genuine: every bipartition at r = 1, limited by the largest such g
    let g_genuine = parts
        .iter()
        .filter(|(_, p)| p.num_blocks() == 2)
        .filter_map(|(_, p)| table.value(p, 1))
        .fold(f64::NEG_INFINITY, f64::max);
    let g_partial = thresholds.iter().map(|t| t.g).fold(f64::INFINITY, f64::min);
    Ok(NoiseResult {
        mu_step: config.mu_step,
        genuine_threshold: noise_threshold(g_genuine),
        genuine_bracket: bracket(&curve, g_genuine, config.margin),
        partial_threshold: noise_threshold(g_partial),
        partial_bracket: bracket(&curve, g_partial, config.margin),
        curve,
        thresholds,
    })
}

impl NoiseResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mu,value\n");
        for (mu, v) in &self.curve {
            out.push_str(&format!("{mu},{v}\n"));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "genuine multipartite threshold {:.12}  bracket {}\npartial entanglement threshold {:.12}  bracket {}\n",
            self.genuine_threshold,
            show_bracket(self.genuine_bracket),
            self.partial_threshold,
            show_bracket(self.partial_bracket)
        );
        out.push_str(&format!("{:<10}  {:>2}  {:>14}  {:>14}\n", "partition", "r", "g_r", "threshold"));
        for t in &self.thresholds {
            out.push_str(&format!("{:<10}  {:>2}  {:>14.12}  {:>14.12}\n", t.label, t.r, t.g, t.threshold));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_on_a_coarse_grid() {
        let cfg = NoiseConfig { mu_step: 1e-2, ..Default::default() };
        let res = run_white_noise(&cfg).unwrap();
        assert!((res.genuine_threshold - 8.0 / 15.0).abs() < 1e-12);
        assert!((res.partial_threshold - 0.8).abs() < 1e-12);
        let near = |b: (Option<f64>, Option<f64>), lo: f64, hi: f64| {
            (b.0.unwrap() - lo).abs() < 1e-12 && (b.1.unwrap() - hi).abs() < 1e-12
        };
        assert!(near(res.genuine_bracket, 0.53, 0.54));
        assert!(near(res.partial_bracket, 0.79, 0.8));
        for t in &res.thresholds {
            assert!(t.bracketed(cfg.mu_step), "{} r={}", t.label, t.r);
        }
        let q = res.thresholds.iter().find(|t| (t.g - 0.75).abs() < 1e-12).unwrap();
        assert!((q.threshold - 4.0 / 15.0).abs() < 1e-12);
        assert_eq!(res.curve.len(), 101);
        assert!(res.to_csv().starts_with("mu,value\n0,"));
    }
}
