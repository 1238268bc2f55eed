use rayon::prelude::*;
use serde::Serialize;

use super::cluster_state;
use super::config::LossConfig;
use crate::channels::amplitude_loss;
use crate::error::{Result, SqeError};
use crate::tensor::expectation;

/// Allowed gap between the channel path and the closed formulas.
pub const LOSS_TOL: f64 = 1e-12;

/// Closed form of `Tr[rho L]` for losses on the given 1-based pair, when known.
pub fn loss_formula(pair: [usize; 2], ta: f64, tb: f64) -> Option<f64> {
    match pair {
        [2, 4] | [4, 2] => Some((1.0 + ta).powi(2) * (1.0 + tb).powi(2) / 16.0),
        [1, 2] => Some(((1.0 + ta).powi(2) * (1.0 + tb).powi(2) + (1.0 - ta * ta) * (1.0 - tb).powi(2)) / 16.0),
        [2, 1] => loss_formula([1, 2], tb, ta),
        _ => None,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LossGrid {
    pub pair: [usize; 2],
    pub resolution: usize,
    /// `(t_a, t_b, Tr[rho L])`, `t_b` fastest.
    pub points: Vec<(f64, f64, f64)>,
    /// Largest gap to the closed formula, when one exists.
    pub max_formula_error: Option<f64>,
    /// Largest `|value(t_a, t_b) - value(t_b, t_a)|`.
    pub max_asymmetry: f64,
    /// The `g_r` levels of the cluster table, for contour annotation.
    pub levels: Vec<f64>,
}

impl LossGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.points[i * self.resolution + j].2
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_a,t_b,value\n");
        for (a, b, v) in &self.points {
            out.push_str(&format!("{a},{b},{v}\n"));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "losses on sites {} and {}, {}x{} grid\n",
            self.pair[0], self.pair[1], self.resolution, self.resolution
        );
        match self.max_formula_error {
            Some(e) => out.push_str(&format!("max deviation from closed form {e:.3e}\n")),
            None => out.push_str("no closed form for this pair\n"),
        }
        out.push_str(&format!("max asymmetry {:.3e}\n", self.max_asymmetry));
        let levels: Vec<String> = self.levels.iter().map(|g| format!("{g:.12}")).collect();
        out.push_str(&format!("levels {}\n", levels.join(" ")));
        out
    }
}

/// `Tr[rho L]` for the cluster state with amplitude loss on two sites over a
/// square grid of transmissions in `[0, 1]`.
pub fn run_loss_grid(config: &LossConfig) -> Result<LossGrid> {
    config.validate()?;
    let psi = cluster_state();
    let l = psi.projector();
    let rho = psi.to_density()?;
    let n = config.resolution;
    let [a, b] = config.pair;
    let t = |k: usize| k as f64 / (n - 1) as f64;
    let points: Vec<(f64, f64, f64)> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (ta, tb) = (t(idx / n), t(idx % n));
            let out = amplitude_loss(&amplitude_loss(&rho, a - 1, ta)?, b - 1, tb)?;
            Ok((ta, tb, expectation(&l, &out)?))
        })
        .collect::<Result<_>>()?;

    let mut max_formula_error = None;
    if loss_formula(config.pair, 0.0, 0.0).is_some() {
        let mut worst = 0.0f64;
        for &(ta, tb, v) in &points {
            let f = loss_formula(config.pair, ta, tb).expect("known pair");
            let e = (v - f).abs();
            if e > LOSS_TOL {
                return Err(SqeError::Mismatch(format!(
                    "pair {:?} at ({ta}, {tb}): channel {v}, formula {f}",
                    config.pair
                )));
            }
            worst = worst.max(e);
        }
        max_formula_error = Some(worst);
    }
    let mut max_asymmetry = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            max_asymmetry = max_asymmetry.max((points[i * n + j].2 - points[j * n + i].2).abs());
        }
    }
    Ok(LossGrid {
        pair: config.pair,
        resolution: n,
        points,
        max_formula_error,
        max_asymmetry,
        levels: vec![0.25, 0.5, 0.75],
    })
}
