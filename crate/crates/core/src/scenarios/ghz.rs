use rayon::prelude::*;
use serde::Serialize;

use super::config::GhzConfig;
use crate::channels::{ghz_witness_value, DephasingSpec, GhzCoefficients};
use crate::error::{Result, SqeError};

/// Bisection stops once the bracket in `s^2` is this narrow.
pub const CROSSING_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct Level {
    /// `None` for the `r -> infinity` level.
    pub r: Option<usize>,
    pub g: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Crossing {
    pub r: usize,
    pub g: f64,
    /// Largest `s^2` with value above `g`, when the curve reaches `g`.
    pub sigma_sq: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GhzCurve {
    pub truncation: usize,
    pub tail_bound: f64,
    pub sites: usize,
    /// `(||sigma||^2, Tr[rho L])`.
    pub points: Vec<(f64, f64)>,
    pub levels: Vec<Level>,
    pub crossings: Vec<Crossing>,
}

/// Value at total variance `s2` with the variance split evenly over `sites`.
pub fn ghz_value_split(coeffs: &GhzCoefficients, s2: f64, sites: usize, d: usize, renormalize: bool) -> Result<f64> {
    let sigmas = vec![(s2 / sites as f64).sqrt(); sites];
    let spec = DephasingSpec::from_sites(&sigmas)?;
    Ok(ghz_witness_value(coeffs, spec.sigma_sq_total(), d, renormalize)?.value)
}

/// `s^2` in `[0, inf)` where the decreasing curve passes `g`.
pub fn find_crossing(coeffs: &GhzCoefficients, g: f64, d: usize, renormalize: bool) -> Result<Option<f64>> {
    let f = |s: f64| ghz_witness_value(coeffs, s, d, renormalize).map(|v| v.value);
    let mut hi = 1.0;
    while f(hi)? > g {
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(None);
        }
    }
    let mut lo = 0.0;
    if f(lo)? <= g {
        return Ok(None);
    }
    while hi - lo > CROSSING_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > g {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// The dephased GHZ curve on a log grid of `||sigma||^2`, the `g_r` levels
/// `sum_{i<r} |lambda_i|^2` and the crossings of the curve with them.
pub fn run_ghz_curve(config: &GhzConfig) -> Result<GhzCurve> {
    config.validate()?;
    let coeffs = config.lambdas.coefficients()?;
    let d = config.truncation;
    let base = ghz_witness_value(&coeffs, 0.0, d, config.renormalize)?;
    let (lmin, lmax) = (config.s_min.log10(), config.s_max.log10());
    let m = config.points;
    let points: Vec<(f64, f64)> = (0..m)
        .into_par_iter()
        .map(|k| {
            let s2 = 10f64.powf(lmin + (lmax - lmin) * k as f64 / (m - 1) as f64);
            Ok((s2, ghz_value_split(&coeffs, s2, config.sites, d, config.renormalize)?))
        })
        .collect::<Result<_>>()?;

    let norm: f64 = if config.renormalize { coeffs.level(d) } else { 1.0 };
    if !(norm > 0.0) {
        return Err(SqeError::InvalidArgument("coefficients vanish".into()));
    }
    let mut levels: Vec<Level> =
        config.r_list.iter().map(|&r| Level { r: Some(r), g: coeffs.level(r.min(d)) / norm }).collect();
    let g_inf = if config.renormalize { 1.0 } else { coeffs.level(d) + coeffs.tail_weight(d) };
    levels.push(Level { r: None, g: g_inf });
    let crossings = config
        .r_list
        .iter()
        .map(|&r| {
            let g = coeffs.level(r.min(d)) / norm;
            Ok(Crossing { r, g, sigma_sq: find_crossing(&coeffs, g, d, config.renormalize)? })
        })
        .collect::<Result<_>>()?;
    Ok(GhzCurve {
        truncation: base.truncation,
        tail_bound: base.tail_bound,
        sites: config.sites,
        points,
        levels,
        crossings,
    })
}

impl GhzCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sigma_sq,value\n");
        for (s, v) in &self.points {
            out.push_str(&format!("{s},{v}\n"));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "truncation {} (tail bound {:.3e}), {} sites, {} points\n",
            self.truncation,
            self.tail_bound,
            self.sites,
            self.points.len()
        );
        for l in &self.levels {
            let r = l.r.map_or("inf".to_string(), |r| r.to_string());
            out.push_str(&format!("level r={r:<4} g={:.12}\n", l.g));
        }
        for c in &self.crossings {
            match c.sigma_sq {
                Some(s) => out.push_str(&format!("crossing r={:<3} s^2={s:.10}\n", c.r)),
                None => out.push_str(&format!("crossing r={:<3} none\n", c.r)),
            }
        }
        out
    }
}
