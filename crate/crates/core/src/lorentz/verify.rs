//! Checks of the uniform cubic short-time bound over the spatial lattice.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use super::{real_generator, real_propagator_norms, ShortTimeConstants};
use crate::decay::uniform_grid;
use crate::error::{HypoError, Result};

/// Slack in the cubic bound check.
pub const CUBIC_BOUND_TOL: f64 = 1e-9;
/// Slack in the lower side of the sandwich.
pub const SANDWICH_LOWER_TOL: f64 = 1e-12;

/// Distinct `|n|` over nonzero lattice modes with `max(|n1|, |n2|) <= N`,
/// ascending.
pub fn lattice_radii(n: usize) -> Vec<f64> {
    let n = n as u64;
    let squares: BTreeSet<u64> = (0..=n).flat_map(|a| (0..=a).map(move |b| a * a + b * b)).filter(|&s| s > 0).collect();
    squares.into_iter().map(|s| (s as f64).sqrt()).collect()
}

/// Propagator norms `||P_n(t)||` for each radius (rows) and time (columns).
fn norm_table(radii: &[f64], m: usize, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    radii
        .par_iter()
        .map(|&n| real_propagator_norms(&real_generator(n, m, 1.0)?, times))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub modes_checked: usize,
    pub samples: usize,
    /// Smallest `1 - c t^3 + tol - ||P_n(t)||`.
    pub worst_margin: f64,
    pub worst_n: f64,
    pub worst_t: f64,
    /// `1 - c tau^3 - ||P_1(tau)||`.
    pub reference_margin: f64,
    /// The switch radius `r` exceeds the largest tested `|n|`.
    pub r_beyond_cutoff: bool,
    pub passed: bool,
}

fn require_grid(n: usize, samples: usize) -> Result<()> {
    if n == 0 {
        return Err(HypoError::Parameter("spatial cutoff N must be positive".into()));
    }
    if samples < 2 {
        return Err(HypoError::Parameter("at least two time samples are required".into()));
    }
    Ok(())
}

/// `||P_n(t)|| <= 1 - c t^3` on `samples` points of `[0, tau]` for every
/// distinct lattice radius.
pub fn cubic_bound_verify(n: usize, m: usize, consts: &ShortTimeConstants, samples: usize) -> Result<BoundReport> {
    require_grid(n, samples)?;
    let times = uniform_grid(consts.tau, samples - 1);
    let radii = lattice_radii(n);
    let table = norm_table(&radii, m, &times)?;
    let upper = |t: f64| 1.0 - consts.c * t.powi(3);
    let (mut worst_margin, mut worst_n, mut worst_t) = (f64::INFINITY, 0.0, 0.0);
    for (radius, row) in radii.iter().zip(&table) {
        for (t, norm) in times.iter().zip(row) {
            let margin = upper(*t) + CUBIC_BOUND_TOL - norm;
            if margin < worst_margin {
                (worst_margin, worst_n, worst_t) = (margin, *radius, *t);
            }
        }
    }
    let reference_margin = upper(consts.tau) - table[0][times.len() - 1];
    Ok(BoundReport {
        modes_checked: radii.len(),
        samples: times.len(),
        worst_margin,
        worst_n,
        worst_t,
        reference_margin,
        r_beyond_cutoff: consts.r > *radii.last().expect("N > 0 gives a radius"),
        passed: worst_margin >= 0.0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichRow {
    pub t: f64,
    /// `||P_{(1,0)}(t)||`.
    pub lower: f64,
    pub sup: f64,
    pub argmax_n: f64,
    /// `1 - c t^3`.
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
    pub passed: bool,
}

/// `||P_{(1,0)}(t)|| <= sup_n ||P_n(t)|| <= 1 - c t^3` at each time in
/// `[0, tau]`.
pub fn full_propagator_bounds(
    n: usize,
    m: usize,
    consts: &ShortTimeConstants,
    times: &[f64],
) -> Result<SandwichReport> {
    require_grid(n, times.len().max(2))?;
    if let Some(t) = times.iter().find(|t| !(0.0..=consts.tau).contains(*t)) {
        return Err(HypoError::Parameter(format!("time {t} outside [0, tau = {}]", consts.tau)));
    }
    let radii = lattice_radii(n);
    let table = norm_table(&radii, m, times)?;
    let rows: Vec<SandwichRow> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (argmax_n, sup) = radii
                .iter()
                .zip(&table)
                .map(|(r, row)| (*r, row[k]))
                .fold((0.0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            SandwichRow { t, lower: table[0][k], sup, argmax_n, upper: 1.0 - consts.c * t.powi(3) }
        })
        .collect();
    let passed = rows
        .iter()
        .all(|r| r.lower <= r.sup + SANDWICH_LOWER_TOL && r.sup <= r.upper + CUBIC_BOUND_TOL);
    Ok(SandwichReport { rows, passed })
}
