//! Propagator norms `||e^{-Ct}||`, the short-time law `1 - c t^a`, and
//! exponential-stability checks.

mod taylor;

pub use taylor::{
    delta_coefficient, g_function, initial_data_constant, perturbed_coefficients, perturbed_initial,
    sum_of_squares_residual, taylor_u, SumOfSquaresCheck, TaylorSeriesData,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HypoError, Result};
use crate::io::csv_table;
use crate::operator::{
    expm, hermitian_eigen, null_space, require_square, spectral_abscissa, spectral_norm, vstack,
    ComplexMatrix, OperatorDecomposition,
};

/// Lower edge of `1 - ||P(t)||` inside the fit window.
pub const FIT_WINDOW_LO: f64 = 1e-10;
/// Upper edge of `1 - ||P(t)||` inside the fit window.
pub const FIT_WINDOW_HI: f64 = 1e-2;
/// Minimum number of samples in the fit window.
pub const MIN_FIT_SAMPLES: usize = 10;
/// Largest tolerated `|a_est - a_rounded|` before the fit is flagged.
pub const ROUNDING_TOL: f64 = 0.2;

/// Sampled propagator norms.
#[derive(Debug, Clone, Serialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub generator_norm: f64,
}

impl DecayCurve {
    /// CSV with header `t,norm`.
    pub fn to_csv(&self) -> String {
        csv_table(&["t", "norm"], self.times.iter().zip(&self.norms).map(|(t, n)| vec![*t, *n]))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if let Some(t) = times.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(HypoError::Parameter(format!("time {t} is not a finite nonnegative number")));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HypoError::Parameter("times must be strictly increasing".into()));
    }
    Ok(())
}

/// `||e^{-Ct}||` on the given grid.
pub fn propagator_norm_curve(c: &ComplexMatrix, times: &[f64]) -> Result<DecayCurve> {
    require_square(c)?;
    check_times(times)?;
    let minus_c = -c;
    let norms = times
        .par_iter()
        .map(|&t| expm(&minus_c.scale(t)).map(|p| spectral_norm(&p)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DecayCurve { times: times.to_vec(), norms, generator_norm: spectral_norm(c) })
}

/// `n` points from `lo` to `hi`, equally spaced in `log t`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let steps = n.max(2) - 1;
    (0..=steps).map(|i| (a + (b - a) * i as f64 / steps as f64).exp()).collect()
}

/// `steps + 1` equally spaced points in `[0, tmax]`.
pub fn uniform_grid(tmax: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| tmax * i as f64 / steps.max(1) as f64).collect()
}

/// `binom(n, k)` in floating point.
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// `(2m+1)! binom(2m, m)`.
pub fn short_time_denominator(m: usize) -> f64 {
    factorial(2 * m + 1) * binomial(2 * m, m)
}

/// `c = lambda_min(B* (C*)^m C_H C^m B) / ((2m+1)! binom(2m, m))`, where the
/// columns of `B` span the intersection over `j < m` of `ker(C_H C^j)`.
pub fn short_time_constant(dec: &OperatorDecomposition, m: usize, rank_tol: f64) -> Result<f64> {
    let n = dec.dim();
    let (c, r) = (dec.generator(), dec.dissipative());
    let mut blocks = Vec::with_capacity(m);
    let mut c_pow = ComplexMatrix::identity(n, n);
    for _ in 0..m {
        blocks.push(r * &c_pow);
        c_pow = &c_pow * c;
    }
    let basis = if m == 0 {
        ComplexMatrix::identity(n, n)
    } else {
        let stacked = vstack(&blocks);
        null_space(&stacked, rank_tol * spectral_norm(&stacked)).1
    };
    if basis.ncols() == 0 {
        return Err(HypoError::ContractViolation(format!(
            "the kernel intersection for m = {m} is trivial, so m exceeds the index"
        )));
    }
    let form = c_pow.adjoint() * r * &c_pow;
    let restricted = basis.adjoint() * form * &basis;
    let (values, _) = hermitian_eigen(&crate::operator::hermitian_part(&restricted))?;
    Ok(values[0] / short_time_denominator(m))
}

/// Least-squares fit of `log(1 - ||P(t)||) = log c + a log t`.
#[derive(Debug, Clone, Serialize)]
pub struct ShortTimeFit {
    pub a_est: f64,
    pub a_rounded: usize,
    pub a_deviation: f64,
    /// Set when `a_deviation` exceeds the rounding tolerance.
    pub rounding_flag: bool,
    pub c_est: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub fit_window: [f64; 2],
    pub samples: usize,
}

/// Nearest odd positive integer.
fn nearest_odd(a: f64) -> usize {
    let k = ((a - 1.0) / 2.0).round().max(0.0);
    2 * k as usize + 1
}

/// Fits the short-time law on samples with `1 - ||P(t)||` in
/// `[1e-10, 1e-2]`.
pub fn fit_short_time(curve: &DecayCurve) -> Result<ShortTimeFit> {
    let points: Vec<(f64, f64)> = curve
        .times
        .iter()
        .zip(&curve.norms)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, p)| (*t, 1.0 - p))
        .filter(|(_, d)| (FIT_WINDOW_LO..=FIT_WINDOW_HI).contains(d))
        .collect();
    if points.is_empty() {
        return Err(HypoError::NoDecay(
            "no sample has 1 - ||P(t)|| in [1e-10, 1e-2]; the propagator norm stays at 1".into(),
        ));
    }
    if points.len() < MIN_FIT_SAMPLES {
        return Err(HypoError::Precondition(format!(
            "only {} samples lie in the fit window, {MIN_FIT_SAMPLES} are required",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, d)| d.ln()).collect();
    let len = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / len;
    let mean_y = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    if sxx <= 0.0 {
        return Err(HypoError::Precondition("fit window contains a single time".into()));
    }
    let a_est = sxy / sxx;
    let intercept = mean_y - a_est * mean_x;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - a_est * x).powi(2)).sum::<f64>() / len).sqrt();
    let a_rounded = nearest_odd(a_est);
    let a_deviation = (a_est - a_rounded as f64).abs();
    Ok(ShortTimeFit {
        a_est,
        a_rounded,
        a_deviation,
        rounding_flag: a_deviation > ROUNDING_TOL,
        c_est: intercept.exp(),
        residual,
        fit_window: [points[0].0, points[points.len() - 1].0],
        samples: points.len(),
    })
}

/// Samples per decade on the default fit grid.
const FIT_GRID_DENSITY: usize = 40;

/// Samples `||P(t)||` on a logarithmic grid from `1e-4/||C||` to
/// `1e-1/||C||` and fits the short-time law. The upper end is widened by
/// decades (up to `1e3/||C||`) until the window holds enough samples.
pub fn fit_generator(c: &ComplexMatrix) -> Result<(DecayCurve, ShortTimeFit)> {
    require_square(c)?;
    let scale = spectral_norm(c);
    if scale == 0.0 {
        return Err(HypoError::NoDecay("the generator is zero".into()));
    }
    let lo = 1e-4 / scale;
    let mut last_err = None;
    for decades in 3..=7 {
        let hi = lo * 10f64.powi(decades);
        let curve = propagator_norm_curve(c, &log_grid(lo, hi, FIT_GRID_DENSITY * decades as usize + 1))?;
        match fit_short_time(&curve) {
            Ok(fit) => return Ok((curve, fit)),
            Err(e @ HypoError::Precondition(_)) | Err(e @ HypoError::NoDecay(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one grid was tried"))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub norm_at_t0: f64,
    /// `min Re sigma(C)`.
    pub spectral_gap: f64,
}

/// `stable` iff `||e^{-C t0}|| < 1 - 1e-12`.
pub fn stability_check(c: &ComplexMatrix, t0: f64) -> Result<StabilityReport> {
    require_square(c)?;
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(HypoError::Parameter(format!("t0 = {t0} must be positive")));
    }
    let norm_at_t0 = spectral_norm(&expm(&(-c).scale(t0))?);
    let spectral_gap = -spectral_abscissa(&-c)?;
    Ok(StabilityReport { stable: norm_at_t0 < 1.0 - 1e-12, norm_at_t0, spectral_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{complexify, hermitian_split, RealMatrix};

    fn real(rows: usize, v: &[f64]) -> ComplexMatrix {
        complexify(&RealMatrix::from_row_slice(rows, rows, v))
    }

    fn ck(k: f64) -> ComplexMatrix {
        real(2, &[0.0, k, -k, 1.0])
    }

    /// `E_k`: skew unit coupling along the first off-diagonals, `R = e_k e_k^T`.
    fn ek(k: usize) -> ComplexMatrix {
        let mut m = RealMatrix::zeros(k, k);
        for i in 0..k.saturating_sub(1) {
            m[(i, i + 1)] = 1.0;
            m[(i + 1, i)] = -1.0;
        }
        m[(k - 1, k - 1)] = 1.0;
        complexify(&m)
    }

    #[test]
    fn coercive_curve_is_exponential() {
        let c = real(2, &[1.0, 0.0, 0.0, 2.0]);
        let curve = propagator_norm_curve(&c, &uniform_grid(2.0, 20)).unwrap();
        for (t, n) in curve.times.iter().zip(&curve.norms) {
            assert!((n - (-t).exp()).abs() < 1e-13);
        }
        assert!((curve.generator_norm - 2.0).abs() < 1e-13);
        let csv = curve.to_csv();
        assert!(csv.starts_with("t,norm\n0,1\n"));
    }

    #[test]
    fn rejects_unsorted_times() {
        assert!(matches!(propagator_norm_curve(&ck(1.0), &[0.0, 0.5, 0.5]), Err(HypoError::Parameter(_))));
        assert!(matches!(propagator_norm_curve(&ck(1.0), &[-1.0]), Err(HypoError::Parameter(_))));
    }

    #[test]
    fn ek_at_zero() {
        let curve = propagator_norm_curve(&ek(3), &[0.0]).unwrap();
        assert_eq!(curve.norms, vec![1.0]);
    }

    #[test]
    fn short_time_constants() {
        for k in [1.0, 2.0, 3.0] {
            let dec = hermitian_split(&ck(k)).unwrap();
            let c = short_time_constant(&dec, 1, 1e-10).unwrap();
            assert!((c - k * k / 12.0).abs() < 1e-12 * k * k, "{k}: {c}");
        }
        let diag = hermitian_split(&real(2, &[1.0, 0.0, 0.0, 2.0])).unwrap();
        assert!((short_time_constant(&diag, 0, 1e-10).unwrap() - 1.0).abs() < 1e-14);
        let e2 = hermitian_split(&real(2, &[0.0, 1.0, -1.0, 1.0])).unwrap();
        assert!((short_time_constant(&e2, 1, 1e-10).unwrap() - 1.0 / 12.0).abs() < 1e-14);
        assert!(matches!(short_time_constant(&diag, 1, 1e-10), Err(HypoError::ContractViolation(_))));
    }

    #[test]
    fn fits_ck_and_coercive() {
        let (_, fit) = fit_generator(&ck(1.0)).unwrap();
        assert_eq!(fit.a_rounded, 3);
        assert!((fit.c_est / (1.0 / 12.0) - 1.0).abs() < 0.05, "{fit:?}");
        let (_, fit) = fit_generator(&real(2, &[1.0, 0.0, 0.0, 2.0])).unwrap();
        assert_eq!(fit.a_rounded, 1);
        assert!((fit.c_est - 1.0).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn fits_ek_exponents() {
        for (k, a) in [(3, 5), (4, 7)] {
            let (_, fit) = fit_generator(&ek(k)).unwrap();
            assert_eq!(fit.a_rounded, a, "{fit:?}");
            assert!(fit.a_deviation <= ROUNDING_TOL, "{fit:?}");
        }
    }

    #[test]
    fn skew_generator_has_no_decay() {
        let c = real(2, &[0.0, 1.0, -1.0, 0.0]);
        let curve = propagator_norm_curve(&c, &log_grid(1e-4, 1.0, 50)).unwrap();
        assert!(matches!(fit_short_time(&curve), Err(HypoError::NoDecay(_))));
        let report = stability_check(&c, 1.0).unwrap();
        assert!(!report.stable);
        assert!(report.spectral_gap.abs() < 1e-12);
    }

    #[test]
    fn ck_is_stable_with_gap_half() {
        for k in [1.0, 2.0, 5.0] {
            let report = stability_check(&ck(k), 5.0).unwrap();
            assert!(report.stable);
            assert!((report.spectral_gap - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn odd_rounding() {
        assert_eq!(nearest_odd(0.2), 1);
        assert_eq!(nearest_odd(2.9), 3);
        assert_eq!(nearest_odd(4.1), 5);
        assert_eq!(nearest_odd(6.95), 7);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), 20.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert_eq!(short_time_denominator(1), 12.0);
        assert_eq!(short_time_denominator(2), 720.0);
    }
}
