//! Taylor coefficients `U_j` of `Q(t) = e^{-C* t} e^{-C t}`, the
//! sum-of-squares rearrangement of the series, and worst-case initial data.

use serde::Serialize;

use super::{binomial, factorial, short_time_denominator};
use crate::error::{HypoError, Result};
use crate::operator::{expm, psd_sqrt, require_square, spectral_norm, ComplexMatrix, ComplexVector, OperatorDecomposition};

/// Relative tolerance for the two-route agreement of `U_j`.
pub const TAYLOR_IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TaylorSeriesData {
    /// `U_0, ..., U_jmax`.
    pub u: Vec<ComplexMatrix>,
    pub jmax: usize,
    /// Largest `||U_j - U_j'||_F / max(1, (2||C||)^j)` between the binomial
    /// definition and the `C_H`-sandwiched form.
    pub identity_residual: f64,
}

impl TaylorSeriesData {
    /// `sum_j t^j / j! U_j`.
    pub fn q(&self, t: f64) -> ComplexMatrix {
        let n = self.u[0].nrows();
        let mut acc = ComplexMatrix::zeros(n, n);
        let mut coeff = 1.0;
        for (j, u) in self.u.iter().enumerate() {
            if j > 0 {
                coeff *= t / j as f64;
            }
            acc += u.scale(coeff);
        }
        acc
    }
}

fn powers(a: &ComplexMatrix, count: usize) -> Vec<ComplexMatrix> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(count + 1);
    out.push(ComplexMatrix::identity(n, n));
    for k in 0..count {
        let next = &out[k] * a;
        out.push(next);
    }
    out
}

fn sign(j: usize) -> f64 {
    if j % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `U_j = (-1)^j sum_k binom(j, k) (C*)^k C^{j-k}` for `j <= jmax`, checked
/// against `U_j = (-1)^j 2 sum_{k<j} binom(j-1, k) (C*)^k C_H C^{j-1-k}`.
pub fn taylor_u(c: &ComplexMatrix, jmax: usize) -> Result<TaylorSeriesData> {
    let n = require_square(c)?;
    if jmax == 0 {
        return Err(HypoError::Parameter("jmax must be at least 1".into()));
    }
    let growth = 2.0 * spectral_norm(c);
    if !growth.powi(jmax as i32).is_finite() {
        return Err(HypoError::Range(format!("(2||C||)^{jmax} overflows with ||C|| = {}", growth / 2.0)));
    }
    let c_h = crate::operator::hermitian_part(c);
    let right = powers(c, jmax);
    let left = powers(&c.adjoint(), jmax);
    let mut u = Vec::with_capacity(jmax + 1);
    let mut identity_residual = 0.0f64;
    for j in 0..=jmax {
        let mut direct = ComplexMatrix::zeros(n, n);
        for k in 0..=j {
            direct += (&left[k] * &right[j - k]).scale(binomial(j, k));
        }
        direct.scale_mut(sign(j));
        if j > 0 {
            let mut sandwiched = ComplexMatrix::zeros(n, n);
            for k in 0..j {
                sandwiched += (&left[k] * &c_h * &right[j - 1 - k]).scale(binomial(j - 1, k));
            }
            sandwiched.scale_mut(2.0 * sign(j));
            let scale = growth.powi(j as i32).max(1.0);
            identity_residual = identity_residual.max((&direct - &sandwiched).norm() / scale);
        }
        u.push(direct);
    }
    if identity_residual > TAYLOR_IDENTITY_TOL {
        return Err(HypoError::Numerical(format!(
            "U_j routes disagree: relative residual {identity_residual:e}"
        )));
    }
    Ok(TaylorSeriesData { u, jmax, identity_residual })
}

/// `g(x; t) = ||e^{-Ct} x||^2 - ||x||^2`.
pub fn g_function(c: &ComplexMatrix, x: &ComplexVector, t: f64) -> Result<f64> {
    require_square(c)?;
    let p = expm(&(-c).scale(t))?;
    Ok((&p * x).norm_squared() - x.norm_squared())
}

/// `Delta^{(m)}_{j,k}` for `m <= min(k, j-k-1)`.
pub fn delta_coefficient(m: usize, j: usize, k: usize) -> f64 {
    let rest = j - k - 1;
    binomial(k, m) * binomial(rest, m) / (binomial(k + m, m) * binomial(rest + m, m))
}

/// Outcome of the truncated sum-of-squares identity.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SumOfSquaresCheck {
    /// Largest entry modulus of the difference between both sides.
    pub residual: f64,
    /// Largest `Delta^{(m+1)}_{j,k}` appearing in the remainder.
    pub max_delta: f64,
    pub tail_bound: f64,
}

/// Tolerance on the series tail for `sum_of_squares_residual`.
const TAIL_TOL: f64 = 1e-13;

/// `(2j+1)!/(k+2j+1)! binom(k+j, j) t^k`.
fn inner_coefficient(j: usize, k: usize, t: f64) -> f64 {
    let ratio = (2 * j + 2..=k + 2 * j + 1).fold(1.0, |acc, i| acc / i as f64);
    ratio * binomial(k + j, j) * t.powi(k as i32)
}

/// Evaluates both sides of the rearrangement
/// `sum_j t^j/j! sum_k binom(j-1,k) U^k V W^{j-k-1}`
/// `= sum_{j<=m} (squared leading blocks) + sum_{j>=2m+3} (Delta-weighted remainder)`,
/// each truncated at order `jmax`.
pub fn sum_of_squares_residual(
    u: &ComplexMatrix,
    v: &ComplexMatrix,
    w: &ComplexMatrix,
    m: usize,
    t: f64,
    jmax: usize,
) -> Result<SumOfSquaresCheck> {
    let n = require_square(u)?;
    for other in [v, w] {
        if require_square(other)? != n {
            return Err(HypoError::Dimension("U, V and W must have equal size".into()));
        }
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(HypoError::Parameter(format!("t = {t} must be finite and nonnegative")));
    }
    let max_norm = [u, v, w].iter().map(|a| spectral_norm(*a)).fold(0.0, f64::max);
    let tail_bound = (max_norm * t).powi(jmax as i32) / factorial(jmax);
    if !(tail_bound <= TAIL_TOL) {
        return Err(HypoError::Range(format!(
            "series tail bound {tail_bound:e} exceeds {TAIL_TOL:e}; increase jmax"
        )));
    }
    let up = powers(u, jmax);
    let wp = powers(w, jmax);
    let term = |k: usize, l: usize| &up[k] * v * &wp[l];

    let mut lhs = ComplexMatrix::zeros(n, n);
    for j in 1..=jmax {
        let weight = t.powi(j as i32) / factorial(j);
        for k in 0..j {
            lhs += term(k, j - 1 - k).scale(weight * binomial(j - 1, k));
        }
    }

    let mut rhs = ComplexMatrix::zeros(n, n);
    for j in 0..=m {
        if j > jmax {
            break;
        }
        let mut left = ComplexMatrix::zeros(n, n);
        let mut right = ComplexMatrix::zeros(n, n);
        for k in 0..=jmax - j {
            let coeff = inner_coefficient(j, k, t);
            left += up[k + j].scale(coeff);
            right += wp[k + j].scale(coeff);
        }
        let weight = t.powi(2 * j as i32 + 1) / factorial(2 * j + 1) / binomial(2 * j, j);
        rhs += (left * v * right).scale(weight);
    }
    let mut max_delta = 0.0f64;
    for j in (2 * m + 3)..=jmax {
        let weight = t.powi(j as i32) / factorial(j);
        for k in (m + 1)..=(j - m - 2) {
            let delta = delta_coefficient(m + 1, j, k);
            max_delta = max_delta.max(delta);
            rhs += term(k, j - 1 - k).scale(weight * binomial(j - 1, k) * delta);
        }
    }
    let residual = crate::operator::max_abs(&(lhs - rhs));
    Ok(SumOfSquaresCheck { residual, max_delta, tail_bound })
}

/// `c_{l,k} = (2(m-l)+1)! / (k+2(m-l)+1)! binom(k+m-l, m-l)`.
fn perturbation_coefficient(m: usize, l: usize, k: usize) -> f64 {
    inner_coefficient(m - l, k, 1.0)
}

/// `b_0 = 1, ..., b_m` solving `sum_{r<=l} (-1)^{m-r} c_{l,l-r} b_r = 0`
/// for `l = 1..=m`.
pub fn perturbed_coefficients(m: usize) -> Vec<f64> {
    let mut b = vec![1.0];
    for l in 1..=m {
        let partial: f64 = (0..l).map(|r| sign(m - r) * perturbation_coefficient(m, l, l - r) * b[r]).sum();
        b.push(-partial / (sign(m - l) * perturbation_coefficient(m, l, 0)));
    }
    b
}

/// `x_tau = sum_{l<=m} b_l tau^l C^l x0`.
pub fn perturbed_initial(dec: &OperatorDecomposition, m: usize, x0: &ComplexVector, tau: f64) -> Result<ComplexVector> {
    let c = dec.generator();
    if m == 0 {
        return Err(HypoError::Precondition("the perturbation needs m >= 1".into()));
    }
    if x0.len() != dec.dim() {
        return Err(HypoError::Dimension(format!("x0 has length {}, expected {}", x0.len(), dec.dim())));
    }
    if x0.norm() == 0.0 {
        return Err(HypoError::Precondition("x0 must be nonzero".into()));
    }
    let limit = 1f64.min(1.0 / spectral_norm(c));
    if !(0.0..limit).contains(&tau) {
        return Err(HypoError::Precondition(format!("tau = {tau} is outside [0, {limit})")));
    }
    let b = perturbed_coefficients(m);
    let mut out = x0.clone();
    let mut current = x0.clone();
    for (l, bl) in b.iter().enumerate().skip(1) {
        current = c * current;
        out += current.scale(bl * tau.powi(l as i32));
    }
    Ok(out)
}

/// `c_1(x0) = ||sqrt(C_H) C^m x0||^2 / ((2m+1)! binom(2m, m))`.
pub fn initial_data_constant(dec: &OperatorDecomposition, m: usize, x0: &ComplexVector) -> Result<f64> {
    let sqrt_r = psd_sqrt(dec.dissipative(), crate::index::ACCRETIVE_TOL)?;
    let mut y = x0.clone();
    for _ in 0..m {
        y = dec.generator() * y;
    }
    Ok((sqrt_r * y).norm_squared() / short_time_denominator(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{complexify, hermitian_split, RealMatrix};
    use crate::random::{gaussian_matrix, seeded_rng};
    use num_complex::Complex64;
    use num_rational::Ratio;

    fn real(rows: usize, v: &[f64]) -> ComplexMatrix {
        complexify(&RealMatrix::from_row_slice(rows, rows, v))
    }

    #[test]
    fn leading_coefficients() {
        let mut rng = seeded_rng(11);
        let c = gaussian_matrix(&mut rng, 4, 4);
        let data = taylor_u(&c, 6).unwrap();
        assert_eq!(data.u[0], ComplexMatrix::identity(4, 4));
        let expected = crate::operator::hermitian_part(&c).scale(-2.0);
        assert!((&data.u[1] - expected).norm() < 1e-13);
        let bound = 2.0 * spectral_norm(&c);
        for (j, u) in data.u.iter().enumerate() {
            assert!(spectral_norm(u) <= bound.powi(j as i32) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn diagonal_hermitian_case() {
        let d = [0.5, -1.0, 2.0];
        let c = real(3, &[d[0], 0.0, 0.0, 0.0, d[1], 0.0, 0.0, 0.0, d[2]]);
        let data = taylor_u(&c, 5).unwrap();
        for (j, u) in data.u.iter().enumerate() {
            for i in 0..3 {
                let expected = (-2.0 * d[i]).powi(j as i32);
                assert!((u[(i, i)].re - expected).abs() < 1e-12 * expected.abs().max(1.0));
            }
        }
    }

    #[test]
    fn series_matches_propagator() {
        let mut rng = seeded_rng(12);
        let g = gaussian_matrix(&mut rng, 4, 4);
        let c = g.scale(2.0 / spectral_norm(&g));
        let data = taylor_u(&c, 12).unwrap();
        let x = crate::random::random_unit_vector(&mut rng, 4);
        for t in [0.05, 0.2, 0.5] {
            let series = (x.dotc(&(data.q(t) * &x))).re - 1.0;
            let direct = g_function(&c, &x, t).unwrap();
            // Tail of the truncated series: (2||C|| t)^13 / 13! for ||C|| = 2.
            let tail = (4.0 * t).powi(13) / factorial(13) * 1.1;
            assert!((series - direct).abs() < 1e-9_f64.max(tail), "{t}: {series} vs {direct}");
        }
    }

    #[test]
    fn overflow_is_range_error() {
        let c = real(1, &[1e200]);
        assert!(matches!(taylor_u(&c, 4), Err(HypoError::Range(_))));
    }

    #[test]
    fn sum_of_squares_identity() {
        let mut rng = seeded_rng(13);
        let unit = |rng: &mut _| {
            let g = gaussian_matrix(rng, 4, 4);
            g.scale(1.0 / spectral_norm(&g))
        };
        let (u, v, w) = (unit(&mut rng), unit(&mut rng), unit(&mut rng));
        let check = sum_of_squares_residual(&u, &v, &w, 0, 0.3, 30).unwrap();
        assert!(check.residual <= 1e-10, "{check:?}");
        let check = sum_of_squares_residual(&u, &v, &w, 2, 0.2, 30).unwrap();
        assert!(check.residual <= 1e-10 && check.max_delta <= 1.0, "{check:?}");
        let zero = ComplexMatrix::zeros(4, 4);
        assert_eq!(sum_of_squares_residual(&u, &zero, &w, 1, 0.3, 30).unwrap().residual, 0.0);
        assert!(matches!(sum_of_squares_residual(&u, &v, &w, 1, 0.9, 5), Err(HypoError::Range(_))));
    }

    fn rational_coefficients(m: i64) -> Vec<Ratio<i64>> {
        let fact = |n: i64| (1..=n).product::<i64>();
        let binom = |n: i64, k: i64| fact(n) / (fact(k) * fact(n - k));
        let c = |l: i64, k: i64| {
            let p = m - l;
            Ratio::new(fact(2 * p + 1) * binom(k + p, p), fact(k + 2 * p + 1))
        };
        let sgn = |e: i64| if e % 2 == 0 { Ratio::from_integer(1) } else { Ratio::from_integer(-1) };
        let mut b = vec![Ratio::from_integer(1)];
        for l in 1..=m {
            let partial: Ratio<i64> = (0..l).map(|r| sgn(m - r) * c(l, l - r) * b[r as usize]).sum();
            b.push(-partial / (sgn(m - l) * c(l, 0)));
        }
        b
    }

    #[test]
    fn coefficients_match_exact_solution() {
        assert_eq!(rational_coefficients(1), vec![Ratio::from_integer(1), Ratio::new(1, 2)]);
        assert_eq!(rational_coefficients(2)[2], Ratio::new(1, 12));
        for m in 1..=4 {
            let exact = rational_coefficients(m);
            let float = perturbed_coefficients(m as usize);
            for (e, f) in exact.iter().zip(&float) {
                let e = *e.numer() as f64 / *e.denom() as f64;
                assert!((e - f).abs() < 1e-14, "m = {m}: {e} vs {f}");
            }
        }
    }

    #[test]
    fn perturbation_at_zero_is_identity() {
        let dec = hermitian_split(&real(2, &[0.0, 1.0, -1.0, 1.0])).unwrap();
        let x0 = ComplexVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.5)]);
        assert_eq!(perturbed_initial(&dec, 1, &x0, 0.0).unwrap(), x0);
        assert!(matches!(perturbed_initial(&dec, 1, &x0, 0.9), Err(HypoError::Precondition(_))));
        assert!(matches!(perturbed_initial(&dec, 0, &x0, 0.1), Err(HypoError::Precondition(_))));
    }

    #[test]
    fn perturbed_data_attains_the_constant() {
        let dec = hermitian_split(&real(2, &[0.0, 1.0, -1.0, 1.0])).unwrap();
        let x0 = ComplexVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let c1 = initial_data_constant(&dec, 1, &x0).unwrap();
        assert!((c1 - 1.0 / 12.0).abs() < 1e-15);
        let taus = [0.01, 0.02, 0.04, 0.08];
        let errs: Vec<f64> = taus
            .iter()
            .map(|&tau| {
                let x = perturbed_initial(&dec, 1, &x0, tau).unwrap();
                (g_function(dec.generator(), &x, tau).unwrap() + 2.0 * c1 * tau.powi(3)).abs()
            })
            .collect();
        for w in 0..taus.len() - 1 {
            let slope = (errs[w + 1] / errs[w]).ln() / (taus[w + 1] / taus[w]).ln();
            assert!(slope > 3.7, "slope {slope} {errs:?}");
        }
        // Without the perturbation the cubic terms do not cancel.
        let tau = 0.01;
        let raw = (g_function(dec.generator(), &x0, tau).unwrap() + 2.0 * c1 * tau.powi(3)).abs();
        assert!(raw > 0.1 * tau.powi(3), "{raw}");
    }
}
