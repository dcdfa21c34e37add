//! The uniform short-time constant chain for the modal propagators.

use serde::Serialize;

use super::{build_velocity_operators, compress, lambda0, kappa_truncated, require_cutoff, require_mode};
use crate::error::{HypoError, Result};
use crate::operator::{hermitian_eigen, min_eig_hermitian, ComplexMatrix};

/// Smallest cutoff for which the constants are considered settled.
pub const MIN_CONSTANTS_CUTOFF: usize = 32;
const ROOT_LO: f64 = 1e-8;
const ROOT_HI: f64 = 10.0;
const ROOT_TOL: f64 = 1e-12;
const R_SEARCH_HI: f64 = 1e12;

#[derive(Debug, Clone, Serialize)]
pub struct ShortTimeConstants {
    pub m: usize,
    pub kappa1: f64,
    pub kappa3: f64,
    pub delta: f64,
    /// `inf ||sqrt(R) J10 x||` over unit `x` with `<x, R x> <= delta`.
    pub jr_infimum: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub tau: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c: f64,
    pub r: f64,
    pub lambda0: f64,
}

impl ShortTimeConstants {
    /// True when every listed constant is finite and strictly positive.
    pub fn all_positive(&self) -> bool {
        [
            self.kappa1, self.kappa3, self.delta, self.jr_infimum, self.tau1, self.tau2, self.tau3, self.tau,
            self.c1, self.c2, self.c3, self.c, self.r, self.lambda0,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0)
    }

    /// Largest violation of the defining relations between the constants.
    pub fn relation_residual(&self) -> f64 {
        let c2 = self.c1 / (1.0 + 1.0 / (self.lambda0 * self.tau)).powi(3);
        [
            self.delta - (self.kappa1 / 5.0).min(self.kappa3 / 2.0),
            self.c1 - self.delta / 12.0,
            self.tau - self.tau1.min(self.tau2).min(self.tau3).min(1.0),
            self.c2 - c2,
            self.c - self.c2.min(self.c3),
        ]
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
    }

    /// Step time `t_n = tau/n + ln(1 + 1/(n - 1/2))/(2 lambda0)`.
    pub fn switch_time(&self, n: f64) -> f64 {
        switch_time(self.tau, self.lambda0, n)
    }
}

fn switch_time(tau: f64, lambda0: f64, n: f64) -> f64 {
    tau / n + (1.0 / (n - 0.5)).ln_1p() / (2.0 * lambda0)
}

/// `sum_{j >= first} x^j / j!` for `x >= 0`.
fn exp_tail(x: f64, first: usize) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for j in 0..1000 {
        if j >= first {
            sum += term;
            if term <= f64::EPSILON * sum {
                break;
            }
        }
        term *= x / (j + 1) as f64;
    }
    sum
}

/// `(e^{4 tau} - 1 - 4 tau)/(2 tau)`.
pub fn delta1(tau: f64) -> f64 {
    exp_tail(4.0 * tau, 2) / (2.0 * tau)
}

/// `(e^{4 tau} - 1 - 4 tau - 8 tau^2 - 32 tau^3/3)/(2 tau^3)`.
pub fn delta3(tau: f64) -> f64 {
    exp_tail(4.0 * tau, 4) / (2.0 * tau.powi(3))
}

/// Root of an increasing function `f = target` on `[1e-8, 10]`.
fn increasing_root(name: &str, f: impl Fn(f64) -> f64, target: f64) -> Result<f64> {
    let (mut lo, mut hi) = (ROOT_LO, ROOT_HI);
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo < target && target < fhi) {
        return Err(HypoError::Numerical(format!(
            "{name}: target {target:e} not bracketed, f({lo:e}) = {flo:e}, f({hi}) = {fhi:e}"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm - target).abs() <= ROOT_TOL * target.max(1.0) || hi - lo <= f64::EPSILON * mid {
            return Ok(mid);
        }
        if fm < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `inf <x, A x>` over unit `x` with `<x, R x> <= delta`, computed through
/// the concave dual `max_{mu >= 0} lambda_min(A + mu R) - mu delta`.
#[derive(Debug, Clone, Serialize)]
pub struct ConstrainedInfimum {
    pub value: f64,
    pub multiplier: f64,
    /// `<x, A x>` and `<x, R x>` at the minimizing eigenvector of `A + mu R`.
    pub primal_value: f64,
    pub primal_constraint: f64,
}

pub fn constrained_infimum(a: &ComplexMatrix, r: &ComplexMatrix, delta: f64) -> Result<ConstrainedInfimum> {
    let dual = |mu: f64| -> Result<f64> { Ok(min_eig_hermitian(&(a + r.scale(mu)))? - mu * delta) };
    let mut hi = 1.0;
    while dual(hi)? >= dual(0.5 * hi)? {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(HypoError::Numerical("dual function does not decrease; constraint is vacuous".into()));
        }
    }
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut up) = (0.0, hi);
    let mut x1 = up - invphi * (up - lo);
    let mut x2 = lo + invphi * (up - lo);
    let (mut f1, mut f2) = (dual(x1)?, dual(x2)?);
    while up - lo > 1e-12 * hi {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (up - lo);
            f2 = dual(x2)?;
        } else {
            up = x2;
            x2 = x1;
            f2 = f1;
            x1 = up - invphi * (up - lo);
            f1 = dual(x1)?;
        }
    }
    let mu = 0.5 * (lo + up);
    let value = dual(mu)?.max(dual(0.0)?);
    let multiplier = if dual(0.0)? >= dual(mu)? { 0.0 } else { mu };
    let (_, vecs) = hermitian_eigen(&(a + r.scale(multiplier)))?;
    let x = vecs.column(0);
    let form = |m: &ComplexMatrix| (x.adjoint() * m * x)[(0, 0)].re;
    Ok(ConstrainedInfimum { value, multiplier, primal_value: form(a), primal_constraint: form(r) })
}

/// `inf ||sqrt(R) J10 x||` over unit `x` with `<x, R x> <= delta`.
pub fn jr_infimum(delta: f64, m: usize) -> Result<ConstrainedInfimum> {
    require_cutoff(m, 1)?;
    let a = compress(m, |ops| ops.j10.adjoint() * &ops.r * &ops.j10)?;
    let r = build_velocity_operators(m)?.r;
    constrained_infimum(&a, &r, delta)
}

/// `inf ||sqrt(R) C_n x||^2` over unit `x` with `<x, R x> <= delta`.
pub fn mu_delta(n_abs: f64, delta: f64, m: usize) -> Result<ConstrainedInfimum> {
    require_mode(n_abs)?;
    require_cutoff(m, 1)?;
    let a = compress(m, |ops| {
        let c = &ops.r - ops.j10.scale(n_abs);
        c.adjoint() * &ops.r * c
    })?;
    let r = build_velocity_operators(m)?.r;
    constrained_infimum(&a, &r, delta)
}

/// `lambda_min(R + C* R C)` for `C = R - J10` on the cutoff-`M` compression.
pub fn kappa3_truncated(m: usize) -> Result<f64> {
    require_cutoff(m, 1)?;
    let op = compress(m, |ops| {
        let c = &ops.r - &ops.j10;
        &ops.r + c.adjoint() * &ops.r * c
    })?;
    min_eig_hermitian(&op)
}

/// `kappa3` at each cutoff, for judging convergence in `M`.
pub fn kappa3_convergence(cutoffs: &[usize]) -> Result<Vec<(usize, f64)>> {
    cutoffs.iter().map(|&m| kappa3_truncated(m).map(|k| (m, k))).collect()
}

pub fn short_time_constants(m: usize) -> Result<ShortTimeConstants> {
    if m < MIN_CONSTANTS_CUTOFF {
        return Err(HypoError::Precondition(format!(
            "constants need M >= {MIN_CONSTANTS_CUTOFF}, got {m}"
        )));
    }
    let lambda0 = lambda0();
    let kappa1 = kappa_truncated(m)?;
    let kappa3 = kappa3_truncated(m)?;
    let delta = (kappa1 / 5.0).min(kappa3 / 2.0);
    let tau1 = increasing_root("delta1", delta1, delta)?;
    let jr_infimum = jr_infimum(delta, m)?.value.max(0.0).sqrt();
    let tau2 = (12.0 * delta).sqrt() / (jr_infimum + delta.sqrt());
    let tau3 = increasing_root("delta3", delta3, delta / 12.0)?;
    let tau = tau1.min(tau2).min(tau3).min(1.0);
    let c1 = delta / 12.0;
    let c2 = c1 / (1.0 + 1.0 / (lambda0 * tau)).powi(3);

    let (mut lo, mut hi) = (1.0, R_SEARCH_HI);
    if switch_time(tau, lambda0, hi) >= tau {
        return Err(HypoError::Numerical(format!("no r <= {R_SEARCH_HI:e} with t_r < tau = {tau:e}")));
    }
    while hi - lo > f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if switch_time(tau, lambda0, mid) < tau {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let r = hi;
    // The endpoint factor is 1 - O(1e-15); work with its logarithm.
    let log_endpoint = (-delta * tau.powi(3) / (12.0 * r)).ln_1p() + 0.5 * (1.0 / (r - 0.5)).ln_1p()
        - lambda0 * tau * (r - 1.0) / r;
    let c3 = -log_endpoint.exp_m1() / tau.powi(3);
    let c = c2.min(c3);
    Ok(ShortTimeConstants {
        m,
        kappa1,
        kappa3,
        delta,
        jr_infimum,
        tau1,
        tau2,
        tau3,
        tau,
        c1,
        c2,
        c3,
        c,
        r,
        lambda0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::kappa_limit;
    use crate::random::{random_unit_vector, seeded_rng};

    #[test]
    fn delta_functions_match_closed_forms() {
        for tau in [0.05f64, 0.3, 1.0, 2.5] {
            let d1 = ((4.0 * tau).exp() - 1.0 - 4.0 * tau) / (2.0 * tau);
            let d3 = ((4.0 * tau).exp() - 1.0 - 4.0 * tau - 8.0 * tau * tau - 32.0 / 3.0 * tau.powi(3))
                / (2.0 * tau.powi(3));
            assert!((delta1(tau) - d1).abs() <= 1e-12 * d1);
            assert!((delta3(tau) - d3).abs() <= 1e-10 * d3);
        }
        assert!((delta3(1e-6) - 16.0 / 3.0 * 1e-6).abs() < 1e-11);
    }

    #[test]
    fn root_bracket_failure_reports_values() {
        let err = increasing_root("flat", |_| 1.0, 2.0).unwrap_err();
        assert!(matches!(err, HypoError::Numerical(ref s) if s.contains("flat")));
    }

    #[test]
    fn constants_relations_m32() {
        let k = short_time_constants(32).unwrap();
        assert!(k.all_positive(), "{k:?}");
        assert!(k.relation_residual() == 0.0);
        assert!((delta1(k.tau1) - k.delta).abs() < 1e-12);
        assert!((delta3(k.tau3) - k.delta / 12.0).abs() < 1e-12);
        assert!((k.c3 - k.c1 / k.r).abs() <= 1e-3 * k.c3, "{} vs {}", k.c3, k.c1 / k.r);
        assert!(k.switch_time(k.r) < k.tau);
        assert!(k.switch_time(k.r * (1.0 - 1e-9)) >= k.tau - 1e-15);
        assert!(k.jr_infimum >= 2.0 * k.delta.sqrt() - 1e-12);
        assert!((k.kappa1 - kappa_limit()).abs() < 1e-9);
        assert!(matches!(short_time_constants(8), Err(HypoError::Precondition(_))));
    }

    #[test]
    fn jr_infimum_dual_matches_primal_and_samples() {
        let m = 16;
        let delta = 0.07;
        let inf = jr_infimum(delta, m).unwrap();
        assert!(inf.primal_constraint <= delta + 1e-6);
        assert!((inf.primal_value - inf.value).abs() < 1e-6);
        let a = compress(m, |ops| ops.j10.adjoint() * &ops.r * &ops.j10).unwrap();
        let r = build_velocity_operators(m).unwrap().r;
        let mut rng = seeded_rng(3);
        let center = m;
        for _ in 0..2000 {
            let mut x = random_unit_vector(&mut rng, 2 * m + 1);
            // Push most of the mass onto j = 0 so that the constraint can hold.
            x[center] *= 50.0;
            let x = x.normalize();
            let lam = (x.adjoint() * &r * &x)[(0, 0)].re;
            if lam <= delta {
                assert!((x.adjoint() * &a * &x)[(0, 0)].re >= inf.value - 1e-12);
            }
        }
    }

    #[test]
    fn mu_delta_bounds() {
        let delta = 0.07;
        for n in [1.0, 2.0, 4.0] {
            let mu = mu_delta(n, delta, 24).unwrap().value.sqrt();
            assert!(mu >= (2.0 * n - 1.0) * delta.sqrt() - 1e-9, "n = {n}: {mu}");
            assert!(mu <= n + delta.sqrt() + 1e-9);
        }
    }

    #[test]
    fn kappa3_settles_in_m() {
        let sweep = kappa3_convergence(&[16, 32, 64]).unwrap();
        assert!((sweep[2].1 - sweep[1].1).abs() < 1e-10);
        assert!(sweep.iter().all(|(_, k)| *k > 0.0));
    }
}
