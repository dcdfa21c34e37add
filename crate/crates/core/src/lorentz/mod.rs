//! Spectrally truncated Lorentz kinetic equation on the two-torus with
//! velocities on the unit circle.
//!
//! Velocity Fourier modes `j` run over `[-M, M]` and sit at position
//! `j + M`. The spatial mode `n` evolves by `C_n = sigma R - J_n`.

mod constants;
mod field;
mod verify;

pub use constants::{
    short_time_constants, constrained_infimum, delta1, delta3, jr_infimum, kappa3_convergence, kappa3_truncated,
    mu_delta, ShortTimeConstants, ConstrainedInfimum,
};
pub use field::{random_field, simulate, simulate_series, LorentzField, ModeCoefficient, SimulationReport};
pub use verify::{cubic_bound_verify, full_propagator_bounds, lattice_radii, BoundReport, SandwichReport};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::decay::DecayCurve;
use crate::error::{HypoError, Result};
use crate::operator::{expm, hermitian_eigenvalues, min_eig_hermitian, spectral_norm, ComplexMatrix, RealMatrix};

/// Default velocity cutoff for simulations.
pub const DEFAULT_M: usize = 64;
/// Slack allowed in the modal decay post-check.
pub const DECAY_BOUND_TOL: f64 = 1e-8;
/// Weight coupling used for the Lyapunov rate.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// `(3 - sqrt 5)/2`, the infimum of `R + J10 R J10*`.
pub fn kappa_limit() -> f64 {
    (3.0 - 5f64.sqrt()) / 2.0
}

/// The Lyapunov decay rate `1/2 - 1/(6 sqrt 2) - sqrt(7/16 + 1/sqrt 8)/3`.
pub fn lambda0() -> f64 {
    0.5 - 1.0 / (6.0 * 2f64.sqrt()) - (7.0 / 16.0 + 1.0 / 8f64.sqrt()).sqrt() / 3.0
}

fn require_cutoff(m: usize, min: usize) -> Result<()> {
    if m < min {
        return Err(HypoError::Dimension(format!("velocity cutoff M = {m} must be at least {min}")));
    }
    Ok(())
}

fn require_mode(n_abs: f64) -> Result<()> {
    if !n_abs.is_finite() || n_abs < 1.0 {
        return Err(HypoError::Parameter(format!("mode modulus {n_abs} must be at least 1")));
    }
    Ok(())
}

/// Position of velocity index `j` in a cutoff-`m` vector.
pub fn position(m: usize, j: i64) -> usize {
    (j + m as i64) as usize
}

/// Truncated dissipative and transport parts on `2M + 1` velocity modes.
#[derive(Debug, Clone)]
pub struct VelocityOperators {
    pub m: usize,
    pub r: ComplexMatrix,
    pub j10: ComplexMatrix,
}

impl VelocityOperators {
    pub fn dim(&self) -> usize {
        2 * self.m + 1
    }
}

pub fn build_velocity_operators(m: usize) -> Result<VelocityOperators> {
    require_cutoff(m, 1)?;
    let d = 2 * m + 1;
    let center = position(m, 0);
    let r = ComplexMatrix::from_fn(d, d, |a, b| {
        if a == b && a != center {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let j10 = ComplexMatrix::from_fn(d, d, |a, b| {
        if a.abs_diff(b) == 1 {
            Complex64::new(0.0, -0.5)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(VelocityOperators { m, r, j10 })
}

/// Principal `(2M+1)` block of an operator assembled at cutoff `M + 1`.
/// Interior truncations of a banded operator see both neighbours of each
/// boundary mode.
pub(crate) fn compress(m: usize, build: impl Fn(&VelocityOperators) -> ComplexMatrix) -> Result<ComplexMatrix> {
    let ops = build_velocity_operators(m + 1)?;
    let full = build(&ops);
    let d = 2 * m + 1;
    Ok(full.view((1, 1), (d, d)).into_owned())
}

/// Modal generator `sigma R - n_abs J10`.
#[derive(Debug, Clone)]
pub struct ModalGenerator {
    pub n_abs: f64,
    pub m: usize,
    pub sigma: f64,
    pub c: ComplexMatrix,
}

impl ModalGenerator {
    pub fn new(n_abs: f64, m: usize) -> Result<Self> {
        Self::with_sigma(n_abs, m, 1.0)
    }

    pub fn with_sigma(n_abs: f64, m: usize, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(HypoError::Parameter(format!("relaxation rate {sigma} must be positive")));
        }
        if !n_abs.is_finite() || n_abs < 0.0 {
            return Err(HypoError::Parameter(format!("mode modulus {n_abs} must be nonnegative")));
        }
        let ops = build_velocity_operators(m)?;
        let c = ops.r.scale(sigma) - ops.j10.scale(n_abs);
        Ok(Self { n_abs, m, sigma, c })
    }
}

/// Real form `sigma R + (n_abs/2) A` of the modal generator, where `A` has
/// `-1` above and `+1` below the diagonal. It equals `D* C D` for
/// `D = diag(i^j)`, so propagator norms agree.
pub fn real_generator(n_abs: f64, m: usize, sigma: f64) -> Result<RealMatrix> {
    require_cutoff(m, 1)?;
    let d = 2 * m + 1;
    let center = position(m, 0);
    let half = n_abs / 2.0;
    Ok(RealMatrix::from_fn(d, d, |a, b| {
        if a == b {
            if a == center {
                0.0
            } else {
                sigma
            }
        } else if b == a + 1 {
            -half
        } else if a == b + 1 {
            half
        } else {
            0.0
        }
    }))
}

/// `lambda_min(R + J10 R J10*)` on the cutoff-`M` compression.
pub fn kappa_truncated(m: usize) -> Result<f64> {
    min_eig_hermitian(&kappa_operator(m)?)
}

/// The compressed operator `R + J10 R J10*`.
pub fn kappa_operator(m: usize) -> Result<ComplexMatrix> {
    require_cutoff(m, 1)?;
    compress(m, |ops| &ops.r + &ops.j10 * &ops.r * ops.j10.adjoint())
}

/// Result of subtracting the nonnegative 3x3 blocks from `R + J10 R J10*`.
#[derive(Debug, Clone, Serialize)]
pub struct BlockCertificate {
    pub kappa: f64,
    pub block_min_eig: f64,
    pub max_offdiag: f64,
    pub min_diag: f64,
}

impl BlockCertificate {
    pub fn holds(&self, tol: f64) -> bool {
        self.block_min_eig >= -tol && self.max_offdiag <= tol && self.min_diag >= self.kappa - tol
    }
}

/// Subtracts the block `[[1/4 - k/2, 0, 1/4], [0, 0, 0], [1/4, 0, 5/4 - k/2]]`
/// at every `(j, j)` with `j >= 0`, and its antidiagonal mirror ending at
/// every `(j, j)` with `j <= 0`, where `k = (3 - sqrt 5)/2`.
pub fn block_certificate(m: usize) -> Result<BlockCertificate> {
    require_cutoff(m, 2)?;
    let kappa = kappa_limit();
    let mut rest = kappa_operator(m)?;
    let block = RealMatrix::from_row_slice(
        3,
        3,
        &[0.25 - kappa / 2.0, 0.0, 0.25, 0.0, 0.0, 0.0, 0.25, 0.0, 1.25 - kappa / 2.0],
    );
    let mut subtract = |start: usize, b: &RealMatrix| {
        for a in 0..3 {
            for c in 0..3 {
                rest[(start + a, start + c)] -= Complex64::new(b[(a, c)], 0.0);
            }
        }
    };
    let mirror = RealMatrix::from_fn(3, 3, |a, c| block[(2 - c, 2 - a)]);
    let center = position(m, 0);
    for start in center..=(2 * m - 2) {
        subtract(start, &block);
    }
    for end in 2..=center {
        subtract(end - 2, &mirror);
    }
    let d = rest.nrows();
    let max_offdiag = (0..d)
        .flat_map(|a| (0..d).filter(move |&c| c != a).map(move |c| (a, c)))
        .map(|(a, c)| rest[(a, c)].norm())
        .fold(0.0, f64::max);
    let min_diag = (0..d).map(|a| rest[(a, a)].re).fold(f64::INFINITY, f64::min);
    let block_min_eig = block.symmetric_eigenvalues().min();
    Ok(BlockCertificate { kappa, block_min_eig, max_offdiag, min_diag })
}

/// Weight matrix: identity plus `-/+ i alpha / n_abs` between `j = 0` and `j = 1`.
#[derive(Debug, Clone)]
pub struct LyapunovWeight {
    pub n_abs: f64,
    pub alpha: f64,
    pub m: usize,
    pub y: ComplexMatrix,
}

impl LyapunovWeight {
    pub fn new(n_abs: f64, alpha: f64, m: usize) -> Result<Self> {
        require_mode(n_abs)?;
        require_cutoff(m, 1)?;
        if !(alpha > 0.0 && alpha < n_abs) {
            return Err(HypoError::Precondition(format!(
                "weight is positive definite only for 0 < alpha < |n|, got alpha = {alpha}, |n| = {n_abs}"
            )));
        }
        let d = 2 * m + 1;
        let (p0, p1) = (position(m, 0), position(m, 1));
        let mut y = ComplexMatrix::identity(d, d);
        y[(p0, p1)] = Complex64::new(0.0, -alpha / n_abs);
        y[(p1, p0)] = Complex64::new(0.0, alpha / n_abs);
        Ok(Self { n_abs, alpha, m, y })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.y)
    }

    /// Ratio of extreme eigenvalues, `(n + alpha)/(n - alpha)`.
    pub fn condition(&self) -> f64 {
        (self.n_abs + self.alpha) / (self.n_abs - self.alpha)
    }
}

/// `C* Y + Y C` for the modal generator and weight.
pub fn lyapunov_lhs(n_abs: f64, alpha: f64, m: usize) -> Result<ComplexMatrix> {
    let w = LyapunovWeight::new(n_abs, alpha, m)?;
    let c = ModalGenerator::new(n_abs, m)?.c;
    Ok(c.adjoint() * &w.y + &w.y * c)
}

/// `lambda_min(C* Y + Y C - 2 lambda0 Y)`; nonnegative values certify the
/// Lyapunov inequality at this truncation.
pub fn lyapunov_margin(n_abs: f64, alpha: f64, lambda0: f64, m: usize) -> Result<f64> {
    require_cutoff(m, 2)?;
    let w = LyapunovWeight::new(n_abs, alpha, m)?;
    let lhs = lyapunov_lhs(n_abs, alpha, m)?;
    min_eig_hermitian(&(lhs - w.y.scale(2.0 * lambda0)))
}

/// The non-diagonal 4x4 part of `C* Y + Y C` on `j = -1..=2` for `alpha = 1/2`.
pub fn z_block(n_abs: f64) -> Result<ComplexMatrix> {
    let lhs = lyapunov_lhs(n_abs, DEFAULT_ALPHA, 2)?;
    let start = position(2, -1);
    Ok(lhs.view((start, start), (4, 4)).into_owned())
}

/// `sqrt((2n + 1)/(2n - 1)) e^{-lambda0 t}`, capped at 1.
pub fn modal_decay_bound(n_abs: f64, t: f64) -> f64 {
    let prefactor = ((2.0 * n_abs + 1.0) / (2.0 * n_abs - 1.0)).sqrt();
    (prefactor * (-lambda0() * t).exp()).min(1.0)
}

/// Modal propagator norms together with the exponential-bound post-check.
#[derive(Debug, Clone, Serialize)]
pub struct ModalDecay {
    pub n_abs: f64,
    pub curve: DecayCurve,
    pub bounds: Vec<f64>,
    pub worst_excess: f64,
    pub worst_time: f64,
}

impl ModalDecay {
    pub fn passed(&self) -> bool {
        self.worst_excess <= DECAY_BOUND_TOL
    }
}

/// `||e^{-C t}||` for `C = R - n_abs J10`, checked against the weighted
/// exponential bound.
pub fn modal_propagator_norm(n_abs: f64, m: usize, times: &[f64]) -> Result<ModalDecay> {
    require_mode(n_abs)?;
    let g = real_generator(n_abs, m, 1.0)?;
    let norms = real_propagator_norms(&g, times)?;
    let bounds: Vec<f64> = times.iter().map(|&t| modal_decay_bound(n_abs, t)).collect();
    let (worst_excess, worst_time) = norms
        .iter()
        .zip(&bounds)
        .zip(times)
        .map(|((n, b), t)| (n - b, *t))
        .fold((f64::NEG_INFINITY, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc });
    let curve = DecayCurve { times: times.to_vec(), norms, generator_norm: spectral_norm(&g) };
    Ok(ModalDecay { n_abs, curve, bounds, worst_excess, worst_time })
}

pub(crate) fn real_propagator_norms(g: &RealMatrix, times: &[f64]) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(HypoError::Parameter("times must be finite and nonnegative".into()));
    }
    let minus_g: DMatrix<f64> = -g;
    times
        .par_iter()
        .map(|&t| expm(&minus_g.scale(t)).map(|p| spectral_norm(&p)))
        .collect()
}
