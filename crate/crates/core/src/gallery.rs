//! Worked examples with known indices, spectra and propagator norms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decay::{propagator_norm_curve, short_time_constant, uniform_grid};
use crate::error::{HypoError, Result};
use crate::index::{index_via_powers, IndexMethod, IndexOptions, DEFAULT_RANK_TOL};
use crate::operator::{
    eigenvalues, expm, hermitian_eigenvalues, hermitian_split, spectral_norm, ComplexMatrix, OperatorDecomposition,
};

/// A named example and its size parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ExampleSpec {
    /// `[[0, k], [-k, 1]]`.
    Ck { k: usize },
    /// `k x k` tridiagonal block with `+1` above, `-1` below the diagonal
    /// and a single dissipative corner entry.
    Ek { k: usize },
    /// Blocks `[[1/n, 1], [-1, 1]]` for `n = 1..=blocks`.
    UniformBlockFamily { blocks: usize },
    /// `R = diag(1, 1/2, ..., 1/dim)`, `J = tridiag(1, 0, -1)`.
    CompactRFamily { dim: usize },
    /// `diag(E_1, ..., E_{k_max})`.
    EkBlockdiag { k_max: usize },
    /// `diag(r_1 E_1, ..., r_{k_max} E_{k_max})` with the rescaling factors
    /// of [`ek_rescale_factor`].
    EkRescaled { k_max: usize },
}

fn require_positive(name: &str, value: usize) -> Result<()> {
    if value == 0 {
        return Err(HypoError::Parameter(format!("{name} must be at least 1")));
    }
    Ok(())
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn ck(k: usize) -> Result<ComplexMatrix> {
    require_positive("k", k)?;
    let k = k as f64;
    Ok(ComplexMatrix::from_row_slice(2, 2, &[re(0.0), re(k), re(-k), re(1.0)]))
}

pub fn ek(k: usize) -> Result<ComplexMatrix> {
    require_positive("k", k)?;
    let mut m = ComplexMatrix::zeros(k, k);
    for i in 0..k - 1 {
        m[(i, i + 1)] = re(1.0);
        m[(i + 1, i)] = re(-1.0);
    }
    m[(k - 1, k - 1)] = re(1.0);
    Ok(m)
}

fn block_diagonal(blocks: &[ComplexMatrix]) -> ComplexMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = ComplexMatrix::zeros(n, n);
    let mut offset = 0;
    for b in blocks {
        out.view_mut((offset, offset), b.shape()).copy_from(b);
        offset += b.nrows();
    }
    out
}

/// `(R, J)` of the compact-`R` family.
pub fn compact_r_parts(dim: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    require_positive("dim", dim)?;
    let r = ComplexMatrix::from_fn(dim, dim, |i, j| if i == j { re(1.0 / (i + 1) as f64) } else { re(0.0) });
    let j = ComplexMatrix::from_fn(dim, dim, |i, j| {
        if i == j + 1 {
            re(1.0)
        } else if j == i + 1 {
            re(-1.0)
        } else {
            re(0.0)
        }
    });
    Ok((r, j))
}

pub fn make_example(spec: ExampleSpec) -> Result<ComplexMatrix> {
    match spec {
        ExampleSpec::Ck { k } => ck(k),
        ExampleSpec::Ek { k } => ek(k),
        ExampleSpec::UniformBlockFamily { blocks } => {
            require_positive("blocks", blocks)?;
            let blocks: Vec<ComplexMatrix> = (1..=blocks)
                .map(|n| ComplexMatrix::from_row_slice(2, 2, &[re(1.0 / n as f64), re(1.0), re(-1.0), re(1.0)]))
                .collect();
            Ok(block_diagonal(&blocks))
        }
        ExampleSpec::CompactRFamily { dim } => {
            let (r, j) = compact_r_parts(dim)?;
            Ok(r - j)
        }
        ExampleSpec::EkBlockdiag { k_max } => {
            require_positive("k_max", k_max)?;
            let blocks = (1..=k_max).map(ek).collect::<Result<Vec<_>>>()?;
            Ok(block_diagonal(&blocks))
        }
        ExampleSpec::EkRescaled { k_max } => {
            require_positive("k_max", k_max)?;
            let blocks = (1..=k_max)
                .map(|k| {
                    let factor = ek_rescale_factor(k, &default_rescale_grid(k)?)?;
                    Ok(ek(k)?.scale(factor.r))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(block_diagonal(&blocks))
        }
    }
}

/// `sqrt(e^{-t} m_+(t))` with `m_+ = w + sqrt(w^2 - 1)`,
/// `w = (1 - a^2 cos(d t)) / (1 - a^2)`, `d = sqrt(4k^2 - 1)`, `a = 1/(2k)`.
pub fn ck_closed_form_norm(k: usize, t: f64) -> f64 {
    let k = k as f64;
    let delta = (4.0 * k * k - 1.0).sqrt();
    let alpha2 = 1.0 / (4.0 * k * k);
    let w = (1.0 - alpha2 * (delta * t).cos()) / (1.0 - alpha2);
    let m_plus = w + (w * w - 1.0).max(0.0).sqrt();
    ((-t).exp() * m_plus).sqrt()
}

/// First positive time at which the two eigenvalues of `P(t)* P(t)` touch.
pub fn ck_kink_time(k: usize) -> f64 {
    2.0 * std::f64::consts::PI / (4.0 * (k * k) as f64 - 1.0).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct CkReport {
    pub k: usize,
    pub eigenvalues: Vec<Complex64>,
    /// Distance to `(1 +- i sqrt(4k^2 - 1))/2`.
    pub eigenvalue_error: f64,
    /// `max_t ||P(t)|| e^{t/2}` on the grid.
    pub envelope_max: f64,
    /// `sqrt((2k+1)/(2k-1))`.
    pub envelope_bound: f64,
    pub closed_form_error: f64,
    pub short_time_constant: f64,
    pub expected_constant: f64,
    pub passed: bool,
}

/// Checks the spectrum, the long-time envelope, the closed-form norm and
/// the short-time constant `k^2/12` of `C_k`.
pub fn ck_properties(k: usize) -> Result<CkReport> {
    let c = ck(k)?;
    let kf = k as f64;
    let imag = (4.0 * kf * kf - 1.0).sqrt() / 2.0;
    let mut ev = eigenvalues(&c)?;
    ev.sort_by(|a, b| a.im.total_cmp(&b.im));
    let expected = [Complex64::new(0.5, -imag), Complex64::new(0.5, imag)];
    let eigenvalue_error = ev.iter().zip(&expected).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let curve = propagator_norm_curve(&c, &uniform_grid(30.0, 600))?;
    let envelope_max = curve.times.iter().zip(&curve.norms).map(|(t, n)| n * (t / 2.0).exp()).fold(0.0, f64::max);
    let envelope_bound = ((2.0 * kf + 1.0) / (2.0 * kf - 1.0)).sqrt();
    let closed_form_error = curve
        .times
        .iter()
        .zip(&curve.norms)
        .filter(|(t, _)| **t <= 3.0)
        .map(|(t, n)| (n - ck_closed_form_norm(k, *t)).abs())
        .fold(0.0, f64::max);
    let stc = short_time_constant(&hermitian_split(&c)?, 1, DEFAULT_RANK_TOL)?;
    let expected_constant = kf * kf / 12.0;
    let passed = eigenvalue_error <= 1e-10 * kf
        && envelope_max <= envelope_bound + 1e-9
        && closed_form_error <= 1e-8
        && (stc - expected_constant).abs() <= 1e-12 * expected_constant;
    Ok(CkReport {
        k,
        eigenvalues: ev,
        eigenvalue_error,
        envelope_max,
        envelope_bound,
        closed_form_error,
        short_time_constant: stc,
        expected_constant,
        passed,
    })
}

/// `min Re sigma(C)`.
pub fn spectral_gap(c: &ComplexMatrix) -> Result<f64> {
    Ok(eigenvalues(c)?.iter().map(|z| z.re).fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Serialize)]
pub struct EkEntry {
    pub k: usize,
    /// Index per method, in the order of [`IndexMethod::ALL`].
    pub indices: Vec<Option<usize>>,
    pub spectral_gap: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EkReport {
    pub entries: Vec<EkEntry>,
    /// Gap of `diag(E_1, ..., E_{k_max})`.
    pub blockdiag_gap: f64,
    pub min_block_gap: f64,
    pub passed: bool,
}

/// Index `k - 1` under every method and `0 < mu_k <= 1/k` for `k <= k_max`,
/// plus the gap of the block-diagonal assembly.
pub fn ek_properties(k_max: usize) -> Result<EkReport> {
    if !(1..=12).contains(&k_max) {
        return Err(HypoError::Parameter(format!("k_max = {k_max} is outside 1..=12")));
    }
    let mut entries = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let c = ek(k)?;
        let dec = hermitian_split(&c)?;
        let opts = IndexOptions::defaults(&dec);
        let indices = IndexMethod::ALL
            .iter()
            .map(|&m| index_via_powers(&dec, m, opts).map(|r| r.index))
            .collect::<Result<Vec<_>>>()?;
        let gap = spectral_gap(&c)?;
        let passed = indices.iter().all(|i| *i == Some(k - 1)) && gap > 0.0 && gap <= 1.0 / k as f64 + 1e-12;
        entries.push(EkEntry { k, indices, spectral_gap: gap, passed });
    }
    let blockdiag_gap = spectral_gap(&make_example(ExampleSpec::EkBlockdiag { k_max })?)?;
    let min_block_gap = entries.iter().map(|e| e.spectral_gap).fold(f64::INFINITY, f64::min);
    let passed = entries.iter().all(|e| e.passed) && (blockdiag_gap - min_block_gap).abs() <= 1e-10;
    Ok(EkReport { entries, blockdiag_gap, min_block_gap, passed })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RescaleFactor {
    pub mu: f64,
    /// Empirical envelope constant `max_t ||P(t)|| e^{mu t}`.
    pub c: f64,
    /// `(1 + ln c) / mu`.
    pub r: f64,
    /// `||e^{-r E_k}||`.
    pub norm_at_one: f64,
    /// The envelope maximum sits at the last grid point.
    pub boundary_warning: bool,
}

/// `[0, 40/mu_k]` with 400 steps.
pub fn default_rescale_grid(k: usize) -> Result<Vec<f64>> {
    let mu = spectral_gap(&ek(k)?)?;
    Ok(uniform_grid(40.0 / mu, 400))
}

/// `r_k = (1 + ln c_k)/mu_k` for `E_k`, with `c_k` the envelope constant on `t_grid`.
pub fn ek_rescale_factor(k: usize, t_grid: &[f64]) -> Result<RescaleFactor> {
    let c = ek(k)?;
    let mu = spectral_gap(&c)?;
    let curve = propagator_norm_curve(&c, t_grid)?;
    let (arg, envelope) = curve
        .times
        .iter()
        .zip(&curve.norms)
        .map(|(t, n)| n * (mu * t).exp())
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let envelope = envelope.max(1.0);
    let r = (1.0 + envelope.ln()) / mu;
    let norm_at_one = spectral_norm(&expm(&c.scale(-r))?);
    Ok(RescaleFactor { mu, c: envelope, r, norm_at_one, boundary_warning: arg + 1 == curve.len() && curve.len() > 1 })
}

/// `lambda_min(sum_{j<=m} J^j R (J*)^j)` for the compact-`R` family.
pub fn compact_r_lambda(m: usize, dim: usize) -> Result<f64> {
    let (r, j) = compact_r_parts(dim)?;
    let mut sum = r.clone();
    let mut term = r;
    for _ in 0..m {
        term = &j * term * j.adjoint();
        sum += &term;
    }
    Ok(hermitian_eigenvalues(&sum)[0])
}

/// The decomposition of any example.
pub fn example_decomposition(spec: ExampleSpec) -> Result<OperatorDecomposition> {
    hermitian_split(&make_example(spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::equivalence_audit;

    #[test]
    fn constructors() {
        assert_eq!(ck(2).unwrap(), ComplexMatrix::from_row_slice(2, 2, &[re(0.0), re(2.0), re(-2.0), re(1.0)]));
        let e3 = ek(3).unwrap();
        let dec = hermitian_split(&e3).unwrap();
        let r = dec.dissipative();
        assert_eq!(r[(2, 2)], re(1.0));
        assert_eq!(r.iter().filter(|z| z.norm() > 0.0).count(), 1);
        assert_eq!(e3[(0, 1)], re(1.0));
        assert_eq!(e3[(1, 0)], re(-1.0));
        let (r, j) = compact_r_parts(4).unwrap();
        assert_eq!(r[(3, 3)], re(0.25));
        assert_eq!(j[(1, 0)], re(1.0));
        assert_eq!(j[(0, 1)], re(-1.0));
        assert!(matches!(make_example(ExampleSpec::Ck { k: 0 }), Err(HypoError::Parameter(_))));
        assert_eq!(make_example(ExampleSpec::EkBlockdiag { k_max: 4 }).unwrap().nrows(), 10);
    }

    #[test]
    fn closed_form_matches_expm() {
        for k in [1, 2, 5] {
            assert_eq!(ck_closed_form_norm(k, 0.0), 1.0);
            let report = ck_properties(k).unwrap();
            assert!(report.passed, "{report:?}");
        }
    }

    #[test]
    fn kink_time_is_where_eigenvalues_touch() {
        let k = 2;
        let tk = ck_kink_time(k);
        let p = expm(&ck(k).unwrap().scale(-tk)).unwrap();
        let ev = hermitian_eigenvalues(&(p.adjoint() * &p));
        assert!((ev[1] - ev[0]).abs() < 1e-7, "{ev:?}");
        let p = expm(&ck(k).unwrap().scale(-0.5 * tk)).unwrap();
        let ev = hermitian_eigenvalues(&(p.adjoint() * &p));
        assert!(ev[1] - ev[0] > 1e-3);
    }

    #[test]
    fn ek_ladder() {
        let report = ek_properties(6).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.entries[0].spectral_gap, 1.0);
    }

    #[test]
    fn rescale_factors() {
        let f1 = ek_rescale_factor(1, &default_rescale_grid(1).unwrap()).unwrap();
        assert!((f1.mu - 1.0).abs() < 1e-12 && (f1.c - 1.0).abs() < 1e-12 && (f1.r - 1.0).abs() < 1e-12, "{f1:?}");
        assert!((f1.norm_at_one - (-1f64).exp()).abs() < 1e-12);
        let mut last = 0.0;
        for k in 1..=8 {
            let f = ek_rescale_factor(k, &default_rescale_grid(k).unwrap()).unwrap();
            assert!(f.norm_at_one <= (-1f64).exp() + 1e-6, "{k}: {f:?}");
            assert!(f.r > last, "{k}: {f:?}");
            assert!(!f.boundary_warning);
            if k == 4 {
                assert!(f.r >= 1.0 / f.mu && f.r >= 4.0);
            }
            last = f.r;
        }
    }

    #[test]
    fn compact_r_decay() {
        for m in [1, 2] {
            let values: Vec<f64> = [8, 16, 32, 64].iter().map(|&d| compact_r_lambda(m, d).unwrap()).collect();
            assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
            assert!(values[3] < 0.1 * values[0], "{values:?}");
        }
    }

    #[test]
    fn uniform_block_family_has_uniform_kappa() {
        for blocks in [2, 5, 20, 100] {
            let dec = example_decomposition(ExampleSpec::UniformBlockFamily { blocks }).unwrap();
            let opts = IndexOptions { kappa_threshold: 1.0, m_max: 4 };
            let jp = index_via_powers(&dec, IndexMethod::JPowers, opts).unwrap();
            assert_eq!(jp.index, Some(1));
            assert!((jp.kappa.unwrap() - (1.0 + 1.0 / blocks as f64)).abs() < 1e-12);
            if blocks >= 5 {
                // lambda_min(R) = 1/blocks drops below the threshold, the
                // first partial sums of the other methods stay above it.
                let opts = IndexOptions { kappa_threshold: 0.25, m_max: 4 };
                for method in IndexMethod::ALL {
                    assert_eq!(index_via_powers(&dec, method, opts).unwrap().index, Some(1), "{method:?}");
                }
            }
        }
    }

    #[test]
    fn gallery_passes_audit() {
        let specs = [
            ExampleSpec::Ck { k: 1 },
            ExampleSpec::Ck { k: 3 },
            ExampleSpec::Ek { k: 4 },
            ExampleSpec::UniformBlockFamily { blocks: 3 },
            ExampleSpec::CompactRFamily { dim: 6 },
            ExampleSpec::EkBlockdiag { k_max: 3 },
            ExampleSpec::EkRescaled { k_max: 3 },
        ];
        for spec in specs {
            let dec = example_decomposition(spec).unwrap();
            let audit = equivalence_audit(&dec, IndexOptions::defaults(&dec), DEFAULT_RANK_TOL).unwrap();
            assert!(audit.methods_agree, "{spec:?}: {audit:?}");
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ExampleSpec::Ek { k: 3 };
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(text, r#"{"name":"ek","k":3}"#);
        assert_eq!(serde_json::from_str::<ExampleSpec>(&text).unwrap(), spec);
    }
}
