//! Hypocoercivity index by four equivalent partial-sum criteria, Kalman-type
//! kernel defects, and detection of `J`-eigenvectors inside `ker R`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{HypoError, Result};
use crate::operator::{
    hermitian_eigen, hermitian_eigenvalues, leading_singular_subspaces, null_space, orthogonal_complement, psd_sqrt,
    require_square, singular_values,
    spectral_norm, vstack, ComplexMatrix, ComplexVector, OperatorDecomposition,
};

/// Relative tolerance on `lambda_min(C_H)` for the accretivity precondition.
pub const ACCRETIVE_TOL: f64 = 1e-10;
/// Default relative rank tolerance.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Relative width used to cluster eigenvalues of `J`.
pub const CLUSTER_TOL: f64 = 1e-8;

/// The partial sum whose coercivity defines the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMethod {
    /// `sum_j (C*)^j C_H C^j`
    CPowersRight,
    /// `sum_j C^j C_H (C*)^j`
    CPowersLeft,
    /// `sum_j J^j R (J*)^j`
    JPowers,
    /// `sum_j K_j* K_j` with `K_0 = sqrt(R)`, `K_{j+1} = [J, K_j]`
    Commutators,
}

impl IndexMethod {
    pub const ALL: [IndexMethod; 4] =
        [IndexMethod::CPowersRight, IndexMethod::CPowersLeft, IndexMethod::JPowers, IndexMethod::Commutators];

    pub fn name(self) -> &'static str {
        match self {
            IndexMethod::CPowersRight => "c_powers_right",
            IndexMethod::CPowersLeft => "c_powers_left",
            IndexMethod::JPowers => "j_powers",
            IndexMethod::Commutators => "commutators",
        }
    }
}

/// Threshold and search depth for index decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexOptions {
    pub kappa_threshold: f64,
    pub m_max: usize,
}

impl IndexOptions {
    /// `kappa_threshold = 1e-9 ||C||`, `m_max = n`.
    pub fn defaults(dec: &OperatorDecomposition) -> Self {
        let scale = spectral_norm(dec.generator());
        let kappa_threshold = if scale > 0.0 { 1e-9 * scale } else { f64::MIN_POSITIVE };
        Self { kappa_threshold, m_max: dec.dim() }
    }
}

fn serialize_index<S: Serializer>(index: &Option<usize>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match index {
        Some(m) => s.serialize_u64(*m as u64),
        None => s.serialize_str("none-up-to-m_max"),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexReport {
    #[serde(serialize_with = "serialize_index")]
    pub index: Option<usize>,
    /// `lambda_min` of the partial sum at the reported index.
    pub kappa: Option<f64>,
    pub method: IndexMethod,
    pub per_m_min_eigs: Vec<f64>,
    pub m_max: usize,
    pub kappa_threshold: f64,
    /// Roundoff floor at the last examined `m`.
    pub roundoff_floor: f64,
}

fn check_accretive(dec: &OperatorDecomposition) -> Result<()> {
    let lmin = dec.accretivity();
    let tol = ACCRETIVE_TOL * dec.generator().norm().max(1.0);
    if lmin < -tol {
        return Err(HypoError::Precondition(format!(
            "generator is not accretive: lambda_min(C_H) = {lmin:e}"
        )));
    }
    Ok(())
}

/// Iterates the PSD terms of the chosen partial sum.
struct TermSequence<'a> {
    dec: &'a OperatorDecomposition,
    method: IndexMethod,
    power: ComplexMatrix,
}

impl<'a> TermSequence<'a> {
    fn new(dec: &'a OperatorDecomposition, method: IndexMethod) -> Result<Self> {
        let n = dec.dim();
        let power = match method {
            IndexMethod::Commutators => psd_sqrt(dec.dissipative(), ACCRETIVE_TOL)?,
            _ => ComplexMatrix::identity(n, n),
        };
        Ok(Self { dec, method, power })
    }

    fn next_term(&mut self) -> ComplexMatrix {
        let r = self.dec.dissipative();
        let (c, j) = (self.dec.generator(), self.dec.conservative());
        let p = &self.power;
        match self.method {
            IndexMethod::CPowersRight => {
                let term = p.adjoint() * r * p;
                self.power = p * c;
                term
            }
            IndexMethod::CPowersLeft => {
                let term = p * r * p.adjoint();
                self.power = c * p;
                term
            }
            IndexMethod::JPowers => {
                let term = p * r * p.adjoint();
                self.power = j * p;
                term
            }
            IndexMethod::Commutators => {
                let term = p.adjoint() * p;
                self.power = j * p - p * j;
                term
            }
        }
    }
}

/// Multiple of `eps` times the summed term norms below which a partial-sum
/// eigenvalue is indistinguishable from roundoff.
pub const ROUNDOFF_FACTOR: f64 = 16.0;

/// Smallest `m <= m_max` with `lambda_min(partial sum)` above both
/// `kappa_threshold` and the roundoff floor of the accumulated terms.
pub fn index_via_powers(dec: &OperatorDecomposition, method: IndexMethod, opts: IndexOptions) -> Result<IndexReport> {
    if !(opts.kappa_threshold > 0.0) {
        return Err(HypoError::Parameter("kappa_threshold must be positive".into()));
    }
    check_accretive(dec)?;
    let n = dec.dim();
    let mut terms = TermSequence::new(dec, method)?;
    let mut sum = ComplexMatrix::zeros(n, n);
    let mut per_m_min_eigs = Vec::new();
    let mut index = None;
    let mut budget = 0.0;
    let mut roundoff_floor = 0.0;
    for m in 0..=opts.m_max {
        let term = terms.next_term();
        budget += term.norm();
        sum += term;
        let lmin = hermitian_eigenvalues(&sum)[0];
        per_m_min_eigs.push(lmin);
        roundoff_floor = ROUNDOFF_FACTOR * f64::EPSILON * budget;
        if lmin >= opts.kappa_threshold && lmin > roundoff_floor {
            index = Some(m);
            break;
        }
    }
    Ok(IndexReport {
        index,
        kappa: index.map(|m| per_m_min_eigs[m]),
        method,
        per_m_min_eigs,
        m_max: opts.m_max,
        kappa_threshold: opts.kappa_threshold,
        roundoff_floor,
    })
}

fn unit_scaled(a: &ComplexMatrix) -> ComplexMatrix {
    let s = spectral_norm(a);
    if s > 0.0 {
        a.unscale(s)
    } else {
        a.clone()
    }
}

fn check_pair(r: &ComplexMatrix, j: &ComplexMatrix) -> Result<usize> {
    let n = require_square(r)?;
    if require_square(j)? != n {
        return Err(HypoError::Dimension(format!("R is {n}x{n} but J is {}x{}", j.nrows(), j.ncols())));
    }
    Ok(n)
}

/// Blocks `R (J*)^j` for `j = 0..=m`, computed on unit-norm rescalings
/// of `R` and `J` (the kernels do not depend on the scaling).
fn kalman_blocks(r: &ComplexMatrix, j: &ComplexMatrix, m: usize) -> Result<Vec<ComplexMatrix>> {
    // ker(sqrt(R) A) = ker(R A); R avoids inflating roundoff eigenvalues.
    let j_adj = unit_scaled(j).adjoint();
    let mut blocks = Vec::with_capacity(m + 1);
    let mut current = unit_scaled(r);
    for _ in 0..=m {
        let next = &current * &j_adj;
        blocks.push(current);
        current = next;
    }
    Ok(blocks)
}

fn stacked_rank(blocks: &[ComplexMatrix], rank_tol: f64) -> usize {
    let s = singular_values(&vstack(blocks));
    let smax = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > rank_tol * smax && x > 0.0).count()
}

/// `dim of the intersection over j <= m of ker(sqrt(R) (J*)^j)`.
pub fn kalman_kernel_defect(r: &ComplexMatrix, j: &ComplexMatrix, m: usize, rank_tol: f64) -> Result<usize> {
    let n = check_pair(r, j)?;
    let blocks = kalman_blocks(r, j, m)?;
    Ok(n - stacked_rank(&blocks, rank_tol))
}

/// Kernel defects for `m = 0..=m_max`.
pub fn kalman_defect_sweep(r: &ComplexMatrix, j: &ComplexMatrix, m_max: usize, rank_tol: f64) -> Result<Vec<usize>> {
    let n = check_pair(r, j)?;
    let blocks = kalman_blocks(r, j, m_max)?;
    Ok((0..=m_max).map(|m| n - stacked_rank(&blocks[..=m], rank_tol)).collect())
}

/// Smallest `m < n` with zero kernel defect: the index in its rank formulation.
pub fn rank_index(r: &ComplexMatrix, j: &ComplexMatrix, rank_tol: f64) -> Result<Option<usize>> {
    let n = check_pair(r, j)?;
    let sweep = kalman_defect_sweep(r, j, n.saturating_sub(1), rank_tol)?;
    Ok(sweep.iter().position(|&d| d == 0))
}

/// Orthonormal basis of the intersection over `j < m` of `ker(sqrt(R) (J*)^j)`.
pub fn kernel_intersection(r: &ComplexMatrix, j: &ComplexMatrix, m: usize, rank_tol: f64) -> Result<ComplexMatrix> {
    let n = check_pair(r, j)?;
    if m == 0 {
        return Ok(ComplexMatrix::identity(n, n));
    }
    let stacked = vstack(&kalman_blocks(r, j, m - 1)?);
    let smax = spectral_norm(&stacked);
    Ok(null_space(&stacked, rank_tol * smax).1)
}

/// A unit eigenvector of `J` annihilated by `R`.
#[derive(Debug, Clone, Serialize)]
pub struct ObstructionWitness {
    pub eigenvalue: Complex64,
    pub vector: Vec<Complex64>,
    pub residual_j: f64,
    pub residual_r: f64,
}

/// Searches every eigenspace of `J` (eigenvalues clustered within
/// `1e-8 ||J||`) for a vector in `ker R`.
pub fn eigenvector_obstruction(r: &ComplexMatrix, j: &ComplexMatrix, tol: f64) -> Result<Option<ObstructionWitness>> {
    let n = check_pair(r, j)?;
    // iJ is Hermitian: iJ v = mu v  <=>  J v = -i mu v.
    let h = j * Complex64::i();
    let (mus, vectors) = hermitian_eigen(&h)?;
    let width = CLUSTER_TOL * spectral_norm(j);
    let mut best: Option<ObstructionWitness> = None;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && mus[end] - mus[end - 1] <= width {
            end += 1;
        }
        let basis = vectors.columns(start, end - start).into_owned();
        let restricted = r * &basis;
        let leading = leading_singular_subspaces(&restricted, end - start - 1).right;
        let coeffs = orthogonal_complement(&leading);
        let v = &basis * coeffs.column(0);
        let v = &v / Complex64::from(v.norm());
        let jv = j * &v;
        let eigenvalue = v.dotc(&jv);
        let residual_j = (&jv - &v * eigenvalue).norm();
        let residual_r = (r * &v).norm();
        if residual_j <= tol && residual_r <= tol && best.as_ref().map_or(true, |b| residual_r < b.residual_r) {
            best = Some(ObstructionWitness { eigenvalue, vector: v.iter().copied().collect(), residual_j, residual_r });
        }
        start = end;
    }
    Ok(best)
}

/// Default witness tolerance `1e-8 max(||R||, ||J||)`.
pub fn default_obstruction_tol(dec: &OperatorDecomposition) -> f64 {
    1e-8 * spectral_norm(dec.dissipative()).max(spectral_norm(dec.conservative())).max(f64::MIN_POSITIVE)
}

/// The four quadratic forms `<C^j R (C*)^j x, x>`, `<J^j R (J*)^j x, x>`,
/// `<(C*)^j R C^j x, x>` and `||K_j x||^2` (with `K_j` the iterated commutator).
pub fn quadratic_forms(dec: &OperatorDecomposition, x: &ComplexVector, j: usize) -> Result<[f64; 4]> {
    let (c, r, s) = (dec.generator(), dec.dissipative(), dec.conservative());
    let c_adj = c.adjoint();
    let s_adj = s.adjoint();
    let (mut left, mut jx, mut right) = (x.clone(), x.clone(), x.clone());
    for _ in 0..j {
        left = &c_adj * left;
        jx = &s_adj * jx;
        right = c * right;
    }
    let form = |y: &ComplexVector| y.dotc(&(r * y)).re;
    let mut k = psd_sqrt(r, ACCRETIVE_TOL)?;
    for _ in 0..j {
        k = s * &k - &k * s;
    }
    Ok([form(&left), form(&jx), form(&right), (k * x).norm_squared()])
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub index_per_method: BTreeMap<&'static str, IndexValue>,
    pub kappa_per_method: BTreeMap<&'static str, Option<f64>>,
    pub defect_sweep: Vec<usize>,
    pub obstruction: Option<ObstructionWitness>,
    pub rank_index: Option<usize>,
    pub dim_ker_r: usize,
    pub methods_agree: bool,
}

/// An index or the marker for an unsuccessful search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexValue(pub Option<usize>);

impl Serialize for IndexValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        serialize_index(&self.0, s)
    }
}

impl AuditReport {
    /// The common index, if all methods agree.
    pub fn index(&self) -> Option<Option<usize>> {
        let mut values = self.index_per_method.values().map(|v| v.0);
        let first = values.next()?;
        values.all(|v| v == first).then_some(first)
    }
}

/// Runs all four index criteria plus the rank and eigenvector tests.
pub fn equivalence_audit(dec: &OperatorDecomposition, opts: IndexOptions, rank_tol: f64) -> Result<AuditReport> {
    let mut index_per_method = BTreeMap::new();
    let mut kappa_per_method = BTreeMap::new();
    for method in IndexMethod::ALL {
        let report = index_via_powers(dec, method, opts)?;
        index_per_method.insert(method.name(), IndexValue(report.index));
        kappa_per_method.insert(method.name(), report.kappa);
    }
    let (r, j) = (dec.dissipative(), dec.conservative());
    let defect_sweep = kalman_defect_sweep(r, j, opts.m_max, rank_tol)?;
    let obstruction = eigenvector_obstruction(r, j, default_obstruction_tol(dec))?;
    let rank_index = rank_index(r, j, rank_tol)?;
    let dim_ker_r = kalman_kernel_defect(r, j, 0, rank_tol)?;
    let first = index_per_method.values().next().copied();
    let methods_agree = index_per_method.values().all(|v| Some(*v) == first);
    Ok(AuditReport {
        index_per_method,
        kappa_per_method,
        defect_sweep,
        obstruction,
        rank_index,
        dim_ker_r,
        methods_agree,
    })
}
