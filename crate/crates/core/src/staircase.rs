//! Staircase form of a pair `(J, R)`: a unitary basis in which `J` is block
//! tridiagonal with surjective subdiagonal blocks and `R` lives in the
//! leading block.

use serde::Serialize;

use crate::error::{HypoError, Result};
use crate::index::ACCRETIVE_TOL;
use crate::io::matrix_value;
use crate::operator::{
    hermitian_eigen, max_abs, orthogonal_complement, require_square, singular_subspaces_by, singular_values, spectral_norm,
    ComplexMatrix,
};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct StaircaseForm {
    /// Unitary `Q`, columns grouped by block.
    pub basis: ComplexMatrix,
    /// Block sizes `[n_1, ..., n_s]`; the trailing block may be empty.
    pub block_dims: Vec<usize>,
    /// `Q* J Q`.
    pub j_hat: ComplexMatrix,
    /// `Q* R Q`.
    pub r_hat: ComplexMatrix,
    /// Set when some singular value fell within a decade of the rank threshold.
    pub ambiguous_rank: bool,
}

impl StaircaseForm {
    pub fn blocks(&self) -> usize {
        self.block_dims.len()
    }

    /// Offsets of each block inside the basis.
    pub fn offsets(&self) -> Vec<usize> {
        self.block_dims
            .iter()
            .scan(0, |acc, d| {
                let start = *acc;
                *acc += d;
                Some(start)
            })
            .collect()
    }

    fn block(&self, m: &ComplexMatrix, i: usize, j: usize) -> ComplexMatrix {
        let off = self.offsets();
        m.view((off[i], off[j]), (self.block_dims[i], self.block_dims[j])).into_owned()
    }

    /// Block `(i, j)` of `J_hat` (zero-based).
    pub fn j_block(&self, i: usize, j: usize) -> ComplexMatrix {
        self.block(&self.j_hat, i, j)
    }

    /// True when the trailing block is nonempty, i.e. `ker R` contains a
    /// `J`-invariant subspace.
    pub fn has_invariant_kernel(&self) -> bool {
        self.block_dims.last().is_some_and(|&d| d > 0)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "block_dims": self.block_dims,
            "ambiguous_rank": self.ambiguous_rank,
            "basis": matrix_value(&self.basis),
            "j_hat": matrix_value(&self.j_hat),
            "r_hat": matrix_value(&self.r_hat),
        })
    }
}

fn columns_from(basis: &ComplexMatrix, coeffs: &ComplexMatrix) -> ComplexMatrix {
    basis * coeffs
}

fn hstack(parts: &[ComplexMatrix], rows: usize) -> ComplexMatrix {
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        out.view_mut((0, c), p.shape()).copy_from(p);
        c += p.ncols();
    }
    out
}

/// Builds the staircase form. Rank decisions treat singular values at or
/// below `rank_tol * ||J||` (or `rank_tol * ||R||` for the first split) as zero.
pub fn build_staircase(r: &ComplexMatrix, j: &ComplexMatrix, rank_tol: f64) -> Result<StaircaseForm> {
    let n = require_square(r)?;
    if require_square(j)? != n {
        return Err(HypoError::Dimension("R and J must have the same size".into()));
    }
    let mut ambiguous = false;
    let near = |s: f64, thr: f64| thr > 0.0 && s > 0.1 * thr && s < 10.0 * thr;

    let (values, vectors) = hermitian_eigen(r)?;
    let r_scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if values[0] < -ACCRETIVE_TOL * r_scale.max(1.0) {
        return Err(HypoError::NotPsd { eigenvalue: values[0], bound: ACCRETIVE_TOL * r_scale });
    }
    let r_thr = rank_tol * r_scale;
    ambiguous |= values.iter().any(|&v| near(v.abs(), r_thr));
    // Range of R first, in order of decreasing eigenvalue.
    let range: Vec<usize> = (0..n).rev().filter(|&k| values[k] > r_thr).collect();
    let kernel: Vec<usize> = (0..n).filter(|&k| values[k] <= r_thr).collect();
    let pick = |idx: &[usize]| ComplexMatrix::from_fn(n, idx.len(), |i, c| vectors[(i, idx[c])]);

    let mut blocks = vec![pick(&range)];
    let mut rest = pick(&kernel);
    let j_thr = rank_tol * spectral_norm(j);
    loop {
        let current = blocks.last().expect("at least one block");
        if rest.ncols() == 0 {
            blocks.push(ComplexMatrix::zeros(n, 0));
            break;
        }
        let sub = rest.adjoint() * j * current;
        let svd = singular_subspaces_by(&sub, |values| values.iter().filter(|&&v| v > j_thr).count());
        ambiguous |= svd.values.iter().any(|&v| near(v, j_thr));
        let rank = svd.left.ncols();
        if rank == 0 {
            blocks.push(rest);
            break;
        }
        let image = columns_from(&rest, &svd.left);
        let complement = columns_from(&rest, &orthogonal_complement(&svd.left));
        blocks.push(image);
        rest = complement;
    }

    let block_dims: Vec<usize> = blocks.iter().map(|b| b.ncols()).collect();
    let basis = hstack(&blocks, n);
    let j_hat = basis.adjoint() * j * &basis;
    let r_hat = basis.adjoint() * r * &basis;
    Ok(StaircaseForm { basis, block_dims, j_hat, r_hat, ambiguous_rank: ambiguous })
}

/// One violated structural property of a staircase form.
#[derive(Debug, Clone, Serialize)]
pub struct StaircaseViolation {
    pub check: String,
    pub block: Option<(usize, usize)>,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StaircaseReport {
    pub unitarity: f64,
    pub reconstruction_j: f64,
    pub reconstruction_r: f64,
    pub outside_band: f64,
    pub r_outside_corner: f64,
    pub min_subdiagonal_singular_value: Option<f64>,
    pub blocks: usize,
    pub violations: Vec<StaircaseViolation>,
    /// Nonempty trailing block: the generator cannot be hypocoercive.
    pub not_hypocoercive: bool,
}

impl StaircaseReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every structural property of `form` against `(R, J)` with
/// tolerance `tol` (scaled by the operator norms where relevant).
pub fn verify_staircase(form: &StaircaseForm, r: &ComplexMatrix, j: &ComplexMatrix, tol: f64) -> StaircaseReport {
    let n = r.nrows();
    let q = &form.basis;
    let mut violations = Vec::new();
    fn flag(out: &mut Vec<StaircaseViolation>, check: &str, block: Option<(usize, usize)>, residual: f64, bound: f64) {
        if !(residual <= bound) {
            out.push(StaircaseViolation { check: check.into(), block, residual });
        }
    }
    let j_norm = spectral_norm(j).max(f64::MIN_POSITIVE);
    let r_norm = spectral_norm(r).max(f64::MIN_POSITIVE);

    let unitarity = max_abs(&(q.adjoint() * q - ComplexMatrix::identity(n, n)));
    flag(&mut violations, "unitarity", None, unitarity, tol.max(1e-12));
    let reconstruction_j = max_abs(&(q * &form.j_hat * q.adjoint() - j));
    flag(&mut violations, "reconstruction_j", None, reconstruction_j, tol * j_norm.max(1.0));
    let reconstruction_r = max_abs(&(q * &form.r_hat * q.adjoint() - r));
    flag(&mut violations, "reconstruction_r", None, reconstruction_r, tol * r_norm.max(1.0));
    flag(&mut violations, "dimension", None, (form.block_dims.iter().sum::<usize>() as f64 - n as f64).abs(), 0.0);

    let s = form.blocks();
    flag(&mut violations, "block_count", None, s as f64, if s >= 2 { f64::INFINITY } else { -1.0 });
    let kernel_dim = n - form.block_dims[0];
    flag(&mut violations, "block_count_bound", None, s as f64, (kernel_dim + 2) as f64);

    let mut outside_band = 0.0f64;
    for a in 0..s {
        for b in 0..s {
            let off_band = a.abs_diff(b) >= 2 || (a == s - 1 && b == s - 2) || (a == s - 2 && b == s - 1);
            if off_band {
                let res = max_abs(&form.j_block(a, b));
                outside_band = outside_band.max(res);
                flag(&mut violations, "j_outside_band", Some((a, b)), res, tol * j_norm);
            }
        }
    }
    let n1 = form.block_dims[0];
    let mut corner = form.r_hat.clone();
    corner.view_mut((0, 0), (n1, n1)).fill(Default::default());
    let r_outside_corner = max_abs(&corner);
    flag(&mut violations, "r_outside_corner", None, r_outside_corner, tol * r_norm);

    let mut min_sv: Option<f64> = None;
    for i in 1..s.saturating_sub(1) {
        let block = form.j_block(i, i - 1);
        let sv = singular_values(&block);
        let smallest = if sv.len() < form.block_dims[i] { 0.0 } else { sv.last().copied().unwrap_or(0.0) };
        min_sv = Some(min_sv.map_or(smallest, |m| m.min(smallest)));
        if !(smallest > tol * j_norm) {
            violations.push(StaircaseViolation {
                check: "subdiagonal_full_row_rank".into(),
                block: Some((i, i - 1)),
                residual: smallest,
            });
        }
    }

    StaircaseReport {
        unitarity,
        reconstruction_j,
        reconstruction_r,
        outside_band,
        r_outside_corner,
        min_subdiagonal_singular_value: min_sv,
        blocks: s,
        violations,
        not_hypocoercive: form.has_invariant_kernel(),
    }
}
