//! Dense complex linear algebra: Hermitian/skew splitting, the matrix
//! exponential, norms, extremal eigenvalues and PSD square roots.

mod expm;

pub use expm::expm;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{HypoError, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;
pub type RealMatrix = DMatrix<f64>;

/// Default relative tolerance for Hermiticity checks on eigensolver input.
pub const HERMITIAN_TOL: f64 = 1e-8;

/// Checks that all entries are finite and the matrix is non-empty.
pub fn validate(a: &ComplexMatrix) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(HypoError::Dimension("matrix has no entries".into()));
    }
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(HypoError::InvalidEntry { row: i, col: j, value: format!("{z}") });
            }
        }
    }
    Ok(())
}

/// Validates `a` and returns its dimension if it is square.
pub fn require_square(a: &ComplexMatrix) -> Result<usize> {
    validate(a)?;
    if a.nrows() != a.ncols() {
        return Err(HypoError::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

fn require_same_shape(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(HypoError::Dimension(format!(
            "shape mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// A generator `C = R - J` with Hermitian `R` and skew-Hermitian `J`.
#[derive(Debug, Clone)]
pub struct OperatorDecomposition {
    c: ComplexMatrix,
    r: ComplexMatrix,
    j: ComplexMatrix,
}

impl OperatorDecomposition {
    /// Assembles `C = R - J` from its parts, projecting them onto the
    /// Hermitian and skew-Hermitian subspaces.
    pub fn from_parts(r: &ComplexMatrix, j: &ComplexMatrix) -> Result<Self> {
        require_square(r)?;
        require_square(j)?;
        require_same_shape(r, j)?;
        let r = hermitian_part(r);
        let j = (j - j.adjoint()).scale(0.5);
        let c = &r - &j;
        Ok(Self { c, r, j })
    }

    pub fn generator(&self) -> &ComplexMatrix {
        &self.c
    }

    /// Hermitian part `C_H = (C + C*)/2`.
    pub fn dissipative(&self) -> &ComplexMatrix {
        &self.r
    }

    /// Skew part `J = (C* - C)/2`.
    pub fn conservative(&self) -> &ComplexMatrix {
        &self.j
    }

    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    /// `lambda_min(C_H)`.
    pub fn accretivity(&self) -> f64 {
        hermitian_eigenvalues(&self.r)[0]
    }
}

/// Splits a square matrix into its Hermitian part `R` and `J` with `C = R - J`.
pub fn hermitian_split(c: &ComplexMatrix) -> Result<OperatorDecomposition> {
    require_square(c)?;
    let r = hermitian_part(c);
    let j = (c.adjoint() - c).scale(0.5);
    Ok(OperatorDecomposition { c: c.clone(), r, j })
}

/// `(A + A*)/2`.
pub fn hermitian_part(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Largest entrywise modulus of `A - A*`.
pub fn max_asymmetry(a: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entry modulus.
pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `e^{A t}`.
pub fn matrix_exponential(a: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    require_square(a)?;
    if !t.is_finite() {
        return Err(HypoError::Parameter(format!("time {t} is not finite")));
    }
    expm(&a.scale(t))
}

/// Singular values in decreasing order.
pub fn singular_values<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Largest singular value.
pub fn spectral_norm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Eigenvalues of the symmetrized matrix, ascending. No Hermiticity check.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitian_part(a).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues (ascending) and matching orthonormal eigenvectors of a
/// Hermitian matrix, after symmetrization.
pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    check_hermitian(a)?;
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(a.nrows(), order.len(), |i, k| eig.eigenvectors[(i, order[k])]);
    Ok((values, vectors))
}

fn check_hermitian(a: &ComplexMatrix) -> Result<()> {
    require_square(a)?;
    let scale = a.norm();
    let asym = max_asymmetry(a);
    if asym > HERMITIAN_TOL * scale {
        return Err(HypoError::ContractViolation(format!(
            "matrix is not Hermitian: asymmetry {asym:e} exceeds {:e}",
            HERMITIAN_TOL * scale
        )));
    }
    Ok(())
}

/// Smallest eigenvalue of `(A + A*)/2`.
pub fn min_eig_hermitian(a: &ComplexMatrix) -> Result<f64> {
    check_hermitian(a)?;
    Ok(hermitian_eigenvalues(a)[0])
}

/// The nonnegative square root of a PSD Hermitian matrix. Eigenvalues in
/// `[-clip_tol * ||R||, 0)` are clipped to zero.
pub fn psd_sqrt(r: &ComplexMatrix, clip_tol: f64) -> Result<ComplexMatrix> {
    let (values, vectors) = hermitian_eigen(r)?;
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bound = clip_tol * scale;
    if values[0] < -bound {
        return Err(HypoError::NotPsd { eigenvalue: values[0], bound });
    }
    let roots: Vec<f64> = values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut scaled = vectors.clone();
    for (k, root) in roots.iter().enumerate() {
        scaled.column_mut(k).scale_mut(*root);
    }
    Ok(&scaled * vectors.adjoint())
}

/// All eigenvalues of a general square matrix via the complex Schur form.
pub fn eigenvalues(a: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let n = require_square(a)?;
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON * 0.5, 200 * n.max(10))
        .ok_or_else(|| {
            HypoError::Numerical(format!(
                "Schur iteration did not converge (n = {n}, ||A||_F = {scale:e})"
            ))
        })?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// `max Re(lambda)` over the spectrum.
pub fn spectral_abscissa(a: &ComplexMatrix) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Singular values of `a` (descending) with orthonormal bases of the
/// leading `p` left and right singular subspaces.
#[derive(Debug, Clone)]
pub struct SingularSubspaces {
    pub values: Vec<f64>,
    pub left: ComplexMatrix,
    pub right: ComplexMatrix,
}

/// Leading `p` singular subspaces; see [`singular_subspaces_by`].
pub fn leading_singular_subspaces(a: &ComplexMatrix, p: usize) -> SingularSubspaces {
    singular_subspaces_by(a, |_| p)
}

/// Leading singular subspaces of dimension `select(values)`, from the
/// Hermitian dilation `[[0, A], [A*, 0]]`, whose eigenpairs are
/// `(+-sigma, [u; +-v] / sqrt 2)`.
pub fn singular_subspaces_by(a: &ComplexMatrix, select: impl FnOnce(&[f64]) -> usize) -> SingularSubspaces {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return SingularSubspaces {
            values: Vec::new(),
            left: ComplexMatrix::zeros(m, 0),
            right: ComplexMatrix::zeros(n, 0),
        };
    }
    let mut dilation = ComplexMatrix::zeros(m + n, m + n);
    dilation.view_mut((0, m), (m, n)).copy_from(a);
    dilation.view_mut((m, 0), (n, m)).copy_from(&a.adjoint());
    let (values, vectors) = hermitian_eigen(&dilation).expect("dilation is Hermitian");
    let values: Vec<f64> = values.iter().rev().take(k).map(|v| v.max(0.0)).collect();
    let p = select(&values).min(k);
    let top = vectors.columns(m + n - p, p);
    // Descending order: last eigenvector first.
    let pick = |rows: usize, offset: usize| {
        orthonormalize(&ComplexMatrix::from_fn(rows, p, |i, c| top[(offset + i, p - 1 - c)]))
    };
    SingularSubspaces {
        values,
        left: pick(m, 0),
        right: pick(n, m),
    }
}

/// Orthonormal basis of the column span of a full-column-rank `a`.
fn orthonormalize(a: &ComplexMatrix) -> ComplexMatrix {
    if a.ncols() == 0 {
        return a.clone();
    }
    a.clone().qr().q()
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns of `basis`.
pub fn orthogonal_complement(basis: &ComplexMatrix) -> ComplexMatrix {
    let dim = basis.nrows();
    let keep = dim - basis.ncols();
    let proj = ComplexMatrix::identity(dim, dim) - basis * basis.adjoint();
    let (_, vectors) = hermitian_eigen(&proj).expect("projector is Hermitian");
    vectors.columns(dim - keep, keep).into_owned()
}

/// Numerical rank and an orthonormal basis of the null space, with
/// singular values at or below `abs_tol` treated as zero.
pub fn null_space(a: &ComplexMatrix, abs_tol: f64) -> (usize, ComplexMatrix) {
    let n = a.ncols();
    if n == 0 {
        return (0, ComplexMatrix::zeros(0, 0));
    }
    let right = singular_subspaces_by(a, |values| values.iter().filter(|&&s| s > abs_tol).count()).right;
    (right.ncols(), orthogonal_complement(&right))
}

/// Stacks matrices with equal column counts vertically.
pub fn vstack(blocks: &[ComplexMatrix]) -> ComplexMatrix {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        out.view_mut((offset, 0), b.shape()).copy_from(b);
        offset += b.nrows();
    }
    out
}

/// Real matrix promoted to complex entries.
pub fn complexify(a: &RealMatrix) -> ComplexMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}
