//! Seeded generators for random accretive test instances.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::operator::{leading_singular_subspaces, orthogonal_complement, ComplexMatrix, ComplexVector, OperatorDecomposition};

pub type InstanceRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    DMatrix::from_fn(rows, cols, |_, _| Complex64::new(normal(rng), normal(rng)) / 2f64.sqrt())
}

/// Uniformly distributed point on the complex unit sphere.
pub fn random_unit_vector(rng: &mut impl Rng, n: usize) -> ComplexVector {
    let v = ComplexVector::from_fn(n, |_, _| Complex64::new(normal(rng), normal(rng)));
    let norm = v.norm();
    v / Complex64::from(norm)
}

/// Skew-Hermitian part of a Gaussian matrix, normalized to unit scale.
pub fn random_skew(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let s = gaussian_matrix(rng, n, n);
    (&s - s.adjoint()).unscale(2.0 * (n as f64).sqrt())
}

/// `R = G*G` for Gaussian `G` with the `kernel_dim` smallest singular values
/// zeroed, together with an orthonormal basis of its kernel.
pub fn random_psd(rng: &mut impl Rng, n: usize, kernel_dim: usize) -> (ComplexMatrix, ComplexMatrix) {
    let g = gaussian_matrix(rng, n, n).unscale((n as f64).sqrt());
    let kept = n - kernel_dim.min(n);
    let svd = leading_singular_subspaces(&g, kept);
    let mut r = ComplexMatrix::zeros(n, n);
    for (k, v) in svd.right.column_iter().enumerate() {
        r += (&v * v.adjoint()).scale(svd.values[k].powi(2));
    }
    let kernel = orthogonal_complement(&svd.right);
    (crate::operator::hermitian_part(&r), kernel)
}

/// Structural class of a generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    /// `R` is positive definite.
    FullRank,
    /// `R` has a kernel; `J` is generic.
    RankDeficient,
    /// A `J`-eigenvector is planted inside `ker R`.
    Obstructed,
}

#[derive(Debug, Clone)]
pub struct AccretiveInstance {
    pub decomposition: OperatorDecomposition,
    pub kind: InstanceKind,
    pub kernel_dim: usize,
    /// The planted eigenvector for obstructed instances.
    pub planted: Option<ComplexVector>,
}

/// Accretive `C = R - J` of dimension `n`. With `obstructed`, a unit vector
/// of `ker R` is made an eigenvector of `J`.
pub fn random_accretive(rng: &mut impl Rng, n: usize, kernel_dim: usize, obstructed: bool) -> AccretiveInstance {
    let (r, kernel) = random_psd(rng, n, kernel_dim);
    let mut j = random_skew(rng, n);
    let mut planted = None;
    let kind = if obstructed && kernel.ncols() > 0 {
        let v = kernel.column(0).into_owned();
        planted = Some(v.clone());
        let proj = ComplexMatrix::identity(n, n) - &v * v.adjoint();
        let mu = normal(rng);
        j = &proj * j * &proj + (&v * v.adjoint()) * Complex64::new(0.0, mu);
        InstanceKind::Obstructed
    } else if kernel.ncols() > 0 {
        InstanceKind::RankDeficient
    } else {
        InstanceKind::FullRank
    };
    let decomposition = OperatorDecomposition::from_parts(&r, &j).expect("generated parts are square and finite");
    AccretiveInstance { decomposition, kind, kernel_dim: kernel.ncols(), planted }
}

/// Draws an instance of dimension `2..=max_dim`. With probability
/// `deficient_prob` the dissipative part is rank-deficient, and half of those
/// instances carry a planted obstruction.
pub fn sample_instance(rng: &mut impl Rng, max_dim: usize, deficient_prob: f64) -> AccretiveInstance {
    let n = rng.gen_range(2..=max_dim.max(2));
    if rng.gen_bool(deficient_prob) {
        let kernel_dim = rng.gen_range(1..n);
        let obstructed = rng.gen_bool(0.5);
        random_accretive(rng, n, kernel_dim, obstructed)
    } else {
        random_accretive(rng, n, 0, false)
    }
}
