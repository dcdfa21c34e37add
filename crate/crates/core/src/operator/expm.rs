//! Scaling-and-squaring matrix exponential with diagonal Padé approximants.

use nalgebra::{ComplexField, DMatrix};

use crate::error::{HypoError, Result};

// Largest 1-norms for which the Padé approximant of the given degree meets
// double-precision backward error.
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Inputs whose 1-norm exceeds this are rejected instead of squared into overflow.
const MAX_NORM: f64 = 1.0e8;

pub(crate) fn norm1<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scale<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, s: f64) -> DMatrix<T> {
    a.map(|z| z * T::from_real(s))
}

fn add_scaled<T: ComplexField<RealField = f64>>(acc: &mut DMatrix<T>, a: &DMatrix<T>, s: f64) {
    acc.zip_apply(a, |x, y| *x += y * T::from_real(s));
}

fn add_identity<T: ComplexField<RealField = f64>>(acc: &mut DMatrix<T>, s: f64) {
    for i in 0..acc.nrows() {
        acc[(i, i)] += T::from_real(s);
    }
}

/// Low-degree approximant from the even powers `I, A², A⁴, …`.
fn pade_low<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, b: &[f64]) -> (DMatrix<T>, DMatrix<T>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut powers = vec![DMatrix::<T>::identity(n, n), a2.clone()];
    while 2 * powers.len() < b.len() {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u_inner = DMatrix::<T>::zeros(n, n);
    let mut v = DMatrix::<T>::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        add_scaled(&mut v, p, b[2 * k]);
        add_scaled(&mut u_inner, p, b[2 * k + 1]);
    }
    (a * u_inner, v)
}

fn pade13<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let n = a.nrows();
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let mut w1 = scale(&a6, b[13]);
    add_scaled(&mut w1, &a4, b[11]);
    add_scaled(&mut w1, &a2, b[9]);
    let mut w2 = scale(&a6, b[7]);
    add_scaled(&mut w2, &a4, b[5]);
    add_scaled(&mut w2, &a2, b[3]);
    add_identity(&mut w2, b[1]);
    let u = a * (&a6 * w1 + w2);

    let mut z1 = scale(&a6, b[12]);
    add_scaled(&mut z1, &a4, b[10]);
    add_scaled(&mut z1, &a2, b[8]);
    let mut z2 = scale(&a6, b[6]);
    add_scaled(&mut z2, &a4, b[4]);
    add_scaled(&mut z2, &a2, b[2]);
    add_identity(&mut z2, b[0]);
    let v = &a6 * z1 + z2;
    debug_assert_eq!(v.nrows(), n);
    (u, v)
}

/// Computes `exp(A)`; works for real and complex element types.
pub fn expm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(HypoError::Dimension(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok(DMatrix::identity(0, 0));
    }
    let nrm = norm1(a);
    if !nrm.is_finite() {
        return Err(HypoError::Range("matrix exponential of a non-finite matrix".into()));
    }
    if nrm > MAX_NORM {
        return Err(HypoError::Range(format!(
            "1-norm {nrm:e} exceeds the supported bound {MAX_NORM:e}"
        )));
    }

    let (mut squarings, scaled) = if nrm <= THETA_13 {
        (0, a.clone())
    } else {
        let s = (nrm / THETA_13).log2().ceil().max(0.0) as i32;
        (s, scale(a, 2f64.powi(-s)))
    };
    let (u, v) = if squarings > 0 || nrm > THETA_9 {
        pade13(&scaled)
    } else if nrm <= THETA_3 {
        pade_low(&scaled, &B3)
    } else if nrm <= THETA_5 {
        pade_low(&scaled, &B5)
    } else if nrm <= THETA_7 {
        pade_low(&scaled, &B7)
    } else {
        pade_low(&scaled, &B9)
    };

    let denom = &v - &u;
    let numer = &v + &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| HypoError::Numerical("singular Padé denominator".into()))?;
    while squarings > 0 {
        result = &result * &result;
        squarings -= 1;
    }
    if result.iter().any(|z| !z.clone().modulus().is_finite()) {
        return Err(HypoError::Range("matrix exponential overflowed".into()));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn taylor_reference(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut term = DMatrix::<f64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..80 {
            term = &term * a / k as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn every_pade_degree_matches_taylor_series() {
        let base = DMatrix::from_row_slice(3, 3, &[0.1, -0.3, 0.2, 0.4, -0.2, 0.1, -0.1, 0.3, 0.05]);
        for s in [0.01, 0.2, 0.8, 1.5, 3.0, 9.0] {
            let a = &base * s;
            let got = expm(&a).unwrap();
            let want = taylor_reference(&a);
            let err = (&got - &want).norm() / want.norm();
            assert!(err < 1e-13, "scale {s}: relative error {err}");
        }
    }

    #[test]
    fn agrees_with_nalgebra_exp_on_complex_input() {
        let a = DMatrix::from_fn(4, 4, |i, j| {
            Complex64::new((i as f64 - j as f64) * 0.7, ((i * j) as f64).sin())
        });
        let got = expm(&a).unwrap();
        let want = a.clone().exp();
        let err = (&got - &want).norm() / want.norm();
        assert!(err < 1e-12, "relative error {err}");
    }

    #[test]
    fn rejects_huge_norm() {
        let a = DMatrix::from_element(2, 2, 1e9);
        assert!(matches!(expm(&a), Err(HypoError::Range(_))));
    }

    #[test]
    fn rejects_overflowing_result() {
        let a = DMatrix::from_element(2, 2, 1e4);
        assert!(matches!(expm(&a), Err(HypoError::Range(_))));
    }
}
