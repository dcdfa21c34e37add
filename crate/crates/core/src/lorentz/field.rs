//! Spatial Fourier fields and their exact modal evolution.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lambda0, real_generator, require_cutoff};
use crate::error::{HypoError, Result};
use crate::io::csv_table;
use crate::operator::{expm, RealMatrix};

/// Slack in the simulated decay check.
pub const SIMULATION_TOL: f64 = 1e-8;

/// One stored coefficient `f_{n j}` in the JSON layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficient {
    pub n: [i64; 2],
    pub j: i64,
    pub re: f64,
    pub im: f64,
}

#[derive(Serialize, Deserialize)]
struct FieldFile {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    coeffs: Vec<ModeCoefficient>,
}

/// Coefficients `f_{n j}` for `n in [-N, N]^2` and `j in [-M, M]`, stored in
/// `(n1, n2, j)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzField {
    pub n: usize,
    pub m: usize,
    pub coeffs: Vec<Complex64>,
}

impl LorentzField {
    pub fn zeros(n: usize, m: usize) -> Result<Self> {
        require_cutoff(m, 1)?;
        let len = (2 * n + 1).pow(2) * (2 * m + 1);
        Ok(Self { n, m, coeffs: vec![Complex64::new(0.0, 0.0); len] })
    }

    fn velocity_dim(&self) -> usize {
        2 * self.m + 1
    }

    /// Lattice modes in storage order.
    pub fn modes(&self) -> impl Iterator<Item = (i64, i64)> {
        let n = self.n as i64;
        (-n..=n).flat_map(move |a| (-n..=n).map(move |b| (a, b)))
    }

    fn mode_offset(&self, n1: i64, n2: i64) -> Option<usize> {
        let n = self.n as i64;
        if n1.abs() > n || n2.abs() > n {
            return None;
        }
        let side = 2 * self.n + 1;
        Some((((n1 + n) as usize) * side + (n2 + n) as usize) * self.velocity_dim())
    }

    pub fn index(&self, n1: i64, n2: i64, j: i64) -> Option<usize> {
        if j.abs() > self.m as i64 {
            return None;
        }
        self.mode_offset(n1, n2).map(|o| o + (j + self.m as i64) as usize)
    }

    pub fn get(&self, n1: i64, n2: i64, j: i64) -> Option<Complex64> {
        self.index(n1, n2, j).map(|i| self.coeffs[i])
    }

    pub fn set(&mut self, n1: i64, n2: i64, j: i64, value: Complex64) -> Result<()> {
        let i = self
            .index(n1, n2, j)
            .ok_or_else(|| HypoError::Range(format!("mode ({n1}, {n2}), j = {j} outside N = {}, M = {}", self.n, self.m)))?;
        self.coeffs[i] = value;
        Ok(())
    }

    /// Velocity coefficients of one spatial mode.
    pub fn mode(&self, n1: i64, n2: i64) -> Option<&[Complex64]> {
        self.mode_offset(n1, n2).map(|o| &self.coeffs[o..o + self.velocity_dim()])
    }

    /// `sqrt(sum |f_{n j}|^2)`.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// The conserved mass coefficient `f_{(0,0), 0}`.
    pub fn mass(&self) -> Complex64 {
        self.get(0, 0, 0).expect("origin is always stored")
    }

    /// Distance to the equilibrium carrying the given mass.
    pub fn distance_to_equilibrium(&self, mass: Complex64) -> f64 {
        let origin = self.index(0, 0, 0).expect("origin is always stored");
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| if i == origin { (c - mass).norm_sqr() } else { c.norm_sqr() })
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_json(&self) -> String {
        let coeffs = self
            .modes()
            .flat_map(|(a, b)| (-(self.m as i64)..=self.m as i64).map(move |j| (a, b, j)))
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != Complex64::new(0.0, 0.0))
            .map(|((a, b, j), c)| ModeCoefficient { n: [a, b], j, re: c.re, im: c.im })
            .collect();
        serde_json::to_string(&FieldFile { n: self.n, m: self.m, coeffs }).expect("field serializes")
    }

    /// Parses the JSON layout; absent coefficients are zero.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: FieldFile = serde_json::from_str(text)?;
        let mut field = Self::zeros(file.n, file.m)?;
        let mut seen = BTreeMap::new();
        for c in file.coeffs {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(HypoError::Parameter(format!("non-finite coefficient at n = {:?}, j = {}", c.n, c.j)));
            }
            if seen.insert((c.n, c.j), ()).is_some() {
                return Err(HypoError::Parameter(format!("duplicate coefficient at n = {:?}, j = {}", c.n, c.j)));
            }
            field.set(c.n[0], c.n[1], c.j, Complex64::new(c.re, c.im))?;
        }
        Ok(field)
    }
}

/// Gaussian coefficients scaled to unit expected norm.
pub fn random_field(rng: &mut impl Rng, n: usize, m: usize) -> Result<LorentzField> {
    let mut field = LorentzField::zeros(n, m)?;
    let scale = (2.0 * field.coeffs.len() as f64).sqrt().recip();
    for c in &mut field.coeffs {
        let (re, im): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        *c = Complex64::new(re, im) * scale;
    }
    Ok(field)
}

/// Decay of one simulated state towards equilibrium.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub t: f64,
    pub distance: f64,
    /// `sqrt 3 e^{-lambda0 t}` times the initial distance.
    pub bound: f64,
    pub mass_drift: f64,
    pub within_bound: bool,
}

impl SimulationReport {
    pub fn csv(reports: &[SimulationReport]) -> String {
        csv_table(&["t", "distance", "bound"], reports.iter().map(|r| vec![r.t, r.distance, r.bound]))
    }
}

/// Phase `e^{-i j theta} i^j` relating the lattice generator to the real form.
fn mode_phase(n1: i64, n2: i64, m: usize) -> Vec<Complex64> {
    let theta = (n2 as f64).atan2(n1 as f64);
    (-(m as i64)..=m as i64)
        .map(|j| Complex64::from_polar(1.0, -(j as f64) * theta) * Complex64::i().powi(j as i32))
        .collect()
}

fn apply_real(e: &RealMatrix, x: &[Complex64]) -> Vec<Complex64> {
    (0..e.nrows())
        .map(|a| x.iter().enumerate().map(|(b, v)| v * e[(a, b)]).sum())
        .collect()
}

/// Evolves every mode to each requested time. Modes sharing `|n|^2` share
/// one real propagator per time.
fn evolve(field0: &LorentzField, times: &[f64]) -> Result<Vec<LorentzField>> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(HypoError::Parameter("simulation times must be finite and nonnegative".into()));
    }
    if field0.coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(HypoError::Parameter("initial field has non-finite coefficients".into()));
    }
    let m = field0.m;
    let mut groups: BTreeMap<i64, Vec<(i64, i64)>> = BTreeMap::new();
    for (a, b) in field0.modes().filter(|&(a, b)| (a, b) != (0, 0)) {
        groups.entry(a * a + b * b).or_default().push((a, b));
    }
    let groups: Vec<(i64, Vec<(i64, i64)>)> = groups.into_iter().collect();
    let mut out = vec![field0.clone(); times.len()];
    for (k, &t) in times.iter().enumerate() {
        let evolved: Vec<Vec<((i64, i64), Vec<Complex64>)>> = groups
            .par_iter()
            .map(|(nsq, modes)| {
                let g = real_generator((*nsq as f64).sqrt(), m, 1.0)?;
                let e = expm(&(-g).scale(t))?;
                Ok(modes
                    .iter()
                    .map(|&(a, b)| {
                        let phase = mode_phase(a, b, m);
                        let f = field0.mode(a, b).expect("mode in range");
                        let rotated: Vec<Complex64> = f.iter().zip(&phase).map(|(x, p)| x * p.conj()).collect();
                        let moved = apply_real(&e, &rotated);
                        ((a, b), moved.iter().zip(&phase).map(|(x, p)| x * p).collect())
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        let field = &mut out[k];
        for ((a, b), values) in evolved.into_iter().flatten() {
            let o = field.mode_offset(a, b).expect("mode in range");
            field.coeffs[o..o + values.len()].copy_from_slice(&values);
        }
        let damping = (-t).exp();
        let o = field.mode_offset(0, 0).expect("origin is always stored");
        for (j, c) in field.coeffs[o..o + 2 * m + 1].iter_mut().enumerate() {
            if j != m {
                *c *= damping;
            }
        }
    }
    Ok(out)
}

fn report(field0: &LorentzField, field: &LorentzField, t: f64) -> SimulationReport {
    let mass = field0.mass();
    let bound = 3f64.sqrt() * (-lambda0() * t).exp() * field0.distance_to_equilibrium(mass);
    let distance = field.distance_to_equilibrium(mass);
    SimulationReport {
        t,
        distance,
        bound,
        mass_drift: (field.mass() - mass).norm(),
        within_bound: distance <= bound + SIMULATION_TOL,
    }
}

/// The field at time `t` and its distance to equilibrium.
pub fn simulate(field0: &LorentzField, t: f64) -> Result<(LorentzField, SimulationReport)> {
    let field = evolve(field0, &[t])?.pop().expect("one time requested");
    let rep = report(field0, &field, t);
    Ok((field, rep))
}

/// Decay reports at each time.
pub fn simulate_series(field0: &LorentzField, times: &[f64]) -> Result<Vec<SimulationReport>> {
    let fields = evolve(field0, times)?;
    Ok(fields.iter().zip(times).map(|(f, &t)| report(field0, f, t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decay::uniform_grid;
    use crate::operator::{matrix_exponential, ComplexMatrix, ComplexVector};
    use crate::random::seeded_rng;

    /// `R - J_n` assembled entrywise from the transport symbol.
    fn lattice_generator(n1: f64, n2: f64, m: usize) -> ComplexMatrix {
        let d = 2 * m + 1;
        let i = Complex64::i();
        let mut c = ComplexMatrix::zeros(d, d);
        for p in 0..d {
            if p != m {
                c[(p, p)] += Complex64::new(1.0, 0.0);
            }
            if p + 1 < d {
                c[(p + 1, p)] += i * 0.5 * Complex64::new(n1, -n2);
                c[(p, p + 1)] += i * 0.5 * Complex64::new(n1, n2);
            }
        }
        c
    }

    #[test]
    fn json_round_trip() {
        let mut rng = seeded_rng(11);
        let f = random_field(&mut rng, 2, 3).unwrap();
        let back = LorentzField::from_json(&f.to_json()).unwrap();
        assert_eq!(f, back);
        assert!((f.norm().powi(2) - f.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).abs() < 1e-15);
    }

    #[test]
    fn json_rejects_out_of_range_and_duplicates() {
        let bad = r#"{"N":1,"M":1,"coeffs":[{"n":[2,0],"j":0,"re":1,"im":0}]}"#;
        assert!(matches!(LorentzField::from_json(bad), Err(HypoError::Range(_))));
        let dup = r#"{"N":1,"M":1,"coeffs":[{"n":[1,0],"j":0,"re":1,"im":0},{"n":[1,0],"j":0,"re":2,"im":0}]}"#;
        assert!(matches!(LorentzField::from_json(dup), Err(HypoError::Parameter(_))));
    }

    #[test]
    fn fast_path_matches_direct_exponential() {
        let m = 5;
        let mut rng = seeded_rng(4);
        let field = random_field(&mut rng, 2, m).unwrap();
        let t = 0.7;
        let (moved, _) = simulate(&field, t).unwrap();
        for (a, b) in [(1, 0), (0, 1), (-1, 2), (2, -2), (-2, -1)] {
            let c = lattice_generator(a as f64, b as f64, m);
            let e = matrix_exponential(&-c, t).unwrap();
            let f0 = ComplexVector::from_column_slice(field.mode(a, b).unwrap());
            let want = e * f0;
            let got = moved.mode(a, b).unwrap();
            let err = want.iter().zip(got).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(err < 1e-13, "mode ({a}, {b}): {err:e}");
        }
    }

    #[test]
    fn equilibrium_is_stationary() {
        let mut f = LorentzField::zeros(3, 4).unwrap();
        f.set(0, 0, 0, Complex64::new(0.3, -0.2)).unwrap();
        let (g, rep) = simulate(&f, 5.0).unwrap();
        assert_eq!(g, f);
        assert_eq!(rep.distance, 0.0);
    }

    #[test]
    fn single_mode_decays() {
        let mut f = LorentzField::zeros(1, 16).unwrap();
        f.set(1, 0, 2, Complex64::new(1.0, 0.0)).unwrap();
        let (_, rep) = simulate(&f, 10.0).unwrap();
        assert!(rep.distance <= 3f64.sqrt() * (-10.0 * lambda0()).exp());
        assert!(rep.within_bound);
    }

    #[test]
    fn random_field_conserves_mass_and_decays() {
        let mut rng = seeded_rng(0);
        let f = random_field(&mut rng, 3, 12).unwrap();
        let reports = simulate_series(&f, &uniform_grid(30.0, 10)).unwrap();
        for r in &reports {
            assert!(r.mass_drift <= 1e-14);
            assert!(r.within_bound, "{r:?}");
        }
        assert!(SimulationReport::csv(&reports).starts_with("t,distance,bound\n"));
    }

    #[test]
    fn negative_time_rejected() {
        let f = LorentzField::zeros(1, 2).unwrap();
        assert!(simulate(&f, -1.0).is_err());
    }
}
