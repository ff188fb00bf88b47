//! Polynomial potentials and the scaled / interpolated / perturbed family built on them.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;

/// Anything the orthogonal-polynomial and sampling code can use as a weight exponent.
pub trait Potential: Send + Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    /// Ascending coefficients of `V'` when it is a polynomial.
    fn derivative_polynomial(&self) -> Option<Vec<f64>> {
        None
    }
    /// A fixed interval the weight is restricted to, if any.
    fn domain(&self) -> Option<(f64, f64)> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialPotential {
    coeffs: Vec<f64>,
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn horner_c(c: &[f64], z: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

fn derivative_coeffs(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &a)| k as f64 * a)
        .collect()
}

impl PolynomialPotential {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPotential("non-finite coefficient".into()));
        }
        let deg = coeffs.len().saturating_sub(1);
        if coeffs.len() < 3 || deg % 2 != 0 {
            return Err(Error::InvalidPotential(format!(
                "degree must be even and at least 2, got {deg}"
            )));
        }
        if coeffs[deg] <= 0.0 {
            return Err(Error::InvalidPotential(format!(
                "leading coefficient must be positive, got {}",
                coeffs[deg]
            )));
        }
        Ok(PolynomialPotential { coeffs })
    }

    /// Parses comma-separated ascending coefficients such as `"0,0,0.5"`.
    pub fn parse(text: &str) -> Result<Self> {
        let coeffs = text
            .split(',')
            .map(|tok| {
                let t = tok.trim();
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::InvalidPotential(format!("bad coefficient token '{t}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        Self::new(coeffs)
    }

    pub fn gaussian() -> Self {
        PolynomialPotential {
            coeffs: vec![0.0, 0.0, 0.5],
        }
    }

    /// `λ⁴/4 - t λ²`.
    pub fn double_well(t: f64) -> Self {
        PolynomialPotential {
            coeffs: vec![0.0, 0.0, -t, 0.0, 0.25],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
    /// Half the degree, `m`.
    pub fn m(&self) -> usize {
        self.degree() / 2
    }

    pub fn eval(&self, x: f64) -> f64 {
        horner(&self.coeffs, x)
    }
    pub fn eval_c(&self, z: Complex64) -> Complex64 {
        horner_c(&self.coeffs, z)
    }
    pub fn derivative_coeffs(&self) -> Vec<f64> {
        derivative_coeffs(&self.coeffs)
    }
    pub fn deriv(&self, x: f64) -> f64 {
        horner(&self.derivative_coeffs(), x)
    }
    pub fn deriv_c(&self, z: Complex64) -> Complex64 {
        horner_c(&self.derivative_coeffs(), z)
    }
    pub fn second_deriv(&self, x: f64) -> f64 {
        horner(&derivative_coeffs(&self.derivative_coeffs()), x)
    }

    /// `(V'(z) - V'(λ)) / (z - λ)`, evaluated as a polynomial in both arguments.
    pub fn divided_difference(&self, z: f64, lam: f64) -> f64 {
        if (z - lam).abs() < 1e-8 * (1.0 + z.abs()) {
            return self.second_deriv(z);
        }
        let dv = self.derivative_coeffs();
        let mut s = 0.0;
        for (k, &v) in dv.iter().enumerate().skip(1) {
            // (z^k - λ^k)/(z - λ) = Σ_{i+j=k-1} z^i λ^j
            let mut acc = 0.0;
            for i in 0..k {
                acc += z.powi(i as i32) * lam.powi((k - 1 - i) as i32);
            }
            s += v * acc;
        }
        s
    }

    pub fn divided_difference_c(&self, z: Complex64, lam: Complex64) -> Complex64 {
        let dv = self.derivative_coeffs();
        let mut s = Complex64::new(0.0, 0.0);
        for (k, &v) in dv.iter().enumerate().skip(1) {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..k {
                acc += z.powi(i as i32) * lam.powi((k - 1 - i) as i32);
            }
            s += v * acc;
        }
        s
    }

    /// Minimum over the probe points `λ = ±radius` of `V(λ) - 2(1+ε₀) log(1+|λ|)` with `ε₀ = 0.1`.
    pub fn growth_margin(&self, probe_radius: f64) -> f64 {
        let log_term = 2.2 * (1.0 + probe_radius.abs()).ln();
        (self.eval(probe_radius) - log_term).min(self.eval(-probe_radius) - log_term)
    }
}

impl fmt::Display for PolynomialPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| format!("{c}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl Potential for PolynomialPotential {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        self.deriv(x)
    }
    fn derivative_polynomial(&self) -> Option<Vec<f64>> {
        Some(self.derivative_coeffs())
    }
}

/// Smooth perturbations with computable sup-norms.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    /// `amplitude · cos(kπλ/3 + phase)`, the real part of a scaled `e^{ikπλ/3}`.
    Trig { k: i32, amplitude: f64, phase: f64 },
    /// A real polynomial with a declared bound on the region of interest.
    Poly { coeffs: Vec<f64>, sup_norm: f64 },
}

impl Perturbation {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Perturbation::Trig {
                k,
                amplitude,
                phase,
            } => amplitude * (*k as f64 * PI * x / 3.0 + phase).cos(),
            Perturbation::Poly { coeffs, .. } => horner(coeffs, x),
        }
    }
    pub fn eval_c(&self, z: Complex64) -> Complex64 {
        match self {
            Perturbation::Trig {
                k,
                amplitude,
                phase,
            } => (z * (*k as f64 * PI / 3.0) + phase).cos() * *amplitude,
            Perturbation::Poly { coeffs, .. } => horner_c(coeffs, z),
        }
    }
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Perturbation::Trig {
                k,
                amplitude,
                phase,
            } => {
                let w = *k as f64 * PI / 3.0;
                -amplitude * w * (w * x + phase).sin()
            }
            Perturbation::Poly { coeffs, .. } => horner(&derivative_coeffs(coeffs), x),
        }
    }
    pub fn sup_norm(&self) -> f64 {
        match self {
            Perturbation::Trig { amplitude, .. } => amplitude.abs(),
            Perturbation::Poly { sup_norm, .. } => *sup_norm,
        }
    }
}

/// `tηV(z) + (1-t)·2(z-c)²/d² + h(z)/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialVariant {
    base: PolynomialPotential,
    eta: f64,
    t: f64,
    c: f64,
    d: f64,
    h: Option<(Perturbation, f64)>,
}

impl PotentialVariant {
    pub fn new(base: PolynomialPotential) -> Self {
        PotentialVariant {
            base,
            eta: 1.0,
            t: 1.0,
            c: 0.0,
            d: 2.0,
            h: None,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidPotential(format!(
                "scale η must be positive, got {eta}"
            )));
        }
        self.eta = eta;
        Ok(self)
    }

    /// Interpolation towards the quadratic reference `2(z-c)²/d²`.
    pub fn with_interpolation(mut self, t: f64, c: f64, d: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidPotential(format!(
                "t must lie in [0,1], got {t}"
            )));
        }
        if !(d > 0.0) {
            return Err(Error::InvalidPotential(format!(
                "half-width must be positive, got {d}"
            )));
        }
        self.t = t;
        self.c = c;
        self.d = d;
        Ok(self)
    }

    /// Adds `h/n`.
    pub fn with_perturbation(mut self, h: Perturbation, n: f64) -> Result<Self> {
        if !(n > 0.0) {
            return Err(Error::InvalidPotential("perturbation needs n > 0".into()));
        }
        self.h = Some((h, n));
        Ok(self)
    }

    pub fn base(&self) -> &PolynomialPotential {
        &self.base
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn center(&self) -> f64 {
        self.c
    }
    pub fn half_width(&self) -> f64 {
        self.d
    }
    pub fn has_perturbation(&self) -> bool {
        self.h.is_some()
    }
    pub fn m(&self) -> usize {
        if self.t > 0.0 {
            self.base.m()
        } else {
            1
        }
    }

    fn reference(&self, x: f64) -> f64 {
        2.0 * (x - self.c).powi(2) / (self.d * self.d)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.t * self.eta * self.base.eval(x);
        if self.t < 1.0 {
            v += (1.0 - self.t) * self.reference(x);
        }
        if let Some((h, n)) = &self.h {
            v += h.eval(x) / n;
        }
        v
    }

    pub fn eval_c(&self, z: Complex64) -> Complex64 {
        let mut v = self.base.eval_c(z) * (self.t * self.eta);
        if self.t < 1.0 {
            v += (z - self.c).powi(2) * (2.0 * (1.0 - self.t) / (self.d * self.d));
        }
        if let Some((h, n)) = &self.h {
            v += h.eval_c(z) / *n;
        }
        v
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let mut v = self.t * self.eta * self.base.deriv(x);
        if self.t < 1.0 {
            v += (1.0 - self.t) * 4.0 * (x - self.c) / (self.d * self.d);
        }
        if let Some((h, n)) = &self.h {
            v += h.derivative(x) / n;
        }
        v
    }

    /// The unperturbed variant as a plain polynomial.
    pub fn to_polynomial(&self) -> Result<PolynomialPotential> {
        if self.h.is_some() {
            return Err(Error::Unsupported(
                "a perturbed potential is not a polynomial".into(),
            ));
        }
        let mut c: Vec<f64> = self
            .base
            .coeffs
            .iter()
            .map(|a| a * self.t * self.eta)
            .collect();
        if self.t < 1.0 {
            let s = 2.0 * (1.0 - self.t) / (self.d * self.d);
            c[0] += s * self.c * self.c;
            c[1] -= 2.0 * s * self.c;
            c[2] += s;
        }
        if self.t == 0.0 {
            c.truncate(3);
        }
        PolynomialPotential::new(c)
    }
}

impl Potential for PotentialVariant {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        self.deriv(x)
    }
    fn derivative_polynomial(&self) -> Option<Vec<f64>> {
        self.to_polynomial().ok().map(|p| p.derivative_coeffs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic() -> PolynomialPotential {
        PolynomialPotential::new(vec![0.0, 0.0, 0.0, 0.0, 0.25]).unwrap()
    }

    #[test]
    fn eval_examples() {
        let g = PotentialVariant::new(PolynomialPotential::gaussian());
        assert_eq!(g.eval(2.0), 2.0);
        let r = g.clone().with_interpolation(0.0, 0.0, 2.0).unwrap();
        assert!((r.eval(1.0) - 0.5).abs() < 1e-15);
        let e = g.with_eta(2.0).unwrap();
        assert_eq!(e.eval(1.0), 1.0);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(PolynomialPotential::gaussian().deriv(3.0), 3.0);
        assert_eq!(quartic().deriv(2.0), 8.0);
        let v = PotentialVariant::new(PolynomialPotential::double_well(1.5))
            .with_interpolation(0.3, 0.2, 1.7)
            .unwrap();
        for i in 0..50 {
            let z = -3.0 + 6.0 * i as f64 / 49.0;
            let eps = 1e-6;
            let fd = (v.eval(z + eps) - v.eval(z - eps)) / (2.0 * eps);
            assert!((fd - v.deriv(z)).abs() < 1e-6);
        }
    }

    #[test]
    fn divided_difference_examples() {
        let g = PolynomialPotential::gaussian();
        assert_eq!(g.divided_difference(0.3, -1.7), 1.0);
        let q = quartic();
        for &(z, l) in &[(0.5, 1.5), (-2.0, 0.25), (1.1, -0.9)] {
            let expect = z * z + z * l + l * l;
            assert!((q.divided_difference(z, l) - expect).abs() < 1e-13);
            assert!((q.divided_difference(z, l) - q.divided_difference(l, z)).abs() < 1e-13);
        }
        assert!((q.divided_difference(1.0, 1.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn validation_and_parsing() {
        assert!(PolynomialPotential::new(vec![0.0, 0.0, -1.0]).is_err());
        assert!(PolynomialPotential::new(vec![0.0, 1.0]).is_err());
        assert!(PolynomialPotential::new(vec![0.0, 0.0, 0.0, 1.0]).is_err());
        let p = PolynomialPotential::parse("0, 0,0.5").unwrap();
        assert_eq!(p, PolynomialPotential::gaussian());
        match PolynomialPotential::parse("0,abc,1") {
            Err(Error::InvalidPotential(msg)) => assert!(msg.contains("abc")),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            PolynomialPotential::parse(&quartic().to_string()).unwrap(),
            quartic()
        );
    }

    #[test]
    fn growth_margin_examples() {
        let g = PolynomialPotential::gaussian();
        assert!(g.growth_margin(100.0) > 0.0);
        let small = g.growth_margin(0.1);
        assert!(small.is_finite() && small < 0.0);
        assert!(PolynomialPotential::double_well(3.0).growth_margin(50.0) > 0.0);
    }

    #[test]
    fn linear_in_eta_affine_in_t() {
        let base = PolynomialPotential::double_well(2.0);
        for &z in &[-1.3, 0.4, 2.2] {
            let v = |eta: f64, t: f64| {
                PotentialVariant::new(base.clone())
                    .with_eta(eta)
                    .unwrap()
                    .with_interpolation(t, 0.1, 1.5)
                    .unwrap()
                    .eval(z)
            };
            assert!((v(1.5, 1.0) - 1.5 * v(1.0, 1.0)).abs() < 1e-12);
            let mid = v(1.0, 0.5);
            assert!((mid - 0.5 * (v(1.0, 0.0) + v(1.0, 1.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_derivative() {
        let r = PotentialVariant::new(quartic())
            .with_interpolation(0.0, 0.3, 1.2)
            .unwrap();
        for &z in &[-1.0, 0.3, 2.0] {
            assert!((r.deriv(z) - 4.0 * (z - 0.3) / 1.44).abs() < 1e-13);
        }
        let p = r.to_polynomial().unwrap();
        assert_eq!(p.degree(), 2);
        assert!((p.eval(1.0) - r.eval(1.0)).abs() < 1e-14);
    }

    #[test]
    fn perturbation_enters_with_one_over_n() {
        let h = Perturbation::Trig {
            k: 2,
            amplitude: 0.5,
            phase: 0.0,
        };
        let v = PotentialVariant::new(PolynomialPotential::gaussian())
            .with_perturbation(h.clone(), 10.0)
            .unwrap();
        let x = 0.7;
        assert!((v.eval(x) - (0.5 * x * x + h.eval(x) / 10.0)).abs() < 1e-15);
        assert!((v.eval_c(Complex64::new(x, 0.0)).re - v.eval(x)).abs() < 1e-14);
        assert_eq!(h.sup_norm(), 0.5);
    }
}
