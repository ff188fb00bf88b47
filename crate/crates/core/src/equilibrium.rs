//! Equilibrium measures of polynomial potentials on a union of `q` intervals.
//!
//! The support endpoints `E_1 < … < E_{2q}` solve
//!
//! * the moment conditions `(2πi)^{-1} ∮ ζ^k V'(ζ) / X^{1/2}(ζ) dζ = 2 δ_{kq}`, `k = 0..q`,
//! * the gap conditions `∫_{gap} P(λ) |X(λ)|^{1/2} dλ = 0` for each of the `q - 1` gaps,
//!
//! where `X(z) = ∏ (z - E_i)` and `X^{1/2}` is the product of principal square
//! roots, which behaves like `z^q` at infinity and is cut exactly along the support.
//! The density is `ρ(λ) = P(λ) Im X^{1/2}(λ + i0) / 2π`.
//!
//! Logarithmic potentials of the pieces `ρ|_{σ_α}` are evaluated from the
//! cosine coefficients of `ρ(c + h cos θ) h sin θ`, using
//! `log|x - cos θ| = log(|ζ|/2) - Σ_k (2/k) Re ζ^{-k} cos kθ` with `x = (ζ + 1/ζ)/2`.

use crate::error::{Error, Result};
use crate::numerics::{gauss_rule, integrate_interval, EllipseContour, RuleKind};
use crate::potential::{PolynomialPotential, Potential, PotentialVariant};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

const CONTOUR_NODES: usize = 1024;
const CUT_NODES: usize = 512;
const NEWTON_CAP: usize = 100;
const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Support {
    endpoints: Vec<f64>,
    epsilon_pad: f64,
    delta_gap: f64,
}

impl Support {
    pub fn new(endpoints: Vec<f64>) -> Result<Self> {
        if endpoints.is_empty() || endpoints.len() % 2 != 0 {
            return Err(Error::Domain(format!(
                "support needs an even, positive number of endpoints, got {}",
                endpoints.len()
            )));
        }
        if endpoints.iter().any(|e| !e.is_finite()) || endpoints.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(Error::Domain(format!(
                "endpoints must be finite and strictly increasing: {endpoints:?}"
            )));
        }
        let q = endpoints.len() / 2;
        let mut shortest = f64::INFINITY;
        for w in endpoints.windows(2) {
            shortest = shortest.min(w[1] - w[0]);
        }
        let epsilon_pad = 0.1 * shortest;
        let delta_gap = if q == 1 {
            f64::INFINITY
        } else {
            (1..q)
                .map(|a| endpoints[2 * a] - endpoints[2 * a - 1])
                .fold(f64::INFINITY, f64::min)
                - 2.0 * epsilon_pad
        };
        Ok(Support {
            endpoints,
            epsilon_pad,
            delta_gap,
        })
    }

    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }
    pub fn q(&self) -> usize {
        self.endpoints.len() / 2
    }
    pub fn epsilon_pad(&self) -> f64 {
        self.epsilon_pad
    }
    pub fn delta_gap(&self) -> f64 {
        self.delta_gap
    }
    pub fn interval(&self, alpha: usize) -> (f64, f64) {
        (self.endpoints[2 * alpha], self.endpoints[2 * alpha + 1])
    }
    /// `σ_{α,ε}`.
    pub fn padded(&self, alpha: usize) -> (f64, f64) {
        let (a, b) = self.interval(alpha);
        (a - self.epsilon_pad, b + self.epsilon_pad)
    }
    pub fn hull(&self) -> (f64, f64) {
        (self.endpoints[0], *self.endpoints.last().unwrap())
    }
    /// Index of the interval containing `λ`, endpoints included.
    pub fn locate(&self, lam: f64) -> Option<usize> {
        (0..self.q()).find(|&a| {
            let (lo, hi) = self.interval(a);
            lam >= lo && lam <= hi
        })
    }

    /// `X^{1/2}(z)` as a product of principal square roots.
    pub fn sqrt_x(&self, z: Complex64) -> Complex64 {
        self.endpoints
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &e| acc * (z - e).sqrt())
    }

    /// Boundary value `X^{1/2}(λ + i0)`.
    pub fn sqrt_x_upper(&self, lam: f64) -> Complex64 {
        self.endpoints
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &e| {
                let d = lam - e;
                if d >= 0.0 {
                    acc * d.sqrt()
                } else {
                    acc * Complex64::new(0.0, (-d).sqrt())
                }
            })
    }

    pub fn x_abs_sqrt(&self, lam: f64) -> f64 {
        self.endpoints
            .iter()
            .map(|e| (lam - e).abs())
            .product::<f64>()
            .sqrt()
    }
}

/// Contour moments `m_j = (2πi)^{-1} ∮ ζ^j / X^{1/2}(ζ) dζ` for `j < count`.
fn contour_moments(support: &Support, count: usize) -> Result<Vec<f64>> {
    let (lo, hi) = support.hull();
    let contour = EllipseContour::around(lo, hi, CONTOUR_NODES)?;
    let pts = contour.points();
    let mut out = vec![0.0; count];
    for (z, w) in pts {
        let base = w / support.sqrt_x(z);
        let mut zp = Complex64::new(1.0, 0.0);
        for m in out.iter_mut() {
            *m += (base * zp).re;
            zp *= z;
        }
    }
    Ok(out)
}

/// Ascending coefficients of `P` from the contour moments.
fn p_from_moments(dv: &[f64], m: &[f64]) -> Vec<f64> {
    let deg = dv.len().saturating_sub(1);
    (0..deg)
        .map(|i| (i + 1..=deg).map(|k| dv[k] * m[k - 1 - i]).sum())
        .collect()
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn poly_eval_c(c: &[f64], z: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

struct EndpointSystem<'a> {
    v: &'a PolynomialPotential,
    q: usize,
}

impl EndpointSystem<'_> {
    fn residuals(&self, e: &[f64]) -> Result<Vec<f64>> {
        let support = Support::new(e.to_vec())?;
        let dv = self.v.derivative_coeffs();
        let m = contour_moments(&support, self.q + dv.len() + 1)?;
        let mut r = Vec::with_capacity(2 * self.q);
        for k in 0..=self.q {
            let mk: f64 = dv.iter().enumerate().map(|(l, &c)| c * m[k + l]).sum();
            r.push(mk - if k == self.q { 2.0 } else { 0.0 });
        }
        let p = p_from_moments(&dv, &m);
        let rule = gauss_rule(32, RuleKind::JacobiHalf)?;
        for g in 1..self.q {
            let (a, b) = (e[2 * g - 1], e[2 * g]);
            let val = integrate_interval(
                |x| poly_eval(&p, x) * support.x_abs_sqrt(x),
                a,
                b,
                &rule,
                1,
                1e-14,
            )
            .map(|i| i.value)
            .or_else(|err| match err {
                Error::Convergence { best, .. } => Ok(best),
                other => Err(other),
            })?;
            r.push(val);
        }
        Ok(r)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton solve of the endpoint system for `q` cuts, starting from `guess`.
pub fn solve_support(v: &PotentialVariant, q: usize, guess: &[f64]) -> Result<Support> {
    let poly = v.to_polynomial()?;
    solve_support_poly(&poly, q, guess)
}

pub fn solve_support_poly(v: &PolynomialPotential, q: usize, guess: &[f64]) -> Result<Support> {
    if q == 0 || guess.len() != 2 * q {
        return Err(Error::InvalidConfig(format!(
            "{q} cuts need {} initial endpoints, got {}",
            2 * q,
            guess.len()
        )));
    }
    if q > v.m() {
        return Err(Error::Degenerate(format!(
            "a degree-{} potential supports at most {} cuts",
            v.degree(),
            v.m()
        )));
    }
    let sys = EndpointSystem { v, q };
    let mut e = guess.to_vec();
    let mut r = sys.residuals(&e)?;
    let mut iterations = 0;
    while inf_norm(&r) > RESIDUAL_TOL {
        iterations += 1;
        if iterations > NEWTON_CAP {
            return Err(Error::SolverFailure {
                iterations: NEWTON_CAP,
                residuals: r,
            });
        }
        let n = 2 * q;
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-7 * (1.0 + e[j].abs());
            let mut ep = e.clone();
            ep[j] += h;
            let mut em = e.clone();
            em[j] -= h;
            let (rp, rm) = match (sys.residuals(&ep), sys.residuals(&em)) {
                (Ok(rp), Ok(rm)) => (rp, rm),
                _ => {
                    return Err(Error::SolverFailure {
                        iterations,
                        residuals: r,
                    })
                }
            };
            for i in 0..n {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rhs = -DVector::from_vec(r.clone());
        let step = match jac.lu().solve(&rhs) {
            Some(s) => s,
            None => {
                return Err(Error::SolverFailure {
                    iterations,
                    residuals: r,
                })
            }
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let trial: Vec<f64> = e
                .iter()
                .zip(step.iter())
                .map(|(a, s)| a + lambda * s)
                .collect();
            if let Ok(rt) = sys.residuals(&trial) {
                if inf_norm(&rt) < inf_norm(&r) {
                    e = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::SolverFailure {
                iterations,
                residuals: r,
            });
        }
    }
    Support::new(e)
}

/// Support guess from the potential's shape: a level set around the global
/// minimum for one cut, the wells for several.
pub fn default_guess(v: &PolynomialPotential, q: usize) -> Vec<f64> {
    let scan: Vec<f64> = (0..=4000)
        .map(|i| -20.0 + 40.0 * i as f64 / 4000.0)
        .collect();
    let vals: Vec<f64> = scan.iter().map(|&x| v.eval(x)).collect();
    let mut minima = Vec::new();
    let mut maxima = Vec::new();
    for i in 1..scan.len() - 1 {
        if vals[i] < vals[i - 1] && vals[i] <= vals[i + 1] {
            minima.push(i);
        }
        if vals[i] > vals[i - 1] && vals[i] >= vals[i + 1] {
            maxima.push(i);
        }
    }
    let level = if q == 1 || minima.len() < q {
        let vmin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let barrier = maxima
            .iter()
            .map(|&i| vals[i])
            .fold(f64::NEG_INFINITY, f64::max);
        (vmin + 2.0).max(if barrier.is_finite() {
            barrier + 1.0
        } else {
            f64::NEG_INFINITY
        })
    } else {
        let top_min = minima
            .iter()
            .map(|&i| vals[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let low_max = maxima
            .iter()
            .map(|&i| vals[i])
            .fold(f64::INFINITY, f64::min);
        0.5 * (top_min + low_max)
    };
    let mut ends = Vec::new();
    let mut inside = false;
    for i in 0..scan.len() {
        let below = vals[i] < level;
        if below != inside {
            ends.push(scan[i]);
            inside = below;
        }
    }
    if ends.len() != 2 * q {
        let (lo, hi) = (
            ends.first().copied().unwrap_or(-2.0),
            ends.last().copied().unwrap_or(2.0),
        );
        return (0..2 * q)
            .map(|i| lo + (hi - lo) * i as f64 / (2 * q - 1) as f64)
            .collect();
    }
    ends
}

#[derive(Debug, Clone)]
struct Cut {
    a: f64,
    b: f64,
    // midpoint nodes θ_i = (i + ½)π / M and F(θ_i) = ρ(c + h cos θ_i) h sin θ_i
    theta: Vec<f64>,
    f: Vec<f64>,
    // cosine coefficients a_k = ∫_0^π F(θ) cos kθ dθ
    coef: Vec<f64>,
}

impl Cut {
    fn center(&self) -> f64 {
        0.5 * (self.a + self.b)
    }
    fn half(&self) -> f64 {
        0.5 * (self.b - self.a)
    }
    fn mass(&self) -> f64 {
        self.coef[0]
    }

    fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let w = PI / self.theta.len() as f64;
        let (c, h) = (self.center(), self.half());
        self.theta
            .iter()
            .zip(&self.f)
            .map(move |(&t, &f)| (c + h * t.cos(), w * f))
    }

    /// `∫_{cut} log|λ - μ| ρ(μ) dμ`.
    fn log_potential(&self, lam: f64) -> f64 {
        let h = self.half();
        let x = (lam - self.center()) / h;
        if x.abs() <= 1.0 {
            let phi = x.clamp(-1.0, 1.0).acos();
            let mut s = 0.0;
            for (k, &a) in self.coef.iter().enumerate().skip(1) {
                s += 2.0 / k as f64 * (k as f64 * phi).cos() * a;
            }
            (h / 2.0).ln() * self.coef[0] - s
        } else {
            let zeta = x + x.signum() * (x * x - 1.0).sqrt();
            let inv = 1.0 / zeta;
            let mut p = 1.0;
            let mut s = 0.0;
            for (k, &a) in self.coef.iter().enumerate().skip(1) {
                p *= inv;
                s += 2.0 / k as f64 * p * a;
                if p.abs() < 1e-18 {
                    break;
                }
            }
            (h * zeta.abs() / 2.0).ln() * self.coef[0] - s
        }
    }

    /// Derivative of [`Cut::log_potential`] off the cut.
    fn log_potential_derivative(&self, lam: f64) -> f64 {
        let h = self.half();
        let x = (lam - self.center()) / h;
        if x.abs() <= 1.0 {
            let phi = x.clamp(-1.0, 1.0).acos();
            let sp = phi.sin().max(1e-300);
            let mut s = 0.0;
            for (k, &a) in self.coef.iter().enumerate().skip(1) {
                s += 2.0 * a * (k as f64 * phi).sin();
            }
            -s / sp / h
        } else {
            let root = x.signum() * (x * x - 1.0).sqrt();
            let zeta = x + root;
            let inv = 1.0 / zeta;
            let mut p = 1.0;
            let mut s = self.coef[0];
            for &a in self.coef.iter().skip(1) {
                p *= inv;
                s += 2.0 * a * p;
                if p.abs() < 1e-18 {
                    break;
                }
            }
            s / root / h
        }
    }

    /// `∫_λ^{b} ρ` for `λ` inside the cut.
    fn mass_above(&self, lam: f64) -> f64 {
        let x = ((lam - self.center()) / self.half()).clamp(-1.0, 1.0);
        let th = x.acos();
        let mut s = self.coef[0] * th;
        for (k, &a) in self.coef.iter().enumerate().skip(1) {
            s += 2.0 * a * (k as f64 * th).sin() / k as f64;
        }
        s / PI
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MassPlan {
    pub masses: Vec<f64>,
    pub counts: Vec<usize>,
    pub shifts: Vec<i64>,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct EquilibriumMeasure {
    potential: PolynomialPotential,
    support: Support,
    p_coeffs: Vec<f64>,
    cuts: Vec<Cut>,
    v_star: f64,
    total_mass: f64,
}

impl EquilibriumMeasure {
    /// Solves for the support and assembles the measure.
    pub fn solve(v: &PotentialVariant, q: usize, guess: &[f64]) -> Result<Self> {
        let poly = v.to_polynomial()?;
        let support = solve_support_poly(&poly, q, guess)?;
        Self::from_support(poly, support)
    }

    pub fn solve_default(v: &PolynomialPotential, q: usize) -> Result<Self> {
        let support = solve_support_poly(v, q, &default_guess(v, q))?;
        Self::from_support(v.clone(), support)
    }

    pub fn from_support(potential: PolynomialPotential, support: Support) -> Result<Self> {
        let p_coeffs = compute_p(&support, &potential)?;
        let q = support.q();
        let mut cuts = Vec::with_capacity(q);
        let theta: Vec<f64> = (0..CUT_NODES)
            .map(|i| (i as f64 + 0.5) * PI / CUT_NODES as f64)
            .collect();
        for alpha in 0..q {
            let (a, b) = support.interval(alpha);
            let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
            let mut f = Vec::with_capacity(CUT_NODES);
            for &t in &theta {
                let x = c + h * t.cos();
                let rho = poly_eval(&p_coeffs, x) * support.sqrt_x_upper(x).im / (2.0 * PI);
                f.push(rho * h * t.sin());
            }
            let w = PI / CUT_NODES as f64;
            let coef: Vec<f64> = (0..CUT_NODES)
                .map(|k| {
                    theta
                        .iter()
                        .zip(&f)
                        .map(|(&t, &fv)| w * fv * (k as f64 * t).cos())
                        .sum()
                })
                .collect();
            cuts.push(Cut {
                a,
                b,
                theta: theta.clone(),
                f,
                coef,
            });
        }
        for (alpha, cut) in cuts.iter().enumerate() {
            let inner = cut.theta.len() / 20;
            let scale = inf_norm(&cut.f).max(1e-300);
            let worst = cut.f[inner..cut.f.len() - inner]
                .iter()
                .fold(f64::INFINITY, |m, &v| m.min(v));
            if worst <= 1e-8 * scale {
                return Err(Error::Degenerate(format!(
                    "density vanishes or turns negative inside interval {alpha}"
                )));
            }
        }
        let total_mass = cuts.iter().map(Cut::mass).sum();
        let mut m = EquilibriumMeasure {
            potential,
            support,
            p_coeffs,
            cuts,
            v_star: 0.0,
            total_mass,
        };
        let vs: Vec<f64> = m.cuts.iter().map(|c| m.effective_v(c.center())).collect();
        m.v_star = vs.iter().sum::<f64>() / vs.len() as f64;
        Ok(m)
    }

    pub fn potential(&self) -> &PolynomialPotential {
        &self.potential
    }
    pub fn support(&self) -> &Support {
        &self.support
    }
    pub fn q(&self) -> usize {
        self.support.q()
    }
    pub fn p_coeffs(&self) -> &[f64] {
        &self.p_coeffs
    }
    pub fn p(&self, x: f64) -> f64 {
        poly_eval(&self.p_coeffs, x)
    }
    pub fn p_c(&self, z: Complex64) -> Complex64 {
        poly_eval_c(&self.p_coeffs, z)
    }
    pub fn v_star(&self) -> f64 {
        self.v_star
    }
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }
    pub fn masses(&self) -> Vec<f64> {
        self.cuts.iter().map(Cut::mass).collect()
    }

    pub fn density(&self, lam: f64) -> Result<f64> {
        if self.support.locate(lam).is_none() {
            return Err(Error::Domain(format!("λ = {lam} lies outside the support")));
        }
        Ok(self.density_or_zero(lam))
    }

    /// Density with value zero off the support.
    pub fn density_or_zero(&self, lam: f64) -> f64 {
        if self.support.locate(lam).is_none() {
            return 0.0;
        }
        (self.p(lam) * self.support.sqrt_x_upper(lam).im / (2.0 * PI)).max(0.0)
    }

    /// Density values on the per-interval θ-midpoint grids, as `(interval, λ, ρ)`.
    pub fn density_grid(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for (alpha, cut) in self.cuts.iter().enumerate() {
            let (c, h) = (cut.center(), cut.half());
            let mut pts: Vec<(usize, f64, f64)> = cut
                .theta
                .iter()
                .zip(&cut.f)
                .map(|(&t, &f)| (alpha, c + h * t.cos(), f / (h * t.sin())))
                .collect();
            pts.reverse();
            out.extend(pts);
        }
        out
    }

    /// Quadrature nodes and weights carrying `ρ(λ) dλ`, over the whole support.
    pub fn rho_quadrature(&self) -> Vec<(f64, f64)> {
        self.cuts
            .iter()
            .flat_map(|c| c.nodes().collect::<Vec<_>>())
            .collect()
    }

    /// `∫ f ρ`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.rho_quadrature()
            .into_iter()
            .map(|(x, w)| w * f(x))
            .sum()
    }

    /// `g(z) = (P(z) X^{1/2}(z) - V'(z)) / 2`.
    pub fn stieltjes_g(&self, z: Complex64) -> Result<Complex64> {
        if z.im == 0.0 && self.support.locate(z.re).is_some() {
            return Err(Error::Domain(format!("z = {z} lies on the support")));
        }
        Ok(self.g_unchecked(z))
    }

    fn g_unchecked(&self, z: Complex64) -> Complex64 {
        (self.p_c(z) * self.support.sqrt_x(z) - self.potential.deriv_c(z)) * 0.5
    }

    /// `g'(z)`.
    pub fn stieltjes_g_prime(&self, z: Complex64) -> Complex64 {
        let pc = &self.p_coeffs;
        let dp: Vec<f64> = pc
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &a)| k as f64 * a)
            .collect();
        let sx = self.support.sqrt_x(z);
        let dlog: Complex64 = self
            .support
            .endpoints()
            .iter()
            .map(|&e| 0.5 / (z - e))
            .sum();
        let d2v: Vec<f64> = self
            .potential
            .derivative_coeffs()
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &a)| k as f64 * a)
            .collect();
        (poly_eval_c(&dp, z) * sx + self.p_c(z) * sx * dlog - poly_eval_c(&d2v, z)) * 0.5
    }

    /// `∫_{σ_α} log|λ - μ| ρ(μ) dμ`.
    pub fn log_potential(&self, alpha: usize, lam: f64) -> f64 {
        self.cuts[alpha].log_potential(lam)
    }

    /// `v(λ) = 2 ∫ log|μ - λ| ρ(μ) dμ - V(λ)`.
    pub fn effective_v(&self, lam: f64) -> f64 {
        2.0 * self.cuts.iter().map(|c| c.log_potential(lam)).sum::<f64>() - self.potential.eval(lam)
    }

    /// `F(λ) = ∫_λ^{E_{2q}} ρ`.
    pub fn integrated_density(&self, lam: f64) -> f64 {
        let mut s = 0.0;
        for cut in self.cuts.iter().rev() {
            if lam >= cut.b {
                continue;
            }
            if lam <= cut.a {
                s += cut.mass();
            } else {
                s += cut.mass_above(lam);
            }
        }
        s
    }

    pub fn mass_plan(&self, n: usize) -> Result<MassPlan> {
        let q = self.q();
        if n % 2 != 0 || n < 4 * q {
            return Err(Error::InvalidConfig(format!(
                "mass plan needs an even n ≥ {}, got {n}",
                4 * q
            )));
        }
        let masses: Vec<f64> = self.masses().iter().map(|m| m / self.total_mass).collect();
        plan_counts(&masses, n)
    }

    pub fn effective_potential(&self, alpha: usize) -> Result<EffectivePotential> {
        if alpha >= self.q() {
            return Err(Error::Index {
                index: alpha,
                limit: self.q(),
            });
        }
        let others = self
            .cuts
            .iter()
            .enumerate()
            .filter(|(b, _)| *b != alpha)
            .map(|(_, c)| c.clone())
            .collect();
        Ok(EffectivePotential {
            potential: self.potential.clone(),
            others,
            domain: self.support.padded(alpha),
        })
    }

    /// `Σ_{α≠α'} ∫∫ log|λ - μ| ρ_α(λ) ρ_{α'}(μ)`.
    pub fn cross_energy(&self) -> f64 {
        let mut s = 0.0;
        for (a, ca) in self.cuts.iter().enumerate() {
            for (b, cb) in self.cuts.iter().enumerate() {
                if a != b {
                    s += ca
                        .nodes()
                        .map(|(x, w)| w * cb.log_potential(x))
                        .sum::<f64>();
                }
            }
        }
        s
    }

    /// `L[ρ, ρ] = ∫∫ log|λ - μ| ρ(λ) ρ(μ)`.
    pub fn log_energy(&self) -> f64 {
        let mut s = 0.0;
        for cut in &self.cuts {
            // closed form of the self term from the cosine coefficients
            let h = cut.half();
            s += (h / 2.0).ln() * cut.coef[0] * cut.coef[0]
                - cut
                    .coef
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, a)| 2.0 / k as f64 * a * a)
                    .sum::<f64>();
        }
        s + self.cross_energy()
    }

    /// `E[V] = L[ρ, ρ] - ∫ V ρ`.
    pub fn energy(&self) -> f64 {
        self.log_energy() - self.integrate(|x| self.potential.eval(x))
    }

    /// `t ρ(λ) + (1-t) (2/(π d²)) |X(λ)|^{1/2}` for a one-cut measure.
    pub fn interpolated_density(&self, t: f64, lam: f64) -> Result<f64> {
        if self.q() != 1 {
            return Err(Error::Unsupported(
                "interpolated density is defined for one-cut measures".into(),
            ));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
        }
        let (a, b) = self.support.interval(0);
        if lam < a || lam > b {
            return Ok(0.0);
        }
        let d = 0.5 * (b - a);
        let rho0 = 2.0 / (PI * d * d) * self.support.x_abs_sqrt(lam);
        Ok(t * self.density_or_zero(lam) + (1.0 - t) * rho0)
    }

    /// Interior points where `v` on a grid attains its maximum (within `tol`).
    pub fn argmax_v(&self, lo: f64, hi: f64, points: usize, tol: f64) -> Vec<f64> {
        let xs: Vec<f64> = (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect();
        let vs: Vec<f64> = xs.iter().map(|&x| self.effective_v(x)).collect();
        let vmax = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        xs.into_iter()
            .zip(vs)
            .filter(|(_, v)| *v >= vmax - tol)
            .map(|(x, _)| x)
            .collect()
    }
}

/// `P(z) = (2πi)^{-1} ∮ (V'(z) - V'(ζ)) / ((z - ζ) X^{1/2}(ζ)) dζ`, as coefficients.
pub fn compute_p(support: &Support, v: &PolynomialPotential) -> Result<Vec<f64>> {
    let dv = v.derivative_coeffs();
    let m = contour_moments(support, dv.len() + 1)?;
    let mut p = p_from_moments(&dv, &m);
    let target = (2 * v.m()).saturating_sub(support.q());
    let scale = inf_norm(&p).max(1.0);
    while p.len() > target.max(1) && p.last().map_or(false, |c| c.abs() < 1e-9 * scale) {
        p.pop();
    }
    Ok(p)
}

/// Even particle counts per interval: round each `nμ_α` down to an even
/// integer, then hand out the remaining deficit two at a time by decreasing
/// fractional part, ties to the lower index.
pub fn plan_counts(masses: &[f64], n: usize) -> Result<MassPlan> {
    let nm: Vec<f64> = masses.iter().map(|m| n as f64 * m).collect();
    let mut counts: Vec<usize> = nm
        .iter()
        .map(|x| 2 * ((x / 2.0).floor().max(0.0) as usize))
        .collect();
    let assigned: usize = counts.iter().sum();
    if assigned > n {
        return Err(Error::PlanInfeasible(format!(
            "rounded counts {counts:?} exceed n = {n}"
        )));
    }
    let mut deficit = n - assigned;
    let mut order: Vec<usize> = (0..masses.len()).collect();
    order.sort_by(|&i, &j| {
        let fi = nm[i] - counts[i] as f64;
        let fj = nm[j] - counts[j] as f64;
        fj.partial_cmp(&fi).unwrap().then(i.cmp(&j))
    });
    let mut idx = 0;
    while deficit > 0 {
        if idx >= order.len() {
            return Err(Error::PlanInfeasible(format!(
                "cannot distribute {deficit} remaining particles"
            )));
        }
        counts[order[idx]] += 2;
        deficit -= 2;
        idx += 1;
    }
    let shifts: Vec<i64> = counts
        .iter()
        .zip(&nm)
        .map(|(&k, &x)| k as i64 - x.floor() as i64)
        .collect();
    if let Some(s) = shifts.iter().find(|s| s.abs() > 2) {
        return Err(Error::PlanInfeasible(format!("shift {s} exceeds 2")));
    }
    Ok(MassPlan {
        masses: masses.to_vec(),
        counts,
        shifts,
        n,
    })
}

/// `V(λ) - 2 ∫_{σ∖σ_α} log|λ - μ| ρ(μ) dμ` on `σ_{α,ε}`.
#[derive(Debug, Clone)]
pub struct EffectivePotential {
    potential: PolynomialPotential,
    others: Vec<Cut>,
    domain: (f64, f64),
}

impl EffectivePotential {
    pub fn interval(&self) -> (f64, f64) {
        self.domain
    }
}

impl Potential for EffectivePotential {
    fn value(&self, x: f64) -> f64 {
        self.potential.eval(x) - 2.0 * self.others.iter().map(|c| c.log_potential(x)).sum::<f64>()
    }
    fn derivative(&self, x: f64) -> f64 {
        self.potential.deriv(x)
            - 2.0
                * self
                    .others
                    .iter()
                    .map(|c| c.log_potential_derivative(x))
                    .sum::<f64>()
    }
    fn derivative_polynomial(&self) -> Option<Vec<f64>> {
        if self.others.is_empty() {
            Some(self.potential.derivative_coeffs())
        } else {
            None
        }
    }
    fn domain(&self) -> Option<(f64, f64)> {
        Some(self.domain)
    }
}

/// Compact JSON summary of a solved measure.
#[derive(Debug, Clone, Serialize)]
pub struct SupportReport {
    pub endpoints: Vec<f64>,
    pub masses: Vec<f64>,
    pub counts: Vec<usize>,
    pub v_star: f64,
    pub cross_energy: f64,
}

impl SupportReport {
    pub fn new(m: &EquilibriumMeasure, plan: Option<&MassPlan>) -> Self {
        SupportReport {
            endpoints: m.support.endpoints.clone(),
            masses: m.masses(),
            counts: plan.map(|p| p.counts.clone()).unwrap_or_default(),
            v_star: m.v_star,
            cross_energy: m.cross_energy(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_contour;

    fn gaussian() -> EquilibriumMeasure {
        EquilibriumMeasure::solve(
            &PotentialVariant::new(PolynomialPotential::gaussian()),
            1,
            &[-1.5, 2.5],
        )
        .unwrap()
    }

    fn two_cut() -> EquilibriumMeasure {
        EquilibriumMeasure::solve_default(&PolynomialPotential::double_well(2.0), 2).unwrap()
    }

    #[test]
    fn gaussian_support_and_density() {
        let m = gaussian();
        let e = m.support().endpoints();
        assert!((e[0] + 2.0).abs() < 1e-10 && (e[1] - 2.0).abs() < 1e-10);
        assert!((m.density(0.0).unwrap() - 1.0 / PI).abs() < 1e-8);
        assert!(m.density(e[1]).unwrap().abs() < 1e-12);
        assert!((m.total_mass() - 1.0).abs() < 1e-8);
        assert!(m.density(2.5).is_err());
        assert_eq!(m.p_coeffs().len(), 1);
        assert!((m.p(0.7) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn double_well_matches_symmetric_reduction() {
        // V = λ⁴/4 - tλ² with t = 2: a² = 2t - 2, b² = 2t + 2
        let m = two_cut();
        let e = m.support().endpoints();
        let (a, b) = (2f64.sqrt(), 6f64.sqrt());
        let expect = [-b, -a, a, b];
        for (x, y) in e.iter().zip(expect) {
            assert!((x - y).abs() < 1e-8, "{e:?}");
        }
        // P(λ) = λ
        assert!((m.p(1.3) - 1.3).abs() < 1e-9);
        let masses = m.masses();
        assert!((masses[0] - 0.5).abs() < 1e-9 && (masses[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn one_cut_quartic_p() {
        let v = PolynomialPotential::new(vec![0.0, 0.0, 0.0, 0.0, 0.25]).unwrap();
        let m = EquilibriumMeasure::solve_default(&v, 1).unwrap();
        let a = (16.0f64 / 3.0).powf(0.25);
        let e = m.support().endpoints();
        assert!((e[1] - a).abs() < 1e-10 && (e[0] + a).abs() < 1e-10);
        for x in [0.0, 0.5, 1.2] {
            assert!((m.p(x) - (x * x + a * a / 2.0)).abs() < 1e-9);
        }
        assert_eq!(m.p_coeffs().len(), 3);
    }

    #[test]
    fn bad_guess_reports_residuals() {
        let v = PotentialVariant::new(PolynomialPotential::gaussian());
        match EquilibriumMeasure::solve(&v, 2, &[-2.0, -0.5, 0.5, 2.0]) {
            Err(Error::SolverFailure { residuals, .. }) => assert_eq!(residuals.len(), 4),
            Err(Error::Degenerate(_)) => {}
            other => panic!(
                "expected failure, got {:?}",
                other.map(|m| m.support().clone())
            ),
        }
    }

    #[test]
    fn stieltjes_examples() {
        let m = gaussian();
        let g = m.stieltjes_g(Complex64::new(3.0, 0.0)).unwrap();
        assert!((g.re - (5f64.sqrt() - 3.0) / 2.0).abs() < 1e-12);
        let z = Complex64::new(1e4, 0.0);
        assert!((z * m.stieltjes_g(z).unwrap() + 1.0).norm() < 1e-4);
        for x in [-1.5, -0.3, 0.8, 1.7] {
            let g = m.stieltjes_g(Complex64::new(x, 1e-12)).unwrap();
            assert!((g.im - PI * m.density(x).unwrap()).abs() < 1e-6);
        }
        assert!(m.stieltjes_g(Complex64::new(0.5, 0.0)).is_err());
    }

    #[test]
    fn stieltjes_matches_direct_quadrature() {
        let m = two_cut();
        for z in [
            Complex64::new(0.3, 0.7),
            Complex64::new(3.0, -0.2),
            Complex64::new(-1.9, 0.4),
        ] {
            let direct: Complex64 = m
                .rho_quadrature()
                .into_iter()
                .map(|(x, w)| w / (x - z))
                .sum();
            assert!((direct - m.stieltjes_g(z).unwrap()).norm() < 1e-9);
        }
    }

    #[test]
    fn quadratic_identity() {
        let m = two_cut();
        let v = m.potential().clone();
        let contour = EllipseContour::around(-2.6, 2.6, 1024).unwrap();
        for k in 0..20 {
            let th = k as f64 * 0.7;
            let z = Complex64::new(3.5 * th.cos(), 2.5 * th.sin() + 0.1);
            let gz = m.stieltjes_g(z).unwrap();
            let qz = -integrate_contour(
                |zeta| v.divided_difference_c(z, zeta) * m.g_unchecked(zeta),
                &contour,
            );
            assert!((gz * gz + v.deriv_c(z) * gz + qz).norm() < 1e-6);
        }
    }

    #[test]
    fn effective_v_constant_on_support() {
        let m = gaussian();
        assert!((m.effective_v(0.0) - m.effective_v(1.0)).abs() < 1e-6);
        assert!(m.effective_v(3.0) < m.v_star());
        // semicircle: v* = -1
        assert!((m.v_star() + 1.0).abs() < 1e-8);
        let t = two_cut();
        assert!((t.effective_v(-2.0) - t.effective_v(1.8)).abs() < 1e-6);
        assert!(t.effective_v(0.0) < t.v_star());
        let arg = t.argmax_v(-4.0, 4.0, 801, 1e-9);
        let step = 0.01;
        assert!(arg.iter().all(|&x| t.support().locate(x).is_some()
            || t.support().locate(x - step).is_some()
            || t.support().locate(x + step).is_some()));
    }

    #[test]
    fn integrated_density_examples() {
        let m = gaussian();
        assert!(m.integrated_density(2.0).abs() < 1e-14);
        assert!((m.integrated_density(-2.0) - 1.0).abs() < 1e-10);
        assert!((m.integrated_density(0.0) - 0.5).abs() < 1e-12);
        let t = two_cut();
        assert!((t.integrated_density(0.0) - 0.5).abs() < 1e-9);
        let mut prev = 1.1;
        for i in 0..50 {
            let f = t.integrated_density(-3.0 + 6.0 * i as f64 / 49.0);
            assert!(f <= prev + 1e-14);
            prev = f;
        }
    }

    #[test]
    fn mass_plan_examples() {
        let t = two_cut();
        assert_eq!(t.mass_plan(20).unwrap().counts, vec![10, 10]);
        let g = gaussian();
        for n in [4, 10, 30] {
            assert_eq!(g.mass_plan(n).unwrap().counts, vec![n]);
        }
        let p = plan_counts(&[0.3, 0.7], 10).unwrap();
        assert_eq!(p.counts, vec![4, 6]);
        assert_eq!(p.shifts, vec![1, -1]);
        assert!(g.mass_plan(7).is_err());
    }

    #[test]
    fn effective_potentials() {
        let g = gaussian();
        let eff = g.effective_potential(0).unwrap();
        for x in [-2.1, 0.3, 1.9] {
            assert!((eff.value(x) - g.potential().eval(x)).abs() < 1e-15);
        }
        assert!(g.effective_potential(1).is_err());
        let t = two_cut();
        let e0 = t.effective_potential(0).unwrap();
        let e1 = t.effective_potential(1).unwrap();
        for x in [1.5, 1.9, 2.4] {
            assert!((e0.value(-x) - e1.value(x)).abs() < 1e-8);
            // direct log-kernel quadrature over the other cut
            let direct: f64 = t
                .rho_quadrature()
                .into_iter()
                .filter(|(mu, _)| *mu < 0.0)
                .map(|(mu, w)| w * (x - mu).abs().ln())
                .sum();
            let expect = t.potential().eval(x) - 2.0 * direct;
            assert!((e1.value(x) - expect).abs() < 1e-6);
            let h = 1e-6;
            let fd = (e1.value(x + h) - e1.value(x - h)) / (2.0 * h);
            assert!((fd - e1.derivative(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn cross_energy_properties() {
        assert_eq!(gaussian().cross_energy(), 0.0);
        let t = two_cut();
        let s = t.cross_energy();
        // independent 2D quadrature with Gauss-Jacobi nodes on both cuts
        let rule = gauss_rule(200, RuleKind::JacobiHalf).unwrap();
        let (a, b) = t.support().interval(1);
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        let pts: Vec<(f64, f64)> = rule
            .nodes()
            .iter()
            .zip(rule.weights())
            .map(|(&x, &w)| (c + h * x, h * w * t.density_or_zero(c + h * x)))
            .collect();
        let mut direct = 0.0;
        for &(x, wx) in &pts {
            for &(y, wy) in &pts {
                direct += wx * wy * (x + y).abs().ln();
            }
        }
        // both orders of the pair contribute equally by symmetry
        assert!((s - 2.0 * direct).abs() < 1e-10, "{s} {direct}");
        assert!(s > 0.0 || s < 0.0);
    }

    #[test]
    fn energy_of_semicircle() {
        let g = gaussian();
        assert!((g.log_energy() + 0.25).abs() < 1e-12);
        assert!((g.energy() + 0.75).abs() < 1e-12);
        let shifted = PolynomialPotential::new(vec![1.5, 0.0, 0.5]).unwrap();
        let gs = EquilibriumMeasure::solve_default(&shifted, 1).unwrap();
        assert!((gs.energy() - (g.energy() - 1.5)).abs() < 1e-10);
    }

    #[test]
    fn interpolated_density_normalized() {
        let v = PolynomialPotential::new(vec![0.0, 0.0, 0.0, 0.0, 0.25]).unwrap();
        let m = EquilibriumMeasure::solve_default(&v, 1).unwrap();
        let (a, b) = m.support().interval(0);
        let rule = gauss_rule(64, RuleKind::JacobiHalf).unwrap();
        for t in [0.0, 0.5, 1.0] {
            let mass = rule.apply(|x| m.interpolated_density(t, x).unwrap(), a, b);
            assert!((mass - 1.0).abs() < 1e-8);
        }
        assert!(
            (m.interpolated_density(1.0, 0.3).unwrap() - m.density(0.3).unwrap()).abs() < 1e-15
        );
        assert!((gaussian().interpolated_density(0.0, 0.0).unwrap() - 1.0 / PI).abs() < 1e-12);
        assert!(two_cut().interpolated_density(0.5, 1.5).is_err());
    }

    #[test]
    fn endpoints_vary_continuously_in_eta() {
        let v = PolynomialPotential::new(vec![0.0, 0.0, 0.0, 0.0, 0.25]).unwrap();
        let base = EquilibriumMeasure::solve_default(&v, 1)
            .unwrap()
            .support()
            .endpoints()[1];
        for eta in [0.95, 0.98, 1.02, 1.05] {
            let pv = PotentialVariant::new(v.clone()).with_eta(eta).unwrap();
            let e = solve_support(&pv, 1, &[-base, base]).unwrap();
            assert!((e.endpoints()[1] - base).abs() <= 10.0 * (eta - 1.0f64).abs());
        }
    }

    #[test]
    fn support_padding() {
        let s = Support::new(vec![-2.0, -1.0, 1.0, 2.5]).unwrap();
        assert!((s.epsilon_pad() - 0.1).abs() < 1e-15);
        assert!(s.padded(0).1 < s.padded(1).0);
        assert!(s.delta_gap() > 0.0);
        assert!(Support::new(vec![1.0, 0.0]).is_err());
    }
}
