//! Partition functions `Q_{n,β}[V] = ∫ ∏ e^{-nβV(λ_i)/2} ∏_{i<j} |λ_i - λ_j|^β dλ`.
//!
//! Exact values for `β = 1, 2, 4` come from the recurrence tables:
//!
//! * `log Q_{k,2} = log k! - 2 Σ_{j<k} log γ_j`,
//! * `log Q_{k,1} = log k! + (k/2) log 2 + ½ log det M_k - Σ_{j<k} log γ_j` (even `k`),
//! * `log Q_{k,4} = log k! + k log 2 + ½ log det D_{2k} - Σ_{j<2k} log γ_j`,
//!
//! where the table for `Q_{k,β}` must carry the weight parameter `kβ/2`
//! rounded to the ψ convention: `k` for `β = 1, 2` and `2k` for `β = 4`.

use crate::equilibrium::{default_guess, EquilibriumMeasure};
use crate::error::{Error, Result};
use crate::numerics::{fit_line, gauss_legendre, EllipseContour, PrecisionConfig};
use crate::orthopoly::{
    build_recurrence, build_recurrence_depth, default_order, ln_factorial, truncation_domain,
    RecurrenceTable, WaveTable,
};
use crate::potential::{PolynomialPotential, Potential, PotentialVariant};
use crate::skew::{eps_rows, SkewMatrices};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

const QUAD_CAP: usize = 3;
const MC_CAP: usize = 8;
const QUAD_ORDER: usize = 20;
const CONTOUR_NODES: usize = 512;
const T_NODES: usize = 16;

fn check_beta(beta: u32) -> Result<()> {
    if matches!(beta, 1 | 2 | 4) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "β must be 1, 2 or 4, got {beta}"
        )))
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SelbergValue {
    pub n: usize,
    pub beta: u32,
    pub log_value: f64,
}

/// `log Q*_{n,β}`, the Gaussian reference `V = λ²/2`.
pub fn selberg_log_q(n: usize, beta: u32) -> Result<SelbergValue> {
    check_beta(beta)?;
    if n == 0 {
        return Err(Error::InvalidConfig("n must be positive".into()));
    }
    let (nf, b) = (n as f64, beta as f64);
    let mut s = ln_factorial(n)
        - (b * nf * nf / 4.0 + nf * (1.0 - b / 2.0) / 2.0) * (nf * b / 2.0).ln()
        + 0.5 * nf * (2.0 * PI).ln();
    for j in 1..=n {
        s += ln_gamma(b * j as f64 / 2.0) - ln_gamma(b / 2.0);
    }
    Ok(SelbergValue {
        n,
        beta,
        log_value: s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BruteMethod {
    Quadrature,
    MonteCarlo { samples: usize, seed: u64 },
}

impl BruteMethod {
    pub fn monte_carlo(seed: u64) -> Self {
        BruteMethod::MonteCarlo {
            samples: 1_000_000,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BruteForce {
    pub log_value: f64,
    /// Standard error (MC) or resolution difference (quadrature) on the log.
    pub error_bar: f64,
}

/// `V` scaled by a constant factor.
struct Scaled {
    v: Arc<dyn Potential>,
    s: f64,
}

impl Potential for Scaled {
    fn value(&self, x: f64) -> f64 {
        self.s * self.v.value(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        self.s * self.v.derivative(x)
    }
    fn derivative_polynomial(&self) -> Option<Vec<f64>> {
        self.v
            .derivative_polynomial()
            .map(|c| c.into_iter().map(|a| a * self.s).collect())
    }
    fn domain(&self) -> Option<(f64, f64)> {
        self.v.domain()
    }
}

fn domain_and_min(v: &dyn Potential, w: f64) -> (f64, f64, f64) {
    let (lo, hi) = v.domain().unwrap_or_else(|| truncation_domain(v, w));
    let vmin = (0..=4000)
        .map(|i| v.value(lo + (hi - lo) * i as f64 / 4000.0))
        .fold(f64::INFINITY, f64::min);
    (lo, hi, vmin)
}

/// Brute-force `log Q_{n,β}[V]` by nested quadrature (`n ≤ 3`) or importance-sampled MC (`n ≤ 8`).
pub fn brute_force_log_q(
    v: Arc<dyn Potential>,
    n: usize,
    beta: u32,
    method: BruteMethod,
) -> Result<BruteForce> {
    check_beta(beta)?;
    if n == 0 {
        return Err(Error::InvalidConfig("n must be positive".into()));
    }
    let w = n as f64 * beta as f64 / 2.0;
    let (lo, hi, vmin) = domain_and_min(v.as_ref(), w);
    match method {
        BruteMethod::Quadrature => {
            if n > QUAD_CAP {
                return Err(Error::Unsupported(format!(
                    "quadrature needs n ≤ {QUAD_CAP}, got {n}"
                )));
            }
            let coarse = ordered_integral(v.as_ref(), n, beta, w, vmin, lo, hi, 12);
            let fine = ordered_integral(v.as_ref(), n, beta, w, vmin, lo, hi, 18);
            let shift = ln_factorial(n) - w * n as f64 * vmin;
            Ok(BruteForce {
                log_value: fine.ln() + shift,
                error_bar: (fine.ln() - coarse.ln()).abs(),
            })
        }
        BruteMethod::MonteCarlo { samples, seed } => {
            if n > MC_CAP {
                return Err(Error::Unsupported(format!(
                    "Monte Carlo needs n ≤ {MC_CAP}, got {n}"
                )));
            }
            if samples < 1000 {
                return Err(Error::InvalidConfig(
                    "at least 1000 samples are needed".into(),
                ));
            }
            mc_log_q(v, n, beta, w, vmin, lo, hi, samples, seed)
        }
    }
}

struct Panels {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn panels(a: f64, b: f64, count: usize, gl: &(Vec<f64>, Vec<f64>)) -> Panels {
    let h = (b - a) / count as f64;
    let mut nodes = Vec::with_capacity(count * gl.0.len());
    let mut weights = Vec::with_capacity(count * gl.0.len());
    for p in 0..count {
        let c = a + (p as f64 + 0.5) * h;
        for (x, wt) in gl.0.iter().zip(&gl.1) {
            nodes.push(c + 0.5 * h * x);
            weights.push(0.5 * h * wt);
        }
    }
    Panels { nodes, weights }
}

/// `∫_{x_1<…<x_n} ∏ e^{-w(V - V_min)} ∏|Δ|^β` on `[lo, hi]`.
#[allow(clippy::too_many_arguments)]
fn ordered_integral(
    v: &dyn Potential,
    n: usize,
    beta: u32,
    w: f64,
    vmin: f64,
    lo: f64,
    hi: f64,
    count: usize,
) -> f64 {
    let gl = gauss_legendre(QUAD_ORDER);
    let weight = |x: f64| (-w * (v.value(x) - vmin)).exp();
    fn level(
        depth: usize,
        start: f64,
        prev: &mut Vec<f64>,
        ctx: &(usize, u32, f64, usize, &(Vec<f64>, Vec<f64>)),
        weight: &dyn Fn(f64) -> f64,
    ) -> f64 {
        let (n, beta, hi, count, gl) = *ctx;
        if depth == n {
            return 1.0;
        }
        let pn = panels(start, hi, count, gl);
        let mut s = 0.0;
        for (&x, &wt) in pn.nodes.iter().zip(&pn.weights) {
            let mut f = wt * weight(x);
            for &p in prev.iter() {
                f *= (x - p).powi(beta as i32);
            }
            if f == 0.0 {
                continue;
            }
            prev.push(x);
            s += f * level(depth + 1, x, prev, ctx, weight);
            prev.pop();
        }
        s
    }
    let ctx = (n, beta, hi, count, &gl);
    let first = panels(lo, hi, count, &gl);
    first
        .nodes
        .par_iter()
        .zip(first.weights.par_iter())
        .map(|(&x, &wt)| {
            let mut prev = vec![x];
            wt * weight(x) * level(1, x, &mut prev, &ctx, &weight)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// Piecewise-constant proposal built from the finite-`n` one-point density.
struct Proposal {
    lo: f64,
    width: f64,
    cdf: Vec<f64>,
    log_pdf: Vec<f64>,
}

impl Proposal {
    fn new(v: &Arc<dyn Potential>, n: usize, beta: u32, lo: f64, hi: f64) -> Result<Self> {
        let bins = 512;
        let width = (hi - lo) / bins as f64;
        // weight e^{-(nβ/2)V} = e^{-n · (β/2)V}
        let scaled: Arc<dyn Potential> = Arc::new(Scaled {
            v: v.clone(),
            s: beta as f64 / 2.0,
        });
        let table = build_recurrence_depth(scaled, n, n + 2, &PrecisionConfig::default())?;
        let mut mass: Vec<f64> = (0..bins)
            .map(|b| {
                (0..4)
                    .map(|i| {
                        let x = lo + (b as f64 + (i as f64 + 0.5) / 4.0) * width;
                        table.cd_kernel_sum(n, x, x) / n as f64
                    })
                    .sum::<f64>()
                    * width
                    / 4.0
            })
            .collect();
        let total: f64 = mass.iter().sum();
        for m in mass.iter_mut() {
            *m = 0.9 * *m / total + 0.1 / bins as f64;
        }
        let mut cdf = Vec::with_capacity(bins + 1);
        cdf.push(0.0);
        for m in &mass {
            cdf.push(cdf.last().unwrap() + m);
        }
        let last = *cdf.last().unwrap();
        for c in cdf.iter_mut() {
            *c /= last;
        }
        let log_pdf = mass.iter().map(|m| (m / last / width).ln()).collect();
        Ok(Proposal {
            lo,
            width,
            cdf,
            log_pdf,
        })
    }

    fn sample(&self, u: f64) -> (f64, f64) {
        let b = self
            .cdf
            .partition_point(|&c| c <= u)
            .clamp(1, self.cdf.len() - 1)
            - 1;
        let frac = ((u - self.cdf[b]) / (self.cdf[b + 1] - self.cdf[b])).clamp(0.0, 1.0);
        (self.lo + (b as f64 + frac) * self.width, self.log_pdf[b])
    }
}

#[derive(Clone, Copy)]
struct LogSum {
    max: f64,
    s1: f64,
    s2: f64,
}

impl LogSum {
    fn empty() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            s1: 0.0,
            s2: 0.0,
        }
    }
    fn push(&mut self, l: f64) {
        if l > self.max {
            let r = (self.max - l).exp();
            self.s1 = self.s1 * r + 1.0;
            self.s2 = self.s2 * r * r + 1.0;
            self.max = l;
        } else {
            let e = (l - self.max).exp();
            self.s1 += e;
            self.s2 += e * e;
        }
    }
    fn merge(self, o: LogSum) -> LogSum {
        if o.max == f64::NEG_INFINITY {
            return self;
        }
        if self.max == f64::NEG_INFINITY {
            return o;
        }
        let max = self.max.max(o.max);
        let (ra, rb) = ((self.max - max).exp(), (o.max - max).exp());
        LogSum {
            max,
            s1: self.s1 * ra + o.s1 * rb,
            s2: self.s2 * ra * ra + o.s2 * rb * rb,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn mc_log_q(
    v: Arc<dyn Potential>,
    n: usize,
    beta: u32,
    w: f64,
    vmin: f64,
    lo: f64,
    hi: f64,
    samples: usize,
    seed: u64,
) -> Result<BruteForce> {
    let prop = Proposal::new(&v, n, beta, lo, hi)?;
    let chunk = 10_000;
    let chunks = samples.div_ceil(chunk);
    let b = beta as f64;
    let parts: Vec<LogSum> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut acc = LogSum::empty();
            let mut xs = vec![0.0; n];
            for i in c * chunk..((c + 1) * chunk).min(samples) {
                let mut log_q = 0.0;
                for (k, x) in xs.iter_mut().enumerate() {
                    // stratified first coordinate
                    let u = if k == 0 {
                        (i as f64 + rng.gen::<f64>()) / samples as f64
                    } else {
                        rng.gen::<f64>()
                    };
                    let (y, lp) = prop.sample(u);
                    *x = y;
                    log_q += lp;
                }
                let mut log_f = 0.0;
                for (k, &x) in xs.iter().enumerate() {
                    log_f -= w * (v.value(x) - vmin);
                    for &y in &xs[..k] {
                        log_f += b * (x - y).abs().ln();
                    }
                }
                acc.push(log_f - log_q);
            }
            acc
        })
        .collect();
    let total = parts.into_iter().fold(LogSum::empty(), LogSum::merge);
    let sf = samples as f64;
    let mean = total.s1 / sf;
    let var = (total.s2 / sf - mean * mean).max(0.0);
    let se = (var / sf).sqrt();
    Ok(BruteForce {
        log_value: total.max + mean.ln() - w * n as f64 * vmin,
        error_bar: se / mean,
    })
}

fn log_abs_det(a: &DMatrix<f64>) -> Result<f64> {
    let lu = a.clone().lu();
    let u = lu.u();
    let mut s = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)].abs();
        if !(d > 0.0) {
            return Err(Error::Degenerate("singular moment matrix".into()));
        }
        s += d.ln();
    }
    Ok(s)
}

/// `M_k = ((εψ_j, ψ_l))_{j,l<k}` on the table grid.
pub fn eps_gram(table: &RecurrenceTable, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 || k > table.k_max() + 1 {
        return Err(Error::Index {
            index: k,
            limit: table.k_max() + 1,
        });
    }
    let grid = table.grid()?;
    let wt = WaveTable::new(table, &grid, k - 1);
    let (eps, _) = eps_rows(&grid, &wt.psi);
    Ok(&eps * wt.weighted_psi().transpose())
}

/// Exact `log Q_{particles,β}` from a table with the matching weight parameter.
pub fn exact_log_q(table: &RecurrenceTable, beta: u32, particles: usize) -> Result<f64> {
    check_beta(beta)?;
    let lg = table.log_gamma();
    match beta {
        2 => {
            if particles > table.k_max() {
                return Err(Error::Index {
                    index: particles,
                    limit: table.k_max(),
                });
            }
            Ok(table.beta2_log_q_count(particles))
        }
        1 => {
            if particles % 2 != 0 {
                return Err(Error::Unsupported(
                    "β = 1 Pfaffian route needs an even particle count".into(),
                ));
            }
            let m = eps_gram(table, particles)?;
            Ok(
                ln_factorial(particles) + 0.5 * particles as f64 * LN_2 + 0.5 * log_abs_det(&m)?
                    - lg[..particles].iter().sum::<f64>(),
            )
        }
        _ => {
            let k = 2 * particles;
            let d = table.derivative_matrix(k)?;
            Ok(
                ln_factorial(particles) + particles as f64 * LN_2 + 0.5 * log_abs_det(&d)?
                    - lg[..k].iter().sum::<f64>(),
            )
        }
    }
}

/// Table whose ψ carry the weight of `Q_{particles,β}[V]`.
pub fn table_for(v: Arc<dyn Potential>, particles: usize, beta: u32) -> Result<RecurrenceTable> {
    check_beta(beta)?;
    let scale = if beta == 4 { 2 } else { 1 };
    let n_tab = particles * scale;
    let m = v.derivative_polynomial().map_or(1, |c| c.len() / 2);
    build_recurrence(
        v,
        n_tab,
        default_order(n_tab, m),
        &PrecisionConfig::default(),
    )
}

// ---------------------------------------------------------------------------
// Loop-equation correction and the one-interval expansion

fn poly_roots(c: &[f64]) -> Vec<Complex64> {
    let mut c = c.to_vec();
    while c.len() > 1
        && c.last().unwrap().abs() < 1e-14 * c.iter().fold(0.0f64, |m, a| m.max(a.abs()))
    {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return vec![];
    }
    let lead = c[deg];
    let mut comp = DMatrix::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    comp.complex_eigenvalues().iter().copied().collect()
}

/// Largest `s` with `w` outside the ellipse of semi-axes `(h + s, s)` about `c`.
fn exclusion_radius(w: Complex64, c: f64, h: f64) -> Result<f64> {
    let phi = |s: f64| ((w.re - c) / (h + s)).powi(2) + (w.im / s).powi(2);
    if w.im == 0.0 && (w.re - c).abs() <= h {
        return Err(Error::InvalidContour(format!(
            "point {w} lies on the support"
        )));
    }
    let (mut a, mut b) = (0.0f64, 1.0f64);
    while phi(b) > 1.0 {
        b *= 2.0;
        if b > 1e8 {
            return Ok(b);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= 0.0 || phi(mid) > 1.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(a)
}

/// Contour around a one-cut support excluding `avoid`, at `fraction` of the admissible width.
fn contour_excluding(
    c: f64,
    h: f64,
    avoid: &[Complex64],
    fraction: f64,
    nodes: usize,
) -> Result<EllipseContour> {
    let mut s = h;
    for &w in avoid {
        s = s.min(exclusion_radius(w, c, h)?);
    }
    let s = fraction * s;
    if !(s > 1e-6 * h) {
        return Err(Error::InvalidContour(
            "no admissible contour between the support and the excluded points".into(),
        ));
    }
    EllipseContour::new(c, h + s, s, nodes)
}

fn one_cut(measure: &EquilibriumMeasure) -> Result<(f64, f64)> {
    if measure.q() != 1 {
        return Err(Error::Unsupported(
            "the loop correction and expansion are one-cut only".into(),
        ));
    }
    let (a, b) = measure.support().interval(0);
    Ok((0.5 * (a + b), 0.5 * (b - a)))
}

/// `(2πi)^{-1} ∮ g'(ζ)/(P(ζ)(z-ζ)) dζ` weights on a fixed contour.
struct LoopKernel {
    nodes: Vec<Complex64>,
    coef: Vec<Complex64>,
    prefactor: f64,
}

impl LoopKernel {
    fn eval(&self, measure: &EquilibriumMeasure, z: Complex64) -> Complex64 {
        let s: Complex64 = self
            .nodes
            .iter()
            .zip(&self.coef)
            .map(|(&zeta, &c)| c / (z - zeta))
            .sum();
        s * self.prefactor / measure.support().sqrt_x(z)
    }
}

/// Leading correction `u` in `g_n = g + u/n` for `g(z) = ∫ ρ(λ) dλ / (λ - z)`:
/// `u(z) = -(2/β - 1) (2πi X^{1/2}(z))^{-1} ∮ g'(ζ) / (P(ζ)(z - ζ)) dζ`,
/// the contour enclosing the support and leaving `z` and the zeros of `P` outside.
/// For `P ≡ 1` this is `-(2/β - 1) g'(z) / X^{1/2}(z)`.
pub fn loop_correction(measure: &EquilibriumMeasure, beta: u32, z: Complex64) -> Result<Complex64> {
    loop_correction_with(measure, beta, z, 0.5, CONTOUR_NODES)
}

/// As [`loop_correction`] with an explicit contour width fraction and node count.
pub fn loop_correction_with(
    measure: &EquilibriumMeasure,
    beta: u32,
    z: Complex64,
    fraction: f64,
    nodes: usize,
) -> Result<Complex64> {
    check_beta(beta)?;
    let (c, h) = one_cut(measure)?;
    let pref = 1.0 - 2.0 / beta as f64;
    if pref == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut avoid = poly_roots(measure.p_coeffs());
    avoid.push(z);
    let contour = contour_excluding(c, h, &avoid, fraction, nodes)?;
    let mut nodes_v = Vec::with_capacity(nodes);
    let mut coef = Vec::with_capacity(nodes);
    for (zeta, w) in contour.points() {
        nodes_v.push(zeta);
        coef.push(measure.stieltjes_g_prime(zeta) / measure.p_c(zeta) * w);
    }
    Ok(LoopKernel {
        nodes: nodes_v,
        coef,
        prefactor: pref,
    }
    .eval(measure, z))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub n: usize,
    pub beta: u32,
    pub eta: f64,
    pub log_q: f64,
    pub selberg: f64,
    /// Coefficient of `n²`: `(β/2) E[ηV] + 3β/8`.
    pub term_n2: f64,
    /// Coefficient of `n`: `(1 - β/2) log(d/2)` plus the contour term.
    pub term_n: f64,
    pub contour_term: f64,
    pub energy: f64,
    pub center: f64,
    pub half_width: f64,
    /// Difference between the 16- and 12-point `t` rules.
    pub t_quadrature_error: f64,
}

/// Reference pieces `P_0 = 4/d²`, `g_0` for the semicircle on the same support.
struct Interpolation<'a> {
    measure: &'a EquilibriumMeasure,
    c: f64,
    d: f64,
}

impl Interpolation<'_> {
    fn p(&self, z: Complex64, t: f64) -> Complex64 {
        self.measure.p_c(z) * t + 4.0 * (1.0 - t) / (self.d * self.d)
    }
    fn g_prime(&self, z: Complex64, t: f64) -> Complex64 {
        let sx = self.measure.support().sqrt_x(z);
        let dlog: Complex64 = self
            .measure
            .support()
            .endpoints()
            .iter()
            .map(|&e| 0.5 / (z - e))
            .sum();
        // g_0 = (2/d²)(X^{1/2} - (z - c))
        let g0p = (sx * dlog - 1.0) * (2.0 / (self.d * self.d));
        self.measure.stieltjes_g_prime(z) * t + g0p * (1.0 - t)
    }
    fn v0(&self, z: Complex64) -> Complex64 {
        (z - self.c) * (z - self.c) * (2.0 / (self.d * self.d))
    }
}

/// `(2πi)^{-1} ∫_0^1 dt ∮ (ηV - V_0)(z) u(z, t) dz` with an `nt`-point Gauss rule in `t`.
fn contour_t_integral(measure: &EquilibriumMeasure, beta: u32, nt: usize) -> Result<f64> {
    let (c, d) = one_cut(measure)?;
    let pref = 1.0 - 2.0 / beta as f64;
    if pref == 0.0 {
        return Ok(0.0);
    }
    let interp = Interpolation { measure, c, d };
    let (tn, tw) = gauss_legendre(nt);
    let ts: Vec<(f64, f64)> = tn
        .iter()
        .zip(&tw)
        .map(|(&x, &w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    let mut avoid = Vec::new();
    for &(t, _) in &ts {
        let mut pc: Vec<f64> = measure.p_coeffs().iter().map(|a| a * t).collect();
        if pc.is_empty() {
            pc.push(0.0);
        }
        pc[0] += 4.0 * (1.0 - t) / (d * d);
        avoid.extend(poly_roots(&pc));
    }
    let inner = contour_excluding(c, d, &avoid, 0.3, CONTOUR_NODES)?;
    let outer = contour_excluding(c, d, &avoid, 0.7, CONTOUR_NODES)?;
    let inner_pts = inner.points();
    let outer_pts = outer.points();
    let potential = measure.potential();
    let mut total = Complex64::new(0.0, 0.0);
    for &(t, wt) in &ts {
        let coef: Vec<Complex64> = inner_pts
            .iter()
            .map(|&(zeta, w)| interp.g_prime(zeta, t) / interp.p(zeta, t) * w)
            .collect();
        let kernel = LoopKernel {
            nodes: inner_pts.iter().map(|p| p.0).collect(),
            coef,
            prefactor: pref,
        };
        let s: Complex64 = outer_pts
            .iter()
            .map(|&(z, w)| (potential.eval_c(z) - interp.v0(z)) * kernel.eval(measure, z) * w)
            .sum();
        total += s * wt;
    }
    Ok(total.re)
}

/// Assembled `log Q_{n,β}` for the one-cut potential `ηV` at leading orders.
pub fn log_q_one_interval(
    v: &PolynomialPotential,
    n: usize,
    beta: u32,
    eta: f64,
) -> Result<ExpansionReport> {
    check_beta(beta)?;
    if !((eta - 1.0).abs() <= 0.05) {
        return Err(Error::Domain(format!(
            "η = {eta} outside the neighborhood |η - 1| ≤ 0.05"
        )));
    }
    let variant = PotentialVariant::new(v.clone()).with_eta(eta)?;
    let scaled = variant.to_polynomial()?;
    let measure = EquilibriumMeasure::solve(&variant, 1, &default_guess(&scaled, 1))?;
    log_q_from_measure(&measure, n, beta, eta)
}

/// As [`log_q_one_interval`] for an already solved one-cut measure of `ηV`.
pub fn log_q_from_measure(
    measure: &EquilibriumMeasure,
    n: usize,
    beta: u32,
    eta: f64,
) -> Result<ExpansionReport> {
    let (c, h) = one_cut(measure)?;
    let selberg = selberg_log_q(n, beta)?.log_value;
    let (nf, b) = (n as f64, beta as f64);
    let energy = measure.energy();
    let contour = contour_t_integral(measure, beta, T_NODES)?;
    let coarse = contour_t_integral(measure, beta, 12)?;
    let term_n2 = 0.5 * b * energy + 3.0 * b / 8.0;
    // ∫ f (p_1 - ρ) = -(2πi n)^{-1} ∮ f u
    let contour_term = 0.5 * b * nf * contour;
    let term_n = (1.0 - b / 2.0) * (h / 2.0).ln() + 0.5 * b * contour;
    Ok(ExpansionReport {
        n,
        beta,
        eta,
        log_q: selberg + nf * nf * term_n2 + nf * term_n,
        selberg,
        term_n2,
        term_n,
        contour_term,
        energy,
        center: c,
        half_width: h,
        t_quadrature_error: 0.5 * b * nf * (contour - coarse).abs(),
    })
}

// ---------------------------------------------------------------------------
// det T identity

#[derive(Debug, Clone, Serialize)]
pub struct DetTReport {
    pub n: usize,
    pub det_t: f64,
    pub rhs: f64,
    pub rel_gap: f64,
    /// Relative error bar on the right-hand side from the brute-force oracles.
    pub error_bar: f64,
    pub log_q1: f64,
    pub log_q2: f64,
    pub log_q4: f64,
}

/// `det T_n` against `(Q_{n,1} Q_{n/2,4} / (Q_{n,2} (n/2)! 2^n))²` with brute-force `Q_{n,1}`, `Q_{n/2,4}`.
pub fn dett_identity_check(
    n: usize,
    v: &PolynomialPotential,
    mc: BruteMethod,
) -> Result<DetTReport> {
    if n % 2 != 0 || n == 0 {
        return Err(Error::InvalidConfig(format!(
            "det T identity needs even n, got {n}"
        )));
    }
    let arc: Arc<dyn Potential> = Arc::new(v.clone());
    let table = build_recurrence(
        arc.clone(),
        n,
        default_order(n, v.m()),
        &PrecisionConfig::default(),
    )?;
    let det_t = SkewMatrices::build(&table)?.det_t()?;
    let log_q2 = table.beta2_log_q();
    let q1 = if n <= QUAD_CAP {
        brute_force_log_q(arc.clone(), n, 1, BruteMethod::Quadrature)?
    } else {
        brute_force_log_q(arc.clone(), n, 1, mc)?
    };
    let half = n / 2;
    let q4 = if half <= QUAD_CAP {
        brute_force_log_q(arc, half, 4, BruteMethod::Quadrature)?
    } else {
        brute_force_log_q(arc, half, 4, mc)?
    };
    let log_rhs =
        2.0 * (q1.log_value + q4.log_value - log_q2 - ln_factorial(half) - n as f64 * LN_2);
    let rhs = log_rhs.exp();
    Ok(DetTReport {
        n,
        det_t,
        rhs,
        rel_gap: (det_t - rhs).abs() / rhs,
        error_bar: 2.0 * (q1.error_bar + q4.error_bar),
        log_q1: q1.log_value,
        log_q2,
        log_q4: q4.log_value,
    })
}

// ---------------------------------------------------------------------------
// Multi-cut factorization

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationReport {
    pub n: usize,
    pub beta: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub error_bar: f64,
    /// `log(Q_{k_α,β}[V_a^{(α)}] / k_α!)` per cut.
    pub terms: Vec<f64>,
    pub counts: Vec<usize>,
    pub cross_energy: f64,
}

/// `log(Q_{n,β}[V]/n!)` against `Σ_α log(Q_{k_α,β}[V_a^{(α)}]/k_α!) - (βn²/2) Σ*`.
pub fn factorization_check(
    measure: &EquilibriumMeasure,
    n: usize,
    beta: u32,
) -> Result<FactorizationReport> {
    check_beta(beta)?;
    let plan = measure.mass_plan(n)?;
    let v: Arc<dyn Potential> = Arc::new(measure.potential().clone());
    let lhs_table = table_for(v, n, beta)?;
    let lhs = exact_log_q(&lhs_table, beta, n)? - ln_factorial(n);
    let sigma = measure.cross_energy();
    let terms = if measure.q() == 1 {
        // a single cut has V_a = V; the localization to σ_ε is exponentially small
        vec![lhs]
    } else {
        let scale = if beta == 4 { 2 } else { 1 };
        (0..measure.q())
            .into_par_iter()
            .map(|alpha| {
                let k = plan.counts[alpha];
                let eff: Arc<dyn Potential> = Arc::new(measure.effective_potential(alpha)?);
                let funcs = k * scale;
                let table =
                    build_recurrence_depth(eff, n * scale, funcs + 2, &PrecisionConfig::default())?;
                Ok(exact_log_q(&table, beta, k)? - ln_factorial(k))
            })
            .collect::<Result<Vec<f64>>>()?
    };
    let nf = n as f64;
    let rhs = terms.iter().sum::<f64>() - 0.5 * beta as f64 * nf * nf * sigma;
    Ok(FactorizationReport {
        n,
        beta,
        lhs,
        rhs,
        gap: lhs - rhs,
        error_bar: 0.0,
        terms,
        counts: plan.counts,
        cross_energy: sigma,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationSweep {
    pub reports: Vec<FactorizationReport>,
    pub sup_gap: f64,
    pub slope: f64,
    pub slope_stderr: f64,
}

/// Gap sequence over `ns` with a least-squares slope of the gap against `n`.
pub fn factorization_sweep(
    measure: &EquilibriumMeasure,
    ns: &[usize],
    beta: u32,
) -> Result<FactorizationSweep> {
    let reports = ns
        .iter()
        .map(|&n| factorization_check(measure, n, beta))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = reports.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = reports.iter().map(|r| r.gap).collect();
    let fit = fit_line(&xs, &ys, None);
    Ok(FactorizationSweep {
        sup_gap: ys.iter().fold(0.0f64, |m, y| m.max(y.abs())),
        slope: fit.slope,
        slope_stderr: fit.slope_se,
        reports,
    })
}
