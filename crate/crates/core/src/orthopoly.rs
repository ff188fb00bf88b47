//! Orthonormal polynomials for the varying weight `e^{-nV}`.
//!
//! Recurrence coefficients come from a discretized Stieltjes procedure run in
//! double-double arithmetic on a composite Gauss-Legendre grid over a
//! truncation interval. Wave functions `ψ_k = p_k e^{-nV/2}` are evaluated by
//! forward recurrence with a running logarithmic scale.

use crate::error::{Error, Result};
use crate::numerics::{DoubleDouble, PanelGrid, PrecisionConfig};
use crate::potential::Potential;
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::sync::Arc;

const GRID_NODES: usize = 4096;
const GRID_ORDER: usize = 24;
const CHECK_ORDER: usize = 20;
/// `ln(10^40)`: the weight falls below `10^-40` at the truncation ends.
const WEIGHT_DROP: f64 = 92.103_403_719_761_84;
const TAIL_TOL: f64 = 1e-20;
const ORTHO_TOL: f64 = 1e-8;

/// Default recurrence depth for `n` particles and a degree-`2m` potential.
pub fn default_order(n: usize, m: usize) -> usize {
    n + 6 * m + 2
}

#[derive(Clone)]
pub struct RecurrenceTable {
    n: usize,
    k_max: usize,
    m: usize,
    // a[k] for k = 1..=K, a[0] = 0
    a: Vec<f64>,
    // b[k] for k = 0..=K
    b: Vec<f64>,
    log_gamma: Vec<f64>,
    domain: (f64, f64),
    potential: Arc<dyn Potential>,
    ortho_residual: f64,
}

impl std::fmt::Debug for RecurrenceTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RecurrenceTable")
            .field("n", &self.n)
            .field("k_max", &self.k_max)
            .field("domain", &self.domain)
            .finish()
    }
}

/// Smallest scanned interval outside which `e^{-w (V - V_min)}` is below `10^-40`.
pub fn truncation_domain(v: &dyn Potential, w: f64) -> (f64, f64) {
    let nf = w;
    let mut r = 1.0;
    loop {
        let pts = 4001;
        let xs: Vec<f64> = (0..pts)
            .map(|i| -r + 2.0 * r * i as f64 / (pts - 1) as f64)
            .collect();
        let vs: Vec<f64> = xs.iter().map(|&x| v.value(x)).collect();
        let vmin = vs.iter().cloned().fold(f64::INFINITY, f64::min);
        if nf * (vs[0] - vmin) >= WEIGHT_DROP && nf * (vs[pts - 1] - vmin) >= WEIGHT_DROP {
            let lo = vs
                .iter()
                .position(|&y| nf * (y - vmin) < WEIGHT_DROP)
                .unwrap();
            let hi = vs
                .iter()
                .rposition(|&y| nf * (y - vmin) < WEIGHT_DROP)
                .unwrap();
            let step = xs[1] - xs[0];
            return (xs[lo] - step, xs[hi] + step);
        }
        r *= 1.5;
    }
}

struct Stieltjes {
    a: Vec<f64>,
    b: Vec<f64>,
    log_gamma: Vec<f64>,
}

fn stieltjes(v: &dyn Potential, n: usize, k_max: usize, grid: &PanelGrid) -> Result<Stieltjes> {
    let nf = n as f64;
    let xs = grid.nodes();
    let vmin = xs.iter().map(|&x| v.value(x)).fold(f64::INFINITY, f64::min);
    let w: Vec<DoubleDouble> = xs
        .iter()
        .zip(grid.weights())
        .map(|(&x, &wt)| DoubleDouble::new(wt * (-nf * (v.value(x) - vmin)).exp()))
        .collect();
    let mass = w.iter().fold(DoubleDouble::ZERO, |s, &x| s + x);
    if !(mass.hi > 0.0) || !mass.hi.is_finite() {
        return Err(Error::Domain(
            "weight has no mass on the truncation interval".into(),
        ));
    }
    // ∫ e^{-nV} = e^{-n vmin} · mass
    let log_gamma0 = -0.5 * (mass.to_f64().ln() - nf * vmin);
    let inv = DoubleDouble::ONE / mass.sqrt();
    let x_dd: Vec<DoubleDouble> = xs.iter().map(|&x| DoubleDouble::new(x)).collect();
    let mut prev = vec![DoubleDouble::ZERO; xs.len()];
    let mut cur = vec![inv; xs.len()];
    let mut a = vec![0.0; k_max + 1];
    let mut b = vec![0.0; k_max + 1];
    let mut log_gamma = vec![log_gamma0; k_max + 1];
    let mut a_k = DoubleDouble::ZERO;
    for k in 0..=k_max {
        let mut bk = DoubleDouble::ZERO;
        for i in 0..xs.len() {
            bk += w[i] * x_dd[i] * cur[i] * cur[i];
        }
        b[k] = bk.to_f64();
        if k == k_max {
            break;
        }
        let mut next = vec![DoubleDouble::ZERO; xs.len()];
        let mut norm = DoubleDouble::ZERO;
        for i in 0..xs.len() {
            let r = (x_dd[i] - bk) * cur[i] - a_k * prev[i];
            norm += w[i] * r * r;
            next[i] = r;
        }
        let a_next = norm.sqrt();
        if !(a_next.hi > 0.0) {
            return Err(Error::Precision {
                index: k + 1,
                residual: f64::INFINITY,
            });
        }
        let inv_a = DoubleDouble::ONE / a_next;
        for r in next.iter_mut() {
            *r = *r * inv_a;
        }
        a[k + 1] = a_next.to_f64();
        log_gamma[k + 1] = log_gamma[k] - a[k + 1].ln();
        prev = std::mem::replace(&mut cur, next);
        a_k = a_next;
    }
    Ok(Stieltjes { a, b, log_gamma })
}

/// Builds the recurrence table for weight `e^{-nV}` up to index `k_max`.
pub fn build_recurrence(
    v: Arc<dyn Potential>,
    n: usize,
    k_max: usize,
    precision: &PrecisionConfig,
) -> Result<RecurrenceTable> {
    let m = v.derivative_polynomial().map_or(1, |c| c.len() / 2);
    if k_max < n + 2 * m {
        return Err(Error::InvalidConfig(format!(
            "recurrence depth {k_max} below n + 2m = {}",
            n + 2 * m
        )));
    }
    build_recurrence_depth(v, n, k_max, precision)
}

/// As [`build_recurrence`] without the `K ≥ n + 2m` requirement, for models
/// whose particle count differs from the weight parameter `n`.
pub fn build_recurrence_depth(
    v: Arc<dyn Potential>,
    n: usize,
    k_max: usize,
    precision: &PrecisionConfig,
) -> Result<RecurrenceTable> {
    precision.validate()?;
    if n == 0 || k_max < 2 {
        return Err(Error::InvalidConfig(format!(
            "need n ≥ 1 and depth ≥ 2, got n = {n}, depth = {k_max}"
        )));
    }
    let m = v.derivative_polynomial().map_or(1, |c| c.len() / 2);
    let fixed = v.domain();
    let mut domain = fixed.unwrap_or_else(|| truncation_domain(v.as_ref(), n as f64));
    let mut attempts = 0;
    loop {
        let grid = PanelGrid::with_min_nodes(domain.0, domain.1, GRID_NODES, GRID_ORDER)?;
        let st = stieltjes(v.as_ref(), n, k_max, &grid)?;
        let mut table = RecurrenceTable {
            n,
            k_max,
            m,
            a: st.a,
            b: st.b,
            log_gamma: st.log_gamma,
            domain,
            potential: v.clone(),
            ortho_residual: 0.0,
        };
        if fixed.is_none() && attempts < 8 {
            let tail = [domain.0, domain.1]
                .iter()
                .flat_map(|&x| {
                    let p = table.psi_all(x, k_max);
                    [p[k_max].abs(), p[k_max - 1].abs()]
                })
                .fold(0.0f64, f64::max);
            if !(tail < TAIL_TOL) {
                let c = 0.5 * (domain.0 + domain.1);
                let h = 0.625 * (domain.1 - domain.0);
                domain = (c - h, c + h);
                attempts += 1;
                continue;
            }
        }
        let (residual, bad) = table.orthonormality_check(k_max)?;
        table.ortho_residual = residual;
        if let Some(index) = bad {
            return Err(Error::Precision { index, residual });
        }
        return Ok(table);
    }
}

impl RecurrenceTable {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k_max(&self) -> usize {
        self.k_max
    }
    pub fn m(&self) -> usize {
        self.m
    }
    /// `a_k`, `k = 1..=K` (index 0 holds 0).
    pub fn a(&self) -> &[f64] {
        &self.a
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn log_gamma(&self) -> &[f64] {
        &self.log_gamma
    }
    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }
    pub fn potential(&self) -> &Arc<dyn Potential> {
        &self.potential
    }
    pub fn orthonormality_residual(&self) -> f64 {
        self.ortho_residual
    }

    /// The dense grid used for quadrature against the ψ's.
    pub fn grid(&self) -> Result<PanelGrid> {
        PanelGrid::with_min_nodes(self.domain.0, self.domain.1, GRID_NODES, GRID_ORDER)
    }

    pub fn psi(&self, k: usize, lam: f64) -> Result<f64> {
        if k > self.k_max {
            return Err(Error::Index {
                index: k,
                limit: self.k_max,
            });
        }
        Ok(self.psi_all(lam, k)[k])
    }

    /// `ψ_0(λ), …, ψ_kmax(λ)`.
    pub fn psi_all(&self, lam: f64, kmax: usize) -> Vec<f64> {
        self.psi_all_with_derivative(lam, kmax, false).0
    }

    /// `ψ_k(λ)` and, if requested, `ψ_k'(λ)` for `k = 0..=kmax`.
    pub fn psi_all_with_derivative(
        &self,
        lam: f64,
        kmax: usize,
        deriv: bool,
    ) -> (Vec<f64>, Vec<f64>) {
        let kmax = kmax.min(self.k_max);
        let nf = self.n as f64;
        let mut out = vec![0.0; kmax + 1];
        let mut dout = if deriv {
            vec![0.0; kmax + 1]
        } else {
            Vec::new()
        };
        let mut scale = self.log_gamma[0] - 0.5 * nf * self.potential.value(lam);
        let half_dv = if deriv {
            0.5 * nf * self.potential.derivative(lam)
        } else {
            0.0
        };
        let (mut p_prev, mut p) = (0.0, 1.0);
        let (mut d_prev, mut d) = (0.0, 0.0);
        for k in 0..=kmax {
            let e = scale.exp();
            out[k] = p * e;
            if deriv {
                dout[k] = (d - half_dv * p) * e;
            }
            if k == kmax {
                break;
            }
            let a_next = self.a[k + 1];
            let p_next = ((lam - self.b[k]) * p - self.a[k] * p_prev) / a_next;
            let d_next = if deriv {
                (p + (lam - self.b[k]) * d - self.a[k] * d_prev) / a_next
            } else {
                0.0
            };
            p_prev = p;
            p = p_next;
            d_prev = d;
            d = d_next;
            let big = p.abs().max(d.abs());
            if big > 1e100 || (big < 1e-100 && big > 0.0) {
                let s = big.ln();
                let f = 1.0 / big;
                p *= f;
                p_prev *= f;
                d *= f;
                d_prev *= f;
                scale += s;
            }
        }
        (out, dout)
    }

    /// `K_{n,2}(λ, μ)` with `n` terms.
    pub fn cd_kernel(&self, lam: f64, mu: f64) -> f64 {
        self.cd_kernel_count(self.n, lam, mu)
    }

    /// Christoffel-Darboux kernel with `count` terms; the diagonal uses the derivative limit.
    pub fn cd_kernel_count(&self, count: usize, lam: f64, mu: f64) -> f64 {
        if count == 0 {
            return 0.0;
        }
        let an = self.a[count];
        if lam == mu {
            let (p, d) = self.psi_all_with_derivative(lam, count, true);
            return an * (d[count] * p[count - 1] - d[count - 1] * p[count]);
        }
        if (lam - mu).abs() < 1e-6 * (1.0 + lam.abs()) {
            return self.cd_kernel_sum(count, lam, mu);
        }
        let pl = self.psi_all(lam, count);
        let pm = self.psi_all(mu, count);
        an * (pl[count] * pm[count - 1] - pl[count - 1] * pm[count]) / (lam - mu)
    }

    pub fn cd_kernel_sum(&self, count: usize, lam: f64, mu: f64) -> f64 {
        let pl = self.psi_all(lam, count);
        let pm = self.psi_all(mu, count);
        (0..count).map(|l| pl[l] * pm[l]).sum()
    }

    /// `log Q_{count,2} = log count! - 2 Σ_{j<count} log γ_j`.
    pub fn beta2_log_q_count(&self, count: usize) -> f64 {
        ln_factorial(count) - 2.0 * self.log_gamma[..count].iter().sum::<f64>()
    }

    pub fn beta2_log_q(&self) -> f64 {
        self.beta2_log_q_count(self.n)
    }

    /// `V'(J)` on indices `0..size`, exact while `size + 2m - 1 ≤ K + 1`.
    pub fn v_prime_of_jacobi(&self, size: usize) -> Result<DMatrix<f64>> {
        let dv = self
            .potential
            .derivative_polynomial()
            .ok_or_else(|| Error::Unsupported("V' is not a polynomial".into()))?;
        let big = (size + dv.len()).min(self.k_max + 1);
        let mut j = DMatrix::zeros(big, big);
        for k in 0..big {
            j[(k, k)] = self.b[k];
            if k + 1 < big {
                j[(k, k + 1)] = self.a[k + 1];
                j[(k + 1, k)] = self.a[k + 1];
            }
        }
        let mut acc = DMatrix::zeros(big, big);
        for &c in dv.iter().rev() {
            acc = &acc * &j;
            for k in 0..big {
                acc[(k, k)] += c;
            }
        }
        Ok(acc.view((0, 0), (size, size)).into_owned())
    }

    /// Largest index whose derivative row is exact from the banded formula.
    pub fn derivative_limit(&self) -> usize {
        (self.k_max + 1).saturating_sub(2 * self.m)
    }

    /// `D_{jk} = (ψ_j', ψ_k)` for `j, k < size`.
    ///
    /// Banded `(n/2) sign(j-k) V'(J)_{jk}` for polynomial potentials, quadrature otherwise.
    pub fn derivative_matrix(&self, size: usize) -> Result<DMatrix<f64>> {
        let half_n = 0.5 * self.n as f64;
        if self.potential.derivative_polynomial().is_some() {
            if size > self.derivative_limit() {
                return Err(Error::Index {
                    index: size,
                    limit: self.derivative_limit(),
                });
            }
            let vj = self.v_prime_of_jacobi(size)?;
            let band = 2 * self.m - 1;
            let mut d = DMatrix::zeros(size, size);
            for j in 0..size {
                for k in j.saturating_sub(band)..(j + band + 1).min(size) {
                    if j > k {
                        d[(j, k)] = half_n * vj[(j, k)];
                    } else if j < k {
                        d[(j, k)] = -half_n * vj[(j, k)];
                    }
                }
            }
            return Ok(d);
        }
        if size > self.k_max + 1 {
            return Err(Error::Index {
                index: size,
                limit: self.k_max + 1,
            });
        }
        let grid = self.grid()?;
        let wt = WaveTable::with_derivative(self, &grid, size - 1);
        let mut d = &wt.dpsi * wt.weighted_psi().transpose();
        // exact skew-symmetry
        let s = (&d - d.transpose()) * 0.5;
        d = s;
        Ok(d)
    }

    /// Banded row `c_{jk}` with `ψ_j' = Σ_k c_{jk} ψ_k`.
    pub fn psi_derivative_expansion(&self, j: usize) -> Result<Vec<(usize, f64)>> {
        if j + 2 * self.m > self.k_max {
            return Err(Error::Index {
                index: j,
                limit: self.k_max - 2 * self.m,
            });
        }
        let band = 2 * self.m - 1;
        let size = j + band + 1;
        let vj = self.v_prime_of_jacobi(size)?;
        let half_n = 0.5 * self.n as f64;
        Ok((j.saturating_sub(band)..size)
            .filter(|&k| k != j)
            .map(|k| {
                let s = if j > k { 1.0 } else { -1.0 };
                (k, s * half_n * vj[(j, k)])
            })
            .collect())
    }

    fn orthonormality_check(&self, kmax: usize) -> Result<(f64, Option<usize>)> {
        let (lo, hi) = self.domain;
        let grid = PanelGrid::with_min_nodes(lo, hi, GRID_NODES + 7 * CHECK_ORDER, CHECK_ORDER)?;
        let wt = WaveTable::new(self, &grid, kmax);
        let gram = wt.weighted_psi() * wt.psi.transpose();
        let mut worst = 0.0f64;
        let mut bad = None;
        for k in 0..=kmax {
            let mut row = 0.0f64;
            for j in 0..=k {
                let target = if j == k { 1.0 } else { 0.0 };
                row = row.max((gram[(j, k)] - target).abs());
            }
            if row > ORTHO_TOL && bad.is_none() {
                bad = Some(k);
            }
            worst = worst.max(row);
        }
        Ok((worst, bad))
    }
}

pub fn ln_factorial(n: usize) -> f64 {
    statrs::function::gamma::ln_gamma(n as f64 + 1.0)
}

/// `ψ_k` sampled on a quadrature grid, rows indexed by `k`.
#[derive(Debug, Clone)]
pub struct WaveTable {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub psi: DMatrix<f64>,
    pub dpsi: DMatrix<f64>,
}

impl WaveTable {
    pub fn new(table: &RecurrenceTable, grid: &PanelGrid, kmax: usize) -> Self {
        Self::build(table, grid.nodes(), grid.weights(), kmax, false)
    }

    pub fn with_derivative(table: &RecurrenceTable, grid: &PanelGrid, kmax: usize) -> Self {
        Self::build(table, grid.nodes(), grid.weights(), kmax, true)
    }

    pub fn build(
        table: &RecurrenceTable,
        nodes: &[f64],
        weights: &[f64],
        kmax: usize,
        deriv: bool,
    ) -> Self {
        let cols: Vec<(Vec<f64>, Vec<f64>)> = nodes
            .par_iter()
            .map(|&x| table.psi_all_with_derivative(x, kmax, deriv))
            .collect();
        let rows = kmax + 1;
        let mut psi = DMatrix::zeros(rows, nodes.len());
        let mut dpsi = DMatrix::zeros(if deriv { rows } else { 0 }, nodes.len());
        for (i, (p, d)) in cols.iter().enumerate() {
            for k in 0..rows {
                psi[(k, i)] = p[k];
                if deriv {
                    dpsi[(k, i)] = d[k];
                }
            }
        }
        WaveTable {
            nodes: nodes.to_vec(),
            weights: weights.to_vec(),
            psi,
            dpsi,
        }
    }

    /// `ψ_k(x_i) w_i`.
    pub fn weighted_psi(&self) -> DMatrix<f64> {
        let mut out = self.psi.clone();
        for (i, &w) in self.weights.iter().enumerate() {
            out.column_mut(i).scale_mut(w);
        }
        out
    }
}

/// Exact β = 2 mean and variance of `Σ φ(λ_i)` for `n = table.n()` particles:
/// mean `Σ_k A_kk`, variance `Σ_k (φ²)_kk - Σ_{jk} A_jk²` with `A_jk = (φ ψ_j, ψ_k)`.
pub fn beta2_linear_statistic<F: Fn(f64) -> f64>(
    table: &RecurrenceTable,
    phi: F,
) -> Result<(f64, f64)> {
    let grid = table.grid()?;
    let n = table.n();
    let wt = WaveTable::new(table, &grid, n - 1);
    let f: Vec<f64> = grid.nodes().iter().map(|&x| phi(x)).collect();
    let mut weighted = wt.weighted_psi();
    let mut weighted2 = weighted.clone();
    for (i, &fx) in f.iter().enumerate() {
        weighted.column_mut(i).scale_mut(fx);
        weighted2.column_mut(i).scale_mut(fx * fx);
    }
    let a = &weighted * wt.psi.transpose();
    let mean = a.trace();
    let diag2: f64 = (0..n).map(|k| weighted2.row(k).dot(&wt.psi.row(k))).sum();
    Ok((mean, diag2 - a.norm_squared()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PolynomialPotential;

    fn table(coeffs: &[f64], n: usize) -> RecurrenceTable {
        let v = PolynomialPotential::new(coeffs.to_vec()).unwrap();
        let m = v.m();
        build_recurrence(
            Arc::new(v),
            n,
            default_order(n, m),
            &PrecisionConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn hermite_coefficients() {
        for n in [1, 10, 40] {
            let t = table(&[0.0, 0.0, 0.5], n);
            for k in 1..=t.k_max() {
                assert!(
                    (t.a()[k] - (k as f64 / n as f64).sqrt()).abs() < 1e-8,
                    "n={n} k={k}"
                );
            }
            assert!(t.b().iter().all(|b| b.abs() < 1e-12));
            assert!(t.orthonormality_residual() < 1e-8);
        }
    }

    #[test]
    fn psi_examples() {
        let t = table(&[0.0, 0.0, 0.5], 1);
        let g0 = (2.0 * std::f64::consts::PI).powf(-0.25);
        assert!((t.psi(0, 0.0).unwrap() - g0).abs() < 1e-14);
        assert!(t.psi(t.k_max() + 1, 0.0).is_err());
        let t = table(&[0.0, 0.0, 0.0, 0.0, 0.25], 20);
        for k in 0..10 {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((t.psi(k, -0.7).unwrap() - s * t.psi(k, 0.7).unwrap()).abs() < 1e-12);
        }
        assert!(t.psi(10, 6.0).unwrap().abs() < 1e-30);
    }

    #[test]
    fn derivative_recurrence_matches_finite_difference() {
        let t = table(&[0.0, 0.0, -2.0, 0.0, 0.25], 12);
        let h = 1e-6;
        for &x in &[-2.0, -0.3, 1.1, 2.3] {
            let (_, d) = t.psi_all_with_derivative(x, 15, true);
            let pp = t.psi_all(x + h, 15);
            let pm = t.psi_all(x - h, 15);
            for k in 0..=15 {
                assert!((d[k] - (pp[k] - pm[k]) / (2.0 * h)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn cd_kernel_forms_agree() {
        let t = table(&[0.0, 0.0, -2.0, 0.0, 0.25], 16);
        let pts = [-2.2, -1.6, -0.9, 1.2, 1.9, 2.3];
        for &x in &pts {
            for &y in &pts {
                let s = t.cd_kernel_sum(16, x, y);
                let c = t.cd_kernel(x, y);
                assert!((s - c).abs() <= 1e-6 * s.abs().max(1e-3), "{x} {y} {s} {c}");
            }
        }
        let t1 = table(&[0.0, 0.0, 0.5], 1);
        let p = |x| t1.psi(0, x).unwrap();
        assert!((t1.cd_kernel(0.3, -0.8) - p(0.3) * p(-0.8)).abs() < 1e-14);
    }

    #[test]
    fn cd_kernel_trace_and_projection() {
        let t = table(&[0.0, 0.0, 0.0, 0.0, 0.25], 10);
        let grid = t.grid().unwrap();
        let diag: Vec<f64> = grid.nodes().iter().map(|&x| t.cd_kernel(x, x)).collect();
        assert!((grid.integrate(&diag) - 10.0).abs() < 1e-6);
        let (x, y) = (0.4, -0.9);
        let vals: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&s| t.cd_kernel(x, s) * t.cd_kernel(s, y))
            .collect();
        assert!((grid.integrate(&vals) - t.cd_kernel(x, y)).abs() < 1e-6);
    }

    #[test]
    fn beta2_linear_statistic_oracles() {
        // n = 1: λ ~ N(0, 1), so λ² has mean 1 and variance 2
        let t1 = table(&[0.0, 0.0, 0.5], 1);
        let (m, v) = beta2_linear_statistic(&t1, |x| x * x).unwrap();
        assert!((m - 1.0).abs() < 1e-10 && (v - 2.0).abs() < 1e-10);
        // weight e^{-n tr H²/2}: tr H is N(0, 1) for every n
        for n in [2, 7, 20] {
            let t = table(&[0.0, 0.0, 0.5], n);
            let (m, v) = beta2_linear_statistic(&t, |x| x).unwrap();
            assert!(m.abs() < 1e-10 && (v - 1.0).abs() < 1e-9, "n={n}: {m} {v}");
            let (one, zero) = beta2_linear_statistic(&t, |_| 1.0).unwrap();
            assert!((one - n as f64).abs() < 1e-9 && zero.abs() < 1e-9);
        }
    }

    #[test]
    fn gaussian_partition_functions() {
        let t1 = table(&[0.0, 0.0, 0.5], 1);
        assert!((t1.beta2_log_q() - (2.0 * std::f64::consts::PI).sqrt().ln()).abs() < 1e-12);
        let t2 = table(&[0.0, 0.0, 0.5], 2);
        assert!((t2.beta2_log_q() - std::f64::consts::PI.ln()).abs() < 1e-12);
    }

    #[test]
    fn derivative_expansion_is_banded_and_skew() {
        let t = table(&[0.0, 0.0, 0.0, 0.0, 0.25], 12);
        let row = t.psi_derivative_expansion(8).unwrap();
        assert!(row.iter().all(|&(k, _)| (k as i64 - 8).abs() <= 3));
        let d = t.derivative_matrix(t.derivative_limit()).unwrap();
        assert!((&d + d.transpose()).amax() < 1e-8 * 12.0);
        for j in 0..d.nrows() {
            for k in 0..d.ncols() {
                if (j as i64 - k as i64).abs() >= 4 {
                    assert_eq!(d[(j, k)], 0.0);
                }
            }
        }
        // quadrature oracle for (ψ_j', ψ_k)
        let grid = t.grid().unwrap();
        let wt = WaveTable::with_derivative(&t, &grid, d.nrows() - 1);
        let q = &wt.dpsi * wt.weighted_psi().transpose();
        assert!((q - &d).amax() < 1e-6);
        assert!(t.psi_derivative_expansion(t.k_max()).is_err());
    }

    #[test]
    fn gaussian_derivative_band_has_zero_diagonal() {
        let t = table(&[0.0, 0.0, 0.5], 8);
        let row = t.psi_derivative_expansion(5).unwrap();
        assert_eq!(row.len(), 2);
        let lower = row.iter().find(|(k, _)| *k == 4).unwrap().1;
        assert!((lower - 4.0 * t.a()[5]).abs() < 1e-12);
    }

    #[test]
    fn eps_of_derivative_reconstructs_psi() {
        let t = table(&[0.0, 0.0, -2.0, 0.0, 0.25], 10);
        let grid = t.grid().unwrap();
        let wt = WaveTable::new(&t, &grid, 12);
        for j in [3, 9] {
            let row = t.psi_derivative_expansion(j).unwrap();
            let vals: Vec<f64> = (0..grid.len())
                .map(|i| row.iter().map(|&(k, c)| c * wt.psi[(k, i)]).sum())
                .collect();
            let cum = grid.cumulative(&vals);
            let total = *cum.last().unwrap();
            for (i, c) in cum.iter().enumerate() {
                let eps = c - 0.5 * total;
                assert!((eps - wt.psi[(j, i)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn coefficients_bounded_in_n() {
        let mut sups = Vec::new();
        for n in [20, 40, 80] {
            let t = table(&[0.0, 0.0, -2.0, 0.0, 0.25], n);
            let lo = n - n / 10;
            let hi = n + n / 10;
            let s = (lo..=hi)
                .map(|k| t.a()[k].abs() + t.b()[k].abs())
                .fold(0.0f64, f64::max);
            sups.push(s);
        }
        for w in sups.windows(2) {
            assert!((w[1] / w[0] - 1.0).abs() < 0.1, "{sups:?}");
        }
    }

    #[test]
    fn short_depth_rejected() {
        let v = PolynomialPotential::gaussian();
        assert!(build_recurrence(Arc::new(v), 10, 11, &PrecisionConfig::default()).is_err());
    }
}
