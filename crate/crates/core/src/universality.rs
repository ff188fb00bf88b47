//! Bulk scaling limits.
//!
//! With `q_n = n ρ(λ_0)` the rescaled kernels
//! `q_n^{-1} K^{(q_n)}(λ_0 + ξ/q_n, λ_0 + η/q_n)` are compared entrywise with
//! the sine kernels on a square `(ξ, η)` grid. `A^{(λ)}` divides the 12-entry
//! by `λ` and multiplies the 21-entry by `λ`.

use crate::equilibrium::EquilibriumMeasure;
use crate::error::{Error, Result};
use crate::numerics::{decay_exponent, sine_integral, PrecisionConfig};
use crate::orthopoly::{build_recurrence, default_order};
use crate::potential::Potential;
use crate::skew::SkewMatrices;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

pub type Mat2 = [[f64; 2]; 2];

/// `sin(πt) / (πt)`.
pub fn sine_kernel(t: f64) -> f64 {
    let x = PI * t;
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `d/dt sin(πt) / (πt)`.
pub fn sine_kernel_derivative(t: f64) -> f64 {
    let x = PI * t;
    if x.abs() < 1e-3 {
        let x2 = x * x;
        PI * (-x / 3.0 + x * x2 / 30.0 - x * x2 * x2 / 840.0)
    } else {
        PI * (x * x.cos() - x.sin()) / (x * x)
    }
}

/// `∫_0^t sin(πs)/(πs) ds`.
pub fn sine_kernel_integral(t: f64) -> f64 {
    sine_integral(PI * t) / PI
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SineKernelValue {
    pub beta: u32,
    /// Only `[0][0]` is used for `β = 2`.
    pub entries: Mat2,
}

pub fn sine_matrix_kernel(beta: u32, xi: f64, eta: f64) -> Result<SineKernelValue> {
    let d = xi - eta;
    let entries = match beta {
        2 => [[sine_kernel(d), 0.0], [0.0, 0.0]],
        1 => {
            let eps = 0.5
                * if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            [
                [sine_kernel(d), sine_kernel_derivative(d)],
                [sine_kernel_integral(d) - eps, sine_kernel(-d)],
            ]
        }
        4 => [
            [sine_kernel(d), sine_kernel_derivative(d)],
            [sine_kernel_integral(d), sine_kernel(-d)],
        ],
        _ => {
            return Err(Error::InvalidConfig(format!(
                "β must be 1, 2 or 4, got {beta}"
            )))
        }
    };
    Ok(SineKernelValue { beta, entries })
}

/// `diag(λ^{-1/2}, λ^{1/2}) A diag(λ^{1/2}, λ^{-1/2})`.
pub fn lambda_conjugate(a: Mat2, lam: f64) -> Result<Mat2> {
    if !(lam > 0.0 && lam.is_finite()) {
        return Err(Error::Domain(format!("conjugation needs λ > 0, got {lam}")));
    }
    Ok([[a[0][0], a[0][1] / lam], [a[1][0] * lam, a[1][1]]])
}

#[derive(Debug, Clone, Serialize)]
pub struct BulkErrorReport {
    pub beta: u32,
    pub ns: Vec<usize>,
    pub lambda0: f64,
    pub q_n: Vec<f64>,
    /// `sup_errors[i][e]`: sup over the grid for `ns[i]` and entry `e` (11, 12, 21, 22).
    pub sup_errors: Vec<[f64; 4]>,
    /// Log-log slope of each entry's sup-error against `n`.
    pub exponents: [f64; 4],
    /// Rescaled 11-entry at `ξ = η = 0` for each `n`.
    pub diagonal: Vec<f64>,
}

impl BulkErrorReport {
    /// Entries that carry information for this `β` (only 11 for `β = 2`).
    pub fn active_entries(&self) -> &'static [usize] {
        if self.beta == 2 {
            &[0]
        } else {
            &[0, 1, 2, 3]
        }
    }

    pub fn worst_exponent(&self) -> f64 {
        self.active_entries()
            .iter()
            .map(|&e| self.exponents[e])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BulkGrid {
    pub points: usize,
    pub half_width: f64,
}

impl Default for BulkGrid {
    fn default() -> Self {
        BulkGrid {
            points: 17,
            half_width: 2.0,
        }
    }
}

impl BulkGrid {
    pub fn values(&self) -> Vec<f64> {
        (0..self.points)
            .map(|i| -self.half_width + 2.0 * self.half_width * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

/// Checks that `λ_0` sits inside a cut, at least a tenth of its length from either end.
pub fn check_bulk_point(measure: &EquilibriumMeasure, lam0: f64) -> Result<f64> {
    let alpha = measure
        .support()
        .locate(lam0)
        .ok_or_else(|| Error::Domain(format!("λ0 = {lam0} is outside the support")))?;
    let (a, b) = measure.support().interval(alpha);
    let margin = 0.1 * (b - a);
    if lam0 - a < margin || b - lam0 < margin {
        return Err(Error::Domain(format!(
            "λ0 = {lam0} is within {margin:.3} of an endpoint of [{a}, {b}]"
        )));
    }
    measure.density(lam0)
}

/// Rescaled kernel matrices for one `n` on the grid, row-major in `(ξ, η)`.
pub fn rescaled_kernels(
    measure: &EquilibriumMeasure,
    beta: u32,
    n: usize,
    lam0: f64,
    grid: BulkGrid,
) -> Result<(f64, Vec<Mat2>)> {
    let rho = check_bulk_point(measure, lam0)?;
    if beta != 2 && n % 2 != 0 {
        return Err(Error::InvalidConfig(format!(
            "β = {beta} needs even n, got {n}"
        )));
    }
    let q = n as f64 * rho;
    let v: Arc<dyn Potential> = Arc::new(measure.potential().clone());
    let table = build_recurrence(
        v,
        n,
        default_order(n, measure.potential().m()),
        &PrecisionConfig::default(),
    )?;
    let xs = grid.values();
    let lams: Vec<f64> = xs.iter().map(|x| lam0 + x / q).collect();
    let out = if beta == 2 {
        lams.iter()
            .flat_map(|&l| lams.iter().map(move |&u| (l, u)))
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&(l, u)| [[table.cd_kernel(l, u) / q, 0.0], [0.0, 0.0]])
            .collect()
    } else {
        let skew = SkewMatrices::build(&table)?;
        let pts: Vec<_> = lams.par_iter().map(|&l| skew.point(l)).collect();
        let pairs: Vec<(usize, usize)> = (0..pts.len())
            .flat_map(|i| (0..pts.len()).map(move |j| (i, j)))
            .collect();
        pairs
            .par_iter()
            .map(|&(i, j)| {
                let k = skew.matrix_kernel_points(beta, &pts[i], &pts[j])?;
                let raw = [[k.s, k.ds], [k.is, k.st]];
                let c = lambda_conjugate(raw, q)?;
                Ok([[c[0][0] / q, c[0][1] / q], [c[1][0] / q, c[1][1] / q]])
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok((q, out))
}

/// Entrywise sup-errors against the sine kernels over `ns`, with log-log decay exponents.
pub fn bulk_error(
    measure: &EquilibriumMeasure,
    beta: u32,
    lam0: f64,
    ns: &[usize],
    grid: BulkGrid,
) -> Result<BulkErrorReport> {
    if ns.is_empty() {
        return Err(Error::InvalidConfig("empty n list".into()));
    }
    let xs = grid.values();
    let limit: Vec<Mat2> = xs
        .iter()
        .flat_map(|&a| xs.iter().map(move |&b| (a, b)))
        .map(|(a, b)| sine_matrix_kernel(beta, a, b).map(|s| s.entries))
        .collect::<Result<_>>()?;
    let centre = (xs.len() / 2) * xs.len() + xs.len() / 2;
    let mut q_n = Vec::new();
    let mut sup_errors = Vec::new();
    let mut diagonal = Vec::new();
    for &n in ns {
        let (q, ks) = rescaled_kernels(measure, beta, n, lam0, grid)?;
        let mut sup = [0.0f64; 4];
        for (k, l) in ks.iter().zip(&limit) {
            for e in 0..4 {
                let (r, c) = (e / 2, e % 2);
                sup[e] = sup[e].max((k[r][c] - l[r][c]).abs());
            }
        }
        if beta == 2 {
            sup[1..].fill(0.0);
        }
        q_n.push(q);
        diagonal.push(ks[centre][0][0]);
        sup_errors.push(sup);
    }
    let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let mut exponents = [f64::NAN; 4];
    if ns.len() >= 2 {
        for (e, slot) in exponents.iter_mut().enumerate() {
            let ys: Vec<f64> = sup_errors.iter().map(|s| s[e]).collect();
            if ys.iter().all(|&y| y > 0.0) {
                *slot = decay_exponent(&nf, &ys);
            }
        }
    }
    Ok(BulkErrorReport {
        beta,
        ns: ns.to_vec(),
        lambda0: lam0,
        q_n,
        sup_errors,
        exponents,
        diagonal,
    })
}
