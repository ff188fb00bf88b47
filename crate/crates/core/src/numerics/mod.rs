//! Quadrature rules, contour integration, cumulative integration and the
//! double-double scalar used by the orthogonal-polynomial pipeline.

mod dd;

pub use dd::{DoubleDouble, DD_DIGITS};

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// Plain Gauss-Legendre on `[-1, 1]`.
    Legendre,
    /// Gauss-Chebyshev nodes in `x = cos θ`, reweighted for plain `dx` integrals.
    ChebyshevFirst,
    /// Gauss-Legendre in `θ` with `x = cos θ`. Absorbs `(1-x²)^{±1/2}` endpoint behaviour.
    JacobiHalf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    kind: RuleKind,
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn kind(&self) -> RuleKind {
        self.kind
    }
    pub fn order(&self) -> usize {
        self.order
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule to `f` on `[a, b]`.
    pub fn apply<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; k];
    let mut w = vec![0.0; k];
    for i in 0..k.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(k, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(k, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[k - 1 - i] = z;
        w[i] = wi;
        w[k - 1 - i] = wi;
    }
    if k % 2 == 1 {
        x[k / 2] = 0.0;
    }
    (x, w)
}

/// `P_k(x)` and `P_k'(x)` by the three-term recurrence.
pub fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * (k * (k + 1)) as f64 * x.signum().powi(k as i32 + 1)
    } else {
        k as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

pub fn gauss_rule(k: usize, kind: RuleKind) -> Result<QuadratureRule> {
    if k == 0 {
        return Err(Error::InvalidOrder(k));
    }
    let (nodes, weights) = match kind {
        RuleKind::Legendre => gauss_legendre(k),
        RuleKind::ChebyshevFirst => {
            let mut pairs: Vec<(f64, f64)> = (1..=k)
                .map(|i| {
                    let th = (2 * i - 1) as f64 * PI / (2 * k) as f64;
                    (th.cos(), PI / k as f64 * th.sin())
                })
                .collect();
            pairs.reverse();
            pairs.into_iter().unzip()
        }
        RuleKind::JacobiHalf => {
            let (t, w) = gauss_legendre(k);
            let mut pairs: Vec<(f64, f64)> = t
                .iter()
                .zip(&w)
                .map(|(&ti, &wi)| {
                    let th = 0.5 * PI * (ti + 1.0);
                    (th.cos(), 0.5 * PI * wi * th.sin())
                })
                .collect();
            pairs.reverse();
            pairs.into_iter().unzip()
        }
    };
    Ok(QuadratureRule {
        kind,
        order: k,
        nodes,
        weights,
    })
}

/// A composite integral together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

const PANEL_CAP: usize = 4096;

fn composite<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rule: &QuadratureRule,
    panels: usize,
) -> Result<f64> {
    let mut total = 0.0;
    let mut bad = None;
    match rule.kind {
        RuleKind::Legendre => {
            let h = (b - a) / panels as f64;
            for p in 0..panels {
                let lo = a + p as f64 * h;
                total += rule.apply(
                    |x| {
                        let v = f(x);
                        if !v.is_finite() {
                            bad = Some(x);
                        }
                        v
                    },
                    lo,
                    lo + h,
                );
            }
        }
        kind => {
            // x = c - r cos θ, θ ∈ [0, π], split into equal θ panels.
            let c = 0.5 * (a + b);
            let r = 0.5 * (b - a);
            let k = rule.order;
            let base: Vec<(f64, f64)> = match kind {
                RuleKind::JacobiHalf => {
                    let (t, w) = gauss_legendre(k);
                    t.into_iter().zip(w).collect()
                }
                _ => (0..k)
                    .map(|i| (-1.0 + (2 * i + 1) as f64 / k as f64, 2.0 / k as f64))
                    .collect(),
            };
            let dth = PI / panels as f64;
            for p in 0..panels {
                let th0 = p as f64 * dth;
                for &(t, w) in &base {
                    let th = th0 + 0.5 * dth * (t + 1.0);
                    let x = c - r * th.cos();
                    let v = f(x);
                    if !v.is_finite() {
                        bad = Some(x);
                    }
                    total += 0.5 * dth * w * v * r * th.sin();
                }
            }
        }
    }
    match bad {
        Some(x) => Err(Error::Domain(format!("non-finite integrand at x = {x}"))),
        None => Ok(total),
    }
}

/// Composite integration of `f` over `[a, b]` with panel doubling until the
/// difference between successive levels is below `tol`.
pub fn integrate_interval<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rule: &QuadratureRule,
    panels: usize,
    tol: f64,
) -> Result<Integral> {
    if !(a < b) {
        return Err(Error::Domain(format!("empty interval [{a}, {b}]")));
    }
    let mut p = panels.max(1);
    let mut coarse = composite(&f, a, b, rule, p)?;
    loop {
        let fine = composite(&f, a, b, rule, 2 * p)?;
        let error = (fine - coarse).abs();
        p *= 2;
        if error <= tol {
            return Ok(Integral {
                value: fine,
                error,
                panels: p,
            });
        }
        if p >= PANEL_CAP {
            return Err(Error::Convergence {
                message: format!("integral over [{a}, {b}] after {p} panels"),
                best: fine,
                error,
            });
        }
        coarse = fine;
    }
}

/// Axis-aligned ellipse `c + sx cos θ + i sy sin θ`, traversed counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseContour {
    center: f64,
    semi_x: f64,
    semi_y: f64,
    node_count: usize,
}

pub const MIN_CONTOUR_NODES: usize = 32;
pub const CONTOUR_CLEARANCE: f64 = 1e-3;

impl EllipseContour {
    pub fn new(center: f64, semi_x: f64, semi_y: f64, node_count: usize) -> Result<Self> {
        if !(semi_x > 0.0 && semi_y > 0.0) || !center.is_finite() {
            return Err(Error::InvalidContour(format!(
                "semi-axes must be positive, got ({semi_x}, {semi_y})"
            )));
        }
        if node_count < MIN_CONTOUR_NODES || node_count % 2 != 0 {
            return Err(Error::InvalidContour(format!(
                "node count {node_count} must be even and at least {MIN_CONTOUR_NODES}"
            )));
        }
        Ok(EllipseContour {
            center,
            semi_x,
            semi_y,
            node_count,
        })
    }

    /// A contour around `[a, b]` with margins proportional to the interval length.
    pub fn around(a: f64, b: f64, node_count: usize) -> Result<Self> {
        let half = 0.5 * (b - a);
        let c = Self::new(
            0.5 * (a + b),
            1.4 * half + 0.1,
            0.9 * half + 0.1,
            node_count,
        )?;
        c.check_encloses(a, b)?;
        Ok(c)
    }

    pub fn center(&self) -> f64 {
        self.center
    }
    pub fn semi_x(&self) -> f64 {
        self.semi_x
    }
    pub fn semi_y(&self) -> f64 {
        self.semi_y
    }
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn with_nodes(&self, node_count: usize) -> Result<Self> {
        Self::new(self.center, self.semi_x, self.semi_y, node_count)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let u = (z.re - self.center) / self.semi_x;
        let v = z.im / self.semi_y;
        u * u + v * v < 1.0
    }

    /// Checks that `[a, b]` lies inside with at least [`CONTOUR_CLEARANCE`] to spare.
    pub fn check_encloses(&self, a: f64, b: f64) -> Result<()> {
        let inside = self.contains(Complex64::new(a, 0.0)) && self.contains(Complex64::new(b, 0.0));
        let m = 4 * self.node_count;
        let mut dmin = f64::INFINITY;
        for j in 0..m {
            let th = 2.0 * PI * j as f64 / m as f64;
            let x = self.center + self.semi_x * th.cos();
            let y = self.semi_y * th.sin();
            let dx = if x < a {
                a - x
            } else if x > b {
                x - b
            } else {
                0.0
            };
            dmin = dmin.min(dx.hypot(y));
        }
        if !inside || dmin < CONTOUR_CLEARANCE {
            return Err(Error::InvalidContour(format!(
                "ellipse does not enclose [{a}, {b}] with clearance {CONTOUR_CLEARANCE} (distance {dmin:e})"
            )));
        }
        Ok(())
    }

    /// Nodes `z_j` paired with the trapezoid factors `z'(θ_j) / (i N)`, so
    /// that `Σ f(z_j) w_j` approximates `(2πi)^{-1} ∮ f dz`.
    pub fn points(&self) -> Vec<(Complex64, Complex64)> {
        let n = self.node_count;
        let inv = Complex64::new(0.0, -1.0 / n as f64);
        (0..n)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / n as f64;
                let (s, c) = th.sin_cos();
                let z = Complex64::new(self.center + self.semi_x * c, self.semi_y * s);
                let dz = Complex64::new(-self.semi_x * s, self.semi_y * c);
                (z, dz * inv)
            })
            .collect()
    }
}

/// `(2πi)^{-1} ∮ f dz` by the trapezoid rule in the angle.
pub fn integrate_contour<F: Fn(Complex64) -> Complex64>(
    f: F,
    contour: &EllipseContour,
) -> Complex64 {
    contour.points().into_iter().map(|(z, w)| f(z) * w).sum()
}

fn quadratic_piece(x: [f64; 3], f: [f64; 3], p: f64, q: f64) -> f64 {
    let d1 = (f[1] - f[0]) / (x[1] - x[0]);
    let d2 = ((f[2] - f[1]) / (x[2] - x[1]) - d1) / (x[2] - x[0]);
    let prim1 = |t: f64| 0.5 * (t - x[0]) * (t - x[0]);
    let prim2 = |t: f64| t * t * t / 3.0 - 0.5 * (x[0] + x[1]) * t * t + x[0] * x[1] * t;
    f[0] * (q - p) + d1 * (prim1(q) - prim1(p)) + d2 * (prim2(q) - prim2(p))
}

/// Antiderivative of sampled data, zero at the left endpoint. Each step uses
/// the average of the two neighbouring quadratic interpolants.
pub fn cumulative_integral(xs: &[f64], fs: &[f64]) -> Result<Vec<f64>> {
    if xs.len() != fs.len() {
        return Err(Error::InvalidGrid(format!(
            "{} abscissae but {} samples",
            xs.len(),
            fs.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidGrid("need at least two points".into()));
    }
    if let Some(i) = xs.windows(2).position(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidGrid(format!(
            "abscissae not strictly increasing at index {i}"
        )));
    }
    let n = xs.len();
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let (p, q) = (xs[i], xs[i + 1]);
        let trap = 0.5 * (q - p) * (fs[i] + fs[i + 1]);
        let mut pieces = Vec::with_capacity(2);
        if n >= 3 {
            if i >= 1 {
                pieces.push(quadratic_piece(
                    [xs[i - 1], xs[i], xs[i + 1]],
                    [fs[i - 1], fs[i], fs[i + 1]],
                    p,
                    q,
                ));
            }
            if i + 2 < n {
                pieces.push(quadratic_piece(
                    [xs[i], xs[i + 1], xs[i + 2]],
                    [fs[i], fs[i + 1], fs[i + 2]],
                    p,
                    q,
                ));
            }
        }
        let mut step = if pieces.is_empty() {
            trap
        } else {
            pieces.iter().sum::<f64>() / pieces.len() as f64
        };
        if fs[i] >= 0.0 && fs[i + 1] >= 0.0 && step < 0.0 {
            step = trap;
        }
        out[i + 1] = out[i] + step;
    }
    Ok(out)
}

/// A composite Gauss-Legendre grid with a spectral integration matrix per panel.
#[derive(Debug, Clone)]
pub struct PanelGrid {
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
    base_nodes: Vec<f64>,
    base_weights: Vec<f64>,
    bary: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // integ[j * order + i] = ∫_{-1}^{t_j} ℓ_i(s) ds
    integ: Vec<f64>,
}

impl PanelGrid {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Result<Self> {
        if !(a < b) || panels == 0 {
            return Err(Error::InvalidGrid(format!(
                "bad panel grid [{a}, {b}] with {panels} panels"
            )));
        }
        if order < 2 {
            return Err(Error::InvalidOrder(order));
        }
        let (t, w) = gauss_legendre(order);
        let h = 0.5 * (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let c = a + (2 * p + 1) as f64 * h;
            for i in 0..order {
                nodes.push(c + h * t[i]);
                weights.push(h * w[i]);
            }
        }
        let bary: Vec<f64> = (0..order)
            .map(|i| {
                let s = (1.0 - t[i] * t[i]).sqrt() * w[i].sqrt();
                if i % 2 == 0 {
                    s
                } else {
                    -s
                }
            })
            .collect();
        let mut integ = vec![0.0; order * order];
        for j in 0..order {
            let c = Self::integration_row(&t, &w, order, t[j]);
            integ[j * order..(j + 1) * order].copy_from_slice(&c);
        }
        Ok(PanelGrid {
            a,
            b,
            panels,
            order,
            base_nodes: t,
            base_weights: w,
            bary,
            nodes,
            weights,
            integ,
        })
    }

    /// Grid over `[a, b]` with at least `min_nodes` nodes of the given panel order.
    pub fn with_min_nodes(a: f64, b: f64, min_nodes: usize, order: usize) -> Result<Self> {
        Self::new(a, b, min_nodes.div_ceil(order).max(1), order)
    }

    // ∫_{-1}^{t} ℓ_i(s) ds for each Lagrange basis polynomial ℓ_i on the nodes.
    fn integration_row(t: &[f64], w: &[f64], order: usize, x: f64) -> Vec<f64> {
        let mut pleg = vec![0.0; order + 1];
        pleg[0] = 1.0;
        if order >= 1 {
            pleg[1] = x;
        }
        for m in 2..=order {
            let mf = m as f64;
            pleg[m] = ((2.0 * mf - 1.0) * x * pleg[m - 1] - (mf - 1.0) * pleg[m - 2]) / mf;
        }
        // ∫_{-1}^x P_0 = x + 1, ∫_{-1}^x P_m = (P_{m+1} - P_{m-1}) / (2m + 1)
        (0..order)
            .map(|i| {
                let mut pm_prev = 1.0;
                let mut pm = t[i];
                let mut s = 0.5 * (x + 1.0);
                for m in 1..order {
                    let mf = m as f64;
                    s += 0.5 * pm * (pleg[m + 1] - pleg[m - 1]);
                    let next = ((2.0 * mf + 1.0) * t[i] * pm - mf * pm_prev) / (mf + 1.0);
                    pm_prev = pm;
                    pm = next;
                }
                w[i] * s
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn bounds(&self) -> (f64, f64) {
        (self.a, self.b)
    }
    pub fn panels(&self) -> usize {
        self.panels
    }
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Antiderivative from the left end, evaluated at every node.
    pub fn cumulative(&self, values: &[f64]) -> Vec<f64> {
        let k = self.order;
        let h = 0.5 * (self.b - self.a) / self.panels as f64;
        let mut out = vec![0.0; values.len()];
        let mut offset = 0.0;
        for p in 0..self.panels {
            let v = &values[p * k..(p + 1) * k];
            for j in 0..k {
                let row = &self.integ[j * k..(j + 1) * k];
                out[p * k + j] = offset + h * row.iter().zip(v).map(|(c, f)| c * f).sum::<f64>();
            }
            offset += h * self
                .base_weights
                .iter()
                .zip(v)
                .map(|(c, f)| c * f)
                .sum::<f64>();
        }
        out
    }

    /// Cumulative integrals at the panel boundaries: `out[p]` is the integral
    /// from the left end to the start of panel `p`; `out[panels]` is the total.
    pub fn panel_offsets(&self, values: &[f64]) -> Vec<f64> {
        let k = self.order;
        let h = 0.5 * (self.b - self.a) / self.panels as f64;
        let mut out = vec![0.0; self.panels + 1];
        for p in 0..self.panels {
            let v = &values[p * k..(p + 1) * k];
            out[p + 1] = out[p]
                + h * self
                    .base_weights
                    .iter()
                    .zip(v)
                    .map(|(c, f)| c * f)
                    .sum::<f64>();
        }
        out
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let width = (self.b - self.a) / self.panels as f64;
        let p = (((x - self.a) / width).floor().max(0.0) as usize).min(self.panels - 1);
        let c = self.a + (p as f64 + 0.5) * width;
        (p, (x - c) / (0.5 * width))
    }

    /// Antiderivative at an arbitrary point, given the panel offsets of the same data.
    pub fn antiderivative_at(&self, x: f64, values: &[f64], offsets: &[f64]) -> f64 {
        if x <= self.a {
            return 0.0;
        }
        if x >= self.b {
            return offsets[self.panels];
        }
        let (p, t) = self.locate(x);
        let k = self.order;
        let h = 0.5 * (self.b - self.a) / self.panels as f64;
        let row = Self::integration_row(&self.base_nodes, &self.base_weights, k, t);
        offsets[p]
            + h * row
                .iter()
                .zip(&values[p * k..(p + 1) * k])
                .map(|(c, f)| c * f)
                .sum::<f64>()
    }

    /// Panel index and scaled integration row at `x`, shared by many
    /// antiderivatives: `offsets[p] + Σ row_i values[p·k + i]`.
    pub fn antiderivative_row(&self, x: f64) -> (usize, Vec<f64>) {
        let k = self.order;
        let h = 0.5 * (self.b - self.a) / self.panels as f64;
        if x <= self.a {
            return (0, vec![0.0; k]);
        }
        if x >= self.b {
            return (
                self.panels - 1,
                self.base_weights.iter().map(|w| h * w).collect(),
            );
        }
        let (p, t) = self.locate(x);
        let row = Self::integration_row(&self.base_nodes, &self.base_weights, k, t);
        (p, row.into_iter().map(|c| h * c).collect())
    }

    /// Barycentric interpolation of nodal data inside the owning panel.
    pub fn interpolate(&self, x: f64, values: &[f64]) -> f64 {
        let (p, t) = self.locate(x.clamp(self.a, self.b));
        let k = self.order;
        let v = &values[p * k..(p + 1) * k];
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..k {
            let d = t - self.base_nodes[i];
            if d == 0.0 {
                return v[i];
            }
            let c = self.bary[i] / d;
            num += c * v[i];
            den += c;
        }
        num / den
    }
}

/// Least-squares line `y = intercept + slope x` with the standard error of the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64], sigmas: Option<&[f64]>) -> LineFit {
    let n = xs.len();
    let w: Vec<f64> = match sigmas {
        Some(s) => s.iter().map(|s| 1.0 / (s * s).max(1e-300)).collect(),
        None => vec![1.0; n],
    };
    let sw: f64 = w.iter().sum();
    let mx = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = xs
        .iter()
        .zip(&w)
        .map(|(x, w)| w * (x - mx) * (x - mx))
        .sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(&w)
        .map(|((x, y), w)| w * (x - mx) * (y - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if sigmas.is_some() {
        (1.0 / sxx).sqrt()
    } else if n > 2 {
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    LineFit {
        slope,
        intercept,
        slope_se,
    }
}

/// Exponent `p` of a power law `y ≈ C n^p` fitted in log-log coordinates.
pub fn decay_exponent(ns: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.abs().ln()).collect();
    fit_line(&lx, &ly, None).slope
}

/// Sine integral `Si(x) = ∫_0^x sin t / t dt`.
pub fn sine_integral(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x < 0.0 {
        return -sine_integral(-x);
    }
    if x <= 4.0 {
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        for k in 1..40 {
            let kf = k as f64;
            term *= -x2 / ((2.0 * kf) * (2.0 * kf + 1.0));
            let add = term / (2.0 * kf + 1.0);
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    let (t, w) = gauss_legendre(20);
    let panels = (x / 2.0).ceil() as usize;
    let h = x / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let c = (p as f64 + 0.5) * h;
        for i in 0..t.len() {
            let u = c + 0.5 * h * t[i];
            s += 0.5 * h * w[i] * u.sin() / u;
        }
    }
    s
}

/// Working precision and target tolerances for a computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionConfig {
    pub working_digits: u32,
    pub target_abs_tol: f64,
    pub target_rel_tol: f64,
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        PrecisionConfig {
            working_digits: DD_DIGITS,
            target_abs_tol: 1e-12,
            target_rel_tol: 1e-14,
        }
    }
}

impl PrecisionConfig {
    pub fn new(working_digits: u32, target_abs_tol: f64, target_rel_tol: f64) -> Result<Self> {
        let c = PrecisionConfig {
            working_digits,
            target_abs_tol,
            target_rel_tol,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.working_digits < 30 || self.working_digits > DD_DIGITS {
            return Err(Error::InvalidConfig(format!(
                "working digits {} outside the supported range 30..={DD_DIGITS}",
                self.working_digits
            )));
        }
        if !(self.target_abs_tol > 0.0 && self.target_rel_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if (self.working_digits as f64) < 2.0 * -self.target_rel_tol.log10() {
            return Err(Error::InvalidConfig(format!(
                "{} digits cannot support relative tolerance {:e}",
                self.working_digits, self.target_rel_tol
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_small_orders() {
        let r = gauss_rule(1, RuleKind::Legendre).unwrap();
        assert_eq!(r.nodes(), &[0.0]);
        assert!((r.weights()[0] - 2.0).abs() < 1e-15);
        let r = gauss_rule(2, RuleKind::Legendre).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((r.nodes()[0] + s).abs() < 1e-15 && (r.nodes()[1] - s).abs() < 1e-15);
        assert!((r.weights()[0] - 1.0).abs() < 1e-15);
        assert!((r.apply(|x| x * x, -1.0, 1.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_order_rejected() {
        assert!(matches!(
            gauss_rule(0, RuleKind::Legendre),
            Err(Error::InvalidOrder(0))
        ));
    }

    #[test]
    fn legendre_exact_to_degree_2k_minus_1() {
        for k in [3usize, 8, 17, 40] {
            let r = gauss_rule(k, RuleKind::Legendre).unwrap();
            for j in 0..2 * k {
                let exact = if j % 2 == 1 {
                    0.0
                } else {
                    2.0 / (j + 1) as f64
                };
                let v = r.apply(|x| x.powi(j as i32), -1.0, 1.0);
                assert!((v - exact).abs() < 1e-13, "k={k} j={j} {v} {exact}");
            }
        }
    }

    #[test]
    fn rules_have_sorted_nodes_and_positive_weights() {
        for kind in [
            RuleKind::Legendre,
            RuleKind::ChebyshevFirst,
            RuleKind::JacobiHalf,
        ] {
            let r = gauss_rule(11, kind).unwrap();
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
            assert!(r.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn interval_examples() {
        let leg = gauss_rule(8, RuleKind::Legendre).unwrap();
        let one = integrate_interval(|_| 1.0, 0.0, 1.0, &leg, 1, 1e-14).unwrap();
        assert!((one.value - 1.0).abs() < 1e-15);

        let jh = gauss_rule(8, RuleKind::JacobiHalf).unwrap();
        let sc = integrate_interval(
            |x| (4.0 - x * x).max(0.0).sqrt() / (2.0 * PI),
            -2.0,
            2.0,
            &jh,
            1,
            1e-13,
        )
        .unwrap();
        assert!((sc.value - 1.0).abs() < 1e-13);
        let arcsine =
            integrate_interval(|x| 1.0 / (1.0 - x * x).sqrt(), -1.0, 1.0, &jh, 1, 1e-13).unwrap();
        assert!((arcsine.value - PI).abs() < 1e-12);

        let ch = gauss_rule(16, RuleKind::ChebyshevFirst).unwrap();
        let arcsine =
            integrate_interval(|x| 1.0 / (1.0 - x * x).sqrt(), -1.0, 1.0, &ch, 1, 1e-13).unwrap();
        assert!((arcsine.value - PI).abs() < 1e-12);
    }

    #[test]
    fn interval_errors() {
        let leg = gauss_rule(4, RuleKind::Legendre).unwrap();
        assert!(matches!(
            integrate_interval(|x| 1.0 / x, 0.0, 1.0, &leg, 1, 1e-10),
            Err(Error::Convergence { .. })
        ));
        assert!(matches!(
            integrate_interval(|_| f64::NAN, 0.0, 1.0, &leg, 1, 1e-10),
            Err(Error::Domain(_))
        ));
        match integrate_interval(|x| x.abs().sqrt(), -1.0, 1.0, &leg, 1, 1e-15) {
            Err(Error::Convergence { best, .. }) => assert!((best - 4.0 / 3.0).abs() < 1e-4),
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn contour_examples() {
        let unit = EllipseContour::new(0.0, 1.0, 1.0, 64).unwrap();
        let v = integrate_contour(|z| 1.0 / z, &unit);
        assert!((v - 1.0).norm() < 1e-14);
        let v = integrate_contour(|_| Complex64::new(1.0, 0.0), &unit);
        assert!(v.norm() < 1e-14);

        let c = EllipseContour::around(-2.0, 2.0, 256).unwrap();
        let v = integrate_contour(|z| 1.0 / ((z - 2.0).sqrt() * (z + 2.0).sqrt()), &c);
        assert!((v - 1.0).norm() < 1e-12, "{v}");
    }

    #[test]
    fn contour_rejects_bad_nodes() {
        assert!(EllipseContour::new(0.0, 1.0, 1.0, 16).is_err());
        assert!(EllipseContour::new(0.0, 1.0, 1.0, 33).is_err());
        let tight = EllipseContour::new(0.0, 2.0005, 1.0, 64).unwrap();
        assert!(tight.check_encloses(-2.0, 2.0).is_err());
    }

    #[test]
    fn contour_error_drops_with_doubling() {
        let f = |z: Complex64| z.exp() / (z - 0.3);
        let exact = 0.3f64.exp();
        let mut prev = f64::INFINITY;
        for n in [32usize, 64] {
            let c = EllipseContour::new(0.0, 1.2, 0.8, n).unwrap();
            let e = (integrate_contour(f, &c) - exact).norm();
            assert!(e < prev / 10.0 || e < 1e-14);
            prev = e;
        }
    }

    #[test]
    fn cumulative_examples() {
        let xs: Vec<f64> = (0..=7).map(|i| (i as f64 / 7.0).powi(2)).collect();
        let ones = vec![1.0; xs.len()];
        let c = cumulative_integral(&xs, &ones).unwrap();
        for (x, v) in xs.iter().zip(&c) {
            assert!((x - v).abs() < 1e-15);
        }
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let fs: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let c = cumulative_integral(&xs, &fs).unwrap();
        let err = xs
            .iter()
            .zip(&c)
            .map(|(x, v)| (x * x - v).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6);
        assert!(cumulative_integral(&[0.0], &[1.0]).is_err());
        assert!(cumulative_integral(&[0.0, 2.0, 1.0], &[1.0; 3]).is_err());
    }

    #[test]
    fn panel_grid_cumulative_and_pointwise() {
        let g = PanelGrid::new(-1.0, 2.0, 5, 12).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|x| x.cos()).collect();
        let cum = g.cumulative(&vals);
        for (x, c) in g.nodes().iter().zip(&cum) {
            assert!((c - (x.sin() - (-1f64).sin())).abs() < 1e-13);
        }
        let off = g.panel_offsets(&vals);
        for x in [-0.99, 0.123, 1.5, 1.99] {
            let v = g.antiderivative_at(x, &vals, &off);
            assert!((v - (x.sin() + 1f64.sin())).abs() < 1e-13);
            assert!((g.interpolate(x, &vals) - x.cos()).abs() < 1e-12);
        }
        assert!((g.integrate(&vals) - (2f64.sin() + 1f64.sin())).abs() < 1e-14);
    }

    #[test]
    fn sine_integral_values() {
        // Si(1), Si(π), Si(10)
        assert!((sine_integral(1.0) - 0.946_083_070_367_183_0).abs() < 1e-14);
        assert!((sine_integral(PI) - 1.851_937_051_982_466_2).abs() < 1e-13);
        assert!((sine_integral(10.0) - 1.658_347_594_218_874_0).abs() < 1e-13);
        assert!((sine_integral(4.0) - sine_integral(4.0 + 1e-12)).abs() < 1e-11);
    }

    #[test]
    fn precision_config_rules() {
        assert!(PrecisionConfig::default().validate().is_ok());
        assert!(PrecisionConfig::new(20, 1e-10, 1e-10).is_err());
        assert!(PrecisionConfig::new(30, 1e-10, 1e-16).is_err());
        assert!(PrecisionConfig::new(30, -1.0, 1e-10).is_err());
    }

    #[test]
    fn line_fit_recovers_slope() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let f = fit_line(&xs, &ys, None);
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 3.0).abs() < 1e-13);
        let p = decay_exponent(&[10.0, 20.0, 40.0], &[1.0, 0.5, 0.25]);
        assert!((p + 1.0).abs() < 1e-12);
    }
}
