//! β = 1 and β = 4 machinery built on the weight-`n` wave functions.
//!
//! `D_{jk} = (ψ_j', ψ_k)` is banded, `M_{jk} = (εψ_j, ψ_k)` is dense, with
//! `(εf)(λ) = ½ ∫ sgn(λ - μ) f(μ) dμ`. Index blocks around `n`:
//! `B = n-2m+1..n-1`, `C = n..n+2m-2`. Then `D_n M_n = 1` outside rows `B`,
//! and its corner on `B × B` is `T_n = 1 - D_{12} M_{21}` with
//! `D_{12} = D[B, C]`, `M_{21} = M[C, B]`.
//!
//! Kernels:
//!
//! * `S_{n,1}(λ, μ) = Σ_{j,k<n} ψ_j(λ) (M_n^{-1})_{jk} εψ_k(μ)
//!    = K_{n,2} - Φ_1ᵀ D_{12} εΦ_2 - Φ_1ᵀ Ĝ εΦ_1`,
//!   `Ĝ = D_{12} (1 - M_{21} D_{12})^{-1} M_{22} D_{21}`;
//! * `S_{n/2,4}(λ, μ) = -Σ_{j,k<n} ψ_j'(λ) (D_n^{-1})_{jk} ψ_k(μ)
//!    = K_{n,2} + Φ_2ᵀ D_{21} εΦ_1 - Φ_2ᵀ G εΦ_2`,
//!   `G = -D_{21} (1 - M_{12} D_{21})^{-1} M_{11} D_{12}`.

use crate::error::{Error, Result};
use crate::numerics::{decay_exponent, PanelGrid};
use crate::orthopoly::{RecurrenceTable, WaveTable};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// `ε` applied to the rows of a sampled table: cumulative integral minus half the total.
pub fn eps_rows(grid: &PanelGrid, rows: &DMatrix<f64>) -> (DMatrix<f64>, Vec<Vec<f64>>) {
    let mut out = DMatrix::zeros(rows.nrows(), rows.ncols());
    let mut offsets = Vec::with_capacity(rows.nrows());
    for k in 0..rows.nrows() {
        let vals: Vec<f64> = rows.row(k).iter().copied().collect();
        let cum = grid.cumulative(&vals);
        let off = grid.panel_offsets(&vals);
        let half = 0.5 * off[grid.panels()];
        for (i, c) in cum.iter().enumerate() {
            out[(k, i)] = c - half;
        }
        offsets.push(off);
    }
    (out, offsets)
}

/// `ε(f ψ_k)` on the grid of a wave table.
pub fn eps_apply<F: Fn(f64) -> f64>(grid: &PanelGrid, wt: &WaveTable, f: F, k: usize) -> Vec<f64> {
    let vals: Vec<f64> = (0..grid.len())
        .map(|i| f(wt.nodes[i]) * wt.psi[(k, i)])
        .collect();
    let cum = grid.cumulative(&vals);
    let half = 0.5 * grid.integrate(&vals);
    cum.into_iter().map(|c| c - half).collect()
}

/// `ψ_k`, `εψ_k` and `ψ_k'` at one point.
#[derive(Debug, Clone)]
pub struct PointData {
    pub x: f64,
    pub psi: Vec<f64>,
    pub eps: Vec<f64>,
    pub dpsi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixKernelValue {
    pub s: f64,
    pub ds: f64,
    pub is: f64,
    pub st: f64,
}

#[derive(Debug, Clone)]
pub struct SkewMatrices {
    table: RecurrenceTable,
    n: usize,
    m: usize,
    grid: PanelGrid,
    size: usize,
    // rows 0..size of ψ and εψ on the grid
    psi_grid: DMatrix<f64>,
    eps: DMatrix<f64>,
    eps_offsets: Vec<Vec<f64>>,
    pub d: DMatrix<f64>,
    pub mm: DMatrix<f64>,
    minv: DMatrix<f64>,
    dinv: DMatrix<f64>,
    b_start: usize,
    pub t_corner: DMatrix<f64>,
    pub t_block: DMatrix<f64>,
    pub g_hat: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub f1: DMatrix<f64>,
    pub f4: DMatrix<f64>,
}

fn block(
    a: &DMatrix<f64>,
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
) -> DMatrix<f64> {
    a.view((rows.start, cols.start), (rows.len(), cols.len()))
        .into_owned()
}

fn inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate(format!("{what} is singular")))
}

impl SkewMatrices {
    /// Assembles `D`, `M`, the corner block and the kernel coefficients for
    /// `n = table.n()` particles.
    pub fn build(table: &RecurrenceTable) -> Result<Self> {
        let n = table.n();
        let m = table.m();
        if n % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "β = 1, 4 kernels need even n, got {n}"
            )));
        }
        let size = table.derivative_limit();
        let need = n + 4 * m - 2;
        if size < need {
            return Err(Error::InvalidConfig(format!(
                "recurrence depth {} too small for n = {n}, m = {m}",
                table.k_max()
            )));
        }
        let grid = table.grid()?;
        let wt = WaveTable::new(table, &grid, size - 1);
        let (eps, eps_offsets) = eps_rows(&grid, &wt.psi);
        let d = table.derivative_matrix(size)?;
        let mm = &eps * wt.weighted_psi().transpose();

        let band = 2 * m - 1;
        let b_start = n.saturating_sub(band);
        let (bb, cc) = (b_start..n, n..n + band);
        let d_n = block(&d, 0..n, 0..n);
        let m_n = block(&mm, 0..n, 0..n);
        let dm = &d_n * &m_n;
        let t_corner = block(&dm, bb.clone(), bb.clone());
        let d12 = block(&d, bb.clone(), cc.clone());
        let d21 = block(&d, cc.clone(), bb.clone());
        let m21 = block(&mm, cc.clone(), bb.clone());
        let m22 = block(&mm, cc.clone(), cc.clone());
        let m11 = block(&mm, bb.clone(), bb.clone());
        let m12 = block(&mm, bb.clone(), cc.clone());
        let nb = bb.len();
        let t_block = DMatrix::identity(nb, nb) - &d12 * &m21;
        let gap = (&t_corner - &t_block).amax();
        if gap > 1e-4 {
            return Err(Error::Consistency(format!(
                "corner block and 1 - D12 M21 differ by {gap:e}"
            )));
        }
        let inner = DMatrix::identity(band, band) - &m21 * &d12;
        let inner_inv = inverse(&inner, "1 - M21 D12")?;
        let g_hat = &d12 * &inner_inv * &m22 * &d21;
        let outer = DMatrix::identity(nb, nb) - &m12 * &d21;
        let outer_inv = inverse(&outer, "1 - M12 D21")?;
        let g = -(&d21 * &outer_inv * &m11 * &d12);
        let minv = inverse(&m_n, "M_n")?;
        let dinv = inverse(&d_n, "D_n")?;

        let nf = n as f64;
        let dim = 4 * m - 1;
        // frame offset j ↦ row j + 2m - 1, absolute index n + j
        let off = |abs: usize| abs + band - n;
        let mut f1 = DMatrix::zeros(dim, dim);
        let mut f4 = DMatrix::zeros(dim, dim);
        for (ri, r) in bb.clone().enumerate() {
            for (ci, c) in bb.clone().enumerate() {
                f1[(off(r), off(c))] = -g_hat[(ri, ci)] / nf;
            }
            for (ci, c) in cc.clone().enumerate() {
                f1[(off(r), off(c))] = -d12[(ri, ci)] / nf;
            }
        }
        for (ri, r) in cc.clone().enumerate() {
            for (ci, c) in bb.clone().enumerate() {
                f4[(off(r), off(c))] = d21[(ri, ci)] / nf;
            }
            for (ci, c) in cc.clone().enumerate() {
                f4[(off(r), off(c))] = -g[(ri, ci)] / nf;
            }
        }
        Ok(SkewMatrices {
            table: table.clone(),
            n,
            m,
            grid,
            size,
            psi_grid: wt.psi,
            eps,
            eps_offsets,
            d,
            mm,
            minv,
            dinv,
            b_start,
            t_corner,
            t_block,
            g_hat,
            g,
            f1,
            f4,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn table(&self) -> &RecurrenceTable {
        &self.table
    }
    pub fn grid(&self) -> &PanelGrid {
        &self.grid
    }
    pub fn size(&self) -> usize {
        self.size
    }
    /// `εψ_k` on the grid.
    pub fn eps_table(&self) -> &DMatrix<f64> {
        &self.eps
    }
    pub fn minv(&self) -> &DMatrix<f64> {
        &self.minv
    }
    pub fn dinv(&self) -> &DMatrix<f64> {
        &self.dinv
    }

    /// Determinant of the corner block; must be positive.
    pub fn det_t(&self) -> Result<f64> {
        let det = self.t_corner.clone().determinant();
        if !(det > 0.0) {
            return Err(Error::Degenerate(format!(
                "det T_n = {det} is not positive"
            )));
        }
        Ok(det)
    }

    /// Largest deviation between the two routes to `T_n`.
    pub fn t_route_gap(&self) -> f64 {
        (&self.t_corner - &self.t_block).amax()
    }

    /// Number of indices used by the kernels.
    fn span(&self) -> usize {
        self.n + 2 * self.m - 1
    }

    fn check_beta(beta: u32) -> Result<()> {
        if beta == 1 || beta == 4 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "skew kernels need β ∈ {{1, 4}}, got {beta}"
            )))
        }
    }

    /// Everything the kernels need at one point.
    pub fn point(&self, x: f64) -> PointData {
        let span = self.span();
        let psi = self.table.psi_all(x, self.size - 1);
        let (p, row) = self.grid.antiderivative_row(x);
        let start = p * self.grid.order();
        let eps = (0..span)
            .map(|j| {
                let off = &self.eps_offsets[j];
                let part: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * self.psi_grid[(j, start + i)])
                    .sum();
                off[p] + part - 0.5 * off[self.grid.panels()]
            })
            .collect();
        let band = 2 * self.m - 1;
        let dpsi = (0..span)
            .map(|j| {
                let hi = (j + band + 1).min(self.size);
                (j.saturating_sub(band)..hi)
                    .map(|l| self.d[(j, l)] * psi[l])
                    .sum()
            })
            .collect();
        PointData { x, psi, eps, dpsi }
    }

    fn k2(&self, l: &PointData, u: &PointData) -> f64 {
        (0..self.n).map(|j| l.psi[j] * u.psi[j]).sum()
    }

    fn bilinear(a: &[f64], mat: &DMatrix<f64>, b: &[f64]) -> f64 {
        let n = mat.nrows();
        let av = DVector::from_column_slice(&a[..n]);
        let bv = DVector::from_column_slice(&b[..n]);
        av.dot(&(mat * bv))
    }

    /// `S` from the inverse of `M_n` (β = 1) or `D_n` (β = 4).
    pub fn s_direct(&self, beta: u32, l: &PointData, u: &PointData) -> Result<f64> {
        Self::check_beta(beta)?;
        Ok(if beta == 1 {
            Self::bilinear(&l.psi, &self.minv, &u.eps)
        } else {
            -Self::bilinear(&l.dpsi, &self.dinv, &u.psi)
        })
    }

    /// `S` as `K_{n,2}` plus the finite-rank correction with coefficients `F`.
    pub fn s_block(&self, beta: u32, l: &PointData, u: &PointData) -> Result<f64> {
        Self::check_beta(beta)?;
        let band = 2 * self.m - 1;
        let nf = self.n as f64;
        let mut corr = 0.0;
        let lo = self.b_start;
        for r in lo..self.span() {
            for c in lo..self.span() {
                let (fr, fc) = (r + band - self.n, c + band - self.n);
                let coef = if beta == 1 {
                    self.f1[(fr, fc)]
                } else {
                    self.f4[(fr, fc)]
                };
                if coef != 0.0 {
                    corr += coef * l.psi[r] * u.eps[c];
                }
            }
        }
        Ok(self.k2(l, u) + nf * corr)
    }

    pub fn s_kernel(&self, beta: u32, lam: f64, mu: f64) -> Result<f64> {
        self.s_block(beta, &self.point(lam), &self.point(mu))
    }

    /// The 2×2 matrix kernel entries at precomputed points.
    pub fn matrix_kernel_points(
        &self,
        beta: u32,
        l: &PointData,
        u: &PointData,
    ) -> Result<MatrixKernelValue> {
        Self::check_beta(beta)?;
        let s = self.s_block(beta, l, u)?;
        let st = self.s_block(beta, u, l)?;
        let (ds, is) = if beta == 1 {
            let ds = -Self::bilinear(&l.psi, &self.minv, &u.psi);
            let es = Self::bilinear(&l.eps, &self.minv, &u.eps);
            let diff = l.x - u.x;
            let sgn = if diff > 0.0 {
                0.5
            } else if diff < 0.0 {
                -0.5
            } else {
                0.0
            };
            (ds, es - sgn)
        } else {
            let ds = Self::bilinear(&l.dpsi, &self.dinv, &u.dpsi);
            let es = -Self::bilinear(&l.psi, &self.dinv, &u.psi);
            (ds, es)
        };
        Ok(MatrixKernelValue { s, ds, is, st })
    }

    pub fn matrix_kernel(&self, beta: u32, lam: f64, mu: f64) -> Result<MatrixKernelValue> {
        self.matrix_kernel_points(beta, &self.point(lam), &self.point(mu))
    }

    /// `F^{(β)}` after checking that the block form reproduces the direct
    /// kernel at a few interior points.
    pub fn f_matrix(&self, beta: u32) -> Result<&DMatrix<f64>> {
        Self::check_beta(beta)?;
        let (lo, hi) = self.table.domain();
        let pts: Vec<PointData> = (1..6)
            .map(|i| self.point(lo + (hi - lo) * (0.3 + 0.08 * i as f64)))
            .collect();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for l in &pts {
            for u in &pts {
                let a = self.s_block(beta, l, u)?;
                let b = self.s_direct(beta, l, u)?;
                worst = worst.max((a - b).abs());
                scale = scale.max(b.abs());
            }
        }
        if worst > 1e-4 * scale.max(1e-12) {
            return Err(Error::Representation(format!(
                "frame re-expansion residual {worst:e} against kernel scale {scale:e}"
            )));
        }
        Ok(if beta == 1 { &self.f1 } else { &self.f4 })
    }

    /// Mean and variance of `Σ φ(λ_j)` in the β = 1 ensemble, exactly in the
    /// coefficient basis. With `A = M_n^{-1}`, `G_{kj} = (φ εψ_k, ψ_j)`,
    /// `H_{jk} = (φψ_j, ε(φψ_k))`:
    /// `mean = tr AG`, `var = tr A G₂ - tr AGAG - tr AᵀGᵀAG + Σ A∘H`.
    pub fn beta1_linear_statistic<F: Fn(f64) -> f64>(&self, phi: F) -> Result<(f64, f64)> {
        let n = self.n;
        let grid = &self.grid;
        let nodes = grid.nodes();
        let w = grid.weights();
        let vals: Vec<f64> = nodes.iter().map(|&x| phi(x)).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "test function is not finite on the grid".into(),
            ));
        }
        let mut g1 = DMatrix::zeros(n, n);
        let mut g2 = DMatrix::zeros(n, n);
        for k in 0..n {
            for j in 0..n {
                let (mut a, mut b) = (0.0, 0.0);
                for i in 0..grid.len() {
                    let t = w[i] * vals[i] * self.eps[(k, i)] * self.psi_grid[(j, i)];
                    a += t;
                    b += t * vals[i];
                }
                g1[(k, j)] = a;
                g2[(k, j)] = b;
            }
        }
        let phipsi: DMatrix<f64> =
            DMatrix::from_fn(n, grid.len(), |j, i| vals[i] * self.psi_grid[(j, i)]);
        let (eps_phipsi, _) = eps_rows(grid, &phipsi);
        let wphi = DMatrix::from_fn(n, grid.len(), |j, i| w[i] * phipsi[(j, i)]);
        let h = &wphi * eps_phipsi.transpose();
        let a = &self.minv;
        let ag = a * &g1;
        let mean = ag.trace();
        let var = (a * &g2).trace()
            - (&ag * &ag).trace()
            - (a.transpose() * g1.transpose() * &ag).trace()
            + a.component_mul(&h).sum();
        Ok((mean, var))
    }

    /// `S_{n,1}(λ, λ) / n`.
    pub fn beta1_density(&self, x: f64) -> f64 {
        let p = self.point(x);
        self.s_block(1, &p, &p).unwrap_or(f64::NAN) / self.n as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsBoundReport {
    pub ns: Vec<usize>,
    pub sup_eps: Vec<f64>,
    pub bilinear: Vec<f64>,
    pub sup_exponent: f64,
    pub bilinear_exponent: f64,
}

/// Measures `sup|ε(f ψ_n)|` and `|(g ψ_{n-1}, ε(f ψ_n))|` across `ns` and fits
/// their decay exponents in `n`.
pub fn eps_bound_diagnostics<T, F, G>(
    make_table: T,
    f: F,
    g: G,
    ns: &[usize],
) -> Result<EpsBoundReport>
where
    T: Fn(usize) -> Result<RecurrenceTable>,
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let mut sup_eps = Vec::new();
    let mut bil = Vec::new();
    for &n in ns {
        let table = make_table(n)?;
        let grid = table.grid()?;
        let wt = WaveTable::new(&table, &grid, n);
        let e = eps_apply(&grid, &wt, &f, n);
        sup_eps.push(e.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let vals: Vec<f64> = (0..grid.len())
            .map(|i| g(wt.nodes[i]) * wt.psi[(n - 1, i)] * e[i])
            .collect();
        bil.push(grid.integrate(&vals).abs());
    }
    let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    Ok(EpsBoundReport {
        ns: ns.to_vec(),
        sup_exponent: decay_exponent(&nf, &sup_eps),
        bilinear_exponent: decay_exponent(&nf, &bil),
        sup_eps,
        bilinear: bil,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::PrecisionConfig;
    use crate::orthopoly::{build_recurrence, default_order};
    use crate::potential::PolynomialPotential;
    use std::sync::Arc;

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

    const GAUSS: [f64; 3] = [0.0, 0.0, 0.5];
    const QUARTIC: [f64; 5] = [0.0, 0.0, 0.0, 0.0, 0.25];
    const TWO_CUT: [f64; 5] = [0.0, 0.0, -2.0, 0.0, 0.25];

    #[test]
    fn skew_symmetry_and_inverse_pair() {
        for c in [&GAUSS[..], &QUARTIC[..], &TWO_CUT[..]] {
            let s = SkewMatrices::build(&table(c, 12)).unwrap();
            assert!((&s.d + s.d.transpose()).amax() <= 1e-8 * 12.0);
            assert!((&s.mm + s.mm.transpose()).amax() <= 1e-8);
            let m = s.m();
            let lo = 12 - 4 * m.min(3);
            let hi = 12 + m;
            let dm = &s.d * &s.mm;
            for j in lo..=hi {
                for k in lo..=hi {
                    let t = if j == k { 1.0 } else { 0.0 };
                    assert!((dm[(j, k)] - t).abs() < 1e-6, "{j} {k} {}", dm[(j, k)]);
                }
            }
            assert!(s.t_route_gap() < 1e-6);
            assert!(s.det_t().unwrap() > 0.0);
        }
    }

    #[test]
    fn gaussian_det_t_bounded_below() {
        for n in [8, 16, 32, 64] {
            let s = SkewMatrices::build(&table(&GAUSS, n)).unwrap();
            assert_eq!(s.t_corner.nrows(), 1);
            let d = s.det_t().unwrap();
            assert!(d > 0.1 && d < 10.0, "n={n} det={d}");
        }
    }

    #[test]
    fn block_forms_match_direct_inverses() {
        for c in [&GAUSS[..], &QUARTIC[..], &TWO_CUT[..]] {
            let s = SkewMatrices::build(&table(c, 10)).unwrap();
            let pts: Vec<PointData> = (0..20)
                .map(|i| s.point(-2.6 + 5.2 * i as f64 / 19.0))
                .collect();
            for beta in [1, 4] {
                let mut worst = 0.0f64;
                for l in &pts {
                    for u in &pts {
                        let a = s.s_block(beta, l, u).unwrap();
                        let b = s.s_direct(beta, l, u).unwrap();
                        worst = worst.max((a - b).abs());
                    }
                }
                assert!(worst < 1e-6, "β={beta} {worst}");
                assert!(s.f_matrix(beta).is_ok());
            }
        }
    }

    #[test]
    fn kernel_traces() {
        let s = SkewMatrices::build(&table(&TWO_CUT, 12)).unwrap();
        let grid = s.grid().clone();
        for beta in [1, 4] {
            let vals: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&x| {
                    let p = s.point(x);
                    s.s_block(beta, &p, &p).unwrap()
                })
                .collect();
            assert!((grid.integrate(&vals) - 12.0).abs() < 1e-4);
        }
    }

    #[test]
    fn matrix_kernel_entries() {
        let s = SkewMatrices::build(&table(&QUARTIC, 10)).unwrap();
        let k = s.matrix_kernel(1, 0.4, 0.4).unwrap();
        assert!(k.is.abs() < 1e-12);
        assert!((k.s - k.st).abs() < 1e-12);
        let h = 1e-5;
        for beta in [1, 4] {
            let k = s.matrix_kernel(beta, 0.3, -0.5).unwrap();
            let fd = -(s.s_kernel(beta, 0.3, -0.5 + h).unwrap()
                - s.s_kernel(beta, 0.3, -0.5 - h).unwrap())
                / (2.0 * h);
            assert!((k.ds - fd).abs() < 1e-4, "β={beta} {} {fd}", k.ds);
            assert!((k.st - s.s_kernel(beta, -0.5, 0.3).unwrap()).abs() < 1e-12);
        }
        assert!(s.matrix_kernel(2, 0.0, 0.0).is_err());
    }

    #[test]
    fn eps_parity_and_limits() {
        let t = table(&QUARTIC, 12);
        let s = SkewMatrices::build(&t).unwrap();
        let p = s.point(0.0);
        // ε maps even functions to odd ones
        for k in (0..12).step_by(2) {
            assert!(p.eps[k].abs() < 1e-10);
        }
        assert!(p.eps[1].abs() > 1e-3);
        let (lo, hi) = t.domain();
        let grid = s.grid();
        let wt = WaveTable::new(&t, grid, 12);
        for k in [0, 2, 4] {
            let total = grid.integrate(&wt.psi.row(k).iter().copied().collect::<Vec<_>>());
            assert!((s.point(hi).eps[k] - 0.5 * total).abs() < 1e-10);
            assert!((s.point(lo).eps[k] + 0.5 * total).abs() < 1e-10);
        }
    }

    #[test]
    fn correction_has_low_rank() {
        let s = SkewMatrices::build(&table(&TWO_CUT, 12)).unwrap();
        let pts: Vec<PointData> = (0..24)
            .map(|i| s.point(-2.5 + 5.0 * i as f64 / 23.0))
            .collect();
        let mut a = DMatrix::zeros(24, 24);
        for (i, l) in pts.iter().enumerate() {
            for (j, u) in pts.iter().enumerate() {
                a[(i, j)] = s.s_block(1, l, u).unwrap() - s.k2(l, u);
            }
        }
        let sv = a.singular_values();
        let top = sv.max();
        let rank = sv.iter().filter(|&&x| x > 1e-9 * top).count();
        assert!(rank <= 2 * (2 * s.m() - 1), "rank {rank}");
    }

    #[test]
    fn beta1_marginal() {
        let s = SkewMatrices::build(&table(&GAUSS, 16)).unwrap();
        let grid = s.grid().clone();
        let dens: Vec<f64> = grid.nodes().iter().map(|&x| s.beta1_density(x)).collect();
        assert!((grid.integrate(&dens) - 1.0).abs() < 1e-6);
        assert!(dens.iter().all(|&d| d > -1e-6));
    }

    #[test]
    fn eps_bounds_decay() {
        let mk = |n| Ok(table(&GAUSS, n));
        let r = eps_bound_diagnostics(mk, |_| 1.0, |_| 1.0, &[25, 50, 100]).unwrap();
        assert!(r.bilinear_exponent <= -0.8, "{r:?}");
        assert!(r.sup_exponent <= -0.4, "{r:?}");
        let f = |x: f64| 1.0 + 0.3 * x * x;
        let r1 = eps_bound_diagnostics(mk, f, |_| 1.0, &[24]).unwrap();
        let r2 = eps_bound_diagnostics(mk, |x| 2.0 * f(x), |_| 1.0, &[24]).unwrap();
        assert!((r2.bilinear[0] / r1.bilinear[0] - 2.0).abs() < 0.2);
    }

    #[test]
    fn odd_n_rejected() {
        assert!(SkewMatrices::build(&table(&GAUSS, 7)).is_err());
    }

    #[test]
    fn beta1_linear_statistic_oracles() {
        for n in [4usize, 8, 16] {
            let s = SkewMatrices::build(&table(&GAUSS, n)).unwrap();
            let nf = n as f64;
            let (m1, v1) = s.beta1_linear_statistic(|_| 1.0).unwrap();
            assert!(
                (m1 - nf).abs() < 1e-8 * nf && v1.abs() < 1e-7,
                "{n}: {m1} {v1}"
            );
            let (m, v) = s.beta1_linear_statistic(|x| x).unwrap();
            assert!(m.abs() < 1e-8 && (v - 2.0).abs() < 1e-7, "{n}: {m} {v}");
            // Σλ² is Gamma(n(n+1)/4, n/4)
            let (m, v) = s.beta1_linear_statistic(|x| x * x).unwrap();
            assert!((m - (nf + 1.0)).abs() < 1e-7 * nf, "{n}: {m}");
            assert!((v - 4.0 * (nf + 1.0) / nf).abs() < 1e-6, "{n}: {v}");
        }
    }
}
