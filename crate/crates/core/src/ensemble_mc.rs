//! Metropolis sampling of `p(λ) ∝ exp((β/2)(-n Σ V(λ_i) + Σ_{i≠j} log|λ_i - λ_j|))`.
//!
//! One step is a sweep of single-site moves over all `n` coordinates. Chains
//! run in parallel, each on its own ChaCha stream `(seed, chain)`, and every
//! estimator reduces in chain order so results are bit-reproducible.

use crate::error::{Error, Result};
use crate::orthopoly::truncation_domain;
use crate::potential::Potential;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const BATCHES: usize = 50;
const TARGET_ACCEPTANCE: f64 = 0.4;
const TUNE_EVERY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n: usize,
    pub beta: u32,
    pub steps: usize,
    pub burn_in: usize,
    pub proposal_width: f64,
    pub seed: u64,
    pub thinning: usize,
    pub chains: usize,
}

impl ChainConfig {
    /// Defaults: width `2.4/√(nβ)`, 8 chains, thinning 1.
    pub fn new(n: usize, beta: u32, steps: usize, burn_in: usize, seed: u64) -> Self {
        ChainConfig {
            n,
            beta,
            steps,
            burn_in,
            proposal_width: 2.4 / ((n * beta as usize).max(1) as f64).sqrt(),
            seed,
            thinning: 1,
            chains: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.beta, 1 | 2 | 4) {
            return Err(Error::InvalidConfig(format!(
                "β must be 1, 2 or 4, got {}",
                self.beta
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        if self.steps <= self.burn_in {
            return Err(Error::InvalidConfig(format!(
                "steps ({}) must exceed burn_in ({})",
                self.steps, self.burn_in
            )));
        }
        if !(self.proposal_width > 0.0 && self.proposal_width.is_finite()) {
            return Err(Error::InvalidConfig(
                "proposal width must be positive".into(),
            ));
        }
        if self.thinning == 0 || self.chains == 0 {
            return Err(Error::InvalidConfig(
                "thinning and chains must be positive".into(),
            ));
        }
        if self.chains * ((self.steps - self.burn_in) / self.thinning) < BATCHES {
            return Err(Error::InvalidConfig(format!(
                "fewer than {BATCHES} recorded samples"
            )));
        }
        Ok(())
    }
}

/// Unnormalized log density; `-∞` at coincident points.
pub fn log_density(v: &dyn Potential, n: usize, beta: u32, lam: &[f64]) -> f64 {
    let b = beta as f64;
    let mut s = -0.5 * b * n as f64 * lam.iter().map(|&x| v.value(x)).sum::<f64>();
    for i in 0..lam.len() {
        for j in 0..i {
            s += b * (lam[i] - lam[j]).abs().ln();
        }
    }
    s
}

/// Change of the log density when coordinate `i` moves to `y`.
fn move_delta(v: &dyn Potential, n: usize, beta: f64, lam: &[f64], i: usize, y: f64) -> f64 {
    let x = lam[i];
    let mut s = -0.5 * beta * n as f64 * (v.value(y) - v.value(x));
    for (j, &z) in lam.iter().enumerate() {
        if j != i {
            s += beta * ((y - z).abs().ln() - (x - z).abs().ln());
        }
    }
    s
}

#[derive(Debug, Clone)]
pub struct Samples {
    pub n: usize,
    pub beta: u32,
    /// Recorded configurations, `n` values each, chain after chain.
    pub data: Vec<f64>,
    pub per_chain: usize,
    pub chains: usize,
    pub acceptance: Vec<f64>,
    pub widths: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn config(&self, k: usize) -> &[f64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }
    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }
}

struct ChainOutput {
    data: Vec<f64>,
    acceptance: f64,
    width: f64,
}

/// One logged single-site proposal.
#[derive(Debug, Clone, Serialize)]
pub struct Transition {
    pub before: Vec<f64>,
    pub site: usize,
    pub proposal: f64,
    pub uniform: f64,
    pub accepted: bool,
}

fn run_one(
    v: &dyn Potential,
    cfg: &ChainConfig,
    chain: usize,
    start: &[f64],
    mut log: Option<(usize, &mut Vec<Transition>)>,
) -> ChainOutput {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain as u64);
    let n = cfg.n;
    let beta = cfg.beta as f64;
    let mut lam = start.to_vec();
    let mut width = cfg.proposal_width;
    let mut data = Vec::with_capacity(n * (cfg.steps - cfg.burn_in) / cfg.thinning);
    let (mut acc, mut tried) = (0usize, 0usize);
    let (mut win_acc, mut win_tried) = (0usize, 0usize);
    for step in 0..cfg.steps {
        for i in 0..n {
            let y = lam[i] + width * (rng.gen::<f64>() - 0.5);
            let d = move_delta(v, n, beta, &lam, i, y);
            let u: f64 = rng.gen();
            // NaN or -∞ (coincident points) never passes
            let ok = d.is_finite() && (d >= 0.0 || u.ln() < d);
            if step >= cfg.burn_in {
                if let Some((cap, out)) = log.as_mut() {
                    if out.len() < *cap {
                        out.push(Transition {
                            before: lam.clone(),
                            site: i,
                            proposal: y,
                            uniform: u,
                            accepted: ok,
                        });
                    }
                }
            }
            if ok {
                lam[i] = y;
            }
            if step < cfg.burn_in {
                win_tried += 1;
                win_acc += ok as usize;
            } else {
                tried += 1;
                acc += ok as usize;
            }
        }
        if step < cfg.burn_in && (step + 1) % TUNE_EVERY == 0 {
            let rate = win_acc as f64 / win_tried as f64;
            width *= (2.0 * (rate - TARGET_ACCEPTANCE)).exp();
            win_acc = 0;
            win_tried = 0;
        }
        if step >= cfg.burn_in && (step - cfg.burn_in) % cfg.thinning == cfg.thinning - 1 {
            data.extend_from_slice(&lam);
        }
    }
    ChainOutput {
        data,
        acceptance: acc as f64 / tried.max(1) as f64,
        width,
    }
}

fn start_config(v: &dyn Potential, config: &ChainConfig) -> Vec<f64> {
    let n = config.n;
    let (lo, hi) = v
        .domain()
        .unwrap_or_else(|| truncation_domain(v, 0.5 * (n * config.beta as usize) as f64));
    let (c, h) = (0.5 * (lo + hi), 0.25 * (hi - lo));
    (0..n)
        .map(|i| c - h + 2.0 * h * (i as f64 + 0.5) / n as f64)
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub transitions: usize,
    /// Decisions that disagree with `log u < Δ` recomputed from full log densities.
    pub mismatches: usize,
    pub acceptance: f64,
    /// Mean of `min(1, e^Δ)` over the logged proposals.
    pub expected_acceptance: f64,
    pub z_score: f64,
}

/// Logs `transitions` post-burn-in proposals of chain 0 and re-derives every
/// decision from `log_density` of the full configurations.
pub fn audit_detailed_balance(
    v: Arc<dyn Potential>,
    config: &ChainConfig,
    transitions: usize,
) -> Result<AuditReport> {
    config.validate()?;
    if transitions == 0 {
        return Err(Error::InvalidConfig(
            "audit needs at least one transition".into(),
        ));
    }
    let start = start_config(v.as_ref(), config);
    let mut log = Vec::with_capacity(transitions);
    run_one(v.as_ref(), config, 0, &start, Some((transitions, &mut log)));
    let (n, beta) = (config.n, config.beta);
    let (mut mismatches, mut acc, mut expect, mut var) = (0usize, 0.0, 0.0, 0.0);
    for t in &log {
        let mut after = t.before.clone();
        after[t.site] = t.proposal;
        let d =
            log_density(v.as_ref(), n, beta, &after) - log_density(v.as_ref(), n, beta, &t.before);
        let p = if d.is_finite() { d.min(0.0).exp() } else { 0.0 };
        let lu = t.uniform.ln();
        let decided = d.is_finite() && lu < d;
        // ties within rounding of the incremental Δ are not counted
        if decided != t.accepted && (lu - d).abs() > 1e-9 * (1.0 + d.abs()) {
            mismatches += 1;
        }
        acc += t.accepted as u8 as f64;
        expect += p;
        var += p * (1.0 - p);
    }
    let k = log.len() as f64;
    Ok(AuditReport {
        transitions: log.len(),
        mismatches,
        acceptance: acc / k,
        expected_acceptance: expect / k,
        z_score: (acc - expect) / var.sqrt().max(1e-300),
    })
}

/// Runs `config.chains` independent chains started from an evenly spread configuration.
pub fn run_chain(v: Arc<dyn Potential>, config: &ChainConfig) -> Result<Samples> {
    config.validate()?;
    let n = config.n;
    let start = start_config(v.as_ref(), config);
    let outs: Vec<ChainOutput> = (0..config.chains)
        .into_par_iter()
        .map(|k| run_one(v.as_ref(), config, k, &start, None))
        .collect();
    let per_chain = outs[0].data.len() / n;
    let mut warnings = Vec::new();
    for (k, o) in outs.iter().enumerate() {
        if !(0.1..=0.9).contains(&o.acceptance) {
            warnings.push(format!(
                "chain {k}: acceptance rate {:.3} outside [0.1, 0.9]",
                o.acceptance
            ));
        }
    }
    Ok(Samples {
        n,
        beta: config.beta,
        per_chain,
        chains: config.chains,
        acceptance: outs.iter().map(|o| o.acceptance).collect(),
        widths: outs.iter().map(|o| o.width).collect(),
        data: outs.into_iter().flat_map(|o| o.data).collect(),
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleStats {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
    /// Batch-means standard error of `mean`.
    pub std_error: f64,
    /// Batch-means standard error of `variance`.
    pub variance_std_error: f64,
    pub batches: usize,
    pub n: usize,
    pub beta: u32,
}

/// Mean and standard error from `BATCHES` contiguous batch means.
fn batch_means(values: &[f64]) -> (f64, f64) {
    let len = values.len();
    let size = len / BATCHES;
    let means: Vec<f64> = (0..BATCHES)
        .map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let mean = values.iter().sum::<f64>() / len as f64;
    let bm = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    (mean, (var / BATCHES as f64).sqrt())
}

/// Statistics of `values` with batch-means errors on the mean and the variance.
pub fn series_stats(name: &str, values: &[f64], n: usize, beta: u32) -> SampleStats {
    let (mean, std_error) = batch_means(values);
    let sq: Vec<f64> = values.iter().map(|x| (x - mean).powi(2)).collect();
    let (variance, variance_std_error) = batch_means(&sq);
    SampleStats {
        name: name.to_string(),
        mean,
        variance,
        std_error,
        variance_std_error,
        batches: BATCHES,
        n,
        beta,
    }
}

/// `𝒩_n[φ] = Σ_i φ(λ_i)` over the recorded configurations.
pub fn linear_statistic<F: Fn(f64) -> f64>(samples: &Samples, phi: F) -> SampleStats {
    let values: Vec<f64> = samples
        .iter()
        .map(|c| c.iter().map(|&x| phi(x)).sum())
        .collect();
    series_stats("linear_statistic", &values, samples.n, samples.beta)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventEstimate {
    pub z: [f64; 2],
    /// `g_n(z) = E n^{-1} Σ (λ_i - z)^{-1}`.
    pub g: [f64; 2],
    pub g_std_error: [f64; 2],
    /// `δ_n(z) = E γ² - (E γ)²` with `γ = Σ (z - λ_i)^{-1}`.
    pub delta: [f64; 2],
    pub delta_std_error: [f64; 2],
    pub n: usize,
    pub beta: u32,
}

/// Resolvent mean and connected correlator; `Domain` error closer than `0.5` to `[lo, hi]`.
pub fn resolvent_estimate(
    samples: &Samples,
    z: Complex64,
    support: (f64, f64),
) -> Result<ResolventEstimate> {
    let dx = if z.re < support.0 {
        support.0 - z.re
    } else if z.re > support.1 {
        z.re - support.1
    } else {
        0.0
    };
    if dx.hypot(z.im) < 0.5 {
        return Err(Error::Domain(format!(
            "z = {z} is within 0.5 of the support"
        )));
    }
    let nf = samples.n as f64;
    let gam: Vec<Complex64> = samples
        .iter()
        .map(|c| c.iter().map(|&x| 1.0 / (z - x)).sum::<Complex64>())
        .collect();
    let re: Vec<f64> = gam.iter().map(|g| -g.re / nf).collect();
    let im: Vec<f64> = gam.iter().map(|g| -g.im / nf).collect();
    let (gr, gr_se) = batch_means(&re);
    let (gi, gi_se) = batch_means(&im);
    let mean = Complex64::new(-gr * nf, -gi * nf);
    let sq: Vec<Complex64> = gam.iter().map(|g| (g - mean) * (g - mean)).collect();
    let (dr, dr_se) = batch_means(&sq.iter().map(|c| c.re).collect::<Vec<_>>());
    let (di, di_se) = batch_means(&sq.iter().map(|c| c.im).collect::<Vec<_>>());
    Ok(ResolventEstimate {
        z: [z.re, z.im],
        g: [gr, gi],
        g_std_error: [gr_se, gi_se],
        delta: [dr, di],
        delta_std_error: [dr_se, di_se],
        n: samples.n,
        beta: samples.beta,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub std_error: Vec<f64>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Normalized one-point histogram on `[lo, hi]` (mass outside is dropped before normalizing).
pub fn marginal_histogram(samples: &Samples, bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::InvalidConfig("need bins > 0 and hi > lo".into()));
    }
    let width = (hi - lo) / bins as f64;
    let len = samples.len();
    let size = len / BATCHES;
    let mut batch_counts = vec![vec![0.0; bins]; BATCHES];
    let mut total = vec![0.0; bins];
    for (k, c) in samples.iter().enumerate() {
        for &x in c {
            if x >= lo && x < hi {
                let b = (((x - lo) / width) as usize).min(bins - 1);
                total[b] += 1.0;
                if k / size < BATCHES {
                    batch_counts[k / size][b] += 1.0;
                }
            }
        }
    }
    let norm: f64 = total.iter().sum::<f64>() * width;
    let density: Vec<f64> = total.iter().map(|c| c / norm).collect();
    let std_error = (0..bins)
        .map(|b| {
            let ds: Vec<f64> = batch_counts
                .iter()
                .map(|bc| bc[b] / (bc.iter().sum::<f64>().max(1.0) * width))
                .collect();
            let m = ds.iter().sum::<f64>() / BATCHES as f64;
            let var = ds.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
            (var / BATCHES as f64).sqrt()
        })
        .collect();
    Ok(Histogram {
        edges: (0..=bins).map(|i| lo + i as f64 * width).collect(),
        density,
        std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gauss_legendre;
    use crate::potential::PolynomialPotential;

    fn gaussian() -> Arc<dyn Potential> {
        Arc::new(PolynomialPotential::gaussian())
    }

    #[test]
    fn log_density_values() {
        let v = PolynomialPotential::gaussian();
        // n = 1: -(βn/2) V(λ)
        assert!((log_density(&v, 1, 2, &[0.7]) + 0.245).abs() < 1e-15);
        // -(nβ/2)(V(0) + V(1)) + β log 1
        assert!((log_density(&v, 2, 2, &[0.0, 1.0]) + 1.0).abs() < 1e-15);
        let a = log_density(&v, 3, 1, &[0.1, -0.5, 1.2]);
        let b = log_density(&v, 3, 1, &[1.2, 0.1, -0.5]);
        assert!((a - b).abs() < 1e-14);
        assert_eq!(log_density(&v, 2, 1, &[0.3, 0.3]), f64::NEG_INFINITY);
        assert_eq!(
            move_delta(&v, 2, 1.0, &[0.3, 0.5], 0, 0.5),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn config_validation() {
        let mut c = ChainConfig::new(4, 2, 100, 100, 1);
        assert!(c.validate().is_err());
        c.steps = 1000;
        assert!(c.validate().is_ok());
        c.proposal_width = 0.0;
        assert!(c.validate().is_err());
        assert!(ChainConfig::new(4, 3, 1000, 10, 1).validate().is_err());
    }

    #[test]
    fn single_particle_variance() {
        // n = 1, β = 2: density ∝ e^{-λ²/2}, variance 1
        let cfg = ChainConfig {
            proposal_width: 2.5,
            ..ChainConfig::new(1, 2, 60_000, 1000, 3)
        };
        let s = run_chain(gaussian(), &cfg).unwrap();
        let st = linear_statistic(&s, |x| x * x);
        let (x, w) = gauss_legendre(200);
        let num: f64 = x
            .iter()
            .zip(&w)
            .map(|(&t, &wt)| wt * (10.0 * t).powi(2) * (-50.0 * t * t).exp())
            .sum();
        let den: f64 = x
            .iter()
            .zip(&w)
            .map(|(&t, &wt)| wt * (-50.0 * t * t).exp())
            .sum();
        assert!((st.mean - num / den).abs() < 3.0 * st.std_error, "{st:?}");
    }

    #[test]
    fn reproducible_and_constant_statistic() {
        let cfg = ChainConfig::new(6, 1, 400, 100, 42);
        let a = run_chain(gaussian(), &cfg).unwrap();
        let b = run_chain(gaussian(), &cfg).unwrap();
        assert_eq!(a.data, b.data);
        let one = linear_statistic(&a, |_| 1.0);
        assert_eq!(one.mean, 6.0);
        assert_eq!(one.variance, 0.0);
        let h = marginal_histogram(&a, 20, -3.0, 3.0).unwrap();
        let mass: f64 = h.density.iter().sum::<f64>() * 0.3;
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resolvent_rejects_points_near_support() {
        let cfg = ChainConfig::new(4, 2, 300, 100, 1);
        let s = run_chain(gaussian(), &cfg).unwrap();
        assert!(resolvent_estimate(&s, Complex64::new(0.0, 0.2), (-2.0, 2.0)).is_err());
        let r = resolvent_estimate(&s, Complex64::new(0.0, 2.0), (-2.0, 2.0)).unwrap();
        assert!(r.g[1] > 0.0);
    }

    #[test]
    fn detailed_balance_audit() {
        for beta in [1, 4] {
            let cfg = ChainConfig::new(8, beta, 600, 200, 9);
            let r = audit_detailed_balance(gaussian(), &cfg, 1000).unwrap();
            assert_eq!(r.transitions, 1000);
            assert_eq!(r.mismatches, 0);
            assert!(r.z_score.abs() < 4.0, "{r:?}");
        }
    }
}
