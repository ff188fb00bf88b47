use super::output::Output;
use super::{parse_list, usage, CliError, CliResult, RunConfig};
use multicut::ensemble_mc::{
    linear_statistic, marginal_histogram, resolvent_estimate, run_chain, ChainConfig, Histogram,
    ResolventEstimate, SampleStats,
};
use multicut::equilibrium::{default_guess, EquilibriumMeasure, SupportReport};
use multicut::numerics::gauss_legendre;
use multicut::orthopoly::{build_recurrence, default_order};
use multicut::partition::{
    brute_force_log_q, dett_identity_check, factorization_sweep, log_q_one_interval, selberg_log_q,
    BruteMethod,
};
use multicut::potential::{Potential, PotentialVariant};
use multicut::skew::SkewMatrices;
use multicut::universality::{
    bulk_error, rescaled_kernels, sine_kernel, BulkErrorReport, BulkGrid,
};
use multicut::verify::{run_suite, CriterionOutcome, Tier};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

fn measure(cfg: &RunConfig, q: usize) -> CliResult<EquilibriumMeasure> {
    let variant = PotentialVariant::new(cfg.potential()?).with_eta(cfg.eta.unwrap_or(1.0))?;
    let poly = variant.to_polynomial()?;
    Ok(EquilibriumMeasure::solve(
        &variant,
        q,
        &default_guess(&poly, q),
    )?)
}

#[derive(Serialize)]
struct EquilibriumOut {
    q: usize,
    eta: f64,
    support: SupportReport,
    p_coeffs: Vec<f64>,
    energy: f64,
}

pub fn equilibrium(cfg: &RunConfig, out: &Output) -> CliResult<u8> {
    cfg.potential()?;
    let q = cfg.require(cfg.q, "q")?;
    let m = measure(cfg, q)?;
    let plan = cfg.n.map(|n| m.mass_plan(n)).transpose()?;
    out.json(
        "support.json",
        &EquilibriumOut {
            q,
            eta: cfg.eta.unwrap_or(1.0),
            support: SupportReport::new(&m, plan.as_ref()),
            p_coeffs: m.p_coeffs().to_vec(),
            energy: m.energy(),
        },
    )?;
    let rows: Vec<Vec<f64>> = m
        .density_grid()
        .into_iter()
        .map(|(cut, x, rho)| vec![cut as f64, x, rho])
        .collect();
    out.csv("density.csv", &["cut", "lambda", "rho"], &rows)?;
    Ok(0)
}

#[derive(Serialize)]
struct KernelOut {
    n: usize,
    beta: u32,
    point: f64,
    q_n: f64,
    /// Largest entrywise deviation from the sine kernel at `n`.
    sup_error: f64,
    report: BulkErrorReport,
}

pub fn kernel(cfg: &RunConfig, out: &Output) -> CliResult<u8> {
    let beta = cfg.beta(2)?;
    let n = cfg.require(cfg.n, "n")?;
    if beta != 2 && n % 2 != 0 {
        return usage(format!("β = {beta} kernels need even --n, got {n}"));
    }
    let m = measure(cfg, cfg.q.unwrap_or(1))?;
    let point = match cfg.point {
        Some(p) => p,
        None => {
            let (a, b) = m.support().interval(0);
            0.5 * (a + b)
        }
    };
    let grid = BulkGrid {
        points: cfg.grid_points.unwrap_or(17),
        half_width: cfg.half_width.unwrap_or(2.0),
    };
    if grid.points < 3 || !(grid.half_width > 0.0) {
        return usage("--grid-points must be at least 3 and --half-width positive");
    }
    let mut ns = match &cfg.ns {
        Some(s) => parse_list::<usize>(s, "--ns")?,
        None => Vec::new(),
    };
    ns.push(n);
    ns.sort_unstable();
    ns.dedup();
    let (q_n, ks) = rescaled_kernels(&m, beta, n, point, grid)?;
    let report = bulk_error(&m, beta, point, &ns, grid)?;
    let at = ns.iter().position(|&k| k == n).unwrap_or(0);
    let sup_error = report
        .active_entries()
        .iter()
        .map(|&e| report.sup_errors[at][e])
        .fold(0.0f64, f64::max);
    let xs = grid.values();
    let pairs = xs.iter().flat_map(|&a| xs.iter().map(move |&b| (a, b)));
    let rows: Vec<Vec<f64>> = pairs
        .zip(&ks)
        .map(|((a, b), k)| {
            if beta == 2 {
                vec![a, b, k[0][0], sine_kernel(a - b)]
            } else {
                vec![a, b, k[0][0], k[0][1], k[1][0], k[1][1]]
            }
        })
        .collect();
    let cols: &[&str] = if beta == 2 {
        &["xi", "eta", "k11", "sine"]
    } else {
        &["xi", "eta", "k11", "k12", "k21", "k22"]
    };
    out.csv("kernel.csv", cols, &rows)?;
    out.json(
        "bulk_error.json",
        &KernelOut {
            n,
            beta,
            point,
            q_n,
            sup_error,
            report,
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    method: &'a str,
    #[serde(flatten)]
    value: T,
}

#[derive(Serialize)]
struct SelbergOut {
    n: usize,
    beta: u32,
    log_value: f64,
    value: f64,
}

#[derive(Serialize)]
struct BruteOut {
    n: usize,
    beta: u32,
    integrator: &'static str,
    log_value: f64,
    error_bar: f64,
}

pub fn partition(cfg: &RunConfig, out: &Output) -> CliResult<u8> {
    let method = match cfg.method.as_deref() {
        Some(m) => m,
        None => return usage("missing --method (selberg | expansion | brute | dett | factorize)"),
    };
    let file = format!("partition_{method}.json");
    match method {
        "selberg" => {
            let n = cfg.require(cfg.n, "n")?;
            let beta = cfg.beta(2)?;
            let s = selberg_log_q(n, beta)?;
            let value = SelbergOut {
                n,
                beta,
                log_value: s.log_value,
                value: s.log_value.exp(),
            };
            out.json(&file, &Tagged { method, value })?;
        }
        "expansion" => {
            let n = cfg.require(cfg.n, "n")?;
            let r = log_q_one_interval(&cfg.potential()?, n, cfg.beta(2)?, cfg.eta.unwrap_or(1.0))?;
            out.json(&file, &Tagged { method, value: r })?;
        }
        "brute" => {
            let n = cfg.require(cfg.n, "n")?;
            let beta = cfg.beta(2)?;
            let v: Arc<dyn Potential> = Arc::new(cfg.potential()?);
            let (integrator, how) = match cfg.samples {
                Some(samples) => (
                    "monte-carlo",
                    BruteMethod::MonteCarlo {
                        samples,
                        seed: cfg.seed.unwrap_or(0),
                    },
                ),
                None => ("quadrature", BruteMethod::Quadrature),
            };
            let b = brute_force_log_q(v, n, beta, how)?;
            let value = BruteOut {
                n,
                beta,
                integrator,
                log_value: b.log_value,
                error_bar: b.error_bar,
            };
            out.json(&file, &Tagged { method, value })?;
        }
        "dett" => {
            let n = cfg.require(cfg.n, "n")?;
            let mc = BruteMethod::MonteCarlo {
                samples: cfg.samples.unwrap_or(1_000_000),
                seed: cfg.seed.unwrap_or(11),
            };
            let r = dett_identity_check(n, &cfg.potential()?, mc)?;
            out.json(&file, &Tagged { method, value: r })?;
        }
        "factorize" => {
            let m = measure(cfg, cfg.q.unwrap_or(2))?;
            let ns: Vec<usize> = match (&cfg.ns, cfg.n) {
                (Some(s), _) => parse_list(s, "--ns")?,
                (None, Some(n)) => vec![n],
                (None, None) => (8..=40).step_by(4).collect(),
            };
            let r = factorization_sweep(&m, &ns, cfg.beta(2)?)?;
            out.json(&file, &Tagged { method, value: r })?;
        }
        other => return usage(format!("unknown --method '{other}'")),
    }
    Ok(0)
}

#[derive(Serialize)]
struct MarginalOut {
    histogram: Histogram,
    /// Bin averages of the exact one-point density, when available.
    exact: Option<Vec<f64>>,
    gap_in_std_errors: Option<Vec<f64>>,
    max_gap_in_std_errors: Option<f64>,
}

#[derive(Serialize)]
struct SampleOut {
    config: ChainConfig,
    acceptance: Vec<f64>,
    widths: Vec<f64>,
    recorded: usize,
    statistics: Vec<SampleStats>,
    resolvent: Option<ResolventEstimate>,
    marginal: Option<MarginalOut>,
    warnings: Vec<String>,
}

fn bin_averages<F: Fn(f64) -> f64>(edges: &[f64], f: F) -> Vec<f64> {
    let (x, w) = gauss_legendre(16);
    edges
        .windows(2)
        .map(|e| {
            let (a, b) = (e[0], e[1]);
            x.iter()
                .zip(&w)
                .map(|(&t, &wt)| 0.5 * wt * f(0.5 * (a + b) + 0.5 * (b - a) * t))
                .sum()
        })
        .collect()
}

pub fn sample(cfg: &RunConfig, out: &Output) -> CliResult<u8> {
    let v = cfg.potential()?;
    let n = cfg.require(cfg.n, "n")?;
    let beta = cfg.beta(2)?;
    let steps = cfg.steps.unwrap_or(20_000);
    let mut chain = ChainConfig::new(
        n,
        beta,
        steps,
        cfg.burn_in.unwrap_or(steps / 10),
        cfg.seed.unwrap_or(0),
    );
    if let Some(t) = cfg.thinning {
        chain.thinning = t;
    }
    if let Some(c) = cfg.chains {
        chain.chains = c;
    }
    if let Some(w) = cfg.proposal_width {
        chain.proposal_width = w;
    }
    chain.validate()?;
    let arc: Arc<dyn Potential> = Arc::new(v.clone());
    let samples = run_chain(arc.clone(), &chain)?;
    let mut warnings = samples.warnings.clone();
    let statistics = vec![
        linear_statistic(&samples, |x| x),
        linear_statistic(&samples, |x| x * x),
        linear_statistic(&samples, |x| (PI * x / 3.0).sin()),
    ];
    let names = ["sum lambda", "sum lambda^2", "sum sin(pi lambda / 3)"];
    let statistics: Vec<SampleStats> = statistics
        .into_iter()
        .zip(names)
        .map(|(mut s, name)| {
            s.name = name.into();
            s
        })
        .collect();

    let m = measure(cfg, cfg.q.unwrap_or(1));
    let resolvent = match (&m, &cfg.z) {
        (Ok(m), z) => {
            let zv: Vec<f64> = parse_list(z.as_deref().unwrap_or("0,2"), "--z")?;
            if zv.len() != 2 {
                return usage("--z takes re,im");
            }
            match resolvent_estimate(&samples, Complex64::new(zv[0], zv[1]), m.support().hull()) {
                Ok(r) => Some(r),
                Err(e) if z.is_some() => return Err(e.into()),
                Err(e) => {
                    warnings.push(format!("resolvent skipped: {e}"));
                    None
                }
            }
        }
        (Err(e), Some(_)) => {
            return Err(CliError::Usage(format!(
                "resolvent needs an equilibrium measure: {e}"
            )))
        }
        (Err(e), None) => {
            warnings.push(format!("resolvent skipped: {e}"));
            None
        }
    };

    let marginal = if cfg.marginal.unwrap_or(false) {
        let m = m.map_err(|e| {
            CliError::Usage(format!("marginal range needs an equilibrium measure: {e}"))
        })?;
        let (a, b) = m.support().hull();
        let pad = 0.15 * (b - a);
        let h = marginal_histogram(&samples, cfg.bins.unwrap_or(20), a - pad, b + pad)?;
        let exact = match beta {
            2 => {
                let t = build_recurrence(
                    arc.clone(),
                    n,
                    default_order(n, v.m()),
                    &cfg.precision_config()?,
                )?;
                Some(bin_averages(&h.edges, |x| t.cd_kernel(x, x) / n as f64))
            }
            1 if n % 2 == 0 => {
                let t = build_recurrence(
                    arc.clone(),
                    n,
                    default_order(n, v.m()),
                    &cfg.precision_config()?,
                )?;
                let s = SkewMatrices::build(&t)?;
                Some(bin_averages(&h.edges, |x| s.beta1_density(x)))
            }
            _ => {
                warnings.push(format!("no exact marginal for β = {beta}, n = {n}"));
                None
            }
        };
        // batch means say nothing about bins with a handful of counts, so
        // the error never drops below the Poisson error of the exact count
        let width = h.edges[1] - h.edges[0];
        let points = (samples.len() * n) as f64;
        let gaps = exact.as_ref().map(|e| {
            e.iter()
                .zip(&h.density)
                .zip(&h.std_error)
                .map(|((x, d), s)| {
                    let poisson = (x * width * points).max(1.0).sqrt() / (points * width);
                    (d - x).abs() / s.max(poisson)
                })
                .collect::<Vec<f64>>()
        });
        let max_gap = gaps
            .as_ref()
            .map(|g| g.iter().fold(0.0f64, |m, v| m.max(*v)));
        Some(MarginalOut {
            histogram: h,
            exact,
            gap_in_std_errors: gaps,
            max_gap_in_std_errors: max_gap,
        })
    } else {
        None
    };

    if cfg.dump.unwrap_or(false) {
        let cols: Vec<String> = (1..=n).map(|i| format!("lambda_{i}")).collect();
        let cols: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
        let rows: Vec<Vec<f64>> = samples.iter().map(|c| c.to_vec()).collect();
        out.csv("samples.csv", &cols, &rows)?;
    }
    out.json(
        "sample.json",
        &SampleOut {
            config: chain,
            acceptance: samples.acceptance.clone(),
            widths: samples.widths.clone(),
            recorded: samples.len(),
            statistics,
            resolvent,
            marginal,
            warnings,
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct VerifyOut {
    tier: Tier,
    passed: bool,
    criteria: Vec<CriterionOutcome>,
}

pub fn verify(cfg: &RunConfig, out: &Output) -> CliResult<u8> {
    let tier: Tier = cfg.tier.as_deref().unwrap_or("fast").parse()?;
    let only: Vec<usize> = match &cfg.only {
        Some(s) => parse_list(s, "--only")?,
        None => Vec::new(),
    };
    let tamper: Vec<usize> = match &cfg.tamper {
        Some(s) => parse_list(s, "--tamper")?,
        None => Vec::new(),
    };
    if let Some(bad) = only
        .iter()
        .chain(&tamper)
        .find(|&&id| !(1..=11).contains(&id))
    {
        return usage(format!("no criterion {bad} (1..=11)"));
    }
    let outcomes = run_suite(tier, &only, &tamper)?;
    for o in &outcomes {
        println!("{}", o.summary());
    }
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{} ({})", o.id, o.name))
        .collect();
    out.json(
        "verify.json",
        &VerifyOut {
            tier,
            passed: failed.is_empty(),
            criteria: outcomes,
        },
    )?;
    if failed.is_empty() {
        println!("all criteria pass");
        Ok(0)
    } else {
        println!("failed criteria: {}", failed.join(", "));
        Ok(2)
    }
}
