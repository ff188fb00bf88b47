use multicut::ensemble_mc::{
    linear_statistic, marginal_histogram, run_chain, ChainConfig, Histogram,
};
use multicut::numerics::{gauss_legendre, PrecisionConfig};
use multicut::orthopoly::{build_recurrence, default_order, RecurrenceTable};
use multicut::potential::{PolynomialPotential, Potential};
use multicut::skew::SkewMatrices;
use std::sync::Arc;

fn gaussian_table(n: usize) -> RecurrenceTable {
    let v: Arc<dyn Potential> = Arc::new(PolynomialPotential::gaussian());
    build_recurrence(v, n, default_order(n, 1), &PrecisionConfig::default()).unwrap()
}

/// Largest bin gap against bin averages of `exact`, in units of the batch-means
/// error floored at the Poisson error of the exact count.
fn worst_gap<F: Fn(f64) -> f64>(h: &Histogram, points: f64, exact: F) -> f64 {
    let (x, w) = gauss_legendre(16);
    let mut worst = 0.0f64;
    for (b, pair) in h.edges.windows(2).enumerate() {
        let (a, c) = (pair[0], pair[1]);
        let avg: f64 = x
            .iter()
            .zip(&w)
            .map(|(&t, &wt)| 0.5 * wt * exact(0.5 * (a + c) + 0.5 * (c - a) * t))
            .sum();
        let width = c - a;
        let se = h.std_error[b].max((avg * width * points).max(1.0).sqrt() / (points * width));
        worst = worst.max((h.density[b] - avg).abs() / se);
    }
    worst
}

#[test]
fn beta2_marginal_and_mean_match_determinantal_oracle() {
    let n = 16;
    let table = gaussian_table(n);
    let s = run_chain(
        Arc::new(PolynomialPotential::gaussian()),
        &ChainConfig::new(n, 2, 20_000, 1_000, 5),
    )
    .unwrap();
    let h = marginal_histogram(&s, 20, -2.6, 2.6).unwrap();
    let gap = worst_gap(&h, (s.len() * n) as f64, |x| {
        table.cd_kernel(x, x) / n as f64
    });
    assert!(gap <= 4.0, "β = 2 histogram gap {gap} standard errors");

    let phi = |x: f64| (x + 0.4).cos();
    let st = linear_statistic(&s, phi);
    let (mean, _) = multicut::orthopoly::beta2_linear_statistic(&table, phi).unwrap();
    assert!(
        (st.mean - mean).abs() <= 3.0 * st.std_error,
        "{} vs {mean} ± {}",
        st.mean,
        st.std_error
    );
}

#[test]
fn beta1_marginal_matches_skew_kernel() {
    let n = 16;
    let skew = SkewMatrices::build(&gaussian_table(n)).unwrap();
    let s = run_chain(
        Arc::new(PolynomialPotential::gaussian()),
        &ChainConfig::new(n, 1, 20_000, 1_000, 6),
    )
    .unwrap();
    let h = marginal_histogram(&s, 20, -2.6, 2.6).unwrap();
    let gap = worst_gap(&h, (s.len() * n) as f64, |x| skew.beta1_density(x));
    assert!(gap <= 4.0, "β = 1 histogram gap {gap} standard errors");

    let phi = |x: f64| (std::f64::consts::PI * x / 3.0).sin() + 0.3 * x * x;
    let st = linear_statistic(&s, phi);
    let (mean, var) = skew.beta1_linear_statistic(phi).unwrap();
    assert!(
        (st.mean - mean).abs() <= 3.0 * st.std_error,
        "{} vs {mean}",
        st.mean
    );
    assert!(
        (st.variance - var).abs() <= 3.0 * st.variance_std_error,
        "{} vs {var}",
        st.variance
    );
}
