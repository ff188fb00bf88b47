use multicut::ensemble_mc::log_density;
use multicut::potential::PolynomialPotential;
use multicut::universality::{lambda_conjugate, sine_matrix_kernel};
use proptest::prelude::*;

fn det(a: [[f64; 2]; 2]) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

proptest! {
    #[test]
    fn conjugation_preserves_determinant_and_inverts(
        e in prop::array::uniform4(-5.0f64..5.0),
        lam in 0.05f64..20.0,
    ) {
        let a = [[e[0], e[1]], [e[2], e[3]]];
        let c = lambda_conjugate(a, lam).unwrap();
        prop_assert!((det(c) - det(a)).abs() <= 1e-12 * (1.0 + det(a).abs() + 25.0));
        let back = lambda_conjugate(c, 1.0 / lam).unwrap();
        for r in 0..2 {
            for k in 0..2 {
                prop_assert!((back[r][k] - a[r][k]).abs() <= 1e-12 * (1.0 + a[r][k].abs()) * lam.max(1.0 / lam));
            }
        }
    }

    #[test]
    fn log_density_is_permutation_invariant(
        mut lam in prop::collection::vec(-3.0f64..3.0, 2..8),
        beta in prop::sample::select(vec![1u32, 2, 4]),
        rot in 0usize..8,
    ) {
        let v = PolynomialPotential::new(vec![0.0, 0.3, 0.5, 0.0, 0.1]).unwrap();
        let n = lam.len();
        let a = log_density(&v, n, beta, &lam);
        lam.rotate_left(rot % n);
        lam.swap(0, n - 1);
        let b = log_density(&v, n, beta, &lam);
        prop_assert!(a == b || (a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn sine_matrix_kernel_symmetries(xi in -6.0f64..6.0, eta in -6.0f64..6.0) {
        let k2 = sine_matrix_kernel(2, xi, eta).unwrap().entries;
        let k2t = sine_matrix_kernel(2, eta, xi).unwrap().entries;
        prop_assert!((k2[0][0] - k2t[0][0]).abs() < 1e-14);
        for beta in [1u32, 4] {
            let k = sine_matrix_kernel(beta, xi, eta).unwrap().entries;
            let kt = sine_matrix_kernel(beta, eta, xi).unwrap().entries;
            // off-diagonal entries are odd under exchange, the diagonal ones swap
            prop_assert!((k[0][1] + kt[0][1]).abs() < 1e-12);
            prop_assert!((k[1][0] + kt[1][0]).abs() < 1e-12);
            prop_assert!((k[0][0] - kt[1][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn potential_parse_round_trip(c in prop::collection::vec(-10.0f64..10.0, 3..6), lead in 0.1f64..2.0) {
        let mut coeffs = c.clone();
        // even degree with positive leading coefficient
        if coeffs.len() % 2 == 0 {
            coeffs.push(lead);
        } else {
            *coeffs.last_mut().unwrap() = lead;
        }
        let text: Vec<String> = coeffs.iter().map(|x| format!("{x:?}")).collect();
        let v = PolynomialPotential::parse(&text.join(",")).unwrap();
        prop_assert_eq!(v.coeffs(), &coeffs[..]);
    }
}
