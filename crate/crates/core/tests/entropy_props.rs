use mixnash::{entropy, kl_divergence, log_sum_exp, md_update, softmax, tv_norm, SimplexVector};
use proptest::prelude::*;

fn simplex(d: usize) -> impl Strategy<Value = SimplexVector> {
    prop::collection::vec(-4.0f64..4.0, d).prop_map(|v| SimplexVector::new(softmax(&v)).unwrap())
}

fn vector(d: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, d)
}

fn dims() -> impl Strategy<Value = usize> {
    2usize..12
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn steps_telescope((z, b1, b2) in dims().prop_flat_map(|d| (simplex(d), vector(d, 3.0), vector(d, 3.0))), eta in 0.01f64..2.0) {
        let two = md_update(&md_update(&z, &b1, eta).unwrap(), &b2, eta).unwrap();
        let sum: Vec<f64> = b1.iter().zip(&b2).map(|(a, b)| a + b).collect();
        let one = md_update(&z, &sum, eta).unwrap();
        prop_assert!(close(two.as_slice(), one.as_slice(), 1e-12));
    }

    #[test]
    fn constant_shift_is_invisible((z, b) in dims().prop_flat_map(|d| (simplex(d), vector(d, 3.0))), c in -50.0f64..50.0, eta in 0.01f64..2.0) {
        let shifted: Vec<f64> = b.iter().map(|x| x + c).collect();
        let a = md_update(&z, &b, eta).unwrap();
        let s = md_update(&z, &shifted, eta).unwrap();
        prop_assert!(close(a.as_slice(), s.as_slice(), 1e-12));
    }

    #[test]
    fn fenchel_pair((h, z) in dims().prop_flat_map(|d| (vector(d, 5.0), simplex(d)))) {
        let lse = log_sum_exp(&h).unwrap();
        let gibbs = SimplexVector::new(softmax(&h)).unwrap();
        let value = |p: &SimplexVector| p.as_slice().iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() - entropy(p);
        prop_assert!((lse - value(&gibbs)).abs() <= 1e-10);
        prop_assert!(value(&z) <= lse + 1e-12);
    }

    #[test]
    fn three_point_identity((x, y, z) in dims().prop_flat_map(|d| (simplex(d), simplex(d), simplex(d)))) {
        let lhs = kl_divergence(&x, &z).unwrap();
        let cross: f64 = (0..x.len()).map(|i| (x[i] - y[i]) * (y[i].ln() - z[i].ln())).sum();
        let rhs = kl_divergence(&x, &y).unwrap() + kl_divergence(&y, &z).unwrap() + cross;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    /// `∇Φ*` is 1-Lipschitz from sup-norm to ℓ1, i.e. ½-Lipschitz into
    /// half-ℓ1 TV. The ¼ constant does not hold; see
    /// `quarter_constant_is_violated` below.
    #[test]
    fn gibbs_map_is_half_lipschitz_in_tv((h, g) in dims().prop_flat_map(|d| (vector(d, 5.0), vector(d, 5.0)))) {
        let diff: Vec<f64> = softmax(&h).iter().zip(softmax(&g)).map(|(a, b)| a - b).collect();
        let sup = h.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(tv_norm(&diff) <= 0.5 * sup + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pinsker((z, w) in dims().prop_flat_map(|d| (simplex(d), simplex(d)))) {
        let diff: Vec<f64> = z.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a - b).collect();
        prop_assert!(kl_divergence(&z, &w).unwrap() >= 2.0 * tv_norm(&diff).powi(2) - 1e-12);
    }
}

#[test]
fn quarter_constant_is_violated() {
    let eps = 1e-3;
    let diff: Vec<f64> = softmax(&[eps, -eps]).iter().zip(softmax(&[0.0, 0.0])).map(|(a, b)| a - b).collect();
    // tv ≈ ε/2, twice the ¼-smoothness claim.
    assert!(tv_norm(&diff) > 0.25 * eps);
    assert!((tv_norm(&diff) - 0.5 * eps.tanh()).abs() < 1e-15);
}
