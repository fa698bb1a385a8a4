//! Every runnable example, executed and checked.

#[allow(dead_code)]
#[path = "../examples/bell_sandwich.rs"]
mod bell_sandwich;
#[allow(dead_code)]
#[path = "../examples/poisson_moments.rs"]
mod poisson_moments;
#[allow(dead_code)]
#[path = "../examples/one_dim_bounds.rs"]
mod one_dim_bounds;
#[allow(dead_code)]
#[path = "../examples/kernel_approximation.rs"]
mod kernel_approximation;
#[allow(dead_code)]
#[path = "../examples/multisum_bound.rs"]
mod multisum_bound;
#[allow(dead_code)]
#[path = "../examples/nonrect_bound.rs"]
mod nonrect_bound;
#[allow(dead_code)]
#[path = "../examples/tail_bounds.rs"]
mod tail_bounds;
#[allow(dead_code)]
#[path = "../examples/monte_carlo_verify.rs"]
mod monte_carlo_verify;
#[allow(dead_code)]
#[path = "../examples/dominance_battery.rs"]
mod dominance_battery;
#[allow(dead_code)]
#[path = "../examples/product_kernel_ratio.rs"]
mod product_kernel_ratio;

#[test]
fn bell_sandwich_runs() {
    let s = bell_sandwich::run_example().unwrap();
    assert_eq!(s.violations, 0);
    assert!((s.points[2].b / 115_975.0 - 1.0).abs() < 1e-10);
    for r in &s.points {
        assert!(r.b_root <= r.g_upper);
    }
}

#[test]
fn poisson_moments_agree() {
    for r in poisson_moments::run_example().unwrap() {
        assert!((r.estimate - r.exact_root).abs() <= 4.0 * r.stderr, "p={}", r.p);
    }
}

#[test]
fn one_dim_bounds_are_ordered() {
    let s = one_dim_bounds::run_example().unwrap();
    assert!((s.iid.theta - 1.70998).abs() < 1e-4);
    assert!(s.sup_over_n >= s.iid.theta);
    // the class extremum can never exceed Rosenthal–Bell
    assert!(s.schechtman <= s.heterogeneous.rosenthal);
}

#[test]
fn nmf_never_beats_spectral() {
    let rows = kernel_approximation::run_example().unwrap();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert!(r.nmf_residual_l2 >= r.spectral_residual_l2 * (1.0 - 1e-6));
    }
    assert!(rows.windows(2).all(|w| w[1].nmf_residual_l2 <= w[0].nmf_residual_l2 + 1e-12));
}

#[test]
fn multisum_never_exceeds_trivial() {
    for (_, b) in multisum_bound::run_example().unwrap() {
        assert!(b.chosen <= b.trivial);
    }
}

#[test]
fn nonrect_bound_dominates_exact() {
    let s = nonrect_bound::run_example().unwrap();
    assert!(s.exact <= s.bound.value);
    assert!(s.widened.value <= s.bound.value);
    assert!((s.bound.ratio - 9.0 / 7.0).abs() < 1e-12);
}

#[test]
fn tail_example_values() {
    let s = tail_bounds::run_example().unwrap();
    assert!((s.conjugate_at_2 - 4.0).abs() < 1e-6);
    assert_eq!(s.combined, (1.0, 0.0));
    // exact Poisson(1) tail P(τ ≥ 8)
    let exact: f64 = (8..40usize).map(|k| (-1.0 - ubound::special::ln_factorial(k)).exp()).sum();
    assert!(exact <= s.curve.bounds[2]);
}

#[test]
fn monte_carlo_example_passes() {
    let r = monte_carlo_verify::run_example().unwrap();
    assert_eq!(r.moments.len(), 3);
}

#[test]
fn reduced_battery_has_no_failures() {
    let r = dominance_battery::run_example().unwrap();
    assert_eq!(r.failures(), 0);
}

#[test]
fn product_ratio_is_bounded() {
    let r = product_kernel_ratio::run_example().unwrap();
    assert!(r.lower_min > 0.0 && r.upper_max.is_finite());
    assert!(r.rows.iter().all(|row| row.lower_ratio <= row.upper_ratio));
}
