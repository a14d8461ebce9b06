use approx::assert_relative_eq;
use equiwave::admissibility::{
    check_admissibility, check_perturbation, compute_h_tilde, estimate_h_infinity, PerturbationMode, DEFAULT_EPS_MAX,
};
use equiwave::profiles::{MetricKind, MetricProfile};
use equiwave::reduction::{compute_v, weight_w, Indices};
use num_rational::Ratio;

fn sinh_perturbed(amplitude: f64) -> MetricProfile {
    MetricProfile::new(MetricKind::SinhPerturbed { amplitude }).unwrap()
}

#[test]
fn model_manifolds_are_admissible() {
    for n in 3..=5 {
        for p in [MetricProfile::flat(), MetricProfile::hyperbolic(), sinh_perturbed(0.01)] {
            let rep = check_admissibility(&p, n).unwrap();
            assert!(rep.all_pass(), "{} n={n}: {:?}", p.label(), rep.conditions);
        }
    }
    for power in [1.0, 2.0] {
        let p = MetricProfile::new(MetricKind::PolynomialGrowth { power, eps: 0.05 }).unwrap();
        assert!(check_admissibility(&p, 3).unwrap().all_pass());
    }
}

#[test]
fn sin_profile_fails_with_a_witness() {
    let rep = check_admissibility(&MetricProfile::custom("sin(r)").unwrap(), 3).unwrap();
    let c = rep.condition("cond_iii").unwrap();
    assert!(!c.verdict.is_pass());
    let r = c.witness_r.unwrap();
    assert!(r > 0.0 && r < std::f64::consts::PI * 2.0, "witness {r}");
}

#[test]
fn h_infinity_baselines() {
    assert_eq!(estimate_h_infinity(&MetricProfile::flat(), 3).unwrap().value, 0.0);
    for n in 3..=5 {
        let expected = ((n as f64 - 1.0) / 2.0).powi(2);
        assert_relative_eq!(estimate_h_infinity(&MetricProfile::hyperbolic(), n).unwrap().value, expected, epsilon = 1e-6);
    }
}

#[test]
fn reduced_quantities_at_unit_radius() {
    // n=3, k=1 on sinh r: w = 1/sinh 1 and V = 1 + 2 (1/sinh^2 1 - 1).
    let s = 1f64.sinh();
    assert_relative_eq!(weight_w(&MetricProfile::hyperbolic(), 3, 1, 1.0).unwrap(), 1.0 / s, max_relative = 1e-12);
    let v = compute_v(&MetricProfile::hyperbolic(), 3, 1, 1.0).unwrap();
    assert_relative_eq!(v, 1.0 + 2.0 * (1.0 / (s * s) - 1.0), max_relative = 1e-10);
    assert!((v - 0.448124).abs() < 1e-6);
    assert!((weight_w(&MetricProfile::hyperbolic(), 3, 1, 1.0).unwrap() - 0.85092).abs() < 1e-5);
}

#[test]
fn exponential_profile_h_tilde_at_one() {
    // e^r - 1, n = 3: H = h_inf + 2 (2e - 2) / (4 (e - 1)^2) = 1 + 1/(e - 1).
    let p = MetricProfile::new(MetricKind::ExpGrowth { eps: 0.0 }).unwrap();
    let e = std::f64::consts::E;
    let expected = 1.0 + 2.0 * (2.0 * e - 2.0) / (4.0 * (e - 1.0) * (e - 1.0));
    assert_relative_eq!(compute_h_tilde(&p, 3, 1.0).unwrap(), expected, max_relative = 1e-10);
    assert!((expected - 1.58198).abs() < 1e-5);
}

#[test]
fn index_baselines() {
    let i = Indices::new(3, 1).unwrap();
    assert_eq!((i.m, i.p, i.q), (5, Ratio::from_integer(3), Ratio::from_integer(3)));
    assert!(Indices::wave_admissible(i.m, i.p, i.q));
    for (n, k) in [(4, 1), (3, 2)] {
        let i = Indices::new(n, k).unwrap();
        assert!(Indices::sobolev_line(i.m, i.p, i.q));
        assert_eq!(i.a_prime * 2, i.p);
        assert_eq!(i.b, i.q);
    }
}

#[test]
fn small_sinh_perturbation_is_accepted() {
    let rep = check_perturbation(&MetricProfile::hyperbolic(), &sinh_perturbed(0.001), PerturbationMode::Exponential, 3, DEFAULT_EPS_MAX)
        .unwrap();
    assert!(rep.all_pass(), "{:?}", rep.conditions);
    assert!(rep.epsilon_required < DEFAULT_EPS_MAX);
}

#[test]
fn perturbation_size_scales_with_amplitude() {
    let eps = |a: f64| {
        check_perturbation(&MetricProfile::hyperbolic(), &sinh_perturbed(a), PerturbationMode::Exponential, 3, DEFAULT_EPS_MAX)
            .unwrap()
            .epsilon_required
    };
    let (e1, e2) = (eps(0.001), eps(0.002));
    assert!((e2 / e1 - 2.0).abs() < 0.05, "{e1} {e2}");
}

#[test]
fn zero_perturbation_needs_no_smallness() {
    let rep = check_perturbation(&MetricProfile::hyperbolic(), &MetricProfile::hyperbolic(), PerturbationMode::Exponential, 3, DEFAULT_EPS_MAX)
        .unwrap();
    assert!(rep.all_pass());
    assert_eq!(rep.epsilon_required, 0.0);
}

#[test]
fn large_polynomial_perturbation_of_flat_space_fails() {
    let p = MetricProfile::custom("r + 0.5*r^2").unwrap();
    let rep = check_perturbation(&MetricProfile::flat(), &p, PerturbationMode::Polynomial, 3, DEFAULT_EPS_MAX);
    assert!(!rep.unwrap().all_pass());
}

#[test]
fn mode_must_match_the_base_growth() {
    assert!(check_perturbation(&MetricProfile::flat(), &sinh_perturbed(0.001), PerturbationMode::Exponential, 3, DEFAULT_EPS_MAX).is_err());
}
