use freeprob::free_arithmetic::*;
use freeprob::measure::l1_distance;
use freeprob::series::{free_add_series, free_multiply_series};
use freeprob::stieltjes::ContourSpec;
use freeprob::{make_law, Atom, Complex64, LawSpec, SpectralMeasure};

fn law(spec: LawSpec) -> SpectralMeasure {
    make_law(&spec, 2000).unwrap()
}

fn semicircle(sigma: f64) -> SpectralMeasure {
    law(LawSpec::Semicircle { sigma })
}

fn bernoulli() -> SpectralMeasure {
    law(LawSpec::TwoAtom { p: 0.5, x1: -1.0, x2: 1.0 })
}

fn mp(ratio: f64) -> SpectralMeasure {
    law(LawSpec::MarchenkoPastur { ratio })
}

fn add(a: &SpectralMeasure, b: &SpectralMeasure) -> SpectralMeasure {
    free_add(a, b, &add_contour(a, b).unwrap()).unwrap()
}

fn mul(a: &SpectralMeasure, b: &SpectralMeasure) -> SpectralMeasure {
    free_multiply(a, b, &mul_contour(a, b).unwrap()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn r_transform_examples() {
    let c = 1.3;
    let w = Complex64::new(0.2, -0.4);
    assert!((r_transform(&SpectralMeasure::dirac(c), w).unwrap() - c).norm() < 1e-12);
    assert!(r_transform(&SpectralMeasure::dirac(0.0), w).unwrap().norm() < 1e-12);

    let sc = make_law(&LawSpec::Semicircle { sigma: 1.0 }, 16000).unwrap();
    let w = Complex64::new(0.0, -0.1);
    assert!((r_transform(&sc, w).unwrap() - w).norm() < 1e-6);
    // R(w) → κ₁ at small |w|.
    let m = mp(0.5);
    let r = RTransformEvaluator { mu: &m }.eval(Complex64::new(0.0, -1e-4)).unwrap();
    assert!((r - m.mean()).norm() < 1e-3);
}

#[test]
fn h_function_examples() {
    let one = SpectralMeasure::dirac(1.0);
    assert!((h_function(&one, Complex64::new(3.0, 0.0)).unwrap() - 1.5).norm() < 1e-14);
    assert!((invert_h(&one, Complex64::new(1.5, 0.0)).unwrap() - 3.0).norm() < 1e-12);

    let m = mp(1.0);
    let ev = HTransformEvaluator { mu: &m };
    let h = Complex64::new(1.0, 0.0) + Complex64::new(-1.0, -1.0) * 0.1;
    let lam = ev.inverse(h).unwrap();
    assert!((ev.h(lam).unwrap() - h).norm() <= 1e-10);
    // h → 1 far out.
    assert!((ev.h(Complex64::new(0.0, 1e6)).unwrap() - 1.0).norm() < 1e-5);
}

#[test]
fn invert_h_rejects_zero_mean() {
    assert!(invert_h(&semicircle(1.0), Complex64::new(1.1, -0.1)).is_err());
}

#[test]
fn adding_an_atom_shifts() {
    let mu = law(LawSpec::Uniform { lo: -1.0, hi: 1.0 });
    let out = add(&mu, &SpectralMeasure::dirac(0.7));
    assert!(l1_distance(&out, &mu.affine_map(1.0, 0.7).unwrap()) <= 1e-2);
}

#[test]
fn zero_is_the_additive_identity() {
    let mu = mp(0.5);
    assert!(l1_distance(&add(&mu, &SpectralMeasure::dirac(0.0)), &mu) <= 1e-2);
}

#[test]
fn semicircles_add_variances() {
    let out = add(&semicircle(1.0), &semicircle(1.0));
    assert!(l1_distance(&out, &semicircle(2f64.sqrt())) <= 2e-2);
}

#[test]
fn bernoulli_sum_has_central_binomial_moments() {
    let b = bernoulli();
    let out = add(&b, &b);
    for (n, want) in [(2, 2.0), (4, 6.0), (6, 20.0)] {
        assert!(rel(out.moment(n), want) < 1e-2, "m{n} = {}", out.moment(n));
    }
}

#[test]
fn addition_is_commutative_and_additive_in_mean_and_variance() {
    let a = mp(0.5);
    let b = law(LawSpec::Uniform { lo: -1.0, hi: 2.0 });
    let ab = add(&a, &b);
    let ba = add(&b, &a);
    assert!(l1_distance(&ab, &ba) <= 1e-3);
    assert!((ab.mean() - a.mean() - b.mean()).abs() <= 1e-3);
    assert!((ab.variance() - a.variance() - b.variance()).abs() <= 1e-3);
}

#[test]
fn addition_is_associative() {
    let a = semicircle(1.0);
    let b = law(LawSpec::Uniform { lo: -1.0, hi: 1.0 });
    let c = law(LawSpec::Arcsine { half_width: 1.0 });
    let left = add(&add(&a, &b), &c);
    let right = add(&a, &add(&b, &c));
    assert!(l1_distance(&left, &right) <= 2e-2);
}

#[test]
fn pastur_from_zero_is_semicircle() {
    let zero = SpectralMeasure::dirac(0.0);
    let out = pastur_add_gaussian(&zero, 1.0, &pastur_contour(&zero, 1.0).unwrap()).unwrap();
    assert!(l1_distance(&out, &semicircle(1.0)) <= 1e-2);
}

#[test]
fn pastur_with_vanishing_noise_is_identity() {
    let mu = semicircle(1.0);
    let sigma = 1e-6;
    let out = pastur_add_gaussian(&mu, sigma, &pastur_contour(&mu, sigma).unwrap()).unwrap();
    assert!(l1_distance(&out, &mu) <= 2e-2);
}

#[test]
fn pastur_matches_free_addition() {
    let b = bernoulli();
    let contour = pastur_contour(&b, 1.0).unwrap();
    let pastur = pastur_add_gaussian(&b, 1.0, &contour).unwrap();
    let general = free_add(&b, &semicircle(1.0), &contour).unwrap();
    assert!(l1_distance(&pastur, &general) <= 1e-2);
}

#[test]
fn pastur_rejects_nonpositive_sigma() {
    let b = bernoulli();
    let contour = pastur_contour(&b, 1.0).unwrap();
    assert!(pastur_add_gaussian(&b, 0.0, &contour).unwrap_err().is_validation());
}

#[test]
fn multiplying_by_atoms_scales() {
    let mu = mp(0.5);
    assert!(l1_distance(&mul(&mu, &SpectralMeasure::dirac(1.0)), &mu) <= 1e-2);
    let out = mul(&mu, &SpectralMeasure::dirac(2.0));
    assert!(l1_distance(&out, &mu.affine_map(2.0, 0.0).unwrap()) <= 1e-2);
}

#[test]
fn marchenko_pastur_square_has_fuss_catalan_moments() {
    let m = mp(1.0);
    let out = mul(&m, &m);
    for (n, want) in [(1, 1.0), (2, 3.0), (3, 12.0), (4, 55.0)] {
        assert!(rel(out.moment(n), want) < 1e-2, "m{n} = {}", out.moment(n));
    }
    assert!(rel(out.mean(), m.mean() * m.mean()) < 1e-3);
}

#[test]
fn multiplication_is_commutative() {
    let a = mp(0.5);
    let b = law(LawSpec::Uniform { lo: 0.5, hi: 1.5 });
    let ab = mul(&a, &b);
    let ba = mul(&b, &a);
    assert!(l1_distance(&ab, &ba) <= 1e-3);
    assert!(rel(ab.mean(), a.mean() * b.mean()) < 1e-3);
}

#[test]
fn multiplication_rejects_negative_support_and_zero_mass() {
    let sc = semicircle(1.0);
    let m = mp(0.5);
    let contour = ContourSpec::uniform(-1.0, 5.0, 100).unwrap();
    assert!(free_multiply(&sc, &m, &contour).unwrap_err().is_validation());
    let zero = SpectralMeasure::dirac(0.0);
    assert!(free_multiply(&zero, &m, &contour).unwrap_err().is_validation());
}

#[test]
fn pipeline_moments_follow_the_series_oracle() {
    let a = law(LawSpec::AtomList {
        atoms: vec![Atom::new(-1.0, 0.25), Atom::new(0.5, 0.5), Atom::new(2.0, 0.25)],
    });
    let b = law(LawSpec::Arcsine { half_width: 1.0 });
    let out = add(&a, &b);
    let want = free_add_series(&a.moments(8), &b.moments(8)).unwrap();
    for n in 1..=8 {
        let scale = want.get(n).abs().max(1.0);
        assert!((out.moment(n as u32) - want.get(n)).abs() / scale < 1e-3, "n={n}");
    }

    let c = mp(0.5);
    let d = law(LawSpec::TwoAtom { p: 0.5, x1: 1.0, x2: 3.0 });
    let out = mul(&c, &d);
    let want = free_multiply_series(&c.moments(8), &d.moments(8)).unwrap();
    for n in 1..=8 {
        assert!(rel(out.moment(n as u32), want.get(n)) < 1e-3, "n={n}");
    }
}

#[test]
fn transform_moments_match_output_moments() {
    let a = mp(0.5);
    let b = semicircle(1.0);
    let ev = FreeSum::new(&a, &b);
    let laurent = transform_moments(&ev, 6, freeprob::par::Exec::default()).unwrap();
    let want = free_add_series(&a.moments(6), &b.moments(6)).unwrap();
    for n in 1..=6 {
        assert!((laurent[n - 1] - want.get(n)).abs() < 1e-6 * want.get(n).abs().max(1.0), "n={n}");
    }
}

#[test]
fn pipelines_are_herglotz() {
    let a = mp(0.5);
    let b = bernoulli();
    let probes: Vec<Complex64> = (0..40)
        .map(|k| Complex64::new(-4.0 + 0.2 * k as f64, 0.01 + 0.1 * (k % 7) as f64))
        .collect();
    assert_eq!(herglotz_violations(&FreeSum::new(&a, &b), &probes), 0);
    assert_eq!(herglotz_violations(&GaussianSum::new(&b, 1.0).unwrap(), &probes), 0);
    assert_eq!(herglotz_violations(&FreeProduct::new(&a, &a).unwrap(), &probes), 0);
}

#[test]
fn external_field_lambda_examples() {
    let zero = ExternalFieldSpec::zero();
    assert!((external_field_lambda_gaussian(1.0, &zero, 0.5).unwrap() - 2.5).abs() < 1e-12);
    let field = ExternalFieldSpec::new(bernoulli());
    assert!((external_field_lambda_gaussian(1.0, &field, 2.0).unwrap() - 8.0 / 3.0).abs() < 1e-12);
    let pv = freeprob::stieltjes::principal_value_transform(&field.measure_a, 0.3).unwrap();
    assert_eq!(external_field_lambda_gaussian(0.0, &field, 0.3).unwrap(), pv);
    assert!(external_field_lambda_gaussian(1.0, &field, 1.0).is_err());
}

#[test]
fn generalized_addition_residuals_vanish() {
    let r = verify_generalized_addition_gaussian(1.0, 1.0, &ExternalFieldSpec::zero(), &[0.3, 0.7, 1.5]).unwrap();
    assert!(r.passed());
    let field = ExternalFieldSpec::new(bernoulli());
    let r = verify_generalized_addition_gaussian(2.0, 3.0, &field, &[-2.5, -0.4, 0.1, 0.9, 3.0]).unwrap();
    assert!(r.passed(), "{:?}", r.metrics);
}

#[test]
fn external_field_eigenvalues_are_quantiles() {
    let field = ExternalFieldSpec::new(bernoulli());
    let a = field.eigenvalues(8);
    assert_eq!(a, vec![-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0]);
}
