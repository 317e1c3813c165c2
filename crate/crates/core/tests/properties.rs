use freeprob::measure::{ks_distance, wasserstein1};
use freeprob::rmt::{sample_ensemble, EnsembleSpec, HermitianMatrix};
use freeprob::series::{
    free_add_series, free_cumulants_to_moments, free_multiply_series, free_multiply_series_composed,
    moments_to_free_cumulants, FreeCumulantVector,
};
use freeprob::stieltjes::{cauchy_transform, invert_cauchy};
use freeprob::{make_law, Atom, Complex64, LawSpec, MomentVector, SpectralMeasure};
use proptest::prelude::*;

const GRID: usize = 400;

fn catalog_spec() -> impl Strategy<Value = LawSpec> {
    prop_oneof![
        (0.3..2.0f64).prop_map(|sigma| LawSpec::Semicircle { sigma }),
        (0.2..3.0f64).prop_map(|ratio| LawSpec::MarchenkoPastur { ratio }),
        (0.05..0.95f64, -2.0..0.0f64, 0.1..2.0f64).prop_map(|(p, x1, x2)| LawSpec::TwoAtom { p, x1, x2 }),
        (0.3..2.0f64).prop_map(|half_width| LawSpec::Arcsine { half_width }),
        (-2.0..1.0f64, 0.2..2.0f64).prop_map(|(lo, w)| LawSpec::Uniform { lo, hi: lo + w }),
    ]
}

fn catalog_law() -> impl Strategy<Value = SpectralMeasure> {
    catalog_spec().prop_map(|s| make_law(&s, GRID).unwrap())
}

/// Moments of a random atomic law on `(0, 3]`.
fn positive_moments(order: usize) -> impl Strategy<Value = MomentVector> {
    prop::collection::vec((0.1..3.0f64, 0.1..1.0f64), 1..5).prop_map(move |pairs| {
        let atoms: Vec<Atom> = pairs.iter().map(|&(x, w)| Atom::new(x, w)).collect();
        let total: f64 = atoms.iter().map(|a| a.w).sum();
        let m = (1..=order)
            .map(|n| atoms.iter().map(|a| a.w * a.x.powi(n as i32)).sum::<f64>() / total)
            .collect();
        MomentVector::new(m)
    })
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0))
}

/// Moments rebuilt from `|κ|` summed over the inputs: the size of the terms
/// cancelling in each moment, hence the floating-point error scale.
fn cancellation_scale(inputs: &[&MomentVector]) -> Vec<f64> {
    let order = inputs[0].order();
    let kappa = (0..order)
        .map(|i| inputs.iter().map(|m| moments_to_free_cumulants(m).as_slice()[i].abs()).sum())
        .collect();
    free_cumulants_to_moments(&FreeCumulantVector::new(kappa)).as_slice().iter().map(|x| x.max(1.0)).collect()
}

fn close_at_scale(a: &[f64], b: &[f64], scale: &[f64], tol: f64) -> bool {
    a.iter().zip(b).zip(scale).all(|((x, y), s)| (x - y).abs() <= tol * s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn catalog_laws_are_normalized(spec in catalog_spec()) {
        let mu = make_law(&spec, GRID).unwrap();
        prop_assert!((mu.mass() - 1.0).abs() <= 1e-9);
        for s in mu.segments() {
            prop_assert!(s.density().iter().all(|d| *d >= 0.0));
        }
    }

    #[test]
    fn affine_map_moves_the_mean(mu in catalog_law(), s in -3.0..3.0f64, t in -5.0..5.0f64) {
        prop_assume!(s.abs() > 1e-3);
        let moved = mu.affine_map(s, t).unwrap();
        prop_assert!((moved.moment(1) - (s * mu.moment(1) + t)).abs() <= 1e-10 * (1.0 + t.abs() + s.abs()));
    }

    #[test]
    fn cdf_is_monotone(mu in catalog_law(), mut probes in prop::collection::vec(-6.0..6.0f64, 2..40)) {
        probes.sort_by(f64::total_cmp);
        let values: Vec<f64> = probes.iter().map(|&x| mu.cdf(x)).collect();
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((mu.cdf(f64::INFINITY) - 1.0).abs() <= 1e-12);
        prop_assert!(mu.cdf(f64::NEG_INFINITY).abs() <= 1e-12);
    }

    #[test]
    fn distances_are_metrics(a in catalog_law(), b in catalog_law(), c in catalog_law()) {
        for d in [wasserstein1, ks_distance] {
            let (ab, ba, bc, ac) = (d(&a, &b), d(&b, &a), d(&b, &c), d(&a, &c));
            prop_assert!((ab - ba).abs() <= 1e-9);
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!(d(&a, &a) <= 1e-9);
        }
    }

    #[test]
    fn cauchy_transform_is_herglotz(mu in catalog_law(), re in -6.0..6.0f64, im in 1e-3..10.0f64) {
        let g = cauchy_transform(&mu, Complex64::new(re, im)).unwrap();
        prop_assert!(g.im < 0.0, "G = {g}");
    }

    #[test]
    fn cauchy_transform_decays_like_one_over_z(mu in catalog_law(), k in 0..8usize) {
        let z = Complex64::from_polar(1e3, (k as f64 + 0.5) * std::f64::consts::PI / 8.0);
        let abs_mean = wasserstein1(&mu, &SpectralMeasure::dirac(0.0));
        let g = cauchy_transform(&mu, z).unwrap();
        prop_assert!((z * g - 1.0).norm() <= 2.0 * abs_mean / z.norm());
    }

    #[test]
    fn cauchy_inversion_round_trips(spec in catalog_spec(), re in -4.0..4.0f64, im in 0.5..5.0f64) {
        let mu = make_law(&spec, GRID).unwrap();
        let z = Complex64::new(re, im);
        let w = cauchy_transform(&mu, z).unwrap();
        let back = invert_cauchy(&mu, w).unwrap();
        if spec.has_continuous_part() {
            prop_assert!((back - z).norm() <= 1e-8 * z.norm().max(1.0), "{back} vs {z}");
        } else {
            // With n atoms, G(λ) = w has n roots in the upper half-plane.
            prop_assert!(back.im > 0.0);
            prop_assert!((cauchy_transform(&mu, back).unwrap() - w).norm() <= 1e-12 * w.norm().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cumulants_round_trip(kappa in prop::collection::vec(-2.0..2.0f64, 1..=12)) {
        let k = FreeCumulantVector::new(kappa.clone());
        let m = free_cumulants_to_moments(&k);
        let back = moments_to_free_cumulants(&m);
        prop_assert!(close_at_scale(back.as_slice(), &kappa, &cancellation_scale(&[&m]), 1e-12));
    }

    #[test]
    fn series_addition_is_commutative_and_associative(
        a in prop::collection::vec(-1.5..1.5f64, 10),
        b in prop::collection::vec(-1.5..1.5f64, 10),
        c in prop::collection::vec(-1.5..1.5f64, 10),
    ) {
        let (a, b, c) = (MomentVector::new(a), MomentVector::new(b), MomentVector::new(c));
        let scale = cancellation_scale(&[&a, &b, &c]);
        let ab = free_add_series(&a, &b).unwrap();
        prop_assert_eq!(&ab, &free_add_series(&b, &a).unwrap());
        let left = free_add_series(&ab, &c).unwrap();
        let right = free_add_series(&a, &free_add_series(&b, &c).unwrap()).unwrap();
        prop_assert!(close_at_scale(left.as_slice(), right.as_slice(), &scale, 1e-12));
    }

    #[test]
    fn composition_route_matches_s_transform(a in positive_moments(10), b in positive_moments(10)) {
        let via_s = free_multiply_series(&a, &b).unwrap();
        let via_composition = free_multiply_series_composed(&a, &b).unwrap();
        prop_assert!(rel_close(via_s.as_slice(), via_composition.as_slice(), 1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eigenvalues_preserve_trace_and_frobenius(dim in 2..40usize, seed in any::<u64>(), trial in 0..64usize) {
        let m: HermitianMatrix = sample_ensemble(&EnsembleSpec::gue(1.0, dim, seed).unwrap(), trial).unwrap();
        let ev = m.eigenvalues().unwrap();
        let max_abs = m.matrix().max_abs();
        prop_assert!((ev.iter().sum::<f64>() - m.trace()).abs() <= 1e-8 * dim as f64 * max_abs);
        let fro = m.matrix().frobenius();
        prop_assert!((ev.iter().map(|x| x * x).sum::<f64>() - fro * fro).abs() <= 1e-10 * fro * fro);
    }

    #[test]
    fn sampling_is_reproducible(dim in 2..24usize, seed in any::<u64>(), trial in 0..1000usize) {
        let spec = EnsembleSpec::wishart(0.5, dim, seed).unwrap();
        let first = sample_ensemble(&spec, trial).unwrap();
        prop_assert_eq!(&first, &sample_ensemble(&spec, trial).unwrap());
        prop_assert_ne!(&first, &sample_ensemble(&spec, trial + 1).unwrap());
    }
}
