use plaquette::scaling::{collapse_quality, fit_log_sin, linear_fit, LogBase};
use plaquette::stabilizer::{build_cluster_state, commutator_matrix, induced_generators, Patch, Pauli};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn patch() -> impl Strategy<Value = Patch> {
    prop_oneof![Just(Patch::Open), Just(Patch::Cylinder), Just(Patch::Torus)]
}

fn op() -> impl Strategy<Value = char> {
    prop_oneof![Just('X'), Just('Y'), Just('Z')]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn measurements_keep_the_group_abelian_and_pure(
        lx in 1usize..7,
        ly in 1usize..7,
        patch in patch(),
        meas in proptest::collection::vec((0usize..36, op()), 0..30),
        seed in any::<u64>(),
        pick in proptest::collection::vec(any::<bool>(), 36),
    ) {
        let n = lx * ly;
        let mut t = build_cluster_state(lx, ly, patch);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (q, o) in meas {
            t.measure(&Pauli::single(n, q % n, o).unwrap(), &mut rng);
            prop_assert!(t.is_abelian());
        }
        prop_assert_eq!(t.rank(), n);
        let a: Vec<usize> = (0..n).filter(|&q| pick[q]).collect();
        let b: Vec<usize> = (0..n).filter(|&q| !pick[q]).collect();
        let s = t.entanglement_entropy(&a);
        prop_assert_eq!(s, t.entanglement_entropy(&b));
        prop_assert!(s >= 0.0 && s <= a.len().min(b.len()) as f64);
        prop_assert_eq!(s, s.round());
    }

    #[test]
    fn induced_group_commutes_with_the_observables(
        lx in 2usize..6,
        ly in 2usize..6,
        patch in patch(),
        meas in proptest::collection::btree_map(0usize..25, op(), 0..25),
    ) {
        let n = lx * ly;
        let t = build_cluster_state(lx, ly, patch);
        let obs: Vec<Pauli> = meas
            .iter()
            .filter(|(q, _)| **q < n)
            .map(|(&q, &o)| Pauli::single(n, q, o).unwrap())
            .collect();
        let induced = induced_generators(&t, &obs).unwrap();
        prop_assert!(induced.is_abelian());
        // Observables plus the commuting products account for every qubit.
        let p = commutator_matrix(&t, &obs).unwrap();
        prop_assert_eq!(induced.generators().len(), obs.len() + p.nullspace().cols());
        prop_assert_eq!(induced.rank(), n);
    }

    #[test]
    fn collapse_quality_ignores_affine_maps(
        ys in proptest::collection::vec(proptest::collection::vec(-5.0..5.0f64, 6), 2..4),
        a in 0.1..10.0f64,
        b in -10.0..10.0f64,
    ) {
        let groups: Vec<Vec<(f64, f64)>> = ys
            .iter()
            .enumerate()
            .map(|(k, g)| g.iter().enumerate().map(|(i, &y)| (i as f64 + 0.3 * k as f64, y)).collect())
            .collect();
        let mapped: Vec<Vec<(f64, f64)>> = groups
            .iter()
            .map(|g| g.iter().map(|&(x, y)| (x, a * y + b)).collect())
            .collect();
        let (q0, q1) = (collapse_quality(&groups), collapse_quality(&mapped));
        prop_assert!((q0 - q1).abs() <= 1e-8 * q0.abs().max(1.0), "{} vs {}", q0, q1);
    }

    #[test]
    fn linear_fit_recovers_lines(slope in -10.0..10.0f64, icpt in -10.0..10.0f64, n in 2usize..20) {
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.7 - 3.0).collect();
        let y: Vec<f64> = x.iter().map(|v| slope * v + icpt).collect();
        let (s, c) = linear_fit(&x, &y).unwrap();
        prop_assert!((s - slope).abs() < 1e-9 && (c - icpt).abs() < 1e-9);
    }

    #[test]
    fn log_sin_fit_is_reflection_symmetric(c in 0.1..5.0f64, b in -2.0..2.0f64, l in 8usize..80) {
        let lf = l as f64;
        let la: Vec<f64> = (1..l).map(|v| v as f64).collect();
        let y: Vec<f64> = la
            .iter()
            .map(|v| c * (lf / std::f64::consts::PI * (std::f64::consts::PI * v / lf).sin()).ln() + b)
            .collect();
        let fit = fit_log_sin(&la, &y, lf, LogBase::E).unwrap();
        prop_assert!((fit.c - c).abs() < 1e-8 && (fit.b - b).abs() < 1e-8);
        let reflected: Vec<f64> = la.iter().map(|v| lf - v).collect();
        let refit = fit_log_sin(&reflected, &y, lf, LogBase::E).unwrap();
        prop_assert!((refit.c - fit.c).abs() < 1e-9);
    }
}
