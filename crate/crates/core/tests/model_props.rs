use plaquette::automaton::{run_dynamics, triangular_step, x_step, x_unstep};
use plaquette::gf2::{BinMatrix, BitVec};
use plaquette::lattice::{Boundary, Edge, Geometry, Model, Realization, Topology};
use plaquette::symmetry::{top_bottom_mutual_info, SymmetryTableau};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = Model> {
    prop_oneof![Just(Model::Rtpm), Just(Model::Rxpm)]
}

fn edge() -> impl Strategy<Value = Edge> {
    prop_oneof![Just(Edge::Free), Just(Edge::Fixed)]
}

/// Realizations on small tori and cylinders.
fn realization(max_side: usize) -> impl Strategy<Value = Realization> {
    (model(), any::<bool>(), 3..=max_side, 3..=max_side, edge(), edge(), 0.0..=1.0f64, any::<u64>()).prop_map(
        |(m, torus, l, h, top, bottom, p, seed)| {
            let (g, bc) = if torus {
                (Geometry::torus(m, l, h).unwrap(), Boundary::FREE)
            } else {
                (Geometry::cylinder(m, l, h).unwrap(), Boundary { top, bottom })
            };
            Realization::sample(g, bc, p, seed).unwrap()
        },
    )
}

fn free_top_cylinder(max_side: usize) -> impl Strategy<Value = Realization> {
    (model(), 3..=max_side, 3..=max_side, edge(), 0.0..=1.0f64, any::<u64>()).prop_map(|(m, l, h, bottom, p, seed)| {
        let g = Geometry::cylinder(m, l, h).unwrap();
        Realization::sample(g, Boundary { top: Edge::Free, bottom }, p, seed).unwrap()
    })
}

fn bits(len: usize) -> impl Strategy<Value = BitVec> {
    proptest::collection::vec(any::<bool>(), len).prop_map(|b| BitVec::from_bools(&b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn parity_rows_have_model_weights(r in realization(9)) {
        let bulk = match r.geometry.model { Model::Rtpm => 3, Model::Rxpm => 5 };
        for row in r.constraint_supports() {
            prop_assert!(row.len() == 1 || row.len() == bulk, "weight {}", row.len());
        }
    }

    #[test]
    fn constraint_count(r in realization(9)) {
        let g = r.geometry;
        let rows = r.constraint_supports().len();
        let n = g.n_sites();
        if g.topology == Topology::Torus {
            prop_assert_eq!(rows, n);
        } else {
            let active = match g.model {
                Model::Rtpm => g.width * (g.height - 1),
                Model::Rxpm => g.width * (g.height - 2),
            };
            let pins = g.width * (usize::from(r.boundary.top == Edge::Fixed) + usize::from(r.boundary.bottom == Edge::Fixed));
            prop_assert_eq!(rows, active + pins);
        }
    }

    #[test]
    fn equal_seeds_give_equal_parity_matrices(r in realization(8)) {
        let again = Realization::sample(r.geometry, r.boundary, r.p, r.seed).unwrap();
        prop_assert_eq!(r.parity_matrix(), again.parity_matrix());
    }

    #[test]
    fn symmetry_generators_solve_the_constraints(r in realization(8)) {
        let t = SymmetryTableau::from_realization(&r);
        prop_assert!(r.parity_matrix().mul(t.matrix()).unwrap().is_zero());
        prop_assert_eq!(t.config_entropy(), t.matrix().rank());
    }

    #[test]
    fn entropy_bounds(r in realization(7), pick in proptest::collection::vec(0u8..3, 49)) {
        let t = SymmetryTableau::from_realization(&r);
        let n = r.n_sites();
        let a: Vec<usize> = (0..n).filter(|&s| pick[s] == 0).collect();
        let b: Vec<usize> = (0..n).filter(|&s| pick[s] == 1).collect();
        let rest: Vec<usize> = (0..n).filter(|&s| pick[s] != 0).collect();
        let s_a = t.sym_entropy(&a);
        prop_assert!(s_a <= 2 * a.len().min(n - a.len()));
        prop_assert_eq!(s_a, t.sym_entropy(&rest));
        let i = t.sym_mutual_info_cond(&a, &b).unwrap();
        prop_assert!(i <= t.region_rank(&a).min(t.region_rank(&b)));
    }

    #[test]
    fn entropies_match_group_enumeration(r in realization(5), pick in proptest::collection::vec(any::<bool>(), 25)) {
        let t = SymmetryTableau::from_realization(&r);
        let s = t.config_entropy();
        prop_assume!(s <= 14);
        let n = r.n_sites();
        let gens: Vec<u64> = (0..s)
            .map(|k| t.matrix().column(k).ones().fold(0u64, |acc, i| acc | 1 << i))
            .collect();
        let elements: Vec<u64> = (0u32..1 << s)
            .map(|sel| gens.iter().enumerate().filter(|(k, _)| sel >> k & 1 == 1).fold(0, |a, (_, g)| a ^ g))
            .collect();
        let a_mask: u64 = (0..n).filter(|&i| pick[i]).fold(0, |acc, i| acc | 1 << i);
        let full: u64 = if n == 64 { u64::MAX } else { (1 << n) - 1 };
        let log_count = |outside: u64| (elements.iter().filter(|e| *e & outside == 0).count() as f64).log2() as usize;
        let in_a = log_count(full & !a_mask);
        let in_rest = log_count(a_mask);
        let a: Vec<usize> = (0..n).filter(|&i| pick[i]).collect();
        let rest: Vec<usize> = (0..n).filter(|&i| !pick[i]).collect();
        // Complement identity and entropy as a quotient count.
        prop_assert_eq!(s - in_a, t.region_rank(&rest));
        prop_assert_eq!(t.sym_entropy(&a), s - in_a - in_rest);
    }

    #[test]
    fn relabelling_sites_preserves_entropies(r in realization(6), shift in 0usize..36, pick in proptest::collection::vec(any::<bool>(), 36)) {
        let n = r.n_sites();
        let perm: Vec<usize> = (0..n).map(|s| (s * 5 + shift) % n).collect();
        prop_assume!({
            let mut p = perm.clone();
            p.sort_unstable();
            p.dedup();
            p.len() == n
        });
        let p = r.parity_matrix();
        let permuted = BinMatrix::from_fn(p.rows(), n, |i, j| p.get(i, perm[j]));
        let t = SymmetryTableau::solve(&p);
        let tp = SymmetryTableau::solve(&permuted);
        prop_assert_eq!(t.config_entropy(), tp.config_entropy());
        // Site perm[j] of the original lattice is column j of the permuted one.
        let a: Vec<usize> = (0..n).filter(|&j| pick[j]).collect();
        let a_orig: Vec<usize> = a.iter().map(|&j| perm[j]).collect();
        prop_assert_eq!(t.sym_entropy(&a_orig), tp.sym_entropy(&a));
    }

    #[test]
    fn dynamics_equal_the_static_solver(r in free_top_cylinder(9)) {
        let g = r.geometry;
        let dt = run_dynamics(&r).unwrap();
        let st = SymmetryTableau::from_realization(&r);
        prop_assert_eq!(dt.config_entropy(r.boundary.bottom), st.config_entropy());
        let dynamic = dt.boundary_group(r.boundary.bottom);
        let stat = st.boundary_group(&r.boundary_sites());
        prop_assert_eq!(dynamic.log_size(), stat.log_size());
        for start in 0..g.width {
            for len in 1..g.width {
                let seg: Vec<usize> = g
                    .top_layers()
                    .into_iter()
                    .flat_map(|t| (start..start + len).map(move |i| g.site(i % g.width, t)))
                    .collect();
                prop_assert_eq!(dynamic.sym_entropy(&seg).unwrap(), stat.sym_entropy(&seg).unwrap());
            }
        }
        if r.boundary.bottom == Edge::Free && g.height >= 2 * g.model.edge_depth() {
            prop_assert_eq!(dt.top_bottom_mutual_info().unwrap(), top_bottom_mutual_info(&r, &st).unwrap());
        }
    }

    #[test]
    fn automaton_steps_are_linear((x, y, m) in (2usize..130).prop_flat_map(|w| (bits(w), bits(w), bits(w)))) {
        let mut xy = x.clone();
        xy.xor_assign(&y);
        let mut sum = triangular_step(&x, &m);
        sum.xor_assign(&triangular_step(&y, &m));
        prop_assert_eq!(triangular_step(&xy, &m), sum);
    }

    #[test]
    fn x_steps_are_linear_and_reversible((a, b, c, d, m) in (3usize..130).prop_flat_map(|w| (bits(w), bits(w), bits(w), bits(w), bits(w)))) {
        let mut ac = a.clone();
        ac.xor_assign(&c);
        let mut bd = b.clone();
        bd.xor_assign(&d);
        let mut sum = x_step(&a, &b, &m);
        sum.xor_assign(&x_step(&c, &d, &m));
        prop_assert_eq!(x_step(&ac, &bd, &m), sum);

        let all = BitVec::from_indices(a.len(), 0..a.len());
        let next = x_step(&a, &b, &all);
        prop_assert_eq!(x_unstep(&b, &next), a);
    }
}
