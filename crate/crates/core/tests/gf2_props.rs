use plaquette::gf2::{BinMatrix, BitVec, IncrementalBasis};
use proptest::prelude::*;

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = BinMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        proptest::collection::vec(any::<bool>(), r * c)
            .prop_map(move |bits| BinMatrix::from_fn(r, c, |i, j| bits[i * c + j]))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rank_plus_nullity_is_column_count(m in matrix(40, 90)) {
        prop_assert_eq!(m.rank() + m.nullspace().cols(), m.cols());
    }

    #[test]
    fn nullspace_is_annihilated(m in matrix(40, 90)) {
        let null = m.nullspace();
        prop_assert!(m.mul(&null).unwrap().is_zero());
        prop_assert_eq!(null.rank(), null.cols());
    }

    #[test]
    fn rank_is_subadditive(a in matrix(20, 30), extra in matrix(1, 30)) {
        let b = BinMatrix::from_fn(a.rows(), extra.cols(), |i, j| extra.get(0, j) ^ (i % 2 == 1 && a.get(i, 0)));
        let ab = a.hstack(&b).unwrap();
        prop_assert!(ab.rank() <= a.rank() + b.rank());
        prop_assert!(ab.rank() >= a.rank().max(b.rank()));
    }

    #[test]
    fn rref_is_idempotent(m in matrix(30, 70)) {
        let once = m.rref();
        let twice = once.matrix.rref();
        prop_assert_eq!(&once.matrix, &twice.matrix);
        prop_assert_eq!(once.rank, m.rank());
    }

    #[test]
    fn rank_counts_the_enumerated_row_space(m in matrix(10, 16)) {
        let rows: Vec<u32> = (0..m.rows())
            .map(|r| (0..m.cols()).fold(0, |acc, c| acc | (u32::from(m.get(r, c)) << c)))
            .collect();
        let mut span: Vec<u32> = (0u32..1 << rows.len())
            .map(|sel| rows.iter().enumerate().filter(|(k, _)| sel >> k & 1 == 1).fold(0, |a, (_, v)| a ^ v))
            .collect();
        span.sort_unstable();
        span.dedup();
        prop_assert_eq!(span.len(), 1usize << m.rank());
    }

    #[test]
    fn incremental_basis_tracks_rank(m in matrix(30, 50)) {
        let mut basis = IncrementalBasis::new(m.cols());
        for r in 0..m.rows() {
            basis.insert(m.row(r));
        }
        prop_assert_eq!(basis.rank(), m.rank());
        for r in 0..m.rows() {
            prop_assert!(basis.contains(&m.row(r)));
        }
    }

    #[test]
    fn zero_block_rows_vanish_on_targets(m in matrix(20, 40), pick in proptest::collection::vec(any::<bool>(), 40)) {
        let targets: Vec<usize> = (0..m.cols()).filter(|&c| pick[c]).collect();
        let (lower, upper) = m.zero_block_reduce(&targets);
        prop_assert_eq!(upper, m.restrict_columns(&targets).rank());
        prop_assert_eq!(lower.rows() + upper, m.rank());
        prop_assert!(lower.restrict_columns(&targets).is_zero());
        // Every kept row lies in the row space.
        prop_assert_eq!(m.vstack(&lower).unwrap().rank(), m.rank());
    }

    #[test]
    fn mul_vec_matches_matrix_product(m in matrix(20, 40), bits in proptest::collection::vec(any::<bool>(), 40)) {
        let v = BitVec::from_bools(&bits[..m.cols()]);
        let col = BinMatrix::from_fn(m.cols(), 1, |i, _| v.get(i));
        let prod = m.mul(&col).unwrap();
        let mv = m.mul_vec(&v);
        for r in 0..m.rows() {
            prop_assert_eq!(mv.get(r), prod.get(r, 0));
        }
    }
}
