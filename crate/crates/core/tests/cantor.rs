use depbernstein::cantor::{cantor_params, cantor_set, full_decomposition, sub_block_partition};
use proptest::prelude::*;

#[test]
fn every_partition_up_to_5000_is_sound() {
    for a in 2..=5000 {
        let part = cantor_set(a).unwrap();
        assert!(part.violations().is_empty(), "{:?}", part.violations());
        let p = &part.params;
        assert!(a - p.kept() <= a / 2);
    }
}

#[test]
fn every_decomposition_up_to_5000_is_sound() {
    for n in 2..=5000 {
        let full = full_decomposition(n).unwrap();
        assert!(full.violations().is_empty(), "{:?}", full.violations());
        let bound = ((n as f64 / 2.0).log2().floor() as usize) + 1;
        assert!(full.depth() <= bound, "n = {n}: depth {} > {bound}", full.depth());
    }
}

#[test]
fn small_sizes_keep_everything() {
    for a in 2..=43 {
        let part = cantor_set(a).unwrap();
        assert_eq!(part.params.ell, 0);
        assert_eq!(part.k_a, (1..=a).collect::<Vec<_>>());
    }
    assert!(cantor_params(1).is_err());
}

proptest! {
    #[test]
    fn construction_is_deterministic(a in 2usize..20_000) {
        let first = serde_json::to_string(&cantor_set(a).unwrap()).unwrap();
        let second = serde_json::to_string(&cantor_set(a).unwrap()).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn complement_and_k_partition_the_range(a in 2usize..20_000) {
        let part = cantor_set(a).unwrap();
        let mut all: Vec<usize> = part.k_a.iter().copied().chain(part.complement()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (1..=a).collect::<Vec<_>>());
    }

    #[test]
    fn sub_blocks_alternate(q in 2usize..500, p_frac in 0.0f64..1.0) {
        let p = 1 + ((q / 2 - 1) as f64 * p_frac) as usize;
        let k: Vec<usize> = (1..=q).map(|i| 3 * i).collect();
        let (odd, even) = sub_block_partition(&k, p).unwrap();
        let m = q / (2 * p);
        prop_assert_eq!(even.len(), m);
        prop_assert!(even.iter().all(|b| b.len() == p));
        prop_assert!(odd[..m].iter().all(|b| b.len() == p));
        let mut merged: Vec<usize> = odd.iter().chain(&even).flatten().copied().collect();
        merged.sort_unstable();
        prop_assert_eq!(merged, k);
    }
}
