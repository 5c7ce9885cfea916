//! Property-based invariants.

mod common;

use marginals::assignment::AxisAssignment;
use marginals::graph::{derive_links, ChainGraph};
use marginals::grid::{
    check_compatibility, integrated_distribution, marginalize, random_chain, random_phase_tensor,
    GridSpec,
};
use proptest::prelude::*;

fn assignment_strategy() -> impl Strategy<Value = AxisAssignment> {
    (1usize..=6).prop_flat_map(|dim| {
        (0u32..(1u32 << dim)).prop_map(move |bits| AxisAssignment::new(dim, bits).unwrap())
    })
}

fn vertex_set_strategy(dim: usize) -> impl Strategy<Value = Vec<AxisAssignment>> {
    prop::collection::btree_set(0u32..(1u32 << dim), 1..=(1usize << dim))
        .prop_map(move |bits| {
            bits.into_iter()
                .map(|b| AxisAssignment::new(dim, b).unwrap())
                .collect()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn type_string_roundtrip(a in assignment_strategy()) {
        let text = a.to_string();
        let back = AxisAssignment::parse(&text, a.dim()).unwrap();
        prop_assert_eq!(a, back);
        let qp = a.qp_string();
        prop_assert_eq!(a, AxisAssignment::from_qp_string(&qp).unwrap());
    }

    #[test]
    fn links_are_order_independent_and_idempotent(
        mut vs in vertex_set_strategy(3),
        shuffle_seed in 0u64..1000,
    ) {
        let l1 = derive_links(&vs).unwrap();
        // deterministic shuffle
        let n = vs.len();
        for i in 0..n {
            let j = ((shuffle_seed as usize).wrapping_mul(31).wrapping_add(i * 17)) % n;
            vs.swap(i, j);
        }
        let l2 = derive_links(&vs).unwrap();
        prop_assert_eq!(&l1, &l2);
        let l3 = derive_links(&vs).unwrap();
        prop_assert_eq!(&l2, &l3);
    }

    #[test]
    fn quartets_found_are_valid(vs in vertex_set_strategy(3)) {
        let g = ChainGraph::new(3, vs).unwrap();
        if let Some(q) = g.find_critical_quartet() {
            prop_assert!(q.is_valid());
            for v in &q.vertices {
                prop_assert!(g.contains(v));
            }
        }
        if !g.is_proper() {
            prop_assert!(g.find_critical_quartet().is_some());
        }
    }

    #[test]
    fn marginal_mass_is_conserved(
        seed in 0u64..5000,
        dim in 1usize..=3,
        points in 2usize..=4,
        bits in 0u32..8,
    ) {
        let grid = GridSpec::uniform(dim, points).unwrap();
        let rho = random_phase_tensor(&grid, seed).unwrap();
        prop_assert_eq!(rho.factor().total(), 1.0);
        let a = AxisAssignment::new(dim, bits & ((1 << dim) - 1)).unwrap();
        let m = marginalize(&rho, &a).unwrap();
        prop_assert!((m.factor().total() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn integrated_distribution_is_symmetric(seed in 0u64..5000) {
        let g = ChainGraph::from_type_strings(3, &["123", "1'2'3"]).unwrap();
        let grid = GridSpec::uniform(3, 2).unwrap();
        let chain = random_chain(&g, &grid, seed).unwrap();
        let ab = integrated_distribution(&chain.members()[0], &chain.members()[1], 1e-9).unwrap();
        let ba = integrated_distribution(&chain.members()[1], &chain.members()[0], 1e-9).unwrap();
        prop_assert!(ab.max_abs_diff(&ba).unwrap() <= 1e-12);
    }

    #[test]
    fn random_chains_stay_compatible(seed in 0u64..5000, dim in 1usize..=3) {
        let all: Vec<AxisAssignment> = (0..(1u32 << dim))
            .map(|b| AxisAssignment::new(dim, b).unwrap())
            .collect();
        let g = ChainGraph::new(dim, all).unwrap();
        let grid = GridSpec::uniform(dim, 2).unwrap();
        let chain = random_chain(&g, &grid, seed).unwrap();
        let report = check_compatibility(&chain, 1e-12).unwrap();
        prop_assert!(report.pass);
    }
}
