//! Property-based invariants over randomly generated tiny instances.

use std::collections::BTreeMap;

use proptest::prelude::*;

use conflow::instance::{
    parse_cf, parse_solution, write_cf, write_solution, Capacity, ConnectedFlowInstance, Edge,
    Vertex,
};
use conflow::oracle::{solve_exact, SolveStatus};
use conflow::relax::solve_relaxation;

fn arb_instance() -> impl Strategy<Value = ConnectedFlowInstance> {
    (2usize..=5)
        .prop_flat_map(|n| {
            let edge = (1..=n, 1..=n, 0u64..=7, prop_oneof![
                (0u64..=3).prop_map(Capacity::Finite),
                Just(Capacity::Unbounded),
            ]);
            let dem = proptest::collection::btree_map(1..=n, 1u64..=2, 0..=n);
            (Just(n), proptest::collection::vec(edge, 1..=8), dem)
        })
        .prop_filter_map("valid instance", |(n, raw, dem)| {
            let mut seen = std::collections::BTreeSet::new();
            let edges: Vec<Edge> = raw
                .into_iter()
                .filter(|&(u, v, _, _)| u != v && seen.insert((u, v)))
                .map(|(u, v, cost, cap)| Edge { tail: u, head: v, cost, cap })
                .collect();
            if edges.is_empty() {
                return None;
            }
            let demand: BTreeMap<Vertex, u64> = dem;
            ConnectedFlowInstance::new(n, edges, demand).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cf_text_round_trip(i in arb_instance()) {
        let back = parse_cf(&write_cf(&i)).unwrap();
        prop_assert_eq!(back.n, i.n);
        // the writer orders edges by (tail, head)
        let mut want = i.edges.clone();
        want.sort_by_key(|e| (e.tail, e.head));
        prop_assert_eq!(back.edges, want);
        prop_assert_eq!(back.demand, i.demand);
    }

    #[test]
    fn solution_text_round_trip(i in arb_instance()) {
        let s = solve_exact(&i, None).unwrap();
        if s.status == SolveStatus::Optimal {
            let text = write_solution(&i, &s.flow).unwrap();
            let (cost, flow) = parse_solution(&i, &text).unwrap();
            prop_assert_eq!(cost, s.cost);
            prop_assert_eq!(flow, s.flow);
        }
    }

    #[test]
    fn relaxation_never_exceeds_optimum(i in arb_instance()) {
        let opt = solve_exact(&i, None).unwrap();
        if opt.status == SolveStatus::Optimal {
            let rel = solve_relaxation(&i).unwrap();
            prop_assert_eq!(rel.status, SolveStatus::Optimal);
            prop_assert!(rel.cost <= opt.cost);
        }
    }
}
