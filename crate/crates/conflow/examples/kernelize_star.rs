//! Kernelize a 15-leaf MVTSP star (cover size 1): distant leaves collapse
//! into one contracted vertex, the optimum is preserved exactly, and the
//! kernel solution lifts back to a verified solution of the original.

use std::collections::{BTreeMap, BTreeSet};

use conflow::instance::{mvtsp_to_cf, verify_solution, MVTSPInstance};
use conflow::kernel::{acyclify_relaxation, kernelize, lift_kernel_solution};
use conflow::relax::solve_relaxation;
use conflow::vc::solve_vc_fpt;

fn main() {
    // hub 1, leaves 2..=16; leaf v costs v to reach and 1 to return
    let leaves = 15;
    let mut cost = BTreeMap::new();
    for v in 2..=(leaves + 1) as usize {
        cost.insert((1, v), v as u64);
        cost.insert((v, 1), 1);
    }
    let mut demand = vec![1u64; leaves + 1];
    demand[0] = leaves as u64;
    let m = MVTSPInstance::new(leaves + 1, cost, demand).unwrap();
    let x = BTreeSet::from([1]);

    let (km, cm) = kernelize(&m, &x).unwrap();
    println!("original n {} -> kernel n {}", m.n, km.n);
    print!("{}", cm.render());

    let kr = solve_vc_fpt(&mvtsp_to_cf(&km), &x).unwrap();
    let fixed: u64 = cm.entries.iter().map(|e| e.fixed_cost).sum();
    println!("kernel optimum {} + fixed {} = {}", kr.cost, fixed, kr.cost + fixed);

    let cf = mvtsp_to_cf(&m);
    let rel = solve_relaxation(&cf).unwrap();
    let r = acyclify_relaxation(&m, &x, &rel.flow).unwrap();
    let lifted = lift_kernel_solution(&m, &km, &cm, &r, &kr.flow).unwrap();
    let rep = verify_solution(&cf, &lifted).unwrap();
    assert!(rep.all_ok());
    assert_eq!(rep.cost, kr.cost + fixed);
    println!("lifted solution verifies at cost {}", rep.cost);
}
