//! Solve the twin-cycles instance with all three exact solvers and show
//! that they agree (and that the connected optimum exceeds the relaxation).

use std::collections::BTreeSet;

use conflow::instance::parse_cf;
use conflow::oracle::solve_exact;
use conflow::relax::solve_relaxation;
use conflow::tw::solve_tw;
use conflow::vc::solve_vc_fpt;

fn main() {
    // two cheap 2-cycles a⇄b, c⇄d plus expensive cross edges
    let i = parse_cf(
        "p cf 4 6 4\nd 1 1\nd 2 1\nd 3 1\nd 4 1\n\
         e 1 2 1 inf\ne 2 1 1 inf\ne 3 4 1 inf\ne 4 3 1 inf\ne 2 3 5 inf\ne 4 1 5 inf\n",
    )
    .unwrap();

    let oracle = solve_exact(&i, None).unwrap();
    let vc = solve_vc_fpt(&i, &BTreeSet::from([2, 4])).unwrap();
    let tw = solve_tw(&i).unwrap();
    let relaxed = solve_relaxation(&i).unwrap();

    println!("oracle cost     : {}", oracle.cost);
    println!("vc-fpt cost     : {}", vc.cost);
    println!("tw-dp cost      : {}", tw.cost);
    println!("relaxation cost : {} (disconnected 2-cycles)", relaxed.cost);
    assert_eq!(oracle.cost, vc.cost);
    assert_eq!(oracle.cost, tw.cost);
    assert!(relaxed.cost < oracle.cost);
    println!("flow: {:?}", oracle.flow.mult);
}
