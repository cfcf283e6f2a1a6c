//! Solve over a tree decomposition: build one heuristically, validate it,
//! render it in PACE format, and run the DP.

use conflow::instance::parse_cf;
use conflow::tw::{heuristic_td, render_td, solve_tw_dp, validate_td};

fn main() {
    // a 6-cycle with one chord
    let i = parse_cf(
        "p cf 6 7 6\nd 1 1\nd 2 1\nd 3 1\nd 4 1\nd 5 1\nd 6 1\n\
         e 1 2 1 inf\ne 2 3 1 inf\ne 3 4 1 inf\ne 4 5 1 inf\ne 5 6 1 inf\ne 6 1 1 inf\ne 3 6 2 inf\n",
    )
    .unwrap();
    let td = heuristic_td(&i);
    validate_td(&i, &td).unwrap();
    println!("heuristic decomposition, width {}:", td.width());
    print!("{}", render_td(&td));

    let res = solve_tw_dp(&i, &td).unwrap();
    println!("tw-dp optimum: {}", res.cost);
    println!("flow: {:?}", res.flow.mult);
}
