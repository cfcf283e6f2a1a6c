//! Peel huge demands down to the 2n²+n bound, solve the small residual
//! instance, and compose back into an optimum of the original.

use conflow::instance::{parse_cf, verify_solution};
use conflow::tw::{compose, reduce_demands, solve_tw};

fn main() {
    // two vertices wanting 100 visits each over a 2-cycle
    let i = parse_cf("p cf 2 2 2\nd 1 100\nd 2 100\ne 1 2 2 inf\ne 2 1 3 inf\n").unwrap();
    let cert = reduce_demands(&i).unwrap();
    println!("peeling rounds : {}", cert.rounds);
    println!("base flow      : {:?}", cert.base_flow.mult);
    println!(
        "residual demands: {:?}",
        cert.residual.demand.values().collect::<Vec<_>>()
    );

    let res = solve_tw(&cert.residual).unwrap();
    let full = compose(&cert, &res.flow);
    let rep = verify_solution(&i, &full).unwrap();
    assert!(rep.all_ok());
    println!("composed cost  : {}", rep.cost);

    // direct solve agrees (demands are small enough here to check)
    let direct = solve_tw(&i).unwrap();
    assert_eq!(rep.cost, direct.cost);
    println!("direct solve agrees at {}", direct.cost);
}
