//! Reduce an unbounded-capacity Connected Flow instance to MVTSP on its
//! demand vertices, solve there, and lift the tour back.

use conflow::instance::{parse_cf, verify_solution};
use conflow::oracle::solve_exact;
use conflow::reduce::{extract_eulerian, lift_tour, mvtsp_loop_cf, reduce_to_mvtsp};

fn main() {
    // demand vertices 1 and 3 joined through a free-visit hub 2
    let i = parse_cf(
        "p cf 3 4 2\nd 1 1\nd 3 1\ne 1 2 1 inf\ne 2 3 1 inf\ne 3 2 1 inf\ne 2 1 1 inf\n",
    )
    .unwrap();
    let (m, pt) = reduce_to_mvtsp(&i).unwrap();
    println!("MVTSP on {} demand vertices", m.n);
    print!("{}", pt.render());

    let sol = solve_exact(&mvtsp_loop_cf(&m, &pt), None).unwrap();
    let lifted = lift_tour(&i, &m, &pt, &sol.flow).unwrap();
    let rep = verify_solution(&i, &lifted).unwrap();
    assert!(rep.all_ok());
    println!("lifted cost {}", rep.cost);
    println!("tour: {:?}", extract_eulerian(&i, &lifted).unwrap());
}
