//! Decompose the difference between a relaxed optimum r and a connected
//! solution s into (s−r) directed tours, then transfer a mandatory edge
//! set T into r without exceeding cost(s).

use conflow::diff::{decompose_difference, transfer_edges};
use conflow::instance::parse_cf;
use conflow::oracle::solve_exact;
use conflow::relax::solve_relaxation;

fn main() {
    let i = parse_cf(
        "p cf 4 6 4\nd 1 1\nd 2 1\nd 3 1\nd 4 1\n\
         e 1 2 1 inf\ne 2 1 1 inf\ne 3 4 1 inf\ne 4 3 1 inf\ne 2 3 5 inf\ne 4 1 5 inf\n",
    )
    .unwrap();
    let r = solve_relaxation(&i).unwrap();
    let s = solve_exact(&i, None).unwrap();
    println!("relaxed cost {} vs connected cost {}", r.cost, s.cost);

    let dec = decompose_difference(&i, &r.flow, &s.flow).unwrap();
    for (k, tour) in dec.tours.iter().enumerate() {
        println!("tour {}: {} arcs, delta {}", k, tour.arcs.len(), tour.delta);
    }

    // force the cross edges (ids 4 and 5) into the relaxed flow
    let t_edges = vec![4, 5];
    let f = transfer_edges(&i, &r.flow, &s.flow, &t_edges).unwrap();
    let cost = f.cost(&i).unwrap();
    println!("transferred flow {:?} at cost {}", f.mult, cost);
    assert!(t_edges.iter().all(|&e| f.get(e) > 0));
    assert!(cost <= s.cost);
}
