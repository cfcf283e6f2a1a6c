//! Generate hard instances: a 2-vertex-disjoint-paths query compiled to
//! Connected Flow, and a 3-CNF formula compiled to a bounded-pathwidth
//! MVTSP instance with a verified witness tour.

use conflow::hardness::{
    decode_assignment, gen_disjoint_paths_instance, gen_sat_instance, parse_dimacs,
    sat_path_decomposition, witness_tour_from_assignment, DisjointPathsQuery,
};
use conflow::instance::{mvtsp_to_cf, verify_solution};
use conflow::oracle::{solve_exact, SolveStatus};
use conflow::tw::validate_td;

fn main() {
    // two internally-disjoint corridors: feasible
    let q = DisjointPathsQuery::new(6, vec![(1, 5), (5, 2), (3, 6), (6, 4)], 1, 2, 3, 4).unwrap();
    let dpi = gen_disjoint_paths_instance(&q);
    let res = solve_exact(&dpi.inst, None).unwrap();
    println!(
        "disjoint-paths query on {} vertices: {:?}",
        dpi.inst.n, res.status
    );
    assert_eq!(res.status, SolveStatus::Optimal);

    // (x1 ∨ x2 ∨ x3) at group size 1
    let phi = parse_dimacs("p cnf 3 1\n1 2 3 0\n").unwrap();
    let (inst, meta) = gen_sat_instance(&phi, 1).unwrap();
    println!(
        "SAT instance: n {}, {} scanner members",
        inst.n,
        meta.scanners[0].members.len()
    );
    let td = sat_path_decomposition(&meta);
    let cf = mvtsp_to_cf(&inst);
    validate_td(&cf, &td).unwrap();
    println!("path decomposition width {} (bound {})", td.width(), 3 * meta.groups + 21);

    let chi = vec![true, false, true];
    let tour = witness_tour_from_assignment(&inst, &meta, &phi, &chi).unwrap();
    assert!(verify_solution(&cf, &tour).unwrap().all_ok());
    let back = decode_assignment(&inst, &meta, &phi, &tour).unwrap();
    assert_eq!(back, chi);
    println!("witness tour verifies; decoded assignment {:?}", back);
}
