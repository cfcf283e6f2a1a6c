//! Reduction from unbounded-capacity Connected Flow to MVTSP on the demand
//! vertices: pairwise shortest paths internally avoiding D become the MVTSP
//! cost matrix; solutions lift back by substituting the recorded paths.
//! Also: Eulerian tour extraction from a valid flow.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::instance::{
    verify_solution, Capacity, ConnectedFlowInstance, Edge, FlowAssignment, MVTSPInstance, Vertex,
};

/// Shortest D-disjoint paths between ordered demand pairs, keyed on
/// original vertex ids. `dvs` fixes the D → 1..|D| renumbering.
#[derive(Debug, Clone)]
pub struct PathTable {
    pub dvs: Vec<Vertex>,
    pub paths: BTreeMap<(Vertex, Vertex), (u64, Vec<Vertex>)>,
}

impl PathTable {
    pub fn get(&self, u: Vertex, v: Vertex) -> Option<&(u64, Vec<Vertex>)> {
        self.paths.get(&(u, v))
    }

    /// Sidecar format: `pt <u> <v> <cost> <len> v1..vlen` per pair.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (&(u, v), &(cost, ref path)) in &self.paths {
            write!(out, "pt {} {} {} {}", u, v, cost, path.len()).unwrap();
            for w in path {
                write!(out, " {}", w).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Dijkstra from u over paths whose internal vertices avoid D. Returns,
/// per target demand vertex, cost and full vertex path. Ties broken by
/// lexicographically smallest vertex sequence.
fn d_disjoint_paths_from(
    i: &ConnectedFlowInstance,
    u: Vertex,
) -> BTreeMap<Vertex, (u64, Vec<Vertex>)> {
    let mut out_adj: Vec<Vec<(Vertex, u64)>> = vec![Vec::new(); i.n + 1];
    for e in &i.edges {
        out_adj[e.tail].push((e.head, e.cost));
    }
    for l in out_adj.iter_mut() {
        l.sort_unstable();
    }
    let mut dist: Vec<Option<(u64, Vec<Vertex>)>> = vec![None; i.n + 1];
    let mut done = vec![false; i.n + 1];
    dist[u] = Some((0, vec![u]));
    loop {
        // select the unfinished vertex with smallest (dist, path)
        let mut best: Option<Vertex> = None;
        for v in 1..=i.n {
            if done[v] || dist[v].is_none() {
                continue;
            }
            best = match best {
                None => Some(v),
                Some(b) => {
                    let (db, pb) = dist[b].as_ref().unwrap();
                    let (dv, pv) = dist[v].as_ref().unwrap();
                    if (dv, pv) < (db, pb) {
                        Some(v)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let v = match best {
            Some(v) => v,
            None => break,
        };
        done[v] = true;
        // demand vertices other than the source terminate paths
        if v != u && i.is_demand(v) {
            continue;
        }
        let (dv, pv) = dist[v].clone().unwrap();
        for &(w, c) in &out_adj[v] {
            if done[w] {
                continue;
            }
            let nd = dv + c;
            let mut np = pv.clone();
            np.push(w);
            let better = match &dist[w] {
                None => true,
                Some((dw, pw)) => nd < *dw || (nd == *dw && np < *pw),
            };
            if better {
                dist[w] = Some((nd, np));
            }
        }
    }
    let mut res = BTreeMap::new();
    for &v in i.demand.keys() {
        if v == u {
            continue;
        }
        if let Some((d, p)) = &dist[v] {
            res.insert(v, (*d, p.clone()));
        }
    }
    // shortest D-disjoint return cycle u → … → u, recorded under key u
    let mut back: Option<(u64, Vec<Vertex>)> = None;
    for e in &i.edges {
        if e.head != u || i.is_demand(e.tail) {
            continue;
        }
        if let Some((d, p)) = &dist[e.tail] {
            let nd = d + e.cost;
            let mut np = p.clone();
            np.push(u);
            let better = match &back {
                None => true,
                Some((bd, bp)) => nd < *bd || (nd == *bd && np < *bp),
            };
            if better {
                back = Some((nd, np));
            }
        }
    }
    if let Some(b) = back {
        res.insert(u, b);
    }
    res
}

/// Build the equivalent MVTSP instance on D.
pub fn reduce_to_mvtsp(i: &ConnectedFlowInstance) -> Result<(MVTSPInstance, PathTable)> {
    if !i.all_unbounded() {
        return Err(Error::Precondition(
            "reduction to MVTSP requires unbounded capacities".into(),
        ));
    }
    if i.demand.is_empty() {
        return Err(Error::Precondition("reduction requires |D| >= 1".into()));
    }
    let dvs: Vec<Vertex> = i.demand.keys().copied().collect();
    let rank: BTreeMap<Vertex, usize> = dvs.iter().enumerate().map(|(k, &v)| (v, k + 1)).collect();
    let mut paths = BTreeMap::new();
    let mut cost = BTreeMap::new();
    for &u in &dvs {
        for (v, (c, p)) in d_disjoint_paths_from(i, u) {
            if v != u {
                cost.insert((rank[&u], rank[&v]), c);
            }
            paths.insert((u, v), (c, p));
        }
    }
    let demand = dvs.iter().map(|v| i.dem(*v).unwrap()).collect();
    let m = MVTSPInstance::new(dvs.len(), cost, demand)?;
    Ok((m, PathTable { dvs, paths }))
}

/// CF encoding of the reduced instance: mvtsp_to_cf(m) plus one free relay
/// vertex per demand vertex with a recorded return cycle. A relay round trip
/// stands in for one u → u tour segment, which a tour may need when a vertex
/// is visited twice in a row (and must use when |D| = 1). Pair edges keep
/// the same ids as in mvtsp_to_cf(m).
pub fn mvtsp_loop_cf(m: &MVTSPInstance, pt: &PathTable) -> ConnectedFlowInstance {
    let base = crate::instance::mvtsp_to_cf(m);
    let mut edges = base.edges;
    let mut n = m.n;
    for (j, &u) in pt.dvs.iter().enumerate() {
        if let Some(&(c, _)) = pt.get(u, u) {
            n += 1;
            edges.push(Edge { tail: j + 1, head: n, cost: c, cap: Capacity::Unbounded });
            edges.push(Edge { tail: n, head: j + 1, cost: 0, cap: Capacity::Unbounded });
        }
    }
    let demand = (1..=m.n).map(|v| (v, m.dem(v))).collect();
    ConnectedFlowInstance::new(n, edges, demand).expect("valid loop extension")
}

/// Lift an MVTSP solution (a flow on mvtsp_loop_cf's edges, or on
/// mvtsp_to_cf's when no relay is used) back to the original instance by
/// adding the recorded path per used pair and the recorded return cycle per
/// relay round trip.
pub fn lift_tour(
    orig: &ConnectedFlowInstance,
    m: &MVTSPInstance,
    pt: &PathTable,
    m_sol: &FlowAssignment,
) -> Result<FlowAssignment> {
    let m_cf = mvtsp_loop_cf(m, pt);
    let mut f = orig.zero_flow();
    for (id, e) in m_cf.edges.iter().enumerate() {
        if id >= m_sol.mult.len() {
            break; // solution keyed on the relay-free encoding
        }
        let q = m_sol.get(id);
        if q == 0 || e.tail > m.n {
            continue; // relay return edges carry no original-graph cost
        }
        let u = pt.dvs[e.tail - 1];
        let v = if e.head > m.n { u } else { pt.dvs[e.head - 1] };
        let (_, path) = pt
            .get(u, v)
            .ok_or_else(|| Error::Precondition(format!("pair ({},{}) is forbidden", u, v)))?;
        for w in path.windows(2) {
            let eid = orig.edge_id(w[0], w[1]).ok_or_else(|| {
                Error::Precondition(format!("recorded path edge ({},{}) missing", w[0], w[1]))
            })?;
            f.set(eid, f.get(eid) + q);
        }
    }
    Ok(f)
}

/// Hierholzer's construction: a closed walk using each edge exactly f(e)
/// times. Requires a balanced connected flow. Out-edges taken in ascending
/// head order for determinism. Empty flow gives the empty walk.
pub fn extract_eulerian(i: &ConnectedFlowInstance, f: &FlowAssignment) -> Result<Vec<Vertex>> {
    let rep = verify_solution(i, f)?;
    if !(rep.conservation_ok && rep.capacities_ok && rep.connected_ok) {
        return Err(Error::Precondition(
            "Eulerian extraction needs a balanced connected flow".into(),
        ));
    }
    if f.is_zero() {
        return Ok(Vec::new());
    }
    let mut out_adj: Vec<Vec<(Vertex, usize)>> = vec![Vec::new(); i.n + 1];
    for (id, e) in i.edges.iter().enumerate() {
        if f.get(id) > 0 {
            out_adj[e.tail].push((e.head, id));
        }
    }
    for l in out_adj.iter_mut() {
        l.sort_unstable();
    }
    let mut remaining = f.mult.clone();
    let start = (1..=i.n)
        .find(|&v| out_adj[v].iter().any(|&(_, id)| remaining[id] > 0))
        .unwrap();
    // iterative Hierholzer; reversed postorder is the circuit
    let mut stack = vec![start];
    let mut walk = Vec::new();
    while let Some(&v) = stack.last() {
        match out_adj[v].iter().find(|&&(_, id)| remaining[id] > 0) {
            Some(&(w, id)) => {
                remaining[id] -= 1;
                stack.push(w);
            }
            None => {
                walk.push(v);
                stack.pop();
            }
        }
    }
    walk.reverse();
    Ok(walk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{mvtsp_to_cf, parse_cf};
    use crate::oracle::solve_exact;

    fn star() -> ConnectedFlowInstance {
        // x=1, c=2, y=3; D = {1,3}
        parse_cf(
            "p cf 3 4 2\nd 1 1\nd 3 1\ne 1 2 1 inf\ne 2 3 1 inf\ne 3 2 1 inf\ne 2 1 1 inf\n",
        )
        .unwrap()
    }

    #[test]
    fn star_reduction() {
        let (m, pt) = reduce_to_mvtsp(&star()).unwrap();
        assert_eq!(m.n, 2);
        assert_eq!(m.cost[&(1, 2)], 2);
        assert_eq!(m.cost[&(2, 1)], 2);
        assert_eq!(pt.get(1, 3).unwrap().1, vec![1, 2, 3]);
        let opt = solve_exact(&mvtsp_to_cf(&m), None).unwrap();
        assert_eq!(opt.cost, 4);
    }

    #[test]
    fn direct_edges_when_d_is_everything() {
        let i = parse_cf("p cf 3 3 3\nd 1 1\nd 2 1\nd 3 1\ne 1 2 1 inf\ne 2 3 1 inf\ne 3 1 1 inf\n")
            .unwrap();
        let (m, _) = reduce_to_mvtsp(&i).unwrap();
        assert_eq!(m.cost.len(), 3);
        assert_eq!(m.cost[&(1, 2)], 1);
    }

    #[test]
    fn unreachable_pair_forbidden() {
        let i = parse_cf("p cf 3 2 2\nd 1 1\nd 3 1\ne 1 2 1 inf\ne 2 1 1 inf\n").unwrap();
        let (m, pt) = reduce_to_mvtsp(&i).unwrap();
        assert!(!m.cost.contains_key(&(1, 2)));
        assert!(pt.get(1, 3).is_none());
    }

    #[test]
    fn finite_cap_rejected() {
        let i = parse_cf("p cf 2 2 2\nd 1 1\nd 2 1\ne 1 2 1 1\ne 2 1 1 inf\n").unwrap();
        assert!(reduce_to_mvtsp(&i).is_err());
    }

    #[test]
    fn lift_star_solution() {
        let i = star();
        let (m, pt) = reduce_to_mvtsp(&i).unwrap();
        let m_cf = mvtsp_to_cf(&m);
        let m_sol = solve_exact(&m_cf, None).unwrap();
        let lifted = lift_tour(&i, &m, &pt, &m_sol.flow).unwrap();
        let rep = verify_solution(&i, &lifted).unwrap();
        assert!(rep.all_ok());
        assert_eq!(rep.cost, 4);
        assert_eq!(lifted.mult, vec![1, 1, 1, 1]);
    }

    #[test]
    fn lift_multiplicity_is_linear() {
        let i = star();
        let (m, pt) = reduce_to_mvtsp(&i).unwrap();
        let m_cf = mvtsp_to_cf(&m);
        let mut two = m_cf.zero_flow();
        two.set(m_cf.edge_id(1, 2).unwrap(), 2);
        two.set(m_cf.edge_id(2, 1).unwrap(), 2);
        let lifted = lift_tour(&i, &m, &pt, &two).unwrap();
        assert_eq!(lifted.mult, vec![2, 2, 2, 2]);
    }

    #[test]
    fn return_cycle_recorded() {
        let (m, pt) = reduce_to_mvtsp(&star()).unwrap();
        // 1 → 2 → 1 and 3 → 2 → 3 are D-disjoint return cycles
        assert_eq!(pt.get(1, 1).unwrap(), &(2, vec![1, 2, 1]));
        assert_eq!(pt.get(3, 3).unwrap(), &(2, vec![3, 2, 3]));
        assert!(!m.cost.contains_key(&(1, 1)));
        let loop_cf = mvtsp_loop_cf(&m, &pt);
        assert_eq!(loop_cf.n, 4);
        assert_eq!(loop_cf.edges.len(), 2 + 4);
    }

    #[test]
    fn return_segment_needed() {
        // any feasible flow must revisit vertex 2 before returning to 1,
        // so the tour needs a 2 → 2 segment
        let i = parse_cf(
            "p cf 4 5 2\nd 1 1\nd 2 2\ne 1 3 1 inf\ne 2 1 0 inf\ne 2 3 0 inf\ne 3 4 3 inf\ne 4 2 5 inf\n",
        )
        .unwrap();
        let direct = solve_exact(&i, None).unwrap();
        assert_eq!(direct.cost, 17);
        let (m, pt) = reduce_to_mvtsp(&i).unwrap();
        let via = solve_exact(&mvtsp_loop_cf(&m, &pt), None).unwrap();
        assert_eq!(via.cost, 17);
        let lifted = lift_tour(&i, &m, &pt, &via.flow).unwrap();
        let rep = verify_solution(&i, &lifted).unwrap();
        assert!(rep.all_ok());
        assert_eq!(rep.cost, 17);
    }

    #[test]
    fn single_demand_vertex_loops() {
        // |D| = 1: every visit is a return cycle
        let i = parse_cf("p cf 2 2 1\nd 1 3\ne 1 2 1 inf\ne 2 1 2 inf\n").unwrap();
        let (m, pt) = reduce_to_mvtsp(&i).unwrap();
        let via = solve_exact(&mvtsp_loop_cf(&m, &pt), None).unwrap();
        assert_eq!(via.cost, 9);
        let lifted = lift_tour(&i, &m, &pt, &via.flow).unwrap();
        let rep = verify_solution(&i, &lifted).unwrap();
        assert!(rep.all_ok());
        assert_eq!(rep.cost, 9);
        assert_eq!(lifted.mult, vec![3, 3]);
    }

    #[test]
    fn eulerian_triangle() {
        let i = parse_cf("p cf 3 3 3\nd 1 1\nd 2 1\nd 3 1\ne 1 2 1 inf\ne 2 3 1 inf\ne 3 1 1 inf\n")
            .unwrap();
        let f = FlowAssignment { mult: vec![1, 1, 1] };
        assert_eq!(extract_eulerian(&i, &f).unwrap(), vec![1, 2, 3, 1]);
    }

    #[test]
    fn eulerian_two_vertex_double() {
        let i = parse_cf("p cf 2 2 2\nd 1 2\nd 2 2\ne 1 2 1 inf\ne 2 1 1 inf\n").unwrap();
        let f = FlowAssignment { mult: vec![2, 2] };
        assert_eq!(extract_eulerian(&i, &f).unwrap(), vec![1, 2, 1, 2, 1]);
    }

    #[test]
    fn eulerian_figure_eight() {
        // two triangles sharing vertex 1
        let i = parse_cf(
            "p cf 5 6 0\ne 1 2 1 inf\ne 2 3 1 inf\ne 3 1 1 inf\ne 1 4 1 inf\ne 4 5 1 inf\ne 5 1 1 inf\n",
        )
        .unwrap();
        let f = FlowAssignment { mult: vec![1; 6] };
        let walk = extract_eulerian(&i, &f).unwrap();
        assert_eq!(walk.len(), 7);
        assert_eq!(walk.first(), walk.last());
        // every edge used exactly once
        let mut used = vec![0u64; 6];
        for w in walk.windows(2) {
            used[i.edge_id(w[0], w[1]).unwrap()] += 1;
        }
        assert_eq!(used, vec![1; 6]);
    }
}
