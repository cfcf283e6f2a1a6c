//! FPT algorithm for Connected Flow parameterized by vertex cover size:
//! guess the visited cover subset X′, force visits with unit-demand
//! gadgets, and run a degree-vector DP over the independent set restricted
//! to a ±4k window around the relaxation.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::instance::{
    verify_solution, Capacity, ConnectedFlowInstance, Edge, FlowAssignment, Vertex,
};
use crate::oracle::{OracleResult, SolveStatus};
use crate::relax::solve_relaxation;

#[derive(Debug, Clone)]
pub struct VertexCover {
    pub vertices: BTreeSet<Vertex>,
    pub exact: bool,
}

fn undirected_edges(i: &ConnectedFlowInstance) -> Vec<(Vertex, Vertex)> {
    let mut es: BTreeSet<(Vertex, Vertex)> = BTreeSet::new();
    for e in &i.edges {
        let (a, b) = (e.tail.min(e.head), e.tail.max(e.head));
        es.insert((a, b));
    }
    es.into_iter().collect()
}

fn branch_cover(
    edges: &[(Vertex, Vertex)],
    chosen: &mut BTreeSet<Vertex>,
    budget: usize,
    best: &mut Option<BTreeSet<Vertex>>,
) {
    if let Some(b) = best {
        if chosen.len() >= b.len() {
            return;
        }
    }
    let uncovered = edges
        .iter()
        .find(|(u, v)| !chosen.contains(u) && !chosen.contains(v));
    match uncovered {
        None => {
            if best.as_ref().map_or(true, |b| chosen.len() < b.len()) {
                *best = Some(chosen.clone());
            }
        }
        Some(&(u, v)) => {
            if chosen.len() >= budget {
                return;
            }
            for w in [u, v] {
                chosen.insert(w);
                branch_cover(edges, chosen, budget, best);
                chosen.remove(&w);
            }
        }
    }
}

/// Exact minimum vertex cover by bounded branching when it fits in k_max,
/// otherwise a maximal-matching 2-approximation flagged inexact.
pub fn compute_vertex_cover(i: &ConnectedFlowInstance, k_max: usize) -> VertexCover {
    let edges = undirected_edges(i);
    let mut best = None;
    branch_cover(&edges, &mut BTreeSet::new(), k_max, &mut best);
    if let Some(vertices) = best {
        return VertexCover {
            vertices,
            exact: true,
        };
    }
    let mut cover = BTreeSet::new();
    for &(u, v) in &edges {
        if !cover.contains(&u) && !cover.contains(&v) {
            cover.insert(u);
            cover.insert(v);
        }
    }
    VertexCover {
        vertices: cover,
        exact: false,
    }
}

pub fn is_vertex_cover(i: &ConnectedFlowInstance, x: &BTreeSet<Vertex>) -> bool {
    i.edges
        .iter()
        .all(|e| x.contains(&e.tail) || x.contains(&e.head))
}

/// Subdivided instance plus, per new edge id, the original edge whose
/// multiplicity it carries (None for zero-cost second halves).
#[derive(Debug, Clone)]
pub struct Subdivided {
    pub inst: ConnectedFlowInstance,
    pub back: Vec<Option<usize>>,
}

/// Replace every edge inside X by a 2-edge path through a fresh demand-free
/// vertex: full cost then zero, capacity preserved. X becomes independent.
pub fn subdivide_cover_edges(i: &ConnectedFlowInstance, x: &BTreeSet<Vertex>) -> Subdivided {
    let mut edges: Vec<Edge> = Vec::new();
    let mut back: Vec<Option<usize>> = Vec::new();
    let mut next = i.n + 1;
    for (eid, e) in i.edges.iter().enumerate() {
        if x.contains(&e.tail) && x.contains(&e.head) {
            let y = next;
            next += 1;
            edges.push(Edge {
                tail: e.tail,
                head: y,
                cost: e.cost,
                cap: e.cap,
            });
            back.push(Some(eid));
            edges.push(Edge {
                tail: y,
                head: e.head,
                cost: 0,
                cap: e.cap,
            });
            back.push(None);
        } else {
            edges.push(*e);
            back.push(Some(eid));
        }
    }
    let inst = ConnectedFlowInstance::new(next - 1, edges, i.demand.clone())
        .expect("subdivision preserves validity");
    Subdivided { inst, back }
}

// DP key: canonical partition labels over X′ positions, in/out counters.
type Key = (Vec<u8>, Vec<u64>, Vec<u64>);
type Entry = (u64, Vec<u64>); // cost, flow on the gadgeted instance

fn canon(blocks: &mut [u8]) {
    let mut map = [u8::MAX; 256];
    let mut next = 0u8;
    for b in blocks.iter_mut() {
        if map[*b as usize] == u8::MAX {
            map[*b as usize] = next;
            next += 1;
        }
        *b = map[*b as usize];
    }
}

fn insert_min(t: &mut BTreeMap<Key, Entry>, key: Key, entry: Entry) {
    match t.get_mut(&key) {
        Some(cur) => {
            if entry.0 < cur.0 || (entry.0 == cur.0 && entry.1 < cur.1) {
                *cur = entry;
            }
        }
        None => {
            t.insert(key, entry);
        }
    }
}

/// All h-vectors with h[i] ≤ bounds[i], grouped by coordinate sum.
fn vectors_by_sum(bounds: &[u64], sum_cap: u64) -> BTreeMap<u64, Vec<Vec<u64>>> {
    let mut out: BTreeMap<u64, Vec<Vec<u64>>> = BTreeMap::new();
    let mut cur = vec![0u64; bounds.len()];
    fn rec(
        bounds: &[u64],
        idx: usize,
        sum: u64,
        sum_cap: u64,
        cur: &mut Vec<u64>,
        out: &mut BTreeMap<u64, Vec<Vec<u64>>>,
    ) {
        if idx == bounds.len() {
            out.entry(sum).or_default().push(cur.clone());
            return;
        }
        for h in 0..=bounds[idx].min(sum_cap - sum) {
            cur[idx] = h;
            rec(bounds, idx + 1, sum + h, sum_cap, cur, out);
        }
        cur[idx] = 0;
    }
    rec(bounds, 0, 0, sum_cap, &mut cur, &mut out);
    out
}

/// Degree-vector DP over the independent set B′ for one guessed X′, with
/// stored counters confined to the ±4k window around the relaxation r.
/// Returns the best (cost, flow-on-gadgeted-instance).
pub fn dp_sweep(
    gi: &ConnectedFlowInstance,
    xprime: &[Vertex],
    r: &FlowAssignment,
    k: usize,
) -> Result<Option<Entry>> {
    let kp = xprime.len();
    if kp == 0 {
        // nothing can connect unless no flow is needed at all
        return Ok(if gi.demand.values().all(|&d| d == 0) {
            Some((0, vec![0; gi.edges.len()]))
        } else {
            None
        });
    }
    let bprime: Vec<Vertex> = (1..=gi.n).filter(|v| !xprime.contains(v)).collect();
    let window = 4 * k as u64;
    let global_cap = gi.max_demand().saturating_mul(gi.n as u64);

    // prefix sums of r around each cover vertex
    let mut t: BTreeMap<Key, Entry> = BTreeMap::new();
    t.insert(
        ((0..kp as u8).collect(), vec![0; kp], vec![0; kp]),
        (0, vec![0; gi.edges.len()]),
    );
    let mut r_in = vec![0u64; kp];
    let mut r_out = vec![0u64; kp];
    for &bj in &bprime {
        // edge ids and caps between bj and each cover vertex
        let e_in: Vec<Option<usize>> = xprime.iter().map(|&x| gi.edge_id(bj, x)).collect();
        let e_out: Vec<Option<usize>> = xprime.iter().map(|&x| gi.edge_id(x, bj)).collect();
        for i in 0..kp {
            if let Some(id) = e_in[i] {
                r_in[i] += r.get(id);
            }
            if let Some(id) = e_out[i] {
                r_out[i] += r.get(id);
            }
        }
        let win_in: Vec<(u64, u64)> = (0..kp)
            .map(|i| (r_in[i].saturating_sub(window), r_in[i] + window))
            .collect();
        let win_out: Vec<(u64, u64)> = (0..kp)
            .map(|i| (r_out[i].saturating_sub(window), r_out[i] + window))
            .collect();
        let dem_cap =
            |x: Vertex| gi.dem(x).unwrap_or(u64::MAX);
        let sum_cap = match gi.dem(bj) {
            Some(d) => d,
            None => global_cap,
        };

        let mut nt: BTreeMap<Key, Entry> = BTreeMap::new();
        for ((blocks, cin, cout), entry) in &t {
            // h_in[i] = mult of (bj, x_i): raises c_in of x_i
            let hb_in: Vec<u64> = (0..kp)
                .map(|i| match e_in[i] {
                    Some(id) => {
                        let cap = match gi.edges[id].cap {
                            Capacity::Finite(c) => c,
                            Capacity::Unbounded => u64::MAX,
                        };
                        cap.min(win_in[i].1 - cin[i].min(win_in[i].1))
                            .min(dem_cap(xprime[i]).saturating_sub(cin[i]))
                    }
                    None => 0,
                })
                .collect();
            let hb_out: Vec<u64> = (0..kp)
                .map(|i| match e_out[i] {
                    Some(id) => {
                        let cap = match gi.edges[id].cap {
                            Capacity::Finite(c) => c,
                            Capacity::Unbounded => u64::MAX,
                        };
                        cap.min(win_out[i].1 - cout[i].min(win_out[i].1))
                            .min(dem_cap(xprime[i]).saturating_sub(cout[i]))
                    }
                    None => 0,
                })
                .collect();
            let ins = vectors_by_sum(&hb_in, sum_cap);
            let outs = vectors_by_sum(&hb_out, sum_cap);
            for (s, hins) in &ins {
                if gi.is_demand(bj) && *s != gi.dem(bj).unwrap() {
                    continue;
                }
                let houts = match outs.get(s) {
                    Some(v) => v,
                    None => continue,
                };
                for hin in hins {
                    for hout in houts {
                        let mut cin2 = cin.clone();
                        let mut cout2 = cout.clone();
                        let mut cost = entry.0;
                        let mut flow = entry.1.clone();
                        let mut ok = true;
                        for i in 0..kp {
                            cin2[i] += hin[i];
                            cout2[i] += hout[i];
                            if cin2[i] < win_in[i].0
                                || cin2[i] > win_in[i].1
                                || cout2[i] < win_out[i].0
                                || cout2[i] > win_out[i].1
                            {
                                ok = false;
                                break;
                            }
                            if hin[i] > 0 {
                                let id = e_in[i].unwrap();
                                let add = gi.edges[id]
                                    .cost
                                    .checked_mul(hin[i])
                                    .ok_or(Error::Overflow)?;
                                cost = cost.checked_add(add).ok_or(Error::Overflow)?;
                                flow[id] += hin[i];
                            }
                            if hout[i] > 0 {
                                let id = e_out[i].unwrap();
                                let add = gi.edges[id]
                                    .cost
                                    .checked_mul(hout[i])
                                    .ok_or(Error::Overflow)?;
                                cost = cost.checked_add(add).ok_or(Error::Overflow)?;
                                flow[id] += hout[i];
                            }
                        }
                        if !ok {
                            continue;
                        }
                        // blocks touched by bj merge through it
                        let mut bl = blocks.clone();
                        let touched: Vec<u8> = (0..kp)
                            .filter(|&i| hin[i] + hout[i] > 0)
                            .map(|i| bl[i])
                            .collect();
                        if let Some(&first) = touched.first() {
                            for b in bl.iter_mut() {
                                if touched.contains(b) {
                                    *b = first;
                                }
                            }
                        }
                        canon(&mut bl);
                        insert_min(&mut nt, (bl, cin2, cout2), (cost, flow));
                    }
                }
            }
        }
        t = nt;
        if t.is_empty() {
            return Ok(None);
        }
    }
    // accept single-block entries with c_in = c_out and demands met
    let mut best: Option<Entry> = None;
    for ((blocks, cin, cout), entry) in t {
        if blocks.iter().any(|&b| b != 0) || cin != cout {
            continue;
        }
        if (0..kp).any(|i| gi.dem(xprime[i]).map_or(false, |d| cin[i] != d)) {
            continue;
        }
        if best
            .as_ref()
            .map_or(true, |b| entry.0 < b.0 || (entry.0 == b.0 && entry.1 < b.1))
        {
            best = Some(entry);
        }
    }
    Ok(best)
}

/// Build the gadgeted instance for one X′: drop unvisited cover vertices'
/// edges, add a unit-demand vertex b_x per x ∈ X′ ∖ D with zero-cost
/// unit-capacity edges both ways. Returns it plus the back-mapping from
/// its edges to subdivided-instance edges.
fn gadget_instance(
    sub: &Subdivided,
    x: &BTreeSet<Vertex>,
    xprime: &[Vertex],
) -> Result<(ConnectedFlowInstance, Vec<Option<usize>>)> {
    let si = &sub.inst;
    let dropped: BTreeSet<Vertex> = x
        .iter()
        .copied()
        .filter(|v| !xprime.contains(v))
        .collect();
    let mut edges = Vec::new();
    let mut back = Vec::new();
    for (eid, e) in si.edges.iter().enumerate() {
        if dropped.contains(&e.tail) || dropped.contains(&e.head) {
            continue;
        }
        edges.push(*e);
        back.push(Some(eid));
    }
    let mut demand = si.demand.clone();
    let mut next = si.n + 1;
    for &xv in xprime {
        if si.is_demand(xv) {
            continue;
        }
        let b = next;
        next += 1;
        demand.insert(b, 1);
        edges.push(Edge {
            tail: xv,
            head: b,
            cost: 0,
            cap: Capacity::Finite(1),
        });
        back.push(None);
        edges.push(Edge {
            tail: b,
            head: xv,
            cost: 0,
            cap: Capacity::Finite(1),
        });
        back.push(None);
    }
    let gi = ConnectedFlowInstance::new(next - 1, edges, demand)?;
    Ok((gi, back))
}

fn solve_one_xprime(
    i: &ConnectedFlowInstance,
    sub: &Subdivided,
    x: &BTreeSet<Vertex>,
    xprime: &[Vertex],
    k: usize,
) -> Result<Option<(u64, FlowAssignment)>> {
    let (gi, back) = gadget_instance(sub, x, xprime)?;
    if xprime.is_empty() {
        return Ok(if gi.demand.values().all(|&d| d == 0) {
            Some((0, i.zero_flow()))
        } else {
            None
        });
    }
    let rel = solve_relaxation(&gi)?;
    if rel.status != SolveStatus::Optimal {
        return Ok(None);
    }
    let hit = match dp_sweep(&gi, xprime, &rel.flow, k)? {
        Some(hit) => hit,
        None => return Ok(None),
    };
    // map gadgeted flow back to the original edges
    let mut f = i.zero_flow();
    for (geid, m) in hit.1.iter().enumerate() {
        if *m == 0 {
            continue;
        }
        if let Some(seid) = back[geid] {
            if let Some(oeid) = sub.back[seid] {
                f.set(oeid, f.get(oeid) + m);
            }
        }
    }
    let rep = verify_solution(i, &f)?;
    if !rep.all_ok() {
        return Ok(None);
    }
    debug_assert_eq!(rep.cost, hit.0);
    Ok(Some((rep.cost, f)))
}

/// Exact Connected Flow given a vertex cover: minimum over all X′ ⊆ X.
pub fn solve_vc_fpt(i: &ConnectedFlowInstance, x: &BTreeSet<Vertex>) -> Result<OracleResult> {
    solve_vc_fpt_threads(i, x, 1)
}

pub fn solve_vc_fpt_threads(
    i: &ConnectedFlowInstance,
    x: &BTreeSet<Vertex>,
    threads: usize,
) -> Result<OracleResult> {
    if !is_vertex_cover(i, x) {
        return Err(Error::Precondition("given set is not a vertex cover".into()));
    }
    let k = x.len();
    let sub = subdivide_cover_edges(i, x);
    let xs: Vec<Vertex> = x.iter().copied().collect();
    // subsets in increasing popcount then lexicographic order; subsets that
    // exclude a positive-demand cover vertex cannot host a valid solution
    let mut masks: Vec<u32> = (0..(1u32 << k)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let masks: Vec<u32> = masks
        .into_iter()
        .filter(|m| {
            xs.iter().enumerate().all(|(idx, &xv)| {
                (m >> idx) & 1 == 1 || i.dem(xv).unwrap_or(0) == 0
            })
        })
        .collect();

    let run = |mask: u32| -> Result<Option<(u64, FlowAssignment)>> {
        let xprime: Vec<Vertex> = xs
            .iter()
            .enumerate()
            .filter(|(idx, _)| (mask >> idx) & 1 == 1)
            .map(|(_, &v)| v)
            .collect();
        solve_one_xprime(i, &sub, x, &xprime, k)
    };

    let pick = |a: Option<(u64, FlowAssignment)>, b: Option<(u64, FlowAssignment)>| match (a, b) {
        (None, y) => y,
        (x, None) => x,
        (Some(p), Some(q)) => {
            if q.0 < p.0 || (q.0 == p.0 && q.1.mult < p.1.mult) {
                Some(q)
            } else {
                Some(p)
            }
        }
    };

    let best: Option<(u64, FlowAssignment)> = if threads <= 1 {
        let mut best = None;
        for &m in &masks {
            best = pick(best, run(m)?);
        }
        best
    } else {
        let chunks: Vec<&[u32]> = masks.chunks(masks.len().div_ceil(threads).max(1)).collect();
        let results: Vec<Result<Option<(u64, FlowAssignment)>>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| {
                    s.spawn(move || {
                        let mut local = None;
                        for &m in chunk {
                            local = pick(local, run(m)?);
                        }
                        Ok(local)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mut best = None;
        for r in results {
            best = pick(best, r?);
        }
        best
    };

    Ok(match best {
        Some((cost, flow)) => OracleResult {
            status: SolveStatus::Optimal,
            cost,
            flow,
            nodes_explored: 0,
        },
        None => OracleResult {
            status: SolveStatus::Infeasible,
            cost: 0,
            flow: i.zero_flow(),
            nodes_explored: 0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_cf;
    use crate::oracle::solve_exact;

    fn triangle() -> ConnectedFlowInstance {
        parse_cf("p cf 3 3 3\nd 1 1\nd 2 1\nd 3 1\ne 1 2 1 inf\ne 2 3 1 inf\ne 3 1 1 inf\n")
            .unwrap()
    }

    fn twin_cycles() -> ConnectedFlowInstance {
        parse_cf(
            "p cf 4 6 4\nd 1 1\nd 2 1\nd 3 1\nd 4 1\n\
             e 1 2 1 inf\ne 2 1 1 inf\ne 3 4 1 inf\ne 4 3 1 inf\ne 2 3 5 inf\ne 4 1 5 inf\n",
        )
        .unwrap()
    }

    #[test]
    fn cover_path() {
        let i = parse_cf("p cf 3 2 0\ne 1 2 1 inf\ne 2 3 1 inf\n").unwrap();
        let c = compute_vertex_cover(&i, 3);
        assert!(c.exact);
        assert_eq!(c.vertices, BTreeSet::from([2]));
    }

    #[test]
    fn cover_k4() {
        let mut lines = String::from("p cf 4 12 0\n");
        for u in 1..=4 {
            for v in 1..=4 {
                if u != v {
                    lines.push_str(&format!("e {} {} 1 inf\n", u, v));
                }
            }
        }
        let i = parse_cf(&lines).unwrap();
        let c = compute_vertex_cover(&i, 4);
        assert!(c.exact);
        assert_eq!(c.vertices.len(), 3);
    }

    #[test]
    fn cover_edgeless() {
        let i = parse_cf("p cf 3 0 0\n").unwrap();
        let c = compute_vertex_cover(&i, 3);
        assert!(c.exact && c.vertices.is_empty());
    }

    #[test]
    fn subdivision_makes_independent() {
        let i = triangle();
        let x = BTreeSet::from([1, 2]);
        let sub = subdivide_cover_edges(&i, &x);
        assert_eq!(sub.inst.n, 4); // one new vertex for edge (1,2)
        assert!(sub.inst.edge_id(1, 2).is_none());
        assert!(is_vertex_cover(&sub.inst, &x));
        // identity when X already independent
        let tc = twin_cycles();
        let x2 = BTreeSet::from([2, 4]);
        let sub2 = subdivide_cover_edges(&tc, &x2);
        assert_eq!(sub2.inst.n, tc.n);
    }

    #[test]
    fn k3_subdivision_count() {
        let mut lines = String::from("p cf 3 6 0\n");
        for u in 1..=3 {
            for v in 1..=3 {
                if u != v {
                    lines.push_str(&format!("e {} {} 1 inf\n", u, v));
                }
            }
        }
        let i = parse_cf(&lines).unwrap();
        let x = BTreeSet::from([1, 2, 3]);
        let sub = subdivide_cover_edges(&i, &x);
        assert_eq!(sub.inst.n, 9); // one per directed inside-X edge
    }

    #[test]
    fn fpt_triangle() {
        let i = triangle();
        let r = solve_vc_fpt(&i, &BTreeSet::from([1, 2])).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.cost, 3);
        assert!(verify_solution(&i, &r.flow).unwrap().all_ok());
    }

    #[test]
    fn fpt_twin_cycles() {
        let i = twin_cycles();
        let r = solve_vc_fpt(&i, &BTreeSet::from([2, 4])).unwrap();
        assert_eq!(r.cost, 12);
        assert!(verify_solution(&i, &r.flow).unwrap().all_ok());
    }

    #[test]
    fn fpt_star_mvtsp() {
        let i = parse_cf(
            "p cf 3 4 2\nd 1 1\nd 3 1\ne 1 2 1 inf\ne 2 3 1 inf\ne 3 2 1 inf\ne 2 1 1 inf\n",
        )
        .unwrap();
        let r = solve_vc_fpt(&i, &BTreeSet::from([2])).unwrap();
        assert_eq!(r.cost, 4);
    }

    #[test]
    fn fpt_infeasible() {
        let i = parse_cf("p cf 2 1 1\nd 2 1\ne 2 1 1 inf\n").unwrap();
        let r = solve_vc_fpt(&i, &BTreeSet::from([1])).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn fpt_zero_demands() {
        let i = parse_cf("p cf 3 3 3\nd 1 0\nd 2 0\nd 3 0\ne 1 2 1 inf\ne 2 3 1 inf\ne 3 1 1 inf\n")
            .unwrap();
        let r = solve_vc_fpt(&i, &BTreeSet::from([1, 2])).unwrap();
        assert_eq!(r.cost, 0);
        assert!(r.flow.is_zero());
    }

    #[test]
    fn fpt_matches_oracle_and_threads_agree() {
        let i = twin_cycles();
        let x = BTreeSet::from([2, 4]);
        let a = solve_vc_fpt_threads(&i, &x, 1).unwrap();
        let b = solve_vc_fpt_threads(&i, &x, 3).unwrap();
        assert_eq!(a.cost, b.cost);
        assert_eq!(a.flow, b.flow);
        assert_eq!(a.cost, solve_exact(&i, None).unwrap().cost);
    }
}
