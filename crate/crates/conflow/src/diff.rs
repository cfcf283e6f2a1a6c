//! Symmetric-difference machinery for pairs of flows: decompose the
//! multiset A = supp-difference of s and r into directed tours whose
//! positively oriented arcs come from s-surplus and negatively oriented
//! arcs from r-surplus, changing orientation at every demand vertex; then
//! transfer a mandatory edge set T from s into r along whole tours.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::instance::{ConnectedFlowInstance, FlowAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    FromS,
    FromR,
}

/// A tour arc: instance edge id plus which side of the difference it is on.
/// FromS arcs are traversed in edge direction, FromR arcs against it.
pub type TourArc = (usize, Tag);

#[derive(Debug, Clone)]
pub struct SRTour {
    /// arcs in walk order
    pub arcs: Vec<TourArc>,
    /// cost(FromS arcs) − cost(FromR arcs)
    pub delta: i64,
}

#[derive(Debug, Clone)]
pub struct DiffDecomposition {
    pub tours: Vec<SRTour>,
}

impl DiffDecomposition {
    /// Total arc multiset, for the reconstruction invariant.
    pub fn arc_multiset(&self) -> Vec<TourArc> {
        let mut all: Vec<TourArc> = self
            .tours
            .iter()
            .flat_map(|t| t.arcs.iter().copied())
            .collect();
        all.sort_unstable_by_key(|&(e, tag)| (e, tag == Tag::FromR));
        all
    }
}

fn check_balanced(i: &ConnectedFlowInstance, f: &FlowAssignment, name: &str) -> Result<()> {
    let rep = crate::instance::verify_solution(i, f)?;
    if !(rep.conservation_ok && rep.demands_ok && rep.capacities_ok) {
        return Err(Error::Precondition(format!(
            "{} is not a valid (relaxed) flow: {}",
            name,
            rep.first_violation.map(|v| v.to_string()).unwrap_or_default()
        )));
    }
    Ok(())
}

// Per arc copy: walk departs from dep_vertex and arrives at arr_vertex.
fn endpoints(i: &ConnectedFlowInstance, arc: TourArc) -> (usize, usize) {
    let e = &i.edges[arc.0];
    match arc.1 {
        Tag::FromS => (e.tail, e.head),
        Tag::FromR => (e.head, e.tail),
    }
}

/// Decompose E(G_s) △ E(G_r) (with multiplicities) into tours. Pairing at
/// each vertex matches walk-arrivals with walk-departures: demand vertices
/// pair opposite tags only, others prefer opposite tags and fall back to
/// equal tags; ties broken by smallest edge id. A post-pass splits tours
/// until no vertex sees more than 2 tour arcs in or 2 out.
pub fn decompose_difference(
    i: &ConnectedFlowInstance,
    r: &FlowAssignment,
    s: &FlowAssignment,
) -> Result<DiffDecomposition> {
    check_balanced(i, r, "r")?;
    check_balanced(i, s, "s")?;

    // arc copies in edge-id order
    let mut copies: Vec<TourArc> = Vec::new();
    for id in 0..i.edges.len() {
        let (rv, sv) = (r.get(id), s.get(id));
        if sv > rv {
            for _ in 0..(sv - rv) {
                copies.push((id, Tag::FromS));
            }
        } else if rv > sv {
            for _ in 0..(rv - sv) {
                copies.push((id, Tag::FromR));
            }
        }
    }
    if copies.is_empty() {
        return Ok(DiffDecomposition { tours: Vec::new() });
    }

    // next[k] = arc copy the walk continues with after traversing copy k
    let mut next = vec![usize::MAX; copies.len()];
    for v in 1..=i.n {
        let mut arr_s = Vec::new();
        let mut arr_r = Vec::new();
        let mut dep_s = Vec::new();
        let mut dep_r = Vec::new();
        for (k, &arc) in copies.iter().enumerate() {
            let (dv, av) = endpoints(i, arc);
            if av == v {
                match arc.1 {
                    Tag::FromS => arr_s.push(k),
                    Tag::FromR => arr_r.push(k),
                }
            }
            if dv == v {
                match arc.1 {
                    Tag::FromS => dep_s.push(k),
                    Tag::FromR => dep_r.push(k),
                }
            }
        }
        if i.is_demand(v) {
            // conservation at fixed demand forces these counts to match
            debug_assert_eq!(arr_s.len(), dep_r.len());
            debug_assert_eq!(arr_r.len(), dep_s.len());
            for (a, d) in arr_s.iter().zip(&dep_r) {
                next[*a] = *d;
            }
            for (a, d) in arr_r.iter().zip(&dep_s) {
                next[*a] = *d;
            }
        } else {
            let x = arr_s.len().min(dep_r.len());
            let y = arr_r.len().min(dep_s.len());
            for k in 0..x {
                next[arr_s[k]] = dep_r[k];
            }
            for k in 0..y {
                next[arr_r[k]] = dep_s[k];
            }
            // leftovers pair same-tag; counts balance by conservation
            let rem_as = &arr_s[x..];
            let rem_ds = &dep_s[y..];
            debug_assert_eq!(rem_as.len(), rem_ds.len());
            for (a, d) in rem_as.iter().zip(rem_ds) {
                next[*a] = *d;
            }
            let rem_ar = &arr_r[y..];
            let rem_dr = &dep_r[x..];
            debug_assert_eq!(rem_ar.len(), rem_dr.len());
            for (a, d) in rem_ar.iter().zip(rem_dr) {
                next[*a] = *d;
            }
        }
    }
    debug_assert!(next.iter().all(|&k| k != usize::MAX));

    // extract tours; split whenever a tour has two same-tag arrivals or
    // two same-tag departures at one vertex (swapping the successors of
    // the two arriving copies cuts the tour in two)
    loop {
        let tours = extract_cycles(&copies, &next);
        let mut swap: Option<(usize, usize)> = None;
        'scan: for tour in &tours {
            // tour is a list of copy indices in walk order
            let mut seen: Vec<(usize, Tag, usize)> = Vec::new(); // (vertex, tag, copy) arrivals
            let mut seen_dep: Vec<(usize, Tag, usize)> = Vec::new();
            for &k in tour {
                let (dv, av) = endpoints(i, copies[k]);
                let tag = copies[k].1;
                if let Some(&(_, _, prev)) = seen.iter().find(|&&(w, t, _)| w == av && t == tag) {
                    swap = Some((prev, k));
                    break 'scan;
                }
                seen.push((av, tag, k));
                if let Some(&(_, _, prev)) =
                    seen_dep.iter().find(|&&(w, t, _)| w == dv && t == tag)
                {
                    // swap the arrivals feeding these departures, i.e. the
                    // predecessors; realized by swapping next of those
                    let p1 = tour.iter().position(|&x| next[x] == prev).unwrap();
                    let p2 = tour.iter().position(|&x| next[x] == k).unwrap();
                    swap = Some((tour[p1], tour[p2]));
                    break 'scan;
                }
                seen_dep.push((dv, tag, k));
            }
        }
        match swap {
            Some((a, b)) => next.swap(a, b),
            None => {
                let tours = tours
                    .into_iter()
                    .map(|tour| {
                        let arcs: Vec<TourArc> = tour.iter().map(|&k| copies[k]).collect();
                        let delta = arcs
                            .iter()
                            .map(|&(e, tag)| {
                                let c = i.edges[e].cost as i64;
                                if tag == Tag::FromS {
                                    c
                                } else {
                                    -c
                                }
                            })
                            .sum();
                        SRTour { arcs, delta }
                    })
                    .collect();
                return Ok(DiffDecomposition { tours });
            }
        }
    }
}

fn extract_cycles(copies: &[TourArc], next: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; copies.len()];
    let mut out = Vec::new();
    for start in 0..copies.len() {
        if seen[start] {
            continue;
        }
        let mut cyc = Vec::new();
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            cyc.push(k);
            k = next[k];
        }
        out.push(cyc);
    }
    out
}

/// Build a flow containing every edge of T by augmenting r along the tours
/// of the decomposition that cover T ∖ supp(r). Tours are chosen by
/// smallest delta, ties by first-edge id then tour index.
pub fn transfer_edges(
    i: &ConnectedFlowInstance,
    r: &FlowAssignment,
    s: &FlowAssignment,
    t_edges: &[usize],
) -> Result<FlowAssignment> {
    for &e in t_edges {
        if s.get(e) == 0 {
            let edge = &i.edges[e];
            return Err(Error::Precondition(format!(
                "T edge ({},{}) not in supp(s)",
                edge.tail, edge.head
            )));
        }
    }
    let dec = decompose_difference(i, r, s)?;
    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    for &e in t_edges {
        if r.get(e) > 0 {
            continue; // already covered by r
        }
        let best = dec
            .tours
            .iter()
            .enumerate()
            .filter(|(_, t)| t.arcs.iter().any(|&(id, tag)| id == e && tag == Tag::FromS))
            .min_by_key(|(idx, t)| (t.delta, t.arcs.first().map(|a| a.0), *idx));
        match best {
            Some((idx, _)) => {
                chosen.insert(idx);
            }
            None => {
                return Err(Error::Precondition(format!(
                    "no tour covers T edge id {}",
                    e
                )))
            }
        }
    }
    let mut f = r.clone();
    for idx in chosen {
        for &(e, tag) in &dec.tours[idx].arcs {
            match tag {
                Tag::FromS => f.set(e, f.get(e) + 1),
                Tag::FromR => f.set(e, f.get(e) - 1),
            }
        }
    }
    Ok(f)
}
