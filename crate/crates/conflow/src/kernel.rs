//! Polynomial kernel for MVTSP parameterized by vertex cover size:
//! normalize the relaxation so its cover/independent-set supports are
//! forests, classify the independent set, keep a few cheapest "anchor"
//! vertices per class and contract the rest into single vertices.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::instance::{
    mvtsp_to_cf, ConnectedFlowInstance, FlowAssignment, MVTSPInstance, Vertex,
};
use crate::relax::{relaxed_flow_valid, solve_relaxation};
use crate::oracle::SolveStatus;

#[derive(Debug, Clone)]
pub struct Classification {
    pub b_ij: BTreeMap<(Vertex, Vertex), Vec<Vertex>>,
    pub y: Vec<Vertex>,
    pub f_fwd: BTreeSet<(Vertex, Vertex)>,
    pub f_bwd: BTreeSet<(Vertex, Vertex)>,
}

#[derive(Debug, Clone)]
pub struct AnchorSets {
    pub fwd: BTreeMap<(Vertex, Vertex, Vertex), Vec<Vertex>>,
    pub bwd: BTreeMap<(Vertex, Vertex, Vertex), Vec<Vertex>>,
}

#[derive(Debug, Clone)]
pub struct ContractionEntry {
    pub i: Vertex,
    pub j: Vertex,
    pub r_id: Vertex, // kernel numbering
    pub demand: u64,
    pub fixed_cost: u64,
    pub members: Vec<Vertex>, // original numbering
}

#[derive(Debug, Clone)]
pub struct ContractionMap {
    pub entries: Vec<ContractionEntry>,
    pub to_kernel: BTreeMap<Vertex, Vertex>, // kept original id -> kernel id
}

impl ContractionMap {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "r {} {} {} {} {}",
                e.i, e.j, e.r_id, e.demand, e.fixed_cost
            ));
            for &v in &e.members {
                out.push_str(&format!(" {}", v));
            }
            out.push('\n');
        }
        out
    }
}

fn anchor_size(k: usize) -> usize {
    8 * k * k + 2
}

/// Find a cycle in an undirected simple graph, returned as the cyclic list
/// of (vertex, edge-key) steps. Deterministic: smallest start, sorted adjacency.
fn find_cycle(
    adj: &BTreeMap<Vertex, Vec<(Vertex, usize)>>,
) -> Option<Vec<(Vertex, usize)>> {
    let mut color: BTreeMap<Vertex, u8> = BTreeMap::new();
    for &start in adj.keys() {
        if color.contains_key(&start) {
            continue;
        }
        // iterative DFS keeping the current path
        let mut path: Vec<(Vertex, Option<usize>, usize)> = vec![(start, None, 0)];
        let mut on_path: BTreeMap<Vertex, usize> = BTreeMap::new();
        on_path.insert(start, 0);
        color.insert(start, 1);
        while let Some(&(u, pe, next)) = path.last() {
            let nbrs = &adj[&u];
            if next >= nbrs.len() {
                path.pop();
                on_path.remove(&u);
                color.insert(u, 2);
                continue;
            }
            path.last_mut().unwrap().2 += 1;
            let (w, eid) = nbrs[next];
            if Some(eid) == pe {
                continue;
            }
            if let Some(&pos) = on_path.get(&w) {
                // back edge: cycle = path[pos..] plus the closing edge
                let mut cyc: Vec<(Vertex, usize)> = Vec::new();
                for idx in pos..path.len() {
                    let (v, _, _) = path[idx];
                    let e_in = if idx + 1 < path.len() {
                        path[idx + 1].1.unwrap()
                    } else {
                        eid
                    };
                    cyc.push((v, e_in)); // edge leaving v towards next vertex
                }
                return Some(cyc);
            }
            if !color.contains_key(&w) {
                color.insert(w, 1);
                on_path.insert(w, path.len());
                path.push((w, Some(eid), 0));
            }
        }
    }
    None
}

/// Cancel alternating cycles in one bipartite support family. `edge_ids`
/// maps the family's undirected pairs to instance edge ids.
fn cancel_cycles(
    cf: &ConnectedFlowInstance,
    r: &mut FlowAssignment,
    family: impl Fn(&ConnectedFlowInstance, &FlowAssignment) -> Vec<usize>,
) -> Result<()> {
    loop {
        let ids = family(cf, r);
        let mut adj: BTreeMap<Vertex, Vec<(Vertex, usize)>> = BTreeMap::new();
        for &id in &ids {
            let e = &cf.edges[id];
            adj.entry(e.tail).or_default().push((e.head, id));
            adj.entry(e.head).or_default().push((e.tail, id));
        }
        for v in adj.values_mut() {
            v.sort();
        }
        let cyc = match find_cycle(&adj) {
            Some(c) => c,
            None => return Ok(()),
        };
        // alternate +1/-1 around the cycle; pin the smallest edge to -1
        let edges: Vec<usize> = cyc.iter().map(|&(_, e)| e).collect();
        let pin = edges
            .iter()
            .enumerate()
            .min_by_key(|(_, &e)| (cf.edges[e].tail, cf.edges[e].head))
            .map(|(idx, _)| idx)
            .unwrap();
        let sign_of = |idx: usize| -> i64 {
            if (idx + pin) % 2 == 0 {
                -1
            } else {
                1
            }
        };
        let delta: i128 = edges
            .iter()
            .enumerate()
            .map(|(idx, &e)| sign_of(idx) as i128 * cf.edges[e].cost as i128)
            .sum();
        if delta != 0 {
            return Err(Error::Precondition(
                "alternating cycle with nonzero cost: relaxation is not optimal".into(),
            ));
        }
        let step = edges
            .iter()
            .enumerate()
            .filter(|(idx, _)| sign_of(*idx) < 0)
            .map(|(_, &e)| r.get(e))
            .min()
            .unwrap();
        debug_assert!(step > 0);
        for (idx, &e) in edges.iter().enumerate() {
            let m = r.get(e);
            r.set(
                e,
                if sign_of(idx) < 0 { m - step } else { m + step },
            );
        }
    }
}

fn fwd_support(cf: &ConnectedFlowInstance, r: &FlowAssignment, x: &BTreeSet<Vertex>) -> Vec<usize> {
    r.support()
        .filter(|&id| x.contains(&cf.edges[id].tail) && !x.contains(&cf.edges[id].head))
        .collect()
}

fn bwd_support(cf: &ConnectedFlowInstance, r: &FlowAssignment, x: &BTreeSet<Vertex>) -> Vec<usize> {
    r.support()
        .filter(|&id| !x.contains(&cf.edges[id].tail) && x.contains(&cf.edges[id].head))
        .collect()
}

/// Cancel alternating cycles until the cover/independent-set supports of r
/// are forests in both directions. Cost is unchanged; errors if a cycle
/// could strictly improve the cost (r not optimal).
pub fn acyclify_relaxation(
    m: &MVTSPInstance,
    x: &BTreeSet<Vertex>,
    r: &FlowAssignment,
) -> Result<FlowAssignment> {
    let cf = mvtsp_to_cf(m);
    let mut r = r.clone();
    cancel_cycles(&cf, &mut r, |cf, r| fwd_support(cf, r, x))?;
    cancel_cycles(&cf, &mut r, |cf, r| bwd_support(cf, r, x))?;
    Ok(r)
}

/// Partition the independent set: b lands in B_ij when its support touches
/// exactly one in-neighbor x_i and one out-neighbor x_j; the rest is Y.
pub fn classify(
    m: &MVTSPInstance,
    x: &BTreeSet<Vertex>,
    r: &FlowAssignment,
) -> Classification {
    let cf = mvtsp_to_cf(m);
    let mut f_fwd = BTreeSet::new();
    let mut f_bwd = BTreeSet::new();
    let mut ins: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
    let mut outs: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
    for id in r.support() {
        let e = &cf.edges[id];
        match (x.contains(&e.tail), x.contains(&e.head)) {
            (true, false) => {
                f_fwd.insert((e.tail, e.head));
                ins.entry(e.head).or_default().push(e.tail);
            }
            (false, true) => {
                f_bwd.insert((e.tail, e.head));
                outs.entry(e.tail).or_default().push(e.head);
            }
            _ => {}
        }
    }
    let mut b_ij: BTreeMap<(Vertex, Vertex), Vec<Vertex>> = BTreeMap::new();
    let mut y = Vec::new();
    for b in (1..=m.n).filter(|v| !x.contains(v)) {
        let bi = ins.get(&b).map(|v| v.as_slice()).unwrap_or(&[]);
        let bo = outs.get(&b).map(|v| v.as_slice()).unwrap_or(&[]);
        if bi.len() == 1 && bo.len() == 1 {
            b_ij.entry((bi[0], bo[0])).or_default().push(b);
        } else {
            y.push(b);
        }
    }
    Classification { b_ij, y, f_fwd, f_bwd }
}

/// For each class B_ij and cover vertex x_l, the vertices for which
/// rerouting x_i→v flow to x_l→v (resp. v→x_j to v→x_l) is cheapest.
/// Ties break toward the smallest vertex id; missing edges sort last.
pub fn anchor_sets(m: &MVTSPInstance, x: &BTreeSet<Vertex>, cls: &Classification) -> AnchorSets {
    let k = x.len();
    let take = anchor_size(k);
    let mut fwd = BTreeMap::new();
    let mut bwd = BTreeMap::new();
    for (&(xi, xj), members) in &cls.b_ij {
        for &xl in x {
            let key_fwd = |v: Vertex| -> (u8, i128, Vertex) {
                match m.cost.get(&(xl, v)) {
                    Some(&c) => (0, c as i128 - m.cost[&(xi, v)] as i128, v),
                    None => (1, 0, v),
                }
            };
            let key_bwd = |v: Vertex| -> (u8, i128, Vertex) {
                match m.cost.get(&(v, xl)) {
                    Some(&c) => (0, c as i128 - m.cost[&(v, xj)] as i128, v),
                    None => (1, 0, v),
                }
            };
            let mut vs = members.clone();
            vs.sort_by_key(|&v| key_fwd(v));
            fwd.insert((xi, xj, xl), vs.iter().copied().take(take).collect());
            vs.sort_by_key(|&v| key_bwd(v));
            bwd.insert((xi, xj, xl), vs.iter().copied().take(take).collect::<Vec<_>>());
        }
    }
    AnchorSets { fwd, bwd }
}

/// Kernelize an MVTSP instance given a vertex cover of its support graph.
/// Vertices are renumbered: kept originals first in ascending order, then
/// one contracted vertex per nonempty remainder class.
pub fn kernelize(
    m: &MVTSPInstance,
    x: &BTreeSet<Vertex>,
) -> Result<(MVTSPInstance, ContractionMap)> {
    if x.iter().any(|&v| v == 0 || v > m.n) {
        return Err(Error::Precondition("cover vertex out of range".into()));
    }
    if m.cost.keys().any(|&(u, v)| !x.contains(&u) && !x.contains(&v)) {
        return Err(Error::Precondition(
            "given set is not a vertex cover of the support graph".into(),
        ));
    }
    if m.demand.iter().any(|&d| d == 0) {
        return Err(Error::Precondition(
            "kernelization requires positive demand on every vertex".into(),
        ));
    }
    let cf = mvtsp_to_cf(m);
    let rel = solve_relaxation(&cf)?;
    if rel.status != SolveStatus::Optimal {
        return Err(Error::Precondition("relaxation infeasible".into()));
    }
    let r = acyclify_relaxation(m, x, &rel.flow)?;
    debug_assert!(relaxed_flow_valid(&cf, &r).unwrap_or(false));
    let cls = classify(m, x, &r);
    let anchors = anchor_sets(m, x, &cls);

    // remainder classes; contracting fewer than 2 vertices gains nothing
    // and would break idempotence
    let mut remainders: BTreeMap<(Vertex, Vertex), Vec<Vertex>> = BTreeMap::new();
    for (&(xi, xj), members) in &cls.b_ij {
        let mut anchored: BTreeSet<Vertex> = BTreeSet::new();
        for &xl in x.iter() {
            anchored.extend(&anchors.fwd[&(xi, xj, xl)]);
            anchored.extend(&anchors.bwd[&(xi, xj, xl)]);
        }
        let rest: Vec<Vertex> = members
            .iter()
            .copied()
            .filter(|v| !anchored.contains(v))
            .collect();
        if rest.len() >= 2 {
            remainders.insert((xi, xj), rest);
        }
    }

    let contracted: BTreeSet<Vertex> = remainders.values().flatten().copied().collect();
    let kept: Vec<Vertex> = (1..=m.n).filter(|v| !contracted.contains(v)).collect();
    let to_kernel: BTreeMap<Vertex, Vertex> = kept
        .iter()
        .enumerate()
        .map(|(idx, &v)| (v, idx + 1))
        .collect();

    let mut cost: BTreeMap<(Vertex, Vertex), u64> = BTreeMap::new();
    for (&(u, v), &c) in &m.cost {
        if let (Some(&ku), Some(&kv)) = (to_kernel.get(&u), to_kernel.get(&v)) {
            cost.insert((ku, kv), c);
        }
    }
    let mut demand: Vec<u64> = kept.iter().map(|&v| m.dem(v)).collect();
    let mut entries = Vec::new();
    let mut next = kept.len() + 1;
    for ((xi, xj), members) in &remainders {
        let r_id = next;
        next += 1;
        let mut dem_sum: u64 = 0;
        let mut fixed: u64 = 0;
        for &v in members {
            let fin = r.get(cf.edge_id(*xi, v).unwrap());
            let fout = r.get(cf.edge_id(v, *xj).unwrap());
            dem_sum = dem_sum.checked_add(fin).ok_or(Error::Overflow)?;
            let c = fin
                .checked_mul(m.cost[&(*xi, v)])
                .and_then(|a| fout.checked_mul(m.cost[&(v, *xj)]).and_then(|b| a.checked_add(b)))
                .ok_or(Error::Overflow)?;
            fixed = fixed.checked_add(c).ok_or(Error::Overflow)?;
        }
        cost.insert((to_kernel[xi], r_id), 0);
        cost.insert((r_id, to_kernel[xj]), 0);
        demand.push(dem_sum);
        entries.push(ContractionEntry {
            i: *xi,
            j: *xj,
            r_id,
            demand: dem_sum,
            fixed_cost: fixed,
            members: members.clone(),
        });
    }
    let km = MVTSPInstance::new(next - 1, cost, demand)?;
    let k = x.len();
    debug_assert!(km.n <= 2 * k + k * k + 2 * k.pow(3) * anchor_size(k));
    Ok((km, ContractionMap { entries, to_kernel }))
}

/// Map a kernel solution back to the original instance: copy flow between
/// kept vertices, and replace flow through each contracted vertex by the
/// normalized relaxation's flow on its members.
pub fn lift_kernel_solution(
    m: &MVTSPInstance,
    km: &MVTSPInstance,
    cm: &ContractionMap,
    r: &FlowAssignment,
    ks: &FlowAssignment,
) -> Result<FlowAssignment> {
    let cf = mvtsp_to_cf(m);
    let kcf = mvtsp_to_cf(km);
    let from_kernel: BTreeMap<Vertex, Vertex> =
        cm.to_kernel.iter().map(|(&o, &k)| (k, o)).collect();
    let mut f = cf.zero_flow();
    for id in ks.support() {
        let mult = ks.get(id);
        let e = &kcf.edges[id];
        match (from_kernel.get(&e.tail), from_kernel.get(&e.head)) {
            (Some(&u), Some(&v)) => {
                let oid = cf.edge_id(u, v).ok_or_else(|| {
                    Error::Invalid(format!("kernel edge ({},{}) missing in original", u, v))
                })?;
                f.set(oid, f.get(oid) + mult);
            }
            _ => {} // contracted-vertex edges handled below
        }
    }
    for e in &cm.entries {
        for &v in &e.members {
            let iin = cf.edge_id(e.i, v).unwrap();
            let iout = cf.edge_id(v, e.j).unwrap();
            f.set(iin, f.get(iin) + r.get(iin));
            f.set(iout, f.get(iout) + r.get(iout));
        }
    }
    Ok(f)
}
