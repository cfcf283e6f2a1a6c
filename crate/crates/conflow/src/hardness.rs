//! Hardness-instance generators: 2-vertex-disjoint-paths → Connected Flow,
//! and 3-CNF-SAT → MVTSP via 2-label and scanner gadgets, each with witness
//! constructors and decoders.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{parse_err, Error, Result};
use crate::instance::{
    mvtsp_to_cf, verify_solution, Capacity, ConnectedFlowInstance, Edge, FlowAssignment,
    MVTSPInstance, Vertex,
};
use crate::tw::TreeDecomposition;

// ---------------------------------------------------------------------------
// 2-vertex-disjoint-paths → Connected Flow
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DisjointPathsQuery {
    pub n: usize,
    pub arcs: Vec<(Vertex, Vertex)>,
    pub s1: Vertex,
    pub t1: Vertex,
    pub s2: Vertex,
    pub t2: Vertex,
}

impl DisjointPathsQuery {
    pub fn new(
        n: usize,
        arcs: Vec<(Vertex, Vertex)>,
        s1: Vertex,
        t1: Vertex,
        s2: Vertex,
        t2: Vertex,
    ) -> Result<Self> {
        let ts = [s1, t1, s2, t2];
        if ts.iter().any(|&v| v == 0 || v > n) {
            return Err(Error::Invalid("terminal out of range".into()));
        }
        if BTreeSet::from(ts).len() != 4 {
            return Err(Error::Invalid("terminals must be pairwise distinct".into()));
        }
        for &(u, v) in &arcs {
            if u == 0 || u > n || v == 0 || v > n {
                return Err(Error::Invalid(format!("arc ({},{}) out of range", u, v)));
            }
            if u == v {
                return Err(Error::Invalid(format!("self-loop at {}", u)));
            }
        }
        Ok(DisjointPathsQuery { n, arcs, s1, t1, s2, t2 })
    }

    fn is_terminal(&self, v: Vertex) -> bool {
        v == self.s1 || v == self.t1 || v == self.s2 || v == self.t2
    }
}

/// Parse a plain digraph file: `p dg <n> <m>` then `a <u> <v>` lines.
pub fn parse_digraph(text: &str) -> Result<(usize, Vec<(Vertex, Vertex)>)> {
    let mut n = 0usize;
    let mut arcs = Vec::new();
    let mut seen_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        match t[0] {
            "p" => {
                if seen_header || t.len() != 4 || t[1] != "dg" {
                    return Err(parse_err(ln, "expected 'p dg <n> <m>'"));
                }
                n = t[2]
                    .parse()
                    .map_err(|_| parse_err(ln, "bad vertex count"))?;
                seen_header = true;
            }
            "a" => {
                if !seen_header || t.len() != 3 {
                    return Err(parse_err(ln, "expected 'a <u> <v>' after header"));
                }
                let u = t[1].parse().map_err(|_| parse_err(ln, "bad tail"))?;
                let v = t[2].parse().map_err(|_| parse_err(ln, "bad head"))?;
                arcs.push((u, v));
            }
            _ => return Err(parse_err(ln, format!("unknown line '{}'", t[0]))),
        }
    }
    if !seen_header {
        return Err(parse_err(0, "missing 'p dg' header"));
    }
    Ok((n, arcs))
}

/// The generated instance plus the vertex-splitting maps.
#[derive(Debug, Clone)]
pub struct DisjointPathsInstance {
    pub inst: ConnectedFlowInstance,
    pub v_in: BTreeMap<Vertex, Vertex>,
    pub v_out: BTreeMap<Vertex, Vertex>,
    pub term: BTreeMap<Vertex, Vertex>, // original terminal -> new id
}

/// Split every non-terminal v into v_in → v_out with unit capacity, demand 1
/// on both sources, zero costs, and back edges (t1,s2), (t2,s1): the result
/// is feasible iff the query has two vertex-disjoint paths.
pub fn gen_disjoint_paths_instance(q: &DisjointPathsQuery) -> DisjointPathsInstance {
    let mut v_in = BTreeMap::new();
    let mut v_out = BTreeMap::new();
    let mut term = BTreeMap::new();
    let mut next = 1;
    for v in 1..=q.n {
        if q.is_terminal(v) {
            term.insert(v, next);
            next += 1;
        } else {
            v_in.insert(v, next);
            v_out.insert(v, next + 1);
            next += 2;
        }
    }
    let mut pairs: BTreeSet<(Vertex, Vertex)> = BTreeSet::new();
    for (&v, &vin) in &v_in {
        pairs.insert((vin, v_out[&v]));
    }
    for &(u, v) in &q.arcs {
        let u_src = u == q.s1 || u == q.s2;
        let v_snk = v == q.t1 || v == q.t2;
        match (q.is_terminal(u), q.is_terminal(v)) {
            (true, true) => {
                if (u, v) == (q.s1, q.t1) || (u, v) == (q.s2, q.t2) {
                    pairs.insert((term[&u], term[&v]));
                }
            }
            (true, false) => {
                if u_src {
                    pairs.insert((term[&u], v_in[&v]));
                }
            }
            (false, true) => {
                if v_snk {
                    pairs.insert((v_out[&u], term[&v]));
                }
            }
            (false, false) => {
                pairs.insert((v_out[&u], v_in[&v]));
            }
        }
    }
    pairs.insert((term[&q.t1], term[&q.s2]));
    pairs.insert((term[&q.t2], term[&q.s1]));
    let edges: Vec<Edge> = pairs
        .into_iter()
        .map(|(tail, head)| Edge { tail, head, cost: 0, cap: Capacity::Finite(1) })
        .collect();
    let demand = BTreeMap::from([(term[&q.s1], 1), (term[&q.s2], 1)]);
    let inst = ConnectedFlowInstance::new(next - 1, edges, demand)
        .expect("split construction is valid");
    DisjointPathsInstance { inst, v_in, v_out, term }
}

fn check_path(q: &DisjointPathsQuery, p: &[Vertex], s: Vertex, t: Vertex) -> Result<()> {
    if p.first() != Some(&s) || p.last() != Some(&t) || p.len() < 2 {
        return Err(Error::Precondition("path endpoints wrong".into()));
    }
    let arcs: BTreeSet<(Vertex, Vertex)> = q.arcs.iter().copied().collect();
    for w in p.windows(2) {
        if !arcs.contains(&(w[0], w[1])) {
            return Err(Error::Precondition(format!("missing arc ({},{})", w[0], w[1])));
        }
    }
    for &v in &p[1..p.len() - 1] {
        if q.is_terminal(v) {
            return Err(Error::Precondition("terminal interior to a path".into()));
        }
    }
    Ok(())
}

pub fn witness_flow_from_paths(
    dpi: &DisjointPathsInstance,
    q: &DisjointPathsQuery,
    p1: &[Vertex],
    p2: &[Vertex],
) -> Result<FlowAssignment> {
    check_path(q, p1, q.s1, q.t1)?;
    check_path(q, p2, q.s2, q.t2)?;
    let joint: BTreeSet<Vertex> = p1.iter().chain(p2.iter()).copied().collect();
    if joint.len() != p1.len() + p2.len() {
        return Err(Error::Precondition("paths are not vertex-disjoint".into()));
    }
    let mut f = dpi.inst.zero_flow();
    let mut set = |u: Vertex, v: Vertex| -> Result<()> {
        let id = dpi
            .inst
            .edge_id(u, v)
            .ok_or_else(|| Error::Invalid(format!("edge ({},{}) absent", u, v)))?;
        f.set(id, 1);
        Ok(())
    };
    for p in [p1, p2] {
        for w in p.windows(2) {
            let a = if dpi.term.contains_key(&w[0]) { dpi.term[&w[0]] } else { dpi.v_out[&w[0]] };
            let b = if dpi.term.contains_key(&w[1]) { dpi.term[&w[1]] } else { dpi.v_in[&w[1]] };
            set(a, b)?;
        }
        for &v in &p[1..p.len() - 1] {
            set(dpi.v_in[&v], dpi.v_out[&v])?;
        }
    }
    set(dpi.term[&q.t1], dpi.term[&q.s2])?;
    set(dpi.term[&q.t2], dpi.term[&q.s1])?;
    Ok(f)
}

/// Recover the two vertex-disjoint paths from a valid flow on the
/// generated instance by walking the unique cycle and contracting splits.
pub fn decode_disjoint_paths(
    dpi: &DisjointPathsInstance,
    q: &DisjointPathsQuery,
    f: &FlowAssignment,
) -> Result<(Vec<Vertex>, Vec<Vertex>)> {
    let rep = verify_solution(&dpi.inst, f)?;
    if !rep.all_ok() {
        return Err(Error::Precondition("flow is not a valid solution".into()));
    }
    let from_new: BTreeMap<Vertex, Vertex> = dpi
        .term
        .iter()
        .map(|(&o, &nw)| (nw, o))
        .chain(dpi.v_in.iter().map(|(&o, &nw)| (nw, o)))
        .chain(dpi.v_out.iter().map(|(&o, &nw)| (nw, o)))
        .collect();
    let mut succ: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    for id in f.support() {
        let e = &dpi.inst.edges[id];
        succ.insert(e.tail, e.head);
    }
    let walk = |from: Vertex, to: Vertex| -> Result<Vec<Vertex>> {
        let mut path = vec![from_new[&from]];
        let mut cur = from;
        while cur != to {
            let nxt = *succ
                .get(&cur)
                .ok_or_else(|| Error::Precondition("flow cycle broken".into()))?;
            let orig = from_new[&nxt];
            if path.last() != Some(&orig) {
                path.push(orig);
            }
            cur = nxt;
            if path.len() > dpi.inst.n + 1 {
                return Err(Error::Precondition("flow does not reach target".into()));
            }
        }
        Ok(path)
    };
    let p1 = walk(dpi.term[&q.s1], dpi.term[&q.t1])?;
    let p2 = walk(dpi.term[&q.s2], dpi.term[&q.t2])?;
    Ok((p1, p2))
}

// ---------------------------------------------------------------------------
// 3-CNF-SAT → MVTSP
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CnfFormula {
    pub n_vars: usize,
    pub clauses: Vec<[(usize, bool); 3]>, // (variable 1-based, is-positive)
}

/// Parse DIMACS `p cnf`; every clause must have exactly three literals.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut n_vars = 0usize;
    let mut declared = 0usize;
    let mut seen_header = false;
    let mut lits: Vec<i64> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('p') {
            let t: Vec<&str> = line.split_whitespace().collect();
            if seen_header || t.len() != 4 || t[1] != "cnf" {
                return Err(parse_err(ln, "expected 'p cnf <vars> <clauses>'"));
            }
            n_vars = t[2].parse().map_err(|_| parse_err(ln, "bad var count"))?;
            declared = t[3].parse().map_err(|_| parse_err(ln, "bad clause count"))?;
            seen_header = true;
            continue;
        }
        if !seen_header {
            return Err(parse_err(ln, "literals before 'p cnf' header"));
        }
        for tok in line.split_whitespace() {
            lits.push(tok.parse().map_err(|_| parse_err(ln, "bad literal"))?);
        }
    }
    if !seen_header {
        return Err(parse_err(0, "missing 'p cnf' header"));
    }
    let mut clauses = Vec::new();
    let mut cur: Vec<(usize, bool)> = Vec::new();
    for l in lits {
        if l == 0 {
            if cur.len() != 3 {
                return Err(Error::Invalid(format!(
                    "clause {} has {} literals, need exactly 3",
                    clauses.len() + 1,
                    cur.len()
                )));
            }
            clauses.push([cur[0], cur[1], cur[2]]);
            cur.clear();
        } else {
            let var = l.unsigned_abs() as usize;
            if var == 0 || var > n_vars {
                return Err(Error::Invalid(format!("variable {} out of range", var)));
            }
            cur.push((var, l > 0));
        }
    }
    if !cur.is_empty() {
        return Err(Error::Invalid("clause not terminated by 0".into()));
    }
    if clauses.len() != declared {
        return Err(Error::Invalid(format!(
            "declared {} clauses, found {}",
            declared,
            clauses.len()
        )));
    }
    Ok(CnfFormula { n_vars, clauses })
}

/// The 9-vertex 2-label gadget; ports v1/v7 carry label 1, v3/v9 label 2.
#[derive(Debug, Clone, Copy)]
pub struct TwoLabelGadget {
    pub v: [Vertex; 9],
}

impl TwoLabelGadget {
    pub fn at(base: Vertex) -> Self {
        let mut v = [0; 9];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = base + k;
        }
        TwoLabelGadget { v }
    }

    pub fn edges(&self) -> [(Vertex, Vertex); 10] {
        let v = &self.v;
        [
            (v[0], v[1]),
            (v[1], v[2]),
            (v[0], v[3]),
            (v[3], v[4]),
            (v[3], v[8]),
            (v[4], v[5]),
            (v[2], v[5]),
            (v[5], v[6]),
            (v[6], v[7]),
            (v[7], v[8]),
        ]
    }

    pub fn v1(&self) -> Vertex { self.v[0] }
    pub fn v3(&self) -> Vertex { self.v[2] }
    pub fn v7(&self) -> Vertex { self.v[6] }
    pub fn v9(&self) -> Vertex { self.v[8] }

    /// Hamiltonian v1→v7 path (label-1 pass-through).
    pub fn path_1_to_7(&self) -> [Vertex; 9] {
        let v = &self.v;
        [v[0], v[1], v[2], v[5], v[4], v[3], v[8], v[7], v[6]]
    }

    /// Hamiltonian v3→v9 path (label-2 detour).
    pub fn path_3_to_9(&self) -> [Vertex; 9] {
        let v = &self.v;
        [v[2], v[1], v[0], v[3], v[4], v[5], v[6], v[7], v[8]]
    }
}

#[derive(Debug, Clone)]
pub struct MemberMeta {
    pub tuple: Vec<u64>,            // multiplicity per scanner group, in group order
    pub units: Vec<TwoLabelGadget>, // chained with label-1 edges
    pub unit_group: Vec<usize>,     // per unit: 0-based global group index served
}

#[derive(Debug, Clone)]
pub struct ScannerMeta {
    pub groups: Vec<usize>, // distinct 0-based group indices, ascending
    pub s_ids: Vec<Vertex>,
    pub members: Vec<MemberMeta>,
}

#[derive(Debug, Clone)]
pub struct SatReductionMeta {
    pub s: usize,
    pub n_vars: usize,
    pub padding: usize,
    pub groups: usize,
    pub m: usize,
    pub l: Vec<Vec<Vertex>>, // [clause][group]
    pub r: Vec<Vec<Vertex>>,
    pub a: Vec<Vertex>, // m+1 entries
    pub scanners: Vec<ScannerMeta>,
    pub removed: BTreeSet<(usize, usize)>, // (clause, group) grid pairs removed
}

impl SatReductionMeta {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "p satmeta s {} vars {} padding {} groups {} clauses {}\n",
            self.s, self.n_vars, self.padding, self.groups, self.m
        ));
        for i in 0..self.m {
            for j in 0..self.groups {
                out.push_str(&format!("l {} {} {}\n", i + 1, j + 1, self.l[i][j]));
                out.push_str(&format!("r {} {} {}\n", i + 1, j + 1, self.r[i][j]));
            }
        }
        for (i, &id) in self.a.iter().enumerate() {
            out.push_str(&format!("a {} {}\n", i + 1, id));
        }
        for (i, sc) in self.scanners.iter().enumerate() {
            let gs: Vec<String> = sc.groups.iter().map(|g| (g + 1).to_string()).collect();
            out.push_str(&format!("scanner {} groups {}\n", i + 1, gs.join(" ")));
            for (t, &id) in sc.s_ids.iter().enumerate() {
                out.push_str(&format!("si {} {} {}\n", i + 1, t + 1, id));
            }
            for (k, mem) in sc.members.iter().enumerate() {
                let q: Vec<String> = mem.tuple.iter().map(|q| q.to_string()).collect();
                out.push_str(&format!("member {} {} {}\n", i + 1, k + 1, q.join(" ")));
                for (u, g) in mem.units.iter().zip(&mem.unit_group) {
                    let vs: Vec<String> = u.v.iter().map(|v| v.to_string()).collect();
                    out.push_str(&format!(
                        "unit {} {} {} {}\n",
                        i + 1,
                        k + 1,
                        g + 1,
                        vs.join(" ")
                    ));
                }
            }
        }
        for &(i, j) in &self.removed {
            out.push_str(&format!("removed {} {}\n", i + 1, j + 1));
        }
        out
    }
}

fn tuple_satisfies(clause: &[(usize, bool); 3], groups: &[usize], tuple: &[u64], s: usize) -> bool {
    clause.iter().any(|&(var, pos)| {
        let g = (var - 1) / s;
        let p = groups.iter().position(|&x| x == g).unwrap();
        let bit = (var - 1) % s;
        let val = ((tuple[p] - 1) >> bit) & 1 == 1;
        val == pos
    })
}

fn enumerate_tuples(z: usize, q_max: u64) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    for _ in 0..z {
        let mut next = Vec::new();
        for t in &out {
            for q in 1..=q_max {
                let mut t2 = t.clone();
                t2.push(q);
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

fn norm(u: Vertex, v: Vertex) -> (Vertex, Vertex) {
    (u.min(v), u.max(v))
}

/// Build the MVTSP instance Γ_φ for a 3-CNF formula with group size s.
/// The instance is undirected in spirit: every edge is emitted as two
/// zero-cost directed edges.
pub fn gen_sat_instance(phi: &CnfFormula, s: usize) -> Result<(MVTSPInstance, SatReductionMeta)> {
    if s == 0 || s > 40 {
        return Err(Error::Invalid("group size must be in 1..=40".into()));
    }
    let m = phi.clauses.len();
    if m == 0 {
        return Err(Error::Invalid("formula has no clauses".into()));
    }
    let padding = (s - phi.n_vars % s) % s;
    let g = (phi.n_vars + padding) / s;
    let q_max = 1u64 << s;
    let big = q_max + 1; // demand of the first grid row

    let mut next: Vertex = 1;
    let mut alloc = |k: usize| -> Vertex {
        let v = next;
        next += k;
        v
    };
    let l: Vec<Vec<Vertex>> = (0..m).map(|_| (0..g).map(|_| alloc(1)).collect()).collect();
    let r: Vec<Vec<Vertex>> = (0..m).map(|_| (0..g).map(|_| alloc(1)).collect()).collect();
    let a: Vec<Vertex> = (0..=m).map(|_| alloc(1)).collect();

    let mut edges: BTreeSet<(Vertex, Vertex)> = BTreeSet::new();
    let mut removed: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut scanners = Vec::new();

    for (i, clause) in phi.clauses.iter().enumerate() {
        let groups: Vec<usize> = clause
            .iter()
            .map(|&(var, _)| (var - 1) / s)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let tuples: Vec<Vec<u64>> = enumerate_tuples(groups.len(), q_max)
            .into_iter()
            .filter(|t| tuple_satisfies(clause, &groups, t, s))
            .collect();
        if tuples.is_empty() {
            return Err(Error::Invalid(format!(
                "clause {} admits no satisfying tuple",
                i + 1
            )));
        }
        let lcnt = tuples.len();
        let s_ids: Vec<Vertex> = (0..lcnt).map(|_| alloc(1)).collect();
        edges.insert(norm(a[i], s_ids[0]));
        edges.insert(norm(s_ids[lcnt - 1], a[i + 1]));
        // the scanner replaces the direct a_i—a_{i+1} edge
        let mut total_units = 0usize;
        let mut members = Vec::new();
        for (k, tuple) in tuples.iter().enumerate() {
            let t: u64 = tuple.iter().sum();
            let mut units = Vec::new();
            let mut unit_group = Vec::new();
            for (p, &q) in tuple.iter().enumerate() {
                for _ in 0..q {
                    let gadget = TwoLabelGadget::at(alloc(9));
                    for (u, v) in gadget.edges() {
                        edges.insert(norm(u, v));
                    }
                    // label-2 detour edges to the served grid pair
                    edges.insert(norm(l[i][groups[p]], gadget.v3()));
                    edges.insert(norm(r[i][groups[p]], gadget.v9()));
                    units.push(gadget);
                    unit_group.push(groups[p]);
                }
            }
            total_units += t as usize;
            for w in units.windows(2) {
                edges.insert(norm(w[0].v7(), w[1].v1()));
            }
            let first = units[0].v1();
            let last = units[units.len() - 1].v7();
            let sv = |t: i64| -> Vertex {
                if t < 0 {
                    a[i]
                } else if t as usize >= lcnt {
                    a[i + 1]
                } else {
                    s_ids[t as usize]
                }
            };
            edges.insert(norm(sv(k as i64 - 1), first));
            edges.insert(norm(sv(k as i64), first));
            edges.insert(norm(sv(k as i64), last));
            edges.insert(norm(sv(k as i64 + 1), last));
            members.push(MemberMeta { tuple: tuple.clone(), units, unit_group });
        }
        if total_units > 1usize << (3 * s + 3) {
            return Err(Error::Invalid(format!(
                "clause {} exceeds the gadget unit budget",
                i + 1
            )));
        }
        // the scanned grid pairs are removed (kept when m = 1, where the
        // same pair also serves as the column's wrap-around edge)
        if m >= 2 {
            for &j in &groups {
                removed.insert((i, j));
            }
        }
        scanners.push(ScannerMeta { groups, s_ids, members });
    }

    // grid edges
    for j in 0..g {
        if j + 1 < g {
            edges.insert(norm(l[0][j], l[0][j + 1]));
        }
        for i in 0..m {
            if !removed.contains(&(i, j)) {
                edges.insert(norm(l[i][j], r[i][j]));
            }
            edges.insert(norm(r[i][j], l[(i + 1) % m][j]));
        }
    }
    edges.insert(norm(l[0][0], a[0]));
    edges.insert(norm(a[m], l[0][g - 1]));

    let n = next - 1;
    let mut demand = vec![1u64; n];
    for j in 0..g {
        demand[l[0][j] - 1] = big;
        for i in 0..m {
            if i > 0 {
                demand[l[i][j] - 1] = q_max;
            }
            demand[r[i][j] - 1] = q_max;
        }
    }
    let mut cost = BTreeMap::new();
    for &(u, v) in &edges {
        cost.insert((u, v), 0);
        cost.insert((v, u), 0);
    }
    let inst = MVTSPInstance::new(n, cost, demand)?;
    let meta = SatReductionMeta {
        s,
        n_vars: phi.n_vars,
        padding,
        groups: g,
        m,
        l,
        r,
        a,
        scanners,
        removed,
    };
    Ok((inst, meta))
}

fn chi_satisfies(phi: &CnfFormula, chi: &[bool]) -> bool {
    phi.clauses
        .iter()
        .all(|c| c.iter().any(|&(var, pos)| chi[var - 1] == pos))
}

fn group_value(chi: &[bool], j: usize, s: usize) -> u64 {
    let mut q = 1u64;
    for k in 0..s {
        let idx = j * s + k;
        if idx < chi.len() && chi[idx] {
            q += 1 << k;
        }
    }
    q
}

/// Orient an undirected tour multiset into a directed flow via an Euler
/// circuit; fails if degrees are odd or the support is disconnected.
fn orient_tour(
    cf: &ConnectedFlowInstance,
    multi: &BTreeMap<(Vertex, Vertex), u64>,
) -> Result<FlowAssignment> {
    let mut adj: BTreeMap<Vertex, BTreeMap<Vertex, u64>> = BTreeMap::new();
    let mut total = 0u64;
    for (&(u, v), &c) in multi {
        if c == 0 {
            continue;
        }
        *adj.entry(u).or_default().entry(v).or_default() += c;
        *adj.entry(v).or_default().entry(u).or_default() += c;
        total += c;
    }
    for (v, nb) in &adj {
        let deg: u64 = nb.values().sum();
        if deg % 2 != 0 {
            return Err(Error::Invalid(format!("odd tour degree at vertex {}", v)));
        }
    }
    let start = match adj.keys().next() {
        Some(&v) => v,
        None => return Ok(cf.zero_flow()),
    };
    let mut stack = vec![start];
    let mut circuit = Vec::new();
    while let Some(&u) = stack.last() {
        let pick = adj
            .get(&u)
            .and_then(|nb| nb.iter().find(|(_, &c)| c > 0).map(|(&v, _)| v));
        match pick {
            Some(v) => {
                *adj.get_mut(&u).unwrap().get_mut(&v).unwrap() -= 1;
                *adj.get_mut(&v).unwrap().get_mut(&u).unwrap() -= 1;
                stack.push(v);
            }
            None => circuit.push(stack.pop().unwrap()),
        }
    }
    if circuit.len() as u64 != total + 1 {
        return Err(Error::Invalid("tour multiset is not connected".into()));
    }
    let mut f = cf.zero_flow();
    for w in circuit.windows(2) {
        let id = cf
            .edge_id(w[0], w[1])
            .ok_or_else(|| Error::Invalid(format!("edge ({},{}) absent", w[0], w[1])))?;
        f.set(id, f.get(id) + 1);
    }
    Ok(f)
}

/// Build a verifying tour of the generated instance from a satisfying
/// assignment (directed flow on the MVTSP embedding).
pub fn witness_tour_from_assignment(
    inst: &MVTSPInstance,
    meta: &SatReductionMeta,
    phi: &CnfFormula,
    chi: &[bool],
) -> Result<FlowAssignment> {
    if chi.len() != phi.n_vars {
        return Err(Error::Precondition("assignment length mismatch".into()));
    }
    if !chi_satisfies(phi, chi) {
        return Err(Error::Precondition("assignment does not satisfy the formula".into()));
    }
    let mut chi_pad = chi.to_vec();
    chi_pad.resize(phi.n_vars + meta.padding, false);
    let (s, g, m) = (meta.s, meta.groups, meta.m);
    let qv: Vec<u64> = (0..g).map(|j| group_value(&chi_pad, j, s)).collect();
    let wrap = (1u64 << (s + 1)) as u64;

    let mut multi: BTreeMap<(Vertex, Vertex), u64> = BTreeMap::new();
    let mut add = |u: Vertex, v: Vertex, c: u64| {
        if c > 0 {
            *multi.entry(norm(u, v)).or_default() += c;
        }
    };

    for j in 0..g {
        if j + 1 < g {
            add(meta.l[0][j], meta.l[0][j + 1], 1);
        }
        for i in 0..m {
            let in_scanner = meta.scanners[i].groups.contains(&j);
            if !in_scanner {
                add(meta.l[i][j], meta.r[i][j], qv[j]);
            }
            add(meta.r[i][j], meta.l[(i + 1) % m][j], wrap - qv[j]);
        }
    }
    add(meta.l[0][0], meta.a[0], 1);
    add(meta.a[m], meta.l[0][g - 1], 1);

    for (i, sc) in meta.scanners.iter().enumerate() {
        let want: Vec<u64> = sc.groups.iter().map(|&j| qv[j]).collect();
        let k0 = sc
            .members
            .iter()
            .position(|mem| mem.tuple == want)
            .ok_or_else(|| Error::Precondition("no scanner member matches the assignment".into()))?;
        let lcnt = sc.members.len();
        let sv = |t: i64| -> Vertex {
            if t < 0 {
                meta.a[i]
            } else if t as usize >= lcnt {
                meta.a[i + 1]
            } else {
                sc.s_ids[t as usize]
            }
        };
        add(meta.a[i], sc.s_ids[0], 1);
        add(sc.s_ids[lcnt - 1], meta.a[i + 1], 1);
        for (k, mem) in sc.members.iter().enumerate() {
            if k == k0 {
                // detour units: one copy of the scanned pair per unit
                for (u, &j) in mem.units.iter().zip(&mem.unit_group) {
                    add(meta.l[i][j], u.v3(), 1);
                    add(meta.r[i][j], u.v9(), 1);
                    for w in u.path_3_to_9().windows(2) {
                        add(w[0], w[1], 1);
                    }
                }
                continue;
            }
            // pass through the whole chain once
            let (enter, exit) = if k < k0 {
                (sv(k as i64), sv(k as i64 + 1))
            } else {
                (sv(k as i64 - 1), sv(k as i64))
            };
            add(enter, mem.units[0].v1(), 1);
            for (uidx, u) in mem.units.iter().enumerate() {
                for w in u.path_1_to_7().windows(2) {
                    add(w[0], w[1], 1);
                }
                if uidx + 1 < mem.units.len() {
                    add(u.v7(), mem.units[uidx + 1].v1(), 1);
                }
            }
            add(mem.units[mem.units.len() - 1].v7(), exit, 1);
        }
    }

    let cf = mvtsp_to_cf(inst);
    let f = orient_tour(&cf, &multi)?;
    Ok(f)
}

/// Read the assignment back off a valid flow: grid multiplicities (or
/// label-2 detour counts for scanned columns) encode q, whose bits give
/// the group's variables.
pub fn decode_assignment(
    inst: &MVTSPInstance,
    meta: &SatReductionMeta,
    phi: &CnfFormula,
    f: &FlowAssignment,
) -> Result<Vec<bool>> {
    let cf = mvtsp_to_cf(inst);
    let rep = verify_solution(&cf, f)?;
    if !rep.all_ok() {
        return Err(Error::Precondition("flow is not a valid tour".into()));
    }
    let und = |u: Vertex, v: Vertex| -> u64 {
        let a = cf.edge_id(u, v).map(|id| f.get(id)).unwrap_or(0);
        let b = cf.edge_id(v, u).map(|id| f.get(id)).unwrap_or(0);
        a + b
    };
    let q_max = 1u64 << meta.s;
    let mut chi = vec![false; phi.n_vars];
    for j in 0..meta.groups {
        let scanner = meta
            .scanners
            .iter()
            .enumerate()
            .find(|(_, sc)| sc.groups.contains(&j));
        let q = match scanner {
            Some((i, sc)) => {
                let mut q = 0u64;
                for mem in &sc.members {
                    for (u, &gj) in mem.units.iter().zip(&mem.unit_group) {
                        if gj == j && und(meta.l[i][j], u.v3()) > 0 {
                            q += 1;
                        }
                    }
                }
                q
            }
            None if meta.m >= 2 => und(meta.l[0][j], meta.r[0][j]),
            None => 1, // single clause, unconstrained column
        };
        if q == 0 || q > q_max {
            return Err(Error::Precondition(format!(
                "column {} encodes no valid assignment",
                j + 1
            )));
        }
        for k in 0..meta.s {
            let idx = j * meta.s + k;
            if idx < phi.n_vars {
                chi[idx] = ((q - 1) >> k) & 1 == 1;
            }
        }
    }
    if !chi_satisfies(phi, &chi) {
        return Err(Error::Precondition("decoded assignment fails the formula".into()));
    }
    Ok(chi)
}

/// The path decomposition witnessing pathwidth ≤ 3·groups + 21: the first
/// grid row rides in every bag, each clause contributes its scanner bags
/// flanked by its own grid rows, with hand-off bags between clauses.
pub fn sat_path_decomposition(meta: &SatReductionMeta) -> TreeDecomposition {
    let g = meta.groups;
    let row_a: BTreeSet<Vertex> = meta.l[0].iter().copied().collect();
    let mut bags: Vec<BTreeSet<Vertex>> = Vec::new();
    let mut max_n = 0;
    for i in 0..meta.m {
        let sc = &meta.scanners[i];
        let lcnt = sc.members.len();
        let base: BTreeSet<Vertex> = row_a
            .iter()
            .copied()
            .chain(meta.l[i].iter().copied())
            .chain(meta.r[i].iter().copied())
            .collect();
        let sv = |t: i64| -> Vertex {
            if t < 0 {
                meta.a[i]
            } else if t as usize >= lcnt {
                meta.a[i + 1]
            } else {
                sc.s_ids[t as usize]
            }
        };
        // B_a
        let mut first = base.clone();
        first.insert(meta.a[i]);
        first.insert(sc.s_ids[0]);
        bags.push(first);
        for (k, mem) in sc.members.iter().enumerate() {
            for (uidx, u) in mem.units.iter().enumerate() {
                let mut b = base.clone();
                b.insert(sv(k as i64 - 1));
                b.insert(sv(k as i64));
                b.insert(sv(k as i64 + 1));
                b.extend(u.v);
                if uidx + 1 < mem.units.len() {
                    b.extend(mem.units[uidx + 1].v);
                }
                bags.push(b);
            }
        }
        let mut last = base.clone();
        last.insert(meta.a[i + 1]);
        last.insert(sc.s_ids[lcnt - 1]);
        bags.push(last);
        // hand-off to the next row
        if i + 1 < meta.m {
            let b: BTreeSet<Vertex> = row_a
                .iter()
                .copied()
                .chain(meta.r[i].iter().copied())
                .chain(meta.l[i + 1].iter().copied())
                .chain([meta.a[i + 1]])
                .collect();
            bags.push(b);
        }
        max_n = max_n.max(g);
    }
    let n = bags.iter().flatten().copied().max().unwrap_or(0);
    let edges = (0..bags.len().saturating_sub(1)).map(|i| (i, i + 1)).collect();
    TreeDecomposition {
        bags: bags.into_iter().map(|b| b.into_iter().collect()).collect(),
        edges,
        n,
    }
}
