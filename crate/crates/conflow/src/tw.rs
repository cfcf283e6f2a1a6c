//! Dynamic programming over tree decompositions for Connected Flow, plus
//! the demand-magnitude reduction that peels a base flow off the
//! relaxation until residual demands are at most 2n²+n.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{parse_err, Error, Result};
use crate::instance::{Capacity, ConnectedFlowInstance, FlowAssignment, Vertex};
use crate::oracle::{OracleResult, SolveStatus};
use crate::relax::solve_relaxation;

#[derive(Debug, Clone)]
pub struct TreeDecomposition {
    pub bags: Vec<Vec<Vertex>>,
    pub edges: Vec<(usize, usize)>, // 0-based bag indices
    pub n: usize,
}

impl TreeDecomposition {
    pub fn width(&self) -> usize {
        self.bags.iter().map(|b| b.len()).max().unwrap_or(1).saturating_sub(1)
    }
}

/// PACE-style format: `s td <num-bags> <width+1> <n>`, `b <id> v...`,
/// then one `<i> <j>` line per tree edge.
pub fn parse_td(text: &str) -> Result<TreeDecomposition> {
    let mut header: Option<(usize, usize)> = None;
    let mut bags: Vec<Option<Vec<Vertex>>> = Vec::new();
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        match t[0] {
            "s" => {
                if t.len() != 5 || t[1] != "td" {
                    return Err(parse_err(ln, "expected 's td <bags> <width+1> <n>'"));
                }
                let nb: usize = t[2].parse().map_err(|_| parse_err(ln, "bad bag count"))?;
                let n: usize = t[4].parse().map_err(|_| parse_err(ln, "bad vertex count"))?;
                bags = vec![None; nb];
                header = Some((nb, n));
            }
            "b" => {
                let (nb, n) = header.ok_or_else(|| parse_err(ln, "bag before header"))?;
                let id: usize = t
                    .get(1)
                    .and_then(|x| x.parse().ok())
                    .ok_or_else(|| parse_err(ln, "bad bag id"))?;
                if id < 1 || id > nb {
                    return Err(parse_err(ln, "bag id out of range"));
                }
                let mut bag = Vec::new();
                for tok in &t[2..] {
                    let v: usize = tok.parse().map_err(|_| parse_err(ln, "bad bag vertex"))?;
                    if v < 1 || v > n {
                        return Err(parse_err(ln, "bag vertex out of range"));
                    }
                    bag.push(v);
                }
                bag.sort_unstable();
                bag.dedup();
                if bags[id - 1].replace(bag).is_some() {
                    return Err(parse_err(ln, "duplicate bag id"));
                }
            }
            _ => {
                let (nb, _) = header.ok_or_else(|| parse_err(ln, "edge before header"))?;
                if t.len() != 2 {
                    return Err(parse_err(ln, "expected '<i> <j>' tree edge"));
                }
                let a: usize = t[0].parse().map_err(|_| parse_err(ln, "bad bag index"))?;
                let b: usize = t[1].parse().map_err(|_| parse_err(ln, "bad bag index"))?;
                if a < 1 || a > nb || b < 1 || b > nb || a == b {
                    return Err(parse_err(ln, "tree edge out of range"));
                }
                edges.push((a - 1, b - 1));
            }
        }
    }
    let (_, n) = header.ok_or_else(|| parse_err(0, "missing 's td' header"))?;
    let bags = bags
        .into_iter()
        .enumerate()
        .map(|(i, b)| b.ok_or_else(|| parse_err(0, format!("bag {} not defined", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    Ok(TreeDecomposition { bags, edges, n })
}

pub fn render_td(td: &TreeDecomposition) -> String {
    let mut out = String::new();
    writeln!(out, "s td {} {} {}", td.bags.len(), td.width() + 1, td.n).unwrap();
    for (i, b) in td.bags.iter().enumerate() {
        write!(out, "b {}", i + 1).unwrap();
        for v in b {
            write!(out, " {}", v).unwrap();
        }
        out.push('\n');
    }
    for &(a, b) in &td.edges {
        writeln!(out, "{} {}", a + 1, b + 1).unwrap();
    }
    out
}

/// Coverage of vertices and edges plus the subtree property.
pub fn validate_td(i: &ConnectedFlowInstance, td: &TreeDecomposition) -> Result<()> {
    if td.n != i.n {
        return Err(Error::Validation(format!(
            "decomposition is over {} vertices, instance has {}",
            td.n, i.n
        )));
    }
    let nb = td.bags.len();
    if nb == 0 {
        return Err(Error::Validation("no bags".into()));
    }
    if td.edges.len() + 1 != nb {
        return Err(Error::Validation("bag tree is not a tree".into()));
    }
    let mut adj = vec![Vec::new(); nb];
    for &(a, b) in &td.edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    // connectivity of the bag tree
    let mut seen = vec![false; nb];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Validation("bag tree is disconnected".into()));
    }
    for v in 1..=i.n {
        let holders: Vec<usize> = (0..nb).filter(|&b| td.bags[b].contains(&v)).collect();
        if holders.is_empty() {
            return Err(Error::Validation(format!("vertex {} in no bag", v)));
        }
        // subtree property: bags holding v are connected
        let hold: BTreeSet<usize> = holders.iter().copied().collect();
        let mut seen = vec![false; nb];
        let mut stack = vec![holders[0]];
        seen[holders[0]] = true;
        let mut cnt = 1;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] && hold.contains(&y) {
                    seen[y] = true;
                    cnt += 1;
                    stack.push(y);
                }
            }
        }
        if cnt != holders.len() {
            return Err(Error::Validation(format!(
                "bags containing vertex {} are not connected",
                v
            )));
        }
    }
    for e in &i.edges {
        if !td
            .bags
            .iter()
            .any(|b| b.contains(&e.tail) && b.contains(&e.head))
        {
            return Err(Error::Validation(format!(
                "edge ({},{}) covered by no bag",
                e.tail, e.head
            )));
        }
    }
    Ok(())
}

/// Min-degree elimination heuristic on the underlying undirected graph.
/// Bag of an eliminated vertex holds it plus its then-alive neighbors;
/// its parent is the bag of the earliest-eliminated such neighbor.
pub fn heuristic_td(i: &ConnectedFlowInstance) -> TreeDecomposition {
    let n = i.n;
    let mut nb: Vec<BTreeSet<Vertex>> = vec![BTreeSet::new(); n + 1];
    for e in &i.edges {
        nb[e.tail].insert(e.head);
        nb[e.head].insert(e.tail);
    }
    let mut alive: BTreeSet<Vertex> = (1..=n).collect();
    let mut bags: Vec<Vec<Vertex>> = Vec::new();
    let mut neighs: Vec<Vec<Vertex>> = Vec::new();
    let mut elim_pos = vec![usize::MAX; n + 1];
    while let Some(&v) = alive.iter().min_by_key(|&&v| (nb[v].len(), v)) {
        alive.remove(&v);
        let neigh: Vec<Vertex> = nb[v].iter().copied().filter(|u| alive.contains(u)).collect();
        let mut bag = neigh.clone();
        bag.push(v);
        bag.sort_unstable();
        elim_pos[v] = bags.len();
        bags.push(bag);
        neighs.push(neigh.clone());
        for a in 0..neigh.len() {
            for b in a + 1..neigh.len() {
                nb[neigh[a]].insert(neigh[b]);
                nb[neigh[b]].insert(neigh[a]);
            }
        }
        for &u in &neigh {
            nb[u].remove(&v);
        }
    }
    if bags.is_empty() {
        bags.push(Vec::new());
    }
    let mut edges = Vec::new();
    for (idx, neigh) in neighs.iter().enumerate() {
        if let Some(&u) = neigh.iter().min_by_key(|&&u| elim_pos[u]) {
            edges.push((idx, elim_pos[u]));
        } else if idx + 1 < bags.len() {
            // isolated vertex: hang its bag off the next one
            edges.push((idx, idx + 1));
        }
    }
    TreeDecomposition { bags, edges, n }
}

// ---------- nice decomposition ----------

#[derive(Debug, Clone)]
enum NiceNode {
    Leaf,
    Introduce { v: Vertex, child: usize },
    Forget { v: Vertex, child: usize },
    IntroEdge { eid: usize, child: usize },
    Join { left: usize, right: usize },
}

struct Nice {
    nodes: Vec<NiceNode>,
    bags: Vec<Vec<Vertex>>, // bag after the node's operation
    root: usize,
}

struct NiceBuilder<'a> {
    i: &'a ConnectedFlowInstance,
    nodes: Vec<NiceNode>,
    bags: Vec<Vec<Vertex>>,
    introduced: Vec<bool>,
    adj: Vec<Vec<usize>>, // per vertex, incident edge ids
}

impl<'a> NiceBuilder<'a> {
    fn push(&mut self, node: NiceNode, bag: Vec<Vertex>) -> usize {
        self.nodes.push(node);
        self.bags.push(bag);
        self.nodes.len() - 1
    }

    /// Insert pending edge introductions, then the forget of v.
    fn forget(&mut self, mut idx: usize, v: Vertex) -> usize {
        let bag = self.bags[idx].clone();
        for eid in self.adj[v].clone() {
            if self.introduced[eid] {
                continue;
            }
            let e = &self.i.edges[eid];
            let other = if e.tail == v { e.head } else { e.tail };
            if bag.contains(&other) {
                self.introduced[eid] = true;
                idx = self.push(NiceNode::IntroEdge { eid, child: idx }, bag.clone());
            }
        }
        let nbag: Vec<Vertex> = bag.iter().copied().filter(|&w| w != v).collect();
        self.push(NiceNode::Forget { v, child: idx }, nbag)
    }

    fn introduce(&mut self, idx: usize, v: Vertex) -> usize {
        let mut bag = self.bags[idx].clone();
        bag.push(v);
        bag.sort_unstable();
        self.push(NiceNode::Introduce { v, child: idx }, bag)
    }

    /// Adapt a subtree rooted at idx (with some bag) to the target bag.
    fn adapt(&mut self, mut idx: usize, target: &[Vertex]) -> usize {
        let cur = self.bags[idx].clone();
        for &v in &cur {
            if !target.contains(&v) {
                idx = self.forget(idx, v);
            }
        }
        let cur = self.bags[idx].clone();
        for &v in target {
            if !cur.contains(&v) {
                idx = self.introduce(idx, v);
            }
        }
        idx
    }

    fn build(&mut self, td: &TreeDecomposition, tadj: &[Vec<usize>], node: usize, parent: usize) -> usize {
        let bag = td.bags[node].clone();
        let mut subs: Vec<usize> = Vec::new();
        for &c in &tadj[node] {
            if c != parent {
                let ci = self.build(td, tadj, c, node);
                subs.push(self.adapt(ci, &bag));
            }
        }
        match subs.len() {
            0 => {
                let leaf = self.push(NiceNode::Leaf, Vec::new());
                self.adapt(leaf, &bag)
            }
            1 => subs[0],
            _ => {
                let mut acc = subs[0];
                for &s in &subs[1..] {
                    acc = self.push(
                        NiceNode::Join { left: acc, right: s },
                        bag.clone(),
                    );
                }
                acc
            }
        }
    }
}

fn niceify(i: &ConnectedFlowInstance, td: &TreeDecomposition) -> Result<Nice> {
    let mut tadj = vec![Vec::new(); td.bags.len()];
    for &(a, b) in &td.edges {
        tadj[a].push(b);
        tadj[b].push(a);
    }
    for l in tadj.iter_mut() {
        l.sort_unstable();
    }
    let mut adj = vec![Vec::new(); i.n + 1];
    for (eid, e) in i.edges.iter().enumerate() {
        adj[e.tail].push(eid);
        adj[e.head].push(eid);
    }
    let mut b = NiceBuilder {
        i,
        nodes: Vec::new(),
        bags: Vec::new(),
        introduced: vec![false; i.edges.len()],
        adj,
    };
    let mut root = b.build(td, &tadj, 0, usize::MAX);
    // forget everything left in the root bag
    for v in b.bags[root].clone() {
        root = b.forget(root, v);
    }
    if let Some(eid) = b.introduced.iter().position(|&x| !x) {
        let e = &i.edges[eid];
        return Err(Error::Validation(format!(
            "edge ({},{}) covered by no bag",
            e.tail, e.head
        )));
    }
    Ok(Nice {
        nodes: b.nodes,
        bags: b.bags,
        root,
    })
}

// ---------- the DP ----------

// key: per-bag-slot block labels (UNVISITED for zero-degree vertices),
// in/out degree counters, and whether a component has already closed
type Key = (Vec<u8>, Vec<u64>, Vec<u64>, bool);
type Entry = (u64, Vec<u64>); // cost, flow by edge id
type Table = BTreeMap<Key, Entry>;

const UNVISITED: u8 = u8::MAX;

fn canon_blocks(blocks: &mut [u8]) {
    let mut map = [u8::MAX; 256];
    let mut next = 0u8;
    for b in blocks.iter_mut() {
        if *b == UNVISITED {
            continue;
        }
        if map[*b as usize] == u8::MAX {
            map[*b as usize] = next;
            next += 1;
        }
        *b = map[*b as usize];
    }
}

fn insert_min(t: &mut Table, key: Key, entry: Entry) {
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

/// Exact Connected Flow over a tree decomposition.
pub fn solve_tw_dp(i: &ConnectedFlowInstance, td: &TreeDecomposition) -> Result<OracleResult> {
    validate_td(i, td)?;
    let nice = niceify(i, td)?;
    let bounds = crate::oracle::default_bounds(i, None);

    // per vertex: total multiplicity bound over all in-/out-edges, and per
    // nice node the share introduced within its subtree (for pruning the
    // multiplicity range against demands fixed elsewhere)
    let mut tot_in = vec![0u64; i.n + 1];
    let mut tot_out = vec![0u64; i.n + 1];
    for (eid, e) in i.edges.iter().enumerate() {
        tot_in[e.head] += bounds[eid];
        tot_out[e.tail] += bounds[eid];
    }
    let nn = nice.nodes.len();
    let mut sub_in: Vec<Vec<u64>> = vec![Vec::new(); nn];
    let mut sub_out: Vec<Vec<u64>> = vec![Vec::new(); nn];
    for x in 0..nn {
        let (mut si, mut so) = match &nice.nodes[x] {
            NiceNode::Leaf => (vec![0u64; i.n + 1], vec![0u64; i.n + 1]),
            NiceNode::Introduce { child, .. } | NiceNode::Forget { child, .. } => {
                (sub_in[*child].clone(), sub_out[*child].clone())
            }
            NiceNode::IntroEdge { eid, child } => {
                let mut si = sub_in[*child].clone();
                let mut so = sub_out[*child].clone();
                si[i.edges[*eid].head] += bounds[*eid];
                so[i.edges[*eid].tail] += bounds[*eid];
                (si, so)
            }
            NiceNode::Join { left, right } => {
                let mut si = sub_in[*left].clone();
                let mut so = sub_out[*left].clone();
                for v in 0..=i.n {
                    si[v] += sub_in[*right][v];
                    so[v] += sub_out[*right][v];
                }
                (si, so)
            }
        };
        si.shrink_to_fit();
        so.shrink_to_fit();
        sub_in[x] = si;
        sub_out[x] = so;
    }

    let global_cap = i.max_demand().saturating_mul(i.n as u64);
    let cap_in = |v: Vertex| i.dem(v).unwrap_or(global_cap);
    let cap_out = |v: Vertex| i.dem(v).unwrap_or(global_cap);

    let mut tables: Vec<Option<Table>> = vec![None; nn];
    let mut entries_seen: u64 = 0;
    for x in 0..nn {
        let bag = &nice.bags[x];
        let table = match &nice.nodes[x] {
            NiceNode::Leaf => {
                let mut t = Table::new();
                t.insert(
                    (Vec::new(), Vec::new(), Vec::new(), false),
                    (0, vec![0; i.edges.len()]),
                );
                t
            }
            NiceNode::Introduce { v, child } => {
                let p = bag.binary_search(v).unwrap();
                let ct = tables[*child].take().unwrap();
                let mut t = Table::new();
                for ((mut bl, mut din, mut dout, closed), entry) in ct {
                    bl.insert(p, UNVISITED);
                    din.insert(p, 0);
                    dout.insert(p, 0);
                    insert_min(&mut t, (bl, din, dout, closed), entry);
                }
                t
            }
            NiceNode::Forget { v, child } => {
                let cbag = &nice.bags[*child];
                let p = cbag.binary_search(v).unwrap();
                let ct = tables[*child].take().unwrap();
                let mut t = Table::new();
                for ((mut bl, mut din, mut dout, mut closed), entry) in ct {
                    if bl[p] == UNVISITED {
                        if i.dem(*v).unwrap_or(0) != 0 {
                            continue;
                        }
                    } else {
                        if din[p] != dout[p] {
                            continue;
                        }
                        if let Some(d) = i.dem(*v) {
                            if din[p] != d {
                                continue;
                            }
                        }
                        let alone = !bl
                            .iter()
                            .enumerate()
                            .any(|(q, &b)| q != p && b == bl[p]);
                        if alone {
                            if closed {
                                continue; // would be a second component
                            }
                            closed = true;
                        }
                    }
                    bl.remove(p);
                    din.remove(p);
                    dout.remove(p);
                    canon_blocks(&mut bl);
                    insert_min(&mut t, (bl, din, dout, closed), entry);
                }
                t
            }
            NiceNode::IntroEdge { eid, child } => {
                let e = i.edges[*eid];
                let pu = bag.binary_search(&e.tail).unwrap();
                let pv = bag.binary_search(&e.head).unwrap();
                let ct = tables[*child].take().unwrap();
                let mut t = Table::new();
                // demand still satisfiable by edges introduced elsewhere
                let else_in = tot_in[e.head] - sub_in[x][e.head];
                let else_out = tot_out[e.tail] - sub_out[x][e.tail];
                for ((bl, din, dout, closed), entry) in ct {
                    let mut hi = bounds[*eid]
                        .min(cap_in(e.head).saturating_sub(din[pv]))
                        .min(cap_out(e.tail).saturating_sub(dout[pu]));
                    if closed {
                        hi = 0;
                    }
                    let mut lo = 0u64;
                    if let Some(d) = i.dem(e.head) {
                        lo = lo.max(d.saturating_sub(din[pv] + else_in));
                    }
                    if let Some(d) = i.dem(e.tail) {
                        lo = lo.max(d.saturating_sub(dout[pu] + else_out));
                    }
                    if lo == 0 {
                        insert_min(&mut t, (bl.clone(), din.clone(), dout.clone(), closed), entry.clone());
                        lo = 1;
                    }
                    for m in lo..=hi.max(lo).min(hi) {
                        let mut bl2 = bl.clone();
                        // fresh blocks for previously unvisited endpoints
                        let mut next = bl2
                            .iter()
                            .filter(|&&b| b != UNVISITED)
                            .max()
                            .map(|&b| b + 1)
                            .unwrap_or(0);
                        if bl2[pu] == UNVISITED {
                            bl2[pu] = next;
                            next += 1;
                        }
                        if bl2[pv] == UNVISITED {
                            bl2[pv] = next;
                        }
                        let (a, b) = (bl2[pu], bl2[pv]);
                        if a != b {
                            for q in bl2.iter_mut() {
                                if *q == b {
                                    *q = a;
                                }
                            }
                        }
                        canon_blocks(&mut bl2);
                        let mut din2 = din.clone();
                        let mut dout2 = dout.clone();
                        din2[pv] += m;
                        dout2[pu] += m;
                        let add = e.cost.checked_mul(m).ok_or(Error::Overflow)?;
                        let cost = entry.0.checked_add(add).ok_or(Error::Overflow)?;
                        let mut flow = entry.1.clone();
                        flow[*eid] += m;
                        insert_min(&mut t, (bl2, din2, dout2, closed), (cost, flow));
                    }
                }
                t
            }
            NiceNode::Join { left, right } => {
                let lt = tables[*left].take().unwrap();
                let rt = tables[*right].take().unwrap();
                let mut t = Table::new();
                for ((bl_l, din_l, dout_l, cl_l), e_l) in &lt {
                    let l_empty = bl_l.iter().all(|&b| b == UNVISITED) && !cl_l;
                    for ((bl_r, din_r, dout_r, cl_r), e_r) in &rt {
                        let r_empty = bl_r.iter().all(|&b| b == UNVISITED) && !cl_r;
                        if (*cl_l && !r_empty) || (*cl_r && !l_empty) {
                            continue;
                        }
                        // add degree vectors, re-check caps
                        let k = bag.len();
                        let mut din = vec![0u64; k];
                        let mut dout = vec![0u64; k];
                        let mut ok = true;
                        for q in 0..k {
                            din[q] = din_l[q] + din_r[q];
                            dout[q] = dout_l[q] + dout_r[q];
                            if din[q] > cap_in(bag[q]) || dout[q] > cap_out(bag[q]) {
                                ok = false;
                                break;
                            }
                        }
                        if !ok {
                            continue;
                        }
                        // partition join: union-find over slots
                        let mut parent: Vec<usize> = (0..k).collect();
                        fn find(p: &mut Vec<usize>, x: usize) -> usize {
                            if p[x] != x {
                                let r = find(p, p[x]);
                                p[x] = r;
                            }
                            p[x]
                        }
                        let merge = |p: &mut Vec<usize>, bl: &[u8]| {
                            for a in 0..k {
                                if bl[a] == UNVISITED {
                                    continue;
                                }
                                for b in a + 1..k {
                                    if bl[b] == bl[a] {
                                        let (ra, rb) = (find(p, a), find(p, b));
                                        if ra != rb {
                                            p[ra] = rb;
                                        }
                                    }
                                }
                            }
                        };
                        merge(&mut parent, bl_l);
                        merge(&mut parent, bl_r);
                        let mut bl = vec![UNVISITED; k];
                        for q in 0..k {
                            if bl_l[q] != UNVISITED || bl_r[q] != UNVISITED {
                                bl[q] = find(&mut parent, q) as u8;
                            }
                        }
                        canon_blocks(&mut bl);
                        let cost = e_l.0.checked_add(e_r.0).ok_or(Error::Overflow)?;
                        let flow: Vec<u64> =
                            e_l.1.iter().zip(&e_r.1).map(|(a, b)| a + b).collect();
                        insert_min(&mut t, (bl, din, dout, *cl_l || *cl_r), (cost, flow));
                    }
                }
                t
            }
        };
        entries_seen += table.len() as u64;
        tables[x] = Some(table);
    }

    let root_table = tables[nice.root].take().unwrap();
    let mut best: Option<Entry> = None;
    for ((_, _, _, _closed), entry) in root_table {
        // empty-bag entries are either one closed component or the empty flow
        if best
            .as_ref()
            .map_or(true, |b| entry.0 < b.0 || (entry.0 == b.0 && entry.1 < b.1))
        {
            best = Some(entry);
        }
    }
    Ok(match best {
        Some((cost, flow)) => OracleResult {
            status: SolveStatus::Optimal,
            cost,
            flow: FlowAssignment { mult: flow },
            nodes_explored: entries_seen,
        },
        None => OracleResult {
            status: SolveStatus::Infeasible,
            cost: 0,
            flow: i.zero_flow(),
            nodes_explored: entries_seen,
        },
    })
}

/// Convenience: heuristic decomposition + DP.
pub fn solve_tw(i: &ConnectedFlowInstance) -> Result<OracleResult> {
    let td = heuristic_td(i);
    solve_tw_dp(i, &td)
}

// ---------- demand reduction ----------

#[derive(Debug, Clone)]
pub struct DemandReductionCert {
    pub base_flow: FlowAssignment,
    pub residual: ConnectedFlowInstance,
    pub rounds: u64,
}

/// Peel simple directed cycles off the relaxation so that residual demands
/// drop to at most 2n²+n; the peeled base composes with any residual
/// optimum into a solution of the original instance.
pub fn reduce_demands(i: &ConnectedFlowInstance) -> Result<DemandReductionCert> {
    let n = i.n as u64;
    let dem_bound = 2 * n * n + n;
    let mut base = i.zero_flow();
    let mut cur = i.clone();
    let mut rounds = 0u64;
    loop {
        if cur.demand.values().all(|&d| d <= dem_bound) {
            break;
        }
        rounds += 1;
        if rounds > 1_000_000 {
            return Err(Error::Budget("demand peeling did not converge".into()));
        }
        let rel = solve_relaxation(&cur)?;
        if rel.status != SolveStatus::Optimal {
            return Err(Error::Precondition("relaxation infeasible".into()));
        }
        let r = rel.flow;
        let mut f = r.clone();
        let target: Vec<u64> = (0..i.edges.len())
            .map(|e| r.get(e).saturating_sub(2 * n + 1))
            .collect();
        while let Some(trigger) = (0..i.edges.len()).find(|&e| f.get(e) > target[e]) {
            let cyc = simple_cycle_through(i, &f, trigger).ok_or_else(|| {
                Error::Precondition("flow support lost Eulerian property".into())
            })?;
            let mut delta = f.get(trigger) - target[trigger];
            for &e in &cyc {
                delta = delta.min(f.get(e));
            }
            debug_assert!(delta > 0);
            for &e in &cyc {
                f.set(e, f.get(e) - delta);
            }
        }
        if f.is_zero() {
            return Err(Error::Budget(
                "demand peeling stalled without reaching the residual bound".into(),
            ));
        }
        // base += f; shrink the running instance
        for e in 0..i.edges.len() {
            base.set(e, base.get(e) + f.get(e));
        }
        let mut inflow = vec![0u64; i.n + 1];
        for (eid, e) in i.edges.iter().enumerate() {
            inflow[e.head] += f.get(eid);
        }
        let demand = cur
            .demand
            .iter()
            .map(|(&v, &d)| (v, d - inflow[v]))
            .collect();
        let edges = cur
            .edges
            .iter()
            .enumerate()
            .map(|(eid, e)| {
                let cap = match e.cap {
                    Capacity::Finite(c) => Capacity::Finite(c - f.get(eid)),
                    Capacity::Unbounded => Capacity::Unbounded,
                };
                crate::instance::Edge { cap, ..*e }
            })
            .collect();
        cur = ConnectedFlowInstance::new(cur.n, edges, demand)?;
    }
    Ok(DemandReductionCert {
        base_flow: base,
        residual: cur,
        rounds,
    })
}

/// Lexicographically smallest simple directed cycle in supp(f) through the
/// given edge.
fn simple_cycle_through(
    i: &ConnectedFlowInstance,
    f: &FlowAssignment,
    eid: usize,
) -> Option<Vec<usize>> {
    let e = i.edges[eid];
    // DFS from e.head back to e.tail over support edges, smallest head first
    let mut out_adj: Vec<Vec<(Vertex, usize)>> = vec![Vec::new(); i.n + 1];
    for (id, ed) in i.edges.iter().enumerate() {
        if f.get(id) > 0 {
            out_adj[ed.tail].push((ed.head, id));
        }
    }
    for l in out_adj.iter_mut() {
        l.sort_unstable();
    }
    let mut path: Vec<usize> = vec![eid];
    let mut on_path = vec![false; i.n + 1];
    on_path[e.tail] = true;
    on_path[e.head] = true;
    fn dfs(
        v: Vertex,
        goal: Vertex,
        out_adj: &[Vec<(Vertex, usize)>],
        on_path: &mut [bool],
        path: &mut Vec<usize>,
    ) -> bool {
        for &(w, id) in &out_adj[v] {
            if w == goal {
                path.push(id);
                return true;
            }
            if !on_path[w] {
                on_path[w] = true;
                path.push(id);
                if dfs(w, goal, out_adj, on_path, path) {
                    return true;
                }
                path.pop();
                on_path[w] = false;
            }
        }
        false
    }
    if e.head == e.tail {
        return None;
    }
    if dfs(e.head, e.tail, &out_adj, &mut on_path, &mut path) {
        Some(path)
    } else {
        None
    }
}

/// Compose a residual solution with the peeled base.
pub fn compose(cert: &DemandReductionCert, residual_flow: &FlowAssignment) -> FlowAssignment {
    let mult = cert
        .base_flow
        .mult
        .iter()
        .zip(&residual_flow.mult)
        .map(|(a, b)| a + b)
        .collect();
    FlowAssignment { mult }
}
