//! Core data model: Connected Flow and MVTSP instances, flow assignments,
//! instance file formats and independent solution verification.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{parse_err, Error, Result};

pub type Vertex = usize;

/// Edge capacity: a finite bound or unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Capacity {
    Finite(u64),
    Unbounded,
}

impl Capacity {
    pub fn allows(&self, mult: u64) -> bool {
        match self {
            Capacity::Finite(c) => mult <= *c,
            Capacity::Unbounded => true,
        }
    }

    /// Clamp against a finite bound, returning min(self, bound).
    pub fn min_with(&self, bound: u64) -> u64 {
        match self {
            Capacity::Finite(c) => (*c).min(bound),
            Capacity::Unbounded => bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub tail: Vertex,
    pub head: Vertex,
    pub cost: u64,
    pub cap: Capacity,
}

/// A directed graph with edge costs, capacities and a demand map on D.
/// Vertices are 1..=n. Edges have stable ids = their index in `edges`.
#[derive(Debug, Clone)]
pub struct ConnectedFlowInstance {
    pub n: usize,
    pub edges: Vec<Edge>,
    pub demand: BTreeMap<Vertex, u64>,
    index: HashMap<(Vertex, Vertex), usize>,
}

impl ConnectedFlowInstance {
    pub fn new(n: usize, edges: Vec<Edge>, demand: BTreeMap<Vertex, u64>) -> Result<Self> {
        let mut index = HashMap::new();
        for (id, e) in edges.iter().enumerate() {
            if e.tail < 1 || e.tail > n || e.head < 1 || e.head > n {
                return Err(Error::Invalid(format!(
                    "edge ({},{}) out of vertex range 1..={}",
                    e.tail, e.head, n
                )));
            }
            if e.tail == e.head {
                return Err(Error::Invalid(format!("self-loop at vertex {}", e.tail)));
            }
            if index.insert((e.tail, e.head), id).is_some() {
                return Err(Error::Invalid(format!(
                    "duplicate edge ({},{})",
                    e.tail, e.head
                )));
            }
        }
        for &v in demand.keys() {
            if v < 1 || v > n {
                return Err(Error::Invalid(format!("demand vertex {} out of range", v)));
            }
        }
        Ok(ConnectedFlowInstance {
            n,
            edges,
            demand,
            index,
        })
    }

    pub fn edge_id(&self, u: Vertex, v: Vertex) -> Option<usize> {
        self.index.get(&(u, v)).copied()
    }

    pub fn dem(&self, v: Vertex) -> Option<u64> {
        self.demand.get(&v).copied()
    }

    pub fn is_demand(&self, v: Vertex) -> bool {
        self.demand.contains_key(&v)
    }

    pub fn max_demand(&self) -> u64 {
        self.demand.values().copied().max().unwrap_or(0)
    }

    /// All capacities unbounded?
    pub fn all_unbounded(&self) -> bool {
        self.edges.iter().all(|e| e.cap == Capacity::Unbounded)
    }

    pub fn zero_flow(&self) -> FlowAssignment {
        FlowAssignment {
            mult: vec![0; self.edges.len()],
        }
    }
}

/// Multiplicities indexed by edge id of the owning instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowAssignment {
    pub mult: Vec<u64>,
}

impl FlowAssignment {
    pub fn new(num_edges: usize) -> Self {
        FlowAssignment {
            mult: vec![0; num_edges],
        }
    }

    pub fn get(&self, edge_id: usize) -> u64 {
        self.mult[edge_id]
    }

    pub fn set(&mut self, edge_id: usize, m: u64) {
        self.mult[edge_id] = m;
    }

    pub fn get_pair(&self, i: &ConnectedFlowInstance, u: Vertex, v: Vertex) -> u64 {
        i.edge_id(u, v).map(|id| self.mult[id]).unwrap_or(0)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.mult
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0)
            .map(|(id, _)| id)
    }

    pub fn is_zero(&self) -> bool {
        self.mult.iter().all(|&m| m == 0)
    }

    pub fn cost(&self, i: &ConnectedFlowInstance) -> Result<u64> {
        let mut total: u64 = 0;
        for (id, &m) in self.mult.iter().enumerate() {
            let term = i.edges[id].cost.checked_mul(m).ok_or(Error::Overflow)?;
            total = total.checked_add(term).ok_or(Error::Overflow)?;
        }
        Ok(total)
    }
}

/// Cost matrix with per-vertex visit demands; absent pairs are forbidden.
#[derive(Debug, Clone)]
pub struct MVTSPInstance {
    pub n: usize,
    pub cost: BTreeMap<(Vertex, Vertex), u64>,
    pub demand: Vec<u64>, // demand[v-1]
}

impl MVTSPInstance {
    pub fn new(n: usize, cost: BTreeMap<(Vertex, Vertex), u64>, demand: Vec<u64>) -> Result<Self> {
        if demand.len() != n {
            return Err(Error::Invalid(format!(
                "demand defined for {} of {} vertices",
                demand.len(),
                n
            )));
        }
        for &(u, v) in cost.keys() {
            if u < 1 || u > n || v < 1 || v > n {
                return Err(Error::Invalid(format!("cost pair ({},{}) out of range", u, v)));
            }
            if u == v {
                return Err(Error::Invalid(format!("self-loop cost entry at {}", u)));
            }
        }
        Ok(MVTSPInstance { n, cost, demand })
    }

    pub fn dem(&self, v: Vertex) -> u64 {
        self.demand[v - 1]
    }
}

/// MVTSP is the special case D = V with unbounded capacities.
pub fn mvtsp_to_cf(m: &MVTSPInstance) -> ConnectedFlowInstance {
    let edges = m
        .cost
        .iter()
        .map(|(&(u, v), &c)| Edge {
            tail: u,
            head: v,
            cost: c,
            cap: Capacity::Unbounded,
        })
        .collect();
    let demand = (1..=m.n).map(|v| (v, m.dem(v))).collect();
    ConnectedFlowInstance::new(m.n, edges, demand).expect("valid MVTSP maps to valid CF")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Conservation { vertex: Vertex },
    Demand { vertex: Vertex },
    Capacity { tail: Vertex, head: Vertex },
    Disconnected,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Conservation { vertex } => {
                write!(f, "conservation violated at vertex {}", vertex)
            }
            Violation::Demand { vertex } => write!(f, "demand violated at vertex {}", vertex),
            Violation::Capacity { tail, head } => {
                write!(f, "capacity exceeded on edge ({},{})", tail, head)
            }
            Violation::Disconnected => write!(f, "support is not connected"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub conservation_ok: bool,
    pub demands_ok: bool,
    pub capacities_ok: bool,
    pub connected_ok: bool,
    pub cost: u64,
    pub first_violation: Option<Violation>,
}

impl VerificationReport {
    pub fn all_ok(&self) -> bool {
        self.conservation_ok && self.demands_ok && self.capacities_ok && self.connected_ok
    }
}

/// In/out flow sums per vertex (1-indexed, slot 0 unused).
pub fn degree_sums(i: &ConnectedFlowInstance, f: &FlowAssignment) -> Result<(Vec<u64>, Vec<u64>)> {
    let mut inflow = vec![0u64; i.n + 1];
    let mut outflow = vec![0u64; i.n + 1];
    for (id, e) in i.edges.iter().enumerate() {
        let m = f.get(id);
        inflow[e.head] = inflow[e.head].checked_add(m).ok_or(Error::Overflow)?;
        outflow[e.tail] = outflow[e.tail].checked_add(m).ok_or(Error::Overflow)?;
    }
    Ok((inflow, outflow))
}

/// Weak connectivity of the support multigraph G_f. Empty support counts
/// as connected. Vertices with zero incident flow are ignored.
pub fn support_connected(i: &ConnectedFlowInstance, f: &FlowAssignment) -> bool {
    let mut adj: Vec<Vec<Vertex>> = vec![Vec::new(); i.n + 1];
    let mut touched = vec![false; i.n + 1];
    for id in f.support() {
        let e = &i.edges[id];
        adj[e.tail].push(e.head);
        adj[e.head].push(e.tail);
        touched[e.tail] = true;
        touched[e.head] = true;
    }
    let start = match (1..=i.n).find(|&v| touched[v]) {
        Some(v) => v,
        None => return true,
    };
    let mut seen = vec![false; i.n + 1];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    (1..=i.n).all(|v| !touched[v] || seen[v])
}

/// Strong connectivity of G_f (used for the weak=strong invariant check).
pub fn support_strongly_connected(i: &ConnectedFlowInstance, f: &FlowAssignment) -> bool {
    let mut fwd: Vec<Vec<Vertex>> = vec![Vec::new(); i.n + 1];
    let mut bwd: Vec<Vec<Vertex>> = vec![Vec::new(); i.n + 1];
    let mut touched = vec![false; i.n + 1];
    for id in f.support() {
        let e = &i.edges[id];
        fwd[e.tail].push(e.head);
        bwd[e.head].push(e.tail);
        touched[e.tail] = true;
        touched[e.head] = true;
    }
    let start = match (1..=i.n).find(|&v| touched[v]) {
        Some(v) => v,
        None => return true,
    };
    let reach = |adj: &Vec<Vec<Vertex>>| {
        let mut seen = vec![false; i.n + 1];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    };
    let f_seen = reach(&fwd);
    let b_seen = reach(&bwd);
    (1..=i.n).all(|v| !touched[v] || (f_seen[v] && b_seen[v]))
}

/// Check a flow against every Connected Flow constraint. Pure; overflow in
/// cost accumulation is a hard error rather than a wrapped value.
pub fn verify_solution(i: &ConnectedFlowInstance, f: &FlowAssignment) -> Result<VerificationReport> {
    if f.mult.len() != i.edges.len() {
        return Err(Error::Precondition(format!(
            "flow keyed on {} edges, instance has {}",
            f.mult.len(),
            i.edges.len()
        )));
    }
    let (inflow, outflow) = degree_sums(i, f)?;
    let mut first_violation = None;

    let mut capacities_ok = true;
    for (id, e) in i.edges.iter().enumerate() {
        if !e.cap.allows(f.get(id)) {
            capacities_ok = false;
            first_violation.get_or_insert(Violation::Capacity {
                tail: e.tail,
                head: e.head,
            });
            break;
        }
    }

    // Name the first vertex with surplus inflow if any (where the excess
    // arrives), otherwise the first with deficit.
    let mut conservation_ok = true;
    let surplus = (1..=i.n).find(|&v| inflow[v] > outflow[v]);
    let deficit = (1..=i.n).find(|&v| inflow[v] < outflow[v]);
    if let Some(v) = surplus.or(deficit) {
        conservation_ok = false;
        first_violation.get_or_insert(Violation::Conservation { vertex: v });
    }

    let mut demands_ok = true;
    for (&v, &d) in &i.demand {
        if inflow[v] != d {
            demands_ok = false;
            first_violation.get_or_insert(Violation::Demand { vertex: v });
            break;
        }
    }

    let connected_ok = support_connected(i, f);
    if !connected_ok {
        first_violation.get_or_insert(Violation::Disconnected);
    }

    Ok(VerificationReport {
        conservation_ok,
        demands_ok,
        capacities_ok,
        connected_ok,
        cost: f.cost(i)?,
        first_violation,
    })
}

// ---------- file formats ----------

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            iter: text.lines().enumerate(),
        }
    }

    /// Next non-comment, non-blank line with its 1-based line number.
    fn next_data(&mut self) -> Option<(usize, &'a str)> {
        for (idx, line) in self.iter.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('c') {
                continue;
            }
            return Some((idx + 1, t));
        }
        None
    }
}

fn parse_num(tok: &str, line: usize, what: &str) -> Result<u64> {
    tok.parse::<u64>()
        .map_err(|_| parse_err(line, format!("bad {} '{}'", what, tok)))
}

fn parse_vertex(tok: &str, n: usize, line: usize) -> Result<Vertex> {
    let v = parse_num(tok, line, "vertex")? as usize;
    if v < 1 || v > n {
        return Err(parse_err(line, format!("vertex {} out of range 1..={}", v, n)));
    }
    Ok(v)
}

/// Parse the `p cf` instance format.
pub fn parse_cf(text: &str) -> Result<ConnectedFlowInstance> {
    let mut lines = Lines::new(text);
    let (hline, header) = lines
        .next_data()
        .ok_or_else(|| parse_err(0, "missing header"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 5 || toks[0] != "p" || toks[1] != "cf" {
        return Err(parse_err(hline, "expected 'p cf <n> <m> <d>'"));
    }
    let n = parse_num(toks[2], hline, "vertex count")? as usize;
    let m = parse_num(toks[3], hline, "edge count")? as usize;
    let d = parse_num(toks[4], hline, "demand count")? as usize;

    let mut demand = BTreeMap::new();
    for _ in 0..d {
        let (ln, line) = lines
            .next_data()
            .ok_or_else(|| parse_err(0, "unexpected end of file in demand lines"))?;
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 3 || t[0] != "d" {
            return Err(parse_err(ln, "expected 'd <v> <dem>'"));
        }
        let v = parse_vertex(t[1], n, ln)?;
        let dem = parse_num(t[2], ln, "demand")?;
        if demand.insert(v, dem).is_some() {
            return Err(parse_err(ln, format!("duplicate demand line for vertex {}", v)));
        }
    }

    let mut edges = Vec::with_capacity(m);
    let mut seen = HashMap::new();
    for _ in 0..m {
        let (ln, line) = lines
            .next_data()
            .ok_or_else(|| parse_err(0, "unexpected end of file in edge lines"))?;
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 5 || t[0] != "e" {
            return Err(parse_err(ln, "expected 'e <u> <v> <cost> <cap>'"));
        }
        let u = parse_vertex(t[1], n, ln)?;
        let v = parse_vertex(t[2], n, ln)?;
        if u == v {
            return Err(parse_err(ln, format!("self-loop at vertex {}", u)));
        }
        if seen.insert((u, v), ln).is_some() {
            return Err(parse_err(ln, format!("duplicate edge ({},{})", u, v)));
        }
        let cost = parse_num(t[3], ln, "cost")?;
        let cap = if t[4] == "inf" {
            Capacity::Unbounded
        } else {
            Capacity::Finite(parse_num(t[4], ln, "capacity")?)
        };
        edges.push(Edge {
            tail: u,
            head: v,
            cost,
            cap,
        });
    }
    if let Some((ln, _)) = lines.next_data() {
        return Err(parse_err(ln, "trailing data after declared lines"));
    }
    ConnectedFlowInstance::new(n, edges, demand)
}

/// Parse the `p mvtsp` instance format.
pub fn parse_mvtsp(text: &str) -> Result<MVTSPInstance> {
    let mut lines = Lines::new(text);
    let (hline, header) = lines
        .next_data()
        .ok_or_else(|| parse_err(0, "missing header"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 3 || toks[0] != "p" || toks[1] != "mvtsp" {
        return Err(parse_err(hline, "expected 'p mvtsp <n>'"));
    }
    let n = parse_num(toks[2], hline, "vertex count")? as usize;

    let mut demand: Vec<Option<u64>> = vec![None; n];
    let mut cost = BTreeMap::new();
    while let Some((ln, line)) = lines.next_data() {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t[0] {
            "d" if t.len() == 3 => {
                let v = parse_vertex(t[1], n, ln)?;
                if demand[v - 1].is_some() {
                    return Err(parse_err(ln, format!("duplicate demand for vertex {}", v)));
                }
                demand[v - 1] = Some(parse_num(t[2], ln, "demand")?);
            }
            "e" if t.len() == 4 => {
                let u = parse_vertex(t[1], n, ln)?;
                let v = parse_vertex(t[2], n, ln)?;
                if u == v {
                    return Err(parse_err(ln, format!("self-loop at vertex {}", u)));
                }
                let c = parse_num(t[3], ln, "cost")?;
                if cost.insert((u, v), c).is_some() {
                    return Err(parse_err(ln, format!("duplicate cost entry ({},{})", u, v)));
                }
            }
            _ => return Err(parse_err(ln, "expected 'd <v> <dem>' or 'e <u> <v> <cost>'")),
        }
    }
    let demand = demand
        .into_iter()
        .enumerate()
        .map(|(idx, d)| d.ok_or_else(|| parse_err(0, format!("missing demand line for vertex {}", idx + 1))))
        .collect::<Result<Vec<u64>>>()?;
    MVTSPInstance::new(n, cost, demand)
}

/// Render a flow in the solution format: `s <cost>` then sorted `f` lines.
pub fn write_solution(i: &ConnectedFlowInstance, f: &FlowAssignment) -> Result<String> {
    let mut lines: Vec<(Vertex, Vertex, u64)> = f
        .support()
        .map(|id| {
            let e = &i.edges[id];
            (e.tail, e.head, f.get(id))
        })
        .collect();
    lines.sort_unstable();
    let mut out = String::new();
    writeln!(out, "s {}", f.cost(i)?).unwrap();
    for (u, v, m) in lines {
        writeln!(out, "f {} {} {}", u, v, m).unwrap();
    }
    Ok(out)
}

/// Parse the solution format against an instance.
pub fn parse_solution(i: &ConnectedFlowInstance, text: &str) -> Result<(u64, FlowAssignment)> {
    let mut lines = Lines::new(text);
    let (hline, header) = lines
        .next_data()
        .ok_or_else(|| parse_err(0, "missing 's' line"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 2 || toks[0] != "s" {
        return Err(parse_err(hline, "expected 's <cost>'"));
    }
    let cost = parse_num(toks[1], hline, "cost")?;
    let mut f = i.zero_flow();
    while let Some((ln, line)) = lines.next_data() {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 4 || t[0] != "f" {
            return Err(parse_err(ln, "expected 'f <u> <v> <mult>'"));
        }
        let u = parse_vertex(t[1], i.n, ln)?;
        let v = parse_vertex(t[2], i.n, ln)?;
        let id = i
            .edge_id(u, v)
            .ok_or_else(|| parse_err(ln, format!("edge ({},{}) not in instance", u, v)))?;
        f.set(id, parse_num(t[3], ln, "multiplicity")?);
    }
    Ok((cost, f))
}

/// Render MVTSP instance format (used by the reduce subcommand).
pub fn write_mvtsp(m: &MVTSPInstance) -> String {
    let mut out = String::new();
    writeln!(out, "p mvtsp {}", m.n).unwrap();
    for v in 1..=m.n {
        writeln!(out, "d {} {}", v, m.dem(v)).unwrap();
    }
    for (&(u, v), &c) in &m.cost {
        writeln!(out, "e {} {} {}", u, v, c).unwrap();
    }
    out
}

/// Render CF instance format (used by generators).
pub fn write_cf(i: &ConnectedFlowInstance) -> String {
    let mut out = String::new();
    writeln!(out, "p cf {} {} {}", i.n, i.edges.len(), i.demand.len()).unwrap();
    for (&v, &d) in &i.demand {
        writeln!(out, "d {} {}", v, d).unwrap();
    }
    let mut es: Vec<&Edge> = i.edges.iter().collect();
    es.sort_unstable_by_key(|e| (e.tail, e.head));
    for e in es {
        match e.cap {
            Capacity::Finite(c) => writeln!(out, "e {} {} {} {}", e.tail, e.head, e.cost, c).unwrap(),
            Capacity::Unbounded => writeln!(out, "e {} {} {} inf", e.tail, e.head, e.cost).unwrap(),
        }
    }
    out
}
