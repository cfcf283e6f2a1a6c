//! The Flow relaxation (Connected Flow without connectivity), solved
//! exactly by transforming to Min Cost Flow: each demand vertex d is split
//! into a source d_out and a sink d_in with supply = requirement = dem(d).
//! Solved by successive shortest augmenting paths with node potentials.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::Result;
use crate::instance::{Capacity, ConnectedFlowInstance, FlowAssignment};
use crate::oracle::SolveStatus;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    rev: usize,
    cap: u64,
    cost: i64,
    // original instance edge this forward arc represents, if any
    orig: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct McfNetwork {
    pub num_nodes: usize,
    // node roles for audit: out_node[v], in_node[v] for v in 1..=n
    pub out_node: Vec<usize>,
    pub in_node: Vec<usize>,
    pub source: usize,
    pub sink: usize,
    pub total_demand: u64,
    /// finite bound substituted for unbounded capacities
    pub clamp: u64,
    adj: Vec<Vec<Arc>>,
}

impl McfNetwork {
    fn add_arc(&mut self, from: usize, to: usize, cap: u64, cost: i64, orig: Option<usize>) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(Arc {
            to,
            rev: rev_from,
            cap,
            cost,
            orig,
        });
        self.adj[to].push(Arc {
            to: from,
            rev: rev_to,
            cap: 0,
            cost: -cost,
            orig: None,
        });
    }
}

#[derive(Debug, Clone)]
pub struct RelaxationResult {
    pub status: SolveStatus,
    pub flow: FlowAssignment,
    pub cost: u64,
}

/// Split demand vertices and wire a super source/sink. Node layout:
/// 0 = source, 1 = sink, then one node per non-demand vertex and two
/// (out, in) per demand vertex, in vertex order.
pub fn build_mcf(i: &ConnectedFlowInstance) -> McfNetwork {
    let mut out_node = vec![usize::MAX; i.n + 1];
    let mut in_node = vec![usize::MAX; i.n + 1];
    let mut next = 2;
    for v in 1..=i.n {
        if i.is_demand(v) {
            out_node[v] = next;
            in_node[v] = next + 1;
            next += 2;
        } else {
            out_node[v] = next;
            in_node[v] = next;
            next += 1;
        }
    }
    let total_demand: u64 = i.demand.values().sum();
    let clamp = total_demand.saturating_mul(i.n as u64);
    let mut net = McfNetwork {
        num_nodes: next,
        out_node,
        in_node,
        source: 0,
        sink: 1,
        total_demand,
        clamp,
        adj: vec![Vec::new(); next],
    };
    for (id, e) in i.edges.iter().enumerate() {
        let cap = match e.cap {
            Capacity::Finite(c) => c.min(clamp),
            Capacity::Unbounded => clamp,
        };
        net.add_arc(
            net.out_node[e.tail],
            net.in_node[e.head],
            cap,
            e.cost as i64,
            Some(id),
        );
    }
    for (&d, &dem) in &i.demand {
        net.add_arc(0, net.out_node[d], dem, 0, None);
        net.add_arc(net.in_node[d], 1, dem, 0, None);
    }
    net
}

/// Dijkstra on reduced costs. Ties broken by smaller node id via the heap
/// key; arcs scanned in insertion order.
fn shortest_path(net: &McfNetwork, pot: &[i64]) -> Option<(Vec<i64>, Vec<(usize, usize)>)> {
    const INF: i64 = i64::MAX / 4;
    let mut dist = vec![INF; net.num_nodes];
    let mut prev: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); net.num_nodes];
    let mut heap = BinaryHeap::new();
    dist[net.source] = 0;
    heap.push(Reverse((0i64, net.source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for (ai, a) in net.adj[u].iter().enumerate() {
            if a.cap == 0 {
                continue;
            }
            let nd = d + a.cost + pot[u] - pot[a.to];
            if nd < dist[a.to] {
                dist[a.to] = nd;
                prev[a.to] = (u, ai);
                heap.push(Reverse((nd, a.to)));
            }
        }
    }
    if dist[net.sink] >= INF {
        None
    } else {
        Some((dist, prev))
    }
}

pub fn solve_relaxation(i: &ConnectedFlowInstance) -> Result<RelaxationResult> {
    let mut net = build_mcf(i);
    let mut pot = vec![0i64; net.num_nodes];
    let mut shipped: u64 = 0;
    while shipped < net.total_demand {
        let (dist, prev) = match shortest_path(&net, &pot) {
            Some(x) => x,
            None => {
                return Ok(RelaxationResult {
                    status: SolveStatus::Infeasible,
                    flow: i.zero_flow(),
                    cost: 0,
                })
            }
        };
        for v in 0..net.num_nodes {
            if dist[v] < i64::MAX / 4 {
                pot[v] += dist[v];
            }
        }
        // bottleneck along the path
        let mut delta = net.total_demand - shipped;
        let mut v = net.sink;
        while v != net.source {
            let (u, ai) = prev[v];
            delta = delta.min(net.adj[u][ai].cap);
            v = u;
        }
        let mut v = net.sink;
        while v != net.source {
            let (u, ai) = prev[v];
            net.adj[u][ai].cap -= delta;
            let rev = net.adj[u][ai].rev;
            net.adj[v][rev].cap += delta;
            v = u;
        }
        shipped += delta;
    }
    // read flow off the forward arcs
    let mut flow = i.zero_flow();
    let clamp = net.clamp;
    for arcs in &net.adj {
        for a in arcs {
            if let Some(id) = a.orig {
                let orig_cap = match i.edges[id].cap {
                    Capacity::Finite(c) => c.min(clamp),
                    Capacity::Unbounded => clamp,
                };
                flow.set(id, orig_cap - a.cap);
            }
        }
    }
    let cost = flow.cost(i)?;
    Ok(RelaxationResult {
        status: SolveStatus::Optimal,
        flow,
        cost,
    })
}

/// Relaxation feasibility plus validity of the returned flow are the
/// caller's contract; expose a convenience check.
pub fn relaxed_flow_valid(i: &ConnectedFlowInstance, f: &FlowAssignment) -> Result<bool> {
    let rep = crate::instance::verify_solution(i, f)?;
    Ok(rep.conservation_ok && rep.demands_ok && rep.capacities_ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_cf;
    use crate::oracle::solve_exact;

    #[test]
    fn build_splits_demand_vertices() {
        let i = parse_cf("p cf 3 3 3\nd 1 1\nd 2 1\nd 3 1\ne 1 2 1 inf\ne 2 3 1 inf\ne 3 1 1 inf\n")
            .unwrap();
        let net = build_mcf(&i);
        assert_eq!(net.num_nodes, 2 + 6); // source, sink, 3 split pairs
        for v in 1..=3 {
            assert_ne!(net.out_node[v], net.in_node[v]);
        }
    }

    #[test]
    fn build_without_demands_keeps_nodes() {
        let i = parse_cf("p cf 3 2 0\ne 1 2 1 inf\ne 2 3 1 inf\n").unwrap();
        let net = build_mcf(&i);
        assert_eq!(net.num_nodes, 2 + 3);
        assert_eq!(net.total_demand, 0);
    }

    #[test]
    fn triangle_relaxation() {
        let i = parse_cf("p cf 3 3 3\nd 1 1\nd 2 1\nd 3 1\ne 1 2 1 inf\ne 2 3 1 inf\ne 3 1 1 inf\n")
            .unwrap();
        let r = solve_relaxation(&i).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.cost, 3);
        assert_eq!(r.flow.mult, vec![1, 1, 1]);
    }

    #[test]
    fn twin_cycles_relaxes_to_disjoint_cycles() {
        let i = parse_cf(
            "p cf 4 6 4\nd 1 1\nd 2 1\nd 3 1\nd 4 1\n\
             e 1 2 1 inf\ne 2 1 1 inf\ne 3 4 1 inf\ne 4 3 1 inf\ne 2 3 5 inf\ne 4 1 5 inf\n",
        )
        .unwrap();
        let r = solve_relaxation(&i).unwrap();
        assert_eq!(r.cost, 4);
        assert!(relaxed_flow_valid(&i, &r.flow).unwrap());
        // strictly below the connected optimum
        assert!(r.cost < solve_exact(&i, None).unwrap().cost);
    }

    #[test]
    fn infeasible_when_demand_has_no_in_edges() {
        let i = parse_cf("p cf 2 1 1\nd 2 1\ne 2 1 1 inf\n").unwrap();
        let r = solve_relaxation(&i).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn permuted_edges_same_cost() {
        let a = parse_cf(
            "p cf 4 6 4\nd 1 1\nd 2 1\nd 3 1\nd 4 1\n\
             e 1 2 1 inf\ne 2 1 1 inf\ne 3 4 1 inf\ne 4 3 1 inf\ne 2 3 5 inf\ne 4 1 5 inf\n",
        )
        .unwrap();
        let b = parse_cf(
            "p cf 4 6 4\nd 1 1\nd 2 1\nd 3 1\nd 4 1\n\
             e 4 1 5 inf\ne 2 3 5 inf\ne 4 3 1 inf\ne 3 4 1 inf\ne 2 1 1 inf\ne 1 2 1 inf\n",
        )
        .unwrap();
        assert_eq!(
            solve_relaxation(&a).unwrap().cost,
            solve_relaxation(&b).unwrap().cost
        );
    }
}
