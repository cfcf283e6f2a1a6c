//! Deterministic corpus generators shared by the integration tests. All
//! sequences derive from a fixed splitmix64 stream, so every run sees the
//! same instances.

use std::collections::BTreeMap;

use conflow::instance::{Capacity, ConnectedFlowInstance, Edge, MVTSPInstance, Vertex};

pub struct Det(u64);

impl Det {
    pub fn new(stream: u64) -> Self {
        Det(stream.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1))
    }

    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }

    pub fn range(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.below(hi - lo + 1)
    }

    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        self.below(den) < num
    }
}

/// Tiny Connected Flow instances: n ≤ 6, |E| ≤ 10, demands ≤ 2,
/// capacities in {1, 2, inf}. Infeasible instances are kept on purpose.
pub fn small_cf_corpus(count: usize) -> Vec<ConnectedFlowInstance> {
    let mut det = Det::new(1);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = det.range(2, 6) as usize;
        let m = det.range(1, 10) as usize;
        let mut seen = std::collections::BTreeSet::new();
        let mut edges = Vec::new();
        for _ in 0..m {
            let u = det.range(1, n as u64) as Vertex;
            let v = det.range(1, n as u64) as Vertex;
            if u == v || !seen.insert((u, v)) {
                continue;
            }
            let cap = match det.below(3) {
                0 => Capacity::Finite(1),
                1 => Capacity::Finite(2),
                _ => Capacity::Unbounded,
            };
            edges.push(Edge { tail: u, head: v, cost: det.below(6), cap });
        }
        if edges.is_empty() {
            continue;
        }
        let mut demand = BTreeMap::new();
        for v in 1..=n {
            if det.chance(1, 2) {
                demand.insert(v, det.range(1, 2));
            }
        }
        if let Ok(i) = ConnectedFlowInstance::new(n, edges, demand) {
            out.push(i);
        }
    }
    out
}

/// MVTSP instances engineered to have vertex cover {1..k}, k ≤ 3, n ≤ 30.
/// Every non-cover vertex orbits a home server; a server ring keeps the
/// instance connected, so all of them are feasible.
pub fn mvtsp_cover_corpus(count: usize) -> Vec<(MVTSPInstance, usize)> {
    let mut det = Det::new(2);
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let k = 1 + idx % 3;
        let max_b = match k {
            1 => 29,
            2 => 20,
            _ => 16,
        };
        let b = det.range(k as u64 + 1, max_b) as usize;
        let n = k + b;
        let mut cost = BTreeMap::new();
        let mut absorbed = vec![0u64; k + 1];
        let mut demand = vec![0u64; n];
        for v in (k + 1)..=n {
            let home = 1 + det.below(k as u64) as usize;
            let dem = det.range(1, 3);
            demand[v - 1] = dem;
            absorbed[home] += dem;
            cost.insert((home, v), det.range(1, 20));
            cost.insert((v, home), det.range(1, 20));
            // optional extra server connections
            for x in 1..=k {
                if x != home && det.chance(1, 4) {
                    cost.insert((x, v), det.range(1, 20));
                    cost.insert((v, x), det.range(1, 20));
                }
            }
        }
        for x in 1..=k {
            if k > 1 {
                let y = x % k + 1;
                cost.insert((x, y), det.range(1, 20));
            }
            demand[x - 1] = absorbed[x] + if k > 1 { 1 } else { 0 };
            if demand[x - 1] == 0 {
                demand[x - 1] = 1; // lone server with no satellites
            }
        }
        if k == 1 && b == 1 {
            continue; // degenerate
        }
        let m = MVTSPInstance::new(n, cost, demand).unwrap();
        out.push((m, k));
    }
    out
}

/// Cycle (plus optional chord) instances with huge equal demands.
pub fn big_demand_corpus(count: usize) -> Vec<ConnectedFlowInstance> {
    let mut det = Det::new(3);
    let mut out = Vec::with_capacity(count);
    // the worked 2-vertex example: 100·2 + 100·3 = 500
    out.push(
        ConnectedFlowInstance::new(
            2,
            vec![
                Edge { tail: 1, head: 2, cost: 2, cap: Capacity::Unbounded },
                Edge { tail: 2, head: 1, cost: 3, cap: Capacity::Unbounded },
            ],
            BTreeMap::from([(1, 100), (2, 100)]),
        )
        .unwrap(),
    );
    while out.len() < count {
        let n = det.range(2, 4) as usize;
        let d = det.range(50, 10_000);
        let mut edges = Vec::new();
        for v in 1..=n {
            let w = v % n + 1;
            edges.push(Edge {
                tail: v,
                head: w,
                cost: det.range(1, 5),
                cap: Capacity::Unbounded,
            });
        }
        if n == 4 && det.chance(1, 2) {
            // chord doubling back along the cycle
            edges.push(Edge { tail: 3, head: 1, cost: det.range(1, 5), cap: Capacity::Unbounded });
            edges.push(Edge { tail: 1, head: 3, cost: det.range(1, 5), cap: Capacity::Unbounded });
        }
        let demand: BTreeMap<Vertex, u64> = (1..=n).map(|v| (v, d)).collect();
        out.push(ConnectedFlowInstance::new(n, edges, demand).unwrap());
    }
    out
}

/// Unbounded-capacity instances with a strict demand subset, for the
/// MVTSP-reduction equivalence check.
pub fn unbounded_corpus(count: usize) -> Vec<ConnectedFlowInstance> {
    let mut det = Det::new(4);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = det.range(3, 6) as usize;
        let m = det.range(3, 10) as usize;
        let mut seen = std::collections::BTreeSet::new();
        let mut edges = Vec::new();
        for _ in 0..m {
            let u = det.range(1, n as u64) as Vertex;
            let v = det.range(1, n as u64) as Vertex;
            if u == v || !seen.insert((u, v)) {
                continue;
            }
            edges.push(Edge { tail: u, head: v, cost: det.below(6), cap: Capacity::Unbounded });
        }
        if edges.is_empty() {
            continue;
        }
        let d_size = det.range(1, n as u64 - 1) as usize;
        let mut demand = BTreeMap::new();
        for v in 1..=d_size {
            demand.insert(v, det.range(1, 2));
        }
        out.push(ConnectedFlowInstance::new(n, edges, demand).unwrap());
    }
    out
}

/// Digraph queries for the disjoint-paths reduction; mixes engineered
/// corridor/cut families with pseudo-random graphs. Ground truth comes
/// from the brute-force checker in the acceptance test.
pub fn disjoint_path_queries(count: usize) -> Vec<(usize, Vec<(Vertex, Vertex)>)> {
    let mut det = Det::new(5);
    let mut out = Vec::new();
    // corridors of increasing length: always feasible
    for len in 1..=5usize {
        let n = 4 + 2 * len;
        let mut arcs = Vec::new();
        let mut prev = 1;
        for i in 0..len {
            arcs.push((prev, 5 + i));
            prev = 5 + i;
        }
        arcs.push((prev, 2));
        let mut prev = 3;
        for i in 0..len {
            arcs.push((prev, 5 + len + i));
            prev = 5 + len + i;
        }
        arcs.push((prev, 4));
        out.push((n, arcs));
    }
    // cut vertex between both pairs: always infeasible
    out.push((5, vec![(1, 5), (5, 2), (3, 5), (5, 4)]));
    // adjacent terminals
    out.push((4, vec![(1, 2), (3, 4)]));
    while out.len() < count {
        let n = det.range(6, 8) as usize;
        let mut seen = std::collections::BTreeSet::new();
        let mut arcs = Vec::new();
        if out.len() % 2 == 0 {
            // embed two vertex-disjoint paths, then add noise
            arcs.push((1, 5));
            arcs.push((5, 2));
            arcs.push((3, 6));
            arcs.push((6, 4));
            seen.extend(arcs.iter().copied());
        }
        let m = det.range(4, 12) as usize;
        for _ in 0..m {
            let u = det.range(1, n as u64) as Vertex;
            let v = det.range(1, n as u64) as Vertex;
            if u != v && seen.insert((u, v)) {
                arcs.push((u, v));
            }
        }
        if !arcs.is_empty() {
            out.push((n, arcs));
        }
    }
    out
}
