//! Congestion-aware shortest-time routing via A* over BPR-delayed edge
//! times.
//!
//! Loads are frozen per query: a route is computed against a snapshot of
//! the current edge flows, matching event-based dispatch where a routing
//! choice is made as soon as a customer arrives.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::netgraph::{EdgeIdx, NodeIdx, RoadNetwork};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BprParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BprParams {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            beta: 4.0,
        }
    }
}

/// Per-edge total flow snapshot used to evaluate BPR delays.
#[derive(Debug, Clone, Default)]
pub struct EdgeLoad(pub Vec<f64>);

impl EdgeLoad {
    pub fn zeros(network: &RoadNetwork) -> Self {
        EdgeLoad(vec![0.0; network.num_edges()])
    }

    pub fn get(&self, e: EdgeIdx) -> f64 {
        self.0.get(e).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RoutingError {
    #[error("nonpositive capacity in delay evaluation")]
    NonpositiveCapacity,
    #[error("no route from {origin} to {dest}")]
    NoRoute { origin: String, dest: String },
    #[error("unknown node index {0}")]
    UnknownNode(NodeIdx),
}

/// Travel time under load: `t_free * (1 + alpha * (flow/capacity)^beta)`.
pub fn bpr_delay(t_free: f64, flow: f64, capacity: f64, params: &BprParams) -> Result<f64, RoutingError> {
    if capacity <= 0.0 {
        return Err(RoutingError::NonpositiveCapacity);
    }
    let ratio = (flow.max(0.0)) / capacity;
    Ok(t_free * (1.0 + params.alpha * ratio.powf(params.beta)))
}

fn edge_cost(network: &RoadNetwork, loads: &EdgeLoad, params: &BprParams, e: EdgeIdx) -> Result<f64, RoutingError> {
    let edge = network.edge(e);
    bpr_delay(edge.free_flow_time, loads.get(e), edge.capacity, params)
}

/// Free-flow shortest times from every node to `dest` (reverse Dijkstra).
/// This is the admissible A* heuristic: BPR delay never undercuts free
/// flow.
pub fn free_flow_times_to(network: &RoadNetwork, dest: NodeIdx) -> Vec<f64> {
    let n = network.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    dist[dest] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        cost: 0.0,
        node: dest,
    });
    while let Some(HeapEntry { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        for &e in network.in_edges(node) {
            let edge = network.edge(e);
            let next = cost + edge.free_flow_time;
            if next < dist[edge.from] {
                dist[edge.from] = next;
                heap.push(HeapEntry {
                    cost: next,
                    node: edge.from,
                });
            }
        }
    }
    dist
}

struct HeapEntry {
    cost: f64,
    node: NodeIdx,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.node == other.node
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on cost, then node index for determinism.
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Shortest-time path from `origin` to `dest` under the supplied frozen
/// loads. Returns the node path and its exact summed BPR cost.
///
/// Ties between equal-cost paths break toward the lexicographically
/// smallest node-id sequence.
pub fn astar_route(
    network: &RoadNetwork,
    loads: &EdgeLoad,
    params: &BprParams,
    origin: NodeIdx,
    dest: NodeIdx,
) -> Result<(Vec<NodeIdx>, f64), RoutingError> {
    let n = network.num_nodes();
    if origin >= n {
        return Err(RoutingError::UnknownNode(origin));
    }
    if dest >= n {
        return Err(RoutingError::UnknownNode(dest));
    }
    if origin == dest {
        return Ok((vec![origin], 0.0));
    }
    let h = free_flow_times_to(network, dest);
    if !h[origin].is_finite() {
        return Err(RoutingError::NoRoute {
            origin: network.node(origin).id.clone(),
            dest: network.node(dest).id.clone(),
        });
    }

    let mut g = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<NodeIdx>> = vec![None; n];
    let mut closed = vec![false; n];
    g[origin] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        cost: h[origin],
        node: origin,
    });
    while let Some(HeapEntry { node, .. }) = heap.pop() {
        if closed[node] {
            continue;
        }
        closed[node] = true;
        if node == dest {
            break;
        }
        for &e in network.out_edges(node) {
            let edge = network.edge(e);
            if closed[edge.to] || !h[edge.to].is_finite() {
                continue;
            }
            let cost = edge_cost(network, loads, params, e)?;
            let cand = g[node] + cost;
            if cand < g[edge.to] {
                g[edge.to] = cand;
                parent[edge.to] = Some(node);
                heap.push(HeapEntry {
                    cost: cand + h[edge.to],
                    node: edge.to,
                });
            } else if cand == g[edge.to] && prefer_new_parent(network, &parent, edge.to, node) {
                parent[edge.to] = Some(node);
                heap.push(HeapEntry {
                    cost: cand + h[edge.to],
                    node: edge.to,
                });
            }
        }
    }
    if !closed[dest] {
        return Err(RoutingError::NoRoute {
            origin: network.node(origin).id.clone(),
            dest: network.node(dest).id.clone(),
        });
    }
    let mut path = vec![dest];
    let mut cur = dest;
    while let Some(p) = parent[cur] {
        path.push(p);
        cur = p;
    }
    path.reverse();
    // Recompute the exact path cost from edge delays, independent of the
    // heuristic bookkeeping.
    let mut total = 0.0;
    for pair in path.windows(2) {
        let e = network
            .find_edge(pair[0], pair[1])
            .expect("path uses existing edges");
        total += edge_cost(network, loads, params, e)?;
    }
    Ok((path, total))
}

/// On an exact cost tie, prefer the parent giving the lexicographically
/// smaller node-id prefix.
fn prefer_new_parent(
    network: &RoadNetwork,
    parent: &[Option<NodeIdx>],
    node: NodeIdx,
    candidate: NodeIdx,
) -> bool {
    let trail = |mut v: NodeIdx, first: Option<NodeIdx>| -> Vec<String> {
        let mut out = Vec::new();
        if let Some(f) = first {
            v = f;
        }
        out.push(network.node(v).id.clone());
        while let Some(p) = parent[v] {
            out.push(network.node(p).id.clone());
            v = p;
        }
        out.reverse();
        out
    };
    let _ = node;
    let current = match parent[node] {
        Some(p) => trail(p, None),
        None => return false,
    };
    let new = trail(candidate, None);
    new < current
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bpr_zero_flow() {
        let p = BprParams::default();
        assert_eq!(bpr_delay(10.0, 0.0, 2.0, &p).unwrap(), 10.0);
    }

    #[test]
    fn bpr_at_capacity() {
        let p = BprParams::default();
        assert_relative_eq!(bpr_delay(10.0, 2.0, 2.0, &p).unwrap(), 11.5);
    }

    #[test]
    fn bpr_twice_capacity() {
        let p = BprParams::default();
        assert_relative_eq!(bpr_delay(10.0, 4.0, 2.0, &p).unwrap(), 34.0);
    }

    #[test]
    fn bpr_rejects_zero_capacity() {
        let p = BprParams::default();
        assert!(bpr_delay(10.0, 0.0, 0.0, &p).is_err());
    }

    #[test]
    fn bpr_monotone_in_flow() {
        let p = BprParams::default();
        let mut last = 0.0;
        for k in 0..20 {
            let t = bpr_delay(5.0, k as f64 * 0.3, 2.0, &p).unwrap();
            assert!(t >= last);
            last = t;
        }
    }

    fn single_edge_net() -> RoadNetwork {
        let mut net = RoadNetwork::new();
        let a = net.add_node("a", None);
        let b = net.add_node("b", None);
        net.add_edge(a, b, 1.0, 5.0);
        net
    }

    #[test]
    fn single_edge_route() {
        let net = single_edge_net();
        let loads = EdgeLoad::zeros(&net);
        let (path, time) =
            astar_route(&net, &loads, &BprParams::default(), 0, 1).unwrap();
        assert_eq!(path, vec![0, 1]);
        assert_relative_eq!(time, 5.0);
    }

    #[test]
    fn avoids_loaded_parallel_route() {
        // Two routes a->m1->b and a->m2->b with equal free-flow time; load
        // the first at capacity and the unloaded one must win.
        let mut net = RoadNetwork::new();
        let a = net.add_node("a", None);
        let m1 = net.add_node("m1", None);
        let m2 = net.add_node("m2", None);
        let b = net.add_node("b", None);
        let e1 = net.add_edge(a, m1, 1.0, 5.0);
        net.add_edge(m1, b, 1.0, 5.0);
        net.add_edge(a, m2, 1.0, 5.0);
        net.add_edge(m2, b, 1.0, 5.0);
        let mut loads = EdgeLoad::zeros(&net);
        loads.0[e1] = 1.0;
        let (path, time) =
            astar_route(&net, &loads, &BprParams::default(), a, b).unwrap();
        assert_eq!(path, vec![a, m2, b]);
        assert_relative_eq!(time, 10.0);
    }

    #[test]
    fn unreachable_dest() {
        let mut net = single_edge_net();
        let c = net.add_node("c", None);
        let loads = EdgeLoad::zeros(&net);
        let err = astar_route(&net, &loads, &BprParams::default(), 0, c);
        assert!(matches!(err, Err(RoutingError::NoRoute { .. })));
    }

    #[test]
    fn ties_break_lexicographically() {
        // Two equal-cost, equal-length routes; "m1" < "m2" must win.
        let mut net = RoadNetwork::new();
        let a = net.add_node("a", None);
        let m2 = net.add_node("m2", None);
        let m1 = net.add_node("m1", None);
        let b = net.add_node("b", None);
        net.add_edge(a, m2, 1.0, 5.0);
        net.add_edge(m2, b, 1.0, 5.0);
        net.add_edge(a, m1, 1.0, 5.0);
        net.add_edge(m1, b, 1.0, 5.0);
        let loads = EdgeLoad::zeros(&net);
        let (path, _) = astar_route(&net, &loads, &BprParams::default(), a, b).unwrap();
        assert_eq!(path, vec![a, m1, b]);
    }

    #[test]
    fn zero_load_matches_free_flow_search() {
        let net = crate::netgraph::tests::grid(4, 2.0);
        let loads = EdgeLoad::zeros(&net);
        for (o, d) in [(0usize, 15usize), (3, 12), (5, 10)] {
            let (_, time) = astar_route(&net, &loads, &BprParams::default(), o, d).unwrap();
            let h = free_flow_times_to(&net, d);
            assert_relative_eq!(time, h[o], max_relative = 1e-12);
        }
    }
}
