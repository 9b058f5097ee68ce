//! Rebalancing machinery: the constructive feasible-rebalancing algorithm
//! on capacitated networks, the real-time region-level rebalancing program,
//! flow decomposition into vehicle paths, and region bookkeeping.

use serde::Serialize;

use crate::lp::{LinearProgram, LpStatus, Relation, Tolerances, solve_lp};
use crate::netgraph::{EdgeIdx, NodeIdx, RequestSet, RoadNetwork};

const FLOW_TOL: f64 = 1e-9;

/// A rebalancing flow under construction. Between augmentations it
/// satisfies conservation exactly at nodes that are neither a request
/// origin nor destination, runs a deficit at origins and a surplus at
/// destinations, and respects edge capacities jointly with the customer
/// flows.
#[derive(Debug, Clone, Serialize)]
pub struct PartialRebalancingFlow {
    pub flow: Vec<f64>,
    pub defective_origins: Vec<NodeIdx>,
    pub defective_destinations: Vec<NodeIdx>,
}

#[derive(Debug, thiserror::Error)]
pub enum RebalanceError {
    #[error("customer flows are infeasible: {0}")]
    InfeasibleCustomerFlows(String),
    #[error("partial flow violates the partial-flow properties: {0}")]
    InvalidPartialFlow(String),
    #[error("flow value on edge {edge} is {value}, expected nonnegative integer")]
    NonIntegralFlow { edge: EdgeIdx, value: f64 },
    #[error("LP solve failed: {0:?}")]
    Numerical(LpStatus),
    #[error("LP vertex is not integral on edge {edge}: {value}")]
    NonIntegralVertex { edge: usize, value: f64 },
}

/// Signed rebalancing imbalance at `v`: inflow plus arriving demand minus
/// outflow minus departing demand. Zero everywhere means the flow is a
/// feasible rebalancing flow.
fn node_imbalance(
    network: &RoadNetwork,
    requests: &RequestSet,
    flow: &[f64],
    v: NodeIdx,
) -> f64 {
    let inflow: f64 = network.in_edges(v).iter().map(|&e| flow[e]).sum();
    let outflow: f64 = network.out_edges(v).iter().map(|&e| flow[e]).sum();
    let arriving: f64 = requests
        .requests
        .iter()
        .filter(|r| r.dest == v)
        .map(|r| r.rate)
        .sum();
    let departing: f64 = requests
        .requests
        .iter()
        .filter(|r| r.origin == v)
        .map(|r| r.rate)
        .sum();
    inflow + arriving - outflow - departing
}

fn check_partial_properties(
    network: &RoadNetwork,
    requests: &RequestSet,
    customer_flows: &[Vec<f64>],
    flow: &[f64],
) -> Result<(), RebalanceError> {
    let origins: std::collections::HashSet<_> =
        requests.requests.iter().map(|r| r.origin).collect();
    let dests: std::collections::HashSet<_> = requests.requests.iter().map(|r| r.dest).collect();
    for v in 0..network.num_nodes() {
        let imbalance = node_imbalance(network, requests, flow, v);
        let is_origin = origins.contains(&v);
        let is_dest = dests.contains(&v);
        if is_origin && is_dest {
            return Err(RebalanceError::InvalidPartialFlow(format!(
                "node {} is both an origin and a destination; apply the shadow transform first",
                network.node(v).id
            )));
        }
        if !is_origin && !is_dest && imbalance.abs() > FLOW_TOL {
            return Err(RebalanceError::InvalidPartialFlow(format!(
                "conservation violated at interior node {} by {}",
                network.node(v).id,
                imbalance
            )));
        }
        if is_origin && imbalance > FLOW_TOL {
            return Err(RebalanceError::InvalidPartialFlow(format!(
                "origin {} has surplus {}",
                network.node(v).id,
                imbalance
            )));
        }
        if is_dest && imbalance < -FLOW_TOL {
            return Err(RebalanceError::InvalidPartialFlow(format!(
                "destination {} has deficit {}",
                network.node(v).id,
                imbalance
            )));
        }
    }
    for (e, edge) in network.edges().iter().enumerate() {
        let customer: f64 = customer_flows.iter().map(|f| f[e]).sum();
        let total = customer + flow[e];
        if flow[e] < -FLOW_TOL {
            return Err(RebalanceError::InvalidPartialFlow(format!(
                "negative flow {} on edge {}",
                flow[e], e
            )));
        }
        if total > edge.capacity + FLOW_TOL {
            return Err(RebalanceError::InvalidPartialFlow(format!(
                "capacity exceeded on edge {} ({} > {})",
                e, total, edge.capacity
            )));
        }
    }
    Ok(())
}

/// Nodes where the rebalancing balance is strict. Either both sets are
/// nonempty or both are empty; empty means `partial.flow` is already a
/// feasible rebalancing flow.
pub fn find_defective(
    network: &RoadNetwork,
    requests: &RequestSet,
    customer_flows: &[Vec<f64>],
    partial: &PartialRebalancingFlow,
) -> Result<(Vec<NodeIdx>, Vec<NodeIdx>), RebalanceError> {
    check_partial_properties(network, requests, customer_flows, &partial.flow)?;
    Ok(defective_sets(network, requests, &partial.flow))
}

fn defective_sets(
    network: &RoadNetwork,
    requests: &RequestSet,
    flow: &[f64],
) -> (Vec<NodeIdx>, Vec<NodeIdx>) {
    let mut origins = Vec::new();
    let mut dests = Vec::new();
    for v in 0..network.num_nodes() {
        let imbalance = node_imbalance(network, requests, flow, v);
        if imbalance < -FLOW_TOL {
            origins.push(v);
        } else if imbalance > FLOW_TOL {
            dests.push(v);
        }
    }
    (origins, dests)
}

/// Witness of a blocked construction: every edge leaving `s_side` is
/// saturated and the cut takes in strictly more capacity than it lets out.
#[derive(Debug, Clone, Serialize)]
pub struct SaturatedCut {
    pub s_side: Vec<NodeIdx>,
    pub c_out: f64,
    pub c_in: f64,
    pub saturated_edges: Vec<EdgeIdx>,
}

impl SaturatedCut {
    pub fn imbalance(&self) -> f64 {
        self.c_in - self.c_out
    }
}

#[derive(Debug)]
pub enum RebalanceOutcome {
    Feasible(Vec<f64>),
    Blocked {
        partial: PartialRebalancingFlow,
        saturated_cut: SaturatedCut,
    },
}

/// Builds a feasible rebalancing flow for the given customer flows by
/// repeatedly augmenting along non-saturated paths from a defective
/// destination to a defective origin. On capacity-symmetric networks this
/// always succeeds; otherwise a saturated cut separating the surplus from
/// the deficit is returned as the infeasibility witness.
///
/// Customer flows must be feasible and no node may be both a request
/// origin and a request destination (apply the shadow transform first).
pub fn construct_rebalancing_flow(
    network: &RoadNetwork,
    requests: &RequestSet,
    customer_flows: &[Vec<f64>],
) -> Result<RebalanceOutcome, RebalanceError> {
    verify_customer_flows(network, requests, customer_flows)?;
    let ne = network.num_edges();
    let mut flow = vec![0.0; ne];
    check_partial_properties(network, requests, customer_flows, &flow)?;

    let customer_total: Vec<f64> = (0..ne)
        .map(|e| customer_flows.iter().map(|f| f[e]).sum())
        .collect();
    let residual = |e: EdgeIdx, flow: &[f64]| -> f64 {
        network.edge(e).capacity - customer_total[e] - flow[e]
    };

    // Nodes once balanced must stay balanced; this is what makes the
    // augmentation loop terminate.
    let (init_origins, init_dests) = defective_sets(network, requests, &flow);
    let mut ever_cleared_origin = vec![false; network.num_nodes()];
    let mut ever_cleared_dest = vec![false; network.num_nodes()];
    for v in 0..network.num_nodes() {
        ever_cleared_origin[v] = !init_origins.contains(&v);
        ever_cleared_dest[v] = !init_dests.contains(&v);
    }

    loop {
        let (origins, dests) = defective_sets(network, requests, &flow);
        for v in 0..network.num_nodes() {
            debug_assert!(
                !(ever_cleared_origin[v] && origins.contains(&v)),
                "node became a defective origin again"
            );
            debug_assert!(
                !(ever_cleared_dest[v] && dests.contains(&v)),
                "node became a defective destination again"
            );
        }
        if dests.is_empty() {
            debug_assert!(origins.is_empty(), "defective sets must co-exist");
            return Ok(RebalanceOutcome::Feasible(flow));
        }

        // BFS from each defective destination (lowest id first) over
        // non-saturated edges until some defective origin is reachable.
        let origin_set: std::collections::HashSet<_> = origins.iter().copied().collect();
        let mut augmented = false;
        for &d in &dests {
            if let Some(path) = bfs_path(network, d, &origin_set, &flow, &residual) {
                let o = *path.last().unwrap();
                let surplus = node_imbalance(network, requests, &flow, d);
                let deficit = -node_imbalance(network, requests, &flow, o);
                let mut delta = surplus.min(deficit);
                for w in path.windows(2) {
                    let e = network.find_edge(w[0], w[1]).unwrap();
                    delta = delta.min(residual(e, &flow));
                }
                debug_assert!(delta > FLOW_TOL);
                for w in path.windows(2) {
                    let e = network.find_edge(w[0], w[1]).unwrap();
                    flow[e] += delta;
                }
                debug_assert!(
                    check_partial_properties(network, requests, customer_flows, &flow).is_ok()
                );
                augmented = true;
                break;
            }
        }
        if augmented {
            let (now_origins, now_dests) = defective_sets(network, requests, &flow);
            for v in 0..network.num_nodes() {
                if !now_origins.contains(&v) {
                    ever_cleared_origin[v] = true;
                }
                if !now_dests.contains(&v) {
                    ever_cleared_dest[v] = true;
                }
            }
            continue;
        }

        // No destination can reach any origin: the set reachable from the
        // lowest-id defective destination has every outgoing edge
        // saturated, and its capacity imbalance is the witness.
        let d = dests[0];
        let reachable = reachable_set(network, d, &flow, &residual);
        let mut c_out = 0.0;
        let mut c_in = 0.0;
        let mut saturated_edges = Vec::new();
        for (e, edge) in network.edges().iter().enumerate() {
            let from_in = reachable[edge.from];
            let to_in = reachable[edge.to];
            if from_in && !to_in {
                c_out += edge.capacity;
                saturated_edges.push(e);
            } else if !from_in && to_in {
                c_in += edge.capacity;
            }
        }
        let s_side: Vec<NodeIdx> = (0..network.num_nodes()).filter(|&v| reachable[v]).collect();
        let (defective_origins, defective_destinations) =
            defective_sets(network, requests, &flow);
        return Ok(RebalanceOutcome::Blocked {
            partial: PartialRebalancingFlow {
                flow,
                defective_origins,
                defective_destinations,
            },
            saturated_cut: SaturatedCut {
                s_side,
                c_out,
                c_in,
                saturated_edges,
            },
        });
    }
}

fn bfs_path(
    network: &RoadNetwork,
    start: NodeIdx,
    targets: &std::collections::HashSet<NodeIdx>,
    flow: &[f64],
    residual: &impl Fn(EdgeIdx, &[f64]) -> f64,
) -> Option<Vec<NodeIdx>> {
    let mut parent: Vec<Option<NodeIdx>> = vec![None; network.num_nodes()];
    let mut seen = vec![false; network.num_nodes()];
    let mut queue = std::collections::VecDeque::new();
    seen[start] = true;
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        if targets.contains(&u) {
            let mut path = vec![u];
            let mut cur = u;
            while let Some(p) = parent[cur] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for &e in network.out_edges(u) {
            let v = network.edge(e).to;
            if !seen[v] && residual(e, flow) > FLOW_TOL {
                seen[v] = true;
                parent[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    None
}

fn reachable_set(
    network: &RoadNetwork,
    start: NodeIdx,
    flow: &[f64],
    residual: &impl Fn(EdgeIdx, &[f64]) -> f64,
) -> Vec<bool> {
    let mut seen = vec![false; network.num_nodes()];
    let mut queue = std::collections::VecDeque::new();
    seen[start] = true;
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        for &e in network.out_edges(u) {
            let v = network.edge(e).to;
            if !seen[v] && residual(e, flow) > FLOW_TOL {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

fn verify_customer_flows(
    network: &RoadNetwork,
    requests: &RequestSet,
    customer_flows: &[Vec<f64>],
) -> Result<(), RebalanceError> {
    if customer_flows.len() != requests.len() {
        return Err(RebalanceError::InfeasibleCustomerFlows(format!(
            "{} flow vectors for {} requests",
            customer_flows.len(),
            requests.len()
        )));
    }
    for (m, r) in requests.requests.iter().enumerate() {
        let f = &customer_flows[m];
        for v in 0..network.num_nodes() {
            let outflow: f64 = network.out_edges(v).iter().map(|&e| f[e]).sum();
            let inflow: f64 = network.in_edges(v).iter().map(|&e| f[e]).sum();
            let expect = if v == r.origin {
                r.rate
            } else if v == r.dest {
                -r.rate
            } else {
                0.0
            };
            if (outflow - inflow - expect).abs() > 1e-7 {
                return Err(RebalanceError::InfeasibleCustomerFlows(format!(
                    "conservation violated for request {} at node {}",
                    m,
                    network.node(v).id
                )));
            }
        }
    }
    for (e, edge) in network.edges().iter().enumerate() {
        let total: f64 = customer_flows.iter().map(|f| f[e]).sum();
        if total > edge.capacity + 1e-7 {
            return Err(RebalanceError::InfeasibleCustomerFlows(format!(
                "capacity exceeded on edge {}",
                e
            )));
        }
        for f in customer_flows {
            if f[e] < -1e-9 {
                return Err(RebalanceError::InfeasibleCustomerFlows(format!(
                    "negative flow on edge {}",
                    e
                )));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Real-time region-level rebalancing
// ---------------------------------------------------------------------------

/// One rebalancing instance: a set of region anchor nodes with integral
/// surpluses/deficits, integral residual edge capacities, and a slack cost
/// that makes dropping vehicles a last resort.
#[derive(Debug, Clone)]
pub struct RebalanceInstance {
    /// Anchor node of each region.
    pub anchors: Vec<NodeIdx>,
    /// Excess vehicles per region (may be negative).
    pub excess: Vec<i64>,
    /// Desired vehicles per region (>= 0).
    pub desired: Vec<i64>,
    /// Residual capacity per network edge.
    pub residual_capacity: Vec<u64>,
    /// Cost per unit of slack. None picks `1 + sum(t) * sum(|excess - desired|)`.
    pub slack_cost: Option<f64>,
}

impl RebalanceInstance {
    /// Regions with more excess than desired (vehicle sources).
    pub fn origin_regions(&self) -> Vec<usize> {
        (0..self.anchors.len())
            .filter(|&i| self.excess[i] > self.desired[i])
            .collect()
    }

    /// Regions with less excess than desired (vehicle sinks).
    pub fn destination_regions(&self) -> Vec<usize> {
        (0..self.anchors.len())
            .filter(|&i| self.excess[i] < self.desired[i])
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RealtimeSolution {
    /// Integral rebalancing flow per edge.
    pub flow: Vec<u64>,
    /// Slack per origin region (vehicles not sent), indexed like regions.
    pub ds: Vec<u64>,
    /// Slack per destination region (vehicles not received).
    pub dt: Vec<u64>,
    pub objective: f64,
}

/// Solves the real-time rebalancing program: route surplus vehicles from
/// origin regions to destination regions at minimum travel time, subject
/// to residual capacities, with per-region slack absorbing whatever the
/// capacities block. The constraint matrix is totally unimodular, so the
/// LP relaxation's vertex is integral; that is asserted, not assumed.
pub fn solve_realtime_rebalance(
    instance: &RebalanceInstance,
    network: &RoadNetwork,
    travel_times: &[f64],
) -> Result<RealtimeSolution, RebalanceError> {
    let ne = network.num_edges();
    let nr = instance.anchors.len();
    assert_eq!(travel_times.len(), ne);
    assert_eq!(instance.excess.len(), nr);
    assert_eq!(instance.desired.len(), nr);
    assert_eq!(instance.residual_capacity.len(), ne);

    let origins = instance.origin_regions();
    let dests = instance.destination_regions();
    let total_imbalance: i64 = (0..nr)
        .map(|i| (instance.excess[i] - instance.desired[i]).abs())
        .sum();
    let slack_cost = instance.slack_cost.unwrap_or_else(|| {
        1.0 + travel_times.iter().sum::<f64>() * total_imbalance as f64
    });

    // Variables: one flow per edge, then one ds per origin region, then
    // one dt per destination region.
    let ds_off = ne;
    let dt_off = ne + origins.len();
    let mut lp = LinearProgram::new(dt_off + dests.len());
    for e in 0..ne {
        lp.set_objective(e, travel_times[e]);
        lp.set_upper_bound(e, instance.residual_capacity[e] as f64);
    }
    for (k, &i) in origins.iter().enumerate() {
        lp.set_objective(ds_off + k, slack_cost);
        lp.set_upper_bound(ds_off + k, (instance.excess[i] - instance.desired[i]) as f64);
    }
    for (k, &j) in dests.iter().enumerate() {
        lp.set_objective(dt_off + k, slack_cost);
        lp.set_upper_bound(dt_off + k, (instance.desired[j] - instance.excess[j]) as f64);
    }

    // Node balance: net outflow equals the (slack-adjusted) region supply
    // at anchors, zero elsewhere.
    for v in 0..network.num_nodes() {
        let mut coeffs = Vec::new();
        for &e in network.out_edges(v) {
            coeffs.push((e, 1.0));
        }
        for &e in network.in_edges(v) {
            coeffs.push((e, -1.0));
        }
        let mut rhs = 0.0;
        for (k, &i) in origins.iter().enumerate() {
            if instance.anchors[i] == v {
                rhs += (instance.excess[i] - instance.desired[i]) as f64;
                coeffs.push((ds_off + k, 1.0));
            }
        }
        for (k, &j) in dests.iter().enumerate() {
            if instance.anchors[j] == v {
                rhs -= (instance.desired[j] - instance.excess[j]) as f64;
                coeffs.push((dt_off + k, -1.0));
            }
        }
        lp.add_constraint(coeffs, Relation::Eq, rhs);
    }

    let sol = solve_lp(&lp, Tolerances::default());
    if sol.status != LpStatus::Optimal {
        return Err(RebalanceError::Numerical(sol.status));
    }
    let round_integral = |j: usize| -> Result<u64, RebalanceError> {
        let v = sol.x[j];
        let r = v.round();
        if (v - r).abs() > 1e-7 || r < -0.5 {
            return Err(RebalanceError::NonIntegralVertex { edge: j, value: v });
        }
        Ok(r.max(0.0) as u64)
    };
    let flow: Vec<u64> = (0..ne).map(round_integral).collect::<Result<_, _>>()?;
    let mut ds = vec![0u64; nr];
    for (k, &i) in origins.iter().enumerate() {
        ds[i] = round_integral(ds_off + k)?;
    }
    let mut dt = vec![0u64; nr];
    for (k, &j) in dests.iter().enumerate() {
        dt[j] = round_integral(dt_off + k)?;
    }
    let objective = flow
        .iter()
        .zip(travel_times)
        .map(|(&f, &t)| f as f64 * t)
        .sum::<f64>()
        + slack_cost * (ds.iter().sum::<u64>() + dt.iter().sum::<u64>()) as f64;
    Ok(RealtimeSolution {
        flow,
        ds,
        dt,
        objective,
    })
}

// ---------------------------------------------------------------------------
// Flow decomposition
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct PathSet {
    pub paths: Vec<(Vec<NodeIdx>, u64)>,
    pub cycles: Vec<(Vec<NodeIdx>, u64)>,
}

impl PathSet {
    /// Edge flow reproduced by superposing all paths and cycles.
    pub fn recompose(&self, network: &RoadNetwork) -> Vec<u64> {
        let mut flow = vec![0u64; network.num_edges()];
        for (nodes, mult) in self.paths.iter().chain(self.cycles.iter()) {
            for w in nodes.windows(2) {
                let e = network.find_edge(w[0], w[1]).expect("edge exists");
                flow[e] += mult;
            }
        }
        // A cycle list closes back on itself explicitly: [a, b, c, a].
        flow
    }

    pub fn len(&self) -> usize {
        self.paths.len() + self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty() && self.cycles.is_empty()
    }
}

/// Decomposes a nonnegative integral edge flow into source-to-sink paths
/// plus cycles. The superposition reproduces the input exactly and at most
/// |E| elements are produced.
pub fn flow_decompose(network: &RoadNetwork, flow: &[f64]) -> Result<PathSet, RebalanceError> {
    let ne = network.num_edges();
    assert_eq!(flow.len(), ne);
    let mut f = vec![0u64; ne];
    for (e, &v) in flow.iter().enumerate() {
        let r = v.round();
        if v < -1e-9 || (v - r).abs() > 1e-9 {
            return Err(RebalanceError::NonIntegralFlow { edge: e, value: v });
        }
        f[e] = r as u64;
    }

    let imbalance = |f: &[u64], v: NodeIdx| -> i64 {
        let out: u64 = network.out_edges(v).iter().map(|&e| f[e]).sum();
        let inn: u64 = network.in_edges(v).iter().map(|&e| f[e]).sum();
        out as i64 - inn as i64
    };

    let mut paths = Vec::new();
    let mut cycles = Vec::new();

    // Walk from each net-source until a net-sink; peel off cycles formed
    // along the way. Each extraction zeroes at least one edge.
    loop {
        let source = (0..network.num_nodes()).find(|&v| imbalance(&f, v) > 0);
        let Some(source) = source else { break };
        let (walk, cycle) = trace_walk(network, &f, source, |v| imbalance(&f, v) < 0);
        extract(network, &mut f, &walk, cycle, &mut paths, &mut cycles);
    }

    // Remaining flow is a circulation: every positive edge lies on a cycle.
    loop {
        let start = (0..ne).find(|&e| f[e] > 0).map(|e| network.edge(e).from);
        let Some(start) = start else { break };
        let (walk, cycle) = trace_walk(network, &f, start, |_| false);
        debug_assert!(cycle);
        extract(network, &mut f, &walk, cycle, &mut paths, &mut cycles);
    }

    debug_assert!(paths.len() + cycles.len() <= ne);
    Ok(PathSet { paths, cycles })
}

/// Follows positive-flow edges (lowest edge index first) from `start`
/// until `stop(v)` holds or a node repeats. Returns the node walk and
/// whether it ends in a cycle; when it does, the walk is trimmed to just
/// the cycle (closed, first == last).
fn trace_walk(
    network: &RoadNetwork,
    f: &[u64],
    start: NodeIdx,
    stop: impl Fn(NodeIdx) -> bool,
) -> (Vec<NodeIdx>, bool) {
    let mut walk = vec![start];
    let mut seen_at = std::collections::HashMap::new();
    seen_at.insert(start, 0usize);
    let mut cur = start;
    loop {
        if stop(cur) && walk.len() > 1 {
            return (walk, false);
        }
        let next_edge = network
            .out_edges(cur)
            .iter()
            .copied()
            .find(|&e| f[e] > 0)
            .expect("walk cannot dead-end on a flow with net supply");
        let v = network.edge(next_edge).to;
        if let Some(&k) = seen_at.get(&v) {
            let mut cycle = walk[k..].to_vec();
            cycle.push(v);
            return (cycle, true);
        }
        walk.push(v);
        seen_at.insert(v, walk.len() - 1);
        cur = v;
    }
}

fn extract(
    network: &RoadNetwork,
    f: &mut [u64],
    walk: &[NodeIdx],
    is_cycle: bool,
    paths: &mut Vec<(Vec<NodeIdx>, u64)>,
    cycles: &mut Vec<(Vec<NodeIdx>, u64)>,
) {
    let mut delta = u64::MAX;
    for w in walk.windows(2) {
        let e = network.find_edge(w[0], w[1]).unwrap();
        delta = delta.min(f[e]);
    }
    if is_cycle {
        // A cycle's multiplicity is not capped by node imbalance.
    } else {
        let source = walk[0];
        let sink = *walk.last().unwrap();
        let imb = |v: NodeIdx| -> i64 {
            let out: u64 = network.out_edges(v).iter().map(|&e| f[e]).sum();
            let inn: u64 = network.in_edges(v).iter().map(|&e| f[e]).sum();
            out as i64 - inn as i64
        };
        delta = delta.min(imb(source).max(0) as u64);
        delta = delta.min((-imb(sink)).max(0) as u64);
    }
    debug_assert!(delta > 0);
    for w in walk.windows(2) {
        let e = network.find_edge(w[0], w[1]).unwrap();
        f[e] -= delta;
    }
    if is_cycle {
        cycles.push((walk.to_vec(), delta));
    } else {
        paths.push((walk.to_vec(), delta));
    }
}

// ---------------------------------------------------------------------------
// Region bookkeeping
// ---------------------------------------------------------------------------

/// Per-region tallies extracted from a simulator snapshot.
#[derive(Debug, Clone)]
pub struct RegionStateInput {
    /// Available vehicles currently inside each region (v_i).
    pub vehicles_in_region: Vec<u64>,
    /// Vehicles bound for each region arriving within the vicinity horizon
    /// (sum over j of v_ji).
    pub inbound_within_vicinity: Vec<u64>,
    /// Waiting customers per region (c_i).
    pub waiting_customers: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct RegionState {
    /// v^own_i = v_i + sum_j v_ji.
    pub v_own: Vec<i64>,
    /// v^e_i = v^own_i - c_i.
    pub v_excess: Vec<i64>,
    /// Even split of total excess, largest-remainder rounded.
    pub v_desired: Vec<i64>,
}

/// Computes the region bookkeeping quantities. Desired counts split the
/// total excess evenly with largest-remainder rounding (lowest region id
/// wins ties) so the total is preserved exactly; a negative total yields
/// all-zero desired counts.
pub fn compute_region_state(input: &RegionStateInput) -> RegionState {
    let n = input.vehicles_in_region.len();
    assert_eq!(input.inbound_within_vicinity.len(), n);
    assert_eq!(input.waiting_customers.len(), n);
    let v_own: Vec<i64> = (0..n)
        .map(|i| (input.vehicles_in_region[i] + input.inbound_within_vicinity[i]) as i64)
        .collect();
    let v_excess: Vec<i64> = (0..n)
        .map(|i| v_own[i] - input.waiting_customers[i] as i64)
        .collect();
    let total: i64 = v_excess.iter().sum();
    let v_desired = if n == 0 || total <= 0 {
        vec![0; n]
    } else {
        // All remainders are equal (total/n for every region), so the
        // largest-remainder rule reduces to giving the extra units to the
        // lowest region ids.
        let base = total / n as i64;
        let extra = (total % n as i64) as usize;
        (0..n)
            .map(|i| base + if i < extra { 1 } else { 0 })
            .collect()
    };
    RegionState {
        v_own,
        v_excess,
        v_desired,
    }
}
