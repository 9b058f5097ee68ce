//! Road-network representation, cut machinery and capacity-symmetry analysis.
//!
//! The network is a directed graph with per-edge capacities (vehicles per
//! unit time) and free-flow traversal times. All higher layers (flow
//! solvers, routing, simulation) operate on indices into the node and edge
//! tables kept here.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crrp::FlowAssignment;

pub type NodeIdx = usize;
pub type EdgeIdx = usize;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    /// Planar coordinates in meters, when known. Required only by region
    /// clustering and coordinate-based heuristics.
    pub pos: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeIdx,
    pub to: NodeIdx,
    /// Vehicles per unit time at the onset of congestion.
    pub capacity: f64,
    /// Traversal time at free-flow speed.
    pub free_flow_time: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<String, NodeIdx>,
    out_edges: Vec<Vec<EdgeIdx>>,
    in_edges: Vec<Vec<EdgeIdx>>,
}

impl RoadNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node and returns its index. Duplicate ids return the existing
    /// index (positions are not overwritten).
    pub fn add_node(&mut self, id: &str, pos: Option<(f64, f64)>) -> NodeIdx {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(Node {
            id: id.to_string(),
            pos,
        });
        self.index.insert(id.to_string(), i);
        self.out_edges.push(Vec::new());
        self.in_edges.push(Vec::new());
        i
    }

    pub fn add_edge(&mut self, from: NodeIdx, to: NodeIdx, capacity: f64, free_flow_time: f64) -> EdgeIdx {
        let e = self.edges.len();
        self.edges.push(Edge {
            from,
            to,
            capacity,
            free_flow_time,
        });
        if from < self.out_edges.len() {
            self.out_edges[from].push(e);
        }
        if to < self.in_edges.len() {
            self.in_edges[to].push(e);
        }
        e
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, i: NodeIdx) -> &Node {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edge(&self, e: EdgeIdx) -> &Edge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_index(&self, id: &str) -> Option<NodeIdx> {
        self.index.get(id).copied()
    }

    pub fn out_edges(&self, v: NodeIdx) -> &[EdgeIdx] {
        &self.out_edges[v]
    }

    pub fn in_edges(&self, v: NodeIdx) -> &[EdgeIdx] {
        &self.in_edges[v]
    }

    pub fn find_edge(&self, from: NodeIdx, to: NodeIdx) -> Option<EdgeIdx> {
        self.out_edges
            .get(from)?
            .iter()
            .copied()
            .find(|&e| self.edges[e].to == to)
    }

    /// Structural invariant check. Report-style: collects every violation
    /// instead of failing on the first.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut seen = HashMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.from >= self.nodes.len() || e.to >= self.nodes.len() {
                violations.push(format!("edge {} references unknown node", i));
                continue;
            }
            if e.from == e.to {
                violations.push(format!("self-loop at node {}", self.nodes[e.from].id));
            }
            if e.capacity <= 0.0 || !e.capacity.is_finite() {
                violations.push(format!(
                    "nonpositive capacity on edge {}->{}",
                    self.nodes[e.from].id, self.nodes[e.to].id
                ));
            }
            if e.free_flow_time < 0.0 || !e.free_flow_time.is_finite() {
                violations.push(format!(
                    "negative free-flow time on edge {}->{}",
                    self.nodes[e.from].id, self.nodes[e.to].id
                ));
            }
            if seen.insert((e.from, e.to), i).is_some() {
                violations.push(format!(
                    "duplicate edge {}->{}",
                    self.nodes[e.from].id, self.nodes[e.to].id
                ));
            }
        }
        ValidationReport { violations }
    }

    /// Node-level capacity balance. The node check is equivalent to the
    /// all-cuts definition of capacity symmetry.
    ///
    /// Returns whether every node satisfies
    /// `|in - out| <= tolerance * (in + out)` along with the worst relative
    /// node imbalance observed.
    pub fn is_capacity_symmetric(&self, tolerance: f64) -> (bool, f64) {
        let mut worst = 0.0f64;
        for v in 0..self.nodes.len() {
            let cin: f64 = self.in_edges[v].iter().map(|&e| self.edges[e].capacity).sum();
            let cout: f64 = self.out_edges[v].iter().map(|&e| self.edges[e].capacity).sum();
            let total = cin + cout;
            if total <= 0.0 {
                continue;
            }
            let rel = (cin - cout).abs() / total;
            worst = worst.max(rel);
        }
        (worst <= tolerance, worst)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub origin: NodeIdx,
    pub dest: NodeIdx,
    /// Vehicles per unit time, strictly positive.
    pub rate: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RequestSet {
    pub requests: Vec<Request>,
}

impl RequestSet {
    pub fn new(requests: Vec<Request>) -> Self {
        Self { requests }
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn total_rate(&self) -> f64 {
        self.requests.iter().map(|r| r.rate).sum()
    }

    pub fn validate(&self, network: &RoadNetwork) -> ValidationReport {
        let mut violations = Vec::new();
        for (m, r) in self.requests.iter().enumerate() {
            if r.origin >= network.num_nodes() || r.dest >= network.num_nodes() {
                violations.push(format!("request {} references unknown node", m));
            }
            if r.origin == r.dest {
                violations.push(format!("request {} has origin equal to destination", m));
            }
            if r.rate <= 0.0 || !r.rate.is_finite() {
                violations.push(format!("request {} has nonpositive rate", m));
            }
        }
        ValidationReport { violations }
    }
}

/// A graph cut, stored as a node membership mask for the S side.
#[derive(Debug, Clone)]
pub struct Cut {
    in_s: Vec<bool>,
}

#[derive(Debug, thiserror::Error)]
pub enum CutError {
    #[error("cut side S must be a nonempty proper subset of the nodes")]
    DegenerateCut,
    #[error("exhaustive cut enumeration is capped at 20 nodes, network has {0}")]
    TooManyNodes(usize),
}

impl Cut {
    pub fn new(network: &RoadNetwork, s_side: impl IntoIterator<Item = NodeIdx>) -> Result<Self, CutError> {
        let mut in_s = vec![false; network.num_nodes()];
        for v in s_side {
            in_s[v] = true;
        }
        let count = in_s.iter().filter(|&&b| b).count();
        if count == 0 || count == in_s.len() {
            return Err(CutError::DegenerateCut);
        }
        Ok(Self { in_s })
    }

    fn from_mask(in_s: Vec<bool>) -> Self {
        Self { in_s }
    }

    pub fn contains(&self, v: NodeIdx) -> bool {
        self.in_s[v]
    }

    pub fn s_side(&self) -> Vec<NodeIdx> {
        (0..self.in_s.len()).filter(|&v| self.in_s[v]).collect()
    }

    /// The complementary cut (S̄, S).
    pub fn complement(&self) -> Self {
        Self {
            in_s: self.in_s.iter().map(|b| !b).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CutReport {
    pub c_out: f64,
    pub c_in: f64,
    pub f_out: Option<f64>,
    pub f_in: Option<f64>,
    /// Sum of request rates with origin in S and destination in S̄.
    pub demand_across: f64,
    /// Fractional capacity disparity 2|c_out - c_in| / (c_out + c_in),
    /// defined as 0 when no edge crosses the cut.
    pub disparity: f64,
}

pub fn disparity(c_out: f64, c_in: f64) -> f64 {
    let total = c_out + c_in;
    if total > 0.0 {
        2.0 * (c_out - c_in).abs() / total
    } else {
        0.0
    }
}

pub fn cut_report(
    network: &RoadNetwork,
    cut: &Cut,
    requests: &RequestSet,
    flows: Option<&FlowAssignment>,
) -> CutReport {
    let mut c_out = 0.0;
    let mut c_in = 0.0;
    let mut f_out = 0.0;
    let mut f_in = 0.0;
    for (e, edge) in network.edges().iter().enumerate() {
        let crosses_out = cut.contains(edge.from) && !cut.contains(edge.to);
        let crosses_in = !cut.contains(edge.from) && cut.contains(edge.to);
        if crosses_out {
            c_out += edge.capacity;
        } else if crosses_in {
            c_in += edge.capacity;
        }
        if let Some(fa) = flows {
            let customer: f64 = fa.customer_flows.iter().map(|f| f[e]).sum();
            if crosses_out {
                f_out += customer;
            } else if crosses_in {
                f_in += customer;
            }
        }
    }
    let demand_across = requests
        .requests
        .iter()
        .filter(|r| cut.contains(r.origin) && !cut.contains(r.dest))
        .map(|r| r.rate)
        .sum();
    CutReport {
        c_out,
        c_in,
        f_out: flows.map(|_| f_out),
        f_in: flows.map(|_| f_in),
        demand_across,
        disparity: disparity(c_out, c_in),
    }
}

/// How to pick the cuts checked by [`check_cut_conditions`].
#[derive(Debug, Clone, Copy)]
pub enum CutEnumeration {
    /// All 2^|V| - 2 nonempty proper subsets. Only permitted for |V| <= 20.
    Exhaustive,
    /// `count` uniformly random nonempty proper subsets from a seeded
    /// generator. A falsification tool, not a certificate.
    Sampled { count: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct CutViolation {
    pub s_side: Vec<NodeIdx>,
    pub demand_across: f64,
    pub c_out: f64,
    pub c_in: f64,
    /// demand_across - min(c_out, c_in); positive means violated.
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub passed: bool,
    pub cuts_checked: usize,
    pub worst_violation: Option<CutViolation>,
}

/// Checks the structural necessary condition for feasible flows: across
/// every cut, the demand separated by the cut must not exceed the outbound
/// capacity nor the inbound capacity.
pub fn check_cut_conditions(
    network: &RoadNetwork,
    requests: &RequestSet,
    mode: CutEnumeration,
) -> Result<ConditionReport, CutError> {
    let n = network.num_nodes();
    let mut worst: Option<CutViolation> = None;
    let mut checked = 0usize;
    let mut consider = |cut: &Cut| {
        checked += 1;
        let report = cut_report(network, cut, requests, None);
        let excess = report.demand_across - report.c_out.min(report.c_in);
        let tol = 1e-12 * (1.0 + report.demand_across.abs());
        if excess > tol && worst.as_ref().map_or(true, |w| excess > w.excess) {
            worst = Some(CutViolation {
                s_side: cut.s_side(),
                demand_across: report.demand_across,
                c_out: report.c_out,
                c_in: report.c_in,
                excess,
            });
        }
    };
    match mode {
        CutEnumeration::Exhaustive => {
            if n > 20 {
                return Err(CutError::TooManyNodes(n));
            }
            for mask in 1u32..((1u32 << n) - 1) {
                let in_s: Vec<bool> = (0..n).map(|v| mask >> v & 1 == 1).collect();
                consider(&Cut::from_mask(in_s));
            }
        }
        CutEnumeration::Sampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut drawn = 0;
            while drawn < count {
                if let Some(cut) = random_cut(n, &mut rng) {
                    consider(&cut);
                    drawn += 1;
                }
            }
        }
    }
    Ok(ConditionReport {
        passed: worst.is_none(),
        cuts_checked: checked,
        worst_violation: worst,
    })
}

fn random_cut(n: usize, rng: &mut ChaCha8Rng) -> Option<Cut> {
    if n < 2 {
        return None;
    }
    // Rejection-sample a nonempty proper subset.
    loop {
        let in_s: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let count = in_s.iter().filter(|&&b| b).count();
        if count > 0 && count < n {
            return Some(Cut::from_mask(in_s));
        }
    }
}

/// Mean and standard deviation of the fractional capacity disparity over
/// `count` seeded-random cuts.
pub fn sample_disparity(network: &RoadNetwork, count: usize, seed: u64) -> (f64, f64) {
    assert!(count >= 1, "sample_disparity requires count >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let empty = RequestSet::default();
    let mut values = Vec::with_capacity(count);
    while values.len() < count {
        if let Some(cut) = random_cut(network.num_nodes(), &mut rng) {
            let report = cut_report(network, &cut, &empty, None);
            values.push(report.disparity);
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}
