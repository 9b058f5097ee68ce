//! The congestion-free routing and rebalancing problem (CRRP) and its
//! variants, solved as a multi-commodity flow linear program.
//!
//! Customer flows are one commodity per request; a single extra commodity
//! carries empty rebalancing vehicles. Capacities couple all commodities.
//! The relaxed variant adds per-edge slack on the capacity constraints so
//! a solution always exists; slack costs are chosen high enough that slack
//! is used only when structurally necessary.

use serde::Serialize;

use crate::lp::{LinearProgram, LpStatus, Relation, Tolerances, solve_lp};
use crate::netgraph::{
    self, Cut, CutEnumeration, CutViolation, EdgeIdx, NodeIdx, RequestSet, RoadNetwork,
};
use crate::routing::BprParams;

/// Per-commodity edge flows: one vector per request plus the rebalancing
/// flow, all indexed by edge.
#[derive(Debug, Clone, Serialize)]
pub struct FlowAssignment {
    pub customer_flows: Vec<Vec<f64>>,
    pub rebalancing_flow: Vec<f64>,
}

impl FlowAssignment {
    pub fn zeros(network: &RoadNetwork, requests: &RequestSet) -> Self {
        FlowAssignment {
            customer_flows: vec![vec![0.0; network.num_edges()]; requests.len()],
            rebalancing_flow: vec![0.0; network.num_edges()],
        }
    }

    /// Total flow per edge across all commodities.
    pub fn total_flow(&self, e: EdgeIdx) -> f64 {
        self.customer_flows.iter().map(|f| f[e]).sum::<f64>() + self.rebalancing_flow[e]
    }
}

#[derive(Debug, Clone)]
pub enum Variant {
    /// Customer and rebalancing flows optimized jointly (weight rho on the
    /// rebalancing term).
    Joint,
    /// Rebalancing variables omitted; customers only.
    CustomerOnly,
    /// Customer flows pinned to the supplied values; minimize rebalancing
    /// time alone.
    RebalanceFixedCustomers(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub struct CrrpConfig {
    pub rho: f64,
    pub relax_congestion: bool,
    /// Cost per unit of capacity slack. None picks a value that strictly
    /// dominates any attainable routing benefit.
    pub slack_cost: Option<f64>,
    pub variant: Variant,
}

impl Default for CrrpConfig {
    fn default() -> Self {
        Self {
            rho: 0.1,
            relax_congestion: false,
            slack_cost: None,
            variant: Variant::Joint,
        }
    }
}

/// Slack cost exceeding any attainable routing benefit:
/// `(sum of travel times) * (sum of request rates) + 1`.
pub fn default_slack_cost(network: &RoadNetwork, requests: &RequestSet) -> f64 {
    let time_sum: f64 = network.edges().iter().map(|e| e.free_flow_time).sum();
    time_sum * requests.total_rate() + 1.0
}

#[derive(Debug, Clone, Serialize)]
pub struct CrrpSolution {
    pub flows: FlowAssignment,
    /// Eq-1 value recomputed from the flows: customer time plus rho times
    /// rebalancing time. Slack penalties are excluded and reported apart.
    pub objective: f64,
    /// Per-edge capacity slack (all zeros when unrelaxed).
    pub slacks: Vec<f64>,
    /// Minimum fleet size implementing the flows.
    pub v_min: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum CrrpError {
    #[error("invalid network: {0:?}")]
    InvalidNetwork(Vec<String>),
    #[error("invalid requests: {0:?}")]
    InvalidRequests(Vec<String>),
    #[error("no congestion-free solution exists")]
    Infeasible { witness_cut: Option<CutViolation> },
    #[error("LP solve failed: {0:?}")]
    Numerical(LpStatus),
}

/// Variable layout of a built CRRP instance.
pub struct CrrpIndex {
    pub num_edges: usize,
    pub num_commodities: usize,
    /// Start of the rebalancing block, or None when omitted.
    pub rebalance_offset: Option<usize>,
    /// Start of the slack block, or None when unrelaxed.
    pub slack_offset: Option<usize>,
}

impl CrrpIndex {
    pub fn customer_var(&self, m: usize, e: EdgeIdx) -> usize {
        m * self.num_edges + e
    }
    pub fn rebalance_var(&self, e: EdgeIdx) -> Option<usize> {
        self.rebalance_offset.map(|o| o + e)
    }
    pub fn slack_var(&self, e: EdgeIdx) -> Option<usize> {
        self.slack_offset.map(|o| o + e)
    }
}

/// Shadow-node transform: a node that is both some request's origin and
/// some request's destination gets a companion node; destinations move to
/// the companion, connected both ways by zero-time edges whose capacity
/// (total demand + 1) can never bind.
pub struct ShadowTransform {
    pub network: RoadNetwork,
    pub requests: RequestSet,
    /// Transformed edge index -> original edge index (None for shadow
    /// edges).
    pub edge_back: Vec<Option<EdgeIdx>>,
    /// Transformed node -> original node.
    pub node_back: Vec<NodeIdx>,
}

pub fn needs_shadow_transform(requests: &RequestSet) -> bool {
    requests.requests.iter().any(|r| {
        requests
            .requests
            .iter()
            .any(|q| q.dest == r.origin)
    })
}

pub fn shadow_transform(network: &RoadNetwork, requests: &RequestSet) -> ShadowTransform {
    let big = requests.total_rate() + 1.0;
    let mut net = RoadNetwork::new();
    let mut node_back = Vec::new();
    for node in network.nodes() {
        net.add_node(&node.id, node.pos);
        node_back.push(node_back.len());
    }
    let mut edge_back: Vec<Option<EdgeIdx>> = Vec::new();
    for (e, edge) in network.edges().iter().enumerate() {
        net.add_edge(edge.from, edge.to, edge.capacity, edge.free_flow_time);
        edge_back.push(Some(e));
    }
    let mut shadow_of = std::collections::HashMap::new();
    let mut requests_out = requests.clone();
    for v in 0..network.num_nodes() {
        let is_origin = requests.requests.iter().any(|r| r.origin == v);
        let is_dest = requests.requests.iter().any(|r| r.dest == v);
        if is_origin && is_dest {
            let id = format!("{}@shadow", network.node(v).id);
            let s = net.add_node(&id, network.node(v).pos);
            node_back.push(v);
            net.add_edge(v, s, big, 0.0);
            edge_back.push(None);
            net.add_edge(s, v, big, 0.0);
            edge_back.push(None);
            shadow_of.insert(v, s);
        }
    }
    for r in requests_out.requests.iter_mut() {
        if let Some(&s) = shadow_of.get(&r.dest) {
            r.dest = s;
        }
    }
    ShadowTransform {
        network: net,
        requests: requests_out,
        edge_back,
        node_back,
    }
}

/// Builds the CRRP linear program for the given (already transformed, if
/// necessary) network and requests.
pub fn build_crrp(
    network: &RoadNetwork,
    requests: &RequestSet,
    config: &CrrpConfig,
) -> (LinearProgram, CrrpIndex) {
    let ne = network.num_edges();
    let nm = requests.len();
    let with_rebalance = !matches!(config.variant, Variant::CustomerOnly);
    let customer_vars_free = !matches!(config.variant, Variant::RebalanceFixedCustomers(_));

    let num_customer_vars = if customer_vars_free { nm * ne } else { 0 };
    let rebalance_offset = with_rebalance.then_some(num_customer_vars);
    let base = num_customer_vars + if with_rebalance { ne } else { 0 };
    let slack_offset = config.relax_congestion.then_some(base);
    let total_vars = base + if config.relax_congestion { ne } else { 0 };

    let index = CrrpIndex {
        num_edges: ne,
        num_commodities: nm,
        rebalance_offset,
        slack_offset,
    };

    let mut lp = LinearProgram::new(total_vars);

    // Objective: customer time + rho * rebalancing time + slack penalty.
    if customer_vars_free {
        for m in 0..nm {
            for e in 0..ne {
                lp.set_objective(index.customer_var(m, e), network.edge(e).free_flow_time);
            }
        }
    }
    if let Some(off) = rebalance_offset {
        let rho = match config.variant {
            Variant::RebalanceFixedCustomers(_) => 1.0,
            _ => config.rho,
        };
        for e in 0..ne {
            lp.set_objective(off + e, rho * network.edge(e).free_flow_time);
        }
    }
    if let Some(off) = slack_offset {
        let cost = config
            .slack_cost
            .unwrap_or_else(|| default_slack_cost(network, requests));
        for e in 0..ne {
            lp.set_objective(off + e, cost);
        }
    }

    let fixed_customers: Option<&Vec<Vec<f64>>> = match &config.variant {
        Variant::RebalanceFixedCustomers(f) => Some(f),
        _ => None,
    };

    // Customer conservation at every node, per commodity: outflow minus
    // inflow equals +rate at the origin, -rate at the destination, zero
    // elsewhere.
    if customer_vars_free {
        for (m, r) in requests.requests.iter().enumerate() {
            for v in 0..network.num_nodes() {
                let mut coeffs = Vec::new();
                for &e in network.out_edges(v) {
                    coeffs.push((index.customer_var(m, e), 1.0));
                }
                for &e in network.in_edges(v) {
                    coeffs.push((index.customer_var(m, e), -1.0));
                }
                let rhs = if v == r.origin {
                    r.rate
                } else if v == r.dest {
                    -r.rate
                } else {
                    0.0
                };
                lp.add_constraint(coeffs, Relation::Eq, rhs);
            }
        }
    }

    // Rebalancing balance at every node: rebalancing outflow minus inflow
    // equals arriving demand minus departing demand.
    if let Some(off) = rebalance_offset {
        for v in 0..network.num_nodes() {
            let mut coeffs = Vec::new();
            for &e in network.out_edges(v) {
                coeffs.push((off + e, 1.0));
            }
            for &e in network.in_edges(v) {
                coeffs.push((off + e, -1.0));
            }
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
            lp.add_constraint(coeffs, Relation::Eq, arriving - departing);
        }
    }

    // Capacity on every edge, over all commodities (minus slack when
    // relaxed).
    for e in 0..ne {
        let mut coeffs = Vec::new();
        let mut rhs = network.edge(e).capacity;
        if customer_vars_free {
            for m in 0..nm {
                coeffs.push((index.customer_var(m, e), 1.0));
            }
        } else if let Some(fixed) = fixed_customers {
            rhs -= fixed.iter().map(|f| f[e]).sum::<f64>();
        }
        if let Some(off) = rebalance_offset {
            coeffs.push((off + e, 1.0));
        }
        if let Some(off) = slack_offset {
            coeffs.push((off + e, -1.0));
        }
        lp.add_constraint(coeffs, Relation::Le, rhs);
    }

    (lp, index)
}

/// Solves the CRRP. The shadow-node transform is applied automatically when
/// some request origin also hosts a destination; reported flows are mapped
/// back onto the original network.
pub fn solve_crrp(
    network: &RoadNetwork,
    requests: &RequestSet,
    config: &CrrpConfig,
) -> Result<CrrpSolution, CrrpError> {
    let report = network.validate();
    if !report.is_valid() {
        return Err(CrrpError::InvalidNetwork(report.violations));
    }
    let report = requests.validate(network);
    if !report.is_valid() {
        return Err(CrrpError::InvalidRequests(report.violations));
    }

    let needs_rebalance_block = !matches!(config.variant, Variant::CustomerOnly);
    if needs_rebalance_block && needs_shadow_transform(requests) {
        let transform = shadow_transform(network, requests);
        let mut inner_config = config.clone();
        if let Variant::RebalanceFixedCustomers(fixed) = &config.variant {
            // Fixed customer flows must be lifted onto the transformed
            // network: route each request's arriving rate through the
            // shadow edge.
            let ne_t = transform.network.num_edges();
            let mut lifted: Vec<Vec<f64>> = fixed
                .iter()
                .map(|f| {
                    let mut out = vec![0.0; ne_t];
                    out[..f.len()].copy_from_slice(f);
                    out
                })
                .collect();
            for (m, r) in transform.requests.requests.iter().enumerate() {
                let orig_dest = transform.node_back[r.dest];
                if r.dest != orig_dest {
                    let e = transform
                        .network
                        .find_edge(orig_dest, r.dest)
                        .expect("shadow edge exists");
                    lifted[m][e] = requests.requests[m].rate;
                }
            }
            inner_config.variant = Variant::RebalanceFixedCustomers(lifted);
        }
        let solution = solve_on(&transform.network, &transform.requests, &inner_config)
            .map_err(|e| attach_witness(e, network, requests))?;
        Ok(map_back(network, requests, &transform, solution, config))
    } else {
        solve_on(network, requests, config).map_err(|e| attach_witness(e, network, requests))
    }
}

fn attach_witness(err: CrrpError, network: &RoadNetwork, requests: &RequestSet) -> CrrpError {
    match err {
        CrrpError::Infeasible { .. } => {
            let mode = if network.num_nodes() <= 16 {
                CutEnumeration::Exhaustive
            } else {
                CutEnumeration::Sampled {
                    count: 2000,
                    seed: 1,
                }
            };
            let witness = netgraph::check_cut_conditions(network, requests, mode)
                .ok()
                .and_then(|r| r.worst_violation);
            CrrpError::Infeasible {
                witness_cut: witness,
            }
        }
        other => other,
    }
}

fn solve_on(
    network: &RoadNetwork,
    requests: &RequestSet,
    config: &CrrpConfig,
) -> Result<CrrpSolution, CrrpError> {
    let (lp, index) = build_crrp(network, requests, config);
    let sol = solve_lp(&lp, Tolerances::default());
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(CrrpError::Infeasible { witness_cut: None }),
        other => return Err(CrrpError::Numerical(other)),
    }

    let ne = index.num_edges;
    let customer_flows: Vec<Vec<f64>> = match &config.variant {
        Variant::RebalanceFixedCustomers(fixed) => fixed.clone(),
        _ => (0..index.num_commodities)
            .map(|m| (0..ne).map(|e| sol.x[index.customer_var(m, e)]).collect())
            .collect(),
    };
    let rebalancing_flow: Vec<f64> = match index.rebalance_offset {
        Some(off) => (0..ne).map(|e| sol.x[off + e]).collect(),
        None => vec![0.0; ne],
    };
    let slacks: Vec<f64> = match index.slack_offset {
        Some(off) => (0..ne).map(|e| sol.x[off + e]).collect(),
        None => vec![0.0; ne],
    };
    let flows = FlowAssignment {
        customer_flows,
        rebalancing_flow,
    };
    Ok(finish_solution(network, flows, slacks, config))
}

fn finish_solution(
    network: &RoadNetwork,
    flows: FlowAssignment,
    slacks: Vec<f64>,
    config: &CrrpConfig,
) -> CrrpSolution {
    let customer_time: f64 = flows
        .customer_flows
        .iter()
        .map(|f| {
            f.iter()
                .zip(network.edges())
                .map(|(v, e)| v * e.free_flow_time)
                .sum::<f64>()
        })
        .sum();
    let rebalance_time: f64 = flows
        .rebalancing_flow
        .iter()
        .zip(network.edges())
        .map(|(v, e)| v * e.free_flow_time)
        .sum();
    let rho = match config.variant {
        Variant::RebalanceFixedCustomers(_) => 1.0,
        _ => config.rho,
    };
    let objective = customer_time + rho * rebalance_time;
    let v_min = (customer_time + rebalance_time).ceil().max(0.0) as u64;
    CrrpSolution {
        flows,
        objective,
        slacks,
        v_min,
    }
}

fn map_back(
    network: &RoadNetwork,
    requests: &RequestSet,
    transform: &ShadowTransform,
    solution: CrrpSolution,
    config: &CrrpConfig,
) -> CrrpSolution {
    let ne = network.num_edges();
    let mut customer_flows = vec![vec![0.0; ne]; requests.len()];
    let mut rebalancing_flow = vec![0.0; ne];
    let mut slacks = vec![0.0; ne];
    for (et, back) in transform.edge_back.iter().enumerate() {
        if let Some(e) = back {
            for m in 0..requests.len() {
                customer_flows[m][*e] = solution.flows.customer_flows[m][et];
            }
            rebalancing_flow[*e] = solution.flows.rebalancing_flow[et];
            slacks[*e] = solution.slacks[et];
        }
    }
    let flows = FlowAssignment {
        customer_flows,
        rebalancing_flow,
    };
    finish_solution(network, flows, slacks, config)
}

// ---------------------------------------------------------------------------
// Flow verification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintFamily {
    pub name: String,
    pub max_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CutIdentity {
    pub s_side: Vec<NodeIdx>,
    pub net_outflow: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub families: Vec<ConstraintFamily>,
    pub cut_identities: Vec<CutIdentity>,
}

impl FeasibilityReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.families.iter().all(|f| f.max_violation <= tolerance)
    }

    pub fn family(&self, name: &str) -> Option<&ConstraintFamily> {
        self.families.iter().find(|f| f.name == name)
    }
}

/// Itemized feasibility check of the customer conservation, rebalancing
/// balance, capacity, and nonnegativity constraint families. Optionally
/// evaluates the net-flow cut identity for each supplied cut.
pub fn verify_flows(
    network: &RoadNetwork,
    requests: &RequestSet,
    flows: &FlowAssignment,
    cuts: &[Cut],
) -> FeasibilityReport {
    let ne = network.num_edges();
    let mut origin_violation = 0.0f64;
    let mut dest_violation = 0.0f64;
    let mut interior_violation = 0.0f64;
    for (m, r) in requests.requests.iter().enumerate() {
        let f = &flows.customer_flows[m];
        for v in 0..network.num_nodes() {
            let outflow: f64 = network.out_edges(v).iter().map(|&e| f[e]).sum();
            let inflow: f64 = network.in_edges(v).iter().map(|&e| f[e]).sum();
            let imbalance = outflow - inflow;
            if v == r.origin {
                origin_violation = origin_violation.max((imbalance - r.rate).abs());
            } else if v == r.dest {
                dest_violation = dest_violation.max((imbalance + r.rate).abs());
            } else {
                interior_violation = interior_violation.max(imbalance.abs());
            }
        }
    }

    let mut rebalance_violation = 0.0f64;
    for v in 0..network.num_nodes() {
        let outflow: f64 = network
            .out_edges(v)
            .iter()
            .map(|&e| flows.rebalancing_flow[e])
            .sum();
        let inflow: f64 = network
            .in_edges(v)
            .iter()
            .map(|&e| flows.rebalancing_flow[e])
            .sum();
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
        rebalance_violation = rebalance_violation.max((inflow + arriving - outflow - departing).abs());
    }

    let mut capacity_violation = 0.0f64;
    let mut negativity = 0.0f64;
    for e in 0..ne {
        let total = flows.total_flow(e);
        capacity_violation = capacity_violation.max(total - network.edge(e).capacity);
        for f in &flows.customer_flows {
            negativity = negativity.max(-f[e]);
        }
        negativity = negativity.max(-flows.rebalancing_flow[e]);
    }

    let cut_identities = cuts
        .iter()
        .map(|cut| {
            let report = netgraph::cut_report(network, cut, requests, Some(flows));
            let expected: f64 = requests
                .requests
                .iter()
                .map(|r| {
                    let mut v = 0.0;
                    if cut.contains(r.origin) {
                        v += r.rate;
                    }
                    if cut.contains(r.dest) {
                        v -= r.rate;
                    }
                    v
                })
                .sum();
            CutIdentity {
                s_side: cut.s_side(),
                net_outflow: report.f_out.unwrap() - report.f_in.unwrap(),
                expected,
            }
        })
        .collect();

    FeasibilityReport {
        families: vec![
            ConstraintFamily {
                name: "origin_conservation".into(),
                max_violation: origin_violation,
            },
            ConstraintFamily {
                name: "dest_conservation".into(),
                max_violation: dest_violation,
            },
            ConstraintFamily {
                name: "interior_conservation".into(),
                max_violation: interior_violation,
            },
            ConstraintFamily {
                name: "rebalance_balance".into(),
                max_violation: rebalance_violation,
            },
            ConstraintFamily {
                name: "capacity".into(),
                max_violation: capacity_violation.max(0.0),
            },
            ConstraintFamily {
                name: "nonnegativity".into(),
                max_violation: negativity.max(0.0),
            },
        ],
        cut_identities,
    }
}

// ---------------------------------------------------------------------------
// Asymmetry sweep
// ---------------------------------------------------------------------------

/// Selects the edges to derate in an asymmetry sweep.
#[derive(Debug, Clone)]
pub enum EdgeFilter {
    All,
    /// Edges whose displacement bearing (degrees counterclockwise from +x)
    /// lies within `half_width` of `center`. Requires node coordinates.
    Bearing { center_deg: f64, half_width_deg: f64 },
    Explicit(Vec<EdgeIdx>),
}

impl EdgeFilter {
    pub fn selects(&self, network: &RoadNetwork, e: EdgeIdx) -> bool {
        match self {
            EdgeFilter::All => true,
            EdgeFilter::Explicit(list) => list.contains(&e),
            EdgeFilter::Bearing {
                center_deg,
                half_width_deg,
            } => {
                let edge = network.edge(e);
                let (Some(from), Some(to)) =
                    (network.node(edge.from).pos, network.node(edge.to).pos)
                else {
                    return false;
                };
                let bearing = (to.1 - from.1).atan2(to.0 - from.0).to_degrees();
                let mut diff = (bearing - center_deg) % 360.0;
                if diff > 180.0 {
                    diff -= 360.0;
                }
                if diff < -180.0 {
                    diff += 360.0;
                }
                diff.abs() <= *half_width_deg
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub reduction: f64,
    pub mean_time_with_rebalancing: f64,
    pub mean_time_without_rebalancing: f64,
    pub slack_with_rebalancing: f64,
    pub slack_without_rebalancing: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

/// Derates the selected edges by each reduction level and compares realized
/// mean customer travel times (BPR-delayed, evaluated on total flow) with
/// and without rebalancing. Both solves are capacity-relaxed so congested
/// regimes still produce flows.
pub fn asymmetry_sweep(
    network: &RoadNetwork,
    requests: &RequestSet,
    reductions: &[f64],
    filter: &EdgeFilter,
    rho: f64,
) -> Result<SweepReport, CrrpError> {
    let bpr = BprParams::default();
    let mut rows = Vec::new();
    for &reduction in reductions {
        let mut derated = RoadNetwork::new();
        for node in network.nodes() {
            derated.add_node(&node.id, node.pos);
        }
        for (e, edge) in network.edges().iter().enumerate() {
            let factor = if filter.selects(network, e) {
                1.0 - reduction
            } else {
                1.0
            };
            // Keep a sliver of capacity so the LP stays well-posed even at
            // 100% reduction; slack absorbs the rest.
            let cap = (edge.capacity * factor).max(edge.capacity * 1e-6);
            derated.add_edge(edge.from, edge.to, cap, edge.free_flow_time);
        }

        let with = solve_crrp(
            &derated,
            requests,
            &CrrpConfig {
                rho,
                relax_congestion: true,
                slack_cost: None,
                variant: Variant::Joint,
            },
        )?;
        let without = solve_crrp(
            &derated,
            requests,
            &CrrpConfig {
                rho,
                relax_congestion: true,
                slack_cost: None,
                variant: Variant::CustomerOnly,
            },
        )?;

        rows.push(SweepRow {
            reduction,
            mean_time_with_rebalancing: realized_mean_time(&derated, requests, &with, &bpr),
            mean_time_without_rebalancing: realized_mean_time(&derated, requests, &without, &bpr),
            slack_with_rebalancing: with.slacks.iter().sum(),
            slack_without_rebalancing: without.slacks.iter().sum(),
        });
    }
    Ok(SweepReport { rows })
}

/// Mean realized customer travel time: BPR delay applied to total flow,
/// weighted by the customer flow on each edge, per unit of demand.
pub fn realized_mean_time(
    network: &RoadNetwork,
    requests: &RequestSet,
    solution: &CrrpSolution,
    bpr: &BprParams,
) -> f64 {
    let total_rate = requests.total_rate();
    if total_rate <= 0.0 {
        return 0.0;
    }
    let mut weighted = 0.0;
    for (e, edge) in network.edges().iter().enumerate() {
        let total = solution.flows.total_flow(e);
        let delay = crate::routing::bpr_delay(edge.free_flow_time, total, edge.capacity, bpr)
            .unwrap_or(edge.free_flow_time);
        let customer: f64 = solution.flows.customer_flows.iter().map(|f| f[e]).sum();
        weighted += delay * customer;
    }
    weighted / total_rate
}

/// Scales all capacities so the customer-only solution's maximum edge
/// utilization hits `target` (a reconstruction of the congestion-threshold
/// calibration; the source procedure is not fully specified).
pub fn calibrate_capacities(
    network: &RoadNetwork,
    requests: &RequestSet,
    target_utilization: f64,
) -> Result<RoadNetwork, CrrpError> {
    let solution = solve_crrp(
        network,
        requests,
        &CrrpConfig {
            rho: 0.0,
            relax_congestion: true,
            slack_cost: None,
            variant: Variant::CustomerOnly,
        },
    )?;
    let max_util = network
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| solution.flows.total_flow(e) / edge.capacity)
        .fold(0.0f64, f64::max);
    let scale = if max_util > 0.0 {
        max_util / target_utilization
    } else {
        1.0
    };
    let mut out = RoadNetwork::new();
    for node in network.nodes() {
        out.add_node(&node.id, node.pos);
    }
    for edge in network.edges() {
        out.add_edge(edge.from, edge.to, edge.capacity * scale, edge.free_flow_time);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::Request;
    use approx::assert_relative_eq;

    pub(crate) fn two_node_net(cap: f64) -> RoadNetwork {
        let mut net = RoadNetwork::new();
        let a = net.add_node("a", None);
        let b = net.add_node("b", None);
        net.add_edge(a, b, cap, 1.0);
        net.add_edge(b, a, cap, 1.0);
        net
    }

    fn one_request(rate: f64) -> RequestSet {
        RequestSet::new(vec![Request {
            origin: 0,
            dest: 1,
            rate,
        }])
    }

    #[test]
    fn variable_counts() {
        let net = two_node_net(2.0);
        let reqs = one_request(1.0);
        let (lp, _) = build_crrp(&net, &reqs, &CrrpConfig::default());
        assert_eq!(lp.num_vars(), 4); // 2 edges x (1 request + rebalance)

        let (lp, _) = build_crrp(
            &net,
            &reqs,
            &CrrpConfig {
                relax_congestion: true,
                ..CrrpConfig::default()
            },
        );
        assert_eq!(lp.num_vars(), 6); // + one slack per edge

        let (lp, _) = build_crrp(
            &net,
            &reqs,
            &CrrpConfig {
                variant: Variant::CustomerOnly,
                ..CrrpConfig::default()
            },
        );
        assert_eq!(lp.num_vars(), 2); // rebalancing variables omitted
    }

    #[test]
    fn two_node_joint_solution() {
        let net = two_node_net(2.0);
        let reqs = one_request(1.0);
        let sol = solve_crrp(&net, &reqs, &CrrpConfig::default()).unwrap();
        assert_relative_eq!(sol.flows.customer_flows[0][0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(sol.flows.rebalancing_flow[1], 1.0, epsilon = 1e-8);
        assert_relative_eq!(sol.objective, 1.1, epsilon = 1e-8);
        assert_eq!(sol.v_min, 2);
    }

    #[test]
    fn two_node_infeasible_with_witness() {
        let net = two_node_net(2.0);
        let reqs = one_request(3.0);
        let err = solve_crrp(&net, &reqs, &CrrpConfig::default()).unwrap_err();
        match err {
            CrrpError::Infeasible { witness_cut } => {
                let cut = witness_cut.expect("witness cut reported");
                assert_eq!(cut.s_side, vec![0]);
                assert!(cut.excess > 0.9);
            }
            other => panic!("unexpected error {:?}", other),
        }
    }

    #[test]
    fn verify_solved_flows() {
        let net = two_node_net(2.0);
        let reqs = one_request(1.0);
        let sol = solve_crrp(&net, &reqs, &CrrpConfig::default()).unwrap();
        let cut = Cut::new(&net, [0]).unwrap();
        let report = verify_flows(&net, &reqs, &sol.flows, &[cut]);
        assert!(report.passed(1e-8));
        let identity = &report.cut_identities[0];
        assert_relative_eq!(identity.net_outflow, identity.expected, epsilon = 1e-8);
    }

    #[test]
    fn verify_zero_flows_with_demand() {
        let net = two_node_net(2.0);
        let reqs = one_request(1.0);
        let flows = FlowAssignment::zeros(&net, &reqs);
        let report = verify_flows(&net, &reqs, &flows, &[]);
        assert_relative_eq!(
            report.family("origin_conservation").unwrap().max_violation,
            1.0
        );
        // Rebalancing balance is also violated by the unmatched demand.
        assert_relative_eq!(
            report.family("rebalance_balance").unwrap().max_violation,
            1.0
        );
    }

    #[test]
    fn verify_capacity_violation() {
        let net = two_node_net(2.0);
        let reqs = one_request(1.0);
        let mut flows = FlowAssignment::zeros(&net, &reqs);
        flows.customer_flows[0][0] = 2.5; // over capacity by 0.5
        let report = verify_flows(&net, &reqs, &flows, &[]);
        assert_relative_eq!(report.family("capacity").unwrap().max_violation, 0.5);
    }

    #[test]
    fn relaxed_always_feasible() {
        let net = two_node_net(2.0);
        let reqs = one_request(3.0);
        let sol = solve_crrp(
            &net,
            &reqs,
            &CrrpConfig {
                relax_congestion: true,
                ..CrrpConfig::default()
            },
        )
        .unwrap();
        let total_slack: f64 = sol.slacks.iter().sum();
        assert!(total_slack > 0.5, "slack must absorb the excess demand");
    }

    #[test]
    fn shadow_transform_applied() {
        // b is both a destination (a->b) and an origin (b->c): the joint
        // problem still solves and flows map back onto the original edges.
        let mut net = RoadNetwork::new();
        let a = net.add_node("a", None);
        let b = net.add_node("b", None);
        let c = net.add_node("c", None);
        for (u, v) in [(a, b), (b, a), (b, c), (c, b), (a, c), (c, a)] {
            net.add_edge(u, v, 4.0, 1.0);
        }
        let reqs = RequestSet::new(vec![
            Request {
                origin: a,
                dest: b,
                rate: 1.0,
            },
            Request {
                origin: b,
                dest: c,
                rate: 1.0,
            },
        ]);
        assert!(needs_shadow_transform(&reqs));
        let sol = solve_crrp(&net, &reqs, &CrrpConfig::default()).unwrap();
        assert_eq!(sol.flows.rebalancing_flow.len(), net.num_edges());
        let report = verify_flows(&net, &reqs, &sol.flows, &[]);
        assert!(report.passed(1e-7), "families: {:?}", report.families);
    }

    #[test]
    fn empty_sweep() {
        let net = two_node_net(2.0);
        let reqs = one_request(1.0);
        let report = asymmetry_sweep(&net, &reqs, &[], &EdgeFilter::All, 0.1).unwrap();
        assert!(report.rows.is_empty());
    }

    #[test]
    fn full_reduction_still_returns_with_slack() {
        let net = two_node_net(2.0);
        let reqs = one_request(1.0);
        let report = asymmetry_sweep(
            &net,
            &reqs,
            &[1.0],
            &EdgeFilter::Explicit(vec![0]),
            0.1,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.rows[0].slack_with_rebalancing > 0.5);
    }

    #[test]
    fn calibration_hits_target_utilization() {
        let net = crate::netgraph::tests::grid(4, 10.0);
        let reqs = RequestSet::new(vec![
            Request {
                origin: 0,
                dest: 15,
                rate: 2.0,
            },
            Request {
                origin: 12,
                dest: 3,
                rate: 1.0,
            },
        ]);
        let calibrated = calibrate_capacities(&net, &reqs, 0.95).unwrap();
        let sol = solve_crrp(
            &calibrated,
            &reqs,
            &CrrpConfig {
                rho: 0.0,
                relax_congestion: true,
                slack_cost: None,
                variant: Variant::CustomerOnly,
            },
        )
        .unwrap();
        let max_util = calibrated
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| sol.flows.total_flow(e) / edge.capacity)
            .fold(0.0f64, f64::max);
        // Re-solving after scaling can reroute, so allow slop around the
        // target.
        assert!(max_util <= 1.0 + 1e-6, "max utilization {}", max_util);
        assert!(max_util >= 0.5, "max utilization {}", max_util);
    }
}
