//! Discrete-time fleet simulator: event-based customer assignment and
//! routing, periodic batch rebalancing, and BPR-governed link speeds.
//!
//! The loop advances in fixed steps. Each step ingests trip arrivals,
//! matches waiting customers to idle vehicles within their region, runs the
//! rebalancer on its period, and moves vehicles at per-edge speeds derived
//! from the step-start vehicle counts.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::lp::{LinearProgram, LpStatus, Relation, Tolerances, solve_lp};
use crate::netgraph::{NodeIdx, RoadNetwork};
use crate::rebalance::{
    self, RebalanceInstance, RegionState, RegionStateInput, compute_region_state,
};
use crate::routing::{self, BprParams, EdgeLoad};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rebalancer {
    CongestionAware,
    BaselineP2p,
    None,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Simulation step in seconds.
    pub time_step: f64,
    /// Rebalancing period t_hor in seconds; must be a multiple of the step.
    pub rebalance_period: f64,
    /// Horizon within which inbound vehicles count toward a region's
    /// ownership; defaults to the rebalancing period.
    pub t_vicinity: Option<f64>,
    pub fleet_size: usize,
    /// Free-flow speed in m/s, used when edge times derive from lengths.
    pub free_flow_speed: f64,
    pub bpr: BprParams,
    pub rebalancer: Rebalancer,
    pub seed: u64,
    /// Total simulated time in seconds.
    pub duration: f64,
    pub num_regions: usize,
    /// Uniform derating factor on all edge capacities (models exogenous
    /// traffic).
    pub capacity_multiplier: f64,
    /// Fixed starting nodes for the fleet; seeded-random placement when
    /// absent.
    pub initial_positions: Option<Vec<NodeIdx>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            time_step: 6.0,
            rebalance_period: 120.0,
            t_vicinity: None,
            fleet_size: 10,
            free_flow_speed: 11.0,
            bpr: BprParams::default(),
            rebalancer: Rebalancer::CongestionAware,
            seed: 0,
            duration: 3600.0,
            num_regions: 4,
            capacity_multiplier: 1.0,
            initial_positions: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Trip {
    pub arrival_time: f64,
    pub origin: NodeIdx,
    pub dest: NodeIdx,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("trip {index} is malformed: {reason}")]
    BadTrip { index: usize, reason: String },
    #[error("rebalancing solve failed: {0}")]
    Rebalance(#[from] rebalance::RebalanceError),
    #[error("routing failed: {0}")]
    Routing(#[from] routing::RoutingError),
    #[error("LP solve failed: {0:?}")]
    Numerical(LpStatus),
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SimMetrics {
    pub trips_completed: u64,
    /// Mean wait (request to pickup) over all picked-up trips, seconds.
    pub mean_wait: f64,
    /// Mean in-vehicle time over completed trips, seconds.
    pub mean_travel: f64,
    /// Mean wait + travel over completed trips, seconds.
    pub mean_service: f64,
    pub pct_wait_over_5min: f64,
    /// Time-average number of vehicles in the rebalancing state.
    pub mean_rebalancing_vehicles: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TraceRow {
    pub clock: f64,
    pub waiting: usize,
    pub in_progress: usize,
    pub congested_edges: usize,
    pub rebalancing_vehicles: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunOutput {
    pub metrics: SimMetrics,
    pub trace: Vec<TraceRow>,
}

// ---------------------------------------------------------------------------
// Regions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Regions {
    /// Region index per node.
    pub assignment: Vec<usize>,
    /// Node nearest each region centroid.
    pub anchors: Vec<NodeIdx>,
}

impl Regions {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Partitions nodes into `k` regions by seeded k-means over coordinates;
/// nodes without coordinates fall back to contiguous index blocks. The
/// anchor is the member node nearest the centroid (lowest id on ties).
pub fn compute_regions(network: &RoadNetwork, k: usize, seed: u64) -> Regions {
    let n = network.num_nodes();
    let k = k.clamp(1, n.max(1));
    let coords: Option<Vec<(f64, f64)>> = network.nodes().iter().map(|nd| nd.pos).collect();
    let Some(coords) = coords else {
        // Index-block fallback keeps the partition deterministic even on
        // coordinate-free graphs.
        let assignment: Vec<usize> = (0..n).map(|v| v * k / n).collect();
        let anchors = (0..k)
            .map(|r| assignment.iter().position(|&a| a == r).unwrap_or(0))
            .collect();
        return Regions { assignment, anchors };
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let mut centroids: Vec<(f64, f64)> = indices[..k].iter().map(|&v| coords[v]).collect();
    let mut assignment = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for v in 0..n {
            let best = (0..k)
                .min_by(|&a, &b| {
                    dist2(coords[v], centroids[a])
                        .partial_cmp(&dist2(coords[v], centroids[b]))
                        .unwrap()
                        .then(a.cmp(&b))
                })
                .unwrap();
            if assignment[v] != best {
                assignment[v] = best;
                changed = true;
            }
        }
        for r in 0..k {
            let members: Vec<usize> = (0..n).filter(|&v| assignment[v] == r).collect();
            if !members.is_empty() {
                let sx: f64 = members.iter().map(|&v| coords[v].0).sum();
                let sy: f64 = members.iter().map(|&v| coords[v].1).sum();
                centroids[r] = (sx / members.len() as f64, sy / members.len() as f64);
            }
        }
        if !changed {
            break;
        }
    }
    let anchors = (0..k)
        .map(|r| {
            (0..n)
                .filter(|&v| assignment[v] == r)
                .min_by(|&a, &b| {
                    dist2(coords[a], centroids[r])
                        .partial_cmp(&dist2(coords[b], centroids[r]))
                        .unwrap()
                        .then(a.cmp(&b))
                })
                // An empty region anchors at its centroid's nearest node.
                .unwrap_or_else(|| {
                    (0..n)
                        .min_by(|&a, &b| {
                            dist2(coords[a], centroids[r])
                                .partial_cmp(&dist2(coords[b], centroids[r]))
                                .unwrap()
                        })
                        .unwrap()
                })
        })
        .collect();
    Regions { assignment, anchors }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

// ---------------------------------------------------------------------------
// Core state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VehicleStatus {
    Idle,
    ToPickup,
    WithCustomer,
    Rebalancing,
}

#[derive(Debug, Clone)]
struct Vehicle {
    /// Last node reached; current position when the route is empty.
    node: NodeIdx,
    /// Remaining edges, front first.
    route: std::collections::VecDeque<usize>,
    /// Fraction of the current edge already traversed.
    progress: f64,
    status: VehicleStatus,
    customer: Option<usize>,
}

#[derive(Debug, Clone)]
struct Customer {
    origin: NodeIdx,
    dest: NodeIdx,
    arrival_time: f64,
    pickup_time: Option<f64>,
    dropoff_time: Option<f64>,
    assigned: bool,
}

/// Runs one simulation to completion. Deterministic for a given
/// (network, trips, config) triple.
pub fn run(network: &RoadNetwork, trips: &[Trip], config: &SimConfig) -> Result<RunOutput, SimError> {
    validate_config(network, trips, config)?;

    // Apply the exogenous-traffic derating up front.
    let mut net = RoadNetwork::new();
    for node in network.nodes() {
        net.add_node(&node.id, node.pos);
    }
    for edge in network.edges() {
        net.add_edge(
            edge.from,
            edge.to,
            edge.capacity * config.capacity_multiplier,
            edge.free_flow_time,
        );
    }
    let network = &net;

    let regions = compute_regions(network, config.num_regions, config.seed);
    let t_vicinity = config.t_vicinity.unwrap_or(config.rebalance_period);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut vehicles: Vec<Vehicle> = match &config.initial_positions {
        Some(positions) => positions
            .iter()
            .map(|&v| Vehicle {
                node: v,
                route: Default::default(),
                progress: 0.0,
                status: VehicleStatus::Idle,
                customer: None,
            })
            .collect(),
        None => (0..config.fleet_size)
            .map(|_| Vehicle {
                node: rand::Rng::gen_range(&mut rng, 0..network.num_nodes()),
                route: Default::default(),
                progress: 0.0,
                status: VehicleStatus::Idle,
                customer: None,
            })
            .collect(),
    };
    let fleet_size = vehicles.len();

    let mut customers: Vec<Customer> = Vec::new();
    let mut waiting: std::collections::VecDeque<usize> = Default::default();
    let mut next_trip = 0usize;
    let mut trace = Vec::new();
    let mut rebalancing_sum = 0.0f64;
    let mut steps = 0u64;

    let num_steps = (config.duration / config.time_step).round() as u64;
    let rebalance_every = (config.rebalance_period / config.time_step).round() as u64;

    for step in 0..num_steps {
        let clock = step as f64 * config.time_step;

        // 1. Ingest arrivals falling inside this step.
        while next_trip < trips.len() && trips[next_trip].arrival_time < clock + config.time_step {
            let t = &trips[next_trip];
            customers.push(Customer {
                origin: t.origin,
                dest: t.dest,
                arrival_time: t.arrival_time,
                pickup_time: None,
                dropoff_time: None,
                assigned: false,
            });
            waiting.push_back(customers.len() - 1);
            next_trip += 1;
        }

        // Step-start load snapshot used for speeds, routing, and residual
        // capacities throughout the step.
        let loads = edge_loads(network, &vehicles);
        let delays: Vec<f64> = network
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| {
                routing::bpr_delay(edge.free_flow_time, loads.0[e], edge.capacity, &config.bpr)
                    .unwrap_or(edge.free_flow_time)
            })
            .collect();

        // 2. FIFO assignment of waiting customers to the nearest idle
        // vehicle in the customer's region.
        let mut still_waiting = std::collections::VecDeque::new();
        while let Some(ci) = waiting.pop_front() {
            let origin = customers[ci].origin;
            let region = regions.assignment[origin];
            let times_to_origin = routing::free_flow_times_to(network, origin);
            let pick = vehicles
                .iter()
                .enumerate()
                .filter(|(_, v)| {
                    v.status == VehicleStatus::Idle
                        && v.route.is_empty()
                        && regions.assignment[v.node] == region
                        && times_to_origin[v.node].is_finite()
                })
                .min_by(|(ai, a), (bi, b)| {
                    times_to_origin[a.node]
                        .partial_cmp(&times_to_origin[b.node])
                        .unwrap()
                        .then(ai.cmp(bi))
                })
                .map(|(i, _)| i);
            match pick {
                Some(vi) => {
                    customers[ci].assigned = true;
                    let v = &mut vehicles[vi];
                    v.customer = Some(ci);
                    if v.node == origin {
                        customers[ci].pickup_time = Some(customers[ci].arrival_time.max(clock));
                        v.status = VehicleStatus::WithCustomer;
                        let (path, _) = routing::astar_route(
                            network,
                            &loads,
                            &config.bpr,
                            origin,
                            customers[ci].dest,
                        )?;
                        v.route = path_edges(network, &path).into();
                        v.progress = 0.0;
                    } else {
                        v.status = VehicleStatus::ToPickup;
                        let (path, _) =
                            routing::astar_route(network, &loads, &config.bpr, v.node, origin)?;
                        v.route = path_edges(network, &path).into();
                        v.progress = 0.0;
                    }
                }
                None => still_waiting.push_back(ci),
            }
        }
        waiting = still_waiting;

        // 3. Periodic rebalancing.
        if config.rebalancer != Rebalancer::None
            && rebalance_every > 0
            && step > 0
            && step % rebalance_every == 0
        {
            let state = region_snapshot(
                network, &regions, &vehicles, &customers, &waiting, t_vicinity,
            );
            match config.rebalancer {
                Rebalancer::CongestionAware => {
                    dispatch_congestion_aware(
                        network, &regions, &state, &mut vehicles, &loads, &delays, config,
                    )?;
                }
                Rebalancer::BaselineP2p => {
                    let moves = baseline_p2p_rebalance(&state, &regions, network)?;
                    dispatch_moves(network, &regions, &moves, &mut vehicles, &loads, config)?;
                }
                Rebalancer::None => {}
            }
        }

        // 4. Movement at BPR speeds; pickups chain into the dropoff leg
        // within the same step.
        for vi in 0..vehicles.len() {
            let mut budget = config.time_step;
            loop {
                if vehicles[vi].route.is_empty() {
                    break;
                }
                let e = *vehicles[vi].route.front().unwrap();
                let remaining = (1.0 - vehicles[vi].progress) * delays[e];
                if remaining > budget {
                    vehicles[vi].progress += budget / delays[e];
                    break;
                }
                budget -= remaining;
                vehicles[vi].node = network.edge(e).to;
                vehicles[vi].route.pop_front();
                vehicles[vi].progress = 0.0;
                if !vehicles[vi].route.is_empty() {
                    continue;
                }
                let now = clock + (config.time_step - budget);
                match vehicles[vi].status {
                    VehicleStatus::ToPickup => {
                        let ci = vehicles[vi].customer.unwrap();
                        customers[ci].pickup_time = Some(now);
                        vehicles[vi].status = VehicleStatus::WithCustomer;
                        let (path, _) = routing::astar_route(
                            network,
                            &loads,
                            &config.bpr,
                            vehicles[vi].node,
                            customers[ci].dest,
                        )?;
                        vehicles[vi].route = path_edges(network, &path).into();
                    }
                    VehicleStatus::WithCustomer => {
                        let ci = vehicles[vi].customer.take().unwrap();
                        customers[ci].dropoff_time = Some(now);
                        vehicles[vi].status = VehicleStatus::Idle;
                    }
                    VehicleStatus::Rebalancing => {
                        vehicles[vi].status = VehicleStatus::Idle;
                    }
                    VehicleStatus::Idle => {}
                }
            }
        }

        // Bookkeeping and conservation checks.
        let rebalancing = vehicles
            .iter()
            .filter(|v| v.status == VehicleStatus::Rebalancing)
            .count();
        rebalancing_sum += rebalancing as f64;
        steps += 1;
        let in_progress = customers
            .iter()
            .filter(|c| c.assigned && c.dropoff_time.is_none())
            .count();
        let completed = customers.iter().filter(|c| c.dropoff_time.is_some()).count();
        debug_assert_eq!(vehicles.len(), fleet_size);
        debug_assert_eq!(customers.len(), completed + in_progress + waiting.len());
        let end_loads = edge_loads(network, &vehicles);
        let congested = network
            .edges()
            .iter()
            .enumerate()
            .filter(|(e, edge)| end_loads.0[*e] > edge.capacity)
            .count();
        trace.push(TraceRow {
            clock: clock + config.time_step,
            waiting: waiting.len(),
            in_progress,
            congested_edges: congested,
            rebalancing_vehicles: rebalancing,
        });
    }

    Ok(RunOutput {
        metrics: metrics_from(&customers, rebalancing_sum, steps),
        trace,
    })
}

fn validate_config(
    network: &RoadNetwork,
    trips: &[Trip],
    config: &SimConfig,
) -> Result<(), SimError> {
    if config.time_step <= 0.0 {
        return Err(SimError::InvalidConfig("time_step must be positive".into()));
    }
    let ratio = config.rebalance_period / config.time_step;
    if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
        return Err(SimError::InvalidConfig(
            "rebalance_period must be a positive multiple of time_step".into(),
        ));
    }
    if config.duration <= 0.0 {
        return Err(SimError::InvalidConfig("duration must be positive".into()));
    }
    if network.num_nodes() == 0 {
        return Err(SimError::InvalidConfig("empty network".into()));
    }
    if let Some(p) = &config.initial_positions {
        if p.iter().any(|&v| v >= network.num_nodes()) {
            return Err(SimError::InvalidConfig(
                "initial position out of range".into(),
            ));
        }
    }
    let mut last = f64::NEG_INFINITY;
    for (i, t) in trips.iter().enumerate() {
        if t.arrival_time < last {
            return Err(SimError::BadTrip {
                index: i,
                reason: "arrival times must be nondecreasing".into(),
            });
        }
        last = t.arrival_time;
        if t.origin >= network.num_nodes() || t.dest >= network.num_nodes() {
            return Err(SimError::BadTrip {
                index: i,
                reason: "node out of range".into(),
            });
        }
    }
    Ok(())
}

/// Vehicle counts converted to flows (count divided by free-flow time), the
/// load unit the BPR capacities are expressed in.
fn edge_loads(network: &RoadNetwork, vehicles: &[Vehicle]) -> EdgeLoad {
    let mut counts = vec![0.0f64; network.num_edges()];
    for v in vehicles {
        if let Some(&e) = v.route.front() {
            counts[e] += 1.0;
        }
    }
    let flows = counts
        .iter()
        .enumerate()
        .map(|(e, &c)| c / network.edge(e).free_flow_time.max(1e-9))
        .collect();
    EdgeLoad(flows)
}

fn path_edges(network: &RoadNetwork, path: &[NodeIdx]) -> Vec<usize> {
    path.windows(2)
        .map(|w| network.find_edge(w[0], w[1]).expect("route follows edges"))
        .collect()
}

fn metrics_from(customers: &[Customer], rebalancing_sum: f64, steps: u64) -> SimMetrics {
    let picked: Vec<f64> = customers
        .iter()
        .filter_map(|c| c.pickup_time.map(|p| p - c.arrival_time))
        .collect();
    let completed: Vec<(f64, f64)> = customers
        .iter()
        .filter_map(|c| {
            c.dropoff_time
                .map(|d| (c.pickup_time.unwrap() - c.arrival_time, d - c.pickup_time.unwrap()))
        })
        .collect();
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let travels: Vec<f64> = completed.iter().map(|&(_, t)| t).collect();
    let services: Vec<f64> = completed.iter().map(|&(w, t)| w + t).collect();
    SimMetrics {
        trips_completed: completed.len() as u64,
        mean_wait: mean(&picked),
        mean_travel: mean(&travels),
        mean_service: mean(&services),
        pct_wait_over_5min: if picked.is_empty() {
            0.0
        } else {
            100.0 * picked.iter().filter(|&&w| w > 300.0).count() as f64 / picked.len() as f64
        },
        mean_rebalancing_vehicles: if steps == 0 {
            0.0
        } else {
            rebalancing_sum / steps as f64
        },
    }
}

// ---------------------------------------------------------------------------
// Region snapshot and rebalancing dispatch
// ---------------------------------------------------------------------------

fn region_snapshot(
    network: &RoadNetwork,
    regions: &Regions,
    vehicles: &[Vehicle],
    customers: &[Customer],
    waiting: &std::collections::VecDeque<usize>,
    t_vicinity: f64,
) -> RegionState {
    let k = regions.len();
    let mut vehicles_in_region = vec![0u64; k];
    let mut inbound = vec![0u64; k];
    for v in vehicles {
        if v.status == VehicleStatus::Idle && v.route.is_empty() {
            vehicles_in_region[regions.assignment[v.node]] += 1;
        } else if !v.route.is_empty() {
            // Remaining free-flow time along the route, measuring only the
            // untraversed part of the current edge.
            let mut t = 0.0;
            for (i, &e) in v.route.iter().enumerate() {
                let full = network.edge(e).free_flow_time;
                t += if i == 0 { (1.0 - v.progress) * full } else { full };
            }
            if t <= t_vicinity {
                let dest = network.edge(*v.route.back().unwrap()).to;
                inbound[regions.assignment[dest]] += 1;
            }
        }
    }
    let mut waiting_customers = vec![0u64; k];
    for &ci in waiting {
        waiting_customers[regions.assignment[customers[ci].origin]] += 1;
    }
    compute_region_state(&RegionStateInput {
        vehicles_in_region,
        inbound_within_vicinity: inbound,
        waiting_customers,
    })
}

fn dispatch_congestion_aware(
    network: &RoadNetwork,
    regions: &Regions,
    state: &RegionState,
    vehicles: &mut [Vehicle],
    loads: &EdgeLoad,
    delays: &[f64],
    config: &SimConfig,
) -> Result<(), SimError> {
    let residual: Vec<u64> = network
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| (edge.capacity - loads.0[e]).max(0.0).floor() as u64)
        .collect();
    let instance = RebalanceInstance {
        anchors: regions.anchors.clone(),
        excess: state.v_excess.clone(),
        desired: state.v_desired.clone(),
        residual_capacity: residual,
        slack_cost: None,
    };
    let sol = rebalance::solve_realtime_rebalance(&instance, network, delays)?;
    let flow: Vec<f64> = sol.flow.iter().map(|&f| f as f64).collect();
    let paths = rebalance::flow_decompose(network, &flow)?;
    // Vehicles follow the decomposed flow paths, so the per-edge residual
    // bounds the LP enforced carry over to the actual routes instead of
    // every dispatched vehicle herding onto the same shortest path.
    for (nodes, mult) in &paths.paths {
        let start = nodes[0];
        let region = regions.assignment[start];
        let lp_edges = path_edges(network, nodes);
        let mut sent = 0u64;
        for v in vehicles.iter_mut() {
            if sent >= *mult {
                break;
            }
            if v.status != VehicleStatus::Idle
                || !v.route.is_empty()
                || regions.assignment[v.node] != region
            {
                continue;
            }
            let mut route = Vec::new();
            if v.node != start {
                match routing::astar_route(network, loads, &config.bpr, v.node, start) {
                    Ok((path, _)) => route = path_edges(network, &path),
                    Err(routing::RoutingError::NoRoute { .. }) => continue,
                    Err(e) => return Err(e.into()),
                }
            }
            route.extend_from_slice(&lp_edges);
            if route.is_empty() {
                continue; // degenerate single-node path
            }
            v.route = route.into();
            v.progress = 0.0;
            v.status = VehicleStatus::Rebalancing;
            sent += 1;
        }
    }
    Ok(())
}

/// A point-to-point rebalancing move: vehicles sent from one region's pool
/// toward another region's anchor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DispatchMove {
    pub from_region: usize,
    pub to_region: usize,
    pub vehicles: u64,
}

/// The baseline rebalancer: matches region surpluses to deficits by a
/// transportation program over anchor-to-anchor free-flow times, ignoring
/// road capacities entirely.
pub fn baseline_p2p_rebalance(
    state: &RegionState,
    regions: &Regions,
    network: &RoadNetwork,
) -> Result<Vec<DispatchMove>, SimError> {
    let k = regions.len();
    let surplus: Vec<i64> = (0..k)
        .map(|i| (state.v_excess[i] - state.v_desired[i]).max(0))
        .collect();
    let deficit: Vec<i64> = (0..k)
        .map(|i| (state.v_desired[i] - state.v_excess[i]).max(0))
        .collect();
    let sources: Vec<usize> = (0..k).filter(|&i| surplus[i] > 0).collect();
    let sinks: Vec<usize> = (0..k).filter(|&i| deficit[i] > 0).collect();
    if sources.is_empty() || sinks.is_empty() {
        return Ok(Vec::new());
    }

    // Anchor-to-anchor free-flow times.
    let mut cost = vec![vec![0.0; sinks.len()]; sources.len()];
    for (b, &j) in sinks.iter().enumerate() {
        let times = routing::free_flow_times_to(network, regions.anchors[j]);
        for (a, &i) in sources.iter().enumerate() {
            let t = times[regions.anchors[i]];
            cost[a][b] = if t.is_finite() { t } else { 1e12 };
        }
    }

    // Transportation LP balanced with a zero-cost dummy row or column when
    // totals differ (possible when the fleet is outnumbered by waiting
    // customers and every desired count is zero). The padded matrix stays
    // totally unimodular, so the vertex is integral.
    let total_surplus: i64 = sources.iter().map(|&i| surplus[i]).sum();
    let total_deficit: i64 = sinks.iter().map(|&j| deficit[j]).sum();
    let na = sources.len() + usize::from(total_deficit > total_surplus);
    let nb = sinks.len() + usize::from(total_surplus > total_deficit);
    let nv = na * nb;
    let var = |a: usize, b: usize| a * nb + b;
    let mut lp = LinearProgram::new(nv);
    for a in 0..sources.len() {
        for b in 0..sinks.len() {
            lp.set_objective(var(a, b), cost[a][b]);
        }
    }
    for a in 0..na {
        let supply = if a < sources.len() {
            surplus[sources[a]]
        } else {
            total_deficit - total_surplus
        };
        let coeffs = (0..nb).map(|b| (var(a, b), 1.0)).collect();
        lp.add_constraint(coeffs, Relation::Eq, supply as f64);
    }
    for b in 0..nb {
        let demand = if b < sinks.len() {
            deficit[sinks[b]]
        } else {
            total_surplus - total_deficit
        };
        let coeffs = (0..na).map(|a| (var(a, b), 1.0)).collect();
        lp.add_constraint(coeffs, Relation::Eq, demand as f64);
    }
    let sol = solve_lp(&lp, Tolerances::default());
    if sol.status != LpStatus::Optimal {
        return Err(SimError::Numerical(sol.status));
    }
    let mut moves = Vec::new();
    for (a, &i) in sources.iter().enumerate() {
        for (b, &j) in sinks.iter().enumerate() {
            let v = sol.x[var(a, b)];
            let r = v.round();
            debug_assert!((v - r).abs() < 1e-6, "transportation vertex not integral");
            if r >= 0.5 {
                moves.push(DispatchMove {
                    from_region: i,
                    to_region: j,
                    vehicles: r as u64,
                });
            }
        }
    }
    Ok(moves)
}

fn dispatch_moves(
    network: &RoadNetwork,
    regions: &Regions,
    moves: &[DispatchMove],
    vehicles: &mut [Vehicle],
    loads: &EdgeLoad,
    config: &SimConfig,
) -> Result<(), SimError> {
    for mv in moves {
        let target = regions.anchors[mv.to_region];
        dispatch_idle(
            network,
            regions,
            mv.from_region,
            target,
            mv.vehicles,
            vehicles,
            loads,
            config,
        )?;
    }
    Ok(())
}

/// Sends up to `count` idle vehicles (lowest id first) from `region`
/// toward `target`, routed by A* over the current loads.
#[allow(clippy::too_many_arguments)]
fn dispatch_idle(
    network: &RoadNetwork,
    regions: &Regions,
    region: usize,
    target: NodeIdx,
    count: u64,
    vehicles: &mut [Vehicle],
    loads: &EdgeLoad,
    config: &SimConfig,
) -> Result<(), SimError> {
    let mut sent = 0u64;
    for v in vehicles.iter_mut() {
        if sent >= count {
            break;
        }
        if v.status != VehicleStatus::Idle
            || !v.route.is_empty()
            || regions.assignment[v.node] != region
        {
            continue;
        }
        if v.node == target {
            continue; // already there; nothing to move
        }
        match routing::astar_route(network, loads, &config.bpr, v.node, target) {
            Ok((path, _)) => {
                v.route = path_edges(network, &path).into();
                v.progress = 0.0;
                v.status = VehicleStatus::Rebalancing;
                sent += 1;
            }
            Err(routing::RoutingError::NoRoute { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

/// Runs every config on identical inputs and returns the outputs in order.
pub fn compare(
    network: &RoadNetwork,
    trips: &[Trip],
    configs: &[SimConfig],
) -> Result<Vec<RunOutput>, SimError> {
    configs.iter().map(|c| run(network, trips, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(n: usize, cap: f64) -> RoadNetwork {
        crate::netgraph::tests::grid(n, cap)
    }

    #[test]
    fn zero_customers_balanced_fleet() {
        let net = grid(3, 100.0);
        let config = SimConfig {
            fleet_size: 9,
            initial_positions: Some((0..9).collect()),
            num_regions: 3,
            duration: 600.0,
            ..SimConfig::default()
        };
        let out = run(&net, &[], &config).unwrap();
        assert_eq!(out.metrics.trips_completed, 0);
        assert_relative_eq!(out.metrics.mean_wait, 0.0);
    }

    #[test]
    fn single_trip_free_network() {
        // Vehicle parked at the origin: wait 0, travel equal to the
        // free-flow path time up to one step of quantization.
        let net = grid(3, 1e9);
        let trips = [Trip {
            arrival_time: 0.0,
            origin: 0,
            dest: 8,
        }];
        let config = SimConfig {
            fleet_size: 1,
            initial_positions: Some(vec![0]),
            num_regions: 1,
            rebalancer: Rebalancer::None,
            duration: 300.0,
            ..SimConfig::default()
        };
        let out = run(&net, &trips, &config).unwrap();
        assert_eq!(out.metrics.trips_completed, 1);
        assert_relative_eq!(out.metrics.mean_wait, 0.0);
        // Shortest 0 -> 8 path on the 3x3 grid: 4 edges x 10 s each.
        assert!((out.metrics.mean_travel - 40.0).abs() <= config.time_step);
        assert_relative_eq!(
            out.metrics.mean_service,
            out.metrics.mean_wait + out.metrics.mean_travel,
            epsilon = 1e-9
        );
    }

    #[test]
    fn deterministic_repeat() {
        let net = grid(4, 5.0);
        let trips: Vec<Trip> = (0..20)
            .map(|i| Trip {
                arrival_time: i as f64 * 12.0,
                origin: i % 16,
                dest: (i * 7 + 3) % 16,
            })
            .collect();
        let config = SimConfig {
            fleet_size: 6,
            num_regions: 4,
            duration: 1200.0,
            seed: 42,
            ..SimConfig::default()
        };
        let a = run(&net, &trips, &config).unwrap();
        let b = run(&net, &trips, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_unsorted_trips() {
        let net = grid(3, 5.0);
        let trips = [
            Trip {
                arrival_time: 10.0,
                origin: 0,
                dest: 8,
            },
            Trip {
                arrival_time: 5.0,
                origin: 1,
                dest: 7,
            },
        ];
        assert!(matches!(
            run(&net, &trips, &SimConfig::default()),
            Err(SimError::BadTrip { index: 1, .. })
        ));
    }

    #[test]
    fn rejects_misaligned_period() {
        let net = grid(3, 5.0);
        let config = SimConfig {
            time_step: 7.0,
            rebalance_period: 120.0,
            ..SimConfig::default()
        };
        assert!(matches!(
            run(&net, &[], &config),
            Err(SimError::InvalidConfig(_))
        ));
    }

    #[test]
    fn regions_cover_all_nodes() {
        let net = grid(4, 5.0);
        let regions = compute_regions(&net, 4, 7);
        assert_eq!(regions.len(), 4);
        assert_eq!(regions.assignment.len(), 16);
        for (r, &anchor) in regions.anchors.iter().enumerate() {
            assert!(anchor < 16);
            // Anchors of nonempty regions belong to their own region.
            if regions.assignment.iter().any(|&a| a == r) {
                assert_eq!(regions.assignment[anchor], r);
            }
        }
    }

    fn two_region_state(excess: Vec<i64>, desired: Vec<i64>) -> RegionState {
        let v_own = excess.clone();
        RegionState {
            v_own,
            v_excess: excess,
            v_desired: desired,
        }
    }

    #[test]
    fn baseline_two_regions() {
        let net = grid(4, 5.0);
        let regions = compute_regions(&net, 2, 7);
        let state = two_region_state(vec![2, -2], vec![0, 0]);
        let moves = baseline_p2p_rebalance(&state, &regions, &net).unwrap();
        assert_eq!(
            moves,
            vec![DispatchMove {
                from_region: 0,
                to_region: 1,
                vehicles: 2
            }]
        );
    }

    #[test]
    fn baseline_balanced_is_empty() {
        let net = grid(4, 5.0);
        let regions = compute_regions(&net, 2, 7);
        let state = two_region_state(vec![1, 1], vec![1, 1]);
        assert!(baseline_p2p_rebalance(&state, &regions, &net)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn baseline_handles_unbalanced_totals() {
        let net = grid(3, 5.0);
        let regions = compute_regions(&net, 3, 11);
        // Desired counts are all zero while excesses do not cancel out, so
        // the surplus exceeds the total deficit and must be only partly spent.
        let state = two_region_state(vec![3, -1, 0], vec![0, 0, 0]);
        let moves = baseline_p2p_rebalance(&state, &regions, &net).unwrap();
        let total: u64 = moves.iter().map(|m| m.vehicles).sum();
        assert_eq!(total, 1);
        assert_eq!(moves[0].from_region, 0);
        assert_eq!(moves[0].to_region, 1);

        // And the mirror image: more deficit than surplus.
        let state = two_region_state(vec![1, -2, -1], vec![0, 0, 0]);
        let moves = baseline_p2p_rebalance(&state, &regions, &net).unwrap();
        let total: u64 = moves.iter().map(|m| m.vehicles).sum();
        assert_eq!(total, 1);
        assert_eq!(moves[0].from_region, 0);
    }

    #[test]
    fn baseline_splits_surplus() {
        let net = grid(3, 5.0);
        let regions = compute_regions(&net, 3, 11);
        let state = two_region_state(vec![2, -1, -1], vec![0, 0, 0]);
        let moves = baseline_p2p_rebalance(&state, &regions, &net).unwrap();
        let total: u64 = moves.iter().map(|m| m.vehicles).sum();
        assert_eq!(total, 2);
        assert!(moves.iter().all(|m| m.from_region == 0));
        let mut to: Vec<usize> = moves.iter().map(|m| m.to_region).collect();
        to.sort();
        assert_eq!(to, vec![1, 2]);
    }

    #[test]
    fn compare_identical_configs() {
        let net = grid(3, 5.0);
        let trips = [Trip {
            arrival_time: 0.0,
            origin: 0,
            dest: 8,
        }];
        let config = SimConfig {
            fleet_size: 2,
            num_regions: 2,
            duration: 600.0,
            ..SimConfig::default()
        };
        let outs = compare(&net, &trips, &[config.clone(), config]).unwrap();
        assert_eq!(outs[0], outs[1]);
    }

    #[test]
    fn rebalancer_moves_vehicles_toward_demand() {
        // All demand originates in the far corner region while the fleet
        // starts in the opposite corner: with rebalancing on, vehicles end
        // up spending time in the rebalancing state.
        let net = grid(4, 100.0);
        let trips: Vec<Trip> = (0..10)
            .map(|i| Trip {
                arrival_time: 130.0 + i as f64 * 60.0,
                origin: 15,
                dest: 12,
            })
            .collect();
        let config = SimConfig {
            fleet_size: 4,
            initial_positions: Some(vec![0, 0, 1, 4]),
            num_regions: 4,
            duration: 1800.0,
            rebalancer: Rebalancer::CongestionAware,
            ..SimConfig::default()
        };
        let out = run(&net, &trips, &config).unwrap();
        assert!(
            out.metrics.mean_rebalancing_vehicles > 0.0,
            "rebalancer should have dispatched vehicles"
        );
        let none = run(
            &net,
            &trips,
            &SimConfig {
                rebalancer: Rebalancer::None,
                ..config
            },
        )
        .unwrap();
        assert!(out.metrics.trips_completed >= none.metrics.trips_completed);
    }
}
