//! Command-line front end. Every subcommand reads its inputs, writes
//! machine-readable reports into the output directory alongside a run
//! manifest, and maps failures onto the exit-code contract:
//! 0 success, 1 domain infeasibility, 2 input error, 3 numerical error.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::crrp::{self, CrrpConfig, CrrpError, EdgeFilter, Variant};
use crate::ingest::{self, ClassDefaults, IngestError, TripLoadOptions, TripSchema};
use crate::netgraph::{self, CutEnumeration, RoadNetwork};
use crate::rebalance::{self, RebalanceError, RebalanceInstance};
use crate::routing::{self, BprParams, EdgeLoad};
use crate::simulator::{self, Rebalancer, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
enum CliError {
    Input(String),
    Infeasible(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Infeasible(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CrrpError> for CliError {
    fn from(e: CrrpError) -> Self {
        match &e {
            CrrpError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            CrrpError::Numerical(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<RebalanceError> for CliError {
    fn from(e: RebalanceError) -> Self {
        match &e {
            RebalanceError::Numerical(_) | RebalanceError::NonIntegralVertex { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<routing::RoutingError> for CliError {
    fn from(e: routing::RoutingError) -> Self {
        match &e {
            routing::RoutingError::NoRoute { .. } => CliError::Infeasible(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<simulator::SimError> for CliError {
    fn from(e: simulator::SimError) -> Self {
        match &e {
            simulator::SimError::Numerical(_) => CliError::Numerical(e.to_string()),
            simulator::SimError::Rebalance(r) => rebalance_to_cli(r),
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn rebalance_to_cli(e: &RebalanceError) -> CliError {
    match e {
        RebalanceError::Numerical(s) => CliError::Numerical(format!("LP solve failed: {s:?}")),
        RebalanceError::NonIntegralVertex { edge, value } => CliError::Numerical(format!(
            "LP vertex is not integral at variable {edge}: {value}"
        )),
        other => CliError::Input(other.to_string()),
    }
}

// ---------------------------------------------------------------------------
// Argument structure
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(name = "amod", version, about = "Congestion-aware routing and rebalancing toolkit")]
struct Cli {
    /// Directory for reports and the run manifest.
    #[arg(long, global = true, env = "AMOD_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliRebalancer {
    CongestionAware,
    BaselineP2p,
    None,
}

impl From<CliRebalancer> for Rebalancer {
    fn from(r: CliRebalancer) -> Self {
        match r {
            CliRebalancer::CongestionAware => Rebalancer::CongestionAware,
            CliRebalancer::BaselineP2p => Rebalancer::BaselineP2p,
            CliRebalancer::None => Rebalancer::None,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliVariant {
    Joint,
    CustomerOnly,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliSchema {
    Simple,
    NycTaxi,
}

impl From<CliSchema> for TripSchema {
    fn from(s: CliSchema) -> Self {
        match s {
            CliSchema::Simple => TripSchema::Simple,
            CliSchema::NycTaxi => TripSchema::NycTaxi,
        }
    }
}

#[derive(clap::Args, Debug, Clone)]
struct SimArgs {
    #[arg(long, default_value_t = 6.0)]
    time_step: f64,
    #[arg(long, default_value_t = 120.0)]
    rebalance_period: f64,
    #[arg(long)]
    t_vicinity: Option<f64>,
    #[arg(long, default_value_t = 10)]
    fleet_size: usize,
    #[arg(long, value_enum, default_value_t = CliRebalancer::CongestionAware)]
    rebalancer: CliRebalancer,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3600.0)]
    duration: f64,
    #[arg(long, default_value_t = 4)]
    num_regions: usize,
    #[arg(long, default_value_t = 1.0)]
    capacity_multiplier: f64,
}

impl SimArgs {
    fn to_config(&self, rebalancer: Rebalancer) -> SimConfig {
        SimConfig {
            time_step: self.time_step,
            rebalance_period: self.rebalance_period,
            t_vicinity: self.t_vicinity,
            fleet_size: self.fleet_size,
            free_flow_speed: 11.0,
            bpr: BprParams::default(),
            rebalancer,
            seed: self.seed,
            duration: self.duration,
            num_regions: self.num_regions,
            capacity_multiplier: self.capacity_multiplier,
            initial_positions: None,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report whether the graph's cut capacities balance everywhere.
    CheckSymmetry {
        graph: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
    /// Check the necessary cut conditions for the given demand.
    CutConditions {
        graph: PathBuf,
        requests: PathBuf,
        /// Sample this many cuts instead of exhaustive enumeration.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve the routing-and-rebalancing linear program.
    SolveCrrp {
        graph: PathBuf,
        requests: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        rho: f64,
        /// Relax capacities with penalized slack.
        #[arg(long)]
        relax: bool,
        #[arg(long)]
        slack_cost: Option<f64>,
        #[arg(long, value_enum, default_value_t = CliVariant::Joint)]
        variant: CliVariant,
    },
    /// Solve one real-time rebalancing snapshot to path assignments.
    RebalanceOnce { snapshot: PathBuf },
    /// Shortest congestion-aware route between two nodes.
    Route {
        graph: PathBuf,
        origin: String,
        dest: String,
        /// Per-edge flow loads JSON ({"loads": [...]}); zero when absent.
        #[arg(long)]
        loads: Option<PathBuf>,
    },
    /// Run the fleet simulator on a trip stream.
    Simulate {
        graph: PathBuf,
        trips: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Run the simulator once per rebalancer and compare metrics.
    Compare {
        graph: PathBuf,
        trips: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',',
              default_values_t = [CliRebalancer::CongestionAware, CliRebalancer::BaselineP2p])]
        rebalancers: Vec<CliRebalancer>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Derate directional capacities and compare travel times with and
    /// without rebalancing.
    SweepAsymmetry {
        graph: PathBuf,
        requests: PathBuf,
        /// Comma-separated capacity reduction fractions in [0, 1].
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5])]
        reductions: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        rho: f64,
        /// Restrict the derating to edges with this bearing (degrees
        /// counterclockwise from +x).
        #[arg(long)]
        bearing: Option<f64>,
        #[arg(long, default_value_t = 45.0)]
        bearing_half_width: f64,
    },
    /// Build a capacitated road graph from an OSM XML extract.
    IngestOsm {
        osm: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        capacity_scale: f64,
    },
    /// Convert a trips file to the simple schema, snapping coordinates.
    ConvertTrips {
        trips: PathBuf,
        graph: PathBuf,
        #[arg(long, value_enum, default_value_t = CliSchema::NycTaxi)]
        schema: CliSchema,
        #[arg(long, default_value_t = 250.0)]
        snap_radius: f64,
        #[arg(long, default_value_t = 0)]
        error_budget: usize,
        /// Projection sidecar JSON produced by ingest-osm.
        #[arg(long)]
        projection: Option<PathBuf>,
    },
}

// ---------------------------------------------------------------------------
// Canonical JSON
// ---------------------------------------------------------------------------

/// Canonical serialization: keys sorted (serde_json's map is ordered) and
/// every float rounded to 12 significant digits, so reruns diff cleanly.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable");
    let mut out = serde_json::to_string_pretty(&round_floats(v)).expect("serializable");
    out.push('\n');
    out
}

fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    let rounded: f64 = format!("{:.11e}", f).parse().unwrap();
                    return Value::Number(
                        serde_json::Number::from_f64(rounded).unwrap_or_else(|| 0.into()),
                    );
                }
            }
            Value::Number(n)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, round_floats(v))).collect())
        }
        other => other,
    }
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    inputs: Vec<String>,
    args: Vec<String>,
    seed: Option<u64>,
    tool_version: String,
    timestamp_unix_s: u64,
}

fn write_manifest(
    out_dir: &Path,
    subcommand: &str,
    inputs: &[&Path],
    args: &[String],
    seed: Option<u64>,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        subcommand: subcommand.to_string(),
        inputs: inputs
            .iter()
            .map(|p| p.to_string_lossy().into_owned())
            .collect(),
        args: args.to_vec(),
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp_unix_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_file(out_dir, "manifest.json", &canonical_json(&manifest))
}

fn write_file(out_dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(name), contents)?;
    Ok(())
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {}", path.display(), e)))
}

fn load_graph(path: &Path) -> Result<RoadNetwork, CliError> {
    let net = ingest::load_network(&read_file(path)?)?;
    let report = net.validate();
    if !report.is_valid() {
        return Err(CliError::Input(format!(
            "invalid graph {}: {:?}",
            path.display(),
            report.violations
        )));
    }
    Ok(net)
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Parses argv and runs the requested subcommand, returning the process
/// exit code.
pub fn cli_dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version on stdout with success status.
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, &args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn execute(cli: &Cli, args: &[String]) -> Result<(), CliError> {
    let out = &cli.out_dir;
    match &cli.command {
        Command::CheckSymmetry { graph, tolerance } => {
            let net = load_graph(graph)?;
            let (symmetric, max_imbalance) = net.is_capacity_symmetric(*tolerance);
            #[derive(Serialize)]
            struct Report {
                symmetric: bool,
                max_imbalance: f64,
                tolerance: f64,
            }
            write_file(
                out,
                "symmetry.json",
                &canonical_json(&Report {
                    symmetric,
                    max_imbalance,
                    tolerance: *tolerance,
                }),
            )?;
            write_manifest(out, "check-symmetry", &[graph], args, None)?;
            println!("symmetric={} max_imbalance={}", symmetric, max_imbalance);
            Ok(())
        }
        Command::CutConditions {
            graph,
            requests,
            samples,
            seed,
        } => {
            let net = load_graph(graph)?;
            let reqs = ingest::load_requests(&read_file(requests)?, &net)?;
            let mode = match samples {
                Some(count) => CutEnumeration::Sampled {
                    count: *count,
                    seed: *seed,
                },
                None => CutEnumeration::Exhaustive,
            };
            let report = netgraph::check_cut_conditions(&net, &reqs, mode)
                .map_err(|e| CliError::Input(e.to_string()))?;
            write_file(out, "cut_conditions.json", &canonical_json(&report))?;
            write_manifest(out, "cut-conditions", &[graph, requests], args, Some(*seed))?;
            println!("passed={} cuts_checked={}", report.passed, report.cuts_checked);
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Infeasible(
                    "a cut violates the necessary feasibility conditions".into(),
                ))
            }
        }
        Command::SolveCrrp {
            graph,
            requests,
            rho,
            relax,
            slack_cost,
            variant,
        } => {
            let net = load_graph(graph)?;
            let reqs = ingest::load_requests(&read_file(requests)?, &net)?;
            let config = CrrpConfig {
                rho: *rho,
                relax_congestion: *relax,
                slack_cost: *slack_cost,
                variant: match variant {
                    CliVariant::Joint => Variant::Joint,
                    CliVariant::CustomerOnly => Variant::CustomerOnly,
                },
            };
            match crrp::solve_crrp(&net, &reqs, &config) {
                Ok(solution) => {
                    write_file(out, "crrp_solution.json", &canonical_json(&solution))?;
                    write_manifest(out, "solve-crrp", &[graph, requests], args, None)?;
                    println!("objective={} v_min={}", solution.objective, solution.v_min);
                    Ok(())
                }
                Err(CrrpError::Infeasible { witness_cut }) => {
                    #[derive(Serialize)]
                    struct Report {
                        feasible: bool,
                        witness_cut: Option<netgraph::CutViolation>,
                    }
                    write_file(
                        out,
                        "crrp_solution.json",
                        &canonical_json(&Report {
                            feasible: false,
                            witness_cut,
                        }),
                    )?;
                    write_manifest(out, "solve-crrp", &[graph, requests], args, None)?;
                    Err(CliError::Infeasible(
                        "no congestion-free solution exists; witness cut written".into(),
                    ))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::RebalanceOnce { snapshot } => {
            let parsed: SnapshotJson = serde_json::from_str(&read_file(snapshot)?)
                .map_err(IngestError::from)?;
            let (net, instance, times) = parsed.build()?;
            let sol = rebalance::solve_realtime_rebalance(&instance, &net, &times)
                .map_err(|e| rebalance_to_cli(&e))?;
            let flow: Vec<f64> = sol.flow.iter().map(|&f| f as f64).collect();
            let paths = rebalance::flow_decompose(&net, &flow).map_err(|e| rebalance_to_cli(&e))?;
            #[derive(Serialize)]
            struct Assignment {
                path: Vec<String>,
                vehicles: u64,
            }
            let assignments: Vec<Assignment> = paths
                .paths
                .iter()
                .map(|(nodes, mult)| Assignment {
                    path: nodes.iter().map(|&v| net.node(v).id.clone()).collect(),
                    vehicles: *mult,
                })
                .collect();
            write_file(out, "assignments.json", &canonical_json(&assignments))?;
            write_manifest(out, "rebalance-once", &[snapshot], args, None)?;
            println!("assignments={} objective={}", assignments.len(), sol.objective);
            Ok(())
        }
        Command::Route {
            graph,
            origin,
            dest,
            loads,
        } => {
            let net = load_graph(graph)?;
            let o = net
                .node_index(origin)
                .ok_or_else(|| CliError::Input(format!("unknown node '{origin}'")))?;
            let d = net
                .node_index(dest)
                .ok_or_else(|| CliError::Input(format!("unknown node '{dest}'")))?;
            let loads = match loads {
                Some(path) => {
                    #[derive(serde::Deserialize)]
                    struct LoadsJson {
                        loads: Vec<f64>,
                    }
                    let parsed: LoadsJson = serde_json::from_str(&read_file(path)?)
                        .map_err(IngestError::from)?;
                    if parsed.loads.len() != net.num_edges() {
                        return Err(CliError::Input(format!(
                            "loads length {} != edge count {}",
                            parsed.loads.len(),
                            net.num_edges()
                        )));
                    }
                    EdgeLoad(parsed.loads)
                }
                None => EdgeLoad::zeros(&net),
            };
            let (path, time) = routing::astar_route(&net, &loads, &BprParams::default(), o, d)?;
            #[derive(Serialize)]
            struct Report {
                path: Vec<String>,
                predicted_time: f64,
            }
            let report = Report {
                path: path.iter().map(|&v| net.node(v).id.clone()).collect(),
                predicted_time: time,
            };
            write_file(out, "route.json", &canonical_json(&report))?;
            write_manifest(out, "route", &[graph], args, None)?;
            println!("{} time={}", report.path.join(" -> "), time);
            Ok(())
        }
        Command::Simulate { graph, trips, sim } => {
            let net = load_graph(graph)?;
            let (stream, _) =
                ingest::load_trips_csv(&read_file(trips)?, &net, &TripLoadOptions::default())?;
            let config = sim.to_config(sim.rebalancer.into());
            let run = simulator::run(&net, &stream, &config)?;
            write_file(out, "metrics.json", &canonical_json(&run.metrics))?;
            write_file(out, "trace.csv", &trace_csv(&run.trace))?;
            write_manifest(out, "simulate", &[graph, trips], args, Some(sim.seed))?;
            println!(
                "trips_completed={} mean_wait={:.2}",
                run.metrics.trips_completed, run.metrics.mean_wait
            );
            Ok(())
        }
        Command::Compare {
            graph,
            trips,
            rebalancers,
            sim,
        } => {
            let net = load_graph(graph)?;
            let (stream, _) =
                ingest::load_trips_csv(&read_file(trips)?, &net, &TripLoadOptions::default())?;
            let configs: Vec<SimConfig> = rebalancers
                .iter()
                .map(|&r| sim.to_config(r.into()))
                .collect();
            let outputs = simulator::compare(&net, &stream, &configs)?;
            #[derive(Serialize)]
            struct Entry {
                rebalancer: Rebalancer,
                metrics: simulator::SimMetrics,
                congested_edges_series: Vec<usize>,
            }
            let report: Vec<Entry> = outputs
                .iter()
                .zip(rebalancers)
                .map(|(o, &r)| Entry {
                    rebalancer: Rebalancer::from(r),
                    metrics: o.metrics.clone(),
                    congested_edges_series: o.trace.iter().map(|t| t.congested_edges).collect(),
                })
                .collect();
            write_file(out, "comparison.json", &canonical_json(&report))?;
            write_manifest(out, "compare", &[graph, trips], args, Some(sim.seed))?;
            for e in &report {
                println!(
                    "{:?}: trips={} mean_wait={:.2}",
                    e.rebalancer, e.metrics.trips_completed, e.metrics.mean_wait
                );
            }
            Ok(())
        }
        Command::SweepAsymmetry {
            graph,
            requests,
            reductions,
            rho,
            bearing,
            bearing_half_width,
        } => {
            let net = load_graph(graph)?;
            let reqs = ingest::load_requests(&read_file(requests)?, &net)?;
            let filter = match bearing {
                Some(center) => EdgeFilter::Bearing {
                    center_deg: *center,
                    half_width_deg: *bearing_half_width,
                },
                None => EdgeFilter::All,
            };
            let report = crrp::asymmetry_sweep(&net, &reqs, reductions, &filter, *rho)?;
            let mut csv = String::from(
                "reduction_pct,mean_time_with_reb,mean_time_without_reb\n",
            );
            for row in &report.rows {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    row.reduction * 100.0,
                    row.mean_time_with_rebalancing,
                    row.mean_time_without_rebalancing
                ));
            }
            write_file(out, "sweep.csv", &csv)?;
            write_file(out, "sweep.json", &canonical_json(&report))?;
            write_manifest(out, "sweep-asymmetry", &[graph, requests], args, None)?;
            Ok(())
        }
        Command::IngestOsm {
            osm,
            capacity_scale,
        } => {
            let file = std::fs::File::open(osm)
                .map_err(|e| CliError::Input(format!("{}: {}", osm.display(), e)))?;
            let extract = ingest::parse_osm(
                std::io::BufReader::new(file),
                ingest::DEFAULT_HIGHWAY_WHITELIST,
            )?;
            let (net, projection, report) =
                ingest::osm_to_network(&extract, &ClassDefaults::default(), *capacity_scale)?;
            write_file(out, "graph.json", &ingest::save_network(&net))?;
            write_file(out, "projection.json", &canonical_json(&projection))?;
            write_file(out, "ingest_report.json", &canonical_json(&report))?;
            write_manifest(out, "ingest-osm", &[osm], args, None)?;
            println!(
                "nodes={} edges={} segments={}",
                net.num_nodes(),
                net.num_edges(),
                report.segments
            );
            Ok(())
        }
        Command::ConvertTrips {
            trips,
            graph,
            schema,
            snap_radius,
            error_budget,
            projection,
        } => {
            let net = load_graph(graph)?;
            let projection = match projection {
                Some(path) => Some(
                    serde_json::from_str(&read_file(path)?).map_err(IngestError::from)?,
                ),
                None => None,
            };
            let options = TripLoadOptions {
                schema: (*schema).into(),
                snap_radius: *snap_radius,
                error_budget: *error_budget,
                projection,
            };
            let (stream, report) = ingest::load_trips_csv(&read_file(trips)?, &net, &options)?;
            let mut csv = String::from("arrival_time_s,origin_node,dest_node\n");
            for t in &stream {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    t.arrival_time,
                    net.node(t.origin).id,
                    net.node(t.dest).id
                ));
            }
            write_file(out, "trips.csv", &csv)?;
            write_file(out, "convert_report.json", &canonical_json(&report))?;
            write_manifest(out, "convert-trips", &[trips, graph], args, None)?;
            println!("kept={} dropped={}", report.rows_kept, report.dropped_unsnappable);
            Ok(())
        }
    }
}

fn trace_csv(trace: &[simulator::TraceRow]) -> String {
    let mut out =
        String::from("clock,waiting,in_progress,congested_edges,rebalancing_vehicles\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.clock, row.waiting, row.in_progress, row.congested_edges, row.rebalancing_vehicles
        ));
    }
    out
}

/// Snapshot accepted by `rebalance-once`: an inline graph plus region
/// supplies and per-edge residual capacities (edge order matches the
/// graph's edge list). Travel times default to free-flow.
#[derive(serde::Deserialize)]
struct SnapshotJson {
    graph: serde_json::Value,
    anchors: Vec<String>,
    excess: Vec<i64>,
    desired: Vec<i64>,
    residual_capacity: Vec<u64>,
    #[serde(default)]
    travel_times: Option<Vec<f64>>,
    #[serde(default)]
    slack_cost: Option<f64>,
}

impl SnapshotJson {
    fn build(&self) -> Result<(RoadNetwork, RebalanceInstance, Vec<f64>), CliError> {
        let net = ingest::load_network(&self.graph.to_string())?;
        let anchors = self
            .anchors
            .iter()
            .map(|id| {
                net.node_index(id)
                    .ok_or_else(|| CliError::Input(format!("unknown anchor '{id}'")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if self.excess.len() != anchors.len() || self.desired.len() != anchors.len() {
            return Err(CliError::Input(
                "excess/desired length must match anchors".into(),
            ));
        }
        if self.residual_capacity.len() != net.num_edges() {
            return Err(CliError::Input(format!(
                "residual_capacity length {} != edge count {}",
                self.residual_capacity.len(),
                net.num_edges()
            )));
        }
        let times = match &self.travel_times {
            Some(t) => {
                if t.len() != net.num_edges() {
                    return Err(CliError::Input("travel_times length mismatch".into()));
                }
                t.clone()
            }
            None => net.edges().iter().map(|e| e.free_flow_time).collect(),
        };
        let instance = RebalanceInstance {
            anchors,
            excess: self.excess.clone(),
            desired: self.desired.clone(),
            residual_capacity: self.residual_capacity.clone(),
            slack_cost: self.slack_cost,
        };
        Ok((net, instance, times))
    }
}
