//! File ingestion: graph and request JSON, trip CSV in two schemas, and a
//! streaming OpenStreetMap XML parser that produces capacitated road
//! graphs.

use std::collections::HashMap;
use std::io::BufRead;

use quick_xml::events::Event;
use serde::{Deserialize, Serialize};

use crate::netgraph::{Request, RequestSet, RoadNetwork};
use crate::simulator::Trip;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("XML error at byte {offset}: {message}")]
    Xml { offset: u64, message: String },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown node id '{0}'")]
    UnknownNode(String),
    #[error("unknown schema '{0}'")]
    UnknownSchema(String),
    #[error("{bad} of {total} rows failed to parse, exceeding the error budget of {budget}")]
    ErrorBudgetExceeded { bad: usize, total: usize, budget: usize },
    #[error("OSM extract contains no usable ways")]
    EmptyExtract,
    #[error("malformed row {row}: {reason}")]
    BadRow { row: usize, reason: String },
}

// ---------------------------------------------------------------------------
// Graph and request JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct NodeJson {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeJson {
    from: String,
    to: String,
    capacity: f64,
    free_flow_time: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphJson {
    nodes: Vec<NodeJson>,
    edges: Vec<EdgeJson>,
}

pub fn load_network(json: &str) -> Result<RoadNetwork, IngestError> {
    let parsed: GraphJson = serde_json::from_str(json)?;
    let mut net = RoadNetwork::new();
    for n in &parsed.nodes {
        let pos = match (n.x, n.y) {
            (Some(x), Some(y)) => Some((x, y)),
            _ => None,
        };
        net.add_node(&n.id, pos);
    }
    for e in &parsed.edges {
        let from = net
            .node_index(&e.from)
            .ok_or_else(|| IngestError::UnknownNode(e.from.clone()))?;
        let to = net
            .node_index(&e.to)
            .ok_or_else(|| IngestError::UnknownNode(e.to.clone()))?;
        net.add_edge(from, to, e.capacity, e.free_flow_time);
    }
    Ok(net)
}

pub fn save_network(network: &RoadNetwork) -> String {
    let out = GraphJson {
        nodes: network
            .nodes()
            .iter()
            .map(|n| NodeJson {
                id: n.id.clone(),
                x: n.pos.map(|p| p.0),
                y: n.pos.map(|p| p.1),
            })
            .collect(),
        edges: network
            .edges()
            .iter()
            .map(|e| EdgeJson {
                from: network.node(e.from).id.clone(),
                to: network.node(e.to).id.clone(),
                capacity: e.capacity,
                free_flow_time: e.free_flow_time,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&out).expect("graph serializes")
}

#[derive(Debug, Serialize, Deserialize)]
struct RequestJson {
    origin: String,
    dest: String,
    rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RequestsJson {
    requests: Vec<RequestJson>,
}

pub fn load_requests(json: &str, network: &RoadNetwork) -> Result<RequestSet, IngestError> {
    let parsed: RequestsJson = serde_json::from_str(json)?;
    let mut requests = Vec::new();
    for r in &parsed.requests {
        let origin = network
            .node_index(&r.origin)
            .ok_or_else(|| IngestError::UnknownNode(r.origin.clone()))?;
        let dest = network
            .node_index(&r.dest)
            .ok_or_else(|| IngestError::UnknownNode(r.dest.clone()))?;
        requests.push(Request {
            origin,
            dest,
            rate: r.rate,
        });
    }
    Ok(RequestSet::new(requests))
}

pub fn save_requests(requests: &RequestSet, network: &RoadNetwork) -> String {
    let out = RequestsJson {
        requests: requests
            .requests
            .iter()
            .map(|r| RequestJson {
                origin: network.node(r.origin).id.clone(),
                dest: network.node(r.dest).id.clone(),
                rate: r.rate,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&out).expect("requests serialize")
}

// ---------------------------------------------------------------------------
// Trip CSV
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripSchema {
    /// `arrival_time_s,origin_node,dest_node` with node ids.
    Simple,
    /// `pickup_datetime,pickup_longitude,pickup_latitude,dropoff_longitude,
    /// dropoff_latitude`; coordinates snap to the nearest network node.
    NycTaxi,
}

impl std::str::FromStr for TripSchema {
    type Err = IngestError;
    fn from_str(s: &str) -> Result<Self, IngestError> {
        match s {
            "simple" => Ok(TripSchema::Simple),
            "nyc_taxi" => Ok(TripSchema::NycTaxi),
            other => Err(IngestError::UnknownSchema(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct TripsReport {
    pub rows_total: usize,
    pub rows_kept: usize,
    pub dropped_unsnappable: usize,
    pub dropped_unparseable: usize,
}

pub struct TripLoadOptions {
    pub schema: TripSchema,
    /// Maximum snap distance in node-coordinate units (meters for
    /// OSM-derived graphs).
    pub snap_radius: f64,
    /// Unparseable rows tolerated before the load fails.
    pub error_budget: usize,
    /// Applied to taxi-schema lat/lon before snapping; when absent the
    /// coordinates are assumed to already be in node units.
    pub projection: Option<Projection>,
}

impl Default for TripLoadOptions {
    fn default() -> Self {
        Self {
            schema: TripSchema::Simple,
            snap_radius: 250.0,
            error_budget: 0,
            projection: None,
        }
    }
}

/// Loads a trip stream, sorted by arrival time. Taxi-schema arrival times
/// are seconds since the earliest pickup in the file.
pub fn load_trips_csv(
    data: &str,
    network: &RoadNetwork,
    options: &TripLoadOptions,
) -> Result<(Vec<Trip>, TripsReport), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(data.as_bytes());
    let mut report = TripsReport::default();
    let mut trips = Vec::new();
    let mut bad = 0usize;

    match options.schema {
        TripSchema::Simple => {
            for (i, record) in reader.records().enumerate() {
                report.rows_total += 1;
                let record = record?;
                let parse = || -> Option<Trip> {
                    let arrival_time: f64 = record.get(0)?.parse().ok()?;
                    let origin = network.node_index(record.get(1)?)?;
                    let dest = network.node_index(record.get(2)?)?;
                    Some(Trip {
                        arrival_time,
                        origin,
                        dest,
                    })
                };
                match parse() {
                    Some(t) => trips.push(t),
                    None => {
                        bad += 1;
                        if bad > options.error_budget {
                            return Err(IngestError::BadRow {
                                row: i + 1,
                                reason: "unparseable simple-schema row".into(),
                            });
                        }
                    }
                }
            }
        }
        TripSchema::NycTaxi => {
            struct Raw {
                t: f64,
                pickup: (f64, f64),
                dropoff: (f64, f64),
            }
            let mut raws = Vec::new();
            for record in reader.records() {
                report.rows_total += 1;
                let record = record?;
                let parse = || -> Option<Raw> {
                    let t = parse_datetime_s(record.get(0)?)?;
                    let plon: f64 = record.get(1)?.parse().ok()?;
                    let plat: f64 = record.get(2)?.parse().ok()?;
                    let dlon: f64 = record.get(3)?.parse().ok()?;
                    let dlat: f64 = record.get(4)?.parse().ok()?;
                    let project = |lon: f64, lat: f64| match &options.projection {
                        Some(p) => p.project(lat, lon),
                        None => (lon, lat),
                    };
                    Some(Raw {
                        t,
                        pickup: project(plon, plat),
                        dropoff: project(dlon, dlat),
                    })
                };
                match parse() {
                    Some(r) => raws.push(r),
                    None => bad += 1,
                }
            }
            if bad > options.error_budget {
                return Err(IngestError::ErrorBudgetExceeded {
                    bad,
                    total: report.rows_total,
                    budget: options.error_budget,
                });
            }
            let t0 = raws.iter().map(|r| r.t).fold(f64::INFINITY, f64::min);
            for r in &raws {
                let origin = snap(network, r.pickup, options.snap_radius);
                let dest = snap(network, r.dropoff, options.snap_radius);
                match (origin, dest) {
                    (Some(o), Some(d)) => trips.push(Trip {
                        arrival_time: r.t - t0,
                        origin: o,
                        dest: d,
                    }),
                    _ => report.dropped_unsnappable += 1,
                }
            }
        }
    }

    report.dropped_unparseable = bad;
    trips.sort_by(|a, b| a.arrival_time.partial_cmp(&b.arrival_time).unwrap());
    report.rows_kept = trips.len();
    Ok((trips, report))
}

fn snap(network: &RoadNetwork, point: (f64, f64), radius: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, node) in network.nodes().iter().enumerate() {
        let Some(pos) = node.pos else { continue };
        let d2 = (pos.0 - point.0).powi(2) + (pos.1 - point.1).powi(2);
        if best.map_or(true, |(_, b)| d2 < b) {
            best = Some((i, d2));
        }
    }
    best.and_then(|(i, d2)| (d2.sqrt() <= radius).then_some(i))
}

/// Parses `YYYY-MM-DD HH:MM:SS` (or with a `T` separator) to seconds on a
/// proleptic-Gregorian axis. Only differences between values matter.
fn parse_datetime_s(s: &str) -> Option<f64> {
    let s = s.trim();
    let (date, time) = s.split_once([' ', 'T'])?;
    let mut dp = date.split('-');
    let y: i64 = dp.next()?.parse().ok()?;
    let m: u32 = dp.next()?.parse().ok()?;
    let d: i64 = dp.next()?.parse().ok()?;
    if !(1..=12).contains(&m) {
        return None;
    }
    let mut tp = time.split(':');
    let hh: i64 = tp.next()?.parse().ok()?;
    let mm: i64 = tp.next()?.parse().ok()?;
    let ss: f64 = tp.next().unwrap_or("0").parse().ok()?;
    // Days-from-civil (Gregorian), era-based.
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) as i64 + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    let days = era * 146097 + doe - 719468;
    Some(days as f64 * 86400.0 + hh as f64 * 3600.0 + mm as f64 * 60.0 + ss)
}

// ---------------------------------------------------------------------------
// OSM parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct OsmNode {
    pub id: i64,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone)]
pub struct OsmWay {
    pub refs: Vec<i64>,
    pub highway: String,
    pub lanes: Option<String>,
    pub maxspeed: Option<String>,
    pub oneway: Option<String>,
}

#[derive(Debug, Default)]
pub struct OsmExtract {
    pub nodes: Vec<OsmNode>,
    pub ways: Vec<OsmWay>,
}

pub const DEFAULT_HIGHWAY_WHITELIST: &[&str] = &[
    "motorway",
    "motorway_link",
    "trunk",
    "trunk_link",
    "primary",
    "primary_link",
    "secondary",
    "secondary_link",
    "tertiary",
    "tertiary_link",
    "residential",
    "unclassified",
];

/// Streaming parse of an OSM XML extract, retaining only ways whose
/// `highway` tag is whitelisted. Memory use is bounded by the largest
/// single way, not the file size.
pub fn parse_osm(reader: impl BufRead, whitelist: &[&str]) -> Result<OsmExtract, IngestError> {
    let mut xml = quick_xml::Reader::from_reader(reader);
    let mut buf = Vec::new();
    let mut extract = OsmExtract::default();

    #[derive(Default)]
    struct WayState {
        refs: Vec<i64>,
        tags: HashMap<String, String>,
    }
    let mut way: Option<WayState> = None;

    let get_attr = |e: &quick_xml::events::BytesStart, name: &[u8]| -> Option<String> {
        e.attributes()
            .flatten()
            .find(|a| a.key.as_ref() == name)
            .and_then(|a| String::from_utf8(a.value.into_owned()).ok())
    };

    loop {
        let event = xml.read_event_into(&mut buf).map_err(|e| IngestError::Xml {
            offset: xml.buffer_position(),
            message: e.to_string(),
        })?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => match e.name().as_ref() {
                b"node" => {
                    let parse = || -> Option<OsmNode> {
                        Some(OsmNode {
                            id: get_attr(e, b"id")?.parse().ok()?,
                            lat: get_attr(e, b"lat")?.parse().ok()?,
                            lon: get_attr(e, b"lon")?.parse().ok()?,
                        })
                    };
                    if let Some(n) = parse() {
                        extract.nodes.push(n);
                    }
                }
                b"way" => way = Some(WayState::default()),
                b"nd" => {
                    if let (Some(w), Some(r)) = (way.as_mut(), get_attr(e, b"ref")) {
                        if let Ok(id) = r.parse() {
                            w.refs.push(id);
                        }
                    }
                }
                b"tag" => {
                    if let Some(w) = way.as_mut() {
                        if let (Some(k), Some(v)) = (get_attr(e, b"k"), get_attr(e, b"v")) {
                            w.tags.insert(k, v);
                        }
                    }
                }
                _ => {}
            },
            Event::End(ref e) if e.name().as_ref() == b"way" => {
                if let Some(w) = way.take() {
                    if let Some(hw) = w.tags.get("highway") {
                        if whitelist.contains(&hw.as_str()) && w.refs.len() >= 2 {
                            extract.ways.push(OsmWay {
                                refs: w.refs,
                                highway: hw.clone(),
                                lanes: w.tags.get("lanes").cloned(),
                                maxspeed: w.tags.get("maxspeed").cloned(),
                                oneway: w.tags.get("oneway").cloned(),
                            });
                        }
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    // Ways must reference parsed nodes; unresolved refs are dropped.
    let known: std::collections::HashSet<i64> = extract.nodes.iter().map(|n| n.id).collect();
    for w in &mut extract.ways {
        w.refs.retain(|r| known.contains(r));
    }
    extract.ways.retain(|w| w.refs.len() >= 2);
    Ok(extract)
}

/// Equirectangular projection about a reference point; adequate at city
/// scale (distortion below 0.1%).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Projection {
    pub lat0: f64,
    pub lon0: f64,
}

const EARTH_RADIUS_M: f64 = 6_371_000.0;

impl Projection {
    /// (lat, lon) in degrees to local planar meters (x east, y north).
    pub fn project(&self, lat: f64, lon: f64) -> (f64, f64) {
        let x = (lon - self.lon0).to_radians() * EARTH_RADIUS_M * self.lat0.to_radians().cos();
        let y = (lat - self.lat0).to_radians() * EARTH_RADIUS_M;
        (x, y)
    }
}

/// Per-highway-class fallback speed (m/s) and lane count used when tags
/// are absent or malformed.
#[derive(Debug, Clone)]
pub struct ClassDefaults {
    pub table: HashMap<String, (f64, u32)>,
}

impl Default for ClassDefaults {
    fn default() -> Self {
        let mut table = HashMap::new();
        for (class, speed_kmh, lanes) in [
            ("motorway", 100.0, 3),
            ("motorway_link", 60.0, 1),
            ("trunk", 80.0, 2),
            ("trunk_link", 50.0, 1),
            ("primary", 60.0, 2),
            ("primary_link", 40.0, 1),
            ("secondary", 50.0, 2),
            ("secondary_link", 40.0, 1),
            ("tertiary", 40.0, 2),
            ("tertiary_link", 30.0, 1),
            ("residential", 30.0, 1),
            ("unclassified", 30.0, 1),
        ] {
            table.insert(class.to_string(), (speed_kmh / 3.6, lanes));
        }
        ClassDefaults { table }
    }
}

impl ClassDefaults {
    fn for_class(&self, class: &str) -> (f64, u32) {
        self.table.get(class).copied().unwrap_or((30.0 / 3.6, 1))
    }
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct OsmReport {
    pub nodes_used: usize,
    pub segments: usize,
    pub defaulted_speed: usize,
    pub defaulted_lanes: usize,
    pub merged_parallel: usize,
}

/// Converts a parsed extract into a road network. Capacities follow
/// `capacity_scale * speed * lanes` per direction; two-way ways split
/// their lanes evenly, rounding each direction up. Parallel edges between
/// the same node pair are merged (capacities summed, fastest time kept).
pub fn osm_to_network(
    extract: &OsmExtract,
    defaults: &ClassDefaults,
    capacity_scale: f64,
) -> Result<(RoadNetwork, Projection, OsmReport), IngestError> {
    if extract.ways.is_empty() {
        return Err(IngestError::EmptyExtract);
    }
    let by_id: HashMap<i64, &OsmNode> = extract.nodes.iter().map(|n| (n.id, n)).collect();
    let mut used: Vec<i64> = extract
        .ways
        .iter()
        .flat_map(|w| w.refs.iter().copied())
        .collect();
    used.sort_unstable();
    used.dedup();
    if used.is_empty() {
        return Err(IngestError::EmptyExtract);
    }
    let lat0 = used.iter().map(|id| by_id[id].lat).sum::<f64>() / used.len() as f64;
    let lon0 = used.iter().map(|id| by_id[id].lon).sum::<f64>() / used.len() as f64;
    let projection = Projection { lat0, lon0 };

    let mut net = RoadNetwork::new();
    let mut node_idx = HashMap::new();
    for &id in &used {
        let n = by_id[&id];
        let idx = net.add_node(&id.to_string(), Some(projection.project(n.lat, n.lon)));
        node_idx.insert(id, idx);
    }

    let mut report = OsmReport {
        nodes_used: used.len(),
        ..OsmReport::default()
    };
    // (from, to) -> (capacity sum, min free-flow time)
    let mut merged: HashMap<(usize, usize), (f64, f64)> = HashMap::new();
    for way in &extract.ways {
        let (default_speed, default_lanes) = defaults.for_class(&way.highway);
        let speed = match way.maxspeed.as_deref().map(parse_maxspeed_ms) {
            Some(Some(v)) => v,
            Some(None) => {
                report.defaulted_speed += 1;
                default_speed
            }
            None => default_speed,
        };
        let lanes = match way.lanes.as_deref().map(|s| s.parse::<u32>()) {
            Some(Ok(v)) if v >= 1 => v,
            Some(_) => {
                report.defaulted_lanes += 1;
                default_lanes
            }
            None => default_lanes,
        };
        let (forward, backward) = match way.oneway.as_deref() {
            Some("yes") | Some("true") | Some("1") => (true, false),
            Some("-1") => (false, true),
            _ => (true, true),
        };
        let lanes_dir = if forward && backward {
            lanes.div_ceil(2)
        } else {
            lanes
        };
        let capacity = capacity_scale * speed * lanes_dir as f64;

        for pair in way.refs.windows(2) {
            let a = node_idx[&pair[0]];
            let b = node_idx[&pair[1]];
            if a == b {
                continue;
            }
            let pa = net.node(a).pos.unwrap();
            let pb = net.node(b).pos.unwrap();
            let length = ((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2)).sqrt();
            let time = length / speed.max(0.1);
            report.segments += 1;
            let mut insert = |from: usize, to: usize| {
                merged
                    .entry((from, to))
                    .and_modify(|(c, t)| {
                        *c += capacity;
                        *t = t.min(time);
                        report.merged_parallel += 1;
                    })
                    .or_insert((capacity, time));
            };
            if forward {
                insert(a, b);
            }
            if backward {
                insert(b, a);
            }
        }
    }
    let mut keys: Vec<(usize, usize)> = merged.keys().copied().collect();
    keys.sort_unstable();
    for (from, to) in keys {
        let (capacity, time) = merged[&(from, to)];
        net.add_edge(from, to, capacity, time.max(1e-6));
    }
    Ok((net, projection, report))
}

/// `"50"` is km/h; `"30 mph"` converts; anything else is malformed.
fn parse_maxspeed_ms(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some(v) = s.strip_suffix("mph") {
        return v.trim().parse::<f64>().ok().map(|v| v * 0.44704);
    }
    if let Some(v) = s.strip_suffix("km/h") {
        return v.trim().parse::<f64>().ok().map(|v| v / 3.6);
    }
    s.parse::<f64>().ok().map(|v| v / 3.6)
}
