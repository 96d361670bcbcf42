use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fairride_api::{RunData, RunRegistry};
use fairride_core::demand::{generate_synthetic, load_requests_file, FareRule, RequestStream};
use fairride_core::matching::{Constraints, ObjectiveWeights, PolicyKind};
use fairride_core::metrics::{numeric_dashboard, zonal_fairness, DashboardReport, IndexBuilder, RunIndex, Window};
use fairride_core::network::{grid_network, load_network_files, write_edges_csv, write_nodes_csv, RoadNetwork};
use fairride_core::runlog::{
    Event, EventSink, FileDigest, InputDigests, LogError, RunHeader, RunLogReader, RunLogWriter,
};
use fairride_core::simulator::{run_with_policy, Placement, RunSummary, SimConfig, SimError, Validator};
use fairride_core::zones::{grid_zones, load_zones_file, write_zones_csv, ZonePartition};
use serde::Serialize;

use crate::config::{CliError, FileConfig};
use crate::{CompareArgs, GridArgs, NetworkArgs, ReportArgs, ScenarioArgs, ServeArgs, SimulateArgs, ValidateArgs};

const COMPARE_FORMAT: &str = "fairride-compare/1";

fn require_file(path: &Path) -> Result<(), CliError> {
    match std::fs::metadata(path) {
        Ok(m) if m.is_file() => Ok(()),
        Ok(_) => Err(CliError::input(format!("{}: not a file", path.display()))),
        Err(e) => Err(CliError::input(format!("{}: {e}", path.display()))),
    }
}

fn load_net(nodes: &Path, edges: &Path) -> Result<RoadNetwork, CliError> {
    require_file(nodes)?;
    require_file(edges)?;
    load_network_files(nodes, edges)
        .map_err(|e| CliError::input(format!("network {} + {}: {e}", nodes.display(), edges.display())))
}

fn load_zones(net: &RoadNetwork, path: &Path) -> Result<ZonePartition, CliError> {
    require_file(path)?;
    load_zones_file(net, path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn digest(path: &Path) -> Result<FileDigest, CliError> {
    FileDigest::of_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn log_error(path: &Path, e: LogError) -> CliError {
    match e {
        LogError::Io(_) | LogError::Encode(_) => CliError::runtime(format!("{}: {e}", path.display())),
        _ => CliError::input(format!("{}: {e}", path.display())),
    }
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::InvalidConfig(_) | SimError::DemandOutsideHorizon { .. } | SimError::DemandNetworkMismatch { .. } => {
            CliError::input(e.to_string())
        }
        SimError::InfeasibleAssignment { .. } | SimError::Log(_) => CliError::runtime(e.to_string()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::runtime(format!("cannot write {}: {e}", path.display()))
}

fn network_paths(a: &NetworkArgs, file: &FileConfig) -> (Option<PathBuf>, Option<PathBuf>) {
    (
        a.nodes.clone().or(file.nodes.clone()),
        a.edges.clone().or(file.edges.clone()),
    )
}

struct Scenario {
    net: RoadNetwork,
    zones: Option<ZonePartition>,
    demand: RequestStream,
    config: SimConfig,
    inputs: InputDigests,
}

fn scenario(a: &ScenarioArgs, file: &FileConfig, policy: PolicyKind) -> Result<Scenario, CliError> {
    let (Some(nodes), Some(edges)) = network_paths(&a.network, file) else {
        return Err(CliError::usage("--nodes and --edges are required"));
    };
    let net = load_net(&nodes, &edges)?;
    let zones_path = a.zones.clone().or(file.zones.clone());
    let zones = zones_path.as_deref().map(|p| load_zones(&net, p)).transpose()?;

    let defaults = Constraints::default();
    let constraints = Constraints {
        capacity: a.capacity.or(file.capacity).unwrap_or(defaults.capacity),
        max_pickup_delay: a
            .max_pickup_delay
            .or(file.max_pickup_delay)
            .unwrap_or(defaults.max_pickup_delay),
        max_detour_delay: a
            .max_detour_delay
            .or(file.max_detour_delay)
            .unwrap_or(defaults.max_detour_delay),
        epoch_length: a.epoch_length.or(file.epoch_length).unwrap_or(defaults.epoch_length),
    };
    constraints.validate().map_err(CliError::usage)?;
    let base = SimConfig::default();
    let config = SimConfig {
        horizon_epochs: a.horizon.or(file.horizon).unwrap_or(base.horizon_epochs),
        n_taxis: a.taxis.or(file.taxis).unwrap_or(base.n_taxis),
        placement: Placement::Uniform,
        policy,
        constraints,
        max_group_size: a.max_group_size.or(file.max_group_size).unwrap_or(base.max_group_size),
        weights: ObjectiveWeights::for_constraints(&constraints),
        seed: a.seed.or(file.seed).unwrap_or(base.seed),
        ..base
    };

    let mut inputs = InputDigests {
        nodes: Some(digest(&nodes)?),
        edges: Some(digest(&edges)?),
        zones: zones_path.as_deref().map(digest).transpose()?,
        demand: None,
    };
    let demand_file = match (&a.demand, a.synthetic) {
        (Some(p), _) => Some(p.clone()),
        (None, true) => None,
        (None, false) => match (&file.demand, file.synthetic.unwrap_or(false)) {
            (Some(p), _) => Some(p.clone()),
            (None, true) => None,
            (None, false) => return Err(CliError::usage("give --demand <file> or --synthetic")),
        },
    };
    let demand = match demand_file {
        Some(p) => {
            require_file(&p)?;
            inputs.demand = Some(digest(&p)?);
            load_requests_file(&p, &net).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?
        }
        None => {
            let rate = a.rate.or(file.rate).unwrap_or(100.0);
            let profile = vec![rate; config.horizon_epochs as usize];
            generate_synthetic(&net, config.horizon_epochs, &profile, &FareRule::default(), config.seed)
                .map_err(|e| CliError::input(format!("synthetic demand: {e}")))?
        }
    };
    Ok(Scenario {
        net,
        zones,
        demand,
        config,
        inputs,
    })
}

/// Writes the log while indexing it for the summary line.
struct TeeSink {
    writer: RunLogWriter<File>,
    index: Option<IndexBuilder>,
}

impl EventSink for TeeSink {
    fn begin(&mut self, header: &RunHeader) -> Result<(), LogError> {
        self.index = Some(IndexBuilder::new(header.clone()));
        self.writer.begin(header)
    }

    fn append(&mut self, event: &Event) -> Result<(), LogError> {
        if let Some(index) = &mut self.index {
            index.observe(event);
        }
        self.writer.append(event)
    }

    fn flush(&mut self) -> Result<(), LogError> {
        self.writer.flush()
    }
}

fn simulate_to(s: &Scenario, out: &Path) -> Result<(RunSummary, RunIndex), CliError> {
    let writer = RunLogWriter::create(out).map_err(|e| log_error(out, e))?;
    let mut sink = TeeSink { writer, index: None };
    let policy = s.config.policy.build(s.config.weights);
    let summary = run_with_policy(
        &s.config,
        s.inputs.clone(),
        &s.net,
        &s.demand,
        policy.as_ref(),
        &mut sink,
    )
    .map_err(sim_error)?;
    sink.writer.into_inner().map_err(|e| log_error(out, e))?;
    let index = sink.index.expect("run began the log").finish();
    Ok((summary, index))
}

fn summary_line(
    policy: PolicyKind,
    seed: u64,
    s: &RunSummary,
    index: &RunIndex,
    zones: Option<&ZonePartition>,
) -> String {
    let zf = match zones {
        None => "n/a".to_string(),
        Some(z) => zonal_fairness(index, z, Window::day(index.horizon()))
            .map_or("undefined".to_string(), |f| format!("{:.6}", f.value)),
    };
    format!(
        "policy={policy} seed={seed} arrivals={} matched={} unmatched={} pending={} completed={} zonal_fairness={zf}",
        s.arrivals, s.matched, s.unmatched, s.pending_at_horizon, s.completed
    )
}

pub fn simulate(a: SimulateArgs, file: &FileConfig) -> Result<(), CliError> {
    let policy = match (a.policy, &file.policy) {
        (Some(p), _) => p,
        (None, Some(name)) => name.parse().map_err(CliError::usage)?,
        (None, None) => PolicyKind::Rpd,
    };
    let out = a
        .out
        .or(file.out.clone())
        .ok_or_else(|| CliError::usage("--out is required"))?;
    let s = scenario(&a.scenario, file, policy)?;
    let (summary, index) = simulate_to(&s, &out)?;
    println!(
        "{}",
        summary_line(policy, s.config.seed, &summary, &index, s.zones.as_ref())
    );
    Ok(())
}

#[derive(Serialize)]
struct CompareEntry {
    policy: PolicyKind,
    log: String,
    report: DashboardReport,
}

#[derive(Serialize)]
struct CompareReport {
    format: &'static str,
    runs: Vec<CompareEntry>,
}

pub fn compare(a: CompareArgs, file: &FileConfig) -> Result<(), CliError> {
    let policies = if !a.policies.is_empty() {
        a.policies
    } else if let Some(names) = &file.policies {
        names
            .iter()
            .map(|n| n.parse())
            .collect::<Result<_, _>>()
            .map_err(CliError::usage)?
    } else {
        vec![PolicyKind::Rpd, PolicyKind::Greedy]
    };
    let out_dir = a
        .out_dir
        .or(file.out_dir.clone())
        .ok_or_else(|| CliError::usage("--out-dir is required"))?;
    std::fs::create_dir_all(&out_dir).map_err(write_err(&out_dir))?;
    let mut s = scenario(&a.scenario, file, policies[0])?;
    let Some(zones) = s.zones.take() else {
        return Err(CliError::usage("--zones is required for compare"));
    };
    let mut runs = Vec::new();
    for policy in policies {
        s.config.policy = policy;
        let path = out_dir.join(format!("{policy}.log"));
        let (summary, index) = simulate_to(&s, &path)?;
        println!(
            "{}",
            summary_line(policy, s.config.seed, &summary, &index, Some(&zones))
        );
        runs.push(CompareEntry {
            policy,
            log: path.display().to_string(),
            report: numeric_dashboard(&index, &zones),
        });
    }
    let path = out_dir.join("compare.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(
        &mut w,
        &CompareReport {
            format: COMPARE_FORMAT,
            runs,
        },
    )
    .map_err(|e| CliError::runtime(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(write_err(&path))
}

/// Picks the explicit path if given, else the one the log recorded, warning
/// when the file differs from what the run used.
fn recorded_input(explicit: Option<PathBuf>, recorded: Option<&FileDigest>, flag: &str) -> Result<PathBuf, CliError> {
    let path = match (explicit, recorded) {
        (Some(p), _) => p,
        (None, Some(d)) => PathBuf::from(&d.path),
        (None, None) => {
            return Err(CliError::usage(format!(
                "--{flag} is required: the log records no {flag} file"
            )));
        }
    };
    require_file(&path)?;
    if let Some(d) = recorded {
        if !d
            .matches(&path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        {
            eprintln!("warning: {} differs from the {flag} file the run used", path.display());
        }
    }
    Ok(path)
}

fn open_log(path: &Path) -> Result<RunLogReader<io::BufReader<File>>, CliError> {
    require_file(path)?;
    RunLogReader::open(path).map_err(|e| log_error(path, e))
}

fn header_network(a: &NetworkArgs, file: &FileConfig, header: &RunHeader) -> Result<(PathBuf, PathBuf), CliError> {
    let (nodes, edges) = network_paths(a, file);
    Ok((
        recorded_input(nodes, header.inputs.nodes.as_ref(), "nodes")?,
        recorded_input(edges, header.inputs.edges.as_ref(), "edges")?,
    ))
}

pub fn report(a: ReportArgs, file: &FileConfig) -> Result<(), CliError> {
    let log = a
        .log
        .or(file.log.clone())
        .ok_or_else(|| CliError::usage("--log is required"))?;
    let reader = open_log(&log)?;
    let header = reader.header().clone();
    let (nodes, edges) = header_network(&a.network, file, &header)?;
    let net = load_net(&nodes, &edges)?;
    let zones_path = recorded_input(a.zones.or(file.zones.clone()), header.inputs.zones.as_ref(), "zones")?;
    let zones = load_zones(&net, &zones_path)?;
    let index = RunIndex::from_events(header, reader).map_err(|e| log_error(&log, e))?;
    let json = numeric_dashboard(&index, &zones).to_json();
    match a.out.or(file.out.clone()) {
        Some(path) => {
            let mut w = create(&path)?;
            w.write_all(json.as_bytes())
                .and_then(|_| w.flush())
                .map_err(write_err(&path))
        }
        None => io::stdout()
            .write_all(json.as_bytes())
            .map_err(|e| CliError::runtime(e.to_string())),
    }
}

pub fn validate(a: ValidateArgs, file: &FileConfig) -> Result<(), CliError> {
    const SHOWN: usize = 20;
    let log = a
        .log
        .or(file.log.clone())
        .ok_or_else(|| CliError::usage("--log is required"))?;
    let reader = open_log(&log)?;
    let header = reader.header().clone();
    let (nodes, edges) = header_network(&a.network, file, &header)?;
    let net = load_net(&nodes, &edges)?;
    let mut validator = Validator::new(&net, header.config.constraints);
    for event in reader {
        validator.observe(&event.map_err(|e| log_error(&log, e))?);
    }
    let report = validator.finish();
    if report.is_clean() {
        println!("{}: {} events, no violations", log.display(), report.events);
        return Ok(());
    }
    for v in report.violations.iter().take(SHOWN) {
        println!("{:?} at {}: {}", v.kind, v.ts, v.message);
    }
    if report.violations.len() > SHOWN {
        println!("... {} more", report.violations.len() - SHOWN);
    }
    Err(CliError::input(format!(
        "{}: {} violations",
        log.display(),
        report.violations.len()
    )))
}

pub fn serve(a: ServeArgs, file: &FileConfig) -> Result<(), CliError> {
    let runs = if a.runs.is_empty() {
        file.runs.clone().unwrap_or_default()
    } else {
        a.runs
    };
    if runs.is_empty() {
        return Err(CliError::usage("--runs needs at least one log"));
    }
    let registry = RunRegistry::new();
    let mut nets: HashMap<(PathBuf, PathBuf), Arc<RoadNetwork>> = HashMap::new();
    let mut partitions: BTreeMap<(PathBuf, PathBuf, PathBuf), Arc<ZonePartition>> = BTreeMap::new();
    for path in &runs {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| CliError::usage(format!("{}: no file name", path.display())))?;
        let reader = open_log(path)?;
        let header = reader.header().clone();
        let (nodes, edges) = header_network(&a.network, file, &header)?;
        let zones_path = recorded_input(
            a.zones.clone().or(file.zones.clone()),
            header.inputs.zones.as_ref(),
            "zones",
        )?;
        let key = (nodes.clone(), edges.clone());
        let net = match nets.get(&key) {
            Some(n) => n.clone(),
            None => {
                let n = Arc::new(load_net(&nodes, &edges)?);
                nets.insert(key, n.clone());
                n
            }
        };
        let zkey = (nodes, edges, zones_path.clone());
        let zones = match partitions.get(&zkey) {
            Some(z) => z.clone(),
            None => {
                let z = Arc::new(load_zones(&net, &zones_path)?);
                partitions.insert(zkey, z.clone());
                z
            }
        };
        let data = RunData::from_events(&id, header, reader, net, zones)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        registry
            .register(data)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        eprintln!("registered {id} from {}", path.display());
    }
    let host = a.host.or(file.host.clone()).unwrap_or_else(|| "127.0.0.1".to_string());
    let port = a.port.or(file.port).unwrap_or(8080);
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError::usage(format!("bad address {host}:{port}: {e}")))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::runtime(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::runtime(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::runtime(e.to_string()))?;
        println!("serving {} runs on http://{local}", registry.len());
        fairride_api::serve_listener(registry, listener)
            .await
            .map_err(|e| CliError::runtime(e.to_string()))
    })
}

pub fn generate_grid(a: GridArgs, file: &FileConfig) -> Result<(), CliError> {
    let rows = a.rows.or(file.rows).unwrap_or(10);
    let cols = a.cols.or(file.cols).unwrap_or(10);
    let cost = a.edge_cost.or(file.edge_cost).unwrap_or(60);
    let block = a.zone_block.or(file.zone_block).unwrap_or(2);
    if rows == 0 || cols == 0 || cost == 0 || block == 0 {
        return Err(CliError::usage(
            "--rows, --cols, --edge-cost and --zone-block must be positive",
        ));
    }
    let dir = a
        .out_dir
        .or(file.out_dir.clone())
        .ok_or_else(|| CliError::usage("--out-dir is required"))?;
    std::fs::create_dir_all(&dir).map_err(write_err(&dir))?;
    let net = grid_network(rows, cols, |_, _| cost);
    let zones = grid_zones(&net, cols, block);
    let csv_err = |p: &Path| {
        let p = p.to_path_buf();
        move |e: csv::Error| CliError::runtime(format!("cannot write {}: {e}", p.display()))
    };
    let nodes = dir.join("nodes.csv");
    write_nodes_csv(&net, create(&nodes)?).map_err(csv_err(&nodes))?;
    let edges = dir.join("edges.csv");
    write_edges_csv(&net, create(&edges)?).map_err(csv_err(&edges))?;
    let zpath = dir.join("zones.csv");
    write_zones_csv(&zones, create(&zpath)?).map_err(csv_err(&zpath))?;
    println!(
        "wrote {} nodes, {} edges, {} zones to {}",
        net.node_count(),
        net.edge_count(),
        zones.len(),
        dir.display()
    );
    Ok(())
}
