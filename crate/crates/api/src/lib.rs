//! Read-only HTTP query service over registered run logs.

mod bodies;
mod registry;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::str::FromStr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use fairride_core::metrics::{BoxplotBin, Window, ZonalFairness};
use fairride_core::{Epoch, NodeId, TaxiId};

pub use bodies::*;
pub use registry::{RegistryError, RunData, RunRegistry, Snapshot};

pub const API_FORMAT: &str = "fairride-api/1";

/// Largest page of request markers returned at once.
pub const MAX_PAGE: usize = 10_000;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        json_response(self.status, to_body(&ErrorBody { error: self.message }))
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    let mut res = (status, body).into_response();
    let headers = res.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    headers.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    res
}

fn ok(body: String) -> Response {
    json_response(StatusCode::OK, body)
}

type Params = Query<HashMap<String, String>>;
type ApiResult = Result<Response, ApiError>;

fn run(registry: &RunRegistry, id: &str) -> Result<Arc<RunData>, ApiError> {
    registry
        .get(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown run {id:?}")))
}

fn parse<T: FromStr>(params: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    params
        .get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| ApiError::bad_request(format!("invalid {key}: {v:?}")))
        })
        .transpose()
}

fn epoch_param(params: &HashMap<String, String>, run: &RunData, default: Option<Epoch>) -> Result<Epoch, ApiError> {
    let epoch = match (parse::<Epoch>(params, "epoch")?, default) {
        (Some(e), _) | (None, Some(e)) => e,
        (None, None) => return Err(ApiError::bad_request("missing epoch")),
    };
    if epoch >= run.horizon() {
        return Err(ApiError::bad_request(format!(
            "epoch {epoch} outside 0..{}",
            run.horizon()
        )));
    }
    Ok(epoch)
}

fn window_len(params: &HashMap<String, String>, run: &RunData, default: Epoch) -> Result<Epoch, ApiError> {
    let w = parse::<Epoch>(params, "window")?.unwrap_or(default);
    if w == 0 || w > run.horizon() {
        return Err(ApiError::bad_request(format!(
            "window {w} outside 1..={}",
            run.horizon()
        )));
    }
    Ok(w)
}

/// `window=day` or a trailing length ending at `epoch`.
fn window_param(params: &HashMap<String, String>, run: &RunData, default_day: bool) -> Result<Window, ApiError> {
    let day = match params.get("window").map(String::as_str) {
        Some("day") => true,
        Some(_) => false,
        None => default_day,
    };
    if day {
        return Ok(Window::day(run.horizon()));
    }
    let last = run.horizon().saturating_sub(1);
    let epoch = epoch_param(params, run, default_day.then_some(last))?;
    Ok(Window::new(epoch, window_len(params, run, 1)?))
}

fn lat_lon(run: &RunData, node: NodeId) -> (f64, f64) {
    run.net.node(node).map_or((f64::NAN, f64::NAN), |n| (n.lat, n.lon))
}

fn position(run: &RunData, s: &Snapshot) -> (f64, f64) {
    let (lat, lon) = lat_lon(run, s.node);
    let Some(to) = s.toward else {
        return (lat, lon);
    };
    let (lat2, lon2) = lat_lon(run, to);
    let cost = run.net.edge_cost(s.node, to).unwrap_or(0);
    if cost == 0 {
        return (lat, lon);
    }
    let f = s.progress_s.min(cost) as f64 / cost as f64;
    (lat + f * (lat2 - lat), lon + f * (lon2 - lon))
}

async fn list_runs(State(registry): State<RunRegistry>) -> Response {
    let snapshot = registry.snapshot();
    let runs = snapshot
        .values()
        .map(|r| RunEntry {
            id: &r.id,
            policy: r.header.policy,
            seed: r.header.seed,
            horizon_epochs: r.horizon(),
            n_taxis: r.header.config.n_taxis,
            epoch_length_s: r.epoch_length(),
        })
        .collect();
    ok(to_body(&RunsBody {
        format: API_FORMAT,
        runs,
    }))
}

async fn get_run(State(registry): State<RunRegistry>, Path(id): Path<String>) -> ApiResult {
    let run = run(&registry, &id)?;
    let (mut matched, mut unmatched, mut pending) = (0, 0, 0);
    for r in &run.index.requests {
        if r.is_matched() {
            matched += 1;
        } else if r.unmatched {
            unmatched += 1;
        } else {
            pending += 1;
        }
    }
    Ok(ok(to_body(&RunBody {
        format: API_FORMAT,
        id: &run.id,
        header: &run.header,
        arrivals: run.index.requests.len() as u64,
        matched,
        unmatched,
        pending_at_horizon: pending,
    })))
}

async fn taxis(State(registry): State<RunRegistry>, Path(id): Path<String>, Query(params): Params) -> ApiResult {
    let run = run(&registry, &id)?;
    let epoch = epoch_param(&params, &run, None)?;
    let window = window_len(&params, &run, 1)?;
    let selected = parse::<u32>(&params, "taxi")?;
    if let Some(t) = selected {
        if t as usize >= run.n_taxis() {
            return Err(ApiError::bad_request(format!("taxi {t} outside 0..{}", run.n_taxis())));
        }
    }
    let taxis = (0..run.n_taxis())
        .map(|t| {
            let s = run.snapshot(epoch, t);
            let (lat, lon) = position(&run, &s);
            TaxiRow {
                taxi_id: TaxiId(t as u32),
                node: s.node,
                toward: s.toward,
                progress_s: s.progress_s,
                lat,
                lon,
                n_onboard: s.n_onboard,
                matches_in_window: run.matches_before(t, epoch, window),
            }
        })
        .collect();
    let path = selected.map(|t| taxi_path(&run, t as usize, epoch));
    Ok(ok(to_body(&TaxisBody {
        format: API_FORMAT,
        run: run.id.clone(),
        epoch,
        window,
        ts: u64::from(epoch) * run.epoch_length(),
        taxis,
        path,
    })))
}

fn taxi_path(run: &RunData, taxi: usize, epoch: Epoch) -> PathBody {
    let s = run.snapshot(epoch, taxi);
    let mut nodes = vec![s.node];
    if let Some(to) = s.toward {
        nodes.push(to);
    }
    let mut stops = Vec::new();
    for (request_id, is_pickup, node, ts) in run.remaining_stops(taxi, epoch) {
        let here = *nodes.last().expect("path starts at the taxi");
        if let Ok(leg) = run.net.shortest_path(here, node) {
            nodes.extend(leg.into_iter().skip(1));
        }
        stops.push(StopRow {
            request_id,
            kind: if is_pickup { "pickup" } else { "dropoff" },
            node,
            ts,
        });
    }
    PathBody {
        taxi_id: TaxiId(taxi as u32),
        nodes,
        stops,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Filter {
    All,
    Matched,
    Unmatched,
}

async fn requests(State(registry): State<RunRegistry>, Path(id): Path<String>, Query(params): Params) -> ApiResult {
    let run = run(&registry, &id)?;
    let epoch = epoch_param(&params, &run, None)?;
    let filter = match params.get("filter").map(String::as_str).unwrap_or("all") {
        "all" => Filter::All,
        "matched" => Filter::Matched,
        "unmatched" => Filter::Unmatched,
        other => {
            return Err(ApiError::bad_request(format!(
                "invalid filter {other:?}; expected all|matched|unmatched"
            )))
        }
    };
    let with_dropoffs = parse::<bool>(&params, "dropoffs")?.unwrap_or(false);
    let offset = parse::<usize>(&params, "offset")?.unwrap_or(0);
    let limit = parse::<usize>(&params, "limit")?.unwrap_or(MAX_PAGE);
    if limit == 0 || limit > MAX_PAGE {
        return Err(ApiError::bad_request(format!("limit {limit} outside 1..={MAX_PAGE}")));
    }
    let node_ref = |node: NodeId| {
        let (lat, lon) = lat_lon(&run, node);
        NodeRef { node, lat, lon }
    };
    let selected: Vec<_> = run
        .arrivals_at(epoch)
        .filter(|r| match filter {
            Filter::All => true,
            Filter::Matched => r.is_matched(),
            Filter::Unmatched => !r.is_matched(),
        })
        .collect();
    let total = selected.len();
    let rows = selected
        .iter()
        .skip(offset)
        .take(limit)
        .map(|r| RequestRow {
            request_id: r.id,
            status: if r.is_matched() {
                "matched"
            } else if r.unmatched {
                "unmatched"
            } else {
                "pending"
            },
            pickup: node_ref(r.pickup),
            dropoff: with_dropoffs.then(|| node_ref(r.dropoff)),
        })
        .collect();
    let end = offset.saturating_add(limit);
    Ok(ok(to_body(&RequestsBody {
        format: API_FORMAT,
        run: run.id.clone(),
        epoch,
        filter: match filter {
            Filter::All => "all",
            Filter::Matched => "matched",
            Filter::Unmatched => "unmatched",
        },
        total,
        offset,
        requests: rows,
        next_offset: (end < total).then_some(end),
    })))
}

fn zone_rows(run: &RunData) -> Vec<ZoneRow> {
    run.zones
        .zones()
        .map(|z| ZoneRow {
            zone_id: z.id,
            name: z.name.clone(),
            lat: z.centroid.lat,
            lon: z.centroid.lon,
        })
        .collect()
}

async fn flows(State(registry): State<RunRegistry>, Path(id): Path<String>, Query(params): Params) -> ApiResult {
    let run = run(&registry, &id)?;
    let window = window_param(&params, &run, false)?;
    let detour = match params.get("metric").map(String::as_str).unwrap_or("acceptance") {
        "acceptance" => false,
        "detour" => true,
        other => {
            return Err(ApiError::bad_request(format!(
                "invalid metric {other:?}; expected acceptance|detour"
            )))
        }
    };
    let flows = run
        .pair_stats(window)
        .rows()
        .into_iter()
        .map(|r| FlowRow {
            origin: r.origin,
            destination: r.destination,
            incoming: r.incoming,
            matched: r.matched,
            value: if detour { r.mean_detour_s } else { Some(r.acceptance) },
        })
        .collect();
    Ok(ok(to_body(&FlowsBody {
        format: API_FORMAT,
        run: run.id.clone(),
        window,
        metric: if detour { "detour" } else { "acceptance" },
        zones: zone_rows(&run),
        flows,
    })))
}

async fn choropleth(State(registry): State<RunRegistry>, Path(id): Path<String>, Query(params): Params) -> ApiResult {
    let run = run(&registry, &id)?;
    let window = window_param(&params, &run, false)?;
    let delays = run.zone_delays(window);
    let zones = zone_rows(&run)
        .into_iter()
        .map(|z| {
            let d = delays.get(&z.zone_id).copied();
            ChoroplethRow {
                zone_id: z.zone_id,
                name: z.name,
                lat: z.lat,
                lon: z.lon,
                count: d.map_or(0, |(_, n)| n),
                mean_pickup_delay_s: d.map(|(sum, n)| sum as f64 / n as f64),
            }
        })
        .collect();
    Ok(ok(to_body(&ChoroplethBody {
        format: API_FORMAT,
        run: run.id.clone(),
        window,
        zones,
    })))
}

async fn request_series(State(registry): State<RunRegistry>, Path(id): Path<String>) -> ApiResult {
    Ok(ok(run(&registry, &id)?.request_series.clone()))
}

async fn delay_series(State(registry): State<RunRegistry>, Path(id): Path<String>) -> ApiResult {
    Ok(ok(run(&registry, &id)?.delay_series.clone()))
}

async fn boxplots(State(registry): State<RunRegistry>, Path(id): Path<String>, Query(params): Params) -> ApiResult {
    let run = run(&registry, &id)?;
    let bin = match params.get("bin") {
        Some(v) => v.parse::<BoxplotBin>().map_err(ApiError::bad_request)?,
        None => BoxplotBin::Hour,
    };
    Ok(ok(match bin {
        BoxplotBin::Hour => run.boxplots_hour.clone(),
        BoxplotBin::Day => run.boxplots_day.clone(),
    }))
}

async fn fairness(State(registry): State<RunRegistry>, Path(id): Path<String>, Query(params): Params) -> ApiResult {
    let run = run(&registry, &id)?;
    let window = window_param(&params, &run, true)?;
    let stats = run.pair_stats(window);
    Ok(ok(to_body(&FairnessBody {
        format: API_FORMAT,
        run: run.id.clone(),
        window,
        zonal_fairness: ZonalFairness::of(&stats),
        pairs: stats.rows(),
    })))
}

/// Same bytes as the `report` command writes.
async fn dashboard(State(registry): State<RunRegistry>, Path(id): Path<String>) -> ApiResult {
    Ok(ok(run(&registry, &id)?.dashboard.clone()))
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(registry: RunRegistry) -> Router {
    Router::new()
        .route("/runs", get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/taxis", get(taxis))
        .route("/runs/{id}/requests", get(requests))
        .route("/runs/{id}/zones/flows", get(flows))
        .route("/runs/{id}/zones/choropleth", get(choropleth))
        .route("/runs/{id}/timeseries/requests", get(request_series))
        .route("/runs/{id}/timeseries/delays", get(delay_series))
        .route("/runs/{id}/timeseries/boxplots", get(boxplots))
        .route("/runs/{id}/fairness/zonal", get(fairness))
        .route("/runs/{id}/dashboard", get(dashboard))
        .fallback(fallback)
        .with_state(registry)
}

/// Serves until the listener fails.
pub async fn serve_listener(registry: RunRegistry, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(registry)).await
}

pub async fn serve(registry: RunRegistry, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_listener(registry, listener).await
}
