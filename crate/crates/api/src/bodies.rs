//! Response bodies. Field order is the wire order.

use fairride_core::metrics::{BinSummary, BoxplotBin, DelaySeries, RequestCounts, Window, ZonalFairness, ZonePairRow};
use fairride_core::runlog::RunHeader;
use fairride_core::{Epoch, NodeId, RequestId, Seconds, TaxiId, ZoneId};
use serde::Serialize;

pub(crate) fn to_body<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("response serializes")
}

#[derive(Serialize)]
pub struct RunsBody<'a> {
    pub format: &'static str,
    pub runs: Vec<RunEntry<'a>>,
}

#[derive(Serialize)]
pub struct RunEntry<'a> {
    pub id: &'a str,
    pub policy: fairride_core::matching::PolicyKind,
    pub seed: u64,
    pub horizon_epochs: Epoch,
    pub n_taxis: u32,
    pub epoch_length_s: Seconds,
}

#[derive(Serialize)]
pub struct RunBody<'a> {
    pub format: &'static str,
    pub id: &'a str,
    pub header: &'a RunHeader,
    pub arrivals: u64,
    pub matched: u64,
    pub unmatched: u64,
    pub pending_at_horizon: u64,
}

#[derive(Serialize)]
pub struct TaxisBody {
    pub format: &'static str,
    pub run: String,
    pub epoch: Epoch,
    pub window: Epoch,
    pub ts: Seconds,
    pub taxis: Vec<TaxiRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBody>,
}

#[derive(Serialize)]
pub struct TaxiRow {
    pub taxi_id: TaxiId,
    pub node: NodeId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub toward: Option<NodeId>,
    pub progress_s: Seconds,
    /// Interpolated along the current edge.
    pub lat: f64,
    pub lon: f64,
    pub n_onboard: u32,
    pub matches_in_window: u32,
}

#[derive(Serialize)]
pub struct PathBody {
    pub taxi_id: TaxiId,
    pub nodes: Vec<NodeId>,
    pub stops: Vec<StopRow>,
}

#[derive(Serialize)]
pub struct StopRow {
    pub request_id: RequestId,
    pub kind: &'static str,
    pub node: NodeId,
    /// Absent when the stop is not reached within the horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts: Option<Seconds>,
}

#[derive(Serialize)]
pub struct NodeRef {
    pub node: NodeId,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Serialize)]
pub struct RequestRow {
    pub request_id: RequestId,
    pub status: &'static str,
    pub pickup: NodeRef,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropoff: Option<NodeRef>,
}

#[derive(Serialize)]
pub struct RequestsBody {
    pub format: &'static str,
    pub run: String,
    pub epoch: Epoch,
    pub filter: &'static str,
    pub total: usize,
    pub offset: usize,
    pub requests: Vec<RequestRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub next_offset: Option<usize>,
}

#[derive(Serialize)]
pub struct ZoneRow {
    pub zone_id: ZoneId,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Serialize)]
pub struct FlowRow {
    pub origin: ZoneId,
    pub destination: ZoneId,
    pub incoming: u64,
    pub matched: u64,
    /// Absent when undefined, e.g. mean detour without completed rides.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

#[derive(Serialize)]
pub struct FlowsBody {
    pub format: &'static str,
    pub run: String,
    pub window: Window,
    pub metric: &'static str,
    pub zones: Vec<ZoneRow>,
    pub flows: Vec<FlowRow>,
}

#[derive(Serialize)]
pub struct ChoroplethRow {
    pub zone_id: ZoneId,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_pickup_delay_s: Option<f64>,
}

#[derive(Serialize)]
pub struct ChoroplethBody {
    pub format: &'static str,
    pub run: String,
    pub window: Window,
    pub zones: Vec<ChoroplethRow>,
}

#[derive(Serialize)]
pub struct RequestSeriesBody<'a> {
    pub format: &'static str,
    pub run: &'a str,
    pub epoch_length_s: Seconds,
    pub points: Vec<RequestCounts>,
}

#[derive(Serialize)]
pub struct DelaySeriesBody<'a> {
    pub format: &'static str,
    pub run: &'a str,
    pub epoch_length_s: Seconds,
    #[serde(flatten)]
    pub series: DelaySeries,
}

#[derive(Serialize)]
pub struct BoxplotBody<'a> {
    pub format: &'static str,
    pub run: &'a str,
    pub bin: BoxplotBin,
    pub bins: Vec<BinSummary>,
}

#[derive(Serialize)]
pub struct FairnessBody {
    pub format: &'static str,
    pub run: String,
    pub window: Window,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zonal_fairness: Option<ZonalFairness>,
    pub pairs: Vec<ZonePairRow>,
}

#[derive(Serialize)]
pub struct ErrorBody {
    pub error: String,
}
